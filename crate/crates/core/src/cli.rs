//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid arguments or config, 2 unreadable or
//! malformed input image, 3 malformed knowledge base, 4 failure writing output.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{ConfigError, ConfigFile, ScaleSelection, SegmentationConfig};
use crate::density::{density_curve, select_working_scale};
use crate::image::Image;
use crate::knowledge::{annotate, load_knowledge_base_file, KbError, DEFAULT_THETA};
use crate::pgm::{self, PgmError};
use crate::pipeline::{run_pipeline, SegmentationResult};
use crate::pyramid::Pyramid;
use crate::segment::LabelMap;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: PgmError },
    #[error("{path}: {source}")]
    KnowledgeBase { path: PathBuf, source: KbError },
    #[error("{path}: {source}")]
    Output { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Image { .. } => 2,
            CliError::KnowledgeBase { .. } => 3,
            CliError::Output { .. } => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "tdseg", version, about = "Top-down coarse-to-fine grayscale segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write every pyramid level as PGM.
    Pyramid {
        #[command(flatten)]
        common: Common,
        /// Directory for level_<k>.pgm.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the per-level information density as CSV, then the selected scale.
    Profile {
        #[command(flatten)]
        common: Common,
        /// Also write the CSV to <out>/profile.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Segment and write per-level label maps (PGM preview and exact CSV).
    Segment {
        #[command(flatten)]
        common: Common,
        /// Directory for labels_level_<k>.pgm and labels_level_<k>.csv.
        #[arg(long)]
        out: PathBuf,
        /// Also write the pyramid level images consulted at each level.
        #[arg(long)]
        dump_levels: bool,
    },
    /// Emit the object registry as JSON.
    Describe {
        #[command(flatten)]
        common: Common,
        /// Write <out>/registry.json instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Annotate level-0 objects against a knowledge base.
    Annotate {
        #[command(flatten)]
        common: Common,
        /// Knowledge base JSON document.
        #[arg(long)]
        kb: PathBuf,
        /// Context score an object needs to keep its word [default: 0.5].
        #[arg(long)]
        theta: Option<f64>,
        /// Write <out>/annotation.json instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Input PGM image (P2 or P5).
    #[arg(long)]
    input: PathBuf,
    /// Plain-text `key = value` config file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Region-growing tolerance at the top level [default: 15].
    #[arg(long)]
    delta: Option<f64>,
    /// Refinement tolerance at finer levels [default: 25].
    #[arg(long)]
    tau: Option<f64>,
    /// Refinement iterations per level [default: 10].
    #[arg(long)]
    max_refine_iters: Option<usize>,
    /// Stop the pyramid at the first level with at most this many pixels [default: 100].
    #[arg(long)]
    stop_threshold: Option<usize>,
    /// Top level choice: `fixed` (pyramid top) or `density` [default: fixed].
    #[arg(long)]
    scale_selection: Option<ScaleSelection>,
    /// Density drop that marks the working scale [default: 0.8].
    #[arg(long)]
    drop_ratio: Option<f64>,
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub segmentation: SegmentationConfig,
    pub theta: f64,
}

impl Common {
    fn resolve(&self, theta_flag: Option<f64>) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                ConfigFile::parse(&text)?
            }
            None => ConfigFile::default(),
        };
        let d = SegmentationConfig::default();
        let segmentation = SegmentationConfig {
            delta: self.delta.or(file.delta).unwrap_or(d.delta),
            tau: self.tau.or(file.tau).unwrap_or(d.tau),
            max_refine_iters: self
                .max_refine_iters
                .or(file.max_refine_iters)
                .unwrap_or(d.max_refine_iters),
            stop_threshold: self
                .stop_threshold
                .or(file.stop_threshold)
                .unwrap_or(d.stop_threshold),
            drop_ratio: self.drop_ratio.or(file.drop_ratio).unwrap_or(d.drop_ratio),
            scale_selection: self
                .scale_selection
                .or(file.scale_selection)
                .unwrap_or(d.scale_selection),
        };
        segmentation.validate()?;
        let theta = theta_flag.or(file.theta).unwrap_or(DEFAULT_THETA);
        if !(0.0..=1.0).contains(&theta) {
            return Err(CliError::Usage(format!("theta must be in [0, 1], got {theta}")));
        }
        if self.input.as_os_str().is_empty() {
            return Err(CliError::Usage("--input must not be empty".into()));
        }
        Ok(RunConfig {
            input: self.input.clone(),
            segmentation,
            theta,
        })
    }
}

fn load_image(path: &Path) -> Result<Image, CliError> {
    pgm::read(path).map_err(|source| CliError::Image {
        path: path.to_owned(),
        source,
    })
}

fn write_file(path: PathBuf, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(&path, bytes).map_err(|source| CliError::Output { path, source })
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Output {
        path: dir.to_owned(),
        source,
    })
}

fn stdout_err(source: io::Error) -> CliError {
    CliError::Output {
        path: PathBuf::from("<stdout>"),
        source,
    }
}

/// `level,width,height,density_bits` rows with six decimals.
pub fn profile_csv(pyramid: &Pyramid) -> String {
    let curve = density_curve(pyramid);
    let mut out = String::from("level,width,height,density_bits\n");
    for (i, (lvl, d)) in pyramid.levels().iter().zip(curve.values()).enumerate() {
        let _ = writeln!(out, "{i},{},{},{d:.6}", lvl.width(), lvl.height());
    }
    out
}

/// `row,col,label` rows in raster order.
pub fn labels_csv(lm: &LabelMap) -> String {
    let mut out = String::with_capacity(lm.labels().len() * 12 + 16);
    out.push_str("row,col,label\n");
    for r in 0..lm.height() {
        for c in 0..lm.width() {
            let _ = writeln!(out, "{r},{c},{}", lm.get(r, c));
        }
    }
    out
}

/// Label map preview as PGM, labels taken modulo 256.
pub fn labels_pgm(lm: &LabelMap) -> Vec<u8> {
    let samples: Vec<u8> = lm.labels().iter().map(|&l| (l % 256) as u8).collect();
    pgm::encode_gray8(lm.width(), lm.height(), &samples)
}

fn segment(cfg: &RunConfig) -> Result<(Image, SegmentationResult), CliError> {
    let img = load_image(&cfg.input)?;
    let result = run_pipeline(&img, &cfg.segmentation)?;
    Ok((img, result))
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            write!(stdout, "{e}").map_err(stdout_err)?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string())),
    };

    match cli.command {
        Command::Pyramid { common, out } => {
            let cfg = common.resolve(None)?;
            let img = load_image(&cfg.input)?;
            let pyramid = Pyramid::build(&img, cfg.segmentation.stop_threshold);
            ensure_dir(&out)?;
            for (i, lvl) in pyramid.levels().iter().enumerate() {
                write_file(out.join(format!("level_{i}.pgm")), &pgm::encode(lvl))?;
            }
            writeln!(stdout, "levels={}", pyramid.len()).map_err(stdout_err)?;
        }
        Command::Profile { common, out } => {
            let cfg = common.resolve(None)?;
            let img = load_image(&cfg.input)?;
            let pyramid = Pyramid::build(&img, cfg.segmentation.stop_threshold);
            let csv = profile_csv(&pyramid);
            let selected =
                select_working_scale(&density_curve(&pyramid), cfg.segmentation.drop_ratio);
            if let Some(out) = out {
                ensure_dir(&out)?;
                write_file(out.join("profile.csv"), csv.as_bytes())?;
            }
            write!(stdout, "{csv}").map_err(stdout_err)?;
            writeln!(stdout, "selected_scale={selected}").map_err(stdout_err)?;
        }
        Command::Segment {
            common,
            out,
            dump_levels,
        } => {
            let cfg = common.resolve(None)?;
            let (img, result) = segment(&cfg)?;
            ensure_dir(&out)?;
            let pyramid = dump_levels.then(|| Pyramid::build(&img, cfg.segmentation.stop_threshold));
            for lvl in &result.levels {
                let k = lvl.level;
                write_file(out.join(format!("labels_level_{k}.pgm")), &labels_pgm(&lvl.labels))?;
                write_file(
                    out.join(format!("labels_level_{k}.csv")),
                    labels_csv(&lvl.labels).as_bytes(),
                )?;
                if let Some(p) = &pyramid {
                    write_file(out.join(format!("level_{k}.pgm")), &pgm::encode(p.level(k)))?;
                }
                writeln!(
                    stdout,
                    "level={k} regions={} new_seeds={} refine_iterations={}",
                    lvl.means.len(),
                    lvl.new_seeds.len(),
                    lvl.refine_iterations
                )
                .map_err(stdout_err)?;
            }
        }
        Command::Describe { common, out } => {
            let cfg = common.resolve(None)?;
            let (_, result) = segment(&cfg)?;
            let json = result.registry.to_json() + "\n";
            match out {
                Some(out) => {
                    ensure_dir(&out)?;
                    write_file(out.join("registry.json"), json.as_bytes())?;
                }
                None => stdout.write_all(json.as_bytes()).map_err(stdout_err)?,
            }
        }
        Command::Annotate {
            common,
            kb,
            theta,
            out,
        } => {
            let cfg = common.resolve(theta)?;
            let knowledge = load_knowledge_base_file(&kb).map_err(|source| {
                CliError::KnowledgeBase {
                    path: kb.clone(),
                    source,
                }
            })?;
            let (_, result) = segment(&cfg)?;
            let json = annotate(&result.registry, &knowledge, cfg.theta).to_json() + "\n";
            match out {
                Some(out) => {
                    ensure_dir(&out)?;
                    write_file(out.join("annotation.json"), json.as_bytes())?;
                }
                None => stdout.write_all(json.as_bytes()).map_err(stdout_err)?,
            }
        }
    }
    Ok(())
}
