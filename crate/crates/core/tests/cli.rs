mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;
use tdseg::pgm;

fn tdseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdseg"))
        .args(args)
        .output()
        .expect("spawn tdseg")
}

fn write_fixture(dir: &Path, name: &str, img: &tdseg::Image) -> String {
    let path = dir.join(name);
    pgm::write(&path, img).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn segment_writes_per_level_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_fixture(tmp.path(), "halves.pgm", &two_halves(64, 50.0, 200.0));
    let out = tmp.path().join("seg");
    let o = tdseg(&["segment", "--input", &input, "--out", out.to_str().unwrap(), "--dump-levels"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for k in 0..4 {
        assert!(out.join(format!("labels_level_{k}.pgm")).exists());
        assert!(out.join(format!("level_{k}.pgm")).exists());
    }
    let csv = std::fs::read_to_string(out.join("labels_level_0.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("row,col,label"));
    assert_eq!(lines.next(), Some("0,0,1"));
    assert_eq!(csv.lines().count(), 64 * 64 + 1);
    assert!(csv.contains("\n0,63,2\n"));
    let preview = pgm::read(out.join("labels_level_3.pgm")).unwrap();
    assert_eq!((preview.width(), preview.height()), (8, 8));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("level=0 regions=2 new_seeds=0"));
}

#[test]
fn missing_input_exits_1_with_usage() {
    let o = tdseg(&["segment", "--out", "somewhere"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("--input") && err.contains("Usage"), "{err}");
}

#[test]
fn invalid_thresholds_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_fixture(tmp.path(), "c.pgm", &tdseg::Image::constant(8, 8, 1.0).unwrap());
    let o = tdseg(&["describe", "--input", &input, "--tau", "-3"]);
    assert_eq!(o.status.code(), Some(1));
    let o = tdseg(&["describe", "--input", &input, "--scale-selection", "sideways"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn truncated_pgm_exits_2_with_offset() {
    let tmp = tempfile::tempdir().unwrap();
    let mut bytes = pgm::encode(&two_halves(16, 10.0, 20.0));
    let full = bytes.len();
    bytes.truncate(full - 40);
    let path = tmp.path().join("cut.pgm");
    std::fs::write(&path, &bytes).unwrap();
    let out = tmp.path().join("o");
    let o = tdseg(&["segment", "--input", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(&format!("byte offset {}", full - 40)), "{err}");
    assert!(!out.exists(), "no output on failure");
}

#[test]
fn unreadable_input_exits_2() {
    let o = tdseg(&["describe", "--input", "/definitely/not/here.pgm"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_kb_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_fixture(tmp.path(), "sq.pgm", &bright_square());
    let kb = tmp.path().join("kb.json");
    std::fs::write(
        &kb,
        r#"{"stories":[{"id":"s","templates":[{"word":"a","intensity_range":[0,1],"size_fraction_range":[0,1],"required_relations":[["above","nobody"]]}]}]}"#,
    )
    .unwrap();
    let o = tdseg(&["annotate", "--input", &input, "--kb", kb.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("required_relations[0]"));
}

#[test]
fn annotate_prints_json() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_fixture(tmp.path(), "sq.pgm", &bright_square());
    let kb = tmp.path().join("kb.json");
    std::fs::write(&kb, TEACHING_KB).unwrap();
    let o = tdseg(&["annotate", "--input", &input, "--kb", kb.to_str().unwrap(), "--theta", "0.5"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["story"], "bright-square-scene");
    let words: Vec<_> = v["objects"].as_array().unwrap().iter().map(|o| o["word"].as_str().unwrap()).collect();
    assert_eq!(words, ["background", "bright-object"]);
}

#[test]
fn describe_emits_registry_json() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_fixture(tmp.path(), "dot.pgm", &bright_dot());
    let o = tdseg(&["describe", "--input", &input]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let levels = v["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 4);
    let news: Vec<_> = levels
        .iter()
        .flat_map(|l| l["records"].as_array().unwrap())
        .filter(|r| r["parent"] == "new")
        .collect();
    assert_eq!(news.len(), 1);
    assert_eq!(news[0]["level"], 1);
}

#[test]
fn profile_prints_csv_then_selected_scale() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_fixture(tmp.path(), "cb.pgm", &block_checkerboard(64, 8));
    let out = tmp.path().join("prof");
    let o = tdseg(&["profile", "--input", &input, "--stop-threshold", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<_> = stdout.lines().collect();
    assert_eq!(lines[0], "level,width,height,density_bits");
    assert_eq!(lines[1], "0,64,64,0.614369");
    assert_eq!(lines[5], "4,4,4,0.000000");
    assert_eq!(*lines.last().unwrap(), "selected_scale=2");
    let file = std::fs::read_to_string(out.join("profile.csv")).unwrap();
    assert_eq!(file.lines().count(), 8);
}

#[test]
fn pyramid_dumps_levels_into_out_dir_only() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_fixture(tmp.path(), "in.pgm", &random_image(3, 40, 30));
    let out = tmp.path().join("pyr");
    let o = tdseg(&["pyramid", "--input", &input, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let mut names: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    // 40x30 -> 20x15 -> 10x8 (80 <= 100).
    assert_eq!(names, ["level_0.pgm", "level_1.pgm", "level_2.pgm"]);
    let top = pgm::read(out.join("level_2.pgm")).unwrap();
    assert_eq!((top.width(), top.height()), (10, 8));
    let mut siblings: Vec<_> = std::fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    siblings.sort();
    assert_eq!(siblings, ["in.pgm", "pyr"]);
}

#[test]
fn config_file_is_honoured_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_fixture(tmp.path(), "in.pgm", &random_image(9, 64, 64));
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "stop_threshold = 1\nscale-selection = fixed\n").unwrap();
    let o = tdseg(&["profile", "--input", &input, "--config", cfg.to_str().unwrap()]);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1 + 7 + 1);
    let o = tdseg(&["profile", "--input", &input, "--config", cfg.to_str().unwrap(), "--stop-threshold", "100"]);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1 + 4 + 1);

    std::fs::write(&cfg, "nonsense = 1\n").unwrap();
    let o = tdseg(&["profile", "--input", &input, "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reruns_overwrite_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_fixture(tmp.path(), "in.pgm", &random_image(21, 48, 40));
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();
    assert!(tdseg(&["describe", "--input", &input, "--out", out]).status.success());
    let first = std::fs::read(Path::new(out).join("registry.json")).unwrap();
    assert!(tdseg(&["describe", "--input", &input, "--out", out]).status.success());
    assert_eq!(first, std::fs::read(Path::new(out).join("registry.json")).unwrap());
}
