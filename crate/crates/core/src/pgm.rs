//! Reading and writing 8-bit grayscale Netpbm images (PGM, `P2` and `P5`).
//!
//! Decoding errors carry the byte offset at which the problem was found.

use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::image::{Image, ImageError};

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("byte offset {offset}: not a PGM file (expected magic `P2` or `P5`)")]
    BadMagic { offset: usize },
    #[error("byte offset {offset}: truncated header, missing {field}")]
    TruncatedHeader { offset: usize, field: &'static str },
    #[error("byte offset {offset}: invalid {field} `{token}`")]
    BadHeaderValue {
        offset: usize,
        field: &'static str,
        token: String,
    },
    #[error("byte offset {offset}: unsupported maxval {maxval} (only 8-bit PGM is supported)")]
    UnsupportedMaxval { offset: usize, maxval: u32 },
    #[error("byte offset {offset}: truncated pixel data, expected {expected} samples, found {found}")]
    TruncatedPixels {
        offset: usize,
        expected: usize,
        found: usize,
    },
    #[error("byte offset {offset}: invalid sample `{token}`")]
    BadSample { offset: usize, token: String },
    #[error("byte offset {offset}: sample {value} exceeds maxval {maxval}")]
    SampleOutOfRange {
        offset: usize,
        value: u32,
        maxval: u32,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Ascii,
    Binary,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                while let Some(&b) = self.data.get(self.pos) {
                    self.pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    /// Returns the next whitespace-delimited token and its starting offset.
    fn token(&mut self) -> Option<(usize, &'a str)> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while let Some(&b) = self.data.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        // Non-UTF-8 tokens surface as a parse failure on the lossy placeholder.
        Some((start, std::str::from_utf8(&self.data[start..self.pos]).unwrap_or("\u{fffd}")))
    }

    fn header_value(&mut self, field: &'static str) -> Result<u32, PgmError> {
        let (offset, token) = self.token().ok_or(PgmError::TruncatedHeader {
            offset: self.pos,
            field,
        })?;
        token.parse::<u32>().map_err(|_| PgmError::BadHeaderValue {
            offset,
            field,
            token: token.to_owned(),
        })
    }
}

/// Decodes a PGM byte stream. Samples are rescaled to 0..=255 when maxval < 255.
pub fn decode(data: &[u8]) -> Result<Image, PgmError> {
    let format = match data.get(..2) {
        Some(b"P2") => Format::Ascii,
        Some(b"P5") => Format::Binary,
        _ => return Err(PgmError::BadMagic { offset: 0 }),
    };
    let mut cur = Cursor { data, pos: 2 };
    let width = cur.header_value("width")?;
    let height = cur.header_value("height")?;
    let maxval_offset = cur.pos;
    let maxval = cur.header_value("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(PgmError::UnsupportedMaxval {
            offset: maxval_offset,
            maxval,
        });
    }
    let (width, height) = (width as usize, height as usize);
    if width == 0 || height == 0 {
        return Err(ImageError::EmptyDimensions { width, height }.into());
    }
    let expected = width * height;
    let scale = 255.0 / f64::from(maxval);
    let mut pixels = Vec::with_capacity(expected);

    match format {
        Format::Binary => {
            // Exactly one whitespace byte separates maxval from the raster.
            let start = cur.pos + 1;
            let available = data.len().saturating_sub(start);
            if available < expected {
                return Err(PgmError::TruncatedPixels {
                    offset: data.len(),
                    expected,
                    found: available,
                });
            }
            for (i, &b) in data[start..start + expected].iter().enumerate() {
                let value = u32::from(b);
                if value > maxval {
                    return Err(PgmError::SampleOutOfRange {
                        offset: start + i,
                        value,
                        maxval,
                    });
                }
                pixels.push(f64::from(b) * scale);
            }
        }
        Format::Ascii => {
            while pixels.len() < expected {
                let (offset, token) = cur.token().ok_or(PgmError::TruncatedPixels {
                    offset: data.len(),
                    expected,
                    found: pixels.len(),
                })?;
                let value: u32 = token.parse().map_err(|_| PgmError::BadSample {
                    offset,
                    token: token.to_owned(),
                })?;
                if value > maxval {
                    return Err(PgmError::SampleOutOfRange {
                        offset,
                        value,
                        maxval,
                    });
                }
                pixels.push(f64::from(value) * scale);
            }
        }
    }
    Ok(Image::new(width, height, pixels)?)
}

pub fn read(path: impl AsRef<Path>) -> Result<Image, PgmError> {
    decode(&std::fs::read(path)?)
}

/// Encodes 8-bit samples as binary PGM (`P5`, maxval 255).
pub fn encode_gray8(width: usize, height: usize, samples: &[u8]) -> Vec<u8> {
    debug_assert_eq!(samples.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(samples);
    out
}

/// Encodes an image as binary PGM, rounding intensities to the nearest integer.
pub fn encode(img: &Image) -> Vec<u8> {
    encode_gray8(img.width(), img.height(), &img.to_gray8())
}

/// Encodes an image as ASCII PGM (`P2`).
pub fn encode_ascii(img: &Image) -> Vec<u8> {
    let mut out = format!("P2\n{} {}\n255\n", img.width(), img.height());
    for row in img.to_gray8().chunks(img.width()) {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn write(path: impl AsRef<Path>, img: &Image) -> io::Result<()> {
    let mut file = io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(&encode(img))?;
    file.flush()
}
