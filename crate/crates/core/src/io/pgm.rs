//! Binary greyscale PGM (P5) frames.
//!
//! Pixels are normalized to `[0, 1]` and frames are flattened column-major,
//! so pixel `(x, y)` lands at index `x * height + y`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, Receiver};
use std::thread::JoinHandle;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

fn header_token<'a>(data: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::MalformedHeader("truncated PGM header".into()));
    }
    Ok(&data[start..*pos])
}

fn header_number(data: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = header_token(data, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::MalformedHeader(format!("bad PGM {what}")))
}

pub fn decode_pgm(data: &[u8]) -> Result<Frame> {
    let mut pos = 0;
    if header_token(data, &mut pos)? != b"P5" {
        return Err(Error::MalformedHeader("not a binary PGM (P5)".into()));
    }
    let width = header_number(data, &mut pos, "width")?;
    let height = header_number(data, &mut pos, "height")?;
    let maxval = header_number(data, &mut pos, "maxval")?;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::MalformedHeader(format!(
            "PGM {width}x{height} with maxval {maxval}"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let bytes = if maxval < 256 { 1 } else { 2 };
    let need = width * height * bytes;
    let raster = data
        .get(pos..pos + need)
        .ok_or_else(|| Error::MalformedHeader("PGM raster shorter than header says".into()))?;
    let scale = maxval as f64;
    let mut pixels = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let k = y * width + x;
            let v = if bytes == 1 {
                raster[k] as f64
            } else {
                u16::from_be_bytes([raster[2 * k], raster[2 * k + 1]]) as f64
            };
            pixels[x * height + y] = v / scale;
        }
    }
    Ok(Frame {
        width,
        height,
        pixels,
    })
}

pub fn read_pgm(path: &Path) -> Result<Frame> {
    decode_pgm(&fs::read(path)?)
}

/// 8-bit encoding of a column-major frame; values are clamped to `[0, 1]`.
pub fn encode_pgm(width: usize, height: usize, pixels: &[f64]) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(Error::dims(width * height, pixels.len()));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    for y in 0..height {
        for x in 0..width {
            let v = pixels[x * height + y];
            let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
            out.push((v * 255.0).round() as u8);
        }
    }
    Ok(out)
}

pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[f64]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_pgm(width, height, pixels)?)?;
    Ok(())
}

pub fn write_mask(path: &Path, width: usize, height: usize, mask: &[bool]) -> Result<()> {
    let px: Vec<f64> = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    write_pgm(path, width, height, &px)
}

/// `.pgm` files of a directory in lexicographic order.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::BadParams(format!(
            "no .pgm files in {}",
            dir.display()
        )));
    }
    Ok(paths)
}

/// Frames of a directory, decoded one ahead on a loader thread.
pub struct FrameSource {
    rx: Receiver<Result<Frame>>,
    handle: Option<JoinHandle<()>>,
    shape: Option<(usize, usize)>,
    count: usize,
}

impl FrameSource {
    pub fn open(dir: &Path) -> Result<Self> {
        let paths = list_frames(dir)?;
        let count = paths.len();
        let (tx, rx) = sync_channel(1);
        let handle = std::thread::spawn(move || {
            for p in paths {
                let r = read_pgm(&p).map_err(|e| match e {
                    Error::MalformedHeader(m) => {
                        Error::MalformedHeader(format!("{}: {m}", p.display()))
                    }
                    e => e,
                });
                if tx.send(r).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            rx,
            handle: Some(handle),
            shape: None,
            count,
        })
    }

    /// Number of frames in the directory.
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// `(width, height)` once the first frame has been read.
    pub fn shape(&self) -> Option<(usize, usize)> {
        self.shape
    }
}

impl Iterator for FrameSource {
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Self::Item> {
        let frame = match self.rx.recv() {
            Ok(f) => f,
            Err(_) => {
                if let Some(h) = self.handle.take() {
                    let _ = h.join();
                }
                return None;
            }
        };
        Some(frame.and_then(|f| match self.shape {
            None => {
                self.shape = Some((f.width, f.height));
                Ok(f)
            }
            Some((w, h)) if (w, h) == (f.width, f.height) => Ok(f),
            Some((w, h)) => Err(Error::dims(
                format!("{w}x{h} frame"),
                format!("{}x{}", f.width, f.height),
            )),
        }))
    }
}
