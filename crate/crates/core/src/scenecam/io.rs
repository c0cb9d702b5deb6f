//! PPM (P6), PFM (`Pf`, grey) and ASCII PLY readers and writers.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Vector3;

use super::image::{DepthImage, RgbImage};
use super::ScenecamError;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ScenecamError + '_ {
    move |source| ScenecamError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> ScenecamError {
    ScenecamError::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn write_ppm(img: &RgbImage, path: &Path) -> Result<(), ScenecamError> {
    fs::write(path, encode_ppm(img)).map_err(io_err(path))
}

/// Reads whitespace-separated header tokens, skipping `#` comments.
fn header_tokens<R: BufRead>(r: &mut R, n: usize) -> std::io::Result<Vec<String>> {
    let mut tokens = Vec::new();
    let mut tok = String::new();
    let mut byte = [0u8; 1];
    while tokens.len() < n {
        if r.read(&mut byte)? == 0 {
            break;
        }
        match byte[0] {
            b'#' if tok.is_empty() => {
                let mut skip = Vec::new();
                r.read_until(b'\n', &mut skip)?;
            }
            c if c.is_ascii_whitespace() => {
                if !tok.is_empty() {
                    tokens.push(std::mem::take(&mut tok));
                }
            }
            c => tok.push(c as char),
        }
    }
    Ok(tokens)
}

pub fn read_ppm(path: &Path) -> Result<RgbImage, ScenecamError> {
    let mut r = BufReader::new(fs::File::open(path).map_err(io_err(path))?);
    let h = header_tokens(&mut r, 4).map_err(io_err(path))?;
    if h.len() < 4 || h[0] != "P6" {
        return Err(format_err(path, "not a binary PPM (P6)"));
    }
    let parse = |s: &str| {
        s.parse::<u32>()
            .map_err(|_| format_err(path, format!("bad header value {s:?}")))
    };
    let (width, height, maxval) = (parse(&h[1])?, parse(&h[2])?, parse(&h[3])?);
    if maxval != 255 {
        return Err(format_err(path, format!("unsupported maxval {maxval}")));
    }
    let mut data = vec![0u8; width as usize * height as usize * 3];
    r.read_exact(&mut data).map_err(io_err(path))?;
    Ok(RgbImage { width, height, data })
}

/// Little-endian greyscale PFM. Rows are stored bottom-up, per the format.
pub fn encode_pfm(depth: &DepthImage) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", depth.width, depth.height).into_bytes();
    let w = depth.width as usize;
    for row in depth.data.chunks_exact(w.max(1)).rev() {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_pfm(depth: &DepthImage, path: &Path) -> Result<(), ScenecamError> {
    fs::write(path, encode_pfm(depth)).map_err(io_err(path))
}

pub fn read_pfm(path: &Path) -> Result<DepthImage, ScenecamError> {
    let mut r = BufReader::new(fs::File::open(path).map_err(io_err(path))?);
    let h = header_tokens(&mut r, 4).map_err(io_err(path))?;
    if h.len() < 4 || h[0] != "Pf" {
        return Err(format_err(path, "not a greyscale PFM (Pf)"));
    }
    let width: u32 = h[1].parse().map_err(|_| format_err(path, "bad width"))?;
    let height: u32 = h[2].parse().map_err(|_| format_err(path, "bad height"))?;
    let scale: f64 = h[3].parse().map_err(|_| format_err(path, "bad scale"))?;
    let little = scale < 0.0;
    let mut raw = vec![0u8; width as usize * height as usize * 4];
    r.read_exact(&mut raw).map_err(io_err(path))?;
    let vals: Vec<f32> = raw
        .chunks_exact(4)
        .map(|b| {
            let b = [b[0], b[1], b[2], b[3]];
            if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();
    let data = vals
        .chunks_exact(width.max(1) as usize)
        .rev()
        .flatten()
        .copied()
        .collect();
    Ok(DepthImage::from_vec(width, height, data))
}

pub fn write_ply(points: &[Vector3<f64>], path: &Path) -> Result<(), ScenecamError> {
    let f = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    let run = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        write!(
            w,
            "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
            points.len()
        )?;
        for p in points {
            writeln!(w, "{} {} {}", p.x as f32, p.y as f32, p.z as f32)?;
        }
        w.flush()
    };
    run(&mut w).map_err(io_err(path))
}

pub fn read_ply(path: &Path) -> Result<Vec<Vector3<f64>>, ScenecamError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    if lines.next() != Some("ply") {
        return Err(format_err(path, "missing ply magic"));
    }
    let mut count = None;
    for line in lines.by_ref() {
        let line = line.trim();
        if line == "end_header" {
            break;
        }
        if let Some(rest) = line.strip_prefix("format ") {
            if !rest.starts_with("ascii") {
                return Err(format_err(path, "only ascii PLY is supported"));
            }
        }
        if let Some(n) = line.strip_prefix("element vertex ") {
            count = Some(
                n.trim()
                    .parse::<usize>()
                    .map_err(|_| format_err(path, "bad vertex count"))?,
            );
        }
    }
    let count = count.ok_or_else(|| format_err(path, "no vertex element"))?;
    let mut pts = Vec::with_capacity(count);
    for (i, line) in lines.take(count).enumerate() {
        let v: Vec<f64> = line
            .split_whitespace()
            .take(3)
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| format_err(path, format!("bad vertex {i}")))?;
        if v.len() != 3 {
            return Err(format_err(path, format!("vertex {i} has {} coordinates", v.len())));
        }
        pts.push(Vector3::new(v[0], v[1], v[2]));
    }
    if pts.len() != count {
        return Err(format_err(path, "truncated vertex list"));
    }
    Ok(pts)
}
