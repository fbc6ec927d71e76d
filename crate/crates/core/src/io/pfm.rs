use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::depth::{DepthMap, DepthRange};
use crate::error::{Error, Result};
use crate::image::ImageGrid;

/// Writes a little-endian PFM (`Pf` for one channel, `PF` for three).
/// Scanlines are stored bottom-to-top as the format prescribes.
pub fn write_pfm<W: Write>(grid: &ImageGrid, out: W) -> Result<()> {
    let magic = match grid.channels() {
        1 => "Pf",
        3 => "PF",
        c => return Err(Error::invalid(format!("PFM cannot store {c} channels"))),
    };
    let mut out = BufWriter::new(out);
    write!(out, "{magic}\n{} {}\n-1.0\n", grid.width(), grid.height())?;
    let row_len = grid.width() * grid.channels();
    for row in grid.data().chunks_exact(row_len).rev() {
        for &v in row {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_pfm<R: Read>(input: R) -> Result<ImageGrid> {
    let mut input = BufReader::new(input);
    let mut header = Vec::new();
    // Magic, dimensions and scale are three whitespace-separated tokens
    // terminated by a single whitespace byte.
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        let mut tok = String::new();
        loop {
            let mut b = [0u8; 1];
            if input.read(&mut b)? == 0 {
                return Err(Error::format("PFM", "truncated header"));
            }
            header.push(b[0]);
            if b[0].is_ascii_whitespace() {
                if !tok.is_empty() {
                    break;
                }
            } else {
                tok.push(b[0] as char);
            }
            if header.len() > 256 {
                return Err(Error::format("PFM", "header too long"));
            }
        }
        tokens.push(tok);
    }
    let channels = match tokens[0].as_str() {
        "Pf" => 1,
        "PF" => 3,
        m => return Err(Error::format("PFM", format!("bad magic `{m}`"))),
    };
    let parse = |t: &str, what: &str| {
        t.parse::<usize>()
            .map_err(|_| Error::format("PFM", format!("bad {what} `{t}`")))
    };
    let width = parse(&tokens[1], "width")?;
    let height = parse(&tokens[2], "height")?;
    let scale: f32 = tokens[3]
        .parse()
        .map_err(|_| Error::format("PFM", format!("bad scale `{}`", tokens[3])))?;
    if scale == 0.0 {
        return Err(Error::format("PFM", "scale must be non-zero"));
    }
    let little = scale < 0.0;
    let mut bytes = vec![0u8; width * height * channels * 4];
    input
        .read_exact(&mut bytes)
        .map_err(|_| Error::format("PFM", "truncated pixel data"))?;
    let row_len = width * channels;
    let mut data = vec![0.0; width * height * channels];
    for (r, row) in bytes.chunks_exact(row_len * 4).enumerate() {
        let y = height - 1 - r;
        for (k, b) in row.chunks_exact(4).enumerate() {
            let b = [b[0], b[1], b[2], b[3]];
            let v = if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            };
            data[y * row_len + k] = v as f64;
        }
    }
    // Leftover bytes would mean the header lied about the size.
    if input.fill_buf()?.first().is_some() {
        return Err(Error::format("PFM", "trailing data after pixels"));
    }
    ImageGrid::new(width, height, channels, data)
}

/// Writes a depth map with invalid pixels stored as `0.0`.
pub fn write_depth_pfm(depth: &DepthMap, path: &Path) -> Result<()> {
    write_pfm(depth.grid(), File::create(path)?)
}

/// Relative slack for samples just outside the range after rounding to
/// single precision.
const F32_SLACK: f64 = 1e-6;

/// Reads a depth map; non-positive samples become invalid pixels. Samples
/// within single-precision rounding of the range are clamped into it.
pub fn read_depth_pfm(path: &Path, range: DepthRange) -> Result<DepthMap> {
    let grid = read_pfm(File::open(path)?)?;
    grid.require_single_channel("depth PFM")?;
    let (w, h) = grid.dims();
    let values = grid
        .into_data()
        .into_iter()
        .map(|z| {
            let (lo, hi) = (range.min * (1.0 - F32_SLACK), range.max * (1.0 + F32_SLACK));
            if z > 0.0 && z >= lo && z <= hi {
                range.clamp(z)
            } else {
                z
            }
        })
        .collect();
    DepthMap::from_values(w, h, values, range)
}
