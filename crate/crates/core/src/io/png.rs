use std::f64::consts::TAU;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use image::{GrayImage, ImageBuffer, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageGrid;
use crate::polarization::{PolarFrame, Reflection};

pub const LABEL_INVALID: u8 = 0;
pub const LABEL_DIFFUSE: u8 = 128;
pub const LABEL_SPECULAR: u8 = 255;

const SUFFIXES: [&str; 4] = ["_p000.png", "_p045.png", "_p090.png", "_p135.png"];

/// Path of polarizer channel `k` (0..4) for a frame stem.
pub fn channel_path(stem: &Path, k: usize) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(SUFFIXES[k]);
    PathBuf::from(s)
}

fn sidecar_path(stem: &Path) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push("_polar.toml");
    PathBuf::from(s)
}

/// Metadata stored next to the channel PNGs: 16-bit code `c` decodes to
/// radiance `c / 65535 * radiance_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSidecar {
    /// Always `linear16`.
    pub encoding: String,
    pub radiance_scale: f64,
}

const ENCODING: &str = "linear16";

impl FrameSidecar {
    fn parse(text: &str) -> Result<Self> {
        let side: FrameSidecar =
            toml::from_str(text).map_err(|e| Error::format("sidecar", e.message().to_string()))?;
        if side.encoding != ENCODING {
            return Err(Error::format(
                "sidecar",
                format!("unsupported encoding `{}`", side.encoding),
            ));
        }
        if !(side.radiance_scale > 0.0 && side.radiance_scale.is_finite()) {
            return Err(Error::format("sidecar", "radiance_scale must be positive"));
        }
        Ok(side)
    }
}

/// Writes `<stem>_p000.png` … `<stem>_p135.png` plus `<stem>_polar.toml`.
/// The radiance scale is the frame's peak value, so the full 16-bit range
/// is used.
pub fn write_polar_frame(frame: &PolarFrame, stem: &Path) -> Result<FrameSidecar> {
    let peak = frame
        .channels()
        .iter()
        .flat_map(|c| c.data().iter().copied())
        .fold(0.0f64, f64::max);
    let sidecar = FrameSidecar {
        encoding: ENCODING.to_string(),
        radiance_scale: if peak > 0.0 { peak } else { 1.0 },
    };
    let (w, h) = frame.dims();
    for (k, c) in frame.channels().iter().enumerate() {
        let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
            let v = c.get(x as usize, y as usize) / sidecar.radiance_scale;
            Luma([(v.clamp(0.0, 1.0) * 65535.0).round() as u16])
        });
        img.save(channel_path(stem, k))?;
    }
    let text = toml::to_string(&sidecar).map_err(|e| Error::format("sidecar", e.to_string()))?;
    fs::write(sidecar_path(stem), text)?;
    Ok(sidecar)
}

/// Reads the four channel PNGs and the sidecar written by
/// [`write_polar_frame`].
pub fn read_polar_frame(stem: &Path) -> Result<PolarFrame> {
    let side = sidecar_path(stem);
    let text = fs::read_to_string(&side).map_err(|e| {
        io::Error::new(e.kind(), format!("cannot read `{}`: {e}", side.display()))
    })?;
    let sidecar = FrameSidecar::parse(&text)?;
    let mut grids = Vec::with_capacity(4);
    for k in 0..4 {
        let path = channel_path(stem, k);
        if !path.exists() {
            return Err(io::Error::new(
                io::ErrorKind::NotFound,
                format!(
                    "missing polarizer channel `{}` (expected <stem>_p000.png, <stem>_p045.png, <stem>_p090.png, <stem>_p135.png)",
                    path.display()
                ),
            )
            .into());
        }
        let img = image::open(&path)?.into_luma16();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let data = img
            .pixels()
            .map(|p| p.0[0] as f64 / 65535.0 * sidecar.radiance_scale)
            .collect();
        grids.push(ImageGrid::new(w, h, 1, data)?);
    }
    let grids: [ImageGrid; 4] = grids.try_into().expect("four channels");
    PolarFrame::new(grids)
}

pub fn write_u8_png(path: &Path, width: usize, height: usize, codes: &[u8]) -> Result<()> {
    let img = GrayImage::from_raw(width as u32, height as u32, codes.to_vec())
        .ok_or_else(|| Error::invalid("code buffer does not match image size"))?;
    img.save(path)?;
    Ok(())
}

/// Reflection labels as gray levels: 0 invalid, 128 diffuse, 255 specular.
pub fn write_labels_png(
    path: &Path,
    width: usize,
    height: usize,
    labels: &[Reflection],
    valid: &[bool],
) -> Result<()> {
    let codes: Vec<u8> = labels
        .iter()
        .zip(valid)
        .map(|(l, &ok)| match (ok, l) {
            (false, _) => LABEL_INVALID,
            (true, Reflection::Diffuse) => LABEL_DIFFUSE,
            (true, Reflection::Specular) => LABEL_SPECULAR,
        })
        .collect();
    write_u8_png(path, width, height, &codes)
}

/// Azimuth as hue on a color wheel (0 → red, 2π/3 → green, 4π/3 → blue);
/// invalid pixels are black.
pub fn write_azimuth_wheel(path: &Path, azimuth: &ImageGrid, valid: &[bool]) -> Result<()> {
    let (w, h) = azimuth.dims();
    let img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let i = y as usize * w + x as usize;
        if !valid[i] {
            return Rgb([0, 0, 0]);
        }
        Rgb(hue_to_rgb(azimuth.at(i) / TAU))
    });
    img.save(path)?;
    Ok(())
}

fn hue_to_rgb(hue: f64) -> [u8; 3] {
    let h = hue.rem_euclid(1.0) * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let q = |v: f64| (v * 255.0).round() as u8;
    [q(r), q(g), q(b)]
}
