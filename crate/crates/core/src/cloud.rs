//! Point clouds, ASCII PLY I/O and a voxel-deduplicating merge.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use nalgebra::{Isometry3, Point3, Vector3};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    /// Zero where no normal is known.
    pub normals: Vec<Vector3<f64>>,
    /// Source pixel of each point, when the cloud came from a depth map.
    pub pixels: Vec<Option<usize>>,
}

impl PointCloud {
    pub fn push(&mut self, p: Point3<f64>, normal: Option<Vector3<f64>>, pixel: Option<usize>) {
        self.points.push(p);
        self.normals.push(normal.unwrap_or_else(Vector3::zeros));
        self.pixels.push(pixel);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn transformed(&self, iso: &Isometry3<f64>) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| iso.transform_point(p)).collect(),
            normals: self.normals.iter().map(|n| iso.transform_vector(n)).collect(),
            pixels: self.pixels.clone(),
        }
    }

    pub fn write_ply<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "ply")?;
        writeln!(out, "format ascii 1.0")?;
        writeln!(out, "element vertex {}", self.len())?;
        for name in ["x", "y", "z", "nx", "ny", "nz"] {
            writeln!(out, "property float {name}")?;
        }
        writeln!(out, "end_header")?;
        for (p, n) in self.points.iter().zip(&self.normals) {
            writeln!(
                out,
                "{:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
                p.x, p.y, p.z, n.x, n.y, n.z
            )?;
        }
        Ok(())
    }

    /// Reads the `x y z nx ny nz` ASCII layout written by [`write_ply`].
    ///
    /// [`write_ply`]: PointCloud::write_ply
    pub fn read_ply<R: BufRead>(input: R) -> Result<PointCloud> {
        let mut lines = input.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::format("PLY", "unexpected end of file"))?
                .map_err(Error::from)
        };
        if next()?.trim() != "ply" {
            return Err(Error::format("PLY", "missing magic"));
        }
        if next()?.trim() != "format ascii 1.0" {
            return Err(Error::format("PLY", "only ascii 1.0 is supported"));
        }
        let mut count = None;
        let mut props = Vec::new();
        loop {
            let line = next()?;
            let mut words = line.split_whitespace();
            match words.next() {
                Some("element") => {
                    if words.next() != Some("vertex") {
                        return Err(Error::format("PLY", "only vertex elements are supported"));
                    }
                    count = words.next().and_then(|n| n.parse::<usize>().ok());
                }
                Some("property") => props.push(words.last().unwrap_or_default().to_string()),
                Some("comment") => {}
                Some("end_header") => break,
                _ => return Err(Error::format("PLY", format!("bad header line `{line}`"))),
            }
        }
        if props != ["x", "y", "z", "nx", "ny", "nz"] {
            return Err(Error::format("PLY", "expected properties x y z nx ny nz"));
        }
        let count = count.ok_or_else(|| Error::format("PLY", "missing vertex count"))?;
        let mut cloud = PointCloud::default();
        for _ in 0..count {
            let line = next()?;
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format("PLY", e.to_string()))?;
            if v.len() != 6 {
                return Err(Error::format("PLY", "vertex line needs 6 values"));
            }
            cloud.push(
                Point3::new(v[0], v[1], v[2]),
                Some(Vector3::new(v[3], v[4], v[5])),
                None,
            );
        }
        Ok(cloud)
    }
}

/// Concatenates clouds, keeping only the first point that falls in each
/// cubic voxel of side `voxel` meters. Earlier clouds win.
pub fn merge_voxel(clouds: &[PointCloud], voxel: f64) -> Result<PointCloud> {
    if !(voxel > 0.0) {
        return Err(Error::invalid("voxel size must be positive"));
    }
    let mut seen = HashSet::new();
    let mut out = PointCloud::default();
    for cloud in clouds {
        for ((p, n), px) in cloud.points.iter().zip(&cloud.normals).zip(&cloud.pixels) {
            let key = (
                (p.x / voxel).floor() as i64,
                (p.y / voxel).floor() as i64,
                (p.z / voxel).floor() as i64,
            );
            if seen.insert(key) {
                out.points.push(*p);
                out.normals.push(*n);
                out.pixels.push(*px);
            }
        }
    }
    Ok(out)
}
