//! Pinhole camera model, back-projection and depth reprojection between views.

use nalgebra::{Isometry3, Matrix3, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::depth::DepthMap;
use crate::error::{Error, Result};

/// Pinhole intrinsics plus a rigid camera-from-world pose.
///
/// Camera frame: right-handed, +Z into the scene, +x right, +y down, with
/// pixel centers at integer image coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraRecord", into = "CameraRecord")]
pub struct CameraModel {
    width: usize,
    height: usize,
    focal: f64,
    principal: (f64, f64),
    pose: Isometry3<f64>,
}

impl CameraModel {
    pub fn new(
        width: usize,
        height: usize,
        focal: f64,
        principal: (f64, f64),
        pose: Isometry3<f64>,
    ) -> Result<Self> {
        if !(focal > 0.0 && focal.is_finite()) {
            return Err(Error::invalid(format!("focal length must be positive, got {focal}")));
        }
        if width < 2 || height < 2 {
            return Err(Error::invalid("camera image must be at least 2x2"));
        }
        let (cx, cy) = principal;
        if !(cx >= 0.0 && cx <= (width - 1) as f64 && cy >= 0.0 && cy <= (height - 1) as f64) {
            return Err(Error::invalid(format!(
                "principal point ({cx}, {cy}) outside the {width}x{height} image"
            )));
        }
        if !pose.translation.vector.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("pose translation is not finite"));
        }
        Ok(CameraModel {
            width,
            height,
            focal,
            principal,
            pose,
        })
    }

    /// Camera at the world origin looking down +Z.
    pub fn identity(width: usize, height: usize, focal: f64, principal: (f64, f64)) -> Result<Self> {
        Self::new(width, height, focal, principal, Isometry3::identity())
    }

    /// Builds the pose from an explicit rotation matrix, which must be
    /// orthonormal with determinant +1 to within 1e-9.
    pub fn from_rotation_matrix(
        width: usize,
        height: usize,
        focal: f64,
        principal: (f64, f64),
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.amax() > 1e-9 || (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("rotation is not a proper orthonormal matrix"));
        }
        let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(rotation));
        Self::new(
            width,
            height,
            focal,
            principal,
            Isometry3::from_parts(Translation3::from(translation), rot),
        )
    }

    /// Camera whose center sits at `eye` looking at `target`, with image +y
    /// roughly along `down`.
    pub fn look_at(
        width: usize,
        height: usize,
        focal: f64,
        principal: (f64, f64),
        eye: Point3<f64>,
        target: Point3<f64>,
        down: Vector3<f64>,
    ) -> Result<Self> {
        let z = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::invalid("look_at eye and target coincide"))?;
        let x = down
            .cross(&z)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::invalid("look_at down vector parallel to view"))?;
        let y = z.cross(&x);
        // Rows of the camera-from-world rotation are the camera axes in world.
        let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let t = -(r * eye.coords);
        Self::from_rotation_matrix(width, height, focal, principal, r, t)
    }

    pub fn with_pose(&self, pose: Isometry3<f64>) -> Result<Self> {
        Self::new(self.width, self.height, self.focal, self.principal, pose)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn focal(&self) -> f64 {
        self.focal
    }

    pub fn principal(&self) -> (f64, f64) {
        self.principal
    }

    /// Camera-from-world transform.
    pub fn pose(&self) -> &Isometry3<f64> {
        &self.pose
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Point3<f64> {
        self.pose.inverse_transform_point(&Point3::origin())
    }

    /// Un-normalized ray `((x - x0)/f, (y - y0)/f, 1)` through pixel `(x, y)`
    /// in the camera frame; scaling it by depth gives the 3D point.
    #[inline]
    pub fn ray(&self, x: f64, y: f64) -> Vector3<f64> {
        Vector3::new(
            (x - self.principal.0) / self.focal,
            (y - self.principal.1) / self.focal,
            1.0,
        )
    }

    #[inline]
    pub fn backproject_pixel(&self, x: f64, y: f64, depth: f64) -> Point3<f64> {
        Point3::from(self.ray(x, y) * depth)
    }

    /// Sub-pixel image coordinates of a camera-frame point, or `None` behind
    /// the camera.
    #[inline]
    pub fn project(&self, p: &Point3<f64>) -> Option<(f64, f64)> {
        (p.z > 0.0).then(|| {
            (
                self.focal * p.x / p.z + self.principal.0,
                self.focal * p.y / p.z + self.principal.1,
            )
        })
    }

    /// Nearest pixel index for sub-pixel coordinates, `None` out of bounds.
    #[inline]
    pub fn pixel_index(&self, u: f64, v: f64) -> Option<usize> {
        let (x, y) = (u.round(), v.round());
        (x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64)
            .then(|| y as usize * self.width + x as usize)
    }

    /// Transform taking points in this camera's frame into `other`'s frame.
    pub fn relative_to(&self, other: &CameraModel) -> Isometry3<f64> {
        other.pose * self.pose.inverse()
    }

    fn require_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: dims,
            });
        }
        Ok(())
    }
}

/// On-disk form of a camera: intrinsics plus pose as a unit quaternion
/// `[w, x, y, z]` and translation in meters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRecord {
    pub width: usize,
    pub height: usize,
    pub f: f64,
    pub x0: f64,
    pub y0: f64,
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
}

impl TryFrom<CameraRecord> for CameraModel {
    type Error = Error;

    fn try_from(r: CameraRecord) -> Result<Self> {
        let [w, x, y, z] = r.rotation;
        let q = nalgebra::Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if !((norm - 1.0).abs() <= 1e-6) {
            return Err(Error::invalid(format!(
                "pose quaternion must have unit norm, got {norm}"
            )));
        }
        let pose = Isometry3::from_parts(
            Translation3::new(r.translation[0], r.translation[1], r.translation[2]),
            UnitQuaternion::from_quaternion(q),
        );
        CameraModel::new(r.width, r.height, r.f, (r.x0, r.y0), pose)
    }
}

impl From<CameraModel> for CameraRecord {
    fn from(c: CameraModel) -> Self {
        let q = c.pose.rotation.quaternion();
        let t = c.pose.translation.vector;
        CameraRecord {
            width: c.width,
            height: c.height,
            f: c.focal,
            x0: c.principal.0,
            y0: c.principal.1,
            rotation: [q.w, q.i, q.j, q.k],
            translation: [t.x, t.y, t.z],
        }
    }
}

/// One camera-frame point per valid pixel, in pixel-index order.
pub fn backproject(depth: &DepthMap, cam: &CameraModel) -> Result<PointCloud> {
    cam.require_dims(depth.dims())?;
    let w = depth.width();
    let mut cloud = PointCloud::default();
    for (i, z) in depth.iter_valid() {
        let p = cam.backproject_pixel((i % w) as f64, (i / w) as f64, z);
        cloud.push(p, None, Some(i));
    }
    Ok(cloud)
}

/// Warps a depth map from the source view into the destination view.
///
/// Each valid source pixel is lifted to 3D, moved by the relative pose and
/// splatted to the nearest destination pixel. The smallest depth wins; ties
/// go to the smaller source pixel index. Depths outside the source range
/// after warping are dropped.
pub fn reproject(
    depth_src: &DepthMap,
    cam_src: &CameraModel,
    cam_dst: &CameraModel,
) -> Result<DepthMap> {
    cam_src.require_dims(depth_src.dims())?;
    cam_dst.require_dims(depth_src.dims())?;
    let rel = cam_src.relative_to(cam_dst);
    if !rel.translation.vector.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("relative pose is not finite"));
    }
    let range = depth_src.range();
    let w = depth_src.width();
    let mut out: Vec<Option<f64>> = vec![None; depth_src.len()];
    for (i, z) in depth_src.iter_valid() {
        let p_src = cam_src.backproject_pixel((i % w) as f64, (i / w) as f64, z);
        let p_dst = rel.transform_point(&p_src);
        let Some((u, v)) = cam_dst.project(&p_dst) else {
            continue;
        };
        let Some(j) = cam_dst.pixel_index(u, v) else {
            continue;
        };
        if !range.contains(p_dst.z) {
            continue;
        }
        // Source pixels are visited in index order, so a strict comparison
        // leaves ties with the earliest source.
        match out[j] {
            Some(existing) if existing <= p_dst.z => {}
            _ => out[j] = Some(p_dst.z),
        }
    }
    DepthMap::from_options(depth_src.width(), depth_src.height(), &out, range)
}
