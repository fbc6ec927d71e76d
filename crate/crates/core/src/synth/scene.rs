use nalgebra::{Point3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::CameraModel;
use crate::depth::DepthRange;
use crate::eval::Plane;
use crate::error::{Error, Result};
use crate::polarization::{ZenithSolver, DEFAULT_ETA};

/// Analytic primitive in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    /// Infinite plane.
    Plane { point: [f64; 3], normal: [f64; 3] },
    /// Rectangle spanned by two orthogonal unit axes around `center`.
    Rect {
        center: [f64; 3],
        u_axis: [f64; 3],
        v_axis: [f64; 3],
        half_u: f64,
        half_v: f64,
    },
    Sphere { center: [f64; 3], radius: f64 },
    /// Box with half side lengths along its local axes; `rotation` is a unit
    /// quaternion `[w, x, y, z]` taking local to world.
    Cuboid {
        center: [f64; 3],
        half_extents: [f64; 3],
        #[serde(default = "identity_quat")]
        rotation: [f64; 4],
    },
}

fn identity_quat() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Albedo {
    Constant { value: f64 },
    /// 3D checkerboard with cubic cells of side `size` meters.
    Checker { size: f64, a: f64, b: f64 },
}

impl Albedo {
    pub fn at(&self, p: &Point3<f64>) -> f64 {
        match *self {
            Albedo::Constant { value } => value,
            Albedo::Checker { size, a, b } => {
                let cell = (p.x / size).floor() + (p.y / size).floor() + (p.z / size).floor();
                if (cell as i64).rem_euclid(2) == 0 {
                    a
                } else {
                    b
                }
            }
        }
    }
}

/// Blinn-Phong coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub albedo: Albedo,
    #[serde(default = "default_ambient")]
    pub k_a: f64,
    pub k_d: f64,
    #[serde(default)]
    pub k_s: f64,
    #[serde(default = "default_shininess")]
    pub shininess: f64,
}

fn default_ambient() -> f64 {
    0.1
}

fn default_shininess() -> f64 {
    32.0
}

impl Material {
    pub fn diffuse(albedo: Albedo) -> Self {
        Material {
            albedo,
            k_a: default_ambient(),
            k_d: 0.8,
            k_s: 0.0,
            shininess: default_shininess(),
        }
    }

    pub fn glossy(albedo: Albedo, k_s: f64, shininess: f64) -> Self {
        Material {
            k_s,
            shininess,
            ..Self::diffuse(albedo)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Surface {
    #[serde(default)]
    pub name: String,
    pub shape: Shape,
    pub material: Material,
}

/// Point light with radiance `radiance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Light {
    pub position: [f64; 3],
    pub radiance: f64,
}

/// A renderable world: surfaces, one point light, refractive index and the
/// declared depth range every rendered depth must fall in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticScene {
    pub surfaces: Vec<Surface>,
    pub light: Light,
    #[serde(default = "default_eta")]
    pub eta: f64,
    pub range: DepthRange,
}

fn default_eta() -> f64 {
    DEFAULT_ETA
}

impl SyntheticScene {
    /// Supporting plane of each flat surface in the frame of `cam`, indexed
    /// like `surfaces`.
    pub fn planes_in(&self, cam: &CameraModel) -> Result<Vec<Option<Plane>>> {
        let pose = cam.pose();
        self.surfaces
            .iter()
            .map(|s| {
                s.shape
                    .supporting_plane()
                    .map(|(p, n)| Plane::new(pose.rotation * n, pose * p))
                    .transpose()
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.surfaces.is_empty() {
            return Err(Error::invalid("scene needs at least one surface"));
        }
        ZenithSolver::new(self.eta)?;
        DepthRange::new(self.range.min, self.range.max)?;
        for s in &self.surfaces {
            s.shape.validate()?;
        }
        Ok(())
    }
}

pub(crate) fn v3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

pub(crate) fn quat(q: [f64; 4]) -> Result<UnitQuaternion<f64>> {
    let q = nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]);
    if (q.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::invalid("rotation quaternion must have unit norm"));
    }
    Ok(UnitQuaternion::from_quaternion(q))
}

/// Ray parameter and outward geometric normal at the nearest hit.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Hit {
    pub t: f64,
    pub normal: Vector3<f64>,
}

const T_MIN: f64 = 1e-9;

impl Shape {
    fn validate(&self) -> Result<()> {
        match self {
            Shape::Plane { normal, .. } => {
                if v3(*normal).norm() < 1e-12 {
                    return Err(Error::invalid("plane normal must be non-zero"));
                }
            }
            Shape::Rect {
                u_axis,
                v_axis,
                half_u,
                half_v,
                ..
            } => {
                let (u, v) = (v3(*u_axis), v3(*v_axis));
                if (u.norm() - 1.0).abs() > 1e-9 || (v.norm() - 1.0).abs() > 1e-9 || u.dot(&v).abs() > 1e-9 {
                    return Err(Error::invalid("rect axes must be orthonormal"));
                }
                if !(*half_u > 0.0 && *half_v > 0.0) {
                    return Err(Error::invalid("rect half sizes must be positive"));
                }
            }
            Shape::Sphere { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::invalid("sphere radius must be positive"));
                }
            }
            Shape::Cuboid {
                half_extents,
                rotation,
                ..
            } => {
                if half_extents.iter().any(|&h| !(h > 0.0)) {
                    return Err(Error::invalid("cuboid half extents must be positive"));
                }
                quat(*rotation)?;
            }
        }
        Ok(())
    }

    /// Point and unit normal of the plane containing a flat shape; `None`
    /// for curved or multi-faceted shapes.
    pub fn supporting_plane(&self) -> Option<(Point3<f64>, Vector3<f64>)> {
        match self {
            Shape::Plane { point, normal } => Some((Point3::from(v3(*point)), v3(*normal).normalize())),
            Shape::Rect {
                center,
                u_axis,
                v_axis,
                ..
            } => Some((Point3::from(v3(*center)), v3(*u_axis).cross(&v3(*v_axis)).normalize())),
            Shape::Sphere { .. } | Shape::Cuboid { .. } => None,
        }
    }

    /// Nearest intersection with `t > 0` along `origin + t·dir`.
    pub(crate) fn intersect(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        match self {
            Shape::Plane { point, normal } => {
                let n = v3(*normal).normalize();
                let denom = dir.dot(&n);
                if denom.abs() < 1e-15 {
                    return None;
                }
                let t = (Point3::from(v3(*point)) - origin).dot(&n) / denom;
                (t > T_MIN).then_some(Hit { t, normal: n })
            }
            Shape::Rect {
                center,
                u_axis,
                v_axis,
                half_u,
                half_v,
            } => {
                let (c, u, v) = (Point3::from(v3(*center)), v3(*u_axis), v3(*v_axis));
                let n = u.cross(&v);
                let denom = dir.dot(&n);
                if denom.abs() < 1e-15 {
                    return None;
                }
                let t = (c - origin).dot(&n) / denom;
                if t <= T_MIN {
                    return None;
                }
                let d = origin + dir * t - c;
                (d.dot(&u).abs() <= *half_u && d.dot(&v).abs() <= *half_v)
                    .then_some(Hit { t, normal: n })
            }
            Shape::Sphere { center, radius } => {
                let oc = origin - Point3::from(v3(*center));
                let a = dir.norm_squared();
                let b = oc.dot(dir);
                let c = oc.norm_squared() - radius * radius;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let t = [(-b - sq) / a, (-b + sq) / a]
                    .into_iter()
                    .find(|&t| t > T_MIN)?;
                let p = origin + dir * t;
                Some(Hit {
                    t,
                    normal: (p - Point3::from(v3(*center))) / *radius,
                })
            }
            Shape::Cuboid {
                center,
                half_extents,
                rotation,
            } => {
                let rot = quat(*rotation).ok()?;
                let o = rot.inverse_transform_vector(&(origin - Point3::from(v3(*center))));
                let d = rot.inverse_transform_vector(dir);
                let (mut t_near, mut t_far) = (f64::NEG_INFINITY, f64::INFINITY);
                let (mut axis_near, mut axis_far) = (0, 0);
                for k in 0..3 {
                    let h = half_extents[k];
                    if d[k].abs() < 1e-15 {
                        if o[k].abs() > h {
                            return None;
                        }
                        continue;
                    }
                    let (mut t0, mut t1) = ((-h - o[k]) / d[k], (h - o[k]) / d[k]);
                    if t0 > t1 {
                        std::mem::swap(&mut t0, &mut t1);
                    }
                    if t0 > t_near {
                        t_near = t0;
                        axis_near = k;
                    }
                    if t1 < t_far {
                        t_far = t1;
                        axis_far = k;
                    }
                }
                if t_near > t_far {
                    return None;
                }
                let (t, axis) = if t_near > T_MIN {
                    (t_near, axis_near)
                } else if t_far > T_MIN {
                    (t_far, axis_far)
                } else {
                    return None;
                };
                let p = o + d * t;
                let mut local = Vector3::zeros();
                local[axis] = p[axis].signum();
                Some(Hit {
                    t,
                    normal: rot.transform_vector(&local),
                })
            }
        }
    }
}
