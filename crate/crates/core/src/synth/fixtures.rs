//! Named scenes with camera sequences, shared by the tests, the acceptance
//! suite and the `render`/`pipeline` subcommands.

use nalgebra::{Point3, Vector3};

use crate::camera::CameraModel;
use crate::depth::DepthRange;
use crate::error::{Error, Result};
use crate::polarization::DEFAULT_ETA;

use super::scene::{Albedo, Light, Material, Shape, Surface, SyntheticScene};

pub const FIXTURE_NAMES: [&str; 6] = ["plane", "two-plane", "two-wall", "sphere", "box", "room"];

/// A scene plus the keyframe cameras that observe it, in capture order.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub scene: SyntheticScene,
    pub cameras: Vec<CameraModel>,
}

/// Baseline between consecutive keyframes, in meters.
const BASELINE: [f64; 3] = [0.08, -0.03, 0.05];

pub fn fixture(name: &str, width: usize, height: usize) -> Result<Fixture> {
    let (scene, eye, target) = match name {
        "plane" => plane(),
        "two-plane" => two_plane(),
        "two-wall" => two_wall(),
        "sphere" => sphere(),
        "box" => cuboid(),
        "room" => room(),
        other => {
            return Err(Error::invalid(format!(
                "unknown fixture `{other}` (expected one of {})",
                FIXTURE_NAMES.join(", ")
            )))
        }
    };
    Ok(Fixture {
        name: name.to_string(),
        scene,
        cameras: keyframes(width, height, eye, target)?,
    })
}

pub fn keyframes(
    width: usize,
    height: usize,
    eye: Point3<f64>,
    target: Point3<f64>,
) -> Result<Vec<CameraModel>> {
    let f = 1.2 * width as f64;
    let principal = ((width - 1) as f64 / 2.0, (height - 1) as f64 / 2.0);
    let second = eye + Vector3::from(BASELINE);
    [eye, second]
        .into_iter()
        .map(|e| CameraModel::look_at(width, height, f, principal, e, target, Vector3::y()))
        .collect()
}

fn checker(size: f64) -> Albedo {
    Albedo::Checker {
        size,
        a: 0.35,
        b: 0.75,
    }
}

fn surface(name: &str, shape: Shape, material: Material) -> Surface {
    Surface {
        name: name.to_string(),
        shape,
        material,
    }
}

/// Rectangle through `center` with outward normal `normal`; the v axis is
/// the component of `up` orthogonal to the normal.
fn rect(center: [f64; 3], normal: [f64; 3], up: [f64; 3], half_u: f64, half_v: f64) -> Shape {
    let n = Vector3::from(normal).normalize();
    let up = Vector3::from(up);
    let v = (up - n * n.dot(&up)).normalize();
    let u = v.cross(&n);
    Shape::Rect {
        center,
        u_axis: u.into(),
        v_axis: v.into(),
        half_u,
        half_v,
    }
}

fn scene(surfaces: Vec<Surface>, light: [f64; 3], range: (f64, f64)) -> SyntheticScene {
    SyntheticScene {
        surfaces,
        light: Light {
            position: light,
            radiance: 1.0,
        },
        eta: DEFAULT_ETA,
        range: DepthRange {
            min: range.0,
            max: range.1,
        },
    }
}

type Setup = (SyntheticScene, Point3<f64>, Point3<f64>);

fn plane() -> Setup {
    let s = scene(
        vec![surface(
            "plane",
            Shape::Plane {
                point: [0.0, 0.0, 3.0],
                normal: [0.663, 0.383, -0.643],
            },
            Material::diffuse(checker(0.25)),
        )],
        [-0.5, -1.0, 0.0],
        (1.0, 10.0),
    );
    (s, Point3::origin(), Point3::new(0.0, 0.0, 3.0))
}

fn two_plane() -> Setup {
    let s = scene(
        vec![
            surface(
                "near",
                rect([-0.45, 0.0, 2.4], [0.766, 0.0, -0.643], [0.0, 1.0, 0.0], 0.55, 1.6),
                Material::diffuse(checker(0.2)),
            ),
            surface(
                "far",
                rect([0.6, 0.1, 3.8], [-0.45, 0.6, -0.66], [0.0, 1.0, 0.0], 1.8, 1.8),
                Material::diffuse(Albedo::Constant { value: 0.6 }),
            ),
        ],
        [-0.4, -1.0, 0.3],
        (1.0, 10.0),
    );
    (s, Point3::origin(), Point3::new(0.0, 0.0, 3.0))
}

fn two_wall() -> Setup {
    let s = scene(
        vec![
            surface(
                "left-wall",
                rect([-0.625, 0.0, 2.92], [0.866, 0.0, -0.5], [0.0, 1.0, 0.0], 1.3, 3.0),
                Material::diffuse(checker(0.3)),
            ),
            surface(
                "right-wall",
                rect([0.625, 0.0, 2.92], [-0.866, 0.0, -0.5], [0.0, 1.0, 0.0], 1.3, 3.0),
                Material::diffuse(Albedo::Constant { value: 0.55 }),
            ),
        ],
        [-0.3, -1.2, 0.5],
        (1.0, 8.0),
    );
    (s, Point3::origin(), Point3::new(0.15, 0.3, 4.0))
}

fn sphere() -> Setup {
    let s = scene(
        vec![
            surface(
                "ball",
                Shape::Sphere {
                    center: [0.1, 0.05, 3.0],
                    radius: 0.8,
                },
                Material::glossy(Albedo::Constant { value: 0.5 }, 0.6, 30.0),
            ),
            surface(
                "backdrop",
                Shape::Plane {
                    point: [0.0, 0.0, 5.0],
                    normal: [0.6, -0.45, -0.66],
                },
                Material::diffuse(checker(0.3)),
            ),
        ],
        [1.0, -1.0, 0.5],
        (1.0, 15.0),
    );
    (s, Point3::origin(), Point3::new(0.0, 0.0, 3.0))
}

fn cuboid() -> Setup {
    let rotation = nalgebra::UnitQuaternion::from_euler_angles(0.55, 0.8, 0.2);
    let q = rotation.quaternion();
    let s = scene(
        vec![
            surface(
                "box",
                Shape::Cuboid {
                    center: [0.0, 0.1, 3.2],
                    half_extents: [0.5, 0.4, 0.45],
                    rotation: [q.w, q.i, q.j, q.k],
                },
                Material::glossy(checker(0.15), 0.3, 20.0),
            ),
            surface(
                "backdrop",
                Shape::Plane {
                    point: [0.0, 0.0, 5.0],
                    normal: [-0.55, -0.5, -0.66],
                },
                Material::diffuse(Albedo::Constant { value: 0.5 }),
            ),
        ],
        [-0.8, -1.0, 0.5],
        (1.0, 15.0),
    );
    (s, Point3::origin(), Point3::new(0.0, 0.0, 3.0))
}

fn room() -> Setup {
    let s = scene(
        vec![
            surface(
                "floor",
                rect([0.3, 1.0, 4.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0], 4.0, 4.0),
                Material::diffuse(checker(0.4)),
            ),
            surface(
                "left-wall",
                rect([-1.2, -0.5, 4.8], [1.0, 0.0, -1.0], [0.0, 1.0, 0.0], 2.1, 1.5),
                Material::diffuse(Albedo::Constant { value: 0.6 }),
            ),
            surface(
                "right-wall",
                rect([1.8, -0.5, 4.8], [-1.0, 0.0, -1.0], [0.0, 1.0, 0.0], 2.1, 1.5),
                Material::diffuse(checker(0.5)),
            ),
            surface(
                "box",
                Shape::Cuboid {
                    center: [-0.6, 0.6, 3.4],
                    half_extents: [0.35, 0.4, 0.3],
                    rotation: {
                        let q = nalgebra::UnitQuaternion::from_euler_angles(0.0, 0.5, 0.0);
                        let q = q.quaternion();
                        [q.w, q.i, q.j, q.k]
                    },
                },
                Material::diffuse(checker(0.2)),
            ),
            surface(
                "ball",
                Shape::Sphere {
                    center: [0.8, 0.55, 3.6],
                    radius: 0.45,
                },
                Material::glossy(Albedo::Constant { value: 0.45 }, 0.6, 40.0),
            ),
        ],
        [-0.8, -1.0, 0.5],
        (1.0, 8.0),
    );
    (s, Point3::origin(), Point3::new(0.2, 1.4, 4.5))
}
