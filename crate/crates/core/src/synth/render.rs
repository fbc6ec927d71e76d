use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Point3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::camera::CameraModel;
use crate::depth::{DepthMap, NormalMap};
use crate::error::{Error, Result};
use crate::image::ImageGrid;
use crate::polarization::{
    dolp_diffuse, dolp_specular, transmitted_radiance, wrap, PolarFrame, Reflection,
    FILTER_ANGLES,
};

use super::scene::{v3, Hit, SyntheticScene};

/// Everything the renderer knows about each pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub depth: DepthMap,
    /// Unit normals in the camera frame with non-negative z (pointing into
    /// the scene). Invalid at grazing pixels where that orientation would
    /// put the zenith past π/2.
    pub normals: NormalMap,
    pub aolp: ImageGrid,
    pub dolp: ImageGrid,
    pub reflection: Vec<Reflection>,
    pub azimuth_true: ImageGrid,
    pub zenith_true: ImageGrid,
    /// Index into `scene.surfaces` of the surface seen at each pixel.
    pub surface: Vec<Option<usize>>,
    /// Unpolarized radiance before the polarizers.
    pub radiance: ImageGrid,
}

#[derive(Debug, Clone, Copy, Default)]
struct Sample {
    depth: Option<f64>,
    normal: Option<Vector3<f64>>,
    surface: Option<usize>,
    radiance: f64,
    specular: bool,
    azimuth: f64,
    zenith: f64,
    dolp: f64,
    aolp: f64,
}

/// Ray-casts the scene from `cam` and synthesizes the four polarizer
/// channels together with per-pixel ground truth.
pub fn render_scene(scene: &SyntheticScene, cam: &CameraModel) -> Result<(PolarFrame, GroundTruth)> {
    scene.validate()?;
    let (w, h) = cam.dims();
    let origin = cam.center();
    let light = Point3::from(v3(scene.light.position));
    let rot = cam.pose().rotation;

    let samples: Vec<Sample> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let ray_cam = cam.ray((i % w) as f64, (i / w) as f64);
            let dir = rot.inverse_transform_vector(&ray_cam);
            let mut best: Option<(usize, Hit)> = None;
            for (k, s) in scene.surfaces.iter().enumerate() {
                if let Some(hit) = s.shape.intersect(&origin, &dir) {
                    if best.map_or(true, |(_, b)| hit.t < b.t) {
                        best = Some((k, hit));
                    }
                }
            }
            let Some((k, hit)) = best else {
                return Sample::default();
            };
            shade(scene, k, hit, &origin, &dir, &light, &rot)
        })
        .collect();

    if samples.iter().all(|s| s.depth.is_none()) {
        return Err(Error::invalid("camera sees no surface"));
    }
    if let Some(z) = samples
        .iter()
        .filter_map(|s| s.depth)
        .find(|&z| !scene.range.contains(z))
    {
        return Err(Error::invalid(format!(
            "rendered depth {z} outside the declared range [{}, {}]",
            scene.range.min, scene.range.max
        )));
    }

    let grid = |f: &dyn Fn(&Sample) -> f64| {
        ImageGrid::new(w, h, 1, samples.iter().map(f).collect())
    };
    let channels = FILTER_ANGLES.map(|a| {
        grid(&|s: &Sample| transmitted_radiance(s.radiance, s.dolp, s.aolp, a))
    });
    let [c0, c1, c2, c3] = channels;
    let frame = PolarFrame::new([c0?, c1?, c2?, c3?])?;

    let depths: Vec<Option<f64>> = samples.iter().map(|s| s.depth).collect();
    let normals: Vec<Option<Vector3<f64>>> = samples.iter().map(|s| s.normal).collect();
    let gt = GroundTruth {
        depth: DepthMap::from_options(w, h, &depths, scene.range)?,
        normals: NormalMap::from_options(w, h, &normals)?,
        aolp: grid(&|s| s.aolp)?,
        dolp: grid(&|s| s.dolp)?,
        reflection: samples
            .iter()
            .map(|s| {
                if s.specular {
                    Reflection::Specular
                } else {
                    Reflection::Diffuse
                }
            })
            .collect(),
        azimuth_true: grid(&|s| s.azimuth)?,
        zenith_true: grid(&|s| s.zenith)?,
        surface: samples.iter().map(|s| s.surface).collect(),
        radiance: grid(&|s| s.radiance)?,
    };
    Ok((frame, gt))
}

fn shade(
    scene: &SyntheticScene,
    k: usize,
    hit: Hit,
    origin: &Point3<f64>,
    dir: &Vector3<f64>,
    light: &Point3<f64>,
    rot: &nalgebra::UnitQuaternion<f64>,
) -> Sample {
    let surface = &scene.surfaces[k];
    let m = &surface.material;
    let p = origin + dir * hit.t;
    // Outward normal facing the viewer.
    let n_out = if hit.normal.dot(dir) > 0.0 {
        -hit.normal
    } else {
        hit.normal
    }
    .normalize();
    let to_light = (light - p).normalize();
    let to_eye = (origin - p).normalize();
    let half = (to_light + to_eye).normalize();
    let albedo = m.albedo.at(&p);
    let n_dot_l = n_out.dot(&to_light).max(0.0);
    let diffuse = m.k_d * albedo * n_dot_l * scene.light.radiance;
    let specular = if n_dot_l > 0.0 {
        m.k_s * n_out.dot(&half).max(0.0).powf(m.shininess) * scene.light.radiance
    } else {
        0.0
    };
    let radiance = m.k_a * albedo + diffuse + specular;
    let is_specular = specular > diffuse;

    let n = -(rot * n_out);
    let mut s = Sample {
        depth: Some(hit.t),
        surface: Some(k),
        radiance,
        specular: is_specular,
        ..Sample::default()
    };
    if n.z < 1e-6 {
        // Seen past grazing under the optical-axis zenith convention; the
        // pixel is left unpolarized and without a normal.
        return s;
    }
    let zenith = n.xy().norm().atan2(n.z).min(FRAC_PI_2);
    let azimuth = wrap(n.y.atan2(n.x), TAU);
    s.normal = Some(n);
    s.zenith = zenith;
    s.azimuth = azimuth;
    if is_specular {
        s.dolp = dolp_specular(zenith, scene.eta);
        s.aolp = wrap(azimuth + FRAC_PI_2, PI);
    } else {
        s.dolp = dolp_diffuse(zenith, scene.eta);
        s.aolp = wrap(azimuth, PI);
    }
    s
}

/// Adds zero-mean Gaussian noise with standard deviation `sigma_rel` times
/// the frame's peak radiance to every channel sample, clamping at zero.
/// Samples are drawn in pixel order, channel by channel.
pub fn add_channel_noise(frame: &PolarFrame, sigma_rel: f64, seed: u64) -> Result<PolarFrame> {
    if !(sigma_rel >= 0.0) {
        return Err(Error::invalid("noise level must be non-negative"));
    }
    let peak = frame
        .channels()
        .iter()
        .flat_map(|c| c.data().iter().copied())
        .fold(0.0f64, f64::max);
    let normal = Normal::new(0.0, sigma_rel * peak).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = frame.dims();
    let mut data: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(w * h));
    for i in 0..w * h {
        for (k, v) in frame.pixel(i).into_iter().enumerate() {
            data[k].push((v + normal.sample(&mut rng)).max(0.0));
        }
    }
    let [a, b, c, d] = data;
    PolarFrame::new([
        ImageGrid::new(w, h, 1, a)?,
        ImageGrid::new(w, h, 1, b)?,
        ImageGrid::new(w, h, 1, c)?,
        ImageGrid::new(w, h, 1, d)?,
    ])
}
