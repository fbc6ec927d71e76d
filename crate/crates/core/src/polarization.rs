//! Linear polarization measurement and its conversion into surface-normal
//! angle candidates under the diffuse and specular reflection models.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageGrid;

/// Polarizer orientations of the four sensor channels, in radians.
pub const FILTER_ANGLES: [f64; 4] = [0.0, PI / 4.0, FRAC_PI_2, 3.0 * PI / 4.0];

/// Refractive index assumed for dielectrics when none is configured.
pub const DEFAULT_ETA: f64 = 1.5;

/// Supported refractive indices. The forward DoLP curves are verified to be
/// monotone (diffuse) and unimodal (specular) over this interval.
pub const ETA_RANGE: (f64, f64) = (1.3, 1.8);

/// Four co-registered intensity images behind polarizers at 0°, 45°, 90° and
/// 135°.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarFrame {
    channels: [ImageGrid; 4],
}

impl PolarFrame {
    pub fn new(channels: [ImageGrid; 4]) -> Result<Self> {
        let dims = channels[0].dims();
        for (k, c) in channels.iter().enumerate() {
            c.require_single_channel("polarizer channel")?;
            c.require_dims(dims)?;
            if let Some(i) = c.data().iter().position(|&v| v < 0.0) {
                return Err(Error::invalid(format!(
                    "negative radiance in channel {} at pixel {i}",
                    k * 45
                )));
            }
        }
        Ok(PolarFrame { channels })
    }

    pub fn channels(&self) -> &[ImageGrid; 4] {
        &self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        self.channels[0].dims()
    }

    #[inline]
    pub fn pixel(&self, idx: usize) -> [f64; 4] {
        [
            self.channels[0].at(idx),
            self.channels[1].at(idx),
            self.channels[2].at(idx),
            self.channels[3].at(idx),
        ]
    }

    /// Mean of the four channels.
    pub fn mean_intensity(&self) -> ImageGrid {
        let (w, h) = self.dims();
        let data = (0..w * h)
            .map(|i| self.pixel(i).iter().sum::<f64>() / 4.0)
            .collect();
        ImageGrid::new(w, h, 1, data).expect("channel dims already validated")
    }
}

/// Per-pixel degree and angle of linear polarization.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarMeasurement {
    /// DoLP in `[0, 1]`.
    pub dolp: ImageGrid,
    /// AoLP in `[0, π)`.
    pub aolp: ImageGrid,
    /// Mean channel radiance.
    pub intensity: ImageGrid,
    pub valid: Vec<bool>,
}

impl PolarMeasurement {
    pub fn dims(&self) -> (usize, usize) {
        self.dolp.dims()
    }
}

/// Dominant reflection model at a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reflection {
    Diffuse,
    Specular,
}

/// Disambiguated surface-normal angles per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarCues {
    /// Azimuth of the normal's image-plane projection, `[0, 2π)`.
    pub azimuth: ImageGrid,
    /// Angle between normal and viewing direction, `[0, π/2]`.
    pub zenith: ImageGrid,
    pub reflection: Vec<Reflection>,
    pub valid: Vec<bool>,
}

impl PolarCues {
    pub fn dims(&self) -> (usize, usize) {
        self.azimuth.dims()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Stokes components `(S0, S1, S2)` from the four channel radiances.
#[inline]
pub fn stokes(i: [f64; 4]) -> (f64, f64, f64) {
    ((i[0] + i[1] + i[2] + i[3]) / 2.0, i[0] - i[2], i[1] - i[3])
}

/// Wraps an angle into `[0, period)`.
#[inline]
pub fn wrap(angle: f64, period: f64) -> f64 {
    let r = angle.rem_euclid(period);
    // rem_euclid can round up to exactly `period` for tiny negative inputs.
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Smallest absolute difference between two angles on the circle, `[0, π]`.
#[inline]
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = wrap(a - b, TAU);
    d.min(TAU - d)
}

/// Radiance transmitted by a linear polarizer at `filter` for light with
/// unpolarized-equivalent radiance `total`, DoLP `dolp` and AoLP `aolp`.
#[inline]
pub fn transmitted_radiance(total: f64, dolp: f64, aolp: f64, filter: f64) -> f64 {
    0.5 * total * (1.0 + dolp * (2.0 * filter - 2.0 * aolp).cos())
}

/// Recovers DoLP and AoLP in closed form from the four channels.
///
/// A pixel is invalid when its mean radiance `S0/2` or its polarized
/// radiance `dolp·S0` falls below `noise_floor`, or when it is unpolarized.
/// Invalid pixels report AoLP 0.
pub fn stokes_from_channels(frame: &PolarFrame, noise_floor: f64) -> Result<PolarMeasurement> {
    if !(noise_floor >= 0.0) {
        return Err(Error::invalid("noise floor must be non-negative"));
    }
    let (w, h) = frame.dims();
    let n = w * h;
    let mut dolp = vec![0.0; n];
    let mut aolp = vec![0.0; n];
    let mut intensity = vec![0.0; n];
    let mut valid = vec![false; n];
    for i in 0..n {
        let (s0, s1, s2) = stokes(frame.pixel(i));
        intensity[i] = s0 / 2.0;
        let polarized = s1.hypot(s2);
        if s0 <= 0.0 {
            continue;
        }
        let rho = (polarized / s0).min(1.0);
        dolp[i] = rho;
        if polarized == 0.0 {
            continue;
        }
        aolp[i] = wrap(0.5 * s2.atan2(s1), PI);
        valid[i] = s0 / 2.0 >= noise_floor && polarized >= noise_floor;
    }
    Ok(PolarMeasurement {
        dolp: ImageGrid::new(w, h, 1, dolp)?,
        aolp: ImageGrid::new(w, h, 1, aolp)?,
        intensity: ImageGrid::new(w, h, 1, intensity)?,
        valid,
    })
}

/// An azimuth hypothesis and the reflection model that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AzimuthCandidate {
    pub azimuth: f64,
    pub model: Reflection,
}

/// The four azimuths compatible with an AoLP: `ϕ, ϕ+π` for diffuse and
/// `ϕ+π/2, ϕ+3π/2` for specular reflection, each wrapped into `[0, 2π)`.
pub fn azimuth_candidates(aolp: f64) -> [AzimuthCandidate; 4] {
    let c = |offset: f64, model| AzimuthCandidate {
        azimuth: wrap(aolp + offset, TAU),
        model,
    };
    [
        c(0.0, Reflection::Diffuse),
        c(PI, Reflection::Diffuse),
        c(FRAC_PI_2, Reflection::Specular),
        c(3.0 * FRAC_PI_2, Reflection::Specular),
    ]
}

/// DoLP of diffusely reflected light at zenith `theta` for refractive index
/// `eta`.
pub fn dolp_diffuse(theta: f64, eta: f64) -> f64 {
    let s2 = theta.sin().powi(2);
    let num = (eta - 1.0 / eta).powi(2) * s2;
    let den = 4.0 * theta.cos() * (eta * eta - s2).sqrt() - (eta + 1.0 / eta).powi(2) * s2
        + 2.0 * eta * eta
        + 2.0;
    num / den
}

/// DoLP of specularly reflected light at zenith `theta` for refractive index
/// `eta`.
pub fn dolp_specular(theta: f64, eta: f64) -> f64 {
    let s2 = theta.sin().powi(2);
    let e2 = eta * eta;
    let num = 2.0 * s2 * theta.cos() * (e2 - s2).sqrt();
    let den = e2 - s2 - e2 * s2 + 2.0 * s2 * s2;
    num / den
}

/// A zenith angle recovered from DoLP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZenithEstimate {
    pub theta: f64,
    /// DoLP exceeded what the model can produce; `theta` is the model's
    /// saturation angle.
    pub clamped: bool,
}

/// The two specular zenith solutions, `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecularRoots {
    pub lo: f64,
    pub hi: f64,
    /// DoLP was at or above the curve's peak; both roots equal the maximizer.
    pub clamped: bool,
}

impl SpecularRoots {
    /// The root nearer to `reference`; ties go to the smaller angle.
    pub fn closest_to(&self, reference: f64) -> f64 {
        if (self.hi - reference).abs() < (self.lo - reference).abs() {
            self.hi
        } else {
            self.lo
        }
    }
}

const ROOT_TOLERANCE: f64 = 1e-9;
const GOLDEN_TOLERANCE: f64 = 1e-10;

/// Inverts the DoLP/zenith relations for one refractive index.
///
/// Construction locates the specular curve's peak once, so per-pixel
/// inversions only bisect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZenithSolver {
    eta: f64,
    diffuse_max: f64,
    specular_peak_theta: f64,
    specular_peak: f64,
}

impl ZenithSolver {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta >= ETA_RANGE.0 && eta <= ETA_RANGE.1) {
            return Err(Error::invalid(format!(
                "refractive index {eta} outside [{}, {}]",
                ETA_RANGE.0, ETA_RANGE.1
            )));
        }
        let peak = golden_section_max(|t| dolp_specular(t, eta), 0.0, FRAC_PI_2, GOLDEN_TOLERANCE);
        Ok(ZenithSolver {
            eta,
            diffuse_max: dolp_diffuse(FRAC_PI_2, eta),
            specular_peak_theta: peak,
            specular_peak: dolp_specular(peak, eta),
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Largest DoLP the diffuse model produces (at grazing view).
    pub fn diffuse_max(&self) -> f64 {
        self.diffuse_max
    }

    /// `(zenith, dolp)` at the specular curve's maximum.
    pub fn specular_peak(&self) -> (f64, f64) {
        (self.specular_peak_theta, self.specular_peak)
    }

    pub fn zenith_diffuse(&self, dolp: f64) -> ZenithEstimate {
        if dolp <= 0.0 {
            return ZenithEstimate {
                theta: 0.0,
                clamped: false,
            };
        }
        if dolp >= self.diffuse_max {
            return ZenithEstimate {
                theta: FRAC_PI_2,
                clamped: dolp > self.diffuse_max,
            };
        }
        let eta = self.eta;
        ZenithEstimate {
            theta: bisect(|t| dolp_diffuse(t, eta) - dolp, 0.0, FRAC_PI_2),
            clamped: false,
        }
    }

    pub fn zenith_specular(&self, dolp: f64) -> SpecularRoots {
        let peak = self.specular_peak_theta;
        if dolp >= self.specular_peak {
            return SpecularRoots {
                lo: peak,
                hi: peak,
                clamped: dolp > self.specular_peak,
            };
        }
        if dolp <= 0.0 {
            return SpecularRoots {
                lo: 0.0,
                hi: FRAC_PI_2,
                clamped: false,
            };
        }
        let eta = self.eta;
        SpecularRoots {
            lo: bisect(|t| dolp_specular(t, eta) - dolp, 0.0, peak),
            hi: bisect(|t| dolp - dolp_specular(t, eta), peak, FRAC_PI_2),
            clamped: false,
        }
    }
}

/// Unique zenith in `[0, π/2]` producing `dolp` under diffuse reflection.
pub fn zenith_diffuse(dolp: f64, eta: f64) -> Result<ZenithEstimate> {
    Ok(ZenithSolver::new(eta)?.zenith_diffuse(dolp))
}

/// Both zenith solutions producing `dolp` under specular reflection.
pub fn zenith_specular(dolp: f64, eta: f64) -> Result<SpecularRoots> {
    Ok(ZenithSolver::new(eta)?.zenith_specular(dolp))
}

/// Root of an increasing function on `[lo, hi]` with `f(lo) <= 0 <= f(hi)`,
/// refined until the bracket stops shrinking in floating point.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (f(lo).abs(), f(hi).abs());
    let best = if flo <= fhi { lo } else { hi };
    debug_assert!(f(best).abs() <= ROOT_TOLERANCE);
    best
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_of(px: [f64; 4]) -> PolarFrame {
        let g = |v: f64| ImageGrid::filled(2, 2, v).unwrap();
        PolarFrame::new([g(px[0]), g(px[1]), g(px[2]), g(px[3])]).unwrap()
    }

    #[test]
    fn fully_polarized_at_zero() {
        let m = stokes_from_channels(&frame_of([2.0, 1.0, 0.0, 1.0]), 1e-3).unwrap();
        assert_eq!(m.dolp.at(0), 1.0);
        assert_eq!(m.aolp.at(0), 0.0);
        assert!(m.valid[0]);
    }

    #[test]
    fn unpolarized_is_invalid() {
        let m = stokes_from_channels(&frame_of([0.7; 4]), 1e-3).unwrap();
        assert_eq!(m.dolp.at(0), 0.0);
        assert_eq!(m.aolp.at(0), 0.0);
        assert!(!m.valid[0]);
    }

    #[test]
    fn half_polarized_at_thirty_degrees() {
        let m = stokes_from_channels(&frame_of([1.25, 1.433, 0.75, 0.567]), 1e-3).unwrap();
        assert!((m.dolp.at(0) - 0.5).abs() < 1e-3);
        assert!((m.aolp.at(0) - 30f64.to_radians()).abs() < 1e-3);
        assert!((m.intensity.at(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dark_pixels_are_invalid() {
        let m = stokes_from_channels(&frame_of([2e-4, 1e-4, 0.0, 1e-4]), 1e-3).unwrap();
        assert!(!m.valid[0]);
    }

    #[test]
    fn negative_radiance_rejected() {
        let g = |v: f64| ImageGrid::filled(2, 2, v).unwrap();
        assert!(PolarFrame::new([g(1.0), g(-0.1), g(1.0), g(1.0)]).is_err());
    }

    #[test]
    fn candidates_at_zero() {
        let c = azimuth_candidates(0.0);
        let az: Vec<f64> = c.iter().map(|c| c.azimuth).collect();
        assert_eq!(az, vec![0.0, PI, FRAC_PI_2, 3.0 * FRAC_PI_2]);
        assert_eq!(c[0].model, Reflection::Diffuse);
        assert_eq!(c[1].model, Reflection::Diffuse);
        assert_eq!(c[2].model, Reflection::Specular);
        assert_eq!(c[3].model, Reflection::Specular);
    }

    #[test]
    fn candidates_at_third_pi() {
        let c = azimuth_candidates(PI / 3.0);
        let expect = [PI / 3.0, 4.0 * PI / 3.0, 5.0 * PI / 6.0, 11.0 * PI / 6.0];
        for (c, e) in c.iter().zip(expect) {
            assert!((c.azimuth - e).abs() < 1e-12, "{} vs {e}", c.azimuth);
        }
    }

    #[test]
    fn specular_candidates_wrap() {
        let c = azimuth_candidates(3.0 * PI / 4.0);
        assert!((c[2].azimuth - 5.0 * PI / 4.0).abs() < 1e-12);
        assert!((c[3].azimuth - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn diffuse_zenith_examples() {
        assert_eq!(zenith_diffuse(0.0, 1.5).unwrap().theta, 0.0);
        let top = dolp_diffuse(FRAC_PI_2, 1.5);
        assert!((top - 0.3846).abs() < 1e-3);
        let z = zenith_diffuse(0.3846, 1.5).unwrap();
        assert!((z.theta - FRAC_PI_2).abs() < 1e-4);
        let forty = 40f64.to_radians();
        let back = zenith_diffuse(dolp_diffuse(forty, 1.5), 1.5).unwrap();
        assert!((back.theta - forty).abs() < 1e-6);
        assert!(!back.clamped);
    }

    #[test]
    fn diffuse_saturation_is_flagged() {
        let z = zenith_diffuse(0.6, 1.5).unwrap();
        assert!(z.clamped);
        assert_eq!(z.theta, FRAC_PI_2);
    }

    #[test]
    fn eta_outside_range_rejected() {
        assert!(ZenithSolver::new(1.2).is_err());
        assert!(ZenithSolver::new(1.81).is_err());
    }

    #[test]
    fn specular_zero_dolp_gives_endpoints() {
        let r = zenith_specular(0.0, 1.5).unwrap();
        assert_eq!((r.lo, r.hi), (0.0, FRAC_PI_2));
    }

    #[test]
    fn specular_roundtrip_includes_origin() {
        for deg in [20.0f64, 75.0] {
            let t = deg.to_radians();
            let r = zenith_specular(dolp_specular(t, 1.5), 1.5).unwrap();
            let err = (r.lo - t).abs().min((r.hi - t).abs());
            assert!(err < 1e-6, "{deg}: {r:?}");
        }
    }

    #[test]
    fn specular_above_peak_is_clamped() {
        let s = ZenithSolver::new(1.5).unwrap();
        let (theta, rho) = s.specular_peak();
        let r = s.zenith_specular(rho + 0.01);
        assert!(r.clamped);
        assert_eq!((r.lo, r.hi), (theta, theta));
    }
}
