use std::f64::consts::{FRAC_PI_2, PI};

use polardepth::polarization::*;
use polardepth::ImageGrid;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn frame_of(pixels: &[[f64; 4]]) -> PolarFrame {
    let n = pixels.len();
    // Two identical rows: images are at least 2x2.
    let channel = |k: usize| ImageGrid::new(n, 2, 1, {
        let mut v: Vec<f64> = pixels.iter().map(|p| p[k]).collect();
        v.extend(pixels.iter().map(|p| p[k]));
        v
    });
    PolarFrame::new([
        channel(0).unwrap(),
        channel(1).unwrap(),
        channel(2).unwrap(),
        channel(3).unwrap(),
    ])
    .unwrap()
}

fn render_pixel(total: f64, dolp: f64, aolp: f64) -> [f64; 4] {
    FILTER_ANGLES.map(|a| transmitted_radiance(total, dolp, aolp, a))
}

fn aolp_error(a: f64, b: f64) -> f64 {
    let d = wrap(a - b, PI);
    d.min(PI - d)
}

#[test]
fn stokes_round_trip_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let triples: Vec<(f64, f64, f64)> = (0..10_000)
        .map(|_| {
            (
                rng.random_range(0.05..2.0),
                rng.random_range(0.01..1.0),
                rng.random_range(0.0..PI),
            )
        })
        .collect();
    let pixels: Vec<[f64; 4]> = triples.iter().map(|&(t, r, p)| render_pixel(t, r, p)).collect();
    let m = stokes_from_channels(&frame_of(&pixels), 0.0).unwrap();
    for (i, &(_, rho, phi)) in triples.iter().enumerate() {
        assert!(m.valid[i]);
        assert!((m.dolp.at(i) - rho).abs() <= 1e-6, "dolp at {i}");
        assert!(aolp_error(m.aolp.at(i), phi) <= 1e-6, "aolp at {i}");
    }
}

#[test]
fn channel_pairs_share_total_radiance() {
    for &(t, r, p) in &[(1.0, 0.3, 0.2), (0.4, 0.9, 2.9), (2.0, 0.0, 1.0)] {
        let i = render_pixel(t, r, p);
        assert!((i[0] + i[2] - (i[1] + i[3])).abs() < 1e-12);
        assert!((i[0] + i[2] - t).abs() < 1e-12);
    }
}

#[test]
fn diffuse_inversion_on_a_dense_grid() {
    let solver = ZenithSolver::new(1.5).unwrap();
    for k in 0..1000 {
        let theta = FRAC_PI_2 * k as f64 / 999.0;
        let est = solver.zenith_diffuse(dolp_diffuse(theta, 1.5));
        assert!((est.theta - theta).abs() <= 1e-6, "theta {theta} -> {}", est.theta);
    }
}

#[test]
fn diffuse_dolp_at_grazing_view() {
    // (η − 1/η)² / (2η² + 2 − (η + 1/η)²) at η = 1.5: (25/36) / (13/2 − 169/36) = 25/65.
    let expected = 25.0 / 65.0;
    assert!((dolp_diffuse(FRAC_PI_2, 1.5) - expected).abs() < 1e-12);
    assert!((dolp_diffuse(FRAC_PI_2, 1.5) - 0.3846).abs() < 1e-3);
}

#[test]
fn diffuse_dolp_is_monotone_for_every_eta() {
    for eta in [1.3, 1.45, 1.5, 1.65, 1.8] {
        let mut prev = -1.0;
        for k in 0..=10_000 {
            let v = dolp_diffuse(FRAC_PI_2 * k as f64 / 10_000.0, eta);
            assert!(v > prev || k == 0, "eta {eta} step {k}");
            prev = v;
        }
    }
}

#[test]
fn specular_inversion_recovers_the_origin_among_two_roots() {
    let solver = ZenithSolver::new(1.5).unwrap();
    for k in 0..1000 {
        let theta = FRAC_PI_2 * k as f64 / 999.0;
        let roots = solver.zenith_specular(dolp_specular(theta, 1.5));
        let err = (roots.lo - theta).abs().min((roots.hi - theta).abs());
        assert!(err <= 1e-6, "theta {theta}: roots {roots:?}");
    }
}

/// Grid-scan oracle: sign changes of `f(θ) − ρ` over a fine uniform grid.
fn scanned_roots(rho: f64, eta: f64, n: usize) -> Vec<f64> {
    let step = FRAC_PI_2 / n as f64;
    let mut roots = Vec::new();
    let mut prev = dolp_specular(0.0, eta) - rho;
    for k in 1..=n {
        let t = k as f64 * step;
        let cur = dolp_specular(t, eta) - rho;
        if prev.signum() != cur.signum() {
            roots.push(t - 0.5 * step);
        }
        prev = cur;
    }
    roots
}

#[test]
fn specular_roots_match_a_million_point_scan() {
    let solver = ZenithSolver::new(1.5).unwrap();
    let step = FRAC_PI_2 / 1e6;
    for rho in [0.05, 0.2, 0.5, 0.8, 0.95] {
        let scan = scanned_roots(rho, 1.5, 1_000_000);
        assert_eq!(scan.len(), 2, "rho {rho}");
        let roots = solver.zenith_specular(rho);
        assert!((roots.lo - scan[0]).abs() <= step, "rho {rho} lo");
        assert!((roots.hi - scan[1]).abs() <= step, "rho {rho} hi");
    }
}

#[test]
fn specular_curve_has_a_single_interior_maximum() {
    let n = 100_000;
    let values: Vec<f64> = (0..=n)
        .map(|k| dolp_specular(FRAC_PI_2 * k as f64 / n as f64, 1.5))
        .collect();
    let turns = values
        .windows(3)
        .filter(|w| (w[1] - w[0]).signum() != (w[2] - w[1]).signum())
        .count();
    assert_eq!(turns, 1);
    let (theta, peak) = ZenithSolver::new(1.5).unwrap().specular_peak();
    let grid_max = values.iter().cloned().fold(0.0, f64::max);
    assert!((peak - grid_max).abs() < 1e-9);
    assert!((peak - 1.0).abs() < 1e-9, "specular DoLP peaks at 1 at Brewster");
    assert!((theta - 1.5f64.atan()).abs() < 1e-6);
}

proptest! {
    #[test]
    fn measurement_is_scale_invariant(
        total in 0.01f64..5.0, rho in 0.02f64..1.0, phi in 0.0f64..PI, k in 0.01f64..100.0
    ) {
        let base = render_pixel(total, rho, phi);
        let scaled = base.map(|v| v * k);
        let m = stokes_from_channels(&frame_of(&[base, scaled]), 0.0).unwrap();
        prop_assert!((m.dolp.at(0) - m.dolp.at(1)).abs() < 1e-9);
        prop_assert!(aolp_error(m.aolp.at(0), m.aolp.at(1)) < 1e-9);
    }

    #[test]
    fn aolp_is_rotation_equivariant(
        rho in 0.05f64..1.0, phi in 0.0f64..PI, delta in -3.0f64..3.0
    ) {
        let a = render_pixel(1.0, rho, phi);
        let b = render_pixel(1.0, rho, phi + delta);
        let m = stokes_from_channels(&frame_of(&[a, b]), 0.0).unwrap();
        prop_assert!(aolp_error(m.aolp.at(1), m.aolp.at(0) + delta) < 1e-9);
    }

    #[test]
    fn every_candidate_matches_the_aolp_modulo_half_turns(aolp in 0.0f64..PI) {
        for c in azimuth_candidates(aolp) {
            let shift = match c.model {
                Reflection::Diffuse => 0.0,
                Reflection::Specular => FRAC_PI_2,
            };
            prop_assert!(aolp_error(c.azimuth - shift, aolp) < 1e-12);
            prop_assert!((0.0..2.0 * PI).contains(&c.azimuth));
        }
    }
}
