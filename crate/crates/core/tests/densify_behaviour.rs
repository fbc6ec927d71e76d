use polardepth::densify::*;
use polardepth::eval::absrel;
use polardepth::polarization::{PolarCues, PolarFrame};
use polardepth::prior::PriorField;
use polardepth::synth::*;
use polardepth::{DepthMap, ImageGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Setup {
    frame: PolarFrame,
    gt: GroundTruth,
    field: PriorField,
    cues: PolarCues,
}

impl Setup {
    fn new(name: &str, w: usize, h: usize, warp: PriorWarp) -> Setup {
        let fx = fixture(name, w, h).unwrap();
        let (frame, gt) = render_scene(&fx.scene, &fx.cameras[0]).unwrap();
        let prior = simulate_relative_prior(&gt, warp, &SurfaceBias::None, 0).unwrap();
        let opts = SequenceOptions {
            prior: polardepth::prior::PriorOptions {
                space: warp.space(),
                ..Default::default()
            },
            ..Default::default()
        };
        let (field, cues) = keyframe_cues(&frame, &prior, &fx.cameras[0], &opts).unwrap();
        Setup { frame, gt, field, cues }
    }

    fn densify(&self, seeds: &DepthMap, cfg: &DensifyConfig) -> DensifyOutput {
        densify_keyframe(
            KeyframeInputs {
                seeds,
                cues: &self.cues,
                field: &self.field,
                image: &self.frame.mean_intensity(),
                reference: None,
                ground_truth: Some(&self.gt.depth),
            },
            cfg,
        )
        .unwrap()
    }

    fn single_seed(&self, x: usize, y: usize) -> DepthMap {
        let w = self.gt.depth.width();
        let i = y * w + x;
        let values: Vec<Option<f64>> = (0..self.gt.depth.len())
            .map(|j| if j == i { self.gt.depth.depth(i) } else { None })
            .collect();
        DepthMap::from_options(w, self.gt.depth.height(), &values, self.gt.depth.range()).unwrap()
    }
}

/// Largest depth change to any 8-neighbor: the error of being off the
/// iso-depth contour by one pixel.
fn one_pixel_slope(gt: &DepthMap, i: usize) -> f64 {
    let (w, h) = gt.dims();
    let (x, y) = ((i % w) as i64, (i / w) as i64);
    let z = gt.depth(i).unwrap();
    let mut m: f64 = 0.0;
    for dy in -1..=1 {
        for dx in -1..=1 {
            let (nx, ny) = (x + dx, y + dy);
            if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                if let Some(v) = gt.depth_at(nx as usize, ny as usize) {
                    m = m.max((v - z).abs());
                }
            }
        }
    }
    m
}

#[test]
fn propagation_follows_iso_depth_contours_of_a_plane() {
    let s = Setup::new("plane", 96, 72, PriorWarp::Identity);
    let state = DensifyState::from_seeds(&s.single_seed(48, 36));
    let out = propagate(&state, &s.cues, &DensifyConfig::default()).unwrap();
    let filled: Vec<usize> = (0..out.len())
        .filter(|&i| out.provenance[i] == Provenance::Propagated)
        .collect();
    assert!(filled.len() > 40, "only {} pixels propagated", filled.len());
    for i in filled {
        let err = (out.values[i] - s.gt.depth.depth(i).unwrap()).abs();
        assert!(err <= one_pixel_slope(&s.gt.depth, i) + 1e-12, "pixel {i}: error {err}");
    }
}

#[test]
fn estimation_cancels_a_pure_prior_scale() {
    let s = Setup::new("plane", 96, 72, PriorWarp::Scale { factor: 0.5 });
    let w = 96;
    let known: Vec<usize> = [(20, 20), (48, 36), (70, 50), (30, 60)]
        .iter()
        .map(|&(x, y)| y * w + x)
        .collect();
    let values: Vec<Option<f64>> = (0..s.gt.depth.len())
        .map(|i| known.contains(&i).then(|| s.gt.depth.depth(i).unwrap()))
        .collect();
    let seeds = DepthMap::from_options(96, 72, &values, s.gt.depth.range()).unwrap();
    let state = DensifyState::from_seeds(&seeds);
    let out = estimate_along_gradient(&state, &s.cues, &s.field, &DensifyConfig::default()).unwrap();
    let estimated: Vec<usize> = (0..out.len())
        .filter(|&i| out.provenance[i] == Provenance::Estimated)
        .collect();
    assert_eq!(estimated.len(), 2 * known.len());
    for i in estimated {
        let gt = s.gt.depth.depth(i).unwrap();
        assert!((out.values[i] - gt).abs() / gt <= 1e-3, "pixel {i}");
    }
}

fn noisy_step(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::Normal::new(0.0, 0.01).unwrap();
    let clean: Vec<f64> = (0..2 * n).map(|i| if i % n < n / 2 { 1.0 } else { 2.0 }).collect();
    let noisy = clean.iter().map(|&c| c + rng.sample(normal)).collect();
    (clean, noisy)
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

#[test]
fn step_profile_is_denoised() {
    let n = 64;
    // Two identical rows hold the 1-D profile.
    let (clean, noisy) = noisy_step(n, 5);
    let known = vec![true; 2 * n];
    let tau = vec![1.0; 2 * n];
    let lambda = 0.01;
    let before = tv_objective(&noisy, &noisy, &known, &tau, n, 2, lambda).unwrap();
    let r = tv_minimize(&noisy, &known, &tau, n, 2, lambda, 50).unwrap();
    let after = tv_objective(&r.values, &noisy, &known, &tau, n, 2, lambda).unwrap();
    assert!(after < before);
    assert!(rmse(&r.values, &clean) < rmse(&noisy, &clean));
    assert_eq!(r.objective[0], before);
    assert!((r.objective[50] - after).abs() < 1e-12);
}

#[test]
fn tv_objective_never_increases_on_random_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let (w, h) = (rng.random_range(4..24), rng.random_range(4..24));
        let f: Vec<f64> = (0..w * h).map(|_| rng.random_range(1.0..5.0)).collect();
        let known: Vec<bool> = (0..w * h).map(|_| rng.random_bool(0.8)).collect();
        let tau: Vec<f64> = (0..w * h).map(|_| rng.random_range(0.05..1.0)).collect();
        let lambda = rng.random_range(0.01..1.0);
        let r = tv_minimize(&f, &known, &tau, w, h, lambda, 50).unwrap();
        assert_eq!(r.objective.len(), 51);
        assert!(r.objective.windows(2).all(|p| p[1] <= p[0]));
        for i in (0..w * h).filter(|&i| !known[i]) {
            assert_eq!(r.values[i], f[i]);
        }
        let identity = tv_minimize(&f, &known, &tau, w, h, 0.0, 50).unwrap();
        assert!(identity.values.iter().zip(&f).all(|(a, b)| (a - b).abs() <= 1e-12));
    }
}

#[test]
fn full_seeds_converge_immediately() {
    let s = Setup::new("two-plane", 80, 60, PriorWarp::Identity);
    let out = s.densify(&s.gt.depth, &DensifyConfig::default());
    assert_eq!(out.stats.iterations.len(), 1);
    assert!(out.stats.converged);
    assert_eq!(absrel(&out.depth, &s.gt.depth).unwrap(), 0.0);
}

#[test]
fn plane_densifies_from_one_percent_of_seeds() {
    let s = Setup::new("plane", 160, 120, PriorWarp::Identity);
    let seeds = sample_sparse_seeds(&s.gt, 0.01, 0.0, 1).unwrap();
    let out = s.densify(&seeds, &DensifyConfig::default());
    assert!(out.depth.valid_count() >= 50 * seeds.valid_count());
    assert!(absrel(&out.depth, &s.gt.depth).unwrap() <= 0.01);
}

#[test]
fn point_count_grows_tenfold_with_bounded_error() {
    let s = Setup::new("room", 160, 120, PriorWarp::Disparity { a: 1.0, b: 0.0 });
    let seeds = sample_sparse_seeds(&s.gt, 0.01, 0.01, 2).unwrap();
    let out = s.densify(&seeds, &DensifyConfig::default());
    let seed_err = out.stats.seed_absrel.unwrap();
    let last = out.stats.iterations.last().unwrap();
    assert!(last.total > 10 * out.stats.seeds, "{} -> {}", out.stats.seeds, last.total);
    assert!(last.absrel.unwrap() <= 2.5 * seed_err, "{seed_err} -> {:?}", last.absrel);
}

#[test]
fn density_is_monotone_before_validation() {
    let s = Setup::new("box", 120, 90, PriorWarp::Identity);
    let seeds = sample_sparse_seeds(&s.gt, 0.01, 0.01, 4).unwrap();
    let out = s.densify(&seeds, &DensifyConfig::default());
    let mut prev = out.stats.seeds;
    for it in &out.stats.iterations {
        let pre_validation = prev + it.propagated + it.estimated;
        assert!(pre_validation >= prev);
        assert!(it.total <= pre_validation);
        assert_eq!(it.total, pre_validation - it.rejected);
        prev = it.total;
    }
}

#[test]
fn smoothing_moves_seeds_by_a_bounded_amount() {
    let s = Setup::new("room", 120, 90, PriorWarp::Identity);
    let seeds = sample_sparse_seeds(&s.gt, 0.02, 0.01, 8).unwrap();
    let cfg = DensifyConfig::default();
    let mut state = DensifyState::from_seeds(&seeds);
    state = propagate(&state, &s.cues, &cfg).unwrap();
    let image = s.frame.mean_intensity();
    let tau = tv_weights(&image, cfg.zeta).unwrap();
    let max_tau = tau.iter().cloned().fold(0.0, f64::max);
    let smoothed = tv_smooth(&state, &image, &cfg).unwrap();
    // Optimality gives z − f = λ·div(τp) with |p| ≤ 1; the divergence of a
    // unit field on the 4-grid is at most 2 + √2.
    let bound = (2.0 + 2f64.sqrt()) * cfg.lambda * max_tau;
    for (i, _) in seeds.iter_valid() {
        assert!((smoothed.values[i] - state.values[i]).abs() <= bound + 1e-12, "seed {i}");
    }
    let before = tv_objective(&state.values, &state.values, &state.known, &tau, 120, 90, cfg.lambda).unwrap();
    let after = tv_objective(&smoothed.values, &state.values, &state.known, &tau, 120, 90, cfg.lambda).unwrap();
    assert!(after <= before);
}

#[test]
fn no_propagated_pixel_crosses_a_depth_discontinuity() {
    let s = Setup::new("two-plane", 160, 120, PriorWarp::Identity);
    let seeds = sample_sparse_seeds(&s.gt, 0.01, 0.0, 6).unwrap();
    let out = s.densify(&seeds, &DensifyConfig::default());
    let crossings = (0..out.provenance.len())
        .filter(|&i| out.provenance[i] == Provenance::Propagated)
        .filter(|&i| s.gt.surface[out.origin[i].unwrap()] != s.gt.surface[i])
        .count();
    assert_eq!(crossings, 0);
}

#[test]
fn consistency_filter_removes_noisy_seeds() {
    let fx = fixture("room", 120, 90).unwrap();
    let (_, gt0) = render_scene(&fx.scene, &fx.cameras[0]).unwrap();
    let (_, gt1) = render_scene(&fx.scene, &fx.cameras[1]).unwrap();
    let seeds = sample_sparse_seeds(&gt1, 0.05, 0.01, 3).unwrap();
    let kept = extract_inliers(&seeds, &gt0.depth, &fx.cameras[1], &fx.cameras[0], &DensifyConfig::default()).unwrap();
    assert!(kept.valid_count() > 0 && kept.valid_count() < seeds.valid_count());
    assert!(absrel(&kept, &gt1.depth).unwrap() < absrel(&seeds, &gt1.depth).unwrap());
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let s = Setup::new("room", 120, 90, PriorWarp::Disparity { a: 1.0, b: 0.0 });
    let seeds = sample_sparse_seeds(&s.gt, 0.01, 0.01, 12).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| s.densify(&seeds, &DensifyConfig::default()))
    };
    let (a, b) = (run(1), run(6));
    let bits = |d: &DepthMap| d.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.depth), bits(&b.depth));
    assert_eq!(a.depth.mask(), b.depth.mask());
    assert_eq!(a.provenance, b.provenance);
}

#[test]
fn empty_seeds_are_rejected() {
    let s = Setup::new("plane", 40, 30, PriorWarp::Identity);
    let empty = DepthMap::empty(40, 30, s.gt.depth.range()).unwrap();
    let err = densify_keyframe(
        KeyframeInputs {
            seeds: &empty,
            cues: &s.cues,
            field: &s.field,
            image: &ImageGrid::filled(40, 30, 0.5).unwrap(),
            reference: None,
            ground_truth: None,
        },
        &DensifyConfig::default(),
    );
    assert!(matches!(err, Err(polardepth::Error::Degenerate(_))));
}
