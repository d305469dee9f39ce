use std::path::PathBuf;

use jumpflux::analysis::{
    compensated_sum, decreasing_within_ci, estimate, fit_loglog, fit_loglog_rate,
    m_term_decomposition, map_paths, mc_moment, ExperimentPoint, GapSelector,
};
use jumpflux::cli::{load_config, Overrides};
use jumpflux::dynamics::{
    simulate_coupled_bundle, simulate_jump_diffusion, BundleParams, DiffusionFamily, JumpFamily,
    Model, SystemSpec,
};
use jumpflux::matcore::Mat;
use jumpflux::noisegen::{Atom, LevyMeasureSpec, NoiseRecord, PathSeed};
use proptest::prelude::*;

fn default_model() -> Model {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
    load_config(&path, &Overrides::default()).unwrap().model
}

fn point(epsilon: f64, moment: f64, ci: f64) -> ExperimentPoint {
    ExperimentPoint {
        epsilon,
        delta: epsilon,
        kappa: 0.0,
        paths: 100,
        moment,
        ci_half_width: ci,
    }
}

#[test]
fn estimate_hand_values() {
    let e = estimate(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(e.mean, 2.5);
    let s2: f64 = 5.0 / 3.0;
    assert!((e.ci_half_width - 1.96 * (s2 / 4.0).sqrt()).abs() <= 1e-15);
    assert_eq!(estimate(&[7.0; 10]).unwrap().ci_half_width, 0.0);
    assert!(estimate(&[1.0]).is_err());
}

#[test]
fn compensated_sum_recovers_cancelled_terms() {
    let v = [1e16, 1.0, -1e16, 1.0];
    assert_eq!(compensated_sum(v), 2.0);
    assert_ne!(v.iter().sum::<f64>(), 2.0);
}

#[test]
fn exact_power_law_fit() {
    let xs = [0.2, 0.1, 0.05, 0.025];
    let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.7)).collect();
    let fit = fit_loglog(&xs, &ys).unwrap();
    assert!((fit.slope - 1.7).abs() <= 1e-12);
    assert!((fit.intercept - 3.0f64.ln()).abs() <= 1e-12);
    assert!((fit.r_squared - 1.0).abs() <= 1e-12);
    assert!(fit_loglog(&xs[..2], &ys[..2]).is_err());
    assert!(fit_loglog(&xs, &[1.0, 0.0, 1.0, 1.0]).is_err());
}

#[test]
fn rate_fit_needs_decreasing_ladder() {
    let pts = [
        point(0.1, 1.0, 0.1),
        point(0.2, 0.5, 0.1),
        point(0.05, 0.2, 0.1),
    ];
    assert!(fit_loglog_rate(&pts).is_err());
}

#[test]
fn monotone_within_confidence() {
    let ok = [
        point(0.2, 1.0, 0.1),
        point(0.1, 1.05, 0.1),
        point(0.05, 0.5, 0.1),
    ];
    assert!(decreasing_within_ci(&ok));
    let bad = [point(0.2, 1.0, 0.1), point(0.1, 1.5, 0.1)];
    assert!(!decreasing_within_ci(&bad));
}

#[test]
fn map_paths_is_independent_of_pool_size() {
    let model = default_model();
    let params = BundleParams {
        epsilon: 0.1,
        delta: 0.1,
        c: 1.0,
        horizon: 1.0,
        step: Some(0.002),
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mc_moment(&model, params, GapSelector::Clt, 64, 31).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(2));
    assert_eq!(one, run(8));
}

#[test]
fn confidence_interval_shrinks_with_paths() {
    let model = default_model();
    let params = BundleParams {
        epsilon: 0.1,
        delta: 0.1,
        c: 1.0,
        horizon: 1.0,
        step: Some(0.002),
    };
    let small = mc_moment(&model, params, GapSelector::Lln, 1000, 41).unwrap();
    let large = mc_moment(&model, params, GapSelector::Lln, 2000, 41).unwrap();
    let ratio = large.ci_half_width / small.ci_half_width;
    assert!(
        (ratio / std::f64::consts::FRAC_1_SQRT_2 - 1.0).abs() <= 0.2,
        "{ratio}"
    );
}

#[test]
fn halving_internal_step_is_stable() {
    let model = default_model();
    let eps = 0.025;
    let coarse = BundleParams {
        epsilon: eps,
        delta: eps,
        c: 1.0,
        horizon: 1.0,
        step: None,
    };
    let h = coarse.resolved_step();
    let fine = BundleParams {
        step: Some(h / 2.0),
        ..coarse
    };
    let a = mc_moment(&model, coarse, GapSelector::Lln, 8000, 51).unwrap();
    let b = mc_moment(&model, fine, GapSelector::Lln, 8000, 51).unwrap();
    let rel = (a.moment - b.moment).abs() / b.moment;
    assert!(rel < 0.05, "{} vs {} ({rel})", a.moment, b.moment);
}

#[test]
fn pure_noise_endpoint_is_a_martingale() {
    let zero = Mat::zeros(2, 2);
    let sys = SystemSpec::new(zero.clone(), Mat::identity(2), zero, vec![0.5, -1.0]).unwrap();
    let diffusion = DiffusionFamily::affine(
        Mat::identity(2).scale(0.3),
        vec![Mat::diag(&[0.2, 0.0]), Mat::diag(&[0.0, 0.2])],
    )
    .unwrap();
    let jump = JumpFamily::linear_in_mark(
        Mat::identity(2),
        vec![Mat::diag(&[0.5, 0.5]), Mat::zeros(2, 2)],
    )
    .unwrap();
    let levy = LevyMeasureSpec::atomic(
        2,
        vec![
            Atom {
                location: vec![0.6, 0.2],
                mass: 2.0,
            },
            Atom {
                location: vec![-0.1, 0.4],
                mass: 1.0,
            },
        ],
    )
    .unwrap();
    let model = Model::new(sys, diffusion, jump, levy).unwrap();
    let eps = 0.5;
    let ends: Vec<Vec<f64>> = map_paths(&(0..10_000).collect::<Vec<_>>(), |i| {
        let noise = NoiseRecord::generate(&model.levy, 1.0, 0.1, 0.01, PathSeed::new(61, i))?;
        let y = simulate_jump_diffusion(&model, eps, 0.1, &noise)?;
        Ok(y.path.last().to_vec())
    })
    .unwrap();
    for k in 0..2 {
        let vals: Vec<f64> = ends.iter().map(|e| e[k] - model.system.y0()[k]).collect();
        let est = estimate(&vals).unwrap();
        let sigma = est.ci_half_width / 1.96;
        assert!(
            est.mean.abs() <= 4.0 * sigma,
            "coordinate {k}: {} vs {sigma}",
            est.mean
        );
    }
}

fn square(scale: f64) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-1.0..1.0f64, 4)
        .prop_map(move |d| Mat::new(2, 2, d.into_iter().map(|v| v * scale).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn m_term_identity_on_random_configs(
        a in square(1.5),
        k in prop::collection::vec(-1.0..1.0f64, 2),
        s0 in square(0.3),
        s1 in square(0.1),
        g0 in square(1.0),
        eps in 0.02..0.3f64,
        ratio in 0.2..1.5f64,
        seed in 0u64..1000,
    ) {
        let sys = SystemSpec::new(a, Mat::from_rows(&[vec![0.0], vec![1.0]]).unwrap(),
            Mat::from_rows(&[k]).unwrap(), vec![1.0, -0.5]).unwrap();
        let diffusion = DiffusionFamily::affine(s0, vec![s1, Mat::zeros(2, 2)]).unwrap();
        let jump = JumpFamily::linear_in_mark(g0, vec![]).unwrap();
        let levy = LevyMeasureSpec::atomic(2, vec![Atom { location: vec![0.3, -0.4], mass: 3.0 }]).unwrap();
        let model = Model::new(sys, diffusion, jump, levy).unwrap();
        let c = ratio;
        let params = BundleParams { epsilon: eps, delta: ratio * eps, c, horizon: 1.0, step: None };
        let b = simulate_coupled_bundle(&model, params, PathSeed::new(seed, 0)).unwrap();
        let r = m_term_decomposition(&model, &b, c).unwrap();
        prop_assert!(r.residual <= 1e-8 * (1.0 + r.magnitude), "{} / {}", r.residual, r.magnitude);
    }

    #[test]
    fn squared_gaps_are_finite_and_nonnegative(seed in 0u64..10_000) {
        let model = default_model();
        let params = BundleParams { epsilon: 0.1, delta: 0.05, c: 0.5, horizon: 1.0, step: Some(0.002) };
        let b = simulate_coupled_bundle(&model, params, PathSeed::new(seed, seed)).unwrap();
        for s in [GapSelector::Lln, GapSelector::Clt, GapSelector::Expansion] {
            let v = s.evaluate(&b).unwrap();
            prop_assert!(v.is_finite() && v >= 0.0);
        }
        // The expansion remainder and the CLT gap are the same quantity.
        let e = GapSelector::Expansion.evaluate(&b).unwrap();
        let c = GapSelector::Clt.evaluate(&b).unwrap();
        prop_assert!((e - c).abs() <= 1e-9 * (1.0 + c));
    }
}
