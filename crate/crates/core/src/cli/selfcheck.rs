//! Fast invariant suite run by the `selfcheck` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    fit_loglog, hold_gap_squared, m_term_decomposition, map_paths, sup_norm_gap, Verdict,
};
use crate::dynamics::{
    fluctuation_direct, simulate_coupled_bundle, simulate_jump_diffusion, solve_sampled_hold,
    BundleParams,
};
use crate::error::Result;
use crate::matcore::{expm, mat_one_norm, propagator, Mat};
use crate::noisegen::{sample_prm, NoiseRecord, PathSeed};

use super::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfCheck {
    pub name: String,
    pub measured: f64,
    pub tolerance: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfCheckReport {
    pub checks: Vec<SelfCheck>,
    pub verdict: Verdict,
}

const BUNDLES: u64 = 16;
const POISSON_SEEDS: u64 = 4000;
const HOLD_DELTAS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

fn check(name: &str, measured: f64, tolerance: &str, ok: bool) -> SelfCheck {
    SelfCheck {
        name: name.to_string(),
        measured,
        tolerance: tolerance.to_string(),
        verdict: Verdict::from_bool(ok),
    }
}

/// `Σ_{k<64} (At)^k / k!`
pub fn taylor_expm(a: &Mat, t: f64) -> Mat {
    let n = a.rows();
    let at = a.scale(t);
    let mut term = Mat::identity(n);
    let mut sum = Mat::identity(n);
    for k in 1..64 {
        term = term.mul(&at).scale(1.0 / k as f64);
        sum = sum.add(&term);
    }
    sum
}

pub fn run_selfcheck(cfg: &ExperimentConfig) -> Result<SelfCheckReport> {
    let model = &cfg.model;
    let sys = &model.system;
    let mut checks = Vec::new();

    // Linear algebra.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let a = Mat::new(2, 2, (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let t = rng.random_range(-1.0..1.0) / mat_one_norm(&a).max(1e-3);
        let e = expm(&a, t)?;
        let err = mat_one_norm(&e.sub(&taylor_expm(&a, t))) / mat_one_norm(&e);
        worst = worst.max(err);
    }
    checks.push(check(
        "expm agrees with Taylor series",
        worst,
        "1e-12",
        worst <= 1e-12,
    ));

    let h = cfg.bundle_params(0).resolved_step();
    let mut worst_id: f64 = 0.0;
    let mut worst_semi: f64 = 0.0;
    for gen in [sys.a(), sys.closed_loop()] {
        let p1 = propagator(gen, h)?;
        let p2 = propagator(gen, 2.5 * h)?;
        let p12 = propagator(gen, 3.5 * h)?;
        let id = Mat::identity(gen.rows()).add(&gen.mul(&p1.psi));
        worst_id = worst_id.max(mat_one_norm(&p1.phi.sub(&id)));
        worst_semi = worst_semi.max(mat_one_norm(&p12.phi.sub(&p1.phi.mul(&p2.phi))));
    }
    checks.push(check(
        "phi = I + A psi",
        worst_id,
        "1e-12",
        worst_id <= 1e-12,
    ));
    checks.push(check(
        "propagator semigroup",
        worst_semi,
        "1e-10",
        worst_semi <= 1e-10,
    ));

    // Noise layer.
    let first = cfg.bundle_params(0);
    let last = cfg.bundle_params(cfg.schedule.len() - 1);
    let records: Vec<NoiseRecord> = map_paths(&(0..BUNDLES).collect::<Vec<_>>(), |i| {
        NoiseRecord::generate(
            &model.levy,
            cfg.horizon,
            first.delta,
            first.resolved_step(),
            PathSeed::new(cfg.master_seed, i),
        )
    })?;
    let mut missing = 0usize;
    for rec in &records {
        let grid = rec.grid();
        let samples = grid.sample_node_indices().count() as u64;
        let expected = grid.node(grid.len() - 1).sample_index + 1;
        missing += expected.abs_diff(samples) as usize;
        missing += rec
            .jumps()
            .events()
            .iter()
            .filter(|e| !grid.contains_time(e.time))
            .count();
    }
    checks.push(check(
        "sampling instants and jump times are grid nodes",
        missing as f64,
        "0",
        missing == 0,
    ));
    let replay = NoiseRecord::generate(
        &model.levy,
        cfg.horizon,
        first.delta,
        first.resolved_step(),
        PathSeed::new(cfg.master_seed, 0),
    )?;
    checks.push(check(
        "noise replay is bitwise",
        0.0,
        "exact",
        replay == records[0],
    ));

    let rate = model.levy.total_mass() * cfg.horizon;
    let counts: Vec<f64> = map_paths(&(0..POISSON_SEEDS).collect::<Vec<_>>(), |i| {
        Ok(sample_prm(
            &model.levy,
            cfg.horizon,
            PathSeed::new(cfg.master_seed ^ 0x5eed, i),
        )?
        .len() as f64)
    })?;
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    let band = 4.0 * (rate / POISSON_SEEDS as f64).sqrt();
    checks.push(check(
        "jump count mean within 4 sigma",
        (mean - rate).abs(),
        &format!("{band:e}"),
        (mean - rate).abs() <= band.max(f64::EPSILON),
    ));

    // Dynamics.
    let rec = &records[0];
    let zero = simulate_jump_diffusion(model, 0.0, first.delta, rec)?;
    let hold = solve_sampled_hold(sys, rec.grid());
    let gap = sup_norm_gap(&zero.path, &hold)?;
    checks.push(check(
        "epsilon = 0 reproduces the sampled hold",
        gap,
        "1e-12",
        gap <= 1e-12,
    ));

    let mut worst_direct: f64 = 0.0;
    let mut worst_mterm: f64 = 0.0;
    let mut worst_tiny: f64 = 0.0;
    for params in [first, last] {
        let results: Vec<(f64, f64, f64)> = map_paths(&(0..BUNDLES).collect::<Vec<_>>(), |i| {
            let seed = PathSeed::new(cfg.master_seed, i);
            let b = simulate_coupled_bundle(model, params, seed)?;
            let direct = fluctuation_direct(model, params.epsilon, &b.closed, &b.noise)?;
            let d = sup_norm_gap(&direct, &b.rescaled)?;
            let r = m_term_decomposition(model, &b, params.c)?;
            let tiny = simulate_coupled_bundle(
                model,
                BundleParams {
                    epsilon: 1e-12,
                    ..params
                },
                seed,
            )?;
            let t = sup_norm_gap(&tiny.perturbed, &tiny.sampled)?;
            Ok((d, r.residual / (1.0 + r.magnitude), t))
        })?;
        for (d, m, t) in results {
            worst_direct = worst_direct.max(d);
            worst_mterm = worst_mterm.max(m);
            worst_tiny = worst_tiny.max(t);
        }
    }
    checks.push(check(
        "direct fluctuation recursion matches (Y - y)/eps",
        worst_direct,
        "1e-9",
        worst_direct <= 1e-9,
    ));
    checks.push(check(
        "tiny epsilon stays on the sampled hold",
        worst_tiny,
        "1e-9",
        worst_tiny <= 1e-9,
    ));
    checks.push(check(
        "M-term identity residual / (1 + magnitude)",
        worst_mterm,
        "1e-8",
        worst_mterm <= 1e-8,
    ));

    // Deterministic hold error is second order in delta.
    let gaps: Vec<f64> = HOLD_DELTAS
        .iter()
        .map(|&d| hold_gap_squared(sys, cfg.horizon, d, (d / 50.0).min(cfg.horizon / 5000.0)))
        .collect::<Result<_>>()?;
    let slope = if gaps.iter().all(|&g| g > 0.0) {
        fit_loglog(&HOLD_DELTAS, &gaps)?.slope
    } else {
        f64::NAN
    };
    checks.push(check(
        "sup |y_delta - y|^2 slope against delta",
        slope,
        "2 +/- 0.05",
        (slope - 2.0).abs() <= 0.05,
    ));

    let verdict = Verdict::from_bool(checks.iter().all(|c| c.verdict.passed()));
    Ok(SelfCheckReport { checks, verdict })
}
