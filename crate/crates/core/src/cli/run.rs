//! Subcommand execution.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    decreasing_within_ci, fit_loglog, m_term_decomposition, map_bundles, mc_moments_for_paths,
    ExperimentPoint, GapSelector, LogLogFit, MTermReport, RateReport, Verdict,
};
use crate::dynamics::{simulate_coupled_bundle, RegimeKind, PROCESS_TAGS};
use crate::error::{Error, Result};
use crate::noisegen::PathSeed;

use super::config::ExperimentConfig;
use super::output::{fmt_f64, OutputDir};
use super::selfcheck::run_selfcheck;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Subcommand {
    Simulate,
    Lln,
    Clt,
    Mterms,
    Selfcheck,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Lln => "lln",
            Self::Clt => "clt",
            Self::Mterms => "mterms",
            Self::Selfcheck => "selfcheck",
        }
    }
}

pub const LLN_TARGET_SLOPE: f64 = 1.8;
pub const LLN_MIN_R2: f64 = 0.98;
pub const CLT_R2_TARGET_SLOPE: f64 = 0.8;
pub const CLT_R1_TARGET_SLOPE: f64 = 1.6;
pub const M2_TARGET_SLOPE: f64 = 1.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_checksum: String,
    pub tool_version: String,
    pub timestamp: String,
    pub duration_seconds: f64,
    pub workers: usize,
    pub files: Vec<String>,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.manifest.verdict != Some(Verdict::Fail)
    }
}

/// Worker count from `JUMPFLUX_WORKERS`, defaulting to the logical CPUs.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var("JUMPFLUX_WORKERS") {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| {
                Error::Config(format!(
                    "JUMPFLUX_WORKERS must be a positive integer, got `{v}`"
                ))
            })?;
            if n == 0 {
                return Err(Error::Config("JUMPFLUX_WORKERS must be positive".into()));
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

/// Runs one subcommand on a dedicated worker pool and writes its manifest.
///
/// On a module error the manifest is still written with status `failed`
/// and lists whatever files were completed, then the error is returned.
pub fn run_subcommand(
    cmd: Subcommand,
    cfg: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<RunOutcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let started = Instant::now();
    let timestamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let mut out = OutputDir::create(cfg.output_dir.join(cmd.name()), &cfg.checksum)?;
    let result = pool.install(|| match cmd {
        Subcommand::Simulate => simulate(cfg, &mut out),
        Subcommand::Lln => lln(cfg, &mut out),
        Subcommand::Clt => clt(cfg, &mut out),
        Subcommand::Mterms => mterms(cfg, &mut out),
        Subcommand::Selfcheck => selfcheck(cfg, &mut out),
    });
    let mut manifest = RunManifest {
        subcommand: cmd.name().to_string(),
        config_checksum: cfg.checksum.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp,
        duration_seconds: 0.0,
        workers: pool.current_num_threads(),
        files: out.files().to_vec(),
        status: "complete".into(),
        verdict: None,
        error: None,
    };
    match &result {
        Ok(v) => manifest.verdict = *v,
        Err(e) => {
            manifest.status = "failed".into();
            manifest.error = Some(e.to_string());
        }
    }
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    std::fs::write(out.path().join("manifest.json"), text)?;
    result.map(|_| RunOutcome {
        dir: out.path().to_path_buf(),
        manifest,
    })
}

fn point_rows(points: &[ExperimentPoint]) -> Vec<Vec<String>> {
    points
        .iter()
        .map(|p| {
            vec![
                fmt_f64(p.epsilon),
                fmt_f64(p.delta),
                fmt_f64(p.kappa),
                p.paths.to_string(),
                fmt_f64(p.moment),
                fmt_f64(p.ci_half_width),
            ]
        })
        .collect()
}

const POINT_HEADER: [&str; 6] = [
    "epsilon",
    "delta",
    "kappa",
    "paths",
    "moment",
    "ci_half_width",
];

fn write_rate(out: &mut OutputDir, report: &RateReport) -> Result<()> {
    out.json("rate_report.json", report)?;
    out.csv("points.csv", &POINT_HEADER, point_rows(&report.points))?;
    let rows = report
        .plot_rows()
        .into_iter()
        .map(|r| r.iter().map(|v| fmt_f64(*v)).collect());
    out.csv(
        "plot.csv",
        &["log10_epsilon", "log10_moment", "log10_fit"],
        rows,
    )
}

fn require_paths(cfg: &ExperimentConfig) -> Result<Vec<u64>> {
    if cfg.paths_per_point < 2 {
        return Err(Error::Estimator(format!(
            "paths_per_point must be at least 2 for a confidence interval, got {}",
            cfg.paths_per_point
        )));
    }
    Ok((0..cfg.paths_per_point as u64).collect())
}

#[derive(Serialize)]
struct BundleMeta {
    epsilon: f64,
    delta: f64,
    c: f64,
    horizon: f64,
    internal_step: f64,
    master_seed: u64,
    path_index: u64,
    nodes: usize,
    noise_fingerprint: String,
    jump_times: Vec<f64>,
    jump_marks: Vec<Vec<f64>>,
}

fn simulate(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Option<Verdict>> {
    let params = cfg.bundle_params(0);
    let seed = PathSeed::new(cfg.master_seed, 0);
    let b = simulate_coupled_bundle(&cfg.model, params, seed)?;
    let grid = b.grid();
    let mut rows = Vec::with_capacity(grid.len() * PROCESS_TAGS.len() * cfg.model.n());
    for (j, t) in grid.times().enumerate() {
        for (tag, path) in b.processes() {
            for (i, v) in path.at(j).iter().enumerate() {
                rows.push(vec![
                    fmt_f64(t),
                    tag.to_string(),
                    i.to_string(),
                    fmt_f64(*v),
                ]);
            }
        }
    }
    out.csv(
        "bundle.csv",
        &["time", "process", "coordinate", "value"],
        rows,
    )?;
    let events = b.noise.jumps().events();
    out.json(
        "bundle.meta.json",
        &BundleMeta {
            epsilon: params.epsilon,
            delta: params.delta,
            c: params.c,
            horizon: params.horizon,
            internal_step: params.resolved_step(),
            master_seed: seed.master,
            path_index: seed.path,
            nodes: grid.len(),
            noise_fingerprint: format!("{:016x}", b.noise.fingerprint()),
            jump_times: events.iter().map(|e| e.time).collect(),
            jump_marks: events.iter().map(|e| e.mark.clone()).collect(),
        },
    )?;
    Ok(None)
}

fn lln(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Option<Verdict>> {
    let indices = require_paths(cfg)?;
    let mut points = Vec::new();
    for i in 0..cfg.schedule.len() {
        let p = mc_moments_for_paths(
            &cfg.model,
            cfg.bundle_params(i),
            &[GapSelector::Lln],
            cfg.master_seed,
            &indices,
        )?;
        points.push(p[0]);
    }
    let report = RateReport::new(
        "E sup |Y - y|^2",
        "(eps^2 + delta^2) C",
        points,
        LLN_TARGET_SLOPE,
        Some(LLN_MIN_R2),
    )?;
    write_rate(out, &report)?;
    Ok(Some(report.verdict))
}

fn clt(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Option<Verdict>> {
    let target = match cfg.schedule.kind() {
        RegimeKind::R1 => CLT_R1_TARGET_SLOPE,
        RegimeKind::R2 => CLT_R2_TARGET_SLOPE,
        RegimeKind::R3 => {
            return Err(Error::Config(
                "regime R3 has no limit fluctuation; clt needs R1 or R2".into(),
            ))
        }
    };
    let indices = require_paths(cfg)?;
    let mut clt_points = Vec::new();
    let mut remainder = Vec::new();
    for i in 0..cfg.schedule.len() {
        let p = mc_moments_for_paths(
            &cfg.model,
            cfg.bundle_params(i),
            &[GapSelector::Clt, GapSelector::Expansion],
            cfg.master_seed,
            &indices,
        )?;
        clt_points.push(p[0]);
        remainder.push(p[1]);
    }
    let mut report = RateReport::new(
        "E sup |Z_eps - Z|^2",
        "(c+1)^2 (eps^2 + delta + kappa^2) C",
        clt_points,
        target,
        None,
    )?;
    if cfg.schedule.kind() == RegimeKind::R2 {
        let ok = decreasing_within_ci(&report.points);
        report = report.with_check("moments decrease within confidence bands", ok);
    }
    report = report.with_check(
        "expansion remainder decreases within confidence bands",
        decreasing_within_ci(&remainder),
    );
    write_rate(out, &report)?;
    out.csv("remainder.csv", &POINT_HEADER, point_rows(&remainder))?;
    Ok(Some(report.verdict))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MTermPoint {
    pub epsilon: f64,
    pub delta: f64,
    pub paths: usize,
    pub mean_sup_m1: f64,
    /// `sup |M₂ − ℓ|²`, averaged over paths.
    pub m2_gap_squared: f64,
    pub mean_sup_m3: f64,
    pub mean_sup_m4: f64,
    pub max_residual: f64,
    pub residual_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MTermSummary {
    pub c: f64,
    pub points: Vec<MTermPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m2_fit_against_delta: Option<LogLogFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m2_target_slope: Option<f64>,
    pub residual_ok: bool,
    pub verdict: Verdict,
}

/// Per-path reports for every ladder entry, then the summary.
pub fn mterm_study(cfg: &ExperimentConfig) -> Result<(Vec<MTermReport>, MTermSummary)> {
    let c = cfg.schedule.limit_c();
    let mut all = Vec::new();
    let mut points = Vec::new();
    for i in 0..cfg.schedule.len() {
        let params = cfg.bundle_params(i);
        let reports = map_bundles(&cfg.model, params, cfg.master_seed, cfg.mterm_paths, |b| {
            m_term_decomposition(&cfg.model, b, c)
        })?;
        let mean =
            |f: fn(&MTermReport) -> f64| reports.iter().map(f).sum::<f64>() / reports.len() as f64;
        points.push(MTermPoint {
            epsilon: params.epsilon,
            delta: params.delta,
            paths: reports.len(),
            mean_sup_m1: mean(|r| r.sup_m1),
            m2_gap_squared: mean(|r| r.sup_m2_minus_ell * r.sup_m2_minus_ell),
            mean_sup_m3: mean(|r| r.sup_m3),
            mean_sup_m4: mean(|r| r.sup_m4),
            max_residual: reports.iter().map(|r| r.residual).fold(0.0, f64::max),
            residual_ok: reports.iter().all(MTermReport::residual_ok),
        });
        all.extend(reports);
    }
    let residual_ok = points.iter().all(|p| p.residual_ok);
    let m2_fit = if points.len() >= 3 {
        let xs: Vec<f64> = points.iter().map(|p| p.delta).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.m2_gap_squared).collect();
        fit_loglog(&xs, &ys).ok()
    } else {
        None
    };
    let m2_target = (cfg.schedule.kind() == RegimeKind::R2).then_some(M2_TARGET_SLOPE);
    let slope_ok = match (m2_target, m2_fit) {
        (Some(t), Some(f)) => f.slope >= t,
        (Some(_), None) => false,
        (None, _) => true,
    };
    let summary = MTermSummary {
        c,
        points,
        m2_fit_against_delta: m2_fit,
        m2_target_slope: m2_target,
        residual_ok,
        verdict: Verdict::from_bool(residual_ok && slope_ok),
    };
    Ok((all, summary))
}

fn mterms(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Option<Verdict>> {
    let (reports, summary) = mterm_study(cfg)?;
    let per_point = cfg.mterm_paths;
    let rows = reports.iter().enumerate().map(|(k, r)| {
        vec![
            fmt_f64(r.epsilon),
            fmt_f64(r.delta),
            (k % per_point).to_string(),
            fmt_f64(r.sup_m1),
            fmt_f64(r.sup_m2_minus_ell),
            fmt_f64(r.sup_m3),
            fmt_f64(r.sup_m4),
            fmt_f64(r.residual),
            fmt_f64(r.magnitude),
        ]
    });
    out.csv(
        "mterms.csv",
        &[
            "epsilon",
            "delta",
            "path",
            "sup_m1",
            "sup_m2_minus_ell",
            "sup_m3",
            "sup_m4",
            "residual",
            "magnitude",
        ],
        rows,
    )?;
    out.json("mterms_report.json", &summary)?;
    Ok(Some(summary.verdict))
}

fn selfcheck(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Option<Verdict>> {
    let report = run_selfcheck(cfg)?;
    out.json("selfcheck.json", &report)?;
    Ok(Some(report.verdict))
}
