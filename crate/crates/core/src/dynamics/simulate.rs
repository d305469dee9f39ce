//! Path solvers on a jump-adapted grid.
//!
//! The linear part of the drift is always integrated exactly with
//! `(Φ, Ψ) = (e^{Ah}, ∫₀^h e^{Au} du)`, so with the noise switched off every
//! solver reproduces its deterministic counterpart to rounding. The noise
//! coefficients are frozen at the left node of each step (Euler–Maruyama),
//! and jumps are applied at their own nodes using the pre-jump state.

use crate::error::{Error, Result};
use crate::matcore::PropagatorCache;
use crate::noisegen::{NoiseRecord, TimeGrid};

use super::model::{Model, SystemSpec};

/// Node values of one process, stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    data: Vec<f64>,
    /// Fingerprint of the noise record that drove this path, if any.
    noise: Option<u64>,
}

impl Trajectory {
    pub fn with_capacity(dim: usize, nodes: usize) -> Self {
        Self {
            dim,
            data: Vec::with_capacity(dim * nodes),
            noise: None,
        }
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut t = Self::with_capacity(dim, rows.len());
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {dim}",
                    r.len()
                )));
            }
            t.push(r);
        }
        Ok(t)
    }

    pub fn push(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.dim);
        self.data.extend_from_slice(v);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn at(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.at(self.len() - 1)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn noise_fingerprint(&self) -> Option<u64> {
        self.noise
    }

    fn tagged(mut self, noise: &NoiseRecord) -> Self {
        self.noise = Some(noise.fingerprint());
        self
    }

    /// Nodewise `(self − other) · factor`.
    pub fn scaled_difference(&self, other: &Trajectory, factor: f64) -> Result<Trajectory> {
        check_same_shape(self, other)?;
        Ok(Trajectory {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b) * factor)
                .collect(),
            noise: self.noise.or(other.noise),
        })
    }
}

pub(crate) fn check_same_shape(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.dim != b.dim || a.data.len() != b.data.len() {
        return Err(Error::GridMismatch(format!(
            "paths differ in shape: {} nodes of dimension {} vs {} nodes of dimension {}",
            a.len(),
            a.dim,
            b.len(),
            b.dim
        )));
    }
    Ok(())
}

fn check_grid(path: &Trajectory, grid: &TimeGrid) -> Result<()> {
    if path.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "path has {} nodes, grid has {}",
            path.len(),
            grid.len()
        )));
    }
    Ok(())
}

fn check_noise(model: &Model, delta: Option<f64>, noise: &NoiseRecord) -> Result<()> {
    if noise.dim() != model.n() {
        return Err(Error::Dimension(format!(
            "noise record has dimension {}, state dimension is {}",
            noise.dim(),
            model.n()
        )));
    }
    if let Some(delta) = delta {
        if noise.grid().delta() != delta {
            return Err(Error::Config(format!(
                "noise grid was built for delta {}, simulation asked for {delta}",
                noise.grid().delta()
            )));
        }
    }
    Ok(())
}

/// `y_t = e^{(A−BK)t} y0` on every node.
pub fn solve_closed(sys: &SystemSpec, grid: &TimeGrid) -> Trajectory {
    let mut cache =
        PropagatorCache::new(sys.closed_loop().clone()).expect("square by construction");
    let mut out = Trajectory::with_capacity(sys.n(), grid.len());
    let mut y = sys.y0().to_vec();
    let mut next = vec![0.0; y.len()];
    out.push(&y);
    for &dt in grid.steps() {
        cache.get(dt).phi.mul_vec_into(&y, &mut next);
        std::mem::swap(&mut y, &mut next);
        out.push(&y);
    }
    out
}

/// Sample-and-hold solution: on `[kδ, (k+1)δ)` the input is `−BK y_{kδ}`.
pub fn solve_sampled_hold(sys: &SystemSpec, grid: &TimeGrid) -> Trajectory {
    hybrid(sys, grid, None).0
}

/// Output of [`simulate_jump_diffusion`].
#[derive(Debug, Clone, PartialEq)]
pub struct JumpDiffusionPath {
    /// Right-continuous node values.
    pub path: Trajectory,
    /// Left limits `Y_{t−}`; they differ from `path` only at jump nodes.
    pub left_limits: Trajectory,
}

/// `dY = [A Y − BK Y_{π_δ(t)−}] dt + ε σ(Y) dW + ε ∫ F(Y, x) Ñ(dt, dx)`.
///
/// With `ε = 0` the noise terms are skipped and the result is bitwise equal
/// to [`solve_sampled_hold`].
pub fn simulate_jump_diffusion(
    model: &Model,
    epsilon: f64,
    delta: f64,
    noise: &NoiseRecord,
) -> Result<JumpDiffusionPath> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::Config(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    check_noise(model, Some(delta), noise)?;
    let (path, left) = hybrid(&model.system, noise.grid(), Some((model, epsilon, noise)));
    Ok(JumpDiffusionPath {
        path: path.tagged(noise),
        left_limits: left.tagged(noise),
    })
}

fn hybrid(
    sys: &SystemSpec,
    grid: &TimeGrid,
    noise: Option<(&Model, f64, &NoiseRecord)>,
) -> (Trajectory, Trajectory) {
    let n = sys.n();
    let noise = noise.filter(|(_, eps, _)| *eps != 0.0);
    let mut cache = PropagatorCache::new(sys.a().clone()).expect("square by construction");
    let mut values = Trajectory::with_capacity(n, grid.len());
    let mut left = Trajectory::with_capacity(n, grid.len());
    let mut y = sys.y0().to_vec();
    // BK times the latched sample; Y_{0−} = y0.
    let mut held = sys.bk().mul_vec(&y);
    let mut next = vec![0.0; n];
    let mut pre = vec![0.0; n];
    let mut comp = vec![0.0; n];
    values.push(&y);
    left.push(&y);
    for (j, &dt) in grid.steps().iter().enumerate() {
        let prop = cache.get(dt);
        prop.phi.mul_vec_into(&y, &mut next);
        prop.psi.mul_vec_acc(&held, -1.0, &mut next);
        if let Some((model, eps, rec)) = noise {
            model
                .diffusion
                .apply_acc(&y, rec.increment(j), eps, &mut next);
            comp.fill(0.0);
            model.jump.apply_acc(&y, model.levy.m1(), 1.0, &mut comp);
            for (v, c) in next.iter_mut().zip(&comp) {
                *v -= eps * dt * c;
            }
        }
        left.push(&next);
        if grid.node(j + 1).is_sample {
            sys.bk().mul_vec_into(&next, &mut held);
        }
        if let Some((model, eps, rec)) = noise {
            if let Some(mark) = rec.jump_at(j + 1) {
                pre.copy_from_slice(&next);
                model.jump.apply_acc(&pre, mark, eps, &mut next);
            }
        }
        std::mem::swap(&mut y, &mut next);
        values.push(&y);
    }
    (values, left)
}

/// Limit fluctuation
/// `dZ = [(A−BK) Z + BK (c/2)(A−BK) y] dt + σ(y) dW + ∫ F(y, x) Ñ(dt, dx)`, `Z_0 = 0`,
/// stepped with plain Euler along the frozen deterministic path `y`.
pub fn simulate_limit_fluctuation(
    model: &Model,
    c: f64,
    closed: &Trajectory,
    noise: &NoiseRecord,
) -> Result<Trajectory> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::Config(format!("c must be finite and >= 0, got {c}")));
    }
    check_noise(model, None, noise)?;
    let grid = noise.grid();
    check_grid(closed, grid)?;
    let n = model.n();
    let a_cl = model.system.closed_loop();
    let source = model.system.bk().mul(a_cl).scale(c / 2.0);
    let mut z = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut out = Trajectory::with_capacity(n, grid.len());
    out.push(&z);
    for (j, &dt) in grid.steps().iter().enumerate() {
        let y = closed.at(j);
        next.copy_from_slice(&z);
        a_cl.mul_vec_acc(&z, dt, &mut next);
        source.mul_vec_acc(y, dt, &mut next);
        model
            .diffusion
            .apply_acc(y, noise.increment(j), 1.0, &mut next);
        model.jump.apply_acc(y, model.levy.m1(), -dt, &mut next);
        if let Some(mark) = noise.jump_at(j + 1) {
            model.jump.apply_acc(closed.at(j + 1), mark, 1.0, &mut next);
        }
        std::mem::swap(&mut z, &mut next);
        out.push(&z);
    }
    Ok(out.tagged(noise))
}

/// `Z^{ε,δ} = (Y − y)/ε` nodewise.
pub fn fluctuation_rescaled(
    perturbed: &Trajectory,
    closed: &Trajectory,
    epsilon: f64,
) -> Result<Trajectory> {
    if epsilon == 0.0 {
        return Err(Error::DivisionByZero(
            "rescaled fluctuation needs epsilon > 0".into(),
        ));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Config(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    perturbed.scaled_difference(closed, 1.0 / epsilon)
}

/// Integrates the equation satisfied by `Z^{ε,δ}` directly, without going
/// through `Y`. Used to cross-check [`fluctuation_rescaled`].
pub fn fluctuation_direct(
    model: &Model,
    epsilon: f64,
    closed: &Trajectory,
    noise: &NoiseRecord,
) -> Result<Trajectory> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::DivisionByZero(
            "direct fluctuation needs epsilon > 0".into(),
        ));
    }
    check_noise(model, None, noise)?;
    let grid = noise.grid();
    check_grid(closed, grid)?;
    let n = model.n();
    let sys = &model.system;
    let bk = sys.bk();
    let mut cache = PropagatorCache::new(sys.a().clone())?;
    let mut z = vec![0.0; n];
    let mut z_held = vec![0.0; n];
    let mut y_held = sys.y0().to_vec();
    let mut next = vec![0.0; n];
    let mut drift = vec![0.0; n];
    let mut state = vec![0.0; n];
    let mut out = Trajectory::with_capacity(n, grid.len());
    out.push(&z);
    for (j, &dt) in grid.steps().iter().enumerate() {
        let prop = cache.get(dt);
        let y = closed.at(j);
        let y_next = closed.at(j + 1);

        prop.phi.mul_vec_into(&z, &mut next);
        prop.psi.mul_vec_acc(&bk.mul_vec(&z_held), -1.0, &mut next);

        // Deterministic defect of the hybrid step against the closed loop.
        prop.phi.mul_vec_into(y, &mut drift);
        prop.psi.mul_vec_acc(&bk.mul_vec(&y_held), -1.0, &mut drift);
        for ((v, d), yn) in next.iter_mut().zip(&drift).zip(y_next) {
            *v += (d - yn) / epsilon;
        }

        for ((s, yi), zi) in state.iter_mut().zip(y).zip(&z) {
            *s = yi + epsilon * zi;
        }
        model
            .diffusion
            .apply_acc(&state, noise.increment(j), 1.0, &mut next);
        model
            .jump
            .apply_acc(&state, model.levy.m1(), -dt, &mut next);

        if grid.node(j + 1).is_sample {
            z_held.copy_from_slice(&next);
            y_held.copy_from_slice(y_next);
        }
        if let Some(mark) = noise.jump_at(j + 1) {
            for ((s, yi), zi) in state.iter_mut().zip(y_next).zip(&next) {
                *s = yi + epsilon * zi;
            }
            model.jump.apply_acc(&state, mark, 1.0, &mut next);
        }
        std::mem::swap(&mut z, &mut next);
        out.push(&z);
    }
    Ok(out.tagged(noise))
}

/// Regime-3 diagnostic `V = (Y − y)/δ`; no limit is compared against it.
pub fn rescale_by_delta(
    perturbed: &Trajectory,
    closed: &Trajectory,
    delta: f64,
) -> Result<Trajectory> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::DivisionByZero(format!(
            "delta rescaling needs delta > 0, got {delta}"
        )));
    }
    perturbed.scaled_difference(closed, 1.0 / delta)
}

/// Exact sampled-hold value at `t` from the last sample, as a cross-check:
/// `y(t) = Φ(t−kδ) y_{kδ} − Ψ(t−kδ) BK y_{kδ}`.
pub fn sampled_hold_from_sample(
    sys: &SystemSpec,
    y_sample: &[f64],
    elapsed: f64,
) -> Result<Vec<f64>> {
    if elapsed == 0.0 {
        return Ok(y_sample.to_vec());
    }
    let prop = crate::matcore::propagator(sys.a(), elapsed)?;
    let mut out = prop.phi.mul_vec(y_sample);
    let held = sys.bk().mul_vec(y_sample);
    prop.psi.mul_vec_acc(&held, -1.0, &mut out);
    Ok(out)
}
