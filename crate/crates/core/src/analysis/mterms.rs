//! Splitting `∫₀ᵗ (Y_s − Y_{π_δ(s)})/ε ds` into four iterated integrals.
//!
//! On a sampling interval with latched state `L = Y_{kδ−}` and deterministic
//! sample `y_k = y_{kδ}`, one step of the hybrid recursion changes
//! `(Y − L)/ε` by
//!
//! ```text
//! Ψ [A (Y_j − L) + (A−BK)(L − y_k)] / ε     M₁  drift differences
//! Ψ (A−BK) y_k / ε                          M₂  held deterministic term
//! σ(Y_j) ΔW_j                               M₃  Brownian
//! −G(Y_j) m₁ Δt  and  G(Y_{τ−}) ξ at jumps  M₄  compensated Poisson
//! ```
//!
//! Each inner sum restarts at every sampling instant. The outer time integral
//! uses the trapezoid rule between a node value and the next left limit, for
//! the four inner sums and for `(Y − L)/ε` alike, so the identity holds to
//! rounding.

use serde::{Deserialize, Serialize};

use crate::dynamics::{solve_closed, Model, PathBundle, SystemSpec, Trajectory};
use crate::error::{Error, Result};
use crate::matcore::{one_norm, one_norm_diff, PropagatorCache};
use crate::noisegen::TimeGrid;

/// `ℓ(t) = (c/2)(y_t − y0)` along a closed-loop path.
pub fn ell_from_closed(closed: &Trajectory, y0: &[f64], c: f64) -> Trajectory {
    let mut out = Trajectory::with_capacity(closed.dim(), closed.len());
    let mut row = vec![0.0; closed.dim()];
    for y in closed.rows() {
        for ((r, yi), y0i) in row.iter_mut().zip(y).zip(y0) {
            *r = 0.5 * c * (yi - y0i);
        }
        out.push(&row);
    }
    out
}

/// `ℓ(t) = (c/2)∫₀ᵗ (A−BK) y_s ds` on every node of `grid`.
pub fn ell_path(sys: &SystemSpec, c: f64, grid: &TimeGrid) -> Trajectory {
    ell_from_closed(&solve_closed(sys, grid), sys.y0(), c)
}

/// Cumulative node values of the four terms and of the left-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct MTermSeries {
    pub terms: [Trajectory; 4],
    pub lhs: Trajectory,
    pub ell: Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MTermReport {
    pub epsilon: f64,
    pub delta: f64,
    pub c: f64,
    pub sup_m1: f64,
    pub sup_m2_minus_ell: f64,
    pub sup_m3: f64,
    pub sup_m4: f64,
    /// `sup |ΣMᵢ − ∫(Y − Y_{π_δ})/ε|`
    pub residual: f64,
    /// `sup |∫(Y − Y_{π_δ})/ε|`
    pub magnitude: f64,
}

/// Identity tolerance `1e-8 · (1 + magnitude)`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

impl MTermReport {
    pub fn residual_ok(&self) -> bool {
        self.residual <= RESIDUAL_TOLERANCE * (1.0 + self.magnitude)
    }
}

pub fn m_term_series(model: &Model, bundle: &PathBundle, c: f64) -> Result<MTermSeries> {
    let eps = bundle.params.epsilon;
    if !(eps > 0.0) {
        return Err(Error::DivisionByZero("M-terms need epsilon > 0".into()));
    }
    let grid = bundle.grid();
    let sys = &model.system;
    let n = sys.n();
    let (a, a_cl) = (sys.a(), sys.closed_loop());
    let y_big = &bundle.perturbed;
    let y_left = &bundle.perturbed_left;
    let y = &bundle.closed;
    if y_big.len() != grid.len() || y_left.len() != grid.len() || y.len() != grid.len() {
        return Err(Error::GridMismatch(
            "bundle paths do not match the grid".into(),
        ));
    }
    let noise = &bundle.noise;
    let mut cache = PropagatorCache::new(a.clone())?;

    let mut latch = sys.y0().to_vec();
    let mut y_k = sys.y0().to_vec();
    let mut inner = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut inner_left = inner.clone();
    let mut outer = inner.clone();
    let mut lhs = vec![0.0; n];
    let mut terms: [Trajectory; 4] =
        std::array::from_fn(|_| Trajectory::with_capacity(n, grid.len()));
    let mut lhs_path = Trajectory::with_capacity(n, grid.len());
    for t in &mut terms {
        t.push(&vec![0.0; n]);
    }
    lhs_path.push(&lhs);

    let mut tmp = vec![0.0; n];
    for (j, &dt) in grid.steps().iter().enumerate() {
        let prop = cache.get(dt);
        let yj = y_big.at(j);

        // M₁ inner step
        tmp.fill(0.0);
        let dev: Vec<f64> = yj.iter().zip(&latch).map(|(u, l)| u - l).collect();
        let held: Vec<f64> = latch.iter().zip(&y_k).map(|(l, d)| l - d).collect();
        a.mul_vec_acc(&dev, 1.0, &mut tmp);
        a_cl.mul_vec_acc(&held, 1.0, &mut tmp);
        inner_left[0].copy_from_slice(&inner[0]);
        prop.psi.mul_vec_acc(&tmp, 1.0 / eps, &mut inner_left[0]);

        // M₂
        let src = a_cl.mul_vec(&y_k);
        inner_left[1].copy_from_slice(&inner[1]);
        prop.psi.mul_vec_acc(&src, 1.0 / eps, &mut inner_left[1]);

        // M₃
        inner_left[2].copy_from_slice(&inner[2]);
        model
            .diffusion
            .apply_acc(yj, noise.increment(j), 1.0, &mut inner_left[2]);

        // M₄, compensator part
        inner_left[3].copy_from_slice(&inner[3]);
        model
            .jump
            .apply_acc(yj, model.levy.m1(), -dt, &mut inner_left[3]);

        for i in 0..4 {
            for ((o, a0), a1) in outer[i].iter_mut().zip(&inner[i]).zip(&inner_left[i]) {
                *o += 0.5 * (a0 + a1) * dt;
            }
        }
        let yl = y_left.at(j + 1);
        for (((o, u0), u1), l) in lhs.iter_mut().zip(yj).zip(yl).zip(&latch) {
            *o += 0.5 * ((u0 - l) + (u1 - l)) / eps * dt;
        }

        if grid.node(j + 1).is_sample {
            latch.copy_from_slice(yl);
            y_k.copy_from_slice(y.at(j + 1));
            for v in &mut inner {
                v.fill(0.0);
            }
        } else {
            for (v, w) in inner.iter_mut().zip(&inner_left) {
                v.copy_from_slice(w);
            }
        }
        if let Some(mark) = noise.jump_at(j + 1) {
            model.jump.apply_acc(yl, mark, 1.0, &mut inner[3]);
        }

        for (t, o) in terms.iter_mut().zip(&outer) {
            t.push(o);
        }
        lhs_path.push(&lhs);
    }

    Ok(MTermSeries {
        terms,
        lhs: lhs_path,
        ell: ell_from_closed(y, sys.y0(), c),
    })
}

fn sup_norm(path: &Trajectory) -> f64 {
    path.rows().map(one_norm).fold(0.0, f64::max)
}

pub fn m_term_decomposition(model: &Model, bundle: &PathBundle, c: f64) -> Result<MTermReport> {
    let s = m_term_series(model, bundle, c)?;
    let n = model.n();
    let mut residual: f64 = 0.0;
    let mut total = vec![0.0; n];
    for j in 0..s.lhs.len() {
        total.fill(0.0);
        for t in &s.terms {
            for (acc, v) in total.iter_mut().zip(t.at(j)) {
                *acc += v;
            }
        }
        residual = residual.max(one_norm_diff(&total, s.lhs.at(j)));
    }
    let sup_m2_minus_ell = s.terms[1]
        .rows()
        .zip(s.ell.rows())
        .map(|(m, l)| one_norm_diff(m, l))
        .fold(0.0, f64::max);
    Ok(MTermReport {
        epsilon: bundle.params.epsilon,
        delta: bundle.params.delta,
        c,
        sup_m1: sup_norm(&s.terms[0]),
        sup_m2_minus_ell,
        sup_m3: sup_norm(&s.terms[2]),
        sup_m4: sup_norm(&s.terms[3]),
        residual,
        magnitude: sup_norm(&s.lhs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate_coupled_bundle, BundleParams, DiffusionFamily, JumpFamily};
    use crate::matcore::Mat;
    use crate::noisegen::{Atom, LevyMeasureSpec, PathSeed};

    fn system(bk_equals_a: bool) -> SystemSpec {
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let (b, k) = if bk_equals_a {
            (Mat::identity(2), a.clone())
        } else {
            (
                Mat::from_rows(&[vec![0.0], vec![1.0]]).unwrap(),
                Mat::from_rows(&[vec![1.0, 2.0]]).unwrap(),
            )
        };
        SystemSpec::new(a, b, k, vec![1.0, 0.0]).unwrap()
    }

    fn noisy(sys: SystemSpec) -> Model {
        let levy = LevyMeasureSpec::atomic(
            2,
            vec![Atom {
                location: vec![0.0, 0.4],
                mass: 2.0,
            }],
        )
        .unwrap();
        Model::new(
            sys,
            DiffusionFamily::affine(
                Mat::identity(2).scale(0.3),
                vec![Mat::diag(&[0.1, 0.0]), Mat::diag(&[0.0, 0.1])],
            )
            .unwrap(),
            JumpFamily::identity(2),
            levy,
        )
        .unwrap()
    }

    fn params() -> BundleParams {
        BundleParams {
            epsilon: 0.1,
            delta: 0.05,
            c: 0.5,
            horizon: 1.0,
            step: None,
        }
    }

    #[test]
    fn identity_holds_with_noise() {
        let model = noisy(system(false));
        let b = simulate_coupled_bundle(&model, params(), PathSeed::new(4, 1)).unwrap();
        let r = m_term_decomposition(&model, &b, 0.5).unwrap();
        assert!(r.residual_ok(), "{r:?}");
        assert!(r.sup_m3 > 0.0 && r.sup_m4 > 0.0);
    }

    #[test]
    fn noiseless_terms_vanish() {
        let model = Model::noiseless(system(false));
        let b = simulate_coupled_bundle(&model, params(), PathSeed::new(4, 1)).unwrap();
        let r = m_term_decomposition(&model, &b, 0.5).unwrap();
        assert_eq!(r.sup_m3, 0.0);
        assert_eq!(r.sup_m4, 0.0);
        assert!(r.residual_ok());
    }

    #[test]
    fn constant_closed_loop_has_no_m2() {
        let model = noisy(system(true));
        let b = simulate_coupled_bundle(&model, params(), PathSeed::new(4, 2)).unwrap();
        let s = m_term_series(&model, &b, 0.5).unwrap();
        assert!(s.terms[1].as_slice().iter().all(|&v| v == 0.0));
        assert!(s.ell.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ell_scalar_closed_form() {
        let sys = SystemSpec::new(
            Mat::zeros(1, 1),
            Mat::identity(1),
            Mat::identity(1),
            vec![1.0],
        )
        .unwrap();
        let grid = TimeGrid::uniform(1.0, 0.1, 0.01).unwrap();
        let ell = ell_path(&sys, 2.0, &grid);
        assert!((ell.last()[0] - ((-1.0f64).exp() - 1.0)).abs() < 1e-12);
        assert!(ell_path(&sys, 0.0, &grid)
            .as_slice()
            .iter()
            .all(|&v| v == 0.0));
    }
}
