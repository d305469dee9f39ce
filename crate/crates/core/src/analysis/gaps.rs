//! Pathwise error functionals.

use crate::dynamics::{solve_closed, solve_sampled_hold, PathBundle, SystemSpec, Trajectory};
use crate::error::{Error, Result};
use crate::matcore::one_norm_diff;
use crate::noisegen::TimeGrid;

/// `max_j |a_j − b_j|₁` over grid nodes.
pub fn sup_norm_gap(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.dim() != b.dim() || a.len() != b.len() {
        return Err(Error::GridMismatch(format!(
            "cannot compare a {}-node path with a {}-node path",
            a.len(),
            b.len()
        )));
    }
    Ok(a.rows()
        .zip(b.rows())
        .map(|(x, y)| one_norm_diff(x, y))
        .fold(0.0, f64::max))
}

/// `sup |y^δ − y|²` for the noiseless system on a uniform grid.
pub fn hold_gap_squared(sys: &SystemSpec, horizon: f64, delta: f64, step: f64) -> Result<f64> {
    let grid = TimeGrid::uniform(horizon, delta, step)?;
    let gap = sup_norm_gap(&solve_sampled_hold(sys, &grid), &solve_closed(sys, &grid))?;
    Ok(gap * gap)
}

/// Which squared sup-gap a Monte Carlo run averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GapSelector {
    /// `sup |Y − y|²`
    Lln,
    /// `sup |Z^{ε,δ} − Z|²`
    Clt,
    /// `sup |Y − y − εZ|² / ε²`, formed from `Y`, `y` and `Z` directly.
    Expansion,
}

impl GapSelector {
    pub fn label(self) -> &'static str {
        match self {
            Self::Lln => "lln",
            Self::Clt => "clt",
            Self::Expansion => "expansion",
        }
    }

    pub fn evaluate(self, bundle: &PathBundle) -> Result<f64> {
        let gap = match self {
            Self::Lln => sup_norm_gap(&bundle.perturbed, &bundle.closed)?,
            Self::Clt => sup_norm_gap(&bundle.rescaled, &bundle.limit)?,
            Self::Expansion => {
                let eps = bundle.params.epsilon;
                let (y_big, y, z) = (&bundle.perturbed, &bundle.closed, &bundle.limit);
                if y_big.len() != y.len() || y.len() != z.len() {
                    return Err(Error::GridMismatch("bundle paths differ in length".into()));
                }
                let mut sup: f64 = 0.0;
                for j in 0..y.len() {
                    let r: f64 = y_big
                        .at(j)
                        .iter()
                        .zip(y.at(j))
                        .zip(z.at(j))
                        .map(|((a, b), c)| (a - b - eps * c).abs())
                        .sum();
                    sup = sup.max(r);
                }
                sup / eps
            }
        };
        Ok(gap * gap)
    }
}
