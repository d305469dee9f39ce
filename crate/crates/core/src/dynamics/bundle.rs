//! One coupled realization of all five processes.

use crate::error::{Error, Result};
use crate::noisegen::{NoiseRecord, PathSeed, TimeGrid};

use super::model::Model;
use super::simulate::{
    fluctuation_rescaled, simulate_jump_diffusion, simulate_limit_fluctuation, solve_closed,
    solve_sampled_hold, Trajectory,
};

/// Process tags used in path dumps, in output order.
pub const PROCESS_TAGS: [&str; 5] = ["y", "y_delta", "Y", "Z_eps", "Z"];

/// `h = min(δ/50, T/5000)`
pub fn default_internal_step(delta: f64, horizon: f64) -> f64 {
    (delta / 50.0).min(horizon / 5000.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundleParams {
    pub epsilon: f64,
    pub delta: f64,
    pub c: f64,
    pub horizon: f64,
    /// Internal step; `None` selects [`default_internal_step`].
    pub step: Option<f64>,
}

impl BundleParams {
    pub fn resolved_step(&self) -> f64 {
        self.step
            .unwrap_or_else(|| default_internal_step(self.delta, self.horizon))
    }

    fn validate(&self) -> Result<()> {
        if self.epsilon == 0.0 {
            return Err(Error::DivisionByZero(
                "coupled bundles need epsilon > 0; use the sampled-hold solver for epsilon = 0"
                    .into(),
            ));
        }
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("delta", self.delta),
            ("horizon", self.horizon),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(Error::Config(format!(
                "c must be finite and >= 0, got {}",
                self.c
            )));
        }
        if let Some(h) = self.step {
            if !(h > 0.0) || h > self.delta / 20.0 {
                return Err(Error::Config(format!(
                    "internal step {h} must be positive and at most delta/20 = {}",
                    self.delta / 20.0
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub params: BundleParams,
    pub noise: NoiseRecord,
    /// `y`
    pub closed: Trajectory,
    /// `y^δ`
    pub sampled: Trajectory,
    /// `Y^{ε,δ}`
    pub perturbed: Trajectory,
    /// `Y^{ε,δ}_{t−}`
    pub perturbed_left: Trajectory,
    /// `Z^{ε,δ}`
    pub rescaled: Trajectory,
    /// `Z`
    pub limit: Trajectory,
}

impl PathBundle {
    pub fn grid(&self) -> &TimeGrid {
        self.noise.grid()
    }

    pub fn seed(&self) -> PathSeed {
        self.noise.seed()
    }

    /// The five processes paired with their tags.
    pub fn processes(&self) -> [(&'static str, &Trajectory); 5] {
        [
            (PROCESS_TAGS[0], &self.closed),
            (PROCESS_TAGS[1], &self.sampled),
            (PROCESS_TAGS[2], &self.perturbed),
            (PROCESS_TAGS[3], &self.rescaled),
            (PROCESS_TAGS[4], &self.limit),
        ]
    }
}

/// Builds one grid and one noise record for `seed`, then drives every
/// process from that single record.
pub fn simulate_coupled_bundle(
    model: &Model,
    params: BundleParams,
    seed: PathSeed,
) -> Result<PathBundle> {
    params.validate()?;
    let noise = NoiseRecord::generate(
        &model.levy,
        params.horizon,
        params.delta,
        params.resolved_step(),
        seed,
    )?;
    let grid = noise.grid();
    let closed = solve_closed(&model.system, grid);
    let sampled = solve_sampled_hold(&model.system, grid);
    let y = simulate_jump_diffusion(model, params.epsilon, params.delta, &noise)?;
    let rescaled = fluctuation_rescaled(&y.path, &closed, params.epsilon)?;
    let limit = simulate_limit_fluctuation(model, params.c, &closed, &noise)?;
    Ok(PathBundle {
        params,
        noise,
        closed,
        sampled,
        perturbed: y.path,
        perturbed_left: y.left_limits,
        rescaled,
        limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DiffusionFamily, JumpFamily, SystemSpec};
    use crate::matcore::Mat;
    use crate::noisegen::{Atom, LevyMeasureSpec};

    fn model() -> Model {
        let sys = SystemSpec::new(
            Mat::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap(),
            Mat::from_rows(&[vec![0.0], vec![1.0]]).unwrap(),
            Mat::from_rows(&[vec![1.0, 2.0]]).unwrap(),
            vec![1.0, 0.0],
        )
        .unwrap();
        let levy = LevyMeasureSpec::atomic(
            2,
            vec![Atom {
                location: vec![0.5, 0.0],
                mass: 1.0,
            }],
        )
        .unwrap();
        Model::new(
            sys,
            DiffusionFamily::constant(Mat::identity(2).scale(0.2)).unwrap(),
            JumpFamily::identity(2),
            levy,
        )
        .unwrap()
    }

    fn params(epsilon: f64) -> BundleParams {
        BundleParams {
            epsilon,
            delta: 0.1,
            c: 1.0,
            horizon: 1.0,
            step: None,
        }
    }

    #[test]
    fn bundle_shapes_and_origin() {
        let b = simulate_coupled_bundle(&model(), params(0.1), PathSeed::new(1, 2)).unwrap();
        let len = b.grid().len();
        for (_, p) in b.processes() {
            assert_eq!(p.len(), len);
        }
        assert_eq!(b.perturbed.at(0), &[1.0, 0.0]);
        assert_eq!(b.sampled.at(0), &[1.0, 0.0]);
        assert_eq!(b.rescaled.at(0), &[0.0, 0.0]);
        assert_eq!(b.limit.at(0), &[0.0, 0.0]);
        let fp = Some(b.noise.fingerprint());
        assert_eq!(b.perturbed.noise_fingerprint(), fp);
        assert_eq!(b.rescaled.noise_fingerprint(), fp);
        assert_eq!(b.limit.noise_fingerprint(), fp);
    }

    #[test]
    fn replay_is_bitwise() {
        let a = simulate_coupled_bundle(&model(), params(0.1), PathSeed::new(1, 2)).unwrap();
        let b = simulate_coupled_bundle(&model(), params(0.1), PathSeed::new(1, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_coarse_step_and_zero_epsilon() {
        let mut p = params(0.1);
        p.step = Some(0.1 / 10.0);
        assert!(simulate_coupled_bundle(&model(), p, PathSeed::new(0, 0)).is_err());
        assert!(matches!(
            simulate_coupled_bundle(&model(), params(0.0), PathSeed::new(0, 0)),
            Err(Error::DivisionByZero(_))
        ));
    }

    #[test]
    fn tiny_epsilon_tracks_hold() {
        let b = simulate_coupled_bundle(&model(), params(1e-12), PathSeed::new(3, 0)).unwrap();
        let gap = b
            .perturbed
            .rows()
            .zip(b.sampled.rows())
            .map(|(a, c)| crate::matcore::one_norm_diff(a, c))
            .fold(0.0, f64::max);
        assert!(gap <= 1e-9, "gap {gap}");
    }
}
