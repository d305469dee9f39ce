//! Reproducible Brownian increments and finite-activity Poisson random measures.

mod grid;
mod levy;
mod streams;

pub use grid::{GridNode, TimeGrid};
pub use levy::{Atom, LevyKind, LevyMeasureRecord, LevyMeasureSpec, SUPPORTED_LEVY_KINDS};
pub use streams::{PathSeed, StreamPurpose};

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use sha2::{Digest, Sha256};

use crate::dynamics::JumpFamily;
use crate::error::{Error, Result};
use crate::matcore::one_norm;

#[derive(Debug, Clone, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub mark: Vec<f64>,
}

/// One realization of the Poisson random measure on `(0, T] × E`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTrain {
    horizon: f64,
    events: Vec<JumpEvent>,
}

impl JumpTrain {
    pub fn new(horizon: f64, events: Vec<JumpEvent>) -> Result<Self> {
        let train = Self { horizon, events };
        train.validate()?;
        Ok(train)
    }

    pub fn empty(horizon: f64) -> Self {
        Self {
            horizon,
            events: Vec::new(),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let mut prev = 0.0;
        for (i, e) in self.events.iter().enumerate() {
            if !(e.time > prev && e.time <= self.horizon) {
                return Err(Error::Config(format!(
                    "jump {i} at time {} is not strictly increasing within (0, {}]",
                    e.time, self.horizon
                )));
            }
            let r = one_norm(&e.mark);
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Config(format!(
                    "jump {i}: mark outside punctured unit ball (one-norm {r})"
                )));
            }
            prev = e.time;
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn events(&self) -> &[JumpEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Brownian increments over every gap of `grid`, flattened `dim` per step.
pub fn sample_brownian<R: Rng + ?Sized>(grid: &TimeGrid, dim: usize, rng: &mut R) -> Vec<f64> {
    sample_brownian_steps(grid.steps(), dim, rng)
}

/// Brownian increments over an explicit list of gaps.
pub fn sample_brownian_steps<R: Rng + ?Sized>(steps: &[f64], dim: usize, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps.len() * dim);
    for &dt in steps {
        let scale = dt.sqrt();
        for _ in 0..dim {
            let z: f64 = StandardNormal.sample(rng);
            out.push(scale * z);
        }
    }
    out
}

/// Samples the jump train of `levy` on `(0, horizon]` from the path's
/// count, time and mark streams.
pub fn sample_prm(levy: &LevyMeasureSpec, horizon: f64, seed: PathSeed) -> Result<JumpTrain> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Config(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let mass = levy.total_mass();
    if !mass.is_finite() {
        return Err(Error::UnsupportedMeasure(
            "infinite-activity Lévy measures cannot be sampled exactly".into(),
        ));
    }
    let rate = mass * horizon;
    if rate == 0.0 {
        return Ok(JumpTrain::empty(horizon));
    }
    let mut count_rng = seed.stream(StreamPurpose::JumpCount);
    let count = Poisson::new(rate)
        .map_err(|e| Error::Config(format!("invalid Poisson rate {rate}: {e}")))?
        .sample(&mut count_rng) as usize;

    let mut time_rng = seed.stream(StreamPurpose::JumpTimes);
    let mut times: Vec<f64>;
    loop {
        // 1 - U lies in (0, 1], so times land in (0, T].
        times = (0..count)
            .map(|_| horizon * (1.0 - time_rng.random::<f64>()))
            .collect();
        times.sort_by(f64::total_cmp);
        if times.windows(2).all(|w| w[0] < w[1]) {
            break;
        }
    }

    let mut mark_rng = seed.stream(StreamPurpose::JumpMarks);
    let events = times
        .into_iter()
        .map(|time| JumpEvent {
            time,
            mark: levy.sample_mark(&mut mark_rng),
        })
        .collect();
    JumpTrain::new(horizon, events)
}

/// `∫_E F(y, x) ν(dx)`. For the mark-linear family this is `G(y)·m1`.
pub fn compensator_mean(levy: &LevyMeasureSpec, family: &JumpFamily, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    family.apply_acc(y, levy.m1(), 1.0, &mut out);
    out
}

/// `∫₀^T ∫_E g(x) Ñ(ds, dx)` for a deterministic scalar integrand, given
/// `∫_E g dν`.
pub fn compensated_integral(jumps: &JumpTrain, g: impl Fn(&[f64]) -> f64, g_mean: f64) -> f64 {
    let raw: f64 = jumps.events().iter().map(|e| g(&e.mark)).sum();
    raw - jumps.horizon() * g_mean
}

/// All the randomness one coupled path consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRecord {
    seed: PathSeed,
    dim: usize,
    grid: TimeGrid,
    increments: Vec<f64>,
    jumps: JumpTrain,
    fingerprint: u64,
}

impl NoiseRecord {
    /// Draws the jump train first, refines the grid around it, then samples
    /// Brownian increments gap by gap.
    pub fn generate(
        levy: &LevyMeasureSpec,
        horizon: f64,
        delta: f64,
        max_step: f64,
        seed: PathSeed,
    ) -> Result<Self> {
        let dim = levy.dim();
        let jumps = sample_prm(levy, horizon, seed)?;
        let grid = TimeGrid::build(horizon, delta, max_step, &jumps)?;
        let increments = sample_brownian(&grid, dim, &mut seed.stream(StreamPurpose::Brownian));
        Ok(Self::assemble(seed, dim, grid, increments, jumps))
    }

    /// Assembles a record from explicit parts (used for hand-built scenarios).
    pub fn from_parts(
        seed: PathSeed,
        dim: usize,
        grid: TimeGrid,
        increments: Vec<f64>,
        jumps: JumpTrain,
    ) -> Result<Self> {
        if increments.len() != grid.step_count() * dim {
            return Err(Error::GridMismatch(format!(
                "{} increments for {} steps of dimension {dim}",
                increments.len(),
                grid.step_count()
            )));
        }
        for (i, e) in jumps.events().iter().enumerate() {
            let hit = grid
                .nodes()
                .iter()
                .any(|n| n.jump == Some(i) && n.time == e.time);
            if !hit || e.mark.len() != dim {
                return Err(Error::GridMismatch(format!("jump {i} is not a grid node")));
            }
        }
        Ok(Self::assemble(seed, dim, grid, increments, jumps))
    }

    fn assemble(
        seed: PathSeed,
        dim: usize,
        grid: TimeGrid,
        increments: Vec<f64>,
        jumps: JumpTrain,
    ) -> Self {
        let fingerprint = content_hash(seed, &grid, &increments, &jumps);
        Self {
            seed,
            dim,
            grid,
            increments,
            jumps,
            fingerprint,
        }
    }

    pub fn seed(&self) -> PathSeed {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn jumps(&self) -> &JumpTrain {
        &self.jumps
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Brownian increment over step `j`.
    #[inline]
    pub fn increment(&self, j: usize) -> &[f64] {
        &self.increments[j * self.dim..(j + 1) * self.dim]
    }

    /// Mark of the jump at node `j`, if any.
    #[inline]
    pub fn jump_at(&self, j: usize) -> Option<&[f64]> {
        self.grid
            .node(j)
            .jump
            .map(|i| self.jumps.events()[i].mark.as_slice())
    }

    /// `W_T - W_0`, coordinatewise.
    pub fn brownian_total(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.dim];
        for chunk in self.increments.chunks(self.dim) {
            for (t, dw) in total.iter_mut().zip(chunk) {
                *t += dw;
            }
        }
        total
    }

    /// Content hash of the record; equal records hash equally.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

fn content_hash(seed: PathSeed, grid: &TimeGrid, increments: &[f64], jumps: &JumpTrain) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.master.to_le_bytes());
    h.update(seed.path.to_le_bytes());
    for node in grid.nodes() {
        h.update(node.time.to_bits().to_le_bytes());
    }
    for x in increments {
        h.update(x.to_bits().to_le_bytes());
    }
    for e in jumps.events() {
        h.update(e.time.to_bits().to_le_bytes());
        for x in &e.mark {
            h.update(x.to_bits().to_le_bytes());
        }
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
