//! Finite-activity Lévy measures on the punctured unit ball `E = {0 < |x| < 1}`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::one_norm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LevyKind {
    /// `ν = Σ massᵢ · δ_{locationᵢ}`
    Atomic { atoms: Vec<Atom> },
    /// Total mass spread uniformly (in volume) over the one-norm shell
    /// `r0 ≤ |x| ≤ r1`.
    AnnulusUniform { total_mass: f64, r0: f64, r1: f64 },
}

/// A validated Lévy measure with its first moments cached.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyMeasureSpec {
    kind: LevyKind,
    dim: usize,
    total_mass: f64,
    /// `∫ x ν(dx)`
    m1: Vec<f64>,
    /// `∫ |x|² ν(dx)`
    s2: f64,
}

fn check_in_ball(x: &[f64], what: &str) -> Result<()> {
    let r = one_norm(x);
    if x.iter().any(|v| !v.is_finite()) || !(r > 0.0 && r < 1.0) {
        return Err(Error::Config(format!(
            "{what}: mark outside punctured unit ball (one-norm {r})"
        )));
    }
    Ok(())
}

impl LevyMeasureSpec {
    pub fn atomic(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        let mut m1 = vec![0.0; dim];
        let mut s2 = 0.0;
        let mut total_mass = 0.0;
        for (i, atom) in atoms.iter().enumerate() {
            if atom.location.len() != dim {
                return Err(Error::Dimension(format!(
                    "levy.atoms[{i}].location has {} coordinates, state dimension is {dim}",
                    atom.location.len()
                )));
            }
            check_in_ball(&atom.location, &format!("levy.atoms[{i}].location"))?;
            if !(atom.mass > 0.0) || !atom.mass.is_finite() {
                return Err(Error::Config(format!(
                    "levy.atoms[{i}].mass must be positive and finite, got {}",
                    atom.mass
                )));
            }
            total_mass += atom.mass;
            for (acc, x) in m1.iter_mut().zip(&atom.location) {
                *acc += atom.mass * x;
            }
            s2 += atom.mass * one_norm(&atom.location).powi(2);
        }
        Ok(Self {
            kind: LevyKind::Atomic { atoms },
            dim,
            total_mass,
            m1,
            s2,
        })
    }

    pub fn annulus_uniform(dim: usize, total_mass: f64, r0: f64, r1: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension(
                "annulus measure needs dimension >= 1".into(),
            ));
        }
        if !(total_mass > 0.0) || !total_mass.is_finite() {
            return Err(Error::Config(format!(
                "levy.total_mass must be positive and finite, got {total_mass}"
            )));
        }
        if !(r0 > 0.0 && r0 <= r1 && r1 < 1.0) {
            return Err(Error::Config(format!(
                "levy radii must satisfy 0 < r0 <= r1 < 1, got r0={r0}, r1={r1}"
            )));
        }
        let mut spec = Self {
            kind: LevyKind::AnnulusUniform { total_mass, r0, r1 },
            dim,
            total_mass,
            m1: vec![0.0; dim],
            s2: 0.0,
        };
        spec.s2 = spec.radial_moment(2.0);
        Ok(spec)
    }

    /// The zero measure: no jumps at all.
    pub fn none(dim: usize) -> Self {
        Self {
            kind: LevyKind::Atomic { atoms: Vec::new() },
            dim,
            total_mass: 0.0,
            m1: vec![0.0; dim],
            s2: 0.0,
        }
    }

    pub fn kind(&self) -> &LevyKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `ν(E)`
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn m1(&self) -> &[f64] {
        &self.m1
    }

    pub fn s2(&self) -> f64 {
        self.s2
    }

    /// `∫ |x|^p ν(dx)` in closed form.
    pub fn radial_moment(&self, p: f64) -> f64 {
        match &self.kind {
            LevyKind::Atomic { atoms } => atoms
                .iter()
                .map(|a| a.mass * one_norm(&a.location).powf(p))
                .sum(),
            LevyKind::AnnulusUniform { total_mass, r0, r1 } => {
                if r0 == r1 {
                    return total_mass * r0.powf(p);
                }
                // radius density ∝ r^{n-1} on [r0, r1]
                let n = self.dim as f64;
                let num = r1.powf(n + p) - r0.powf(n + p);
                let den = r1.powf(n) - r0.powf(n);
                total_mass * n / (n + p) * num / den
            }
        }
    }

    /// `∫ g dν` for atomic measures; `None` when no closed form is available.
    pub fn integrate_atomic(&self, g: impl Fn(&[f64]) -> f64) -> Option<f64> {
        match &self.kind {
            LevyKind::Atomic { atoms } => Some(atoms.iter().map(|a| a.mass * g(&a.location)).sum()),
            LevyKind::AnnulusUniform { .. } => None,
        }
    }

    /// Draws one mark from the normalized measure `ν / ν(E)`.
    pub fn sample_mark<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            LevyKind::Atomic { atoms } => {
                let u: f64 = rng.random::<f64>() * self.total_mass;
                let mut acc = 0.0;
                for atom in atoms {
                    acc += atom.mass;
                    if u < acc {
                        return atom.location.clone();
                    }
                }
                atoms
                    .last()
                    .expect("sampling requires at least one atom")
                    .location
                    .clone()
            }
            LevyKind::AnnulusUniform { r0, r1, .. } => {
                let n = self.dim as f64;
                let radius = if r0 == r1 {
                    *r0
                } else {
                    let u: f64 = rng.random();
                    (r0.powf(n) + u * (r1.powf(n) - r0.powf(n))).powf(1.0 / n)
                };
                // Normalized exponentials are uniform on the simplex; random
                // signs spread that over the whole one-norm sphere.
                let mut w: Vec<f64> = (0..self.dim)
                    .map(|_| Exp1.sample(rng))
                    .collect::<Vec<f64>>();
                let total: f64 = w.iter().sum();
                for wi in &mut w {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    *wi = sign * radius * *wi / total;
                }
                w
            }
        }
    }

    pub fn to_record(&self) -> LevyMeasureRecord {
        match &self.kind {
            LevyKind::Atomic { atoms } => LevyMeasureRecord::Atomic {
                atoms: atoms.clone(),
            },
            LevyKind::AnnulusUniform { total_mass, r0, r1 } => LevyMeasureRecord::AnnulusUniform {
                total_mass: *total_mass,
                r0: *r0,
                r1: *r1,
            },
        }
    }
}

/// Serialized form of a Lévy measure in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LevyMeasureRecord {
    Atomic { atoms: Vec<Atom> },
    AnnulusUniform { total_mass: f64, r0: f64, r1: f64 },
}

/// Kinds accepted in the `levy.kind` field.
pub const SUPPORTED_LEVY_KINDS: [&str; 2] = ["atomic", "annulus_uniform"];

impl LevyMeasureRecord {
    pub fn build(&self, dim: usize) -> Result<LevyMeasureSpec> {
        match self {
            Self::Atomic { atoms } => LevyMeasureSpec::atomic(dim, atoms.clone()),
            Self::AnnulusUniform { total_mass, r0, r1 } => {
                LevyMeasureSpec::annulus_uniform(dim, *total_mass, *r0, *r1)
            }
        }
    }
}
