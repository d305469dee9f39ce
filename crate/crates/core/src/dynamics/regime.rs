//! How the sampling period `δ` shrinks with the noise level `ε`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeKind {
    /// `δ/ε → 0`
    R1,
    /// `δ/ε → c ∈ (0, ∞)`
    R2,
    /// `δ/ε → ∞`; only the `δ`-rescaled diagnostic is available.
    R3,
}

/// One rung of the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulePoint {
    pub epsilon: f64,
    pub delta: f64,
    /// `|δ/ε − c|`; in R3 this is the raw ratio `δ/ε`.
    pub kappa: f64,
}

/// Serialized form used in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeRecord {
    pub kind: RegimeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    pub epsilons: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSchedule {
    kind: RegimeKind,
    c: f64,
    p: f64,
    points: Vec<SchedulePoint>,
}

pub const DEFAULT_R1_POWER: f64 = 2.0;
pub const DEFAULT_R3_POWER: f64 = 0.5;

impl RegimeSchedule {
    /// `δ = ε^p`, `p > 1`.
    pub fn r1(p: f64, epsilons: Vec<f64>) -> Result<Self> {
        Self::from_record(&RegimeRecord {
            kind: RegimeKind::R1,
            c: None,
            p: Some(p),
            epsilons,
            deltas: None,
        })
    }

    /// `δ = c ε`, `c > 0`.
    pub fn r2(c: f64, epsilons: Vec<f64>) -> Result<Self> {
        Self::from_record(&RegimeRecord {
            kind: RegimeKind::R2,
            c: Some(c),
            p: None,
            epsilons,
            deltas: None,
        })
    }

    /// `δ = ε^p`, `0 < p < 1`.
    pub fn r3(p: f64, epsilons: Vec<f64>) -> Result<Self> {
        Self::from_record(&RegimeRecord {
            kind: RegimeKind::R3,
            c: None,
            p: Some(p),
            epsilons,
            deltas: None,
        })
    }

    pub fn from_record(rec: &RegimeRecord) -> Result<Self> {
        let eps = &rec.epsilons;
        if eps.is_empty() {
            return Err(Error::Config("regime.epsilons must not be empty".into()));
        }
        for (i, &e) in eps.iter().enumerate() {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::Config(format!(
                    "regime.epsilons[{i}] must lie in (0, 1), got {e}"
                )));
            }
        }
        if let Some(i) = eps.windows(2).position(|w| w[1] >= w[0]) {
            return Err(Error::Config(format!(
                "regime.epsilons must be strictly decreasing (entry {} is {} after {})",
                i + 1,
                eps[i + 1],
                eps[i]
            )));
        }

        let (c, p) = match rec.kind {
            RegimeKind::R1 => {
                if rec.c.is_some_and(|c| c != 0.0) {
                    return Err(Error::Config("regime.c must be 0 in regime R1".into()));
                }
                let p = rec.p.unwrap_or(DEFAULT_R1_POWER);
                if !(p > 1.0) || !p.is_finite() {
                    return Err(Error::Config(format!(
                        "regime.p must exceed 1 in R1, got {p}"
                    )));
                }
                (0.0, p)
            }
            RegimeKind::R2 => {
                let c = rec
                    .c
                    .ok_or_else(|| Error::Config("regime.c is required in regime R2".into()))?;
                if !(c > 0.0) || !c.is_finite() {
                    return Err(Error::Config(format!(
                        "regime.c must be positive in R2, got {c}"
                    )));
                }
                if rec.p.is_some() {
                    return Err(Error::Config("regime.p is not used in regime R2".into()));
                }
                (c, 1.0)
            }
            RegimeKind::R3 => {
                let p = rec.p.unwrap_or(DEFAULT_R3_POWER);
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::Config(format!(
                        "regime.p must lie in (0, 1) in R3, got {p}"
                    )));
                }
                (f64::INFINITY, p)
            }
        };

        let deltas: Vec<f64> = match &rec.deltas {
            Some(d) => {
                if d.len() != eps.len() {
                    return Err(Error::Config(format!(
                        "regime.deltas has {} entries, regime.epsilons has {}",
                        d.len(),
                        eps.len()
                    )));
                }
                for (i, &v) in d.iter().enumerate() {
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(Error::Config(format!(
                            "regime.deltas[{i}] must be positive, got {v}"
                        )));
                    }
                }
                d.clone()
            }
            None => eps
                .iter()
                .map(|&e| match rec.kind {
                    RegimeKind::R2 => c * e,
                    RegimeKind::R1 | RegimeKind::R3 => e.powf(p),
                })
                .collect(),
        };

        let mut points = Vec::with_capacity(eps.len());
        for (i, (&epsilon, &delta)) in eps.iter().zip(&deltas).enumerate() {
            let kappa = if rec.kind == RegimeKind::R3 {
                delta / epsilon
            } else {
                if !(delta < (c + 1.0) * epsilon) {
                    return Err(Error::Config(format!(
                        "epsilon-zero condition violated at regime.deltas[{i}]: \
                         delta {delta} is not below (c+1)*epsilon = {}",
                        (c + 1.0) * epsilon
                    )));
                }
                (delta / epsilon - c).abs()
            };
            points.push(SchedulePoint {
                epsilon,
                delta,
                kappa,
            });
        }

        Ok(Self {
            kind: rec.kind,
            c,
            p,
            points,
        })
    }

    pub fn to_record(&self) -> RegimeRecord {
        RegimeRecord {
            kind: self.kind,
            c: (self.kind == RegimeKind::R2).then_some(self.c),
            p: (self.kind != RegimeKind::R2).then_some(self.p),
            epsilons: self.points.iter().map(|p| p.epsilon).collect(),
            deltas: Some(self.points.iter().map(|p| p.delta).collect()),
        }
    }

    pub fn kind(&self) -> RegimeKind {
        self.kind
    }

    /// Regime constant `c`; `0` in R1 and `∞` in R3.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// The constant entering the limit drift; R3 has no limit and maps to 0.
    pub fn limit_c(&self) -> f64 {
        if self.kind == RegimeKind::R3 {
            0.0
        } else {
            self.c
        }
    }

    pub fn points(&self) -> &[SchedulePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
