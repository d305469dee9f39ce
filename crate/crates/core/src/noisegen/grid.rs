//! Jump-adapted simulation grids.
//!
//! A grid holds every sampling instant `kδ ≤ T`, a uniform refinement of each
//! sampling interval with gap at most `h`, and every jump time. Nodes carry
//! the integer index `k` of the sampling interval they belong to, so the
//! rounding operator `π_δ` never goes through floating-point `floor(t/δ)`.

use crate::error::{Error, Result};

use super::JumpTrain;

#[derive(Debug, Clone, PartialEq)]
pub struct GridNode {
    pub time: f64,
    /// Index `k` of the latest sampling instant `kδ ≤ time`.
    pub sample_index: u64,
    /// The node is the sampling instant `kδ` itself.
    pub is_sample: bool,
    /// Index into the grid's jump train when a jump happens at this node.
    pub jump: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    delta: f64,
    max_step: f64,
    nodes: Vec<GridNode>,
    steps: Vec<f64>,
}

// Relative slack used once, when deciding whether T is itself a sampling
// instant or where a sampling interval needs one more sub-step.
const INDEX_SLACK: f64 = 1e-9;

impl TimeGrid {
    /// Grid over `[0, horizon]` without jumps.
    pub fn uniform(horizon: f64, delta: f64, max_step: f64) -> Result<Self> {
        Self::build(horizon, delta, max_step, &JumpTrain::empty(horizon))
    }

    pub fn build(horizon: f64, delta: f64, max_step: f64, jumps: &JumpTrain) -> Result<Self> {
        for (name, v) in [("horizon", horizon), ("delta", delta), ("step", max_step)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        jumps.validate()?;
        if jumps.horizon() != horizon {
            return Err(Error::GridMismatch(format!(
                "jump train horizon {} differs from grid horizon {horizon}",
                jumps.horizon()
            )));
        }

        let ratio = horizon / delta;
        let mut k_last = ratio.floor() as u64;
        let horizon_is_sample =
            if ((k_last + 1) as f64 - ratio).abs() <= INDEX_SLACK * ratio.max(1.0) {
                k_last += 1;
                true
            } else {
                (ratio - k_last as f64).abs() <= INDEX_SLACK * ratio.max(1.0)
            };
        let sample_time = |k: u64| k as f64 * delta;

        // Base grid: each sampling interval split into equal sub-steps.
        let n_intervals = if horizon_is_sample {
            k_last
        } else {
            k_last + 1
        };
        let mut base_nodes = Vec::new();
        let mut base_steps = Vec::new();
        for k in 0..n_intervals {
            let start = sample_time(k);
            let end = if k + 1 < n_intervals {
                sample_time(k + 1)
            } else {
                horizon
            };
            let len = end - start;
            let m = ((len / max_step) - INDEX_SLACK).ceil().max(1.0) as u64;
            let step = len / m as f64;
            for i in 0..m {
                base_nodes.push(GridNode {
                    time: if i == 0 {
                        start
                    } else {
                        start + i as f64 * step
                    },
                    sample_index: k,
                    is_sample: i == 0,
                    jump: None,
                });
                base_steps.push(step);
            }
        }
        base_nodes.push(GridNode {
            time: horizon,
            sample_index: k_last,
            is_sample: horizon_is_sample,
            jump: None,
        });

        // Merge in the jump times.
        let events = jumps.events();
        let mut nodes = Vec::with_capacity(base_nodes.len() + events.len());
        let mut steps = Vec::with_capacity(base_steps.len() + events.len());
        let mut p = 0;
        for (j, step) in base_steps.iter().enumerate() {
            let node = &base_nodes[j];
            let next_time = base_nodes[j + 1].time;
            nodes.push(node.clone());
            let mut prev = node.time;
            while p < events.len() && events[p].time < next_time {
                let tau = events[p].time;
                if tau == prev {
                    nodes.last_mut().unwrap().jump = Some(p);
                } else {
                    steps.push(tau - prev);
                    nodes.push(GridNode {
                        time: tau,
                        sample_index: node.sample_index,
                        is_sample: false,
                        jump: Some(p),
                    });
                    prev = tau;
                }
                p += 1;
            }
            steps.push(if prev == node.time {
                *step
            } else {
                next_time - prev
            });
        }
        nodes.push(base_nodes.last().unwrap().clone());
        if p < events.len() {
            // Only a jump exactly at the horizon can remain.
            debug_assert_eq!(events[p].time, horizon);
            nodes.last_mut().unwrap().jump = Some(p);
            p += 1;
        }
        debug_assert_eq!(p, events.len());

        Ok(Self {
            horizon,
            delta,
            max_step,
            nodes,
            steps,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn max_step(&self) -> f64 {
        self.max_step
    }

    pub fn nodes(&self) -> &[GridNode] {
        &self.nodes
    }

    pub fn node(&self, j: usize) -> &GridNode {
        &self.nodes[j]
    }

    /// Gap from node `j` to node `j + 1`.
    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().map(|n| n.time)
    }

    /// `π_δ` at node `j`: the latest sampling instant and its index.
    pub fn pi_delta(&self, j: usize) -> (f64, u64) {
        let k = self.nodes[j].sample_index;
        (k as f64 * self.delta, k)
    }

    pub fn contains_time(&self, t: f64) -> bool {
        self.nodes.iter().any(|n| n.time == t)
    }

    pub fn sample_node_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_sample)
            .map(|(j, _)| j)
    }
}
