//! Coupled simulation of the closed loop `y`, the sampled hold `y^δ`, the
//! perturbed hybrid system `Y^{ε,δ}`, its rescaled fluctuation `Z^{ε,δ}` and
//! the limit fluctuation `Z`, all on one grid and one noise record.

mod bundle;
mod model;
mod regime;
mod simulate;

pub use bundle::{
    default_internal_step, simulate_coupled_bundle, BundleParams, PathBundle, PROCESS_TAGS,
};
pub use model::{DiffusionFamily, JumpFamily, Model, SystemSpec};
pub use regime::{
    RegimeKind, RegimeRecord, RegimeSchedule, SchedulePoint, DEFAULT_R1_POWER, DEFAULT_R3_POWER,
};
pub use simulate::{
    fluctuation_direct, fluctuation_rescaled, rescale_by_delta, sampled_hold_from_sample,
    simulate_jump_diffusion, simulate_limit_fluctuation, solve_closed, solve_sampled_hold,
    JumpDiffusionPath, Trajectory,
};
