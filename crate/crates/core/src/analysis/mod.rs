//! Error functionals, Monte Carlo moments, rate fits and the M-term
//! diagnostic.

mod fit;
mod gaps;
mod montecarlo;
mod mterms;

pub use fit::{
    decreasing_within_ci, fit_loglog, fit_loglog_rate, Check, LogLogFit, RateReport, Verdict,
};
pub use gaps::{hold_gap_squared, sup_norm_gap, GapSelector};
pub use montecarlo::{
    compensated_sum, estimate, map_bundles, map_paths, mc_moment, mc_moments_for_paths, Estimate,
    ExperimentPoint, Z95,
};
pub use mterms::{
    ell_from_closed, ell_path, m_term_decomposition, m_term_series, MTermReport, MTermSeries,
    RESIDUAL_TOLERANCE,
};
