//! Log-log least squares and rate verdicts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::montecarlo::ExperimentPoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl LogLogFit {
    /// Fitted value at `x`, in natural units.
    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }
}

/// OLS of `ln y` on `ln x`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    if xs.len() != ys.len() {
        return Err(Error::DegenerateFit(format!(
            "{} abscissae but {} ordinates",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 points, got {}",
            xs.len()
        )));
    }
    for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        if !(x > 0.0 && x.is_finite()) || !(y > 0.0 && y.is_finite()) {
            return Err(Error::DegenerateFit(format!(
                "point {i} = ({x}, {y}) is not strictly positive"
            )));
        }
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(LogLogFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Fits moment against `ε`; points must be ordered by decreasing `ε`.
pub fn fit_loglog_rate(points: &[ExperimentPoint]) -> Result<LogLogFit> {
    if points.windows(2).any(|w| w[1].epsilon >= w[0].epsilon) {
        return Err(Error::DegenerateFit(
            "points must be sorted by strictly decreasing epsilon".into(),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.epsilon).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.moment).collect();
    fit_loglog(&xs, &ys)
}

/// No point sits significantly above its predecessor: `mᵢ − wᵢ ≤ mᵢ₋₁ + wᵢ₋₁`.
pub fn decreasing_within_ci(points: &[ExperimentPoint]) -> bool {
    points
        .windows(2)
        .all(|w| w[1].moment - w[1].ci_half_width <= w[0].moment + w[0].ci_half_width)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Self::Pass
        } else {
            Self::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Self::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub quantity: String,
    /// The bound being tested, for context.
    pub bound: String,
    pub points: Vec<ExperimentPoint>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub target_slope: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_r_squared: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
    pub verdict: Verdict,
}

impl RateReport {
    pub fn new(
        quantity: &str,
        bound: &str,
        points: Vec<ExperimentPoint>,
        target_slope: f64,
        min_r_squared: Option<f64>,
    ) -> Result<Self> {
        let fit = fit_loglog_rate(&points)?;
        let mut report = Self {
            quantity: quantity.to_string(),
            bound: bound.to_string(),
            points,
            slope: fit.slope,
            intercept: fit.intercept,
            r_squared: fit.r_squared,
            target_slope,
            min_r_squared,
            checks: Vec::new(),
            verdict: Verdict::Pass,
        };
        report.refresh_verdict();
        Ok(report)
    }

    pub fn with_check(mut self, name: &str, ok: bool) -> Self {
        self.checks.push(Check {
            name: name.to_string(),
            verdict: Verdict::from_bool(ok),
        });
        self.refresh_verdict();
        self
    }

    fn refresh_verdict(&mut self) {
        let ok = self.slope >= self.target_slope
            && self.min_r_squared.is_none_or(|r| self.r_squared >= r)
            && self.checks.iter().all(|c| c.verdict.passed());
        self.verdict = Verdict::from_bool(ok);
    }

    pub fn fit(&self) -> LogLogFit {
        LogLogFit {
            slope: self.slope,
            intercept: self.intercept,
            r_squared: self.r_squared,
        }
    }

    /// `(log10 ε, log10 moment, log10 fitted moment)` per point.
    pub fn plot_rows(&self) -> Vec<[f64; 3]> {
        self.points
            .iter()
            .map(|p| {
                let lx = p.epsilon.ln();
                [
                    lx / std::f64::consts::LN_10,
                    p.moment.ln() / std::f64::consts::LN_10,
                    (self.intercept + self.slope * lx) / std::f64::consts::LN_10,
                ]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points(pairs: &[(f64, f64)]) -> Vec<ExperimentPoint> {
        pairs
            .iter()
            .map(|&(epsilon, moment)| ExperimentPoint {
                epsilon,
                delta: epsilon,
                kappa: 0.0,
                paths: 10,
                moment,
                ci_half_width: 0.0,
            })
            .collect()
    }

    #[test]
    fn exact_square_law() {
        let f = fit_loglog_rate(&points(&[(0.1, 1e-2), (0.05, 2.5e-3), (0.025, 6.25e-4)])).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_and_linear() {
        let f = fit_loglog_rate(&points(&[(0.1, 3.0), (0.05, 3.0), (0.025, 3.0)])).unwrap();
        assert!(f.slope.abs() < 1e-12);
        assert_eq!(f.r_squared, 1.0);
        let f = fit_loglog_rate(&points(&[(0.4, 0.4), (0.2, 0.2), (0.1, 0.1)])).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_loglog_rate(&points(&[(0.1, 1.0), (0.05, 0.0), (0.02, 1.0)])).is_err());
        assert!(fit_loglog_rate(&points(&[(0.1, 1.0), (0.05, 1.0)])).is_err());
        assert!(fit_loglog_rate(&points(&[(0.05, 1.0), (0.1, 1.0), (0.02, 1.0)])).is_err());
    }

    #[test]
    fn verdict_and_plot() {
        let r = RateReport::new(
            "m",
            "eps^2",
            points(&[(0.1, 1e-2), (0.05, 2.5e-3), (0.025, 6.25e-4)]),
            1.8,
            Some(0.98),
        )
        .unwrap();
        assert!(r.verdict.passed());
        let r = r.with_check("monotone", false);
        assert!(!r.verdict.passed());
        for row in r.plot_rows() {
            assert!((row[1] - row[2]).abs() < 1e-12);
        }
    }
}
