//! System matrices and the catalogue of admissible noise coefficients.
//!
//! Both noise families are affine in the state, which makes them globally
//! Lipschitz with linear growth. Arbitrary coefficient callbacks are not
//! accepted.

use crate::error::{Error, Result};
use crate::matcore::Mat;
use crate::noisegen::LevyMeasureSpec;

/// `ẏ = A y − B K y_{π_δ(t)}` and its closed loop `A − BK`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    a: Mat,
    b: Mat,
    k: Mat,
    y0: Vec<f64>,
    bk: Mat,
    closed_loop: Mat,
}

impl SystemSpec {
    pub fn new(a: Mat, b: Mat, k: Mat, y0: Vec<f64>) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "system.a must be square, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if b.rows() != n {
            return Err(Error::Dimension(format!(
                "system.b has {} rows, state dimension is {n}",
                b.rows()
            )));
        }
        if k.rows() != b.cols() || k.cols() != n {
            return Err(Error::Dimension(format!(
                "system.k must be {}x{n}, got {}x{}",
                b.cols(),
                k.rows(),
                k.cols()
            )));
        }
        if y0.len() != n {
            return Err(Error::Dimension(format!(
                "system.y0 has {} entries, state dimension is {n}",
                y0.len()
            )));
        }
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("system.y0 entries must be finite".into()));
        }
        let bk = b.mul(&k);
        let closed_loop = a.sub(&bk);
        Ok(Self {
            a,
            b,
            k,
            y0,
            bk,
            closed_loop,
        })
    }

    /// State dimension `n`.
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    /// Input dimension `m`.
    pub fn m(&self) -> usize {
        self.b.cols()
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn k(&self) -> &Mat {
        &self.k
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn bk(&self) -> &Mat {
        &self.bk
    }

    /// `A − BK`
    pub fn closed_loop(&self) -> &Mat {
        &self.closed_loop
    }
}

fn check_square(m: &Mat, n: usize, what: &str) -> Result<()> {
    if m.rows() != n || m.cols() != n {
        return Err(Error::Dimension(format!(
            "{what} must be {n}x{n}, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

fn check_slopes(slopes: &[Mat], n: usize, what: &str) -> Result<()> {
    if !slopes.is_empty() && slopes.len() != n {
        return Err(Error::Dimension(format!(
            "{what} needs one matrix per state coordinate ({n}), got {}",
            slopes.len()
        )));
    }
    for (i, s) in slopes.iter().enumerate() {
        check_square(s, n, &format!("{what}[{i}]"))?;
    }
    Ok(())
}

/// Applies `out += scale · (M0 + Σ yᵢ Mᵢ) v` without forming the matrix.
fn affine_apply_acc(m0: &Mat, slopes: &[Mat], y: &[f64], v: &[f64], scale: f64, out: &mut [f64]) {
    m0.mul_vec_acc(v, scale, out);
    for (s, &yi) in slopes.iter().zip(y) {
        if yi != 0.0 {
            s.mul_vec_acc(v, scale * yi, out);
        }
    }
}

fn affine_at(m0: &Mat, slopes: &[Mat], y: &[f64]) -> Mat {
    slopes
        .iter()
        .zip(y)
        .fold(m0.clone(), |acc, (s, &yi)| acc.add(&s.scale(yi)))
}

/// Diffusion coefficient `σ(y) = S0 + Σ yᵢ Sᵢ`, driven by an `n`-dimensional
/// Brownian motion.
#[derive(Debug, Clone, PartialEq)]
pub enum DiffusionFamily {
    Constant { s0: Mat },
    Affine { s0: Mat, slopes: Vec<Mat> },
}

impl DiffusionFamily {
    pub fn constant(s0: Mat) -> Result<Self> {
        check_square(&s0, s0.rows(), "diffusion.s0")?;
        Ok(Self::Constant { s0 })
    }

    pub fn affine(s0: Mat, slopes: Vec<Mat>) -> Result<Self> {
        let n = s0.rows();
        check_square(&s0, n, "diffusion.s0")?;
        check_slopes(&slopes, n, "diffusion.slopes")?;
        Ok(Self::Affine { s0, slopes })
    }

    pub fn zero(n: usize) -> Self {
        Self::Constant {
            s0: Mat::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.s0().rows()
    }

    pub fn s0(&self) -> &Mat {
        match self {
            Self::Constant { s0 } | Self::Affine { s0, .. } => s0,
        }
    }

    pub fn slopes(&self) -> &[Mat] {
        match self {
            Self::Constant { .. } => &[],
            Self::Affine { slopes, .. } => slopes,
        }
    }

    pub fn matrix_at(&self, y: &[f64]) -> Mat {
        affine_at(self.s0(), self.slopes(), y)
    }

    /// `out += scale · σ(y) dw`
    pub fn apply_acc(&self, y: &[f64], dw: &[f64], scale: f64, out: &mut [f64]) {
        affine_apply_acc(self.s0(), self.slopes(), y, dw, scale, out);
    }

    /// Global Lipschitz constant `Σ ‖Sᵢ‖₁`.
    pub fn lipschitz_constant(&self) -> f64 {
        self.slopes().iter().map(Mat::one_norm).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.s0().is_zero() && self.slopes().iter().all(Mat::is_zero)
    }
}

/// Jump coefficient `F(y, x) = G(y) x` with `G(y) = G0 + Σ yᵢ Gᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpFamily {
    LinearInMark { g0: Mat, slopes: Vec<Mat> },
}

impl JumpFamily {
    pub fn linear_in_mark(g0: Mat, slopes: Vec<Mat>) -> Result<Self> {
        let n = g0.rows();
        check_square(&g0, n, "jump.g0")?;
        check_slopes(&slopes, n, "jump.slopes")?;
        Ok(Self::LinearInMark { g0, slopes })
    }

    /// `F(y, x) = x`
    pub fn identity(n: usize) -> Self {
        Self::LinearInMark {
            g0: Mat::identity(n),
            slopes: Vec::new(),
        }
    }

    pub fn zero(n: usize) -> Self {
        Self::LinearInMark {
            g0: Mat::zeros(n, n),
            slopes: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.g0().rows()
    }

    pub fn g0(&self) -> &Mat {
        match self {
            Self::LinearInMark { g0, .. } => g0,
        }
    }

    pub fn slopes(&self) -> &[Mat] {
        match self {
            Self::LinearInMark { slopes, .. } => slopes,
        }
    }

    pub fn matrix_at(&self, y: &[f64]) -> Mat {
        affine_at(self.g0(), self.slopes(), y)
    }

    /// `out += scale · F(y, x)`
    pub fn apply_acc(&self, y: &[f64], x: &[f64], scale: f64, out: &mut [f64]) {
        affine_apply_acc(self.g0(), self.slopes(), y, x, scale, out);
    }

    pub fn eval(&self, y: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_acc(y, x, 1.0, &mut out);
        out
    }

    /// `L` in `|F(y1,x) − F(y2,x)| ≤ L |y1 − y2| |x|`.
    pub fn lipschitz_constant(&self) -> f64 {
        self.slopes().iter().map(Mat::one_norm).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.g0().is_zero() && self.slopes().iter().all(Mat::is_zero)
    }
}

/// Everything needed to simulate one experiment besides `(ε, δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub system: SystemSpec,
    pub diffusion: DiffusionFamily,
    pub jump: JumpFamily,
    pub levy: LevyMeasureSpec,
}

impl Model {
    pub fn new(
        system: SystemSpec,
        diffusion: DiffusionFamily,
        jump: JumpFamily,
        levy: LevyMeasureSpec,
    ) -> Result<Self> {
        let n = system.n();
        for (what, dim) in [
            ("diffusion", diffusion.dim()),
            ("jump", jump.dim()),
            ("levy", levy.dim()),
        ] {
            if dim != n {
                return Err(Error::Dimension(format!(
                    "{what} acts on dimension {dim}, state dimension is {n}"
                )));
            }
        }
        Ok(Self {
            system,
            diffusion,
            jump,
            levy,
        })
    }

    /// The same system with every noise pathway switched off.
    pub fn noiseless(system: SystemSpec) -> Self {
        let n = system.n();
        Self {
            system,
            diffusion: DiffusionFamily::zero(n),
            jump: JumpFamily::zero(n),
            levy: LevyMeasureSpec::none(n),
        }
    }

    pub fn n(&self) -> usize {
        self.system.n()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Mat {
        Mat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn closed_loop_of_default_system() {
        let sys = SystemSpec::new(
            mat(&[&[0.0, 1.0], &[-1.0, 0.0]]),
            mat(&[&[0.0], &[1.0]]),
            mat(&[&[1.0, 2.0]]),
            vec![1.0, 0.0],
        )
        .unwrap();
        assert_eq!(sys.closed_loop(), &mat(&[&[0.0, 1.0], &[-2.0, -2.0]]));
        assert_eq!(sys.m(), 1);
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        let a = Mat::identity(2);
        assert!(
            SystemSpec::new(a.clone(), Mat::zeros(3, 1), Mat::zeros(1, 2), vec![0.0; 2]).is_err()
        );
        assert!(
            SystemSpec::new(a.clone(), Mat::zeros(2, 1), Mat::zeros(2, 2), vec![0.0; 2]).is_err()
        );
        assert!(SystemSpec::new(a, Mat::zeros(2, 1), Mat::zeros(1, 2), vec![0.0; 3]).is_err());
        assert!(DiffusionFamily::affine(Mat::identity(2), vec![Mat::identity(2)]).is_err());
        assert!(JumpFamily::linear_in_mark(Mat::zeros(2, 3), vec![]).is_err());
    }

    #[test]
    fn affine_apply_matches_matrix() {
        let f = JumpFamily::linear_in_mark(
            Mat::identity(2),
            vec![Mat::diag(&[0.1, 0.0]), Mat::diag(&[0.0, 0.1])],
        )
        .unwrap();
        let y = [2.0, -3.0];
        let x = [0.5, 0.25];
        let direct = f.matrix_at(&y).mul_vec(&x);
        assert_eq!(f.eval(&y, &x), direct);
        assert!((direct[0] - 0.6).abs() < 1e-15);
        assert!((direct[1] - 0.175).abs() < 1e-15);
    }

    #[test]
    fn scalar_linear_jump() {
        let f = JumpFamily::linear_in_mark(Mat::zeros(1, 1), vec![Mat::identity(1)]).unwrap();
        assert_eq!(f.eval(&[3.0], &[0.5]), vec![1.5]);
        assert_eq!(f.lipschitz_constant(), 1.0);
    }
}
