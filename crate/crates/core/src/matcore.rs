//! Small dense linear algebra and exact propagators for linear systems.
//!
//! State dimensions in this crate are tiny (a handful of coordinates), so
//! matrices are plain row-major `Vec<f64>` buffers and vectors are slices.
//! Norms follow the one-norm convention throughout: `|x| = Σ|xᵢ|` for
//! vectors and the induced (max column sum) norm for matrices.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// One-norm of a vector.
pub fn one_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// One-norm of the difference `a - b`.
pub fn one_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "matrix must have positive dimensions, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a list of equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != n_cols) {
            return Err(Error::Dimension(format!(
                "row {bad} has {} entries, expected {n_cols}",
                rows[bad].len()
            )));
        }
        Self::new(n_rows, n_cols, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in entries.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    /// Induced one-norm: the maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(
            self.cols, other.rows,
            "cannot multiply {}x{} by {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    fn zip_with(&self, other: &Mat, f: impl Fn(f64, f64) -> f64) -> Mat {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "shape mismatch in elementwise operation"
        );
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self · v` as a new vector.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(v, &mut out);
        out
    }

    /// `out = self · v`.
    #[inline]
    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    /// `out += scale · self · v`.
    #[inline]
    pub fn mul_vec_acc(&self, v: &[f64], scale: f64, out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let dot: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
            *o += scale * dot;
        }
    }

    /// Copies the `rows x cols` block whose top-left corner is `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Mat {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols);
        let mut out = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out.set(i, j, self.get(r0 + i, c0 + j));
            }
        }
        out
    }
}

/// Induced one-norm of a matrix.
pub fn mat_one_norm(m: &Mat) -> f64 {
    m.one_norm()
}

// Padé coefficients b_0..b_m for the diagonal [m/m] approximant of exp.
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest one-norms for which each approximant is accurate to unit roundoff
// in double precision.
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.53939833006323e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential `e^{A t}` by scaling and squaring with a Padé core.
pub fn expm(a: &Mat, t: f64) -> Result<Mat> {
    if !a.is_square() {
        return Err(Error::Config(format!(
            "expm needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !t.is_finite() {
        return Err(Error::Config(format!("expm time must be finite, got {t}")));
    }
    let n = a.rows();
    let at = a.scale(t);
    let norm = at.one_norm();
    if norm == 0.0 {
        return Ok(Mat::identity(n));
    }

    for (theta, coeffs) in [
        (THETA3, &PADE3[..]),
        (THETA5, &PADE5[..]),
        (THETA7, &PADE7[..]),
        (THETA9, &PADE9[..]),
    ] {
        if norm <= theta {
            return Ok(pade_low(&at, coeffs));
        }
    }

    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = at.scale(2f64.powi(-squarings));
    let mut result = pade13(&scaled);
    for _ in 0..squarings {
        result = result.mul(&result);
    }
    Ok(result)
}

fn pade_low(a: &Mat, b: &[f64]) -> Mat {
    let n = a.rows();
    let a2 = a.mul(a);
    let mut u = Mat::identity(n).scale(b[1]);
    let mut v = Mat::identity(n).scale(b[0]);
    let mut power = Mat::identity(n);
    let m = b.len() - 1;
    for k in (2..=m).step_by(2) {
        power = power.mul(&a2);
        v = v.add(&power.scale(b[k]));
        if k < m {
            u = u.add(&power.scale(b[k + 1]));
        }
    }
    let u = a.mul(&u);
    solve_pade(&u, &v)
}

fn pade13(a: &Mat) -> Mat {
    let b = &PADE13;
    let n = a.rows();
    let id = Mat::identity(n);
    let a2 = a.mul(a);
    let a4 = a2.mul(&a2);
    let a6 = a4.mul(&a2);
    let u_inner = a6
        .mul(&a6.scale(b[13]).add(&a4.scale(b[11])).add(&a2.scale(b[9])))
        .add(&a6.scale(b[7]))
        .add(&a4.scale(b[5]))
        .add(&a2.scale(b[3]))
        .add(&id.scale(b[1]));
    let u = a.mul(&u_inner);
    let v = a6
        .mul(&a6.scale(b[12]).add(&a4.scale(b[10])).add(&a2.scale(b[8])))
        .add(&a6.scale(b[6]))
        .add(&a4.scale(b[4]))
        .add(&a2.scale(b[2]))
        .add(&id.scale(b[0]));
    solve_pade(&u, &v)
}

/// Solves `(V - U) X = (V + U)`.
fn solve_pade(u: &Mat, v: &Mat) -> Mat {
    let p = v.sub(u);
    let q = v.add(u);
    lu_solve(&p, &q).expect("Padé denominator is nonsingular within the theta bounds")
}

/// Gaussian elimination with partial pivoting for a matrix right-hand side.
fn lu_solve(a: &Mat, b: &Mat) -> Option<Mat> {
    let n = a.rows();
    let m = b.cols();
    let mut a = a.data.clone();
    let mut x = b.data.clone();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap();
        if a[pivot * n + col] == 0.0 {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            for j in 0..m {
                x.swap(col * m + j, pivot * m + j);
            }
        }
        let d = a[col * n + col];
        for i in col + 1..n {
            let f = a[i * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[i * n + j] -= f * a[col * n + j];
            }
            for j in 0..m {
                x[i * m + j] -= f * x[col * m + j];
            }
        }
    }
    for col in (0..n).rev() {
        let d = a[col * n + col];
        for j in 0..m {
            let mut s = x[col * m + j];
            for k in col + 1..n {
                s -= a[col * n + k] * x[k * m + j];
            }
            x[col * m + j] = s / d;
        }
    }
    Some(Mat {
        rows: n,
        cols: m,
        data: x,
    })
}

/// Exact one-step operators of `ẋ = A x + u` with `u` held constant:
/// `x(h) = phi · x(0) + psi · u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    /// `e^{A h}`
    pub phi: Mat,
    /// `∫₀^h e^{A u} du`
    pub psi: Mat,
    pub step: f64,
}

/// Builds `e^{Ah}` and `∫₀^h e^{Au} du` from one exponential of the augmented
/// block matrix `[[A, I], [0, 0]]·h`.
pub fn propagator(a: &Mat, h: f64) -> Result<Propagator> {
    if !a.is_square() {
        return Err(Error::Config(format!(
            "propagator needs a square generator, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Config(format!(
            "propagator step must be positive and finite, got {h}"
        )));
    }
    let n = a.rows();
    let mut aug = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            aug.set(i, j, a.get(i, j));
        }
        aug.set(i, n + i, 1.0);
    }
    let e = expm(&aug, h)?;
    Ok(Propagator {
        phi: e.block(0, 0, n, n),
        psi: e.block(0, n, n, n),
        step: h,
    })
}

/// Memoizes propagators of one generator by the exact bit pattern of the step.
///
/// Grids reuse a handful of distinct step lengths, so the cache stays small.
#[derive(Debug, Clone)]
pub struct PropagatorCache {
    generator: Mat,
    cache: HashMap<u64, Propagator>,
}

impl PropagatorCache {
    pub fn new(generator: Mat) -> Result<Self> {
        if !generator.is_square() {
            return Err(Error::Dimension(
                "propagator generator must be square".into(),
            ));
        }
        Ok(Self {
            generator,
            cache: HashMap::new(),
        })
    }

    pub fn generator(&self) -> &Mat {
        &self.generator
    }

    pub fn get(&mut self, step: f64) -> &Propagator {
        let generator = &self.generator;
        self.cache.entry(step.to_bits()).or_insert_with(|| {
            if step == 0.0 {
                let n = generator.rows();
                Propagator {
                    phi: Mat::identity(n),
                    psi: Mat::zeros(n, n),
                    step,
                }
            } else {
                propagator(generator, step).expect("grid steps are positive and finite")
            }
        })
    }

    pub fn len(&self) -> usize {
        self.cache.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cache.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &Mat, b: &Mat, tol: f64) {
        let err = a.sub(b).one_norm();
        assert!(err <= tol, "one-norm error {err} > {tol}\n{a:?}\n{b:?}");
    }

    #[test]
    fn vector_one_norm() {
        assert_eq!(one_norm(&[1.0, -2.0]), 3.0);
        assert_eq!(one_norm(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(one_norm(&[-0.5]), 0.5);
    }

    #[test]
    fn matrix_one_norm() {
        assert_eq!(Mat::identity(2).one_norm(), 1.0);
        let m = Mat::from_rows(&[vec![1.0, -3.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(mat_one_norm(&m), 3.0);
        assert_eq!(Mat::zeros(3, 2).one_norm(), 0.0);
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(Mat::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(Mat::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Mat::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = Mat::zeros(3, 3);
        for t in [0.0, 1.0, -7.5] {
            assert_eq!(expm(&z, t).unwrap(), Mat::identity(3));
        }
    }

    #[test]
    fn expm_diagonal() {
        let a = Mat::diag(&[-1.0, 0.5, 3.0]);
        for t in [0.1, 1.0, -2.0, 10.0] {
            let e = expm(&a, t).unwrap();
            let exact = Mat::diag(&[(-t).exp(), (0.5 * t).exp(), (3.0 * t).exp()]);
            let rel = e.sub(&exact).one_norm() / exact.one_norm();
            assert!(rel <= 1e-13, "t={t}: rel err {rel}");
        }
    }

    #[test]
    fn expm_nilpotent() {
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        for t in [0.3, 2.0, -4.0, 50.0] {
            let exact = Mat::from_rows(&[vec![1.0, t], vec![0.0, 1.0]]).unwrap();
            assert_close(&expm(&a, t).unwrap(), &exact, 1e-12 * exact.one_norm());
        }
    }

    #[test]
    fn expm_rotation_at_large_norm() {
        // ‖A t‖ = 100: the top of the accuracy envelope.
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let t: f64 = 100.0;
        let exact = Mat::from_rows(&[vec![t.cos(), t.sin()], vec![-t.sin(), t.cos()]]).unwrap();
        let e = expm(&a, t).unwrap();
        let rel = e.sub(&exact).one_norm() / exact.one_norm();
        assert!(rel <= 1e-12, "rel err {rel}");
    }

    #[test]
    fn expm_rejects_rectangular() {
        assert!(matches!(
            expm(&Mat::zeros(2, 3), 1.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn propagator_zero_generator() {
        let p = propagator(&Mat::zeros(2, 2), 0.5).unwrap();
        assert_eq!(p.phi, Mat::identity(2));
        assert_close(&p.psi, &Mat::identity(2).scale(0.5), 1e-15);
    }

    #[test]
    fn propagator_scalar() {
        for (a, h) in [(-1.0, 0.5), (2.0, 0.1), (-30.0, 0.2)] {
            let p = propagator(&Mat::diag(&[a]), h).unwrap();
            let phi = (a * h).exp();
            let psi = ((a * h).exp() - 1.0) / a;
            assert!((p.phi.get(0, 0) - phi).abs() <= 1e-14 * phi.abs().max(1.0));
            assert!((p.psi.get(0, 0) - psi).abs() <= 1e-14 * psi.abs().max(1.0));
        }
    }

    #[test]
    fn propagator_polynomial_integrand() {
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let h = 0.3;
        let p = propagator(&a, h).unwrap();
        let exact = Mat::from_rows(&[vec![h, h * h / 2.0], vec![0.0, h]]).unwrap();
        assert_close(&p.psi, &exact, 1e-15);
    }

    #[test]
    fn propagator_identity_phi_eq_i_plus_a_psi() {
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![-2.0, -2.0]]).unwrap();
        for h in [1e-4, 0.01, 0.5, 3.0] {
            let p = propagator(&a, h).unwrap();
            let rhs = Mat::identity(2).add(&a.mul(&p.psi));
            assert_close(&p.phi, &rhs, 1e-12);
        }
    }

    #[test]
    fn cache_reuses_steps() {
        let mut cache = PropagatorCache::new(Mat::diag(&[-1.0])).unwrap();
        cache.get(0.1);
        cache.get(0.1);
        cache.get(0.2);
        assert_eq!(cache.len(), 2);
        assert_eq!(cache.get(0.0).phi, Mat::identity(1));
    }
}
