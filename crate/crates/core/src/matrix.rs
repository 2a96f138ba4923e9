//! Dense complex linear algebra.
//!
//! [`ComplexDenseMatrix`] is the value type for group elements, algebra
//! elements and operators alike; [`ComplexVector`] holds discretized
//! wave functions. Products, LU factorizations and solves are delegated to
//! `faer`; everything else is written out here.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Col, Mat};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("expected a non-empty square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },
    #[error("matrix is singular to working precision (pivot {column}: |u| = {magnitude:e})")]
    SingularMatrix { column: usize, magnitude: f64 },
}

fn check_dims(left: usize, right: usize) -> Result<(), MatrixError> {
    if left == right {
        Ok(())
    } else {
        Err(MatrixError::DimensionMismatch { left, right })
    }
}

/// Square complex matrix with dense column-major storage.
#[derive(Clone, PartialEq)]
pub struct ComplexDenseMatrix {
    inner: Mat<C64>,
}

impl ComplexDenseMatrix {
    /// # Panics
    /// Panics if `n == 0`.
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "matrix dimension must be at least 1");
        Self { inner: Mat::zeros(n, n) }
    }

    /// # Panics
    /// Panics if `n == 0`.
    pub fn identity(n: usize) -> Self {
        assert!(n >= 1, "matrix dimension must be at least 1");
        Self { inner: Mat::identity(n, n) }
    }

    /// # Panics
    /// Panics if `n == 0`.
    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        assert!(n >= 1, "matrix dimension must be at least 1");
        Self {
            inner: Mat::from_fn(n, n, f),
        }
    }

    /// Builds a matrix from its rows, rejecting ragged, empty or non-finite input.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, MatrixError> {
        let n = rows.len();
        if n == 0 {
            return Err(MatrixError::NotSquare { rows: 0, cols: 0 });
        }
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(MatrixError::NotSquare { rows: n, cols: r.len() });
        }
        let m = Self::from_fn(n, |i, j| rows[i][j]);
        m.check_finite()?;
        Ok(m)
    }

    /// Convenience constructor from real row data.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        Self::from_fn(diag.len(), |i, j| if i == j { diag[i] } else { ZERO })
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.inner[(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.check_finite().is_ok()
    }

    pub fn check_finite(&self) -> Result<(), MatrixError> {
        let n = self.dim();
        for j in 0..n {
            for i in 0..n {
                let z = self.inner[(i, j)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(MatrixError::NonFinite { index: i * n + j });
                }
            }
        }
        Ok(())
    }

    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            inner: self.inner.adjoint().to_owned(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        let n = self.dim();
        Self::from_fn(n, |i, j| self.inner[(i, j)] * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// `self + alpha * other`, in place.
    pub fn add_scaled_assign(&mut self, alpha: C64, other: &Self) {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        let n = self.dim();
        for j in 0..n {
            let dst = self.inner.col_as_slice_mut(j);
            let src = other.inner.col_as_slice(j);
            for (d, s) in dst.iter_mut().zip(src) {
                *d += alpha * s;
            }
        }
    }

    /// `I·a + b·self`, the shape every Cayley factor takes.
    pub fn shifted(&self, a: C64, b: C64) -> Self {
        let n = self.dim();
        Self::from_fn(n, |i, j| {
            let v = b * self.inner[(i, j)];
            if i == j {
                v + a
            } else {
                v
            }
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, MatrixError> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self {
            inner: &self.inner * &other.inner,
        })
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &Self) -> Result<Self, MatrixError> {
        check_dims(self.dim(), other.dim())?;
        Ok(self * other - other * self)
    }

    pub fn apply(&self, v: &ComplexVector) -> Result<ComplexVector, MatrixError> {
        check_dims(self.dim(), v.dim())?;
        Ok(ComplexVector {
            inner: &self.inner * &v.inner,
        })
    }

    /// LU factorization with partial pivoting.
    ///
    /// A pivot with magnitude at or below `n·ε·max|a_ij|` is reported as
    /// [`MatrixError::SingularMatrix`].
    pub fn lu(&self) -> Result<LuFactorization, MatrixError> {
        self.lu_relative_to(0.0)
    }

    /// LU that also treats pivots below `n·ε·scale` as singular.
    ///
    /// For `I − cΩ` the entries alone can cancel down to rounding noise, so
    /// callers pass the magnitude of the terms, `1 + |c|·max|Ω|`.
    pub fn lu_relative_to(&self, scale: f64) -> Result<LuFactorization, MatrixError> {
        self.check_finite()?;
        let n = self.dim();
        let lu = self.inner.partial_piv_lu();
        let threshold = n as f64 * f64::EPSILON * self.max_abs().max(scale);
        let u = lu.U();
        for k in 0..n {
            let magnitude = u[(k, k)].norm();
            if magnitude.is_nan() || magnitude <= threshold {
                return Err(MatrixError::SingularMatrix { column: k, magnitude });
            }
        }
        Ok(LuFactorization { lu, n })
    }

    /// Solves `self · X = rhs`.
    pub fn solve(&self, rhs: &Self) -> Result<Self, MatrixError> {
        check_dims(self.dim(), rhs.dim())?;
        Ok(self.lu()?.solve_matrix(rhs))
    }

    pub fn inverse(&self) -> Result<Self, MatrixError> {
        self.solve(&Self::identity(self.dim()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm_l2()
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn one_norm(&self) -> f64 {
        (0..self.dim())
            .map(|j| self.inner.col_as_slice(j).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.dim())
            .flat_map(|j| self.inner.col_as_slice(j).iter().map(|z| z.norm()))
            .fold(0.0, f64::max)
    }

    /// `‖A·A* − I‖_F`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        let mut p = self * &self.adjoint();
        for i in 0..n {
            p.inner[(i, i)] -= ONE;
        }
        p.frobenius_norm()
    }

    /// Integer power by repeated squaring.
    pub fn powi(&self, k: u32) -> Self {
        let mut result = Self::identity(self.dim());
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = &result * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Matrix exponential by scaling and squaring around a Taylor core.
    ///
    /// The argument is scaled by `2^-s` until its 1-norm is at most 1/2; the
    /// Taylor degree is then the smallest one whose remainder bound is below
    /// `1e-16`.
    pub fn expm(&self) -> Result<Self, MatrixError> {
        self.check_finite()?;
        let norm = self.one_norm();
        let mut squarings = 0u32;
        let mut theta = norm;
        while theta > 0.5 {
            theta *= 0.5;
            squarings += 1;
        }
        let scaled = self.scale_real(0.5f64.powi(squarings as i32));
        let degree = taylor_degree(theta, 1e-16);

        // Horner: I + X(I + X/2(I + X/3(...)))
        let n = self.dim();
        let mut acc = Self::identity(n);
        for k in (1..=degree).rev() {
            acc = (&scaled * &acc).scale_real(1.0 / k as f64);
            for i in 0..n {
                acc.inner[(i, i)] += ONE;
            }
        }
        for _ in 0..squarings {
            acc = &acc * &acc;
        }
        Ok(acc)
    }
}

/// Smallest Taylor degree `m` with `θ^(m+1)/(m+1)! / (1 − θ/(m+2)) < tol`.
fn taylor_degree(theta: f64, tol: f64) -> usize {
    let mut term = 1.0;
    for m in 0..64usize {
        term *= theta / (m + 1) as f64;
        let tail = term / (1.0 - theta / (m + 2) as f64).max(f64::MIN_POSITIVE);
        if tail < tol {
            return m.max(1);
        }
    }
    64
}

impl fmt::Debug for ComplexDenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_rows()).finish()
    }
}

impl Index<(usize, usize)> for ComplexDenseMatrix {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.inner[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexDenseMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut C64 {
        &mut self.inner[idx]
    }
}

// Operator impls panic on a dimension mismatch; the named methods return
// `MatrixError` instead.
impl Add for &ComplexDenseMatrix {
    type Output = ComplexDenseMatrix;
    fn add(self, rhs: Self) -> ComplexDenseMatrix {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        ComplexDenseMatrix {
            inner: &self.inner + &rhs.inner,
        }
    }
}

impl Sub for &ComplexDenseMatrix {
    type Output = ComplexDenseMatrix;
    fn sub(self, rhs: Self) -> ComplexDenseMatrix {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        ComplexDenseMatrix {
            inner: &self.inner - &rhs.inner,
        }
    }
}

impl Mul for &ComplexDenseMatrix {
    type Output = ComplexDenseMatrix;
    fn mul(self, rhs: Self) -> ComplexDenseMatrix {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        ComplexDenseMatrix {
            inner: &self.inner * &rhs.inner,
        }
    }
}

impl Neg for &ComplexDenseMatrix {
    type Output = ComplexDenseMatrix;
    fn neg(self) -> ComplexDenseMatrix {
        self.scale_real(-1.0)
    }
}

macro_rules! forward_owned_binop {
    ($tr:ident, $method:ident) => {
        impl $tr for ComplexDenseMatrix {
            type Output = ComplexDenseMatrix;
            fn $method(self, rhs: Self) -> ComplexDenseMatrix {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&ComplexDenseMatrix> for ComplexDenseMatrix {
            type Output = ComplexDenseMatrix;
            fn $method(self, rhs: &ComplexDenseMatrix) -> ComplexDenseMatrix {
                (&self).$method(rhs)
            }
        }
        impl $tr<ComplexDenseMatrix> for &ComplexDenseMatrix {
            type Output = ComplexDenseMatrix;
            fn $method(self, rhs: ComplexDenseMatrix) -> ComplexDenseMatrix {
                self.$method(&rhs)
            }
        }
    };
}

forward_owned_binop!(Add, add);
forward_owned_binop!(Sub, sub);
forward_owned_binop!(Mul, mul);

impl Mul<&ComplexDenseMatrix> for f64 {
    type Output = ComplexDenseMatrix;
    fn mul(self, rhs: &ComplexDenseMatrix) -> ComplexDenseMatrix {
        rhs.scale_real(self)
    }
}

impl Mul<ComplexDenseMatrix> for f64 {
    type Output = ComplexDenseMatrix;
    fn mul(self, rhs: ComplexDenseMatrix) -> ComplexDenseMatrix {
        rhs.scale_real(self)
    }
}

impl Mul<&ComplexDenseMatrix> for C64 {
    type Output = ComplexDenseMatrix;
    fn mul(self, rhs: &ComplexDenseMatrix) -> ComplexDenseMatrix {
        rhs.scale(self)
    }
}

impl Mul<ComplexDenseMatrix> for C64 {
    type Output = ComplexDenseMatrix;
    fn mul(self, rhs: ComplexDenseMatrix) -> ComplexDenseMatrix {
        rhs.scale(self)
    }
}

/// A factorized matrix, reusable across right-hand sides.
pub struct LuFactorization {
    lu: PartialPivLu<C64>,
    n: usize,
}

impl LuFactorization {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_matrix(&self, rhs: &ComplexDenseMatrix) -> ComplexDenseMatrix {
        assert_eq!(self.n, rhs.dim(), "dimension mismatch");
        ComplexDenseMatrix {
            inner: self.lu.solve(&rhs.inner),
        }
    }

    pub fn solve_vector(&self, rhs: &ComplexVector) -> ComplexVector {
        assert_eq!(self.n, rhs.dim(), "dimension mismatch");
        ComplexVector {
            inner: self.lu.solve(&rhs.inner),
        }
    }
}

/// Complex column vector.
#[derive(Clone, PartialEq)]
pub struct ComplexVector {
    inner: Col<C64>,
}

impl ComplexVector {
    /// # Panics
    /// Panics if `n == 0`.
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "vector dimension must be at least 1");
        Self { inner: Col::zeros(n) }
    }

    /// # Panics
    /// Panics on an empty slice.
    pub fn from_slice(values: &[C64]) -> Self {
        assert!(!values.is_empty(), "vector dimension must be at least 1");
        Self {
            inner: Col::from_fn(values.len(), |i| values[i]),
        }
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> C64) -> Self {
        assert!(n >= 1, "vector dimension must be at least 1");
        Self {
            inner: Col::from_fn(n, f),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize) -> C64 {
        self.inner[i]
    }

    pub fn to_vec(&self) -> Vec<C64> {
        (0..self.dim()).map(|i| self.inner[i]).collect()
    }

    pub fn is_finite(&self) -> bool {
        (0..self.dim()).all(|i| self.inner[i].re.is_finite() && self.inner[i].im.is_finite())
    }

    /// Euclidean norm, unweighted.
    pub fn norm(&self) -> f64 {
        self.inner.norm_l2()
    }

    /// `Σ conj(self_i)·other_i`.
    pub fn dot(&self, other: &Self) -> C64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        (0..self.dim()).map(|i| self.inner[i].conj() * other.inner[i]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_fn(self.dim(), |i| self.inner[i] * s)
    }

    pub fn add_scaled_assign(&mut self, alpha: C64, other: &Self) {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        for i in 0..self.dim() {
            self.inner[i] += alpha * other.inner[i];
        }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        (0..self.dim())
            .map(|i| (self.inner[i] - other.inner[i]).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

impl fmt::Debug for ComplexVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_vec()).finish()
    }
}

impl Index<usize> for ComplexVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.inner[i]
    }
}

/// Something that can be applied to vectors without necessarily being
/// stored as a matrix.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply_to(&self, v: &ComplexVector) -> ComplexVector;
    /// Upper bound on the induced 1-norm.
    fn one_norm_bound(&self) -> f64;
    fn to_matrix(&self) -> ComplexDenseMatrix;
}

impl LinearOperator for ComplexDenseMatrix {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn apply_to(&self, v: &ComplexVector) -> ComplexVector {
        ComplexVector {
            inner: &self.inner * &v.inner,
        }
    }

    fn one_norm_bound(&self) -> f64 {
        self.one_norm()
    }

    fn to_matrix(&self) -> ComplexDenseMatrix {
        self.clone()
    }
}

/// `exp(op)·v` by a sub-stepped truncated Taylor series.
///
/// The operator is never exponentiated as a matrix; each sub-step costs one
/// application per retained Taylor term.
pub fn expm_multiply(op: &dyn LinearOperator, v: &ComplexVector) -> ComplexVector {
    const THETA: f64 = 1.0;
    const MAX_TERMS: usize = 60;
    let norm = op.one_norm_bound();
    let substeps = ((norm / THETA).ceil() as usize).max(1);
    let inv_s = 1.0 / substeps as f64;
    let tol = f64::EPSILON * 0.5;

    let mut out = v.clone();
    for _ in 0..substeps {
        let mut term = out.clone();
        let mut acc = out.clone();
        let mut prev_small = false;
        for k in 1..=MAX_TERMS {
            term = op.apply_to(&term).scale(C64::new(inv_s / k as f64, 0.0));
            acc.add_scaled_assign(ONE, &term);
            let small = term.norm() <= tol * acc.norm();
            if small && prev_small {
                break;
            }
            prev_small = small;
        }
        out = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sample(n: usize, seed: u64) -> ComplexDenseMatrix {
        // small LCG keeps these unit tests free of an RNG dependency
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        ComplexDenseMatrix::from_fn(n, |_, _| c(next(), next()))
    }

    #[test]
    fn matmul_identity_and_zero() {
        let m = sample(3, 1);
        let id = ComplexDenseMatrix::identity(3);
        assert_eq!(id.matmul(&m).unwrap(), m);
        let z = ComplexDenseMatrix::zeros(3);
        assert_eq!(m.matmul(&z).unwrap(), z);
    }

    #[test]
    fn swap_matrix_is_an_involution() {
        let x = ComplexDenseMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(x.matmul(&x).unwrap(), ComplexDenseMatrix::identity(2));
    }

    #[test]
    fn matmul_dimension_mismatch() {
        let err = sample(2, 1).matmul(&sample(3, 2)).unwrap_err();
        assert_eq!(err, MatrixError::DimensionMismatch { left: 2, right: 3 });
    }

    #[test]
    fn solve_trivial_systems() {
        let b = sample(4, 3);
        let x = ComplexDenseMatrix::identity(4).solve(&b).unwrap();
        assert!((&x - &b).frobenius_norm() < 1e-15);

        let two = ComplexDenseMatrix::identity(3).scale_real(2.0);
        let half = two.solve(&ComplexDenseMatrix::identity(3)).unwrap();
        assert!((&half - &ComplexDenseMatrix::identity(3).scale_real(0.5)).frobenius_norm() < 1e-15);
    }

    #[test]
    fn solve_recovers_constructed_solution() {
        // diagonally dominant, so comfortably well-conditioned
        let m = &sample(6, 4) + &ComplexDenseMatrix::identity(6).scale_real(8.0);
        let x0 = sample(6, 5);
        let b = &m * &x0;
        let x = m.solve(&b).unwrap();
        assert!((&(&m * &x) - &b).frobenius_norm() <= 1e-12 * b.frobenius_norm());
        assert!((&x - &x0).frobenius_norm() <= 1e-12 * x0.frobenius_norm());
    }

    #[test]
    fn singular_matrix_is_reported() {
        let s = ComplexDenseMatrix::from_real_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(s.solve(&ComplexDenseMatrix::identity(2)), Err(MatrixError::SingularMatrix { .. })));
        assert!(matches!(ComplexDenseMatrix::zeros(3).lu(), Err(MatrixError::SingularMatrix { .. })));
    }

    #[test]
    fn commutator_examples() {
        let a = sample(3, 7);
        assert!(a.commutator(&a).unwrap().frobenius_norm() < 1e-15);
        assert!(ComplexDenseMatrix::identity(3).commutator(&a).unwrap().frobenius_norm() < 1e-15);

        let raise = ComplexDenseMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let lower = ComplexDenseMatrix::from_real_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let expected = ComplexDenseMatrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        assert_eq!(raise.commutator(&lower).unwrap(), expected);
    }

    #[test]
    fn commutator_is_antisymmetric() {
        let a = sample(5, 8);
        let b = sample(5, 9);
        let ab = a.commutator(&b).unwrap();
        let ba = b.commutator(&a).unwrap();
        assert!((&ab + &ba).frobenius_norm() <= 1e-14 * ab.frobenius_norm());
    }

    #[test]
    fn expm_examples() {
        let e0 = ComplexDenseMatrix::zeros(3).expm().unwrap();
        assert_eq!(e0, ComplexDenseMatrix::identity(3));

        let d = ComplexDenseMatrix::from_diagonal(&[c(0.0, std::f64::consts::PI), ZERO]);
        let ed = d.expm().unwrap();
        let expected = ComplexDenseMatrix::from_diagonal(&[c(-1.0, 0.0), ONE]);
        assert!((&ed - &expected).frobenius_norm() < 1e-14);

        // exp(iθσx) = cos θ I + i sin θ σx
        let theta = 0.3;
        let sx = ComplexDenseMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let e = sx.scale(c(0.0, theta)).expm().unwrap();
        let expected = &ComplexDenseMatrix::identity(2).scale_real(theta.cos()) + &sx.scale(c(0.0, theta.sin()));
        assert!((&e - &expected).frobenius_norm() < 1e-15);
    }

    #[test]
    fn expm_scaled_diagonal_relative_accuracy() {
        // ‖A‖ up to 10 on a diagonal matrix, compared entrywise with scalar exp
        let diag = [c(-10.0, 0.0), c(0.0, 9.5), c(3.0, -4.0), c(-2.5, 7.0)];
        let e = ComplexDenseMatrix::from_diagonal(&diag).expm().unwrap();
        for (k, z) in diag.iter().enumerate() {
            let exact = z.exp();
            assert!((e[(k, k)] - exact).norm() <= 1e-13 * exact.norm(), "entry {k}");
        }
    }

    #[test]
    fn expm_homomorphism_for_commuting_arguments() {
        let a = ComplexDenseMatrix::from_diagonal(&[c(0.3, 1.0), c(-0.7, 0.2), c(1.1, -2.0)]);
        let b = ComplexDenseMatrix::from_diagonal(&[c(-0.4, 0.5), c(0.9, 0.0), c(0.1, 3.0)]);
        let lhs = (&a + &b).expm().unwrap();
        let rhs = &a.expm().unwrap() * &b.expm().unwrap();
        assert!((&lhs - &rhs).frobenius_norm() <= 1e-12);
    }

    #[test]
    fn norms() {
        let id = ComplexDenseMatrix::identity(2);
        assert!((id.frobenius_norm() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(id.unitarity_defect(), 0.0);
        assert!((id.scale_real(2.0).unitarity_defect() - 3.0 * 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn expm_multiply_matches_expm() {
        let a = sample(6, 11).scale_real(1.7);
        let v = ComplexVector::from_fn(6, |i| c(i as f64, 1.0 - i as f64));
        let dense = a.expm().unwrap().apply(&v).unwrap();
        let action = expm_multiply(&a, &v);
        assert!(dense.distance(&action) <= 1e-13 * dense.norm());
    }

    #[test]
    fn from_rows_validation() {
        assert!(matches!(ComplexDenseMatrix::from_rows(&[]), Err(MatrixError::NotSquare { .. })));
        assert!(matches!(
            ComplexDenseMatrix::from_real_rows(&[vec![1.0, 2.0]]),
            Err(MatrixError::NotSquare { .. })
        ));
        assert!(matches!(
            ComplexDenseMatrix::from_real_rows(&[vec![f64::NAN]]),
            Err(MatrixError::NonFinite { .. })
        ));
    }
}
