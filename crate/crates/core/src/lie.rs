//! Quadratic matrix Lie groups `G = {X : X J X* = J}`, their algebras,
//! Cayley transforms and the Cayley composition (BCH-type) formulas.

use crate::matrix::{ComplexDenseMatrix, MatrixError, C64, ONE, ZERO};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LieError {
    #[error("J must be invertible: {0}")]
    SingularJ(MatrixError),
    #[error("membership tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error("symplectic groups need an even dimension, got {0}")]
    OddSymplectic(usize),
    #[error("Cayley parameter must be nonzero and finite")]
    BadCayleyParameter,
}

/// The metric matrix `J` together with a relative membership tolerance.
#[derive(Debug, Clone)]
pub struct QuadraticGroup {
    j: ComplexDenseMatrix,
    tol: f64,
}

impl QuadraticGroup {
    pub fn new(j: ComplexDenseMatrix, tol: f64) -> Result<Self, LieError> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(LieError::BadTolerance(tol));
        }
        j.lu().map_err(LieError::SingularJ)?;
        Ok(Self { j, tol })
    }

    /// `U(n)`, with `J = I`.
    pub fn unitary(n: usize) -> Self {
        Self {
            j: ComplexDenseMatrix::identity(n),
            tol: DEFAULT_TOLERANCE,
        }
    }

    /// `Sp(dim)`, with `J = [[0, I], [−I, 0]]` in blocks of size `dim / 2`.
    pub fn symplectic(dim: usize) -> Result<Self, LieError> {
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(LieError::OddSymplectic(dim));
        }
        let h = dim / 2;
        let j = ComplexDenseMatrix::from_fn(dim, |r, c| {
            if c == r + h {
                ONE
            } else if r == c + h {
                -ONE
            } else {
                ZERO
            }
        });
        Ok(Self { j, tol: DEFAULT_TOLERANCE })
    }

    /// Lorentz group with `J = diag(1, 1, 1, −1)`.
    pub fn lorentz() -> Self {
        Self {
            j: ComplexDenseMatrix::from_diagonal(&[ONE, ONE, ONE, -ONE]),
            tol: DEFAULT_TOLERANCE,
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Result<Self, LieError> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(LieError::BadTolerance(tol));
        }
        self.tol = tol;
        Ok(self)
    }

    pub fn j(&self) -> &ComplexDenseMatrix {
        &self.j
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn dim(&self) -> usize {
        self.j.dim()
    }

    /// `‖X J X* − J‖_F`.
    pub fn group_defect(&self, x: &ComplexDenseMatrix) -> Result<f64, MatrixError> {
        let xj = x.matmul(&self.j)?;
        Ok((&(&xj * &x.adjoint()) - &self.j).frobenius_norm())
    }

    /// `‖Ω J + J Ω*‖_F`.
    pub fn algebra_defect(&self, omega: &ComplexDenseMatrix) -> Result<f64, MatrixError> {
        let oj = omega.matmul(&self.j)?;
        Ok((&oj + &(&self.j * &omega.adjoint())).frobenius_norm())
    }

    pub fn in_group(&self, x: &ComplexDenseMatrix) -> Result<bool, MatrixError> {
        Ok(self.group_defect(x)? <= self.tol * self.j.frobenius_norm())
    }

    pub fn in_algebra(&self, omega: &ComplexDenseMatrix) -> Result<bool, MatrixError> {
        Ok(self.algebra_defect(omega)? <= self.tol * (1.0 + omega.frobenius_norm()))
    }
}

/// Nonzero complex parameter `c` of the transform `(I − cΩ)⁻¹(I + c*Ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CayleyParameter(C64);

impl CayleyParameter {
    pub const HALF: CayleyParameter = CayleyParameter(C64::new(0.5, 0.0));

    pub fn new(c: C64) -> Result<Self, LieError> {
        if c.norm() == 0.0 || !c.re.is_finite() || !c.im.is_finite() {
            return Err(LieError::BadCayleyParameter);
        }
        Ok(Self(c))
    }

    pub fn value(self) -> C64 {
        self.0
    }
}

impl Default for CayleyParameter {
    fn default() -> Self {
        Self::HALF
    }
}

/// `Cay(Ω, c) = (I − cΩ)⁻¹(I + c*Ω)`.
pub fn cayley_with(omega: &ComplexDenseMatrix, c: CayleyParameter) -> Result<ComplexDenseMatrix, MatrixError> {
    let c = c.value();
    let lhs = omega.shifted(ONE, -c);
    let rhs = omega.shifted(ONE, c.conj());
    let lu = lhs.lu_relative_to(1.0 + c.norm() * omega.max_abs())?;
    Ok(lu.solve_matrix(&rhs))
}

/// Classical Cayley transform, `c = 1/2`.
pub fn cayley(omega: &ComplexDenseMatrix) -> Result<ComplexDenseMatrix, MatrixError> {
    cayley_with(omega, CayleyParameter::HALF)
}

/// `−(1/c*)(I + (c/c*)Y)⁻¹(I − Y)`.
pub fn inverse_cayley_with(y: &ComplexDenseMatrix, c: CayleyParameter) -> Result<ComplexDenseMatrix, MatrixError> {
    let c = c.value();
    let cs = c.conj();
    let lhs = y.shifted(ONE, c / cs);
    let rhs = y.shifted(ONE, -ONE);
    let lu = lhs.lu_relative_to(1.0 + y.max_abs())?;
    Ok(lu.solve_matrix(&rhs).scale(-ONE / cs))
}

pub fn inverse_cayley(y: &ComplexDenseMatrix) -> Result<ComplexDenseMatrix, MatrixError> {
    inverse_cayley_with(y, CayleyParameter::HALF)
}

fn same_dims(ms: &[&ComplexDenseMatrix]) -> Result<(), MatrixError> {
    let n = ms[0].dim();
    for m in &ms[1..] {
        if m.dim() != n {
            return Err(MatrixError::DimensionMismatch { left: n, right: m.dim() });
        }
    }
    Ok(())
}

/// Third-order argument `Ω̂` with `Cay(Ω̂) ≈ Cay(A)·Cay(B)·Cay(C)`.
pub fn bch_cayley3(
    a: &ComplexDenseMatrix,
    b: &ComplexDenseMatrix,
    c: &ComplexDenseMatrix,
) -> Result<ComplexDenseMatrix, MatrixError> {
    same_dims(&[a, b, c])?;
    let ab = a * b;
    let ba = b * a;
    let ac = a * c;
    let ca = c * a;
    let bc = b * c;
    let cb = c * b;
    let comm_ab = &ab - &ba;

    let mut out = a + b;
    out = &out + c;

    let brackets = &(&comm_ab + &(&ac - &ca)) + &(&bc - &cb);
    out.add_scaled_assign(C64::new(0.5, 0.0), &brackets);

    let nested = &(&comm_ab * c) - &(c * &comm_ab);
    out.add_scaled_assign(C64::new(0.25, 0.0), &nested);

    let cross = &(&ac * b) + &(&bc * a);
    out.add_scaled_assign(C64::new(-0.25, 0.0), &cross);

    let sandwiches = [&ab * a, &ac * a, &ba * b, &bc * b, &ca * c, &cb * c];
    for s in &sandwiches {
        out.add_scaled_assign(C64::new(-0.25, 0.0), s);
    }
    Ok(out)
}

/// Two-factor case, `Cay(Ω̂) ≈ Cay(A)·Cay(B)`.
pub fn bch_cayley2(a: &ComplexDenseMatrix, b: &ComplexDenseMatrix) -> Result<ComplexDenseMatrix, MatrixError> {
    same_dims(&[a, b])?;
    let ab = a * b;
    let ba = b * a;
    let mut out = a + b;
    out.add_scaled_assign(C64::new(0.5, 0.0), &(&ab - &ba));
    out.add_scaled_assign(C64::new(-0.25, 0.0), &(&ab * a));
    out.add_scaled_assign(C64::new(-0.25, 0.0), &(&ba * b));
    Ok(out)
}

/// Symmetric case, `Cay(Ω̂) ≈ Cay(A)·Cay(B)·Cay(A)`.
pub fn sbch_cayley(a: &ComplexDenseMatrix, b: &ComplexDenseMatrix) -> Result<ComplexDenseMatrix, MatrixError> {
    same_dims(&[a, b])?;
    let a2 = a * a;
    let mut out = a.scale_real(2.0);
    out = &out + b;
    let cubic = &(&(&(&a2 * b) + &(b * &a2)) + &(&(b * a) * b)) + &(&a2 * a);
    out.add_scaled_assign(C64::new(-0.5, 0.0), &cubic);
    Ok(out)
}

/// Random element of `u(n)` with unit Frobenius norm.
pub fn random_skew_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexDenseMatrix {
    let m = ComplexDenseMatrix::from_fn(n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let s = &m - &m.adjoint();
    let norm = s.frobenius_norm();
    s.scale_real(1.0 / norm)
}

/// Which composition formula a defect study exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BchFormula {
    /// `Cay(A)Cay(B)Cay(C)` against [`bch_cayley3`].
    Three,
    /// `Cay(A)Cay(B)` against [`bch_cayley2`].
    Two,
    /// `Cay(A)Cay(B)Cay(A)` against [`sbch_cayley`].
    Symmetric,
}

/// `‖Cay(εA)⋯ − Cay(Ω̂(εA, …))‖_F` for one triple and one `ε`.
pub fn bch_defect(
    formula: BchFormula,
    a: &ComplexDenseMatrix,
    b: &ComplexDenseMatrix,
    c: &ComplexDenseMatrix,
    eps: f64,
) -> Result<f64, MatrixError> {
    let (a, b, c) = (a.scale_real(eps), b.scale_real(eps), c.scale_real(eps));
    let (product, omega) = match formula {
        BchFormula::Three => (&(&cayley(&a)? * &cayley(&b)?) * &cayley(&c)?, bch_cayley3(&a, &b, &c)?),
        BchFormula::Two => (&cayley(&a)? * &cayley(&b)?, bch_cayley2(&a, &b)?),
        BchFormula::Symmetric => {
            let ca = cayley(&a)?;
            (&(&ca * &cayley(&b)?) * &ca, sbch_cayley(&a, &b)?)
        }
    };
    Ok((&product - &cayley(&omega)?).frobenius_norm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BchSample {
    pub sample: usize,
    pub eps: f64,
    pub defect: f64,
}

/// Defects for `samples` seeded random `n×n` skew-Hermitian triples over
/// the `eps` grid. Same seed, same output.
pub fn bch_defect_study(
    formula: BchFormula,
    seed: u64,
    samples: usize,
    n: usize,
    eps: &[f64],
) -> Result<Vec<BchSample>, MatrixError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples * eps.len());
    for sample in 0..samples {
        let a = random_skew_hermitian(&mut rng, n);
        let b = random_skew_hermitian(&mut rng, n);
        let c = random_skew_hermitian(&mut rng, n);
        for &e in eps {
            out.push(BchSample {
                sample,
                eps: e,
                defect: bch_defect(formula, &a, &b, &c, e)?,
            });
        }
    }
    Ok(out)
}
