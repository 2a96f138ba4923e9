//! Test problems: a periodically driven two-level system with a closed-form
//! propagator, and a 1-D Schrödinger equation on a periodic Fourier grid.

use std::f64::consts::PI;

use crate::lie::QuadraticGroup;
use crate::matrix::{ComplexDenseMatrix, ComplexVector, C64, I};
use crate::quadrature::GeneratorSampler;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
}

/// Detuning `Δ`, coupling `V` and drive frequency `ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelParams {
    pub delta: f64,
    pub v: f64,
    pub omega: f64,
}

impl Default for TwoLevelParams {
    fn default() -> Self {
        Self {
            delta: 0.5,
            v: 0.5,
            omega: 1.0,
        }
    }
}

impl TwoLevelParams {
    /// `Λ = √((Δ − ω)² + V²)`.
    pub fn lambda(&self) -> f64 {
        ((self.delta - self.omega).powi(2) + self.v * self.v).sqrt()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if ![self.delta, self.v, self.omega].iter().all(|x| x.is_finite()) {
            return Err(ModelError::InvalidParameter("two-level parameters must be finite".into()));
        }
        if self.lambda() <= 0.0 {
            return Err(ModelError::InvalidParameter("(Δ − ω)² + V² must be positive".into()));
        }
        Ok(())
    }

    /// Drive period of the Hamiltonian, `π/ω`.
    pub fn period(&self) -> f64 {
        PI / self.omega
    }
}

/// `A(t) = −i H(t)` with `H(t) = [[Δ, V e^{−2iωt}], [V e^{2iωt}, −Δ]]`.
#[derive(Debug, Clone)]
pub struct TwoLevelModel {
    pub params: TwoLevelParams,
}

impl TwoLevelModel {
    pub fn new(params: TwoLevelParams) -> Result<Self, ModelError> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn hamiltonian(&self, t: f64) -> ComplexDenseMatrix {
        let p = &self.params;
        let phase = C64::from_polar(p.v, 2.0 * p.omega * t);
        let d = C64::new(p.delta, 0.0);
        ComplexDenseMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 0) => d,
            (0, 1) => phase.conj(),
            (1, 0) => phase,
            _ => -d,
        })
    }
}

impl GeneratorSampler for TwoLevelModel {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, t: f64) -> ComplexDenseMatrix {
        self.hamiltonian(t).scale(-I)
    }

    fn group(&self) -> QuadraticGroup {
        QuadraticGroup::unitary(2)
    }
}

pub fn two_level_generator(p: TwoLevelParams) -> Result<TwoLevelModel, ModelError> {
    TwoLevelModel::new(p)
}

/// Closed-form propagator `Y(t)` with `Y(0) = I`.
pub fn two_level_exact(p: &TwoLevelParams, t: f64) -> ComplexDenseMatrix {
    let lam = p.lambda();
    let (s, c) = (lam * t).sin_cos();
    let r = (p.delta - p.omega) / lam;
    let q = p.v / lam;
    let e_minus = C64::from_polar(1.0, -p.omega * t);
    let e_plus = e_minus.conj();
    ComplexDenseMatrix::from_fn(2, |i, j| match (i, j) {
        (0, 0) => e_minus * C64::new(c, -r * s),
        (0, 1) => e_minus * C64::new(0.0, -q * s),
        (1, 0) => e_plus * C64::new(0.0, -q * s),
        _ => e_plus * C64::new(c, r * s),
    })
}

/// Spin-flip probability `(V/Λ)² sin²(Λt)`.
pub fn transition_probability(p: &TwoLevelParams, t: f64) -> f64 {
    let lam = p.lambda();
    (p.v / lam).powi(2) * (lam * t).sin().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchrodingerParams {
    /// Half-width of the periodic domain `[−L, L)`.
    pub l: f64,
    /// Number of grid points (even).
    pub n: usize,
    /// Drive amplitude in `u(t) = c sin(ωt)`.
    pub c: f64,
    pub omega: f64,
    pub sigma: f64,
    pub x0: f64,
    /// Sign in front of the second derivative, `H = s ∂ₓ² + V`.
    pub kinetic_sign: f64,
}

impl Default for SchrodingerParams {
    fn default() -> Self {
        Self {
            l: 10.0,
            n: 256,
            c: -100.0,
            omega: 5.0 * PI,
            sigma: 0.5,
            x0: -2.0,
            kinetic_sign: 1.0,
        }
    }
}

impl SchrodingerParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n < 16 || !self.n.is_multiple_of(2) {
            return Err(ModelError::InvalidParameter(format!("N must be even and at least 16, got {}", self.n)));
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("L must be positive, got {}", self.l)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.kinetic_sign != 1.0 && self.kinetic_sign != -1.0 {
            return Err(ModelError::InvalidParameter("kinetic sign must be +1 or -1".into()));
        }
        if ![self.c, self.omega, self.x0].iter().all(|x| x.is_finite()) {
            return Err(ModelError::InvalidParameter("parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    /// `x_j = −L + j h`.
    pub fn grid(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n).map(|j| -self.l + j as f64 * h).collect()
    }

    pub fn v0(x: f64) -> f64 {
        let x2 = x * x;
        x2 * x2 - 10.0 * x2
    }

    pub fn drive(&self, t: f64) -> f64 {
        self.c * (self.omega * t).sin()
    }

    /// `exp(−(x − x0)²/(2σ²))`.
    pub fn packet_profile(&self, x: f64) -> f64 {
        (-(x - self.x0).powi(2) / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Spectral second-derivative matrix on the periodic grid.
///
/// Equal to `F* diag(−k_m²) F` for the unitary DFT `F` and `k_m = πm/L`,
/// `m = −N/2 … N/2 − 1`. The product is circulant with the closed-form
/// entries `−(π/L)²(N²/12 + 1/6)` on the diagonal and
/// `−(π/L)² (−1)^d / (2 sin²(πd/N))` at offset `d`.
pub fn spectral_second_derivative(l: f64, n: usize) -> ComplexDenseMatrix {
    let nf = n as f64;
    let scale = (PI / l).powi(2);
    let column: Vec<f64> = (0..n)
        .map(|d| {
            if d == 0 {
                -scale * (nf * nf / 12.0 + 1.0 / 6.0)
            } else {
                let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
                let s = (PI * d as f64 / nf).sin();
                -scale * sign / (2.0 * s * s)
            }
        })
        .collect();
    ComplexDenseMatrix::from_fn(n, |i, j| C64::new(column[(i + n - j) % n], 0.0))
}

/// `A(t) = −i (s D₂ + diag(V₀(x) + u(t) x))`.
#[derive(Debug, Clone)]
pub struct SchrodingerModel {
    pub params: SchrodingerParams,
    x: Vec<f64>,
    v0: Vec<f64>,
    /// `s D₂`
    kinetic: ComplexDenseMatrix,
    /// `−i s D₂`
    kinetic_generator: ComplexDenseMatrix,
}

impl SchrodingerModel {
    pub fn new(params: SchrodingerParams) -> Result<Self, ModelError> {
        params.validate()?;
        let x = params.grid();
        let v0 = x.iter().map(|&x| SchrodingerParams::v0(x)).collect();
        let kinetic = spectral_second_derivative(params.l, params.n).scale_real(params.kinetic_sign);
        let kinetic_generator = kinetic.scale(-I);
        Ok(Self {
            params,
            x,
            v0,
            kinetic,
            kinetic_generator,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.x
    }

    pub fn potential(&self, t: f64) -> Vec<f64> {
        let u = self.params.drive(t);
        self.x.iter().zip(&self.v0).map(|(x, v)| v + u * x).collect()
    }

    pub fn hamiltonian(&self, t: f64) -> ComplexDenseMatrix {
        let mut h = self.kinetic.clone();
        for (j, v) in self.potential(t).into_iter().enumerate() {
            h[(j, j)] += v;
        }
        h
    }

    /// `H(t) φ` without forming `H(t)`.
    pub fn apply_hamiltonian(&self, t: f64, phi: &ComplexVector) -> ComplexVector {
        let kin = self.kinetic.apply(phi).expect("dimension checked by caller");
        let pot = self.potential(t);
        ComplexVector::from_fn(phi.dim(), |j| kin[j] + phi[j] * pot[j])
    }

    /// Grid-weighted inner product `h Σ conj(u_j) v_j`.
    pub fn inner(&self, u: &ComplexVector, v: &ComplexVector) -> C64 {
        u.dot(v) * self.params.spacing()
    }

    /// Grid-weighted norm `√(h Σ |φ_j|²)`.
    pub fn norm(&self, phi: &ComplexVector) -> f64 {
        phi.norm() * self.params.spacing().sqrt()
    }

    /// `⟨φ, H(t) φ⟩` in the grid-weighted inner product; real up to rounding.
    pub fn expectation(&self, t: f64, phi: &ComplexVector) -> C64 {
        self.inner(phi, &self.apply_hamiltonian(t, phi))
    }

    pub fn energy(&self, t: f64, phi: &ComplexVector) -> f64 {
        self.expectation(t, phi).re
    }

    /// Normalized samples of `exp(−(x − x0)²/(2σ²))`.
    pub fn gaussian_packet(&self) -> ComplexVector {
        let raw = unnormalized_packet(&self.params, &self.x);
        let scale = 1.0 / self.norm(&raw);
        raw.scale(C64::new(scale, 0.0))
    }
}

fn unnormalized_packet(p: &SchrodingerParams, x: &[f64]) -> ComplexVector {
    ComplexVector::from_fn(x.len(), |j| C64::new(p.packet_profile(x[j]), 0.0))
}

/// Packet samples before normalization.
pub fn gaussian_packet_raw(p: &SchrodingerParams) -> ComplexVector {
    unnormalized_packet(p, &p.grid())
}

impl GeneratorSampler for SchrodingerModel {
    fn dim(&self) -> usize {
        self.params.n
    }

    fn eval(&self, t: f64) -> ComplexDenseMatrix {
        let mut a = self.kinetic_generator.clone();
        for (j, v) in self.potential(t).into_iter().enumerate() {
            a[(j, j)] += C64::new(0.0, -v);
        }
        a
    }

    fn group(&self) -> QuadraticGroup {
        QuadraticGroup::unitary(self.params.n)
    }
}

pub fn schrodinger_generator(p: SchrodingerParams) -> Result<SchrodingerModel, ModelError> {
    SchrodingerModel::new(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_generator_at_zero() {
        let m = TwoLevelModel::new(TwoLevelParams::default()).unwrap();
        let a0 = m.eval(0.0);
        let expected = ComplexDenseMatrix::from_rows(&[
            vec![C64::new(0.0, -0.5), C64::new(0.0, -0.5)],
            vec![C64::new(0.0, -0.5), C64::new(0.0, 0.5)],
        ])
        .unwrap();
        assert!((&a0 - &expected).frobenius_norm() < 1e-16);
        assert!(m.eval(1.234).trace().norm() < 1e-16);
        let period = m.params.period();
        assert!((&m.eval(0.7 + period) - &m.eval(0.7)).frobenius_norm() < 1e-14);
    }

    #[test]
    fn two_level_exact_basics() {
        let p = TwoLevelParams::default();
        assert!((p.lambda() - 0.5f64.sqrt()).abs() < 1e-16);
        assert!((&two_level_exact(&p, 0.0) - &ComplexDenseMatrix::identity(2)).frobenius_norm() < 1e-16);
        assert_eq!(transition_probability(&p, 0.0), 0.0);
        let t_peak = PI / (2.0 * p.lambda());
        assert!((transition_probability(&p, t_peak) - 0.5).abs() < 1e-15);
        let y = two_level_exact(&p, 1.3);
        assert!((y[(1, 0)].norm_sqr() - transition_probability(&p, 1.3)).abs() < 1e-15);
    }

    #[test]
    fn two_level_rejects_degenerate_lambda() {
        let p = TwoLevelParams {
            delta: 1.0,
            v: 0.0,
            omega: 1.0,
        };
        assert!(TwoLevelModel::new(p).is_err());
    }

    #[test]
    fn spectral_derivative_eigenfunctions() {
        let p = SchrodingerParams::default();
        let d2 = spectral_second_derivative(p.l, p.n);
        let ones = ComplexVector::from_fn(p.n, |_| C64::new(1.0, 0.0));
        assert!(d2.apply(&ones).unwrap().norm() < 1e-10);

        let x = p.grid();
        let k = PI / p.l;
        let s = ComplexVector::from_fn(p.n, |j| C64::new((k * x[j]).sin(), 0.0));
        let d2s = d2.apply(&s).unwrap();
        let expected = s.scale(C64::new(-k * k, 0.0));
        assert!(d2s.distance(&expected) <= 1e-10);
    }

    #[test]
    fn spectral_derivative_matches_dft_conjugation() {
        // build F* diag(−k²) F with an explicit unitary DFT matrix
        let (l, n) = (3.0, 16usize);
        let x: Vec<f64> = (0..n).map(|j| -l + j as f64 * 2.0 * l / n as f64).collect();
        let ks: Vec<f64> = (0..n).map(|r| PI * (r as f64 - (n / 2) as f64) / l).collect();
        let f = ComplexDenseMatrix::from_fn(n, |r, j| C64::from_polar(1.0 / (n as f64).sqrt(), -ks[r] * x[j]));
        let lam = ComplexDenseMatrix::from_diagonal(&ks.iter().map(|k| C64::new(-k * k, 0.0)).collect::<Vec<_>>());
        let oracle = &(&f.adjoint() * &lam) * &f;
        let d2 = spectral_second_derivative(l, n);
        assert!((&d2 - &oracle).max_abs() <= 1e-12 * oracle.max_abs());
    }

    #[test]
    fn schrodinger_generator_is_skew_hermitian() {
        let m = SchrodingerModel::new(SchrodingerParams { n: 32, ..Default::default() }).unwrap();
        let g = m.group();
        for t in [0.0, 0.1, 1.7] {
            assert!(g.in_algebra(&m.eval(t)).unwrap());
            let h = m.hamiltonian(t);
            assert!((&h - &h.adjoint()).frobenius_norm() <= 1e-12);
        }
    }

    #[test]
    fn packet_properties() {
        let p = SchrodingerParams::default();
        assert_eq!(p.packet_profile(p.x0), 1.0);
        for a in [0.1, 0.5, 1.3] {
            assert!((p.packet_profile(p.x0 + a) - p.packet_profile(p.x0 - a)).abs() < 1e-15);
        }
        let m = SchrodingerModel::new(p).unwrap();
        let phi = m.gaussian_packet();
        assert!((m.norm(&phi) - 1.0).abs() < 1e-14);
        let raw = gaussian_packet_raw(&p);
        let ratio = phi[100].re / raw[100].re;
        assert!((phi[37].re / raw[37].re - ratio).abs() < 1e-12 * ratio);
    }

    #[test]
    fn params_validation() {
        assert!(SchrodingerParams { n: 15, ..Default::default() }.validate().is_err());
        assert!(SchrodingerParams { n: 8, ..Default::default() }.validate().is_err());
        assert!(SchrodingerParams { l: 0.0, ..Default::default() }.validate().is_err());
        assert!(SchrodingerParams { sigma: -1.0, ..Default::default() }.validate().is_err());
        assert!(SchrodingerParams {
            kinetic_sign: 0.5,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
