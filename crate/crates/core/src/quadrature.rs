//! Sampling of the generator `A(t)`: two-point Gauss–Legendre combinations,
//! shifted Legendre coefficients, and a nested-quadrature evaluation of the
//! leading Cayley–Magnus terms (used as a test oracle).

use crate::lie::QuadraticGroup;
use crate::matrix::{ComplexDenseMatrix, C64};
use thiserror::Error;

pub const DEFAULT_QUAD_POINTS: usize = 16;

const SQRT3_6: f64 = 0.288_675_134_594_812_9; // √3/6
const SQRT3_2: f64 = 0.866_025_403_784_438_6; // √3/2

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("step size must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("need at least {needed} quadrature points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("Legendre index must be at least 1")]
    BadIndex,
    #[error("only the first three Cayley-Magnus terms are available, asked for {0}")]
    BadTerm(usize),
}

/// A time-dependent generator `t ↦ A(t)` in the algebra of some group.
///
/// `eval` must be deterministic.
pub trait GeneratorSampler {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64) -> ComplexDenseMatrix;
    fn group(&self) -> QuadraticGroup;
}

impl<T: GeneratorSampler + ?Sized> GeneratorSampler for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, t: f64) -> ComplexDenseMatrix {
        (**self).eval(t)
    }
    fn group(&self) -> QuadraticGroup {
        (**self).group()
    }
}

/// Adapter turning a closure into a sampler.
pub struct FnSampler<F> {
    dim: usize,
    group: QuadraticGroup,
    f: F,
}

impl<F: Fn(f64) -> ComplexDenseMatrix> FnSampler<F> {
    pub fn new(group: QuadraticGroup, f: F) -> Self {
        Self { dim: group.dim(), group, f }
    }

    /// Sampler in the unitary algebra of dimension `dim`.
    pub fn unitary(dim: usize, f: F) -> Self {
        Self::new(QuadraticGroup::unitary(dim), f)
    }
}

impl<F: Fn(f64) -> ComplexDenseMatrix> GeneratorSampler for FnSampler<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, t: f64) -> ComplexDenseMatrix {
        (self.f)(t)
    }
    fn group(&self) -> QuadraticGroup {
        self.group.clone()
    }
}

/// The step-local combinations `A₁ = O(δt)` and `A₂ = O(δt²)`.
#[derive(Debug, Clone)]
pub struct GaussPair {
    pub a1: ComplexDenseMatrix,
    pub a2: ComplexDenseMatrix,
    pub t0: f64,
    pub dt: f64,
}

fn check_step(dt: f64) -> Result<(), QuadratureError> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(QuadratureError::BadStep(dt))
    }
}

/// Samples `A` at the two Gauss nodes of `[t0, t0 + dt]`.
pub fn gauss_pair<G: GeneratorSampler + ?Sized>(a: &G, t0: f64, dt: f64) -> Result<GaussPair, QuadratureError> {
    check_step(dt)?;
    let s1 = a.eval(t0 + (0.5 - SQRT3_6) * dt);
    let s2 = a.eval(t0 + (0.5 + SQRT3_6) * dt);
    let a1 = (&s1 + &s2).scale_real(0.5 * dt);
    let a2 = (&s2 - &s1).scale_real(SQRT3_2 * dt);
    Ok(GaussPair { a1, a2, t0, dt })
}

/// Shifted Legendre polynomial `P_k` on `[0, 1]`.
pub fn legendre_poly(k: usize, x: f64) -> f64 {
    let y = 2.0 * x - 1.0;
    let mut p_prev = 1.0;
    if k == 0 {
        return p_prev;
    }
    let mut p = y;
    for n in 1..k {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * y * p - nf * p_prev) / (nf + 1.0);
        p_prev = p;
        p = next;
    }
    p
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Newton iteration on the standard P_n, started from the Chebyshev-like guess
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_standard(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_standard(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = 0.5 * (1.0 - z);
        nodes[n - 1 - i] = 0.5 * (1.0 + z);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// `(P_n(z), P_n'(z))` for the standard Legendre polynomial on `[−1, 1]`.
fn legendre_standard(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * z * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// `(2k−1)·δt·∫₀¹ A(t0 + xδt) P_{k−1}(x) dx` by Gauss–Legendre quadrature.
pub fn legendre_coefficient<G: GeneratorSampler + ?Sized>(
    a: &G,
    t0: f64,
    k: usize,
    dt: f64,
    quad_points: usize,
) -> Result<ComplexDenseMatrix, QuadratureError> {
    check_step(dt)?;
    if k == 0 {
        return Err(QuadratureError::BadIndex);
    }
    if quad_points < k + 2 {
        return Err(QuadratureError::TooFewPoints { needed: k + 2, got: quad_points });
    }
    let (nodes, weights) = gauss_legendre(quad_points);
    let mut acc = ComplexDenseMatrix::zeros(a.dim());
    for (x, w) in nodes.iter().zip(&weights) {
        let f = w * legendre_poly(k - 1, *x);
        acc.add_scaled_assign(C64::new(f, 0.0), &a.eval(t0 + x * dt));
    }
    Ok(acc.scale_real((2 * k - 1) as f64 * dt))
}

/// The `m`-th term (`m ∈ {1, 2, 3}`) of the Cayley–Magnus series over
/// `[t0, t0 + dt]`, from its iterated-integral representation
///
/// ```text
/// Ω₁(s) = ∫₀ˢ A
/// Ω₂(s) = −½ ∫₀ˢ [Ω₁(ξ), A(ξ)] dξ
/// Ω₃(s) = −½ ∫₀ˢ [Ω₂(ξ), A(ξ)] dξ − ¼ ∫₀ˢ Ω₁(ξ) A(ξ) Ω₁(ξ) dξ
/// ```
///
/// Each level is evaluated with a `quad_points`-node Gauss rule, so the
/// cost grows like `quad_points^m` generator samples.
pub fn cayley_magnus_oracle<G: GeneratorSampler + ?Sized>(
    a: &G,
    t0: f64,
    dt: f64,
    m: usize,
    quad_points: usize,
) -> Result<ComplexDenseMatrix, QuadratureError> {
    check_step(dt)?;
    if !(1..=3).contains(&m) {
        return Err(QuadratureError::BadTerm(m));
    }
    if quad_points < 2 {
        return Err(QuadratureError::TooFewPoints { needed: 2, got: quad_points });
    }
    let rule = gauss_legendre(quad_points);
    Ok(OracleTerms { a, t0, rule: &rule }.omega(m, dt))
}

struct OracleTerms<'a, G: ?Sized> {
    a: &'a G,
    t0: f64,
    rule: &'a (Vec<f64>, Vec<f64>),
}

impl<G: GeneratorSampler + ?Sized> OracleTerms<'_, G> {
    fn omega(&self, m: usize, s: f64) -> ComplexDenseMatrix {
        let (nodes, weights) = self.rule;
        let mut acc = ComplexDenseMatrix::zeros(self.a.dim());
        for (x, w) in nodes.iter().zip(weights) {
            let xi = x * s;
            let wi = C64::new(w * s, 0.0);
            let a = self.a.eval(self.t0 + xi);
            match m {
                1 => acc.add_scaled_assign(wi, &a),
                2 => {
                    let o1 = self.omega(1, xi);
                    let comm = &(&o1 * &a) - &(&a * &o1);
                    acc.add_scaled_assign(wi * -0.5, &comm);
                }
                _ => {
                    let o1 = self.omega(1, xi);
                    let o2 = self.omega(2, xi);
                    let comm = &(&o2 * &a) - &(&a * &o2);
                    acc.add_scaled_assign(wi * -0.5, &comm);
                    let sandwich = &(&o1 * &a) * &o1;
                    acc.add_scaled_assign(wi * -0.25, &sandwich);
                }
            }
        }
        acc
    }
}

/// Closed-form leading Cayley–Magnus terms in the `(A₁, A₂)` basis.
#[derive(Debug, Clone)]
pub struct CayleyMagnusTerms {
    pub omega1: ComplexDenseMatrix,
    pub omega2: ComplexDenseMatrix,
    pub omega3: ComplexDenseMatrix,
}

/// `Ω₁ = A₁`, `Ω₂ = −[A₁, A₂]/6` and
/// `Ω₃ = −A₁³/12 − A₂³/120 + A₁A₂²/60 − A₂A₁A₂/30 + A₂²A₁/60`.
pub fn cayley_magnus_terms(gp: &GaussPair) -> CayleyMagnusTerms {
    let a1 = &gp.a1;
    let a2 = &gp.a2;
    let a1a2 = a1 * a2;
    let a2a1 = a2 * a1;
    let omega2 = (&a1a2 - &a2a1).scale_real(-1.0 / 6.0);

    let a1_sq = a1 * a1;
    let a2_sq = a2 * a2;
    let mut omega3 = (&a1_sq * a1).scale_real(-1.0 / 12.0);
    omega3.add_scaled_assign(C64::new(-1.0 / 120.0, 0.0), &(&a2_sq * a2));
    omega3.add_scaled_assign(C64::new(1.0 / 60.0, 0.0), &(a1 * &a2_sq));
    omega3.add_scaled_assign(C64::new(-1.0 / 30.0, 0.0), &(&a2a1 * a2));
    omega3.add_scaled_assign(C64::new(1.0 / 60.0, 0.0), &(&a2_sq * a1));

    CayleyMagnusTerms {
        omega1: a1.clone(),
        omega2,
        omega3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m0() -> ComplexDenseMatrix {
        ComplexDenseMatrix::from_rows(&[
            vec![C64::new(0.0, 1.0), C64::new(0.5, 0.2)],
            vec![C64::new(-0.5, 0.2), C64::new(0.0, -0.3)],
        ])
        .unwrap()
    }

    fn m1() -> ComplexDenseMatrix {
        ComplexDenseMatrix::from_rows(&[
            vec![C64::new(0.0, -0.4), C64::new(0.1, 0.7)],
            vec![C64::new(-0.1, 0.7), C64::new(0.0, 0.9)],
        ])
        .unwrap()
    }

    fn close(a: &ComplexDenseMatrix, b: &ComplexDenseMatrix, tol: f64) -> bool {
        (a - b).frobenius_norm() <= tol
    }

    #[test]
    fn legendre_values() {
        assert_eq!(legendre_poly(0, 0.3), 1.0);
        assert!((legendre_poly(1, 0.3) - (-0.4)).abs() < 1e-15);
        assert!((legendre_poly(2, 0.0) - 1.0).abs() < 1e-15);
        assert!((legendre_poly(3, 1.0) - 1.0).abs() < 1e-15);
        assert!((legendre_poly(4, 0.5) - 0.375).abs() < 1e-15);
        for &x in &[0.0f64, 0.13, 0.5, 0.77, 1.0] {
            let p2 = 6.0 * x * x - 6.0 * x + 1.0;
            let p3 = 20.0 * x * x * x - 30.0 * x * x + 12.0 * x - 1.0;
            let p4 = 70.0 * x.powi(4) - 140.0 * x.powi(3) + 90.0 * x * x - 20.0 * x + 1.0;
            assert!((legendre_poly(2, x) - p2).abs() < 1e-14);
            assert!((legendre_poly(3, x) - p3).abs() < 1e-14);
            assert!((legendre_poly(4, x) - p4).abs() < 1e-13);
        }
    }

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn gauss_pair_constant_and_linear() {
        let dt = 0.1;
        let c = FnSampler::unitary(2, |_| m0());
        let gp = gauss_pair(&c, 0.3, dt).unwrap();
        assert!(close(&gp.a1, &m0().scale_real(dt), 1e-16));
        assert!(gp.a2.frobenius_norm() < 1e-16);

        let lin = FnSampler::unitary(2, |t| m1().scale_real(t));
        let gp = gauss_pair(&lin, 0.0, dt).unwrap();
        assert!(close(&gp.a1, &m1().scale_real(dt * dt / 2.0), 1e-15));
        assert!(close(&gp.a2, &m1().scale_real(dt * dt / 2.0), 1e-15));

        let affine = FnSampler::unitary(2, |t| &m0() + &m1().scale_real(t));
        let gp = gauss_pair(&affine, 0.0, dt).unwrap();
        let expected = &m0().scale_real(dt) + &m1().scale_real(dt * dt / 2.0);
        assert!(close(&gp.a1, &expected, 1e-15));

        assert!(gauss_pair(&c, 0.0, 0.0).is_err());
    }

    #[test]
    fn legendre_coefficients() {
        let dt = 0.2;
        let c = FnSampler::unitary(2, |_| m0());
        assert!(close(&legendre_coefficient(&c, 0.0, 1, dt, 8).unwrap(), &m0().scale_real(dt), 1e-15));
        assert!(legendre_coefficient(&c, 0.0, 2, dt, 8).unwrap().frobenius_norm() < 1e-15);

        let lin = FnSampler::unitary(2, |t| m1().scale_real(t));
        let a2 = legendre_coefficient(&lin, 0.0, 2, dt, 8).unwrap();
        assert!(close(&a2, &m1().scale_real(dt * dt / 2.0), 1e-15));

        assert!(matches!(
            legendre_coefficient(&c, 0.0, 3, dt, 4),
            Err(QuadratureError::TooFewPoints { .. })
        ));
        assert!(legendre_coefficient(&c, 0.0, 0, dt, 4).is_err());
    }

    #[test]
    fn oracle_constant_generator() {
        let dt = 0.3;
        let m = m0();
        let c = FnSampler::unitary(2, |_| m0());
        let o1 = cayley_magnus_oracle(&c, 0.0, dt, 1, 8).unwrap();
        let o2 = cayley_magnus_oracle(&c, 0.0, dt, 2, 8).unwrap();
        let o3 = cayley_magnus_oracle(&c, 0.0, dt, 3, 8).unwrap();
        assert!(close(&o1, &m.scale_real(dt), 1e-15));
        assert!(o2.frobenius_norm() < 1e-15);
        let cube = &(&m * &m) * &m;
        assert!(close(&o3, &cube.scale_real(-dt.powi(3) / 12.0), 1e-15));
        assert!(cayley_magnus_oracle(&c, 0.0, dt, 4, 8).is_err());
    }

    #[test]
    fn oracle_linear_generator_has_no_second_term() {
        let lin = FnSampler::unitary(2, |t| m1().scale_real(t));
        let o2 = cayley_magnus_oracle(&lin, 0.0, 0.5, 2, 8).unwrap();
        assert!(o2.frobenius_norm() < 1e-15);
    }

    #[test]
    fn closed_form_terms() {
        let gp = GaussPair {
            a1: m0(),
            a2: ComplexDenseMatrix::zeros(2),
            t0: 0.0,
            dt: 1.0,
        };
        let t = cayley_magnus_terms(&gp);
        assert_eq!(t.omega1, m0());
        assert!(t.omega2.frobenius_norm() == 0.0);
        let cube = &(&m0() * &m0()) * &m0();
        assert!(close(&t.omega3, &cube.scale_real(-1.0 / 12.0), 1e-16));

        // constant generator: closed form agrees with the oracle
        let dt = 0.25;
        let c = FnSampler::unitary(2, |_| m0());
        let t = cayley_magnus_terms(&gauss_pair(&c, 0.0, dt).unwrap());
        let o3 = cayley_magnus_oracle(&c, 0.0, dt, 3, 8).unwrap();
        assert!(close(&t.omega3, &o3, 1e-15));
    }
}
