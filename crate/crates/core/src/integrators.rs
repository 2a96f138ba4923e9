//! Time steppers for `Y' = A(t) Y`.
//!
//! All methods sample `A` only through [`gauss_pair`] except RK45 (stage
//! times) and the Ω-ODE stepper (RK4 substep times). The state can be a full
//! matrix propagator or a single vector; see [`State`].

use std::fmt;
use std::str::FromStr;

use crate::matrix::{expm_multiply, ComplexDenseMatrix, ComplexVector, LinearOperator, LuFactorization, MatrixError, C64, ONE};
use crate::quadrature::{gauss_pair, GaussPair, GeneratorSampler, QuadratureError};
use thiserror::Error;

/// Residuals below this are treated as rounding noise by [`fit_order`].
pub const ROUNDING_FLOOR: f64 = 1e-12;

pub const DEFAULT_OMEGA_SUBSTEPS: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegratorError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("step {step} (t = {t}) failed: {source}")]
    StepFailed {
        step: usize,
        t: f64,
        #[source]
        source: Box<IntegratorError>,
    },
}

impl IntegratorError {
    /// Index of the failing step, if the error came out of [`propagate`].
    pub fn step_index(&self) -> Option<usize> {
        match self {
            IntegratorError::StepFailed { step, .. } => Some(*step),
            _ => None,
        }
    }
}

/// Something a linear flow can act on: a propagator matrix or a vector.
pub trait State: Clone {
    fn dim(&self) -> usize;
    /// `m · self`.
    fn left_mul(&self, m: &ComplexDenseMatrix) -> Self;
    /// `M⁻¹ · self` for a factorized `M`.
    fn solve_with(&self, lu: &LuFactorization) -> Self;
    /// `exp(op) · self`.
    fn exp_apply(&self, op: &dyn LinearOperator) -> Result<Self, MatrixError>;
    fn add_scaled_assign(&mut self, alpha: C64, other: &Self);
    /// Frobenius norm for matrices, Euclidean norm for vectors.
    fn norm(&self) -> f64;
    fn distance(&self, other: &Self) -> f64;
    /// `‖Y Y* − I‖_F` for matrices; not defined for vectors.
    fn unitarity_defect(&self) -> Option<f64>;
    fn is_finite(&self) -> bool;
}

impl State for ComplexDenseMatrix {
    fn dim(&self) -> usize {
        ComplexDenseMatrix::dim(self)
    }
    fn left_mul(&self, m: &ComplexDenseMatrix) -> Self {
        m * self
    }
    fn solve_with(&self, lu: &LuFactorization) -> Self {
        lu.solve_matrix(self)
    }
    fn exp_apply(&self, op: &dyn LinearOperator) -> Result<Self, MatrixError> {
        Ok(&op.to_matrix().expm()? * self)
    }
    fn add_scaled_assign(&mut self, alpha: C64, other: &Self) {
        ComplexDenseMatrix::add_scaled_assign(self, alpha, other)
    }
    fn norm(&self) -> f64 {
        self.frobenius_norm()
    }
    fn distance(&self, other: &Self) -> f64 {
        (self - other).frobenius_norm()
    }
    fn unitarity_defect(&self) -> Option<f64> {
        Some(ComplexDenseMatrix::unitarity_defect(self))
    }
    fn is_finite(&self) -> bool {
        ComplexDenseMatrix::is_finite(self)
    }
}

impl State for ComplexVector {
    fn dim(&self) -> usize {
        ComplexVector::dim(self)
    }
    fn left_mul(&self, m: &ComplexDenseMatrix) -> Self {
        m.apply_to(self)
    }
    fn solve_with(&self, lu: &LuFactorization) -> Self {
        lu.solve_vector(self)
    }
    fn exp_apply(&self, op: &dyn LinearOperator) -> Result<Self, MatrixError> {
        Ok(expm_multiply(op, self))
    }
    fn add_scaled_assign(&mut self, alpha: C64, other: &Self) {
        ComplexVector::add_scaled_assign(self, alpha, other)
    }
    fn norm(&self) -> f64 {
        ComplexVector::norm(self)
    }
    fn distance(&self, other: &Self) -> f64 {
        ComplexVector::distance(self, other)
    }
    fn unitarity_defect(&self) -> Option<f64> {
        None
    }
    fn is_finite(&self) -> bool {
        ComplexVector::is_finite(self)
    }
}

/// `Cay(Ω)·y = y + (I − Ω/2)⁻¹ Ω y`.
///
/// The increment form keeps the solve's rounding proportional to `‖Ω y‖`
/// rather than `‖y‖`, which matters over thousands of steps.
pub fn cayley_apply<S: State>(omega: &ComplexDenseMatrix, y: &S) -> Result<S, MatrixError> {
    let lu = omega
        .shifted(ONE, C64::new(-0.5, 0.0))
        .lu_relative_to(1.0 + 0.5 * omega.max_abs())?;
    let mut out = y.clone();
    out.add_scaled_assign(ONE, &y.left_mul(omega).solve_with(&lu));
    Ok(out)
}

/// The six coefficients of the three-factor Cayley scheme
/// `Cay(α11 A₁ + α12 A₂) · Cay(α21 A₁ + α22 A₂) · Cay(α31 A₁ + α32 A₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfctCoefficients {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub a31: f64,
    pub a32: f64,
}

impl CfctCoefficients {
    /// The real fourth-order solution.
    pub fn fourth_order() -> Self {
        let cbrt2 = 2f64.cbrt();
        let a11 = cbrt2 / 3.0 + cbrt2 * cbrt2 / 6.0 + 2.0 / 3.0;
        let a12 = a11 - a11 * a11;
        Self {
            a11,
            a12,
            a21: 1.0 - 2.0 * a11,
            a22: 0.0,
            a31: a11,
            a32: -a12,
        }
    }

    pub fn zeros() -> Self {
        Self {
            a11: 0.0,
            a12: 0.0,
            a21: 0.0,
            a22: 0.0,
            a31: 0.0,
            a32: 0.0,
        }
    }

    /// Third factor mirrors the first with the `A₂` weight negated.
    pub fn is_reversal_symmetric(&self) -> bool {
        self.a31 == self.a11 && self.a32 == -self.a12
    }
}

impl Default for CfctCoefficients {
    fn default() -> Self {
        Self::fourth_order()
    }
}

/// Residuals (left minus right side) of the six polynomial order conditions.
pub fn verify_coefficient_system(c: &CfctCoefficients) -> [f64; 6] {
    let CfctCoefficients { a11, a12, a21, a22, a31, a32 } = *c;
    [
        a11 + a21 + a31 - 1.0,
        a12 + a22 + a32,
        a11 * a22 + a11 * a32 + a21 * a32 - a12 * a21 - a12 * a31 - a22 * a31 + 1.0 / 3.0,
        2.0 * a11 * a21 * a31
            + a11 * a11 * a21
            + a11 * a21 * a21
            + a11 * a11 * a31
            + a11 * a31 * a31
            + a21 * a21 * a31
            + a21 * a31 * a31
            - 1.0 / 3.0,
        2.0 * a11 * a22 * a31
            + a11 * a12 * a21
            + a11 * a12 * a31
            + a11 * a21 * a22
            + a11 * a31 * a32
            + a21 * a22 * a31
            + a21 * a31 * a32,
        2.0 * a11 * a21 * a32
            + a11 * a11 * a22
            + a11 * a11 * a32
            + a12 * a21 * a21
            + a21 * a21 * a32
            + a12 * a31 * a31
            + a22 * a31 * a31
            + 2.0 * a12 * a21 * a31
            - 2.0 * a11 * a22 * a31,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Cfct,
    Cmt,
    Cf4,
    Magnus4,
    Rk45,
    OmegaOde { substeps: usize },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Cfct => "cfct",
            Method::Cmt => "cmt",
            Method::Cf4 => "cf4",
            Method::Magnus4 => "magnus4",
            Method::Rk45 => "rk45",
            Method::OmegaOde { .. } => "omega-ode",
        }
    }

    /// Whether the method keeps `Y` in the group exactly (up to rounding).
    pub fn is_geometric(&self) -> bool {
        !matches!(self, Method::Rk45)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cfct" => Ok(Method::Cfct),
            "cmt" => Ok(Method::Cmt),
            "cf4" => Ok(Method::Cf4),
            "magnus4" => Ok(Method::Magnus4),
            "rk45" => Ok(Method::Rk45),
            "omega-ode" => Ok(Method::OmegaOde {
                substeps: DEFAULT_OMEGA_SUBSTEPS,
            }),
            other => Err(format!(
                "unknown method '{other}' (expected cfct, cmt, cf4, magnus4, rk45 or omega-ode)"
            )),
        }
    }
}

fn linear_combination(gp: &GaussPair, x: f64, y: f64) -> ComplexDenseMatrix {
    let mut m = gp.a1.scale_real(x);
    if y != 0.0 {
        m.add_scaled_assign(C64::new(y, 0.0), &gp.a2);
    }
    m
}

pub fn cfct_step<G: GeneratorSampler + ?Sized, S: State>(
    a: &G,
    tn: f64,
    dt: f64,
    y: &S,
) -> Result<S, IntegratorError> {
    cfct_step_with(&CfctCoefficients::fourth_order(), a, tn, dt, y)
}

/// Three-factor Cayley step with arbitrary coefficients; the rightmost
/// factor acts on `y` first.
pub fn cfct_step_with<G: GeneratorSampler + ?Sized, S: State>(
    c: &CfctCoefficients,
    a: &G,
    tn: f64,
    dt: f64,
    y: &S,
) -> Result<S, IntegratorError> {
    let gp = gauss_pair(a, tn, dt)?;
    let y = cayley_apply(&linear_combination(&gp, c.a31, c.a32), y)?;
    let y = cayley_apply(&linear_combination(&gp, c.a21, c.a22), &y)?;
    Ok(cayley_apply(&linear_combination(&gp, c.a11, c.a12), &y)?)
}

/// Argument of the single-Cayley fourth-order step:
/// `A₁ − [A₁, A₂]/6 − A₁³/12`.
pub fn cmt_argument(gp: &GaussPair) -> ComplexDenseMatrix {
    let a1 = &gp.a1;
    let a1a2 = a1 * &gp.a2;
    let a2a1 = &gp.a2 * a1;
    let mut omega = a1.clone();
    omega.add_scaled_assign(C64::new(-1.0 / 6.0, 0.0), &(&a1a2 - &a2a1));
    omega.add_scaled_assign(C64::new(-1.0 / 12.0, 0.0), &(&(a1 * a1) * a1));
    omega
}

pub fn cmt_step<G: GeneratorSampler + ?Sized, S: State>(a: &G, tn: f64, dt: f64, y: &S) -> Result<S, IntegratorError> {
    let gp = gauss_pair(a, tn, dt)?;
    Ok(cayley_apply(&cmt_argument(&gp), y)?)
}

/// `exp(A₁/2 + A₂/3) · exp(A₁/2 − A₂/3) · y`.
pub fn cf4_step<G: GeneratorSampler + ?Sized, S: State>(a: &G, tn: f64, dt: f64, y: &S) -> Result<S, IntegratorError> {
    let gp = gauss_pair(a, tn, dt)?;
    let y = y.exp_apply(&linear_combination(&gp, 0.5, -1.0 / 3.0))?;
    Ok(y.exp_apply(&linear_combination(&gp, 0.5, 1.0 / 3.0))?)
}

/// `A₁ − [A₁, A₂]/6`, applied to vectors without forming the commutator.
pub struct Magnus4Operator {
    a1: ComplexDenseMatrix,
    a2: ComplexDenseMatrix,
}

impl Magnus4Operator {
    pub fn new(gp: GaussPair) -> Self {
        Self { a1: gp.a1, a2: gp.a2 }
    }
}

impl LinearOperator for Magnus4Operator {
    fn dim(&self) -> usize {
        self.a1.dim()
    }

    fn apply_to(&self, v: &ComplexVector) -> ComplexVector {
        let a1v = self.a1.apply_to(v);
        let a2v = self.a2.apply_to(v);
        let mut out = self.a1.apply_to(&a2v);
        out.add_scaled_assign(C64::new(-1.0, 0.0), &self.a2.apply_to(&a1v));
        let mut res = a1v;
        res.add_scaled_assign(C64::new(-1.0 / 6.0, 0.0), &out);
        res
    }

    fn one_norm_bound(&self) -> f64 {
        let n1 = self.a1.one_norm();
        n1 + n1 * self.a2.one_norm() / 3.0
    }

    fn to_matrix(&self) -> ComplexDenseMatrix {
        let comm = &(&self.a1 * &self.a2) - &(&self.a2 * &self.a1);
        let mut m = self.a1.clone();
        m.add_scaled_assign(C64::new(-1.0 / 6.0, 0.0), &comm);
        m
    }
}

pub fn magnus4_step<G: GeneratorSampler + ?Sized, S: State>(
    a: &G,
    tn: f64,
    dt: f64,
    y: &S,
) -> Result<S, IntegratorError> {
    let gp = gauss_pair(a, tn, dt)?;
    Ok(y.exp_apply(&Magnus4Operator::new(gp))?)
}

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 6] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0];
const DP_A: [[f64; 5]; 6] = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
];
const DP_B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];

/// One fixed Dormand–Prince step, advancing with the fifth-order weights.
pub fn rk45_step<G: GeneratorSampler + ?Sized, S: State>(a: &G, tn: f64, dt: f64, y: &S) -> Result<S, IntegratorError> {
    check_dt(dt)?;
    let mut k: Vec<S> = Vec::with_capacity(6);
    for i in 0..6 {
        let mut yi = y.clone();
        for (j, kj) in k.iter().enumerate() {
            let aij = DP_A[i][j];
            if aij != 0.0 {
                yi.add_scaled_assign(C64::new(dt * aij, 0.0), kj);
            }
        }
        k.push(yi.left_mul(&a.eval(tn + DP_C[i] * dt)));
    }
    let mut out = y.clone();
    for (b, ki) in DP_B.iter().zip(&k) {
        if *b != 0.0 {
            out.add_scaled_assign(C64::new(dt * b, 0.0), ki);
        }
    }
    Ok(out)
}

/// Right-hand side of `Ω' = A − [Ω, A]/2 − Ω A Ω / 4`.
fn omega_rhs(omega: &ComplexDenseMatrix, a: &ComplexDenseMatrix) -> ComplexDenseMatrix {
    let oa = omega * a;
    let ao = a * omega;
    let mut out = a.clone();
    out.add_scaled_assign(C64::new(-0.5, 0.0), &(&oa - &ao));
    out.add_scaled_assign(C64::new(-0.25, 0.0), &(&oa * omega));
    out
}

/// Integrates the ODE for the Cayley argument from `Ω(tn) = 0` with classical
/// RK4 substeps, then applies `Cay(Ω(tn + dt))`.
pub fn omega_ode_step<G: GeneratorSampler + ?Sized, S: State>(
    a: &G,
    tn: f64,
    dt: f64,
    y: &S,
    substeps: usize,
) -> Result<S, IntegratorError> {
    check_dt(dt)?;
    if substeps < DEFAULT_OMEGA_SUBSTEPS {
        return Err(IntegratorError::InvalidArgument(format!(
            "omega-ode needs at least {DEFAULT_OMEGA_SUBSTEPS} substeps, got {substeps}"
        )));
    }
    let h = dt / substeps as f64;
    let mut omega = ComplexDenseMatrix::zeros(a.dim());
    for s in 0..substeps {
        let t = tn + s as f64 * h;
        let a0 = a.eval(t);
        let am = a.eval(t + 0.5 * h);
        let a1 = a.eval(t + h);
        let k1 = omega_rhs(&omega, &a0);
        let mut tmp = omega.clone();
        tmp.add_scaled_assign(C64::new(0.5 * h, 0.0), &k1);
        let k2 = omega_rhs(&tmp, &am);
        let mut tmp = omega.clone();
        tmp.add_scaled_assign(C64::new(0.5 * h, 0.0), &k2);
        let k3 = omega_rhs(&tmp, &am);
        let mut tmp = omega.clone();
        tmp.add_scaled_assign(C64::new(h, 0.0), &k3);
        let k4 = omega_rhs(&tmp, &a1);
        omega.add_scaled_assign(C64::new(h / 6.0, 0.0), &k1);
        omega.add_scaled_assign(C64::new(h / 3.0, 0.0), &k2);
        omega.add_scaled_assign(C64::new(h / 3.0, 0.0), &k3);
        omega.add_scaled_assign(C64::new(h / 6.0, 0.0), &k4);
    }
    Ok(cayley_apply(&omega, y)?)
}

fn check_dt(dt: f64) -> Result<(), IntegratorError> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(QuadratureError::BadStep(dt).into())
    }
}

/// Advances `y` by one step of `method`.
pub fn step<G: GeneratorSampler + ?Sized, S: State>(
    method: Method,
    a: &G,
    tn: f64,
    dt: f64,
    y: &S,
) -> Result<S, IntegratorError> {
    match method {
        Method::Cfct => cfct_step(a, tn, dt, y),
        Method::Cmt => cmt_step(a, tn, dt, y),
        Method::Cf4 => cf4_step(a, tn, dt, y),
        Method::Magnus4 => magnus4_step(a, tn, dt, y),
        Method::Rk45 => rk45_step(a, tn, dt, y),
        Method::OmegaOde { substeps } => omega_ode_step(a, tn, dt, y, substeps),
    }
}

#[derive(Debug, Clone)]
pub struct StepRecord<S> {
    pub t: f64,
    pub state: S,
    pub norm: f64,
    pub energy: Option<f64>,
    pub unitarity_defect: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub method: Method,
    pub dt: f64,
    pub records: Vec<StepRecord<S>>,
}

impl<S> Trajectory<S> {
    pub fn last(&self) -> &StepRecord<S> {
        self.records.last().expect("trajectory is never empty")
    }

    pub fn final_state(&self) -> &S {
        &self.last().state
    }
}

type EnergyFn<'a, S> = &'a dyn Fn(f64, &S) -> f64;

/// Observables and recording options for [`propagate_with`].
pub struct PropagateOptions<'a, S> {
    /// Keep every `record_every`-th step; the first and last are always kept.
    pub record_every: usize,
    /// Multiplies the raw state norm (e.g. `√h` for a grid-weighted norm).
    pub norm_scale: f64,
    pub energy: Option<EnergyFn<'a, S>>,
}

impl<S> Default for PropagateOptions<'_, S> {
    fn default() -> Self {
        Self {
            record_every: 1,
            norm_scale: 1.0,
            energy: None,
        }
    }
}

/// Uniform-grid propagation from `t0` to `tf` in `steps` steps.
pub fn propagate<G: GeneratorSampler + ?Sized, S: State>(
    method: Method,
    a: &G,
    t0: f64,
    tf: f64,
    steps: usize,
    y0: &S,
) -> Result<Trajectory<S>, IntegratorError> {
    propagate_with(method, a, t0, tf, steps, y0, &PropagateOptions::default())
}

pub fn propagate_with<G: GeneratorSampler + ?Sized, S: State>(
    method: Method,
    a: &G,
    t0: f64,
    tf: f64,
    steps: usize,
    y0: &S,
    opts: &PropagateOptions<'_, S>,
) -> Result<Trajectory<S>, IntegratorError> {
    let dt = check_grid(a, t0, tf, steps, y0)?;
    if opts.record_every == 0 {
        return Err(IntegratorError::InvalidArgument("record_every must be at least 1".into()));
    }
    let record = |t: f64, y: &S| StepRecord {
        t,
        state: y.clone(),
        norm: y.norm() * opts.norm_scale,
        energy: opts.energy.map(|e| e(t, y)),
        unitarity_defect: y.unitarity_defect(),
    };
    let mut records = Vec::with_capacity(steps / opts.record_every + 2);
    records.push(record(t0, y0));
    let mut y = y0.clone();
    for n in 0..steps {
        let tn = grid_time(t0, tf, dt, n, steps);
        y = advance(method, a, tn, dt, &y, n)?;
        let n1 = n + 1;
        if n1 % opts.record_every == 0 || n1 == steps {
            records.push(record(grid_time(t0, tf, dt, n1, steps), &y));
        }
    }
    Ok(Trajectory { method, dt, records })
}

/// Like [`propagate`] but only keeps the final state.
pub fn propagate_final<G: GeneratorSampler + ?Sized, S: State>(
    method: Method,
    a: &G,
    t0: f64,
    tf: f64,
    steps: usize,
    y0: &S,
) -> Result<S, IntegratorError> {
    let dt = check_grid(a, t0, tf, steps, y0)?;
    let mut y = y0.clone();
    for n in 0..steps {
        y = advance(method, a, grid_time(t0, tf, dt, n, steps), dt, &y, n)?;
    }
    Ok(y)
}

fn check_grid<G: GeneratorSampler + ?Sized, S: State>(
    a: &G,
    t0: f64,
    tf: f64,
    steps: usize,
    y0: &S,
) -> Result<f64, IntegratorError> {
    if !(t0.is_finite() && tf.is_finite() && tf > t0) {
        return Err(IntegratorError::InvalidArgument(format!("need t0 < tf, got [{t0}, {tf}]")));
    }
    if steps == 0 {
        return Err(IntegratorError::InvalidArgument("steps must be at least 1".into()));
    }
    if y0.dim() != a.dim() {
        return Err(IntegratorError::Matrix(MatrixError::DimensionMismatch {
            left: a.dim(),
            right: y0.dim(),
        }));
    }
    Ok((tf - t0) / steps as f64)
}

fn grid_time(t0: f64, tf: f64, dt: f64, n: usize, steps: usize) -> f64 {
    if n == steps {
        tf
    } else {
        t0 + n as f64 * dt
    }
}

fn advance<G: GeneratorSampler + ?Sized, S: State>(
    method: Method,
    a: &G,
    tn: f64,
    dt: f64,
    y: &S,
    n: usize,
) -> Result<S, IntegratorError> {
    let wrap = |e: IntegratorError| IntegratorError::StepFailed {
        step: n,
        t: tn,
        source: Box::new(e),
    };
    let next = step(method, a, tn, dt, y).map_err(wrap)?;
    if !next.is_finite() {
        return Err(wrap(IntegratorError::Matrix(MatrixError::NonFinite { index: 0 })));
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergencePoint {
    pub dt: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub points: Vec<ConvergencePoint>,
    /// Least-squares slope of `log(error)` against `log(dt)`.
    pub slope: Option<f64>,
}

/// Fits `log(error) ≈ p·log(dt) + b`, ignoring points at the rounding floor
/// or non-finite. Returns `None` with fewer than two usable points.
pub fn fit_order(points: &[ConvergencePoint]) -> Option<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.error.is_finite() && p.error >= ROUNDING_FLOOR && p.dt > 0.0)
        .map(|p| (p.dt.ln(), p.error.ln()))
        .collect();
    if usable.len() < 2 {
        return None;
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Number of points [`fit_order`] would use.
pub fn usable_points(points: &[ConvergencePoint]) -> usize {
    points
        .iter()
        .filter(|p| p.error.is_finite() && p.error >= ROUNDING_FLOOR && p.dt > 0.0)
        .count()
}

/// Global error at `tf` against a fixed reference for each step count.
pub fn convergence_study<G: GeneratorSampler + ?Sized, S: State>(
    method: Method,
    a: &G,
    t0: f64,
    tf: f64,
    y0: &S,
    steps_list: &[usize],
    reference: &S,
) -> Result<ConvergenceReport, IntegratorError> {
    let mut points = Vec::with_capacity(steps_list.len());
    for &steps in steps_list {
        let y = propagate_final(method, a, t0, tf, steps, y0)?;
        points.push(ConvergencePoint {
            dt: (tf - t0) / steps as f64,
            error: y.distance(reference),
        });
    }
    let slope = fit_order(&points);
    Ok(ConvergenceReport { points, slope })
}

/// One-step error of `method` against `oracle` from `(t0, y0)` for each `dt`.
pub fn local_error_study<G: GeneratorSampler + ?Sized, S: State>(
    method: Method,
    oracle: Method,
    a: &G,
    t0: f64,
    y0: &S,
    dts: &[f64],
) -> Result<ConvergenceReport, IntegratorError> {
    let mut points = Vec::with_capacity(dts.len());
    for &dt in dts {
        let y = step(method, a, t0, dt, y0)?;
        let r = step(oracle, a, t0, dt, y0)?;
        points.push(ConvergencePoint {
            dt,
            error: y.distance(&r),
        });
    }
    let slope = fit_order(&points);
    Ok(ConvergenceReport { points, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::FnSampler;

    fn scalar_i() -> ComplexDenseMatrix {
        ComplexDenseMatrix::from_rows(&[vec![C64::new(0.0, 1.0)]]).unwrap()
    }

    #[test]
    fn coefficient_values() {
        let c = CfctCoefficients::fourth_order();
        assert!((c.a11 - 1.351_207_191_959_657_5).abs() < 1e-15);
        assert!((c.a21 - (-1.702_414_383_919_315)).abs() < 1e-14);
        assert!((c.a12 - (-0.474_553_683_643_845_3)).abs() < 1e-15);
        assert!(c.is_reversal_symmetric());
        assert_eq!(c.a22, 0.0);
    }

    #[test]
    fn residuals() {
        for r in verify_coefficient_system(&CfctCoefficients::fourth_order()) {
            assert!(r.abs() <= 1e-12, "{r}");
        }
        let z = verify_coefficient_system(&CfctCoefficients::zeros());
        let expected = [-1.0, 0.0, 1.0 / 3.0, -1.0 / 3.0, 0.0, 0.0];
        for (a, b) in z.iter().zip(expected) {
            assert!((a - b).abs() < 1e-16);
        }
        let mut p = CfctCoefficients::fourth_order();
        p.a11 += 1e-3;
        assert!(verify_coefficient_system(&p).iter().any(|r| r.abs() > 1e-4));
    }

    #[test]
    fn cayley_apply_matches_cayley_matrix() {
        let omega = ComplexDenseMatrix::from_fn(3, |i, j| C64::new(0.1 * (i + j) as f64, 0.05 * i as f64 - 0.2 * j as f64));
        let y = ComplexDenseMatrix::from_fn(3, |i, j| C64::new(1.0 + i as f64, j as f64));
        let lhs = cayley_apply(&omega, &y).unwrap();
        let rhs = &crate::lie::cayley(&omega).unwrap() * &y;
        assert!((&lhs - &rhs).frobenius_norm() < 1e-14);
    }

    #[test]
    fn zero_generator_leaves_state_unchanged() {
        let zero = FnSampler::unitary(2, |_| ComplexDenseMatrix::zeros(2));
        let y = ComplexDenseMatrix::from_fn(2, |i, j| C64::new(i as f64 + 0.5, j as f64 - 0.25));
        for m in [
            Method::Cfct,
            Method::Cmt,
            Method::Cf4,
            Method::Magnus4,
            Method::Rk45,
            Method::OmegaOde { substeps: 20 },
        ] {
            let out = step(m, &zero, 0.0, 0.1, &y).unwrap();
            assert!((&out - &y).frobenius_norm() < 1e-15, "{m}");
        }
    }

    #[test]
    fn scalar_rotation() {
        let a = FnSampler::unitary(1, |_| scalar_i());
        let y0 = ComplexDenseMatrix::identity(1);
        let exact = C64::new(0.0, 0.1).exp();

        // each factor rotates by 2·atan(αδt/2); the exponential by δt
        let c = CfctCoefficients::fourth_order();
        let phase: f64 = [c.a11, c.a21, c.a31].iter().map(|a| 2.0 * (a * 0.05).atan()).sum();
        let y = cfct_step(&a, 0.0, 0.1, &y0).unwrap();
        assert!((y[(0, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((y[(0, 0)] - C64::from_polar(1.0, phase)).norm() < 1e-15);
        let err = (y[(0, 0)] - exact).norm();
        assert!(err > 6.5e-7 && err < 6.7e-7, "{err}");

        let y = rk45_step(&a, 0.0, 0.1, &y0).unwrap();
        assert!((y[(0, 0)] - exact).norm() <= 1e-8);
        let drift = (y[(0, 0)].norm() - 1.0).abs();
        assert!(drift > 1e-13 && drift < 1e-8, "{drift}");

        for m in [Method::Cf4, Method::Magnus4] {
            let y = step(m, &a, 0.0, 0.1, &y0).unwrap();
            assert!((y[(0, 0)] - exact).norm() < 1e-15, "{m}");
        }
    }

    #[test]
    fn omega_ode_scalar_matches_exponential() {
        let a = FnSampler::unitary(1, |_| scalar_i());
        let y0 = ComplexDenseMatrix::identity(1);
        let y = omega_ode_step(&a, 0.0, 0.1, &y0, 50).unwrap();
        assert!((y[(0, 0)] - C64::new(0.0, 0.1).exp()).norm() < 1e-14);
        assert!(omega_ode_step(&a, 0.0, 0.1, &y0, 5).is_err());
    }

    #[test]
    fn cmt_argument_for_constant_generator() {
        let m = ComplexDenseMatrix::from_rows(&[
            vec![C64::new(0.0, 0.3), C64::new(0.2, 0.1)],
            vec![C64::new(-0.2, 0.1), C64::new(0.0, -0.7)],
        ])
        .unwrap();
        let dt = 0.05;
        let mm = m.clone();
        let a = FnSampler::unitary(2, move |_| mm.clone());
        let gp = gauss_pair(&a, 0.0, dt).unwrap();
        let expected = &m.scale_real(dt) - &(&(&m * &m) * &m).scale_real(dt.powi(3) / 12.0);
        assert!((&cmt_argument(&gp) - &expected).frobenius_norm() < 1e-16);
    }

    #[test]
    fn propagate_grid_and_errors() {
        let a = FnSampler::unitary(1, |_| scalar_i());
        let y0 = ComplexDenseMatrix::identity(1);
        let tr = propagate(Method::Cfct, &a, 0.0, 1.0, 4, &y0).unwrap();
        assert_eq!(tr.records.len(), 5);
        assert_eq!(tr.records[0].t, 0.0);
        assert_eq!(tr.last().t, 1.0);
        assert!(tr.records.windows(2).all(|w| w[1].t > w[0].t));

        let one = propagate(Method::Cfct, &a, 0.0, 0.5, 1, &y0).unwrap();
        let direct = cfct_step(&a, 0.0, 0.5, &y0).unwrap();
        assert_eq!(one.final_state(), &direct);

        assert!(propagate(Method::Cfct, &a, 0.0, 1.0, 0, &y0).is_err());
        assert!(propagate(Method::Cfct, &a, 1.0, 1.0, 3, &y0).is_err());
        assert!(propagate(Method::Cfct, &a, 0.0, 1.0, 3, &ComplexDenseMatrix::identity(2)).is_err());
    }

    #[test]
    fn failing_step_reports_index() {
        let a = FnSampler::unitary(1, |t| {
            let v = if t < 0.5 { 1.0 } else { f64::NAN };
            ComplexDenseMatrix::from_fn(1, |_, _| C64::new(0.0, v))
        });
        let y0 = ComplexDenseMatrix::identity(1);
        let err = propagate(Method::Cfct, &a, 0.0, 1.0, 4, &y0).unwrap_err();
        assert_eq!(err.step_index(), Some(2));

        let two = ComplexDenseMatrix::from_real_rows(&[vec![2.0]]).unwrap();
        assert!(matches!(cayley_apply(&two, &y0), Err(MatrixError::SingularMatrix { .. })));
    }

    #[test]
    fn fit_order_excludes_floor() {
        let pts = [
            ConvergencePoint { dt: 0.1, error: 1e-4 },
            ConvergencePoint { dt: 0.05, error: 6.25e-6 },
            ConvergencePoint { dt: 0.025, error: 1e-15 },
        ];
        assert!((fit_order(&pts).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(usable_points(&pts), 2);
        assert_eq!(fit_order(&pts[2..]), None);
    }

    #[test]
    fn method_names_round_trip() {
        for name in ["cfct", "cmt", "cf4", "magnus4", "rk45", "omega-ode"] {
            assert_eq!(name.parse::<Method>().unwrap().name(), name);
        }
        assert!("euler".parse::<Method>().is_err());
    }
}
