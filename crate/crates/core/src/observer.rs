//! The adaptive observer, its smooth dead-zone adaptive law in kernel
//! coordinates, the dead-zone radii and the Lyapunov diagnostic.
//!
//! The observer is
//!
//! ```text
//! xhat' = A xhat + L (y - C xhat) + B (u + fhat(y))
//! fhat(y) = K(y) alpha_hat
//! alpha_hat' = g(|e|) (I_N ⊗ Gamma) Kinv K(y)^T (y - C xhat)
//! ```
//!
//! where `g` is the adaptation gate (the smooth dead zone `sigma0` by
//! default) and `Kinv` is applied through the Grammian's Cholesky factor.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{check_finite, check_len, Error, Result};
use crate::kernel::CenterSet;
use crate::linalg::{self, LureSolution};

/// Smooth dead zone: zero on `[0, d]`, quadratic on `[d, d + eps]`, then
/// linear with unit slope.
///
/// The linear branch is `e - d - eps/2`, the antiderivative of
/// [`sigma0_derivative`]; this keeps the function continuously
/// differentiable at `d + eps`.
pub fn sigma0(e_norm: f64, d: f64, eps: f64) -> f64 {
    if e_norm <= d {
        0.0
    } else if e_norm <= d + eps {
        let s = e_norm - d;
        s * s / (2.0 * eps)
    } else {
        e_norm - d - 0.5 * eps
    }
}

/// Derivative of [`sigma0`] with respect to `e_norm`; Lipschitz, values in `[0, 1]`.
pub fn sigma0_derivative(e_norm: f64, d: f64, eps: f64) -> f64 {
    if e_norm <= d {
        0.0
    } else if e_norm <= d + eps {
        (e_norm - d) / eps
    } else {
        1.0
    }
}

/// Step switch: 1 when `e` lies outside the open ball of radius `e0`, else 0.
pub fn mu_step(e: &[f64], e0: f64) -> f64 {
    let norm = libm::sqrt(e.iter().map(|v| v * v).sum());
    if norm >= e0 {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeadZone {
    /// Dead-zone width `d >= 0`.
    pub width: f64,
    /// Buffer width `eps > 0` of the quadratic transition.
    pub buffer: f64,
}

/// How the learning signal is switched by the observation-error norm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AdaptationGate {
    /// Multiply by `sigma0(|e|, d, eps)`.
    #[default]
    SmoothDeadZone,
    /// Multiply by `mu_step(e, radius)`; with `radius = 0` adaptation is always on.
    Step { radius: f64 },
}

/// Everything needed to build an [`ObserverDesign`] besides the center set.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverParams {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub l: DMatrix<f64>,
    /// Adaptive rate `Gamma_f`, `m x m`, symmetric positive definite.
    pub gamma: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub lure_epsilon: f64,
    /// Tolerance on `max |P B - C^T|` for a design to count as certified.
    pub spr_tolerance: f64,
    pub deadzone: DeadZone,
    pub gate: AdaptationGate,
    /// Declared bound on the measurement error norm.
    pub delta_bar: f64,
}

/// Validated observer design.
#[derive(Debug, Clone)]
pub struct ObserverDesign {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    l: DMatrix<f64>,
    gamma: DMatrix<f64>,
    gamma_inv: DMatrix<f64>,
    a_e: DMatrix<f64>,
    a_e_eigenvalues: Vec<Complex<f64>>,
    lure: core::result::Result<LureSolution, Error>,
    deadzone: DeadZone,
    gate: AdaptationGate,
    delta_bar: f64,
    centers: Arc<CenterSet>,
}

impl ObserverDesign {
    /// Build a design, requiring `A - LC` to be Hurwitz and the Lur'e equations to be solvable.
    /// A design whose `P B = C^T` check fails is still returned, flagged as not certified.
    pub fn new(params: ObserverParams, centers: Arc<CenterSet>) -> Result<Self> {
        let design = Self::new_uncertified(params, centers)?;
        if let Err(e) = &design.lure {
            return Err(e.clone());
        }
        Ok(design)
    }

    /// Like [`ObserverDesign::new`] but keeps going when `A - LC` is not Hurwitz
    /// or the Lur'e equations have no solution. Such a design can be simulated,
    /// while every quantity that needs `P` (dead-zone radii, Lyapunov value)
    /// returns the stored design error.
    pub fn new_uncertified(params: ObserverParams, centers: Arc<CenterSet>) -> Result<Self> {
        let ObserverParams {
            a,
            b,
            c,
            l,
            gamma,
            w,
            lure_epsilon,
            spr_tolerance,
            deadzone,
            gate,
            delta_bar,
        } = params;
        let n = a.nrows();
        let m = b.ncols();
        check_len("A columns", n, a.ncols())?;
        check_len("B rows", n, b.nrows())?;
        check_len("C rows", m, c.nrows())?;
        check_len("C columns", n, c.ncols())?;
        check_len("L rows", n, l.nrows())?;
        check_len("L columns", m, l.ncols())?;
        check_len("Gamma rows", m, gamma.nrows())?;
        check_len("Gamma columns", m, gamma.ncols())?;
        check_len("kernel output dimension", m, centers.output_dim())?;
        for (name, mat) in [("A", &a), ("B", &b), ("C", &c), ("L", &l), ("Gamma", &gamma), ("W", &w)] {
            check_finite(name, mat.as_slice())?;
        }
        let gamma_min = linalg::lambda_min(&gamma)?;
        if gamma_min <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                context: "adaptive rate Gamma",
                min_eigenvalue: gamma_min,
            });
        }
        let gamma_inv = gamma
            .clone()
            .cholesky()
            .map(|ch| ch.inverse())
            .ok_or_else(|| Error::Design("adaptive rate Gamma is not invertible".into()))?;
        if !(deadzone.width.is_finite() && deadzone.width >= 0.0) {
            return Err(Error::InputDomain(format!("dead-zone width must be >= 0, got {}", deadzone.width)));
        }
        if !(deadzone.buffer.is_finite() && deadzone.buffer > 0.0) {
            return Err(Error::InputDomain(format!("buffer width must be > 0, got {}", deadzone.buffer)));
        }
        if !(delta_bar.is_finite() && delta_bar >= 0.0) {
            return Err(Error::InputDomain(format!("delta_bar must be >= 0, got {delta_bar}")));
        }
        if let AdaptationGate::Step { radius } = gate {
            if !(radius.is_finite() && radius >= 0.0) {
                return Err(Error::InputDomain(format!("step gate radius must be >= 0, got {radius}")));
            }
        }
        let a_e = &a - &l * &c;
        let a_e_eigenvalues = linalg::eigenvalues(&a_e);
        let lure = linalg::design_lure(&a_e, &b, &c, lure_epsilon, &w, spr_tolerance);
        if let Err(e @ (Error::DimensionMismatch { .. } | Error::InputDomain(_))) = &lure {
            return Err(e.clone());
        }
        Ok(Self {
            a,
            b,
            c,
            l,
            gamma,
            gamma_inv,
            a_e,
            a_e_eigenvalues,
            lure,
            deadzone,
            gate,
            delta_bar,
            centers,
        })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }
    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }
    /// `A - L C`.
    pub fn error_dynamics(&self) -> &DMatrix<f64> {
        &self.a_e
    }
    pub fn error_dynamics_eigenvalues(&self) -> &[Complex<f64>] {
        &self.a_e_eigenvalues
    }
    pub fn deadzone(&self) -> DeadZone {
        self.deadzone
    }
    pub fn gate(&self) -> AdaptationGate {
        self.gate
    }
    pub fn delta_bar(&self) -> f64 {
        self.delta_bar
    }
    pub fn centers(&self) -> &Arc<CenterSet> {
        &self.centers
    }
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// The Lur'e solution, or the error that prevented computing one.
    pub fn lure(&self) -> Result<&LureSolution> {
        self.lure.as_ref().map_err(Clone::clone)
    }

    /// `A - LC` Hurwitz, Lur'e solution found and `P B = C^T` within tolerance.
    pub fn is_certified(&self) -> bool {
        matches!(&self.lure, Ok(sol) if sol.certified)
    }

    /// Gate multiplier applied to the learning signal for a given error norm.
    pub fn gate_value(&self, e_norm: f64) -> f64 {
        match self.gate {
            AdaptationGate::SmoothDeadZone => sigma0(e_norm, self.deadzone.width, self.deadzone.buffer),
            AdaptationGate::Step { radius } => {
                if e_norm >= radius {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Radius outside of which adaptation is fully active: `d + eps` for the
    /// smooth dead zone, the switch radius for the step gate.
    pub fn active_radius(&self) -> f64 {
        match self.gate {
            AdaptationGate::SmoothDeadZone => self.deadzone.width + self.deadzone.buffer,
            AdaptationGate::Step { radius } => radius,
        }
    }

    /// Apply `I_N ⊗ M` to a center-major stacked vector.
    fn blockwise(&self, m: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
        let k = self.output_dim();
        let mut out = DVector::zeros(v.len());
        for j in 0..v.len() / k {
            let block = m * v.rows(j * k, k);
            out.rows_mut(j * k, k).copy_from(&block);
        }
        out
    }
}

/// Observer state: state estimate and kernel coefficients of `fhat`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveObserverState {
    pub t: f64,
    pub x_hat: DVector<f64>,
    pub alpha_hat: DVector<f64>,
}

impl AdaptiveObserverState {
    /// Initial state; `alpha0` defaults to zero.
    pub fn new(design: &ObserverDesign, t: f64, x_hat: DVector<f64>, alpha0: Option<DVector<f64>>) -> Result<Self> {
        check_len("initial state estimate", design.state_dim(), x_hat.len())?;
        let alpha_hat = alpha0.unwrap_or_else(|| DVector::zeros(design.centers.coeff_dim()));
        check_len("initial coefficients", design.centers.coeff_dim(), alpha_hat.len())?;
        Ok(Self { t, x_hat, alpha_hat })
    }

    /// `fhat(y) = K(y) alpha_hat`.
    pub fn f_hat(&self, design: &ObserverDesign, y: &[f64]) -> Result<DVector<f64>> {
        design.centers.evaluate(&self.alpha_hat, y)
    }
}

/// Dead-zone radius `E0 = delta_bar |L^T P|_2 / (eps lambda_min(P) + lambda_min(W^T W))`.
pub fn compute_e0(design: &ObserverDesign) -> Result<f64> {
    let lure = design.lure()?;
    let denom = lure.epsilon * linalg::lambda_min(&lure.p)? + linalg::lambda_min(&(lure.w.transpose() * &lure.w))?;
    if denom <= 0.0 {
        return Err(Error::Design("E0 denominator eps*lambda_min(P) + lambda_min(W^T W) is not positive".into()));
    }
    Ok(design.delta_bar * linalg::spectral_norm(&(design.l.transpose() * &lure.p)) / denom)
}

/// Minimal dead-zone width
/// `d_N = 2 |C|_2 (sup_power * residual + |P L|_2 delta_bar) / lambda_min(W^T W + eps P)`.
///
/// `residual_norm_estimate` stands in for the native norm of the part of the
/// uncertainty outside the span of the centers, which cannot be computed for
/// an unknown function; the result is advisory.
pub fn compute_min_deadzone(design: &ObserverDesign, sup_power: f64, residual_norm_estimate: f64) -> Result<f64> {
    for (name, v) in [("sup_power", sup_power), ("residual_norm_estimate", residual_norm_estimate)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InputDomain(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    let lure = design.lure()?;
    let denom = linalg::lambda_min(&(lure.w.transpose() * &lure.w + &lure.p * lure.epsilon))?;
    if denom <= 0.0 {
        return Err(Error::Design("d_N denominator lambda_min(W^T W + eps P) is not positive".into()));
    }
    let pl = linalg::spectral_norm(&(&lure.p * &design.l));
    Ok(2.0 * linalg::spectral_norm(&design.c) * (sup_power * residual_norm_estimate + pl * design.delta_bar) / denom)
}

/// Right-hand side of the coefficient ODE.
///
/// `e_norm_signal` drives the gate. In simulation it is the true `|x - xhat|`;
/// a deployed observer has to supply a measurable surrogate such as
/// [`output_error_surrogate`].
pub fn adaptive_law_rhs(
    design: &ObserverDesign,
    state: &AdaptiveObserverState,
    y: &[f64],
    e_norm_signal: f64,
) -> Result<DVector<f64>> {
    let m = design.output_dim();
    check_len("measured output", m, y.len())?;
    check_len("state estimate", design.state_dim(), state.x_hat.len())?;
    check_len("coefficients", design.centers.coeff_dim(), state.alpha_hat.len())?;
    if !(e_norm_signal.is_finite() && e_norm_signal >= 0.0) {
        return Err(Error::InputDomain(format!("error norm signal must be >= 0, got {e_norm_signal}")));
    }
    let gate = design.gate_value(e_norm_signal);
    let dim = design.centers.coeff_dim();
    if gate == 0.0 {
        return Ok(DVector::zeros(dim));
    }
    let residual = DVector::from_column_slice(y) - &design.c * &state.x_hat;
    let sections = design.centers.kernel_values(y)?;
    let mut stacked = DVector::zeros(dim);
    for (j, k) in sections.iter().enumerate() {
        for a in 0..m {
            stacked[j * m + a] = k * residual[a];
        }
    }
    let solved = design.centers.solve_grammian(&stacked)?;
    Ok(design.blockwise(&design.gamma, &solved) * gate)
}

/// Right-hand side `A xhat + L (y - C xhat) + B (u + fhat(y))` of the state estimate.
pub fn observer_rhs(
    design: &ObserverDesign,
    state: &AdaptiveObserverState,
    y: &[f64],
    u: &[f64],
) -> Result<DVector<f64>> {
    let m = design.output_dim();
    check_len("measured output", m, y.len())?;
    check_len("control input", m, u.len())?;
    check_len("state estimate", design.state_dim(), state.x_hat.len())?;
    let y = DVector::from_column_slice(y);
    let u = DVector::from_column_slice(u);
    let f_hat = design.centers.evaluate(&state.alpha_hat, y.as_slice())?;
    Ok(&design.a * &state.x_hat + &design.l * (&y - &design.c * &state.x_hat) + &design.b * (u + f_hat))
}

/// Lyapunov diagnostic `e^T P e + alpha_err^T (I_N ⊗ Gamma^{-1}) K alpha_err`,
/// restricted to the span of the centers.
pub fn lyapunov_value(design: &ObserverDesign, e: &DVector<f64>, alpha_err: &DVector<f64>) -> Result<f64> {
    check_len("observation error", design.state_dim(), e.len())?;
    check_len("coefficient error", design.centers.coeff_dim(), alpha_err.len())?;
    let lure = design.lure()?;
    let weighted = design.blockwise(&design.gamma_inv, &(design.centers.grammian() * alpha_err));
    Ok(e.dot(&(&lure.p * e)) + alpha_err.dot(&weighted))
}

/// `|y - C xhat| / sigma_min(C)`, a measurable stand-in for `|e|` when `C` has full row rank.
pub fn output_error_surrogate(design: &ObserverDesign, y: &[f64], x_hat: &DVector<f64>) -> Result<f64> {
    check_len("measured output", design.output_dim(), y.len())?;
    let r = DVector::from_column_slice(y) - &design.c * x_hat;
    let sv = design.c.clone().singular_values();
    let s_min = sv.min();
    if s_min <= 0.0 {
        return Err(Error::Design("C does not have full row rank".into()));
    }
    Ok(r.norm() / s_min)
}
