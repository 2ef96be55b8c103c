//! Truth-side plant models: the linear plant with matched uncertainty, the
//! rigid body in translation and in rotation, reference trajectories,
//! tracking controllers and disturbance signals.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{check_len, Error, Result};
use crate::kernel::RkhsElement;
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Waveform {
    Sin,
    Cos,
    Tanh,
}

/// `amplitude * waveform(frequency * t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalTerm {
    pub waveform: Waveform,
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl SignalTerm {
    pub fn sin(amplitude: f64, frequency: f64) -> Self {
        Self {
            waveform: Waveform::Sin,
            amplitude,
            frequency,
            phase: 0.0,
        }
    }

    pub fn cos(amplitude: f64, frequency: f64) -> Self {
        Self {
            waveform: Waveform::Cos,
            ..Self::sin(amplitude, frequency)
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let arg = self.frequency * t + self.phase;
        self.amplitude
            * match self.waveform {
                Waveform::Sin => libm::sin(arg),
                Waveform::Cos => libm::cos(arg),
                Waveform::Tanh => libm::tanh(arg),
            }
    }
}

/// Vector-valued time signal; each channel is a sum of [`SignalTerm`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    channels: Vec<Vec<SignalTerm>>,
}

impl Signal {
    pub fn zero(dim: usize) -> Self {
        Self {
            channels: vec![Vec::new(); dim],
        }
    }

    /// The same scalar signal on every channel.
    pub fn broadcast(terms: &[SignalTerm], dim: usize) -> Self {
        Self {
            channels: vec![terms.to_vec(); dim],
        }
    }

    pub fn per_channel(channels: Vec<Vec<SignalTerm>>) -> Self {
        Self { channels }
    }

    pub fn dim(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[Vec<SignalTerm>] {
        &self.channels
    }

    pub fn is_zero(&self) -> bool {
        self.channels.iter().all(|c| c.iter().all(|t| t.amplitude == 0.0))
    }

    /// Multiply every amplitude by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            channels: self
                .channels
                .iter()
                .map(|c| {
                    c.iter()
                        .map(|t| SignalTerm {
                            amplitude: t.amplitude * factor,
                            ..*t
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.channels.iter().map(|c| c.iter().map(|term| term.value(t)).sum()))
    }
}

/// Translational measurement error `0.008 (sin 0.5t + cos 0.5t)` on each velocity channel.
pub fn translational_measurement_error() -> Signal {
    Signal::broadcast(&[SignalTerm::sin(0.008, 0.5), SignalTerm::cos(0.008, 0.5)], 3)
}

/// Vector-norm bound of [`translational_measurement_error`]: `0.008 sqrt(2) sqrt(3)`.
pub fn translational_delta_bar() -> f64 {
    0.008 * libm::sqrt(2.0) * libm::sqrt(3.0)
}

/// Rotational measurement error `0.05 sin 5t` on each angular-rate channel.
pub fn rotational_measurement_error() -> Signal {
    Signal::broadcast(&[SignalTerm::sin(0.05, 5.0)], 3)
}

/// Vector-norm bound of [`rotational_measurement_error`]: `0.05 sqrt(3)`.
pub fn rotational_delta_bar() -> f64 {
    0.05 * libm::sqrt(3.0)
}

/// User-supplied uncertainty `y -> f(y)`.
pub type UncertaintyFn = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;

/// The matched uncertainty `f`, evaluated at the measured output.
#[derive(Clone)]
pub enum MatchedUncertainty {
    Zero,
    Constant(DVector<f64>),
    /// `[cos(y1^2), sin(y2^2) + sin(y1), cos(y3) + sin(y2)]` on velocity measurements.
    TrigVelocityForce,
    /// `-c |y| y`.
    QuadraticDrag { coefficient: f64 },
    /// An element of the finite-dimensional native space.
    Kernel(RkhsElement),
    Custom(UncertaintyFn),
}

impl fmt::Debug for MatchedUncertainty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => f.write_str("Zero"),
            Self::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Self::TrigVelocityForce => f.write_str("TrigVelocityForce"),
            Self::QuadraticDrag { coefficient } => {
                f.debug_struct("QuadraticDrag").field("coefficient", coefficient).finish()
            }
            Self::Kernel(el) => f.debug_tuple("Kernel").field(el.coeffs()).finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl MatchedUncertainty {
    pub fn eval(&self, y: &[f64]) -> Result<DVector<f64>> {
        match self {
            Self::Zero => Ok(DVector::zeros(y.len())),
            Self::Constant(c) => {
                check_len("constant uncertainty", y.len(), c.len())?;
                Ok(c.clone())
            }
            Self::TrigVelocityForce => {
                check_len("trig velocity force argument", 3, y.len())?;
                Ok(DVector::from_vec(vec![
                    libm::cos(y[0] * y[0]),
                    libm::sin(y[1] * y[1]) + libm::sin(y[0]),
                    libm::cos(y[2]) + libm::sin(y[1]),
                ]))
            }
            Self::QuadraticDrag { coefficient } => {
                let v = DVector::from_column_slice(y);
                let norm = v.norm();
                Ok(v * (-coefficient * norm))
            }
            Self::Kernel(el) => el.evaluate(y),
            Self::Custom(f) => Ok(f(y)),
        }
    }
}

/// Linear plant with matched uncertainty:
/// `x' = A x + B (u + f(y)) + xi(t)`, `y = C x + delta(t)`.
#[derive(Debug, Clone)]
pub struct PlantModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub f_true: MatchedUncertainty,
    /// Unmatched disturbance, `n` channels.
    pub xi: Signal,
    /// Measurement error, `m` channels.
    pub delta: Signal,
    pub delta_bar: f64,
}

impl PlantModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        f_true: MatchedUncertainty,
        xi: Signal,
        delta: Signal,
        delta_bar: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        check_len("A columns", n, a.ncols())?;
        check_len("B rows", n, b.nrows())?;
        check_len("C rows", m, c.nrows())?;
        check_len("C columns", n, c.ncols())?;
        check_len("unmatched disturbance channels", n, xi.dim())?;
        check_len("measurement error channels", m, delta.dim())?;
        if !(delta_bar.is_finite() && delta_bar >= 0.0) {
            return Err(Error::InputDomain("delta_bar must be >= 0".into()));
        }
        Ok(Self {
            a,
            b,
            c,
            f_true,
            xi,
            delta,
            delta_bar,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// Measured output `C x + delta(t)`.
    pub fn output(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        &self.c * x + self.delta.eval(t)
    }

    /// `A x + B (u + f(C x + delta(t))) + xi(t)`.
    pub fn plant_rhs(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        check_len("plant state", self.state_dim(), x.len())?;
        check_len("control input", self.output_dim(), u.len())?;
        let y = self.output(x, t);
        let f = self.f_true.eval(y.as_slice())?;
        check_len("matched uncertainty value", self.output_dim(), f.len())?;
        Ok(&self.a * x + &self.b * (u + f) + self.xi.eval(t))
    }
}

/// Rigid body in translation with mass `mass`: `x = [r; v]`, output `v`.
pub fn translational_plant(mass: f64, f_true: MatchedUncertainty, xi: Signal, delta: Signal, delta_bar: f64) -> Result<PlantModel> {
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::InputDomain("mass must be positive".into()));
    }
    let mut a = DMatrix::zeros(6, 6);
    let mut b = DMatrix::zeros(6, 3);
    let mut c = DMatrix::zeros(3, 6);
    for i in 0..3 {
        a[(i, 3 + i)] = 1.0;
        b[(3 + i, i)] = 1.0 / mass;
        c[(i, 3 + i)] = 1.0;
    }
    PlantModel::new(a, b, c, f_true, xi, delta, delta_bar)
}

/// Rigid body in rotation: `eta' = J(eta) omega`,
/// `omega' = I^{-1} (u - omega x I omega + f(y)) + xi(t)`, `y = omega + delta(t)`.
#[derive(Debug, Clone)]
pub struct RigidBodyRotational {
    pub inertia: Matrix3<f64>,
    inertia_inv: Matrix3<f64>,
    pub f_true: MatchedUncertainty,
    pub xi: Signal,
    pub delta: Signal,
    pub delta_bar: f64,
}

/// Pitch magnitude beyond which the 3-2-1 kinematics are treated as singular.
pub const PITCH_LIMIT: f64 = core::f64::consts::FRAC_PI_2 - 1e-3;

impl RigidBodyRotational {
    pub fn new(inertia: Matrix3<f64>, f_true: MatchedUncertainty, xi: Signal, delta: Signal, delta_bar: f64) -> Result<Self> {
        let dyn_inertia = DMatrix::from_column_slice(3, 3, inertia.as_slice());
        let min = linalg::lambda_min(&dyn_inertia)?;
        if min <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                context: "inertia matrix",
                min_eigenvalue: min,
            });
        }
        check_len("unmatched disturbance channels", 3, xi.dim())?;
        check_len("measurement error channels", 3, delta.dim())?;
        if !(delta_bar.is_finite() && delta_bar >= 0.0) {
            return Err(Error::InputDomain("delta_bar must be >= 0".into()));
        }
        let inertia_inv = inertia
            .try_inverse()
            .ok_or_else(|| Error::InputDomain("inertia matrix is singular".into()))?;
        Ok(Self {
            inertia,
            inertia_inv,
            f_true,
            xi,
            delta,
            delta_bar,
        })
    }

    pub fn inertia_inv(&self) -> &Matrix3<f64> {
        &self.inertia_inv
    }

    /// The angular-rate subsystem in linear form: `A = 0`, `B = I^{-1}`, `C = I_3`.
    pub fn linear_form(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        (
            DMatrix::zeros(3, 3),
            DMatrix::from_column_slice(3, 3, self.inertia_inv.as_slice()),
            DMatrix::identity(3, 3),
        )
    }

    pub fn output(&self, omega: &Vector3<f64>, t: f64) -> Vector3<f64> {
        let d = self.delta.eval(t);
        omega + Vector3::new(d[0], d[1], d[2])
    }

    /// Right-hand side `(eta', omega')`; `t` is used for the signals and error reporting.
    pub fn rotational_rhs(
        &self,
        eta: &Vector3<f64>,
        omega: &Vector3<f64>,
        u: &Vector3<f64>,
        t: f64,
    ) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let j = euler_kinematics_matrix(eta).map_err(|e| with_time(e, t))?;
        let y = self.output(omega, t);
        let f = self.f_true.eval(y.as_slice())?;
        check_len("matched uncertainty value", 3, f.len())?;
        let f = Vector3::new(f[0], f[1], f[2]);
        let xi = self.xi.eval(t);
        let coriolis = omega.cross(&(self.inertia * omega));
        let omega_dot = self.inertia_inv * (u - coriolis + f) + Vector3::new(xi[0], xi[1], xi[2]);
        Ok((j * omega, omega_dot))
    }
}

fn with_time(e: Error, t: f64) -> Error {
    match e {
        Error::KinematicSingularity { phi, theta, psi, .. } => Error::KinematicSingularity { t, phi, theta, psi },
        other => other,
    }
}

/// 3-2-1 body-rate to Euler-rate map `J(eta)` for `eta = [phi, theta, psi]`.
pub fn euler_kinematics_matrix(eta: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let (phi, theta, psi) = (eta[0], eta[1], eta[2]);
    if theta.is_nan() || theta.abs() >= PITCH_LIMIT {
        return Err(Error::KinematicSingularity {
            t: f64::NAN,
            phi,
            theta,
            psi,
        });
    }
    let (sp, cp) = (libm::sin(phi), libm::cos(phi));
    let (tt, ct) = (libm::tan(theta), libm::cos(theta));
    Ok(Matrix3::new(
        1.0,
        sp * tt,
        cp * tt,
        0.0,
        cp,
        -sp,
        0.0,
        sp / ct,
        cp / ct,
    ))
}

/// Wrap attitude angles into `[0, 2pi) x (-pi/2, pi/2) x [0, 2pi)` for reporting.
pub fn wrap_attitude(eta: &Vector3<f64>) -> Vector3<f64> {
    let tau = 2.0 * core::f64::consts::PI;
    let wrap = |a: f64| {
        let r = a - tau * libm::floor(a / tau);
        if r >= tau {
            0.0
        } else {
            r
        }
    };
    Vector3::new(wrap(eta[0]), eta[1], wrap(eta[2]))
}

/// Translational reference `x_r = [sin t, cos t, sin 2t, cos t, -sin t, 2 cos 2t]` and its derivative.
pub fn translational_reference(t: f64) -> (DVector<f64>, DVector<f64>) {
    let (s, c) = (libm::sin(t), libm::cos(t));
    let (s2, c2) = (libm::sin(2.0 * t), libm::cos(2.0 * t));
    (
        DVector::from_vec(vec![s, c, s2, c, -s, 2.0 * c2]),
        DVector::from_vec(vec![c, -s, 2.0 * c2, -s, -c, -4.0 * s2]),
    )
}

/// Rotational reference `omega_r = 0.1 [cos 0.1t, sin 0.1t, tanh 0.1t]` and its derivative.
pub fn rotational_reference(t: f64) -> (Vector3<f64>, Vector3<f64>) {
    let a = 0.1 * t;
    let th = libm::tanh(a);
    (
        Vector3::new(0.1 * libm::cos(a), 0.1 * libm::sin(a), 0.1 * th),
        Vector3::new(-0.01 * libm::sin(a), 0.01 * libm::cos(a), 0.01 * (1.0 - th * th)),
    )
}

/// `u = -K (x - x_r(t)) + B^+ x_r'(t)`.
pub fn translational_controller(t: f64, x: &DVector<f64>, gain: &DMatrix<f64>, b_pinv: &DMatrix<f64>) -> DVector<f64> {
    let (xr, xr_dot) = translational_reference(t);
    -(gain * (x - xr)) + b_pinv * xr_dot
}

/// `u = -k (omega - omega_r(t)) + omega_r'(t)`.
pub fn rotational_controller(t: f64, omega: &Vector3<f64>, gain: f64) -> Vector3<f64> {
    let (wr, wr_dot) = rotational_reference(t);
    -(omega - wr) * gain + wr_dot
}

/// Control law driving the plant during a simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    Zero,
    Constant(DVector<f64>),
    /// Reference tracking for the translational rigid body.
    TranslationalTracking { gain: DMatrix<f64>, b_pinv: DMatrix<f64> },
    /// Angular-rate tracking for the rotational rigid body.
    RotationalTracking { gain: f64 },
}

impl Controller {
    /// Gains `K = [I_3 I_3]` and `B^+` for a body of mass `mass`.
    pub fn translational(mass: f64) -> Result<Self> {
        let mut gain = DMatrix::zeros(3, 6);
        let mut b = DMatrix::zeros(6, 3);
        for i in 0..3 {
            gain[(i, i)] = 1.0;
            gain[(i, 3 + i)] = 1.0;
            b[(3 + i, i)] = 1.0 / mass;
        }
        Ok(Self::TranslationalTracking {
            gain,
            b_pinv: linalg::pseudo_inverse(&b)?,
        })
    }

    /// Evaluate the control for input dimension `m` at time `t` and true state `x`.
    pub fn control(&self, t: f64, x: &DVector<f64>, m: usize) -> DVector<f64> {
        match self {
            Self::Zero => DVector::zeros(m),
            Self::Constant(u) => u.clone(),
            Self::TranslationalTracking { gain, b_pinv } => translational_controller(t, x, gain, b_pinv),
            Self::RotationalTracking { gain } => {
                let u = rotational_controller(t, &Vector3::new(x[0], x[1], x[2]), *gain);
                DVector::from_column_slice(u.as_slice())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinematics_identity_at_zero() {
        assert_eq!(euler_kinematics_matrix(&Vector3::zeros()).unwrap(), Matrix3::identity());
    }

    #[test]
    fn kinematics_quarter_roll() {
        let j = euler_kinematics_matrix(&Vector3::new(core::f64::consts::FRAC_PI_2, 0.0, 0.0)).unwrap();
        let expected = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert!((j - expected).abs().max() < 1e-15);
    }

    #[test]
    fn kinematics_singularity_is_reported() {
        let err = euler_kinematics_matrix(&Vector3::new(0.0, 1.5703, 0.0)).unwrap_err();
        assert!(matches!(err, Error::KinematicSingularity { .. }));
    }

    #[test]
    fn references_at_zero() {
        let (xr, _) = translational_reference(0.0);
        assert_eq!(xr.as_slice(), &[0.0, 1.0, 0.0, 1.0, 0.0, 2.0]);
        let (wr, wr_dot) = rotational_reference(0.0);
        assert_eq!(wr, Vector3::new(0.1, 0.0, 0.0));
        assert_eq!(wr_dot, Vector3::new(0.0, 0.01, 0.01));
    }

    #[test]
    fn disturbances_at_zero() {
        assert!((translational_measurement_error().eval(0.0) - DVector::from_element(3, 0.008)).norm() < 1e-18);
        assert_eq!(rotational_measurement_error().eval(0.0), DVector::zeros(3));
    }

    #[test]
    fn trig_force_at_origin() {
        let f = MatchedUncertainty::TrigVelocityForce.eval(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(f.as_slice(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn drag_moment() {
        let f = MatchedUncertainty::QuadraticDrag { coefficient: 0.001 }.eval(&[0.1, 0.0, 0.0]).unwrap();
        assert!((f[0] + 1e-5).abs() < 1e-20);
        assert_eq!(f[1], 0.0);
        assert_eq!(f[2], 0.0);
    }

    #[test]
    fn wrap_keeps_pitch() {
        let w = wrap_attitude(&Vector3::new(-0.5, 0.3, 7.0));
        assert!((w[0] - (2.0 * core::f64::consts::PI - 0.5)).abs() < 1e-12);
        assert_eq!(w[1], 0.3);
        assert!((w[2] - (7.0 - 2.0 * core::f64::consts::PI)).abs() < 1e-12);
    }
}
