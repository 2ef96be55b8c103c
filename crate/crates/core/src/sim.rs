//! Fixed-step RK4 co-integration of plant, observer and adaptive
//! coefficients, with per-step records and run metrics.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DVector, Vector3};

use crate::dynamics::{euler_kinematics_matrix, Controller, PlantModel, RigidBodyRotational};
use crate::error::{check_len, Error, Result};
use crate::observer::{self, AdaptiveObserverState, ObserverDesign};

/// One classical fourth-order Runge-Kutta step of `x' = f(t, x)`.
pub fn rk4_step<F>(mut f: F, t: f64, x: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = f(t, x)?;
    let k2 = f(t + 0.5 * h, &(x + &k1 * (0.5 * h)))?;
    let k3 = f(t + 0.5 * h, &(x + &k2 * (0.5 * h)))?;
    let k4 = f(t + h, &(x + &k3 * h))?;
    Ok(x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0))
}

#[derive(Debug, Clone)]
pub enum Plant {
    Linear(PlantModel),
    /// Angular rate is the plant state `x`; attitude is carried alongside.
    Rotational(RigidBodyRotational),
}

impl Plant {
    pub fn state_dim(&self) -> usize {
        match self {
            Self::Linear(p) => p.state_dim(),
            Self::Rotational(_) => 3,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Self::Linear(p) => p.output_dim(),
            Self::Rotational(_) => 3,
        }
    }

    pub fn delta_bar(&self) -> f64 {
        match self {
            Self::Linear(p) => p.delta_bar,
            Self::Rotational(r) => r.delta_bar,
        }
    }

    pub fn delta(&self, t: f64) -> DVector<f64> {
        match self {
            Self::Linear(p) => p.delta.eval(t),
            Self::Rotational(r) => r.delta.eval(t),
        }
    }

    pub fn output(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        match self {
            Self::Linear(p) => p.output(x, t),
            Self::Rotational(_) => x + self.delta(t),
        }
    }

    pub fn f_true(&self, y: &[f64]) -> Result<DVector<f64>> {
        match self {
            Self::Linear(p) => p.f_true.eval(y),
            Self::Rotational(r) => r.f_true.eval(y),
        }
    }
}

/// Truth side of a simulation.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub plant: Plant,
    pub controller: Controller,
    /// Coefficients of the uncertainty (or of its best approximation) in the
    /// observer's kernel span. Needed for the Lyapunov diagnostic; without
    /// it the recorded `v` is NaN.
    pub alpha_star: Option<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub t0: f64,
    pub t_final: f64,
    pub h: f64,
    pub record_stride: usize,
    pub x0: DVector<f64>,
    pub x_hat0: DVector<f64>,
    pub alpha0: Option<DVector<f64>>,
    /// Initial attitude (rotational plants only); defaults to zero.
    pub eta0: Option<Vector3<f64>>,
    /// Initial attitude estimate; defaults to `eta0`.
    pub eta_hat0: Option<Vector3<f64>>,
}

impl SimConfig {
    pub fn new(t_final: f64, h: f64, x0: DVector<f64>, x_hat0: DVector<f64>) -> Self {
        Self {
            t0: 0.0,
            t_final,
            h,
            record_stride: 1,
            x0,
            x_hat0,
            alpha0: None,
            eta0: None,
            eta_hat0: None,
        }
    }

    /// Number of fixed steps covering `[t0, t_final]`.
    pub fn steps(&self) -> Result<usize> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::InputDomain(format!("step size must be > 0, got {}", self.h)));
        }
        if !(self.t0.is_finite() && self.t_final.is_finite() && self.t_final > self.t0) {
            return Err(Error::InputDomain(format!(
                "horizon must satisfy t_final > t0, got [{}, {}]",
                self.t0, self.t_final
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::InputDomain("record stride must be >= 1".into()));
        }
        let ratio = (self.t_final - self.t0) / self.h;
        let steps = libm::round(ratio);
        if (ratio - steps).abs() > 1e-6 * ratio.max(1.0) || steps < 1.0 {
            return Err(Error::InputDomain(format!(
                "horizon {} is not a whole number of steps of {}",
                self.t_final - self.t0,
                self.h
            )));
        }
        Ok(steps as usize)
    }
}

/// Snapshot of the co-integrated system at one recorded step.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub t: f64,
    pub x: DVector<f64>,
    pub x_hat: DVector<f64>,
    pub e: DVector<f64>,
    pub e_norm: f64,
    pub y: DVector<f64>,
    pub u: DVector<f64>,
    pub f_true: DVector<f64>,
    pub f_hat: DVector<f64>,
    /// Adaptation gate value at `e_norm`.
    pub sigma0: f64,
    /// Lyapunov diagnostic, NaN when unavailable.
    pub v: f64,
    pub alpha_hat: DVector<f64>,
    pub eta: Option<Vector3<f64>>,
    pub eta_hat: Option<Vector3<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub t0: f64,
    pub t_final: f64,
    /// Radius `d + eps` used for entry and Lyapunov checks.
    pub threshold: f64,
    /// First time after which `|e| <= threshold` holds through the end; `None` if never.
    pub t_enter: Option<f64>,
    /// Max `|e|` over the trailing 20% of the horizon.
    pub ultimate_bound: f64,
    /// Per-component mean `|e_i|` over the trailing 20% of the horizon.
    pub steady_state_mean_abs_error: Vec<f64>,
    /// Largest increase of `v` between consecutive records with `|e| >= threshold`;
    /// `None` when the diagnostic is unavailable or no such pair exists.
    pub max_lyapunov_increase: Option<f64>,
    pub final_e_norm: f64,
    pub records: usize,
}

/// Metrics over a record stream.
pub fn run_summary(records: &[SimRecord], threshold: f64) -> Result<RunSummary> {
    let (first, last) = match (records.first(), records.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::InputDomain("run summary needs at least one record".into())),
    };
    let (t0, t_final) = (first.t, last.t);

    let mut t_enter = None;
    for r in records.iter().rev() {
        if r.e_norm <= threshold {
            t_enter = Some(r.t);
        } else {
            break;
        }
    }

    let window_start = t_final - 0.2 * (t_final - t0);
    let tail: Vec<&SimRecord> = records.iter().filter(|r| r.t >= window_start).collect();
    let ultimate_bound = tail.iter().map(|r| r.e_norm).fold(0.0, f64::max);
    let n = first.e.len();
    let steady_state_mean_abs_error = (0..n)
        .map(|i| tail.iter().map(|r| r.e[i].abs()).sum::<f64>() / tail.len() as f64)
        .collect();

    let mut max_lyapunov_increase: Option<f64> = None;
    for pair in records.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.e_norm >= threshold && b.e_norm >= threshold && a.v.is_finite() && b.v.is_finite() {
            let inc = b.v - a.v;
            max_lyapunov_increase = Some(max_lyapunov_increase.map_or(inc, |m| m.max(inc)));
        }
    }

    Ok(RunSummary {
        t0,
        t_final,
        threshold,
        t_enter,
        ultimate_bound,
        steady_state_mean_abs_error,
        max_lyapunov_increase,
        final_e_norm: last.e_norm,
        records: records.len(),
    })
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub records: Vec<SimRecord>,
    pub summary: RunSummary,
    /// Largest `|delta(t)|` seen at step start times.
    pub max_delta_norm: f64,
}

/// Layout of the stacked state `[x | xhat | alpha_hat | eta | eta_hat]`.
#[derive(Clone, Copy)]
struct Layout {
    n: usize,
    p: usize,
    rotational: bool,
}

impl Layout {
    fn len(&self) -> usize {
        2 * self.n + self.p + if self.rotational { 6 } else { 0 }
    }
    fn x(&self, s: &DVector<f64>) -> DVector<f64> {
        s.rows(0, self.n).into_owned()
    }
    fn x_hat(&self, s: &DVector<f64>) -> DVector<f64> {
        s.rows(self.n, self.n).into_owned()
    }
    fn alpha(&self, s: &DVector<f64>) -> DVector<f64> {
        s.rows(2 * self.n, self.p).into_owned()
    }
    fn eta(&self, s: &DVector<f64>) -> Option<(Vector3<f64>, Vector3<f64>)> {
        self.rotational.then(|| {
            let o = 2 * self.n + self.p;
            (
                Vector3::new(s[o], s[o + 1], s[o + 2]),
                Vector3::new(s[o + 3], s[o + 4], s[o + 5]),
            )
        })
    }
}

struct System<'a> {
    scenario: &'a Scenario,
    design: &'a ObserverDesign,
    layout: Layout,
}

impl System<'_> {
    fn rhs(&self, t: f64, s: &DVector<f64>) -> Result<DVector<f64>> {
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { t, last_record: None });
        }
        let lay = self.layout;
        let x = lay.x(s);
        let obs = AdaptiveObserverState {
            t,
            x_hat: lay.x_hat(s),
            alpha_hat: lay.alpha(s),
        };
        let m = self.scenario.plant.input_dim();
        let u = self.scenario.controller.control(t, &x, m);
        let y = self.scenario.plant.output(&x, t);
        let mut out = DVector::zeros(lay.len());
        match &self.scenario.plant {
            Plant::Linear(p) => out.rows_mut(0, lay.n).copy_from(&p.plant_rhs(&x, &u, t)?),
            Plant::Rotational(body) => {
                let (eta, eta_hat) = lay.eta(s).expect("rotational layout");
                let omega = Vector3::new(x[0], x[1], x[2]);
                let (eta_dot, omega_dot) = body.rotational_rhs(&eta, &omega, &Vector3::new(u[0], u[1], u[2]), t)?;
                let omega_hat = Vector3::new(obs.x_hat[0], obs.x_hat[1], obs.x_hat[2]);
                let eta_hat_dot = euler_kinematics_matrix(&eta_hat)
                    .map_err(|e| match e {
                        Error::KinematicSingularity { phi, theta, psi, .. } => {
                            Error::KinematicSingularity { t, phi, theta, psi }
                        }
                        other => other,
                    })?
                    * omega_hat;
                out.rows_mut(0, 3).copy_from(&omega_dot);
                let o = 2 * lay.n + lay.p;
                out.rows_mut(o, 3).copy_from(&eta_dot);
                out.rows_mut(o + 3, 3).copy_from(&eta_hat_dot);
            }
        }
        let e_norm = (&x - &obs.x_hat).norm();
        if !e_norm.is_finite() {
            return Err(Error::Divergence { t, last_record: None });
        }
        out.rows_mut(lay.n, lay.n)
            .copy_from(&observer::observer_rhs(self.design, &obs, y.as_slice(), u.as_slice())?);
        out.rows_mut(2 * lay.n, lay.p)
            .copy_from(&observer::adaptive_law_rhs(self.design, &obs, y.as_slice(), e_norm)?);
        Ok(out)
    }

    fn record(&self, t: f64, s: &DVector<f64>) -> Result<SimRecord> {
        let lay = self.layout;
        let x = lay.x(s);
        let x_hat = lay.x_hat(s);
        let alpha_hat = lay.alpha(s);
        let e = &x - &x_hat;
        let e_norm = e.norm();
        let y = self.scenario.plant.output(&x, t);
        let u = self.scenario.controller.control(t, &x, self.scenario.plant.input_dim());
        let f_true = self.scenario.plant.f_true(y.as_slice())?;
        let f_hat = self.design.centers().evaluate(&alpha_hat, y.as_slice())?;
        let v = match (&self.scenario.alpha_star, self.design.lure()) {
            (Some(star), Ok(_)) => observer::lyapunov_value(self.design, &e, &(star - &alpha_hat))?,
            _ => f64::NAN,
        };
        let (eta, eta_hat) = match lay.eta(s) {
            Some((a, b)) => (Some(a), Some(b)),
            None => (None, None),
        };
        Ok(SimRecord {
            t,
            sigma0: self.design.gate_value(e_norm),
            x,
            x_hat,
            e,
            e_norm,
            y,
            u,
            f_true,
            f_hat,
            v,
            alpha_hat,
            eta,
            eta_hat,
        })
    }
}

/// Co-integrate plant, observer and coefficients, recording every
/// `record_stride`-th step plus the final one.
pub fn integrate(scenario: &Scenario, design: &ObserverDesign, cfg: &SimConfig) -> Result<SimOutput> {
    let steps = cfg.steps()?;
    let n = scenario.plant.state_dim();
    let m = scenario.plant.input_dim();
    check_len("observer state dimension", n, design.state_dim())?;
    check_len("observer output dimension", m, design.output_dim())?;
    check_len("initial state", n, cfg.x0.len())?;
    check_len("initial state estimate", n, cfg.x_hat0.len())?;
    let p = design.centers().coeff_dim();
    if let Some(star) = &scenario.alpha_star {
        check_len("reference coefficients", p, star.len())?;
    }
    let rotational = matches!(scenario.plant, Plant::Rotational(_));
    if !rotational && (cfg.eta0.is_some() || cfg.eta_hat0.is_some()) {
        return Err(Error::Scenario("initial attitude given for a non-rotational plant".into()));
    }
    let layout = Layout { n, p, rotational };
    let sys = System { scenario, design, layout };

    let obs0 = AdaptiveObserverState::new(design, cfg.t0, cfg.x_hat0.clone(), cfg.alpha0.clone())?;
    let mut state = DVector::zeros(layout.len());
    state.rows_mut(0, n).copy_from(&cfg.x0);
    state.rows_mut(n, n).copy_from(&obs0.x_hat);
    state.rows_mut(2 * n, p).copy_from(&obs0.alpha_hat);
    if rotational {
        let eta0 = cfg.eta0.unwrap_or_else(Vector3::zeros);
        let eta_hat0 = cfg.eta_hat0.unwrap_or(eta0);
        state.rows_mut(2 * n + p, 3).copy_from(&eta0);
        state.rows_mut(2 * n + p + 3, 3).copy_from(&eta_hat0);
    }
    if state.iter().any(|v| !v.is_finite()) {
        return Err(Error::InputDomain("initial conditions must be finite".into()));
    }

    let delta_bar = scenario.plant.delta_bar();
    let mut max_delta_norm: f64 = 0.0;
    let mut records = Vec::with_capacity(steps / cfg.record_stride + 2);
    records.push(sys.record(cfg.t0, &state)?);
    for k in 0..steps {
        let t = cfg.t0 + k as f64 * cfg.h;
        let delta_norm = scenario.plant.delta(t).norm();
        max_delta_norm = max_delta_norm.max(delta_norm);
        if delta_norm > delta_bar * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::Scenario(format!(
                "measurement error norm {delta_norm} at t = {t} exceeds declared bound {delta_bar}"
            )));
        }
        let t_next = cfg.t0 + (k + 1) as f64 * cfg.h;
        let next = match rk4_step(|tt, s| sys.rhs(tt, s), t, &state, cfg.h) {
            Ok(next) if next.iter().all(|v| v.is_finite()) => next,
            Ok(_) | Err(Error::Divergence { .. }) => {
                let last_record = sys.record(t, &state).ok().map(Box::new);
                return Err(Error::Divergence { t: t_next, last_record });
            }
            Err(e) => return Err(e),
        };
        state = next;
        if (k + 1) % cfg.record_stride == 0 || k + 1 == steps {
            records.push(sys.record(t_next, &state)?);
        }
    }
    let summary = run_summary(&records, design.active_radius())?;
    Ok(SimOutput {
        records,
        summary,
        max_delta_norm,
    })
}
