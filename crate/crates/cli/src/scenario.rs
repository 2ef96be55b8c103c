//! Turn a [`ScenarioFile`] into a validated plant, observer design and simulation config.

use std::sync::Arc;

use rkhs_observer::dynamics::{
    rotational_measurement_error, rotational_reference, translational_measurement_error,
    translational_plant, translational_reference, Controller, MatchedUncertainty, PlantModel,
    RigidBodyRotational, Signal, SignalTerm, Waveform,
};
use rkhs_observer::kernel::{lattice_centers, project_into_span, ProjectionReport, SupPower};
use rkhs_observer::nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rkhs_observer::observer::{self, AdaptationGate, DeadZone, ObserverDesign, ObserverParams};
use rkhs_observer::sim::{Plant, Scenario, SimConfig};
use rkhs_observer::{linalg, CenterSet, JitterPolicy, KernelModel, ProbeBox};

use crate::config::{
    ControllerSpec, GateName, KernelName, PlantFamily, ScenarioFile, SignalSpec, TermSpec,
    UncertaintySpec, WaveformName,
};
use crate::CliError;

/// Everything derived from a scenario file.
#[derive(Debug, Clone)]
pub struct BuiltScenario {
    /// The input file with every default filled in.
    pub effective: ScenarioFile,
    pub scenario: Scenario,
    pub design: ObserverDesign,
    pub sim: SimConfig,
    pub domain: ProbeBox,
    pub sup_power: SupPower,
    /// Fit of the uncertainty onto the kernel span; `None` when the
    /// uncertainty is given directly as kernel coefficients.
    pub projection: Option<ProjectionReport>,
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(CliError::Config(format!("matrix `{name}` is empty")));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::Config(format!("matrix `{name}` has ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn vector(name: &str, values: &[f64], len: usize) -> Result<DVector<f64>, CliError> {
    if values.len() != len {
        return Err(CliError::Config(format!(
            "`{name}` has {} entries, expected {len}",
            values.len()
        )));
    }
    Ok(DVector::from_column_slice(values))
}

fn term(spec: &TermSpec) -> SignalTerm {
    SignalTerm {
        waveform: match spec.waveform {
            WaveformName::Sin => Waveform::Sin,
            WaveformName::Cos => Waveform::Cos,
            WaveformName::Tanh => Waveform::Tanh,
        },
        amplitude: spec.amplitude,
        frequency: spec.frequency,
        phase: spec.phase,
    }
}

fn signal(name: &str, spec: &SignalSpec, dim: usize) -> Result<Signal, CliError> {
    let s = match spec {
        SignalSpec::Zero => Signal::zero(dim),
        SignalSpec::Translational => translational_measurement_error(),
        SignalSpec::Rotational => rotational_measurement_error(),
        SignalSpec::Broadcast { terms } => Signal::broadcast(&terms.iter().map(term).collect::<Vec<_>>(), dim),
        SignalSpec::PerChannel { channels } => {
            Signal::per_channel(channels.iter().map(|c| c.iter().map(term).collect()).collect())
        }
    };
    if s.dim() != dim {
        return Err(CliError::Config(format!("`{name}` has {} channels, expected {dim}", s.dim())));
    }
    Ok(s)
}

/// Build the kernel and its center lattice from the `[kernel]` and `[centers]` sections.
pub fn build_centers(file: &ScenarioFile, output_dim: usize) -> Result<(Arc<CenterSet>, ProbeBox), CliError> {
    let k = &file.kernel;
    let kernel = match k.family {
        KernelName::SobolevMatern => {
            let order = k.order.ok_or_else(|| CliError::Config("kernel.order is required for sobolev_matern".into()))?;
            let dimension = k
                .dimension
                .ok_or_else(|| CliError::Config("kernel.dimension is required for sobolev_matern".into()))?;
            KernelModel::sobolev_matern(order, dimension, k.length_scale, output_dim)?
        }
        KernelName::Gaussian => KernelModel::gaussian(k.length_scale, output_dim)?,
    };
    let c = &file.centers;
    if c.lower.len() != output_dim || c.upper.len() != output_dim {
        return Err(CliError::Config(format!(
            "centers.lower/upper must have {output_dim} entries (the output dimension)"
        )));
    }
    let domain = ProbeBox::new(c.lower.clone(), c.upper.clone())?;
    let points = lattice_centers(&domain, c.points_per_axis)?;
    let policy = JitterPolicy {
        initial: c.jitter_initial,
        max: c.jitter_max,
        ..JitterPolicy::default()
    };
    let set = CenterSet::assemble_with(kernel, points, policy)?;
    Ok((Arc::new(set), domain))
}

fn uncertainty(
    spec: &UncertaintySpec,
    centers: &Arc<CenterSet>,
    m: usize,
) -> Result<MatchedUncertainty, CliError> {
    Ok(match spec {
        UncertaintySpec::Zero => MatchedUncertainty::Zero,
        UncertaintySpec::Constant { value } => MatchedUncertainty::Constant(vector("uncertainty.value", value, m)?),
        UncertaintySpec::TrigVelocityForce => {
            if m != 3 {
                return Err(CliError::Config("trig_velocity_force needs a 3-dimensional output".into()));
            }
            MatchedUncertainty::TrigVelocityForce
        }
        UncertaintySpec::QuadraticDrag { coefficient } => MatchedUncertainty::QuadraticDrag {
            coefficient: *coefficient,
        },
        UncertaintySpec::Kernel { coefficients } => {
            let alpha = vector("uncertainty.coefficients", coefficients, centers.coeff_dim())?;
            MatchedUncertainty::Kernel(rkhs_observer::RkhsElement::new(Arc::clone(centers), alpha)?)
        }
    })
}

pub fn build(file: &ScenarioFile) -> Result<BuiltScenario, CliError> {
    let mut effective = file.clone();
    let p = &file.plant;
    if !(p.noise_scale.is_finite() && p.noise_scale >= 0.0) {
        return Err(CliError::Config("plant.noise_scale must be >= 0".into()));
    }
    let delta_bar = p.delta_bar * p.noise_scale;

    let (a, b, c, m) = match p.family {
        PlantFamily::GenericLinear => {
            let need = |name: &str, v: &Option<Vec<Vec<f64>>>| {
                v.as_deref()
                    .ok_or_else(|| CliError::Config(format!("plant.{name} is required for generic_linear")))
                    .and_then(|rows| matrix(&format!("plant.{name}"), rows))
            };
            let b = need("b", &p.b)?;
            let m = b.ncols();
            (Some(need("a", &p.a)?), Some(b), Some(need("c", &p.c)?), m)
        }
        _ => (None, None, None, 3),
    };
    let (centers, domain) = build_centers(file, m)?;
    let f_true = uncertainty(&p.uncertainty, &centers, m)?;
    let delta = signal("plant.measurement_error", &p.measurement_error, m)?.scaled(p.noise_scale);

    let (plant, obs_a, obs_b, obs_c, n) = match p.family {
        PlantFamily::GenericLinear => {
            let (a, b, c) = (a.unwrap(), b.unwrap(), c.unwrap());
            let n = a.nrows();
            let xi = signal("plant.disturbance", &p.disturbance, n)?;
            let model = PlantModel::new(a.clone(), b.clone(), c.clone(), f_true, xi, delta, delta_bar)?;
            (Plant::Linear(model), a, b, c, n)
        }
        PlantFamily::RigidTranslational => {
            let mass = p.mass.ok_or_else(|| CliError::Config("plant.mass is required for rigid_translational".into()))?;
            let xi = signal("plant.disturbance", &p.disturbance, 6)?;
            let model = translational_plant(mass, f_true, xi, delta, delta_bar)?;
            let (a, b, c) = (model.a.clone(), model.b.clone(), model.c.clone());
            (Plant::Linear(model), a, b, c, 6)
        }
        PlantFamily::RigidRotational => {
            let rows = p
                .inertia
                .as_deref()
                .ok_or_else(|| CliError::Config("plant.inertia is required for rigid_rotational".into()))?;
            let inertia = matrix("plant.inertia", rows)?;
            if inertia.shape() != (3, 3) {
                return Err(CliError::Config("plant.inertia must be 3x3".into()));
            }
            let inertia = Matrix3::from_fn(|i, j| inertia[(i, j)]);
            let xi = signal("plant.disturbance", &p.disturbance, 3)?;
            let body = RigidBodyRotational::new(inertia, f_true, xi, delta, delta_bar)?;
            let (a, b, c) = body.linear_form();
            (Plant::Rotational(body), a, b, c, 3)
        }
    };

    let controller = match &p.controller {
        ControllerSpec::Zero => Controller::Zero,
        ControllerSpec::Constant { value } => Controller::Constant(vector("controller.value", value, m)?),
        ControllerSpec::TranslationalTracking => {
            if p.family != PlantFamily::RigidTranslational {
                return Err(CliError::Config("translational_tracking needs a rigid_translational plant".into()));
            }
            Controller::translational(p.mass.unwrap_or(1.0))?
        }
        ControllerSpec::RotationalTracking { gain } => {
            if p.family != PlantFamily::RigidRotational {
                return Err(CliError::Config("rotational_tracking needs a rigid_rotational plant".into()));
            }
            Controller::RotationalTracking { gain: *gain }
        }
    };

    let o = &file.observer;
    let gate = match o.gate {
        GateName::SmoothDeadzone => AdaptationGate::SmoothDeadZone,
        GateName::Step => AdaptationGate::Step {
            radius: o
                .step_radius
                .ok_or_else(|| CliError::Config("observer.step_radius is required for the step gate".into()))?,
        },
    };
    let params = ObserverParams {
        a: obs_a,
        b: obs_b,
        c: obs_c,
        l: matrix("observer.l", &o.l)?,
        gamma: matrix("observer.gamma", &o.gamma)?,
        w: matrix("observer.w", &o.w)?,
        lure_epsilon: o.lure_epsilon,
        spr_tolerance: o.spr_tolerance,
        deadzone: DeadZone {
            width: file.deadzone.width,
            buffer: file.deadzone.buffer,
        },
        gate,
        delta_bar,
    };
    let design = if o.allow_uncertified {
        ObserverDesign::new_uncertified(params, Arc::clone(&centers))?
    } else {
        ObserverDesign::new(params, Arc::clone(&centers))?
    };

    let sup_power = centers.sup_power_function(&domain, file.centers.probe_points_per_axis)?;

    // Reference coefficients for the Lyapunov diagnostic and the d_N residual estimate.
    let (alpha_star, projection) = match (&p.uncertainty, &plant) {
        (UncertaintySpec::Kernel { coefficients }, Plant::Linear(_)) => (DVector::from_column_slice(coefficients), None),
        _ => {
            let samples = domain.grid(file.centers.projection_points_per_axis);
            let policy = JitterPolicy {
                initial: file.centers.jitter_initial,
                max: file.centers.jitter_max,
                ..JitterPolicy::default()
            };
            let (element, report) = match &plant {
                Plant::Linear(model) => project_into_span(
                    &centers,
                    |y| model.f_true.eval(y).unwrap_or_else(|_| DVector::from_element(m, f64::NAN)),
                    &samples,
                    policy,
                )?,
                // The observer sees the Coriolis term as part of the matched uncertainty.
                Plant::Rotational(body) => project_into_span(
                    &centers,
                    |y| {
                        let w = Vector3::new(y[0], y[1], y[2]);
                        let f = body.f_true.eval(y).unwrap_or_else(|_| DVector::from_element(3, f64::NAN));
                        let coriolis = w.cross(&(body.inertia * w));
                        DVector::from_fn(3, |i, _| f[i] - coriolis[i])
                    },
                    &samples,
                    policy,
                )?,
            };
            (element.coeffs().clone(), Some(report))
        }
    };

    let s = &file.sim;
    let t0 = s.t0;
    let x0 = match (&s.x0, p.family) {
        (Some(v), _) => vector("sim.x0", v, n)?,
        (None, PlantFamily::RigidTranslational) => translational_reference(t0).0,
        (None, PlantFamily::RigidRotational) => DVector::from_column_slice(rotational_reference(t0).0.as_slice()),
        (None, PlantFamily::GenericLinear) => {
            return Err(CliError::Config("sim.x0 is required for generic_linear".into()));
        }
    };
    let x_hat0 = match &s.x_hat0 {
        Some(v) => vector("sim.x_hat0", v, n)?,
        None => DVector::zeros(n),
    };
    let alpha0 = match &s.alpha0 {
        Some(v) => vector("sim.alpha0", v, centers.coeff_dim())?,
        None => DVector::zeros(centers.coeff_dim()),
    };
    let (eta0, eta_hat0) = if p.family == PlantFamily::RigidRotational {
        let eta0 = match &s.eta0 {
            Some(v) => Vector3::from_column_slice(vector("sim.eta0", v, 3)?.as_slice()),
            None => Vector3::zeros(),
        };
        let eta_hat0 = match &s.eta_hat0 {
            Some(v) => Vector3::from_column_slice(vector("sim.eta_hat0", v, 3)?.as_slice()),
            None => eta0,
        };
        (Some(eta0), Some(eta_hat0))
    } else {
        if s.eta0.is_some() || s.eta_hat0.is_some() {
            return Err(CliError::Config("sim.eta0/eta_hat0 only apply to rigid_rotational".into()));
        }
        (None, None)
    };
    let sim = SimConfig {
        t0,
        t_final: s.t_final,
        h: s.h,
        record_stride: s.record_stride,
        x0: x0.clone(),
        x_hat0: x_hat0.clone(),
        alpha0: Some(alpha0.clone()),
        eta0,
        eta_hat0,
    };
    sim.steps()?;

    effective.sim.x0 = Some(x0.iter().copied().collect());
    effective.sim.x_hat0 = Some(x_hat0.iter().copied().collect());
    effective.sim.alpha0 = Some(alpha0.iter().copied().collect());
    effective.sim.eta0 = eta0.map(|v| v.iter().copied().collect());
    effective.sim.eta_hat0 = eta_hat0.map(|v| v.iter().copied().collect());

    Ok(BuiltScenario {
        effective,
        scenario: Scenario {
            plant,
            controller,
            alpha_star: Some(alpha_star),
        },
        design,
        sim,
        domain,
        sup_power,
        projection,
    })
}

/// Design-stage quantities printed by `design-report` and echoed in run summaries.
#[derive(Debug, Clone)]
pub struct DesignReport {
    pub centers: usize,
    pub coeff_dim: usize,
    pub grammian_condition: f64,
    pub grammian_jitter: f64,
    pub error_dynamics_eigenvalues: Vec<(f64, f64)>,
    pub certified: bool,
    /// Why the Lur'e design failed, when it did.
    pub lure_error: Option<String>,
    pub lyapunov_residual: Option<f64>,
    pub pb_ct_residual: Option<f64>,
    pub lambda_min_p: Option<f64>,
    pub lambda_min_wtw_eps_p: Option<f64>,
    pub norm_pl: Option<f64>,
    pub norm_c: f64,
    pub sup_power: f64,
    pub projection_max_error: Option<f64>,
    pub residual_norm_estimate: f64,
    pub delta_bar: f64,
    pub e0: Option<f64>,
    pub d_n: Option<f64>,
    pub deadzone_width: f64,
    pub deadzone_buffer: f64,
    pub warnings: Vec<String>,
}

pub fn design_report(built: &BuiltScenario) -> Result<DesignReport, CliError> {
    let design = &built.design;
    let centers = design.centers();
    let sup = built.sup_power.value;
    let projection_max_error = built.projection.as_ref().map(|p| p.max_error);
    let residual_norm_estimate = match projection_max_error {
        Some(err) if sup > 0.0 => err / sup,
        _ => 0.0,
    };
    let mut warnings = Vec::new();
    let (lure_error, lyapunov_residual, pb_ct_residual, lambda_min_p, lambda_min_wtw_eps_p, norm_pl, e0, d_n) =
        match design.lure() {
            Ok(lure) => {
                let wtw_eps_p = lure.w.transpose() * &lure.w + &lure.p * lure.epsilon;
                let e0 = observer::compute_e0(design)?;
                let d_n = observer::compute_min_deadzone(design, sup, residual_norm_estimate)?;
                (
                    None,
                    Some(lure.lyapunov_residual),
                    Some(lure.pb_ct_residual),
                    Some(linalg::lambda_min(&lure.p)?),
                    Some(linalg::lambda_min(&wtw_eps_p)?),
                    Some(linalg::spectral_norm(&(&lure.p * design.l()))),
                    Some(e0),
                    Some(d_n),
                )
            }
            Err(e) => {
                warnings.push(format!("no Lur'e solution: {e}"));
                (Some(e.to_string()), None, None, None, None, None, None, None)
            }
        };
    if !design.is_certified() && lure_error.is_none() {
        warnings.push("P B = C^T does not hold within tolerance; design is not certified".into());
    }
    let width = design.deadzone().width;
    if let Some(d_n) = d_n {
        if width < d_n {
            warnings.push(format!("dead-zone width {width} is below the advisory minimum d_N = {d_n}"));
        }
    }
    if let Some(e0) = e0 {
        if width < e0 {
            warnings.push(format!("dead-zone width {width} is below E0 = {e0}"));
        }
    }
    Ok(DesignReport {
        centers: centers.len(),
        coeff_dim: centers.coeff_dim(),
        grammian_condition: centers.condition_estimate(),
        grammian_jitter: centers.jitter(),
        error_dynamics_eigenvalues: design.error_dynamics_eigenvalues().iter().map(|z| (z.re, z.im)).collect(),
        certified: design.is_certified(),
        lure_error,
        lyapunov_residual,
        pb_ct_residual,
        lambda_min_p,
        lambda_min_wtw_eps_p,
        norm_pl,
        norm_c: linalg::spectral_norm(design.c()),
        sup_power: sup,
        projection_max_error,
        residual_norm_estimate,
        delta_bar: design.delta_bar(),
        e0,
        d_n,
        deadzone_width: width,
        deadzone_buffer: design.deadzone().buffer,
        warnings,
    })
}
