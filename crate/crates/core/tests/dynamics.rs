use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use proptest::prelude::*;
use rkhs_observer::dynamics::*;
use rkhs_observer::Error;

fn translational(f: MatchedUncertainty) -> PlantModel {
    translational_plant(4.0, f, Signal::zero(6), Signal::zero(3), 0.0).unwrap()
}

fn inertia() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(0.2, 15.0, 15.0))
}

fn body(f: MatchedUncertainty) -> RigidBodyRotational {
    RigidBodyRotational::new(inertia(), f, Signal::zero(3), Signal::zero(3), 0.0).unwrap()
}

#[test]
fn translational_rhs_at_rest() {
    let plant = translational(MatchedUncertainty::TrigVelocityForce);
    let x = DVector::zeros(6);
    let u = DVector::zeros(3);
    let dx = plant.plant_rhs(&x, &u, 0.0).unwrap();
    // f(0) = [1, 0, 1], scaled by 1/m.
    let expected = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.25, 0.0, 0.25]);
    assert!((dx - expected).norm() < 1e-15);
}

#[test]
fn translational_rhs_moves_position_with_velocity() {
    let plant = translational(MatchedUncertainty::Zero);
    let x = DVector::from_vec(vec![5.0, -1.0, 2.0, 0.3, -0.7, 1.1]);
    let u = DVector::from_vec(vec![4.0, 8.0, -2.0]);
    let dx = plant.plant_rhs(&x, &u, 1.3).unwrap();
    let expected = DVector::from_vec(vec![0.3, -0.7, 1.1, 1.0, 2.0, -0.5]);
    assert!((dx - expected).norm() < 1e-15);
}

#[test]
fn plant_rejects_wrong_input_lengths() {
    let plant = translational(MatchedUncertainty::Zero);
    let err = plant.plant_rhs(&DVector::zeros(5), &DVector::zeros(3), 0.0).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch { .. }));
    let err = plant.plant_rhs(&DVector::zeros(6), &DVector::zeros(2), 0.0).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch { .. }));
}

#[test]
fn nonpositive_mass_rejected() {
    for mass in [0.0, -1.0, f64::NAN] {
        let err = translational_plant(mass, MatchedUncertainty::Zero, Signal::zero(6), Signal::zero(3), 0.0).unwrap_err();
        assert!(matches!(err, Error::InputDomain(_)));
    }
}

#[test]
fn indefinite_inertia_rejected() {
    let bad = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
    assert!(RigidBodyRotational::new(bad, MatchedUncertainty::Zero, Signal::zero(3), Signal::zero(3), 0.0).is_err());
}

#[test]
fn torque_free_principal_spin_is_steady() {
    let b = body(MatchedUncertainty::Zero);
    let eta = Vector3::zeros();
    let omega = Vector3::new(0.0, 0.0, 0.7);
    let (eta_dot, omega_dot) = b.rotational_rhs(&eta, &omega, &Vector3::zeros(), 0.0).unwrap();
    assert!(omega_dot.norm() < 1e-15);
    assert!((eta_dot - Vector3::new(0.0, 0.0, 0.7)).norm() < 1e-15);
}

#[test]
fn yaw_only_rotation_advances_heading_linearly() {
    // With roll = pitch = 0 and omega = [0, 0, w], psi' = w exactly.
    let b = body(MatchedUncertainty::Zero);
    let w = 0.3;
    let h = 0.01;
    let mut eta = Vector3::zeros();
    let omega = Vector3::new(0.0, 0.0, w);
    for _ in 0..500 {
        let (eta_dot, _) = b.rotational_rhs(&eta, &omega, &Vector3::zeros(), 0.0).unwrap();
        eta += eta_dot * h;
    }
    assert!((eta[2] - w * 5.0).abs() < 1e-12);
    assert!(eta[0].abs() < 1e-15 && eta[1].abs() < 1e-15);
}

#[test]
fn kinetic_energy_rate_equals_power_of_applied_torque() {
    // d/dt (omega^T I omega / 2) = omega^T (u + f): the gyroscopic term does no work.
    let b = body(MatchedUncertainty::QuadraticDrag { coefficient: 0.001 });
    let omega = Vector3::new(0.4, -0.2, 0.9);
    let u = Vector3::new(0.1, 0.5, -0.3);
    let eta = Vector3::new(0.1, 0.2, 0.3);
    let (_, omega_dot) = b.rotational_rhs(&eta, &omega, &u, 0.0).unwrap();
    let energy = |w: &Vector3<f64>| 0.5 * w.dot(&(inertia() * w));
    let h = 1e-6;
    let fd = (energy(&(omega + omega_dot * h)) - energy(&(omega - omega_dot * h))) / (2.0 * h);
    let f = -0.001 * omega.norm() * omega;
    let power = omega.dot(&(u + f));
    assert!((fd - power).abs() < 1e-9, "{fd} vs {power}");
}

#[test]
fn kinematics_matrix_identity_at_level_attitude() {
    let j = euler_kinematics_matrix(&Vector3::zeros()).unwrap();
    assert!((j - Matrix3::identity()).norm() < 1e-15);
}

#[test]
fn kinematics_singularity_reported() {
    let err = euler_kinematics_matrix(&Vector3::new(0.0, PITCH_LIMIT + 1e-6, 0.0)).unwrap_err();
    assert!(matches!(err, Error::KinematicSingularity { .. }));
    let b = body(MatchedUncertainty::Zero);
    let err = b
        .rotational_rhs(&Vector3::new(0.0, -PITCH_LIMIT - 1e-4, 0.0), &Vector3::zeros(), &Vector3::zeros(), 2.5)
        .unwrap_err();
    match err {
        Error::KinematicSingularity { t, .. } => assert_eq!(t, 2.5),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn measurement_errors_respect_their_bounds() {
    let cases = [
        (translational_measurement_error(), translational_delta_bar()),
        (rotational_measurement_error(), rotational_delta_bar()),
    ];
    for (signal, bound) in cases {
        let mut worst: f64 = 0.0;
        for k in 0..200_000 {
            let t = k as f64 * 1e-3;
            worst = worst.max(signal.eval(t).norm());
        }
        assert!(worst <= bound + 1e-15, "{worst} > {bound}");
        // The bound is tight.
        assert!(worst > 0.999 * bound);
    }
}

#[test]
fn measurement_error_examples() {
    let d = translational_measurement_error().eval(0.0);
    assert!((d - DVector::from_element(3, 0.008)).norm() < 1e-15);
    let d = rotational_measurement_error().eval(core::f64::consts::PI / 10.0);
    assert!((d - DVector::from_element(3, 0.05)).norm() < 1e-15);
}

#[test]
fn controller_is_feedforward_on_reference() {
    let ctrl = Controller::translational(4.0).unwrap();
    for t in [0.0, 0.7, 3.1] {
        let (xr, xr_dot) = translational_reference(t);
        let u = ctrl.control(t, &xr, 3);
        // B^+ = [0 m I]: u = m * v_r'.
        let expected = DVector::from_vec(vec![4.0 * xr_dot[3], 4.0 * xr_dot[4], 4.0 * xr_dot[5]]);
        assert!((u - expected).norm() < 1e-13);
    }
}

#[test]
fn translational_controller_example() {
    let ctrl = Controller::translational(4.0).unwrap();
    let x = DVector::zeros(6);
    let u = ctrl.control(0.0, &x, 3);
    // x_r(0) = [0,1,0,1,0,2], x_r'(0) = [1,0,2,0,-1,0]:
    // u = K x_r(0) + 4 v_r'(0) = [1, 1, 2] + [0, -4, 0].
    let expected = DVector::from_vec(vec![1.0, -3.0, 2.0]);
    assert!((u.clone() - expected).norm() < 1e-14, "{u}");
}

#[test]
fn rotational_controller_examples() {
    let (wr, wr_dot) = rotational_reference(0.0);
    assert!((wr - Vector3::new(0.1, 0.0, 0.0)).norm() < 1e-16);
    assert!((wr_dot - Vector3::new(0.0, 0.01, 0.01)).norm() < 1e-16);
    let u = rotational_controller(0.0, &Vector3::zeros(), 10.0);
    assert!((u - Vector3::new(1.0, 0.01, 0.01)).norm() < 1e-15);
    let ctrl = Controller::RotationalTracking { gain: 10.0 };
    let u = ctrl.control(0.0, &DVector::from_vec(vec![0.1, 0.0, 0.0]), 3);
    assert!((u - DVector::from_vec(vec![0.0, 0.01, 0.01])).norm() < 1e-15);
}

#[test]
fn reference_derivatives_match_finite_differences() {
    let h = 1e-6;
    for t in [0.3, 1.7, 4.2] {
        let (_, d) = translational_reference(t);
        let fd = (translational_reference(t + h).0 - translational_reference(t - h).0) / (2.0 * h);
        assert!((d - fd).norm() < 1e-8);
        let (_, d) = rotational_reference(t);
        let fd = (rotational_reference(t + h).0 - rotational_reference(t - h).0) / (2.0 * h);
        assert!((d - fd).norm() < 1e-10);
    }
}

#[test]
fn rotational_linear_form() {
    let b = body(MatchedUncertainty::Zero);
    let (a, bm, c) = b.linear_form();
    assert_eq!(a, DMatrix::zeros(3, 3));
    assert_eq!(c, DMatrix::identity(3, 3));
    let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 1.0 / 15.0, 1.0 / 15.0]));
    assert!((bm - expected).norm() < 1e-15);
}

proptest! {
    #[test]
    fn plant_is_affine_in_control(
        x in prop::collection::vec(-2.0..2.0f64, 6),
        u1 in prop::collection::vec(-2.0..2.0f64, 3),
        u2 in prop::collection::vec(-2.0..2.0f64, 3),
        s in -3.0..3.0f64,
        t in 0.0..10.0f64,
    ) {
        let plant = translational_plant(
            4.0,
            MatchedUncertainty::TrigVelocityForce,
            Signal::zero(6),
            translational_measurement_error(),
            translational_delta_bar(),
        ).unwrap();
        let x = DVector::from_vec(x);
        let u1 = DVector::from_vec(u1);
        let u2 = DVector::from_vec(u2);
        let f = |u: &DVector<f64>| plant.plant_rhs(&x, u, t).unwrap();
        let lhs = f(&(&u1 * s + &u2 * (1.0 - s)));
        let rhs = f(&u1) * s + f(&u2) * (1.0 - s);
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn kinematics_determinant_is_secant_pitch(
        phi in -6.0..6.0f64,
        theta in -1.5..1.5f64,
        psi in -6.0..6.0f64,
    ) {
        let j = euler_kinematics_matrix(&Vector3::new(phi, theta, psi)).unwrap();
        let expected = 1.0 / theta.cos();
        prop_assert!((j.determinant() - expected).abs() <= 1e-10 * expected.abs());
    }

    #[test]
    fn wrapped_angles_stay_in_range(phi in -50.0..50.0f64, psi in -50.0..50.0f64) {
        let w = wrap_attitude(&Vector3::new(phi, 0.2, psi));
        let tau = 2.0 * core::f64::consts::PI;
        prop_assert!(w[0] >= 0.0 && w[0] < tau);
        prop_assert!(w[2] >= 0.0 && w[2] < tau);
        prop_assert!((w[0] - phi).rem_euclid(tau).min(tau - (w[0] - phi).rem_euclid(tau)) < 1e-9);
    }
}
