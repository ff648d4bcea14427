use std::f64::consts::PI;

use cts::assembly::TangentForm;
use cts::dynamics::{self, DynamicsOptions};
use cts::io;
use cts::linear;
use cts::materials::MaterialLaw;
use cts::model::{BoundarySpec, Element, Member, StructureModel, StructureState};
use cts::scenarios::{self, TBarSupport};
use cts::schedule::{ActuationSchedule, IndexedTrajectory, Trajectory};
use nalgebra::{DVector, Vector3};

/// One bar along x; node 1 pinned, node 2 free only along x.
fn axial(modulus: f64, stretch: f64) -> StructureModel {
    StructureModel {
        nodes: DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0 + stretch, 0.0, 0.0]),
        members: vec![Member::bar(0, 1)],
        elements: vec![Element {
            members: vec![0],
            area: 1e-4,
            material: 0,
            density: 7870.0,
            rest_length: 1.0,
            damping: None,
        }],
        materials: vec![MaterialLaw::linear("m", modulus)],
        boundary: BoundarySpec::from_fixed(6, [0, 1, 2, 4, 5]).unwrap(),
        gravity: Vector3::zeros(),
    }
}

fn axial_omega(modulus: f64) -> f64 {
    // M_aa = m/3, K = EA/l_0
    let m = 7870.0 * 1e-4;
    (modulus * 1e-4 / (m / 3.0)).sqrt()
}

fn run(
    model: &StructureModel,
    state: &StructureState,
    options: DynamicsOptions,
) -> dynamics::TimeHistory {
    dynamics::integrate(model, state, &ActuationSchedule::new(), &options).unwrap()
}

#[test]
fn one_dof_period_matches_harmonic_oracle() {
    let e = 2.06e11;
    let model = axial(e, 1e-5);
    let period = 2.0 * PI / axial_omega(e);
    let dt = period / 1000.0;
    let h = run(
        &model,
        &StructureState::reference(&model),
        DynamicsOptions {
            dt,
            t_end: 5.2 * period,
            ..Default::default()
        },
    );
    let x: Vec<f64> = h.samples.iter().map(|s| s.n[3] - 1.0).collect();
    let t = h.times();
    // downward zero crossings, linearly interpolated
    let crossings: Vec<f64> = (1..x.len())
        .filter(|&k| x[k - 1] > 0.0 && x[k] <= 0.0)
        .map(|k| t[k - 1] + dt * x[k - 1] / (x[k - 1] - x[k]))
        .collect();
    assert!(crossings.len() >= 5);
    let measured = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    assert!(
        (measured - period).abs() < 1e-3 * period,
        "{measured} vs {period}"
    );
}

fn energy_drift_per_period(dt: f64) -> f64 {
    // soft enough that ω·dt = 0.2 at dt = 1e-4
    let omega = 2000.0;
    let e = omega * omega * 7870.0 / 3.0;
    let model = axial(e, 1e-3);
    let period = 2.0 * PI / omega;
    let steps = (10.0 * period / dt).round();
    let h = run(
        &model,
        &StructureState::reference(&model),
        DynamicsOptions {
            dt,
            t_end: steps * dt,
            stride: 1_000_000,
            ..Default::default()
        },
    );
    let e0 = h.samples[0].energy.total();
    let e1 = h.last().unwrap().energy.total();
    (e1 - e0).abs() / e0 / (steps * dt / period)
}

#[test]
fn energy_drift_is_small_and_fourth_order() {
    let d = [1e-4, 5e-5, 2.5e-5].map(energy_drift_per_period);
    assert!(d[0] <= 1e-4, "{d:?}");
    assert!(d[0] / d[1] >= 12.0 && d[1] / d[2] >= 12.0, "{d:?}");
}

/// Pinned T-bar with an initial velocity along its lowest mode.
fn tbar_in_motion(amplitude: f64) -> (StructureModel, StructureState, f64) {
    let s = scenarios::tbar(TBarSupport::Pinned).unwrap();
    let modal = linear::modal(
        &s.model,
        &s.state,
        TangentForm::Consistent,
        linear::DEFAULT_RIGID_THRESHOLD,
    )
    .unwrap();
    let omega = modal.omega[0];
    let shape = modal.shapes.column(0);
    let scale = amplitude * omega / shape.amax();
    let mut state = s.state.clone();
    for (k, &i) in s.model.boundary.free().iter().enumerate() {
        state.velocity[i] = scale * shape[k];
    }
    (s.model, state, 2.0 * PI / omega)
}

#[test]
fn tbar_free_vibration_conserves_energy_over_one_period() {
    let (model, state, period) = tbar_in_motion(0.05);
    let dt = 1e-4;
    let h = run(
        &model,
        &state,
        DynamicsOptions {
            dt,
            t_end: (period / dt).round() * dt,
            stride: 100,
            ..Default::default()
        },
    );
    let e0 = h.samples[0].energy.total();
    let worst = h
        .samples
        .iter()
        .map(|s| (s.energy.total() - e0).abs() / e0)
        .fold(0.0, f64::max);
    assert!(worst <= 1e-4, "{worst}");
}

#[test]
fn damped_energy_never_increases() {
    let (model, state, _) = tbar_in_motion(0.05);
    let h = run(
        &model,
        &state,
        DynamicsOptions {
            dt: 1e-4,
            t_end: 0.5,
            stride: 10,
            damping_scale: 0.01,
            ..Default::default()
        },
    );
    let e: Vec<f64> = h.samples.iter().map(|s| s.energy.total()).collect();
    for w in e.windows(2) {
        assert!(w[1] <= w[0] + 1e-12 * w[0].abs(), "{} -> {}", w[0], w[1]);
    }
    assert!(e.last().unwrap() < &e[0]);
}

#[test]
fn equilibrium_is_stationary() {
    let s = scenarios::tbar(TBarSupport::Pinned).unwrap();
    let h = run(
        &s.model,
        &s.state,
        DynamicsOptions {
            dt: 1e-4,
            t_end: 1.0,
            stride: 1000,
            ..Default::default()
        },
    );
    assert_eq!(h.samples.len(), 11);
    for sample in &h.samples {
        assert!((&sample.n - &s.model.nodes).amax() < 1e-8);
    }
}

#[test]
fn free_fall_of_unconstrained_member() {
    let mut model = axial(2.06e11, 0.0);
    model.boundary = BoundarySpec::unconstrained(6);
    model.gravity = Vector3::new(1.0, -2.0, -9.8);
    let a = dynamics::accelerations(
        &model,
        &StructureState::reference(&model),
        &ActuationSchedule::new(),
        0.0,
        0.0,
    )
    .unwrap();
    for i in 0..6 {
        assert!((a[i] - model.gravity[i % 3]).abs() < 1e-12);
    }
}

#[test]
fn constrained_coordinates_follow_prescribed_motion() {
    let s = scenarios::tbar(TBarSupport::Pinned).unwrap();
    let trajectory = Trajectory::new(vec![0.0, 0.02, 0.05], vec![-2.0, -1.995, -1.99]).unwrap();
    let mut schedule = ActuationSchedule::new();
    schedule.boundary.push(IndexedTrajectory {
        index: 4,
        trajectory: trajectory.clone(),
    });
    let h = dynamics::integrate(
        &s.model,
        &s.state,
        &schedule,
        &DynamicsOptions {
            dt: 1e-4,
            t_end: 0.08,
            stride: 7,
            ..Default::default()
        },
    )
    .unwrap();
    for sample in &h.samples {
        assert_eq!(sample.n[4], trajectory.value(sample.t));
        assert_eq!(sample.velocity[4], trajectory.rate(sample.t));
        assert_eq!(sample.n[3], 0.0);
    }
    // the frame follows the support upwards
    assert!(h.last().unwrap().n[10] > 2.0 + 0.005);
}

#[test]
fn sample_count_follows_stride() {
    let model = axial(2.06e11, 1e-6);
    let h = run(
        &model,
        &StructureState::reference(&model),
        DynamicsOptions {
            dt: 1e-4,
            t_end: 0.1,
            stride: 10,
            skip_stability_check: true,
            ..Default::default()
        },
    );
    assert_eq!(h.samples.len(), 1000 / 10 + 1);
    let h = run(
        &model,
        &StructureState::reference(&model),
        DynamicsOptions {
            dt: 1e-4,
            t_end: 0.1,
            stride: 300,
            skip_stability_check: true,
            ..Default::default()
        },
    );
    // 0, 300, 600, 900 and the final step
    assert_eq!(h.samples.len(), 5);
    assert!((h.last().unwrap().t - 0.1).abs() < 1e-15);
}

#[test]
fn identity_clustering_round_trip_gives_identical_trajectory() {
    let s = scenarios::tbar(TBarSupport::Pinned).unwrap();
    let tts = s.model.unclustered(&s.model.nodes).unwrap();
    let copy = io::parse_structure(&io::write_structure(&tts).unwrap()).unwrap();
    let options = DynamicsOptions {
        dt: 1e-4,
        t_end: 0.02,
        stride: 10,
        ..Default::default()
    };
    let schedule = scenarios::tbar_schedule(&tts.rest_lengths(), 0.0, 1.0).unwrap();
    let a =
        dynamics::integrate(&tts, &StructureState::reference(&tts), &schedule, &options).unwrap();
    let b = dynamics::integrate(
        &copy,
        &StructureState::reference(&copy),
        &schedule,
        &options,
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn linear_string_strain_energy_closed_form() {
    let model = StructureModel {
        members: vec![Member::string(0, 1)],
        materials: vec![MaterialLaw::linear("c", 7.6e10)],
        ..axial(7.6e10, 0.0)
    };
    let mut state = StructureState::reference(&model);
    let e0 = dynamics::energy_audit(&model, &state).unwrap();
    assert_eq!(e0.total(), 0.0);
    state.n[3] = 1.001;
    let e = dynamics::energy_audit(&model, &state).unwrap();
    let expected = 7.6e10 * 1e-4 * 0.001f64.powi(2) / 2.0;
    assert!((e.strain - expected).abs() < 1e-9 * expected);
    state.n[3] = 0.999;
    assert_eq!(dynamics::energy_audit(&model, &state).unwrap().strain, 0.0);
}
