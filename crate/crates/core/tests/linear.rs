use std::f64::consts::PI;

use cts::assembly::{self, TangentForm};
use cts::dynamics::{self, DynamicsOptions};
use cts::linear::{self, DEFAULT_RIGID_THRESHOLD};
use cts::model::{StructureModel, StructureState};
use cts::scenarios::{self, TBarSupport};
use cts::schedule::ActuationSchedule;
use nalgebra::{DMatrix, DVector};

fn modal(model: &StructureModel, state: &StructureState, form: TangentForm) -> linear::ModalResult {
    linear::modal(model, state, form, DEFAULT_RIGID_THRESHOLD).unwrap()
}

#[test]
fn modes_satisfy_the_eigenproblem_and_are_mass_orthonormal() {
    for s in [
        scenarios::tbar(TBarSupport::Pinned).unwrap(),
        scenarios::tbar(TBarSupport::Planar).unwrap(),
        scenarios::tower2().unwrap(),
    ] {
        for form in [TangentForm::Consistent, TangentForm::ForceDensity] {
            let set = assembly::assemble(&s.model, &s.state, form).unwrap();
            let k = set.aa(&set.k_t);
            let m = set.aa(&set.mass);
            let r = modal(&s.model, &s.state, form);
            let phi = &r.shapes;
            let gram = phi.transpose() * &m * phi;
            let n = gram.nrows();
            assert!(
                (&gram - DMatrix::identity(n, n)).amax() < 1e-9,
                "{}",
                s.name
            );
            for j in 0..n {
                let v = phi.column(j);
                let res = &k * v - &m * v * r.eigenvalues[j];
                assert!(
                    res.norm() <= 1e-8 * k.norm() * v.norm(),
                    "{} mode {j}",
                    s.name
                );
            }
            assert!(r.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}

#[test]
fn rigid_translation_leaves_frequencies_unchanged() {
    let s = scenarios::tower2().unwrap();
    let base = modal(&s.model, &s.state, TangentForm::Consistent);
    let mut moved = s.model.clone();
    let mut state = s.state.clone();
    for i in 0..moved.n_nodes() {
        for (axis, d) in [3.0, -7.5, 12.0].into_iter().enumerate() {
            moved.nodes[3 * i + axis] += d;
            state.n[3 * i + axis] += d;
        }
    }
    let shifted = modal(&moved, &state, TangentForm::Consistent);
    for (a, b) in base.omega.iter().zip(&shifted.omega) {
        assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn planar_tbar_has_three_rigid_modes() {
    let s = scenarios::tbar(TBarSupport::Planar).unwrap();
    for form in [TangentForm::Consistent, TangentForm::ForceDensity] {
        let r = modal(&s.model, &s.state, form);
        assert_eq!(r.rigid_count(), 3);
        assert!(r.rigid[..3].iter().all(|&x| x));
    }
    let pinned = scenarios::tbar(TBarSupport::Pinned).unwrap();
    assert_eq!(
        modal(&pinned.model, &pinned.state, TangentForm::Consistent).rigid_count(),
        0
    );
}

#[test]
fn clustering_lowers_the_first_elastic_frequency() {
    let s = scenarios::tbar(TBarSupport::Planar).unwrap();
    let copy = s.model.unclustered(&s.state.n).unwrap();
    let mut state = StructureState::reference(&copy);
    state.n = s.state.n.clone();
    let clustered = modal(&s.model, &s.state, TangentForm::ForceDensity).frequencies_hz();
    let separate = modal(&copy, &state, TangentForm::ForceDensity).frequencies_hz();
    assert!(
        clustered[3] < separate[3],
        "{} vs {}",
        clustered[3],
        separate[3]
    );
}

#[test]
fn linear_response_tracks_nonlinear_response_for_small_perturbations() {
    let s = scenarios::tbar(TBarSupport::Pinned).unwrap();
    let free = s.model.boundary.free().to_vec();
    let n_a = free.len();
    let lin = linear::linearize(&s.model, &s.state, 0.0, TangentForm::Consistent).unwrap();
    let r = modal(&s.model, &s.state, TangentForm::Consistent);
    let period = 2.0 * PI / r.omega[0];

    // every mode excited with the same velocity amplitude
    let dir = DVector::from_fn(n_a, |k, _| 1.0 + 0.3 * k as f64);
    let v0 = &dir * (1e-6 / dir.amax());
    let mut state = s.state.clone();
    for (k, &i) in free.iter().enumerate() {
        state.velocity[i] = v0[k];
    }
    let dt = 1e-4;
    let steps = (period / dt).round() as usize;
    let options = DynamicsOptions {
        dt,
        t_end: steps as f64 * dt,
        stride: 1,
        ..Default::default()
    };
    let nonlinear =
        dynamics::integrate(&s.model, &state, &ActuationSchedule::new(), &options).unwrap();

    let mut x0 = DVector::zeros(2 * n_a);
    x0.rows_mut(n_a, n_a).copy_from(&v0);
    let u = DVector::zeros(lin.b.ncols());
    let linear = lin.propagate(&x0, &u, dt, steps);

    let mut peak: f64 = 0.0;
    let mut worst: f64 = 0.0;
    for (k, x) in linear.iter().enumerate() {
        let sample = &nonlinear.samples[k + 1];
        for (j, &i) in free.iter().enumerate() {
            let d = sample.n[i] - s.model.nodes[i];
            peak = peak.max(d.abs());
            worst = worst.max((d - x[j]).abs());
        }
    }
    assert!(worst <= 0.01 * peak, "{worst:e} vs {peak:e}");
}
