mod common;

use common::{jacobian, node, random_cts, relative};
use cts::assembly::{self, TangentForm};
use cts::materials::MaterialLaw;
use cts::model::{self, BoundarySpec, Element, Member, StructureModel, StructureState};
use cts::scenarios::{self, TBarSupport};
use cts::statics;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use proptest::prelude::*;

fn internal_force(
    model: &StructureModel,
    state: &StructureState,
    n: &DVector<f64>,
) -> DVector<f64> {
    assembly::assemble_at(
        model,
        n,
        &state.rest_lengths,
        &state.material_states,
        TangentForm::Consistent,
    )
    .unwrap()
    .internal_force()
}

fn single(kind: Member, area: f64, material: MaterialLaw, rest: f64) -> StructureModel {
    StructureModel {
        nodes: DVector::from_vec(vec![0.0, 0.0, 0.0, 2.0, 0.0, 0.0]),
        members: vec![kind],
        elements: vec![Element {
            members: vec![0],
            area,
            material: 0,
            density: 7870.0,
            rest_length: rest,
            damping: None,
        }],
        materials: vec![material],
        boundary: BoundarySpec::unconstrained(6),
        gravity: Vector3::new(0.0, 0.0, -9.8),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tangent_matches_finite_differences(seed in any::<u64>()) {
        let (model, state) = random_cts(seed, true);
        let set = assembly::assemble(&model, &state, TangentForm::Consistent).unwrap();
        let fd = jacobian(|n| internal_force(&model, &state, n), &state.n, 1e-6);
        prop_assert!(relative(&set.k_t, &fd) < 1e-5, "{}", relative(&set.k_t, &fd));
    }

    #[test]
    fn rest_length_sensitivity_matches_finite_differences(seed in any::<u64>()) {
        let (model, state) = random_cts(seed, true);
        let set = assembly::assemble(&model, &state, TangentForm::Consistent).unwrap();
        let fd = jacobian(
            |l0| {
                assembly::assemble_at(&model, &state.n, l0, &state.material_states, TangentForm::Consistent)
                    .unwrap()
                    .internal_force()
            },
            &state.rest_lengths,
            1e-7,
        );
        prop_assert!(relative(&set.k_l0c, &fd) < 1e-5, "{}", relative(&set.k_l0c, &fd));
    }

    #[test]
    fn compatibility_predicts_length_change(seed in any::<u64>()) {
        let (model, state) = random_cts(seed, true);
        let set = assembly::assemble(&model, &state, TangentForm::Consistent).unwrap();
        prop_assert_eq!(&set.b_lc.transpose(), &set.a2c);
        let l_c = |n: &DVector<f64>| {
            let g = model::member_geometry(n, &model.members).unwrap();
            model::cluster_lengths(&model.elements, &g.lengths).unwrap()
        };
        let fd = jacobian(l_c, &state.n, 1e-6);
        prop_assert!(relative(&set.b_lc, &fd) < 1e-8);
    }

    #[test]
    fn three_equilibrium_forms_agree(seed in any::<u64>()) {
        let (model, state) = random_cts(seed, true);
        let set = assembly::assemble(&model, &state, TangentForm::Consistent).unwrap();
        let a = &set.stiffness * &state.n;
        let b = &set.a2c * &set.forces.t_c;
        let c = &set.a1c * &set.forces.x_c;
        prop_assert!((&a - &b).norm() <= 1e-10 * b.norm());
        prop_assert!((&c - &b).norm() <= 1e-10 * b.norm());
    }

    #[test]
    fn assembled_matrices_are_symmetric(seed in any::<u64>()) {
        let (model, state) = random_cts(seed, true);
        let set = assembly::assemble(&model, &state, TangentForm::Consistent).unwrap();
        for (name, m) in [("M", &set.mass), ("D", &set.damping), ("K_T", &set.k_t), ("K", &set.stiffness)] {
            prop_assert!((m - m.transpose()).amax() <= 1e-12 * m.amax(), "{name}");
        }
        prop_assert!(set.mass.clone().cholesky().is_some());
    }

    #[test]
    fn damping_is_positive_semidefinite(seed in any::<u64>(), v in prop::collection::vec(-1.0f64..1.0, 18)) {
        let (model, state) = random_cts(seed, true);
        let set = assembly::assemble(&model, &state, TangentForm::Consistent).unwrap();
        let v = DVector::from_vec(v);
        prop_assert!(v.dot(&(&set.damping * &v)) >= -1e-12 * set.damping.norm());
    }

    #[test]
    fn mass_rows_and_weight_sum_to_total_mass(seed in any::<u64>()) {
        let (model, state) = random_cts(seed, true);
        let set = assembly::assemble(&model, &state, TangentForm::Consistent).unwrap();
        let total: f64 = set.masses.iter().sum();
        for dir in 0..3 {
            let ones = DVector::from_fn(model.n_coords(), |i, _| if i % 3 == dir { 1.0 } else { 0.0 });
            let s = ones.dot(&(&set.mass * &ones));
            prop_assert!((s - total).abs() <= 1e-12 * total);
        }
        let gz: f64 = (0..model.n_nodes()).map(|i| set.gravity[3 * i + 2]).sum();
        prop_assert!((gz + 9.8 * total).abs() <= 1e-12 * 9.8 * total);
    }

    #[test]
    fn translation_leaves_lengths_unchanged(seed in any::<u64>(), shift in prop::array::uniform3(-5.0f64..5.0)) {
        let (model, state) = random_cts(seed, false);
        let g0 = model::member_geometry(&state.n, &model.members).unwrap();
        let moved = DVector::from_fn(state.n.len(), |i, _| state.n[i] + shift[i % 3]);
        let g1 = model::member_geometry(&moved, &model.members).unwrap();
        prop_assert!((g0.lengths - g1.lengths).amax() < 1e-14 * 20.0);
    }
}

#[test]
fn single_member_mass_matches_quadrature() {
    let model = single(Member::bar(0, 1), 1e-4, MaterialLaw::linear("s", 2e11), 2.0);
    let set = assembly::assemble(
        &model,
        &StructureState::reference(&model),
        TangentForm::Consistent,
    )
    .unwrap();
    let m = 7870.0 * 1e-4 * 2.0;
    // kinetic-energy integral of linear shape functions, two-point Gauss
    let gauss = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    let shape = |s: f64| [1.0 - s, s];
    let mut block = [[0.0; 2]; 2];
    for &s in &gauss {
        let n = shape(s);
        for i in 0..2 {
            for j in 0..2 {
                block[i][j] += 0.5 * m * n[i] * n[j];
            }
        }
    }
    for a in 0..2 {
        for b in 0..2 {
            for d in 0..3 {
                let got = set.mass[(3 * a + d, 3 * b + d)];
                assert!((got - block[a][b]).abs() < 1e-14 * m);
            }
        }
    }
    assert_eq!(set.mass[(0, 1)], 0.0);
}

#[test]
fn single_member_gravity_is_half_weight_per_end() {
    let model = single(Member::bar(0, 1), 1e-4, MaterialLaw::linear("s", 2e11), 2.0);
    let set = assembly::assemble(
        &model,
        &StructureState::reference(&model),
        TangentForm::Consistent,
    )
    .unwrap();
    let m = 7870.0 * 1e-4 * 2.0;
    for end in 0..2 {
        assert_eq!(set.gravity[3 * end], 0.0);
        assert!((set.gravity[3 * end + 2] + 4.9 * m).abs() < 1e-13 * m);
    }
}

#[test]
fn single_tensioned_member_stiffness_block() {
    let e = 2e11;
    let area = 1e-4;
    let model = single(
        Member::string(0, 1),
        area,
        MaterialLaw::linear("s", e),
        1.999,
    );
    let state = StructureState::reference(&model);
    let set = assembly::assemble(&model, &state, TangentForm::Consistent).unwrap();
    let t = e * area * (2.0 - 1.999) / 1.999;
    assert!((set.forces.t_c[0] - t).abs() < 1e-9 * t);
    let x = t / 2.0;
    for d in 0..3 {
        assert!((set.stiffness[(d, d)] - x).abs() < 1e-12 * x);
        assert!((set.stiffness[(d, 3 + d)] + x).abs() < 1e-12 * x);
    }
    assert_eq!(
        set.a2c.column(0).as_slice(),
        &[-1.0, 0.0, 0.0, 1.0, 0.0, 0.0]
    );
}

#[test]
fn unstressed_tangent_is_material_part_only() {
    let model = single(Member::bar(0, 1), 1e-4, MaterialLaw::linear("s", 2e11), 2.0);
    let set = assembly::assemble(
        &model,
        &StructureState::reference(&model),
        TangentForm::Consistent,
    )
    .unwrap();
    assert_eq!(set.k_g.amax(), 0.0);
    assert_eq!(set.stiffness.amax(), 0.0);
    assert_eq!(set.k_t, set.k_e);
}

#[test]
fn critical_damping_matches_scalar_formula() {
    let model = single(
        Member::string(0, 1),
        9.138e-7,
        MaterialLaw::linear("c", 7.6e10),
        2.0,
    );
    let d = assembly::critical_damping(&model);
    let expected = 2.0 * 3f64.sqrt() / 3.0 * 7870f64.sqrt() * 9.138e-7 * 7.6e10f64.sqrt();
    assert!((d[0] - expected).abs() < 1e-14 * expected);
    let zero = assembly::damping_matrix(&DMatrix::from_element(6, 1, 1.0), &DVector::zeros(1));
    assert_eq!(zero.amax(), 0.0);
}

#[test]
fn slack_string_has_no_sensitivity() {
    let model = single(
        Member::string(0, 1),
        1e-6,
        MaterialLaw::linear("c", 7.6e10),
        2.5,
    );
    let set = assembly::assemble(
        &model,
        &StructureState::reference(&model),
        TangentForm::Consistent,
    )
    .unwrap();
    assert_eq!(set.forces.t_c[0], 0.0);
    assert_eq!(set.k_l0c.amax(), 0.0);
    assert_eq!(set.k_t.amax(), 0.0);
}

#[test]
fn sensitivity_is_linear_in_area() {
    let (mut model, state) = random_cts(7, true);
    let k1 = assembly::assemble(&model, &state, TangentForm::Consistent)
        .unwrap()
        .k_l0c;
    for el in &mut model.elements {
        el.area *= 2.0;
    }
    let k2 = assembly::assemble(&model, &state, TangentForm::Consistent)
        .unwrap()
        .k_l0c;
    assert!((k2 - k1 * 2.0).amax() < 1e-12 * 1e12);
}

/// Tangent of an unclustered structure built member by member.
fn classic_tangent(model: &StructureModel, state: &StructureState) -> DMatrix<f64> {
    let n = model.n_coords();
    let mut k = DMatrix::zeros(n, n);
    for (e, el) in model.elements.iter().enumerate() {
        let member = &model.members[el.members[0]];
        let d = node(&state.n, member.head) - node(&state.n, member.tail);
        let l = d.norm();
        let u = d / l;
        let l0 = state.rest_lengths[e];
        let modulus = model.materials[el.material].initial_modulus();
        let t = (modulus * el.area * (l - l0) / l0).max(if model.is_string(e) {
            0.0
        } else {
            f64::MIN
        });
        let ea = if model.is_string(e) && t == 0.0 {
            0.0
        } else {
            modulus * el.area / l0
        };
        let block = (Matrix3::identity() - u * u.transpose()) * (t / l) + u * u.transpose() * ea;
        for (a, b, s) in [
            (member.tail, member.tail, 1.0),
            (member.head, member.head, 1.0),
            (member.tail, member.head, -1.0),
            (member.head, member.tail, -1.0),
        ] {
            for i in 0..3 {
                for j in 0..3 {
                    k[(3 * a + i, 3 * b + j)] += s * block[(i, j)];
                }
            }
        }
    }
    k
}

#[test]
fn identity_clustering_reduces_to_classic_tangent() {
    for seed in 0..10 {
        let (model, state) = random_cts(seed, false);
        assert!(model.is_unclustered());
        let set = assembly::assemble(&model, &state, TangentForm::Consistent).unwrap();
        let classic = classic_tangent(&model, &state);
        assert!(relative(&set.k_t, &classic) < 1e-12, "seed {seed}");
        // the unclustered copy goes through the same path and is identical
        let copy = model.unclustered(&state.n).unwrap();
        let set2 = assembly::assemble(
            &copy,
            &StructureState::reference(&copy),
            TangentForm::Consistent,
        )
        .unwrap();
        assert_eq!(set.k_t, set2.k_t);
        assert_eq!(set.mass, set2.mass);
        assert_eq!(set.a2c, set2.a2c);
    }
}

#[test]
fn equilibrium_matrix_matches_nodal_balance() {
    let (model, state) = random_cts(3, false);
    let set = assembly::assemble(&model, &state, TangentForm::Consistent).unwrap();
    let t = &set.forces.t_c;
    let mut f = DVector::zeros(model.n_coords());
    for (e, el) in model.elements.iter().enumerate() {
        let m = &model.members[el.members[0]];
        let u = (node(&state.n, m.head) - node(&state.n, m.tail)).normalize();
        for i in 0..3 {
            f[3 * m.tail + i] -= t[e] * u[i];
            f[3 * m.head + i] += t[e] * u[i];
        }
    }
    assert!((set.internal_force() - f).amax() < 1e-10 * t.amax());
}

#[test]
fn prestressed_free_structure_has_rigid_nullspace() {
    for scenario in [
        scenarios::tower2().unwrap(),
        scenarios::tbar(TBarSupport::Pinned).unwrap(),
    ] {
        // self-stress of the free body, with no support reactions
        let mut model = scenario.model.clone();
        model.boundary = BoundarySpec::unconstrained(model.n_coords());
        let basis = statics::prestress_modes(&model, &model.nodes).unwrap();
        assert_eq!(basis.count(), 1);
        let t_c = statics::design_prestress(&model, &basis, &[(0, -100.0)]).unwrap();
        let mut state = StructureState::reference(&model);
        state.rest_lengths = statics::rest_lengths_for_forces(&model, &model.nodes, &t_c).unwrap();
        let set = assembly::assemble(&model, &state, TangentForm::Consistent).unwrap();
        let scale = set.k_t.amax();
        let n_n = model.n_nodes();
        for axis in 0..3 {
            let v = DVector::from_fn(3 * n_n, |i, _| if i % 3 == axis { 1.0 } else { 0.0 });
            assert!(
                (&set.k_t * &v).amax() <= 1e-12 * scale,
                "{} translation",
                scenario.name
            );
            let w = Vector3::ith(axis, 1.0);
            let mut r = DVector::zeros(3 * n_n);
            for i in 0..n_n {
                let p = w.cross(&node(&state.n, i));
                r.fixed_rows_mut::<3>(3 * i).copy_from(&p);
            }
            assert!(
                (&set.k_t * &r).amax() <= 1e-8 * scale,
                "{} rotation",
                scenario.name
            );
        }
    }
}

#[test]
fn tbar_prestress_balances_every_free_coordinate() {
    let s = scenarios::tbar(TBarSupport::Planar).unwrap();
    let set = assembly::assemble(&s.model, &s.state, TangentForm::Consistent).unwrap();
    let r = set.residual(&DVector::zeros(s.model.n_coords()));
    assert!(r.amax() < 1e-8);
    let basis = statics::prestress_modes(&s.model, &s.model.nodes).unwrap();
    assert_eq!(basis.count(), 1);
}
