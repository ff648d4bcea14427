use cts::materials::{rest_length_for_force, MaterialLaw, MemberState};
use proptest::prelude::*;

/// Strictly increasing multilinear curve from positive increments.
fn curve(increments: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut e = 0.0;
    let mut s = 0.0;
    increments
        .iter()
        .map(|&(de, ds)| {
            e += de;
            s += ds;
            (e, s)
        })
        .collect()
}

fn increments() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((1e-4f64..5e-3, 1e6f64..2e8), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn elastic_laws_invert_exactly(inc in increments(), frac in -1.5f64..1.5) {
        let points = curve(&inc);
        let law = MaterialLaw::multilinear("m", points.clone());
        let strain = frac * points.last().unwrap().0;
        let s = law.stress(strain, MemberState::default()).stress;
        let back = law.strain_for_stress(s, MemberState::default());
        prop_assert!((back - strain).abs() <= 1e-12 * strain.abs().max(1e-6));
    }

    #[test]
    fn elastic_laws_are_odd(inc in increments(), frac in 0.0f64..1.5) {
        let points = curve(&inc);
        let law = MaterialLaw::multilinear("m", points.clone());
        let strain = frac * points.last().unwrap().0;
        let p = law.stress(strain, MemberState::default());
        let q = law.stress(-strain, MemberState::default());
        prop_assert_eq!(p.stress, -q.stress);
        prop_assert_eq!(p.tangent, q.tangent);
    }

    #[test]
    fn tangent_and_energy_agree_with_finite_differences(inc in increments(), frac in 0.05f64..1.4) {
        let points = curve(&inc);
        let law = MaterialLaw::multilinear("m", points.clone());
        let strain = frac * points.last().unwrap().0;
        // stay off the breakpoints
        prop_assume!(points.iter().all(|&(e, _)| (e - strain).abs() > 1e-6));
        let h = 1e-8;
        let st = MemberState::default();
        let s = |e: f64| law.stress(e, st).stress;
        let w = |e: f64| law.energy_density(e, st);
        let p = law.stress(strain, st);
        let fd_tangent = (s(strain + h) - s(strain - h)) / (2.0 * h);
        prop_assert!((fd_tangent - p.tangent).abs() <= 1e-5 * p.tangent);
        let fd_stress = (w(strain + h) - w(strain - h)) / (2.0 * h);
        prop_assert!((fd_stress - p.stress).abs() <= 1e-5 * p.stress.abs().max(1.0));
    }

    #[test]
    fn rest_length_reproduces_the_requested_force(
        modulus in 1e10f64..3e11,
        area in 1e-6f64..1e-3,
        force in -1e4f64..1e5,
        length in 0.1f64..10.0,
    ) {
        let law = MaterialLaw::linear("m", modulus);
        let l0 = rest_length_for_force(&law, area, force, length, MemberState::default(), 0).unwrap();
        let back = law.stress((length - l0) / l0, MemberState::default()).stress * area;
        prop_assert!((back - force).abs() <= 1e-8 * force.abs().max(1.0));
    }

    #[test]
    fn plastic_unloading_is_elastic_with_a_permanent_offset(
        yield_strain in 5e-4f64..2e-3,
        hardening in 0.01f64..0.5,
        peak in 1.5f64..20.0,
        back in 0.0f64..1.0,
    ) {
        let e0 = 2e11;
        let sy = e0 * yield_strain;
        let law = MaterialLaw::plastic(
            "p",
            vec![(yield_strain, sy), (0.1, sy + hardening * e0 * (0.1 - yield_strain))],
        );
        let peak_strain = peak * yield_strain;
        let loaded = law.stress(peak_strain, MemberState::default());
        let state = loaded.state;
        prop_assert_eq!(state.max_strain, peak_strain);
        let backbone = sy + hardening * e0 * (peak_strain - yield_strain);
        prop_assert!((loaded.stress - backbone).abs() <= 1e-9 * backbone);
        let offset = peak_strain - backbone / e0;
        prop_assert!((state.plastic_offset - offset).abs() <= 1e-12);
        // unload part way: slope e0 and history untouched
        let strain = offset + back * (peak_strain - offset);
        let p = law.stress(strain, state);
        prop_assert!((p.stress - e0 * (strain - offset)).abs() <= 1e-6 * backbone);
        prop_assert_eq!(p.tangent, law.initial_modulus());
        prop_assert_eq!(p.state, state);
        // inversion on the unloading branch
        let inv = law.strain_for_stress(p.stress, state);
        prop_assert!((inv - strain).abs() <= 1e-12);
    }
}

#[test]
fn presets_are_linear_steels() {
    let bar = MaterialLaw::preset("steel-Q235").unwrap();
    let cable = MaterialLaw::preset("steel-cable").unwrap();
    assert_eq!(bar.initial_modulus(), 2.06e11);
    assert_eq!(cable.initial_modulus(), 7.6e10);
    assert!(MaterialLaw::preset("aluminium").is_none());
}

#[test]
fn unloading_to_zero_stress_leaves_residual_strain() {
    let law = MaterialLaw::plastic("p", vec![(0.001, 2e8), (0.05, 2e8 + 1e9 * 0.049)]);
    let state = law.stress(0.01, MemberState::default()).state;
    let zero = law.strain_for_stress(0.0, state);
    assert!(zero > 0.0);
    assert!(law.stress(zero, state).stress.abs() < 1e-3);
}
