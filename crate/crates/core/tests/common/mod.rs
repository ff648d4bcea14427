#![allow(dead_code)]

use cts::materials::MaterialLaw;
use cts::model::{BoundarySpec, Element, Member, StructureModel, StructureState};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random 3D frame of three bars with strings between the remaining node
/// pairs. Strings are paired into two-member clusters where possible. Rest
/// lengths put strings in tension and bars in compression.
pub fn random_cts(seed: u64, cluster: bool) -> (StructureModel, StructureState) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_nodes = 6;
    let nodes = DVector::from_fn(3 * n_nodes, |_, _| rng.gen_range(-1.0..1.0));
    let mut members = vec![Member::bar(0, 1), Member::bar(2, 3), Member::bar(4, 5)];
    for a in 0..n_nodes {
        for b in a + 1..n_nodes {
            if a / 2 != b / 2 && rng.gen_bool(0.6) {
                members.push(Member::string(a, b));
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = (0..3).map(|m| vec![m]).collect();
    let strings: Vec<usize> = (3..members.len()).collect();
    if cluster {
        for pair in strings.chunks(2) {
            groups.push(pair.to_vec());
        }
    } else {
        groups.extend(strings.iter().map(|&m| vec![m]));
    }
    let lengths: Vec<f64> = members
        .iter()
        .map(|m| (node(&nodes, m.head) - node(&nodes, m.tail)).norm())
        .collect();
    let elements = groups
        .into_iter()
        .map(|g| {
            let bar = g.len() == 1 && g[0] < 3;
            let l: f64 = g.iter().map(|&m| lengths[m]).sum();
            Element {
                rest_length: l * if bar {
                    1.0 + rng.gen_range(0.001..0.01)
                } else {
                    1.0 - rng.gen_range(0.001..0.01)
                },
                members: g,
                area: if bar { 1e-4 } else { 1e-6 },
                material: if bar { 0 } else { 1 },
                density: 7870.0,
                damping: None,
            }
        })
        .collect();
    let model = StructureModel {
        nodes,
        members,
        elements,
        materials: vec![
            MaterialLaw::preset("steel-Q235").unwrap(),
            MaterialLaw::preset("steel-cable").unwrap(),
        ],
        boundary: BoundarySpec::unconstrained(3 * n_nodes),
        gravity: Vector3::new(0.0, 0.0, -9.8),
    };
    let state = StructureState::reference(&model);
    (model, state)
}

pub fn node(n: &DVector<f64>, i: usize) -> Vector3<f64> {
    Vector3::new(n[3 * i], n[3 * i + 1], n[3 * i + 2])
}

/// Central-difference Jacobian of `f` at `x`.
pub fn jacobian(
    f: impl Fn(&DVector<f64>) -> DVector<f64>,
    x: &DVector<f64>,
    h: f64,
) -> DMatrix<f64> {
    let m = f(x).len();
    let mut j = DMatrix::zeros(m, x.len());
    for k in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        j.set_column(k, &((f(&xp) - f(&xm)) / (2.0 * h)));
    }
    j
}

pub fn relative(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
