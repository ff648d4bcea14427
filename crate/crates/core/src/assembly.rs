//! Matrix family of a structure at one state: mass, stiffness, damping,
//! gravity, equilibrium/compatibility maps, tangent stiffness and the
//! rest-length sensitivity.
//!
//! Matrices are dense and assembled by scattering per-member 3×3 blocks.
//! Signs follow the convention `K n = A_2c t_c`: the vector a structure's
//! members exert *against* its nodes, so static equilibrium reads
//! `E_aᵀ (A_2c t_c − f_ex − g) = 0` with `g` the nodal gravitational force.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::Result;
use crate::materials::{self, ForceVectors};
use crate::model::{self, MemberGeometry, StructureModel, StructureState};

/// Geometric-stiffness variant used in the tangent stiffness.
///
/// `Consistent` is the exact derivative of `A_2c t_c` with respect to the
/// nodal coordinates: each member contributes `(t/l) C_mᵀC_m ⊗ (I − ĥĥᵀ)`.
/// `ForceDensity` keeps the classic force-density form `(Cᵀ x̂ C) ⊗ I` without
/// the transverse projection; it overestimates the stiffness along members
/// by `A_2 diag(t/l) A_2ᵀ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TangentForm {
    #[default]
    Consistent,
    ForceDensity,
}

impl TangentForm {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "consistent" => Some(TangentForm::Consistent),
            "force-density" => Some(TangentForm::ForceDensity),
            _ => None,
        }
    }
}

/// All matrices at one state. Full-size; use [`AssemblySet::aa`] and
/// [`AssemblySet::ab`] for the free/constrained blocks.
#[derive(Debug, Clone)]
pub struct AssemblySet {
    pub geometry: MemberGeometry,
    /// Element lengths `l_c`.
    pub cluster_lengths: DVector<f64>,
    pub forces: ForceVectors,
    /// Redistributed segment rest lengths.
    pub segment_rest_lengths: DVector<f64>,
    /// Segment masses, kg.
    pub masses: DVector<f64>,
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    /// `A_2c d̂_c A_2cᵀ`, before the global damping scale.
    pub damping: DMatrix<f64>,
    pub gravity: DVector<f64>,
    pub a2c: DMatrix<f64>,
    pub a1c: DMatrix<f64>,
    pub b_lc: DMatrix<f64>,
    pub k_g: DMatrix<f64>,
    pub k_e: DMatrix<f64>,
    pub k_t: DMatrix<f64>,
    pub k_l0c: DMatrix<f64>,
    free: Vec<usize>,
    fixed: Vec<usize>,
}

impl AssemblySet {
    /// Block `E_aᵀ X E_a` (or `E_aᵀ X` for a column count that is not the
    /// coordinate count).
    pub fn aa(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        if x.ncols() == self.free.len() + self.fixed.len() {
            submatrix(x, &self.free, &self.free)
        } else {
            rows(x, &self.free)
        }
    }

    /// Block `E_aᵀ X E_b`.
    pub fn ab(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        submatrix(x, &self.free, &self.fixed)
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn fixed(&self) -> &[usize] {
        &self.fixed
    }

    /// `A_2c t_c`, the nodal force vector held by the members.
    pub fn internal_force(&self) -> DVector<f64> {
        &self.a2c * &self.forces.t_c
    }

    /// Free-coordinate static residual `E_aᵀ(A_2c t_c − f_ex − g)`.
    pub fn residual(&self, f_ex: &DVector<f64>) -> DVector<f64> {
        let r = self.internal_force() - f_ex - &self.gravity;
        DVector::from_iterator(self.free.len(), self.free.iter().map(|&i| r[i]))
    }
}

pub fn submatrix(x: &DMatrix<f64>, r: &[usize], c: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(r.len(), c.len(), |i, j| x[(r[i], c[j])])
}

pub fn rows(x: &DMatrix<f64>, r: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(r.len(), x.ncols(), |i, j| x[(r[i], j)])
}

fn add_block(target: &mut DMatrix<f64>, a: usize, b: usize, block: &Matrix3<f64>) {
    for i in 0..3 {
        for j in 0..3 {
            target[(3 * a + i, 3 * b + j)] += block[(i, j)];
        }
    }
}

/// Adds `coef [[1,−1],[−1,1]] ⊗ block` for a member between `tail` and `head`.
fn add_member(target: &mut DMatrix<f64>, tail: usize, head: usize, block: &Matrix3<f64>) {
    add_block(target, tail, tail, block);
    add_block(target, head, head, block);
    add_block(target, tail, head, &(-block));
    add_block(target, head, tail, &(-block));
}

/// Replaces `x` by `(x + xᵀ)/2`, checking the asymmetry was only rounding.
pub fn symmetrize(x: &mut DMatrix<f64>) {
    let scale = x.amax().max(f64::MIN_POSITIVE);
    let n = x.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let a = x[(i, j)];
            let b = x[(j, i)];
            worst = worst.max((a - b).abs());
            let avg = 0.5 * (a + b);
            x[(i, j)] = avg;
            x[(j, i)] = avg;
        }
    }
    debug_assert!(
        worst <= 1e-12 * scale,
        "assembled matrix asymmetric beyond rounding: {worst:e} vs scale {scale:e}"
    );
}

/// Consistent mass matrix: `(m/6)[[2,1],[1,2]] ⊗ I` per member.
pub fn mass_matrix(model: &StructureModel, masses: &DVector<f64>) -> DMatrix<f64> {
    let n = model.n_coords();
    let mut m = DMatrix::zeros(n, n);
    for (k, member) in model.members.iter().enumerate() {
        let c = masses[k] / 6.0;
        let (a, b) = (member.tail, member.head);
        for i in 0..3 {
            m[(3 * a + i, 3 * a + i)] += 2.0 * c;
            m[(3 * b + i, 3 * b + i)] += 2.0 * c;
            m[(3 * a + i, 3 * b + i)] += c;
            m[(3 * b + i, 3 * a + i)] += c;
        }
    }
    m
}

/// `K = (Cᵀ x̂ C) ⊗ I` with segment force densities `x`.
pub fn stiffness_matrix(model: &StructureModel, x: &DVector<f64>) -> DMatrix<f64> {
    let n = model.n_coords();
    let mut k = DMatrix::zeros(n, n);
    for (m, member) in model.members.iter().enumerate() {
        add_member(
            &mut k,
            member.tail,
            member.head,
            &(Matrix3::identity() * x[m]),
        );
    }
    k
}

/// `(A_2c, A_1c)`: column `e` of `A_2c` places `−ĥ` at the tail and `+ĥ` at
/// the head of every segment of element `e`; `A_1c = A_2c l̂_c`.
pub fn equilibrium_matrices(
    model: &StructureModel,
    geometry: &MemberGeometry,
    cluster_lengths: &DVector<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = model.n_coords();
    let mut a2 = DMatrix::zeros(n, model.n_elements());
    for (e, el) in model.elements.iter().enumerate() {
        for &m in &el.members {
            let member = model.members[m];
            let u = geometry.unit(m);
            for i in 0..3 {
                a2[(3 * member.tail + i, e)] -= u[i];
                a2[(3 * member.head + i, e)] += u[i];
            }
        }
    }
    let mut a1 = a2.clone();
    for (e, mut col) in a1.column_iter_mut().enumerate() {
        col *= cluster_lengths[e];
    }
    (a2, a1)
}

/// `B_lc = A_2cᵀ`.
pub fn compatibility_matrix(a2c: &DMatrix<f64>) -> DMatrix<f64> {
    a2c.transpose()
}

/// Critical damping coefficients `(2√3/3) √ρ A √E_0` per element, N·s/m.
pub fn critical_damping(model: &StructureModel) -> DVector<f64> {
    let c = 2.0 * 3f64.sqrt() / 3.0;
    DVector::from_iterator(
        model.n_elements(),
        model.elements.iter().enumerate().map(|(e, el)| {
            c * el.density.sqrt() * el.area * model.material_of(e).initial_modulus().sqrt()
        }),
    )
}

/// Per-element damping coefficients: explicit values, or the critical value
/// where none is given.
pub fn damping_coefficients(model: &StructureModel) -> DVector<f64> {
    let critical = critical_damping(model);
    DVector::from_iterator(
        model.n_elements(),
        model
            .elements
            .iter()
            .enumerate()
            .map(|(e, el)| el.damping.unwrap_or(critical[e])),
    )
}

/// `D = A_2c d̂_c A_2cᵀ`.
pub fn damping_matrix(a2c: &DMatrix<f64>, d_c: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = a2c.clone();
    for (e, mut col) in scaled.column_iter_mut().enumerate() {
        col *= d_c[e];
    }
    let mut d = scaled * a2c.transpose();
    symmetrize(&mut d);
    d
}

/// Nodal gravitational force: half of each segment's weight at either end.
pub fn gravity_vector(model: &StructureModel, masses: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(model.n_coords());
    let a: Vector3<f64> = model.gravity;
    for (k, member) in model.members.iter().enumerate() {
        let half = 0.5 * masses[k];
        for i in 0..3 {
            g[3 * member.tail + i] += half * a[i];
            g[3 * member.head + i] += half * a[i];
        }
    }
    g
}

/// `(K_T, K_G, K_E)` at a state.
pub fn tangent_stiffness(
    model: &StructureModel,
    geometry: &MemberGeometry,
    forces: &ForceVectors,
    rest_lengths: &DVector<f64>,
    a2c: &DMatrix<f64>,
    form: TangentForm,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = model.n_coords();
    let mut k_g = DMatrix::zeros(n, n);
    for (m, member) in model.members.iter().enumerate() {
        let x = forces.x[m];
        let block = match form {
            TangentForm::ForceDensity => Matrix3::identity() * x,
            TangentForm::Consistent => {
                let u = geometry.unit(m);
                (Matrix3::identity() - u * u.transpose()) * x
            }
        };
        add_member(&mut k_g, member.tail, member.head, &block);
    }
    symmetrize(&mut k_g);

    let axial = axial_stiffness(model, forces, rest_lengths);
    let mut scaled = a2c.clone();
    for (e, mut col) in scaled.column_iter_mut().enumerate() {
        col *= axial[e];
    }
    let mut k_e = scaled * a2c.transpose();
    symmetrize(&mut k_e);
    let k_t = &k_g + &k_e;
    (k_t, k_g, k_e)
}

/// `E_t A / l_0c` per element.
fn axial_stiffness(
    model: &StructureModel,
    forces: &ForceVectors,
    rest_lengths: &DVector<f64>,
) -> DVector<f64> {
    DVector::from_iterator(
        model.n_elements(),
        model
            .elements
            .iter()
            .enumerate()
            .map(|(e, el)| forces.tangent[e] * el.area / rest_lengths[e]),
    )
}

/// `K_l0c = −A_1c diag(E_t A / l_0c²)`.
pub fn rest_length_sensitivity(
    model: &StructureModel,
    forces: &ForceVectors,
    rest_lengths: &DVector<f64>,
    a1c: &DMatrix<f64>,
) -> DMatrix<f64> {
    let axial = axial_stiffness(model, forces, rest_lengths);
    let mut k = a1c.clone();
    for (e, mut col) in k.column_iter_mut().enumerate() {
        col *= -axial[e] / rest_lengths[e];
    }
    k
}

/// Evaluates the full matrix family at `state`.
pub fn assemble(
    model: &StructureModel,
    state: &StructureState,
    form: TangentForm,
) -> Result<AssemblySet> {
    assemble_at(
        model,
        &state.n,
        &state.rest_lengths,
        &state.material_states,
        form,
    )
}

pub fn assemble_at(
    model: &StructureModel,
    n: &DVector<f64>,
    rest_lengths: &DVector<f64>,
    material_states: &[materials::MemberState],
    form: TangentForm,
) -> Result<AssemblySet> {
    let geometry = model::member_geometry(n, &model.members)?;
    let cluster_lengths = model::cluster_lengths(&model.elements, &geometry.lengths)?;
    let forces = materials::member_forces(model, &geometry.lengths, rest_lengths, material_states)?;
    let (segment_rest_lengths, masses) =
        materials::redistribute(model, &geometry.lengths, rest_lengths)?;

    let mut mass = mass_matrix(model, &masses);
    symmetrize(&mut mass);
    let mut stiffness = stiffness_matrix(model, &forces.x);
    symmetrize(&mut stiffness);
    let (a2c, a1c) = equilibrium_matrices(model, &geometry, &cluster_lengths);
    let b_lc = compatibility_matrix(&a2c);
    let damping = damping_matrix(&a2c, &damping_coefficients(model));
    let gravity = gravity_vector(model, &masses);
    let (k_t, k_g, k_e) = tangent_stiffness(model, &geometry, &forces, rest_lengths, &a2c, form);
    let k_l0c = rest_length_sensitivity(model, &forces, rest_lengths, &a1c);

    Ok(AssemblySet {
        geometry,
        cluster_lengths,
        forces,
        segment_rest_lengths,
        masses,
        mass,
        stiffness,
        damping,
        gravity,
        a2c,
        a1c,
        b_lc,
        k_g,
        k_e,
        k_t,
        k_l0c,
        free: model.boundary.free().to_vec(),
        fixed: model.boundary.fixed().to_vec(),
    })
}
