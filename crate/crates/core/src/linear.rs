//! Linearized dynamics about an equilibrium, state-space realization and
//! undamped modal analysis.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::assembly::{self, TangentForm};
use crate::error::{Error, Result};
use crate::model::{StructureModel, StructureState};

/// Linearized equations
/// `M_aa δn̈_a + ζD_aa δṅ_a + K_Taa δn_a = E_aᵀ δf_ex − E_aᵀK_l0c δl_0c`
/// (plus boundary-motion terms through the `ab` blocks).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub m_aa: DMatrix<f64>,
    /// Damping already scaled by `ζ`.
    pub d_aa: DMatrix<f64>,
    pub k_taa: DMatrix<f64>,
    pub m_ab: DMatrix<f64>,
    pub d_ab: DMatrix<f64>,
    pub k_tab: DMatrix<f64>,
    /// `E_aᵀ`, maps full nodal force perturbations (n_a × 3n_n).
    pub force_input: DMatrix<f64>,
    /// `−E_aᵀ K_l0c` (n_a × n_ec).
    pub rest_length_input: DMatrix<f64>,
    /// State matrix for `x = (δn_a, δṅ_a)`.
    pub a: DMatrix<f64>,
    /// Input matrix for `u = (δf_ex, δl_0c)`.
    pub b: DMatrix<f64>,
}

impl LinearModel {
    pub fn n_free(&self) -> usize {
        self.m_aa.nrows()
    }

    /// Integrates `ẋ = A x + B u` with fixed-step RK4 and constant `u`.
    /// Returns the state after each step.
    pub fn propagate(
        &self,
        x0: &DVector<f64>,
        u: &DVector<f64>,
        dt: f64,
        steps: usize,
    ) -> Vec<DVector<f64>> {
        let bu = &self.b * u;
        let f = |x: &DVector<f64>| &self.a * x + &bu;
        let mut x = x0.clone();
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let k1 = f(&x);
            let k2 = f(&(&x + &k1 * (0.5 * dt)));
            let k3 = f(&(&x + &k2 * (0.5 * dt)));
            let k4 = f(&(&x + &k3 * dt));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            out.push(x.clone());
        }
        out
    }
}

/// Assembles the linearized model at an equilibrium `state`.
pub fn linearize(
    model: &StructureModel,
    state: &StructureState,
    damping_scale: f64,
    form: TangentForm,
) -> Result<LinearModel> {
    let set = assembly::assemble(model, state, form)?;
    let m_aa = set.aa(&set.mass);
    let d = &set.damping * damping_scale;
    let d_aa = set.aa(&d);
    let k_taa = set.aa(&set.k_t);
    let m_ab = set.ab(&set.mass);
    let d_ab = set.ab(&d);
    let k_tab = set.ab(&set.k_t);
    let n_a = m_aa.nrows();
    let n_coords = model.n_coords();
    let n_ec = model.n_elements();

    let mut force_input = DMatrix::zeros(n_a, n_coords);
    for (k, &i) in set.free().iter().enumerate() {
        force_input[(k, i)] = 1.0;
    }
    let rest_length_input = -set.aa(&set.k_l0c);

    let chol = m_aa.clone().cholesky().ok_or(Error::SingularMass)?;
    let mut a = DMatrix::zeros(2 * n_a, 2 * n_a);
    a.view_mut((0, n_a), (n_a, n_a))
        .copy_from(&DMatrix::identity(n_a, n_a));
    a.view_mut((n_a, 0), (n_a, n_a))
        .copy_from(&(-chol.solve(&k_taa)));
    a.view_mut((n_a, n_a), (n_a, n_a))
        .copy_from(&(-chol.solve(&d_aa)));

    let mut b = DMatrix::zeros(2 * n_a, n_coords + n_ec);
    b.view_mut((n_a, 0), (n_a, n_coords))
        .copy_from(&chol.solve(&force_input));
    b.view_mut((n_a, n_coords), (n_a, n_ec))
        .copy_from(&chol.solve(&rest_length_input));

    Ok(LinearModel {
        m_aa,
        d_aa,
        k_taa,
        m_ab,
        d_ab,
        k_tab,
        force_input,
        rest_length_input,
        a,
        b,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalResult {
    /// Eigenvalues `ω²` of `K_Taa φ = ω² M_aa φ`, ascending, (rad/s)².
    pub eigenvalues: Vec<f64>,
    /// Angular frequencies, rad/s (`sign(ω²)√|ω²|`; negative marks an
    /// unstable direction).
    pub omega: Vec<f64>,
    /// Mass-normalized mode shapes as columns (n_a × n_a).
    pub shapes: DMatrix<f64>,
    /// Modes with `|ω| < threshold · ω_max`.
    pub rigid: Vec<bool>,
}

impl ModalResult {
    pub fn frequencies_hz(&self) -> Vec<f64> {
        self.omega.iter().map(|w| w / (2.0 * PI)).collect()
    }

    pub fn rigid_count(&self) -> usize {
        self.rigid.iter().filter(|&&r| r).count()
    }
}

pub const DEFAULT_RIGID_THRESHOLD: f64 = 1e-5;

/// Solves the generalized problem by Cholesky reduction
/// `L⁻¹ K L⁻ᵀ y = ω² y`, `φ = L⁻ᵀ y`.
pub fn generalized_eigen(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let chol = m.clone().cholesky().ok_or(Error::SingularMass)?;
    let l = chol.l();
    // L⁻¹ K L⁻ᵀ
    let x = l.solve_lower_triangular(k).ok_or(Error::SingularMass)?;
    let c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(Error::SingularMass)?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut y = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        y.set_column(k, &eig.eigenvectors.column(i));
    }
    let shapes = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or(Error::SingularMass)?;
    Ok((values, shapes))
}

/// Undamped modal analysis about `state`.
pub fn modal(
    model: &StructureModel,
    state: &StructureState,
    form: TangentForm,
    rigid_threshold: f64,
) -> Result<ModalResult> {
    let set = assembly::assemble(model, state, form)?;
    let m_aa = set.aa(&set.mass);
    let k_aa = set.aa(&set.k_t);
    let (eigenvalues, shapes) = generalized_eigen(&k_aa, &m_aa)?;
    let omega: Vec<f64> = eigenvalues
        .iter()
        .map(|&l| l.signum() * l.abs().sqrt())
        .collect();
    let w_max = omega.iter().map(|w| w.abs()).fold(0.0, f64::max);
    let rigid = omega
        .iter()
        .map(|w| w.abs() < rigid_threshold * w_max)
        .collect();
    Ok(ModalResult {
        eigenvalues,
        omega,
        shapes,
        rigid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::MaterialLaw;
    use crate::model::{BoundarySpec, Element, Member};
    use nalgebra::Vector3;

    fn axial() -> StructureModel {
        StructureModel {
            nodes: DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
            members: vec![Member::bar(0, 1)],
            elements: vec![Element {
                members: vec![0],
                area: 1e-4,
                material: 0,
                density: 7870.0,
                rest_length: 1.0,
                damping: Some(3.0),
            }],
            materials: vec![MaterialLaw::linear("steel", 2.06e11)],
            boundary: BoundarySpec::from_fixed(6, [0, 1, 2, 4, 5]).unwrap(),
            gravity: Vector3::zeros(),
        }
    }

    #[test]
    fn one_dof_state_space() {
        let model = axial();
        let lin = linearize(
            &model,
            &StructureState::reference(&model),
            1.0,
            TangentForm::Consistent,
        )
        .unwrap();
        let m: f64 = 7870.0 * 1e-4;
        let ea = 2.06e11 * 1e-4;
        assert_eq!(lin.a[(0, 0)], 0.0);
        assert_eq!(lin.a[(0, 1)], 1.0);
        assert!((lin.a[(1, 0)] + 3.0 * ea / m).abs() < 1e-9 * 3.0 * ea / m);
        assert!((lin.a[(1, 1)] + 3.0 * 3.0 / m).abs() < 1e-12 * 3.0 / m * 3.0);
        let undamped = linearize(
            &model,
            &StructureState::reference(&model),
            0.0,
            TangentForm::Consistent,
        )
        .unwrap();
        assert_eq!(undamped.a[(1, 1)], 0.0);
    }

    #[test]
    fn one_dof_frequency() {
        let model = axial();
        let res = modal(
            &model,
            &StructureState::reference(&model),
            TangentForm::Consistent,
            DEFAULT_RIGID_THRESHOLD,
        )
        .unwrap();
        let m: f64 = 7870.0 * 1e-4;
        let ea = 2.06e11 * 1e-4;
        let f = (3.0 * ea / m).sqrt() / (2.0 * PI);
        assert!((res.frequencies_hz()[0] - f).abs() < 1e-9 * f);
        assert_eq!(res.rigid_count(), 0);
    }
}
