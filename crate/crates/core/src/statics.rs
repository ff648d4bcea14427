//! Prestress modes, nonlinear static equilibrium and quasi-static actuation
//! paths.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};

use crate::assembly::{self, AssemblySet, TangentForm};
use crate::error::{Error, Result};
use crate::materials::{self, MemberState};
use crate::model::{self, StructureModel, StructureState};
use crate::schedule::ActuationSchedule;

/// Relative singular-value threshold for rank decisions.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Orthonormal basis of the self-stress force densities at a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PrestressBasis {
    /// `n_ec × k`; columns span the null space of `E_aᵀ A_1c`.
    pub basis: DMatrix<f64>,
    /// Element lengths `l_c` at which the basis was computed.
    pub cluster_lengths: DVector<f64>,
    /// Singular values of `E_aᵀ A_1c`, descending.
    pub singular_values: Vec<f64>,
}

impl PrestressBasis {
    /// Number of independent prestress modes.
    pub fn count(&self) -> usize {
        self.basis.ncols()
    }

    /// Member forces `t_c = l̂_c x_c` for each basis column (`n_ec × k`).
    pub fn force_modes(&self) -> DMatrix<f64> {
        let mut t = self.basis.clone();
        for (e, mut row) in t.row_iter_mut().enumerate() {
            row *= self.cluster_lengths[e];
        }
        t
    }
}

/// Null space of `E_aᵀ A_1c` by singular value decomposition; singular
/// values below `1e-10 σ_max` count as zero.
pub fn prestress_modes(model: &StructureModel, n: &DVector<f64>) -> Result<PrestressBasis> {
    let geometry = model::member_geometry(n, &model.members)?;
    let l_c = model::cluster_lengths(&model.elements, &geometry.lengths)?;
    let (_, a1c) = assembly::equilibrium_matrices(model, &geometry, &l_c);
    let a = assembly::rows(&a1c, model.boundary.free());
    let (basis, singular_values) = null_space(&a);
    Ok(PrestressBasis {
        basis,
        cluster_lengths: l_c,
        singular_values,
    })
}

/// Orthonormal null-space basis of `a` and its singular values.
pub fn null_space(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return (DMatrix::zeros(0, 0), Vec::new());
    }
    // Pad to at least square so the SVD returns a full right basis.
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let sigma = svd.singular_values;
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    let sigma_max = sigma.iter().cloned().fold(0.0, f64::max);
    let null: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| sigma[i] <= RANK_TOLERANCE * sigma_max || sigma_max == 0.0)
        .collect();
    let mut basis = DMatrix::zeros(cols, null.len());
    for (k, &i) in null.iter().enumerate() {
        basis.set_column(k, &v_t.row(i).transpose());
    }
    let values = order
        .iter()
        .take(rows.min(cols))
        .map(|&i| sigma[i])
        .collect();
    (basis, values)
}

/// Member forces in the span of `basis` matching `anchors` exactly.
///
/// `anchors` are `(element, force)` pairs, one per prestress mode. String
/// elements must come out nonnegative.
pub fn design_prestress(
    model: &StructureModel,
    basis: &PrestressBasis,
    anchors: &[(usize, f64)],
) -> Result<DVector<f64>> {
    let k = basis.count();
    if anchors.len() != k {
        return Err(Error::AnchorCount {
            expected: k,
            found: anchors.len(),
        });
    }
    let modes = basis.force_modes();
    let n_ec = modes.nrows();
    let mut sub = DMatrix::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    for (i, &(element, force)) in anchors.iter().enumerate() {
        if element >= n_ec {
            return Err(Error::IndexOutOfRange {
                index: element,
                len: n_ec,
            });
        }
        sub.set_row(i, &modes.row(element));
        rhs[i] = force;
    }
    let (_, sv) = null_space(&sub);
    let smax = sv.first().copied().unwrap_or(0.0);
    let smin = sv.last().copied().unwrap_or(0.0);
    if k > 0 && !(smin > 1e-10 * smax) {
        return Err(Error::InconsistentAnchors);
    }
    let alpha = sub.lu().solve(&rhs).ok_or(Error::InconsistentAnchors)?;
    let mut t_c = &modes * alpha;
    for &(element, force) in anchors {
        t_c[element] = force;
    }
    let scale = t_c.amax();
    for e in 0..n_ec {
        if model.is_string(e) {
            if t_c[e] < -1e-9 * scale {
                return Err(Error::InfeasiblePrestress {
                    element: e,
                    force: t_c[e],
                });
            }
            t_c[e] = t_c[e].max(0.0);
        }
    }
    Ok(t_c)
}

/// Clustered rest lengths that produce `t_c` at configuration `n`.
pub fn rest_lengths_for_forces(
    model: &StructureModel,
    n: &DVector<f64>,
    t_c: &DVector<f64>,
) -> Result<DVector<f64>> {
    let geometry = model::member_geometry(n, &model.members)?;
    let l_c = model::cluster_lengths(&model.elements, &geometry.lengths)?;
    let mut out = DVector::zeros(model.n_elements());
    for (e, el) in model.elements.iter().enumerate() {
        out[e] = materials::rest_length_for_force(
            model.material_of(e),
            el.area,
            t_c[e],
            l_c[e],
            MemberState::default(),
            e,
        )?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Absolute residual tolerance, N. `None` uses `1e-8 max(1, ‖f_ex‖)`.
    /// Iteration also stops once the residual reaches [`roundoff_floor`].
    pub tolerance: Option<f64>,
    pub max_iterations: usize,
    pub max_halvings: usize,
    pub tangent: TangentForm,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tolerance: None,
            max_iterations: 100,
            max_halvings: 30,
            tangent: TangentForm::Consistent,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSolution {
    /// Full nodal coordinates.
    pub n: DVector<f64>,
    pub n_a: DVector<f64>,
    pub t_c: DVector<f64>,
    pub rest_lengths: DVector<f64>,
    pub material_states: Vec<MemberState>,
    /// Norm of the free-coordinate residual, N.
    pub residual: f64,
    pub iterations: usize,
}

impl EquilibriumSolution {
    pub fn state(&self) -> StructureState {
        StructureState {
            n: self.n.clone(),
            velocity: DVector::zeros(self.n.len()),
            rest_lengths: self.rest_lengths.clone(),
            material_states: self.material_states.clone(),
        }
    }
}

struct Iterate {
    n: DVector<f64>,
    set: AssemblySet,
    residual: DVector<f64>,
    norm: f64,
}

fn evaluate(
    model: &StructureModel,
    n: DVector<f64>,
    state: &StructureState,
    f_ex: &DVector<f64>,
    form: TangentForm,
) -> Result<Iterate> {
    let set = assembly::assemble_at(model, &n, &state.rest_lengths, &state.material_states, form)?;
    let residual = set.residual(f_ex);
    let norm = residual.norm();
    if !norm.is_finite() {
        return Err(Error::Diverged { time: 0.0 });
    }
    Ok(Iterate {
        n,
        set,
        residual,
        norm,
    })
}

/// Factorized tangent stiffness on the free coordinates.
pub enum TangentSolver {
    Cholesky(Cholesky<f64, Dyn>),
    Lu(LU<f64, Dyn, Dyn>),
}

impl TangentSolver {
    /// Cholesky, then LU; a singular matrix is reported with its null
    /// directions.
    pub fn new(k: &DMatrix<f64>) -> Result<Self> {
        if let Some(chol) = k.clone().cholesky() {
            return Ok(TangentSolver::Cholesky(chol));
        }
        let (null, sv) = null_space(k);
        if null.ncols() == 0 {
            let smax = sv.first().copied().unwrap_or(0.0);
            let smin = sv.last().copied().unwrap_or(0.0);
            if smin > 1e-13 * smax {
                return Ok(TangentSolver::Lu(k.clone().lu()));
            }
        }
        let null = if null.ncols() == 0 {
            // numerically singular but above the rank threshold: report the
            // weakest direction
            let (nn, _) = null_space_loose(k);
            nn
        } else {
            null
        };
        Err(Error::SingularStiffness {
            nullity: null.ncols(),
            null_directions: null
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
        })
    }

    /// Newton correction `−K⁻¹ r`.
    pub fn correction(&self, r: &DVector<f64>) -> DVector<f64> {
        match self {
            TangentSolver::Cholesky(c) => -c.solve(r),
            TangentSolver::Lu(lu) => -lu.solve(r).expect("nonsingular by construction"),
        }
    }
}

/// Solves `K_Taa Δ = −r`.
pub fn solve_tangent(k: &DMatrix<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(TangentSolver::new(k)?.correction(r))
}

fn null_space_loose(k: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let svd = k.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let (i, &s) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    (
        DMatrix::from_column_slice(k.ncols(), 1, v_t.row(i).transpose().as_slice()),
        s,
    )
}

/// Newton iteration on the residual `E_aᵀ(A_2c t_c − f_ex − g)`.
///
/// Steps are damped by halving until the simplified Newton correction
/// `K⁻¹ r(trial)`, computed with the current factorization, is shorter than
/// the step itself. Unlike the residual norm this test is not dominated by
/// stiff members, so long steps along soft directions are not cut back by
/// the second-order stretch they cause in the bars.
///
/// `n_b` overrides the constrained coordinates of `state0` when given.
pub fn solve_equilibrium(
    model: &StructureModel,
    state0: &StructureState,
    f_ex: &DVector<f64>,
    n_b: Option<&DVector<f64>>,
    options: &NewtonOptions,
) -> Result<EquilibriumSolution> {
    let (n_a0, n_b0) = model::split_coordinates(&state0.n, &model.boundary)?;
    let n_b = n_b.cloned().unwrap_or(n_b0);
    let n0 = model::scatter_coordinates(&n_a0, &n_b, &model.boundary)?;
    if f_ex.len() != model.n_coords() {
        return Err(Error::Dimension {
            context: "external force",
            expected: model.n_coords(),
            found: f_ex.len(),
        });
    }
    let tol = options
        .tolerance
        .unwrap_or_else(|| 1e-8 * f_ex.norm().max(1.0));
    let free = model.boundary.free();

    let mut current = evaluate(model, n0, state0, f_ex, options.tangent)?;
    let mut iterations = 0;
    loop {
        let k_aa = current.set.aa(&current.set.k_t);
        if current.norm <= tol.max(roundoff_floor(&k_aa, &current.n)) {
            break;
        }
        if iterations >= options.max_iterations {
            return Err(not_converged(iterations, &current, free));
        }
        iterations += 1;
        let solver = TangentSolver::new(&k_aa)?;
        let step = solver.correction(&current.residual);
        let size = step.norm();
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=options.max_halvings {
            let mut n = current.n.clone();
            for (k, &i) in free.iter().enumerate() {
                n[i] += alpha * step[k];
            }
            if let Ok(trial) = evaluate(model, n, state0, f_ex, options.tangent) {
                let simplified = solver.correction(&trial.residual).norm();
                if simplified < (1.0 - 0.25 * alpha) * size || trial.norm < current.norm {
                    accepted = Some(trial);
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some(trial) => current = trial,
            None => return Err(not_converged(iterations, &current, free)),
        }
        log::debug!(
            "newton iteration {iterations}: residual {:.3e}",
            current.norm
        );
    }
    let n_a = model::gather(&current.n, free)?;
    Ok(EquilibriumSolution {
        n_a,
        t_c: current.set.forces.t_c.clone(),
        rest_lengths: state0.rest_lengths.clone(),
        material_states: current.set.forces.states.clone(),
        residual: current.norm,
        iterations,
        n: current.n,
    })
}

/// Smallest residual norm resolvable in double precision:
/// `ε ‖K_Taa‖∞ ‖n‖∞ √n_a`. Stiff members turn one ulp of position into this
/// much force per coordinate.
pub fn roundoff_floor(k_aa: &DMatrix<f64>, n: &DVector<f64>) -> f64 {
    let k_inf = k_aa
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    f64::EPSILON * k_inf * n.amax() * (k_aa.nrows() as f64).sqrt()
}

fn not_converged(iterations: usize, it: &Iterate, free: &[usize]) -> Error {
    Error::NotConverged {
        iterations,
        residual: it.norm,
        best: free.iter().map(|&i| it.n[i]).collect(),
    }
}

/// Sequence of equilibria under a rest-length/load/boundary schedule sampled
/// at `substeps` equal fractions of its time window. Entry 0 is the
/// equilibrium at the start of the window; each substep warm-starts from the
/// previous one.
pub fn quasi_static_path(
    model: &StructureModel,
    state0: &StructureState,
    schedule: &ActuationSchedule,
    substeps: usize,
    options: &NewtonOptions,
) -> Result<Vec<EquilibriumSolution>> {
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be positive".into()));
    }
    schedule.validate_rest_lengths()?;
    let t_end = schedule.end_time();
    let mut out = Vec::with_capacity(substeps + 1);
    let mut state = state0.clone();
    for k in 0..=substeps {
        let t = t_end * k as f64 / substeps as f64;
        state.rest_lengths = schedule.rest_lengths_at(&state0.rest_lengths, t);
        let f_ex = schedule.forces_at(model.n_coords(), t);
        let mut n = state.n.clone();
        let mut v = DVector::zeros(n.len());
        let mut a = DVector::zeros(n.len());
        schedule.apply_boundary(t, &mut n, &mut v, &mut a);
        let n_b = model::gather(&n, model.boundary.fixed())?;
        let solution =
            solve_equilibrium(model, &state, &f_ex, Some(&n_b), options).map_err(|source| {
                Error::Substep {
                    substep: k,
                    source: Box::new(source),
                }
            })?;
        state = solution.state();
        out.push(solution);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::MaterialLaw;
    use crate::model::{BoundarySpec, Element, Member};
    use nalgebra::Vector3;

    fn hanging_string(mass_area: f64) -> StructureModel {
        StructureModel {
            nodes: DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 0.0, -1.0]),
            members: vec![Member::string(0, 1)],
            elements: vec![Element {
                members: vec![0],
                area: mass_area,
                material: 0,
                density: 1.0,
                rest_length: 1.0,
                damping: None,
            }],
            materials: vec![MaterialLaw::linear("soft", 1e4)],
            boundary: BoundarySpec::from_fixed(6, [0, 1, 2, 3, 4]).unwrap(),
            gravity: Vector3::zeros(),
        }
    }

    #[test]
    fn pinned_string_is_all_null() {
        let mut model = hanging_string(1e-4);
        model.nodes = DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        model.boundary = BoundarySpec::from_fixed(6, 0..6).unwrap();
        let basis = prestress_modes(&model, &model.nodes).unwrap();
        assert_eq!(basis.count(), 1);
    }

    #[test]
    fn hanging_load_matches_scalar_root() {
        // Tip load P on a vertical string: EA δ / l0 = P.
        let model = hanging_string(1e-2);
        let p = 5.0;
        let mut f = DVector::zeros(6);
        f[5] = -p;
        let state = StructureState::reference(&model);
        let sol = solve_equilibrium(&model, &state, &f, None, &NewtonOptions::default()).unwrap();
        let ea = 1e4 * 1e-2;
        // scalar Newton on EA (l − 1) / 1 = P
        let mut l: f64 = 1.0;
        for _ in 0..50 {
            l -= (ea * (l - 1.0) - p) / ea;
        }
        assert!((-sol.n[5] - l).abs() < 1e-10, "{} vs {l}", -sol.n[5]);
        assert!((sol.t_c[0] - p).abs() < 1e-8);
    }

    #[test]
    fn anchors_must_match_mode_count() {
        let mut model = hanging_string(1e-4);
        model.boundary = BoundarySpec::from_fixed(6, 0..6).unwrap();
        let basis = prestress_modes(&model, &model.nodes).unwrap();
        assert!(matches!(
            design_prestress(&model, &basis, &[]),
            Err(Error::AnchorCount {
                expected: 1,
                found: 0
            })
        ));
        assert!(matches!(
            design_prestress(&model, &basis, &[(0, -1.0)]),
            Err(Error::InfeasiblePrestress { element: 0, .. })
        ));
        let t = design_prestress(&model, &basis, &[(0, 3.0)]).unwrap();
        assert_eq!(t[0], 3.0);
    }

    #[test]
    fn singular_tangent_reports_null_direction() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let r = DVector::from_vec(vec![1.0, 1.0]);
        match solve_tangent(&k, &r) {
            Err(Error::SingularStiffness {
                nullity,
                null_directions,
            }) => {
                assert_eq!(nullity, 1);
                assert!((null_directions[0][1].abs() - 1.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let (basis, _) = null_space(&a);
        assert_eq!(basis.ncols(), 2);
        assert!((&a * &basis).amax() < 1e-14);
        let gram = basis.transpose() * &basis;
        assert!((gram - DMatrix::identity(2, 2)).amax() < 1e-14);
    }
}
