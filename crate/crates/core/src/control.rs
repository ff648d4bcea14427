//! Closed-loop shape control with nonnegative force allocation.
//!
//! Target coordinates `n_c` follow the error dynamics `ë + ψė + φe = 0`.
//! Writing the free accelerations in terms of the element forces, the
//! target accelerations are affine in `t_c`:
//!
//! ```text
//! n̈_c = T M_aa⁻¹ E_aᵀ (f_ex + g − ζDṅ − A_2c t_c) − T M_aa⁻¹ M_ab n̈_b
//! ```
//!
//! so each step solves `Γ_act t_act ≈ μ − Γ_pas t_pas` in the least-squares
//! sense with `t_act ≥ 0` on strings, then converts the forces into rest
//! lengths for the active elements.

use nalgebra::{DMatrix, DVector};

use crate::assembly::{self, TangentForm};
use crate::dynamics::{DynamicState, Integrator, Sample, TimeHistory};
use crate::error::{Error, Result};
use crate::materials;
use crate::model::{self, StructureModel, StructureState};
use crate::nnls;
use crate::schedule::{ActuationSchedule, Trajectory};

/// One controlled coordinate and its reference trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetCoordinate {
    /// Full coordinate index (must be free).
    pub coordinate: usize,
    pub trajectory: Trajectory,
}

/// Tie-break among allocations that reach the same target accelerations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Allocation {
    /// Smallest active force vector.
    #[default]
    MinimumNorm,
    /// Active forces closest to the ones currently carried, which keeps the
    /// prestress level along self-stress directions.
    NearestCurrent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem {
    pub targets: Vec<TargetCoordinate>,
    /// Velocity gain, 1/s (n_c × n_c).
    pub psi: DMatrix<f64>,
    /// Position gain, 1/s² (n_c × n_c).
    pub phi: DMatrix<f64>,
    /// Active element indices; every other element is passive.
    pub active: Vec<usize>,
    /// Tikhonov weight relative to `‖Γ_act‖_F` used for the tie-break.
    pub regularization: f64,
    pub allocation: Allocation,
}

impl ControlProblem {
    /// Diagonal gains `ψ I`, `φ I`.
    pub fn new(targets: Vec<TargetCoordinate>, psi: f64, phi: f64, active: Vec<usize>) -> Self {
        let n_c = targets.len();
        Self {
            targets,
            psi: DMatrix::identity(n_c, n_c) * psi,
            phi: DMatrix::identity(n_c, n_c) * phi,
            active,
            regularization: 1e-6,
            allocation: Allocation::MinimumNorm,
        }
    }

    /// Critically damped gains for natural frequency `√phi`.
    pub fn critically_damped(targets: Vec<TargetCoordinate>, phi: f64, active: Vec<usize>) -> Self {
        Self::new(targets, 2.0 * phi.sqrt(), phi, active)
    }

    pub fn passive(&self, n_elements: usize) -> Vec<usize> {
        (0..n_elements)
            .filter(|e| !self.active.contains(e))
            .collect()
    }

    pub fn check(&self, model: &StructureModel) -> Result<()> {
        let n_c = self.targets.len();
        if n_c == 0 {
            return Err(Error::InvalidArgument(
                "control problem has no targets".into(),
            ));
        }
        for g in [&self.psi, &self.phi] {
            if g.shape() != (n_c, n_c) {
                return Err(Error::Dimension {
                    context: "control gains",
                    expected: n_c,
                    found: g.nrows(),
                });
            }
            if g.clone().cholesky().is_none() {
                return Err(Error::InvalidArgument(
                    "control gains must be positive definite".into(),
                ));
            }
        }
        for t in &self.targets {
            if !model.boundary.free().contains(&t.coordinate) {
                return Err(Error::InvalidArgument(format!(
                    "target coordinate {} is not free",
                    t.coordinate + 1
                )));
            }
        }
        let mut seen = vec![false; model.n_elements()];
        for &e in &self.active {
            if e >= model.n_elements() {
                return Err(Error::IndexOutOfRange {
                    index: e,
                    len: model.n_elements(),
                });
            }
            if seen[e] {
                return Err(Error::InvalidArgument(format!(
                    "element {} listed twice as active",
                    e + 1
                )));
            }
            seen[e] = true;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlStepResult {
    /// Forces of the active elements, N.
    pub t_c_act: DVector<f64>,
    /// Rest lengths realizing `t_c_act` at the current lengths, m.
    pub rest_lengths: DVector<f64>,
    /// `‖μ − Γ_pas t_pas − Γ_act t_act‖`, m/s².
    pub residual: f64,
    /// `n_c − n̄_c`, m.
    pub error: DVector<f64>,
    /// `ṅ_c − dn̄_c/dt`, m/s.
    pub error_rate: DVector<f64>,
}

/// Allocation matrices at a state: `(Γ, μ)` where `Γ = T M_aa⁻¹ E_aᵀ A_2c`
/// (all elements) and `μ` is the target-acceleration right-hand side.
pub fn allocation(
    model: &StructureModel,
    state: &StructureState,
    t: f64,
    problem: &ControlProblem,
    f_ex: &DVector<f64>,
    damping_scale: f64,
) -> Result<(DMatrix<f64>, DVector<f64>, DVector<f64>, DVector<f64>)> {
    let set = assembly::assemble(model, state, TangentForm::Consistent)?;
    let free = model.boundary.free();
    let m_aa = set.aa(&set.mass);
    let chol = m_aa.cholesky().ok_or(Error::SingularMass)?;
    let n_c = problem.targets.len();
    let rows: Vec<usize> = problem
        .targets
        .iter()
        .map(|tc| {
            free.iter()
                .position(|&i| i == tc.coordinate)
                .expect("checked free")
        })
        .collect();

    // T M_aa⁻¹ applied to vectors over free coordinates
    let gamma_full = chol.solve(&set.aa(&set.a2c));
    let gamma = assembly::rows(&gamma_full, &rows);

    let mut n_b_acc = DVector::zeros(model.n_coords());
    for entry in &model.boundary.motion {
        n_b_acc[entry.index] = entry.trajectory.acceleration(t);
    }
    let a_b = model::gather(&n_b_acc, model.boundary.fixed())?;
    let load = f_ex + &set.gravity - (&set.damping * &state.velocity) * damping_scale;
    let rhs = model::gather(&load, free)? - set.ab(&set.mass) * a_b;
    let drift = chol.solve(&rhs);

    let mut error = DVector::zeros(n_c);
    let mut error_rate = DVector::zeros(n_c);
    let mut target_acc = DVector::zeros(n_c);
    for (k, tc) in problem.targets.iter().enumerate() {
        error[k] = state.n[tc.coordinate] - tc.trajectory.value(t);
        error_rate[k] = state.velocity[tc.coordinate] - tc.trajectory.rate(t);
        target_acc[k] = tc.trajectory.acceleration(t);
    }
    let desired = target_acc - &problem.psi * &error_rate - &problem.phi * &error;
    let drift_c = DVector::from_iterator(n_c, rows.iter().map(|&r| drift[r]));
    // n̈_c = drift_c − Γ t_c  ⇒  Γ t_c = drift_c − n̈_c,desired
    let mu = drift_c - desired;
    Ok((gamma, mu, error, error_rate))
}

/// One allocation step at `state`.
pub fn control_step(
    model: &StructureModel,
    state: &StructureState,
    t: f64,
    problem: &ControlProblem,
    f_ex: &DVector<f64>,
    damping_scale: f64,
) -> Result<ControlStepResult> {
    let (gamma, mu, error, error_rate) = allocation(model, state, t, problem, f_ex, damping_scale)?;
    let geometry = model::member_geometry(&state.n, &model.members)?;
    let l_c = model::cluster_lengths(&model.elements, &geometry.lengths)?;
    let forces = materials::member_forces(
        model,
        &geometry.lengths,
        &state.rest_lengths,
        &state.material_states,
    )?;
    let passive = problem.passive(model.n_elements());
    let mut y = mu;
    for &e in &passive {
        y -= gamma.column(e) * forces.t_c[e];
    }
    let n_act = problem.active.len();
    let n_c = y.len();
    let g_act = DMatrix::from_fn(n_c, n_act, |r, c| gamma[(r, problem.active[c])]);
    let lambda = problem.regularization * g_act.norm();
    let mut g_aug = DMatrix::zeros(n_c + n_act, n_act);
    g_aug.view_mut((0, 0), (n_c, n_act)).copy_from(&g_act);
    for i in 0..n_act {
        g_aug[(n_c + i, i)] = lambda;
    }
    let mut y_aug = DVector::zeros(n_c + n_act);
    y_aug.rows_mut(0, n_c).copy_from(&y);
    if problem.allocation == Allocation::NearestCurrent {
        for (i, &e) in problem.active.iter().enumerate() {
            y_aug[n_c + i] = lambda * forces.t_c[e];
        }
    }
    let signs: Vec<bool> = problem.active.iter().map(|&e| model.is_string(e)).collect();
    let t_act = nnls::nnls_mixed(&g_aug, &y_aug, &signs)?;
    let residual = (&y - &g_act * &t_act).norm();
    if residual > 1e-6 * y.norm().max(1.0) {
        log::debug!("control allocation residual {residual:.3e} at t = {t:.4}");
    }
    let l_act = DVector::from_iterator(n_act, problem.active.iter().map(|&e| l_c[e]));
    let rest_lengths = active_rest_lengths(
        model,
        &problem.active,
        &t_act,
        &l_act,
        &state.material_states,
    )?;
    Ok(ControlStepResult {
        t_c_act: t_act,
        rest_lengths,
        residual,
        error,
        error_rate,
    })
}

/// Rest lengths at which the active elements carry `t_c_act` at lengths
/// `l_c_act`.
pub fn active_rest_lengths(
    model: &StructureModel,
    active: &[usize],
    t_c_act: &DVector<f64>,
    l_c_act: &DVector<f64>,
    states: &[materials::MemberState],
) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(active.len());
    for (k, &e) in active.iter().enumerate() {
        out[k] = materials::rest_length_for_force(
            model.material_of(e),
            model.elements[e].area,
            t_c_act[k],
            l_c_act[k],
            states.get(e).copied().unwrap_or_default(),
            e,
        )?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOptions {
    pub dt: f64,
    pub t_end: f64,
    pub stride: usize,
    pub damping_scale: f64,
}

impl Default for ControlOptions {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            t_end: 2.0,
            stride: 100,
            damping_scale: 0.0,
        }
    }
}

/// Controller outputs recorded alongside each history sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlRecord {
    pub t: f64,
    pub error: DVector<f64>,
    pub t_c_act: DVector<f64>,
    pub rest_lengths: DVector<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControlHistory {
    pub history: TimeHistory,
    pub records: Vec<ControlRecord>,
}

/// Rest lengths held over one step of length `dt`. They are computed for the
/// lengths predicted at mid-step, so that the force averaged over the step
/// matches the allocation to second order in `dt`.
fn held_rest_lengths(
    model: &StructureModel,
    state: &StructureState,
    problem: &ControlProblem,
    t_c_act: &DVector<f64>,
    dt: f64,
) -> Result<DVector<f64>> {
    let mid = &state.n + &state.velocity * (0.5 * dt);
    let geometry = model::member_geometry(&mid, &model.members)?;
    let l_c = model::cluster_lengths(&model.elements, &geometry.lengths)?;
    let l_act =
        DVector::from_iterator(problem.active.len(), problem.active.iter().map(|&e| l_c[e]));
    active_rest_lengths(
        model,
        &problem.active,
        t_c_act,
        &l_act,
        &state.material_states,
    )
}

/// Simulates the closed loop: each step allocates active forces, converts
/// them to rest lengths and integrates one RK4 step with those rest lengths
/// held. `loads` supplies external forces and boundary motion; it must not
/// prescribe rest lengths of active elements.
pub fn closed_loop_sim(
    model: &StructureModel,
    state0: &StructureState,
    problem: &ControlProblem,
    loads: &ActuationSchedule,
    options: &ControlOptions,
) -> Result<ControlHistory> {
    problem.check(model)?;
    if options.stride == 0 {
        return Err(Error::InvalidArgument("stride must be positive".into()));
    }
    if loads
        .rest_lengths
        .iter()
        .any(|r| problem.active.contains(&r.index))
    {
        return Err(Error::InvalidArgument(
            "schedule prescribes the rest length of an active element".into(),
        ));
    }
    let integrator = Integrator::new(model, options.dt, options.damping_scale)?;
    let steps = (options.t_end / options.dt).round() as usize;
    let mut current = DynamicState {
        t: 0.0,
        state: state0.clone(),
    };
    let mut out = ControlHistory::default();
    for k in 0..=steps {
        let f_ex = loads.forces_at(model.n_coords(), current.t);
        let step = control_step(
            model,
            &current.state,
            current.t,
            problem,
            &f_ex,
            options.damping_scale,
        )?;
        let applied = held_rest_lengths(model, &current.state, problem, &step.t_c_act, options.dt)?;
        for (i, &e) in problem.active.iter().enumerate() {
            current.state.rest_lengths[e] = applied[i];
        }
        if k % options.stride == 0 || k == steps {
            let sample: Sample = integrator.sample(&current)?;
            out.history.samples.push(sample);
            out.records.push(ControlRecord {
                t: current.t,
                error: step.error.clone(),
                t_c_act: step.t_c_act.clone(),
                rest_lengths: applied.clone(),
                residual: step.residual,
            });
        }
        if k == steps {
            break;
        }
        integrator.step(&mut current, loads)?;
        current.t = (k + 1) as f64 * options.dt;
    }
    Ok(out)
}
