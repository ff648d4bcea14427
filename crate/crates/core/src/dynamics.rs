//! Nonlinear time integration of the constrained equations of motion
//!
//! ```text
//! M_aa n̈_a = E_aᵀ(f_ex + g − ζ D ṅ − A_2c t_c) − M_ab n̈_b
//! ```
//!
//! with explicit fourth-order Runge–Kutta at a fixed step. Segment masses of
//! sliding cables are redistributed once per step (the mass matrix is frozen
//! within a step); member forces, slack and rest-length actuation are
//! re-evaluated at every stage. Plastic history is committed at the end of
//! each step.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::assembly::{self, TangentForm};
use crate::error::{Error, Result};
use crate::materials::{self, MemberState};
use crate::model::{self, StructureModel, StructureState};
use crate::schedule::ActuationSchedule;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsOptions {
    /// Step size, s.
    pub dt: f64,
    /// End time, s (integration starts at 0).
    pub t_end: f64,
    /// Record every `stride`-th step (the final step is always recorded).
    pub stride: usize,
    /// Global scale `ζ` on the per-element damping coefficients.
    pub damping_scale: f64,
    /// Skip the step-size stability estimate.
    pub skip_stability_check: bool,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            t_end: 1.0,
            stride: 1,
            damping_scale: 0.0,
            skip_stability_check: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Energies {
    pub kinetic: f64,
    pub strain: f64,
    pub gravity: f64,
}

impl Energies {
    pub fn total(&self) -> f64 {
        self.kinetic + self.strain + self.gravity
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub n: DVector<f64>,
    pub velocity: DVector<f64>,
    pub t_c: DVector<f64>,
    pub rest_lengths: DVector<f64>,
    pub energy: Energies,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeHistory {
    pub samples: Vec<Sample>,
}

impl TimeHistory {
    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// Time series of one full coordinate.
    pub fn coordinate(&self, index: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.n[index]).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }
}

/// A structure state at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicState {
    pub t: f64,
    pub state: StructureState,
}

/// Member-force evaluation at one configuration: internal nodal forces
/// `A_2c t_c` and damping forces `A_2c d̂_c A_2cᵀ ṅ`.
struct Forces {
    internal: DVector<f64>,
    damping: DVector<f64>,
}

fn member_forces(
    model: &StructureModel,
    n: &DVector<f64>,
    velocity: &DVector<f64>,
    rest_lengths: &DVector<f64>,
    states: &[MemberState],
    d_c: &DVector<f64>,
) -> Result<Forces> {
    let geometry = model::member_geometry(n, &model.members)?;
    let vectors = materials::member_forces(model, &geometry.lengths, rest_lengths, states)?;
    let owner = model.member_elements();
    // element elongation rates A_2cᵀ ṅ
    let mut rate = DVector::<f64>::zeros(model.n_elements());
    for (m, member) in model.members.iter().enumerate() {
        let u = geometry.unit(m);
        let mut r = 0.0;
        for i in 0..3 {
            r += u[i] * (velocity[3 * member.head + i] - velocity[3 * member.tail + i]);
        }
        rate[owner[m]] += r;
    }
    let mut internal = DVector::zeros(model.n_coords());
    let mut damping = DVector::zeros(model.n_coords());
    for (m, member) in model.members.iter().enumerate() {
        let u = geometry.unit(m);
        let e = owner[m];
        let t = vectors.t_c[e];
        let fd = d_c[e] * rate[e];
        for i in 0..3 {
            internal[3 * member.tail + i] -= t * u[i];
            internal[3 * member.head + i] += t * u[i];
            damping[3 * member.tail + i] -= fd * u[i];
            damping[3 * member.head + i] += fd * u[i];
        }
    }
    Ok(Forces { internal, damping })
}

/// Prescribed constrained motion at `t`: model trajectories first, then the
/// schedule's. Coordinates without a trajectory keep their value in `n` and
/// have zero velocity and acceleration.
fn apply_boundary(
    model: &StructureModel,
    schedule: &ActuationSchedule,
    t: f64,
    n: &mut DVector<f64>,
    velocity: &mut DVector<f64>,
    acceleration: &mut DVector<f64>,
) {
    for &i in model.boundary.fixed() {
        velocity[i] = 0.0;
        acceleration[i] = 0.0;
    }
    for entry in &model.boundary.motion {
        n[entry.index] = entry.trajectory.value(t);
        velocity[entry.index] = entry.trajectory.rate(t);
        acceleration[entry.index] = entry.trajectory.acceleration(t);
    }
    schedule.apply_boundary(t, n, velocity, acceleration);
}

/// Fixed-step integrator bound to one model.
pub struct Integrator<'a> {
    model: &'a StructureModel,
    d_c: DVector<f64>,
    dt: f64,
}

/// Mass data frozen over one step.
struct StepMass {
    chol: Cholesky<f64, Dyn>,
    m_ab: DMatrix<f64>,
    gravity: DVector<f64>,
}

impl<'a> Integrator<'a> {
    pub fn new(model: &'a StructureModel, dt: f64, damping_scale: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let d_c = assembly::damping_coefficients(model) * damping_scale;
        Ok(Self { model, d_c, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn step_mass(&self, n: &DVector<f64>, rest_lengths: &DVector<f64>) -> Result<StepMass> {
        let geometry = model::member_geometry(n, &self.model.members)?;
        let (_, masses) = materials::redistribute(self.model, &geometry.lengths, rest_lengths)?;
        let m = assembly::mass_matrix(self.model, &masses);
        let free = self.model.boundary.free();
        let m_aa = assembly::submatrix(&m, free, free);
        let m_ab = assembly::submatrix(&m, free, self.model.boundary.fixed());
        let chol = m_aa.cholesky().ok_or(Error::SingularMass)?;
        Ok(StepMass {
            chol,
            m_ab,
            gravity: assembly::gravity_vector(self.model, &masses),
        })
    }

    /// Free accelerations at one stage.
    #[allow(clippy::too_many_arguments)]
    fn stage(
        &self,
        mass: &StepMass,
        schedule: &ActuationSchedule,
        t: f64,
        base_rest: &DVector<f64>,
        states: &[MemberState],
        template: &DVector<f64>,
        n_a: &DVector<f64>,
        v_a: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let model = self.model;
        let free = model.boundary.free();
        let mut n = template.clone();
        let mut v = DVector::zeros(n.len());
        let mut a = DVector::zeros(n.len());
        apply_boundary(model, schedule, t, &mut n, &mut v, &mut a);
        for (k, &i) in free.iter().enumerate() {
            n[i] = n_a[k];
            v[i] = v_a[k];
        }
        let rest = schedule.rest_lengths_at(base_rest, t);
        let f_ex = schedule.forces_at(n.len(), t);
        let forces = member_forces(model, &n, &v, &rest, states, &self.d_c)?;
        let total = f_ex + &mass.gravity - forces.damping - forces.internal;
        let mut rhs = model::gather(&total, free)?;
        let a_b = model::gather(&a, model.boundary.fixed())?;
        rhs -= &mass.m_ab * a_b;
        Ok(mass.chol.solve(&rhs))
    }

    /// Advances `current` by one step under `schedule`.
    ///
    /// Rest lengths of elements without a trajectory are taken from
    /// `current` and held over the step.
    pub fn step(&self, current: &mut DynamicState, schedule: &ActuationSchedule) -> Result<()> {
        let model = self.model;
        let free = model.boundary.free();
        let h = self.dt;
        let t = current.t;
        let base = current.state.rest_lengths.clone();
        let rest_now = schedule.rest_lengths_at(&base, t);
        let mass = self.step_mass(&current.state.n, &rest_now)?;
        let states = current.state.material_states.clone();
        let template = current.state.n.clone();

        let y_n = model::gather(&current.state.n, free)?;
        let y_v = model::gather(&current.state.velocity, free)?;
        let f = |tt: f64, n_a: &DVector<f64>, v_a: &DVector<f64>| {
            self.stage(&mass, schedule, tt, &base, &states, &template, n_a, v_a)
        };
        let k1v = f(t, &y_n, &y_v)?;
        let k1n = y_v.clone();
        let n2 = &y_n + &k1n * (0.5 * h);
        let v2 = &y_v + &k1v * (0.5 * h);
        let k2v = f(t + 0.5 * h, &n2, &v2)?;
        let k2n = v2;
        let n3 = &y_n + &k2n * (0.5 * h);
        let v3 = &y_v + &k2v * (0.5 * h);
        let k3v = f(t + 0.5 * h, &n3, &v3)?;
        let k3n = v3;
        let n4 = &y_n + &k3n * h;
        let v4 = &y_v + &k3v * h;
        let k4v = f(t + h, &n4, &v4)?;
        let k4n = v4;
        let new_n = y_n + (k1n + k2n * 2.0 + k3n * 2.0 + k4n) * (h / 6.0);
        let new_v = y_v + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);

        let t_new = t + h;
        if new_n.iter().chain(new_v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Diverged { time: t_new });
        }
        let mut n = current.state.n.clone();
        let mut v = current.state.velocity.clone();
        let mut a = DVector::zeros(n.len());
        apply_boundary(model, schedule, t_new, &mut n, &mut v, &mut a);
        for (k, &i) in free.iter().enumerate() {
            n[i] = new_n[k];
            v[i] = new_v[k];
        }
        let rest = schedule.rest_lengths_at(&base, t_new);
        let geometry = model::member_geometry(&n, &model.members)
            .map_err(|_| Error::Diverged { time: t_new })?;
        let committed = materials::member_forces(model, &geometry.lengths, &rest, &states)?;
        current.t = t_new;
        current.state.n = n;
        current.state.velocity = v;
        current.state.rest_lengths = rest;
        current.state.material_states = committed.states;
        Ok(())
    }

    /// Free accelerations at a state (mass redistributed at that state).
    pub fn accelerations(
        &self,
        current: &DynamicState,
        schedule: &ActuationSchedule,
    ) -> Result<DVector<f64>> {
        let rest = schedule.rest_lengths_at(&current.state.rest_lengths, current.t);
        let mass = self.step_mass(&current.state.n, &rest)?;
        let free = self.model.boundary.free();
        let n_a = model::gather(&current.state.n, free)?;
        let v_a = model::gather(&current.state.velocity, free)?;
        self.stage(
            &mass,
            schedule,
            current.t,
            &current.state.rest_lengths,
            &current.state.material_states,
            &current.state.n,
            &n_a,
            &v_a,
        )
    }

    pub fn sample(&self, current: &DynamicState) -> Result<Sample> {
        let geometry = model::member_geometry(&current.state.n, &self.model.members)?;
        let forces = materials::member_forces(
            self.model,
            &geometry.lengths,
            &current.state.rest_lengths,
            &current.state.material_states,
        )?;
        Ok(Sample {
            t: current.t,
            n: current.state.n.clone(),
            velocity: current.state.velocity.clone(),
            t_c: forces.t_c,
            rest_lengths: current.state.rest_lengths.clone(),
            energy: energy_audit(self.model, &current.state)?,
        })
    }
}

/// Free accelerations `n̈_a` at `state` with time-`t` inputs from `schedule`.
pub fn accelerations(
    model: &StructureModel,
    state: &StructureState,
    schedule: &ActuationSchedule,
    t: f64,
    damping_scale: f64,
) -> Result<DVector<f64>> {
    let integrator = Integrator::new(model, 1.0, damping_scale)?;
    integrator.accelerations(
        &DynamicState {
            t,
            state: state.clone(),
        },
        schedule,
    )
}

/// Highest undamped natural frequency at `state`, Hz.
pub fn max_frequency(model: &StructureModel, state: &StructureState) -> Result<f64> {
    let set = assembly::assemble(model, state, TangentForm::Consistent)?;
    let m_aa = set.aa(&set.mass);
    let k_aa = set.aa(&set.k_t);
    let chol = m_aa.cholesky().ok_or(Error::SingularMass)?;
    let l_inv = chol.l().try_inverse().ok_or(Error::SingularMass)?;
    let a = &l_inv * k_aa * l_inv.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let eig = a.symmetric_eigenvalues();
    let w2 = eig.iter().cloned().fold(0.0, f64::max);
    Ok(w2.sqrt() / (2.0 * std::f64::consts::PI))
}

/// Integrates from `state0` at t = 0 to `options.t_end`.
///
/// Samples are taken every `stride` steps starting with the initial state;
/// the final step is always recorded.
pub fn integrate(
    model: &StructureModel,
    state0: &StructureState,
    schedule: &ActuationSchedule,
    options: &DynamicsOptions,
) -> Result<TimeHistory> {
    if options.stride == 0 {
        return Err(Error::InvalidArgument("stride must be positive".into()));
    }
    if !(options.t_end >= 0.0) {
        return Err(Error::InvalidArgument(
            "end time must be nonnegative".into(),
        ));
    }
    schedule.validate_rest_lengths()?;
    let integrator = Integrator::new(model, options.dt, options.damping_scale)?;
    if !options.skip_stability_check {
        if let Ok(f_max) = max_frequency(model, state0) {
            if options.dt > 0.1 / f_max {
                log::warn!(
                    "time step {:.3e} s exceeds 0.1/f_max = {:.3e} s (f_max = {:.4e} Hz)",
                    options.dt,
                    0.1 / f_max,
                    f_max
                );
            }
        }
    }
    let steps = (options.t_end / options.dt).round() as usize;
    let mut current = DynamicState {
        t: 0.0,
        state: state0.clone(),
    };
    {
        let mut v = current.state.velocity.clone();
        let mut a = DVector::zeros(v.len());
        apply_boundary(model, schedule, 0.0, &mut current.state.n, &mut v, &mut a);
        current.state.velocity = v;
        current.state.rest_lengths = schedule.rest_lengths_at(&state0.rest_lengths, 0.0);
    }
    let mut history = TimeHistory::default();
    history.samples.push(integrator.sample(&current)?);
    for k in 1..=steps {
        integrator.step(&mut current, schedule)?;
        // keep time on the grid rather than accumulating rounding
        current.t = k as f64 * options.dt;
        if k % options.stride == 0 || k == steps {
            history.samples.push(integrator.sample(&current)?);
        }
    }
    Ok(history)
}

/// Kinetic, strain and gravitational energy at a state, J.
///
/// Kinetic energy uses the redistributed consistent mass matrix; strain
/// energy integrates the element laws (zero for slack strings); the
/// gravitational potential is `−gᵀn`.
pub fn energy_audit(model: &StructureModel, state: &StructureState) -> Result<Energies> {
    let geometry = model::member_geometry(&state.n, &model.members)?;
    let l_c = model::cluster_lengths(&model.elements, &geometry.lengths)?;
    let (_, masses) = materials::redistribute(model, &geometry.lengths, &state.rest_lengths)?;
    let m = assembly::mass_matrix(model, &masses);
    let kinetic = 0.5 * state.velocity.dot(&(&m * &state.velocity));
    let mut strain = 0.0;
    for (e, el) in model.elements.iter().enumerate() {
        let l0 = state.rest_lengths[e];
        let eps = (l_c[e] - l0) / l0;
        if model.is_string(e) && eps < 0.0 {
            continue;
        }
        let state_e = state.material_states.get(e).copied().unwrap_or_default();
        strain += el.area * l0 * model.material_of(e).energy_density(eps, state_e);
    }
    let g = assembly::gravity_vector(model, &masses);
    Ok(Energies {
        kinetic,
        strain,
        gravity: -g.dot(&state.n),
    })
}
