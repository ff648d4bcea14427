//! Constitutive laws, member force vectors and the rest-length/mass split of
//! sliding clustered strings.
//!
//! A [`MaterialLaw`] maps engineering strain to stress. Non-linear laws are
//! given as `(strain, stress)` breakpoints for positive strain; the curve
//! starts at the origin and is extended with the last segment slope. Compression
//! mirrors tension for the elastic kinds. The plastic kind follows the curve on
//! first loading and unloads along the initial slope, as in a kinematic
//! idealization without compressive yield.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::StructureModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaterialKind {
    Linear,
    MultilinearElastic,
    Plastic,
}

impl MaterialKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MaterialKind::Linear => "linear",
            MaterialKind::MultilinearElastic => "multilinear-elastic",
            MaterialKind::Plastic => "plastic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(MaterialKind::Linear),
            "multilinear-elastic" | "multilinear" => Some(MaterialKind::MultilinearElastic),
            "plastic" => Some(MaterialKind::Plastic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialLaw {
    pub name: String,
    pub kind: MaterialKind,
    /// `(strain, stress)` pairs after the origin. A linear law stores the
    /// single point `(1, E)`.
    pub breakpoints: Vec<(f64, f64)>,
}

/// History variables of one clustered element.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MemberState {
    pub max_strain: f64,
    pub plastic_offset: f64,
}

/// Result of evaluating a law at one strain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressPoint {
    pub stress: f64,
    pub secant: f64,
    pub tangent: f64,
    pub state: MemberState,
    /// Strain fell beyond the last breakpoint and the curve was extrapolated.
    pub extrapolated: bool,
}

impl MaterialLaw {
    pub fn linear(name: &str, modulus: f64) -> Self {
        Self {
            name: name.to_string(),
            kind: MaterialKind::Linear,
            breakpoints: vec![(1.0, modulus)],
        }
    }

    pub fn multilinear(name: &str, breakpoints: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.to_string(),
            kind: MaterialKind::MultilinearElastic,
            breakpoints,
        }
    }

    pub fn plastic(name: &str, breakpoints: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.to_string(),
            kind: MaterialKind::Plastic,
            breakpoints,
        }
    }

    /// Built-in laws: `steel-Q235` (bars, E = 206 GPa) and `steel-cable`
    /// (strings, E = 76 GPa).
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "steel-Q235" => Some(Self::linear(name, 2.06e11)),
            "steel-cable" => Some(Self::linear(name, 7.6e10)),
            _ => None,
        }
    }

    /// Slope of the first segment.
    pub fn initial_modulus(&self) -> f64 {
        let (e, s) = self.breakpoints[0];
        s / e
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        if self.breakpoints.is_empty() {
            return Err("no breakpoints".into());
        }
        if self.kind == MaterialKind::Linear && self.breakpoints.len() != 1 {
            return Err("linear law takes a single modulus".into());
        }
        if self
            .breakpoints
            .iter()
            .any(|&(e, s)| !e.is_finite() || !s.is_finite())
        {
            return Err("breakpoints must be finite".into());
        }
        let mut prev = (0.0, 0.0);
        for &(e, s) in &self.breakpoints {
            if e <= prev.0 {
                return Err("breakpoint strains must be strictly increasing from 0".into());
            }
            if s < prev.1 {
                return Err("breakpoint stresses must be nondecreasing".into());
            }
            prev = (e, s);
        }
        if !(self.initial_modulus() > 0.0) {
            return Err("initial modulus must be positive".into());
        }
        Ok(())
    }

    /// Curve for nonnegative strain: `(stress, tangent, extrapolated)`.
    fn backbone(&self, strain: f64) -> (f64, f64, bool) {
        if self.kind == MaterialKind::Linear {
            let e = self.initial_modulus();
            return (e * strain, e, false);
        }
        let mut prev = (0.0, 0.0);
        for &(e, s) in &self.breakpoints {
            if strain <= e {
                let slope = (s - prev.1) / (e - prev.0);
                return (prev.1 + slope * (strain - prev.0), slope, false);
            }
            prev = (e, s);
        }
        let n = self.breakpoints.len();
        let before = if n >= 2 {
            self.breakpoints[n - 2]
        } else {
            (0.0, 0.0)
        };
        let slope = (prev.1 - before.1) / (prev.0 - before.0);
        (prev.1 + slope * (strain - prev.0), slope, true)
    }

    /// Odd extension of the curve to negative strain.
    fn symmetric(&self, strain: f64) -> (f64, f64, bool) {
        if strain >= 0.0 {
            self.backbone(strain)
        } else {
            let (s, t, x) = self.backbone(-strain);
            (-s, t, x)
        }
    }

    /// Stress, secant and tangent moduli at `strain`, plus the updated history.
    pub fn stress(&self, strain: f64, state: MemberState) -> StressPoint {
        let e0 = self.initial_modulus();
        let (stress, tangent, extrapolated, next) = match self.kind {
            MaterialKind::Linear | MaterialKind::MultilinearElastic => {
                let (s, t, x) = self.symmetric(strain);
                (s, t, x, state)
            }
            MaterialKind::Plastic => {
                if strain >= state.max_strain && strain > 0.0 {
                    let (s, t, x) = self.backbone(strain);
                    let next = MemberState {
                        max_strain: strain,
                        plastic_offset: strain - s / e0,
                    };
                    (s, t, x, next)
                } else {
                    (e0 * (strain - state.plastic_offset), e0, false, state)
                }
            }
        };
        let secant = if strain == 0.0 { e0 } else { stress / strain };
        StressPoint {
            stress,
            secant,
            tangent,
            state: next,
            extrapolated,
        }
    }

    /// Strain at which the law (from `state`) carries `stress`. On plateaus
    /// the smallest such strain is returned.
    pub fn strain_for_stress(&self, stress: f64, state: MemberState) -> f64 {
        let e0 = self.initial_modulus();
        if self.kind == MaterialKind::Plastic {
            let reached = self.stress(state.max_strain, state).stress;
            if stress <= reached || state.max_strain == 0.0 && stress <= 0.0 {
                return state.plastic_offset + stress / e0;
            }
            return self.invert_backbone(stress);
        }
        if stress >= 0.0 {
            self.invert_backbone(stress)
        } else {
            -self.invert_backbone(-stress)
        }
    }

    fn invert_backbone(&self, stress: f64) -> f64 {
        if self.kind == MaterialKind::Linear {
            return stress / self.initial_modulus();
        }
        let mut prev = (0.0, 0.0);
        for &(e, s) in &self.breakpoints {
            if stress <= s && s > prev.1 {
                return prev.0 + (stress - prev.1) * (e - prev.0) / (s - prev.1);
            }
            prev = (e, s);
        }
        let n = self.breakpoints.len();
        let before = if n >= 2 {
            self.breakpoints[n - 2]
        } else {
            (0.0, 0.0)
        };
        let slope = (prev.1 - before.1) / (prev.0 - before.0);
        prev.0 + (stress - prev.1) / slope
    }

    /// Stored energy per unit volume at `strain`, J/m³. Plastic laws report
    /// the recoverable part.
    pub fn energy_density(&self, strain: f64, state: MemberState) -> f64 {
        match self.kind {
            MaterialKind::Plastic => {
                let s = self.stress(strain, state).stress;
                0.5 * s * s / self.initial_modulus()
            }
            _ => {
                let a = strain.abs();
                let mut w = 0.0;
                let mut prev = (0.0, 0.0);
                let pts: Vec<(f64, f64)> = if self.kind == MaterialKind::Linear {
                    vec![]
                } else {
                    self.breakpoints.clone()
                };
                for (e, s) in pts {
                    if a <= e {
                        break;
                    }
                    w += 0.5 * (s + prev.1) * (e - prev.0);
                    prev = (e, s);
                }
                let (s_end, _, _) = self.backbone(a);
                w + 0.5 * (s_end + prev.1) * (a - prev.0)
            }
        }
    }
}

/// Member forces and force densities of a structure at one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceVectors {
    /// Clustered element forces `t_c`, N (tension positive).
    pub t_c: DVector<f64>,
    /// Segment forces `t = Sᵀ t_c`, N.
    pub t: DVector<f64>,
    /// `x_c = t_c / l_c`, N/m.
    pub x_c: DVector<f64>,
    /// `x = t / l`, N/m.
    pub x: DVector<f64>,
    /// Element strains `(l_c − l_0c)/l_0c`.
    pub strain: DVector<f64>,
    /// Tangent moduli `E_t`, Pa; zero for slack strings.
    pub tangent: DVector<f64>,
    /// Secant moduli, Pa.
    pub secant: DVector<f64>,
    pub slack: Vec<bool>,
    /// Updated history, to be committed by the caller.
    pub states: Vec<MemberState>,
    pub extrapolated: bool,
}

/// Evaluates `t_c = A σ(ε)` per element with the slack clamp on strings.
///
/// `lengths` are segment lengths `l`; element lengths are summed from them.
pub fn member_forces(
    model: &StructureModel,
    lengths: &DVector<f64>,
    rest_lengths: &DVector<f64>,
    states: &[MemberState],
) -> Result<ForceVectors> {
    let n_ec = model.n_elements();
    let n_e = model.n_members();
    if lengths.len() != n_e {
        return Err(Error::Dimension {
            context: "segment lengths",
            expected: n_e,
            found: lengths.len(),
        });
    }
    if rest_lengths.len() != n_ec {
        return Err(Error::Dimension {
            context: "rest lengths",
            expected: n_ec,
            found: rest_lengths.len(),
        });
    }
    if states.len() != n_ec {
        return Err(Error::Dimension {
            context: "member states",
            expected: n_ec,
            found: states.len(),
        });
    }
    let l_c = crate::model::cluster_lengths(&model.elements, lengths)?;
    let mut out = ForceVectors {
        t_c: DVector::zeros(n_ec),
        t: DVector::zeros(n_e),
        x_c: DVector::zeros(n_ec),
        x: DVector::zeros(n_e),
        strain: DVector::zeros(n_ec),
        tangent: DVector::zeros(n_ec),
        secant: DVector::zeros(n_ec),
        slack: vec![false; n_ec],
        states: states.to_vec(),
        extrapolated: false,
    };
    for (e, el) in model.elements.iter().enumerate() {
        let strain = (l_c[e] - rest_lengths[e]) / rest_lengths[e];
        let point = model.material_of(e).stress(strain, states[e]);
        out.strain[e] = strain;
        out.states[e] = point.state;
        out.extrapolated |= point.extrapolated;
        let mut force = el.area * point.stress;
        let mut tangent = point.tangent;
        if model.is_string(e) && force < 0.0 {
            force = 0.0;
            tangent = 0.0;
            out.slack[e] = true;
        }
        out.t_c[e] = force;
        out.tangent[e] = tangent;
        out.secant[e] = point.secant;
        out.x_c[e] = force / l_c[e];
        for &m in &el.members {
            out.t[m] = force;
            out.x[m] = force / lengths[m];
        }
    }
    if out.extrapolated {
        log::warn!("strain beyond the last material breakpoint; curve extrapolated");
    }
    Ok(out)
}

/// `x_c = l̂_c⁻¹ t_c` and `x = l̂⁻¹ Sᵀ t_c`.
pub fn force_densities(
    model: &StructureModel,
    t_c: &DVector<f64>,
    lengths: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let l_c = crate::model::cluster_lengths(&model.elements, lengths)?;
    let x_c = t_c.component_div(&l_c);
    let mut x = DVector::zeros(model.n_members());
    for (e, el) in model.elements.iter().enumerate() {
        for &m in &el.members {
            x[m] = t_c[e] / lengths[m];
        }
    }
    Ok((x, x_c))
}

/// Per-segment rest lengths and masses for the current configuration.
///
/// All segments of a cluster carry the same tension and share area and
/// material, so they share the same strain: each segment receives the
/// fraction `l_i / l_c` of the element rest length. Single-member elements
/// keep their rest length unchanged. Masses are `ρ A l_0i`.
pub fn redistribute(
    model: &StructureModel,
    lengths: &DVector<f64>,
    rest_lengths: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let l_c = crate::model::cluster_lengths(&model.elements, lengths)?;
    let mut l0 = DVector::zeros(model.n_members());
    let mut mass = DVector::zeros(model.n_members());
    for (e, el) in model.elements.iter().enumerate() {
        if el.members.len() == 1 {
            l0[el.members[0]] = rest_lengths[e];
        } else {
            let ratio = rest_lengths[e] / l_c[e];
            for &m in &el.members {
                l0[m] = lengths[m] * ratio;
            }
        }
        for &m in &el.members {
            mass[m] = el.density * el.area * l0[m];
        }
    }
    Ok((l0, mass))
}

/// Rest length at which an element of current length `length` carries
/// `force`: `l_0 = l / (1 + ε(σ))` with `σ = force / area`.
pub fn rest_length_for_force(
    law: &MaterialLaw,
    area: f64,
    force: f64,
    length: f64,
    state: MemberState,
    element: usize,
) -> Result<f64> {
    let strain = law.strain_for_stress(force / area, state);
    if !(strain > -1.0) || !strain.is_finite() {
        return Err(Error::NonPhysicalForce {
            element,
            force,
            axial_stiffness: law.initial_modulus() * area,
        });
    }
    Ok(length / (1.0 + strain))
}
