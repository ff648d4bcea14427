//! Generators for the benchmark structures: a planar clustered T-bar, a
//! two-stage clustered tower and a clustered Levy cable dome.
//!
//! Each generator returns the model in a prestressed equilibrium (rest
//! lengths designed from an anchored prestress mode), the default actuation
//! schedule and expected-value fixtures.

use std::f64::consts::PI;

use nalgebra::{DVector, Vector3};

use crate::error::{Error, Result};
use crate::materials::MaterialLaw;
use crate::model::{
    self, BoundarySpec, Element, Member, MemberKind, StructureModel, StructureState,
};
use crate::schedule::ActuationSchedule;
use crate::statics;

pub const STEEL_DENSITY: f64 = 7870.0;

/// Support layout of the planar T-bar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TBarSupport {
    /// Node 2 pinned in-plane, node 4 guided along Y. Five free coordinates.
    #[default]
    Pinned,
    /// Only the out-of-plane coordinates fixed; three in-plane rigid modes.
    Planar,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyParams {
    /// Number of sectors (multiple of 3 so each string group splits evenly
    /// into three clusters).
    pub complexity: usize,
    /// Radius of the pinned outer ring, m.
    pub outer_radius: f64,
    /// Inner ring radius as a fraction of the intermediate ring radius.
    pub deployment_ratio: f64,
    /// Heights of the outer-top, outer-bottom, inner-top and inner-bottom
    /// nodes, m.
    pub heights: [f64; 4],
    /// Intermediate ring radius as a fraction of the outer radius.
    pub ring_ratio: f64,
    /// Force anchored on the inner bars, N (negative: compression).
    pub inner_bar_force: f64,
}

impl Default for LevyParams {
    fn default() -> Self {
        Self {
            complexity: 6,
            outer_radius: 10.0,
            deployment_ratio: 0.5,
            heights: [1.0, -1.0, 1.5, -0.5],
            ring_ratio: 0.6,
            inner_bar_force: -5000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSpec {
    TBar(TBarSupport),
    Tower2,
    Levy(LevyParams),
}

impl ScenarioSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioSpec::TBar(_) => "tbar",
            ScenarioSpec::Tower2 => "tower2",
            ScenarioSpec::Levy(_) => "levy",
        }
    }
}

/// Expected values shipped with a generated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixtures {
    pub prestress_modes: usize,
    /// `(element, force)` anchors used to design the prestress.
    pub anchors: Vec<(usize, f64)>,
    /// Designed element forces, N.
    pub t_c: DVector<f64>,
    /// Element labels (member group names).
    pub labels: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub model: StructureModel,
    /// Prestressed equilibrium.
    pub state: StructureState,
    pub schedule: ActuationSchedule,
    pub fixtures: Fixtures,
}

pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
    match spec {
        ScenarioSpec::TBar(support) => tbar(*support),
        ScenarioSpec::Tower2 => tower2(),
        ScenarioSpec::Levy(params) => levy(params),
    }
}

fn steel_materials() -> Vec<MaterialLaw> {
    vec![
        MaterialLaw::preset("steel-Q235").expect("preset"),
        MaterialLaw::preset("steel-cable").expect("preset"),
    ]
}

fn element(members: Vec<usize>, kind: MemberKind, area: f64) -> Element {
    Element {
        members,
        area,
        material: if kind == MemberKind::Bar { 0 } else { 1 },
        density: STEEL_DENSITY,
        rest_length: 1.0,
        damping: None,
    }
}

fn flatten(nodes: &[[f64; 3]]) -> DVector<f64> {
    DVector::from_iterator(
        3 * nodes.len(),
        nodes.iter().flat_map(|p| p.iter().copied()),
    )
}

/// Designs the prestress from `anchors`, sets rest lengths and checks the
/// mode count.
fn prestress(
    mut model: StructureModel,
    anchors: Vec<(usize, f64)>,
    labels: Vec<String>,
    schedule: ActuationSchedule,
    name: &str,
) -> Result<Scenario> {
    let basis = statics::prestress_modes(&model, &model.nodes)?;
    let t_c = statics::design_prestress(&model, &basis, &anchors)?;
    let rest = statics::rest_lengths_for_forces(&model, &model.nodes, &t_c)?;
    for (e, el) in model.elements.iter_mut().enumerate() {
        el.rest_length = rest[e];
    }
    model::validate(&model).into_result()?;
    let state = StructureState::reference(&model);
    Ok(Scenario {
        name: name.to_string(),
        model,
        state,
        schedule,
        fixtures: Fixtures {
            prestress_modes: basis.count(),
            anchors,
            t_c,
            labels,
        },
    })
}

/// Element indices of the T-bar.
pub mod tbar_elements {
    pub const BAR_1: usize = 0;
    pub const BAR_2: usize = 1;
    /// Strings 3 and 4 over the pulley at node 4.
    pub const CLUSTER: usize = 2;
    pub const STRING_5: usize = 3;
    pub const STRING_6: usize = 4;
}

/// Planar T-bar: a horizontal bar between nodes 1 and 3 (2 m), a vertical
/// bar between nodes 2 and 4 (4 m), and four strings around the diamond.
/// The two upper strings form one cable running over a pulley at node 4.
///
/// Bar 1 is anchored at 100 N compression. The actuation schedule shortens
/// the upper cable by 2 m and lengthens strings 5 and 6 by 0.5 m over one
/// second.
pub fn tbar(support: TBarSupport) -> Result<Scenario> {
    let nodes = flatten(&[
        [-1.0, 0.0, 0.0],
        [0.0, -2.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 2.0, 0.0],
    ]);
    let members = vec![
        Member::bar(0, 2),
        Member::bar(1, 3),
        Member::string(0, 3),
        Member::string(3, 2),
        Member::string(0, 1),
        Member::string(1, 2),
    ];
    let string_area = 9.138e-7;
    let elements = vec![
        element(vec![0], MemberKind::Bar, 1.57e-4),
        element(vec![1], MemberKind::Bar, 4.447e-4),
        element(vec![2, 3], MemberKind::String, string_area),
        element(vec![4], MemberKind::String, string_area),
        element(vec![5], MemberKind::String, string_area),
    ];
    let mut fixed: Vec<usize> = (0..4).map(|i| 3 * i + 2).collect();
    if support == TBarSupport::Pinned {
        fixed.extend([3, 4, 9]);
    }
    let model = StructureModel {
        boundary: BoundarySpec::from_fixed(12, fixed)?,
        nodes,
        members,
        elements,
        materials: steel_materials(),
        gravity: Vector3::zeros(),
    };
    let labels = ["bar-1", "bar-2", "string-3-4", "string-5", "string-6"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    // In the planar layout the in-plane rigid motions do not add prestress
    // modes; both layouts have a single mode.
    let mut scenario = prestress(
        model,
        vec![(tbar_elements::BAR_1, -100.0)],
        labels,
        ActuationSchedule::new(),
        "tbar",
    )?;
    scenario.schedule = tbar_schedule(&scenario.model.rest_lengths(), 0.0, 1.0)?;
    Ok(scenario)
}

/// T-bar actuation over `[t0, t1]`: upper cable −2 m, strings 5 and 6
/// +0.5 m each.
pub fn tbar_schedule(base: &DVector<f64>, t0: f64, t1: f64) -> Result<ActuationSchedule> {
    use tbar_elements::*;
    ActuationSchedule::rest_length_ramp(
        base,
        &[(CLUSTER, -2.0), (STRING_5, 0.5), (STRING_6, 0.5)],
        t0,
        t1,
    )
}

/// Two-stage square tower of radius 1 m and stage height 1 m. The two
/// vertical strings above each bottom node run over a pulley at the middle
/// node and form one cable. Bottom nodes are pinned.
///
/// The four bottom strings and the first vertical cable are anchored at
/// 100 N; the schedule shortens the four vertical cables by 0.7 m.
pub fn tower2() -> Result<Scenario> {
    let ring = |angle0: f64, z: f64| -> Vec<[f64; 3]> {
        (0..4)
            .map(|i| {
                let a = angle0 + PI / 2.0 * i as f64;
                [a.cos(), a.sin(), z]
            })
            .collect()
    };
    let mut pts = ring(0.0, 0.0);
    pts.extend(ring(PI / 4.0, 1.0));
    pts.extend(ring(PI / 2.0, 2.0));
    let nodes = flatten(&pts);
    let b = |i: usize| i % 4;
    let m = |i: usize| 4 + i % 4;
    let t = |i: usize| 8 + i % 4;

    let mut members = Vec::new();
    let mut elements = Vec::new();
    let mut labels = Vec::new();
    for i in 0..4 {
        members.push(Member::bar(b(i), m(i + 1)));
    }
    for i in 0..4 {
        members.push(Member::bar(m(i), t(i + 1)));
    }
    for k in 0..8 {
        elements.push(element(vec![k], MemberKind::Bar, 2.53e-4));
        labels.push(format!("bar-{}", k + 1));
    }
    for i in 0..4 {
        let base = members.len();
        members.push(Member::string(b(i), m(i)));
        members.push(Member::string(m(i), t(i)));
        elements.push(element(vec![base, base + 1], MemberKind::String, 8.17e-7));
        labels.push(format!("vertical-{}", i + 1));
    }
    for (name, node, area) in [
        ("bottom", &b as &dyn Fn(usize) -> usize, 8.17e-7),
        ("middle", &m, 1e-8),
        ("top", &t, 5.78e-7),
    ] {
        for i in 0..4 {
            let k = members.len();
            members.push(Member::string(node(i), node(i + 1)));
            elements.push(element(vec![k], MemberKind::String, area));
            labels.push(format!("{name}-{}", i + 1));
        }
    }
    let model = StructureModel {
        boundary: BoundarySpec::from_fixed(36, 0..12)?,
        nodes,
        members,
        elements,
        materials: steel_materials(),
        gravity: Vector3::zeros(),
    };
    let anchors = vec![
        (8, 100.0),
        (12, 100.0),
        (13, 100.0),
        (14, 100.0),
        (15, 100.0),
    ];
    let mut scenario = prestress(model, anchors, labels, ActuationSchedule::new(), "tower2")?;
    let changes: Vec<(usize, f64)> = (8..12).map(|e| (e, -0.7)).collect();
    scenario.schedule =
        ActuationSchedule::rest_length_ramp(&scenario.model.rest_lengths(), &changes, 0.0, 1.0)?;
    Ok(scenario)
}

/// Member groups of the Levy dome, in element order.
pub const LEVY_GROUPS: [&str; 9] = ["OB", "IB", "ORS", "ODS", "IRS", "IDS", "OHS", "IHS", "THS"];

/// Levy cable dome with `p` sectors.
///
/// Rings: pinned outer nodes at radius R, outer bars (top/bottom nodes) at
/// radius `ring_ratio·R` rotated half a sector, inner bars at
/// `deployment_ratio·ring_ratio·R`. Bars stay individual; every string
/// group is split into three clusters of consecutive segments. The inner
/// bars are anchored at `inner_bar_force`.
pub fn levy(params: &LevyParams) -> Result<Scenario> {
    let p = params.complexity;
    if p < 3 || !p.is_multiple_of(3) {
        return Err(Error::InvalidArgument(format!(
            "levy complexity must be a positive multiple of 3, got {p}"
        )));
    }
    let c = params.deployment_ratio;
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "deployment ratio must lie in (0, 1], got {c}"
        )));
    }
    if !(params.outer_radius > 0.0 && params.ring_ratio > 0.0 && params.ring_ratio < 1.0) {
        return Err(Error::InvalidArgument(
            "levy radii must be positive and nested".into(),
        ));
    }
    let r0 = params.outer_radius;
    let r1 = params.ring_ratio * r0;
    let r2 = c * r1;
    let [z_ot, z_ob, z_it, z_ib] = params.heights;
    let theta = |i: usize| 2.0 * PI * i as f64 / p as f64;
    let phi = |i: usize| theta(i) + PI / p as f64;
    let at = |r: f64, a: f64, z: f64| [r * a.cos(), r * a.sin(), z];

    let mut pts = Vec::with_capacity(5 * p);
    pts.extend((0..p).map(|i| at(r0, theta(i), 0.0)));
    pts.extend((0..p).map(|i| at(r1, phi(i), z_ot)));
    pts.extend((0..p).map(|i| at(r1, phi(i), z_ob)));
    pts.extend((0..p).map(|i| at(r2, theta(i), z_it)));
    pts.extend((0..p).map(|i| at(r2, theta(i), z_ib)));
    let nodes = flatten(&pts);

    let pn = |i: usize| i % p;
    let otn = |i: usize| p + i % p;
    let obn = |i: usize| 2 * p + i % p;
    let itn = |i: usize| 3 * p + i % p;
    let ibn = |i: usize| 4 * p + i % p;
    let pairs = |f: &dyn Fn(usize) -> [(usize, usize); 2]| -> Vec<(usize, usize)> {
        (0..p).flat_map(f).collect()
    };
    let groups: Vec<(&str, MemberKind, Vec<(usize, usize)>)> = vec![
        (
            "OB",
            MemberKind::Bar,
            (0..p).map(|i| (obn(i), otn(i))).collect(),
        ),
        (
            "IB",
            MemberKind::Bar,
            (0..p).map(|i| (ibn(i), itn(i))).collect(),
        ),
        (
            "ORS",
            MemberKind::String,
            pairs(&|i| [(pn(i), otn(i)), (pn(i + 1), otn(i))]),
        ),
        (
            "ODS",
            MemberKind::String,
            pairs(&|i| [(pn(i), obn(i)), (pn(i + 1), obn(i))]),
        ),
        (
            "IRS",
            MemberKind::String,
            pairs(&|i| [(otn(i), itn(i)), (otn(i), itn(i + 1))]),
        ),
        (
            "IDS",
            MemberKind::String,
            pairs(&|i| [(otn(i), ibn(i)), (otn(i), ibn(i + 1))]),
        ),
        (
            "OHS",
            MemberKind::String,
            (0..p).map(|i| (obn(i), obn(i + 1))).collect(),
        ),
        (
            "IHS",
            MemberKind::String,
            (0..p).map(|i| (ibn(i), ibn(i + 1))).collect(),
        ),
        (
            "THS",
            MemberKind::String,
            (0..p).map(|i| (itn(i), itn(i + 1))).collect(),
        ),
    ];

    let (bar_area, string_area) = (1e-3, 1e-4);
    let mut members = Vec::new();
    let mut elements = Vec::new();
    let mut labels = Vec::new();
    for (name, kind, segs) in &groups {
        let base = members.len();
        members.extend(segs.iter().map(|&(a, b)| Member {
            tail: a,
            head: b,
            kind: *kind,
        }));
        if *kind == MemberKind::Bar {
            for j in 0..segs.len() {
                elements.push(element(vec![base + j], *kind, bar_area));
                labels.push(format!("{name}-{}", j + 1));
            }
        } else {
            let k = segs.len() / 3;
            for q in 0..3 {
                elements.push(element(
                    (base + q * k..base + (q + 1) * k).collect(),
                    *kind,
                    string_area,
                ));
                labels.push(format!("{name}-{}", q + 1));
            }
        }
    }
    let model = StructureModel {
        boundary: BoundarySpec::from_fixed(15 * p, 0..3 * p)?,
        nodes,
        members,
        elements,
        materials: steel_materials(),
        gravity: Vector3::zeros(),
    };
    // first inner bar follows the p outer bars
    let anchors = vec![(p, params.inner_bar_force)];
    prestress(model, anchors, labels, ActuationSchedule::new(), "levy")
}

/// Group name of an element label (`"IRS-2"` → `"IRS"`).
pub fn group_of(label: &str) -> &str {
    label.rsplit_once('-').map(|(g, _)| g).unwrap_or(label)
}
