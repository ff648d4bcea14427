//! Text formats: structure descriptions, actuation schedules and control
//! targets (TOML, 1-based indices), plus a plain dense matrix dump.
//!
//! Structure file:
//!
//! ```toml
//! format_version = 1
//! gravity = [0.0, 0.0, -9.81]         # optional, default zero
//! nodes = [[-1.0, 0.0, 0.0], [0.0, -2.0, 0.0]]
//! members = [[1, 2, "bar"]]           # tail, head, "bar" | "string"
//! clusters = [[1]]                    # member ids per element
//!
//! [[props]]                           # one entry per cluster, same order
//! area = 1.57e-4
//! material = "steel-Q235"
//! density = 7870.0
//! rest_length = 2.0                   # optional, default current length
//! damping = 3.0                       # optional, default critical
//!
//! [[materials]]
//! name = "steel-Q235"
//! preset = "steel-Q235"               # or kind + breakpoints
//!
//! [boundary]
//! fixed = [1, 2, 3]                   # coordinate ids: 3(node-1) + axis
//! [[boundary.motion]]
//! coordinate = 3
//! times = [0.0, 1.0]
//! values = [0.0, 0.1]
//! ```

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::control::{Allocation, ControlProblem, TargetCoordinate};
use crate::error::{Error, Result};
use crate::materials::{MaterialKind, MaterialLaw};
use crate::model::{self, BoundarySpec, Element, Member, MemberKind, StructureModel};
use crate::schedule::{ActuationSchedule, IndexedTrajectory, Trajectory};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StructureFile {
    format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gravity: Option<[f64; 3]>,
    nodes: Vec<[f64; 3]>,
    members: Vec<(usize, usize, String)>,
    clusters: Vec<Vec<usize>>,
    props: Vec<PropsEntry>,
    materials: Vec<MaterialEntry>,
    #[serde(default)]
    boundary: BoundaryEntry,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PropsEntry {
    area: f64,
    material: String,
    density: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rest_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    damping: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialEntry {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    /// `(strain, stress)` pairs; a linear law takes `modulus` instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    breakpoints: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    modulus: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundaryEntry {
    #[serde(default)]
    fixed: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    motion: Vec<MotionEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MotionEntry {
    coordinate: usize,
    times: Vec<f64>,
    values: Vec<f64>,
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

/// 1-based id to 0-based index.
fn zero_based(id: usize, what: &str) -> Result<usize> {
    id.checked_sub(1)
        .ok_or_else(|| parse_err(format!("{what} ids are 1-based; found 0")))
}

fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(parse_err(format!(
            "unsupported format_version {v} (expected {FORMAT_VERSION})"
        )));
    }
    Ok(())
}

fn trajectory(times: Vec<f64>, values: Vec<f64>, what: &str) -> Result<Trajectory> {
    Trajectory::new(times, values).map_err(|e| parse_err(format!("{what}: {e}")))
}

fn material_from_entry(entry: &MaterialEntry) -> Result<MaterialLaw> {
    let name = &entry.name;
    if let Some(preset) = &entry.preset {
        if entry.kind.is_some() || entry.breakpoints.is_some() || entry.modulus.is_some() {
            return Err(parse_err(format!(
                "material {name}: preset cannot be combined with kind, breakpoints or modulus"
            )));
        }
        let mut law = MaterialLaw::preset(preset)
            .ok_or_else(|| parse_err(format!("material {name}: unknown preset {preset}")))?;
        law.name = name.clone();
        return Ok(law);
    }
    let kind = match &entry.kind {
        Some(k) => MaterialKind::parse(k)
            .ok_or_else(|| parse_err(format!("material {name}: unknown kind {k}")))?,
        None => MaterialKind::Linear,
    };
    match (kind, entry.modulus, &entry.breakpoints) {
        (MaterialKind::Linear, Some(e), None) => Ok(MaterialLaw::linear(name, e)),
        (MaterialKind::Linear, None, Some(_)) | (_, None, Some(_)) => {
            let points: Vec<(f64, f64)> = entry
                .breakpoints
                .as_ref()
                .unwrap()
                .iter()
                .map(|p| (p[0], p[1]))
                .collect();
            Ok(MaterialLaw {
                name: name.clone(),
                kind,
                breakpoints: points,
            })
        }
        _ => Err(parse_err(format!(
            "material {name}: give either a preset, a modulus (linear) or breakpoints"
        ))),
    }
}

fn material_to_entry(law: &MaterialLaw) -> MaterialEntry {
    if let Some(p) = MaterialLaw::preset(&law.name) {
        if p == *law {
            return MaterialEntry {
                name: law.name.clone(),
                preset: Some(law.name.clone()),
                kind: None,
                breakpoints: None,
                modulus: None,
            };
        }
    }
    if law.kind == MaterialKind::Linear {
        return MaterialEntry {
            name: law.name.clone(),
            preset: None,
            kind: Some("linear".into()),
            breakpoints: None,
            modulus: Some(law.initial_modulus()),
        };
    }
    MaterialEntry {
        name: law.name.clone(),
        preset: None,
        kind: Some(law.kind.as_str().into()),
        breakpoints: Some(law.breakpoints.iter().map(|&(e, s)| [e, s]).collect()),
        modulus: None,
    }
}

/// Parses a structure description. Index ranges and physical constraints
/// are left to [`model::validate`].
pub fn parse_structure(text: &str) -> Result<StructureModel> {
    let file: StructureFile = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    check_version(file.format_version)?;

    let nodes = DVector::from_iterator(
        3 * file.nodes.len(),
        file.nodes.iter().flat_map(|p| p.iter().copied()),
    );
    let members = file
        .members
        .iter()
        .enumerate()
        .map(|(m, (tail, head, kind))| {
            let kind = match kind.as_str() {
                "bar" => MemberKind::Bar,
                "string" => MemberKind::String,
                other => {
                    return Err(parse_err(format!(
                        "member {}: kind must be \"bar\" or \"string\", found {other:?}",
                        m + 1
                    )))
                }
            };
            Ok(Member {
                tail: zero_based(*tail, "node")?,
                head: zero_based(*head, "node")?,
                kind,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let materials = file
        .materials
        .iter()
        .map(material_from_entry)
        .collect::<Result<Vec<_>>>()?;

    if file.props.len() != file.clusters.len() {
        return Err(parse_err(format!(
            "{} clusters but {} props entries",
            file.clusters.len(),
            file.props.len()
        )));
    }
    let mut elements = Vec::with_capacity(file.clusters.len());
    for (e, (ids, props)) in file.clusters.iter().zip(&file.props).enumerate() {
        let members_of = ids
            .iter()
            .map(|&m| zero_based(m, "member"))
            .collect::<Result<Vec<_>>>()?;
        let material = materials
            .iter()
            .position(|law| law.name == props.material)
            .ok_or_else(|| {
                parse_err(format!(
                    "cluster {}: unknown material {}",
                    e + 1,
                    props.material
                ))
            })?;
        let rest_length = match props.rest_length {
            Some(l) => l,
            // current length, when the node indices allow computing it
            None => members_of
                .iter()
                .map(|&m| {
                    let member = members.get(m)?;
                    let (a, b) = (member.tail, member.head);
                    (3 * a.max(b) + 2 < nodes.len())
                        .then(|| (model::node(&nodes, b) - model::node(&nodes, a)).norm())
                })
                .sum::<Option<f64>>()
                .unwrap_or(f64::NAN),
        };
        elements.push(Element {
            members: members_of,
            area: props.area,
            material,
            density: props.density,
            rest_length,
            damping: props.damping,
        });
    }

    let n_coords = nodes.len();
    let fixed = file
        .boundary
        .fixed
        .iter()
        .map(|&i| zero_based(i, "coordinate"))
        .collect::<Result<Vec<_>>>()?;
    let free = (0..n_coords).filter(|i| !fixed.contains(i)).collect();
    let mut boundary = BoundarySpec::from_parts(free, fixed);
    for entry in file.boundary.motion {
        let index = zero_based(entry.coordinate, "coordinate")?;
        boundary.motion.push(IndexedTrajectory {
            index,
            trajectory: trajectory(entry.times, entry.values, "boundary motion")?,
        });
    }

    Ok(StructureModel {
        nodes,
        members,
        elements,
        materials,
        boundary,
        gravity: file
            .gravity
            .map(Vector3::from)
            .unwrap_or_else(Vector3::zeros),
    })
}

/// Serializes a model; `parse_structure(&write_structure(m)?)` returns `m`.
pub fn write_structure(model: &StructureModel) -> Result<String> {
    let file = StructureFile {
        format_version: FORMAT_VERSION,
        gravity: Some(model.gravity.into()),
        nodes: (0..model.n_nodes())
            .map(|i| model::node(&model.nodes, i).into())
            .collect(),
        members: model
            .members
            .iter()
            .map(|m| (m.tail + 1, m.head + 1, m.kind.as_str().to_string()))
            .collect(),
        clusters: model
            .elements
            .iter()
            .map(|e| e.members.iter().map(|m| m + 1).collect())
            .collect(),
        props: model
            .elements
            .iter()
            .map(|e| PropsEntry {
                area: e.area,
                material: model.materials[e.material].name.clone(),
                density: e.density,
                rest_length: Some(e.rest_length),
                damping: e.damping,
            })
            .collect(),
        materials: model.materials.iter().map(material_to_entry).collect(),
        boundary: BoundaryEntry {
            fixed: model.boundary.fixed().iter().map(|i| i + 1).collect(),
            motion: model
                .boundary
                .motion
                .iter()
                .map(|m| MotionEntry {
                    coordinate: m.index + 1,
                    times: m.trajectory.times().to_vec(),
                    values: m.trajectory.values().to_vec(),
                })
                .collect(),
        },
    };
    toml::to_string(&file).map_err(|e| parse_err(e.to_string()))
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    format_version: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    rest_lengths: Vec<RestLengthEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    forces: Vec<MotionEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    boundary: Vec<MotionEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RestLengthEntry {
    element: usize,
    times: Vec<f64>,
    values: Vec<f64>,
    /// Values are changes relative to the model rest length.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    relative: bool,
}

/// Parses a schedule file:
///
/// ```toml
/// format_version = 1
/// [[rest_lengths]]
/// element = 3
/// times = [0.0, 1.0]
/// values = [0.0, -2.0]
/// relative = true
/// [[forces]]                # coordinate, times, values
/// [[boundary]]              # coordinate, times, values
/// ```
///
/// Relative rest-length entries are resolved against `model`.
pub fn parse_schedule(text: &str, model: &StructureModel) -> Result<ActuationSchedule> {
    let file: ScheduleFile = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    check_version(file.format_version)?;
    let mut schedule = ActuationSchedule::new();
    for entry in file.rest_lengths {
        let index = zero_based(entry.element, "element")?;
        if index >= model.n_elements() {
            return Err(parse_err(format!(
                "schedule: element {} out of range ({} elements)",
                entry.element,
                model.n_elements()
            )));
        }
        let mut tr = trajectory(entry.times, entry.values, "rest-length schedule")?;
        if entry.relative {
            tr = tr.offset(model.elements[index].rest_length);
        }
        schedule.rest_lengths.push(IndexedTrajectory {
            index,
            trajectory: tr,
        });
    }
    for (list, target, what) in [
        (file.forces, &mut schedule.forces, "force schedule"),
        (file.boundary, &mut schedule.boundary, "boundary schedule"),
    ] {
        for entry in list {
            let index = zero_based(entry.coordinate, "coordinate")?;
            if index >= model.n_coords() {
                return Err(parse_err(format!(
                    "{what}: coordinate {} out of range",
                    entry.coordinate
                )));
            }
            target.push(IndexedTrajectory {
                index,
                trajectory: trajectory(entry.times, entry.values, what)?,
            });
        }
    }
    for entry in &schedule.boundary {
        if !model.boundary.fixed().contains(&entry.index) {
            return Err(parse_err(format!(
                "boundary schedule: coordinate {} is not constrained",
                entry.index + 1
            )));
        }
    }
    schedule
        .validate_rest_lengths()
        .map_err(|e| parse_err(e.to_string()))?;
    Ok(schedule)
}

/// Writes absolute rest-length trajectories and force/boundary tables.
pub fn write_schedule(schedule: &ActuationSchedule) -> Result<String> {
    let table = |list: &[IndexedTrajectory]| -> Vec<MotionEntry> {
        list.iter()
            .map(|e| MotionEntry {
                coordinate: e.index + 1,
                times: e.trajectory.times().to_vec(),
                values: e.trajectory.values().to_vec(),
            })
            .collect()
    };
    let file = ScheduleFile {
        format_version: FORMAT_VERSION,
        rest_lengths: schedule
            .rest_lengths
            .iter()
            .map(|e| RestLengthEntry {
                element: e.index + 1,
                times: e.trajectory.times().to_vec(),
                values: e.trajectory.values().to_vec(),
                relative: false,
            })
            .collect(),
        forces: table(&schedule.forces),
        boundary: table(&schedule.boundary),
    };
    toml::to_string(&file).map_err(|e| parse_err(e.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetFile {
    format_version: u32,
    phi: f64,
    /// Default `2√phi` (critical damping of the error dynamics).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    psi: Option<f64>,
    active: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    allocation: Option<String>,
    targets: Vec<TargetEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetEntry {
    node: usize,
    axis: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
}

fn axis_offset(axis: &str) -> Result<usize> {
    match axis {
        "x" => Ok(0),
        "y" => Ok(1),
        "z" => Ok(2),
        other => Err(parse_err(format!(
            "axis must be x, y or z, found {other:?}"
        ))),
    }
}

/// Parses a control target file:
///
/// ```toml
/// format_version = 1
/// phi = 50.0
/// active = [3, 4, 5]
/// allocation = "nearest-current"   # or "minimum-norm" (default)
/// [[targets]]
/// node = 1
/// axis = "y"
/// value = 0.4                      # or times + values
/// ```
pub fn parse_targets(text: &str) -> Result<ControlProblem> {
    let file: TargetFile = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    check_version(file.format_version)?;
    let targets = file
        .targets
        .into_iter()
        .map(|t| {
            let node = zero_based(t.node, "node")?;
            let coordinate = 3 * node + axis_offset(&t.axis)?;
            let trajectory = match (t.value, t.times, t.values) {
                (Some(v), None, None) => Trajectory::constant(v),
                (None, Some(times), Some(values)) => trajectory(times, values, "target")?,
                _ => {
                    return Err(parse_err(format!(
                        "target on node {}: give value or times + values",
                        t.node
                    )))
                }
            };
            Ok(TargetCoordinate {
                coordinate,
                trajectory,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let active = file
        .active
        .iter()
        .map(|&e| zero_based(e, "element"))
        .collect::<Result<Vec<_>>>()?;
    let psi = file.psi.unwrap_or(2.0 * file.phi.sqrt());
    let mut problem = ControlProblem::new(targets, psi, file.phi, active);
    problem.allocation = match file.allocation.as_deref() {
        None | Some("minimum-norm") => Allocation::MinimumNorm,
        Some("nearest-current") => Allocation::NearestCurrent,
        Some(other) => return Err(parse_err(format!("unknown allocation {other:?}"))),
    };
    Ok(problem)
}

/// Writes a target file. Gains must be scalar multiples of the identity.
pub fn write_targets(problem: &ControlProblem) -> Result<String> {
    let n = problem.targets.len();
    let scalar = |g: &DMatrix<f64>, what: &str| -> Result<f64> {
        let v = if n > 0 { g[(0, 0)] } else { 0.0 };
        if g.shape() != (n, n) || (g - DMatrix::identity(n, n) * v).amax() != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "{what} gain is not a scalar multiple of I"
            )));
        }
        Ok(v)
    };
    let phi = scalar(&problem.phi, "position")?;
    let psi = scalar(&problem.psi, "velocity")?;
    let file = TargetFile {
        format_version: FORMAT_VERSION,
        phi,
        psi: Some(psi),
        active: problem.active.iter().map(|e| e + 1).collect(),
        allocation: Some(
            match problem.allocation {
                Allocation::MinimumNorm => "minimum-norm",
                Allocation::NearestCurrent => "nearest-current",
            }
            .into(),
        ),
        targets: problem
            .targets
            .iter()
            .map(|t| {
                let tr = &t.trajectory;
                let constant = tr.times().len() == 1;
                TargetEntry {
                    node: t.coordinate / 3 + 1,
                    axis: ["x", "y", "z"][t.coordinate % 3].into(),
                    value: constant.then(|| tr.values()[0]),
                    times: (!constant).then(|| tr.times().to_vec()),
                    values: (!constant).then(|| tr.values().to_vec()),
                }
            })
            .collect(),
    };
    toml::to_string(&file).map_err(|e| parse_err(e.to_string()))
}

/// Writes a dense matrix, one row per line, entries separated by spaces in
/// round-trip exponent notation.
pub fn write_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(' ');
            }
            write!(out, "{:e}", m[(r, c)]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Reads the format of [`write_matrix`]. Blank lines are skipped.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| parse_err(format!("line {}: bad number {s:?}", k + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(format!(
                    "line {}: {} entries, expected {}",
                    k + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}
