//! Structure description: nodes, members, clustering, boundary conditions and
//! the index algebra shared by every other module.
//!
//! Nodal coordinates are stored as one flat vector `[x1, y1, z1, x2, ...]`.
//! Members are oriented from a tail node to a head node, which fixes the sign
//! convention of the incidence matrix `C` (−1 at the tail, +1 at the head).
//! Members are grouped into *elements*: a bar or an individual string is an
//! element of one member, a clustered string is an element of several string
//! segments running over frictionless pulleys. The element/member map is the
//! clustering matrix `S`; `S = I` recovers a traditional tensegrity.
//!
//! All indices are 0-based here. The structure file uses 1-based indices and
//! converts at the I/O boundary.

use std::fmt;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{Error, Result};
use crate::materials::MaterialLaw;
use crate::schedule::IndexedTrajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MemberKind {
    Bar,
    String,
}

impl MemberKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MemberKind::Bar => "bar",
            MemberKind::String => "string",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Member {
    pub tail: usize,
    pub head: usize,
    pub kind: MemberKind,
}

impl Member {
    pub fn bar(tail: usize, head: usize) -> Self {
        Self {
            tail,
            head,
            kind: MemberKind::Bar,
        }
    }

    pub fn string(tail: usize, head: usize) -> Self {
        Self {
            tail,
            head,
            kind: MemberKind::String,
        }
    }
}

/// A clustered element: one or more members sharing a single axial force.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    /// Member indices, in the order the cable runs over them.
    pub members: Vec<usize>,
    /// Cross-section area, m².
    pub area: f64,
    /// Index into [`StructureModel::materials`].
    pub material: usize,
    /// Density, kg/m³.
    pub density: f64,
    /// Rest length of the whole element, m.
    pub rest_length: f64,
    /// Viscous damping coefficient, N·s/m. `None` means the critical value.
    pub damping: Option<f64>,
}

/// Free/constrained split of the nodal coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundarySpec {
    free: Vec<usize>,
    fixed: Vec<usize>,
    /// Optional prescribed trajectories for constrained coordinates.
    pub motion: Vec<IndexedTrajectory>,
}

impl BoundarySpec {
    /// Boundary with the given constrained coordinates; every other
    /// coordinate is free.
    pub fn from_fixed(n_coords: usize, fixed: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut fixed: Vec<usize> = fixed.into_iter().collect();
        fixed.sort_unstable();
        fixed.dedup();
        if let Some(&bad) = fixed.iter().find(|&&i| i >= n_coords) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: n_coords,
            });
        }
        let mut is_fixed = vec![false; n_coords];
        for &i in &fixed {
            is_fixed[i] = true;
        }
        let free = (0..n_coords).filter(|&i| !is_fixed[i]).collect();
        Ok(Self {
            free,
            fixed,
            motion: Vec::new(),
        })
    }

    /// Boundary from explicit free and constrained lists. The lists are kept
    /// as given so that [`validate`] can report overlaps and gaps.
    pub fn from_parts(free: Vec<usize>, fixed: Vec<usize>) -> Self {
        let mut free = free;
        let mut fixed = fixed;
        free.sort_unstable();
        fixed.sort_unstable();
        Self {
            free,
            fixed,
            motion: Vec::new(),
        }
    }

    pub fn unconstrained(n_coords: usize) -> Self {
        Self {
            free: (0..n_coords).collect(),
            fixed: Vec::new(),
            motion: Vec::new(),
        }
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn fixed(&self) -> &[usize] {
        &self.fixed
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn n_fixed(&self) -> usize {
        self.fixed.len()
    }
}

/// Immutable description of a clustered tensegrity structure.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureModel {
    /// Reference nodal coordinates, flat `[x1, y1, z1, ...]`, m.
    pub nodes: DVector<f64>,
    pub members: Vec<Member>,
    pub elements: Vec<Element>,
    pub materials: Vec<MaterialLaw>,
    pub boundary: BoundarySpec,
    /// Gravitational acceleration (a_x, a_y, a_z), m/s².
    pub gravity: Vector3<f64>,
}

impl StructureModel {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len() / 3
    }

    pub fn n_coords(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_members(&self) -> usize {
        self.members.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Kind of an element, taken from its first member.
    pub fn element_kind(&self, element: usize) -> MemberKind {
        self.members[self.elements[element].members[0]].kind
    }

    pub fn is_string(&self, element: usize) -> bool {
        self.element_kind(element) == MemberKind::String
    }

    /// Element index for every member (the column structure of `S`).
    ///
    /// Assumes a valid partition; unassigned members map to `usize::MAX`.
    pub fn member_elements(&self) -> Vec<usize> {
        let mut owner = vec![usize::MAX; self.members.len()];
        for (e, el) in self.elements.iter().enumerate() {
            for &m in &el.members {
                if m < owner.len() {
                    owner[m] = e;
                }
            }
        }
        owner
    }

    pub fn rest_lengths(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.elements.len(),
            self.elements.iter().map(|e| e.rest_length),
        )
    }

    pub fn areas(&self) -> DVector<f64> {
        DVector::from_iterator(self.elements.len(), self.elements.iter().map(|e| e.area))
    }

    pub fn densities(&self) -> DVector<f64> {
        DVector::from_iterator(self.elements.len(), self.elements.iter().map(|e| e.density))
    }

    pub fn material_of(&self, element: usize) -> &MaterialLaw {
        &self.materials[self.elements[element].material]
    }

    /// Initial (first-segment) Young's modulus per element.
    pub fn initial_moduli(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.elements.len(),
            (0..self.elements.len()).map(|e| self.material_of(e).initial_modulus()),
        )
    }

    /// Signed incidence matrix `C` (n_e × n_n).
    pub fn connectivity_matrix(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.members.len(), self.n_nodes());
        for (m, member) in self.members.iter().enumerate() {
            c[(m, member.tail)] = -1.0;
            c[(m, member.head)] = 1.0;
        }
        c
    }

    /// Clustering matrix `S` (n_ec × n_e).
    pub fn clustering_matrix(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.elements.len(), self.members.len());
        for (e, el) in self.elements.iter().enumerate() {
            for &m in &el.members {
                s[(e, m)] = 1.0;
            }
        }
        s
    }

    /// True when every element holds exactly one member (`S = I` up to ordering).
    pub fn is_unclustered(&self) -> bool {
        self.elements.iter().all(|e| e.members.len() == 1)
    }

    /// The same structure with every clustered string split into individual
    /// strings (the traditional-tensegrity counterpart).
    ///
    /// Each segment receives the element's area, material and density; the
    /// element rest length is shared out in proportion to the segment lengths
    /// of `n` (equal strain along the cable).
    pub fn unclustered(&self, n: &DVector<f64>) -> Result<StructureModel> {
        let geometry = member_geometry(n, &self.members)?;
        let mut elements = Vec::with_capacity(self.members.len());
        let owner = self.member_elements();
        for (m, &e) in owner.iter().enumerate() {
            let el = &self.elements[e];
            let l_c: f64 = el.members.iter().map(|&k| geometry.lengths[k]).sum();
            elements.push(Element {
                members: vec![m],
                area: el.area,
                material: el.material,
                density: el.density,
                rest_length: if el.members.len() == 1 {
                    el.rest_length
                } else {
                    el.rest_length * geometry.lengths[m] / l_c
                },
                damping: el.damping,
            });
        }
        Ok(StructureModel {
            elements,
            ..self.clone()
        })
    }
}

/// Outcome of [`validate`]: empty means the model is usable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, msg: impl Into<String>) {
        self.violations.push(msg.into());
    }

    /// Converts a failed report into an error.
    pub fn into_result(self) -> Result<()> {
        if self.passed() {
            Ok(())
        } else {
            Err(Error::InvalidModel(self.violations.join("; ")))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return write!(f, "pass");
        }
        writeln!(f, "fail ({} violations)", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of a model. Messages use 1-based indices.
pub fn validate(model: &StructureModel) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n_coords = model.nodes.len();
    if !n_coords.is_multiple_of(3) {
        report.push(format!(
            "nodal coordinate vector length {n_coords} is not a multiple of 3"
        ));
        return report;
    }
    let n_nodes = n_coords / 3;
    if model.nodes.iter().any(|v| !v.is_finite()) {
        report.push("nodal coordinates must be finite");
    }

    let mut touched = vec![false; n_nodes];
    for (m, member) in model.members.iter().enumerate() {
        let label = m + 1;
        if member.tail >= n_nodes || member.head >= n_nodes {
            report.push(format!("member {label}: node index out of range"));
            continue;
        }
        if member.tail == member.head {
            report.push(format!("member {label}: tail and head are the same node"));
            continue;
        }
        touched[member.tail] = true;
        touched[member.head] = true;
        let d = node(&model.nodes, member.head) - node(&model.nodes, member.tail);
        if d.norm() == 0.0 {
            report.push(format!(
                "member {label}: coincident nodes {} and {} (zero length)",
                member.tail + 1,
                member.head + 1
            ));
        }
    }
    for (i, t) in touched.iter().enumerate() {
        if !t {
            report.push(format!("node {}: dangling (no member attached)", i + 1));
        }
    }

    // Partition property of S: every member in exactly one element.
    let mut count = vec![0usize; model.members.len()];
    for (e, el) in model.elements.iter().enumerate() {
        let label = e + 1;
        if el.members.is_empty() {
            report.push(format!("element {label}: no members"));
        }
        for &m in &el.members {
            if m >= model.members.len() {
                report.push(format!(
                    "element {label}: member index {} out of range",
                    m + 1
                ));
            } else {
                count[m] += 1;
            }
        }
        let kinds: Vec<MemberKind> = el
            .members
            .iter()
            .filter(|&&m| m < model.members.len())
            .map(|&m| model.members[m].kind)
            .collect();
        if kinds.windows(2).any(|w| w[0] != w[1]) {
            report.push(format!("element {label}: mixes bars and strings"));
        }
        if el.members.len() > 1 && kinds.contains(&MemberKind::Bar) {
            report.push(format!("element {label}: bars cannot be clustered"));
        }
        if !(el.area > 0.0 && el.area.is_finite()) {
            report.push(format!("element {label}: nonpositive area"));
        }
        if !(el.density > 0.0 && el.density.is_finite()) {
            report.push(format!("element {label}: nonpositive density"));
        }
        if !(el.rest_length > 0.0 && el.rest_length.is_finite()) {
            report.push(format!("element {label}: nonpositive rest length"));
        }
        if let Some(d) = el.damping {
            if !(d >= 0.0 && d.is_finite()) {
                report.push(format!("element {label}: negative damping coefficient"));
            }
        }
        if el.material >= model.materials.len() {
            report.push(format!("element {label}: unknown material"));
        }
    }
    for (m, &c) in count.iter().enumerate() {
        match c {
            0 => report.push(format!(
                "member {}: member unassigned to any cluster",
                m + 1
            )),
            1 => {}
            _ => report.push(format!("member {}: assigned to {c} clusters", m + 1)),
        }
    }

    for (i, law) in model.materials.iter().enumerate() {
        if let Err(e) = law.check() {
            report.push(format!("material {} ({}): {e}", i + 1, law.name));
        }
    }

    // Boundary: disjoint free/constrained sets covering every coordinate.
    let mut seen = vec![0u8; n_coords];
    for &i in model.boundary.free() {
        if i >= n_coords {
            report.push(format!("boundary: free index {} out of range", i + 1));
        } else {
            seen[i] |= 1;
        }
    }
    for &i in model.boundary.fixed() {
        if i >= n_coords {
            report.push(format!(
                "boundary: constrained index {} out of range",
                i + 1
            ));
        } else {
            seen[i] |= 2;
        }
    }
    for (i, s) in seen.iter().enumerate() {
        match s {
            3 => report.push(format!(
                "boundary: coordinate {}: index in both free and constrained sets",
                i + 1
            )),
            0 => report.push(format!(
                "boundary: coordinate {}: neither free nor constrained",
                i + 1
            )),
            _ => {}
        }
    }
    for entry in &model.boundary.motion {
        if !model.boundary.fixed().contains(&entry.index) {
            report.push(format!(
                "boundary: prescribed motion on coordinate {} which is not constrained",
                entry.index + 1
            ));
        }
    }
    if model.gravity.iter().any(|v| !v.is_finite()) {
        report.push("gravity must be finite");
    }
    report
}

pub(crate) fn node(n: &DVector<f64>, i: usize) -> Vector3<f64> {
    Vector3::new(n[3 * i], n[3 * i + 1], n[3 * i + 2])
}

/// Gathers the free and constrained coordinates: `(E_aᵀ n, E_bᵀ n)`.
pub fn split_coordinates(
    n: &DVector<f64>,
    boundary: &BoundarySpec,
) -> Result<(DVector<f64>, DVector<f64>)> {
    Ok((gather(n, boundary.free())?, gather(n, boundary.fixed())?))
}

/// Inverse of [`split_coordinates`]: `E_a n_a + E_b n_b`.
pub fn scatter_coordinates(
    n_a: &DVector<f64>,
    n_b: &DVector<f64>,
    boundary: &BoundarySpec,
) -> Result<DVector<f64>> {
    let total = boundary.n_free() + boundary.n_fixed();
    if n_a.len() != boundary.n_free() {
        return Err(Error::Dimension {
            context: "free coordinates",
            expected: boundary.n_free(),
            found: n_a.len(),
        });
    }
    if n_b.len() != boundary.n_fixed() {
        return Err(Error::Dimension {
            context: "constrained coordinates",
            expected: boundary.n_fixed(),
            found: n_b.len(),
        });
    }
    let mut n = DVector::zeros(total);
    for (k, &i) in boundary.free().iter().enumerate() {
        if i >= total {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: total,
            });
        }
        n[i] = n_a[k];
    }
    for (k, &i) in boundary.fixed().iter().enumerate() {
        if i >= total {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: total,
            });
        }
        n[i] = n_b[k];
    }
    Ok(n)
}

pub fn gather(v: &DVector<f64>, idx: &[usize]) -> Result<DVector<f64>> {
    if let Some(&bad) = idx.iter().find(|&&i| i >= v.len()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: v.len(),
        });
    }
    Ok(DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i])))
}

/// Member direction vectors and lengths at a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberGeometry {
    /// Column `m` is `h_m = n_head − n_tail` (3 × n_e).
    pub directions: DMatrix<f64>,
    pub lengths: DVector<f64>,
}

impl MemberGeometry {
    pub fn direction(&self, m: usize) -> Vector3<f64> {
        Vector3::new(
            self.directions[(0, m)],
            self.directions[(1, m)],
            self.directions[(2, m)],
        )
    }

    /// Unit vector along member `m`.
    pub fn unit(&self, m: usize) -> Vector3<f64> {
        self.direction(m) / self.lengths[m]
    }
}

/// `H = N Cᵀ` and `l_m = ‖h_m‖`.
pub fn member_geometry(n: &DVector<f64>, members: &[Member]) -> Result<MemberGeometry> {
    let n_nodes = n.len() / 3;
    let mut directions = DMatrix::zeros(3, members.len());
    let mut lengths = DVector::zeros(members.len());
    for (m, member) in members.iter().enumerate() {
        for idx in [member.tail, member.head] {
            if idx >= n_nodes {
                return Err(Error::IndexOutOfRange {
                    index: 3 * idx,
                    len: n.len(),
                });
            }
        }
        let h = node(n, member.head) - node(n, member.tail);
        let l = h.norm();
        if !(l > 0.0) {
            return Err(Error::DegenerateGeometry {
                member: m,
                tail: member.tail,
                head: member.head,
            });
        }
        directions.set_column(m, &h);
        lengths[m] = l;
    }
    Ok(MemberGeometry {
        directions,
        lengths,
    })
}

/// `l_c = S l`: element lengths as sums of their segment lengths.
pub fn cluster_lengths(elements: &[Element], lengths: &DVector<f64>) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(elements.len());
    for (e, el) in elements.iter().enumerate() {
        let mut sum = 0.0;
        for &m in &el.members {
            if m >= lengths.len() {
                return Err(Error::Dimension {
                    context: "cluster lengths",
                    expected: m + 1,
                    found: lengths.len(),
                });
            }
            sum += lengths[m];
        }
        out[e] = sum;
    }
    Ok(out)
}

/// Time-varying part of a structure: coordinates, velocities, clustered rest
/// lengths and per-element plastic history.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureState {
    /// Full nodal coordinates, m.
    pub n: DVector<f64>,
    /// Full nodal velocities, m/s.
    pub velocity: DVector<f64>,
    /// Clustered rest lengths `l_0c`, m.
    pub rest_lengths: DVector<f64>,
    pub material_states: Vec<crate::materials::MemberState>,
}

impl StructureState {
    /// Model's reference configuration at rest.
    pub fn reference(model: &StructureModel) -> Self {
        Self {
            n: model.nodes.clone(),
            velocity: DVector::zeros(model.n_coords()),
            rest_lengths: model.rest_lengths(),
            material_states: vec![Default::default(); model.n_elements()],
        }
    }

    pub fn with_coordinates(mut self, n: DVector<f64>) -> Self {
        self.n = n;
        self
    }
}
