//! Fractal meshes of the Koch snowflake: the uniform family `T_ℓ`, the
//! quasi-uniform family `T'_ℓ` and the boundary-refined family `T'_{ℓ,ℓ*}`.
//!
//! Every element is `ψ_K(Ω)` with `ψ_K = s_{m_1} ∘ … ∘ s_{m_ℓ}`. Its diameter is
//! `h_K = 2·3^{-j/2}` where the integer level `j` counts one per digit `1` and
//! two per other digit; all size comparisons are done on `j`.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    boundary_distance, koch_apex, sample_element_boundary, snowflake_area, snowflake_ifs,
    ReferenceCharts, Similarity, Vec2,
};

pub type Sim = Similarity<f64>;
pub type Point = Vec2<f64>;

/// Largest `ℓ` accepted by [`build_uniform`].
pub const MAX_UNIFORM_LEVEL: usize = 7;
/// Largest `ℓ` accepted by the quasi-uniform and boundary-refined builders.
pub const MAX_QUASI_LEVEL: usize = 14;
/// Largest number of boundary refinement sweeps.
pub const MAX_BOUNDARY_STEPS: usize = 8;
/// Element count guard for all builders.
pub const MAX_ELEMENTS: usize = 4_000_000;

/// `3^{-j/2}`, computed from exact integer powers.
pub fn level_scale(j: u32) -> f64 {
    let p = 3f64.powi(-((j / 2) as i32));
    if j % 2 == 1 {
        p / 3f64.sqrt()
    } else {
        p
    }
}

/// Diameter `2·3^{-j/2}` of an element at level `j`.
pub fn level_diameter(j: u32) -> f64 {
    2.0 * level_scale(j)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Uniform,
    QuasiUniform,
    BoundaryRefined,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Uniform => "uniform",
            Family::QuasiUniform => "quasi",
            Family::BoundaryRefined => "boundary",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotRef {
    Unassigned,
    Interior(usize),
    Boundary(usize),
}

#[derive(Clone, Debug)]
pub struct Element {
    /// Digits in `1..=7`; empty for `Ω` itself.
    pub word: Vec<u8>,
    pub chart: Sim,
    pub level: u32,
    pub h: f64,
    pub barycentre: Point,
    pub vertices: [Point; 6],
    /// `min_i dist(v_i, ∂Ω)`, filled in by the boundary-refined builder.
    pub delta_hat: Option<f64>,
    pub slots: [SlotRef; 6],
}

impl Element {
    pub fn root() -> Self {
        Self::from_word(&[]).expect("empty word is valid")
    }

    /// Rebuilds an element from its word; the chart scale is set from the
    /// integer level so that `h_K` is exact.
    pub fn from_word(word: &[u8]) -> Result<Self> {
        let ifs = snowflake_ifs::<f64>();
        let mut chart = Sim::identity();
        let mut level = 0u32;
        for &d in word {
            if !(1..=7).contains(&d) {
                return Err(Error::InvalidArgument(format!("word digit {d} outside 1..=7")));
            }
            level += if d == 1 { 1 } else { 2 };
            chart = chart.compose(&ifs[d as usize - 1]).with_scale(level_scale(level));
        }
        Ok(Self::with_chart(word.to_vec(), chart, level))
    }

    fn with_chart(word: Vec<u8>, chart: Sim, level: u32) -> Self {
        let refs = ReferenceCharts::<f64>::new();
        Self {
            word,
            chart,
            level,
            h: level_diameter(level),
            barycentre: chart.shift,
            vertices: std::array::from_fn(|k| chart.apply(refs.vertices[k])),
            delta_hat: None,
            slots: [SlotRef::Unassigned; 6],
        }
    }

    pub fn children(&self) -> [Element; 7] {
        let ifs = snowflake_ifs::<f64>();
        std::array::from_fn(|k| {
            let mut word = self.word.clone();
            word.push(k as u8 + 1);
            let level = self.level + if k == 0 { 1 } else { 2 };
            let chart = self.chart.compose(&ifs[k]).with_scale(level_scale(level));
            Element::with_chart(word, chart, level)
        })
    }

    /// `|K| = (6√3/5)(h_K/2)²`.
    pub fn area(&self) -> f64 {
        snowflake_area::<f64>() * self.chart.scale * self.chart.scale
    }

    /// True when `self` is `other` or one of its descendants.
    pub fn descends_from(&self, other: &Element) -> bool {
        self.word.starts_with(&other.word)
    }

    /// `min_i dist(v_i, ∂Ω)` to absolute accuracy `1e-9·h_K`.
    pub fn compute_delta_hat(&self) -> f64 {
        let tol = 1e-9 * self.h;
        self.vertices
            .iter()
            .map(|v| boundary_distance(*v, tol))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceKind {
    Interior,
    Boundary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub kind: FaceKind,
    /// The larger element `K_-` (interior) or the owning element (boundary).
    pub minus: usize,
    pub plus: Option<usize>,
    /// Wedge of `minus` whose outer face is `F`, in `1..=6`.
    pub slot_minus: u8,
    /// First of the two consecutive wedges of `plus` covering `F`.
    pub slot_plus: Option<u8>,
    /// `h_F = 3^{-level/2}`.
    pub level: u32,
    pub h: f64,
}

impl Face {
    pub fn is_interior(&self) -> bool {
        self.kind == FaceKind::Interior
    }

    /// `ξ_F`: the Koch curve onto `F`, as `ψ_{K_-} ∘ γ_{slot_minus}`.
    pub fn chart(&self, elements: &[Element]) -> Sim {
        let refs = ReferenceCharts::<f64>::new();
        elements[self.minus]
            .chart
            .compose(&refs.face_chart(self.slot_minus as usize))
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub family: Family,
    pub ell: usize,
    pub ellstar: usize,
    pub elements: Vec<Element>,
    pub faces: Vec<Face>,
}

impl Mesh {
    /// Discovers faces for `elements` and assembles the mesh.
    pub fn from_elements(
        family: Family,
        ell: usize,
        ellstar: usize,
        mut elements: Vec<Element>,
    ) -> Result<Self> {
        let faces = discover_faces(&mut elements)?;
        Ok(Self {
            family,
            ell,
            ellstar,
            elements,
            faces,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn interior_faces(&self) -> impl Iterator<Item = &Face> {
        self.faces.iter().filter(|f| f.is_interior())
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = &Face> {
        self.faces.iter().filter(|f| !f.is_interior())
    }

    pub fn h_max(&self) -> f64 {
        self.elements.iter().map(|e| e.h).fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        self.elements.iter().map(|e| e.h).fold(f64::INFINITY, f64::min)
    }

    /// Largest diameter among elements that own a boundary face.
    pub fn h_boundary(&self) -> f64 {
        self.boundary_faces()
            .map(|f| self.elements[f.minus].h)
            .fold(0.0, f64::max)
    }

    /// Index of the element of `self` containing each element of `fine`,
    /// looked up by word prefix.
    pub fn ancestors_of(&self, fine: &Mesh) -> Result<Vec<usize>> {
        let index: HashMap<&[u8], usize> = self
            .elements
            .iter()
            .enumerate()
            .map(|(i, e)| (e.word.as_slice(), i))
            .collect();
        fine.elements
            .iter()
            .map(|e| {
                (0..=e.word.len())
                    .rev()
                    .find_map(|n| index.get(&e.word[..n]).copied())
                    .ok_or_else(|| {
                        Error::NotNested(format!("element {:?} has no coarse ancestor", e.word))
                    })
            })
            .collect()
    }
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_ELEMENTS {
        return Err(Error::ResourceLimit(format!(
            "mesh would have {n} elements (limit {MAX_ELEMENTS})"
        )));
    }
    Ok(())
}

/// `T_ℓ`: all `7^ℓ` words of length `ℓ`, in lexicographic order.
pub fn build_uniform(ell: usize) -> Result<Mesh> {
    if ell > MAX_UNIFORM_LEVEL {
        return Err(Error::ResourceLimit(format!(
            "uniform level {ell} exceeds {MAX_UNIFORM_LEVEL}"
        )));
    }
    let mut elements = vec![Element::root()];
    for _ in 0..ell {
        elements = elements.iter().flat_map(|e| e.children()).collect();
    }
    Mesh::from_elements(Family::Uniform, ell, 0, elements)
}

/// Replaces each element selected by `refine` with its seven children, in place.
fn refine_where(elements: Vec<Element>, refine: impl Fn(&Element) -> bool) -> Result<Vec<Element>> {
    let grow = elements.iter().filter(|e| refine(e)).count();
    check_size(elements.len() + 6 * grow)?;
    let mut out = Vec::with_capacity(elements.len() + 6 * grow);
    for e in elements {
        if refine(&e) {
            out.extend(e.children());
        } else {
            out.push(e);
        }
    }
    Ok(out)
}

fn quasi_uniform_elements(ell: usize) -> Result<Vec<Element>> {
    if ell > MAX_QUASI_LEVEL {
        return Err(Error::ResourceLimit(format!(
            "quasi-uniform level {ell} exceeds {MAX_QUASI_LEVEL}"
        )));
    }
    let mut elements = vec![Element::root()];
    for _ in 0..ell {
        let jmin = elements.iter().map(|e| e.level).min().unwrap();
        elements = refine_where(elements, |e| e.level == jmin)?;
    }
    Ok(elements)
}

/// `T'_ℓ`: `ℓ` sweeps, each refining every element of maximal diameter.
pub fn build_quasi_uniform(ell: usize) -> Result<Mesh> {
    Mesh::from_elements(Family::QuasiUniform, ell, 0, quasi_uniform_elements(ell)?)
}

/// `T'_{ℓ,ℓ*}`: starting from `T'_ℓ`, `ℓ*` sweeps refining every element with
/// `δ̂_K <= h_K/2`.
///
/// `δ̂_K` is only known to `1e-9·h_K`, so the comparison allows that much
/// slack; the central element of `T_1`, where equality holds, is refined.
pub fn build_boundary_refined(ell: usize, ellstar: usize) -> Result<Mesh> {
    if ellstar > MAX_BOUNDARY_STEPS {
        return Err(Error::ResourceLimit(format!(
            "boundary refinement depth {ellstar} exceeds {MAX_BOUNDARY_STEPS}"
        )));
    }
    let mut elements = quasi_uniform_elements(ell)?;
    for _ in 0..ellstar {
        for e in elements.iter_mut() {
            if e.delta_hat.is_none() {
                e.delta_hat = Some(e.compute_delta_hat());
            }
        }
        elements = refine_where(elements, |e| {
            e.delta_hat.unwrap() <= e.h / 2.0 + 2e-9 * e.h
        })?;
    }
    Mesh::from_elements(Family::BoundaryRefined, ell, ellstar, elements)
}

/// Which wedge of `from` points toward `to`: returns the rotation index
/// (units of `pi/6`, in `0..12`) of `to - from` in the local frame of `from`.
fn local_direction(from: &Element, to: &Element) -> Option<u8> {
    let d = (to.barycentre - from.barycentre).rotate(-from.chart.rot());
    let k = d.y.atan2(d.x) / (std::f64::consts::PI / 6.0);
    let r = k.round();
    if (k - r).abs() > 1e-6 {
        return None;
    }
    Some((r as i64).rem_euclid(12) as u8)
}

fn grid_key(p: Point, cell: f64) -> (i64, i64) {
    ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
}

/// Finds all interior faces (pairs at levels `j`, `j+1` whose barycentres are
/// `h_{K_+}` apart) and fills the remaining slots with boundary faces.
///
/// Slots are recorded on each element. Interior faces come first, sorted by
/// `(minus, slot_minus)`; boundary faces follow in element order.
pub fn discover_faces(elements: &mut [Element]) -> Result<Vec<Face>> {
    for e in elements.iter_mut() {
        e.slots = [SlotRef::Unassigned; 6];
    }
    let max_level = elements.iter().map(|e| e.level).max().unwrap_or(0);
    // grid of level-j elements with cell size h_{j+1}
    let mut grids: Vec<HashMap<(i64, i64), Vec<usize>>> = vec![HashMap::new(); max_level as usize + 1];
    for (i, e) in elements.iter().enumerate() {
        let cell = level_diameter(e.level + 1);
        grids[e.level as usize]
            .entry(grid_key(e.barycentre, cell))
            .or_default()
            .push(i);
    }

    let mut faces = Vec::new();
    for (ip, kp) in elements.iter().enumerate() {
        if kp.level == 0 {
            continue;
        }
        let jm = kp.level - 1;
        let cell = kp.h;
        let (cx, cy) = grid_key(kp.barycentre, cell);
        // pairs sit exactly one cell apart, so rounding can push them to two
        for dx in -2..=2 {
            for dy in -2..=2 {
                let Some(bucket) = grids[jm as usize].get(&(cx + dx, cy + dy)) else {
                    continue;
                };
                for &im in bucket {
                    let km = &elements[im];
                    let d = km.barycentre.dist(kp.barycentre);
                    if (d - kp.h).abs() > 1e-9 * kp.h {
                        continue;
                    }
                    faces.push(make_interior_face(elements, im, ip)?);
                }
            }
        }
    }
    faces.sort_by_key(|f| (f.minus, f.slot_minus));

    for (fi, f) in faces.iter().enumerate() {
        claim(elements, f.minus, f.slot_minus, SlotRef::Interior(fi))?;
        let plus = f.plus.unwrap();
        let sp = f.slot_plus.unwrap();
        claim(elements, plus, sp, SlotRef::Interior(fi))?;
        claim(elements, plus, sp % 6 + 1, SlotRef::Interior(fi))?;
    }

    for i in 0..elements.len() {
        for s in 0..6 {
            if elements[i].slots[s] == SlotRef::Unassigned {
                let fi = faces.len();
                let e = &elements[i];
                faces.push(Face {
                    kind: FaceKind::Boundary,
                    minus: i,
                    plus: None,
                    slot_minus: s as u8 + 1,
                    slot_plus: None,
                    level: e.level,
                    h: level_scale(e.level),
                });
                elements[i].slots[s] = SlotRef::Boundary(fi);
            }
        }
    }
    Ok(faces)
}

fn make_interior_face(elements: &[Element], im: usize, ip: usize) -> Result<Face> {
    let km = &elements[im];
    let kp = &elements[ip];
    let bad = |what: &str| {
        Error::InconsistentSlots(format!(
            "{what} for pair {:?} / {:?}",
            km.word, kp.word
        ))
    };
    if (km.chart.rot() - kp.chart.rot()).rem_euclid(2) != 1 {
        return Err(bad("rotation indices of equal parity"));
    }
    let km_dir = local_direction(km, kp).ok_or_else(|| bad("direction off the wedge axes"))?;
    if km_dir % 2 != 0 {
        return Err(bad("direction from the larger element is not a wedge axis"));
    }
    let kp_dir = local_direction(kp, km).ok_or_else(|| bad("direction off the vertex rays"))?;
    if kp_dir % 2 != 1 {
        return Err(bad("direction from the smaller element is not a vertex ray"));
    }
    Ok(Face {
        kind: FaceKind::Interior,
        minus: im,
        plus: Some(ip),
        slot_minus: km_dir / 2 + 1,
        // direction (2j-1) pi/6 is the vertex p_{j+1} shared by W_j and W_{j+1}
        slot_plus: Some(kp_dir.div_ceil(2)),
        level: km.level,
        h: level_scale(km.level),
    })
}

fn claim(elements: &mut [Element], el: usize, slot: u8, face: SlotRef) -> Result<()> {
    let s = &mut elements[el].slots[slot as usize - 1];
    if *s != SlotRef::Unassigned {
        return Err(Error::InconsistentSlots(format!(
            "slot {slot} of element {:?} claimed twice",
            elements[el].word
        )));
    }
    *s = face;
    Ok(())
}

#[derive(Clone, Debug, Default)]
pub struct LquReport {
    pub area_error: f64,
    pub failures: Vec<String>,
}

impl LquReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Validates the area partition, the √3 ratio across interior faces, the slot
/// accounting, and that every boundary face really lies on `∂Ω`.
///
/// The last check is what exposes non-LQU meshes: a neighbour pair whose size
/// ratio is not √3 is never paired up, so its shared curve is wrongly left as
/// a boundary face.
pub fn lqu_check(mesh: &Mesh) -> LquReport {
    let mut report = LquReport::default();
    // |K| depends only on the level, so sum per level to keep round-off small
    let mut per_level: Vec<usize> = Vec::new();
    for e in &mesh.elements {
        let j = e.level as usize;
        if per_level.len() <= j {
            per_level.resize(j + 1, 0);
        }
        per_level[j] += 1;
    }
    let area = snowflake_area::<f64>()
        * per_level
            .iter()
            .enumerate()
            .map(|(j, &n)| n as f64 * 3f64.powi(-(j as i32)))
            .sum::<f64>();
    report.area_error = (area - snowflake_area::<f64>()).abs();
    if report.area_error > 1e-12 {
        report
            .failures
            .push(format!("area partition off by {:e}", report.area_error));
    }

    for (fi, f) in mesh.faces.iter().enumerate() {
        if let Some(p) = f.plus {
            let (jm, jp) = (mesh.elements[f.minus].level, mesh.elements[p].level);
            if jp != jm + 1 {
                report.failures.push(format!(
                    "face {fi}: levels {jm} and {jp} do not give ratio √3"
                ));
            }
        }
    }

    let mut counts = vec![0usize; mesh.elements.len()];
    for f in &mesh.faces {
        counts[f.minus] += 1;
        if let Some(p) = f.plus {
            counts[p] += 2;
        }
    }
    for (i, e) in mesh.elements.iter().enumerate() {
        if counts[i] != 6 || e.slots.contains(&SlotRef::Unassigned) {
            report.failures.push(format!(
                "element {i} {:?}: {} of 6 slots covered",
                e.word, counts[i]
            ));
        }
    }

    let apex = koch_apex::<f64>();
    for (fi, f) in mesh.boundary_faces().enumerate() {
        let p = f.chart(&mesh.elements).apply(apex);
        let d = boundary_distance(p, 1e-9 * f.h);
        if d > 1e-6 * f.h {
            report.failures.push(format!(
                "boundary face {fi} of element {} lies inside the domain (distance {d:e})",
                f.minus
            ));
        }
    }
    report
}

/// Level counts `n_j` of `T'_ℓ` from the recurrence `n_{j+1} += n_j`,
/// `n_{j+2} += 6 n_j` applied to the smallest populated level.
pub fn quasi_uniform_count(ell: usize) -> usize {
    let mut n = vec![0usize; 2 * ell + 3];
    n[0] = 1;
    for _ in 0..ell {
        let j = n.iter().position(|&c| c > 0).unwrap();
        let c = n[j];
        n[j] = 0;
        n[j + 1] += c;
        n[j + 2] += 6 * c;
    }
    n.iter().sum()
}

#[derive(Serialize, Deserialize)]
struct ElementRecord {
    word: Vec<u8>,
    level: u32,
    barycentre: [f64; 2],
    rot: i32,
}

#[derive(Serialize, Deserialize)]
struct FaceRecord {
    kind: FaceKind,
    minus: usize,
    plus: Option<usize>,
    slot_minus: u8,
    slot_plus: Option<u8>,
    hf_level: u32,
}

#[derive(Serialize, Deserialize)]
struct MeshFile {
    family: Family,
    ell: usize,
    ellstar: usize,
    elements: Vec<ElementRecord>,
    faces: Vec<FaceRecord>,
}

/// Writes the mesh as JSON. Floats use the shortest round-trip representation.
pub fn export_mesh<W: Write>(mesh: &Mesh, w: W) -> Result<()> {
    let file = MeshFile {
        family: mesh.family,
        ell: mesh.ell,
        ellstar: mesh.ellstar,
        elements: mesh
            .elements
            .iter()
            .map(|e| ElementRecord {
                word: e.word.clone(),
                level: e.level,
                barycentre: [e.barycentre.x, e.barycentre.y],
                rot: e.chart.rot(),
            })
            .collect(),
        faces: mesh
            .faces
            .iter()
            .map(|f| FaceRecord {
                kind: f.kind,
                minus: f.minus,
                plus: f.plus,
                slot_minus: f.slot_minus,
                slot_plus: f.slot_plus,
                hf_level: f.level,
            })
            .collect(),
    };
    serde_json::to_writer(w, &file)?;
    Ok(())
}

/// Reads a mesh written by [`export_mesh`]. Elements are rebuilt from their
/// words and checked against the stored level, rotation and barycentre.
pub fn import_mesh<R: std::io::Read>(r: R) -> Result<Mesh> {
    let file: MeshFile = serde_json::from_reader(r)?;
    let mut elements = Vec::with_capacity(file.elements.len());
    for (i, rec) in file.elements.iter().enumerate() {
        let e = Element::from_word(&rec.word)?;
        let stored = Point::new(rec.barycentre[0], rec.barycentre[1]);
        if e.level != rec.level
            || e.chart.rot() != rec.rot.rem_euclid(12)
            || e.barycentre.dist(stored) > 1e-12 * e.h
        {
            return Err(Error::MeshValidation(format!(
                "element {i} {:?} does not match its word",
                rec.word
            )));
        }
        elements.push(e);
    }
    let mut faces = Vec::with_capacity(file.faces.len());
    for (fi, rec) in file.faces.iter().enumerate() {
        let n = elements.len();
        let bad_slot = |s: u8| !(1..=6).contains(&s);
        if rec.minus >= n
            || rec.plus.is_some_and(|p| p >= n)
            || bad_slot(rec.slot_minus)
            || rec.slot_plus.is_some_and(bad_slot)
            || (rec.kind == FaceKind::Interior) != rec.plus.is_some()
            || rec.plus.is_some() != rec.slot_plus.is_some()
        {
            return Err(Error::MeshValidation(format!("face {fi} is malformed")));
        }
        let slot = SlotRef::Interior(fi);
        let slot = if rec.kind == FaceKind::Boundary { SlotRef::Boundary(fi) } else { slot };
        claim(&mut elements, rec.minus, rec.slot_minus, slot)?;
        if let (Some(p), Some(sp)) = (rec.plus, rec.slot_plus) {
            claim(&mut elements, p, sp, slot)?;
            claim(&mut elements, p, sp % 6 + 1, slot)?;
        }
        faces.push(Face {
            kind: rec.kind,
            minus: rec.minus,
            plus: rec.plus,
            slot_minus: rec.slot_minus,
            slot_plus: rec.slot_plus,
            level: rec.hf_level,
            h: level_scale(rec.hf_level),
        });
    }
    Ok(Mesh {
        family: file.family,
        ell: file.ell,
        ellstar: file.ellstar,
        elements,
        faces,
    })
}

/// One line per element: the index, then `6·4^depth` prefractal vertices as
/// `x y` pairs.
pub fn write_polygons<W: Write>(mesh: &Mesh, depth: usize, mut w: W) -> Result<()> {
    for (i, e) in mesh.elements.iter().enumerate() {
        write!(w, "{i}")?;
        for p in sample_element_boundary(&e.chart, depth)? {
            write!(w, " {} {}", p.x, p.y)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Parses the output of [`write_polygons`].
pub fn read_polygons<R: BufRead>(r: R) -> Result<Vec<(usize, Vec<Point>)>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        let mut it = line.split_whitespace();
        let Some(idx) = it.next() else { continue };
        let bad = || Error::InvalidArgument(format!("malformed polygon line `{line}`"));
        let idx: usize = idx.parse().map_err(|_| bad())?;
        let nums: Vec<f64> = it.map(|t| t.parse().map_err(|_| bad())).collect::<Result<_>>()?;
        if !nums.len().is_multiple_of(2) {
            return Err(bad());
        }
        out.push((idx, nums.chunks(2).map(|c| Point::new(c[0], c[1])).collect()));
    }
    Ok(out)
}
