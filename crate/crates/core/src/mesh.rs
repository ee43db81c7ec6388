//! Simplicial meshes of the fluid/solid configuration, generators, validation and text I/O.

use crate::error::{Error, Result};
use crate::simplex::{cross, dot, norm, signed_volume, sub, SimplexGeom};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Fluid,
    Solid,
}

impl Region {
    pub fn tag(self) -> u32 {
        match self {
            Region::Fluid => 1,
            Region::Solid => 2,
        }
    }
    pub fn from_tag(t: u32) -> Option<Self> {
        match t {
            1 => Some(Region::Fluid),
            2 => Some(Region::Solid),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FacetTag {
    GammaS,
    GammaF,
    Interior,
}

impl FacetTag {
    pub fn tag(self) -> u32 {
        match self {
            FacetTag::GammaS => 10,
            FacetTag::GammaF => 11,
            FacetTag::Interior => 0,
        }
    }
    pub fn from_tag(t: u32) -> Option<Self> {
        match t {
            10 => Some(FacetTag::GammaS),
            11 => Some(FacetTag::GammaF),
            0 => Some(FacetTag::Interior),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    AnnulusDisc,
    BoxInBox,
    /// Cube [-2,2]^3 around the solid cube [-1,1]^3.
    BoxInBox3d,
}

impl std::str::FromStr for GeometryKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "annulus_disc" => Ok(GeometryKind::AnnulusDisc),
            "box_in_box" => Ok(GeometryKind::BoxInBox),
            "box_in_box_3d" => Ok(GeometryKind::BoxInBox3d),
            _ => Err(format!("unknown geometry '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub vertices: Vec<usize>,
    pub tag: FacetTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    /// Coordinates, padded with zeros beyond `dim`.
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub regions: Vec<Region>,
    pub facets: Vec<Facet>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshSummary {
    pub dim: usize,
    pub n_vertices: usize,
    pub n_cells: usize,
    pub n_fluid_cells: usize,
    pub n_solid_cells: usize,
    pub n_gamma_s_facets: usize,
    pub n_gamma_f_facets: usize,
    pub fluid_volume: f64,
    pub solid_volume: f64,
    pub gamma_s_measure: f64,
    pub gamma_f_measure: f64,
    pub min_cell_volume: f64,
}

/// Per-facet frame on GAMMA_S. `normal` points out of the fluid, into the solid.
#[derive(Debug, Clone)]
pub struct InterfaceFacet {
    pub facet: usize,
    pub vertices: Vec<usize>,
    pub normal: [f64; 3],
    pub tangents: Vec<[f64; 3]>,
    pub measure: f64,
    pub fluid_cell: usize,
    pub solid_cell: usize,
}

#[derive(Debug, Clone)]
pub struct InterfaceFrame {
    pub facets: Vec<InterfaceFacet>,
    /// Distinct GAMMA_S vertices in order of first appearance.
    pub vertices: Vec<usize>,
}

pub fn face_key(v: &[usize]) -> Vec<usize> {
    let mut k = v.to_vec();
    k.sort_unstable();
    k
}

/// Local faces of a simplex given as vertex lists (vertex i omitted in face i).
pub fn cell_faces(cell: &[usize]) -> Vec<Vec<usize>> {
    (0..cell.len())
        .map(|skip| cell.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, &v)| v).collect())
        .collect()
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.points.len()
    }

    pub fn cell_points(&self, c: usize) -> Vec<[f64; 3]> {
        self.cells[c].iter().map(|&v| self.points[v]).collect()
    }

    pub fn cell_geom(&self, c: usize) -> SimplexGeom {
        SimplexGeom::new(self.dim, &self.cell_points(c))
    }

    /// Map from sorted face key to the cells containing it.
    pub fn face_cells(&self) -> HashMap<Vec<usize>, Vec<usize>> {
        let mut map: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        for (c, cell) in self.cells.iter().enumerate() {
            for f in cell_faces(cell) {
                map.entry(face_key(&f)).or_default().push(c);
            }
        }
        map
    }

    pub fn facets_with(&self, tag: FacetTag) -> impl Iterator<Item = (usize, &Facet)> {
        self.facets.iter().enumerate().filter(move |(_, f)| f.tag == tag)
    }

    pub fn vertices_on(&self, tag: FacetTag) -> Vec<usize> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (_, f) in self.facets_with(tag) {
            for &v in &f.vertices {
                if seen.insert(v) {
                    out.push(v);
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<MeshSummary> {
        let err = |m: String| Err(Error::Mesh(m));
        if self.dim != 2 && self.dim != 3 {
            return err(format!("dimension {} not supported", self.dim));
        }
        let nv = self.points.len();
        if self.cells.len() != self.regions.len() {
            return err("cell and region arrays differ in length".into());
        }
        for (c, cell) in self.cells.iter().enumerate() {
            if cell.len() != self.dim + 1 {
                return err(format!("cell {c} has {} vertices", cell.len()));
            }
            if cell.iter().any(|&v| v >= nv) {
                return err(format!("cell {c} references a missing vertex"));
            }
            if face_key(cell).windows(2).any(|w| w[0] == w[1]) {
                return err(format!("cell {c} repeats a vertex"));
            }
        }
        for (i, f) in self.facets.iter().enumerate() {
            if f.vertices.len() != self.dim || f.vertices.iter().any(|&v| v >= nv) {
                return err(format!("facet {i} is malformed"));
            }
        }
        if !self.regions.contains(&Region::Fluid) || !self.regions.contains(&Region::Solid) {
            return err("missing FLUID or SOLID region tag".into());
        }
        if self.facets_with(FacetTag::GammaS).next().is_none() {
            return err("missing GAMMA_S facet tag".into());
        }
        if self.facets_with(FacetTag::GammaF).next().is_none() {
            return err("missing GAMMA_F facet tag".into());
        }
        self.check_duplicates()?;

        let mut min_vol = f64::INFINITY;
        let (mut vf, mut vs) = (0.0, 0.0);
        for c in 0..self.cells.len() {
            let v = signed_volume(self.dim, &self.cell_points(c));
            if v <= 0.0 {
                return err(format!("cell {c} has non-positive volume {v:e}"));
            }
            min_vol = min_vol.min(v);
            match self.regions[c] {
                Region::Fluid => vf += v,
                Region::Solid => vs += v,
            }
        }

        let fc = self.face_cells();
        let mut tagged: HashMap<Vec<usize>, FacetTag> = HashMap::new();
        for (i, f) in self.facets.iter().enumerate() {
            let key = face_key(&f.vertices);
            let Some(cells) = fc.get(&key) else {
                return err(format!("facet {i} is not a face of any cell"));
            };
            let regions: Vec<Region> = cells.iter().map(|&c| self.regions[c]).collect();
            match f.tag {
                FacetTag::GammaS => {
                    if !(regions.len() == 2 && regions.contains(&Region::Fluid) && regions.contains(&Region::Solid)) {
                        return err(format!("GAMMA_S facet {i} is not shared by one fluid and one solid cell"));
                    }
                }
                FacetTag::GammaF => {
                    if regions != [Region::Fluid] {
                        return err(format!("GAMMA_F facet {i} is not a boundary facet of exactly one fluid cell"));
                    }
                }
                FacetTag::Interior => {}
            }
            if tagged.insert(key, f.tag).is_some() {
                return err(format!("facet {i} listed twice"));
            }
        }
        for (key, cells) in &fc {
            let regions: Vec<Region> = cells.iter().map(|&c| self.regions[c]).collect();
            let expect = match regions.as_slice() {
                [Region::Fluid] => Some(FacetTag::GammaF),
                [Region::Solid] => return err(format!("solid boundary face {key:?} is not on the interface")),
                [a, b] if a != b => Some(FacetTag::GammaS),
                [_, _] => None,
                _ => return err(format!("face {key:?} shared by {} cells", cells.len())),
            };
            if let Some(t) = expect {
                if tagged.get(key) != Some(&t) {
                    return err(format!("face {key:?} should carry tag {t:?}"));
                }
            }
        }

        self.check_interface_manifold()?;
        let vs_set: HashSet<usize> = self.vertices_on(FacetTag::GammaS).into_iter().collect();
        if self.vertices_on(FacetTag::GammaF).iter().any(|v| vs_set.contains(v)) {
            return err("GAMMA_S and GAMMA_F touch".into());
        }

        let measure = |tag| -> f64 {
            self.facets_with(tag)
                .map(|(_, f)| SimplexGeom::new(self.dim, &f.vertices.iter().map(|&v| self.points[v]).collect::<Vec<_>>()).measure)
                .sum()
        };
        Ok(MeshSummary {
            dim: self.dim,
            n_vertices: nv,
            n_cells: self.cells.len(),
            n_fluid_cells: self.regions.iter().filter(|r| **r == Region::Fluid).count(),
            n_solid_cells: self.regions.iter().filter(|r| **r == Region::Solid).count(),
            n_gamma_s_facets: self.facets_with(FacetTag::GammaS).count(),
            n_gamma_f_facets: self.facets_with(FacetTag::GammaF).count(),
            fluid_volume: vf,
            solid_volume: vs,
            gamma_s_measure: measure(FacetTag::GammaS),
            gamma_f_measure: measure(FacetTag::GammaF),
            min_cell_volume: min_vol,
        })
    }

    fn check_duplicates(&self) -> Result<()> {
        let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
        for p in &self.points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let tol = 1e-12 * norm(sub(hi, lo));
        let mut idx: Vec<usize> = (0..self.points.len()).collect();
        idx.sort_by(|&a, &b| self.points[a][0].total_cmp(&self.points[b][0]));
        for (k, &i) in idx.iter().enumerate() {
            for &j in &idx[k + 1..] {
                if self.points[j][0] - self.points[i][0] > tol {
                    break;
                }
                if norm(sub(self.points[i], self.points[j])) <= tol {
                    return Err(Error::Mesh(format!("vertices {i} and {j} coincide")));
                }
            }
        }
        Ok(())
    }

    /// GAMMA_S must be a closed, connected (d-1)-manifold.
    fn check_interface_manifold(&self) -> Result<()> {
        let facets: Vec<&Facet> = self.facets_with(FacetTag::GammaS).map(|(_, f)| f).collect();
        // Ridges: vertices in 2D, edges in 3D.
        let mut ridge: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        for (i, f) in facets.iter().enumerate() {
            for r in cell_faces(&f.vertices) {
                ridge.entry(face_key(&r)).or_default().push(i);
            }
        }
        if let Some((r, fs)) = ridge.iter().find(|(_, fs)| fs.len() != 2) {
            return Err(Error::Mesh(format!("GAMMA_S is not a closed manifold at {r:?} ({} facets)", fs.len())));
        }
        let mut seen = vec![false; facets.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for r in cell_faces(&facets[i].vertices) {
                for &j in &ridge[&face_key(&r)] {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Mesh("GAMMA_S is not connected".into()));
        }
        Ok(())
    }

    pub fn interface_frame(&self) -> Result<InterfaceFrame> {
        let fc = self.face_cells();
        let mut facets = Vec::new();
        for (i, f) in self.facets_with(FacetTag::GammaS) {
            let cells = fc.get(&face_key(&f.vertices)).ok_or_else(|| Error::Mesh(format!("facet {i} has no cell")))?;
            let fluid = *cells.iter().find(|&&c| self.regions[c] == Region::Fluid).ok_or_else(|| Error::Mesh(format!("facet {i} has no fluid cell")))?;
            let solid = *cells.iter().find(|&&c| self.regions[c] == Region::Solid).ok_or_else(|| Error::Mesh(format!("facet {i} has no solid cell")))?;
            let pts: Vec<[f64; 3]> = f.vertices.iter().map(|&v| self.points[v]).collect();
            let geom = SimplexGeom::new(self.dim, &pts);
            let (mut n, tangents) = match self.dim {
                2 => {
                    let t = sub(pts[1], pts[0]);
                    let l = norm(t);
                    let t = [t[0] / l, t[1] / l, 0.0];
                    ([t[1], -t[0], 0.0], vec![t])
                }
                _ => {
                    let a = sub(pts[1], pts[0]);
                    let t1 = scale(a, 1.0 / norm(a));
                    let n = cross(a, sub(pts[2], pts[0]));
                    let n = scale(n, 1.0 / norm(n));
                    (n, vec![t1, cross(n, t1)])
                }
            };
            let opposite = self.cells[fluid].iter().find(|v| !f.vertices.contains(v)).copied().unwrap();
            if dot(sub(self.points[opposite], pts[0]), n) > 0.0 {
                n = scale(n, -1.0);
            }
            let tangents = if self.dim == 3 { vec![tangents[0], cross(n, tangents[0])] } else { tangents };
            facets.push(InterfaceFacet { facet: i, vertices: f.vertices.clone(), normal: n, tangents, measure: geom.measure, fluid_cell: fluid, solid_cell: solid });
        }
        Ok(InterfaceFrame { facets, vertices: self.vertices_on(FacetTag::GammaS) })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "$Dimension\n{}", self.dim).unwrap();
        writeln!(s, "$Vertices").unwrap();
        for p in &self.points {
            let row: Vec<String> = p[..self.dim].iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(s, "{}", row.join(" ")).unwrap();
        }
        writeln!(s, "$Cells").unwrap();
        for (c, r) in self.cells.iter().zip(&self.regions) {
            writeln!(s, "{} {}", r.tag(), join(c)).unwrap();
        }
        writeln!(s, "$Facets").unwrap();
        for f in &self.facets {
            writeln!(s, "{} {}", f.tag.tag(), join(&f.vertices)).unwrap();
        }
        writeln!(s, "$End").unwrap();
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut dim = None;
        let mut section = "";
        let mut points = Vec::new();
        let mut cells = Vec::new();
        let mut regions = Vec::new();
        let mut facets = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line_no = ln + 1;
            let perr = |msg: String| Error::Parse { line: line_no, msg };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('$') {
                section = match name {
                    "Dimension" | "Vertices" | "Cells" | "Facets" | "End" => name,
                    _ => return Err(perr(format!("unknown section ${name}"))),
                };
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            match section {
                "Dimension" => {
                    let d: usize = toks[0].parse().map_err(|_| perr("bad dimension".into()))?;
                    dim = Some(d);
                }
                "Vertices" => {
                    let d = dim.unwrap_or(toks.len());
                    if toks.len() != d {
                        return Err(perr(format!("expected {d} coordinates")));
                    }
                    let mut p = [0.0; 3];
                    for (a, t) in toks.iter().enumerate().take(3) {
                        p[a] = t.parse().map_err(|_| perr(format!("bad coordinate '{t}'")))?;
                    }
                    dim.get_or_insert(d);
                    points.push(p);
                }
                "Cells" | "Facets" => {
                    let nums: Vec<usize> = toks.iter().map(|t| t.parse::<usize>()).collect::<std::result::Result<_, _>>().map_err(|_| perr("bad integer".into()))?;
                    if nums.len() < 2 {
                        return Err(perr("record too short".into()));
                    }
                    let tag = nums[0] as u32;
                    if section == "Cells" {
                        regions.push(Region::from_tag(tag).ok_or_else(|| perr(format!("unknown region tag {tag}")))?);
                        cells.push(nums[1..].to_vec());
                    } else {
                        let tag = FacetTag::from_tag(tag).ok_or_else(|| perr(format!("unknown facet tag {tag}")))?;
                        facets.push(Facet { vertices: nums[1..].to_vec(), tag });
                    }
                }
                "End" => return Err(perr("data after $End".into())),
                _ => return Err(perr("data outside a section".into())),
            }
        }
        let dim = dim.ok_or_else(|| Error::Parse { line: 0, msg: "no vertices".into() })?;
        Ok(Mesh { dim, points, cells, regions, facets })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::file(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?)
    }

    /// Uniformly scaled copy.
    pub fn scaled(&self, s: f64) -> Mesh {
        let mut m = self.clone();
        for p in &mut m.points {
            for x in p.iter_mut() {
                *x *= s;
            }
        }
        m
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Builds a mesh from cells alone: orients cells positively and derives tagged facets.
fn finish(dim: usize, points: Vec<[f64; 3]>, mut cells: Vec<Vec<usize>>, regions: Vec<Region>) -> Result<Mesh> {
    for c in cells.iter_mut() {
        let pts: Vec<[f64; 3]> = c.iter().map(|&v| points[v]).collect();
        if signed_volume(dim, &pts) < 0.0 {
            c.swap(0, 1);
        }
    }
    let mut mesh = Mesh { dim, points, cells, regions, facets: vec![] };
    let fc = mesh.face_cells();
    let mut facets: BTreeMap<Vec<usize>, FacetTag> = BTreeMap::new();
    for (key, cs) in fc {
        let tag = match cs.as_slice() {
            [c] if mesh.regions[*c] == Region::Fluid => FacetTag::GammaF,
            [a, b] if mesh.regions[*a] != mesh.regions[*b] => FacetTag::GammaS,
            _ => continue,
        };
        facets.insert(key, tag);
    }
    let mut list: Vec<Facet> = facets.into_iter().map(|(vertices, tag)| Facet { vertices, tag }).collect();
    if dim == 2 {
        order_chains(&mut list, &mesh.points);
    }
    mesh.facets = list;
    Ok(mesh)
}

/// Orders 2D boundary segments of each tag as counter-clockwise chains (cosmetic, for readable output).
fn order_chains(list: &mut Vec<Facet>, points: &[[f64; 3]]) {
    let mut out = Vec::new();
    for tag in [FacetTag::GammaS, FacetTag::GammaF] {
        let mut segs: Vec<Vec<usize>> = list.iter().filter(|f| f.tag == tag).map(|f| f.vertices.clone()).collect();
        // Orient each segment counter-clockwise about the origin.
        for s in segs.iter_mut() {
            let (a, b) = (points[s[0]], points[s[1]]);
            if a[0] * b[1] - a[1] * b[0] < 0.0 {
                s.swap(0, 1);
            }
        }
        let start = (0..segs.len())
            .min_by(|&i, &j| {
                let ang = |s: &Vec<usize>| {
                    let p = points[s[0]];
                    let t = p[1].atan2(p[0]);
                    if t < -1e-12 { t + 2.0 * PI } else { t }
                };
                ang(&segs[i]).total_cmp(&ang(&segs[j]))
            })
            .unwrap_or(0);
        let by_first: HashMap<usize, usize> = segs.iter().enumerate().map(|(i, s)| (s[0], i)).collect();
        let mut used = vec![false; segs.len()];
        let mut cur = start;
        for _ in 0..segs.len() {
            if used[cur] {
                break;
            }
            used[cur] = true;
            out.push(Facet { vertices: segs[cur].clone(), tag });
            match by_first.get(&segs[cur][1]) {
                Some(&n) => cur = n,
                None => break,
            }
        }
        for (i, s) in segs.iter().enumerate() {
            if !used[i] {
                out.push(Facet { vertices: s.clone(), tag });
            }
        }
    }
    *list = out;
}

pub fn generate_mesh(kind: GeometryKind, resolution: usize) -> Result<Mesh> {
    if resolution < 4 {
        return Err(Error::Mesh(format!("resolution {resolution} below minimum 4")));
    }
    let mesh = match kind {
        GeometryKind::AnnulusDisc => annulus_disc(resolution)?,
        GeometryKind::BoxInBox => box_in_box(resolution)?,
        GeometryKind::BoxInBox3d => box_in_box_3d(resolution)?,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Fluid annulus 1 < r < 2 around the unit disc; the interface is a regular polygon with
/// `2 * resolution` sides. Both regions are filled by concentric rings zipped together.
fn annulus_disc(res: usize) -> Result<Mesh> {
    let n = 2 * res;
    let h = 2.0 * PI / n as f64;
    let layers = ((1.0 / h).round() as usize).max(1);
    let mut points = vec![[0.0, 0.0, 0.0]];
    let mut rings: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
    let ring = |points: &mut Vec<[f64; 3]>, r: f64, count: usize, offset: f64| {
        let mut ids = Vec::with_capacity(count);
        let mut angles = Vec::with_capacity(count);
        for k in 0..count {
            let t = 2.0 * PI * (k as f64 + offset) / count as f64;
            ids.push(points.len());
            angles.push(t);
            points.push([r * t.cos(), r * t.sin(), 0.0]);
        }
        (ids, angles)
    };
    for j in 1..=layers {
        let r = j as f64 / layers as f64;
        let count = if j == layers { n } else { ((n as f64 * r).round() as usize).max(4) };
        let offset = 0.5 * ((layers - j) % 2) as f64;
        rings.push(ring(&mut points, r, count, offset));
    }
    let n_solid_rings = rings.len();
    for j in 1..=layers {
        let r = 1.0 + j as f64 / layers as f64;
        let count = (n as f64 * r).round() as usize;
        rings.push(ring(&mut points, r, count, 0.5 * (j % 2) as f64));
    }
    let mut cells = Vec::new();
    let mut regions = Vec::new();
    let inner = &rings[0].0;
    for k in 0..inner.len() {
        cells.push(vec![0, inner[k], inner[(k + 1) % inner.len()]]);
        regions.push(Region::Solid);
    }
    for j in 0..rings.len() - 1 {
        let region = if j + 1 < n_solid_rings { Region::Solid } else { Region::Fluid };
        for tri in zip_rings(&rings[j], &rings[j + 1]) {
            cells.push(tri);
            regions.push(region);
        }
    }
    finish(2, points, cells, regions)
}

/// Triangulates the strip between two concentric rings by merging their angular orders.
fn zip_rings(a: &(Vec<usize>, Vec<f64>), b: &(Vec<usize>, Vec<f64>)) -> Vec<Vec<usize>> {
    let (na, nb) = (a.0.len(), b.0.len());
    let ang = |r: &(Vec<usize>, Vec<f64>), i: usize| r.1[i % r.1.len()] + 2.0 * PI * (i / r.1.len()) as f64;
    let mut out = Vec::with_capacity(na + nb);
    // Start the outer ring at its vertex nearest the first inner vertex.
    let shift = (0..nb).min_by(|&x, &y| (b.1[x] - a.1[0]).abs().total_cmp(&(b.1[y] - a.1[0]).abs())).unwrap();
    let bi = |j: usize| b.0[(j + shift) % nb];
    let bang = |j: usize| ang(b, j + shift) - if shift > 0 && b.1[shift] > a.1[0] + PI { 2.0 * PI } else { 0.0 };
    let (mut i, mut j) = (0, 0);
    while i < na || j < nb {
        let take_a = if i == na {
            false
        } else if j == nb {
            true
        } else {
            ang(a, i + 1) <= bang(j + 1)
        };
        if take_a {
            out.push(vec![a.0[i % na], a.0[(i + 1) % na], bi(j)]);
            i += 1;
        } else {
            out.push(vec![a.0[i % na], bi(j + 1), bi(j)]);
            j += 1;
        }
    }
    out
}

/// Square [-2,2]^2 fluid around the solid square [-1,1]^2 on a uniform grid of right triangles.
fn box_in_box(res: usize) -> Result<Mesh> {
    let k = res.div_ceil(2).max(2);
    let h = 2.0 / k as f64;
    let m = 2 * k; // cells per direction over [-2, 2]
    let id = |i: usize, j: usize| i * (m + 1) + j;
    let mut points = Vec::new();
    for i in 0..=m {
        for j in 0..=m {
            points.push([-2.0 + h * i as f64, -2.0 + h * j as f64, 0.0]);
        }
    }
    let mut cells = Vec::new();
    let mut regions = Vec::new();
    for i in 0..m {
        for j in 0..m {
            let cx = -2.0 + h * (i as f64 + 0.5);
            let cy = -2.0 + h * (j as f64 + 0.5);
            let region = if cx.abs() < 1.0 && cy.abs() < 1.0 { Region::Solid } else { Region::Fluid };
            // Alternate diagonals so the pattern is symmetric about both axes.
            if (i + j) % 2 == 0 {
                cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                cells.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            } else {
                cells.push(vec![id(i, j), id(i + 1, j), id(i, j + 1)]);
                cells.push(vec![id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
            regions.push(region);
            regions.push(region);
        }
    }
    finish(2, points, cells, regions)
}

/// Kuhn subdivision of a uniform cube grid over [-2,2]^3 with solid [-1,1]^3.
fn box_in_box_3d(res: usize) -> Result<Mesh> {
    let k = (res / 4).max(1);
    let h = 1.0 / k as f64;
    let m = 4 * k;
    let id = |i: usize, j: usize, l: usize| (i * (m + 1) + j) * (m + 1) + l;
    let mut points = Vec::new();
    for i in 0..=m {
        for j in 0..=m {
            for l in 0..=m {
                points.push([-2.0 + h * i as f64, -2.0 + h * j as f64, -2.0 + h * l as f64]);
            }
        }
    }
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut cells = Vec::new();
    let mut regions = Vec::new();
    for i in 0..m {
        for j in 0..m {
            for l in 0..m {
                let c = [-2.0 + h * (i as f64 + 0.5), -2.0 + h * (j as f64 + 0.5), -2.0 + h * (l as f64 + 0.5)];
                let region = if c.iter().all(|x| x.abs() < 1.0) { Region::Solid } else { Region::Fluid };
                for p in perms {
                    let mut cur = [i, j, l];
                    let mut tet = vec![id(cur[0], cur[1], cur[2])];
                    for axis in p {
                        cur[axis] += 1;
                        tet.push(id(cur[0], cur[1], cur[2]));
                    }
                    cells.push(tet);
                    regions.push(region);
                }
            }
        }
    }
    finish(3, points, cells, regions)
}
