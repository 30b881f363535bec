//! Simplicial meshes of 1D and 2D domains: structured generators for the
//! interval, rectangle, disk and ellipse, and a small line-oriented text
//! format for import and export.
//!
//! ```text
//! # comment
//! mesh <dim> <nv> <ne>
//! v x [y]        (nv lines)
//! e i j [k]      (ne lines, 0-based vertex indices)
//! ```

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("degenerate shape: {0}")]
    DegenerateShape(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("element {element} has zero measure")]
    ZeroMeasure { element: usize },
    #[error("non-conforming mesh: {0}")]
    NonConforming(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Interval { length: f64 },
    Rectangle { a: f64, b: f64 },
    Disk { radius: f64 },
    Ellipse { a: f64, b: f64 },
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// Largest mesh size `generate` accepts for this shape.
    pub fn max_mesh_size(&self) -> f64 {
        self.dimensions().iter().copied().fold(f64::INFINITY, f64::min) / 4.0
    }

    fn dimensions(&self) -> Vec<f64> {
        match *self {
            Shape::Interval { length } => vec![length],
            Shape::Rectangle { a, b } | Shape::Ellipse { a, b } => vec![a, b],
            Shape::Disk { radius } => vec![radius],
        }
    }

    /// Measure of the exact (unmeshed) domain.
    pub fn measure(&self) -> f64 {
        match *self {
            Shape::Interval { length } => length,
            Shape::Rectangle { a, b } => a * b,
            Shape::Disk { radius } => PI * radius * radius,
            Shape::Ellipse { a, b } => PI * a * b,
        }
    }
}

/// A boundary facet: an edge `a → b` with the domain on its left in 2D, or
/// the end point `a == b` of an interval in 1D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundaryFacet {
    pub a: usize,
    pub b: usize,
    pub element: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    /// Coordinates; the second component is 0 in 1D.
    pub vertices: Vec<[f64; 2]>,
    /// Flat connectivity, `dim + 1` vertices per element. Triangles are
    /// counter-clockwise, segments left to right.
    pub connectivity: Vec<usize>,
    pub element_measure: Vec<f64>,
    pub boundary_vertices: Vec<usize>,
    pub boundary_facets: Vec<BoundaryFacet>,
    pub domain_measure: f64,
    pub id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curvature {
    Smooth(f64),
    Corner,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryGeometry {
    /// Signed curvature at boundary vertices, positive for convex domains.
    pub curvature: BTreeMap<usize, Curvature>,
    /// Largest smooth curvature `Ĥ` and the lowest-index vertex attaining it.
    pub max_curvature: Option<(f64, usize)>,
}

impl BoundaryGeometry {
    fn from_map(curvature: BTreeMap<usize, Curvature>) -> Self {
        let mut best: Option<(f64, usize)> = None;
        for (&v, c) in &curvature {
            if let Curvature::Smooth(k) = *c {
                if best.is_none_or(|(b, _)| k > b) {
                    best = Some((k, v));
                }
            }
        }
        Self {
            curvature,
            max_curvature: best,
        }
    }

    pub fn hhat(&self) -> f64 {
        self.max_curvature.map_or(0.0, |(k, _)| k)
    }
}

fn sub(p: [f64; 2], q: [f64; 2]) -> [f64; 2] {
    [p[0] - q[0], p[1] - q[1]]
}

fn cross(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[1] - u[1] * v[0]
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    let d = sub(p, q);
    d[0].hypot(d[1])
}

fn signed_area(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    0.5 * cross(sub(q, p), sub(r, p))
}

/// Distance from `p` to the segment `[a, b]`.
pub fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = sub(b, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return dist(p, a);
    }
    let ap = sub(p, a);
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

impl Mesh {
    /// Builds a mesh from raw parts: orients elements, computes measures,
    /// extracts the boundary and checks conformity.
    pub fn from_parts(dim: usize, vertices: Vec<[f64; 2]>, mut connectivity: Vec<usize>) -> Result<Self, MeshError> {
        if !(dim == 1 || dim == 2) {
            return Err(MeshError::NonConforming(format!("unsupported dimension {dim}")));
        }
        let k = dim + 1;
        if connectivity.is_empty() || connectivity.len() % k != 0 {
            return Err(MeshError::NonConforming("empty or ragged connectivity".into()));
        }
        let nv = vertices.len();
        if let Some(&bad) = connectivity.iter().find(|&&i| i >= nv) {
            return Err(MeshError::NonConforming(format!("vertex index {bad} out of range")));
        }
        let ne = connectivity.len() / k;
        let scale = {
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for v in &vertices {
                for c in 0..2 {
                    lo[c] = lo[c].min(v[c]);
                    hi[c] = hi[c].max(v[c]);
                }
            }
            (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE)
        };
        let mut element_measure = Vec::with_capacity(ne);
        for e in 0..ne {
            let el = &mut connectivity[k * e..k * e + k];
            let m = if dim == 1 {
                if vertices[el[0]][0] > vertices[el[1]][0] {
                    el.swap(0, 1);
                }
                vertices[el[1]][0] - vertices[el[0]][0]
            } else {
                let a = signed_area(vertices[el[0]], vertices[el[1]], vertices[el[2]]);
                if a < 0.0 {
                    el.swap(1, 2);
                }
                a.abs()
            };
            let tiny = 1e-14 * scale.powi(dim as i32);
            if !(m > tiny) || el.iter().enumerate().any(|(i, x)| el[i + 1..].contains(x)) {
                return Err(MeshError::ZeroMeasure { element: e });
            }
            element_measure.push(m);
        }

        // facets shared by one element are on the boundary
        let mut facet_use: HashMap<(usize, usize), Vec<(usize, usize, usize)>> = HashMap::new();
        for e in 0..ne {
            let el = &connectivity[k * e..k * e + k];
            if dim == 1 {
                facet_use.entry((el[0], el[0])).or_default().push((el[0], el[0], e));
                facet_use.entry((el[1], el[1])).or_default().push((el[1], el[1], e));
            } else {
                for i in 0..3 {
                    let (a, b) = (el[i], el[(i + 1) % 3]);
                    facet_use.entry((a.min(b), a.max(b))).or_default().push((a, b, e));
                }
            }
        }
        let mut boundary_facets = Vec::new();
        for (key, uses) in &facet_use {
            match uses.len() {
                1 => {
                    let (a, b, element) = uses[0];
                    boundary_facets.push(BoundaryFacet { a, b, element });
                }
                2 => {
                    if dim == 2 && uses[0].0 == uses[1].0 {
                        return Err(MeshError::NonConforming(format!(
                            "edge {key:?} is traversed in the same direction by two elements"
                        )));
                    }
                }
                n => {
                    return Err(MeshError::NonConforming(format!("facet {key:?} is shared by {n} elements")));
                }
            }
        }
        boundary_facets.sort_by_key(|f| (f.a, f.b, f.element));
        let mut boundary_vertices: Vec<usize> = boundary_facets.iter().flat_map(|f| [f.a, f.b]).collect();
        boundary_vertices.sort_unstable();
        boundary_vertices.dedup();

        let mut used = vec![false; nv];
        for &i in &connectivity {
            used[i] = true;
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(MeshError::NonConforming(format!("vertex {v} belongs to no element")));
        }

        if dim == 2 {
            // a vertex strictly inside a boundary edge is a hanging node
            for f in &boundary_facets {
                let (pa, pb) = (vertices[f.a], vertices[f.b]);
                let len = dist(pa, pb);
                for (v, &p) in vertices.iter().enumerate() {
                    if v == f.a || v == f.b {
                        continue;
                    }
                    let t = ((p[0] - pa[0]) * (pb[0] - pa[0]) + (p[1] - pa[1]) * (pb[1] - pa[1])) / (len * len);
                    if t > 1e-12 && t < 1.0 - 1e-12 && segment_distance(p, pa, pb) < 1e-12 * len {
                        return Err(MeshError::NonConforming(format!(
                            "hanging vertex {v} on edge ({}, {})",
                            f.a, f.b
                        )));
                    }
                }
            }
        }

        let domain_measure = element_measure.iter().sum();
        let mut mesh = Self {
            dim,
            vertices,
            connectivity,
            element_measure,
            boundary_vertices,
            boundary_facets,
            domain_measure,
            id: 0,
        };
        if mesh.components() != 1 {
            return Err(MeshError::NonConforming("mesh is not connected".into()));
        }
        mesh.id = mesh.fingerprint();
        Ok(mesh)
    }

    fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.dim.hash(&mut h);
        for v in &self.vertices {
            v[0].to_bits().hash(&mut h);
            v[1].to_bits().hash(&mut h);
        }
        self.connectivity.hash(&mut h);
        h.finish()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.element_measure.len()
    }

    pub fn nodes(&self, e: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.connectivity[k * e..k * e + k]
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let nodes = self.nodes(e);
        let mut c = [0.0; 2];
        for &i in nodes {
            c[0] += self.vertices[i][0];
            c[1] += self.vertices[i][1];
        }
        let k = nodes.len() as f64;
        [c[0] / k, c[1] / k]
    }

    pub fn element_diameter(&self, e: usize) -> f64 {
        let nodes = self.nodes(e);
        let mut d: f64 = 0.0;
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                d = d.max(dist(self.vertices[nodes[i]], self.vertices[nodes[j]]));
            }
        }
        d
    }

    pub fn max_element_diameter(&self) -> f64 {
        (0..self.num_elements()).map(|e| self.element_diameter(e)).fold(0.0, f64::max)
    }

    /// Diagonal of the bounding box.
    pub fn diameter(&self) -> f64 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in &self.vertices {
            for c in 0..2 {
                lo[c] = lo[c].min(v[c]);
                hi[c] = hi[c].max(v[c]);
            }
        }
        (hi[0] - lo[0]).hypot(hi[1] - lo[1])
    }

    /// `(d-1)`-measure of a boundary facet (1 for the end points of an interval).
    pub fn facet_measure(&self, f: &BoundaryFacet) -> f64 {
        if self.dim == 1 {
            1.0
        } else {
            dist(self.vertices[f.a], self.vertices[f.b])
        }
    }

    /// Elements sharing a facet with each element.
    pub fn element_neighbors(&self) -> Vec<Vec<usize>> {
        let ne = self.num_elements();
        let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
        let mut adj = vec![Vec::new(); ne];
        for e in 0..ne {
            let nodes = self.nodes(e);
            let facets: Vec<(usize, usize)> = if self.dim == 1 {
                vec![(nodes[0], nodes[0]), (nodes[1], nodes[1])]
            } else {
                (0..3)
                    .map(|i| {
                        let (a, b) = (nodes[i], nodes[(i + 1) % 3]);
                        (a.min(b), a.max(b))
                    })
                    .collect()
            };
            for key in facets {
                if let Some(&other) = owner.get(&key) {
                    adj[e].push(other);
                    adj[other].push(e);
                } else {
                    owner.insert(key, e);
                }
            }
        }
        adj
    }

    /// Number of facet-connected components among the elements selected by
    /// `keep`.
    pub fn components_where(&self, keep: impl Fn(usize) -> bool) -> usize {
        let adj = self.element_neighbors();
        let mut seen = vec![false; self.num_elements()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.num_elements() {
            if seen[start] || !keep(start) {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(e) = stack.pop() {
                for &n in &adj[e] {
                    if !seen[n] && keep(n) {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        count
    }

    fn components(&self) -> usize {
        self.components_where(|_| true)
    }

    /// Distance from `p` to the discrete boundary.
    pub fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        self.boundary_facets
            .iter()
            .map(|f| segment_distance(p, self.vertices[f.a], self.vertices[f.b]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Boundary vertices in counter-clockwise order along the outer loop,
    /// starting from the lowest index (2D, simply connected meshes).
    pub fn boundary_loop(&self) -> Vec<usize> {
        if self.dim == 1 {
            return self.boundary_vertices.clone();
        }
        let next: HashMap<usize, usize> = self.boundary_facets.iter().map(|f| (f.a, f.b)).collect();
        let Some(&start) = self.boundary_vertices.first() else {
            return Vec::new();
        };
        let mut out = vec![start];
        let mut cur = next[&start];
        while cur != start && out.len() <= self.boundary_vertices.len() {
            out.push(cur);
            cur = next[&cur];
        }
        out
    }

    /// Serialises the mesh in the text format, floats with 17 significant
    /// digits so that re-import is exact.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mesh {} {} {}", self.dim, self.num_vertices(), self.num_elements());
        for v in &self.vertices {
            if self.dim == 1 {
                let _ = writeln!(s, "v {:.16e}", v[0]);
            } else {
                let _ = writeln!(s, "v {:.16e} {:.16e}", v[0], v[1]);
            }
        }
        for e in 0..self.num_elements() {
            let nodes = self.nodes(e);
            let _ = write!(s, "e");
            for n in nodes {
                let _ = write!(s, " {n}");
            }
            s.push('\n');
        }
        s
    }
}

/// Parses a mesh in the text format.
pub fn import_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut vertices = Vec::new();
    let mut connectivity = Vec::new();
    let mut elements = 0usize;
    let err = |line: usize, message: String| MeshError::Parse { line, message };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let tag = tokens.next().unwrap_or("");
        let rest: Vec<&str> = tokens.collect();
        match (tag, header) {
            ("mesh", None) => {
                if rest.len() != 3 {
                    return Err(err(line, "header must be `mesh <dim> <nv> <ne>`".into()));
                }
                let nums: Result<Vec<usize>, _> = rest.iter().map(|t| t.parse::<usize>()).collect();
                let nums = nums.map_err(|e| err(line, format!("bad header integer: {e}")))?;
                if !(nums[0] == 1 || nums[0] == 2) {
                    return Err(err(line, format!("dimension must be 1 or 2, got {}", nums[0])));
                }
                header = Some((nums[0], nums[1], nums[2]));
            }
            ("mesh", Some(_)) => return Err(err(line, "duplicate header".into())),
            (_, None) => return Err(err(line, "expected `mesh` header first".into())),
            ("v", Some((dim, nv, _))) => {
                if rest.len() != dim {
                    return Err(err(line, format!("vertex needs {dim} coordinate(s)")));
                }
                if vertices.len() == nv {
                    return Err(err(line, format!("more than {nv} vertices")));
                }
                if elements > 0 {
                    return Err(err(line, "vertex after elements".into()));
                }
                let mut p = [0.0; 2];
                for (c, t) in rest.iter().enumerate() {
                    p[c] = t.parse::<f64>().map_err(|e| err(line, format!("bad coordinate `{t}`: {e}")))?;
                    if !p[c].is_finite() {
                        return Err(err(line, format!("non-finite coordinate `{t}`")));
                    }
                }
                vertices.push(p);
            }
            ("e", Some((dim, nv, ne))) => {
                if rest.len() != dim + 1 {
                    return Err(err(line, format!("element needs {} vertex indices", dim + 1)));
                }
                if elements == ne {
                    return Err(err(line, format!("more than {ne} elements")));
                }
                if vertices.len() != nv {
                    return Err(err(line, format!("expected {nv} vertices before elements, found {}", vertices.len())));
                }
                for t in &rest {
                    let i = t.parse::<usize>().map_err(|e| err(line, format!("bad index `{t}`: {e}")))?;
                    if i >= nv {
                        return Err(err(line, format!("vertex index {i} out of range")));
                    }
                    connectivity.push(i);
                }
                elements += 1;
            }
            (other, Some(_)) => return Err(err(line, format!("unknown record `{other}`"))),
        }
    }
    let Some((dim, nv, ne)) = header else {
        return Err(err(0, "missing `mesh` header".into()));
    };
    let last = text.lines().count();
    if vertices.len() != nv || elements != ne {
        return Err(err(
            last,
            format!("expected {nv} vertices and {ne} elements, found {} and {elements}", vertices.len()),
        ));
    }
    Mesh::from_parts(dim, vertices, connectivity)
}

// ---------------------------------------------------------------------------
// Generators

/// Generates a conforming mesh of `shape` with element size about `h`.
pub fn generate(shape: Shape, h: f64) -> Result<(Mesh, BoundaryGeometry), MeshError> {
    let dims = shape.dimensions();
    if dims.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(MeshError::DegenerateShape(format!("dimensions must be positive: {shape:?}")));
    }
    let min_dim = dims.iter().copied().fold(f64::INFINITY, f64::min);
    if !(h > 0.0 && h <= min_dim / 4.0) {
        return Err(MeshError::DegenerateShape(format!(
            "need 0 < h <= {} for {shape:?}, got h = {h}",
            min_dim / 4.0
        )));
    }
    match shape {
        Shape::Interval { length } => interval(length, h),
        Shape::Rectangle { a, b } => rectangle(a, b, h),
        Shape::Disk { radius } => polar(radius, radius, h),
        Shape::Ellipse { a, b } => polar(a, b, h),
    }
}

fn divisions(len: f64, h: f64) -> usize {
    ((len / h) - 1e-9).ceil().max(1.0) as usize
}

fn interval(length: f64, h: f64) -> Result<(Mesh, BoundaryGeometry), MeshError> {
    let n = divisions(length, h);
    let vertices = (0..=n).map(|i| [length * i as f64 / n as f64, 0.0]).collect();
    let connectivity = (0..n).flat_map(|i| [i, i + 1]).collect();
    let mesh = Mesh::from_parts(1, vertices, connectivity)?;
    Ok((mesh, BoundaryGeometry::default()))
}

fn rectangle(a: f64, b: f64, h: f64) -> Result<(Mesh, BoundaryGeometry), MeshError> {
    let (nx, ny) = (divisions(a, h), divisions(b, h));
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([a * i as f64 / nx as f64, b * j as f64 / ny as f64]);
        }
    }
    let mut conn = Vec::with_capacity(6 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (p00, p10, p01, p11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            // alternate diagonals so the four corners are alike
            if (i + j) % 2 == 0 {
                conn.extend([p00, p10, p11, p00, p11, p01]);
            } else {
                conn.extend([p00, p10, p01, p10, p11, p01]);
            }
        }
    }
    let mesh = Mesh::from_parts(2, vertices, conn)?;
    let corners = [idx(0, 0), idx(nx, 0), idx(0, ny), idx(nx, ny)];
    let curvature = mesh
        .boundary_vertices
        .iter()
        .map(|&v| {
            let c = if corners.contains(&v) {
                Curvature::Corner
            } else {
                Curvature::Smooth(0.0)
            };
            (v, c)
        })
        .collect();
    Ok((mesh, BoundaryGeometry::from_map(curvature)))
}

/// Parameter angle `θ` of the ellipse `(a cos θ, b sin θ)` at which the arc
/// length from `θ = 0` is the fraction `frac` of the perimeter.
struct ArcLength {
    a: f64,
    b: f64,
    // cumulative arc length at θ_k = 2πk/PANELS
    table: Vec<f64>,
}

impl ArcLength {
    const PANELS: usize = 512;

    fn new(a: f64, b: f64) -> Self {
        let q = crate::quadrature::Quadrature::with_rel_tol(1e-13);
        let mut table = vec![0.0];
        let step = 2.0 * PI / Self::PANELS as f64;
        let mut acc = 0.0;
        for k in 0..Self::PANELS {
            let (v, _) = q
                .integrate(|t| Self::speed(a, b, t), k as f64 * step, (k + 1) as f64 * step)
                .expect("smooth integrand");
            acc += v;
            table.push(acc);
        }
        Self { a, b, table }
    }

    fn speed(a: f64, b: f64, t: f64) -> f64 {
        (a * t.sin()).hypot(b * t.cos())
    }

    fn angle(&self, frac: f64) -> f64 {
        if self.a == self.b {
            return 2.0 * PI * frac;
        }
        let target = frac * self.table[Self::PANELS];
        let k = self.table.partition_point(|&v| v <= target).clamp(1, Self::PANELS) - 1;
        let step = 2.0 * PI / Self::PANELS as f64;
        let t0 = k as f64 * step;
        // Newton with Gauss–Legendre arc length from the panel start
        let nodes = [(-0.906_179_845_938_664, 0.236_926_885_056_189_1), (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5), (0.0, 0.568_888_888_888_888_9), (0.538_469_310_105_683_1, 0.478_628_670_499_366_5), (0.906_179_845_938_664, 0.236_926_885_056_189_1)];
        let partial = |t: f64| {
            let (c, hw) = (0.5 * (t + t0), 0.5 * (t - t0));
            nodes.iter().map(|(x, w)| w * hw * Self::speed(self.a, self.b, c + hw * x)).sum::<f64>()
        };
        let mut t = t0 + step * 0.5;
        for _ in 0..20 {
            let f = self.table[k] + partial(t) - target;
            let dt = f / Self::speed(self.a, self.b, t);
            t -= dt;
            if dt.abs() < 1e-15 {
                break;
            }
        }
        t
    }
}

// rings of 6i vertices mapped onto the ellipse (aρ cos θ, bρ sin θ), at
// equal arc-length spacing so boundary triangles stay non-obtuse
fn polar(a: f64, b: f64, h: f64) -> Result<(Mesh, BoundaryGeometry), MeshError> {
    let nr = divisions(a.max(b), h);
    let arc = ArcLength::new(a, b);
    let mut vertices = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    let mut angles = vec![vec![0.0]];
    for i in 1..=nr {
        ring_start.push(vertices.len());
        let rho = i as f64 / nr as f64;
        let count = 6 * i;
        let mut ring = Vec::with_capacity(count);
        for j in 0..count {
            let theta = if 2 * j == count {
                PI
            } else {
                arc.angle(j as f64 / count as f64)
            };
            ring.push(theta);
            vertices.push(if i == nr {
                // exact boundary points
                [a * theta.cos(), b * theta.sin()]
            } else {
                [a * rho * theta.cos(), b * rho * theta.sin()]
            });
        }
        angles.push(ring);
    }
    let mut tris: Vec<[usize; 3]> = Vec::new();
    for j in 0..6 {
        tris.push([0, ring_start[1] + j, ring_start[1] + (j + 1) % 6]);
    }
    for i in 2..=nr {
        let (inner, outer) = (&angles[i - 1], &angles[i]);
        let (m, n) = (inner.len(), outer.len());
        let (si, so) = (ring_start[i - 1], ring_start[i]);
        let (mut p, mut q) = (0usize, 0usize);
        while p < m || q < n {
            let next_in = if p < m { (p + 1) as f64 / m as f64 } else { f64::INFINITY };
            let next_out = if q < n { (q + 1) as f64 / n as f64 } else { f64::INFINITY };
            if next_out <= next_in {
                tris.push([si + p % m, so + q, so + (q + 1) % n]);
                q += 1;
            } else {
                tris.push([si + p % m, so + q % n, si + (p + 1) % m]);
                p += 1;
            }
        }
    }
    delaunay_flips(&vertices, &mut tris);
    let conn = tris.iter().flat_map(|t| t.iter().copied()).collect();
    let mesh = Mesh::from_parts(2, vertices, conn)?;
    let boundary_start = ring_start[nr];
    let curvature = mesh
        .boundary_vertices
        .iter()
        .map(|&v| {
            let theta = angles[nr][v - boundary_start];
            let (s, c) = theta.sin_cos();
            let k = a * b / (a * a * s * s + b * b * c * c).powf(1.5);
            (v, Curvature::Smooth(k))
        })
        .collect();
    Ok((mesh, BoundaryGeometry::from_map(curvature)))
}

// cot of the angle at `c` in triangle (a, b, c)
fn cot_at(p: &[[f64; 2]], a: usize, b: usize, c: usize) -> f64 {
    let u = sub(p[a], p[c]);
    let v = sub(p[b], p[c]);
    (u[0] * v[0] + u[1] * v[1]) / cross(u, v).abs()
}

/// Lawson edge flips until every interior edge satisfies the Delaunay
/// angle condition, which makes the P1 stiffness off-diagonals non-positive.
fn delaunay_flips(p: &[[f64; 2]], tris: &mut [[usize; 3]]) {
    for _pass in 0..100 {
        let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in tris.iter().enumerate() {
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                edges.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        let mut keys: Vec<_> = edges.keys().copied().collect();
        keys.sort_unstable();
        let mut touched = vec![false; tris.len()];
        let mut flips = 0;
        for (a, b) in keys {
            let owners = &edges[&(a, b)];
            if owners.len() != 2 || touched[owners[0]] || touched[owners[1]] {
                continue;
            }
            let (t1, t2) = (owners[0], owners[1]);
            let c = *tris[t1].iter().find(|&&v| v != a && v != b).expect("triangle apex");
            let d = *tris[t2].iter().find(|&&v| v != a && v != b).expect("triangle apex");
            if cot_at(p, a, b, c) + cot_at(p, a, b, d) >= -1e-12 {
                continue;
            }
            // replace edge ab by cd, keeping counter-clockwise order
            let mut n1 = [c, d, a];
            let mut n2 = [d, c, b];
            for t in [&mut n1, &mut n2] {
                if signed_area(p[t[0]], p[t[1]], p[t[2]]) < 0.0 {
                    t.swap(1, 2);
                }
            }
            tris[t1] = n1;
            tris[t2] = n2;
            touched[t1] = true;
            touched[t2] = true;
            flips += 1;
        }
        if flips == 0 {
            return;
        }
    }
}
