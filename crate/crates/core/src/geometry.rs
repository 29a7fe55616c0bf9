//! Background mesh, ellipse level set, element classification and cut-cell
//! quadrature.
//!
//! The interface is represented by the P1 interpolant of the level set, so
//! each cut triangle carries one straight boundary segment. Volume rules on
//! cut triangles are obtained by splitting the sub-region `{φ_lin ≤ 0}` into
//! one or two triangles and mapping the degree-2 rule onto each.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ellipse parameters `μ = (r, θ)`: squared semi-axes along x and y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint {
    pub r: f64,
    pub theta: f64,
}

impl ParameterPoint {
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        if !(r > 0.0 && theta > 0.0 && r.is_finite() && theta.is_finite()) {
            return Err(Error::InvalidParameter { r, theta });
        }
        Ok(Self { r, theta })
    }

    /// Exact area `π√(rθ)` of the ellipse.
    pub fn ellipse_area(&self) -> f64 {
        std::f64::consts::PI * (self.r * self.theta).sqrt()
    }
}

impl fmt::Display for ParameterPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mu(r = {}, theta = {})", self.r, self.theta)
    }
}

/// Level set `φ = x²/r + y²/θ − 1`; negative inside the ellipse.
///
/// This is the only place where the ellipse family is hard-wired.
#[inline]
pub fn level_set(mu: ParameterPoint, x: f64, y: f64) -> f64 {
    x * x / mu.r + y * y / mu.theta - 1.0
}

/// Axis-aligned box `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl BoxDomain {
    pub fn square(lo: f64, hi: f64) -> Self {
        Self { x: [lo, hi], y: [lo, hi] }
    }

    pub fn area(&self) -> f64 {
        (self.x[1] - self.x[0]) * (self.y[1] - self.y[0])
    }
}

/// Mesh edge with its one or two neighbouring triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Facet {
    pub vertices: [usize; 2],
    pub triangles: [usize; 2],
    pub interior: bool,
}

impl Facet {
    /// Neighbouring triangles; the second exists only for interior facets.
    pub fn neighbours(&self) -> &[usize] {
        if self.interior {
            &self.triangles
        } else {
            &self.triangles[..1]
        }
    }
}

/// Structured triangulation of a square box.
#[derive(Debug, Clone)]
pub struct BackgroundMesh {
    pub domain: BoxDomain,
    /// Cells per side.
    pub cells: usize,
    /// Grid spacing `width / cells`; this is the `h` entering all penalty weights.
    pub h: f64,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub facets: Vec<Facet>,
    /// Facet indices of each triangle, ordered as edges (0,1), (1,2), (2,0).
    pub triangle_facets: Vec<[usize; 3]>,
    /// Triangles incident to each vertex, ascending.
    pub vertex_triangles: Vec<Vec<usize>>,
}

impl BackgroundMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Largest triangle diameter (the diagonal `h√2` on this grid).
    pub fn max_diameter(&self) -> f64 {
        self.triangles
            .iter()
            .map(|tri| {
                let p = tri.map(|v| self.vertices[v]);
                (0..3).map(|k| dist(p[k], p[(k + 1) % 3])).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Gradients of the three P1 basis functions on triangle `t`.
    pub fn p1_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        [
            [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
            [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
            [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
        ]
    }

    /// Values of the three P1 basis functions of triangle `t` at `p`.
    pub fn p1_values(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let grads = self.p1_gradients(t);
        let v = self.vertices[self.triangles[t][0]];
        let dx = p[0] - v[0];
        let dy = p[1] - v[1];
        let l1 = grads[1][0] * dx + grads[1][1] * dy;
        let l2 = grads[2][0] * dx + grads[2][1] * dy;
        [1.0 - l1 - l2, l1, l2]
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Uniform `n × n` grid with `n = ceil(width / h_target)`, every square split
/// along its bottom-left to top-right diagonal.
pub fn build_background_mesh(domain: BoxDomain, h_target: f64) -> Result<BackgroundMesh> {
    let width = domain.x[1] - domain.x[0];
    let height = domain.y[1] - domain.y[0];
    if !(width > 0.0 && height > 0.0) || (width - height).abs() > 1e-12 * width.max(height) {
        return Err(Error::NonSquareBox { x0: domain.x[0], x1: domain.x[1], y0: domain.y[0], y1: domain.y[1] });
    }
    if !(h_target > 0.0 && h_target.is_finite()) {
        return Err(Error::InvalidInput(format!("h_target must be positive, got {h_target}")));
    }
    let n = ((width / h_target) - 1e-12).ceil().max(1.0) as usize;
    let h = width / n as f64;

    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([domain.x[0] + i as f64 * h, domain.y[0] + j as f64 * h]);
        }
    }
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v11, v01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }

    let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
    let mut facets: Vec<Facet> = Vec::new();
    let mut triangle_facets = Vec::with_capacity(triangles.len());
    for (t, tri) in triangles.iter().enumerate() {
        let mut local = [0usize; 3];
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let f = *lookup.entry(key).or_insert_with(|| {
                facets.push(Facet { vertices: [key.0, key.1], triangles: [t, usize::MAX], interior: false });
                facets.len() - 1
            });
            if facets[f].triangles[0] != t {
                facets[f].triangles[1] = t;
                facets[f].interior = true;
            }
            local[k] = f;
        }
        triangle_facets.push(local);
    }

    let mut vertex_triangles = vec![Vec::new(); vertices.len()];
    for (t, tri) in triangles.iter().enumerate() {
        for &v in tri {
            vertex_triangles[v].push(t);
        }
    }

    Ok(BackgroundMesh { domain, cells: n, h, vertices, triangles, facets, triangle_facets, vertex_triangles })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementClass {
    Inside,
    Cut,
    Outside,
}

/// Point-weight pairs of a volume rule.
pub type VolumeRule = Vec<([f64; 2], f64)>;

/// Two-point Gauss rule on the straight interface segment of a cut triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryRule {
    pub points: [[f64; 2]; 2],
    pub weights: [f64; 2],
    /// Outward unit normal `∇φ_lin / |∇φ_lin|`.
    pub normal: [f64; 2],
}

impl BoundaryRule {
    pub fn length(&self) -> f64 {
        self.weights[0] + self.weights[1]
    }
}

/// Classification and quadrature of a single triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementCut {
    pub class: ElementClass,
    pub volume: VolumeRule,
    /// `None` for non-cut triangles and for degenerate (zero-length) segments.
    pub boundary: Option<BoundaryRule>,
    pub degenerate: bool,
}

// Strang-Fix degree-2 rule in barycentric coordinates, equal weights 1/3.
const TRI_RULE: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

fn map_triangle_rule(p: [[f64; 2]; 3], out: &mut VolumeRule) {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])).abs();
    for bary in TRI_RULE {
        let x = bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0];
        let y = bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1];
        out.push(([x, y], area / 3.0));
    }
}

fn edge_crossing(a: [f64; 2], phi_a: f64, b: [f64; 2], phi_b: f64) -> [f64; 2] {
    // phi_a <= 0 < phi_b
    let t = phi_a / (phi_a - phi_b);
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Classifies triangle `t` by the signs of `φ` at its vertices and builds its
/// quadrature rules. Vertices with `φ ≤ 0` count as inside.
pub fn cut_element(mesh: &BackgroundMesh, mu: ParameterPoint, t: usize) -> ElementCut {
    let tri = mesh.triangles[t];
    let p = tri.map(|v| mesh.vertices[v]);
    let phi = p.map(|q| level_set(mu, q[0], q[1]));
    let inside: Vec<usize> = (0..3).filter(|&k| phi[k] <= 0.0).collect();
    match inside.len() {
        3 => {
            let mut volume = Vec::with_capacity(3);
            map_triangle_rule(p, &mut volume);
            return ElementCut { class: ElementClass::Inside, volume, boundary: None, degenerate: false };
        }
        0 => return ElementCut { class: ElementClass::Outside, volume: Vec::new(), boundary: None, degenerate: false },
        _ => {}
    }

    let mut volume = Vec::with_capacity(6);
    let (s0, s1) = if inside.len() == 1 {
        let a = inside[0];
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        let pb = edge_crossing(p[a], phi[a], p[b], phi[b]);
        let pc = edge_crossing(p[a], phi[a], p[c], phi[c]);
        map_triangle_rule([p[a], pb, pc], &mut volume);
        (pb, pc)
    } else {
        let c = (0..3).find(|&k| phi[k] > 0.0).expect("one outside vertex");
        let (a, b) = ((c + 1) % 3, (c + 2) % 3);
        let pa = edge_crossing(p[a], phi[a], p[c], phi[c]);
        let pb = edge_crossing(p[b], phi[b], p[c], phi[c]);
        map_triangle_rule([p[a], p[b], pb], &mut volume);
        map_triangle_rule([p[a], pb, pa], &mut volume);
        (pb, pa)
    };

    let len = dist(s0, s1);
    if len < 1e-14 * mesh.h {
        return ElementCut { class: ElementClass::Cut, volume, boundary: None, degenerate: true };
    }
    let grads = mesh.p1_gradients(t);
    let mut g = [0.0; 2];
    for k in 0..3 {
        g[0] += phi[k] * grads[k][0];
        g[1] += phi[k] * grads[k][1];
    }
    let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
    let normal = [g[0] / gn, g[1] / gn];
    let off = 0.5 / 3f64.sqrt();
    let lerp = |s: f64| [s0[0] + s * (s1[0] - s0[0]), s0[1] + s * (s1[1] - s0[1])];
    let boundary = BoundaryRule { points: [lerp(0.5 - off), lerp(0.5 + off)], weights: [0.5 * len, 0.5 * len], normal };
    ElementCut { class: ElementClass::Cut, volume, boundary: Some(boundary), degenerate: false }
}

/// A ghost facet is an interior facet with two active neighbours, at least one of them cut.
pub fn is_ghost_facet(facet: &Facet, class_of: impl Fn(usize) -> ElementClass) -> bool {
    if !facet.interior {
        return false;
    }
    let (c0, c1) = (class_of(facet.triangles[0]), class_of(facet.triangles[1]));
    c0 != ElementClass::Outside
        && c1 != ElementClass::Outside
        && (c0 == ElementClass::Cut || c1 == ElementClass::Cut)
}

/// Per-parameter view of the background mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct CutGeometry {
    pub mu: ParameterPoint,
    pub class: Vec<ElementClass>,
    /// Active triangles (inside or cut), ascending.
    pub active: Vec<usize>,
    /// Cut triangles, ascending.
    pub cut: Vec<usize>,
    /// Ghost-penalty facets, ascending.
    pub ghost_facets: Vec<usize>,
    /// Volume rules, parallel to `active`.
    pub volume_rules: Vec<VolumeRule>,
    /// Boundary rules, parallel to `cut`.
    pub boundary_rules: Vec<Option<BoundaryRule>>,
    /// Cut triangles whose interface segment was too short and was skipped.
    pub degenerate_cuts: Vec<usize>,
}

impl CutGeometry {
    pub fn count(&self, class: ElementClass) -> usize {
        self.class.iter().filter(|&&c| c == class).count()
    }

    /// Sum of volume weights, the area of the discrete domain.
    pub fn area(&self) -> f64 {
        self.volume_rules.iter().flatten().map(|(_, w)| w).sum()
    }

    /// Sum of boundary weights, the length of the discrete interface.
    pub fn perimeter(&self) -> f64 {
        self.boundary_rules.iter().flatten().map(BoundaryRule::length).sum()
    }

    /// Active dofs: vertices of active triangles, ascending.
    pub fn active_dofs(&self, mesh: &BackgroundMesh) -> Vec<usize> {
        let mut flag = vec![false; mesh.num_vertices()];
        for &t in &self.active {
            for v in mesh.triangles[t] {
                flag[v] = true;
            }
        }
        (0..flag.len()).filter(|&v| flag[v]).collect()
    }
}

pub fn build_cut_geometry(mesh: &BackgroundMesh, mu: ParameterPoint) -> CutGeometry {
    let cuts: Vec<ElementCut> = (0..mesh.num_triangles()).map(|t| cut_element(mesh, mu, t)).collect();
    let class: Vec<ElementClass> = cuts.iter().map(|c| c.class).collect();
    let mut active = Vec::new();
    let mut cut = Vec::new();
    let mut volume_rules = Vec::new();
    let mut boundary_rules = Vec::new();
    let mut degenerate_cuts = Vec::new();
    for (t, c) in cuts.into_iter().enumerate() {
        match c.class {
            ElementClass::Outside => continue,
            ElementClass::Cut => {
                cut.push(t);
                boundary_rules.push(c.boundary);
                if c.degenerate {
                    log::warn!("degenerate interface segment skipped in triangle {t} at {mu}");
                    degenerate_cuts.push(t);
                }
            }
            ElementClass::Inside => {}
        }
        active.push(t);
        volume_rules.push(c.volume);
    }
    let ghost_facets = (0..mesh.facets.len()).filter(|&f| is_ghost_facet(&mesh.facets[f], |t| class[t])).collect();
    CutGeometry { mu, class, active, cut, ghost_facets, volume_rules, boundary_rules, degenerate_cuts }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_mesh() -> BackgroundMesh {
        build_background_mesh(BoxDomain::square(-1.2, 1.2), 0.125).unwrap()
    }

    #[test]
    fn default_mesh_counts() {
        let mesh = default_mesh();
        assert_eq!(mesh.cells, 20);
        assert!((mesh.h - 0.12).abs() < 1e-15);
        assert_eq!(mesh.num_vertices(), 441);
        assert_eq!(mesh.num_triangles(), 800);
        assert!((mesh.max_diameter() - 0.12 * 2f64.sqrt()).abs() < 1e-12);
        // 2n(n+1) axis-aligned edges plus n² diagonals
        assert_eq!(mesh.facets.len(), 2 * 20 * 21 + 400);
    }

    #[test]
    fn minimal_mesh() {
        let mesh = build_background_mesh(BoxDomain::square(0.0, 1.0), 1.0).unwrap();
        assert_eq!(mesh.num_vertices(), 4);
        assert_eq!(mesh.num_triangles(), 2);
        assert!(mesh.h <= 1.0);
    }

    #[test]
    fn rejects_non_square_box() {
        let err = build_background_mesh(BoxDomain { x: [0.0, 1.0], y: [0.0, 2.0] }, 0.1).unwrap_err();
        assert!(matches!(err, Error::NonSquareBox { .. }));
    }

    #[test]
    fn triangles_are_counter_clockwise_and_facets_well_formed() {
        let mesh = default_mesh();
        for t in 0..mesh.num_triangles() {
            assert!(mesh.triangle_area(t) > 0.0);
        }
        for f in &mesh.facets {
            assert_eq!(f.neighbours().len(), if f.interior { 2 } else { 1 });
        }
    }

    #[test]
    fn level_set_values() {
        let unit = ParameterPoint::new(1.0, 1.0).unwrap();
        assert_eq!(level_set(unit, 0.0, 0.0), -1.0);
        assert_eq!(level_set(unit, 1.0, 0.0), 0.0);
        let mu = ParameterPoint::new(1.2, 1.0).unwrap();
        assert!(level_set(mu, 1.2f64.sqrt(), 0.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_parameter_rejected() {
        assert!(ParameterPoint::new(0.0, 1.0).is_err());
        assert!(ParameterPoint::new(1.0, -1.0).is_err());
    }

    #[test]
    fn unit_circle_area_and_perimeter() {
        let mesh = default_mesh();
        let geom = build_cut_geometry(&mesh, ParameterPoint::new(1.0, 1.0).unwrap());
        let pi = std::f64::consts::PI;
        assert!((geom.area() - pi).abs() / pi < 0.02);
        assert!((geom.perimeter() - 2.0 * pi).abs() / (2.0 * pi) < 0.02);
    }

    #[test]
    fn classification_partition_and_ghost_facets() {
        let mesh = default_mesh();
        for mu in [(1.0, 1.0), (1.2, 1.0), (1.1, 1.17), (1.0, 1.2)] {
            let geom = build_cut_geometry(&mesh, ParameterPoint::new(mu.0, mu.1).unwrap());
            let (i, c, o) =
                (geom.count(ElementClass::Inside), geom.count(ElementClass::Cut), geom.count(ElementClass::Outside));
            assert_eq!(i + c + o, mesh.num_triangles());
            assert_eq!(geom.active.len(), i + c);
            assert_eq!(geom.boundary_rules.len(), c);
            for &f in &geom.ghost_facets {
                let facet = &mesh.facets[f];
                assert!(facet.interior);
                assert!(facet.triangles.iter().all(|&t| geom.class[t] != ElementClass::Outside));
                assert!(facet.triangles.iter().any(|&t| geom.class[t] == ElementClass::Cut));
            }
            for rule in geom.boundary_rules.iter().flatten() {
                let n = (rule.normal[0].powi(2) + rule.normal[1].powi(2)).sqrt();
                assert!((n - 1.0).abs() < 1e-12);
            }
            let area = geom.area();
            assert!(area > 0.0 && area < mesh.domain.area());
        }
    }

    #[test]
    fn outside_elements_have_no_quadrature() {
        let mesh = default_mesh();
        let mu = ParameterPoint::new(1.0, 1.0).unwrap();
        // corner triangle is far outside the unit circle
        let cut = cut_element(&mesh, mu, 0);
        assert_eq!(cut.class, ElementClass::Outside);
        assert!(cut.volume.is_empty() && cut.boundary.is_none());
        let geom = build_cut_geometry(&mesh, mu);
        assert!(!geom.active.contains(&0));
    }

    #[test]
    fn outward_normals_point_away_from_origin() {
        let mesh = default_mesh();
        let geom = build_cut_geometry(&mesh, ParameterPoint::new(1.1, 1.05).unwrap());
        for rule in geom.boundary_rules.iter().flatten() {
            let p = rule.points[0];
            assert!(p[0] * rule.normal[0] + p[1] * rule.normal[1] > 0.0);
        }
    }

    #[test]
    fn geometry_is_deterministic() {
        let mesh = default_mesh();
        let mu = ParameterPoint::new(1.13, 1.07).unwrap();
        assert_eq!(build_cut_geometry(&mesh, mu), build_cut_geometry(&mesh, mu));
    }

    #[test]
    fn vertex_on_interface_counts_inside() {
        // on [0,1]² with one cell, vertices (1,0) and (0,1) lie exactly on the unit circle
        let mesh = build_background_mesh(BoxDomain::square(0.0, 1.0), 1.0).unwrap();
        let mu = ParameterPoint::new(1.0, 1.0).unwrap();
        assert_eq!(level_set(mu, 1.0, 0.0), 0.0);
        let cut = cut_element(&mesh, mu, 0);
        assert_eq!(cut.class, ElementClass::Cut);
        // φ = (-1, 0, 1): inside region is the triangle (0,0), (1,0), (1,0.5)
        let area: f64 = cut.volume.iter().map(|(_, w)| w).sum();
        assert!((area - 0.25).abs() < 1e-15);
    }
}
