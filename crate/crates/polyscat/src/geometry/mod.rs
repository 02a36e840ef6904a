//! Polyhedral scatterers, grating profiles, corner extraction and
//! angle-rationality classification.

mod angle;
pub mod formats;
mod grating;
pub mod shapes;

pub use angle::{classify_angle, AngleClass};
pub use grating::{grating_corners, GratingCorners, GratingFacet, GratingProfile, PERIOD};

use num_complex::Complex64;
use thiserror::Error;

pub const COPLANARITY_TOL: f64 = 1e-10;
pub const DEGENERATE_ANGLE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("face {face}: {reason}")]
    InvalidFace { face: usize, reason: String },
    #[error("boundary is not a closed orientable manifold: {0}")]
    NotClosed(String),
    #[error("degenerate edge between faces {0} and {1}: dihedral within {DEGENERATE_ANGLE_TOL:e} of 0 or pi")]
    DegenerateEdge(usize, usize),
    #[error("grating profile invalid: {0}")]
    InvalidProfile(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// 3D point / vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
    pub fn normalized(self) -> Vec3 {
        self / self.norm()
    }
    pub fn as_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
    pub fn from_array(a: [f64; 3]) -> Vec3 {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}
impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}
impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}
impl std::ops::Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}
impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Per-face impedance: the constant term drives the boundary condition;
/// higher-order terms are carried but not used by the solvers.
#[derive(Debug, Clone)]
pub struct ImpedanceSpec {
    pub alpha0: Complex64,
    /// (degree >= 1, descriptor) pairs of the radial expansion
    pub higher_terms: Vec<(u32, String)>,
}

impl ImpedanceSpec {
    pub fn constant(alpha0: Complex64) -> Self {
        ImpedanceSpec { alpha0, higher_terms: Vec::new() }
    }
}

#[derive(Debug, Clone)]
pub struct Face {
    /// counterclockwise with respect to the outward normal
    pub vertex_indices: Vec<usize>,
    pub impedance: ImpedanceSpec,
}

#[derive(Debug, Clone)]
pub struct Polyhedron {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<Face>,
}

/// Edge corner: two adjacent faces meeting along a segment with dihedral
/// angle alpha * pi, alpha in (0, 1).
#[derive(Debug, Clone)]
pub struct EdgeCorner {
    pub face_a: usize,
    pub face_b: usize,
    pub segment: (Vec3, Vec3),
    /// dihedral angle phi_0 in (0, pi)
    pub dihedral: f64,
    /// alpha = phi_0 / pi
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VertexClass {
    /// largest degree among the incident rational edge corners
    Rational { degree: u32 },
    Irrational,
}

#[derive(Debug, Clone)]
pub struct VertexCorner {
    pub apex: Vec3,
    /// indices into the edge-corner list
    pub edge_corners: Vec<usize>,
    pub classification: VertexClass,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ObstacleClass {
    Irrational,
    /// smallest degree among the rational vertex corners
    Rational { degree: u32 },
}

#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    /// faces violating admissibility, with reasons
    pub inadmissible_faces: Vec<(usize, String)>,
    pub vertex_corners: Vec<VertexCorner>,
    pub class: ObstacleClass,
    /// whether the rational-degree hypothesis deg >= 3 holds
    /// (vacuously true for irrational obstacles, which satisfy the
    /// irrational-case theorem instead)
    pub degree_hypothesis_holds: bool,
}

impl AdmissibilityReport {
    pub fn is_admissible(&self) -> bool {
        self.inadmissible_faces.is_empty()
    }
}

impl Polyhedron {
    pub fn validate(&self) -> Result<(), GeometryError> {
        use std::collections::HashMap;
        let mut edge_count: HashMap<(usize, usize), i32> = HashMap::new();
        for (fi, face) in self.faces.iter().enumerate() {
            let k = face.vertex_indices.len();
            if k < 3 {
                return Err(GeometryError::InvalidFace {
                    face: fi,
                    reason: format!("only {k} vertices"),
                });
            }
            for &vi in &face.vertex_indices {
                if vi >= self.vertices.len() {
                    return Err(GeometryError::InvalidFace {
                        face: fi,
                        reason: format!("vertex index {vi} out of range"),
                    });
                }
            }
            let n = self.face_normal(fi);
            if !n.norm().is_finite() || n.norm() == 0.0 {
                return Err(GeometryError::InvalidFace {
                    face: fi,
                    reason: "degenerate normal".into(),
                });
            }
            // coplanarity within tolerance relative to the face diameter
            let c = self.face_centroid(fi);
            let nn = n.normalized();
            let diam = face
                .vertex_indices
                .iter()
                .map(|&v| (self.vertices[v] - c).norm())
                .fold(0.0_f64, f64::max);
            for &v in &face.vertex_indices {
                let off = (self.vertices[v] - c).dot(nn).abs();
                if off > COPLANARITY_TOL * diam.max(1.0) {
                    return Err(GeometryError::InvalidFace {
                        face: fi,
                        reason: format!("vertex {v} off-plane by {off:e}"),
                    });
                }
            }
            for i in 0..k {
                let a = face.vertex_indices[i];
                let b = face.vertex_indices[(i + 1) % k];
                // directed edge count: +1 for (a,b), -1 for (b,a)
                let (key, sgn) = if a < b { ((a, b), 1) } else { ((b, a), -1) };
                *edge_count.entry(key).or_insert(0) += sgn;
            }
        }
        for ((a, b), c) in &edge_count {
            if *c != 0 {
                return Err(GeometryError::NotClosed(format!(
                    "edge ({a}, {b}) has unbalanced orientation count {c}"
                )));
            }
        }
        Ok(())
    }

    /// Unnormalized outward normal (Newell's method over the vertex loop).
    pub fn face_normal(&self, face: usize) -> Vec3 {
        let idx = &self.faces[face].vertex_indices;
        let mut n = Vec3::ZERO;
        for i in 0..idx.len() {
            let a = self.vertices[idx[i]];
            let b = self.vertices[idx[(i + 1) % idx.len()]];
            n = n + a.cross(b);
        }
        n
    }

    pub fn face_unit_normal(&self, face: usize) -> Vec3 {
        self.face_normal(face).normalized()
    }

    pub fn face_centroid(&self, face: usize) -> Vec3 {
        let idx = &self.faces[face].vertex_indices;
        idx.iter().fold(Vec3::ZERO, |s, &v| s + self.vertices[v]) / idx.len() as f64
    }

    pub fn centroid(&self) -> Vec3 {
        self.vertices.iter().fold(Vec3::ZERO, |s, &v| s + v) / self.vertices.len() as f64
    }

    /// Distance from the centroid to the nearest face plane.
    pub fn inradius(&self) -> f64 {
        let c = self.centroid();
        (0..self.faces.len())
            .map(|f| (c - self.face_centroid(f)).dot(self.face_unit_normal(f)).abs())
            .fold(f64::MAX, f64::min)
    }

    pub fn diameter(&self) -> f64 {
        let mut d = 0.0_f64;
        for i in 0..self.vertices.len() {
            for j in (i + 1)..self.vertices.len() {
                d = d.max((self.vertices[i] - self.vertices[j]).norm());
            }
        }
        d
    }

    /// Point-in-solid test by ray parity against the triangulated boundary.
    pub fn contains(&self, p: Vec3) -> bool {
        // fixed irrational-ish direction to dodge edge/vertex hits
        let dir = Vec3::new(0.577_215_664_9, 0.318_309_886_2, 0.755_551_3).normalized();
        let mut crossings = 0;
        for f in 0..self.faces.len() {
            let idx = &self.faces[f].vertex_indices;
            let v0 = self.vertices[idx[0]];
            for t in 1..idx.len() - 1 {
                let v1 = self.vertices[idx[t]];
                let v2 = self.vertices[idx[t + 1]];
                if ray_hits_triangle(p, dir, v0, v1, v2) {
                    crossings += 1;
                }
            }
        }
        crossings % 2 == 1
    }

    /// Signed distance proxy: positive distance to the boundary for points
    /// outside, used to keep evaluation points off the surface.
    pub fn distance_to_boundary(&self, p: Vec3) -> f64 {
        let mut d = f64::MAX;
        for f in 0..self.faces.len() {
            let idx = &self.faces[f].vertex_indices;
            let v0 = self.vertices[idx[0]];
            for t in 1..idx.len() - 1 {
                let v1 = self.vertices[idx[t]];
                let v2 = self.vertices[idx[t + 1]];
                d = d.min(point_triangle_distance(p, v0, v1, v2));
            }
        }
        d
    }

    pub fn translated(&self, t: Vec3) -> Polyhedron {
        Polyhedron {
            vertices: self.vertices.iter().map(|&v| v + t).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn scaled(&self, s: f64) -> Polyhedron {
        Polyhedron {
            vertices: self.vertices.iter().map(|&v| v * s).collect(),
            faces: self.faces.clone(),
        }
    }
}

fn ray_hits_triangle(origin: Vec3, dir: Vec3, v0: Vec3, v1: Vec3, v2: Vec3) -> bool {
    // Moller-Trumbore
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let h = dir.cross(e2);
    let a = e1.dot(h);
    if a.abs() < 1e-14 {
        return false;
    }
    let f = 1.0 / a;
    let s = origin - v0;
    let u = f * s.dot(h);
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let q = s.cross(e1);
    let v = f * dir.dot(q);
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    f * e2.dot(q) > 1e-14
}

fn point_triangle_distance(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> f64 {
    // project into the plane, clamp to the triangle
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (ap - ab * v).norm();
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (ap - ac * w).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (bp - (c - b) * w).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (ap - ab * v - ac * w).norm()
}

/// Dihedral angle in (0, pi) between two faces with outward unit normals
/// `na`, `nb`: pi minus the angle between the normals.
pub fn dihedral_from_normals(na: Vec3, nb: Vec3) -> f64 {
    std::f64::consts::PI - na.dot(nb).clamp(-1.0, 1.0).acos()
}

/// One edge corner per boundary edge, with the dihedral measured from the
/// adjacent face normals and normalized to (0, pi).
pub fn extract_edge_corners(p: &Polyhedron) -> Result<Vec<EdgeCorner>, GeometryError> {
    use std::collections::HashMap;
    p.validate()?;
    let mut adjacency: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (fi, face) in p.faces.iter().enumerate() {
        let k = face.vertex_indices.len();
        for i in 0..k {
            let a = face.vertex_indices[i];
            let b = face.vertex_indices[(i + 1) % k];
            let key = if a < b { (a, b) } else { (b, a) };
            adjacency.entry(key).or_default().push(fi);
        }
    }
    let mut keys: Vec<_> = adjacency.keys().cloned().collect();
    keys.sort();
    let mut out = Vec::new();
    for key in keys {
        let faces = &adjacency[&key];
        if faces.len() != 2 {
            return Err(GeometryError::NotClosed(format!(
                "edge ({}, {}) shared by {} faces",
                key.0,
                key.1,
                faces.len()
            )));
        }
        let (fa, fb) = (faces[0], faces[1]);
        let na = p.face_unit_normal(fa);
        let nb = p.face_unit_normal(fb);
        let dihedral = dihedral_from_normals(na, nb);
        if dihedral < DEGENERATE_ANGLE_TOL || dihedral > std::f64::consts::PI - DEGENERATE_ANGLE_TOL
        {
            return Err(GeometryError::DegenerateEdge(fa, fb));
        }
        out.push(EdgeCorner {
            face_a: fa,
            face_b: fb,
            segment: (p.vertices[key.0], p.vertices[key.1]),
            dihedral,
            alpha: dihedral / std::f64::consts::PI,
        });
    }
    Ok(out)
}

/// Groups edge corners into vertex corners (>= 3 incident faces) and
/// classifies each per the rational / irrational dichotomy.
pub fn vertex_corners(p: &Polyhedron, edges: &[EdgeCorner]) -> Vec<VertexCorner> {
    let mut per_vertex: Vec<Vec<usize>> = vec![Vec::new(); p.vertices.len()];
    for (ei, e) in edges.iter().enumerate() {
        for (vi, v) in p.vertices.iter().enumerate() {
            if (*v - e.segment.0).norm() < 1e-12 || (*v - e.segment.1).norm() < 1e-12 {
                per_vertex[vi].push(ei);
            }
        }
    }
    let mut out = Vec::new();
    for (vi, incident) in per_vertex.iter().enumerate() {
        if incident.len() < 3 {
            continue;
        }
        let classification = classify_vertex(edges, incident);
        out.push(VertexCorner {
            apex: p.vertices[vi],
            edge_corners: incident.clone(),
            classification,
        });
    }
    out
}

pub(crate) fn classify_vertex(edges: &[EdgeCorner], incident: &[usize]) -> VertexClass {
    let mut max_degree = 0u32;
    for &ei in incident {
        match classify_angle(edges[ei].alpha, 1000, 1e-9) {
            AngleClass::Rational { p, .. } => max_degree = max_degree.max(p),
            AngleClass::Irrational { .. } => return VertexClass::Irrational,
        }
    }
    VertexClass::Rational { degree: max_degree }
}

/// Full admissibility audit: per-face impedance, per-vertex classification,
/// obstacle-level rational degree and the deg >= 3 hypothesis flag.
pub fn admissibility_report(p: &Polyhedron) -> Result<AdmissibilityReport, GeometryError> {
    let edges = extract_edge_corners(p)?;
    let verts = vertex_corners(p, &edges);
    let mut inadmissible = Vec::new();
    for (fi, face) in p.faces.iter().enumerate() {
        if face.impedance.alpha0.norm() == 0.0 {
            inadmissible.push((fi, "constant impedance term alpha_0 = 0".to_string()));
        }
    }
    let mut min_rational_degree: Option<u32> = None;
    for v in &verts {
        if let VertexClass::Rational { degree } = v.classification {
            min_rational_degree = Some(min_rational_degree.map_or(degree, |d| d.min(degree)));
        }
    }
    let class = match min_rational_degree {
        Some(degree) => ObstacleClass::Rational { degree },
        None => ObstacleClass::Irrational,
    };
    let degree_hypothesis_holds = match class {
        ObstacleClass::Irrational => true,
        ObstacleClass::Rational { degree } => degree >= 3,
    };
    Ok(AdmissibilityReport {
        inadmissible_faces: inadmissible,
        vertex_corners: verts,
        class,
        degree_hypothesis_holds,
    })
}
