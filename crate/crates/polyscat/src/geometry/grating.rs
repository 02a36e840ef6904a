//! Bi-periodic polyhedral grating profiles: planar facets tiling one
//! period cell [0, 2pi)^2 of the graph x3 = f(x').

use super::{
    classify_vertex, dihedral_from_normals, EdgeCorner, GeometryError, ImpedanceSpec,
    ObstacleClass, Vec3, VertexClass, VertexCorner, DEGENERATE_ANGLE_TOL,
};

pub const PERIOD: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct GratingFacet {
    /// planar loop, counterclockwise seen from above (upward normal)
    pub vertices: Vec<Vec3>,
    pub impedance: ImpedanceSpec,
}

impl GratingFacet {
    /// Unnormalized upward normal (Newell's method).
    pub fn normal(&self) -> Vec3 {
        let mut n = Vec3::ZERO;
        for i in 0..self.vertices.len() {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % self.vertices.len()];
            n = n + a.cross(b);
        }
        n
    }

    pub fn unit_normal(&self) -> Vec3 {
        self.normal().normalized()
    }

    pub fn centroid(&self) -> Vec3 {
        self.vertices.iter().fold(Vec3::ZERO, |s, &v| s + v) / self.vertices.len() as f64
    }

    /// Area of the projection onto the horizontal plane.
    pub fn projected_area(&self) -> f64 {
        let mut a = 0.0;
        for i in 0..self.vertices.len() {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % self.vertices.len()];
            a += p.x * q.y - q.x * p.y;
        }
        0.5 * a
    }

    fn contains_xy(&self, x: f64, y: f64, eps: f64) -> bool {
        // crossing parity with an edge tolerance band
        let n = self.vertices.len();
        let mut inside = false;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            // distance to the edge segment in the plane
            let (ex, ey) = (q.x - p.x, q.y - p.y);
            let len2 = ex * ex + ey * ey;
            let t = (((x - p.x) * ex + (y - p.y) * ey) / len2).clamp(0.0, 1.0);
            let (dx, dy) = (x - (p.x + t * ex), y - (p.y + t * ey));
            if (dx * dx + dy * dy).sqrt() < eps {
                return true;
            }
            if (p.y > y) != (q.y > y) {
                let xi = p.x + (y - p.y) / (q.y - p.y) * (q.x - p.x);
                if x < xi {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Height of the facet plane above (x, y).
    fn plane_height(&self, x: f64, y: f64) -> f64 {
        let n = self.unit_normal();
        let p0 = self.vertices[0];
        p0.z + (n.x * (p0.x - x) + n.y * (p0.y - y)) / n.z
    }
}

#[derive(Debug, Clone)]
pub struct GratingProfile {
    pub facets: Vec<GratingFacet>,
}

impl GratingProfile {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.facets.is_empty() {
            return Err(GeometryError::InvalidProfile("no facets".into()));
        }
        let mut area = 0.0;
        for (fi, facet) in self.facets.iter().enumerate() {
            if facet.vertices.len() < 3 {
                return Err(GeometryError::InvalidProfile(format!(
                    "facet {fi} has fewer than 3 vertices"
                )));
            }
            let n = facet.unit_normal();
            if !n.norm().is_finite() {
                return Err(GeometryError::InvalidProfile(format!(
                    "facet {fi} has a degenerate normal"
                )));
            }
            if n.z <= 1e-12 {
                return Err(GeometryError::InvalidProfile(format!(
                    "facet {fi} is vertical or overhanging (not a Lipschitz graph)"
                )));
            }
            // planarity
            let c = facet.centroid();
            for (vi, v) in facet.vertices.iter().enumerate() {
                if (*v - c).dot(n).abs() > 1e-9 * (1.0 + (*v - c).norm()) {
                    return Err(GeometryError::InvalidProfile(format!(
                        "facet {fi} vertex {vi} is off-plane"
                    )));
                }
            }
            area += facet.projected_area();
        }
        if (area - PERIOD * PERIOD).abs() > 1e-8 * PERIOD * PERIOD {
            return Err(GeometryError::InvalidProfile(format!(
                "projected facet area {area} does not tile the period cell {}",
                PERIOD * PERIOD
            )));
        }
        Ok(())
    }

    /// Profile height f(x') with x' wrapped into the period cell.
    pub fn height(&self, x: f64, y: f64) -> f64 {
        let xw = x.rem_euclid(PERIOD);
        let yw = y.rem_euclid(PERIOD);
        for facet in &self.facets {
            if facet.contains_xy(xw, yw, 1e-12) {
                return facet.plane_height(xw, yw);
            }
        }
        // fall back to the facet whose projection is nearest
        let mut best = (f64::MAX, 0);
        for (fi, facet) in self.facets.iter().enumerate() {
            let c = facet.centroid();
            let d = (c.x - xw).hypot(c.y - yw);
            if d < best.0 {
                best = (d, fi);
            }
        }
        self.facets[best.1].plane_height(xw, yw)
    }

    /// Facet index covering the wrapped point x'.
    pub fn facet_at(&self, x: f64, y: f64) -> usize {
        let xw = x.rem_euclid(PERIOD);
        let yw = y.rem_euclid(PERIOD);
        for (fi, facet) in self.facets.iter().enumerate() {
            if facet.contains_xy(xw, yw, 1e-12) {
                return fi;
            }
        }
        0
    }

    pub fn max_height(&self) -> f64 {
        self.facets
            .iter()
            .flat_map(|f| f.vertices.iter().map(|v| v.z))
            .fold(f64::MIN, f64::max)
    }

    pub fn min_height(&self) -> f64 {
        self.facets
            .iter()
            .flat_map(|f| f.vertices.iter().map(|v| v.z))
            .fold(f64::MAX, f64::min)
    }

    /// Flat profile f = 0 with a single facet.
    pub fn flat(alpha0: num_complex::Complex64) -> GratingProfile {
        GratingProfile {
            facets: vec![GratingFacet {
                vertices: vec![
                    Vec3::new(0.0, 0.0, 0.0),
                    Vec3::new(PERIOD, 0.0, 0.0),
                    Vec3::new(PERIOD, PERIOD, 0.0),
                    Vec3::new(0.0, PERIOD, 0.0),
                ],
                impedance: ImpedanceSpec::constant(alpha0),
            }],
        }
    }

    /// Pyramidal cell: square base with the apex lifted at the cell center.
    pub fn pyramid(height: f64, alpha0: num_complex::Complex64) -> GratingProfile {
        let c = PERIOD / 2.0;
        let apex = Vec3::new(c, c, height);
        let b = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(PERIOD, 0.0, 0.0),
            Vec3::new(PERIOD, PERIOD, 0.0),
            Vec3::new(0.0, PERIOD, 0.0),
        ];
        let facets = (0..4)
            .map(|i| GratingFacet {
                vertices: vec![b[i], b[(i + 1) % 4], apex],
                impedance: ImpedanceSpec::constant(alpha0),
            })
            .collect();
        GratingProfile { facets }
    }

    /// Prism profile, constant in y: a slope-1 triangular ridge of base width
    /// `2 w` centered at x = pi on an otherwise flat cell (w < pi).
    pub fn ridge(w: f64, alpha0: num_complex::Complex64) -> GratingProfile {
        assert!(w > 0.0 && w < std::f64::consts::PI);
        let c = std::f64::consts::PI;
        let strip = |x0: f64, z0: f64, x1: f64, z1: f64| GratingFacet {
            vertices: vec![
                Vec3::new(x0, 0.0, z0),
                Vec3::new(x1, 0.0, z1),
                Vec3::new(x1, PERIOD, z1),
                Vec3::new(x0, PERIOD, z0),
            ],
            impedance: ImpedanceSpec::constant(alpha0),
        };
        GratingProfile {
            facets: vec![
                strip(0.0, 0.0, c - w, 0.0),
                strip(c - w, 0.0, c, w),
                strip(c, w, c + w, 0.0),
                strip(c + w, 0.0, PERIOD, 0.0),
            ],
        }
    }
}

/// Corners of a grating profile in one period, with classifications.
#[derive(Debug, Clone)]
pub struct GratingCorners {
    pub edge_corners: Vec<EdgeCorner>,
    pub vertex_corners: Vec<VertexCorner>,
    /// rational degree deg(Lambda_f), or Irrational when no vertex corner
    /// is rational
    pub class: ObstacleClass,
    pub all_vertices_irrational: bool,
}

const MATCH_TOL: f64 = 1e-9;

fn segments_match(a: (Vec3, Vec3), b: (Vec3, Vec3)) -> bool {
    let same = (a.0 - b.0).norm() < MATCH_TOL && (a.1 - b.1).norm() < MATCH_TOL;
    let flipped = (a.0 - b.1).norm() < MATCH_TOL && (a.1 - b.0).norm() < MATCH_TOL;
    same || flipped
}

/// Extracts all edge and vertex corners in one period cell. Boundary edges
/// are matched against the periodic translates of the opposite side and each
/// boundary segment reports its own corner. Coplanar adjacencies are flat and
/// yield no corner.
pub fn grating_corners(g: &GratingProfile) -> Result<GratingCorners, GeometryError> {
    g.validate()?;
    struct FEdge {
        facet: usize,
        seg: (Vec3, Vec3),
    }
    let mut fedges = Vec::new();
    for (fi, facet) in g.facets.iter().enumerate() {
        let n = facet.vertices.len();
        for i in 0..n {
            fedges.push(FEdge {
                facet: fi,
                seg: (facet.vertices[i], facet.vertices[(i + 1) % n]),
            });
        }
    }
    let shifts = [
        Vec3::ZERO,
        Vec3::new(PERIOD, 0.0, 0.0),
        Vec3::new(-PERIOD, 0.0, 0.0),
        Vec3::new(0.0, PERIOD, 0.0),
        Vec3::new(0.0, -PERIOD, 0.0),
    ];
    let mut edge_corners = Vec::new();
    for (i, ei) in fedges.iter().enumerate() {
        let mut partner: Option<(usize, bool)> = None; // (edge index, via shift)
        for (j, ej) in fedges.iter().enumerate() {
            if i == j {
                continue;
            }
            for (si, s) in shifts.iter().enumerate() {
                if segments_match(ei.seg, (ej.seg.0 + *s, ej.seg.1 + *s)) {
                    partner = Some((j, si != 0));
                    break;
                }
            }
            if partner.is_some() {
                break;
            }
        }
        let Some((j, via_shift)) = partner else {
            return Err(GeometryError::InvalidProfile(format!(
                "facet {} has an unmatched edge at ({:?})",
                ei.facet, ei.seg.0
            )));
        };
        // interior pairs once; every boundary segment reports its own corner
        if !via_shift && j < i {
            continue;
        }
        let na = g.facets[ei.facet].unit_normal();
        let nb = g.facets[fedges[j].facet].unit_normal();
        let flat = na.dot(nb) > 1.0 - 1e-12;
        if flat {
            continue;
        }
        let dihedral = dihedral_from_normals(na, nb);
        if dihedral < DEGENERATE_ANGLE_TOL || dihedral > std::f64::consts::PI - DEGENERATE_ANGLE_TOL
        {
            return Err(GeometryError::DegenerateEdge(ei.facet, fedges[j].facet));
        }
        edge_corners.push(EdgeCorner {
            face_a: ei.facet,
            face_b: fedges[j].facet,
            segment: ei.seg,
            dihedral,
            alpha: dihedral / std::f64::consts::PI,
        });
    }
    // vertex corners: positions in the cell where >= 3 facets meet
    let mut positions: Vec<(Vec3, std::collections::BTreeSet<usize>)> = Vec::new();
    for (fi, facet) in g.facets.iter().enumerate() {
        for v in &facet.vertices {
            match positions.iter_mut().find(|(p, _)| (*p - *v).norm() < MATCH_TOL) {
                Some((_, set)) => {
                    set.insert(fi);
                }
                None => {
                    let mut set = std::collections::BTreeSet::new();
                    set.insert(fi);
                    positions.push((*v, set));
                }
            }
        }
    }
    let mut vertex_corners = Vec::new();
    for (pos, facets) in positions {
        if facets.len() < 3 {
            continue;
        }
        let incident: Vec<usize> = edge_corners
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                (e.segment.0 - pos).norm() < MATCH_TOL || (e.segment.1 - pos).norm() < MATCH_TOL
            })
            .map(|(i, _)| i)
            .collect();
        let classification = classify_vertex(&edge_corners, &incident);
        vertex_corners.push(VertexCorner {
            apex: pos,
            edge_corners: incident,
            classification,
        });
    }
    let mut min_degree: Option<u32> = None;
    let mut all_irrational = true;
    for v in &vertex_corners {
        match v.classification {
            VertexClass::Rational { degree } => {
                all_irrational = false;
                min_degree = Some(min_degree.map_or(degree, |d| d.min(degree)));
            }
            VertexClass::Irrational => {}
        }
    }
    let class = match min_degree {
        Some(degree) => ObstacleClass::Rational { degree },
        None => ObstacleClass::Irrational,
    };
    Ok(GratingCorners {
        edge_corners,
        vertex_corners,
        class,
        all_vertices_irrational: all_irrational,
    })
}
