//! Canonical test geometries with outward-oriented faces.

use super::{Face, ImpedanceSpec, Polyhedron, Vec3};
use num_complex::Complex64;

fn faces_from(indices: &[&[usize]], alpha0: Complex64) -> Vec<Face> {
    indices
        .iter()
        .map(|loop_| Face {
            vertex_indices: loop_.to_vec(),
            impedance: ImpedanceSpec::constant(alpha0),
        })
        .collect()
}

/// Axis-aligned unit cube centered at the origin.
pub fn unit_cube(alpha0: Complex64) -> Polyhedron {
    let h = 0.5;
    let vertices = vec![
        Vec3::new(-h, -h, -h),
        Vec3::new(h, -h, -h),
        Vec3::new(h, h, -h),
        Vec3::new(-h, h, -h),
        Vec3::new(-h, -h, h),
        Vec3::new(h, -h, h),
        Vec3::new(h, h, h),
        Vec3::new(-h, h, h),
    ];
    let faces = faces_from(
        &[
            &[0, 3, 2, 1],
            &[4, 5, 6, 7],
            &[0, 1, 5, 4],
            &[2, 3, 7, 6],
            &[0, 4, 7, 3],
            &[1, 2, 6, 5],
        ],
        alpha0,
    );
    Polyhedron { vertices, faces }
}

/// Regular tetrahedron with circumradius 1 centered at the origin.
pub fn regular_tetrahedron(alpha0: Complex64) -> Polyhedron {
    let s = 1.0 / 3.0_f64.sqrt();
    let vertices = vec![
        Vec3::new(s, s, s),
        Vec3::new(s, -s, -s),
        Vec3::new(-s, s, -s),
        Vec3::new(-s, -s, s),
    ];
    let faces = faces_from(&[&[0, 1, 2], &[0, 3, 1], &[0, 2, 3], &[1, 3, 2]], alpha0);
    Polyhedron { vertices, faces }
}

/// Triangular prism whose long apex edge has dihedral `apex_angle`
/// (isoceles cross-section, apex at the origin, extruded along z).
pub fn wedge_prism(apex_angle: f64, alpha0: Complex64) -> Polyhedron {
    let g = 0.5 * apex_angle;
    let l = 1.0;
    let h = 1.0;
    let vertices = vec![
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(l * g.cos(), l * g.sin(), 0.0),
        Vec3::new(l * g.cos(), -l * g.sin(), 0.0),
        Vec3::new(0.0, 0.0, h),
        Vec3::new(l * g.cos(), l * g.sin(), h),
        Vec3::new(l * g.cos(), -l * g.sin(), h),
    ];
    let faces = faces_from(
        &[
            &[0, 1, 2],
            &[5, 4, 3],
            &[1, 0, 3, 4],
            &[2, 1, 4, 5],
            &[0, 2, 5, 3],
        ],
        alpha0,
    );
    Polyhedron { vertices, faces }
}

const ICO_T: f64 = 1.618_033_988_749_894_8; // (1 + sqrt 5) / 2

/// Triangulated sphere: icosahedron subdivided `level` times, vertices
/// projected to the unit sphere.
pub fn icosphere(level: u32, alpha0: Complex64) -> Polyhedron {
    let t = ICO_T;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalized())
    .collect();
    let mut tris: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    use std::collections::HashMap;
    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            let key = if a < b { (a, b) } else { (b, a) };
            *midpoints.entry(key).or_insert_with(|| {
                let m = ((vertices[a] + vertices[b]) * 0.5).normalized();
                vertices.push(m);
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(tris.len() * 4);
        for [a, b, c] in tris {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        tris = next;
    }
    let faces = tris
        .iter()
        .map(|t| Face {
            vertex_indices: t.to_vec(),
            impedance: ImpedanceSpec::constant(alpha0),
        })
        .collect();
    Polyhedron { vertices, faces }
}
