use num_complex::Complex64;
use polyscat::geometry::{shapes, Vec3};
use polyscat::obstacle::*;

fn main() {
    let eta = Complex64::new(1.0, 0.0);
    let cube = shapes::unit_cube(eta);
    for (d, sd, off) in [(8usize, 5usize, 0.3f64), (10, 5, 0.3), (8, 5, 0.5), (12, 6, 0.3)] {
        let params = SolveParams {
            density: d,
            source_density: sd,
            source_offset: off,
            max_residual: 1e9,
            ..SolveParams::default()
        };
        let da = Vec3::new(0.0, 0.0, 1.0);
        let db = Vec3::new(1.0, 0.0, 0.0);
        let t0 = std::time::Instant::now();
        let sa = solve_scattering(&cube, IncidentWave::new(1.0, da), &params).unwrap();
        let sb = solve_scattering(&cube, IncidentWave::new(1.0, db), &params).unwrap();
        // reciprocity: u_inf(-d_b; d_a) == u_inf(-d_a; d_b)
        let fa = far_field_at(&sa, db * -1.0);
        let fb = far_field_at(&sb, da * -1.0);
        let scale = fa.norm().max(fb.norm());
        // mirror symmetry of the cube: pattern of d_a solve is symmetric in x -> -x
        let p1 = far_field_at(&sa, Vec3::new(0.6, 0.0, 0.8));
        let p2 = far_field_at(&sa, Vec3::new(-0.6, 0.0, 0.8));
        println!(
            "d{d} sd{sd} off{off}: resid {:.3e} recip {:.3e} mirror {:.3e} ({:.1?})",
            sa.residual,
            (fa - fb).norm() / scale,
            (p1 - p2).norm() / p1.norm(),
            t0.elapsed()
        );
        let fwd = far_field_at(&sa, Vec3::new(0.0, 0.0, 1.0));
        let back = far_field_at(&sa, Vec3::new(0.0, 0.0, -1.0));
        println!("  u_inf(z) {fwd:.6} u_inf(-z) {back:.6} u_inf(0.6,0,0.8) {p1:.6}");
    }
}
