//! Quadrature and sampling utilities: adaptive Simpson refinement,
//! Gauss-Legendre nodes, product grids on the unit sphere and Halton
//! low-discrepancy sequences.

use crate::specfun::legendre_p;

/// Adaptive Simpson integration with absolute tolerance. Returns Err with the
/// achieved error estimate when the recursion depth limit is hit.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> Result<f64, f64> {
    fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
        worst: &mut f64,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        let err = (left + right - whole) / 15.0;
        if err.abs() <= tol || depth == 0 {
            if depth == 0 {
                *worst = worst.max(err.abs());
            }
            return left + right + err;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, worst)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, worst)
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let mut worst = 0.0;
    let val = recurse(f, a, b, fa, fm, fb, whole, tol, max_depth, &mut worst);
    if worst > tol {
        Err(worst)
    } else {
        Ok(val)
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], exact for polynomials of
/// degree <= 2n - 1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess, Newton refinement
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let p = legendre_p(n as u32, x);
            let pm1 = legendre_p(n as u32 - 1, x);
            let dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let pm1 = legendre_p(n as u32 - 1, x);
        let dp = n as f64 * (x * legendre_p(n as u32, x) - pm1) / (x * x - 1.0);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Quadrature grid on the unit sphere: Gauss-Legendre in cos(theta) times a
/// uniform phi grid. `(direction, weight)` pairs; weights sum to 4 pi.
pub fn sphere_grid(order: usize) -> Vec<([f64; 3], f64)> {
    let n_theta = order;
    let n_phi = 2 * order;
    let (nodes, weights) = gauss_legendre(n_theta);
    let mut out = Vec::with_capacity(n_theta * n_phi);
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    for (ct, wt) in nodes.iter().zip(&weights) {
        let st = (1.0 - ct * ct).max(0.0).sqrt();
        for j in 0..n_phi {
            let phi = dphi * j as f64;
            out.push(([st * phi.cos(), st * phi.sin(), *ct], wt * dphi));
        }
    }
    out
}

/// Deterministic Halton sequence point (bases 2, 3, 5 for the first three
/// dimensions), index starting at 0 with an offset to skip the degenerate
/// initial runs.
pub fn halton(index: u64, dim: usize) -> f64 {
    const BASES: [u64; 6] = [2, 3, 5, 7, 11, 13];
    let base = BASES[dim % BASES.len()];
    let mut i = index + 20;
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Halton point in the unit ball of given radius around a center.
pub fn halton_ball(index: u64, center: [f64; 3], radius: f64) -> [f64; 3] {
    // inverse-cdf radial and area-uniform angular mapping
    let u = halton(index, 0);
    let v = halton(index, 1);
    let w = halton(index, 2);
    let r = radius * u.cbrt();
    let ct = 2.0 * v - 1.0;
    let st = (1.0 - ct * ct).max(0.0).sqrt();
    let phi = 2.0 * std::f64::consts::PI * w;
    [
        center[0] + r * st * phi.cos(),
        center[1] + r * st * phi.sin(),
        center[2] + r * ct,
    ]
}
