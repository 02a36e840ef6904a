use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use polyscat::geometry::Vec3;
use polyscat::linalg::tsvd_least_squares;
use polyscat::specfun::{
    legendre_p, spherical_bessel_j, spherical_bessel_j_prime, spherical_hankel1,
    spherical_hankel1_prime,
};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;
const I: Complex64 = Complex64::new(0.0, 1.0);
const NMAX: u32 = 25;

fn kernel(k: f64, x: Vec3, y: Vec3) -> Complex64 {
    let r = (x - y).norm();
    Complex64::from_polar(1.0, k * r) / (FOUR_PI * r)
}

fn kernel_dn(k: f64, x: Vec3, y: Vec3, nu: Vec3) -> Complex64 {
    let dx = x - y;
    let r = dx.norm();
    let phi = Complex64::from_polar(1.0, k * r) / (FOUR_PI * r);
    let factor = (I * k - Complex64::new(1.0 / r, 0.0)) * phi / r;
    nu.dot(dx) * factor
}

fn cube_points(n: usize, scale: f64) -> Vec<(Vec3, Vec3)> {
    let mut out = Vec::new();
    for fi in 0..6 {
        let (axis, sign) = (fi / 2, if fi % 2 == 0 { 1.0 } else { -1.0 });
        for i in 0..n {
            for j in 0..n {
                let u = ((i as f64 + 0.5) / n as f64 - 0.5) * scale;
                let v = ((j as f64 + 0.5) / n as f64 - 0.5) * scale;
                let w = 0.5 * scale * sign;
                let (x, nu) = match axis {
                    0 => (Vec3::new(w, u, v), Vec3::new(sign, 0.0, 0.0)),
                    1 => (Vec3::new(u, w, v), Vec3::new(0.0, sign, 0.0)),
                    _ => (Vec3::new(u, v, w), Vec3::new(0.0, 0.0, sign)),
                };
                out.push((x, nu));
            }
        }
    }
    out
}

fn fib_sphere(n: usize, r: f64) -> Vec<Vec3> {
    let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let phi = 2.0 * std::f64::consts::PI * (i as f64 / golden).fract();
            Vec3::new(r * rho * phi.cos(), r * rho * phi.sin(), r * z)
        })
        .collect()
}

fn mie_coeff(n: u32, k: f64, eta: Complex64) -> Complex64 {
    let jn = spherical_bessel_j(n, k);
    let jp = spherical_bessel_j_prime(n, k);
    let hn = spherical_hankel1(n, k);
    let hp = spherical_hankel1_prime(n, k);
    -(k * jp + eta * jn) / (k * hp + eta * hn)
}

// scattered field and radial derivative of the Mie series at radius r, angle theta
fn mie_scattered(k: f64, eta: Complex64, r: f64, cos_theta: f64) -> (Complex64, Complex64) {
    let mut u = Complex64::new(0.0, 0.0);
    let mut ur = Complex64::new(0.0, 0.0);
    for n in 0..=NMAX {
        let c = mie_coeff(n, k, eta);
        let amp = I.powu(n) * (2.0 * n as f64 + 1.0) * legendre_p(n, cos_theta);
        u += amp * c * spherical_hankel1(n, k * r);
        ur += amp * c * k * spherical_hankel1_prime(n, k * r);
    }
    (u, ur)
}

fn main() {
    let k = 1.0;
    let eta = Complex64::new(1.0, 0.0);
    let d = Vec3::new(0.0, 0.0, 1.0);

    // 1) sanity: the series satisfies the impedance BC on r=1
    let mut worst = 0.0_f64;
    for ct in [-0.9, -0.4, 0.0, 0.3, 0.8] {
        let (us, usr) = mie_scattered(k, eta, 1.0, ct);
        let ui = Complex64::from_polar(1.0, k * ct);
        let uir = I * k * ct * ui;
        let bc = (usr + uir) + eta * (us + ui);
        worst = worst.max(bc.norm());
    }
    println!("series BC residual on sphere: {worst:.3e}");

    // 2) MFS on the exact sphere: impedance rows, plane-wave data
    let nodes = fib_sphere(600, 1.0);
    let sources = fib_sphere(150, 0.5);
    let a = DMatrix::from_fn(nodes.len(), sources.len(), |r, c| {
        let x = nodes[r];
        let nu = x.normalized();
        kernel_dn(k, x, sources[c], nu) + eta * kernel(k, x, sources[c])
    });
    let b = DVector::from_fn(nodes.len(), |r, _| {
        let x = nodes[r];
        let nu = x.normalized();
        let u = Complex64::from_polar(1.0, k * d.dot(x));
        -(I * k * nu.dot(d) * u + eta * u)
    });
    let sol = tsvd_least_squares(a.clone(), &b, 1e-12);
    let resid = (&a * &sol.weights - &b).norm() / b.norm();
    println!("sphere MFS impedance: train {resid:.3e} cond {:.3e} rank {}", sol.condition(), sol.rank);

    // 3) compare the MFS solution to the exact scattered field off the boundary
    let mut worst_field = 0.0_f64;
    for ct in [-0.7_f64, 0.0, 0.6] {
        let r = 1.5;
        let x = Vec3::new((1.0 - ct * ct).sqrt() * r, 0.0, ct * r);
        let mut u_mfs = Complex64::new(0.0, 0.0);
        for (y, w) in sources.iter().zip(sol.weights.iter()) {
            u_mfs += w * kernel(k, x, *y);
        }
        let (u_exact, _) = mie_scattered(k, eta, r, ct);
        worst_field = worst_field.max((u_mfs - u_exact).norm() / u_exact.norm());
    }
    println!("scattered-field rel error at r=1.5: {worst_field:.3e}");

    // 4b) cube impedance fit: misfit profile from face center toward an edge
    {
        let nodes = cube_points(16, 1.0);
        let sources: Vec<Vec3> = cube_points(8, 0.7).into_iter().map(|(x, _)| x).collect();
        let a = DMatrix::from_fn(nodes.len(), sources.len(), |r, c| {
            let (x, nu) = nodes[r];
            kernel_dn(k, x, sources[c], nu) + eta * kernel(k, x, sources[c])
        });
        let b = DVector::from_fn(nodes.len(), |r, _| {
            let (x, nu) = nodes[r];
            let u = Complex64::from_polar(1.0, k * d.dot(x));
            -(I * k * nu.dot(d) * u + eta * u)
        });
        let sc = tsvd_least_squares(a.clone(), &b, 1e-12);
        println!("cube train {:.3e}", (&a * &sc.weights - &b).norm() / b.norm());
        let nu = Vec3::new(0.0, 0.0, 1.0);
        for t in [0.0, 0.1, 0.2, 0.3, 0.4, 0.45, 0.49] {
            let x = Vec3::new(t, 0.0, 0.5);
            let u = Complex64::from_polar(1.0, k * d.dot(x));
            let rhs = -(I * k * nu.dot(d) * u + eta * u);
            let mut lhs = Complex64::new(0.0, 0.0);
            for (y, w) in sources.iter().zip(sc.weights.iter()) {
                lhs += w * (kernel_dn(k, x, *y, nu) + eta * kernel(k, x, *y));
            }
            println!("  top face x={t:.2}: |misfit| {:.3e} (|rhs| {:.3e})", (lhs - rhs).norm(), rhs.norm());
        }
    }

    // 4) can the basis fit the exact scattered Dirichlet trace on the sphere?
    let ad = DMatrix::from_fn(nodes.len(), sources.len(), |r, c| kernel(k, nodes[r], sources[c]));
    let bd = DVector::from_fn(nodes.len(), |r, _| {
        let x = nodes[r];
        mie_scattered(k, eta, 1.0, x.z).0
    });
    let sd = tsvd_least_squares(ad.clone(), &bd, 1e-12);
    println!("fit exact scattered trace: train {:.3e}", (&ad * &sd.weights - &bd).norm() / bd.norm());
}
