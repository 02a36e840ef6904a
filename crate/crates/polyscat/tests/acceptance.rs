//! Acceptance suite: one test per release criterion, each printing a single
//! PASS/FAIL line (run with `cargo test --test acceptance -- --nocapture` to
//! see them). Tolerances are pinned here and must not be loosened without a
//! corresponding note in the project ledger.

use num_complex::Complex64;
use polyscat::eigencorner::*;
use polyscat::geometry::{shapes, GratingProfile, Polyhedron, Vec3};
use polyscat::grating::*;
use polyscat::obstacle::*;
use polyscat::specfun::*;
use polyscat::uniqueness::*;
use std::f64::consts::PI;
use std::time::Instant;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn report(criterion: u32, name: &str, ok: bool, detail: &str, t0: Instant, budget_s: u64) {
    let elapsed = t0.elapsed();
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!(
        "[ACCEPTANCE] criterion {criterion} ({name}): {verdict} — {detail} [{elapsed:.1?}]"
    );
    assert!(ok, "criterion {criterion} ({name}) failed: {detail}");
    assert!(
        elapsed.as_secs() < budget_s,
        "criterion {criterion} exceeded its {budget_s}s budget: {elapsed:?}"
    );
}

/// The obstacle-solver configuration used for the sphere-oracle criterion:
/// a level-4 icosahedral sphere rescaled to unit area-weighted mean radius,
/// solved with a decimated deep source layer.
fn oracle_sphere() -> Polyhedron {
    let raw = shapes::icosphere(4, Complex64::new(1.0, 0.0));
    let mut num = 0.0;
    let mut area = 0.0;
    for f in 0..raw.faces.len() {
        let a = 0.5 * raw.face_normal(f).norm();
        num += a * raw.face_centroid(f).norm();
        area += a;
    }
    raw.scaled(area / num)
}

fn oracle_sphere_params() -> SolveParams {
    SolveParams {
        density: 1,
        source_density: 1,
        source_offset: 0.5,
        max_sources: 250,
        grading_levels: 2,
        // edge layers floor the pointwise residual near 4e-2 on faceted
        // geometry; the radiated quantities below are what the criterion pins
        max_residual: 0.5,
        ..SolveParams::default()
    }
}

#[test]
fn criterion_1_special_functions() {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    // spherical Bessel recursion: j_n(x)/x = (j_{n-1} + j_{n+1})/(2n+1)
    for n in 1..=30u32 {
        for i in 1..=60 {
            let x = 0.33 * i as f64;
            let lhs = spherical_bessel_j(n, x) / x;
            let rhs =
                (spherical_bessel_j(n - 1, x) + spherical_bessel_j(n + 1, x)) / (2 * n + 1) as f64;
            let scale = lhs.abs().max(rhs.abs()).max(1e-30);
            worst = worst.max((lhs - rhs).abs() / scale.max(1.0));
        }
    }
    // theta derivative: dP_n^m/dtheta = ((n+m)(n-m+1) P_n^{m-1} - P_n^{m+1})/2
    for n in 1..=30u32 {
        for m in 1..=n {
            for i in 1..20 {
                let theta = PI * i as f64 / 20.0;
                let x = theta.cos();
                let lhs = legendre_theta_derivative(n, m, theta).unwrap();
                let lower = assoc_legendre(n, m as i32 - 1, x).unwrap();
                let upper = if m + 1 <= n {
                    assoc_legendre(n, m as i32 + 1, x).unwrap()
                } else {
                    0.0
                };
                let rhs = 0.5 * (((n + m) * (n - m + 1)) as f64 * lower - upper);
                let scale = lhs.abs().max(rhs.abs()).max(1.0);
                worst = worst.max((lhs - rhs).abs() / scale);
            }
        }
    }
    // both index variants of P_n^m / sin(theta) agree
    for n in 1..=30u32 {
        for m in 1..=n {
            for i in 1..20 {
                let theta = 0.05 + (PI - 0.1) * i as f64 / 20.0;
                let a = legendre_over_sin_lower(n, m, theta).unwrap();
                let b = legendre_over_sin_upper(n, m, theta).unwrap();
                let direct = assoc_legendre(n, m as i32, theta.cos()).unwrap() / theta.sin();
                let scale = a.abs().max(b.abs()).max(1.0);
                worst = worst.max((a - b).abs() / scale);
                worst = worst.max((a - direct).abs() / scale);
            }
        }
    }
    let recursions_ok = worst < 1e-10;
    // orthogonality: int P_n^m P_n^l / sin = delta_{ml} (n+m)!/(m (n-m)!)
    let mut worst_orth: f64 = 0.0;
    for n in 1..=8u32 {
        for m in 1..=n {
            for l in 1..=n {
                let val = legendre_orthogonality_integral(n, m, l).unwrap();
                let expect = if l == m {
                    factorial(n + m) / (m as f64 * factorial(n - m))
                } else {
                    0.0
                };
                let scale = factorial(n + m) / (m as f64 * factorial(n - m));
                worst_orth = worst_orth.max((val - expect).abs() / scale);
            }
        }
    }
    let ok = recursions_ok && worst_orth < 1e-8;
    report(
        1,
        "special functions",
        ok,
        &format!("recursion defect {worst:.2e} (tol 1e-10), orthogonality defect {worst_orth:.2e} (tol 1e-8)"),
        t0,
        30,
    );
}

#[test]
fn criterion_2_determinant_closed_forms() {
    use polyscat::linalg;
    use rand::{Rng, SeedableRng};
    let t0 = Instant::now();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut draws = 0;
    while draws < 200 {
        let c = CornerData::new(
            rng.gen_range(0.05..PI - 0.05),
            Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
            Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
            rng.gen_range(0.1..10.0),
        );
        if c.eta1.norm() < 0.1 || c.eta2.norm() < 0.1 {
            continue;
        }
        draws += 1;
        let d = linalg::determinant(&base_system(&c).matrix());
        let e = I * (c.lambda / 18.0)
            * c.phi0.sin()
            * (c.eta1 * (2.0 * c.phi0.cos()) + c.eta2 * ((2.0 * c.phi0).cos() + 1.0));
        worst = worst.max((d - e).norm() / e.norm().max(1e-6));
        // order-N block determinant for a random N in 2..=12
        let n: u32 = rng.gen_range(2..=12);
        let sys = order_system(&c, n);
        let mut rows = sys.find_rows(RowKind::EdgeLine);
        rows.extend(sys.find_rows(RowKind::Last));
        let m = sys.submatrix(&rows, &[(n, 1), (n, -1), (n - 1, 0)]);
        let d = linalg::determinant(&m);
        let nf = n as f64;
        let ratio = (ln_factorial(n - 1) - ln_factorial(n + 1)).exp();
        let e = -2.0
            * I
            * c.phi0.sin()
            * (2.0 * nf - 1.0).sqrt()
            * (c.lambda / (2.0 * nf + 1.0))
            * (nf * nf / 4.0)
            * (nf + 1.0)
            * (nf + 1.0)
            * ratio
            * impedance_condition(&c);
        worst = worst.max((d - e).norm() / e.norm().max(1e-6));
    }
    report(
        2,
        "determinant closed forms",
        worst < 1e-8,
        &format!("worst relative defect {worst:.2e} over 200 draws (tol 1e-8)"),
        t0,
        10,
    );
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[test]
fn criterion_3_rational_blocking_law() {
    let t0 = Instant::now();
    let eta1 = Complex64::new(1.0, 0.0);
    let eta2 = Complex64::new(2.0, 1.0);
    let mut failures = Vec::new();
    let mut cases = 0;
    for p in 2..=12u32 {
        for q in 1..p {
            if gcd(q, p) != 1 {
                continue;
            }
            cases += 1;
            let r = certify_vanishing_rational(q, p, eta1, eta2, 1.0, 14);
            match r.blocking {
                Some(b) if b.reason == BlockReason::AngleResonance(p) => {}
                other => failures.push(format!("alpha {q}/{p}: {other:?}")),
            }
        }
    }
    report(
        3,
        "rational blocking law",
        failures.is_empty(),
        &format!("{cases} lowest-term ratios, {} failures {:?}", failures.len(), failures),
        t0,
        10,
    );
}

#[test]
fn criterion_4_vanishing_order_estimator() {
    let t0 = Instant::now();
    let rho = [0.5, 0.35, 0.25, 0.18, 0.12];
    let mut worst: f64 = 0.0;
    for n in 0..=4u32 {
        for m in [0i32, n as i32] {
            let sampler = move |x: [f64; 3]| {
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt().max(1e-300);
                let theta = (x[2] / r).clamp(-1.0, 1.0).acos();
                let phi = x[1].atan2(x[0]);
                4.0 * PI
                    * I.powu(n)
                    * spherical_bessel_j(n, r)
                    * spherical_harmonic(n, m, theta, phi).unwrap()
            };
            let est = estimate_vanishing_order(sampler, [0.0; 3], |_| true, &rho, 40_000);
            worst = worst.max((est.order_real - n as f64).abs());
        }
    }
    report(
        4,
        "vanishing-order estimator",
        worst < 0.15,
        &format!("worst deviation from integer order {worst:.3} (tol 0.15)"),
        t0,
        120,
    );
}

#[test]
fn criterion_5_obstacle_solver_oracle() {
    let t0 = Instant::now();
    let sphere = oracle_sphere();
    let eta = Complex64::new(1.0, 0.0);
    let inc = IncidentWave::new(1.0, Vec3::new(0.0, 0.0, 1.0));
    let sol = solve_scattering(&sphere, inc, &oracle_sphere_params()).unwrap();
    let ff = far_field(&sol, 10);
    let mut num = 0.0;
    let mut den = 0.0;
    for ((dir, w), v) in ff.directions.iter().zip(&ff.values) {
        let oracle =
            impedance_sphere_far_field(1.0, 1.0, eta, inc.d, Vec3::new(dir[0], dir[1], dir[2]));
        num += w * (v - oracle).norm_sqr();
        den += w * oracle.norm_sqr();
    }
    let oracle_err = (num / den).sqrt();
    let optical = optical_theorem_residual(&sol, &ff);
    let ok = oracle_err < 2e-3 && optical < 1e-3;
    report(
        5,
        "obstacle solver oracle",
        ok,
        &format!("series error {oracle_err:.3e} (tol 2e-3), optical residual {optical:.3e} (tol 1e-3)"),
        t0,
        300,
    );
}

#[test]
fn criterion_6_grating_solver_oracle() {
    let t0 = Instant::now();
    // k = 1.3 keeps clear of Wood anomalies at period 2 pi (1.69 is not a
    // sum of two integer squares)
    let k = 1.3;
    let eta = Complex64::new(1.0, 0.5);
    let flat = GratingProfile::flat(eta);
    let sol = solve_grating(&flat, k, 0.0, 0.0, &GratingParams::default()).unwrap();
    let r_expected = flat_reflection(k, eta);
    let spec = sol.spectrum();
    let r_err = (spec.coefficient([0, 0]) - r_expected).norm();
    let leak = spec
        .coefficients
        .iter()
        .filter(|(n, _)| **n != [0, 0])
        .map(|(_, u)| u.norm())
        .fold(0.0_f64, f64::max);
    // height independence of the expanded coefficients
    let mut height_dev: f64 = 0.0;
    for b in [1.0, 2.0] {
        let ex = rayleigh_expand(
            |x| sol.total_field(x),
            |x| sol.incident_field(x),
            sol.k,
            &sol.alpha,
            b,
            2,
        );
        height_dev = height_dev.max((ex.coefficient([0, 0]) - spec.coefficient([0, 0])).norm());
    }
    let qp = quasiperiodicity_residual(&sol);
    let ok = r_err < 1e-6 && leak < 1e-8 && height_dev < 1e-6 && qp < 1e-8;
    report(
        6,
        "grating solver oracle",
        ok,
        &format!(
            "R error {r_err:.2e} (tol 1e-6), mode leak {leak:.2e} (tol 1e-8), height dependence {height_dev:.2e} (tol 1e-6), quasi-periodicity {qp:.2e} (tol 1e-8)"
        ),
        t0,
        120,
    );
}

#[test]
fn criterion_7_uniqueness_gaps() {
    let t0 = Instant::now();
    let eta = Complex64::new(1.0, 0.0);
    // irrational-dihedral prisms: identical pair is a self-gap control,
    // a 1.3x scaling must be distinguished
    let prism = shapes::wedge_prism(PI / 2.0_f64.sqrt(), eta);
    let inc = IncidentWave::new(1.0, Vec3::new(0.0, 0.0, 1.0));
    let params = SolveParams {
        density: 2,
        source_density: 1,
        max_residual: 0.5,
        ..SolveParams::default()
    };
    let self_gap = obstacle_gap(&prism, &prism, inc, 6, &params).unwrap();
    let self_ok = self_gap.gap <= 2.0 * self_gap.residuals[0];
    let scaled = obstacle_gap(&prism, &prism.scaled(1.3), inc, 6, &params).unwrap();
    let scaled_ok = scaled.verdict == Verdict::Distinguished;
    // gratings: flat vs pyramidal
    let k = 1.2;
    let gp = GratingParams { max_residual: 0.05, ..GratingParams::default() };
    let flat = GratingProfile::flat(eta);
    let pyramid = GratingProfile::pyramid(1.0, eta);
    let gap_g = grating_gap(&flat, &pyramid, k, 0.0, 0.0, 1.5, &gp).unwrap();
    let grating_ok = gap_g.verdict == Verdict::Distinguished;
    let ok = self_ok && scaled_ok && grating_ok;
    report(
        7,
        "uniqueness gaps",
        ok,
        &format!(
            "self-gap {:.2e} vs residual {:.2e}; scaled-prism gap {:.2e} vs baseline {:.2e}; grating gap {:.2e} vs baseline {:.2e}",
            self_gap.gap,
            self_gap.residuals[0],
            scaled.gap,
            scaled.baseline,
            gap_g.gap,
            gap_g.baseline
        ),
        t0,
        600,
    );
}

#[test]
fn criterion_8_impedance_recovery() {
    let t0 = Instant::now();
    // closed loop on the oracle sphere for three impedances
    let mut worst: f64 = 0.0;
    for eta in [
        Complex64::new(1.0, 0.0),
        Complex64::new(2.0, 1.0),
        Complex64::new(0.5, -0.5),
    ] {
        let mut sphere = oracle_sphere();
        for f in &mut sphere.faces {
            f.impedance.alpha0 = eta;
        }
        let inc = IncidentWave::new(1.0, Vec3::new(0.0, 0.0, 1.0));
        let sol = solve_scattering(&sphere, inc, &oracle_sphere_params()).unwrap();
        let est = recover_impedance(&sol, 7).unwrap();
        worst = worst.max((est.eta_hat - eta).norm() / eta.norm());
    }
    // flat-grating gap against the reflection-coefficient prediction
    let k = 1.3;
    let b = 1.5;
    let (e1, e2) = (Complex64::new(1.0, 0.0), Complex64::new(2.0, 1.0));
    let gap = grating_gap(
        &GratingProfile::flat(e1),
        &GratingProfile::flat(e2),
        k,
        0.0,
        0.0,
        b,
        &GratingParams::default(),
    )
    .unwrap();
    let (r1, r2) = (flat_reflection(k, e1), flat_reflection(k, e2));
    let kb = Complex64::new(0.0, k * b);
    let predicted = (r1 - r2).norm() / ((-kb).exp() + r1 * kb.exp()).norm();
    let gap_err = (gap.gap - predicted).abs();
    let ok = worst < 5e-3 && gap_err < 1e-3;
    report(
        8,
        "impedance recovery",
        ok,
        &format!("worst closed-loop error {worst:.2e} (tol 5e-3), grating-gap prediction error {gap_err:.2e} (tol 1e-3)"),
        t0,
        300,
    );
}

#[test]
fn criterion_9_hypothesis_audit() {
    let t0 = Instant::now();
    let eta = Complex64::new(1.0, 0.0);
    let cube = shapes::unit_cube(eta).scaled(0.1);
    let inc = IncidentWave::new(1.0, Vec3::new(0.0, 0.0, 1.0));
    let params = SolveParams {
        density: 2,
        source_density: 1,
        max_residual: 0.5,
        ..SolveParams::default()
    };
    let sol = solve_scattering(&cube, inc, &params).unwrap();
    let audit = hypothesis_audit(&cube, &sol).unwrap();
    // the cube is rational of degree 2: the degree-> 3 hypothesis must fail
    let degree_fails = audit
        .checks
        .iter()
        .any(|c| c.status == HypothesisStatus::Fail && c.detail.contains("degree"));
    let rational = audit.rational_class.contains("Rational");
    // every vertex estimate converged and is far from zero (small obstacle:
    // L(grad u) is close to the incident gradient, magnitude k)
    let l_ok = !audit.l_estimates.is_empty()
        && audit
            .l_estimates
            .iter()
            .all(|l| l.converged && l.magnitude > 1e-3 * sol.inc.k);
    let ok = degree_fails && rational && l_ok;
    report(
        9,
        "hypothesis audit",
        ok,
        &format!(
            "class {:?}, degree check fails as required: {degree_fails}, {} vertex L estimates all converged and nonzero: {l_ok}",
            audit.rational_class,
            audit.l_estimates.len()
        ),
        t0,
        300,
    );
}
