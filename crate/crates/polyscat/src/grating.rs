//! Quasi-periodic plane-wave scattering by a bi-periodic impedance grating.
//!
//! The incident wave d = (sin phi cos theta, sin phi sin theta, -cos phi)
//! hits the 2 pi-periodic profile from above; the scattered field is
//! alpha-quasiperiodic with alpha = k sin phi (cos theta, sin theta) and has
//! the Rayleigh expansion u^s = sum_n u_n e^{i alpha_n . x' + i beta_n x3}
//! with alpha_n = n + alpha and beta_n^2 = k^2 - |alpha_n|^2, Im beta_n >= 0.
//!
//! The solver represents u^s directly in the outgoing Rayleigh basis above
//! the grooves and collocates the impedance condition on the profile facets
//! with edge grading; a truncated phased lattice sum of free-space kernels is
//! kept as a slowly-convergent cross-check of quasi-periodization.

use crate::geometry::{GratingProfile, Vec3, PERIOD};
use crate::linalg::tsvd_least_squares;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::collections::BTreeMap;
use thiserror::Error;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error)]
pub enum GratingError {
    #[error("boundary-condition residual {residual:.3e} exceeds {limit:.3e}")]
    NotConverged { residual: f64, limit: f64 },
    #[error("incidence angle phi must lie in (-pi/2, pi/2), got {0}")]
    BadIncidence(f64),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// Quasimomentum alpha = k sin(phi) (cos theta, sin theta).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiMomentum {
    pub alpha: [f64; 2],
}

impl QuasiMomentum {
    pub fn from_incidence(k: f64, theta: f64, phi: f64) -> Self {
        QuasiMomentum {
            alpha: [
                k * phi.sin() * theta.cos(),
                k * phi.sin() * theta.sin(),
            ],
        }
    }

    /// alpha_n = n + alpha for a lattice index n.
    pub fn alpha_n(&self, n: [i64; 2]) -> [f64; 2] {
        [self.alpha[0] + n[0] as f64, self.alpha[1] + n[1] as f64]
    }
}

/// beta_n with the branch Im beta_n >= 0.
pub fn beta_n(k: f64, alpha: &QuasiMomentum, n: [i64; 2]) -> Complex64 {
    let a = alpha.alpha_n(n);
    Complex64::new(k * k - a[0] * a[0] - a[1] * a[1], 0.0).sqrt()
}

/// Propagating and Wood-anomalous lattice modes with |n|_inf <= M.
#[derive(Debug, Clone)]
pub struct ModeSet {
    pub propagating: Vec<[i64; 2]>,
    /// modes with |beta_n| < 1e-8 k, grazing to numerical precision
    pub wood: Vec<[i64; 2]>,
}

pub fn propagating_modes(k: f64, alpha: &QuasiMomentum, m: i64) -> ModeSet {
    let mut propagating = Vec::new();
    let mut wood = Vec::new();
    for n1 in -m..=m {
        for n2 in -m..=m {
            let n = [n1, n2];
            let b = beta_n(k, alpha, n);
            if b.norm() < 1e-8 * k {
                wood.push(n);
            } else if b.im == 0.0 {
                propagating.push(n);
            }
        }
    }
    ModeSet { propagating, wood }
}

/// One retained Rayleigh mode of the scattered-field representation.
#[derive(Debug, Clone, Copy)]
struct Mode {
    n: [i64; 2],
    alpha_n: [f64; 2],
    beta: Complex64,
}

/// Solved quasi-periodic field. The scattered part is
/// u^s(x) = sum c_n e^{i alpha_n . x' + i beta_n (x3 - z_ref)}.
#[derive(Debug, Clone)]
pub struct GratingSolution {
    pub profile: GratingProfile,
    pub k: f64,
    /// possibly Wood-perturbed; the requested wavenumber if no perturbation
    pub requested_k: f64,
    pub alpha: QuasiMomentum,
    pub d: Vec3,
    modes: Vec<Mode>,
    coefficients: Vec<Complex64>,
    z_ref: f64,
    pub residual: f64,
    pub condition: f64,
    /// set when the requested k sat on a Wood anomaly and was perturbed
    pub wood_perturbed: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct GratingParams {
    /// Rayleigh orders per axis; None picks ceil(2k) + 4
    pub truncation: Option<i64>,
    /// base collocation density per facet
    pub density: usize,
    pub grading_levels: u32,
    pub grading_ratio: f64,
    pub svd_cutoff: f64,
    pub max_residual: f64,
}

impl Default for GratingParams {
    fn default() -> Self {
        GratingParams {
            truncation: None,
            density: 8,
            grading_levels: 3,
            grading_ratio: 0.15,
            svd_cutoff: 1e-12,
            max_residual: 1e-3,
        }
    }
}

struct Node {
    x: Vec3,
    normal: Vec3,
    eta: Complex64,
    /// boundary-area share, so the least squares is an L2(profile) fit
    weight: f64,
}

fn facet_nodes(
    g: &GratingProfile,
    facet: usize,
    density: usize,
    ratio: f64,
    levels: u32,
    shift: f64,
) -> Vec<Node> {
    let f = &g.facets[facet];
    let normal = f.unit_normal();
    let eta = f.impedance.alpha0;
    let c = f.centroid();
    let m = density.max(1);
    let mut out = Vec::new();
    for e in 0..f.vertices.len() {
        let a = f.vertices[e];
        let b = f.vertices[(e + 1) % f.vertices.len()];
        // interior fan fill; each node carries an equal share of its fan
        // triangle's area
        let tri_area = 0.5 * (a - c).cross(b - c).norm();
        let w_int = tri_area / ((m * (m + 1)) / 2) as f64;
        for i in 0..m {
            for j in 0..(m - i) {
                let u = (i as f64 + 0.5 + shift) / (m as f64 + 1.0);
                let v = (j as f64 + 0.5 + shift) / (m as f64 + 1.0);
                out.push(Node { x: c + (a - c) * u + (b - c) * v, normal, eta, weight: w_int });
            }
        }
        // graded rows toward the facet edge; each row represents the strip
        // bounded by midpoints toward its neighbors
        let edge = b - a;
        let inward = normal.cross(edge).normalized();
        let inward = if inward.dot(c - a) >= 0.0 { inward } else { inward * -1.0 };
        let h = edge.norm() / m as f64;
        let dists: Vec<f64> = (1..=levels).map(|l| h * ratio.powi(l as i32)).collect();
        for (l, &dist) in dists.iter().enumerate() {
            let upper = if l == 0 { 0.5 * (h + dist) } else { 0.5 * (dists[l - 1] + dist) };
            let lower = if l + 1 == dists.len() { 0.0 } else { 0.5 * (dist + dists[l + 1]) };
            let w = (upper - lower) * edge.norm() / m as f64;
            for i in 0..m {
                let t = (i as f64 + 0.5 + shift) / m as f64;
                out.push(Node {
                    x: a + edge * t.clamp(0.0, 1.0) + inward * dist,
                    normal,
                    eta,
                    weight: w,
                });
            }
        }
    }
    out
}

fn mode_list(k: f64, alpha: &QuasiMomentum, m: i64) -> Vec<Mode> {
    let mut modes = Vec::new();
    for n1 in -m..=m {
        for n2 in -m..=m {
            let n = [n1, n2];
            modes.push(Mode { n, alpha_n: alpha.alpha_n(n), beta: beta_n(k, alpha, n) });
        }
    }
    modes
}

fn mode_value(mode: &Mode, x: Vec3, z_ref: f64) -> Complex64 {
    (I * (mode.alpha_n[0] * x.x + mode.alpha_n[1] * x.y)
        + I * mode.beta * (x.z - z_ref))
        .exp()
}

fn mode_gradient(mode: &Mode, x: Vec3, z_ref: f64) -> [Complex64; 3] {
    let v = mode_value(mode, x, z_ref);
    [
        I * mode.alpha_n[0] * v,
        I * mode.alpha_n[1] * v,
        I * mode.beta * v,
    ]
}

/// Solves the quasi-periodic impedance problem for incidence (theta, phi)
/// from the top. A wavenumber sitting on a Wood anomaly (some |beta_n| <
/// 1e-6 k) is perturbed by 1e-5 relative and flagged in the solution.
pub fn solve_grating(
    profile: &GratingProfile,
    k: f64,
    theta: f64,
    phi: f64,
    params: &GratingParams,
) -> Result<GratingSolution, GratingError> {
    if !(phi > -std::f64::consts::FRAC_PI_2 && phi < std::f64::consts::FRAC_PI_2) {
        return Err(GratingError::BadIncidence(phi));
    }
    profile.validate()?;
    let requested_k = k;
    let m = params.truncation.unwrap_or((2.0 * k).ceil() as i64 + 4);
    let mut k = k;
    let mut alpha = QuasiMomentum::from_incidence(k, theta, phi);
    let mut wood_perturbed = false;
    let near_wood = |k: f64, alpha: &QuasiMomentum| {
        mode_list(k, alpha, m)
            .iter()
            .any(|mo| mo.beta.norm() < 1e-6 * k)
    };
    if near_wood(k, &alpha) {
        k *= 1.0 + 1e-5;
        alpha = QuasiMomentum::from_incidence(k, theta, phi);
        wood_perturbed = true;
    }
    let d = Vec3::new(
        phi.sin() * theta.cos(),
        phi.sin() * theta.sin(),
        -phi.cos(),
    );
    let modes = mode_list(k, &alpha, m);
    let z_ref = profile.max_height();
    // the highest retained mode oscillates m times per period; keep at least
    // two collocation nodes per oscillation so the system stays oversampled
    let density = params.density.max(2 * (2 * m as usize + 1));
    let mut nodes = Vec::new();
    for f in 0..profile.facets.len() {
        nodes.extend(facet_nodes(
            profile,
            f,
            density,
            params.grading_ratio,
            params.grading_levels,
            0.0,
        ));
    }
    let bc_row = |node: &Node, mo: &Mode| -> Complex64 {
        let g = mode_gradient(mo, node.x, z_ref);
        node.normal.x * g[0] + node.normal.y * g[1] + node.normal.z * g[2]
            + node.eta * mode_value(mo, node.x, z_ref)
    };
    let incident = |x: Vec3| Complex64::from_polar(1.0, k * d.dot(x));
    let bc_rhs = |node: &Node| -> Complex64 {
        let u = incident(node.x);
        -(I * k * node.normal.dot(d) * u + node.eta * u)
    };
    let a = DMatrix::from_fn(nodes.len(), modes.len(), |i, j| {
        nodes[i].weight.sqrt() * bc_row(&nodes[i], &modes[j])
    });
    let b = DVector::from_fn(nodes.len(), |i, _| nodes[i].weight.sqrt() * bc_rhs(&nodes[i]));
    let sol = tsvd_least_squares(a, &b, params.svd_cutoff);

    // held-out check nodes
    let mut check = Vec::new();
    for f in 0..profile.facets.len() {
        check.extend(facet_nodes(
            profile,
            f,
            density + 1,
            params.grading_ratio * params.grading_ratio.sqrt(),
            params.grading_levels,
            0.123,
        ));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for node in &check {
        let mut lhs = Complex64::new(0.0, 0.0);
        for (mo, c) in modes.iter().zip(sol.weights.iter()) {
            lhs += c * bc_row(node, mo);
        }
        let rhs = bc_rhs(node);
        num += node.weight * (lhs - rhs).norm_sqr();
        den += node.weight * rhs.norm_sqr();
    }
    let residual = (num / den.max(1e-300)).sqrt();
    if residual > params.max_residual {
        return Err(GratingError::NotConverged { residual, limit: params.max_residual });
    }
    Ok(GratingSolution {
        profile: profile.clone(),
        k,
        requested_k,
        alpha,
        d,
        modes,
        coefficients: sol.weights.iter().cloned().collect(),
        z_ref,
        residual,
        condition: sol.condition(),
        wood_perturbed,
    })
}

impl GratingSolution {
    pub fn incident_field(&self, x: Vec3) -> Complex64 {
        Complex64::from_polar(1.0, self.k * self.d.dot(x))
    }

    pub fn scattered_field(&self, x: Vec3) -> Complex64 {
        let mut u = Complex64::new(0.0, 0.0);
        for (mo, c) in self.modes.iter().zip(&self.coefficients) {
            u += c * mode_value(mo, x, self.z_ref);
        }
        u
    }

    pub fn total_field(&self, x: Vec3) -> Complex64 {
        self.incident_field(x) + self.scattered_field(x)
    }

    /// Analytic gradient of the total field.
    pub fn total_gradient(&self, x: Vec3) -> [Complex64; 3] {
        let ui = self.incident_field(x);
        let mut g = [
            I * self.k * self.d.x * ui,
            I * self.k * self.d.y * ui,
            I * self.k * self.d.z * ui,
        ];
        for (mo, c) in self.modes.iter().zip(&self.coefficients) {
            let mg = mode_gradient(mo, x, self.z_ref);
            for i in 0..3 {
                g[i] += c * mg[i];
            }
        }
        g
    }

    /// Scattered-mode coefficient referred to the plane x3 = 0, i.e. the
    /// Rayleigh coefficient u_n of u^s = sum u_n e^{i alpha_n x' + i beta_n x3}.
    pub fn rayleigh_coefficient(&self, n: [i64; 2]) -> Complex64 {
        for (mo, c) in self.modes.iter().zip(&self.coefficients) {
            if mo.n == n {
                return c * (-I * mo.beta * self.z_ref).exp();
            }
        }
        Complex64::new(0.0, 0.0)
    }

    /// All retained Rayleigh orders with their coefficients and vertical
    /// wavenumbers, keyed by (n1, n2) in lexicographic order.
    pub fn spectrum(&self) -> RayleighSpectrum {
        let mut coefficients = BTreeMap::new();
        let mut betas = BTreeMap::new();
        for mo in &self.modes {
            coefficients.insert(mo.n, self.rayleigh_coefficient(mo.n));
            betas.insert(mo.n, mo.beta);
        }
        RayleighSpectrum {
            k: self.k,
            alpha: self.alpha,
            coefficients,
            betas,
            aliasing_suspected: false,
        }
    }
}

/// Rayleigh coefficients and vertical wavenumbers of a solution.
#[derive(Debug, Clone)]
pub struct RayleighSpectrum {
    pub k: f64,
    pub alpha: QuasiMomentum,
    pub coefficients: BTreeMap<[i64; 2], Complex64>,
    pub betas: BTreeMap<[i64; 2], Complex64>,
    /// top retained orders carry more than 1e-4 of the largest coefficient
    pub aliasing_suspected: bool,
}

impl RayleighSpectrum {
    pub fn coefficient(&self, n: [i64; 2]) -> Complex64 {
        *self.coefficients.get(&n).unwrap_or(&Complex64::new(0.0, 0.0))
    }

    /// sum over propagating modes of (beta_n / beta_0) |u_n|^2; equals 1 for
    /// an energy-conserving (sound-soft limit) grating.
    pub fn flux_sum(&self) -> f64 {
        let b0 = self.betas.get(&[0, 0]).map(|b| b.re).unwrap_or(0.0);
        if b0 <= 0.0 {
            return f64::NAN;
        }
        self.coefficients
            .iter()
            .filter_map(|(n, u)| {
                let b = self.betas[n];
                (b.im == 0.0).then(|| b.re / b0 * u.norm_sqr())
            })
            .sum()
    }
}

/// Extracts Rayleigh coefficients of a sampled field by discrete Fourier
/// transform of (u - u^i) on a uniform grid over one cell at height b,
/// demodulated by e^{-i alpha . x'} and e^{-i beta_n b}.
///
/// The `field` closure must return the TOTAL field.
pub fn rayleigh_expand<F: Fn(Vec3) -> Complex64>(
    field: F,
    incident: impl Fn(Vec3) -> Complex64,
    k: f64,
    alpha: &QuasiMomentum,
    b: f64,
    m: i64,
) -> RayleighSpectrum {
    let n_grid = (4 * (m + 1)) as usize;
    let h = PERIOD / n_grid as f64;
    // scattered samples, demodulated by the quasimomentum phase
    let mut samples = vec![Complex64::new(0.0, 0.0); n_grid * n_grid];
    for iy in 0..n_grid {
        for ix in 0..n_grid {
            let x = ix as f64 * h;
            let y = iy as f64 * h;
            let p = Vec3::new(x, y, b);
            let us = field(p) - incident(p);
            samples[iy * n_grid + ix] =
                us * Complex64::from_polar(1.0, -(alpha.alpha[0] * x + alpha.alpha[1] * y));
        }
    }
    let mut coefficients = BTreeMap::new();
    let mut betas = BTreeMap::new();
    for n1 in -m..=m {
        for n2 in -m..=m {
            let n = [n1, n2];
            let mut acc = Complex64::new(0.0, 0.0);
            for iy in 0..n_grid {
                for ix in 0..n_grid {
                    let x = ix as f64 * h;
                    let y = iy as f64 * h;
                    acc += samples[iy * n_grid + ix]
                        * Complex64::from_polar(1.0, -(n1 as f64 * x + n2 as f64 * y));
                }
            }
            let mean = acc / (n_grid * n_grid) as f64;
            let beta = beta_n(k, alpha, n);
            coefficients.insert(n, mean * (-I * beta * b).exp());
            betas.insert(n, beta);
        }
    }
    let largest = coefficients.values().map(|c| c.norm()).fold(0.0_f64, f64::max);
    let edge_max = coefficients
        .iter()
        .filter(|(n, _)| n[0].abs() == m || n[1].abs() == m)
        .map(|(_, c)| c.norm())
        .fold(0.0_f64, f64::max);
    RayleighSpectrum {
        k,
        alpha: *alpha,
        coefficients,
        betas,
        aliasing_suspected: largest > 0.0 && edge_max > 1e-4 * largest,
    }
}

/// Maximum relative quasi-periodicity defect of the total field over check
/// points: |u(x' + 2 pi e_i, x3) - e^{i 2 pi alpha_i} u(x', x3)| / max |u|.
pub fn quasiperiodicity_residual(sol: &GratingSolution) -> f64 {
    let mut worst = 0.0_f64;
    let mut scale = 0.0_f64;
    let b = sol.profile.max_height() + 0.5;
    for i in 0..5 {
        for j in 0..4 {
            let x = Vec3::new(
                0.37 + 1.1 * i as f64,
                0.21 + 1.3 * j as f64,
                b + 0.2 * i as f64,
            );
            let u = sol.total_field(x);
            scale = scale.max(u.norm());
            for (e, a) in [(Vec3::new(PERIOD, 0.0, 0.0), sol.alpha.alpha[0]),
                           (Vec3::new(0.0, PERIOD, 0.0), sol.alpha.alpha[1])] {
                let shifted = sol.total_field(x + e);
                let phase = Complex64::from_polar(1.0, PERIOD * a);
                worst = worst.max((shifted - phase * u).norm());
            }
        }
    }
    worst / scale.max(1e-300)
}

/// Phased lattice sum of free-space kernels,
/// sum_{|m|_inf <= T} e^{i 2 pi alpha . m} e^{ikR_m}/(4 pi R_m) with
/// R_m = |x - y - 2 pi (m, 0)|. Slowly convergent; kept as a cross-check of
/// quasi-periodization, not used by the solver.
pub fn quasiperiodic_green_lattice(
    k: f64,
    alpha: &QuasiMomentum,
    x: Vec3,
    y: Vec3,
    translates: i64,
) -> Complex64 {
    let mut g = Complex64::new(0.0, 0.0);
    for m1 in -translates..=translates {
        for m2 in -translates..=translates {
            let shift = Vec3::new(PERIOD * m1 as f64, PERIOD * m2 as f64, 0.0);
            let r = (x - y - shift).norm();
            let phase = PERIOD * (alpha.alpha[0] * m1 as f64 + alpha.alpha[1] * m2 as f64);
            g += Complex64::from_polar(1.0, phase) * Complex64::from_polar(1.0, k * r)
                / (4.0 * std::f64::consts::PI * r);
        }
    }
    g
}

/// Flat-profile reflection coefficient R = (ik - eta)/(ik + eta) for normal
/// incidence: the exact solution is u = e^{-ik x3} + R e^{ik x3}.
pub fn flat_reflection(k: f64, eta: Complex64) -> Complex64 {
    (I * k - eta) / (I * k + eta)
}
