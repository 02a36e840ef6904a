//! Scenario execution: solves, writes deterministic artifacts, and records a
//! manifest with content hashes.

use crate::config::{ExperimentConfig, Scenario, SCHEMA_VERSION};
use num_complex::Complex64;
use polyscat::eigencorner::{
    certify_vanishing, certify_vanishing_rational, estimate_vanishing_order, CornerData,
    VanishingReport,
};
use polyscat::geometry::Vec3;
use polyscat::grating::solve_grating;
use polyscat::obstacle::{
    far_field, impedance_sphere_far_field, optical_theorem_residual, solve_scattering,
    IncidentWave,
};
use polyscat::specfun::{spherical_bessel_j, spherical_harmonic};
use polyscat::uniqueness::{
    grating_gap, hypothesis_audit, hypothesis_audit_grating, obstacle_gap, recover_impedance,
    UniquenessError,
};
use serde_json::json;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Run outcome mapped to process exit codes.
#[derive(Debug)]
pub enum RunError {
    /// exit 4
    Invalid(String),
    /// exit 2
    Solver(String),
    /// exit 3
    Audit(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Invalid(m) => write!(f, "invalid input: {m}"),
            RunError::Solver(m) => write!(f, "solver failure: {m}"),
            RunError::Audit(m) => write!(f, "audit failure: {m}"),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Solver(_) => 2,
            RunError::Audit(_) => 3,
            RunError::Invalid(_) => 4,
        }
    }
}

impl From<crate::config::ConfigError> for RunError {
    fn from(e: crate::config::ConfigError) -> Self {
        RunError::Invalid(e.0)
    }
}

fn solver_err(e: impl std::fmt::Display) -> RunError {
    RunError::Solver(e.to_string())
}

fn uniqueness_err(e: UniquenessError) -> RunError {
    match e {
        UniquenessError::MaskTooSmall { fraction } => RunError::Audit(format!(
            "impedance recovery refused: only {:.1}% of the face is away from field nodes",
            100.0 * fraction
        )),
        UniquenessError::CornerNotExterior(x, y, z) => {
            RunError::Invalid(format!("corner ({x}, {y}, {z}) is not in the exterior domain"))
        }
        other => RunError::Solver(other.to_string()),
    }
}

/// Collects artifacts as (name, bytes) so the manifest can hash them all.
struct Artifacts {
    dir: PathBuf,
    written: Vec<(String, String)>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self, RunError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| RunError::Invalid(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Artifacts { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)
            .map_err(|e| RunError::Invalid(format!("cannot write {}: {e}", path.display())))?;
        let mut h = Sha256::new();
        h.update(bytes);
        self.written.push((name.to_string(), format!("{:x}", h.finalize())));
        Ok(())
    }

    fn manifest(
        &mut self,
        cfg: &ExperimentConfig,
        kind: &str,
        diagnostics: serde_json::Value,
        wall_ms: u128,
    ) -> Result<(), RunError> {
        let outputs: Vec<serde_json::Value> = self
            .written
            .iter()
            .map(|(p, h)| json!({ "path": p, "sha256": h }))
            .collect();
        let manifest = json!({
            "schema_version": SCHEMA_VERSION,
            "scenario": kind,
            "seed": cfg.seed,
            "config": cfg,
            "outputs": outputs,
            "diagnostics": diagnostics,
            "wall_time_ms": wall_ms,
        });
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| RunError::Invalid(e.to_string()))?;
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, text.as_bytes())
            .map_err(|e| RunError::Invalid(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }
}

fn fmt_complex_row(cols: &[f64]) -> String {
    let mut s = String::new();
    for (i, c) in cols.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        // shortest round-trip formatting: deterministic and lossless
        s.push_str(&format!("{c:?}"));
    }
    s.push('\n');
    s
}

fn report_json(r: &VanishingReport) -> serde_json::Value {
    json!({
        "certified_order": r.certified_order,
        "blocking": r.blocking.map(|b| json!({
            "order": b.order,
            "reason": format!("{:?}", b.reason),
        })),
        "determinant_checks": r.determinant_log.len(),
    })
}

pub fn run(cfg: &ExperimentConfig, base: &Path, out_dir: &Path) -> Result<(), RunError> {
    cfg.validate(base)?;
    let t0 = Instant::now();
    let mut art = Artifacts::new(out_dir)?;
    match &cfg.scenario {
        Scenario::SolveObstacle {
            obstacle,
            k,
            direction,
            grid_order,
            solver,
            oracle_sphere_radius,
        } => {
            let p = obstacle.build(base)?;
            let inc = IncidentWave::new(*k, Vec3::new(direction[0], direction[1], direction[2]));
            let params = solver.to_params();
            let sol = solve_scattering(&p, inc, &params).map_err(solver_err)?;
            let ff = far_field(&sol, *grid_order);
            let mut csv = String::from("theta,phi,re,im\n");
            for ((dir, _), v) in ff.directions.iter().zip(&ff.values) {
                let theta = dir[2].clamp(-1.0, 1.0).acos();
                let mut phi = dir[1].atan2(dir[0]);
                if phi < 0.0 {
                    phi += 2.0 * std::f64::consts::PI;
                }
                csv.push_str(&fmt_complex_row(&[theta, phi, v.re, v.im]));
            }
            art.write("far_field.csv", csv.as_bytes())?;
            let oracle_error = oracle_sphere_radius.map(|radius| {
                let mut num = 0.0;
                let mut den = 0.0;
                let eta = p.faces[0].impedance.alpha0;
                for ((dir, w), v) in ff.directions.iter().zip(&ff.values) {
                    let oracle = impedance_sphere_far_field(
                        *k,
                        radius,
                        eta,
                        inc.d,
                        Vec3::new(dir[0], dir[1], dir[2]),
                    );
                    num += w * (v - oracle).norm_sqr();
                    den += w * oracle.norm_sqr();
                }
                (num / den).sqrt()
            });
            let diagnostics = json!({
                "residual": sol.residual,
                "condition": sol.condition,
                "sources": sol.source_points.len(),
                "far_field_l2": ff.l2_norm(),
                "optical_theorem_residual": optical_theorem_residual(&sol, &ff),
                "oracle_error": oracle_error,
            });
            println!("solve-obstacle: residual {:.3e}", sol.residual);
            if let Some(e) = oracle_error {
                println!("oracle-error: {e:.3e}");
            }
            art.manifest(cfg, "solve-obstacle", diagnostics, t0.elapsed().as_millis())
        }
        Scenario::SolveGrating { profile, k, theta, phi, solver } => {
            let g = profile.build(base)?;
            let params = solver.to_params();
            let sol = solve_grating(&g, *k, *theta, *phi, &params).map_err(solver_err)?;
            let spec = sol.spectrum();
            let mut csv = String::from("n1,n2,re_u,im_u,re_beta,im_beta\n");
            for (n, u) in &spec.coefficients {
                let b = spec.betas[n];
                csv.push_str(&format!(
                    "{},{},{}",
                    n[0],
                    n[1],
                    fmt_complex_row(&[u.re, u.im, b.re, b.im])
                ));
            }
            art.write("rayleigh.csv", csv.as_bytes())?;
            let propagating = spec.betas.values().filter(|b| b.im == 0.0 && b.re > 0.0).count();
            let diagnostics = json!({
                "residual": sol.residual,
                "condition": sol.condition,
                "k": sol.k,
                "requested_k": sol.requested_k,
                "wood_perturbed": sol.wood_perturbed,
                "propagating_modes": propagating,
                "flux_sum": spec.flux_sum(),
            });
            println!(
                "solve-grating: residual {:.3e}, {} propagating modes",
                sol.residual, propagating
            );
            art.manifest(cfg, "solve-grating", diagnostics, t0.elapsed().as_millis())
        }
        Scenario::VerifyCorner { alpha, eta1, eta2, lambda, n_target } => {
            let (value, rational) = alpha.resolve()?;
            let e1 = Complex64::new(eta1[0], eta1[1]);
            let e2 = Complex64::new(eta2[0], eta2[1]);
            let report = match rational {
                Some((q, p)) => certify_vanishing_rational(q, p, e1, e2, *lambda, *n_target),
                None => certify_vanishing(
                    &CornerData::new(value * std::f64::consts::PI, e1, e2, *lambda),
                    *n_target,
                ),
            };
            art.write("report.txt", report.render().as_bytes())?;
            let rj = report_json(&report);
            art.write(
                "report.json",
                serde_json::to_string_pretty(&rj).unwrap().as_bytes(),
            )?;
            print!("{}", report.render());
            art.manifest(cfg, "verify-corner", rj, t0.elapsed().as_millis())
        }
        Scenario::EstimateVanishing { n, m, lambda, radii, samples } => {
            let sk = lambda.sqrt();
            let (nn, mm) = (*n, *m);
            let sampler = move |x: [f64; 3]| {
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                if r < 1e-300 {
                    return Complex64::new(0.0, 0.0);
                }
                let theta = (x[2] / r).clamp(-1.0, 1.0).acos();
                let phi = x[1].atan2(x[0]);
                spherical_bessel_j(nn, sk * r)
                    * spherical_harmonic(nn, mm, theta, phi).unwrap_or_default()
            };
            let default_radii = vec![0.5, 0.35, 0.25, 0.18, 0.12];
            let rho = radii.as_ref().unwrap_or(&default_radii);
            let est = estimate_vanishing_order(sampler, [0.0; 3], |_| true, rho, *samples);
            let ej = json!({
                "slope": est.slope,
                "order_real": est.order_real,
                "order": est.order,
                "r_squared": est.r_squared,
                "noisy": est.noisy,
                "expected_order": n,
            });
            art.write(
                "estimate.json",
                serde_json::to_string_pretty(&ej).unwrap().as_bytes(),
            )?;
            println!(
                "estimate-vanishing: order {} (slope {:.3}, R^2 {:.4})",
                est.order, est.slope, est.r_squared
            );
            art.manifest(cfg, "estimate-vanishing", ej, t0.elapsed().as_millis())
        }
        Scenario::UniquenessGap {
            obstacles,
            gratings,
            k,
            direction,
            theta,
            phi,
            b,
            grid_order,
            solver,
            grating_solver,
        } => {
            let report = if let Some(pair) = obstacles {
                let o1 = pair[0].build(base)?;
                let o2 = pair[1].build(base)?;
                let d = direction.unwrap();
                let inc = IncidentWave::new(*k, Vec3::new(d[0], d[1], d[2]));
                obstacle_gap(&o1, &o2, inc, *grid_order, &solver.to_params())
                    .map_err(uniqueness_err)?
            } else {
                let pair = gratings.as_ref().unwrap();
                let g1 = pair[0].build(base)?;
                let g2 = pair[1].build(base)?;
                grating_gap(&g1, &g2, *k, *theta, *phi, b.unwrap(), &grating_solver.to_params())
                    .map_err(uniqueness_err)?
            };
            let gj = serde_json::to_value(&report).unwrap();
            art.write("gap.json", serde_json::to_string_pretty(&gj).unwrap().as_bytes())?;
            println!(
                "uniqueness-gap: gap {:.3e}, baseline {:.3e}, verdict {:?}",
                report.gap, report.baseline, report.verdict
            );
            art.manifest(cfg, "uniqueness-gap", gj, t0.elapsed().as_millis())
        }
        Scenario::RecoverImpedance { obstacle, k, direction, face, solver } => {
            let p = obstacle.build(base)?;
            let inc = IncidentWave::new(*k, Vec3::new(direction[0], direction[1], direction[2]));
            let sol = solve_scattering(&p, inc, &solver.to_params()).map_err(solver_err)?;
            let est = recover_impedance(&sol, *face).map_err(uniqueness_err)?;
            let true_eta = p.faces[*face].impedance.alpha0;
            let ej = json!({
                "face": est.face,
                "eta_hat": [est.eta_hat.re, est.eta_hat.im],
                "eta_configured": [true_eta.re, true_eta.im],
                "pointwise_spread": est.pointwise_spread,
                "mask_fraction": est.mask_fraction,
                "relative_error": (est.eta_hat - true_eta).norm() / true_eta.norm().max(1e-300),
            });
            art.write(
                "impedance.json",
                serde_json::to_string_pretty(&ej).unwrap().as_bytes(),
            )?;
            println!(
                "recover-impedance: face {} eta {:.6} + {:.6}i (spread {:.3e})",
                est.face, est.eta_hat.re, est.eta_hat.im, est.pointwise_spread
            );
            art.manifest(cfg, "recover-impedance", ej, t0.elapsed().as_millis())
        }
        Scenario::Audit { obstacle, grating, k, direction, theta, phi, solver, grating_solver } => {
            let report = if let Some(o) = obstacle {
                let p = o.build(base)?;
                let d = direction.unwrap();
                let inc = IncidentWave::new(*k, Vec3::new(d[0], d[1], d[2]));
                let sol = solve_scattering(&p, inc, &solver.to_params()).map_err(solver_err)?;
                hypothesis_audit(&p, &sol).map_err(uniqueness_err)?
            } else {
                let g = grating.as_ref().unwrap().build(base)?;
                let sol = solve_grating(&g, *k, *theta, *phi, &grating_solver.to_params())
                    .map_err(solver_err)?;
                hypothesis_audit_grating(&g, &sol).map_err(uniqueness_err)?
            };
            let rj = serde_json::to_value(&report).unwrap();
            art.write("audit.json", serde_json::to_string_pretty(&rj).unwrap().as_bytes())?;
            art.write("audit.txt", report.render().as_bytes())?;
            print!("{}", report.render());
            art.manifest(cfg, "audit", rj, t0.elapsed().as_millis())?;
            if report.all_passed() {
                Ok(())
            } else {
                Err(RunError::Audit("one or more hypothesis checks did not pass".to_string()))
            }
        }
    }
}
