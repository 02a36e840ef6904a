//! Versioned JSON experiment configuration.

use num_complex::Complex64;
use polyscat::geometry::formats::{read_grid, read_offi};
use polyscat::geometry::{shapes, GratingProfile, Polyhedron, Vec3};
use polyscat::grating::GratingParams;
use polyscat::obstacle::SolveParams;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// A configuration problem; maps to exit code 4.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid input: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    pub scenario: Scenario,
}

fn default_output_dir() -> String {
    "out".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Scenario {
    SolveObstacle {
        obstacle: ShapeSpec,
        k: f64,
        direction: [f64; 3],
        #[serde(default = "default_grid_order")]
        grid_order: usize,
        #[serde(default)]
        solver: ObstacleSolverSpec,
        /// emit an oracle-error line against the impedance-sphere series of
        /// this radius (sphere-approximation scenes)
        #[serde(default)]
        oracle_sphere_radius: Option<f64>,
    },
    SolveGrating {
        profile: ProfileSpec,
        k: f64,
        theta: f64,
        phi: f64,
        #[serde(default)]
        solver: GratingSolverSpec,
    },
    VerifyCorner {
        /// dihedral ratio alpha in (0,1): "q/p" for the exact path, or a float
        alpha: AlphaSpec,
        eta1: [f64; 2],
        eta2: [f64; 2],
        #[serde(default = "default_lambda")]
        lambda: f64,
        n_target: u32,
    },
    EstimateVanishing {
        /// synthetic mode 4 pi i^n j_n(sqrt(lambda) r) Y_n^m
        n: u32,
        m: i32,
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default)]
        radii: Option<Vec<f64>>,
        #[serde(default = "default_samples")]
        samples: u64,
    },
    UniquenessGap {
        #[serde(default)]
        obstacles: Option<[ShapeSpec; 2]>,
        #[serde(default)]
        gratings: Option<[ProfileSpec; 2]>,
        k: f64,
        #[serde(default)]
        direction: Option<[f64; 3]>,
        #[serde(default)]
        theta: f64,
        #[serde(default)]
        phi: f64,
        /// measurement plane height for grating gaps
        #[serde(default)]
        b: Option<f64>,
        #[serde(default = "default_grid_order")]
        grid_order: usize,
        #[serde(default)]
        solver: ObstacleSolverSpec,
        #[serde(default)]
        grating_solver: GratingSolverSpec,
    },
    RecoverImpedance {
        obstacle: ShapeSpec,
        k: f64,
        direction: [f64; 3],
        face: usize,
        #[serde(default)]
        solver: ObstacleSolverSpec,
    },
    Audit {
        #[serde(default)]
        obstacle: Option<ShapeSpec>,
        #[serde(default)]
        grating: Option<ProfileSpec>,
        k: f64,
        #[serde(default)]
        direction: Option<[f64; 3]>,
        #[serde(default)]
        theta: f64,
        #[serde(default)]
        phi: f64,
        #[serde(default)]
        solver: ObstacleSolverSpec,
        #[serde(default)]
        grating_solver: GratingSolverSpec,
    },
}

fn default_grid_order() -> usize {
    10
}

fn default_lambda() -> f64 {
    1.0
}

fn default_samples() -> u64 {
    50_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Rational(String),
    Real(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShapeSpec {
    Cube(ShapeCommon),
    Tetrahedron(ShapeCommon),
    WedgePrism {
        apex_angle: f64,
        #[serde(flatten)]
        common: ShapeCommon,
    },
    Icosphere {
        level: u32,
        /// rescale so the area-weighted mean surface radius is 1 (the best
        /// polyhedral stand-in for the unit sphere)
        #[serde(default)]
        normalize_mean_radius: bool,
        #[serde(flatten)]
        common: ShapeCommon,
    },
    Offi {
        path: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeCommon {
    #[serde(default = "default_eta")]
    pub eta: [f64; 2],
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub translate: Option<[f64; 3]>,
}

fn default_eta() -> [f64; 2] {
    [1.0, 0.0]
}

impl Default for ShapeCommon {
    fn default() -> Self {
        ShapeCommon { eta: default_eta(), scale: None, translate: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    Flat {
        #[serde(default = "default_eta")]
        eta: [f64; 2],
    },
    Pyramid {
        height: f64,
        #[serde(default = "default_eta")]
        eta: [f64; 2],
    },
    Ridge {
        width: f64,
        #[serde(default = "default_eta")]
        eta: [f64; 2],
    },
    Grid {
        path: String,
    },
}

/// Optional overrides of the obstacle solver defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSolverSpec {
    pub density: Option<usize>,
    pub source_density: Option<usize>,
    pub source_offset: Option<f64>,
    pub max_sources: Option<usize>,
    pub max_residual: Option<f64>,
}

impl ObstacleSolverSpec {
    pub fn to_params(&self) -> SolveParams {
        let d = SolveParams::default();
        SolveParams {
            density: self.density.unwrap_or(d.density),
            source_density: self.source_density.unwrap_or(d.source_density),
            source_offset: self.source_offset.unwrap_or(d.source_offset),
            max_sources: self.max_sources.unwrap_or(d.max_sources),
            max_residual: self.max_residual.unwrap_or(d.max_residual),
            ..d
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GratingSolverSpec {
    pub truncation: Option<i64>,
    pub density: Option<usize>,
    pub max_residual: Option<f64>,
}

impl GratingSolverSpec {
    pub fn to_params(&self) -> GratingParams {
        let d = GratingParams::default();
        GratingParams {
            truncation: self.truncation.or(d.truncation),
            density: self.density.unwrap_or(d.density),
            max_residual: self.max_residual.unwrap_or(d.max_residual),
            ..d
        }
    }
}

fn area_weighted_mean_radius(p: &Polyhedron) -> f64 {
    let mut num = 0.0;
    let mut area = 0.0;
    for f in 0..p.faces.len() {
        let a = 0.5 * p.face_normal(f).norm();
        num += a * p.face_centroid(f).norm();
        area += a;
    }
    num / area
}

impl ShapeSpec {
    /// Builds the polyhedron; file paths are resolved relative to `base`.
    pub fn build(&self, base: &Path) -> Result<Polyhedron, ConfigError> {
        let apply = |p: Polyhedron, common: &ShapeCommon| -> Polyhedron {
            let p = match common.scale {
                Some(s) => p.scaled(s),
                None => p,
            };
            match common.translate {
                Some(t) => p.translated(Vec3::new(t[0], t[1], t[2])),
                None => p,
            }
        };
        match self {
            ShapeSpec::Cube(c) => Ok(apply(
                shapes::unit_cube(Complex64::new(c.eta[0], c.eta[1])),
                c,
            )),
            ShapeSpec::Tetrahedron(c) => Ok(apply(
                shapes::regular_tetrahedron(Complex64::new(c.eta[0], c.eta[1])),
                c,
            )),
            ShapeSpec::WedgePrism { apex_angle, common } => {
                if !(*apex_angle > 0.0 && *apex_angle < std::f64::consts::PI) {
                    return Err(bad(format!("apex_angle {apex_angle} outside (0, pi)")));
                }
                Ok(apply(
                    shapes::wedge_prism(*apex_angle, Complex64::new(common.eta[0], common.eta[1])),
                    common,
                ))
            }
            ShapeSpec::Icosphere { level, normalize_mean_radius, common } => {
                if *level > 5 {
                    return Err(bad(format!("icosphere level {level} too fine (max 5)")));
                }
                let mut p = shapes::icosphere(*level, Complex64::new(common.eta[0], common.eta[1]));
                if *normalize_mean_radius {
                    p = p.scaled(1.0 / area_weighted_mean_radius(&p));
                }
                Ok(apply(p, common))
            }
            ShapeSpec::Offi { path } => {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| bad(format!("cannot read {}: {e}", full.display())))?;
                read_offi(&text).map_err(|e| bad(format!("{}: {e}", full.display())))
            }
        }
    }
}

impl ProfileSpec {
    pub fn build(&self, base: &Path) -> Result<GratingProfile, ConfigError> {
        match self {
            ProfileSpec::Flat { eta } => Ok(GratingProfile::flat(Complex64::new(eta[0], eta[1]))),
            ProfileSpec::Pyramid { height, eta } => {
                if *height <= 0.0 {
                    return Err(bad(format!("pyramid height {height} must be positive")));
                }
                Ok(GratingProfile::pyramid(*height, Complex64::new(eta[0], eta[1])))
            }
            ProfileSpec::Ridge { width, eta } => {
                Ok(GratingProfile::ridge(*width, Complex64::new(eta[0], eta[1])))
            }
            ProfileSpec::Grid { path } => {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| bad(format!("cannot read {}: {e}", full.display())))?;
                read_grid(&text).map_err(|e| bad(format!("{}: {e}", full.display())))
            }
        }
    }
}

impl AlphaSpec {
    /// Returns (alpha value, exact rational (q, p) when given as "q/p").
    pub fn resolve(&self) -> Result<(f64, Option<(u32, u32)>), ConfigError> {
        match self {
            AlphaSpec::Real(a) => {
                if !(*a > 0.0 && *a < 1.0) {
                    return Err(bad(format!("alpha {a} outside (0, 1)")));
                }
                Ok((*a, None))
            }
            AlphaSpec::Rational(s) => {
                let (qs, ps) = s
                    .split_once('/')
                    .ok_or_else(|| bad(format!("alpha {s:?} is not of the form q/p")))?;
                let q: u32 = qs.trim().parse().map_err(|_| bad(format!("bad numerator {qs:?}")))?;
                let p: u32 = ps.trim().parse().map_err(|_| bad(format!("bad denominator {ps:?}")))?;
                if !(p >= 2 && q >= 1 && q < p) {
                    return Err(bad(format!("alpha {q}/{p} outside (0, 1)")));
                }
                Ok((q as f64 / p as f64, Some((q, p))))
            }
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| bad(format!("{}: {e}", path.display())))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(bad(format!(
                "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Structural validation beyond deserialization: parameter ranges and
    /// referenced files. `base` is the directory of the config file.
    pub fn validate(&self, base: &Path) -> Result<(), ConfigError> {
        match &self.scenario {
            Scenario::SolveObstacle { obstacle, k, direction, .. } => {
                check_k(*k)?;
                check_direction(direction)?;
                obstacle.build(base).map(|_| ())
            }
            Scenario::SolveGrating { profile, k, phi, .. } => {
                check_k(*k)?;
                check_phi(*phi)?;
                profile.build(base).map(|_| ())
            }
            Scenario::VerifyCorner { alpha, eta1, eta2, lambda, n_target } => {
                alpha.resolve()?;
                if *lambda <= 0.0 {
                    return Err(bad(format!("lambda {lambda} must be positive")));
                }
                if eta1 == &[0.0, 0.0] || eta2 == &[0.0, 0.0] {
                    return Err(bad("face impedances must be nonzero".to_string()));
                }
                if *n_target == 0 {
                    return Err(bad("n_target must be at least 1".to_string()));
                }
                Ok(())
            }
            Scenario::EstimateVanishing { n, m, lambda, radii, .. } => {
                if m.unsigned_abs() > *n {
                    return Err(bad(format!("|m| = {} exceeds n = {n}", m.abs())));
                }
                if *lambda <= 0.0 {
                    return Err(bad(format!("lambda {lambda} must be positive")));
                }
                if let Some(r) = radii {
                    if r.is_empty() || r.windows(2).any(|w| w[1] >= w[0]) {
                        return Err(bad("radii must be strictly decreasing".to_string()));
                    }
                }
                Ok(())
            }
            Scenario::UniquenessGap { obstacles, gratings, k, direction, phi, b, .. } => {
                check_k(*k)?;
                match (obstacles, gratings) {
                    (Some(pair), None) => {
                        let d = direction
                            .ok_or_else(|| bad("obstacle gap needs `direction`".to_string()))?;
                        check_direction(&d)?;
                        for s in pair {
                            s.build(base)?;
                        }
                        Ok(())
                    }
                    (None, Some(pair)) => {
                        check_phi(*phi)?;
                        let b = b.ok_or_else(|| bad("grating gap needs plane height `b`".to_string()))?;
                        for s in pair {
                            let g = s.build(base)?;
                            if b <= g.max_height() {
                                return Err(bad(format!(
                                    "plane height {b} not above profile (max height {})",
                                    g.max_height()
                                )));
                            }
                        }
                        Ok(())
                    }
                    _ => Err(bad(
                        "uniqueness-gap needs exactly one of `obstacles` or `gratings`".to_string(),
                    )),
                }
            }
            Scenario::RecoverImpedance { obstacle, k, direction, face, .. } => {
                check_k(*k)?;
                check_direction(direction)?;
                let p = obstacle.build(base)?;
                if *face >= p.faces.len() {
                    return Err(bad(format!(
                        "face {face} out of range (obstacle has {} faces)",
                        p.faces.len()
                    )));
                }
                Ok(())
            }
            Scenario::Audit { obstacle, grating, k, direction, phi, .. } => {
                check_k(*k)?;
                match (obstacle, grating) {
                    (Some(o), None) => {
                        let d = direction
                            .ok_or_else(|| bad("obstacle audit needs `direction`".to_string()))?;
                        check_direction(&d)?;
                        o.build(base).map(|_| ())
                    }
                    (None, Some(g)) => {
                        check_phi(*phi)?;
                        g.build(base).map(|_| ())
                    }
                    _ => Err(bad("audit needs exactly one of `obstacle` or `grating`".to_string())),
                }
            }
        }
    }

    pub fn resolved_output_dir(&self, base: &Path, cli_out: Option<&Path>) -> PathBuf {
        match cli_out {
            Some(p) => p.to_path_buf(),
            None => base.join(&self.output_dir),
        }
    }
}

fn check_k(k: f64) -> Result<(), ConfigError> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(bad(format!("wavenumber k = {k} must be positive and finite")))
    }
}

fn check_direction(d: &[f64; 3]) -> Result<(), ConfigError> {
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if (n - 1.0).abs() < 1e-6 {
        Ok(())
    } else {
        Err(bad(format!("direction {d:?} is not a unit vector (|d| = {n})")))
    }
}

fn check_phi(phi: f64) -> Result<(), ConfigError> {
    if phi.abs() < std::f64::consts::FRAC_PI_2 {
        Ok(())
    } else {
        Err(bad(format!("incidence phi = {phi} outside (-pi/2, pi/2)")))
    }
}
