//! JSON run-file schemas and the builders turning them into library objects.
//!
//! All schemas reject unknown keys; any structural or range violation maps to
//! `Error::Config` so the CLI can exit with the schema code (2).

use serde::Deserialize;

use crate::domains::{Domain, GraphFn};
use crate::error::{Error, Result};
use crate::functions::{self, TestFunction};
use crate::harness::StudySpec;
use crate::kernel::{self, DensitySpec};
use crate::moments::{Matrix, IDENTITY};
use crate::operators::Route;
use crate::quadrature::QuadratureConfig;
use crate::Point;

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Promote library parameter errors raised while interpreting config values
/// to schema errors: the bad value came from the file.
fn as_schema<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parameter(m) => Error::Config(m),
        other => other,
    })
}

fn to_point(v: &[f64], dim: usize, what: &str) -> Result<Point> {
    if v.len() != dim {
        return Err(config_err(format!(
            "{what} must have {dim} components, got {}",
            v.len()
        )));
    }
    let mut p = [0.0; 3];
    p[..dim].copy_from_slice(v);
    Ok(p)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityConfig {
    /// Smooth compactly supported radial bump, normalized to mass 2n.
    Bump {
        dim: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    /// rho = |x|^{2-n-2s} with a smooth cutoff; alpha = 2s.
    Fractional {
        dim: usize,
        s: f64,
        #[serde(default = "default_cutoff")]
        cutoff_radius: f64,
        #[serde(default = "default_width")]
        transition_width: f64,
    },
    /// Anisotropic pushforward of the bump by an SPD, det-1 matrix B.
    Anisotropic {
        dim: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
        b_matrix: Vec<Vec<f64>>,
    },
}

fn default_alpha() -> f64 {
    1.0
}
fn default_cutoff() -> f64 {
    3.0
}
fn default_width() -> f64 {
    1.0
}

impl DensityConfig {
    pub fn dim(&self) -> usize {
        match self {
            DensityConfig::Bump { dim, .. }
            | DensityConfig::Fractional { dim, .. }
            | DensityConfig::Anisotropic { dim, .. } => *dim,
        }
    }

    pub fn build(&self) -> Result<DensitySpec> {
        match self {
            DensityConfig::Bump { dim, alpha } => as_schema(kernel::bump_density_mass_2n(*dim, *alpha)),
            DensityConfig::Fractional {
                dim,
                s,
                cutoff_radius,
                transition_width,
            } => as_schema(kernel::make_fractional_density(
                *dim,
                *s,
                *cutoff_radius,
                *transition_width,
            )),
            DensityConfig::Anisotropic {
                dim,
                alpha,
                b_matrix,
            } => {
                if b_matrix.len() != *dim || b_matrix.iter().any(|r| r.len() != *dim) {
                    return Err(config_err(format!("b_matrix must be {dim}x{dim}")));
                }
                let mut b: Matrix = IDENTITY;
                for (i, row) in b_matrix.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        b[i][j] = v;
                    }
                }
                let base = as_schema(kernel::bump_density_mass_2n(*dim, *alpha))?;
                as_schema(kernel::make_anisotropic_density(&base, &b))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    FullSpace {
        dim: usize,
    },
    Interval {
        a: f64,
        b: f64,
    },
    Ball {
        dim: usize,
        #[serde(default)]
        center: Option<Vec<f64>>,
        radius: f64,
    },
    /// Region above the graph x_n = amplitude * exp(-|x'|^2).
    HalfSpaceGraph {
        dim: usize,
        #[serde(default)]
        amplitude: f64,
    },
}

impl DomainConfig {
    pub fn build(&self) -> Result<Domain> {
        match self {
            DomainConfig::FullSpace { dim } => {
                if !(1..=crate::MAX_DIM).contains(dim) {
                    return Err(config_err(format!("unsupported dimension {dim}")));
                }
                Ok(Domain::FullSpace { dim: *dim })
            }
            DomainConfig::Interval { a, b } => as_schema(Domain::interval(*a, *b)),
            DomainConfig::Ball {
                dim,
                center,
                radius,
            } => {
                let c = match center {
                    Some(v) => to_point(v, *dim, "ball center")?,
                    None => [0.0; 3],
                };
                as_schema(Domain::ball(*dim, c, *radius))
            }
            DomainConfig::HalfSpaceGraph { dim, amplitude } => {
                if *dim < 2 || *dim > crate::MAX_DIM {
                    return Err(config_err("half-space graph domains need dim in {2, 3}"));
                }
                Ok(Domain::HalfSpaceGraph {
                    dim: *dim,
                    graph: GraphFn::new(*amplitude),
                    rotation: None,
                })
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "recipe", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunctionConfig {
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    Linear {
        b: Vec<f64>,
        #[serde(default)]
        c: f64,
    },
    Quadratic {
        h: Vec<Vec<f64>>,
        #[serde(default)]
        b: Option<Vec<f64>>,
        #[serde(default)]
        c: f64,
    },
    /// Compactly supported C^3 radial bump (1 - |x|^2/R^2)^4.
    PolyBump {
        #[serde(default = "one")]
        radius: f64,
    },
    /// cos(k pi (x-a)/(b-a)) on the interval domain (Neumann-compatible).
    CosK {
        #[serde(default = "one_usize")]
        k: usize,
    },
    /// Radial Neumann-compatible profile for the ball domain.
    BallRadial,
    /// Compatible profile for the half-space graph domain.
    HalfSpace {
        #[serde(default = "one")]
        omega: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}

impl TestFunctionConfig {
    /// Recipes may depend on the domain geometry (interval endpoints, ball
    /// radius, boundary graph), so the builder takes the built domain.
    pub fn build(&self, domain: &Domain) -> Result<TestFunction> {
        let dim = domain.dim();
        match self {
            TestFunctionConfig::Constant { value } => Ok(functions::constant(dim, *value)),
            TestFunctionConfig::Linear { b, c } => {
                Ok(functions::linear(dim, to_point(b, dim, "linear b")?, *c))
            }
            TestFunctionConfig::Quadratic { h, b, c } => {
                if h.len() != dim || h.iter().any(|r| r.len() != dim) {
                    return Err(config_err(format!("quadratic h must be {dim}x{dim}")));
                }
                let mut hm = [[0.0; 3]; 3];
                for (i, row) in h.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        hm[i][j] = v;
                    }
                }
                let bp = match b {
                    Some(v) => to_point(v, dim, "quadratic b")?,
                    None => [0.0; 3],
                };
                Ok(functions::quadratic(dim, hm, bp, *c))
            }
            TestFunctionConfig::PolyBump { radius } => {
                if *radius <= 0.0 {
                    return Err(config_err("poly_bump radius must be positive"));
                }
                Ok(functions::poly_bump(dim, *radius))
            }
            TestFunctionConfig::CosK { k } => {
                let Domain::Interval { a, b } = domain else {
                    return Err(config_err("the cos_k recipe requires an interval domain"));
                };
                as_schema(functions::cos_interval(*a, *b, *k))
            }
            TestFunctionConfig::BallRadial => {
                let Domain::Ball { radius, .. } = domain else {
                    return Err(config_err("the ball_radial recipe requires a ball domain"));
                };
                as_schema(functions::ball_radial(dim, *radius))
            }
            TestFunctionConfig::HalfSpace { omega } => {
                let Domain::HalfSpaceGraph { graph, .. } = domain else {
                    return Err(config_err(
                        "the half_space recipe requires a half_space_graph domain",
                    ));
                };
                Ok(functions::half_space_profile(*graph, *omega))
            }
        }
    }
}

/// Partial quadrature overrides; unset fields keep the library defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureOverrides {
    pub near_split_factor: Option<f64>,
    pub radial_nodes: Option<usize>,
    pub angular_nodes: Option<usize>,
    pub far_truncation: Option<f64>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_refine: Option<usize>,
}

impl QuadratureOverrides {
    pub fn build(&self) -> Result<QuadratureConfig> {
        let mut cfg = QuadratureConfig::default();
        if let Some(v) = self.near_split_factor {
            cfg.near_split_factor = v;
        }
        if let Some(v) = self.radial_nodes {
            cfg.radial_nodes = v;
        }
        if let Some(v) = self.angular_nodes {
            cfg.angular_nodes = v;
        }
        if self.far_truncation.is_some() {
            cfg.far_truncation = self.far_truncation;
        }
        if let Some(v) = self.rel_tol {
            cfg.rel_tol = v;
        }
        if let Some(v) = self.abs_tol {
            cfg.abs_tol = v;
        }
        if let Some(v) = self.max_refine {
            cfg.max_refine = v;
        }
        as_schema(cfg.validate())?;
        Ok(cfg)
    }
}

/// `kernel-check` run file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCheckFile {
    pub density: DensityConfig,
    /// Radius for the Dirac tail check.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Epsilons for mass invariance / tail decay.
    #[serde(default = "default_dirac_epsilons")]
    pub dirac_epsilons: Vec<f64>,
    #[serde(default)]
    pub quadrature: QuadratureOverrides,
}

fn default_delta() -> f64 {
    0.5
}
fn default_dirac_epsilons() -> Vec<f64> {
    vec![1.0, 0.5, 0.1]
}

/// `apply` run file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplyFile {
    pub density: DensityConfig,
    pub domain: DomainConfig,
    pub test_function: TestFunctionConfig,
    pub x: Vec<f64>,
    pub epsilon: f64,
    #[serde(default = "default_route")]
    pub route: Route,
    #[serde(default)]
    pub quadrature: QuadratureOverrides,
}

fn default_route() -> Route {
    Route::ComplementDecomposition
}

/// `study` run file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyFile {
    #[serde(default)]
    pub name: Option<String>,
    pub density: DensityConfig,
    pub domain: DomainConfig,
    pub test_function: TestFunctionConfig,
    pub p_values: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub grid: GridSpec,
    #[serde(default)]
    pub quadrature: QuadratureOverrides,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

impl StudyFile {
    pub fn build(&self) -> Result<StudySpec> {
        let density = self.density.build()?;
        let domain = self.domain.build()?;
        let u = self.test_function.build(&domain)?;
        let grid_resolution = match &self.grid {
            GridSpec::Uniform(n) => vec![*n],
            GridSpec::PerAxis(v) => v.clone(),
        };
        let spec = StudySpec {
            name: self
                .name
                .clone()
                .unwrap_or_else(|| format!("{}-study", u.name)),
            density,
            domain,
            u,
            p_values: self.p_values.clone(),
            epsilons: self.epsilons.clone(),
            grid_resolution,
            quadrature: self.quadrature.build()?,
        };
        as_schema(spec.validate())?;
        Ok(spec)
    }
}

/// `profile` run file: pointwise error along a straight transect.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileFile {
    pub density: DensityConfig,
    pub domain: DomainConfig,
    pub test_function: TestFunctionConfig,
    pub epsilon: f64,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub count: usize,
    #[serde(default)]
    pub quadrature: QuadratureOverrides,
}

impl ProfileFile {
    pub fn transect(&self, dim: usize) -> Result<Vec<Point>> {
        if self.count < 2 {
            return Err(config_err("transect count must be >= 2"));
        }
        let a = to_point(&self.start, dim, "transect start")?;
        let b = to_point(&self.end, dim, "transect end")?;
        Ok((0..self.count)
            .map(|k| {
                let t = k as f64 / (self.count - 1) as f64;
                let mut p = [0.0; 3];
                for i in 0..dim {
                    p[i] = a[i] + t * (b[i] - a[i]);
                }
                p
            })
            .collect())
    }
}

/// Parse a JSON run file of type T, mapping parse errors to `Error::Config`.
pub fn parse_file<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_schema_roundtrip() {
        let d: DensityConfig =
            serde_json::from_str(r#"{"kind": "bump", "dim": 1, "alpha": 1.0}"#).unwrap();
        assert!(d.build().is_ok());
        let d: DensityConfig =
            serde_json::from_str(r#"{"kind": "fractional", "dim": 1, "s": 0.75}"#).unwrap();
        assert!(d.build().is_ok());
        let d: DensityConfig = serde_json::from_str(
            r#"{"kind": "anisotropic", "dim": 2, "b_matrix": [[2.0, 0.0], [0.0, 0.5]]}"#,
        )
        .unwrap();
        assert!(d.build().is_ok());
    }

    #[test]
    fn out_of_range_alpha_is_schema_error() {
        let d: DensityConfig =
            serde_json::from_str(r#"{"kind": "bump", "dim": 1, "alpha": 2.5}"#).unwrap();
        let err = d.build().unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<DensityConfig>(
            r#"{"kind": "bump", "dim": 1, "bogus": 3}"#
        )
        .is_err());
        assert!(serde_json::from_str::<StudyFile>(r#"{"extra": 1}"#).is_err());
    }

    #[test]
    fn study_file_builds() {
        let f: StudyFile = serde_json::from_str(
            r#"{
                "density": {"kind": "bump", "dim": 1},
                "domain": {"kind": "interval", "a": 0.0, "b": 1.0},
                "test_function": {"recipe": "cos_k", "k": 1},
                "p_values": [1.0, 2.0],
                "epsilons": [0.4, 0.2, 0.1, 0.05],
                "grid": 64
            }"#,
        )
        .unwrap();
        let spec = f.build().unwrap();
        assert_eq!(spec.grid_resolution, vec![64]);
        assert_eq!(spec.u.dim, 1);
    }

    #[test]
    fn recipe_domain_mismatch() {
        let f: StudyFile = serde_json::from_str(
            r#"{
                "density": {"kind": "bump", "dim": 1},
                "domain": {"kind": "full_space", "dim": 1},
                "test_function": {"recipe": "cos_k"},
                "p_values": [2.0],
                "epsilons": [0.4, 0.2, 0.1, 0.05],
                "grid": 64
            }"#,
        )
        .unwrap();
        let err = f.build().unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn route_names() {
        let r: Route = serde_json::from_str(r#""regularized""#).unwrap();
        assert_eq!(r, Route::Regularized);
        let r: Route = serde_json::from_str(r#""complement_decomposition""#).unwrap();
        assert_eq!(r, Route::ComplementDecomposition);
    }
}
