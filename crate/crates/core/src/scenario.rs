//! Scenario files: one TOML (or JSON) document describing a metric, a
//! submanifold, the side of its normal bundle and the scan settings.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cut::CutSettings;
use crate::error::{Error, Result};
use crate::focal::{FocalSettings, TIME_TOL};
use crate::geodesic::GeodesicSystem;
use crate::metric::MetricModel;
use crate::oracle::GridSettings;
use crate::submanifold::{NormalBundle, Submanifold};

/// JSON Schema of scenario files.
pub const SCENARIO_SCHEMA: &str = include_str!("../../../docs/scenario.schema.json");

/// A number or an expression in the position variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coef {
    Number(f64),
    Expr(String),
}

impl Coef {
    fn source(&self) -> String {
        match self {
            Coef::Number(x) => format!("{x}"),
            Coef::Expr(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    Euclidean {
        dim: usize,
    },
    /// `g` row-major.
    Riemannian {
        g: Vec<Coef>,
    },
    Randers {
        a: Vec<Coef>,
        b: Vec<Coef>,
    },
    /// `F(x, v)` in `x0.., v0..`.
    Minkowski {
        norm: String,
        dim: usize,
    },
    /// Level set `{level = 0}` of dimension `dim` in `R^(dim+1)`.
    Embedded {
        level: String,
        dim: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SubmanifoldSpec {
    Circle {
        center: Vec<f64>,
        radius: f64,
    },
    Ellipse {
        center: Vec<f64>,
        a: f64,
        b: f64,
    },
    Line {
        point: Vec<f64>,
        direction: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        range: Option<[f64; 2]>,
    },
    Point {
        coords: Vec<f64>,
    },
    /// Expressions in `u0..u{dim-1}`; `periods[a] = 0` marks an open axis.
    Parametric {
        coords: Vec<String>,
        dim: usize,
        #[serde(default)]
        periods: Vec<f64>,
        #[serde(default)]
        ranges: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSpec {
    pub rays: usize,
    pub t_max: f64,
    pub max_j: usize,
    pub probe_radius: f64,
    pub classify: bool,
}

impl Default for ScanSpec {
    fn default() -> Self {
        ScanSpec {
            rays: 360,
            t_max: 5.0,
            max_j: 2,
            probe_radius: 1e-3,
            classify: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSpec {
    /// Focal-time resolution.
    pub time: f64,
    pub ode_rtol: f64,
    pub ode_atol: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        ToleranceSpec {
            time: TIME_TOL,
            ode_rtol: 1e-11,
            ode_atol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CutSpec {
    pub starts: usize,
    pub refine: usize,
    pub slack: f64,
    pub bisect_tol: f64,
    pub focal_tol: f64,
    pub witness_delta: f64,
    pub witness_tol: f64,
}

impl Default for CutSpec {
    fn default() -> Self {
        let c = CutSettings::default();
        CutSpec {
            starts: c.starts,
            refine: c.refine,
            slack: c.slack,
            bisect_tol: c.bisect_tol,
            focal_tol: c.focal_tol,
            witness_delta: c.witness_delta,
            witness_tol: c.witness_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSpec {
    pub resolution: usize,
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 4]>,
    pub any_angle: bool,
    /// Elements per unit time in the index form.
    pub mesh_density: f64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        let g = GridSettings::default();
        OracleSpec {
            resolution: g.resolution,
            margin: g.margin,
            bounds: None,
            any_angle: g.any_angle,
            mesh_density: 50.0,
        }
    }
}

/// Sample sizes of the verification suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    pub rays: usize,
    pub index_pairs: usize,
    pub constancy_probes: usize,
    pub constancy_radius: f64,
    pub derivative_rays: usize,
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec {
            rays: 24,
            index_pairs: 20,
            constancy_probes: 20,
            constancy_radius: 1e-2,
            derivative_rays: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    /// `+1` selects the left normal of a plane curve (inward for a
    /// counter-clockwise closed curve), `-1` the other side.
    #[serde(default = "default_side")]
    pub side: i32,
    pub metric: MetricSpec,
    pub submanifold: SubmanifoldSpec,
    #[serde(default)]
    pub scan: ScanSpec,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    #[serde(default)]
    pub cut: CutSpec,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub verify: VerifySpec,
}

fn default_side() -> i32 {
    1
}

fn schema_err(e: impl std::fmt::Display) -> Error {
    Error::Scenario(e.to_string())
}

impl Scenario {
    /// Parse TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(schema_err)?
        } else {
            toml::from_str(text).map_err(schema_err)?
        };
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("scan.t_max", self.scan.t_max),
            ("scan.probe_radius", self.scan.probe_radius),
            ("tolerances.time", self.tolerances.time),
            ("tolerances.ode_rtol", self.tolerances.ode_rtol),
            ("tolerances.ode_atol", self.tolerances.ode_atol),
            ("cut.slack", self.cut.slack),
            ("cut.bisect_tol", self.cut.bisect_tol),
            ("cut.focal_tol", self.cut.focal_tol),
            ("cut.witness_delta", self.cut.witness_delta),
            ("cut.witness_tol", self.cut.witness_tol),
            ("oracle.margin", self.oracle.margin),
            ("oracle.mesh_density", self.oracle.mesh_density),
            ("verify.constancy_radius", self.verify.constancy_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Scenario(format!("{name} must be positive, got {v}")));
            }
        }
        let counts = [
            ("scan.rays", self.scan.rays),
            ("scan.max_j", self.scan.max_j),
            ("cut.starts", self.cut.starts),
            ("cut.refine", self.cut.refine),
            ("oracle.resolution", self.oracle.resolution),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Scenario(format!("{name} must be at least 1")));
            }
        }
        if self.side != 1 && self.side != -1 {
            return Err(Error::Scenario(format!("side must be 1 or -1, got {}", self.side)));
        }
        Ok(())
    }

    pub fn metric_model(&self) -> Result<MetricModel> {
        let src = |c: &[Coef]| c.iter().map(Coef::source).collect::<Vec<_>>();
        match &self.metric {
            MetricSpec::Euclidean { dim } => MetricModel::euclidean(*dim),
            MetricSpec::Riemannian { g } => MetricModel::riemannian(&src(g)),
            MetricSpec::Randers { a, b } => MetricModel::randers(&src(a), &src(b)),
            MetricSpec::Minkowski { norm, dim } => MetricModel::minkowski(norm, *dim),
            MetricSpec::Embedded { level, dim } => MetricModel::embedded_hypersurface(level, *dim),
        }
    }

    pub fn submanifold(&self) -> Result<Submanifold> {
        match &self.submanifold {
            SubmanifoldSpec::Circle { center, radius } => Submanifold::circle(center, *radius),
            SubmanifoldSpec::Ellipse { center, a, b } => Submanifold::ellipse(center, *a, *b),
            SubmanifoldSpec::Line {
                point,
                direction,
                range,
            } => {
                let l = Submanifold::line(point, direction)?;
                match range {
                    Some([lo, hi]) => l.with_range(0, *lo, *hi),
                    None => Ok(l),
                }
            }
            SubmanifoldSpec::Point { coords } => Ok(Submanifold::point(coords)),
            SubmanifoldSpec::Parametric {
                coords,
                dim,
                periods,
                ranges,
            } => {
                let per: Vec<Option<f64>> = (0..*dim)
                    .map(|a| periods.get(a).copied().filter(|p| *p > 0.0))
                    .collect();
                let mut s = Submanifold::parametric(coords, *dim, per)?;
                for (a, [lo, hi]) in ranges.iter().enumerate() {
                    s = s.with_range(a, *lo, *hi)?;
                }
                Ok(s)
            }
        }
    }

    pub fn system(&self) -> Result<Arc<GeodesicSystem>> {
        let sys = GeodesicSystem::new(self.metric_model()?)
            .with_tolerances(self.tolerances.ode_rtol, self.tolerances.ode_atol);
        Ok(Arc::new(sys))
    }

    pub fn bundle(&self) -> Result<NormalBundle> {
        let sub = self.submanifold()?;
        let sys = self.system()?;
        if sub.coord_dim() != sys.coord_dim() {
            return Err(Error::Scenario(format!(
                "submanifold lives in R^{} but the metric chart has {} coordinates",
                sub.coord_dim(),
                sys.coord_dim()
            )));
        }
        NormalBundle::new(sys, Arc::new(sub), self.side as f64)
    }

    pub fn rays(&self) -> Result<Vec<Vec<f64>>> {
        Ok(self.bundle()?.ray_grid(self.scan.rays))
    }

    pub fn focal_settings(&self) -> FocalSettings {
        FocalSettings {
            t_max: self.scan.t_max,
            max_j: self.scan.max_j,
            tol: self.tolerances.time,
            probe_radius: self.scan.probe_radius,
            classify: self.scan.classify,
        }
    }

    pub fn cut_settings(&self) -> CutSettings {
        CutSettings {
            starts: self.cut.starts,
            refine: self.cut.refine,
            t_max: self.scan.t_max,
            slack: self.cut.slack,
            bisect_tol: self.cut.bisect_tol,
            focal_tol: self.cut.focal_tol,
            witness_delta: self.cut.witness_delta,
            witness_tol: self.cut.witness_tol,
            ..CutSettings::default()
        }
    }

    pub fn grid_settings(&self) -> GridSettings {
        GridSettings {
            resolution: self.oracle.resolution,
            bounds: self.oracle.bounds,
            margin: self.oracle.margin,
            any_angle: self.oracle.any_angle,
        }
    }

    /// Index-form mesh for horizon `t`.
    pub fn mesh(&self, t: f64) -> usize {
        ((self.oracle.mesh_density * t).ceil() as usize).max(20)
    }
}

/// Hex SHA-256 of the scenario file contents.
pub fn scenario_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
