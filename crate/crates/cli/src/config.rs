//! TOML experiment configuration. Every field is optional; [`ExperimentConfig::resolve`]
//! fills in geometry-dependent defaults so reports can echo the full setup.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stiga_core::geometry::{BuiltinGeometry, GeometryMap, ELLIPSE_ANGULAR_ELEMENTS};
use stiga_core::solver::{FixedPointConfig, LinearSolverChoice, Stabilization, ThetaSource};
use stiga_core::spline::{SplineSpace1D, TensorSpaceTime};
use stiga_core::Parameters;

use crate::error::CliError;
use crate::sources::SourceTerm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub discretization: Discretization,
    pub problem: ProblemConstants,
    pub source: SourceTerm,
    pub stabilization: StabilizationConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub convergence: ConvergenceConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::default(),
            discretization: Discretization::default(),
            problem: ProblemConstants::default(),
            source: SourceTerm::gaussian_pulse_2d(),
            stabilization: StabilizationConfig::default(),
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
            convergence: ConvergenceConfig::default(),
        }
    }
}

/// Physical constants; defaults are the Rogers–McCulloch values with
/// `C_m = 1`, `D = 1e-4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConstants {
    pub c_m: f64,
    pub d: f64,
    pub a: f64,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
    pub d_e: f64,
}

impl Default for ProblemConstants {
    fn default() -> Self {
        Parameters::default().into()
    }
}

impl From<Parameters> for ProblemConstants {
    fn from(p: Parameters) -> Self {
        Self {
            c_m: p.c_m,
            d: p.d,
            a: p.a,
            b: p.b,
            c1: p.c1,
            c2: p.c2,
            d_e: p.d_e,
        }
    }
}

impl From<ProblemConstants> for Parameters {
    fn from(p: ProblemConstants) -> Self {
        Self {
            c_m: p.c_m,
            d: p.d,
            a: p.a,
            b: p.b,
            c1: p.c1,
            c2: p.c2,
            d_e: p.d_e,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// `unit_interval`, `unit_square`, `unit_cube` or `ellipse_annulus`.
    pub name: String,
    /// Control-point file; takes precedence over `name`.
    pub file: Option<PathBuf>,
    /// Box side lengths for the unit geometries.
    pub extents: Option<Vec<f64>>,
    /// Angular elements of the fitted annulus boundary.
    pub angular_elements: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            name: "ellipse_annulus".into(),
            file: None,
            extents: None,
            angular_elements: ELLIPSE_ANGULAR_ELEMENTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Discretization {
    /// Common space and time degree.
    pub degree: usize,
    /// Elements per spatial direction (`h_l = 1 / elements[l]`).
    pub elements: Vec<usize>,
    pub time_elements: usize,
    pub final_time: f64,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            degree: 3,
            elements: vec![32, 8],
            time_elements: 32,
            final_time: 300.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Galerkin,
    Su,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilizationConfig {
    pub method: Method,
    /// Relative Frobenius tolerance of the low-rank Θ.
    pub epsilon: f64,
    /// Fixes Θ to a constant instead of the residual indicator.
    pub theta_constant: Option<f64>,
}

impl Default for StabilizationConfig {
    fn default() -> Self {
        Self {
            method: Method::Su,
            epsilon: 0.1,
            theta_constant: None,
        }
    }
}

impl StabilizationConfig {
    pub fn for_method(&self, method: Method) -> Stabilization {
        match method {
            Method::Galerkin => Stabilization::Off,
            Method::Su => Stabilization::SplineUpwind {
                epsilon: self.epsilon,
                theta: self.theta_constant.map_or(ThetaSource::Residual, ThetaSource::Constant),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolverKind {
    Auto,
    Direct,
    Iterative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub alpha: f64,
    pub delta: f64,
    pub max_iterations: usize,
    pub linear: LinearSolverKind,
    /// Relative residual target of GMRES.
    pub tolerance: f64,
    pub krylov_max_iterations: usize,
    pub mass_tolerance: f64,
    /// Keep `w ≡ 0`.
    pub freeze_recovery: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = FixedPointConfig::default();
        Self {
            alpha: d.alpha,
            delta: d.delta,
            max_iterations: d.max_iterations,
            linear: LinearSolverKind::Auto,
            tolerance: 1e-8,
            krylov_max_iterations: d.krylov_max_iterations,
            mass_tolerance: d.mass_tolerance,
            freeze_recovery: false,
        }
    }
}

/// Straight line in parametric coordinates sampled at `samples` points and
/// `time_samples` uniformly spaced times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionConfig {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub samples: usize,
    pub time_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Physical times of the field snapshots.
    pub times: Vec<f64>,
    /// Parametric samples per direction of a snapshot; defaults to four
    /// per element.
    pub grid: Option<Vec<usize>>,
    /// Defaults to the annulus midline `η_2 = 1/2` for 2D geometries.
    pub section: Option<SectionConfig>,
    /// Write the final Θ̂ matrix.
    pub theta: bool,
    /// Sampling density of the oscillation metric, per element and direction.
    pub oscillation_samples: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("output"),
            times: Vec::new(),
            grid: None,
            section: None,
            theta: true,
            oscillation_samples: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub degrees: Vec<usize>,
    /// Refinement levels `L`, `h = 2^{-L}`.
    pub levels: Vec<u32>,
    pub alpha: f64,
    pub delta: f64,
    pub max_iterations: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            degrees: vec![2, 3],
            levels: (2..=6).collect(),
            alpha: 1.0,
            delta: 1e-10,
            max_iterations: 300,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is serializable")
    }

    /// Spatial dimension implied by the geometry.
    pub fn dimension(&self) -> Result<usize, CliError> {
        if let Some(path) = &self.geometry.file {
            return Ok(self.read_geometry_file(path)?.dim());
        }
        Ok(match self.builtin()? {
            BuiltinGeometry::UnitInterval => 1,
            BuiltinGeometry::UnitSquare | BuiltinGeometry::EllipseAnnulus => 2,
            BuiltinGeometry::UnitCube => 3,
        })
    }

    fn builtin(&self) -> Result<BuiltinGeometry, CliError> {
        self.geometry
            .name
            .parse()
            .map_err(|e: stiga_core::Error| CliError::Config(e.to_string()))
    }

    fn read_geometry_file(&self, path: &Path) -> Result<GeometryMap, CliError> {
        let file = std::fs::File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        GeometryMap::read(std::io::BufReader::new(file), self.discretization.final_time)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Checks ranges and fills the section default.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let d = self.dimension()?;
        let disc = &self.discretization;
        if disc.elements.len() != d {
            return Err(CliError::Config(format!(
                "discretization.elements has {} entries for a {d}-dimensional geometry",
                disc.elements.len()
            )));
        }
        if disc.degree == 0 || disc.elements.iter().chain([&disc.time_elements]).any(|&m| m == 0) {
            return Err(CliError::Config("degree and element counts must be positive".into()));
        }
        if !(disc.final_time > 0.0) {
            return Err(CliError::Config("final_time must be positive".into()));
        }
        let p = &self.problem;
        for (name, v) in [("c_m", p.c_m), ("d", p.d)] {
            if !(v > 0.0) {
                return Err(CliError::Config(format!("problem.{name} must be positive")));
            }
        }
        for (name, v) in [("a", p.a), ("b", p.b), ("c1", p.c1), ("c2", p.c2), ("d_e", p.d_e)] {
            if !(v >= 0.0) {
                return Err(CliError::Config(format!("problem.{name} must be nonnegative")));
            }
        }
        if let Some(ext) = &self.geometry.extents {
            if ext.len() != d || ext.iter().any(|&e| !(e > 0.0)) {
                return Err(CliError::Config("geometry.extents needs one positive length per direction".into()));
            }
        }
        if let Some(g) = &self.output.grid {
            if g.len() != d || g.iter().any(|&n| n < 2) {
                return Err(CliError::Config("output.grid needs at least two samples per direction".into()));
            }
        }
        if let Some(s) = &self.output.section {
            if s.from.len() != d || s.to.len() != d || s.samples < 2 || s.time_samples < 2 {
                return Err(CliError::Config("output.section needs d-dimensional end points and at least two samples".into()));
            }
        } else if d == 2 {
            self.output.section = Some(SectionConfig {
                from: vec![0.0, 0.5],
                to: vec![1.0, 0.5],
                samples: 201,
                time_samples: 101,
            });
        }
        if self.output.oscillation_samples == 0 {
            return Err(CliError::Config("output.oscillation_samples must be positive".into()));
        }
        if self.convergence.degrees.iter().any(|&p| p == 0) {
            return Err(CliError::Config("convergence degrees must be positive".into()));
        }
        Ok(self)
    }

    pub fn geometry_map(&self) -> Result<GeometryMap, CliError> {
        let tf = self.discretization.final_time;
        if let Some(path) = &self.geometry.file {
            return self.read_geometry_file(path);
        }
        let kind = self.builtin()?;
        let map = match (kind, &self.geometry.extents) {
            (BuiltinGeometry::EllipseAnnulus, _) => GeometryMap::ellipse_annulus(self.geometry.angular_elements, tf)?,
            (_, Some(ext)) => GeometryMap::affine_box(ext, tf)?,
            (k, None) => GeometryMap::builtin(k, tf)?,
        };
        Ok(map)
    }

    pub fn space(&self) -> Result<TensorSpaceTime, CliError> {
        let disc = &self.discretization;
        let spatial = disc
            .elements
            .iter()
            .map(|&m| SplineSpace1D::uniform(disc.degree, m))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TensorSpaceTime::new(spatial, SplineSpace1D::uniform(disc.degree, disc.time_elements)?)?)
    }

    pub fn fixed_point(&self, method: Method) -> FixedPointConfig {
        let s = &self.solver;
        FixedPointConfig {
            alpha: s.alpha,
            delta: s.delta,
            max_iterations: s.max_iterations,
            stabilization: self.stabilization.for_method(method),
            linear_solver: match s.linear {
                LinearSolverKind::Auto => LinearSolverChoice::Auto,
                LinearSolverKind::Direct => LinearSolverChoice::Direct,
                LinearSolverKind::Iterative => LinearSolverChoice::Iterative { tol: s.tolerance },
            },
            freeze_recovery: s.freeze_recovery,
            krylov_max_iterations: s.krylov_max_iterations,
            mass_tolerance: s.mass_tolerance,
        }
    }
}
