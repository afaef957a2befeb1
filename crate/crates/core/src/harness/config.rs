//! Experiment configuration from flat `key = value` files and command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::assembly::MethodParams;
use crate::error::{FcmError, Result};
use crate::harness::manufactured::Solution;
use crate::point::Vec2;
use crate::solve::{SolveMethod, SolveOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Solve,
    Convergence,
    ConditionSweep,
    SpecialCase,
}

impl FromStr for Experiment {
    type Err = FcmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "solve" => Ok(Self::Solve),
            "convergence" => Ok(Self::Convergence),
            "condition-sweep" => Ok(Self::ConditionSweep),
            "special-case" => Ok(Self::SpecialCase),
            other => Err(FcmError::Configuration(format!("unknown experiment `{other}`"))),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Solve => "solve",
            Self::Convergence => "convergence",
            Self::ConditionSweep => "condition-sweep",
            Self::SpecialCase => "special-case",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GeometrySpec {
    Disc { center: Vec2<f64>, radius: f64, n_vertices: usize },
    /// Square rotated by 45 degrees, half-diagonal `8h`, centered on a grid node.
    Rotated45,
    /// Axis-aligned square of side `14h` on grid lines.
    Aligned,
    UnitSquare,
    Polygon(PathBuf),
}

impl GeometrySpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Disc { .. } => "disc",
            Self::Rotated45 => "rotated45",
            Self::Aligned => "aligned",
            Self::UnitSquare => "unit-square",
            Self::Polygon(_) => "polygon",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub geometry: GeometrySpec,
    pub h_list: Vec<f64>,
    pub shifts: usize,
    /// Domain displacements for the special cases.
    pub deltas: Vec<f64>,
    /// Finite cell coefficients swept by the special cases.
    pub c_alpha_list: Vec<f64>,
    pub params: MethodParams<f64>,
    pub p: usize,
    pub solution: Solution,
    pub solver: SolveOptions,
    /// Points per axis of the sampling lattice of `solve`.
    pub lattice: usize,
    pub output: Option<PathBuf>,
}

pub const DEFAULT_DELTAS: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let (geometry, h_list) = match experiment {
            Experiment::SpecialCase => (GeometrySpec::Rotated45, vec![0.09]),
            Experiment::ConditionSweep => (default_disc(), vec![0.2, 0.1, 0.05]),
            Experiment::Convergence => (default_disc(), vec![0.2, 0.1, 0.05, 0.025]),
            Experiment::Solve => (default_disc(), vec![0.1]),
        };
        Self {
            experiment,
            geometry,
            h_list,
            shifts: if experiment == Experiment::Solve { 1 } else { 100 },
            deltas: DEFAULT_DELTAS.to_vec(),
            c_alpha_list: vec![0.0, 1e-6, 1e-3],
            params: MethodParams::default(),
            p: 2,
            solution: Solution::Trig,
            solver: SolveOptions::default(),
            lattice: 50,
            output: None,
        }
    }

    /// Reads a configuration file; the experiment named in the file must match if given.
    pub fn from_file(experiment: Experiment, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::defaults(experiment);
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| FcmError::Parse(format!("line {}: expected `key = value`", lineno + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| FcmError::Parse(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => {
                let exp: Experiment = value.parse()?;
                if exp != self.experiment {
                    return Err(FcmError::Configuration(format!(
                        "config is for `{exp}` but `{}` was requested",
                        self.experiment
                    )));
                }
            }
            "geometry" => {
                self.geometry = match value {
                    "disc" => default_disc(),
                    "rotated45" => GeometrySpec::Rotated45,
                    "aligned" => GeometrySpec::Aligned,
                    "unit-square" => GeometrySpec::UnitSquare,
                    other => match other.strip_prefix("polygon:") {
                        Some(path) => GeometrySpec::Polygon(PathBuf::from(path.trim())),
                        None => return Err(FcmError::Configuration(format!("unknown geometry `{other}`"))),
                    },
                }
            }
            "center" | "radius" | "n_vertices" => {
                let GeometrySpec::Disc { center, radius, n_vertices } = &mut self.geometry else {
                    return Err(FcmError::Configuration(format!("`{key}` only applies to the disc geometry")));
                };
                match key {
                    "center" => {
                        let v = parse_list(value)?;
                        if v.len() != 2 {
                            return Err(FcmError::Configuration("center needs two coordinates".into()));
                        }
                        *center = Vec2::new(v[0], v[1]);
                    }
                    "radius" => *radius = parse_num(value)?,
                    _ => *n_vertices = parse_num(value)?,
                }
            }
            "h" => self.h_list = parse_list(value)?,
            "shifts" => self.shifts = parse_num(value)?,
            "delta" => self.deltas = parse_list(value)?,
            "c_alpha_list" => self.c_alpha_list = parse_list(value)?,
            "beta" => self.params.beta = parse_num(value)?,
            "tau" => self.params.tau = parse_num(value)?,
            "c_alpha" => self.params.c_alpha = parse_num(value)?,
            "ls" => self.params.ls_terms = parse_bool(value)?,
            "p" => self.p = parse_num(value)?,
            "solution" => self.solution = value.parse()?,
            "solver" => {
                self.solver = match value {
                    "direct" => SolveOptions { method: SolveMethod::Direct, ..SolveOptions::default() },
                    "cg" => SolveOptions::cg(),
                    other => return Err(FcmError::Configuration(format!("unknown solver `{other}`"))),
                }
            }
            "tol" => self.solver.tol = parse_num(value)?,
            "lattice" => self.lattice = parse_num(value)?,
            "out" => self.output = Some(PathBuf::from(value)),
            other => return Err(FcmError::Configuration(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.h_list.is_empty() || self.h_list.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(FcmError::Configuration("h list must be nonempty and positive".into()));
        }
        if self.shifts == 0 {
            return Err(FcmError::Configuration("at least one shift is required".into()));
        }
        if self.p < 2 {
            return Err(FcmError::Configuration("spline order must be >= 2".into()));
        }
        if self.experiment == Experiment::SpecialCase {
            if !matches!(self.geometry, GeometrySpec::Rotated45 | GeometrySpec::Aligned) {
                return Err(FcmError::Configuration("special-case needs geometry rotated45 or aligned".into()));
            }
            if self.deltas.is_empty() || self.c_alpha_list.iter().any(|&c| !(c >= 0.0)) {
                return Err(FcmError::Configuration("special-case needs deltas and nonnegative c_alpha values".into()));
            }
        }
        if self.experiment == Experiment::Solve && self.lattice == 0 {
            return Err(FcmError::Configuration("lattice must have at least one point per axis".into()));
        }
        Ok(())
    }
}

fn default_disc() -> GeometrySpec {
    GeometrySpec::Disc { center: Vec2::new(0.0, 0.0), radius: 1.0, n_vertices: 4096 }
}

fn parse_num<N: FromStr>(s: &str) -> Result<N> {
    s.trim().parse().map_err(|_| FcmError::Parse(format!("invalid number `{s}`")))
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(parse_num).collect()
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        other => Err(FcmError::Parse(format!("invalid boolean `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::defaults(Experiment::Convergence);
        assert_eq!(c.params.beta, 5.0);
        assert_eq!(c.params.tau, 0.1);
        assert_eq!(c.params.c_alpha, 1e-3);
        assert_eq!(c.p, 2);
        assert_eq!(c.shifts, 100);
        assert_eq!(c.geometry, GeometrySpec::Disc { center: Vec2::new(0.0, 0.0), radius: 1.0, n_vertices: 4096 });
    }

    #[test]
    fn parse_file_text() {
        let mut c = ExperimentConfig::defaults(Experiment::Convergence);
        c.apply_text("# sweep\nexperiment = convergence\nh = 0.2, 0.1\nshifts = 10\ntau = 1\nls = off\nradius = 0.5 # half\n")
            .unwrap();
        assert_eq!(c.h_list, vec![0.2, 0.1]);
        assert_eq!(c.shifts, 10);
        assert_eq!(c.params.tau, 1.0);
        assert!(!c.params.ls_terms);
        assert!(matches!(c.geometry, GeometrySpec::Disc { radius, .. } if radius == 0.5));
        assert!(c.apply_text("experiment = solve").is_err());
        assert!(c.apply_text("bogus = 1").is_err());
        assert!(c.apply_text("h = x").is_err());
        assert!(c.apply_text("geometry = aligned\nradius = 1").is_err());
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::defaults(Experiment::SpecialCase);
        assert!(c.validate().is_ok());
        c.geometry = GeometrySpec::UnitSquare;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(Experiment::Convergence);
        c.params.tau = 0.0;
        assert!(c.validate().is_err());
    }
}
