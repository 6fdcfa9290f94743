//! TOML run configuration. Every key is optional; omitted keys take the
//! experiment defaults (`n = 64`, 100 KL terms, correlation length 1,
//! `N_ref = 8192`, per-model `β` and bounds).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use saa_core::cond_grad::{LineSearch, SolverConfig};
use saa_core::pde_models::PdeKind;
use saa_core::study::{FieldSettings, ProblemSettings, StudyConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    pub n: usize,
}

impl Default for MeshSection {
    fn default() -> Self {
        Self { n: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    pub terms: usize,
    pub correlation_length: f64,
    pub amplitude: f64,
    pub kappa_floor: f64,
}

impl Default for FieldSection {
    fn default() -> Self {
        let d = FieldSettings::default();
        Self {
            terms: d.terms,
            correlation_length: d.correlation_length,
            amplitude: d.amplitude,
            kappa_floor: d.kappa_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: PdeKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            kind: PdeKind::AffineLinear,
            beta: None,
            lower: None,
            upper: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineSearchName {
    /// Exact search for the affine-linear model, Armijo otherwise.
    Auto,
    Exact,
    Armijo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub gap_tol: f64,
    pub max_iters: usize,
    pub line_search: LineSearchName,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    pub armijo_s0: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            gap_tol: 1e-10,
            max_iters: 100,
            line_search: LineSearchName::Auto,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            armijo_s0: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub n_ref: usize,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            n_ref: 8192,
            n_grid: vec![2, 8, 32, 128, 512],
            replications: 40,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub mesh: MeshSection,
    pub field: FieldSection,
    pub problem: ProblemSection,
    pub solver: SolverSection,
    pub study: StudySection,
}

impl CliConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn solver(&self) -> anyhow::Result<SolverConfig> {
        let kind = self.problem.kind;
        let s = &self.solver;
        let armijo = LineSearch::Armijo {
            c: s.armijo_c,
            shrink: s.armijo_shrink,
            s0: s.armijo_s0,
        };
        let line_search = match s.line_search {
            LineSearchName::Auto => match kind {
                PdeKind::AffineLinear => LineSearch::Exact,
                PdeKind::Bilinear => armijo,
            },
            LineSearchName::Exact => {
                if kind != PdeKind::AffineLinear {
                    bail!("solver.line_search = \"exact\" requires the affine-linear model");
                }
                LineSearch::Exact
            }
            LineSearchName::Armijo => armijo,
        };
        let cfg = SolverConfig {
            gap_tol: s.gap_tol,
            max_iters: s.max_iters,
            line_search,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn study(&self, output_dir: Option<PathBuf>) -> anyhow::Result<StudyConfig> {
        let cfg = StudyConfig {
            kind: self.problem.kind,
            n: self.mesh.n,
            field: FieldSettings {
                terms: self.field.terms,
                correlation_length: self.field.correlation_length,
                amplitude: self.field.amplitude,
                kappa_floor: self.field.kappa_floor,
            },
            problem: ProblemSettings {
                beta: self.problem.beta,
                lower: self.problem.lower,
                upper: self.problem.upper,
            },
            n_ref: self.study.n_ref,
            n_grid: self.study.n_grid.clone(),
            replications: self.study.replications,
            seed: self.study.seed,
            solver: self.solver()?,
            output_dir,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
