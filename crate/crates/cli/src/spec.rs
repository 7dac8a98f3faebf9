//! Run specification files.

use std::path::{Path, PathBuf};

use apgcert::problems::{ConstrainedSpec, NamedInstance, QuarticSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SPEC_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub version: u32,
    pub problem: ProblemSpec,
    pub solver: Solver,
    pub epsilon: f64,
    /// Starting point; defaults to the proximal map of the origin.
    #[serde(default)]
    pub init: Option<Vec<f64>>,
    #[serde(default)]
    pub params: Overrides,
    #[serde(default)]
    pub output: OutputPaths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    Quartic(QuarticSpec),
    Constrained(ConstrainedSpec),
    Named(NamedInstance),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    /// Fixed iteration budget, certificate at the last iterate.
    Apg,
    ApgCert,
    Ppa,
    ProxAl,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Apg => "apg",
            Solver::ApgCert => "apg-cert",
            Solver::Ppa => "ppa",
            Solver::ProxAl => "prox-al",
        }
    }

    pub fn is_outer(self) -> bool {
        matches!(self, Solver::Ppa | Solver::ProxAl)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub gamma0: Option<f64>,
    pub alpha0: Option<f64>,
    pub delta: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    pub rho0: Option<f64>,
    pub zeta: Option<f64>,
    pub sigma: Option<f64>,
    pub eta0: Option<f64>,
    pub max_iters: Option<usize>,
    pub max_outer: Option<usize>,
}

impl Overrides {
    /// Names of the outer-loop overrides that are set.
    pub fn outer_only(&self) -> Vec<&'static str> {
        let mut set = Vec::new();
        for (name, present) in [
            ("rho0", self.rho0.is_some()),
            ("zeta", self.zeta.is_some()),
            ("sigma", self.sigma.is_some()),
            ("eta0", self.eta0.is_some()),
            ("max_outer", self.max_outer.is_some()),
        ] {
            if present {
                set.push(name);
            }
        }
        set
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub trace: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl RunSpec {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let spec: RunSpec = serde_json::from_str(text).map_err(|e| CliError::Spec(e.to_string()))?;
        if spec.version != SPEC_VERSION {
            return Err(CliError::Spec(format!(
                "unsupported spec version {} (expected {SPEC_VERSION})",
                spec.version
            )));
        }
        if !(spec.epsilon > 0.0 && spec.epsilon.is_finite()) {
            return Err(CliError::Spec(format!(
                "epsilon must be positive, got {}",
                spec.epsilon
            )));
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> serde_json::Value {
        serde_json::json!({
            "version": 1,
            "problem": {"named": "quartic-1d"},
            "solver": "ppa",
            "epsilon": 1e-4
        })
    }

    #[test]
    fn parses_minimal_spec() {
        let s = RunSpec::parse(&base().to_string()).unwrap();
        assert_eq!(s.problem, ProblemSpec::Named(NamedInstance::Quartic1d));
        assert_eq!(s.solver, Solver::Ppa);
        assert_eq!(s.params, Overrides::default());
    }

    #[test]
    fn parses_inline_quartic_with_prox() {
        let mut v = base();
        v["problem"] = serde_json::json!({"quartic": {
            "n": 3, "k_terms": 4, "seed": 9, "mu_add": 0.5,
            "prox": {"kind": "l1", "weight": 0.1}
        }});
        v["params"] = serde_json::json!({"M": 5, "gamma0": 2.0});
        let s = RunSpec::parse(&v.to_string()).unwrap();
        assert_eq!(s.params.m, Some(5));
        assert!(matches!(s.problem, ProblemSpec::Quartic(ref q) if q.k_terms == 4));
    }

    #[test]
    fn rejects_unknown_keys() {
        let mut v = base();
        v["tolerance"] = serde_json::json!(1.0);
        assert!(RunSpec::parse(&v.to_string()).is_err());
        let mut v = base();
        v["params"] = serde_json::json!({"m": 5});
        assert!(RunSpec::parse(&v.to_string()).is_err());
    }

    #[test]
    fn rejects_wrong_version_and_bad_epsilon() {
        let mut v = base();
        v["version"] = serde_json::json!(2);
        assert!(RunSpec::parse(&v.to_string()).is_err());
        let mut v = base();
        v["epsilon"] = serde_json::json!(0.0);
        assert!(RunSpec::parse(&v.to_string()).is_err());
    }
}
