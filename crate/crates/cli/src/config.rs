//! Run configuration for `degkdv simulate`.

use std::path::{Path, PathBuf};

use degkdv_core::analysis::norms::NormRequest;
use degkdv_core::evolution::{SolverConfig, Variable};
use degkdv_core::profiles::{Mu, ProfileSpec, Shape};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    /// Full length of the flattened window, centered at `y = 0`.
    #[serde(rename = "L_y")]
    pub l_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Every `stride`-th snapshot is written.
    pub stride: usize,
    pub norms: Vec<NormRequest>,
    /// Reconstruct `u(t, x)` and write the conservation and virial report.
    pub eulerian: bool,
    /// Points of the `x`-grid used for reconstruction.
    pub eulerian_n: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { stride: 1, norms: vec![NormRequest::new(0, 0)], eulerian: true, eulerian_n: 2048 }
    }
}

fn default_map_resolution() -> usize {
    8192
}

fn default_variable() -> Variable {
    Variable::W
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: Shape,
    pub mu: Mu,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_ladder: Option<Vec<f64>>,
    pub t_final: f64,
    pub grid: GridConfig,
    /// Weight exponent; defaults to the smallest admissible one. Setting it
    /// outside the admissible window overrides the check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k0: Option<u32>,
    #[serde(default = "default_variable")]
    pub variable: Variable,
    #[serde(default = "default_map_resolution")]
    pub map_resolution: usize,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        match (&self.nu, &self.nu_ladder) {
            (Some(_), Some(_)) => return Err(Failure::usage("set either nu or nu_ladder, not both")),
            (None, None) => return Err(Failure::usage("config needs nu or nu_ladder")),
            (None, Some(l)) if l.is_empty() => return Err(Failure::usage("nu_ladder is empty")),
            _ => {}
        }
        if self.viscosities().iter().any(|nu| !(*nu >= 0.0 && nu.is_finite())) {
            return Err(Failure::usage("viscosities must be finite and nonnegative"));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Failure::usage("t_final must be positive"));
        }
        if self.grid.n < 8 || !(self.grid.l_y > 0.0) {
            return Err(Failure::usage("grid needs n >= 8 and L_y > 0"));
        }
        if self.diagnostics.stride == 0 || self.diagnostics.eulerian_n < 8 {
            return Err(Failure::usage("diagnostics need stride >= 1 and eulerian_n >= 8"));
        }
        self.solver.validate().map_err(|e| Failure::usage(e.to_string()))?;
        self.spec()?;
        Ok(())
    }

    pub fn spec(&self) -> Result<ProfileSpec, Failure> {
        ProfileSpec::new(self.profile.clone(), self.mu).map_err(|e| Failure::usage(e.to_string()))
    }

    pub fn viscosities(&self) -> Vec<f64> {
        match (&self.nu, &self.nu_ladder) {
            (Some(nu), _) => vec![*nu],
            (None, Some(l)) => l.clone(),
            _ => Vec::new(),
        }
    }

    /// SHA-256 of the canonical JSON of everything that affects results.
    pub fn content_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
