//! Run configuration: a JSON file of tunables merged with per-flag overrides.

use std::path::{Path, PathBuf};

use macroplace_core::agent::PpoConfig;
use macroplace_core::canvas::N_MAX;
use macroplace_core::proxy::RewardWeights;
use macroplace_core::refine::SaSchedule;
use serde::{Deserialize, Serialize};

/// Explicit grid dimensions; the grid is sized from the smallest macro when
/// absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub rows: usize,
    pub cols: usize,
}

/// Every tunable a command can read. Unset fields take defaults, so a config
/// file only needs the fields it changes; flags override the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub netlist: Option<PathBuf>,
    /// Group assignment file; replaces name-derived grouping when set.
    pub groups: Option<PathBuf>,
    pub weights: RewardWeights,
    pub grid: Option<GridDims>,
    pub ppo: PpoConfig,
    pub sa: SaSchedule,
    pub updates: usize,
    pub workers: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            netlist: None,
            groups: None,
            weights: RewardWeights::default(),
            grid: None,
            ppo: PpoConfig::default(),
            sa: SaSchedule::default(),
            updates: 100,
            workers: 25,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))
    }

    pub fn validate(&self) -> Result<(), String> {
        let w = &self.weights;
        if !(w.alpha >= 0.0 && w.beta >= 0.0 && w.gamma >= 0.0 && w.omega >= 0.0) {
            return Err("weights must be non-negative".into());
        }
        if let Some(g) = self.grid {
            if g.rows == 0 || g.cols == 0 || g.rows > N_MAX || g.cols > N_MAX {
                return Err(format!("grid {}x{} outside 1..={N_MAX}", g.rows, g.cols));
            }
        }
        self.ppo.validate()?;
        if !(self.sa.cooling > 0.0 && self.sa.cooling < 1.0) {
            return Err(format!("sa cooling {} outside (0, 1)", self.sa.cooling));
        }
        if let Some(t0) = self.sa.t0 {
            if !(t0 > 0.0) {
                return Err(format!("sa t0 {t0} must be positive"));
            }
        }
        if self.sa.fine_dim == 0 {
            return Err("sa fine_dim must be at least 1".into());
        }
        if self.workers == 0 {
            return Err("workers must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_fields() {
        let cfg: RunConfig = serde_json::from_str(r#"{"seed": 7}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.updates, 100);
        assert_eq!(cfg.workers, 25);
        assert_eq!(cfg.out, PathBuf::from("out"));
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn bad_values_are_rejected() {
        let mut cfg = RunConfig::default();
        cfg.weights.alpha = -1.0;
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::default();
        cfg.grid = Some(GridDims { rows: 129, cols: 10 });
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::default();
        cfg.sa.cooling = 1.0;
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::default();
        cfg.workers = 0;
        assert!(cfg.validate().is_err());
    }
}
