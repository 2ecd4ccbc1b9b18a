//! Run configuration: a flat key/value TOML file, one key per setting.
//!
//! The defaults reproduce the published calibration settings: one million
//! steps, 100 synthetic replicates, jump size 0.5, a burn-in of 100 000,
//! keeping every fifth state, and a 20-point scale-factor grid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticKind {
    /// Three times the sample standard deviation.
    ThreeSigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceKind {
    /// `||s - s~||_2 / ||s||_2`.
    RelativeL2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// Every experiment counts once (the unweighted likelihood).
    Uniform,
    /// Weights proportional to the inverse station count.
    InverseCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSpace {
    Linear,
    Log10,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub pce_order: usize,
    pub prune_threshold: f64,
    pub prune_passes: usize,
    /// Synthetic replicates `K` per experiment.
    pub synthetic_count: usize,
    pub mcmc_steps: usize,
    /// Pre-adaptation proposal sd as a multiple of `(b - a) / 6`.
    pub jump_size: f64,
    pub burn_in: usize,
    pub subsample: usize,
    /// Step at which covariance adaptation starts; `max(1000, 2s)` if unset.
    pub adapt_start: Option<usize>,
    pub warm_start_iterations: usize,
    pub beta_grid: Vec<f64>,
    pub statistic: StatisticKind,
    pub distance: DistanceKind,
    pub tolerance: f64,
    pub weights: WeightMode,
    pub seed: u64,
    pub data_space: DataSpace,
    pub truncation_threshold: f64,
    pub truncation_clamp: bool,
    pub max_chain_entries: usize,
}

/// `count` values spaced evenly in log between `lo` and `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            pce_order: 2,
            prune_threshold: 1e-4,
            prune_passes: 5,
            synthetic_count: 100,
            mcmc_steps: 1_000_000,
            jump_size: 0.5,
            burn_in: 100_000,
            subsample: 5,
            adapt_start: None,
            warm_start_iterations: 50,
            beta_grid: log_spaced(1e-2, 1e2, 20),
            statistic: StatisticKind::ThreeSigma,
            distance: DistanceKind::RelativeL2,
            tolerance: 0.2,
            weights: WeightMode::Uniform,
            seed: 1,
            data_space: DataSpace::Linear,
            truncation_threshold: 0.75,
            truncation_clamp: true,
            max_chain_entries: 50_000_000,
        }
    }
}

impl CalibrationConfig {
    /// Full-length production settings (the defaults).
    pub fn production() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pce_order", self.pce_order),
            ("prune_passes", self.prune_passes),
            ("synthetic_count", self.synthetic_count),
            ("mcmc_steps", self.mcmc_steps),
            ("subsample", self.subsample),
            ("max_chain_entries", self.max_chain_entries),
        ];
        for (key, v) in positive {
            if v < 1 {
                return Err(Error::invalid(format!("{key} must be at least 1")));
            }
        }
        if self.burn_in >= self.mcmc_steps {
            return Err(Error::invalid(format!(
                "burn_in ({}) must be smaller than mcmc_steps ({})",
                self.burn_in, self.mcmc_steps
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if !(self.jump_size > 0.0) || !self.jump_size.is_finite() {
            return Err(Error::invalid("jump_size must be positive"));
        }
        if !(self.prune_threshold >= 0.0 && self.prune_threshold < 1.0) {
            return Err(Error::invalid("prune_threshold must lie in [0, 1)"));
        }
        if !(self.truncation_threshold > 0.0 && self.truncation_threshold <= 1.0) {
            return Err(Error::invalid("truncation_threshold must lie in (0, 1]"));
        }
        if self.beta_grid.is_empty() {
            return Err(Error::invalid("beta_grid must not be empty"));
        }
        if self.beta_grid.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
            return Err(Error::invalid("beta_grid values must be positive"));
        }
        if self.beta_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("beta_grid must be strictly increasing"));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Applies `key=value` overrides; values use TOML syntax, bare words are
    /// taken as strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(&self.to_toml_string())
            .map_err(|e| Error::invalid(e.to_string()))?;
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("override '{o}' is not key=value")))?;
            let (key, raw) = (key.trim(), raw.trim());
            let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            table.insert(key.to_string(), value);
        }
        let text = toml::to_string(&table).map_err(|e| Error::invalid(e.to_string()))?;
        Self::from_toml_str(&text)
    }

    /// Same configuration with `steps` chain steps and the burn-in scaled by
    /// the same factor; used for smoke runs of long configurations.
    pub fn scaled_steps(&self, steps: usize) -> Self {
        let ratio = self.burn_in as f64 / self.mcmc_steps as f64;
        Self {
            mcmc_steps: steps,
            burn_in: ((steps as f64) * ratio).floor() as usize,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = CalibrationConfig::default();
        c.validate().unwrap();
        assert_eq!(c.beta_grid.len(), 20);
        assert!((c.beta_grid[0] - 1e-2).abs() < 1e-15);
        assert!((c.beta_grid[19] - 1e2).abs() < 1e-10);
    }

    #[test]
    fn toml_roundtrip() {
        let c = CalibrationConfig::default();
        let back = CalibrationConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn overrides() {
        let c = CalibrationConfig::default()
            .with_overrides(&["mcmc_steps=5000", "burn_in = 100", "data_space=log10", "beta_grid=[0.5, 1.0]"])
            .unwrap();
        assert_eq!(c.mcmc_steps, 5000);
        assert_eq!(c.burn_in, 100);
        assert_eq!(c.data_space, DataSpace::Log10);
        assert_eq!(c.beta_grid, vec![0.5, 1.0]);
        assert!(CalibrationConfig::default().with_overrides(&["nonsense=1"]).is_err());
    }

    #[test]
    fn invalid_configs() {
        let base = CalibrationConfig::default();
        for o in [
            "beta_grid=[1.0, 1.0]",
            "beta_grid=[]",
            "beta_grid=[-1.0]",
            "tolerance=0.0",
            "subsample=0",
            "burn_in=2000000",
        ] {
            assert!(base.with_overrides(&[o]).is_err(), "{o} accepted");
        }
    }

    #[test]
    fn scaled_smoke_keeps_ratio() {
        let c = CalibrationConfig::production().scaled_steps(1000);
        assert_eq!(c.burn_in, 100);
        c.validate().unwrap();
    }
}
