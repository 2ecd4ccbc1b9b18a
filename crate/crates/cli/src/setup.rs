//! Loading bounds, data, archives and configuration from disk.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use sumcal::dfi::{experiment_specific_copies, Binding, Experiment, SurrogatePredictor};
use sumcal::{Archive, CalibrationConfig, DataSet, DataSpace, ExperimentManifest, Family, Space};

use crate::error::{CliError, StageExt};

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Flat TOML file with calibration settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one setting, e.g. `--set mcmc_steps=1000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    pub fn resolve(&self, base: CalibrationConfig) -> Result<CalibrationConfig, CliError> {
        let cfg = match &self.config {
            Some(p) => CalibrationConfig::load(p).stage("config")?,
            None => base,
        };
        let cfg = cfg.with_overrides(&self.overrides).stage("config")?;
        cfg.validate().stage("config")?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Experiment manifest CSV (`id,label,path,dim[,archive]`).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Bounds file the surrogates were fitted over.
    #[arg(long)]
    pub bounds: PathBuf,
    /// Archive for experiments whose manifest row names none.
    #[arg(long)]
    pub archive: Option<PathBuf>,
    /// Bounds file listing the calibrated subset (from `reduce`).
    #[arg(long)]
    pub reduced: Option<PathBuf>,
    /// Parameters replicated per experiment.
    #[arg(long, value_delimiter = ',')]
    pub shared: Vec<String>,
}

pub struct Problem {
    pub full: Arc<Space>,
    pub calibrated: Space,
    pub sets: Vec<DataSet>,
    pub families: Vec<Family>,
    pub inputs: Vec<PathBuf>,
}

impl ProblemArgs {
    pub fn load(&self) -> Result<Problem, CliError> {
        let full = Arc::new(Space::load(&self.bounds).stage("bounds")?);
        let manifest = ExperimentManifest::load(&self.manifest).stage("manifest")?;
        let sets: Vec<DataSet> = manifest.load_sets().stage("data")?;
        let mut inputs = vec![self.manifest.clone(), self.bounds.clone()];
        let mut families = Vec::new();
        for e in &manifest.entries {
            let path = e
                .archive
                .clone()
                .or_else(|| self.archive.clone())
                .ok_or_else(|| CliError::Usage(format!("experiment {} has no surrogate archive", e.id)))?;
            families.push(Archive::load(&path, full.clone()).stage("archive")?.family);
            inputs.push(e.path.clone());
            inputs.push(path);
        }
        let base = match &self.reduced {
            Some(p) => {
                inputs.push(p.clone());
                let r = Space::load(p).stage("reduced bounds")?;
                if let Some(e) = r.entries().iter().find(|e| full.index_of(&e.name).is_none()) {
                    return Err(CliError::Usage(format!(
                        "reduced parameter '{}' is not in {}",
                        e.name,
                        self.bounds.display()
                    )));
                }
                r
            }
            None => full.as_ref().clone(),
        };
        let shared: Vec<&str> = self.shared.iter().map(String::as_str).collect();
        let ids: Vec<u32> = manifest.entries.iter().map(|e| e.id).collect();
        let calibrated = experiment_specific_copies(&base, &shared, &ids).stage("parameter copies")?.space;
        Ok(Problem {
            full,
            calibrated,
            sets,
            families,
            inputs,
        })
    }
}

impl Problem {
    pub fn experiments(&self, space: DataSpace) -> Result<Vec<Experiment<f64>>, CliError> {
        self.sets
            .iter()
            .zip(&self.families)
            .map(|(set, fam)| {
                let binding = Binding::by_names(&self.full, &self.calibrated, Some(set.id()));
                let p = SurrogatePredictor::for_set(fam, set, binding).stage("predictor")?;
                Experiment::new(set.clone(), Arc::new(p), space).stage("data space")
            })
            .collect()
    }
}

/// `path` relative to `base` when it lies inside it.
pub fn display_relative(path: &Path, base: &Path) -> String {
    path.strip_prefix(base).unwrap_or(path).display().to_string()
}
