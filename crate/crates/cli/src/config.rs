use std::path::{Path, PathBuf};

use cavsim_core::ensemble::{EnsembleConfig, InitialCondition};
use cavsim_core::trapping::{BaselineOptions, EscapeOptions, FlightOptions};
use cavsim_core::SystemParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SingleRun,
    SweepKappa,
    SweepEta,
    EscapeTimes,
    FlightTimes,
    Baseline,
}

/// Sweep grids. `kappa` sweeps tie `η` to `κ` through `eta_over_kappa`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub kappa: Option<Vec<f64>>,
    pub eta: Option<Vec<f64>>,
    pub eta_over_kappa: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub position_bins: usize,
    pub n_windows: usize,
    /// Well the escape-time ensemble starts in.
    pub well: i64,
    pub tau_min_us: f64,
    pub onset_bin_us: f64,
    pub short_range_us: f64,
    pub short_bins: usize,
    pub cutoff_us: Option<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let e = EscapeOptions::default();
        let f = FlightOptions::default();
        AnalysisConfig {
            position_bins: 64,
            n_windows: 4,
            well: 0,
            tau_min_us: e.tau_min_us,
            onset_bin_us: e.onset_bin_us,
            short_range_us: f.short_range_us,
            short_bins: f.short_bins,
            cutoff_us: None,
        }
    }
}

impl AnalysisConfig {
    pub fn escape(&self) -> EscapeOptions {
        EscapeOptions { tau_min_us: self.tau_min_us, onset_bin_us: self.onset_bin_us }
    }

    pub fn flight(&self) -> FlightOptions {
        FlightOptions {
            tau_min_us: self.tau_min_us,
            short_range_us: self.short_range_us,
            short_bins: self.short_bins,
            cutoff_us: self.cutoff_us,
        }
    }
}

/// Conservative comparison run. Without `k_bt` and `photons` both are
/// measured first with a steady-state run of the `[ensemble]` block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub k_bt: Option<f64>,
    pub photons: Option<f64>,
    pub n_atoms: usize,
    pub t_observe: f64,
    pub dt: f64,
    pub sample_interval: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        let b = BaselineOptions::default();
        BaselineConfig { k_bt: None, photons: None, n_atoms: b.n_atoms, t_observe: b.t_observe, dt: b.dt, sample_interval: b.sample_interval }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_initial() -> InitialCondition {
    InitialCondition::ground_state(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub plot: bool,
    #[serde(default)]
    pub system: SystemParams,
    pub ensemble: EnsembleConfig,
    #[serde(default = "default_initial")]
    pub initial: InitialCondition,
    #[serde(default)]
    pub sweep: SweepGrid,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.ensemble.master_seed = s;
        }
        if let Some(w) = o.workers {
            self.ensemble.workers = w;
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
    }

    /// The fully resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.ensemble.validate()?;
        if self.ensemble.n_trajectories == 0 {
            return Err(CliError::Config("n_trajectories must be positive".into()));
        }
        let grid = |name: &str, g: &Option<Vec<f64>>| -> Result<(), CliError> {
            match g {
                Some(v) => check_grid(name, v),
                None => Ok(()),
            }
        };
        grid("sweep.kappa", &self.sweep.kappa)?;
        grid("sweep.eta", &self.sweep.eta)?;
        let need = |what: &str| CliError::Config(format!("{:?} needs {what}", self.experiment));
        match self.experiment {
            ExperimentKind::SweepKappa => {
                if self.sweep.kappa.is_none() || self.sweep.eta_over_kappa.is_none() {
                    return Err(need("sweep.kappa and sweep.eta_over_kappa"));
                }
            }
            ExperimentKind::SweepEta => {
                if self.sweep.eta.is_none() {
                    return Err(need("sweep.eta"));
                }
            }
            ExperimentKind::EscapeTimes => {
                if self.sweep.kappa.is_some() && self.sweep.eta.is_some() {
                    return Err(CliError::Config("escape-time sweeps take either a kappa or an eta grid".into()));
                }
                if self.sweep.kappa.is_some() && self.sweep.eta_over_kappa.is_none() {
                    return Err(need("sweep.eta_over_kappa with a kappa grid"));
                }
            }
            _ => {}
        }
        // grid points are checked as they run; the base point must be valid for the others
        if !matches!(self.experiment, ExperimentKind::SweepKappa | ExperimentKind::SweepEta) {
            self.system.validate()?;
        }
        if self.analysis.n_windows == 0 || self.analysis.position_bins == 0 || self.analysis.short_bins == 0 {
            return Err(CliError::Config("analysis bin and window counts must be positive".into()));
        }
        if let Some(c) = self.analysis.cutoff_us {
            if !(c > 0.0) {
                return Err(CliError::Config("analysis.cutoff_us must be positive".into()));
            }
        }
        Ok(())
    }
}

fn check_grid(name: &str, v: &[f64]) -> Result<(), CliError> {
    if v.is_empty() {
        return Err(CliError::Config(format!("{name} is empty")));
    }
    if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config(format!("{name} must be strictly increasing")));
    }
    Ok(())
}
