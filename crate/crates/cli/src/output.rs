//! CSV files with a commented header holding the resolved configuration.
//!
//! Every file starts with `# ` lines: program version, experiment, master
//! seed and the full configuration as TOML. Then comes one header row and
//! the data rows. Rows are flushed as they are written so that a failed run
//! leaves everything produced so far on disk.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use cavsim_core::histogram::Histogram;

use crate::{CliError, RunConfig};

pub mod schema {
    pub const SINGLE_RUN: &[&str] = &[
        "kappa", "eta", "T", "T_err", "T_uK", "n_mean", "n_err", "T_over_potential", "psd_violation_rate", "stationary",
        "aborted", "ks_distance", "ks_critical_99",
    ];
    pub const WINDOWS: &[&str] = &["window", "t_start", "t_end", "T", "T_err"];
    pub const POSITION: &[&str] = &["x", "density", "thermal_density"];
    pub const SWEEP_KAPPA: &[&str] =
        &["kappa", "eta", "T", "T_err", "n_mean", "T_over_potential", "psd_violation_rate", "stationary", "error"];
    pub const SWEEP_ETA: &[&str] = &["eta", "T", "T_err", "n_mean", "ratio", "psd_violation_rate", "stationary", "error"];
    pub const POSITIONS_ETA: &[&str] = &["eta", "x", "density", "thermal_density"];
    pub const ESCAPE_SUMMARY: &[&str] = &[
        "kappa", "eta", "escaped", "censored", "T_trap_us", "T_trap_err_us", "T_trap_mle_us", "tau_min_us", "r_squared",
        "events_in_tail", "bins_used", "onset_ratio", "error",
    ];
    pub const TAU_HISTOGRAM: &[&str] = &["kappa", "eta", "tau_lo_us", "tau_hi_us", "tau_us", "count", "density_per_us"];
    pub const FLIGHT_SUMMARY: &[&str] = &[
        "kappa", "eta", "observed_us", "flights", "T", "T_err", "n_mean", "depth", "above_barrier_fraction",
        "first_max_us", "minimum_us", "second_max_us", "cutoff_us", "untrapped_fraction", "trapped_fraction",
        "T_trap_us", "T_trap_err_us", "T_trap_mle_us", "r_squared", "events_in_tail", "psd_violation_rate", "error",
    ];
    pub const BASELINE_SUMMARY: &[&str] =
        &["k_bt", "photons", "depth", "above_barrier_fraction", "moving_fraction", "flights", "shortest_flight_us"];
}

pub fn comment_header(cfg: &RunConfig) -> String {
    let mut s = format!("# cavsim {}\n", env!("CARGO_PKG_VERSION"));
    s += &format!("# master_seed = {}\n", cfg.ensemble.master_seed);
    s += "# resolved configuration:\n";
    for line in cfg.to_toml().lines() {
        s += &format!("#   {line}\n");
    }
    s
}

pub struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<File>,
    columns: usize,
}

impl CsvOut {
    pub fn create(dir: &Path, name: &str, header: &str, columns: &[&str]) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(name);
        let mut file = File::create(&path)?;
        file.write_all(header.as_bytes())?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(columns)?;
        writer.flush()?;
        Ok(CsvOut { path, writer, columns: columns.len() })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        assert_eq!(fields.len(), self.columns, "row width does not match the schema of {}", self.path.display());
        self.writer.write_record(fields)?;
        self.writer.flush()?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Write the bins of a histogram in `1/γ` as μs rows with leading sweep columns.
pub fn tau_rows(out: &mut CsvOut, lead: &[String], h: &Histogram, micros_per_unit: f64) -> Result<(), CliError> {
    let total = h.total().max(1) as f64;
    for i in 0..h.bins() {
        let (lo, hi) = (h.edges()[i] * micros_per_unit, h.edges()[i + 1] * micros_per_unit);
        let c = h.counts()[i];
        let mut row = lead.to_vec();
        row.extend([num(lo), num(hi), num(h.center(i) * micros_per_unit), c.to_string(), num(c as f64 / (total * (hi - lo)))]);
        out.row(&row)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_numbers_are_blank() {
        assert_eq!(num(f64::NAN), "");
        assert_eq!(num(0.25), "0.25");
        assert_eq!(opt(None), "");
    }
}
