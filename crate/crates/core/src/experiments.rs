//! Experiment protocols built from the ensemble engine and the analyses:
//! steady-state sweeps, escape-time and flight-time runs, and trapping-time sweeps.
//!
//! Sweeps never abort on a failed point; the error is kept with the point.

use serde::{Deserialize, Serialize};

use crate::ensemble::{run_stats, simulate, Control, EnsembleConfig, InitialCondition};
use crate::error::{Error, Result};
use crate::observables::{photon_number, position_distribution, temperature, EnsembleStats, Estimate, PositionDistribution};
use crate::params::{ModeFunction, SystemParams};
use crate::sde::{Model, StepDiagnostics};
use crate::trapping::{
    above_barrier_fraction, escape_time_distribution, flight_time_distribution, run_escape_times, EscapeAnalysis,
    EscapeOptions, FlightAnalysis, FlightBuilder, FlightOptions, FlightRecord, WellLattice,
};

/// Ensemble and accumulator settings for a steady-state measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateSetup {
    pub ensemble: EnsembleConfig,
    pub initial: InitialCondition,
    pub position_bins: usize,
    /// Number of post-burn-in windows for the stationarity check.
    pub n_windows: usize,
}

impl SteadyStateSetup {
    pub fn new(ensemble: EnsembleConfig) -> Self {
        SteadyStateSetup { ensemble, initial: InitialCondition::ground_state(0), position_bins: 64, n_windows: 4 }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub params: SystemParams,
    /// `k_B T / ħγ`
    pub temperature: Estimate,
    pub photons: Estimate,
    /// `T / (U₀⟨n⟩)`
    pub t_over_potential: f64,
    pub psd_violation_rate: f64,
    /// `None` if too few samples were collected.
    pub position: Option<PositionDistribution>,
    /// The last two windows of `⟨p²⟩` agree within three combined standard errors.
    pub stationary: bool,
    pub aborted: usize,
    pub stats: EnsembleStats,
}

pub fn steady_state(params: &SystemParams, setup: &SteadyStateSetup) -> Result<SteadyState> {
    params.validate()?;
    let model = Model::standing_wave(*params);
    let lattice = WellLattice::for_light_shift(model.derived.u0);
    let layout = setup.ensemble.stats_layout(&lattice, setup.n_windows.max(1), setup.position_bins);
    let run = run_stats(&setup.ensemble, &setup.initial, &model, layout)?;
    if run.stats.trajectories == 0 {
        return Err(run.aborted.into_iter().next().unwrap_or_else(|| Error::InsufficientData("no trajectories".into())));
    }
    let t = temperature(&run.stats, params.epsilon_recoil)?;
    let n = photon_number(&run.stats)?;
    Ok(SteadyState {
        params: *params,
        temperature: t,
        photons: n,
        t_over_potential: t.value / (model.derived.u0 * n.value),
        psd_violation_rate: run.stats.diagnostics.violation_rate(),
        position: position_distribution(&run.stats).ok(),
        stationary: is_stationary(&run.stats.window_p2()),
        aborted: run.aborted.len(),
        stats: run.stats,
    })
}

/// Compare the last two populated windows.
pub fn is_stationary(windows: &[Estimate]) -> bool {
    let w: Vec<&Estimate> = windows.iter().filter(|e| e.value.is_finite() && e.std_error.is_finite()).collect();
    match w.as_slice() {
        [.., a, b] => (a.value - b.value).abs() < 3.0 * a.std_error.hypot(b.std_error),
        _ => false,
    }
}

/// One grid point of a sweep; a failure is recorded and the sweep continues.
#[derive(Debug, Clone)]
pub struct SweepPoint<T> {
    pub value: f64,
    pub result: Result<T>,
}

/// Steady state versus κ with `η = eta_over_kappa · κ`.
pub fn sweep_kappa(base: &SystemParams, kappas: &[f64], eta_over_kappa: f64, setup: &SteadyStateSetup) -> Vec<SweepPoint<SteadyState>> {
    kappas
        .iter()
        .map(|&kappa| {
            let p = SystemParams { kappa, eta: eta_over_kappa * kappa, ..*base };
            SweepPoint { value: kappa, result: steady_state(&p, setup) }
        })
        .collect()
}

/// Steady state versus the pump `η` at fixed κ.
pub fn sweep_eta(base: &SystemParams, etas: &[f64], setup: &SteadyStateSetup) -> Vec<SweepPoint<SteadyState>> {
    etas.iter()
        .map(|&eta| SweepPoint { value: eta, result: steady_state(&SystemParams { eta, ..*base }, setup) })
        .collect()
}

/// Settings for the escape-time protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeSetup {
    /// `t_total` caps the waiting time; burn-in is ignored.
    pub ensemble: EnsembleConfig,
    pub options: EscapeOptions,
    pub well: i64,
}

#[derive(Debug, Clone)]
pub struct EscapeRun {
    pub params: SystemParams,
    /// First-exit times in `1/γ`.
    pub taus: Vec<f64>,
    pub analysis: EscapeAnalysis,
}

pub fn escape_run(params: &SystemParams, setup: &EscapeSetup) -> Result<EscapeRun> {
    params.validate()?;
    let model = Model::standing_wave(*params);
    let exits = run_escape_times(&model, &setup.ensemble, setup.well)?;
    let taus: Vec<f64> = exits.iter().flatten().copied().collect();
    let censored = exits.len() - taus.len();
    let analysis = escape_time_distribution(&taus, censored, params, &setup.options);
    Ok(EscapeRun { params: *params, taus, analysis })
}

/// Escape-time trapping time versus κ at fixed `η/κ`.
pub fn trap_time_sweep_kappa(base: &SystemParams, kappas: &[f64], eta_over_kappa: f64, setup: &EscapeSetup) -> Vec<SweepPoint<EscapeRun>> {
    kappas
        .iter()
        .map(|&kappa| {
            let p = SystemParams { kappa, eta: eta_over_kappa * kappa, ..*base };
            SweepPoint { value: kappa, result: escape_run(&p, setup) }
        })
        .collect()
}

/// Escape-time trapping time versus `η` at fixed κ.
pub fn trap_time_sweep_eta(base: &SystemParams, etas: &[f64], setup: &EscapeSetup) -> Vec<SweepPoint<EscapeRun>> {
    etas.iter()
        .map(|&eta| SweepPoint { value: eta, result: escape_run(&SystemParams { eta, ..*base }, setup) })
        .collect()
}

/// Settings for the single-trajectory flight-time protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightSetup {
    /// Only trajectory 0 is run; flights are recorded after the burn-in.
    pub ensemble: EnsembleConfig,
    pub initial: InitialCondition,
    pub options: FlightOptions,
    pub n_windows: usize,
}

#[derive(Debug, Clone)]
pub struct FlightRun {
    pub params: SystemParams,
    pub record: FlightRecord,
    pub analysis: FlightAnalysis,
    pub temperature: Estimate,
    pub photons: Estimate,
    /// `U₀⟨n⟩`
    pub depth: f64,
    /// Share of a thermal ensemble at the measured temperature above the barrier.
    pub above_barrier_fraction: f64,
    pub diagnostics: StepDiagnostics,
}

pub fn flight_run(params: &SystemParams, setup: &FlightSetup) -> Result<FlightRun> {
    params.validate()?;
    let model = Model::standing_wave(*params);
    let lattice = WellLattice::for_light_shift(model.derived.u0);
    let cfg = EnsembleConfig { n_trajectories: 1, ..setup.ensemble };
    let burnin = cfg.burnin_steps() as f64 * cfg.dt;
    let mut builder = FlightBuilder::new(lattice);
    let mut stats = EnsembleStats::new(cfg.stats_layout(&lattice, setup.n_windows.max(2), 64));
    let mut err = None;
    let out = simulate(&model, &setup.initial, &cfg, 0, |t, s| {
        if let Err(e) = builder.push(t, s.x) {
            err = Some(e);
            return Control::Stop;
        }
        stats.record(t - burnin, s, model.mode.eval(s.x).0.powi(2));
        Control::Continue
    })?;
    if let Some(e) = err.or(out.aborted) {
        return Err(e);
    }
    stats.finish_trajectory(&out.diagnostics);
    let record = builder.finish();
    let analysis = flight_time_distribution(&record, params, &setup.options);
    let t = temperature(&stats, params.epsilon_recoil)?;
    let n = photon_number(&stats)?;
    let depth = model.derived.u0 * n.value;
    Ok(FlightRun {
        params: *params,
        record,
        analysis,
        temperature: t,
        photons: n,
        depth,
        above_barrier_fraction: above_barrier_fraction(depth, t.value)?,
        diagnostics: out.diagnostics,
    })
}
