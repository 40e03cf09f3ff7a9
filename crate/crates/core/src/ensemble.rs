//! Independent trajectory ensembles.
//!
//! Trajectory `i` is a pure function of `(model, initial condition, config, i)`:
//! its random stream is keyed by `(master_seed, i)` and per-trajectory results
//! are combined in index order. Results therefore do not depend on the number
//! of worker threads.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{EnsembleStats, StatsLayout};
use crate::params::ModeFunction;
use crate::rng::{trajectory_rng, TrajectoryRng};
use crate::sde::{pinned_field_at, Model, PhaseState, StepDiagnostics};
use crate::trapping::{Crossing, CrossingDetector, WellLattice};

/// Initial motional state of the atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AtomInit {
    /// Wigner function of the harmonic ground state of well `well`.
    HarmonicGroundState {
        #[serde(default)]
        well: i64,
    },
    /// Boltzmann distribution at `k_bt` (units of `ħγ`) in the static
    /// potential of well `well`; `confined` keeps only sub-barrier energies.
    Thermal {
        k_bt: f64,
        #[serde(default)]
        confined: bool,
        #[serde(default)]
        well: i64,
    },
    Point { x: f64, p: f64 },
}

/// Initial cavity field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldInit {
    /// Stationary field of the empty cavity.
    EmptyCavity,
    /// Stationary field for the atom pinned at its initial position.
    #[default]
    FixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub atom: AtomInit,
    #[serde(default)]
    pub field: FieldInit,
}

impl InitialCondition {
    pub fn ground_state(well: i64) -> Self {
        InitialCondition { atom: AtomInit::HarmonicGroundState { well }, field: FieldInit::FixedPoint }
    }

    pub fn point(x: f64, p: f64) -> Self {
        InitialCondition { atom: AtomInit::Point { x, p }, field: FieldInit::FixedPoint }
    }
}

/// Harmonic approximation of one potential well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellShape {
    /// Position of the minimum.
    pub center: f64,
    /// Photon number of the pinned-atom field at the minimum.
    pub photons: f64,
    /// Barrier height `|U₀|⟨n⟩` in units of `ħγ`.
    pub depth: f64,
    /// Oscillation frequency `√(2ε|U₀|⟨n⟩)` in units of `γ`.
    pub omega: f64,
    pub sigma_x: f64,
    pub sigma_p: f64,
}

/// Harmonic ground-state widths of well `well`.
///
/// Fails when the light shift or the photon number vanish, since there is no
/// confining well then.
pub fn well_shape<M: ModeFunction>(model: &Model<M>, well: i64) -> Result<WellShape> {
    let u0 = model.derived.u0;
    if u0 == 0.0 {
        return Err(Error::config("no light shift (U0 = 0): the standing wave does not confine the atom"));
    }
    let lattice = WellLattice::for_light_shift(u0);
    let center = lattice.well_center(well);
    let (f, _) = model.mode.eval(center);
    let (ar, ai) = pinned_field_at(f * f, &model.params, &model.derived);
    let photons = ar * ar + ai * ai;
    let depth = u0.abs() * photons;
    if !(depth > 0.0) {
        return Err(Error::config("no intracavity photons at the well minimum: the potential does not confine"));
    }
    let eps = model.params.epsilon_recoil;
    // curvature of cos² at its extrema is ±2
    let omega = (2.0 * eps * depth).sqrt();
    Ok(WellShape {
        center,
        photons,
        depth,
        omega,
        sigma_x: (eps / (2.0 * omega)).sqrt(),
        sigma_p: (omega / (2.0 * eps)).sqrt(),
    })
}

const THERMAL_MAX_ATTEMPTS: usize = 1_000_000;

/// Draw an initial phase-space point.
pub fn sample_initial<M: ModeFunction, R: Rng + ?Sized>(
    ic: &InitialCondition,
    model: &Model<M>,
    rng: &mut R,
) -> Result<PhaseState> {
    let (x, p) = match ic.atom {
        AtomInit::Point { x, p } => (x, p),
        AtomInit::HarmonicGroundState { well } => {
            let w = well_shape(model, well)?;
            let zx: f64 = rng.sample(StandardNormal);
            let zp: f64 = rng.sample(StandardNormal);
            (w.center + w.sigma_x * zx, w.sigma_p * zp)
        }
        AtomInit::Thermal { k_bt, confined, well } => sample_thermal(model, k_bt, confined, well, rng)?,
    };
    let f2 = match ic.field {
        FieldInit::EmptyCavity => 0.0,
        FieldInit::FixedPoint => model.mode.eval(x).0.powi(2),
    };
    let (alpha_r, alpha_i) = pinned_field_at(f2, &model.params, &model.derived);
    Ok(PhaseState { x, p, alpha_r, alpha_i })
}

fn sample_thermal<M: ModeFunction, R: Rng + ?Sized>(
    model: &Model<M>,
    k_bt: f64,
    confined: bool,
    well: i64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let u0 = model.derived.u0;
    let lattice = WellLattice::for_light_shift(u0);
    let (f, _) = model.mode.eval(lattice.well_center(well));
    let (ar, ai) = pinned_field_at(f * f, &model.params, &model.derived);
    sample_boltzmann(u0 * (ar * ar + ai * ai), k_bt, model.params.epsilon_recoil, &lattice, well, confined, rng)
}

/// Draw `(x̃, p̃)` from `exp(−(ε p̃²/2 + A cos²x̃)/k_BT)` restricted to well `well`.
///
/// With `confined` only energies below the barrier are kept.
pub fn sample_boltzmann<R: Rng + ?Sized>(
    amplitude: f64,
    k_bt: f64,
    eps: f64,
    lattice: &WellLattice,
    well: i64,
    confined: bool,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if !(k_bt > 0.0) {
        return Err(Error::config("thermal initial condition needs a positive temperature"));
    }
    let (vmin, vmax) = (amplitude.min(0.0), amplitude.max(0.0));
    let sigma_p = (k_bt / eps).sqrt();
    let center = lattice.well_center(well);
    let half = 0.5 * lattice.period();
    for _ in 0..THERMAL_MAX_ATTEMPTS {
        let x = center + rng.gen_range(-half..half);
        let v = amplitude * x.cos().powi(2);
        if rng.gen::<f64>() >= (-(v - vmin) / k_bt).exp() {
            continue;
        }
        let z: f64 = rng.sample(StandardNormal);
        let p = sigma_p * z;
        if confined && 0.5 * eps * p * p + v >= vmax {
            continue;
        }
        return Ok((x, p));
    }
    Err(Error::config("could not draw a confined thermal state; temperature too high for the well depth"))
}

/// Run length, sampling and seeding of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_trajectories: usize,
    /// Total simulated time per trajectory, burn-in included (`1/γ`).
    pub t_total: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_burnin")]
    pub t_burnin: f64,
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    #[serde(default)]
    pub master_seed: u64,
    /// Worker threads; 0 picks the number of cores.
    #[serde(default)]
    pub workers: usize,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_burnin() -> f64 {
    200.0
}
fn default_sample_interval() -> f64 {
    0.5
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_trajectories: 100,
            t_total: 2000.0,
            dt: default_dt(),
            t_burnin: default_burnin(),
            sample_interval: default_sample_interval(),
            master_seed: 0,
            workers: 0,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt must be positive"));
        }
        if !(self.t_total > 0.0 && self.t_total.is_finite()) {
            return Err(Error::config("t_total must be positive"));
        }
        if !(self.t_burnin >= 0.0 && self.t_burnin < self.t_total) {
            return Err(Error::config("t_burnin must lie in [0, t_total)"));
        }
        if !(self.sample_interval >= self.dt) {
            return Err(Error::config("sample_interval must be at least dt"));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> u64 {
        (self.t_total / self.dt).round() as u64
    }

    pub fn burnin_steps(&self) -> u64 {
        (self.t_burnin / self.dt).round() as u64
    }

    /// Steps between samples.
    pub fn stride(&self) -> u64 {
        ((self.sample_interval / self.dt).round() as u64).max(1)
    }

    /// Stats layout with `n_windows` equal windows over the post-burn-in span.
    pub fn stats_layout(&self, lattice: &WellLattice, n_windows: usize, position_bins: usize) -> StatsLayout {
        StatsLayout {
            position_bins,
            fold_origin: lattice.offset(),
            period: lattice.period(),
            window: (self.t_total - self.t_burnin) / n_windows.max(1) as f64,
            n_windows,
        }
    }
}

/// Verdict of a sample observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// How a single trajectory ended.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub final_state: PhaseState,
    /// Time of the last completed step.
    pub t_end: f64,
    pub diagnostics: StepDiagnostics,
    /// Set if the state became non-finite.
    pub aborted: Option<Error>,
    pub stopped_early: bool,
}

/// Integrate trajectory `index` and hand every post-burn-in sample to `observe`.
///
/// Samples are taken at step counts `burnin + j·stride` with times `step·dt`.
pub fn simulate<M: ModeFunction>(
    model: &Model<M>,
    ic: &InitialCondition,
    config: &EnsembleConfig,
    index: usize,
    observe: impl FnMut(f64, &PhaseState) -> Control,
) -> Result<Outcome> {
    let mut rng = trajectory_rng(config.master_seed, index as u64);
    let init = sample_initial(ic, model, &mut rng)?;
    Ok(simulate_from(model, init, config, index, &mut rng, observe))
}

/// Integrate from a given state with a caller-owned stream.
pub fn simulate_from<M: ModeFunction>(
    model: &Model<M>,
    init: PhaseState,
    config: &EnsembleConfig,
    index: usize,
    rng: &mut TrajectoryRng,
    mut observe: impl FnMut(f64, &PhaseState) -> Control,
) -> Outcome {
    let dt = config.dt;
    let total = config.total_steps();
    let burnin = config.burnin_steps();
    let stride = config.stride();
    let mut diag = StepDiagnostics::default();
    let mut s = init;
    let mut step = 0u64;
    let mut next_sample = burnin;
    loop {
        if step == next_sample {
            next_sample += stride;
            if observe(step as f64 * dt, &s) == Control::Stop {
                return Outcome { final_state: s, t_end: step as f64 * dt, diagnostics: diag, aborted: None, stopped_early: true };
            }
        }
        if step == total {
            break;
        }
        match model.step(&s, dt, rng, &mut diag) {
            Some(n) => s = n,
            None => {
                return Outcome {
                    final_state: s,
                    t_end: step as f64 * dt,
                    diagnostics: diag,
                    aborted: Some(Error::NonFinite { index, step: step + 1, time: (step + 1) as f64 * dt }),
                    stopped_early: false,
                }
            }
        }
        step += 1;
    }
    Outcome { final_state: s, t_end: total as f64 * dt, diagnostics: diag, aborted: None, stopped_early: false }
}

/// Evaluate `job(i)` for `i in 0..n` on `workers` threads, results in index order.
pub fn par_map<T: Send>(n: usize, workers: usize, job: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    if n == 0 {
        return Vec::new();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build();
    match pool {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&job).collect()),
        Err(_) => (0..n).map(job).collect(),
    }
}

/// One sampled point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: PhaseState,
}

/// Sampled time series and events of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub index: usize,
    pub master_seed: u64,
    pub samples: Vec<Sample>,
    /// Well-boundary crossings found between consecutive samples.
    pub crossings: Vec<Crossing>,
    pub diagnostics: StepDiagnostics,
    pub aborted: Option<Error>,
}

/// Full records for every trajectory of an ensemble.
pub fn run_ensemble<M: ModeFunction>(
    config: &EnsembleConfig,
    ic: &InitialCondition,
    model: &Model<M>,
) -> Result<Vec<TrajectoryRecord>> {
    config.validate()?;
    model.params.validate()?;
    let lattice = WellLattice::for_light_shift(model.derived.u0);
    let runs = par_map(config.n_trajectories, config.workers, |i| {
        let mut samples = Vec::new();
        let mut detector = CrossingDetector::new(lattice);
        let mut crossings = Vec::new();
        let mut coarse = None;
        let out = simulate(model, ic, config, i, |t, s| {
            samples.push(Sample { t, state: *s });
            match detector.push(t, s.x) {
                Ok(Some(c)) => crossings.push(c),
                Ok(None) => {}
                Err(e) => {
                    coarse.get_or_insert(e);
                }
            }
            Control::Continue
        })?;
        if let Some(e) = coarse {
            return Err(e);
        }
        Ok(TrajectoryRecord {
            index: i,
            master_seed: config.master_seed,
            samples,
            crossings,
            diagnostics: out.diagnostics,
            aborted: out.aborted,
        })
    });
    runs.into_iter().collect()
}

/// Pooled statistics of an ensemble plus any aborted trajectories.
#[derive(Debug, Clone)]
pub struct StatsRun {
    pub stats: EnsembleStats,
    /// Aborted trajectories; their samples are not in `stats`.
    pub aborted: Vec<Error>,
}

/// Accumulate post-burn-in samples of every trajectory without storing them.
pub fn run_stats<M: ModeFunction>(
    config: &EnsembleConfig,
    ic: &InitialCondition,
    model: &Model<M>,
    layout: StatsLayout,
) -> Result<StatsRun> {
    config.validate()?;
    model.params.validate()?;
    let burnin_time = config.burnin_steps() as f64 * config.dt;
    let parts = par_map(config.n_trajectories, config.workers, |i| {
        let mut stats = EnsembleStats::new(layout);
        let out = simulate(model, ic, config, i, |t, s| {
            let f2 = model.mode.eval(s.x).0.powi(2);
            stats.record(t - burnin_time, s, f2);
            Control::Continue
        })?;
        stats.finish_trajectory(&out.diagnostics);
        Ok::<_, Error>((stats, out.aborted))
    });
    let mut total = EnsembleStats::new(layout);
    let mut aborted = Vec::new();
    for part in parts {
        let (stats, abort) = part?;
        match abort {
            Some(e) => aborted.push(e),
            None => total.merge(&stats),
        }
    }
    Ok(StatsRun { stats: total, aborted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SystemParams;
    use crate::sde::{DynamicsOptions, Scheme};
    use std::f64::consts::FRAC_PI_2;

    fn model() -> Model {
        Model::standing_wave(SystemParams::default())
    }

    #[test]
    fn point_initial_condition_is_exact() {
        let m = model();
        let mut rng = trajectory_rng(0, 0);
        let s = sample_initial(&InitialCondition::point(FRAC_PI_2, 0.0), &m, &mut rng).unwrap();
        assert_eq!((s.x, s.p), (FRAC_PI_2, 0.0));
        let (ar, ai) = m.pinned_field(FRAC_PI_2);
        assert_eq!((s.alpha_r, s.alpha_i), (ar, ai));
    }

    #[test]
    fn harmonic_widths_are_minimum_uncertainty() {
        let params = SystemParams { eta: 1.5, ..SystemParams::default() };
        let w = well_shape(&Model::standing_wave(params), 0).unwrap();
        assert!((w.sigma_x * w.sigma_p - 0.5).abs() < 1e-14);
        assert!((w.photons - 9.0).abs() < 1e-12);
        assert!((w.omega - (2.0 * 2.514e-3 * (125.0 / 401.0) * 9.0f64).sqrt()).abs() < 1e-12);
        assert!((w.omega - 0.1188).abs() < 1e-4);
        assert!((w.center - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn red_detuned_wells_sit_at_antinodes() {
        let params = SystemParams { delta_a: -20.0, delta_c: 125.0 / 401.0 * -1.0, ..SystemParams::default() };
        let w = well_shape(&Model::standing_wave(params), 0).unwrap();
        assert!(w.center.abs() < 1e-15 || (w.center - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn ground_state_sample_moments() {
        let m = model();
        let w = well_shape(&m, 0).unwrap();
        let mut rng = trajectory_rng(9, 0);
        let ic = InitialCondition::ground_state(0);
        let n = 40_000;
        let (mut sx, mut sp) = (0.0, 0.0);
        for _ in 0..n {
            let s = sample_initial(&ic, &m, &mut rng).unwrap();
            sx += (s.x - w.center).powi(2);
            sp += s.p * s.p;
        }
        let (vx, vp) = (sx / n as f64, sp / n as f64);
        // relative standard error of a variance estimate is √(2/n) ≈ 0.7%
        assert!((vx / w.sigma_x.powi(2) - 1.0).abs() < 0.04);
        assert!((vp / w.sigma_p.powi(2) - 1.0).abs() < 0.04);
    }

    #[test]
    fn non_confining_parameters_are_rejected() {
        let mut rng = trajectory_rng(0, 0);
        let ic = InitialCondition::ground_state(0);
        let no_light_shift = Model::standing_wave(SystemParams { g: 0.0, ..SystemParams::default() });
        assert!(matches!(sample_initial(&ic, &no_light_shift, &mut rng), Err(Error::Config(_))));
        let undriven = Model::standing_wave(SystemParams { eta: 0.0, ..SystemParams::default() });
        assert!(matches!(sample_initial(&ic, &undriven, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn confined_thermal_states_stay_below_barrier() {
        let m = model();
        let w = well_shape(&m, 2).unwrap();
        let ic = InitialCondition {
            atom: AtomInit::Thermal { k_bt: 1.0, confined: true, well: 2 },
            field: FieldInit::FixedPoint,
        };
        let mut rng = trajectory_rng(4, 0);
        for _ in 0..2000 {
            let s = sample_initial(&ic, &m, &mut rng).unwrap();
            let e = 0.5 * m.params.epsilon_recoil * s.p * s.p + w.depth * s.x.cos().powi(2);
            assert!(e < w.depth);
            assert!((s.x - w.center).abs() <= FRAC_PI_2);
        }
    }

    #[test]
    fn config_validation() {
        let ok = EnsembleConfig::default();
        assert!(ok.validate().is_ok());
        assert!(EnsembleConfig { t_burnin: 3000.0, ..ok }.validate().is_err());
        assert!(EnsembleConfig { sample_interval: 1e-4, ..ok }.validate().is_err());
        assert!(EnsembleConfig { dt: 0.0, ..ok }.validate().is_err());
    }

    fn small_config(seed: u64) -> EnsembleConfig {
        EnsembleConfig {
            n_trajectories: 6,
            t_total: 20.0,
            dt: 1e-2,
            t_burnin: 5.0,
            sample_interval: 0.5,
            master_seed: seed,
            workers: 1,
        }
    }

    #[test]
    fn empty_ensemble_is_fine() {
        let cfg = EnsembleConfig { n_trajectories: 0, ..small_config(1) };
        let recs = run_ensemble(&cfg, &InitialCondition::ground_state(0), &model()).unwrap();
        assert!(recs.is_empty());
    }

    #[test]
    fn records_are_reproducible_and_worker_independent() {
        let ic = InitialCondition::ground_state(0);
        let m = model();
        let a = run_ensemble(&small_config(5), &ic, &m).unwrap();
        let b = run_ensemble(&EnsembleConfig { workers: 3, ..small_config(5) }, &ic, &m).unwrap();
        assert_eq!(a, b);
        let c = run_ensemble(&small_config(6), &ic, &m).unwrap();
        assert_ne!(a[0].samples, c[0].samples);

        let r = &a[0];
        assert_eq!(r.samples.len(), 31);
        assert!((r.samples[0].t - 5.0).abs() < 1e-12);
        assert!(r.samples.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn aborted_trajectories_are_reported() {
        let params = SystemParams { kappa: 1e300, ..SystemParams::default() };
        let m = Model::standing_wave(params)
            .with_options(DynamicsOptions { scheme: Scheme::SemiImplicit, noise: false, frozen_field: false });
        let ic = InitialCondition { atom: AtomInit::Point { x: 0.3, p: 0.0 }, field: FieldInit::EmptyCavity };
        let cfg = EnsembleConfig { n_trajectories: 2, ..small_config(0) };
        let mut model_bad = m.clone();
        model_bad.params.eta = 1e300;
        let run = run_stats(&cfg, &ic, &model_bad, StatsLayout::default()).unwrap();
        assert_eq!(run.aborted.len(), 2);
        assert!(matches!(run.aborted[0], Error::NonFinite { index: 0, .. }));
        assert_eq!(run.stats.samples(), 0);
    }

    #[test]
    fn early_stop_is_honoured() {
        let m = model();
        let mut seen = 0;
        let out = simulate(&m, &InitialCondition::ground_state(0), &small_config(0), 0, |_, _| {
            seen += 1;
            if seen == 3 {
                Control::Stop
            } else {
                Control::Continue
            }
        })
        .unwrap();
        assert!(out.stopped_early);
        assert_eq!(seen, 3);
        assert!((out.t_end - 6.0).abs() < 1e-12);
    }
}
