use std::path::{Path, PathBuf};

use cavsim_core::experiments::{
    escape_run, flight_run, steady_state, EscapeSetup, FlightSetup, SteadyState, SteadyStateSetup,
};
use cavsim_core::histogram::Histogram;
use cavsim_core::rng::trajectory_rng;
use cavsim_core::observables::{ks_bootstrap_threshold, ks_distance_binned, thermal_reference, ThermalReference};
use cavsim_core::trapping::{conservative_baseline, BaselineOptions, TailFit};
use cavsim_core::SystemParams;

use crate::config::{ExperimentKind, RunConfig};
use crate::output::{comment_header, num, opt, schema, tau_rows, CsvOut};
use crate::plot::{line_chart, Series};
use crate::CliError;

/// Run the configured experiment and return the files written.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate()?;
    let mut ctx = Ctx { cfg, header: comment_header(cfg), written: Vec::new() };
    match cfg.experiment {
        ExperimentKind::SingleRun => single_run(&mut ctx)?,
        ExperimentKind::SweepKappa => sweep_kappa(&mut ctx)?,
        ExperimentKind::SweepEta => sweep_eta(&mut ctx)?,
        ExperimentKind::EscapeTimes => escape_times(&mut ctx)?,
        ExperimentKind::FlightTimes => flight_times(&mut ctx)?,
        ExperimentKind::Baseline => baseline(&mut ctx)?,
    }
    Ok(ctx.written)
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    header: String,
    written: Vec<PathBuf>,
}

impl Ctx<'_> {
    fn dir(&self) -> &Path {
        &self.cfg.output_dir
    }

    fn csv(&mut self, name: &str, columns: &[&str]) -> Result<CsvOut, CliError> {
        let out = CsvOut::create(self.dir(), name, &self.header, columns)?;
        self.written.push(out.path().to_path_buf());
        Ok(out)
    }

    fn plot(&mut self, name: &str, title: &str, x: &str, y: &str, series: &[Series]) -> Result<(), CliError> {
        if !self.cfg.plot {
            return Ok(());
        }
        let path = self.dir().join(name);
        line_chart(&path, title, x, y, series)?;
        if path.exists() {
            self.written.push(path);
        }
        Ok(())
    }

    fn steady_setup(&self) -> SteadyStateSetup {
        SteadyStateSetup {
            ensemble: self.cfg.ensemble,
            initial: self.cfg.initial,
            position_bins: self.cfg.analysis.position_bins,
            n_windows: self.cfg.analysis.n_windows,
        }
    }
}

fn reference_for(s: &SteadyState) -> Option<ThermalReference> {
    thermal_reference(s.temperature.value, s.params.derive().u0, s.photons.value).ok()
}

/// 99% sampling-null KS distance from a trajectory bootstrap.
fn ks_threshold(s: &SteadyState, seed: u64) -> Option<f64> {
    // a stream no trajectory uses
    let mut rng = trajectory_rng(seed, u64::MAX);
    ks_bootstrap_threshold(&s.stats.trajectory_positions, 0.01, 1000, &mut rng).ok()
}

fn single_run(ctx: &mut Ctx) -> Result<(), CliError> {
    let p = ctx.cfg.system;
    let mut summary = ctx.csv("summary.csv", schema::SINGLE_RUN)?;
    let s = steady_state(&p, &ctx.steady_setup())?;
    let reference = reference_for(&s);
    let ks = match (&s.position, &reference) {
        (Some(d), Some(r)) => Some(ks_distance_binned(d, r)),
        _ => None,
    };
    summary.row(&[
        num(p.kappa),
        num(p.eta),
        num(s.temperature.value),
        num(s.temperature.std_error),
        num(s.temperature.value * p.microkelvin_per_energy_unit()),
        num(s.photons.value),
        num(s.photons.std_error),
        num(s.t_over_potential),
        num(s.psd_violation_rate),
        s.stationary.to_string(),
        s.aborted.to_string(),
        opt(ks),
        opt(ks_threshold(&s, ctx.cfg.ensemble.master_seed)),
    ])?;

    let mut windows = ctx.csv("windows.csv", schema::WINDOWS)?;
    let e = ctx.cfg.ensemble;
    let w = s.stats.layout.window;
    for (i, est) in s.stats.window_p2().iter().enumerate() {
        let t0 = e.t_burnin + i as f64 * w;
        windows.row(&[
            i.to_string(),
            num(t0),
            num(t0 + w),
            num(est.value * p.epsilon_recoil),
            num(est.std_error * p.epsilon_recoil),
        ])?;
    }

    let mut pos = ctx.csv("position.csv", schema::POSITION)?;
    let mut series = Vec::new();
    if let Some(d) = &s.position {
        let xs = d.centers();
        let thermal: Vec<f64> = xs.iter().map(|&x| reference.as_ref().map_or(f64::NAN, |r| r.density(x))).collect();
        for ((x, rho), th) in xs.iter().zip(&d.density).zip(&thermal) {
            pos.row(&[num(*x), num(*rho), num(*th)])?;
        }
        series.push(Series::new("simulated", xs.iter().copied().zip(d.density.iter().copied()).collect()));
        series.push(Series::new("thermal", xs.iter().copied().zip(thermal).collect()));
    }
    ctx.plot("position.svg", "Position distribution", "x (1/k)", "density", &series)
}

fn sweep_kappa(ctx: &mut Ctx) -> Result<(), CliError> {
    let grid = ctx.cfg.sweep.kappa.clone().unwrap_or_default();
    let ratio = ctx.cfg.sweep.eta_over_kappa.unwrap_or_default();
    let setup = ctx.steady_setup();
    let mut out = ctx.csv("sweep_kappa.csv", schema::SWEEP_KAPPA)?;
    let mut curve = Vec::new();
    for kappa in grid {
        let p = SystemParams { kappa, eta: ratio * kappa, ..ctx.cfg.system };
        match steady_state(&p, &setup) {
            Ok(s) => {
                curve.push((kappa, s.temperature.value));
                out.row(&[
                    num(kappa),
                    num(p.eta),
                    num(s.temperature.value),
                    num(s.temperature.std_error),
                    num(s.photons.value),
                    num(s.t_over_potential),
                    num(s.psd_violation_rate),
                    s.stationary.to_string(),
                    String::new(),
                ])?
            }
            Err(e) => out.row(&[num(kappa), num(p.eta), "".into(), "".into(), "".into(), "".into(), "".into(), "".into(), e.to_string()])?,
        }
    }
    ctx.plot("sweep_kappa.svg", "Temperature versus cavity decay", "kappa (gamma)", "k_B T (hbar gamma)", &[Series::new("T", curve)])
}

fn sweep_eta(ctx: &mut Ctx) -> Result<(), CliError> {
    let grid = ctx.cfg.sweep.eta.clone().unwrap_or_default();
    let setup = ctx.steady_setup();
    let mut out = ctx.csv("sweep_eta.csv", schema::SWEEP_ETA)?;
    let mut positions = ctx.csv("positions_eta.csv", schema::POSITIONS_ETA)?;
    let (mut temps, mut ratios, mut dists) = (Vec::new(), Vec::new(), Vec::new());
    for eta in grid {
        let p = SystemParams { eta, ..ctx.cfg.system };
        match steady_state(&p, &setup) {
            Ok(s) => {
                temps.push((eta, s.temperature.value));
                ratios.push((eta, s.t_over_potential));
                out.row(&[
                    num(eta),
                    num(s.temperature.value),
                    num(s.temperature.std_error),
                    num(s.photons.value),
                    num(s.t_over_potential),
                    num(s.psd_violation_rate),
                    s.stationary.to_string(),
                    String::new(),
                ])?;
                if let Some(d) = &s.position {
                    let r = reference_for(&s);
                    let xs = d.centers();
                    for (x, rho) in xs.iter().zip(&d.density) {
                        let th = r.as_ref().map_or(f64::NAN, |r| r.density(*x));
                        positions.row(&[num(eta), num(*x), num(*rho), num(th)])?;
                    }
                    dists.push(Series::new(format!("eta = {eta}"), xs.into_iter().zip(d.density.iter().copied()).collect()));
                }
            }
            Err(e) => out.row(&[num(eta), "".into(), "".into(), "".into(), "".into(), "".into(), "".into(), e.to_string()])?,
        }
    }
    ctx.plot(
        "sweep_eta.svg",
        "Temperature and localisation versus pump",
        "eta (gamma)",
        "k_B T / hbar gamma, T / U0<n>",
        &[Series::new("T", temps), Series::new("T / U0<n>", ratios)],
    )?;
    ctx.plot("positions_eta.svg", "Position distributions", "x (1/k)", "density", &dists)
}

fn fit_fields(fit: &Result<TailFit, cavsim_core::Error>, us: f64) -> ([String; 6], String) {
    match fit {
        Ok(f) => (
            [
                num(f.t_trap_us),
                num(f.t_trap_err_us),
                num(f.t_trap_mle * us),
                num(f.tau_min * us),
                num(f.r_squared),
                f.events_in_tail.to_string(),
            ],
            String::new(),
        ),
        Err(e) => (Default::default(), e.to_string()),
    }
}

/// Log-log view of a τ histogram.
fn log_density(h: &Histogram, us: f64) -> Vec<(f64, f64)> {
    let total = h.total().max(1) as f64;
    (0..h.bins())
        .filter(|&i| h.counts()[i] > 0)
        .map(|i| ((h.center(i) * us).log10(), (h.counts()[i] as f64 / (total * h.width(i) * us)).log10()))
        .collect()
}

fn escape_times(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let base = cfg.system;
    let points: Vec<SystemParams> = match (&cfg.sweep.kappa, &cfg.sweep.eta) {
        (Some(k), _) => {
            let r = cfg.sweep.eta_over_kappa.unwrap_or_default();
            k.iter().map(|&kappa| SystemParams { kappa, eta: r * kappa, ..base }).collect()
        }
        (None, Some(e)) => e.iter().map(|&eta| SystemParams { eta, ..base }).collect(),
        (None, None) => vec![base],
    };
    let sweeping = points.len() > 1 || cfg.sweep.kappa.is_some() || cfg.sweep.eta.is_some();
    let setup = EscapeSetup { ensemble: cfg.ensemble, options: cfg.analysis.escape(), well: cfg.analysis.well };
    let us = base.micros_per_time_unit();
    let mut summary = ctx.csv("escape_summary.csv", schema::ESCAPE_SUMMARY)?;
    let mut hist = ctx.csv("escape_hist.csv", schema::TAU_HISTOGRAM)?;
    let (mut curve, mut hists) = (Vec::new(), Vec::new());
    for p in points {
        let lead = vec![num(p.kappa), num(p.eta)];
        match escape_run(&p, &setup) {
            Ok(r) => {
                let a = &r.analysis;
                let (f, err) = fit_fields(&a.fit, us);
                let mut row = lead.clone();
                row.extend([a.escaped.to_string(), a.censored.to_string()]);
                row.extend(f[..4].iter().cloned());
                row.extend([f[4].clone(), f[5].clone()]);
                row.push(a.fit.as_ref().map(|f| f.bins_used.to_string()).unwrap_or_default());
                row.push(opt(a.onset_ratio));
                row.push(err);
                summary.row(&row)?;
                tau_rows(&mut hist, &lead, &a.histogram, us)?;
                if let Ok(f) = &a.fit {
                    let x = if cfg.sweep.eta.is_some() { p.eta } else { p.kappa };
                    curve.push((x, f.t_trap_us));
                }
                hists.push(Series::new(format!("kappa {} eta {}", p.kappa, p.eta), log_density(&a.histogram, us)));
            }
            Err(e) if sweeping => {
                let mut row = lead;
                row.extend(std::iter::repeat(String::new()).take(10));
                row.push(e.to_string());
                summary.row(&row)?;
            }
            Err(e) => return Err(e.into()),
        }
    }
    ctx.plot("escape_hist.svg", "Escape-time distribution", "log10 tau (us)", "log10 P (1/us)", &hists)?;
    if sweeping {
        let x = if cfg.sweep.eta.is_some() { "eta (gamma)" } else { "kappa (gamma)" };
        ctx.plot("trap_time.svg", "Trapping time", x, "T_trap (us)", &[Series::new("T_trap", curve)])?;
    }
    Ok(())
}

fn flight_times(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let p = cfg.system;
    let us = p.micros_per_time_unit();
    let mut summary = ctx.csv("flight_summary.csv", schema::FLIGHT_SUMMARY)?;
    let setup = FlightSetup {
        ensemble: cfg.ensemble,
        initial: cfg.initial,
        options: cfg.analysis.flight(),
        n_windows: cfg.analysis.n_windows,
    };
    let r = flight_run(&p, &setup)?;
    let a = &r.analysis;
    let b = a.bimodal;
    let (f, err) = fit_fields(&a.fit, us);
    let mut row = vec![
        num(p.kappa),
        num(p.eta),
        num(a.total_time * us),
        a.flights.to_string(),
        num(r.temperature.value),
        num(r.temperature.std_error),
        num(r.photons.value),
        num(r.depth),
        num(r.above_barrier_fraction),
        opt(b.map(|b| b.first_max_us)),
        opt(b.map(|b| b.minimum_us)),
        opt(b.map(|b| b.second_max_us)),
        opt(a.cutoff_us),
        opt(a.untrapped_fraction),
        opt(a.trapped_fraction),
    ];
    row.extend(f[..3].iter().cloned());
    row.extend([f[4].clone(), f[5].clone()]);
    row.push(num(r.diagnostics.violation_rate()));
    let mut errors = vec![err].into_iter().filter(|e| !e.is_empty()).collect::<Vec<_>>();
    if a.untrapped_fraction.is_none() {
        errors.push(cavsim_core::Error::NoCutoff.to_string());
    }
    row.push(errors.join("; "));
    summary.row(&row)?;

    let lead = vec![num(p.kappa), num(p.eta)];
    let mut hist = ctx.csv("flight_hist.csv", schema::TAU_HISTOGRAM)?;
    tau_rows(&mut hist, &lead, &a.histogram, us)?;
    // the short histogram is already binned in μs
    let mut short = ctx.csv("flight_short_hist.csv", schema::TAU_HISTOGRAM)?;
    tau_rows(&mut short, &lead, &a.short_histogram, 1.0)?;
    ctx.plot("flight_hist.svg", "Flight-time distribution", "log10 tau (us)", "log10 P (1/us)", &[Series::new("P", log_density(&a.histogram, us))])?;
    let sh = &a.short_histogram;
    let short_pts = (0..sh.bins()).map(|i| (sh.center(i), sh.counts()[i] as f64)).collect();
    ctx.plot("flight_short.svg", "Short flights", "tau (us)", "count", &[Series::new("flights", short_pts)])
}

fn baseline(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let p = cfg.system;
    let b = cfg.baseline;
    let (k_bt, photons) = match (b.k_bt, b.photons) {
        (Some(t), Some(n)) => (t, n),
        _ => {
            let s = steady_state(&p, &ctx.steady_setup())?;
            (b.k_bt.unwrap_or(s.temperature.value), b.photons.unwrap_or(s.photons.value))
        }
    };
    let opts = BaselineOptions {
        n_atoms: b.n_atoms,
        t_observe: b.t_observe,
        dt: b.dt,
        sample_interval: b.sample_interval,
        seed: cfg.ensemble.master_seed,
        workers: cfg.ensemble.workers,
    };
    let mut summary = ctx.csv("baseline_summary.csv", schema::BASELINE_SUMMARY)?;
    let r = conservative_baseline(k_bt, photons, &p, &opts)?;
    let us = p.micros_per_time_unit();
    let shortest = r.flights.iter().copied().fold(f64::INFINITY, f64::min) * us;
    summary.row(&[
        num(k_bt),
        num(photons),
        num(p.derive().u0 * photons),
        num(r.above_barrier_fraction),
        num(r.moving_fraction),
        r.flights.len().to_string(),
        num(shortest),
    ])?;
    let lead = vec![num(p.kappa), num(p.eta)];
    let mut hist = ctx.csv("baseline_hist.csv", schema::TAU_HISTOGRAM)?;
    tau_rows(&mut hist, &lead, &r.histogram, us)?;
    let mut short = ctx.csv("baseline_short_hist.csv", schema::TAU_HISTOGRAM)?;
    tau_rows(&mut short, &lead, &r.short_histogram, 1.0)?;
    let sh = &r.short_histogram;
    let pts = (0..sh.bins()).map(|i| (sh.center(i), sh.counts()[i] as f64)).collect();
    ctx.plot("baseline_short.svg", "Conservative baseline flights", "tau (us)", "count", &[Series::new("flights", pts)])
}
