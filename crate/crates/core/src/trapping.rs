//! Well residency, escape and flight-time statistics.
//!
//! The optical potential `U₀⟨n⟩ cos²x̃` has its maxima at `x̃ = mπ` for
//! `U₀ > 0` (atoms sit at the nodes) and at `x̃ = π/2 + mπ` for `U₀ < 0`.
//! A flight is the time between entering a well through one boundary and
//! leaving it through either boundary.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::PI;

use crate::ensemble::{
    par_map, sample_boltzmann, simulate, simulate_from, Control, EnsembleConfig, InitialCondition, TrajectoryRecord,
};
use crate::error::{Error, Result};
use crate::histogram::Histogram;
use crate::params::{ModeFunction, SystemParams};
use crate::rng::trajectory_rng;
use crate::sde::{DynamicsOptions, Model, PhaseState, Scheme};

/// Largest position change tolerated between consecutive samples.
pub const MAX_SAMPLE_JUMP: f64 = PI / 4.0;

/// Bins with fewer counts are left out of the tail fit.
pub const MIN_FIT_BIN_COUNT: u64 = 5;

/// Fewer tail events than this and the fit is refused.
pub const MIN_TAIL_EVENTS: usize = 50;

/// Boundaries (potential maxima) of the optical lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellLattice {
    offset: f64,
    period: f64,
}

impl WellLattice {
    pub fn for_light_shift(u0: f64) -> Self {
        WellLattice { offset: if u0 >= 0.0 { 0.0 } else { 0.5 * PI }, period: PI }
    }

    /// Position of boundary 0.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn boundary(&self, m: i64) -> f64 {
        self.offset + m as f64 * self.period
    }

    /// Well `m` spans `[boundary(m), boundary(m + 1))`.
    pub fn well_index(&self, x: f64) -> i64 {
        ((x - self.offset) / self.period).floor() as i64
    }

    pub fn well_center(&self, m: i64) -> f64 {
        self.offset + (m as f64 + 0.5) * self.period
    }
}

/// Passage through boundary `boundary` at `time`; `direction` is +1 moving right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub time: f64,
    pub boundary: i64,
    pub direction: i8,
}

impl Crossing {
    pub fn from_well(&self) -> i64 {
        if self.direction > 0 {
            self.boundary - 1
        } else {
            self.boundary
        }
    }

    pub fn to_well(&self) -> i64 {
        if self.direction > 0 {
            self.boundary
        } else {
            self.boundary - 1
        }
    }
}

/// Streaming boundary-crossing detection with linear interpolation between samples.
#[derive(Debug, Clone)]
pub struct CrossingDetector {
    lattice: WellLattice,
    last: Option<(f64, f64, i64)>,
}

impl CrossingDetector {
    pub fn new(lattice: WellLattice) -> Self {
        CrossingDetector { lattice, last: None }
    }

    pub fn current_well(&self) -> Option<i64> {
        self.last.map(|l| l.2)
    }

    pub fn push(&mut self, t: f64, x: f64) -> Result<Option<Crossing>> {
        let well = self.lattice.well_index(x);
        let Some((t0, x0, w0)) = self.last.replace((t, x, well)) else {
            return Ok(None);
        };
        let jump = (x - x0).abs();
        if jump >= MAX_SAMPLE_JUMP {
            return Err(Error::SamplingTooCoarse { jump, limit: MAX_SAMPLE_JUMP });
        }
        if well == w0 {
            return Ok(None);
        }
        let (boundary, direction) = if well > w0 { (w0 + 1, 1) } else { (w0, -1) };
        let b = self.lattice.boundary(boundary);
        let frac = ((b - x0) / (x - x0)).clamp(0.0, 1.0);
        Ok(Some(Crossing { time: t0 + frac * (t - t0), boundary, direction }))
    }
}

/// A residency in one well between two times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residency {
    pub well: i64,
    pub entry: f64,
    pub exit: f64,
}

impl Residency {
    pub fn duration(&self) -> f64 {
        self.exit - self.entry
    }
}

/// Complete flights plus the censored residencies at both ends of the record.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlightRecord {
    pub flights: Vec<Residency>,
    /// Leading and trailing residencies that were not fully observed.
    pub censored: Vec<Residency>,
    pub t_start: f64,
    pub t_end: f64,
}

impl FlightRecord {
    pub fn durations(&self) -> Vec<f64> {
        self.flights.iter().map(Residency::duration).collect()
    }

    pub fn total_time(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn censored_time(&self) -> f64 {
        self.censored.iter().map(Residency::duration).sum()
    }

    pub fn flight_time(&self) -> f64 {
        self.flights.iter().map(Residency::duration).sum()
    }
}

/// Streaming construction of a [`FlightRecord`] from position samples.
#[derive(Debug, Clone)]
pub struct FlightBuilder {
    detector: CrossingDetector,
    record: FlightRecord,
    entry: Option<(f64, bool)>,
    last_t: f64,
}

impl FlightBuilder {
    pub fn new(lattice: WellLattice) -> Self {
        FlightBuilder { detector: CrossingDetector::new(lattice), record: FlightRecord::default(), entry: None, last_t: 0.0 }
    }

    pub fn push(&mut self, t: f64, x: f64) -> Result<Option<Crossing>> {
        let c = self.detector.push(t, x)?;
        match (self.entry, c) {
            (None, _) => {
                // first sample opens a left-censored residency
                self.record.t_start = t;
                self.entry = Some((t, false));
            }
            (Some((entry, complete)), Some(c)) => {
                let r = Residency { well: c.from_well(), entry, exit: c.time };
                if complete {
                    self.record.flights.push(r);
                } else {
                    self.record.censored.push(r);
                }
                self.entry = Some((c.time, true));
            }
            _ => {}
        }
        self.last_t = t;
        Ok(c)
    }

    /// Close the open residency at the last sample time.
    pub fn finish(mut self) -> FlightRecord {
        if let (Some((entry, _)), Some(well)) = (self.entry, self.detector.current_well()) {
            self.record.censored.push(Residency { well, entry, exit: self.last_t });
            self.record.t_end = self.last_t;
        }
        self.record
    }
}

/// Assemble flights from the sampled positions of a trajectory.
pub fn detect_crossings(record: &TrajectoryRecord, lattice: WellLattice) -> Result<FlightRecord> {
    let mut b = FlightBuilder::new(lattice);
    for s in &record.samples {
        b.push(s.t, s.state.x)?;
    }
    Ok(b.finish())
}

/// Exponential tail `P(τ) ∝ exp(−τ/T_trap)` fitted by least squares on log densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Trapping time in `1/γ`.
    pub t_trap: f64,
    pub t_trap_err: f64,
    pub t_trap_us: f64,
    pub t_trap_err_us: f64,
    /// Maximum-likelihood estimate `mean(τ − τ_min)` over the tail, `1/γ`.
    pub t_trap_mle: f64,
    /// Start of the fit window, `1/γ`.
    pub tau_min: f64,
    pub r_squared: f64,
    pub events_in_tail: usize,
    pub bins_used: usize,
    /// Fitted `ln P(τ) = intercept + slope τ` with `P` normalised to all events.
    pub slope: f64,
    pub intercept: f64,
    pub histogram: Histogram,
}

impl TailFit {
    /// Fitted density at `tau`.
    pub fn density_at(&self, tau: f64) -> f64 {
        (self.intercept + self.slope * tau).exp()
    }
}

/// Fit the exponential tail of `taus` (all in `1/γ`) beyond `tau_min`.
///
/// The window runs from `tau_min` to the 98th percentile of the tail events,
/// cut into equal-width bins. Densities are normalised to `taus.len()`.
pub fn fit_exponential_tail(taus: &[f64], tau_min: f64, micros_per_unit: f64) -> Result<TailFit> {
    let mut tail: Vec<f64> = taus.iter().copied().filter(|&t| t > tau_min).collect();
    if tail.len() < MIN_TAIL_EVENTS {
        return Err(Error::FitRefused(format!(
            "{} events beyond tau_min = {:.1} (need at least {MIN_TAIL_EVENTS})",
            tail.len(),
            tau_min
        )));
    }
    tail.sort_by(f64::total_cmp);
    let hi = tail[((tail.len() as f64 * 0.98) as usize).min(tail.len() - 1)];
    if !(hi > tau_min) {
        return Err(Error::FitRefused("degenerate tail".into()));
    }
    let bins = (tail.len() / 25).clamp(5, 40);
    let mut hist = Histogram::linear(tau_min, hi, bins);
    for &t in &tail {
        hist.add(t);
    }
    let norm = taus.len() as f64;
    let pts: Vec<(f64, f64)> = (0..hist.bins())
        .filter(|&i| hist.counts()[i] >= MIN_FIT_BIN_COUNT)
        .map(|i| (hist.center(i), (hist.counts()[i] as f64 / (norm * hist.width(i))).ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::FitRefused(format!("only {} bins with at least {MIN_FIT_BIN_COUNT} counts", pts.len())));
    }
    let line = least_squares(&pts);
    if !(line.slope < 0.0) {
        return Err(Error::FitRefused(format!("tail is not decaying (slope {:.3e})", line.slope)));
    }
    let t_trap = -1.0 / line.slope;
    let t_trap_err = line.slope_err / (line.slope * line.slope);
    let mle = tail.iter().map(|t| t - tau_min).sum::<f64>() / tail.len() as f64;
    Ok(TailFit {
        t_trap,
        t_trap_err,
        t_trap_us: t_trap * micros_per_unit,
        t_trap_err_us: t_trap_err * micros_per_unit,
        t_trap_mle: mle,
        tau_min,
        r_squared: line.r_squared,
        events_in_tail: tail.len(),
        bins_used: pts.len(),
        slope: line.slope,
        intercept: line.intercept,
        histogram: hist,
    })
}

struct Line {
    slope: f64,
    intercept: f64,
    slope_err: f64,
    r_squared: f64,
}

fn least_squares(pts: &[(f64, f64)]) -> Line {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let slope_err = if pts.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    Line { slope, intercept, slope_err, r_squared: if syy > 0.0 { 1.0 - sse / syy } else { 1.0 } }
}

/// Default `P(τ)` binning: logarithmic between 0.1 μs and 10 ms.
pub fn default_tau_histogram(micros_per_unit: f64) -> Histogram {
    Histogram::logarithmic(0.1 / micros_per_unit, 1.0e4 / micros_per_unit, 60)
}

/// Options for the escape-time analysis (times in μs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeOptions {
    pub tau_min_us: f64,
    /// Width of the bin used to compare the short-time onset with the fit.
    pub onset_bin_us: f64,
}

impl Default for EscapeOptions {
    fn default() -> Self {
        EscapeOptions { tau_min_us: 100.0, onset_bin_us: 10.0 }
    }
}

/// Escape-time distribution of an ensemble started in one well.
#[derive(Debug, Clone, PartialEq)]
pub struct EscapeAnalysis {
    pub histogram: Histogram,
    pub fit: Result<TailFit>,
    /// Trajectories that had not left the well when the run ended.
    pub censored: usize,
    pub escaped: usize,
    /// Observed density in `[0, onset_bin)` divided by the fitted tail
    /// extrapolated to the same bin. `None` without a fit.
    pub onset_ratio: Option<f64>,
}

/// Histogram and tail fit of first-exit times `taus` (in `1/γ`).
pub fn escape_time_distribution(taus: &[f64], censored: usize, params: &SystemParams, opts: &EscapeOptions) -> EscapeAnalysis {
    let us = params.micros_per_time_unit();
    let mut histogram = default_tau_histogram(us);
    for &t in taus {
        histogram.add(t);
    }
    let fit = fit_exponential_tail(taus, params.micros_to_time(opts.tau_min_us), us);
    let onset_ratio = fit.as_ref().ok().map(|f| {
        let w = params.micros_to_time(opts.onset_bin_us);
        let observed = taus.iter().filter(|&&t| t < w).count() as f64 / (taus.len() as f64 * w);
        // average of the fitted exponential over [0, w)
        let fitted = f.density_at(0.0) * (1.0 - (f.slope * w).exp()) / (-f.slope * w);
        observed / fitted
    });
    EscapeAnalysis { histogram, fit, censored, escaped: taus.len(), onset_ratio }
}

/// First-exit time per trajectory (`None` if still trapped at `t_total`).
pub fn run_escape_times<M: ModeFunction>(model: &Model<M>, config: &EnsembleConfig, well: i64) -> Result<Vec<Option<f64>>> {
    config.validate()?;
    let lattice = WellLattice::for_light_shift(model.derived.u0);
    let ic = InitialCondition::ground_state(well);
    let sample_cfg = EnsembleConfig { t_burnin: 0.0, ..*config };
    let out = par_map(config.n_trajectories, config.workers, |i| {
        let mut detector = CrossingDetector::new(lattice);
        let mut exit = None;
        let mut err = None;
        let outcome = simulate(model, &ic, &sample_cfg, i, |t, s| match detector.push(t, s.x) {
            Ok(Some(c)) => {
                exit = Some(c.time);
                Control::Stop
            }
            Ok(None) => Control::Continue,
            Err(e) => {
                err = Some(e);
                Control::Stop
            }
        })?;
        if let Some(e) = err.or(outcome.aborted) {
            return Err(e);
        }
        Ok(exit)
    });
    out.into_iter().collect()
}

/// Options for the single-trajectory flight-time analysis (times in μs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightOptions {
    pub tau_min_us: f64,
    /// Upper end of the linear histogram used to locate the two maxima.
    pub short_range_us: f64,
    pub short_bins: usize,
    /// Fixed trapped/untrapped cutoff; otherwise the inter-maxima minimum.
    pub cutoff_us: Option<f64>,
}

impl Default for FlightOptions {
    fn default() -> Self {
        FlightOptions { tau_min_us: 100.0, short_range_us: 20.0, short_bins: 40, cutoff_us: None }
    }
}

/// Two maxima of `P(τ)` and the minimum between them (μs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bimodal {
    pub first_max_us: f64,
    pub minimum_us: f64,
    pub second_max_us: f64,
    /// Depth of the dip relative to the lower maximum, `1 − min/lower_max`.
    pub dip_depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlightAnalysis {
    pub histogram: Histogram,
    /// Linear binning of short flights, in μs.
    pub short_histogram: Histogram,
    pub fit: Result<TailFit>,
    pub bimodal: Option<Bimodal>,
    pub cutoff_us: Option<f64>,
    /// Fraction of the observed time spent in flights shorter than the cutoff.
    pub untrapped_fraction: Option<f64>,
    pub trapped_fraction: Option<f64>,
    pub flights: usize,
    pub total_time: f64,
}

/// Flight-time statistics of one long trajectory.
pub fn flight_time_distribution(record: &FlightRecord, params: &SystemParams, opts: &FlightOptions) -> FlightAnalysis {
    let us = params.micros_per_time_unit();
    let taus = record.durations();
    let mut histogram = default_tau_histogram(us);
    let mut short = Histogram::linear(0.0, opts.short_range_us, opts.short_bins);
    for &t in &taus {
        histogram.add(t);
        short.add(t * us);
    }
    let fit = fit_exponential_tail(&taus, params.micros_to_time(opts.tau_min_us), us);
    let bimodal = find_bimodal(&short);
    let cutoff_us = opts.cutoff_us.or(bimodal.map(|b| b.minimum_us));
    let total_time = record.total_time();
    let untrapped_fraction = cutoff_us.filter(|_| total_time > 0.0).map(|c| {
        let cut = params.micros_to_time(c);
        taus.iter().filter(|&&t| t < cut).sum::<f64>() / total_time
    });
    FlightAnalysis {
        histogram,
        short_histogram: short,
        fit,
        bimodal,
        cutoff_us,
        untrapped_fraction,
        trapped_fraction: untrapped_fraction.map(|u| 1.0 - u),
        flights: taus.len(),
        total_time,
    }
}

/// Untrapped fraction for an explicit cutoff; fails if none is given and no dip exists.
pub fn untrapped_fraction(analysis: &FlightAnalysis) -> Result<f64> {
    analysis.untrapped_fraction.ok_or(Error::NoCutoff)
}

/// Locate two maxima separated by a dip in a (3-bin smoothed) histogram.
///
/// Among all pairs of local maxima `i < j` the pair maximising
/// `min(s_i, s_j) − min(s_i..=s_j)` is chosen; the dip must exceed three
/// Poisson standard deviations of the lower maximum.
pub fn find_bimodal(h: &Histogram) -> Option<Bimodal> {
    let c = h.counts();
    let n = c.len();
    if n < 5 {
        return None;
    }
    let s: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            (lo..=hi).map(|k| c[k] as f64).sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let is_peak = |i: usize| (i == 0 || s[i] >= s[i - 1]) && (i == n - 1 || s[i] >= s[i + 1]) && s[i] > 0.0;
    let mut best: Option<(f64, usize, usize, usize)> = None;
    for i in (0..n).filter(|&i| is_peak(i)) {
        let mut min_v = s[i];
        let mut min_k = i;
        for j in i + 1..n {
            if s[j] < min_v {
                min_v = s[j];
                min_k = j;
            }
            if !is_peak(j) {
                continue;
            }
            let dip = s[i].min(s[j]) - min_v;
            if dip > 0.0 && best.map_or(true, |b| dip > b.0) {
                best = Some((dip, i, min_k, j));
            }
        }
    }
    let (dip, i, k, j) = best?;
    let lower = s[i].min(s[j]);
    // smoothing over three bins reduces the Poisson variance by three
    if dip < 3.0 * (lower / 3.0).sqrt() {
        return None;
    }
    Some(Bimodal {
        first_max_us: h.center(i),
        minimum_us: h.center(k),
        second_max_us: h.center(j),
        dip_depth: dip / lower,
    })
}

/// Fraction of a Boltzmann ensemble in `depth · cos²x̃` with energy above the barrier.
///
/// Integrates over one period and over momentum; the momentum integral is
/// done in closed form (`erfc`), the position integral by Simpson's rule with
/// repeated refinement. Depends only on `depth / k_BT`.
pub fn above_barrier_fraction(depth: f64, k_bt: f64) -> Result<f64> {
    if !(k_bt > 0.0) {
        return Err(Error::config("temperature must be positive"));
    }
    let r = depth.abs() / k_bt;
    if r == 0.0 {
        return Ok(1.0);
    }
    // measured from the potential minimum: V = r sin²x on [0, π] has maxima at the ends
    let num = |x: f64| {
        let v = r * x.cos().powi(2);
        (-v).exp() * erfc((r - v).max(0.0).sqrt())
    };
    let den = |x: f64| (-r * x.cos().powi(2)).exp();
    let (a, b) = (refined_simpson(&num, 0.0, PI), refined_simpson(&den, 0.0, PI));
    Ok((a / b).clamp(0.0, 1.0))
}

fn refined_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let simpson = |n: usize| {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + h * i as f64);
        }
        s * h / 3.0
    };
    let mut n = 64;
    let mut prev = simpson(n);
    while n < 1 << 22 {
        n *= 2;
        let next = simpson(n);
        if (next - prev).abs() <= 1e-12 * next.abs().max(1e-300) {
            return next;
        }
        prev = next;
    }
    prev
}

/// Options for the conservative (noise-free, static potential) comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineOptions {
    pub n_atoms: usize,
    /// Observation time per atom, `1/γ`.
    pub t_observe: f64,
    pub dt: f64,
    pub sample_interval: f64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        BaselineOptions { n_atoms: 2000, t_observe: 2000.0, dt: 1e-2, sample_interval: 0.25, seed: 0, workers: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub histogram: Histogram,
    /// Linear histogram of short flights, μs.
    pub short_histogram: Histogram,
    pub flights: Vec<f64>,
    pub above_barrier_fraction: f64,
    /// Share of sampled atoms that produced at least one complete flight.
    pub moving_fraction: f64,
}

/// Flights of thermal atoms in the static potential `U₀ n cos²x̃` without noise.
///
/// `photons` fixes the potential depth `U₀ · photons`.
pub fn conservative_baseline(k_bt: f64, photons: f64, params: &SystemParams, opts: &BaselineOptions) -> Result<BaselineResult> {
    if !(k_bt > 0.0) {
        return Err(Error::config("temperature must be positive"));
    }
    let model = Model::standing_wave(*params).with_options(DynamicsOptions {
        scheme: Scheme::SemiImplicit,
        noise: false,
        frozen_field: true,
    });
    let u0 = model.derived.u0;
    let lattice = WellLattice::for_light_shift(u0);
    let config = EnsembleConfig {
        n_trajectories: opts.n_atoms,
        t_total: opts.t_observe,
        dt: opts.dt,
        t_burnin: 0.0,
        sample_interval: opts.sample_interval,
        master_seed: opts.seed,
        workers: opts.workers,
    };
    config.validate()?;
    // frozen field with |α|² − ½ = photons gives the depth U₀·photons
    let field = (photons + 0.5).sqrt();
    let amplitude = u0 * photons;
    let eps = params.epsilon_recoil;
    let runs = par_map(opts.n_atoms, opts.workers, |i| {
        let mut rng = trajectory_rng(opts.seed, i as u64);
        let (x, p) = sample_boltzmann(amplitude, k_bt, eps, &lattice, 0, false, &mut rng)?;
        let mut builder = FlightBuilder::new(lattice);
        let mut err = None;
        let out = simulate_from(&model, PhaseState::new(x, p, -field, 0.0), &config, i, &mut rng, |t, s| {
            if let Err(e) = builder.push(t, s.x) {
                err = Some(e);
                return Control::Stop;
            }
            Control::Continue
        });
        if let Some(e) = err.or(out.aborted) {
            return Err(e);
        }
        Ok(builder.finish().durations())
    });
    let us = params.micros_per_time_unit();
    let mut histogram = default_tau_histogram(us);
    let mut short = Histogram::linear(0.0, 20.0, 40);
    let mut flights = Vec::new();
    let mut moving = 0usize;
    for r in runs {
        let d = r?;
        if !d.is_empty() {
            moving += 1;
        }
        for t in d {
            histogram.add(t);
            short.add(t * us);
            flights.push(t);
        }
    }
    Ok(BaselineResult {
        histogram,
        short_histogram: short,
        flights,
        above_barrier_fraction: above_barrier_fraction(u0 * photons, k_bt)?,
        moving_fraction: moving as f64 / opts.n_atoms.max(1) as f64,
    })
}
