//! Steady-state observables accumulated over trajectory samples.
//!
//! Wigner-function moments are symmetrically ordered, so the mean photon
//! number is `⟨|α|²⟩ − ½`. Temperature follows the 1D convention
//! `k_B T = ⟨p²⟩/M`, which in reduced units is `k_B T/ħγ = ε ⟨p̃²⟩`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::histogram::Histogram;
use crate::sde::{PhaseState, StepDiagnostics};

/// Minimum number of position samples for a position distribution.
pub const MIN_POSITION_SAMPLES: u64 = 10_000;

/// Running count/mean/M2 with pairwise merging.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        let delta = v - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (v - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let (na, nb) = (self.count as f64, other.count as f64);
        let delta = other.mean - self.mean;
        self.mean += delta * nb / n;
        self.m2 += other.m2 + delta * delta * na * nb / n;
        self.count += other.count;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean, treating entries as independent.
    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for v in iter {
            m.push(v);
        }
        m
    }
}

/// A value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Shape of the accumulators; all stats that get merged must share it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsLayout {
    pub position_bins: usize,
    /// Left edge of the folded position window (a potential maximum).
    pub fold_origin: f64,
    pub period: f64,
    /// Duration of each stationarity window (`1/γ`).
    pub window: f64,
    pub n_windows: usize,
}

impl Default for StatsLayout {
    fn default() -> Self {
        StatsLayout { position_bins: 64, fold_origin: 0.0, period: PI, window: 500.0, n_windows: 4 }
    }
}

/// Mergeable steady-state accumulators.
///
/// Sample-level moments pool every post-burn-in sample. The per-trajectory
/// moments hold one mean per trajectory and give honest standard errors in
/// the presence of time correlations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub layout: StatsLayout,
    pub p: Moments,
    pub p2: Moments,
    pub intensity: Moments,
    pub alpha_r: Moments,
    pub alpha_i: Moments,
    pub f2: Moments,
    pub traj_p2: Moments,
    pub traj_intensity: Moments,
    /// Per-trajectory window means of `p²`, one accumulator per window.
    pub windows: Vec<Moments>,
    pub position: Histogram,
    /// Folded position counts of each trajectory, in merge order.
    pub trajectory_positions: Vec<Vec<u64>>,
    pub diagnostics: StepDiagnostics,
    pub trajectories: u64,
    #[serde(skip)]
    current: Option<TrajectoryPartial>,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct TrajectoryPartial {
    p2: Moments,
    intensity: Moments,
    windows: Vec<Moments>,
    position: Vec<u64>,
}

impl EnsembleStats {
    pub fn new(layout: StatsLayout) -> Self {
        EnsembleStats {
            layout,
            p: Moments::default(),
            p2: Moments::default(),
            intensity: Moments::default(),
            alpha_r: Moments::default(),
            alpha_i: Moments::default(),
            f2: Moments::default(),
            traj_p2: Moments::default(),
            traj_intensity: Moments::default(),
            windows: vec![Moments::default(); layout.n_windows],
            position: Histogram::linear(0.0, layout.period, layout.position_bins),
            trajectory_positions: Vec::new(),
            diagnostics: StepDiagnostics::default(),
            trajectories: 0,
            current: None,
        }
    }

    /// Record one sample taken `t_since_burnin` after the end of burn-in.
    pub fn record(&mut self, t_since_burnin: f64, s: &PhaseState, f2: f64) {
        let a2 = s.intensity();
        let p2 = s.p * s.p;
        self.p.push(s.p);
        self.p2.push(p2);
        self.intensity.push(a2);
        self.alpha_r.push(s.alpha_r);
        self.alpha_i.push(s.alpha_i);
        self.f2.push(f2);
        let folded = fold(s.x, self.layout.fold_origin, self.layout.period);
        self.position.add(folded);

        let layout = self.layout;
        let cur = self.current.get_or_insert_with(|| TrajectoryPartial {
            windows: vec![Moments::default(); layout.n_windows],
            position: vec![0; layout.position_bins],
            ..Default::default()
        });
        let bin = ((folded / layout.period * layout.position_bins as f64) as usize).min(layout.position_bins - 1);
        cur.position[bin] += 1;
        cur.p2.push(p2);
        cur.intensity.push(a2);
        if self.layout.window > 0.0 {
            let w = (t_since_burnin / self.layout.window) as usize;
            if let Some(m) = cur.windows.get_mut(w) {
                m.push(p2);
            }
        }
    }

    /// Close the trajectory whose samples were just recorded.
    pub fn finish_trajectory(&mut self, diag: &StepDiagnostics) {
        self.diagnostics.merge(diag);
        self.trajectories += 1;
        if let Some(cur) = self.current.take() {
            if cur.p2.count > 0 {
                self.traj_p2.push(cur.p2.mean);
                self.traj_intensity.push(cur.intensity.mean);
            }
            for (acc, w) in self.windows.iter_mut().zip(&cur.windows) {
                if w.count > 0 {
                    acc.push(w.mean);
                }
            }
            self.trajectory_positions.push(cur.position);
        }
    }

    /// Panics if layouts differ or either side has an open trajectory.
    pub fn merge(&mut self, other: &EnsembleStats) {
        assert_eq!(self.layout, other.layout, "cannot merge stats with different layouts");
        assert!(self.current.is_none() && other.current.is_none(), "open trajectory during merge");
        self.p.merge(&other.p);
        self.p2.merge(&other.p2);
        self.intensity.merge(&other.intensity);
        self.alpha_r.merge(&other.alpha_r);
        self.alpha_i.merge(&other.alpha_i);
        self.f2.merge(&other.f2);
        self.traj_p2.merge(&other.traj_p2);
        self.traj_intensity.merge(&other.traj_intensity);
        for (a, b) in self.windows.iter_mut().zip(&other.windows) {
            a.merge(b);
        }
        self.position.merge(&other.position);
        self.trajectory_positions.extend(other.trajectory_positions.iter().cloned());
        self.diagnostics.merge(&other.diagnostics);
        self.trajectories += other.trajectories;
    }

    pub fn samples(&self) -> u64 {
        self.p2.count
    }

    /// Windowed `⟨p²⟩` estimates (one per stationarity window).
    pub fn window_p2(&self) -> Vec<Estimate> {
        self.windows.iter().map(|m| Estimate { value: m.mean, std_error: m.std_error() }).collect()
    }
}

/// Map `x` into `[origin, origin + period)` and return the offset from `origin`.
#[inline]
pub fn fold(x: f64, origin: f64, period: f64) -> f64 {
    let r = (x - origin).rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

fn standard_error_of(per_traj: &Moments, pooled: &Moments, windows: &[Moments]) -> f64 {
    if per_traj.count >= 2 {
        return per_traj.std_error();
    }
    // single trajectory: treat window means as batches
    let batches: Moments = windows.iter().filter(|w| w.count > 0).map(|w| w.mean).collect();
    if batches.count >= 2 {
        batches.std_error()
    } else {
        pooled.std_error()
    }
}

/// `k_B T` in units of `ħγ`.
pub fn temperature(stats: &EnsembleStats, epsilon: f64) -> Result<Estimate> {
    if stats.samples() == 0 {
        return Err(Error::InsufficientData("no samples for temperature".into()));
    }
    Ok(Estimate {
        value: epsilon * stats.p2.mean,
        std_error: epsilon * standard_error_of(&stats.traj_p2, &stats.p2, &stats.windows),
    })
}

/// Mean intracavity photon number `⟨|α|²⟩ − ½`.
pub fn photon_number(stats: &EnsembleStats) -> Result<Estimate> {
    if stats.samples() == 0 {
        return Err(Error::InsufficientData("no samples for photon number".into()));
    }
    let se = if stats.traj_intensity.count >= 2 {
        stats.traj_intensity.std_error()
    } else {
        stats.intensity.std_error()
    };
    Ok(Estimate { value: stats.intensity.mean - 0.5, std_error: se })
}

/// Position density folded onto one lattice period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionDistribution {
    /// Absolute bin edges, starting at the fold origin.
    pub edges: Vec<f64>,
    /// Density per unit `x̃`; integrates to one.
    pub density: Vec<f64>,
    pub samples: u64,
}

impl PositionDistribution {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Cumulative mass at each edge.
    pub fn cdf_at_edges(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.edges.len());
        let mut acc = 0.0;
        out.push(0.0);
        for (i, d) in self.density.iter().enumerate() {
            acc += d * (self.edges[i + 1] - self.edges[i]);
            out.push(acc);
        }
        out
    }

    /// Full width at half maximum measured on the bin grid.
    pub fn fwhm(&self) -> f64 {
        let peak = self.density.iter().cloned().fold(0.0, f64::max);
        let above: Vec<usize> = (0..self.density.len()).filter(|&i| self.density[i] >= 0.5 * peak).collect();
        match (above.first(), above.last()) {
            (Some(&a), Some(&b)) => self.edges[b + 1] - self.edges[a],
            _ => 0.0,
        }
    }
}

pub fn position_distribution(stats: &EnsembleStats) -> Result<PositionDistribution> {
    histogram_to_distribution(&stats.position, stats.layout.fold_origin, MIN_POSITION_SAMPLES)
}

pub(crate) fn histogram_to_distribution(h: &Histogram, origin: f64, min_samples: u64) -> Result<PositionDistribution> {
    let n = h.in_range();
    if n < min_samples {
        return Err(Error::InsufficientData(format!("{n} position samples, need at least {min_samples}")));
    }
    Ok(PositionDistribution {
        edges: h.edges().iter().map(|e| e + origin).collect(),
        density: h.density(),
        samples: n,
    })
}

/// Boltzmann position density `∝ exp(−U₀⟨n⟩ cos²x̃ / k_BT)` over one period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalReference {
    /// `U₀⟨n⟩ / k_BT`
    pub ratio: f64,
    norm: f64,
    /// Subtracted in the exponent for overflow safety.
    shift: f64,
}

/// Quadrature tolerance for the normalisation.
const THERMAL_REL_TOL: f64 = 1e-10;

pub fn thermal_reference(k_bt: f64, u0: f64, n_mean: f64) -> Result<ThermalReference> {
    if !(k_bt > 0.0) {
        return Err(Error::config("temperature must be positive"));
    }
    let ratio = u0 * n_mean / k_bt;
    let shift = (-ratio).max(0.0);
    let g = |x: f64| (-ratio * x.cos().powi(2) - shift).exp();
    // the integrand is smooth and periodic, so the trapezoid rule converges geometrically
    let mut n = 64usize;
    let mut prev = periodic_trapezoid(&g, n);
    loop {
        n *= 2;
        let next = periodic_trapezoid(&g, n);
        if (next - prev).abs() <= THERMAL_REL_TOL * next.abs() || n > 1 << 22 {
            return Ok(ThermalReference { ratio, norm: next, shift });
        }
        prev = next;
    }
}

fn periodic_trapezoid(g: &impl Fn(f64) -> f64, n: usize) -> f64 {
    let h = PI / n as f64;
    (0..n).map(|i| g(i as f64 * h)).sum::<f64>() * h
}

impl ThermalReference {
    pub fn density(&self, x: f64) -> f64 {
        (-self.ratio * x.cos().powi(2) - self.shift).exp() / self.norm
    }

    /// Mass between `a` and `b` (`b − a ≤ π`), composite Simpson.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let n = 64;
        let h = (b - a) / n as f64;
        let mut s = self.density(a) + self.density(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * self.density(a + h * i as f64);
        }
        s * h / 3.0
    }

    /// Probability mass of each bin given by `edges`.
    pub fn bin_masses(&self, edges: &[f64]) -> Vec<f64> {
        edges.windows(2).map(|w| self.mass(w[0], w[1])).collect()
    }
}

/// Largest gap between the empirical and reference CDFs at the bin edges.
pub fn ks_distance_binned(dist: &PositionDistribution, reference: &ThermalReference) -> f64 {
    let emp = dist.cdf_at_edges();
    let masses = reference.bin_masses(&dist.edges);
    let mut acc = 0.0;
    let mut d = 0.0f64;
    for (i, m) in masses.iter().enumerate() {
        acc += m;
        d = d.max((emp[i + 1] - acc).abs());
    }
    d
}

/// Asymptotic one-sample Kolmogorov–Smirnov critical distance at significance `alpha`.
pub fn ks_critical(n_effective: f64, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / n_effective.sqrt()
}

/// Sampling-null KS threshold for a pooled binned distribution whose samples
/// are correlated within trajectories.
///
/// Trajectories are resampled with replacement; the result is the `1 − alpha`
/// quantile of the binned KS distance between each resampled pool and the
/// full pool.
pub fn ks_bootstrap_threshold<R: Rng + ?Sized>(per_trajectory: &[Vec<u64>], alpha: f64, resamples: usize, rng: &mut R) -> Result<f64> {
    let n = per_trajectory.len();
    if n < 2 || resamples == 0 {
        return Err(Error::InsufficientData(format!("{n} trajectories for a bootstrap")));
    }
    let bins = per_trajectory[0].len();
    if per_trajectory.iter().any(|c| c.len() != bins) {
        return Err(Error::config("per-trajectory histograms differ in length"));
    }
    let cdf = |counts: &[u64]| -> Vec<f64> {
        let total: u64 = counts.iter().sum();
        let mut acc = 0u64;
        counts
            .iter()
            .map(|&c| {
                acc += c;
                acc as f64 / total.max(1) as f64
            })
            .collect()
    };
    let mut pooled = vec![0u64; bins];
    for c in per_trajectory {
        for (p, v) in pooled.iter_mut().zip(c) {
            *p += v;
        }
    }
    let reference = cdf(&pooled);
    let mut distances: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut draw = vec![0u64; bins];
            for _ in 0..n {
                for (d, v) in draw.iter_mut().zip(&per_trajectory[rng.gen_range(0..n)]) {
                    *d += v;
                }
            }
            cdf(&draw).iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .collect();
    distances.sort_by(f64::total_cmp);
    let k = (((1.0 - alpha) * resamples as f64).ceil() as usize).clamp(1, resamples) - 1;
    Ok(distances[k])
}

/// Two-sample KS distance between raw samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}
