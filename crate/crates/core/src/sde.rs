//! Drift, correlated diffusion and a single stochastic step of the coupled
//! atom–field equations of motion.
//!
//! In reduced units the equations read
//!
//! ```text
//! dx̃  = ε p̃ dt
//! dp̃  = −U₀ (|α|² − ½) ∂f² dt + dP
//! dα_r = [−η + (U₀f² − Δ_C) α_i − (κ + Γ₀f²) α_r] dt + dA_r
//! dα_i = [   − (U₀f² − Δ_C) α_r − (κ + Γ₀f²) α_i] dt + dA_i
//! ```
//!
//! The noise is specified in the frame aligned with the field: the amplitude
//! component `dA_∥` is independent, while the phase component `dA_⊥` is
//! correlated with the momentum kick `dP`:
//!
//! ```text
//!          ⎛ d₁  0   0  ⎞
//! D dt  =  ⎜ 0   d₁  d₃ ⎟ dt
//!          ⎝ 0   d₃  d₂ ⎠
//!
//! d₁ = ½ (κ + Γ₀ f²)
//! d₂ = 2 Γ₀ (|α|² − ½)(f'² + ū² f²)
//! d₃ = Γ₀ |α| f f'
//! ```

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::params::{DerivedParams, ModeFunction, StandingWave, SystemParams};

/// Below this field magnitude the amplitude/phase frame is replaced by the identity.
pub const FRAME_EPS: f64 = 1e-9;

/// One point `(x̃, p̃, α_r, α_i)` of the combined atom–field phase space.
///
/// Also used for time derivatives of such points.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: f64,
    pub p: f64,
    pub alpha_r: f64,
    pub alpha_i: f64,
}

impl PhaseState {
    pub fn new(x: f64, p: f64, alpha_r: f64, alpha_i: f64) -> Self {
        PhaseState { x, p, alpha_r, alpha_i }
    }

    /// `|α|²`
    #[inline]
    pub fn intensity(&self) -> f64 {
        self.alpha_r * self.alpha_r + self.alpha_i * self.alpha_i
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.p.is_finite() && self.alpha_r.is_finite() && self.alpha_i.is_finite()
    }
}

/// The three independent entries of the diffusion matrix plus the local
/// amplitude direction `(cos φ, sin φ) = α/|α|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionTriple {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub frame: (f64, f64),
    /// False when `|α| < FRAME_EPS` and the identity frame is used.
    pub frame_defined: bool,
}

impl DiffusionTriple {
    /// Full 3×3 matrix in the `(∥, ⊥, P)` basis.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        [[self.d1, 0.0, 0.0], [0.0, self.d1, self.d3], [0.0, self.d3, self.d2]]
    }

    /// Covariance of `(dA_r, dA_i, dP)` per unit time, i.e. `R D Rᵀ` with the
    /// inverse frame rotation `R`.
    pub fn lab_matrix(&self) -> [[f64; 3]; 3] {
        let (c, s) = self.frame;
        // columns of R: e_∥ = (c, s), e_⊥ = (−s, c)
        let (d1, d2, d3) = (self.d1, self.d2, self.d3);
        [
            [d1, 0.0, -s * d3],
            [0.0, d1, c * d3],
            [-s * d3, c * d3, d2],
        ]
    }

    /// True when the `(⊥, P)` block is positive semidefinite.
    pub fn is_psd(&self) -> bool {
        self.d2 >= 0.0 && self.d1 * self.d2 >= self.d3 * self.d3
    }
}

/// Counters for diffusion matrices that had to be projected onto the PSD cone.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub steps: u64,
    pub psd_violations: u64,
    /// Most negative eigenvalue of the `(⊥, P)` block seen so far (0 if none).
    pub min_eigenvalue_seen: f64,
    pub frame_undefined: u64,
}

impl StepDiagnostics {
    pub fn merge(&mut self, other: &StepDiagnostics) {
        self.steps += other.steps;
        self.psd_violations += other.psd_violations;
        self.min_eigenvalue_seen = self.min_eigenvalue_seen.min(other.min_eigenvalue_seen);
        self.frame_undefined += other.frame_undefined;
    }

    pub fn violation_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.psd_violations as f64 / self.steps as f64
        }
    }
}

/// Noise increments in the lab frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseIncrement {
    pub da_r: f64,
    pub da_i: f64,
    pub dp: f64,
}

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Every component advanced with the drift evaluated at the start of the step.
    EulerMaruyama,
    /// Momentum and field first; the position then moves with the updated
    /// momentum. Same order as Euler–Maruyama but symplectic for the
    /// conservative part, so the energy error stays bounded.
    #[default]
    SemiImplicit,
}

/// Switches used by tests and baselines to isolate parts of the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsOptions {
    pub scheme: Scheme,
    pub noise: bool,
    /// Hold `α` fixed; the atom then moves in a static potential.
    pub frozen_field: bool,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        DynamicsOptions { scheme: Scheme::default(), noise: true, frozen_field: false }
    }
}

/// Everything needed to advance a trajectory: parameters, mode and switches.
#[derive(Debug, Clone)]
pub struct Model<M: ModeFunction = StandingWave> {
    pub params: SystemParams,
    pub derived: DerivedParams,
    pub mode: M,
    pub options: DynamicsOptions,
}

impl Model<StandingWave> {
    pub fn standing_wave(params: SystemParams) -> Self {
        Model::new(params, StandingWave)
    }
}

impl<M: ModeFunction> Model<M> {
    pub fn new(params: SystemParams, mode: M) -> Self {
        Model { derived: params.derive(), params, mode, options: DynamicsOptions::default() }
    }

    pub fn with_options(mut self, options: DynamicsOptions) -> Self {
        self.options = options;
        self
    }

    pub fn drift(&self, s: &PhaseState) -> PhaseState {
        let (f, fp) = self.mode.eval(s.x);
        drift_at(s, f, fp, &self.params, &self.derived)
    }

    pub fn diffusion(&self, s: &PhaseState) -> DiffusionTriple {
        let (f, fp) = self.mode.eval(s.x);
        diffusion_at(s, f, fp, &self.params, &self.derived)
    }

    /// Field fixed point for an atom pinned at `x`.
    pub fn pinned_field(&self, x: f64) -> (f64, f64) {
        let (f, _) = self.mode.eval(x);
        pinned_field_at(f * f, &self.params, &self.derived)
    }

    /// Advance `s` by `dt`. Returns `None` if the new state is not finite.
    #[inline]
    pub fn step<R: Rng + ?Sized>(
        &self,
        s: &PhaseState,
        dt: f64,
        rng: &mut R,
        diag: &mut StepDiagnostics,
    ) -> Option<PhaseState> {
        let (f, fp) = self.mode.eval(s.x);
        let rate = drift_at(s, f, fp, &self.params, &self.derived);
        let noise = if self.options.noise {
            let d = diffusion_at(s, f, fp, &self.params, &self.derived);
            sample_noise(&d, dt, rng, diag)
        } else {
            diag.steps += 1;
            NoiseIncrement::default()
        };

        let p = s.p + rate.p * dt + noise.dp;
        let (alpha_r, alpha_i) = if self.options.frozen_field {
            (s.alpha_r, s.alpha_i)
        } else {
            (s.alpha_r + rate.alpha_r * dt + noise.da_r, s.alpha_i + rate.alpha_i * dt + noise.da_i)
        };
        let x = match self.options.scheme {
            Scheme::EulerMaruyama => s.x + rate.x * dt,
            Scheme::SemiImplicit => s.x + self.params.epsilon_recoil * p * dt,
        };
        let next = PhaseState { x, p, alpha_r, alpha_i };
        next.is_finite().then_some(next)
    }
}

/// Drift of the four coupled equations given the local mode value `f` and slope `fp`.
#[inline]
pub fn drift_at(s: &PhaseState, f: f64, fp: f64, p: &SystemParams, d: &DerivedParams) -> PhaseState {
    let f2 = f * f;
    let shift = d.u0 * f2 - p.delta_c;
    let loss = p.kappa + d.gamma0 * f2;
    PhaseState {
        x: p.epsilon_recoil * s.p,
        p: -d.u0 * (s.intensity() - 0.5) * 2.0 * f * fp,
        alpha_r: -p.eta + shift * s.alpha_i - loss * s.alpha_r,
        alpha_i: -shift * s.alpha_r - loss * s.alpha_i,
    }
}

/// Diffusion entries given the local mode value `f` and slope `fp`.
#[inline]
pub fn diffusion_at(s: &PhaseState, f: f64, fp: f64, p: &SystemParams, d: &DerivedParams) -> DiffusionTriple {
    let f2 = f * f;
    let a2 = s.intensity();
    let amp = a2.sqrt();
    let (frame, frame_defined) =
        if amp < FRAME_EPS { ((1.0, 0.0), false) } else { ((s.alpha_r / amp, s.alpha_i / amp), true) };
    DiffusionTriple {
        d1: 0.5 * (p.kappa + d.gamma0 * f2),
        d2: 2.0 * d.gamma0 * (a2 - 0.5) * (fp * fp + p.ubar2 * f2),
        d3: if frame_defined { d.gamma0 * amp * f * fp } else { 0.0 },
        frame,
        frame_defined,
    }
}

/// Stationary field `(α_r, α_i)` when the atom sits where `f² = f2`.
pub fn pinned_field_at(f2: f64, p: &SystemParams, d: &DerivedParams) -> (f64, f64) {
    let loss = p.kappa + d.gamma0 * f2;
    let shift = d.u0 * f2 - p.delta_c;
    let norm = loss * loss + shift * shift;
    (-p.eta * loss / norm, p.eta * shift / norm)
}

/// Draw `(dA_r, dA_i, dP)` with covariance `R D Rᵀ dt`.
#[inline]
pub fn sample_noise<R: Rng + ?Sized>(
    d: &DiffusionTriple,
    dt: f64,
    rng: &mut R,
    diag: &mut StepDiagnostics,
) -> NoiseIncrement {
    let xi: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
    correlate(d, dt, xi, diag)
}

/// Map three independent standard normals onto correlated increments.
///
/// A non-PSD `(⊥, P)` block is replaced by its projection with negative
/// eigenvalues set to zero; the event is counted in `diag`.
pub fn correlate(d: &DiffusionTriple, dt: f64, xi: [f64; 3], diag: &mut StepDiagnostics) -> NoiseIncrement {
    diag.steps += 1;
    if !d.frame_defined {
        diag.frame_undefined += 1;
    }
    let sdt = dt.sqrt();
    let a_par = d.d1.max(0.0).sqrt() * xi[0];

    let (a_perp, dp) = if d.is_psd() {
        let l11 = d.d1.sqrt();
        let l21 = if l11 > 0.0 { d.d3 / l11 } else { 0.0 };
        let l22 = (d.d2 - l21 * l21).max(0.0).sqrt();
        (l11 * xi[1], l21 * xi[1] + l22 * xi[2])
    } else {
        let eig = SymEigen2::new(d.d1, d.d3, d.d2);
        diag.psd_violations += 1;
        diag.min_eigenvalue_seen = diag.min_eigenvalue_seen.min(eig.values[1]);
        let s0 = eig.values[0].max(0.0).sqrt();
        let s1 = eig.values[1].max(0.0).sqrt();
        let (v0, v1) = (eig.vectors[0], eig.vectors[1]);
        (s0 * v0.0 * xi[1] + s1 * v1.0 * xi[2], s0 * v0.1 * xi[1] + s1 * v1.1 * xi[2])
    };

    let (c, s) = d.frame;
    NoiseIncrement {
        da_r: sdt * (c * a_par - s * a_perp),
        da_i: sdt * (s * a_par + c * a_perp),
        dp: sdt * dp,
    }
}

/// Eigen-decomposition of the symmetric matrix `[[a, b], [b, c]]`,
/// eigenvalues in descending order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymEigen2 {
    pub values: [f64; 2],
    pub vectors: [(f64, f64); 2],
}

impl SymEigen2 {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        let mean = 0.5 * (a + c);
        let half = 0.5 * (a - c);
        let r = half.hypot(b);
        let (l0, l1) = (mean + r, mean - r);
        if b == 0.0 {
            return if a >= c {
                SymEigen2 { values: [a, c], vectors: [(1.0, 0.0), (0.0, 1.0)] }
            } else {
                SymEigen2 { values: [c, a], vectors: [(0.0, 1.0), (1.0, 0.0)] }
            };
        }
        // (b, λ − a) is an eigenvector for λ; pick the better-conditioned form
        let v0 = if half >= 0.0 { (l0 - c, b) } else { (b, l0 - a) };
        let n0 = v0.0.hypot(v0.1);
        let v0 = (v0.0 / n0, v0.1 / n0);
        SymEigen2 { values: [l0, l1], vectors: [v0, (-v0.1, v0.0)] }
    }

    /// Matrix rebuilt with negative eigenvalues clamped to zero.
    pub fn psd_projection(&self) -> [[f64; 2]; 2] {
        let mut m = [[0.0; 2]; 2];
        for (lam, v) in self.values.iter().zip(self.vectors.iter()) {
            let lam = lam.max(0.0);
            m[0][0] += lam * v.0 * v.0;
            m[0][1] += lam * v.0 * v.1;
            m[1][0] += lam * v.1 * v.0;
            m[1][1] += lam * v.1 * v.1;
        }
        m
    }
}

/// Rotate lab-frame field increments into the amplitude/phase frame.
pub fn to_field_frame(frame: (f64, f64), da_r: f64, da_i: f64) -> (f64, f64) {
    let (c, s) = frame;
    (c * da_r + s * da_i, -s * da_r + c * da_i)
}

/// Inverse of [`to_field_frame`].
pub fn from_field_frame(frame: (f64, f64), a_par: f64, a_perp: f64) -> (f64, f64) {
    let (c, s) = frame;
    (c * a_par - s * a_perp, s * a_par + c * a_perp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trajectory_rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn model() -> Model {
        Model::standing_wave(SystemParams::default())
    }

    #[test]
    fn empty_cavity_fixed_point_holds_nine_photons() {
        let params = SystemParams { g: 0.0, delta_c: 0.0, kappa: 0.5, eta: 1.5, ..SystemParams::default() };
        let m = Model::standing_wave(params);
        let s = PhaseState::new(0.3, 1.0, -3.0, 0.0);
        let r = m.drift(&s);
        assert_eq!((r.alpha_r, r.alpha_i, r.p), (0.0, 0.0, 0.0));
        assert_eq!(s.intensity(), 9.0);
    }

    #[test]
    fn atom_at_node_sees_empty_cavity_field_drift() {
        let m = model();
        let s = PhaseState::new(FRAC_PI_2, 2.0, -1.2, 0.4);
        let empty = Model::standing_wave(SystemParams { g: 0.0, ..m.params });
        let (a, b) = (m.drift(&s), empty.drift(&s));
        assert!((a.alpha_r - b.alpha_r).abs() < 1e-15);
        assert!((a.alpha_i - b.alpha_i).abs() < 1e-15);
        assert!(a.p.abs() < 1e-15);
    }

    #[test]
    fn pinned_field_zeroes_the_drift() {
        let m = Model::standing_wave(SystemParams { delta_c: 0.2, eta: 1.3, ..SystemParams::default() });
        for x in [0.0, 0.4, 1.0, FRAC_PI_2, 2.5] {
            let (ar, ai) = m.pinned_field(x);
            let r = m.drift(&PhaseState::new(x, 0.0, ar, ai));
            assert!(r.alpha_r.abs() < 1e-12 && r.alpha_i.abs() < 1e-12, "{x}: {r:?}");
            let f2 = x.cos().powi(2);
            let k = m.params.kappa + m.derived.gamma0 * f2;
            let dl = m.derived.u0 * f2 - m.params.delta_c;
            let n = m.params.eta.powi(2) / (k * k + dl * dl);
            assert!((ar * ar + ai * ai - n).abs() < 1e-12);
        }
    }

    #[test]
    fn diffusion_at_antinode() {
        let m = model();
        let d = m.diffusion(&PhaseState::new(0.0, 0.0, 3.0, 0.0));
        let g0 = 6.25 / 401.0;
        assert!((d.d1 - 0.5 * (0.5 + g0)).abs() < 1e-15);
        assert!((d.d1 - 0.25779).abs() < 1e-5);
        assert!((d.d2 - 2.0 * g0 * 8.5 * 0.4).abs() < 1e-15);
        assert!((d.d2 - 0.10599).abs() < 1e-5);
        assert_eq!(d.d3, 0.0);
    }

    #[test]
    fn diffusion_cross_term_at_quarter_period() {
        let m = model();
        let d = m.diffusion(&PhaseState::new(FRAC_PI_4, 0.0, 0.0, 3.0));
        let g0 = 6.25 / 401.0;
        assert!((d.d3 + 1.5 * g0).abs() < 1e-15);
        assert!((d.d3 + 0.023379).abs() < 1e-6);
        assert_eq!(d.frame, (0.0, 1.0));
    }

    #[test]
    fn half_photon_field_has_no_momentum_diffusion() {
        let m = model();
        let a = 0.5f64.sqrt();
        let d = m.diffusion(&PhaseState::new(1.0, 0.0, a * 0.6, a * 0.8));
        assert!(d.d2.abs() < 1e-16);
    }

    #[test]
    fn degenerate_frame_uses_identity() {
        let m = model();
        let d = m.diffusion(&PhaseState::new(FRAC_PI_4, 0.0, 1e-12, 0.0));
        assert!(!d.frame_defined);
        assert_eq!(d.frame, (1.0, 0.0));
        assert_eq!(d.d3, 0.0);
        let mut diag = StepDiagnostics::default();
        let inc = correlate(&d, 1.0, [1.0, 2.0, 0.0], &mut diag);
        assert_eq!(diag.frame_undefined, 1);
        assert!((inc.da_r - d.d1.sqrt()).abs() < 1e-15);
        assert!((inc.da_i - 2.0 * d.d1.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn decoupled_noise_is_diagonal() {
        let d = DiffusionTriple { d1: 0.3, d2: 0.7, d3: 0.0, frame: (1.0, 0.0), frame_defined: true };
        let mut diag = StepDiagnostics::default();
        let inc = correlate(&d, 0.01, [1.0, -2.0, 0.5], &mut diag);
        let s = 0.1;
        assert!((inc.da_r - s * 0.3f64.sqrt()).abs() < 1e-15);
        assert!((inc.da_i + 2.0 * s * 0.3f64.sqrt()).abs() < 1e-15);
        assert!((inc.dp - 0.5 * s * 0.7f64.sqrt()).abs() < 1e-15);
        assert_eq!(diag.psd_violations, 0);
    }

    #[test]
    fn indefinite_block_is_projected_and_counted() {
        let eig = SymEigen2::new(1.0, 0.5, 0.0);
        assert!((eig.values[0] - (1.0 + 2f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((eig.values[1] - (1.0 - 2f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((eig.values[0] - 1.207).abs() < 1e-3 && (eig.values[1] + 0.207).abs() < 1e-3);

        let proj = eig.psd_projection();
        let det = proj[0][0] * proj[1][1] - proj[0][1] * proj[1][0];
        assert!(proj[0][0] >= 0.0 && proj[1][1] >= 0.0 && det.abs() < 1e-14);

        let d = DiffusionTriple { d1: 1.0, d2: 0.0, d3: 0.5, frame: (1.0, 0.0), frame_defined: true };
        assert!(!d.is_psd());
        let mut diag = StepDiagnostics::default();
        correlate(&d, 1.0, [0.1, 0.2, 0.3], &mut diag);
        assert_eq!(diag.psd_violations, 1);
        assert!((diag.min_eigenvalue_seen - eig.values[1]).abs() < 1e-15);
    }

    #[test]
    fn negative_momentum_diffusion_is_clamped() {
        let d = DiffusionTriple { d1: 0.25, d2: -0.01, d3: 0.0, frame: (1.0, 0.0), frame_defined: true };
        let mut diag = StepDiagnostics::default();
        let inc = correlate(&d, 1.0, [0.0, 0.0, 5.0], &mut diag);
        assert_eq!(inc.dp, 0.0);
        assert_eq!(diag.psd_violations, 1);
        assert_eq!(diag.min_eigenvalue_seen, -0.01);
    }

    #[test]
    fn eigen_decomposition_reconstructs_matrix() {
        for &(a, b, c) in &[(1.0, 0.5, 0.0), (0.2, -0.3, 0.9), (2.0, 0.0, -1.0), (-1.0, 0.0, 3.0), (0.5, 1e-9, 0.5)] {
            let e = SymEigen2::new(a, b, c);
            let mut m = [[0.0; 2]; 2];
            for (lam, v) in e.values.iter().zip(e.vectors.iter()) {
                m[0][0] += lam * v.0 * v.0;
                m[0][1] += lam * v.0 * v.1;
                m[1][1] += lam * v.1 * v.1;
            }
            assert!((m[0][0] - a).abs() < 1e-13 && (m[0][1] - b).abs() < 1e-13 && (m[1][1] - c).abs() < 1e-13);
            assert!(e.values[0] >= e.values[1]);
        }
    }

    #[test]
    fn step_is_deterministic_in_the_stream() {
        let m = model();
        let s0 = PhaseState::new(1.0, 3.0, -2.0, 0.5);
        let run = || {
            let mut rng = trajectory_rng(7, 3);
            let mut diag = StepDiagnostics::default();
            let mut s = s0;
            for _ in 0..1000 {
                s = m.step(&s, 1e-3, &mut rng, &mut diag).unwrap();
            }
            s
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_state_is_flagged() {
        let m = model();
        let mut rng = trajectory_rng(0, 0);
        let mut diag = StepDiagnostics::default();
        let s = PhaseState::new(0.0, f64::INFINITY, 1.0, 0.0);
        assert!(m.step(&s, 1e-3, &mut rng, &mut diag).is_none());
    }

    #[test]
    fn noiseless_step_is_drift_times_dt() {
        let m = model().with_options(DynamicsOptions {
            scheme: Scheme::EulerMaruyama,
            noise: false,
            frozen_field: false,
        });
        let s = PhaseState::new(0.7, 4.0, -2.0, 0.3);
        let r = m.drift(&s);
        let mut rng = trajectory_rng(0, 0);
        let mut diag = StepDiagnostics::default();
        let dt = 1e-4;
        let n = m.step(&s, dt, &mut rng, &mut diag).unwrap();
        assert_eq!(n.x, s.x + r.x * dt);
        assert_eq!(n.p, s.p + r.p * dt);
        assert_eq!(n.alpha_r, s.alpha_r + r.alpha_r * dt);
        assert_eq!(n.alpha_i, s.alpha_i + r.alpha_i * dt);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn cross_term_sign_and_symmetry(x in -10.0f64..10.0, ar in -5.0f64..5.0, ai in -5.0f64..5.0) {
                let m = model();
                let s = PhaseState::new(x, 0.0, ar, ai);
                let d = m.diffusion(&s);
                let (f, fp) = m.mode.eval(x);
                prop_assert!(d.d1 >= 0.0);
                if d.frame_defined && (f * fp).abs() > 1e-12 {
                    prop_assert_eq!(d.d3.signum(), (f * fp).signum());
                }
                let mat = d.matrix();
                for i in 0..3 { for j in 0..3 { prop_assert_eq!(mat[i][j], mat[j][i]); } }
            }

            #[test]
            fn rotation_round_trip(phi in 0.0f64..std::f64::consts::TAU, a in -5.0f64..5.0, b in -5.0f64..5.0) {
                let frame = (phi.cos(), phi.sin());
                let (r, i) = from_field_frame(frame, a, b);
                let (a2, b2) = to_field_frame(frame, r, i);
                prop_assert!((a - a2).abs() < 1e-14 && (b - b2).abs() < 1e-14);
            }

            #[test]
            fn cross_term_vanishes_at_nodes_and_antinodes(m_idx in -20i32..20, ar in -5.0f64..5.0) {
                let m = model();
                let x = m_idx as f64 * FRAC_PI_2;
                let d = m.diffusion(&PhaseState::new(x, 0.0, ar, 1.0));
                prop_assert!(d.d3.abs() < 1e-15 * (1.0 + ar.abs()));
            }
        }
    }
}
