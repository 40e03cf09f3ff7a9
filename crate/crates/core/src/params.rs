//! Physical parameters in reduced units.
//!
//! Every rate, detuning and energy is measured in units of the atomic
//! half-width `γ`; time in `1/γ`; position as the dimensionless phase
//! `x̃ = kx`; momentum in units of the photon momentum `ħk`. The atomic mass
//! only enters through the recoil parameter `ε = ħk²/(Mγ)`.
//!
//! The SI value of `γ` is carried along for reporting (μs, μK) and never
//! touches the dynamics.
//!
//! For ⁸⁷Rb on the D2 line (λ = 780.24 nm) the recoil frequency is
//! `ω_rec = ħk²/(2M) = 2π × 3.771 kHz`. With `γ = 2π × 3 MHz`:
//!
//! ```text
//! ε = ħk²/(Mγ) = 2 ω_rec / γ = 2 × 3.771e3 / 3e6 = 2.514e-3
//! ```

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default SI half-width: `γ = 2π × 3 MHz` in rad/s.
pub const GAMMA_SI_DEFAULT: f64 = 2.0 * PI * 3.0e6;

/// Recoil parameter for ⁸⁷Rb on the D2 line with the default `γ`.
pub const EPSILON_RB87: f64 = 2.0 * 3.771e3 / 3.0e6;

/// Second moment of the spontaneous emission pattern for circular polarisation.
pub const UBAR2_DEFAULT: f64 = 0.4;

const HBAR: f64 = 1.054_571_817e-34;
const K_B: f64 = 1.380_649e-23;

/// Parameters of the driven atom–cavity system in units of `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// SI value of `γ` in rad/s, used only for unit conversion.
    #[serde(default = "default_gamma_si")]
    pub gamma_si: f64,
    pub g: f64,
    /// Atom–pump detuning `ω_p − ω_A`.
    pub delta_a: f64,
    /// Cavity–pump detuning `ω_p − ω_C`.
    pub delta_c: f64,
    pub kappa: f64,
    pub eta: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon_recoil: f64,
    #[serde(default = "default_ubar2")]
    pub ubar2: f64,
}

fn default_gamma_si() -> f64 {
    GAMMA_SI_DEFAULT
}
fn default_epsilon() -> f64 {
    EPSILON_RB87
}
fn default_ubar2() -> f64 {
    UBAR2_DEFAULT
}

impl Default for SystemParams {
    /// Standard working point: `κ = γ/2`, `Δ_A = 20γ`, `Δ_C = 0`, `g = 2.5γ`, `η = 2κ`.
    fn default() -> Self {
        SystemParams {
            gamma_si: GAMMA_SI_DEFAULT,
            g: 2.5,
            delta_a: 20.0,
            delta_c: 0.0,
            kappa: 0.5,
            eta: 1.0,
            epsilon_recoil: EPSILON_RB87,
            ubar2: UBAR2_DEFAULT,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.gamma_si,
            self.g,
            self.delta_a,
            self.delta_c,
            self.kappa,
            self.eta,
            self.epsilon_recoil,
            self.ubar2,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("system parameters must be finite"));
        }
        if self.gamma_si <= 0.0 {
            return Err(Error::config("gamma_si must be positive"));
        }
        if self.kappa <= 0.0 {
            return Err(Error::config("kappa must be positive"));
        }
        if self.g < 0.0 {
            return Err(Error::config("g must be non-negative"));
        }
        if self.eta < 0.0 {
            return Err(Error::config("eta must be non-negative"));
        }
        if self.epsilon_recoil <= 0.0 {
            return Err(Error::config("epsilon_recoil must be positive"));
        }
        if !(0.0..=1.0).contains(&self.ubar2) {
            return Err(Error::config("ubar2 must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn derive(&self) -> DerivedParams {
        DerivedParams::from_params(self)
    }

    /// Length of one `1/γ` in microseconds.
    pub fn micros_per_time_unit(&self) -> f64 {
        1.0e6 / self.gamma_si
    }

    pub fn time_to_micros(&self, t: f64) -> f64 {
        t * self.micros_per_time_unit()
    }

    pub fn micros_to_time(&self, us: f64) -> f64 {
        us / self.micros_per_time_unit()
    }

    /// `ħγ / k_B` in microkelvin (≈ 144 μK for the default `γ`).
    pub fn microkelvin_per_energy_unit(&self) -> f64 {
        HBAR * self.gamma_si / K_B * 1.0e6
    }
}

/// Light shift and scattering rate per photon after eliminating the atomic dipole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Dispersive shift per photon, `U₀ = g²Δ_A/(Δ_A²+γ²)`.
    pub u0: f64,
    /// Absorptive rate per photon, `Γ₀ = g²γ/(Δ_A²+γ²)`.
    pub gamma0: f64,
}

impl DerivedParams {
    pub fn from_params(p: &SystemParams) -> Self {
        // γ = 1 in reduced units
        let denom = p.delta_a * p.delta_a + 1.0;
        let g2 = p.g * p.g;
        DerivedParams {
            u0: g2 * p.delta_a / denom,
            gamma0: g2 / denom,
        }
    }
}

/// Spatial profile of the cavity mode.
pub trait ModeFunction: Send + Sync {
    /// Returns `(f(x̃), f'(x̃))`.
    fn eval(&self, x: f64) -> (f64, f64);

    /// Lattice period of `f²`.
    fn period(&self) -> f64;
}

/// `f(x̃) = cos(x̃)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StandingWave;

impl ModeFunction for StandingWave {
    #[inline]
    fn eval(&self, x: f64) -> (f64, f64) {
        let (s, c) = x.sin_cos();
        (c, -s)
    }

    fn period(&self) -> f64 {
        PI
    }
}

/// Gradient of the intensity profile, `∂f² = 2 f f'`.
#[inline]
pub fn intensity_gradient<M: ModeFunction + ?Sized>(mode: &M, x: f64) -> f64 {
    let (f, fp) = mode.eval(x);
    2.0 * f * fp
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn working_point() -> SystemParams {
        SystemParams::default()
    }

    #[test]
    fn derived_values_at_working_point() {
        let d = working_point().derive();
        assert_eq!(d.u0, 125.0 / 401.0);
        assert_eq!(d.gamma0, 6.25 / 401.0);
        assert!((d.u0 - 0.312).abs() < 5e-4);
        assert!((d.gamma0 - 0.015586).abs() < 1e-6);
    }

    #[test]
    fn decoupled_and_resonant_atom() {
        let mut p = working_point();
        p.g = 0.0;
        let d = p.derive();
        assert_eq!((d.u0, d.gamma0), (0.0, 0.0));

        p.g = 1.0;
        p.delta_a = 0.0;
        let d = p.derive();
        assert_eq!((d.u0, d.gamma0), (0.0, 1.0));
    }

    #[test]
    fn red_detuning_flips_light_shift() {
        let mut p = working_point();
        p.delta_a = -20.0;
        let d = p.derive();
        assert!(d.u0 < 0.0 && d.gamma0 > 0.0);
    }

    #[test]
    fn standing_wave_special_points() {
        let m = StandingWave;
        assert_eq!(m.eval(0.0), (1.0, -0.0));
        let (f, fp) = m.eval(std::f64::consts::FRAC_PI_2);
        assert!(f.abs() < 1e-16 && (fp + 1.0).abs() < 1e-16);
        let (f, fp) = m.eval(FRAC_PI_4);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((f - h).abs() < 1e-15 && (fp + h).abs() < 1e-15);
        assert!((intensity_gradient(&m, 0.3) + (0.6f64).sin()).abs() < 1e-15);
    }

    #[test]
    fn rubidium_recoil_parameter() {
        assert!((EPSILON_RB87 - 2.514e-3).abs() < 1e-12);
        let p = working_point();
        assert!((p.microkelvin_per_energy_unit() - 144.0).abs() < 0.5);
        assert!((p.time_to_micros(p.micros_to_time(88.3)) - 88.3).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let base = working_point();
        assert!(base.validate().is_ok());
        for bad in [
            SystemParams { kappa: 0.0, ..base },
            SystemParams { g: -1.0, ..base },
            SystemParams { eta: -0.1, ..base },
            SystemParams { epsilon_recoil: 0.0, ..base },
            SystemParams { ubar2: 1.5, ..base },
            SystemParams { delta_c: f64::NAN, ..base },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn derived_identities(g in 0.0f64..10.0, da in -50.0f64..50.0) {
                let p = SystemParams { g, delta_a: da, ..SystemParams::default() };
                let d = p.derive();
                prop_assert!(d.gamma0 >= 0.0);
                if d.u0 != 0.0 { prop_assert_eq!(d.u0.signum(), da.signum()); }
                let lhs = d.u0 * d.u0 + d.gamma0 * d.gamma0;
                let rhs = g.powi(4) / (da * da + 1.0);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
                if d.gamma0 > 0.0 {
                    prop_assert!((d.u0 / d.gamma0 - da).abs() <= 1e-12 * da.abs().max(1.0));
                }
            }

            #[test]
            fn mode_derivative_matches_finite_difference(x in -20.0f64..20.0) {
                let m = StandingWave;
                let h = 1e-5;
                let fd = (m.eval(x + h).0 - m.eval(x - h).0) / (2.0 * h);
                let (f, fp) = m.eval(x);
                prop_assert!(f.abs() <= 1.0);
                prop_assert!((fd - fp).abs() <= 1e-6 * fp.abs().max(1e-3));
            }
        }
    }
}
