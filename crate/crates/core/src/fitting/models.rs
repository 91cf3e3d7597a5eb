//! Trace models for fitting: the full rate model and multi-exponentials,
//! both optionally blurred by a Gaussian instrument response.

use alloc::string::String;
use alloc::vec::Vec;

use crate::dynamics::{self, IntegratorConfig, LaserSystem};
use crate::math;
use crate::model::{LaserParams, PumpDrive};
use crate::ode;

use super::FitError;

/// Which simulated quantity a trace represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// Photoluminescence, proportional to the lasing-level population decaying
    /// radiatively (∝ N_G/τ_r up to the free amplitude).
    Photoluminescence,
    /// Power coupled out of the cavity, ħω_p V_mode P/τ_p.
    OutputPower,
}

/// Rate-model trace: one pulse of the drive's train, observed through
/// `observable`. Trace time zero sits at the pulse peak.
#[derive(Debug, Clone)]
pub struct RateTraceModel {
    pub base: LaserParams,
    pub drive: PumpDrive,
    pub observable: Observable,
    pub integrator: IntegratorConfig,
    /// Gaussian instrument-response FWHM [s]; 0 disables the blur.
    pub irf_fwhm: f64,
}

impl RateTraceModel {
    pub fn new(base: LaserParams, drive: PumpDrive, observable: Observable) -> Self {
        let mut integrator = dynamics::default_config(&base);
        integrator.rel_tol = 1e-7;
        RateTraceModel {
            base,
            drive,
            observable,
            integrator,
            irf_fwhm: 0.0,
        }
    }

    /// Physical parameters this model exposes to the fitter, besides the
    /// `amplitude`, `baseline` and `t0` nuisances.
    pub const PHYSICAL: &'static [&'static str] = &[
        "tau_r",
        "tau_pc_nr",
        "tau_p",
        "f_cav",
        "f_pc",
        "g0",
        "eta",
        "tau_ef",
        "tau_er",
        "tau_enr",
        "power_avg",
    ];

    fn build(
        &self,
        names: &[String],
        values: &[f64],
    ) -> Result<(LaserParams, PumpDrive), FitError> {
        let mut p = self.base.clone();
        let mut d = self.drive;
        for (name, value) in names.iter().zip(values) {
            match name.as_str() {
                "amplitude" | "baseline" | "t0" => {}
                "tau_r" => p.tau_r = *value,
                "tau_pc_nr" => p.tau_pc_nr = *value,
                "tau_p" => p.tau_p = *value,
                "f_cav" => p.f_cav = *value,
                "f_pc" => p.f_pc = *value,
                "g0" => match &mut p.gain {
                    crate::model::GainModel::Linear { g0 } => *g0 = *value,
                    crate::model::GainModel::Logarithmic { g0, .. } => *g0 = *value,
                },
                "eta" => p.eta = *value,
                "tau_ef" => p.tau_ef = *value,
                "tau_er" => p.tau_er = *value,
                "tau_enr" => p.tau_enr = *value,
                "power_avg" => d = d.with_power(*value),
                other => {
                    return Err(FitError::UnknownParameter {
                        name: String::from(other),
                    })
                }
            }
        }
        Ok((p, d))
    }

    /// Clean (noise-free) observable at the requested times, given overrides
    /// for the named parameters. Applies t0 shift, IRF blur, amplitude and
    /// baseline.
    pub fn evaluate(
        &self,
        names: &[String],
        values: &[f64],
        sample_t: &[f64],
    ) -> Result<Vec<f64>, FitError> {
        let (params, drive) = self.build(names, values)?;
        params.validate().map_err(FitError::Param)?;
        drive.validate().map_err(FitError::Param)?;

        let lookup = |key: &str, default: f64| -> f64 {
            names
                .iter()
                .position(|n| n == key)
                .map(|i| values[i])
                .unwrap_or(default)
        };
        let amplitude = lookup("amplitude", 1.0);
        let baseline = lookup("baseline", 0.0);
        let t0 = lookup("t0", 0.0);

        let (pulse_center, pulse_fwhm) = match drive {
            PumpDrive::PulseTrain {
                pulse_fwhm,
                rep_period,
                ..
            } => (0.5 * rep_period, pulse_fwhm),
            PumpDrive::Cw { .. } => {
                return Err(FitError::BadSpec(
                    "rate-model traces require a pulse-train drive",
                ))
            }
        };

        let sigma_irf = self.irf_fwhm / (2.0 * math::sqrt(2.0 * core::f64::consts::LN_2));
        let pad = 3.0 * pulse_fwhm + 4.0 * sigma_irf;
        let first = sample_t.first().copied().unwrap_or(0.0);
        let last = sample_t.last().copied().unwrap_or(0.0);
        // shifted trace time t maps to absolute time pulse_center + t − t0
        let t_abs_start = (pulse_center + first - t0 - pad).max(0.0);
        let t_abs_end = pulse_center + last - t0 + pad;

        let cfg = dynamics::config_for_drive(&params, &drive, &self.integrator);
        let sys = LaserSystem {
            params: &params,
            drive: &drive,
        };
        let traj = ode::integrate(&sys, [0.0; 3], t_abs_start, t_abs_end, &cfg)
            .map_err(FitError::Integrate)?;

        let shape = |t_abs: f64| -> f64 {
            let y = traj.sample(t_abs);
            match self.observable {
                Observable::Photoluminescence => y[1] / params.tau_r,
                Observable::OutputPower => params.output_power(y[0]),
            }
        };

        let clean: Vec<f64> = if sigma_irf > 0.0 {
            convolve_gaussian(&|t| shape(pulse_center + t - t0), sample_t, sigma_irf)
        } else {
            sample_t
                .iter()
                .map(|t| shape(pulse_center + t - t0))
                .collect()
        };
        Ok(clean.iter().map(|v| amplitude * v + baseline).collect())
    }
}

/// Sum of one-sided exponentials `Σ ampᵢ·exp(−(t−t0)/τᵢ)·[t ≥ t0] + baseline`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiExpModel {
    pub components: usize,
    /// Gaussian instrument-response FWHM [s]; 0 disables the blur.
    pub irf_fwhm: f64,
}

impl MultiExpModel {
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 1..=self.components {
            names.push(alloc::format!("amp{i}"));
            names.push(alloc::format!("tau{i}"));
        }
        names.push(String::from("baseline"));
        names.push(String::from("t0"));
        names
    }

    pub fn evaluate(
        &self,
        names: &[String],
        values: &[f64],
        sample_t: &[f64],
    ) -> Result<Vec<f64>, FitError> {
        let lookup =
            |key: &str| -> Option<f64> { names.iter().position(|n| n == key).map(|i| values[i]) };
        let baseline = lookup("baseline").unwrap_or(0.0);
        let t0 = lookup("t0").unwrap_or(0.0);
        let mut comps: Vec<(f64, f64)> = Vec::with_capacity(self.components);
        for i in 1..=self.components {
            let amp = lookup(&alloc::format!("amp{i}"))
                .ok_or(FitError::BadSpec("multi-exponential amplitude missing"))?;
            let tau = lookup(&alloc::format!("tau{i}"))
                .ok_or(FitError::BadSpec("multi-exponential lifetime missing"))?;
            if !(tau > 0.0) {
                return Err(FitError::BadSpec(
                    "multi-exponential lifetime must be positive",
                ));
            }
            comps.push((amp, tau));
        }
        let sigma_irf = self.irf_fwhm / (2.0 * math::sqrt(2.0 * core::f64::consts::LN_2));
        let clean: Vec<f64> = sample_t
            .iter()
            .map(|t| {
                let dt = t - t0;
                comps
                    .iter()
                    .map(|(a, tau)| {
                        if sigma_irf > 0.0 {
                            a * exp_gaussian(dt, *tau, sigma_irf)
                        } else if dt < 0.0 {
                            0.0
                        } else {
                            a * math::exp(-dt / tau)
                        }
                    })
                    .sum()
            })
            .collect();
        Ok(clean.iter().map(|v| v + baseline).collect())
    }
}

/// One-sided exponential decay blurred by a Gaussian of width `sigma`:
/// the closed form `½ exp(σ²/2τ² − t/τ) erfc((σ/τ − t/σ)/√2)`, evaluated in
/// a form that stays finite when the exponent and the erfc underflow against
/// each other.
pub fn exp_gaussian(t: f64, tau: f64, sigma: f64) -> f64 {
    let b = (sigma / tau - t / sigma) / core::f64::consts::SQRT_2;
    if b < 25.0 {
        let a = sigma * sigma / (2.0 * tau * tau) - t / tau;
        0.5 * math::exp(a) * math::erfc(b)
    } else {
        // asymptotic erfc: the exponents combine to exactly −t²/2σ²
        let g = math::exp(-t * t / (2.0 * sigma * sigma));
        g / (2.0 * b * math::sqrt(core::f64::consts::PI)) * (1.0 - 1.0 / (2.0 * b * b))
    }
}

/// Blur `f` with a normalized Gaussian of width `sigma` and evaluate at the
/// sample times, by direct quadrature on a kernel-resolving grid. Intended
/// for smooth shapes; one-sided exponentials use [`exp_gaussian`] instead.
pub fn convolve_gaussian(f: &dyn Fn(f64) -> f64, sample_t: &[f64], sigma: f64) -> Vec<f64> {
    let dt = sigma / 24.0;
    let half = (6.0 * sigma / dt) as i64;
    let mut weights: Vec<f64> = Vec::with_capacity((2 * half + 1) as usize);
    let mut total = 0.0;
    for k in -half..=half {
        let u = k as f64 * dt;
        let w = math::exp(-u * u / (2.0 * sigma * sigma));
        weights.push(w);
        total += w;
    }
    sample_t
        .iter()
        .map(|t| {
            let mut acc = 0.0;
            for (idx, k) in (-half..=half).enumerate() {
                acc += weights[idx] * f(t - k as f64 * dt);
            }
            acc / total
        })
        .collect()
}
