//! Nonlinear least-squares trace fitting, closed-form lifetime decomposition,
//! enhancement-factor and surface-velocity extraction, and seeded synthetic
//! trace generation.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::dynamics::{self, TimeTrace, TraceError, TraceMeta, WindowPolicy};
use crate::math;
use crate::model::{LaserParams, ParamError};
use crate::ode::IntegrateError;
use crate::steadystate;
use crate::surface;

mod lm;
mod models;

pub use lm::{least_squares, FitOptions, FitResult};
pub use models::{convolve_gaussian, exp_gaussian, MultiExpModel, Observable, RateTraceModel};

#[derive(Debug, Clone, PartialEq)]
pub enum FitError {
    Param(ParamError),
    Trace(TraceError),
    Integrate(IntegrateError),
    UnknownParameter {
        name: String,
    },
    BadSpec(&'static str),
    NotEnoughData {
        residuals: usize,
        params: usize,
    },
    /// Residuals were non-finite at the initial guess.
    EvaluationFailed,
    /// Lifetime decomposition produced a negative nonradiative rate.
    InconsistentLifetimes {
        rate: f64,
    },
    /// The cavity lifetime is not shorter than the background decay.
    CavityNotFaster {
        tau_cav: f64,
    },
}

impl fmt::Display for FitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitError::Param(e) => write!(f, "{e}"),
            FitError::Trace(e) => write!(f, "{e}"),
            FitError::Integrate(e) => write!(f, "{e}"),
            FitError::UnknownParameter { name } => write!(f, "unknown fit parameter `{name}`"),
            FitError::BadSpec(msg) => write!(f, "{msg}"),
            FitError::NotEnoughData { residuals, params } => {
                write!(
                    f,
                    "{residuals} residuals cannot constrain {params} parameters"
                )
            }
            FitError::EvaluationFailed => write!(f, "model evaluation non-finite at initial guess"),
            FitError::InconsistentLifetimes { rate } => write!(
                f,
                "nonradiative rate came out negative ({rate:e} s⁻¹): inputs inconsistent"
            ),
            FitError::CavityNotFaster { tau_cav } => write!(
                f,
                "cavity lifetime {tau_cav:e} s is not shorter than the background decay"
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for FitError {}

impl From<ParamError> for FitError {
    fn from(e: ParamError) -> Self {
        FitError::Param(e)
    }
}

impl From<TraceError> for FitError {
    fn from(e: TraceError) -> Self {
        FitError::Trace(e)
    }
}

// ---------------------------------------------------------------------------
// Closed-form extractions
// ---------------------------------------------------------------------------

/// Decompose measured bulk and patterned-region lifetimes into the radiative
/// lifetime and the nonradiative lifetime.
///
/// The bulk region has unit emission factor and negligible nonradiative loss,
/// so `τ_r = τ_bulk`; the patterned region obeys
/// `1/τ_PC = F_PC/τ_r + 1/τ_PC,nr`, inverted here for `τ_PC,nr`. Equal rates
/// give an infinite nonradiative lifetime (channel absent); a negative
/// remainder is an error.
pub fn extract_lifetimes(tau_bulk: f64, tau_pc: f64, f_pc: f64) -> Result<(f64, f64), FitError> {
    if !(tau_bulk > 0.0 && tau_pc > 0.0 && tau_pc <= tau_bulk) {
        return Err(FitError::BadSpec("need tau_bulk >= tau_pc > 0"));
    }
    if !(f_pc > 0.0 && f_pc <= 1.0) {
        return Err(FitError::BadSpec("f_pc must be in (0, 1]"));
    }
    let tau_r = tau_bulk;
    let nr_rate = 1.0 / tau_pc - f_pc / tau_r;
    if nr_rate < 0.0 {
        return Err(FitError::InconsistentLifetimes { rate: nr_rate });
    }
    Ok((tau_r, 1.0 / nr_rate))
}

/// Spontaneous-emission enhancement factor from a measured cavity lifetime:
/// the exact inversion of `1/τ_cav = (F_cav + F_PC)/τ_r + 1/τ_PC,nr`.
pub fn extract_fcav(tau_cav: f64, tau_r: f64, tau_pc_nr: f64, f_pc: f64) -> Result<f64, FitError> {
    if !(tau_cav > 0.0 && tau_r > 0.0 && tau_pc_nr > 0.0) {
        return Err(FitError::BadSpec("lifetimes must be positive"));
    }
    let f_cav = tau_r * (1.0 / tau_cav - 1.0 / tau_pc_nr) - f_pc;
    if f_cav < -1e-9 {
        return Err(FitError::CavityNotFaster { tau_cav });
    }
    Ok(f_cav.max(0.0))
}

/// Measured lifetimes of one sample with the quantities derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifetimeSet {
    /// Measured decay lifetime of the unpatterned bulk region [s].
    pub tau_bulk: f64,
    /// Measured decay lifetime of the patterned mirror region [s].
    pub tau_pc: f64,
    /// Measured decay lifetime of a non-lasing cavity [s], when available.
    pub tau_cav: Option<f64>,
    /// Emission quenching factor used in the decomposition.
    pub f_pc: f64,
    /// Derived radiative lifetime [s].
    pub tau_r: f64,
    /// Derived nonradiative lifetime [s].
    pub tau_pc_nr: f64,
    /// Derived enhancement factor, when `tau_cav` was given.
    pub f_cav: Option<f64>,
}

impl LifetimeSet {
    /// Run the extraction ops on a set of measured lifetimes.
    pub fn from_measured(
        tau_bulk: f64,
        tau_pc: f64,
        tau_cav: Option<f64>,
        f_pc: f64,
    ) -> Result<Self, FitError> {
        let (tau_r, tau_pc_nr) = extract_lifetimes(tau_bulk, tau_pc, f_pc)?;
        let f_cav = match tau_cav {
            Some(tc) => Some(extract_fcav(tc, tau_r, tau_pc_nr, f_pc)?),
            None => None,
        };
        Ok(LifetimeSet {
            tau_bulk,
            tau_pc,
            tau_cav,
            f_pc,
            tau_r,
            tau_pc_nr,
            f_cav,
        })
    }
}

/// Before/after comparison of a passivation treatment.
#[derive(Debug, Clone, PartialEq)]
pub struct PassivationReport {
    pub before: LifetimeSet,
    pub after: LifetimeSet,
    /// Hole radius used for the velocity extraction [m].
    pub radius: f64,
    /// Surface recombination velocities [m/s].
    pub s_before: f64,
    pub s_after: f64,
    /// `(1/τ_PC,nr before) / (1/τ_PC,nr after)`.
    pub nr_rate_reduction: f64,
    /// Predicted threshold reduction from the closed-form threshold ratio.
    pub threshold_reduction: f64,
}

/// Combine lifetime extractions into surface velocities and the predicted
/// threshold reduction, using the bundled parameter set as the template for
/// everything the lifetime sets do not fix.
pub fn passivation_report(
    before: &LifetimeSet,
    after: &LifetimeSet,
    radius: f64,
) -> Result<PassivationReport, FitError> {
    passivation_report_with(before, after, radius, &crate::presets::passivated())
}

pub fn passivation_report_with(
    before: &LifetimeSet,
    after: &LifetimeSet,
    radius: f64,
    template: &LaserParams,
) -> Result<PassivationReport, FitError> {
    if !(radius > 0.0) {
        return Err(FitError::BadSpec("radius must be positive"));
    }
    let s_before = surface::s_from_tau_nr(before.tau_pc_nr, radius);
    let s_after = surface::s_from_tau_nr(after.tau_pc_nr, radius);
    let nr_rate_reduction = after.tau_pc_nr / before.tau_pc_nr;

    let with_set = |set: &LifetimeSet| -> LaserParams {
        let mut p = template.clone();
        p.tau_r = set.tau_r;
        p.tau_pc_nr = set.tau_pc_nr;
        p.f_pc = set.f_pc;
        if let Some(f_cav) = set.f_cav {
            p.f_cav = f_cav;
        }
        p
    };
    let th_before = steadystate::threshold_analytic(&with_set(before))
        .map_err(|_| FitError::BadSpec("threshold template invalid"))?;
    let th_after = steadystate::threshold_analytic(&with_set(after))
        .map_err(|_| FitError::BadSpec("threshold template invalid"))?;

    Ok(PassivationReport {
        before: *before,
        after: *after,
        radius,
        s_before,
        s_after,
        nr_rate_reduction,
        threshold_reduction: th_before.l_th / th_after.l_th,
    })
}

// ---------------------------------------------------------------------------
// Trace fitting
// ---------------------------------------------------------------------------

/// The model family a trace is fitted with.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)] // the rate model carries its parameter set
pub enum TraceModel {
    Rate(RateTraceModel),
    MultiExponential(MultiExpModel),
}

impl TraceModel {
    pub fn evaluate(
        &self,
        names: &[String],
        values: &[f64],
        sample_t: &[f64],
    ) -> Result<Vec<f64>, FitError> {
        match self {
            TraceModel::Rate(m) => m.evaluate(names, values, sample_t),
            TraceModel::MultiExponential(m) => m.evaluate(names, values, sample_t),
        }
    }

    fn known_parameter(&self, name: &str) -> bool {
        match self {
            TraceModel::Rate(_) => {
                RateTraceModel::PHYSICAL.contains(&name)
                    || matches!(name, "amplitude" | "baseline" | "t0")
            }
            TraceModel::MultiExponential(m) => m.parameter_names().iter().any(|n| n == name),
        }
    }
}

/// Which parameters to free, with optional starting values and bounds;
/// anything not overridden uses the documented seeding policy (tail fit for
/// decay constants, 10–90% rise for the feed time, data peak and minimum for
/// amplitude and baseline).
#[derive(Debug, Clone, Default)]
pub struct FitSpec {
    pub free: Vec<String>,
    pub init: Vec<(String, f64)>,
    pub bounds: Vec<(String, f64, f64)>,
}

impl FitSpec {
    pub fn free(names: &[&str]) -> Self {
        FitSpec {
            free: names.iter().map(|s| String::from(*s)).collect(),
            ..FitSpec::default()
        }
    }

    pub fn with_init(mut self, name: &str, value: f64) -> Self {
        self.init.push((String::from(name), value));
        self
    }

    pub fn with_bounds(mut self, name: &str, lo: f64, hi: f64) -> Self {
        self.bounds.push((String::from(name), lo, hi));
        self
    }
}

/// Fit a trace with the chosen model by damped least squares.
///
/// Deterministic for identical inputs. Amplitude and baseline enter as
/// ordinary parameters; free them in the spec for measured data.
pub fn fit_trace(
    model: &TraceModel,
    trace: &TimeTrace,
    spec: &FitSpec,
    opts: &FitOptions,
) -> Result<FitResult, FitError> {
    trace.validate()?;
    if spec.free.is_empty() {
        return Err(FitError::BadSpec("no free parameters"));
    }
    for name in &spec.free {
        if !model.known_parameter(name) {
            return Err(FitError::UnknownParameter { name: name.clone() });
        }
    }

    let names = spec.free.clone();
    let mut init = Vec::with_capacity(names.len());
    let mut lower = Vec::with_capacity(names.len());
    let mut upper = Vec::with_capacity(names.len());
    let mut scales = Vec::with_capacity(names.len());
    let seeds = SeedValues::from_trace(trace);
    for name in &names {
        let (mut v, mut lo, mut hi) = default_parameter(model, name, &seeds);
        for (n, ov) in &spec.init {
            if n == name {
                v = *ov;
            }
        }
        for (n, l, h) in &spec.bounds {
            if n == name {
                lo = *l;
                hi = *h;
            }
        }
        init.push(v.clamp(lo, hi));
        lower.push(lo);
        upper.push(hi);
        scales.push(parameter_scale(name, v, &seeds, trace));
    }

    least_squares(
        |values: &[f64]| {
            let y = model.evaluate(&names, values, &trace.t)?;
            Ok(y.iter().zip(&trace.y).map(|(m, d)| m - d).collect())
        },
        &names,
        &init,
        &lower,
        &upper,
        &scales,
        opts,
    )
}

/// Characteristic magnitude per parameter, for difference steps and stopping.
/// Falls back to data-derived scales when the starting value is zero.
fn parameter_scale(name: &str, init: f64, seeds: &SeedValues, trace: &TimeTrace) -> f64 {
    if math::abs(init) > 0.0 && init.is_finite() {
        return math::abs(init);
    }
    let data_scale = math::abs(seeds.peak)
        .max(math::abs(seeds.floor))
        .max(1e-300);
    let dt = (trace.t[trace.len() - 1] - trace.t[0]) / trace.len() as f64;
    if name == "baseline" || name == "amplitude" || name.starts_with("amp") {
        data_scale
    } else if name == "t0" {
        dt
    } else if name.starts_with("tau") {
        seeds.tau_decay
    } else {
        1.0
    }
}

struct SeedValues {
    tau_decay: f64,
    tau_rise: f64,
    peak: f64,
    floor: f64,
}

impl SeedValues {
    fn from_trace(trace: &TimeTrace) -> Self {
        let span = trace.t[trace.len() - 1] - trace.t[0];
        let tau_decay = dynamics::extract_decay_time(trace, &WindowPolicy::default())
            .map(|f| f.tau)
            .unwrap_or(span / 3.0)
            .clamp(1e-15, 10.0 * span.max(1e-15));
        let tau_rise = dynamics::extract_rise_time(trace)
            .unwrap_or(tau_decay / 5.0)
            .clamp(1e-15, 10.0 * span.max(1e-15));
        let peak = trace.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let floor = trace.y.iter().cloned().fold(f64::INFINITY, f64::min);
        SeedValues {
            tau_decay,
            tau_rise,
            peak,
            floor,
        }
    }
}

fn default_parameter(model: &TraceModel, name: &str, seeds: &SeedValues) -> (f64, f64, f64) {
    const TAU_LO: f64 = 1e-16;
    const TAU_HI: f64 = 1e-3;
    match model {
        TraceModel::Rate(m) => match name {
            "tau_r" => (m.base.tau_r, TAU_LO, TAU_HI),
            "tau_pc_nr" => (seeds.tau_decay, TAU_LO, TAU_HI),
            "tau_p" => (m.base.tau_p, TAU_LO, TAU_HI),
            "f_cav" => (m.base.f_cav, 0.0, 1e4),
            "f_pc" => (m.base.f_pc, 0.0, 1.0),
            "g0" => (m.base.gain.g0(), 1e8, 1e18),
            "eta" => (m.base.eta, 1e-6, 1.0),
            "tau_ef" => (seeds.tau_rise, TAU_LO, TAU_HI),
            "tau_er" => (m.base.tau_er.min(TAU_HI), TAU_LO, TAU_HI),
            "tau_enr" => (m.base.tau_enr.min(TAU_HI), TAU_LO, TAU_HI),
            "power_avg" => (m.drive.power_avg(), 0.0, 1e3),
            "amplitude" => (1.0, 0.0, 1e30),
            "baseline" => (seeds.floor.min(0.0), -1e30, 1e30),
            _ => (0.0, -1e30, 1e30),
        },
        TraceModel::MultiExponential(_) => {
            if name.starts_with("amp") {
                (seeds.peak.max(1e-30), -1e30, 1e30)
            } else if let Some(index) = name.strip_prefix("tau") {
                // stagger the seeds so multiple components start apart
                let idx: f64 = index.parse().unwrap_or(1.0);
                (seeds.tau_decay / math::powf(3.0, idx - 1.0), TAU_LO, TAU_HI)
            } else if name == "baseline" {
                (seeds.floor, -1e30, 1e30)
            } else {
                // t0
                (0.0, -1e-6, 1e-6)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Synthetic traces
// ---------------------------------------------------------------------------

/// Additive Gaussian noise, relative to the clean-trace peak, with the seed
/// that makes it reproducible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma_rel: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec {
        sigma_rel: 0.0,
        seed: 0,
    };
}

/// Generate a simulated trace at the given sample times.
///
/// With zero noise and no instrument response this is exactly the simulated
/// observable at the sample points. Byte-reproducible for a fixed seed.
pub fn synth_trace(
    model: &RateTraceModel,
    sample_t: &[f64],
    noise: &NoiseSpec,
) -> Result<TimeTrace, FitError> {
    if !(noise.sigma_rel >= 0.0) {
        return Err(FitError::BadSpec("noise sigma must be >= 0"));
    }
    let clean = model.evaluate(&[], &[], sample_t)?;
    let peak = clean.iter().cloned().fold(0.0f64, f64::max);
    let sigma_abs = noise.sigma_rel * peak;
    let mut y = clean;
    if sigma_abs > 0.0 {
        let mut rng = noise_rng(noise.seed);
        for v in &mut y {
            *v += sigma_abs * standard_normal(&mut rng);
        }
    }
    let meta = TraceMeta {
        noise_sigma: if sigma_abs > 0.0 {
            Some(sigma_abs)
        } else {
            None
        },
        irf_fwhm: if model.irf_fwhm > 0.0 {
            Some(model.irf_fwhm)
        } else {
            None
        },
    };
    Ok(TimeTrace::new(sample_t.to_vec(), y)?.with_meta(meta))
}

/// Deterministic stream cipher RNG for seeded noise.
pub fn noise_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal deviate by the Box–Muller transform.
pub fn standard_normal<R: RngCore>(rng: &mut R) -> f64 {
    let u1 = ((rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / 9007199254740993.0);
    let u2 = (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0);
    math::sqrt(-2.0 * math::ln(u1)) * math::cos(2.0 * core::f64::consts::PI * u2)
}
