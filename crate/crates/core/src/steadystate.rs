//! Steady-state solutions, lasing curves, threshold analysis and differential
//! quantum efficiency.
//!
//! Two threshold routes are provided and cross-checked:
//!
//! * [`threshold_analytic`] evaluates the closed form obtained by solving the
//!   rate equations in steady state with one photon in the mode
//!   (`P·V_mode = 1`) and the lasing level at transparency (`N_G = N_tr`),
//!   neglecting the slow pump-level radiative recombination:
//!
//!   ```text
//!   L_th = ħω_p/(τ_p η) · V_a/V_mode
//!          · [ N_tr V_mode (F_PC τ_p/τ_r + τ_p/τ_nr) + 1 ] · (1 + τ_E,f/τ_E,nr)
//!   ```
//!
//!   The three bracket summands are reported separately so dominance claims
//!   can be inspected.
//!
//! * [`threshold_numeric`] solves the same steady-state threshold system
//!   numerically — the exact pump-level balance (τ_E,r included) together
//!   with the combined carrier+photon balance at transparency — by monotone
//!   root-finding of the pump power at which the mode holds one photon.
//!   Comparing the two quantifies exactly what the closed form neglects.
//!
//! [`solve_steady_state`] and [`lasing_curve`] work on the full nonlinear
//! model with no threshold conditions imposed, including the spontaneous
//! seeding of the mode; [`threshold_kink`] estimates a threshold from a
//! computed curve the way one would from a measured one.

use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::model::{LaserParams, LaserState, ParamError, PumpDrive};
use crate::roots;

#[derive(Debug, Clone, PartialEq)]
pub enum SteadyStateError {
    Param(ParamError),
    /// No steady state on the physical branch `Γ·G(N_G) < 1/τ_p` (for example
    /// photons or carriers accumulate without bound).
    NoPhysicalSolution {
        l_in: f64,
    },
    /// The one-photon condition was not reached below the bracket limit.
    ThresholdNotBracketed {
        max_power: f64,
    },
    /// A lasing-curve point failed; carries the offending grid entry.
    CurvePoint {
        index: usize,
        l_in: f64,
        source: alloc::boxed::Box<SteadyStateError>,
    },
    /// Grid not strictly increasing or fewer than 2 points.
    BadGrid,
    /// The curve does not extend far enough above threshold for a slope fit.
    InsufficientAboveThreshold {
        needed: usize,
        available: usize,
    },
    /// Steady-state residual exceeded tolerance (solver self-check).
    ResidualTooLarge {
        relative: f64,
    },
}

impl fmt::Display for SteadyStateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SteadyStateError::Param(e) => write!(f, "{e}"),
            SteadyStateError::NoPhysicalSolution { l_in } => {
                write!(f, "no physical-branch steady state at L_in = {l_in:e} W")
            }
            SteadyStateError::ThresholdNotBracketed { max_power } => write!(
                f,
                "one-photon threshold not bracketed below {max_power:e} W"
            ),
            SteadyStateError::CurvePoint {
                index,
                l_in,
                source,
            } => {
                write!(
                    f,
                    "lasing-curve point {index} (L_in = {l_in:e} W): {source}"
                )
            }
            SteadyStateError::BadGrid => write!(
                f,
                "power grid must be strictly increasing with at least 2 points"
            ),
            SteadyStateError::InsufficientAboveThreshold { needed, available } => write!(
                f,
                "need {needed} points in the above-threshold window, found {available}"
            ),
            SteadyStateError::ResidualTooLarge { relative } => {
                write!(f, "steady-state residual {relative:e} exceeds tolerance")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SteadyStateError {}

impl From<ParamError> for SteadyStateError {
    fn from(e: ParamError) -> Self {
        SteadyStateError::Param(e)
    }
}

/// Relative residual accepted from the steady-state solver.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Default upper power bound for threshold bracketing [W].
pub const DEFAULT_POWER_BRACKET: f64 = 1e3;

/// Solve the full rate equations in steady state at CW input power `l_in` [W].
///
/// `N_E` is closed-form; `(N_G, P)` follow from eliminating `P` through the
/// photon balance and root-finding the carrier balance on the physical branch
/// `Γ·G(N_G) < 1/τ_p`. The returned state satisfies all three equations to a
/// relative residual below [`RESIDUAL_TOL`].
pub fn solve_steady_state(params: &LaserParams, l_in: f64) -> Result<LaserState, SteadyStateError> {
    params.validate()?;
    if !(l_in >= 0.0) || !l_in.is_finite() {
        return Err(SteadyStateError::Param(ParamError {
            field: "l_in",
            reason: "must be finite and >= 0",
        }));
    }
    let pump = params.pump_rate(&PumpDrive::Cw { power_avg: l_in }, 0.0);
    if pump == 0.0 {
        return Ok(LaserState::ZERO);
    }
    let pump_decay = params.pump_level_decay();
    if pump_decay == 0.0 {
        // pump level never relaxes: carriers pile up forever
        return Err(SteadyStateError::NoPhysicalSolution { l_in });
    }
    let n_e = pump / pump_decay;
    let feed = n_e / params.tau_ef;
    if feed == 0.0 {
        return Ok(LaserState::new(0.0, 0.0, n_e));
    }

    let decay_g = params.lasing_level_decay();
    let cavity_loss = 1.0 / params.tau_p; // 0 when τ_p = ∞
    let n_clamp = params
        .gain
        .clamp_density(params.n_tr, params.gamma_conf, cavity_loss);

    let photon = |n: f64| -> f64 {
        let denom = cavity_loss - params.gamma_conf * params.gain_at(n);
        params.f_cav * n / params.tau_r / denom
    };
    // carrier balance; −∞-clamped so the bracket search stays well-posed
    let balance = |n: f64| -> f64 {
        let v = feed - n * decay_g - params.gamma_conf * params.gain_at(n) * photon(n);
        if v.is_finite() {
            v
        } else {
            -1e308
        }
    };

    let (n_g, p);
    if params.f_cav == 0.0 {
        // the mode is never seeded: P = 0 below clamping, pinned at the
        // clamping density above
        if decay_g == 0.0 {
            return Err(SteadyStateError::NoPhysicalSolution { l_in });
        }
        let n_free = feed / decay_g;
        if n_free < n_clamp {
            n_g = n_free;
            p = 0.0;
        } else {
            if cavity_loss == 0.0 {
                return Err(SteadyStateError::NoPhysicalSolution { l_in });
            }
            n_g = n_clamp;
            p = (feed - n_clamp * decay_g) / cavity_loss;
        }
    } else {
        let hi = n_clamp * (1.0 - 1e-13);
        if balance(hi) > 0.0 {
            return Err(SteadyStateError::NoPhysicalSolution { l_in });
        }
        let rough = roots::brent(balance, 0.0, hi, 1e-15)
            .map_err(|_| SteadyStateError::NoPhysicalSolution { l_in })?;
        n_g = polish_root(params, feed, decay_g, cavity_loss, rough, hi);
        p = photon(n_g);
    }

    let state = LaserState::new(p.max(0.0), n_g, n_e);
    let residual = steady_residual(params, &state, pump);
    if residual > RESIDUAL_TOL {
        return Err(SteadyStateError::ResidualTooLarge { relative: residual });
    }
    Ok(state)
}

/// Newton refinement of the carrier balance with the analytic derivative;
/// needed because near gain clamping the balance is extremely steep and a
/// bracketing tolerance on N_G alone leaves a visible residual.
fn polish_root(
    params: &LaserParams,
    feed: f64,
    decay_g: f64,
    cavity_loss: f64,
    mut n: f64,
    hi: f64,
) -> f64 {
    for _ in 0..8 {
        let g = params.gain_at(n);
        let dg = params.gain.derivative(n, params.n_tr);
        let denom = cavity_loss - params.gamma_conf * g;
        let p = params.f_cav * n / params.tau_r / denom;
        let dp = params.f_cav / params.tau_r / denom
            + params.f_cav * n / params.tau_r * params.gamma_conf * dg / (denom * denom);
        let f = feed - n * decay_g - params.gamma_conf * g * p;
        let fp = -decay_g - params.gamma_conf * (dg * p + g * dp);
        if fp == 0.0 || !f.is_finite() {
            break;
        }
        let step = f / fp;
        let next = (n - step).clamp(0.0, hi);
        if next == n {
            break;
        }
        n = next;
        if math::abs(step) <= 1e-16 * n {
            break;
        }
    }
    n
}

/// Largest per-equation relative residual of the rate equations at `state`.
fn steady_residual(params: &LaserParams, state: &LaserState, pump: f64) -> f64 {
    let d = params.rhs(state, pump);
    let stim = params.gamma_conf * params.gain_at(state.n_g) * state.p;
    // scale each equation by its largest constituent term
    let s_p = math::abs(stim)
        .max(params.f_cav * state.n_g / params.tau_r)
        .max(state.p / params.tau_p)
        .max(1e-300);
    let s_g = math::abs(stim)
        .max(state.n_e / params.tau_ef)
        .max(state.n_g * params.lasing_level_decay())
        .max(1e-300);
    let s_e = pump.max(state.n_e * params.pump_level_decay()).max(1e-300);
    (math::abs(d.dp) / s_p)
        .max(math::abs(d.dn_g) / s_g)
        .max(math::abs(d.dn_e) / s_e)
}

/// Output power versus input power along a grid, with the underlying steady
/// states.
#[derive(Debug, Clone, PartialEq)]
pub struct LasingCurve {
    /// Input powers [W], strictly increasing.
    pub l_in: Vec<f64>,
    /// Output powers [W].
    pub l_out: Vec<f64>,
    /// Lasing-level carrier density at each point [m⁻³].
    pub n_g: Vec<f64>,
    /// Photon density at each point [m⁻³].
    pub p: Vec<f64>,
}

impl LasingCurve {
    pub fn len(&self) -> usize {
        self.l_in.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l_in.is_empty()
    }
}

/// Steady states over an increasing grid of input powers.
pub fn lasing_curve(params: &LaserParams, grid: &[f64]) -> Result<LasingCurve, SteadyStateError> {
    if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] < 0.0 {
        return Err(SteadyStateError::BadGrid);
    }
    let mut curve = LasingCurve {
        l_in: Vec::with_capacity(grid.len()),
        l_out: Vec::with_capacity(grid.len()),
        n_g: Vec::with_capacity(grid.len()),
        p: Vec::with_capacity(grid.len()),
    };
    for (index, &l) in grid.iter().enumerate() {
        let s = solve_steady_state(params, l).map_err(|e| SteadyStateError::CurvePoint {
            index,
            l_in: l,
            source: alloc::boxed::Box::new(e),
        })?;
        curve.l_in.push(l);
        curve.l_out.push(params.output_power(s.p));
        curve.n_g.push(s.n_g);
        curve.p.push(s.p);
    }
    Ok(curve)
}

/// The closed-form threshold, with the bracket summands broken out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticThreshold {
    /// Threshold input power [W].
    pub l_th: f64,
    /// `N_tr V_mode F_PC τ_p/τ_r` — leaky-mode radiative summand.
    pub bracket_radiative: f64,
    /// `N_tr V_mode τ_p/τ_nr` — nonradiative summand.
    pub bracket_nonradiative: f64,
    /// The `+1` photon summand.
    pub bracket_unity: f64,
    /// `1 + τ_E,f/τ_E,nr` pump-level factor.
    pub pump_level_factor: f64,
}

/// Evaluate the closed-form threshold.
///
/// The power is computed in the algebraically identical form
/// `ħω_p V_a/η · [N_tr (F_PC/τ_r + 1/τ_nr) + 1/(τ_p V_mode)] · (1 + τ_E,f/τ_E,nr)`
/// so that an infinite τ_p stays finite; the reported bracket summands are the
/// printed ones.
pub fn threshold_analytic(params: &LaserParams) -> Result<AnalyticThreshold, SteadyStateError> {
    params.validate()?;
    let nv = params.n_tr * params.v_mode;
    let bracket_radiative = nv * params.f_pc * params.tau_p / params.tau_r;
    let bracket_nonradiative = nv * params.tau_p / params.tau_pc_nr;
    let pump_level_factor = 1.0 + params.tau_ef / params.tau_enr;
    let loss_rate = params.n_tr * params.pc_region_decay() + 1.0 / (params.tau_p * params.v_mode);
    let l_th = params.photon_energy() * params.v_a / params.eta * loss_rate * pump_level_factor;
    Ok(AnalyticThreshold {
        l_th,
        bracket_radiative,
        bracket_nonradiative,
        bracket_unity: 1.0,
        pump_level_factor,
    })
}

/// Numeric threshold: the input power at which the steady-state threshold
/// system reaches one photon in the mode, found by monotone root-finding with
/// relative tolerance 1e-6. Unlike the closed form, the pump-level radiative
/// lifetime τ_E,r participates fully.
pub fn threshold_numeric(params: &LaserParams) -> Result<f64, SteadyStateError> {
    threshold_numeric_with(params, DEFAULT_POWER_BRACKET)
}

/// [`threshold_numeric`] with a caller-chosen bracket limit [W].
pub fn threshold_numeric_with(
    params: &LaserParams,
    max_power: f64,
) -> Result<f64, SteadyStateError> {
    params.validate()?;
    let photon_excess = |l: f64| -> f64 {
        let v = threshold_photon_number(params, l) - 1.0;
        v.clamp(-1e308, 1e308)
    };
    if !(photon_excess(max_power) > 0.0) {
        return Err(SteadyStateError::ThresholdNotBracketed { max_power });
    }
    // expand the bracket downward so Brent starts tight around the crossing
    let mut lo = max_power;
    while lo > 1e-30 && photon_excess(lo * 0.1) > 0.0 {
        lo *= 0.1;
    }
    roots::brent(photon_excess, lo * 0.1, lo.min(max_power), 1e-6)
        .map_err(|_| SteadyStateError::ThresholdNotBracketed { max_power })
}

/// Photon number `P·V_mode` sustained at transparency for input power `l` [W]:
/// the pump-level balance (all three decay channels) feeds the lasing level,
/// and the combined carrier+photon balance at `N_G = N_tr` fixes `P`.
fn threshold_photon_number(params: &LaserParams, l: f64) -> f64 {
    let pump = params.pump_rate(&PumpDrive::Cw { power_avg: l }, 0.0);
    let n_e = pump / params.pump_level_decay();
    let feed = n_e / params.tau_ef;
    let surplus = feed - params.n_tr * params.pc_region_decay();
    surplus * params.tau_p * params.v_mode
}

/// Both threshold routes side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub l_th_numeric: f64,
    pub l_th_analytic: f64,
    pub analytic: AnalyticThreshold,
}

pub fn threshold_report(params: &LaserParams) -> Result<ThresholdReport, SteadyStateError> {
    let analytic = threshold_analytic(params)?;
    let l_th_numeric = threshold_numeric(params)?;
    Ok(ThresholdReport {
        l_th_numeric,
        l_th_analytic: analytic.l_th,
        analytic,
    })
}

/// Threshold estimate from a computed lasing curve, experimental style: the
/// best two-segment linear fit to (L_in, L_out) and the intersection of the
/// two segments.
///
/// A curve with no slope change (entirely below threshold, or entirely above)
/// has no kink to find and is rejected.
pub fn threshold_kink(curve: &LasingCurve) -> Result<f64, SteadyStateError> {
    let n = curve.len();
    if n < 5 {
        return Err(SteadyStateError::BadGrid);
    }
    let mut best = (f64::INFINITY, 0usize);
    for split in 2..n - 1 {
        let left = line_fit(&curve.l_in[..split], &curve.l_out[..split]);
        let right = line_fit(&curve.l_in[split..], &curve.l_out[split..]);
        let sse = left.2 + right.2;
        if sse < best.0 {
            best = (sse, split);
        }
    }
    let split = best.1;
    let (m1, b1, _) = line_fit(&curve.l_in[..split], &curve.l_out[..split]);
    let (m2, b2, _) = line_fit(&curve.l_in[split..], &curve.l_out[split..]);
    if !(m2 > 1.05 * m1.max(0.0)) {
        return Err(SteadyStateError::InsufficientAboveThreshold {
            needed: 2,
            available: 0,
        });
    }
    let kink = (b1 - b2) / (m2 - m1);
    Ok(kink.clamp(curve.l_in[0], curve.l_in[n - 1]))
}

fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        sxx += (x[i] - xm) * (x[i] - xm);
        sxy += (x[i] - xm) * (y[i] - ym);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = ym - slope * xm;
    let mut sse = 0.0;
    for i in 0..x.len() {
        let r = y[i] - (intercept + slope * x[i]);
        sse += r * r;
    }
    (slope, intercept, sse)
}

/// Default above-threshold window for slope fits, in multiples of the curve's
/// kink threshold.
pub const SLOPE_WINDOW: (f64, f64) = (1.5, 3.0);

/// Differential quantum efficiency: least-squares slope d(L_out)/d(L_in) over
/// the above-threshold linear region. The threshold reference is the curve's
/// own two-segment kink; the window is `SLOPE_WINDOW` times that.
pub fn differential_efficiency(curve: &LasingCurve) -> Result<f64, SteadyStateError> {
    differential_efficiency_with(curve, SLOPE_WINDOW)
}

pub fn differential_efficiency_with(
    curve: &LasingCurve,
    window: (f64, f64),
) -> Result<f64, SteadyStateError> {
    let kink = threshold_kink(curve)?;
    let last = *curve.l_in.last().unwrap();
    if last < 2.0 * kink {
        return Err(SteadyStateError::InsufficientAboveThreshold {
            needed: 2,
            available: 0,
        });
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in 0..curve.len() {
        if curve.l_in[i] >= window.0 * kink && curve.l_in[i] <= window.1 * kink {
            xs.push(curve.l_in[i]);
            ys.push(curve.l_out[i]);
        }
    }
    if xs.len() < 2 {
        return Err(SteadyStateError::InsufficientAboveThreshold {
            needed: 2,
            available: xs.len(),
        });
    }
    Ok(line_fit(&xs, &ys).0)
}
