//! Physical types and the right-hand side of the three-level rate equations.
//!
//! The model couples the cavity photon density `P`, the lasing-level carrier
//! density `N_G` (resonant with the cavity) and the pump-level carrier density
//! `N_E` (populated by above-bandgap absorption):
//!
//! ```text
//! dP/dt   =  Γ G(N_G) P + F_cav N_G / τ_r − P / τ_p
//! dN_G/dt =  N_E / τ_E,f − N_G ((F_cav + F_PC)/τ_r + 1/τ_PC,nr) − Γ G(N_G) P
//! dN_E/dt =  η L_in / (ħω_p V_a) − N_E (1/τ_E,r + 1/τ_E,nr + 1/τ_E,f)
//! ```
//!
//! `F_cav` is the spontaneous-emission enhancement into the lasing mode,
//! `F_PC ≈ 0.2` the quenching factor for emission into the photonic-crystal
//! leaky modes, and `1/τ_PC,nr` the nonradiative surface-recombination rate.
//! All three state components are number densities over a common reference
//! volume; the photon number in the mode is `P · V_mode`.
//!
//! Lifetimes may be `f64::INFINITY` to disable a decay channel. All values SI.

use core::fmt;

use crate::math;
use crate::units;

/// Gain as a function of lasing-level carrier density.
///
/// Both forms vanish exactly at the transparency density `n_tr`, which is the
/// only property the threshold analysis relies on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainModel {
    /// `g0 · (n/n_tr − 1)`
    Linear { g0: f64 },
    /// `g0 · ln(max(n, n_floor)/n_tr)`; `n_floor` keeps the logarithm finite.
    Logarithmic { g0: f64, n_floor: f64 },
}

impl GainModel {
    pub fn g0(&self) -> f64 {
        match *self {
            GainModel::Linear { g0 } => g0,
            GainModel::Logarithmic { g0, .. } => g0,
        }
    }

    /// Gain rate [s⁻¹] at carrier density `n` for transparency density `n_tr`.
    pub fn eval(&self, n: f64, n_tr: f64) -> f64 {
        match *self {
            GainModel::Linear { g0 } => g0 * (n / n_tr - 1.0),
            GainModel::Logarithmic { g0, n_floor } => {
                let n_eff = if n > n_floor { n } else { n_floor };
                g0 * math::ln(n_eff / n_tr)
            }
        }
    }

    /// dG/dn at carrier density `n`.
    pub fn derivative(&self, n: f64, n_tr: f64) -> f64 {
        match *self {
            GainModel::Linear { g0 } => g0 / n_tr,
            GainModel::Logarithmic { g0, n_floor } => {
                if n > n_floor {
                    g0 / n
                } else {
                    0.0
                }
            }
        }
    }

    /// Carrier density at which `Γ·G(n) = loss_rate`, the gain-clamping density.
    pub fn clamp_density(&self, n_tr: f64, gamma_conf: f64, loss_rate: f64) -> f64 {
        let x = loss_rate / (gamma_conf * self.g0());
        match *self {
            GainModel::Linear { .. } => n_tr * (1.0 + x),
            GainModel::Logarithmic { .. } => n_tr * math::exp(x),
        }
    }
}

/// Full parameter set of the rate equations. SI units throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct LaserParams {
    /// Spontaneous-emission lifetime in the unpatterned quantum well [s].
    pub tau_r: f64,
    /// Nonradiative lifetime in the photonic-crystal region [s].
    pub tau_pc_nr: f64,
    /// Cavity ring-down time τ_p = Q/ω_p [s].
    pub tau_p: f64,
    /// Spontaneous-emission enhancement into the lasing mode.
    pub f_cav: f64,
    /// Spontaneous-emission quenching factor in the photonic-crystal bandgap.
    pub f_pc: f64,
    /// Gain confinement factor Γ.
    pub gamma_conf: f64,
    /// Pump energy absorption ratio η ∈ (0, 1].
    pub eta: f64,
    /// Pump-level relaxation lifetime into the lasing level [s].
    pub tau_ef: f64,
    /// Pump-level radiative lifetime [s].
    pub tau_er: f64,
    /// Pump-level nonradiative lifetime [s].
    pub tau_enr: f64,
    /// Pump active volume [m³].
    pub v_a: f64,
    /// Cavity mode volume [m³].
    pub v_mode: f64,
    /// Cavity wavelength [m]; sets the photon energy ħω_p.
    pub lambda_cav: f64,
    /// Transparency carrier density [m⁻³].
    pub n_tr: f64,
    pub gain: GainModel,
}

/// Instantaneous state: photon and carrier densities [m⁻³].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserState {
    /// Cavity photon density.
    pub p: f64,
    /// Lasing-level carrier density.
    pub n_g: f64,
    /// Pump-level carrier density.
    pub n_e: f64,
}

impl LaserState {
    pub const ZERO: LaserState = LaserState {
        p: 0.0,
        n_g: 0.0,
        n_e: 0.0,
    };

    pub fn new(p: f64, n_g: f64, n_e: f64) -> Self {
        LaserState { p, n_g, n_e }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p, self.n_g, self.n_e]
    }

    pub fn from_array(y: [f64; 3]) -> Self {
        LaserState {
            p: y[0],
            n_g: y[1],
            n_e: y[2],
        }
    }

    pub fn is_valid(&self) -> bool {
        let ok = |x: f64| x >= 0.0 && !x.is_nan() && !x.is_infinite();
        ok(self.p) && ok(self.n_g) && ok(self.n_e)
    }
}

/// Excitation waveform. `power_avg` is the time-averaged optical power [W]
/// reaching the sample; the absorbed fraction is `LaserParams::eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PumpDrive {
    Cw {
        power_avg: f64,
    },
    /// Train of Gaussian pulses of the given FWHM [s] and repetition period [s],
    /// normalized so the time average equals the CW drive at the same power.
    PulseTrain {
        power_avg: f64,
        pulse_fwhm: f64,
        rep_period: f64,
    },
}

impl PumpDrive {
    pub fn power_avg(&self) -> f64 {
        match *self {
            PumpDrive::Cw { power_avg } => power_avg,
            PumpDrive::PulseTrain { power_avg, .. } => power_avg,
        }
    }

    pub fn with_power(&self, power_avg: f64) -> PumpDrive {
        match *self {
            PumpDrive::Cw { .. } => PumpDrive::Cw { power_avg },
            PumpDrive::PulseTrain {
                pulse_fwhm,
                rep_period,
                ..
            } => PumpDrive::PulseTrain {
                power_avg,
                pulse_fwhm,
                rep_period,
            },
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let power = self.power_avg();
        if !(power >= 0.0) || power.is_infinite() {
            return Err(ParamError::new("power_avg", "must be finite and >= 0"));
        }
        if let PumpDrive::PulseTrain {
            pulse_fwhm,
            rep_period,
            ..
        } = *self
        {
            if !(pulse_fwhm > 0.0) || pulse_fwhm.is_infinite() {
                return Err(ParamError::new("pulse_fwhm", "must be finite and > 0"));
            }
            if !(rep_period > pulse_fwhm) || rep_period.is_infinite() {
                return Err(ParamError::new(
                    "rep_period",
                    "must be finite and > pulse_fwhm",
                ));
            }
        }
        Ok(())
    }
}

/// A parameter failed its validity invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamError {
    pub field: &'static str,
    pub reason: &'static str,
}

impl ParamError {
    fn new(field: &'static str, reason: &'static str) -> Self {
        ParamError { field, reason }
    }
}

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid parameter `{}`: {}", self.field, self.reason)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ParamError {}

/// Time derivatives of the state, same layout as [`LaserState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub dp: f64,
    pub dn_g: f64,
    pub dn_e: f64,
}

impl StateDerivative {
    pub fn as_array(&self) -> [f64; 3] {
        [self.dp, self.dn_g, self.dn_e]
    }
}

impl LaserParams {
    /// Check every field invariant. Lifetimes may be infinite (disabled
    /// channel); volumes, densities and the wavelength must be finite.
    pub fn validate(&self) -> Result<(), ParamError> {
        fn lifetime(field: &'static str, v: f64) -> Result<(), ParamError> {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(ParamError::new(field, "must be > 0 (may be infinite)"))
            }
        }
        fn finite_pos(field: &'static str, v: f64) -> Result<(), ParamError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ParamError::new(field, "must be finite and > 0"))
            }
        }
        lifetime("tau_r", self.tau_r)?;
        lifetime("tau_pc_nr", self.tau_pc_nr)?;
        lifetime("tau_p", self.tau_p)?;
        lifetime("tau_ef", self.tau_ef)?;
        lifetime("tau_er", self.tau_er)?;
        lifetime("tau_enr", self.tau_enr)?;
        finite_pos("v_a", self.v_a)?;
        finite_pos("v_mode", self.v_mode)?;
        finite_pos("lambda_cav", self.lambda_cav)?;
        finite_pos("n_tr", self.n_tr)?;
        if !(self.f_cav >= 0.0 && self.f_cav.is_finite()) {
            return Err(ParamError::new("f_cav", "must be finite and >= 0"));
        }
        if !(self.f_pc >= 0.0 && self.f_pc <= 1.0) {
            return Err(ParamError::new("f_pc", "must be in [0, 1]"));
        }
        if !(self.gamma_conf > 0.0 && self.gamma_conf <= 1.0) {
            return Err(ParamError::new("gamma_conf", "must be in (0, 1]"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(ParamError::new("eta", "must be in (0, 1]"));
        }
        match self.gain {
            GainModel::Linear { g0 } => finite_pos("g0", g0)?,
            GainModel::Logarithmic { g0, n_floor } => {
                finite_pos("g0", g0)?;
                finite_pos("n_floor", n_floor)?;
                if n_floor > self.n_tr {
                    return Err(ParamError::new("n_floor", "must not exceed n_tr"));
                }
            }
        }
        Ok(())
    }

    /// Photon energy ħω_p of the cavity mode [J].
    pub fn photon_energy(&self) -> f64 {
        units::photon_energy(self.lambda_cav)
    }

    /// Gain at carrier density `n` [s⁻¹].
    pub fn gain_at(&self, n: f64) -> f64 {
        self.gain.eval(n, self.n_tr)
    }

    /// Total decay rate of the lasing level with the cavity channel included:
    /// `1/τ_G = (F_cav + F_PC)/τ_r + 1/τ_PC,nr`.
    pub fn lasing_level_decay(&self) -> f64 {
        (self.f_cav + self.f_pc) / self.tau_r + 1.0 / self.tau_pc_nr
    }

    /// Lasing-level decay rate away from any cavity (photonic-crystal mirror
    /// regions): `F_PC/τ_r + 1/τ_PC,nr`.
    pub fn pc_region_decay(&self) -> f64 {
        self.f_pc / self.tau_r + 1.0 / self.tau_pc_nr
    }

    /// Total pump-level decay rate `1/τ_E,r + 1/τ_E,nr + 1/τ_E,f`.
    pub fn pump_level_decay(&self) -> f64 {
        1.0 / self.tau_er + 1.0 / self.tau_enr + 1.0 / self.tau_ef
    }

    /// Carrier density generation rate delivered to the pump level,
    /// `η L_in(t) / (ħω_p V_a)` [m⁻³ s⁻¹].
    ///
    /// Note the convention: the photon-energy quantum here is ħω_p of the
    /// cavity mode, not of the (shorter-wavelength) pump laser; the excess
    /// quantum defect is treated as part of η.
    pub fn pump_rate(&self, drive: &PumpDrive, t: f64) -> f64 {
        let cw_rate = self.eta * drive.power_avg() / (self.photon_energy() * self.v_a);
        match *drive {
            PumpDrive::Cw { .. } => cw_rate,
            PumpDrive::PulseTrain {
                pulse_fwhm,
                rep_period,
                ..
            } => cw_rate * pulse_train_shape(t, pulse_fwhm, rep_period),
        }
    }

    /// Time derivative of the pump rate, used by the semi-implicit integrator.
    pub fn pump_rate_derivative(&self, drive: &PumpDrive, t: f64) -> f64 {
        match *drive {
            PumpDrive::Cw { .. } => 0.0,
            PumpDrive::PulseTrain {
                pulse_fwhm,
                rep_period,
                ..
            } => {
                let cw_rate = self.eta * drive.power_avg() / (self.photon_energy() * self.v_a);
                cw_rate * pulse_train_shape_derivative(t, pulse_fwhm, rep_period)
            }
        }
    }

    /// Right-hand side of the rate equations for the given state and
    /// instantaneous pump rate [m⁻³ s⁻¹].
    pub fn rhs(&self, state: &LaserState, pump_rate: f64) -> StateDerivative {
        let stim = self.gamma_conf * self.gain_at(state.n_g) * state.p;
        let spont_cav = self.f_cav * state.n_g / self.tau_r;
        StateDerivative {
            dp: stim + spont_cav - state.p / self.tau_p,
            dn_g: state.n_e / self.tau_ef - state.n_g * self.lasing_level_decay() - stim,
            dn_e: pump_rate - state.n_e * self.pump_level_decay(),
        }
    }

    /// Jacobian ∂(dP, dN_G, dN_E)/∂(P, N_G, N_E) of [`Self::rhs`].
    pub fn jacobian(&self, state: &LaserState) -> [[f64; 3]; 3] {
        let g = self.gain_at(state.n_g);
        let dg = self.gain.derivative(state.n_g, self.n_tr);
        let gg = self.gamma_conf * g;
        let gdgp = self.gamma_conf * dg * state.p;
        [
            [gg - 1.0 / self.tau_p, gdgp + self.f_cav / self.tau_r, 0.0],
            [-gg, -self.lasing_level_decay() - gdgp, 1.0 / self.tau_ef],
            [0.0, 0.0, -self.pump_level_decay()],
        ]
    }

    /// Output power coupled out of the cavity, `ħω_p V_mode P / τ_p` [W].
    pub fn output_power(&self, photon_density: f64) -> f64 {
        if self.tau_p.is_infinite() {
            return 0.0;
        }
        self.photon_energy() * self.v_mode * photon_density / self.tau_p
    }
}

/// Dimensionless periodic pulse shape with unit time average.
///
/// Gaussian pulses of the given FWHM centered at `(k + 1/2) · rep_period`;
/// neighbors within ±4 periods are summed, which covers the periodic tails to
/// well below 1e-10 for any FWHM < rep_period.
fn pulse_train_shape(t: f64, pulse_fwhm: f64, rep_period: f64) -> f64 {
    let sigma = pulse_fwhm / (2.0 * math::sqrt(2.0 * core::f64::consts::LN_2));
    let peak = rep_period / (sigma * math::sqrt(2.0 * core::f64::consts::PI));
    let k0 = math::round(t / rep_period - 0.5);
    let mut s = 0.0;
    let mut k = k0 - 4.0;
    while k <= k0 + 4.0 {
        let dt = t - (k + 0.5) * rep_period;
        s += math::exp(-dt * dt / (2.0 * sigma * sigma));
        k += 1.0;
    }
    peak * s
}

fn pulse_train_shape_derivative(t: f64, pulse_fwhm: f64, rep_period: f64) -> f64 {
    let sigma = pulse_fwhm / (2.0 * math::sqrt(2.0 * core::f64::consts::LN_2));
    let peak = rep_period / (sigma * math::sqrt(2.0 * core::f64::consts::PI));
    let k0 = math::round(t / rep_period - 0.5);
    let mut s = 0.0;
    let mut k = k0 - 4.0;
    while k <= k0 + 4.0 {
        let dt = t - (k + 0.5) * rep_period;
        s += -dt / (sigma * sigma) * math::exp(-dt * dt / (2.0 * sigma * sigma));
        k += 1.0;
    }
    peak * s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;

    fn params() -> LaserParams {
        presets::passivated()
    }

    #[test]
    fn gain_vanishes_at_transparency() {
        let n_tr = 1e24;
        for gain in [
            GainModel::Linear { g0: 1e12 },
            GainModel::Linear { g0: 5e13 },
            GainModel::Logarithmic {
                g0: 1e12,
                n_floor: 1e16,
            },
        ] {
            assert_eq!(gain.eval(n_tr, n_tr), 0.0);
        }
    }

    #[test]
    fn gain_linear_and_log_values() {
        let n_tr = 1e24;
        let lin = GainModel::Linear { g0: 1e12 };
        assert_relative_eq!(lin.eval(2.0 * n_tr, n_tr), 1e12, max_relative = 1e-14);
        let log = GainModel::Logarithmic {
            g0: 1e12,
            n_floor: 1e16,
        };
        // ln(e) = 1
        assert_relative_eq!(
            log.eval(core::f64::consts::E * n_tr, n_tr),
            1e12,
            max_relative = 1e-12
        );
        // below the floor the logarithm is clipped
        assert_eq!(log.eval(0.0, n_tr), log.eval(1e16, n_tr));
    }

    #[test]
    fn rhs_quiescent_state_is_fixed_point() {
        let d = params().rhs(&LaserState::ZERO, 0.0);
        assert_eq!(d.as_array(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn rhs_spontaneous_terms_read_off() {
        // With P = 0 and no pump the carrier equation is pure decay and the
        // photon equation is pure spontaneous feeding.
        let p = params();
        let n0 = 3.0e22;
        let d = p.rhs(&LaserState::new(0.0, n0, 0.0), 0.0);
        assert_relative_eq!(d.dp, p.f_cav * n0 / p.tau_r, max_relative = 1e-14);
        assert_relative_eq!(d.dn_g, -n0 * p.lasing_level_decay(), max_relative = 1e-14);
        assert_eq!(d.dn_e, 0.0);
    }

    /// Independent term-by-term evaluation of the three equations, written
    /// directly from the model statement and kept deliberately separate from
    /// `LaserParams::rhs`.
    fn rhs_oracle(p: &LaserParams, s: &LaserState, pump: f64) -> [f64; 3] {
        let g = match p.gain {
            GainModel::Linear { g0 } => g0 * (s.n_g / p.n_tr - 1.0),
            GainModel::Logarithmic { g0, n_floor } => g0 * (s.n_g.max(n_floor) / p.n_tr).ln(),
        };
        let dp = p.gamma_conf * g * s.p + p.f_cav * s.n_g / p.tau_r - s.p / p.tau_p;
        let dn_g = s.n_e / p.tau_ef
            - s.n_g * ((p.f_cav + p.f_pc) / p.tau_r + 1.0 / p.tau_pc_nr)
            - p.gamma_conf * g * s.p;
        let dn_e = pump - s.n_e * (1.0 / p.tau_er + 1.0 / p.tau_enr + 1.0 / p.tau_ef);
        [dp, dn_g, dn_e]
    }

    #[test]
    fn rhs_matches_term_by_term_oracle() {
        let mut p = params();
        let states = [
            LaserState::new(1.0e20, 5.0e23, 2.0e22),
            LaserState::new(3.3e24, 1.9e24, 7.1e21),
            LaserState::new(0.0, 1.0e24, 0.0),
        ];
        for gain in [
            GainModel::Linear { g0: 5e12 },
            GainModel::Logarithmic {
                g0: 5e12,
                n_floor: 1e18,
            },
        ] {
            p.gain = gain;
            for s in &states {
                let got = p.rhs(s, 4.2e33).as_array();
                let want = rhs_oracle(&p, s, 4.2e33);
                for i in 0..3 {
                    assert_relative_eq!(got[i], want[i], max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn rhs_stimulated_term_antisymmetric_and_homogeneous() {
        // With the cavity loss disabled, dP + dN_G no longer depends on P, and
        // the stimulated contribution doubles when P doubles.
        let mut p = params();
        p.tau_p = f64::INFINITY;
        let s1 = LaserState::new(2.0e22, 1.5e24, 1.0e21);
        let s2 = LaserState::new(4.0e22, 1.5e24, 1.0e21);
        let d1 = p.rhs(&s1, 0.0);
        let d2 = p.rhs(&s2, 0.0);
        let sum1 = d1.dp + d1.dn_g;
        let sum2 = d2.dp + d2.dn_g;
        assert_relative_eq!(sum1, sum2, max_relative = 1e-12);
        let stim1 = d1.dp - p.f_cav * s1.n_g / p.tau_r;
        let stim2 = d2.dp - p.f_cav * s2.n_g / p.tau_r;
        assert_relative_eq!(stim2, 2.0 * stim1, max_relative = 1e-12);
        assert_relative_eq!(d1.dn_g - d2.dn_g, stim2 - stim1, max_relative = 1e-12);
    }

    #[test]
    fn conservation_when_losses_disabled() {
        let mut p = params();
        p.tau_p = f64::INFINITY;
        p.tau_pc_nr = f64::INFINITY;
        p.tau_ef = f64::INFINITY;
        p.tau_er = f64::INFINITY;
        p.tau_enr = f64::INFINITY;
        p.f_pc = 0.0;
        let s = LaserState::new(7.0e21, 8.0e23, 0.0);
        let d = p.rhs(&s, 0.0);
        let scale = d.dp.abs().max(d.dn_g.abs());
        assert!((d.dp + d.dn_g).abs() <= 1e-14 * scale);
    }

    #[test]
    fn lasing_level_decay_reproduces_measured_pc_lifetimes() {
        // PC-mirror regions have no cavity channel; the decay rate is
        // F_PC/τ_r + 1/τ_PC,nr.
        let mut p = params();
        p.f_cav = 0.0;
        p.tau_r = 654e-12;
        p.tau_pc_nr = 35.5e-12;
        let tau_pc = 1.0 / p.lasing_level_decay();
        assert_relative_eq!(tau_pc, 35.1e-12, max_relative = 0.01);
        assert!((tau_pc - 33.8e-12).abs() < 0.05 * 33.8e-12);

        p.tau_r = 605e-12;
        p.tau_pc_nr = 149e-12;
        let tau_pc = 1.0 / p.lasing_level_decay();
        assert!((tau_pc - 142e-12).abs() < 0.05 * 142e-12);
    }

    #[test]
    fn lasing_level_decay_bulk_limit() {
        let mut p = params();
        p.f_cav = 0.0;
        p.f_pc = 1.0;
        p.tau_pc_nr = f64::INFINITY;
        assert_relative_eq!(p.lasing_level_decay(), 1.0 / p.tau_r, max_relative = 1e-15);
    }

    #[test]
    fn pump_rate_cw_arithmetic() {
        // 1 µW absorbed with η = 1 at λ = 1 µm into 1e-18 m³:
        // 1e-6 / (1.98645e-19 · 1e-18) ≈ 5.034e30 m⁻³ s⁻¹.
        let mut p = params();
        p.eta = 1.0;
        p.lambda_cav = 1e-6;
        p.v_a = 1e-18;
        let rate = p.pump_rate(&PumpDrive::Cw { power_avg: 1e-6 }, 0.0);
        let hbar_omega = units::PLANCK * units::SPEED_OF_LIGHT / 1e-6;
        assert_relative_eq!(rate, 1e-6 / (hbar_omega * 1e-18), max_relative = 1e-12);
        assert_relative_eq!(rate, 5.034e30, max_relative = 1e-3);
    }

    #[test]
    fn pump_rate_zero_power() {
        let p = params();
        let drive = PumpDrive::PulseTrain {
            power_avg: 0.0,
            pulse_fwhm: 3.5e-12,
            rep_period: 13e-9,
        };
        for t in [0.0, 1e-12, 6.5e-9, 13e-9] {
            assert_eq!(p.pump_rate(&drive, t), 0.0);
        }
    }

    #[test]
    fn pulse_train_time_average_matches_cw() {
        // Quadrature of the pulse train over one period against the CW rate.
        let p = params();
        for (fwhm, period) in [(3.5e-12, 13e-9), (3.5e-12, 50e-12), (6e-12, 10e-12)] {
            let drive = PumpDrive::PulseTrain {
                power_avg: 28e-6,
                pulse_fwhm: fwhm,
                rep_period: period,
            };
            let cw = p.pump_rate(&PumpDrive::Cw { power_avg: 28e-6 }, 0.0);
            // Simpson rule with a grid fine enough to resolve the pulse.
            let n = 2 * ((10.0 * period / fwhm) as usize).max(2000);
            let h = period / n as f64;
            let mut acc = p.pump_rate(&drive, 0.0) + p.pump_rate(&drive, period);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * p.pump_rate(&drive, i as f64 * h);
            }
            let avg = acc * h / 3.0 / period;
            assert_relative_eq!(avg, cw, max_relative = 1e-6);
        }
    }

    #[test]
    fn pulse_derivative_matches_finite_difference() {
        let p = params();
        let drive = PumpDrive::PulseTrain {
            power_avg: 28e-6,
            pulse_fwhm: 3.5e-12,
            rep_period: 13e-9,
        };
        for t in [6.499e-9, 6.5e-9, 6.503e-9, 1.0e-12] {
            let h = 1e-16;
            let fd = (p.pump_rate(&drive, t + h) - p.pump_rate(&drive, t - h)) / (2.0 * h);
            let an = p.pump_rate_derivative(&drive, t);
            let scale = fd.abs().max(1.0);
            assert!((fd - an).abs() <= 1e-4 * scale, "t={t}: fd={fd} an={an}");
        }
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let mut p = params();
        p.tau_r = -5e-12;
        assert_eq!(p.validate().unwrap_err().field, "tau_r");

        let mut p = params();
        p.f_pc = 1.5;
        assert_eq!(p.validate().unwrap_err().field, "f_pc");

        let mut p = params();
        p.eta = 1.5;
        assert_eq!(p.validate().unwrap_err().field, "eta");

        let mut p = params();
        p.v_mode = f64::INFINITY;
        assert_eq!(p.validate().unwrap_err().field, "v_mode");

        let mut p = params();
        p.tau_pc_nr = f64::INFINITY; // disabled channel is allowed
        assert!(p.validate().is_ok());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = params();
        let s = LaserState::new(2.0e21, 8.0e23, 3.0e22);
        let jac = p.jacobian(&s);
        let y0 = s.as_array();
        for col in 0..3 {
            let h = 1e-7 * y0[col].max(1e18);
            let mut yp = y0;
            yp[col] += h;
            let mut ym = y0;
            ym[col] -= h;
            let fp = p.rhs(&LaserState::from_array(yp), 0.0).as_array();
            let fm = p.rhs(&LaserState::from_array(ym), 0.0).as_array();
            for row in 0..3 {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                let scale = jac[row][col].abs().max(1e-3);
                assert!(
                    (jac[row][col] - fd).abs() <= 1e-5 * scale,
                    "J[{row}][{col}]: {} vs fd {}",
                    jac[row][col],
                    fd
                );
            }
        }
    }
}
