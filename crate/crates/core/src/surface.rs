//! Carrier-diffusion model of nonradiative surface recombination.
//!
//! In-plane diffusion of the quantum-well carrier density `N` with quenched
//! spontaneous emission obeys
//!
//! ```text
//! ∂N/∂t = D ∇²N − N F_PC/τ_r,     D ∂N/∂r + S N = 0 at the hole surface,
//! ```
//!
//! where `S` is the surface recombination velocity at the etched sidewalls.
//! Because the carrier density is close to uniform over a lattice period, the
//! patterned membrane recombines like an array of mesas whose radius equals
//! the hole radius `r`, giving the closed form `1/τ_PC = F_PC/τ_r + 2S/r`,
//! i.e. `τ_PC,nr = r/(2S)`. The mesa eigenmode problem is also solved exactly
//! here (lowest Bessel eigenrate), which recovers the closed form in the
//! fast-diffusion limit and quantifies the correction outside it.

use core::fmt;

use crate::math;
use crate::roots::{self, RootError};
use crate::units;

/// First zero of J0.
pub const J0_FIRST_ZERO: f64 = 2.404825557695773;

/// Parameters of the diffusion model. SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceParams {
    /// Ambipolar diffusion coefficient D [m²/s].
    pub d_amb: f64,
    /// Surface recombination velocity S [m/s].
    pub s_vel: f64,
    /// Hole (equivalently mesa) radius [m].
    pub radius: f64,
    /// Photonic-crystal lattice period [m].
    pub lattice_a: f64,
    /// Spontaneous-emission quenching factor in the bandgap.
    pub f_pc: f64,
    /// Bulk spontaneous-emission lifetime [s].
    pub tau_r: f64,
    /// Sample temperature [K].
    pub temperature: f64,
    /// Effective carrier mass in units of the electron mass.
    pub m_eff_ratio: f64,
}

impl SurfaceParams {
    pub fn validate(&self) -> Result<(), SurfaceError> {
        fn pos(name: &'static str, v: f64) -> Result<(), SurfaceError> {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(SurfaceError::InvalidParam { field: name })
            }
        }
        pos("d_amb", self.d_amb)?;
        // S = 0 is the reflecting boundary (surface channel disabled).
        if !(self.s_vel >= 0.0) || self.s_vel.is_nan() || self.s_vel.is_infinite() {
            return Err(SurfaceError::InvalidParam { field: "s_vel" });
        }
        pos("radius", self.radius)?;
        pos("lattice_a", self.lattice_a)?;
        pos("f_pc", self.f_pc)?;
        pos("tau_r", self.tau_r)?;
        pos("temperature", self.temperature)?;
        pos("m_eff_ratio", self.m_eff_ratio)?;
        if self.radius >= self.lattice_a / 2.0 {
            return Err(SurfaceError::InvalidParam { field: "radius" });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceError {
    InvalidParam { field: &'static str },
    EigenrateBracketing(RootError),
}

impl fmt::Display for SurfaceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurfaceError::InvalidParam { field } => {
                write!(f, "invalid surface parameter `{field}`")
            }
            SurfaceError::EigenrateBracketing(e) => {
                write!(f, "eigenrate root finding failed: {e}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SurfaceError {}

/// Nonradiative lifetime of the mesa model, `τ_PC,nr = r/(2S)`.
///
/// `S → 0` yields an infinite lifetime (channel disabled).
pub fn tau_nr_from_s(s_vel: f64, radius: f64) -> f64 {
    radius / (2.0 * s_vel)
}

/// Inverse of [`tau_nr_from_s`]: `S = r/(2 τ_PC,nr)`.
pub fn s_from_tau_nr(tau_nr: f64, radius: f64) -> f64 {
    radius / (2.0 * tau_nr)
}

/// Total recombination rate in the patterned region,
/// `1/τ_PC = F_PC/τ_r + 2S/r`.
pub fn total_pc_decay(p: &SurfaceParams) -> f64 {
    p.f_pc / p.tau_r + 2.0 * p.s_vel / p.radius
}

/// Lowest decay eigenrate of the diffusion equation on a mesa of radius R:
/// `λ = D k² + F_PC/τ_r`, with `k` the smallest positive root of
/// `D k J1(kR) = S J0(kR)`.
///
/// `S = 0` is the reflecting boundary (`k = 0`); for any `S > 0` the root lies
/// strictly below the first zero of J0, so the bracket is guaranteed.
pub fn mesa_eigenrate(p: &SurfaceParams) -> Result<f64, SurfaceError> {
    p.validate()?;
    if p.s_vel == 0.0 {
        return Ok(p.f_pc / p.tau_r);
    }
    // Work in x = kR. f(0) = −S < 0 and f(j0₁) = (D/R)·j0₁·J1(j0₁) > 0.
    let d_over_r = p.d_amb / p.radius;
    let f = |x: f64| d_over_r * x * bessel_j1(x) - p.s_vel * bessel_j0(x);
    let x =
        roots::brent(f, 0.0, J0_FIRST_ZERO, 1e-12).map_err(SurfaceError::EigenrateBracketing)?;
    let k = x / p.radius;
    Ok(p.d_amb * k * k + p.f_pc / p.tau_r)
}

/// Scale a surface recombination velocity with temperature through the thermal
/// velocity, `S ∝ v_th ∝ √T`.
pub fn s_temperature_scale(s_ref: f64, t_ref: f64, t_new: f64) -> f64 {
    s_ref * math::sqrt(t_new / t_ref)
}

/// Thermal velocity `√(3 k_B T / m*)` [m/s].
pub fn thermal_velocity(temperature: f64, m_eff_ratio: f64) -> f64 {
    math::sqrt(3.0 * units::BOLTZMANN * temperature / (m_eff_ratio * units::ELECTRON_MASS))
}

/// Diffusion length `√(D τ)` [m]. Reported so the uniform-density assumption
/// behind the mesa equivalence can be checked against the structure size.
pub fn diffusion_length(d_amb: f64, tau: f64) -> f64 {
    math::sqrt(d_amb * tau)
}

/// Bessel function of the first kind, order zero.
///
/// Ascending series below |x| = 9, Hankel asymptotic expansion above; absolute
/// accuracy better than 1e-10 on [0, 50].
pub fn bessel_j0(x: f64) -> f64 {
    bessel_j(0, math::abs(x))
}

/// Bessel function of the first kind, order one (odd in x).
pub fn bessel_j1(x: f64) -> f64 {
    let ax = math::abs(x);
    let v = bessel_j(1, ax);
    if x < 0.0 {
        -v
    } else {
        v
    }
}

fn bessel_j(order: u32, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    // Below the switch the series loses at most ~4 digits to cancellation;
    // above it the optimally truncated asymptotic series is past 1e-12.
    if x < 12.0 {
        bessel_series(order, x)
    } else {
        bessel_hankel(order, x)
    }
}

/// Ascending power series Σ (−1)^m (x/2)^{2m+ν} / (m! (m+ν)!).
fn bessel_series(order: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = half * half;
    let mut term = if order == 0 { 1.0 } else { half };
    let mut sum = term;
    let mut m = 1.0f64;
    loop {
        term *= -q / (m * (m + order as f64));
        sum += term;
        if math::abs(term) < 1e-18 || m > 80.0 {
            return sum;
        }
        m += 1.0;
    }
}

/// Hankel asymptotic expansion
/// `Jν(x) ≈ √(2/(πx)) [P cos(χ) − Q sin(χ)]`, `χ = x − (2ν+1)π/4`,
/// with the P/Q series truncated at their smallest term.
fn bessel_hankel(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order as f64) * (order as f64);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut prev_mag = f64::INFINITY;
    for k in 1..=24u32 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= (mu - odd * odd) / (kf * 8.0 * x);
        let mag = math::abs(term);
        if mag >= prev_mag {
            break; // asymptotic series: stop at the smallest term
        }
        prev_mag = mag;
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
    }
    let chi = x - (2.0 * order as f64 + 1.0) * core::f64::consts::FRAC_PI_4;
    math::sqrt(2.0 / (core::f64::consts::PI * x)) * (p * math::cos(chi) - q * math::sin(chi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;

    // Reference values computed with mpmath at 30 digits.
    const J0_REF: [(f64, f64); 17] = [
        (0.0, 1.0),
        (0.5, 9.38469807240812859e-01),
        (1.0, 7.65197686557966605e-01),
        (2.0, 2.23890779141235674e-01),
        (2.404825557695773, -1.20119500736768583e-16),
        (3.0, -2.60051954901933446e-01),
        (5.0, -1.77596771314338292e-01),
        (7.5, 2.66339657880378389e-01),
        (8.9, -6.52532468512443120e-02),
        (9.1, -1.14239232683198771e-01),
        (10.0, -2.45935764451348349e-01),
        (12.0, 4.76893107968335353e-02),
        (15.0, -1.42244728267807725e-02),
        (20.0, 1.67024664340583162e-01),
        (30.0, -8.63679835810402113e-02),
        (40.0, 7.36689058423728969e-03),
        (50.0, 5.58123276692518155e-02),
    ];

    const J1_REF: [(f64, f64); 17] = [
        (0.0, 0.0),
        (0.5, 2.42268457674873899e-01),
        (1.0, 4.40050585744933498e-01),
        (2.0, 5.76724807756873403e-01),
        (2.404825557695773, 5.19147497289466742e-01),
        (3.0, 3.39058958525936482e-01),
        (5.0, -3.27579137591465230e-01),
        (7.5, 1.35248427579705510e-01),
        (8.9, 2.55902371443975873e-01),
        (9.1, 2.32430745005856421e-01),
        (10.0, 4.34727461688614383e-02),
        (12.0, -2.23447104490627602e-01),
        (15.0, 2.05104038613522749e-01),
        (20.0, 6.68331241758500505e-02),
        (30.0, -1.18751062616622938e-01),
        (40.0, 1.26038318037585001e-01),
        (50.0, -9.75118281251751429e-02),
    ];

    #[test]
    fn bessel_reference_grid() {
        for &(x, want) in &J0_REF {
            assert!(
                (bessel_j0(x) - want).abs() < 1e-10,
                "J0({x}) = {} want {want}",
                bessel_j0(x)
            );
        }
        for &(x, want) in &J1_REF {
            assert!(
                (bessel_j1(x) - want).abs() < 1e-10,
                "J1({x}) = {} want {want}",
                bessel_j1(x)
            );
        }
        // odd symmetry of J1
        assert_eq!(bessel_j1(-3.0), -bessel_j1(3.0));
    }

    #[test]
    fn tau_from_s_reproduces_measured_lifetimes() {
        // S = 1.7e5 cm/s with r = 120.7 nm gives the untreated 35.5 ps.
        let tau = tau_nr_from_s(
            units::m_per_s_from_cm_per_s(1.7e5),
            units::meters_from_nm(120.7),
        );
        assert_relative_eq!(tau, 35.5e-12, max_relative = 0.005);

        // S = 4.0e4 cm/s with r = 120 nm gives ≈ 150 ps, within 2% of 149 ps.
        let tau = tau_nr_from_s(
            units::m_per_s_from_cm_per_s(4.0e4),
            units::meters_from_nm(120.0),
        );
        assert_relative_eq!(tau, 150e-12, max_relative = 1e-12);
        assert!((tau - 149e-12).abs() < 0.02 * 149e-12);

        // S → 0 disables the channel.
        assert!(tau_nr_from_s(0.0, 120e-9).is_infinite());
    }

    #[test]
    fn s_and_tau_are_inverse_maps() {
        let r = 120e-9;
        for s in [1.0, 4.0e2, 1.7e3, 5.0e4] {
            let rt = s_from_tau_nr(tau_nr_from_s(s, r), r);
            assert_relative_eq!(rt, s, max_relative = 1e-15);
        }
    }

    #[test]
    fn total_pc_decay_composition() {
        let p = presets::surface_unpassivated();
        let got = total_pc_decay(&p);
        assert_relative_eq!(
            got,
            p.f_pc / p.tau_r + 1.0 / tau_nr_from_s(p.s_vel, p.radius),
            max_relative = 1e-15
        );
        // against the measured PC lifetime
        let tau_pc = 1.0 / got;
        assert!(
            (tau_pc - 33.8e-12).abs() < 0.05 * 33.8e-12,
            "tau_pc = {tau_pc:e}"
        );

        let mut p = p;
        p.s_vel = 0.0;
        assert_eq!(total_pc_decay(&p), p.f_pc / p.tau_r);
    }

    #[test]
    fn eigenrate_reflecting_boundary() {
        let mut p = presets::surface_passivated();
        p.s_vel = 0.0;
        assert_eq!(mesa_eigenrate(&p).unwrap(), p.f_pc / p.tau_r);
    }

    #[test]
    fn eigenrate_fast_diffusion_limit() {
        // S·R/D ≈ 0.1: the surface part of the eigenrate should be within 3%
        // of the closed form 2S/R (small-argument expansion of J0, J1).
        let p = presets::surface_unpassivated();
        assert!((p.s_vel * p.radius / p.d_amb - 0.102).abs() < 0.001);
        let surface_part = mesa_eigenrate(&p).unwrap() - p.f_pc / p.tau_r;
        let closed_form = 2.0 * p.s_vel / p.radius;
        assert!(
            ((surface_part - closed_form) / closed_form).abs() < 0.03,
            "eigenrate surface part {surface_part:e} vs 2S/R {closed_form:e}"
        );

        // Much deeper into the limit the two agree to 1e-3.
        let mut p = p;
        p.d_amb *= 1e3;
        let surface_part = mesa_eigenrate(&p).unwrap() - p.f_pc / p.tau_r;
        assert_relative_eq!(surface_part, closed_form, max_relative = 1e-3);
    }

    #[test]
    fn eigenrate_absorbing_boundary_limit() {
        // S → ∞: kR approaches the first zero of J0.
        let mut p = presets::surface_unpassivated();
        p.s_vel = 1e12;
        let k = J0_FIRST_ZERO / p.radius;
        let want = p.d_amb * k * k + p.f_pc / p.tau_r;
        assert_relative_eq!(mesa_eigenrate(&p).unwrap(), want, max_relative = 1e-3);
    }

    #[test]
    fn eigenrate_monotone_in_s_and_radius() {
        let base = presets::surface_passivated();
        let mut prev = 0.0;
        for s in [1e2, 4e2, 1e3, 4e3] {
            let mut p = base;
            p.s_vel = s;
            let r = mesa_eigenrate(&p).unwrap();
            assert!(r > prev, "not monotone in S at {s}");
            prev = r;
        }
        let mut prev = f64::INFINITY;
        for radius_nm in [60.0, 90.0, 120.0, 150.0] {
            let mut p = base;
            p.radius = units::meters_from_nm(radius_nm);
            let r = mesa_eigenrate(&p).unwrap();
            assert!(r < prev, "not monotone in R at {radius_nm}");
            prev = r;
        }
    }

    #[test]
    fn temperature_scaling() {
        // 10 K → 300 K is a factor √30 ≈ 5.48.
        let f = s_temperature_scale(1.0, 10.0, 300.0);
        assert_relative_eq!(f, 30f64.sqrt(), max_relative = 1e-15);
        assert!((f - 5.477).abs() < 1e-3);

        assert_eq!(s_temperature_scale(1.7e3, 10.0, 10.0), 1.7e3);

        // S = 1.7e5 cm/s at 10 K scales to ≈ 9.3e5 cm/s at 300 K, inside the
        // 1e5..5e6 cm/s range reported for similar structures at room
        // temperature.
        let s300 = s_temperature_scale(units::m_per_s_from_cm_per_s(1.7e5), 10.0, 300.0);
        let s300_cm = units::cm_per_s_from_m_per_s(s300);
        assert_relative_eq!(s300_cm, 9.31e5, max_relative = 1e-3);
        assert!(s300_cm > 1e5 && s300_cm < 5e6);
    }

    #[test]
    fn diffusion_length_supports_uniformity_assumption() {
        // With D = 20 cm²/s and the bulk lifetime, √(Dτ) is a few µm, larger
        // than the cavity.
        let p = presets::surface_unpassivated();
        let l = diffusion_length(p.d_amb, p.tau_r);
        assert!(l > 1e-6, "diffusion length {l:e} m");
    }

    #[test]
    fn validation_rejects_radius_beyond_half_period() {
        let mut p = presets::surface_passivated();
        p.radius = p.lattice_a; // impossible geometry
        assert!(matches!(
            p.validate(),
            Err(SurfaceError::InvalidParam { field: "radius" })
        ));
    }
}
