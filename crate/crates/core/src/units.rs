//! Unit conversions between lab-friendly units and internal SI.
//!
//! Everything inside the crate is SI (seconds, meters, watts, m⁻³, m/s).
//! Measurements and configuration use the conventional units of the field:
//! picoseconds, nanometers, microwatts, cm⁻³, cm/s. Conversion happens once,
//! at the boundary, through the helpers here.

/// Planck constant [J s].
pub const PLANCK: f64 = 6.62607015e-34;
/// Speed of light in vacuum [m/s].
pub const SPEED_OF_LIGHT: f64 = 2.99792458e8;
/// Boltzmann constant [J/K].
pub const BOLTZMANN: f64 = 1.380649e-23;
/// Electron rest mass [kg].
pub const ELECTRON_MASS: f64 = 9.1093837015e-31;

/// Photon energy ħω = hc/λ for vacuum wavelength `lambda` [m] → [J].
pub fn photon_energy(lambda: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / lambda
}

pub fn seconds_from_ps(t: f64) -> f64 {
    t * 1e-12
}

pub fn ps_from_seconds(t: f64) -> f64 {
    t / 1e-12
}

pub fn meters_from_nm(x: f64) -> f64 {
    x * 1e-9
}

pub fn nm_from_meters(x: f64) -> f64 {
    x / 1e-9
}

pub fn watts_from_uw(p: f64) -> f64 {
    p * 1e-6
}

pub fn uw_from_watts(p: f64) -> f64 {
    p / 1e-6
}

/// Number density cm⁻³ → m⁻³.
pub fn per_m3_from_per_cm3(n: f64) -> f64 {
    n * 1e6
}

/// Number density m⁻³ → cm⁻³.
pub fn per_cm3_from_per_m3(n: f64) -> f64 {
    n / 1e6
}

pub fn m_per_s_from_cm_per_s(v: f64) -> f64 {
    v * 1e-2
}

pub fn cm_per_s_from_m_per_s(v: f64) -> f64 {
    v / 1e-2
}

pub fn m2_per_s_from_cm2_per_s(d: f64) -> f64 {
    d * 1e-4
}

pub fn cm2_per_s_from_m2_per_s(d: f64) -> f64 {
    d / 1e-4
}

pub fn m3_from_um3(v: f64) -> f64 {
    v * 1e-18
}

pub fn um3_from_m3(v: f64) -> f64 {
    v / 1e-18
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn photon_energy_one_micron() {
        // hc/λ at 1 µm
        assert_relative_eq!(photon_energy(1e-6), 1.98644586e-19, max_relative = 1e-8);
    }

    #[test]
    fn conversions_round_trip() {
        type Conv = fn(f64) -> f64;
        let pairs: [(Conv, Conv); 7] = [
            (seconds_from_ps, ps_from_seconds),
            (meters_from_nm, nm_from_meters),
            (watts_from_uw, uw_from_watts),
            (per_m3_from_per_cm3, per_cm3_from_per_m3),
            (m_per_s_from_cm_per_s, cm_per_s_from_m_per_s),
            (m2_per_s_from_cm2_per_s, cm2_per_s_from_m2_per_s),
            (m3_from_um3, um3_from_m3),
        ];
        for (fwd, back) in pairs {
            for x in [1.0, 33.8, 654.0, 1.7e5, 0.1203, 9.9e17] {
                let rt = back(fwd(x));
                assert!((rt - x).abs() <= 1e-12 * x, "{x} -> {rt}");
            }
        }
    }
}
