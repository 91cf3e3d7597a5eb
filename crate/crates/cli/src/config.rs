//! Sectioned key-value run configuration.
//!
//! Numeric keys carry their unit as a suffix (`tau_r_ps`, `s_cm_per_s`,
//! `power_uW`); `inf` disables a lifetime channel. Unknown sections or keys
//! are errors with the offending line, as are missing required keys, so a
//! config never silently drifts from the schema.

use std::collections::BTreeMap;
use std::fmt;

use pclaser_core::dynamics::{IntegrationMethod, IntegratorConfig};
use pclaser_core::fitting::Observable;
use pclaser_core::model::{GainModel, LaserParams, PumpDrive};
use pclaser_core::surface::SurfaceParams;
use pclaser_core::units;

pub const PRESET_UNPASSIVATED: &str = include_str!("../presets/unpassivated.conf");
pub const PRESET_PASSIVATED: &str = include_str!("../presets/passivated.conf");

/// Resolve a `--config` value: an existing path wins, otherwise the bundled
/// preset names (with or without a `.preset`/`.conf` suffix).
pub fn resolve_config_text(spec: &str) -> Result<(String, String), ConfigError> {
    let path = std::path::Path::new(spec);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: spec.to_string(),
            message: e.to_string(),
        })?;
        return Ok((text, spec.to_string()));
    }
    let stem = spec.trim_end_matches(".preset").trim_end_matches(".conf");
    match stem {
        "unpassivated" => Ok((
            PRESET_UNPASSIVATED.to_string(),
            "preset:unpassivated".into(),
        )),
        "passivated" => Ok((PRESET_PASSIVATED.to_string(), "preset:passivated".into())),
        _ => Err(ConfigError::Io {
            path: spec.to_string(),
            message: "no such file or bundled preset (bundled: unpassivated, passivated)".into(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Io {
        path: String,
        message: String,
    },
    Syntax {
        line: usize,
        message: String,
    },
    UnknownSection {
        line: usize,
        name: String,
    },
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    DuplicateKey {
        line: usize,
        key: String,
    },
    BadValue {
        line: usize,
        key: String,
        message: String,
    },
    MissingSection {
        name: String,
        required: &'static [&'static str],
    },
    MissingKey {
        section: String,
        key: String,
    },
    Invalid {
        field: String,
        message: String,
    },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, message } => write!(f, "config `{path}`: {message}"),
            ConfigError::Syntax { line, message } => write!(f, "config line {line}: {message}"),
            ConfigError::UnknownSection { line, name } => {
                write!(f, "config line {line}: unknown section [{name}]")
            }
            ConfigError::UnknownKey { line, section, key } => {
                write!(f, "config line {line}: unknown key `{key}` in [{section}]")
            }
            ConfigError::DuplicateKey { line, key } => {
                write!(f, "config line {line}: duplicate key `{key}`")
            }
            ConfigError::BadValue { line, key, message } => {
                write!(f, "config line {line}: bad value for `{key}`: {message}")
            }
            ConfigError::MissingSection { name, required } => write!(
                f,
                "config: missing [{name}] section; required keys: {}",
                required.join(", ")
            ),
            ConfigError::MissingKey { section, key } => {
                write!(f, "config: missing key `{key}` in [{section}]")
            }
            ConfigError::Invalid { field, message } => {
                write!(f, "config: invalid `{field}`: {message}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

const LASER_KEYS: &[&str] = &[
    "tau_r_ps",
    "tau_pc_nr_ps",
    "tau_p_ps",
    "f_cav",
    "f_pc",
    "gamma_conf",
    "eta",
    "tau_ef_ps",
    "tau_er_ps",
    "tau_enr_ps",
    "v_a_um3",
    "v_mode_um3",
    "lambda_cav_nm",
    "n_tr_cm3",
    "gain",
    "g0_per_s",
    "n_floor_cm3",
];
const PUMP_KEYS: &[&str] = &["kind", "power_uW", "pulse_fwhm_ps", "rep_period_ps"];
const SURFACE_KEYS: &[&str] = &[
    "d_cm2_per_s",
    "s_cm_per_s",
    "radius_nm",
    "lattice_a_nm",
    "f_pc",
    "tau_r_ps",
    "temperature_K",
    "m_eff_ratio",
];
const INTEGRATOR_KEYS: &[&str] = &["rel_tol", "abs_tol_cm3", "max_step_ps", "method"];
const FIT_KEYS: &[&str] = &[
    "model",
    "observable",
    "components",
    "irf_fwhm_ps",
    "noise_sigma_rel",
    "free",
    "trace_start_ps",
    "trace_end_ps",
    "trace_samples",
];
const TOP_KEYS: &[&str] = &["label", "seed"];

/// Required [laser] keys (the gain floor only matters for the log model).
const LASER_REQUIRED: &[&str] = &[
    "tau_r_ps",
    "tau_pc_nr_ps",
    "tau_p_ps",
    "f_cav",
    "f_pc",
    "gamma_conf",
    "eta",
    "tau_ef_ps",
    "tau_er_ps",
    "tau_enr_ps",
    "v_a_um3",
    "v_mode_um3",
    "lambda_cav_nm",
    "n_tr_cm3",
    "gain",
    "g0_per_s",
];

#[derive(Debug, Clone, Default)]
struct Section {
    values: BTreeMap<String, (usize, String)>,
}

impl Section {
    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(_, v)| v.as_str())
    }

    fn require(&self, section: &str, key: &str) -> Result<&str, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::MissingKey {
            section: section.to_string(),
            key: key.to_string(),
        })
    }

    fn line(&self, key: &str) -> usize {
        self.values.get(key).map(|(l, _)| *l).unwrap_or(0)
    }
}

/// Parsed and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub label: Option<String>,
    pub seed: u64,
    pub laser: LaserParams,
    pub pump: Option<PumpDrive>,
    pub surface: Option<SurfaceParams>,
    pub integrator: IntegratorConfig,
    pub fit: FitSettings,
}

/// Fit/synthesis settings from the `[fit]` section (all defaulted).
#[derive(Debug, Clone)]
pub struct FitSettings {
    pub model: FitModelKind,
    pub observable: Observable,
    pub components: usize,
    pub irf_fwhm: f64,
    pub noise_sigma_rel: f64,
    pub free: Vec<String>,
    pub trace_start: f64,
    pub trace_end: f64,
    pub trace_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModelKind {
    Rate,
    MultiExp,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            model: FitModelKind::Rate,
            observable: Observable::Photoluminescence,
            components: 2,
            irf_fwhm: 0.0,
            noise_sigma_rel: 0.05,
            free: vec!["tau_ef".into(), "tau_pc_nr".into(), "amplitude".into()],
            trace_start: units::seconds_from_ps(-20.0),
            trace_end: units::seconds_from_ps(250.0),
            trace_samples: 360,
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current = String::new(); // top level
    sections.insert(String::new(), Section::default());

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or(ConfigError::Syntax {
                line: line_no,
                message: "unterminated section header".into(),
            })?;
            let name = name.trim();
            if !matches!(name, "laser" | "pump" | "surface" | "integrator" | "fit") {
                return Err(ConfigError::UnknownSection {
                    line: line_no,
                    name: name.into(),
                });
            }
            current = name.to_string();
            sections.entry(current.clone()).or_default();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax {
            line: line_no,
            message: "expected `key = value`".into(),
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let allowed: &[&str] = match current.as_str() {
            "" => TOP_KEYS,
            "laser" => LASER_KEYS,
            "pump" => PUMP_KEYS,
            "surface" => SURFACE_KEYS,
            "integrator" => INTEGRATOR_KEYS,
            "fit" => FIT_KEYS,
            _ => unreachable!(),
        };
        if !allowed.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey {
                line: line_no,
                section: if current.is_empty() {
                    "top level".into()
                } else {
                    current.clone()
                },
                key,
            });
        }
        let section = sections.get_mut(&current).unwrap();
        if section.values.contains_key(&key) {
            return Err(ConfigError::DuplicateKey { line: line_no, key });
        }
        section.values.insert(key, (line_no, value));
    }

    let top = &sections[""];
    let label = top.get("label").map(|s| s.to_string());
    let seed = match top.get("seed") {
        Some(v) => v.parse::<u64>().map_err(|_| ConfigError::BadValue {
            line: top.line("seed"),
            key: "seed".into(),
            message: "expected an unsigned integer".into(),
        })?,
        None => 0,
    };

    let laser = build_laser(sections.get("laser"))?;
    let pump = match sections.get("pump") {
        Some(s) if !s.values.is_empty() => Some(build_pump(s)?),
        _ => None,
    };
    let surface = match sections.get("surface") {
        Some(s) if !s.values.is_empty() => Some(build_surface(s, &laser)?),
        _ => None,
    };
    let integrator = build_integrator(sections.get("integrator"), &laser)?;
    let fit = build_fit(sections.get("fit"))?;

    Ok(RunConfig {
        label,
        seed,
        laser,
        pump,
        surface,
        integrator,
        fit,
    })
}

fn parse_f64(section: &Section, section_name: &str, key: &str) -> Result<f64, ConfigError> {
    let raw = section.require(section_name, key)?;
    match raw {
        "inf" | "Inf" | "INF" => Ok(f64::INFINITY),
        _ => raw.parse::<f64>().map_err(|_| ConfigError::BadValue {
            line: section.line(key),
            key: key.to_string(),
            message: format!("`{raw}` is not a number (use `inf` to disable a channel)"),
        }),
    }
}

fn parse_f64_or(
    section: &Section,
    section_name: &str,
    key: &str,
    default: f64,
) -> Result<f64, ConfigError> {
    if section.get(key).is_none() {
        return Ok(default);
    }
    parse_f64(section, section_name, key)
}

fn build_laser(section: Option<&Section>) -> Result<LaserParams, ConfigError> {
    let section = match section {
        Some(s) if !s.values.is_empty() => s,
        _ => {
            return Err(ConfigError::MissingSection {
                name: "laser".into(),
                required: LASER_REQUIRED,
            })
        }
    };
    for key in LASER_REQUIRED {
        if section.get(key).is_none() {
            return Err(ConfigError::MissingKey {
                section: "laser".into(),
                key: key.to_string(),
            });
        }
    }
    let num = |key: &str| parse_f64(section, "laser", key);
    let gain_kind = section.require("laser", "gain")?;
    let g0 = num("g0_per_s")?;
    let gain = match gain_kind {
        "linear" => GainModel::Linear { g0 },
        "log" | "logarithmic" => GainModel::Logarithmic {
            g0,
            n_floor: units::per_m3_from_per_cm3(num("n_floor_cm3")?),
        },
        other => {
            return Err(ConfigError::BadValue {
                line: section.line("gain"),
                key: "gain".into(),
                message: format!("`{other}` is not one of: linear, log"),
            })
        }
    };
    let params = LaserParams {
        tau_r: units::seconds_from_ps(num("tau_r_ps")?),
        tau_pc_nr: units::seconds_from_ps(num("tau_pc_nr_ps")?),
        tau_p: units::seconds_from_ps(num("tau_p_ps")?),
        f_cav: num("f_cav")?,
        f_pc: num("f_pc")?,
        gamma_conf: num("gamma_conf")?,
        eta: num("eta")?,
        tau_ef: units::seconds_from_ps(num("tau_ef_ps")?),
        tau_er: units::seconds_from_ps(num("tau_er_ps")?),
        tau_enr: units::seconds_from_ps(num("tau_enr_ps")?),
        v_a: units::m3_from_um3(num("v_a_um3")?),
        v_mode: units::m3_from_um3(num("v_mode_um3")?),
        lambda_cav: units::meters_from_nm(num("lambda_cav_nm")?),
        n_tr: units::per_m3_from_per_cm3(num("n_tr_cm3")?),
        gain,
    };
    params.validate().map_err(|e| ConfigError::Invalid {
        field: e.field.to_string(),
        message: e.reason.to_string(),
    })?;
    Ok(params)
}

fn build_pump(section: &Section) -> Result<PumpDrive, ConfigError> {
    let kind = section.require("pump", "kind")?;
    let power = units::watts_from_uw(parse_f64(section, "pump", "power_uW")?);
    let drive = match kind {
        "cw" => PumpDrive::Cw { power_avg: power },
        "pulse" => PumpDrive::PulseTrain {
            power_avg: power,
            pulse_fwhm: units::seconds_from_ps(parse_f64(section, "pump", "pulse_fwhm_ps")?),
            rep_period: units::seconds_from_ps(parse_f64(section, "pump", "rep_period_ps")?),
        },
        other => {
            return Err(ConfigError::BadValue {
                line: section.line("kind"),
                key: "kind".into(),
                message: format!("`{other}` is not one of: cw, pulse"),
            })
        }
    };
    drive.validate().map_err(|e| ConfigError::Invalid {
        field: e.field.to_string(),
        message: e.reason.to_string(),
    })?;
    Ok(drive)
}

fn build_surface(section: &Section, laser: &LaserParams) -> Result<SurfaceParams, ConfigError> {
    let num = |key: &str| parse_f64(section, "surface", key);
    let params = SurfaceParams {
        d_amb: units::m2_per_s_from_cm2_per_s(num("d_cm2_per_s")?),
        s_vel: units::m_per_s_from_cm_per_s(num("s_cm_per_s")?),
        radius: units::meters_from_nm(num("radius_nm")?),
        lattice_a: units::meters_from_nm(num("lattice_a_nm")?),
        f_pc: parse_f64_or(section, "surface", "f_pc", laser.f_pc)?,
        tau_r: units::seconds_from_ps(parse_f64_or(
            section,
            "surface",
            "tau_r_ps",
            units::ps_from_seconds(laser.tau_r),
        )?),
        temperature: num("temperature_K")?,
        m_eff_ratio: num("m_eff_ratio")?,
    };
    params.validate().map_err(|e| match e {
        pclaser_core::surface::SurfaceError::InvalidParam { field } => ConfigError::Invalid {
            field: field.to_string(),
            message: "violates its invariant".into(),
        },
        other => ConfigError::Invalid {
            field: "surface".into(),
            message: other.to_string(),
        },
    })?;
    Ok(params)
}

fn build_integrator(
    section: Option<&Section>,
    laser: &LaserParams,
) -> Result<IntegratorConfig, ConfigError> {
    let mut cfg = pclaser_core::dynamics::default_config(laser);
    let section = match section {
        Some(s) if !s.values.is_empty() => s,
        _ => return Ok(cfg),
    };
    cfg.rel_tol = parse_f64_or(section, "integrator", "rel_tol", cfg.rel_tol)?;
    if section.get("abs_tol_cm3").is_some() {
        cfg.abs_tol = units::per_m3_from_per_cm3(parse_f64(section, "integrator", "abs_tol_cm3")?);
    }
    if section.get("max_step_ps").is_some() {
        cfg.max_step = units::seconds_from_ps(parse_f64(section, "integrator", "max_step_ps")?);
    }
    if let Some(method) = section.get("method") {
        cfg.method = match method {
            "explicit" => IntegrationMethod::ExplicitAdaptive,
            "semi-implicit" => IntegrationMethod::SemiImplicit,
            other => {
                return Err(ConfigError::BadValue {
                    line: section.line("method"),
                    key: "method".into(),
                    message: format!("`{other}` is not one of: explicit, semi-implicit"),
                })
            }
        };
    }
    if cfg.rel_tol <= 0.0 || cfg.abs_tol <= 0.0 || cfg.max_step <= 0.0 {
        return Err(ConfigError::Invalid {
            field: "integrator".into(),
            message: "tolerances and max_step must be positive".into(),
        });
    }
    Ok(cfg)
}

fn build_fit(section: Option<&Section>) -> Result<FitSettings, ConfigError> {
    let mut fit = FitSettings::default();
    let section = match section {
        Some(s) if !s.values.is_empty() => s,
        _ => return Ok(fit),
    };
    if let Some(model) = section.get("model") {
        fit.model = match model {
            "rate" => FitModelKind::Rate,
            "multiexp" => FitModelKind::MultiExp,
            other => {
                return Err(ConfigError::BadValue {
                    line: section.line("model"),
                    key: "model".into(),
                    message: format!("`{other}` is not one of: rate, multiexp"),
                })
            }
        };
    }
    if let Some(obs) = section.get("observable") {
        fit.observable = match obs {
            "pl" => Observable::Photoluminescence,
            "power" => Observable::OutputPower,
            other => {
                return Err(ConfigError::BadValue {
                    line: section.line("observable"),
                    key: "observable".into(),
                    message: format!("`{other}` is not one of: pl, power"),
                })
            }
        };
    }
    if let Some(raw) = section.get("components") {
        fit.components = raw.parse::<usize>().map_err(|_| ConfigError::BadValue {
            line: section.line("components"),
            key: "components".into(),
            message: "expected a positive integer".into(),
        })?;
        if fit.components == 0 || fit.components > 4 {
            return Err(ConfigError::BadValue {
                line: section.line("components"),
                key: "components".into(),
                message: "must be between 1 and 4".into(),
            });
        }
    }
    fit.irf_fwhm = units::seconds_from_ps(parse_f64_or(
        section,
        "fit",
        "irf_fwhm_ps",
        units::ps_from_seconds(fit.irf_fwhm),
    )?);
    fit.noise_sigma_rel = parse_f64_or(section, "fit", "noise_sigma_rel", fit.noise_sigma_rel)?;
    if let Some(free) = section.get("free") {
        fit.free = free
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
    }
    fit.trace_start = units::seconds_from_ps(parse_f64_or(
        section,
        "fit",
        "trace_start_ps",
        units::ps_from_seconds(fit.trace_start),
    )?);
    fit.trace_end = units::seconds_from_ps(parse_f64_or(
        section,
        "fit",
        "trace_end_ps",
        units::ps_from_seconds(fit.trace_end),
    )?);
    if let Some(raw) = section.get("trace_samples") {
        fit.trace_samples = raw.parse::<usize>().map_err(|_| ConfigError::BadValue {
            line: section.line("trace_samples"),
            key: "trace_samples".into(),
            message: "expected a positive integer".into(),
        })?;
    }
    if fit.trace_samples < 2 || !(fit.trace_end > fit.trace_start) {
        return Err(ConfigError::Invalid {
            field: "fit".into(),
            message: "trace window must be increasing with at least 2 samples".into(),
        });
    }
    if !(fit.noise_sigma_rel >= 0.0) || !(fit.irf_fwhm >= 0.0) {
        return Err(ConfigError::Invalid {
            field: "fit".into(),
            message: "noise and instrument-response widths must be >= 0".into(),
        });
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pclaser_core::presets;

    #[test]
    fn bundled_presets_match_library_parameter_sets() {
        let passivated = parse_config(PRESET_PASSIVATED).unwrap();
        assert_eq!(passivated.laser, presets::passivated());
        assert_eq!(passivated.pump, Some(presets::pulse_drive()));
        assert_eq!(passivated.surface, Some(presets::surface_passivated()));
        assert_eq!(passivated.label.as_deref(), Some("passivated"));

        let unpassivated = parse_config(PRESET_UNPASSIVATED).unwrap();
        assert_eq!(unpassivated.laser, presets::unpassivated());
        assert_eq!(unpassivated.surface, Some(presets::surface_unpassivated()));
    }

    #[test]
    fn empty_config_lists_required_keys() {
        let err = parse_config("").unwrap_err();
        match err {
            ConfigError::MissingSection { name, required } => {
                assert_eq!(name, "laser");
                assert!(required.contains(&"tau_r_ps"));
                assert!(required.contains(&"n_tr_cm3"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_lifetime_names_the_field() {
        let text = PRESET_PASSIVATED.replace("tau_r_ps = 605", "tau_r_ps = -5");
        let err = parse_config(&text).unwrap_err();
        match err {
            ConfigError::Invalid { field, .. } => assert_eq!(field, "tau_r"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = format!("{PRESET_PASSIVATED}\nwavelength_nm = 940\n");
        let err = parse_config(&text).unwrap_err();
        match err {
            ConfigError::UnknownKey { line, key, .. } => {
                assert!(line > 1);
                assert_eq!(key, "wavelength_nm");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_syntax_errors() {
        let text = "[laser]\ntau_r_ps = 605\ntau_r_ps = 606\n";
        assert!(matches!(
            parse_config(text).unwrap_err(),
            ConfigError::DuplicateKey { line: 3, .. }
        ));
        let text = "[laser\n";
        assert!(matches!(
            parse_config(text).unwrap_err(),
            ConfigError::Syntax { line: 1, .. }
        ));
        let text = "[oven]\nsetpoint = 3\n";
        assert!(matches!(
            parse_config(text).unwrap_err(),
            ConfigError::UnknownSection { line: 1, .. }
        ));
    }

    #[test]
    fn infinite_lifetimes_accepted() {
        let cfg = parse_config(PRESET_PASSIVATED).unwrap();
        assert!(cfg.laser.tau_enr.is_infinite());
    }
}
