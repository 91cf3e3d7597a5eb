//! Subcommand implementations.

use std::fmt;
use std::path::{Path, PathBuf};

use pclaser_core::dynamics::{self, DynamicsError};
use pclaser_core::fitting::{
    self, FitError, FitOptions, FitSpec, LifetimeSet, MultiExpModel, NoiseSpec, RateTraceModel,
    TraceModel,
};
use pclaser_core::model::{LaserState, PumpDrive};
use pclaser_core::steadystate::{self, SteadyStateError};
use pclaser_core::units;

use crate::config::{self, ConfigError, FitModelKind, RunConfig};
use crate::records::{csv_table, input_digest, Format, ResultRecord};
use crate::trace_io::{self, TraceIoError};

/// Exit-code classed error: 2 usage, 3 input/parse, 4 numerical.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<TraceIoError> for CliError {
    fn from(e: TraceIoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SteadyStateError> for CliError {
    fn from(e: SteadyStateError) -> Self {
        match e {
            SteadyStateError::Param(_) | SteadyStateError::BadGrid => {
                CliError::Input(e.to_string())
            }
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Param(_) => CliError::Input(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::Param(_)
            | FitError::Trace(_)
            | FitError::UnknownParameter { .. }
            | FitError::BadSpec(_)
            | FitError::NotEnoughData { .. }
            | FitError::InconsistentLifetimes { .. }
            | FitError::CavityNotFaster { .. } => CliError::Input(e.to_string()),
            FitError::Integrate(_) | FitError::EvaluationFailed => CliError::Numeric(e.to_string()),
        }
    }
}

/// Arguments that determine outputs: everything except where results are
/// written and how records are encoded (those must not perturb digests).
pub fn semantic_args(argv: &[String]) -> String {
    let mut kept: Vec<&str> = Vec::new();
    let mut skip_value = false;
    for (i, arg) in argv.iter().enumerate() {
        if i == 0 {
            continue; // binary path
        }
        if skip_value {
            skip_value = false;
            continue;
        }
        match arg.as_str() {
            "--out" | "--format" => {
                skip_value = true;
                continue;
            }
            s if s.starts_with("--out=") || s.starts_with("--format=") => continue,
            s => kept.push(s),
        }
    }
    kept.join("\u{1f}")
}

/// Everything shared between subcommands.
pub struct Context {
    pub config_text: String,
    pub config_name: String,
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub format: Format,
    pub argv_digest: String,
}

impl Context {
    pub fn load(
        config_spec: Option<&str>,
        out_dir: &Path,
        seed: Option<u64>,
        format: Format,
        argv: &[String],
    ) -> Result<Context, CliError> {
        let spec = config_spec
            .ok_or_else(|| CliError::Usage("--config is required for this command".into()))?;
        let (config_text, config_name) = config::resolve_config_text(spec)?;
        let config = config::parse_config(&config_text)?;
        let seed = seed.unwrap_or(config.seed);
        let argv_digest = semantic_args(argv);
        Ok(Context {
            config_text,
            config_name,
            config,
            out_dir: out_dir.to_path_buf(),
            seed,
            format,
            argv_digest,
        })
    }

    fn digest(&self, extra: &[&[u8]]) -> String {
        let mut parts: Vec<&[u8]> = vec![self.config_text.as_bytes(), self.argv_digest.as_bytes()];
        let seed_bytes = self.seed.to_le_bytes();
        parts.push(&seed_bytes);
        parts.extend_from_slice(extra);
        input_digest(&parts)
    }

    fn record(&self, command: &str, extra: &[&[u8]]) -> ResultRecord {
        ResultRecord::new(
            command,
            &self.digest(extra),
            self.config.label.as_deref(),
            self.seed,
        )
    }

    fn pump(&self) -> Result<PumpDrive, CliError> {
        self.config.pump.ok_or_else(|| {
            CliError::Input("this command needs a [pump] section in the config".into())
        })
    }

    fn rate_model(&self) -> Result<RateTraceModel, CliError> {
        let mut model = RateTraceModel::new(
            self.config.laser.clone(),
            self.pump()?,
            self.config.fit.observable,
        );
        model.integrator = self.config.integrator;
        model.irf_fwhm = self.config.fit.irf_fwhm;
        Ok(model)
    }

    fn trace_grid(&self) -> Vec<f64> {
        let fit = &self.config.fit;
        let n = fit.trace_samples;
        let dt = (fit.trace_end - fit.trace_start) / (n - 1) as f64;
        (0..n).map(|i| fit.trace_start + i as f64 * dt).collect()
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub fn simulate(ctx: &Context, t_end_ps: Option<f64>, samples: usize) -> Result<(), CliError> {
    let params = &ctx.config.laser;
    let drive = ctx.pump()?;
    let t_end = match t_end_ps {
        Some(v) if v > 0.0 => units::seconds_from_ps(v),
        Some(_) => return Err(CliError::Usage("--t-end-ps must be positive".into())),
        None => match drive {
            PumpDrive::PulseTrain { rep_period, .. } => 2.0 * rep_period,
            PumpDrive::Cw { .. } => 30e-9,
        },
    };
    let samples = samples.max(2);
    let cfg = dynamics::config_for_drive(params, &drive, &ctx.config.integrator);
    let traj = dynamics::integrate(params, &drive, LaserState::ZERO, 0.0, t_end, &cfg)?;
    let (ts, ys) = traj.sample_uniform(0.0, t_end, samples);

    let mut rows = Vec::with_capacity(samples);
    let mut peak_out: f64 = 0.0;
    for (t, y) in ts.iter().zip(&ys) {
        let l_out = params.output_power(y[0]);
        peak_out = peak_out.max(l_out);
        rows.push(vec![
            units::ps_from_seconds(*t),
            units::per_cm3_from_per_m3(y[0]),
            units::per_cm3_from_per_m3(y[1]),
            units::per_cm3_from_per_m3(y[2]),
            units::uw_from_watts(l_out),
        ]);
    }
    let table = csv_table(
        &["time_ps", "p_cm3", "n_g_cm3", "n_e_cm3", "l_out_uW"],
        &rows,
    );
    let trace_path = ctx.out_dir.join("trace.csv");
    trace_io::write_file(&trace_path, &table)?;

    let final_state = traj.final_state();
    let mut rec = ctx.record("simulate", &[]);
    rec.num("t_end_ps", units::ps_from_seconds(t_end))
        .num("samples", samples as f64)
        .num("steps_accepted", traj.n_accepted as f64)
        .num("peak_l_out_uW", units::uw_from_watts(peak_out))
        .num("final_p_cm3", units::per_cm3_from_per_m3(final_state[0]))
        .num("final_n_g_cm3", units::per_cm3_from_per_m3(final_state[1]))
        .num("final_n_e_cm3", units::per_cm3_from_per_m3(final_state[2]))
        .text("trace_file", "trace.csv");
    let rec_path = rec.write(&ctx.out_dir, ctx.format)?;
    println!(
        "simulate: {} over {:.1} ps, peak output {:.4e} µW -> {}, {}",
        ctx.config_name,
        units::ps_from_seconds(t_end),
        units::uw_from_watts(peak_out),
        trace_path.display(),
        rec_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// lasing-curve
// ---------------------------------------------------------------------------

pub fn lasing_curve(
    ctx: &Context,
    min_uw: f64,
    max_uw: f64,
    points: usize,
    linear: bool,
) -> Result<(), CliError> {
    if !(max_uw > min_uw) || min_uw < 0.0 || points < 2 {
        return Err(CliError::Usage(
            "need 0 <= --min-uw < --max-uw and at least 2 points".into(),
        ));
    }
    if !linear && min_uw == 0.0 {
        return Err(CliError::Usage(
            "a log grid cannot start at 0; pass --linear or a positive --min-uw".into(),
        ));
    }
    let grid: Vec<f64> = (0..points)
        .map(|i| {
            let f = i as f64 / (points - 1) as f64;
            let uw = if linear {
                min_uw + f * (max_uw - min_uw)
            } else {
                min_uw * (max_uw / min_uw).powf(f)
            };
            units::watts_from_uw(uw)
        })
        .collect();
    let curve = steadystate::lasing_curve(&ctx.config.laser, &grid)?;

    let mut rows = Vec::with_capacity(curve.len());
    for i in 0..curve.len() {
        rows.push(vec![
            units::uw_from_watts(curve.l_in[i]),
            units::uw_from_watts(curve.l_out[i]),
            units::per_cm3_from_per_m3(curve.n_g[i]),
            units::per_cm3_from_per_m3(curve.p[i]),
        ]);
    }
    let table = csv_table(&["l_in_uW", "l_out_uW", "n_g_cm3", "p_cm3"], &rows);
    let curve_path = ctx.out_dir.join("curve.csv");
    trace_io::write_file(&curve_path, &table)?;

    let mut rec = ctx.record("lasing-curve", &[]);
    rec.num("points", points as f64)
        .num("min_uW", min_uw)
        .num("max_uW", max_uw);
    if let Ok(kink) = steadystate::threshold_kink(&curve) {
        rec.num("kink_uW", units::uw_from_watts(kink));
    }
    if let Ok(slope) = steadystate::differential_efficiency(&curve) {
        rec.num("differential_efficiency", slope);
    }
    rec.text("curve_file", "curve.csv");
    let rec_path = rec.write(&ctx.out_dir, ctx.format)?;
    println!(
        "lasing-curve: {} points over {min_uw}..{max_uw} µW -> {}, {}",
        points,
        curve_path.display(),
        rec_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// threshold
// ---------------------------------------------------------------------------

pub fn threshold(ctx: &Context, compare: Option<&str>) -> Result<(), CliError> {
    let report = steadystate::threshold_report(&ctx.config.laser)?;
    let label = ctx
        .config
        .label
        .clone()
        .unwrap_or_else(|| ctx.config_name.clone());
    print_threshold(&label, &report);

    let mut rec = ctx.record("threshold", &[]);
    rec.num("l_th_numeric_uW", units::uw_from_watts(report.l_th_numeric))
        .num(
            "l_th_analytic_uW",
            units::uw_from_watts(report.l_th_analytic),
        )
        .num("bracket_radiative", report.analytic.bracket_radiative)
        .num("bracket_nonradiative", report.analytic.bracket_nonradiative)
        .num("bracket_unity", report.analytic.bracket_unity)
        .num("pump_level_factor", report.analytic.pump_level_factor)
        .num(
            "numeric_analytic_rel_diff",
            (report.l_th_numeric - report.l_th_analytic) / report.l_th_analytic,
        );

    if let Some(other_spec) = compare {
        let (other_text, other_name) = config::resolve_config_text(other_spec)?;
        let other = config::parse_config(&other_text)?;
        let other_report = steadystate::threshold_report(&other.laser)?;
        let other_label = other.label.unwrap_or_else(|| other_name.clone());
        print_threshold(&other_label, &other_report);
        let ratio_analytic = report.l_th_analytic / other_report.l_th_analytic;
        let ratio_numeric = report.l_th_numeric / other_report.l_th_numeric;
        println!("threshold ratio {label} / {other_label}:");
        println!("  analytic {ratio_analytic:.3}");
        println!("  numeric  {ratio_numeric:.3}");
        rec.text("compared_with", &other_label)
            .num("threshold_ratio_analytic", ratio_analytic)
            .num("threshold_ratio_numeric", ratio_numeric);
    }
    let rec_path = rec.write(&ctx.out_dir, ctx.format)?;
    println!("record -> {}", rec_path.display());
    Ok(())
}

fn print_threshold(label: &str, report: &steadystate::ThresholdReport) {
    println!("threshold [{label}]:");
    println!(
        "  numeric  {:.6e} µW",
        units::uw_from_watts(report.l_th_numeric)
    );
    println!(
        "  analytic {:.6e} µW",
        units::uw_from_watts(report.l_th_analytic)
    );
    println!(
        "  bracket terms: radiative {:.4e}, nonradiative {:.4e}, photon {:.1}",
        report.analytic.bracket_radiative,
        report.analytic.bracket_nonradiative,
        report.analytic.bracket_unity
    );
    println!(
        "  pump-level factor (1 + τ_E,f/τ_E,nr): {:.6}",
        report.analytic.pump_level_factor
    );
}

// ---------------------------------------------------------------------------
// fit-trace
// ---------------------------------------------------------------------------

pub fn fit_trace(ctx: &Context, trace_path: &Path) -> Result<(), CliError> {
    let trace = trace_io::load_trace(trace_path)?;
    let trace_bytes = std::fs::read(trace_path)
        .map_err(|e| CliError::Input(format!("{}: {e}", trace_path.display())))?;

    let fit_cfg = &ctx.config.fit;
    let model = match fit_cfg.model {
        FitModelKind::Rate => {
            let mut m = ctx.rate_model()?;
            // prefer the trace's own recorded instrument response
            if let Some(irf) = trace.meta.irf_fwhm {
                m.irf_fwhm = irf;
            }
            TraceModel::Rate(m)
        }
        FitModelKind::MultiExp => TraceModel::MultiExponential(MultiExpModel {
            components: fit_cfg.components,
            irf_fwhm: trace.meta.irf_fwhm.unwrap_or(fit_cfg.irf_fwhm),
        }),
    };
    let free: Vec<&str> = fit_cfg.free.iter().map(|s| s.as_str()).collect();
    let spec = FitSpec::free(&free);
    let fit = fitting::fit_trace(&model, &trace, &spec, &FitOptions::default())?;

    let best = model.evaluate(&fit.names, &fit.values, &trace.t)?;
    let rows: Vec<Vec<f64>> = trace
        .t
        .iter()
        .zip(trace.y.iter().zip(&best))
        .map(|(t, (d, m))| vec![units::ps_from_seconds(*t), *d, *m])
        .collect();
    let fit_path = ctx.out_dir.join("fit.csv");
    trace_io::write_file(&fit_path, &csv_table(&["time_ps", "data", "model"], &rows))?;

    let mut rec = ctx.record("fit-trace", &[&trace_bytes]);
    rec.text("fit_file", "fit.csv")
        .num("residual_norm", fit.residual_norm)
        .num("iterations", fit.iterations as f64)
        .num("converged", if fit.converged { 1.0 } else { 0.0 });
    for (i, name) in fit.names.iter().enumerate() {
        let value = fit.values[i];
        // report lifetimes in ps, everything else as-is
        if name.starts_with("tau") {
            rec.num(&format!("{name}_ps"), units::ps_from_seconds(value));
        } else {
            rec.num(name, value);
        }
        if let Some(err) = &fit.stderr {
            if name.starts_with("tau") {
                rec.num(&format!("{name}_stderr_ps"), units::ps_from_seconds(err[i]));
            } else {
                rec.num(&format!("{name}_stderr"), err[i]);
            }
        }
    }
    for idx in &fit.unidentifiable {
        rec.text("unidentifiable", &fit.names[*idx]);
    }
    let rec_path = rec.write(&ctx.out_dir, ctx.format)?;

    println!(
        "fit-trace: {} ({} samples), residual {:.4e}, {}",
        trace_path.display(),
        trace.len(),
        fit.residual_norm,
        if fit.converged {
            "converged"
        } else {
            "NOT converged"
        }
    );
    for (i, name) in fit.names.iter().enumerate() {
        if name.starts_with("tau") {
            println!("  {name} = {:.4} ps", units::ps_from_seconds(fit.values[i]));
        } else {
            println!("  {name} = {:.6e}", fit.values[i]);
        }
    }
    println!(
        "fit -> {}, record -> {}",
        fit_path.display(),
        rec_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn extract(
    ctx_or_default: Option<&Context>,
    out_dir: &Path,
    format: Format,
    seed: u64,
    argv: &str,
    tau_bulk_before_ps: f64,
    tau_pc_before_ps: f64,
    tau_bulk_after_ps: f64,
    tau_pc_after_ps: f64,
    tau_cav_ps: Option<f64>,
    f_pc_flag: Option<f64>,
    radius_nm_flag: Option<f64>,
) -> Result<(), CliError> {
    // flags win; then the config's [surface] section; then the defaults
    let surface_cfg = ctx_or_default.and_then(|c| c.config.surface);
    let f_pc = f_pc_flag.or(surface_cfg.map(|s| s.f_pc)).unwrap_or(0.2);
    let radius_nm = radius_nm_flag
        .or(surface_cfg.map(|s| units::nm_from_meters(s.radius)))
        .unwrap_or(120.0);
    let before = LifetimeSet::from_measured(
        units::seconds_from_ps(tau_bulk_before_ps),
        units::seconds_from_ps(tau_pc_before_ps),
        None,
        f_pc,
    )?;
    let after = LifetimeSet::from_measured(
        units::seconds_from_ps(tau_bulk_after_ps),
        units::seconds_from_ps(tau_pc_after_ps),
        tau_cav_ps.map(units::seconds_from_ps),
        f_pc,
    )?;
    let radius = units::meters_from_nm(radius_nm);
    let report = match ctx_or_default {
        Some(ctx) => fitting::passivation_report_with(&before, &after, radius, &ctx.config.laser)?,
        None => fitting::passivation_report(&before, &after, radius)?,
    };

    println!("extract (r = {radius_nm} nm, F_PC = {f_pc}):");
    println!(
        "  before: τ_r = {:.1} ps, τ_PC,nr = {:.2} ps, S = {:.4e} cm/s",
        units::ps_from_seconds(report.before.tau_r),
        units::ps_from_seconds(report.before.tau_pc_nr),
        units::cm_per_s_from_m_per_s(report.s_before)
    );
    println!(
        "  after:  τ_r = {:.1} ps, τ_PC,nr = {:.2} ps, S = {:.4e} cm/s",
        units::ps_from_seconds(report.after.tau_r),
        units::ps_from_seconds(report.after.tau_pc_nr),
        units::cm_per_s_from_m_per_s(report.s_after)
    );
    if let Some(f_cav) = report.after.f_cav {
        println!("  F_cav (from τ_cav) = {f_cav:.2}");
    }
    println!(
        "  nonradiative-rate reduction: {:.3}",
        report.nr_rate_reduction
    );
    println!(
        "  predicted threshold reduction: {:.3}",
        report.threshold_reduction
    );
    if let Some(s) = surface_cfg {
        // uniformity check behind the mesa equivalence: the diffusion length
        // should exceed the structure size
        let l_before = pclaser_core::surface::diffusion_length(s.d_amb, report.before.tau_pc_nr);
        let l_after = pclaser_core::surface::diffusion_length(s.d_amb, report.after.tau_pc_nr);
        println!(
            "  diffusion length √(Dτ_PC,nr): {:.2} µm before, {:.2} µm after",
            l_before / 1e-6,
            l_after / 1e-6
        );
    }

    let digest = input_digest(&[argv.as_bytes()]);
    let label = ctx_or_default.and_then(|c| c.config.label.as_deref());
    let mut rec = ResultRecord::new("extract", &digest, label, seed);
    rec.num("radius_nm", radius_nm)
        .num("f_pc", f_pc)
        .num(
            "tau_r_before_ps",
            units::ps_from_seconds(report.before.tau_r),
        )
        .num(
            "tau_pc_nr_before_ps",
            units::ps_from_seconds(report.before.tau_pc_nr),
        )
        .num("tau_r_after_ps", units::ps_from_seconds(report.after.tau_r))
        .num(
            "tau_pc_nr_after_ps",
            units::ps_from_seconds(report.after.tau_pc_nr),
        )
        .num(
            "s_before_cm_per_s",
            units::cm_per_s_from_m_per_s(report.s_before),
        )
        .num(
            "s_after_cm_per_s",
            units::cm_per_s_from_m_per_s(report.s_after),
        )
        .num("nr_rate_reduction", report.nr_rate_reduction)
        .num("threshold_reduction_predicted", report.threshold_reduction);
    if let Some(f_cav) = report.after.f_cav {
        rec.num("f_cav", f_cav);
    }
    let rec_path = rec.write(out_dir, format)?;
    println!("record -> {}", rec_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

pub fn synth(ctx: &Context) -> Result<(), CliError> {
    let model = ctx.rate_model()?;
    let grid = ctx.trace_grid();
    let noise = NoiseSpec {
        sigma_rel: ctx.config.fit.noise_sigma_rel,
        seed: ctx.seed,
    };
    let trace = fitting::synth_trace(&model, &grid, &noise)?;

    let trace_path = ctx.out_dir.join("synth.csv");
    trace_io::write_trace(&trace_path, &trace)?;

    let peak = trace.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut rec = ctx.record("synth", &[]);
    rec.num("samples", trace.len() as f64)
        .num("noise_sigma_rel", noise.sigma_rel)
        .num("irf_fwhm_ps", units::ps_from_seconds(model.irf_fwhm))
        .num("peak", peak)
        .text("trace_file", "synth.csv");
    let rec_path = rec.write(&ctx.out_dir, ctx.format)?;
    println!(
        "synth: {} samples (seed {}) -> {}, {}",
        trace.len(),
        ctx.seed,
        trace_path.display(),
        rec_path.display()
    );
    Ok(())
}
