use std::io::Write;
use std::path::{Path, PathBuf};

use qbeat_core::analysis::{match_curves, sweep_regression, write_sweep_csv, SweepPoint};
use qbeat_core::analytic::{self, LightShifts};
use qbeat_core::clickstream::{
    correlate as correlate_stream, filter_triggered, subtract_background, CorrelationParams, FilterConfig,
};
use qbeat_core::config::{AnalysisSettings, RunConfig, RunSettings};
use qbeat_core::engine::{G2Solver, TrajectorySimulator};
use qbeat_core::units::{rad_to_mhz, seconds_to_ticks};
use qbeat_core::{ClickStream, CoherenceKind, Curve, DetectionConfig, Error, LevelScheme, PulseProtocol, SystemParams};

use crate::error::CliError;
use crate::files::{read_curve, stem, write_with};
use crate::{GlobalArgs, Toggle};

/// Sample spacing above which phase extraction loses resolution, seconds.
const PHASE_BIN_LIMIT: f64 = 2e-9;

/// Configuration with command-line overrides applied.
pub struct Context {
    pub config: RunConfig,
    pub run: RunSettings,
    pub analysis: AnalysisSettings,
    /// Whether a bin width was requested rather than defaulted.
    pub bin_requested: bool,
}

impl Context {
    pub fn new(args: &GlobalArgs) -> Result<Self, CliError> {
        let mut config = match &args.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = args.seed {
            config.run.seed = Some(seed);
        }
        if let Some(out) = &args.out {
            config.run.out_dir = Some(out.clone());
        }
        if let Some(bin) = &args.bin {
            config.analysis.bin_ns = Some(parse_bin(bin)?);
        }
        if let Some(window) = &args.window {
            config.analysis.window_us = Some(parse_window(window)?);
        }
        if let Some(filter) = args.filter {
            config.analysis.filter = Some(filter == Toggle::On);
        }
        let run = config.run_settings()?;
        let analysis = config.analysis_settings()?;
        let bin_requested = config.analysis.bin_ns.is_some();
        Ok(Context { config, run, analysis, bin_requested })
    }

    fn out_dir(&self) -> &Path {
        &self.run.out_dir
    }

    fn physics(&self) -> Result<(SystemParams, PulseProtocol, DetectionConfig), CliError> {
        let params = self.config.system_params()?;
        let protocol = self.config.protocol()?;
        let detection = self.config.detection(&params)?;
        Ok((params, protocol, detection))
    }
}

/// `1.64ns`, `16.4 ns`, `820ps` or a bare number of nanoseconds.
fn parse_bin(s: &str) -> Result<f64, CliError> {
    let t = s.trim();
    let (number, scale) = if let Some(v) = t.strip_suffix("ns") {
        (v, 1.0)
    } else if let Some(v) = t.strip_suffix("ps") {
        (v, 1e-3)
    } else {
        (t, 1.0)
    };
    match number.trim().parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v * scale),
        _ => Err(CliError::usage("--bin", format!("expected a positive width such as 1.64ns or 16.4ns (got {s:?})"))),
    }
}

/// `START,END` in μs.
fn parse_window(s: &str) -> Result<[f64; 2], CliError> {
    let parts: Vec<Option<f64>> = s.split(',').map(|p| p.trim().parse::<f64>().ok()).collect();
    match parts.as_slice() {
        [Some(a), Some(b)] if *a >= 0.0 && b > a => Ok([*a, *b]),
        _ => Err(CliError::usage("--window", format!("expected START,END in μs with 0 ≤ START < END (got {s:?})"))),
    }
}

/// A local oscillator selects the `(g±, g0)` beat; without one the `(g+, g−)` beat remains.
fn coherence_kind(detection: &DetectionConfig) -> CoherenceKind {
    if detection.epsilon.norm() > 0.0 {
        CoherenceKind::PlusZero
    } else {
        CoherenceKind::PlusMinus
    }
}

fn announce(path: &Path) {
    eprintln!("wrote {}", path.display());
}

fn warn_coarse_bins(dt: f64) {
    if dt > PHASE_BIN_LIMIT {
        eprintln!(
            "warning: phase analysis at {:.3} ns bins; 1.64 ns bins are recommended for phase extraction (coarse bins suit amplitude only)",
            dt * 1e9
        );
    }
}

pub fn predict(ctx: &Context) -> Result<(), CliError> {
    let (base, protocol, detection) = ctx.physics()?;
    let kind = coherence_kind(&detection);
    let sweep = ctx.config.predict_sweep()?;
    let rows: Vec<(Option<f64>, SystemParams)> = match &sweep {
        None => vec![(None, base)],
        Some((key, values)) => values
            .iter()
            .map(|&v| Ok((Some(v), ctx.config.with_system_value(key, v)?.system_params()?)))
            .collect::<Result<_, CliError>>()?,
    };
    let path = write_with(ctx.out_dir(), "predict.csv", |w| {
        if let Some((key, _)) = &sweep {
            write!(w, "{key},")?;
        }
        writeln!(
            w,
            "delta_ac_mhz,delta_jump_mhz,delta_light_mhz,gamma_decoh_mhz,jump_rate_mhz,beat_frequency_mhz,phase_shift_rad,recovery_scale"
        )?;
        for (value, p) in &rows {
            if let Some(v) = value {
                write!(w, "{v},")?;
            }
            let s = LightShifts::of(p);
            writeln!(
                w,
                "{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}",
                rad_to_mhz(s.delta_ac),
                rad_to_mhz(s.delta_jump),
                rad_to_mhz(s.delta_light),
                rad_to_mhz(s.gamma_decoh),
                rad_to_mhz(s.jump_rate),
                rad_to_mhz(analytic::beat_frequency(p, kind)),
                analytic::predict_phase_shift(&protocol, p, kind),
                analytic::amplitude_recovery_scale(&protocol, p, kind)
            )?;
        }
        Ok(())
    })?;
    announce(&path);
    Ok(())
}

pub fn simulate(ctx: &Context) -> Result<(), CliError> {
    let (params, protocol, detection) = ctx.physics()?;
    let solver = G2Solver::new(&params, &LevelScheme::simplified(), &detection).map_err(CliError::at("system"))?;
    eprintln!("steady-state detection rate {:.4e} /s", solver.steady_rate());

    let mut curves = vec![("g2_continuous.csv", PulseProtocol { width: 0.0, ..protocol })];
    if protocol.gates_drive() {
        curves.push(("g2_gated.csv", protocol));
    }
    for (name, proto) in curves {
        let curve = solver.conditional_g2(&proto, ctx.run.t_max, ctx.run.dt).map_err(CliError::at("run.dt_ns"))?;
        announce(&write_with(ctx.out_dir(), name, |w| curve.write_csv(w))?);
    }

    if ctx.run.n_traj == 0 {
        return Ok(());
    }
    let seed = ctx
        .run
        .seed
        .ok_or_else(|| CliError::usage("run.seed", "trajectories need an explicit seed (config run.seed or --seed)"))?;
    let sim = TrajectorySimulator::new(&params, &LevelScheme::simplified(), &protocol, &detection)
        .map_err(CliError::at("detection.field"))?;
    let seeds: Vec<u64> = (0..ctx.run.n_traj as u64).map(|k| seed.wrapping_add(k)).collect();
    let run = sim.run(ctx.run.duration, &seeds).map_err(CliError::at("run"))?;
    let (path, mut w) = crate::files::create(ctx.out_dir(), "clicks.bin")?;
    run.stream.write_binary(&mut w).map_err(CliError::at("--out"))?;
    w.flush().map_err(|e| CliError::at("--out")(Error::Io(e)))?;
    drop(w);
    announce(&path);
    let log = write_with(ctx.out_dir(), "gate_log.csv", |w| {
        writeln!(w, "trigger_tick_ps,emitted")?;
        for g in run.gate_copy_log() {
            writeln!(w, "{},{}", g.trigger_tick, u8::from(g.emitted))?;
        }
        Ok(())
    })?;
    announce(&log);
    let c = run.jump_counts;
    eprintln!(
        "{} trajectories, {:.3} s total: {} detected clicks, {} triggers, {:.2}% missed",
        seeds.len(),
        run.total_time(),
        c.detected,
        run.gate_log.len(),
        100.0 * run.missed_fraction()
    );
    Ok(())
}

pub fn correlate(ctx: &Context, streams: &[PathBuf]) -> Result<(), CliError> {
    let params = ctx.config.system_params()?;
    let protocol = ctx.config.protocol()?;
    let detection = ctx.config.detection(&params)?;
    let settings = CorrelationParams {
        bin_width_ps: ctx.analysis.bin_width_ps,
        t_max_ps: seconds_to_ticks(ctx.run.t_max),
        mode: ctx.analysis.mode,
        start_channel: detection.start_channel,
        stop_channel: detection.stop_channel(),
    };
    for path in streams {
        let key = path.display().to_string();
        let mut stream = ClickStream::load(path).map_err(CliError::at(&key))?;
        if ctx.analysis.filter {
            let filter = FilterConfig {
                start_channel: detection.start_channel,
                delay_ps: seconds_to_ticks(protocol.trigger_delay),
                window_ps: ctx.analysis.filter_window_ps,
            };
            stream = filter_triggered(&stream, &filter).map_err(|e| match e {
                Error::NoGateCopies => CliError::usage(
                    "--filter",
                    format!("{key}: {e}; rerun with --filter off or analysis.filter = false"),
                ),
                e => CliError::at(&key)(e),
            })?;
        }
        let mut hist = correlate_stream(&stream, &settings).map_err(CliError::at(&key))?;
        if let Some(level) = ctx.analysis.dark_level {
            hist = subtract_background(&hist, level).map_err(CliError::at("analysis.dark_level"))?;
        }
        let out = write_with(ctx.out_dir(), &format!("{}_hist.csv", stem(path)), |w| hist.write_csv(w))?;
        eprintln!("{}: {} starts, {} stops, {} pairs", key, hist.n_starts, hist.n_stops, hist.total());
        announce(&out);
    }
    Ok(())
}

/// Average groups of samples to the requested bin width.
fn rebin_curve(curve: Curve, bin: f64, key: &str) -> Result<Curve, CliError> {
    let factor = (bin / curve.dt).round();
    if !(factor >= 1.0) || ((factor * curve.dt - bin) / bin).abs() > 1e-3 {
        return Err(CliError::at("--bin")(Error::IncommensurateBins {
            source_ps: (curve.dt * 1e12).round() as u64,
            target_ps: (bin * 1e12).round() as u64,
        }));
    }
    let k = factor as usize;
    if k == 1 {
        return Ok(curve);
    }
    let values: Vec<f64> = curve.values.chunks_exact(k).map(|c| c.iter().sum::<f64>() / k as f64).collect();
    let t0 = curve.t0 + 0.5 * (k - 1) as f64 * curve.dt;
    Curve::new(t0, curve.dt * k as f64, values).map_err(CliError::at(key))
}

pub fn analyze(ctx: &Context, reference: &Path, tests: &[PathBuf]) -> Result<(), CliError> {
    let load = |path: &Path| -> Result<Curve, CliError> {
        let curve = read_curve(path)?;
        if ctx.bin_requested {
            rebin_curve(curve, ctx.analysis.bin_width_ps as f64 * 1e-12, &path.display().to_string())
        } else {
            Ok(curve)
        }
    };
    let reference_curve = load(reference)?;
    warn_coarse_bins(reference_curve.dt);
    for path in tests {
        let key = path.display().to_string();
        let test = load(path)?;
        let window =
            ctx.analysis.window.unwrap_or((reference_curve.t0.max(test.t0), reference_curve.t_end().min(test.t_end())));
        let fit = match_curves(&reference_curve, &test, window).map_err(CliError::at(&key))?;
        let report = fit.report();
        print!("{report}");
        let out =
            write_with(ctx.out_dir(), &format!("{}_fit.txt", stem(path)), |w| Ok(w.write_all(report.as_bytes())?))?;
        announce(&out);
    }
    Ok(())
}

pub fn sweep(ctx: &Context) -> Result<(), CliError> {
    let (params, protocol, detection) = ctx.physics()?;
    let widths = ctx.config.sweep_widths()?;
    if widths.len() < 3 {
        return Err(CliError::usage("sweep.widths_us", "a sweep needs at least three widths"));
    }
    let kind = coherence_kind(&detection);
    // Fit window relative to the drive turning back on.
    let (w0, w1) = ctx.analysis.window.unwrap_or((0.0, 2e-6));
    let widest = widths.iter().copied().fold(0.0, f64::max);
    let t_max = ctx.run.t_max.max(protocol.trigger_delay + protocol.off_start + widest + w1 + 0.1e-6);
    warn_coarse_bins(ctx.run.dt);

    let solver = G2Solver::new(&params, &LevelScheme::simplified(), &detection).map_err(CliError::at("system"))?;
    let continuous = PulseProtocol { width: 0.0, ..protocol };
    let reference =
        Curve::from_g2(&solver.conditional_g2(&continuous, t_max, ctx.run.dt).map_err(CliError::at("run.dt_ns"))?);
    let mut points = Vec::with_capacity(widths.len());
    for &width in &widths {
        let proto = PulseProtocol { width, ..protocol };
        let gated =
            Curve::from_g2(&solver.conditional_g2(&proto, t_max, ctx.run.dt).map_err(CliError::at("run.dt_ns"))?);
        let on = proto.window().1;
        let fit = match_curves(&reference, &gated, (on + w0, on + w1)).map_err(CliError::at("sweep.widths_us"))?;
        eprintln!("width {:.3} μs: phase {:.4} rad, scale {:.4}", width * 1e6, fit.phase_shift, fit.scale);
        points.push(SweepPoint { width, fit });
    }
    let (phase, scale) = sweep_regression(&points).map_err(CliError::at("sweep.widths_us"))?;

    announce(&write_with(ctx.out_dir(), "sweep.csv", |w| write_sweep_csv(&points, w))?);
    let r = protocol.attenuation;
    let k = kind.order() * (1.0 - r * r);
    let report = [
        (
            "coherence",
            match kind {
                CoherenceKind::PlusZero => "g0_gplus".to_string(),
                CoherenceKind::PlusMinus => "gplus_gminus".to_string(),
            },
        ),
        ("phase_slope_mhz", format!("{:.6}", rad_to_mhz(phase.slope))),
        ("phase_slope_err_mhz", format!("{:.6}", rad_to_mhz(phase.slope_err))),
        ("phase_intercept_rad", format!("{:.6}", phase.intercept)),
        ("predicted_phase_slope_mhz", format!("{:.6}", rad_to_mhz(k * analytic::light_shift(&params)))),
        ("log_scale_slope_mhz", format!("{:.6}", rad_to_mhz(scale.slope))),
        ("log_scale_slope_err_mhz", format!("{:.6}", rad_to_mhz(scale.slope_err))),
        ("log_scale_intercept", format!("{:.6}", scale.intercept)),
        ("predicted_log_scale_slope_mhz", format!("{:.6}", rad_to_mhz(k * analytic::decoherence_rate(&params)))),
    ];
    let text: String = report.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    print!("{text}");
    announce(&write_with(ctx.out_dir(), "sweep_report.txt", |w| Ok(w.write_all(text.as_bytes())?))?);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_spellings() {
        assert_eq!(parse_bin("1.64ns").unwrap(), 1.64);
        assert_eq!(parse_bin("16.4 ns").unwrap(), 16.4);
        assert!((parse_bin("820ps").unwrap() - 0.82).abs() < 1e-12);
        assert_eq!(parse_bin("3").unwrap(), 3.0);
        assert!(parse_bin("fast").is_err());
        assert!(parse_bin("-1ns").is_err());
    }

    #[test]
    fn window_spellings() {
        assert_eq!(parse_window("0.5, 4.7").unwrap(), [0.5, 4.7]);
        for bad in ["4.7,0.5", "1", "a,b", "1,2,3"] {
            assert!(matches!(parse_window(bad), Err(CliError::Usage { ref key, .. }) if key == "--window"), "{bad}");
        }
    }

    #[test]
    fn rebinning_averages_groups() {
        let c = Curve::new(0.0, 1e-9, (0..10).map(f64::from).collect()).unwrap();
        let r = rebin_curve(c.clone(), 2e-9, "x").unwrap();
        assert_eq!(r.values, vec![0.5, 2.5, 4.5, 6.5, 8.5]);
        assert!((r.t0 - 0.5e-9).abs() < 1e-18);
        assert!(rebin_curve(c, 1.5e-9, "x").is_err());
    }
}
