use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use squeezecat::channels::{gaussian_env_channel, pure_loss, ChannelSpec};
use squeezecat::metrics::{decay_curve, fock_rd_ladder, optimal_squeezing, ChannelFamily, DecayCurve, Objective};
use squeezecat::states::cat;
use squeezecat::tomography::{
    default_thetas, delayed_mode_state, effective_eta, maxlik_reconstruct, sample_homodyne, ConvergenceReport,
    TemporalMode, TomographyConfig,
};
use squeezecat::wigner::{
    cross_section_csv, find_min, kernel_convolve, wigner_grid, MinSearch, Window,
};
use squeezecat::{Complex64, DensityMatrix, Error, Parity};

use crate::config::ScenarioConfig;
use crate::CliError;

fn write_out(cfg: &ScenarioConfig, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", cfg.out.display())))?;
    let path = cfg.out.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn read_state(path: &Path) -> Result<DensityMatrix, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(DensityMatrix::from_json(&text)?)
}

/// Wigner minimum, or `None` when the function is nonnegative.
fn w_min(rho: &DensityMatrix) -> Result<Option<f64>, CliError> {
    match find_min(rho, &MinSearch::default()) {
        Ok(m) => Ok(Some(m.value)),
        Err(Error::NoNegativity) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

fn apply_channel(rho: &DensityMatrix, spec: &ChannelSpec) -> Result<DensityMatrix, CliError> {
    spec.validate()?;
    Ok(if spec.is_pure_loss() {
        pure_loss(rho, spec.eta)?
    } else {
        gaussian_env_channel(rho, spec)?
    })
}

fn summary(label: &str, rho: &DensityMatrix, file: &Path) -> Result<String, CliError> {
    Ok(format!(
        "state=\"{label}\" dim={} purity={} mean_photon={} w_min={} file={}",
        rho.dim(),
        rho.purity(),
        rho.mean_photon(),
        fmt_opt(w_min(rho)?),
        file.display()
    ))
}

pub fn state(cfg: &ScenarioConfig) -> Result<(), CliError> {
    let rho = cfg.state.build()?;
    let path = write_out(cfg, "state.json", &rho.to_json()?)?;
    println!("{}", summary(&cfg.state.describe(), &rho, &path)?);
    Ok(())
}

pub fn channel(cfg: &ScenarioConfig, input: Option<&Path>) -> Result<(), CliError> {
    let (rho, label) = match input {
        Some(p) => (read_state(p)?, p.display().to_string()),
        None => (cfg.state.build()?, cfg.state.describe()),
    };
    let out = apply_channel(&rho, &cfg.channel)?;
    let path = write_out(cfg, "channel_out.json", &out.to_json()?)?;
    let spec = &cfg.channel;
    let label = format!(
        "{label} through eta={} env_gain={} env_var_x={} env_var_p={} phase={}",
        spec.eta, spec.env_gain, spec.env_var_x, spec.env_var_p, spec.phase
    );
    println!("{}", summary(&label, &out, &path)?);
    Ok(())
}

pub fn wigner(cfg: &ScenarioConfig, input: Option<&Path>, through_channel: bool, kernel: bool) -> Result<(), CliError> {
    let rho = match input {
        Some(p) => read_state(p)?,
        None => cfg.state.build()?,
    };
    let w = &cfg.wigner;
    if !(w.half_width > 0.0) || w.points < 2 {
        return Err(CliError::Config("wigner grid needs half_width > 0 and points ≥ 2".into()));
    }
    let window = Window::square(w.half_width);
    let grid = if !through_channel {
        wigner_grid(&rho, window, w.points, w.points)?
    } else if kernel {
        kernel_convolve(&wigner_grid(&rho, window, w.points, w.points)?, &cfg.channel)?
    } else {
        wigner_grid(&apply_channel(&rho, &cfg.channel)?, window, w.points, w.points)?
    };
    let csv = write_out(cfg, "wigner.csv", &grid.to_csv())?;
    write_out(cfg, "wigner.json", &serde_json::to_string(&grid.to_record())?)?;
    write_out(cfg, "cross_p.csv", &cross_section_csv("p", &grid.cross_section_at_x(w.cross_x)))?;
    write_out(cfg, "cross_x.csv", &cross_section_csv("x", &grid.cross_section_at_p(0.0)))?;
    println!(
        "grid={}x{} integral={} min={} file={}",
        grid.nx(),
        grid.np(),
        grid.integral(),
        grid.min_value(),
        csv.display()
    );
    Ok(())
}

fn rd_at(curve: &DecayCurve, eta: f64) -> Option<f64> {
    curve.points.iter().find(|p| p.eta == eta).map(|p| p.rd)
}

pub fn decay(cfg: &ScenarioConfig) -> Result<(), CliError> {
    let etas = cfg.sweep.etas()?;
    let family = ChannelFamily::from_spec(&cfg.channel);
    let mut plain_cfg = cfg.state.clone();
    plain_cfg.s_db = 0.0;
    let plain = decay_curve(&cfg.state.build_unsqueezed()?, &plain_cfg.describe(), &etas, &family)?;
    let squeezed = decay_curve(&cfg.state.build()?, &cfg.state.describe(), &etas, &family)?;

    write_out(cfg, "decay_plain.csv", &plain.to_csv())?;
    write_out(cfg, "decay_plain.json", &plain.sidecar_json()?)?;
    write_out(cfg, "decay_squeezed.csv", &squeezed.to_csv())?;
    write_out(cfg, "decay_squeezed.json", &squeezed.sidecar_json()?)?;

    let mut report = String::from("# rate-of-decay reduction: rd_plain / rd_squeezed\n# eta,rd_plain,rd_squeezed,factor\n");
    let mut near = None::<(f64, f64)>;
    for &eta in &etas {
        if let (Some(a), Some(b)) = (rd_at(&plain, eta), rd_at(&squeezed, eta)) {
            let factor = a / b;
            let _ = writeln!(report, "{eta},{a:e},{b:e},{factor:e}");
            if near.is_none_or(|(e, _)| (eta - 0.8).abs() < (e - 0.8).abs()) {
                near = Some((eta, factor));
            }
        }
    }
    let path = write_out(cfg, "reduction.csv", &report)?;
    println!(
        "plain_points={} squeezed_points={} plain_threshold={} squeezed_threshold={}",
        plain.points.len(),
        squeezed.points.len(),
        fmt_opt(plain.positivity_threshold),
        fmt_opt(squeezed.positivity_threshold)
    );
    match near {
        Some((eta, factor)) => println!("factor_eta={eta} factor={factor} file={}", path.display()),
        None => println!("factor=none file={}", path.display()),
    }
    Ok(())
}

pub fn fig2(cfg: &ScenarioConfig) -> Result<(), CliError> {
    let f = &cfg.fig2;
    if !(f.alpha2_step > 0.0) || !(f.alpha2_min > 0.0) || f.alpha2_max < f.alpha2_min || f.n_max == 0 {
        return Err(CliError::Config(
            "fig2 needs 0 < alpha2_min ≤ alpha2_max, alpha2_step > 0, n_max ≥ 1".into(),
        ));
    }
    let parity: Parity = f.parity.into();
    let count = ((f.alpha2_max - f.alpha2_min) / f.alpha2_step + 1e-9).floor() as usize;
    let mut csv = String::from("# rate of decay at eta=1\n# alpha2,rd_plain,rd_opt,s_opt\n");
    for k in 0..=count {
        let a2 = ((f.alpha2_min + k as f64 * f.alpha2_step) * 1e12).round() / 1e12;
        let rho = cat(Complex64::new(a2.sqrt(), 0.0), parity, cfg.state.dim)?;
        let opt = optimal_squeezing(&rho, 1.0, 0.0, Objective::MinRd)?;
        let _ = writeln!(csv, "{a2},{:e},{:e},{}", opt.value_at_zero, opt.value, opt.params.s_db);
        println!("alpha2={a2} rd_plain={} rd_opt={} s_opt={}", opt.value_at_zero, opt.value, opt.params.s_db);
    }
    let ladder = fock_rd_ladder(f.n_max, 1.0)?;
    let mut fock = String::from("# fock reference lines at eta=1\n# n,rd\n");
    for (i, rd) in ladder.iter().enumerate() {
        let _ = writeln!(fock, "{},{rd:e}", i + 1);
    }
    let path = write_out(cfg, "fig2.csv", &csv)?;
    write_out(cfg, "fig2_fock.csv", &fock)?;
    println!(
        "fock_lines={} file={}",
        ladder.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
        path.display()
    );
    Ok(())
}

pub fn optimize(cfg: &ScenarioConfig) -> Result<(), CliError> {
    let rho = cfg.state.build_unsqueezed()?;
    let o = &cfg.optimize;
    let opt = optimal_squeezing(&rho, o.eta, cfg.state.angle, o.objective)?;
    let mut scan = String::from("# s_db,objective\n");
    for (s, v) in &opt.scan {
        let _ = writeln!(scan, "{s},{}", v.map_or_else(|| "nan".to_string(), |v| format!("{v:e}")));
    }
    write_out(cfg, "optimize_scan.csv", &scan)?;
    let path = write_out(cfg, "optimize.json", &serde_json::to_string_pretty(&opt)?)?;
    println!(
        "s_opt={} value={} value_at_zero={} dw_dg={} degenerate={} file={}",
        opt.params.s_db,
        opt.value,
        opt.value_at_zero,
        opt.dw_dg,
        opt.degenerate,
        path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TomoReport {
    source: String,
    samples: usize,
    phases: usize,
    seed: u64,
    eta_eff: f64,
    efficiency: f64,
    corrected: bool,
    /// Which state the fidelity is measured against.
    reference: &'static str,
    fidelity: f64,
    w_min_reference: Option<f64>,
    w_min_reconstructed: Option<f64>,
    convergence: ConvergenceReport,
}

pub fn tomo(cfg: &ScenarioConfig) -> Result<(), CliError> {
    let t = &cfg.tomo;
    if t.phases == 0 || t.samples == 0 {
        return Err(CliError::Config("tomography needs at least one phase and one sample".into()));
    }
    if !(t.efficiency > 0.0 && t.efficiency <= 1.0) {
        return Err(CliError::Config(format!("efficiency {} is outside (0, 1]", t.efficiency)));
    }
    let truth = cfg.state.build()?;
    let mode = TemporalMode::new(t.gamma, t.delay_tau)?;
    let eta_eff = effective_eta(&mode);
    let delayed = delayed_mode_state(&truth, &mode)?;
    let detected = pure_loss(&delayed, t.efficiency)?;
    let per_phase = t.samples.div_ceil(t.phases);
    let source = cfg.state.describe();
    let data = sample_homodyne(&detected, &default_thetas(t.phases), per_phase, cfg.seed, &source)?;
    let tcfg = TomographyConfig {
        dim: t.dim,
        efficiency: if t.correct { t.efficiency } else { 1.0 },
        max_iters: t.max_iters,
        convergence_tol: t.convergence_tol,
        ..Default::default()
    };
    let rec = maxlik_reconstruct(&data, &tcfg)?;
    let reference = if t.correct { &delayed } else { &detected };
    let common = reference.dim().max(rec.state.dim());
    let fidelity = rec.state.resized(common).fidelity(&reference.resized(common))?;

    write_out(cfg, "dataset.csv", &data.to_csv()?)?;
    write_out(cfg, "reconstruction.json", &rec.state.to_json()?)?;
    let report = TomoReport {
        source,
        samples: data.len(),
        phases: t.phases,
        seed: cfg.seed,
        eta_eff,
        efficiency: t.efficiency,
        corrected: t.correct,
        reference: if t.correct { "before detection" } else { "as detected" },
        fidelity,
        w_min_reference: w_min(reference)?,
        w_min_reconstructed: w_min(&rec.state)?,
        convergence: rec.report,
    };
    let path = write_out(cfg, "tomo_report.json", &serde_json::to_string_pretty(&report)?)?;
    println!(
        "eta_eff={eta_eff} fidelity={fidelity} w_min_reconstructed={} w_min_reference={} iterations={} converged={} file={}",
        fmt_opt(report.w_min_reconstructed),
        fmt_opt(report.w_min_reference),
        rec.report.iterations,
        rec.report.converged,
        path.display()
    );
    Ok(())
}
