//! `qpmsim`: configuration-driven front end for `qpm-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod recipes;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use qpm_core::analysis::{find_nbpm, find_qpm, fit_disorder};
use qpm_core::ensemble::reduction_summary;
use qpm_core::spectrum::route_discrepancy;
use qpm_core::*;
use serde_json::json;
use std::result::Result;

use config::{MatchMode, ScenarioConfig};
use recipes::{Figure, RecipeOptions};

/// Failure classes with their exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or arguments (exit 2).
    Usage(String),
    /// Bad or incomplete configuration (exit 2).
    Config(String),
    /// Failure while computing (exit 1).
    Compute(qpm_core::Error),
    /// Failure writing outputs (exit 1).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Compute(qpm_core::Error::Parameter(_)) => 2,
            CliError::Compute(_) | CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Compute(e) => write!(f, "error: {e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<qpm_core::Error> for CliError {
    fn from(e: qpm_core::Error) -> Self {
        CliError::Compute(e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qpmsim",
    version,
    about = "Biphoton spectra of nonideal and randomly poled QPM crystals"
)]
pub struct Cli {
    /// Scenario configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file (directory for `reproduce`); standard output when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Analytic,
    Numeric,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KernelArg {
    TopHat,
    Gaussian,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Qpm,
    Nbpm,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Refractive indices and wavevectors at the given wavelengths (um).
    Dispersion {
        #[arg(value_delimiter = ',', allow_negative_numbers = true)]
        wavelengths: Vec<f64>,
    },
    /// Solve the QPM or NBPM condition.
    Phasematch {
        #[arg(long)]
        mode: Option<ModeArg>,
        /// Signal search window `LO,HI` in um.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        window: Option<Vec<f64>>,
    },
    /// Spectral power density on the configured grid.
    Spectrum {
        #[arg(long)]
        method: Option<MethodArg>,
        #[arg(long = "resolution-nm")]
        resolution_nm: Option<f64>,
        #[arg(long)]
        kernel: Option<KernelArg>,
    },
    /// Monte Carlo ensemble statistics plus a seed sidecar.
    Ensemble {
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Fit duty cycle and disorder to a measured spectrum CSV.
    Fit {
        #[arg(long, value_name = "PATH")]
        measured: PathBuf,
    },
    /// Regenerate a pinned figure recipe.
    Reproduce {
        figure: Figure,
        #[arg(long)]
        realizations: Option<usize>,
    },
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(|| dispatch(&cli)),
        None => dispatch(&cli),
    }
}

fn load_config(cli: &Cli, required: bool) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ScenarioConfig::load(p)?,
        None if required => return Err(CliError::Usage("this command needs --config PATH".into())),
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        if let Some(g) = cfg.grating.as_mut() {
            g.seed = seed;
        }
        cfg.ensemble.master_seed = seed;
        if let Some(f) = cfg.fit.as_mut() {
            f.master_seed = seed;
        }
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Dispersion { wavelengths } => cmd_dispersion(&load_config(cli, false)?, wavelengths, out),
        Command::Phasematch { mode, window } => {
            let mut cfg = load_config(cli, true)?;
            if let Some(m) = mode {
                cfg.phasematch.mode = match m {
                    ModeArg::Qpm => MatchMode::Qpm,
                    ModeArg::Nbpm => MatchMode::Nbpm,
                };
            }
            if let Some(w) = window {
                let [lo, hi] = w[..] else {
                    return Err(CliError::Usage(format!("--window takes LO,HI, got {} values", w.len())));
                };
                cfg.phasematch.window_um = [lo, hi];
            }
            revalidate(&cfg)?;
            cmd_phasematch(&cfg, out)
        }
        Command::Spectrum {
            method,
            resolution_nm,
            kernel,
        } => {
            let mut cfg = load_config(cli, true)?;
            if let Some(m) = method {
                cfg.spectrum.method = match m {
                    MethodArg::Analytic => Method::Analytic,
                    MethodArg::Numeric => Method::Numeric,
                };
            }
            if let Some(r) = resolution_nm {
                cfg.spectrum.resolution_nm = *r;
            }
            if let Some(k) = kernel {
                cfg.spectrum.kernel = match k {
                    KernelArg::TopHat => ResolutionKernel::TopHat,
                    KernelArg::Gaussian => ResolutionKernel::Gaussian,
                };
            }
            revalidate(&cfg)?;
            cmd_spectrum(&cfg, out)
        }
        Command::Ensemble { realizations } => {
            let mut cfg = load_config(cli, true)?;
            if let Some(n) = realizations {
                cfg.ensemble.realizations = *n;
            }
            revalidate(&cfg)?;
            cmd_ensemble(&cfg, out)
        }
        Command::Fit { measured } => cmd_fit(&load_config(cli, true)?, measured, out),
        Command::Reproduce { figure, realizations } => {
            let cfg = load_config(cli, false)?;
            let mut opts = RecipeOptions {
                master_seed: cli.seed.unwrap_or(0),
                ..Default::default()
            };
            if let Some(n) = realizations {
                if *n == 0 {
                    return Err(CliError::Usage("--realizations must be at least 1".into()));
                }
                opts.realizations = *n;
            }
            cmd_reproduce(&cfg, *figure, &opts, out)
        }
    }
}

fn revalidate(cfg: &ScenarioConfig) -> Result<(), CliError> {
    cfg.validate().map_err(|(s, m)| CliError::Config(format!("[{s}] {m}")))
}

pub fn cmd_dispersion(cfg: &ScenarioConfig, wavelengths: &[f64], out: Option<&Path>) -> Result<(), CliError> {
    if wavelengths.is_empty() {
        return Err(CliError::Usage("give at least one wavelength in um".into()));
    }
    let model = cfg.model()?;
    let mut text = format!("# model={}\n# provenance={}\n", model.name, model.provenance);
    text.push_str("wavelength_um,n_y,n_z,k_y_rad_per_um,k_z_rad_per_um\n");
    for &l in wavelengths {
        let ny = model.refractive_index(OpticalAxis::Y, l)?;
        let nz = model.refractive_index(OpticalAxis::Z, l)?;
        let ky = model.wavevector(OpticalAxis::Y, l)?;
        let kz = model.wavevector(OpticalAxis::Z, l)?;
        text.push_str(&format!("{l},{ny:.15e},{nz:.15e},{ky:.15e},{kz:.15e}\n"));
    }
    emit(out, text.as_bytes())
}

pub fn cmd_phasematch(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<(), CliError> {
    let model = cfg.model()?;
    let process = cfg.process()?;
    let pm = cfg.phasematch;
    let window = (pm.window_um[0], pm.window_um[1]);
    let report = match pm.mode {
        MatchMode::Nbpm => {
            let s = find_nbpm(&model, &process, window)?;
            json!({ "config": cfg, "mode": "nbpm", "solution": s })
        }
        MatchMode::Qpm => {
            let g = cfg.grating()?;
            let search = find_qpm(&model, g.period_um, &process, window, pm.orders[0]..=pm.orders[1])?;
            json!({
                "config": cfg,
                "mode": "qpm",
                "solution": search.solution,
                "admissible_orders": search.admissible_orders(),
                "order_scan": search.scans,
            })
        }
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    emit(out, text.as_bytes())
}

pub fn spectrum_for(cfg: &ScenarioConfig) -> Result<Spectrum, CliError> {
    let model = cfg.model()?;
    let process = cfg.process()?;
    let grating = cfg.grating()?;
    let grid = cfg.grid()?;
    let s = &cfg.spectrum;
    let source = match s.method {
        Method::Analytic => SpectrumSource::Analytic {
            grating: &grating,
            order: s.order,
        },
        Method::Numeric => SpectrumSource::Grating(&grating),
    };
    let mut sp = compute_spectrum(&model, &grid, &process, source)?;
    if s.resolution_nm > 0.0 {
        let meta = sp.meta.clone();
        sp = convolve_resolution(&sp, s.resolution_nm, s.kernel)?;
        sp.meta = SpectrumMeta {
            resolution_nm: Some(s.resolution_nm),
            ..meta
        };
    }
    sp.meta.extra.insert("config".into(), cfg.echo());
    sp.meta.extra.insert("model".into(), model.name.clone());
    Ok(sp)
}

pub fn cmd_spectrum(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<(), CliError> {
    let sp = spectrum_for(cfg)?;
    let mut buf = Vec::new();
    sp.write_csv(&mut buf)?;
    let grating = cfg.grating()?;
    if grating.sigma_um == 0.0 {
        let d = route_discrepancy(
            &cfg.model()?,
            &cfg.grid()?,
            &cfg.process()?,
            &grating,
            cfg.spectrum.order,
        )?;
        writeln!(
            buf,
            "# analytic_vs_numeric_max_rel_diff={d:.3e} (order {})",
            cfg.spectrum.order
        )
        .map_err(|e| CliError::Io(e.to_string()))?;
    }
    emit(out, &buf)
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".seeds.csv");
    PathBuf::from(name)
}

pub fn cmd_ensemble(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<(), CliError> {
    let model = cfg.model()?;
    let process = cfg.process()?;
    let grating = cfg.grating()?;
    let grid = cfg.grid()?;
    let e = cfg.ensemble;
    let mut ec = EnsembleConfig::new(grating, process, grid.clone(), e.realizations, e.master_seed);
    ec.first_index = e.first_index;
    ec.side_floor = e.side_floor;
    let mut stats = run_ensemble(&model, &ec)?;
    stats.meta.extra.insert("config".into(), cfg.echo());
    stats.meta.extra.insert("model".into(), model.name.clone());

    if let Some(q) = e.qpm_window_um {
        let ideal = GratingSpec {
            sigma_um: 0.0,
            ..grating
        };
        let reference = compute_spectrum(&model, &grid, &process, SpectrumSource::Grating(&ideal))?;
        let nbpm = e.nbpm_window_um.map(|w| (w[0], w[1]));
        let s = reduction_summary(&stats, &reference, (q[0], q[1]), nbpm)?;
        let red = s.reduction();
        let half = 1.96 * s.peak_ratio_sem;
        let mut lines = vec![format!(
            "QPM peak at {:.4} nm: reduction {:.2}% (95% CI {:.2}% to {:.2}%)",
            s.qpm_peak_wavelength_um * 1e3,
            red * 100.0,
            (red - half) * 100.0,
            (red + half) * 100.0
        )];
        stats
            .meta
            .extra
            .insert("qpm_peak_reduction".into(), format!("{red:.6}"));
        stats
            .meta
            .extra
            .insert("qpm_peak_reduction_sem".into(), format!("{:.6}", s.peak_ratio_sem));
        if let (Some(r), Some(se)) = (s.nbpm_to_qpm, s.nbpm_to_qpm_sem) {
            lines.push(format!(
                "NBPM/QPM peak ratio {r:.4} (95% CI {:.4} to {:.4})",
                r - 1.96 * se,
                r + 1.96 * se
            ));
            stats.meta.extra.insert("nbpm_to_qpm".into(), format!("{r:.6}"));
            stats.meta.extra.insert("nbpm_to_qpm_sem".into(), format!("{se:.6}"));
        }
        for l in lines {
            eprintln!("{l}");
        }
    }

    let mut buf = Vec::new();
    stats.write_csv(&mut buf)?;
    emit(out, &buf)?;
    match out {
        Some(p) => {
            let mut seeds = Vec::new();
            stats.write_seeds(e.first_index, &mut seeds)?;
            emit(Some(&sidecar_path(p)), &seeds)
        }
        None => {
            eprintln!("note: seed sidecar is written only together with --out");
            Ok(())
        }
    }
}

pub fn cmd_fit(cfg: &ScenarioConfig, measured_path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let model = cfg.model()?;
    let process = cfg.process()?;
    let base = cfg.grating()?;
    let options = cfg
        .fit
        .clone()
        .ok_or_else(|| CliError::Config("missing section 'fit'".into()))?;
    let file =
        fs::File::open(measured_path).map_err(|e| CliError::Usage(format!("{}: {e}", measured_path.display())))?;
    let measured = Spectrum::read_csv(std::io::BufReader::new(file))?;
    let fit = fit_disorder(&model, &measured, &base, &process, &options)?;
    let report = json!({
        "inputs": {
            "config": cfg,
            "measured": measured_path.display().to_string(),
            "measured_points": measured.grid.len(),
        },
        "fit": fit,
    });
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    emit(out, text.as_bytes())
}

pub fn cmd_reproduce(
    cfg: &ScenarioConfig,
    figure: Figure,
    opts: &RecipeOptions,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let model = cfg.model()?;
    let result = recipes::run_recipe(&model, figure, opts)?;
    let dir = out.unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let name = figure.name();
    emit(Some(&dir.join(format!("{name}.csv"))), result.csv.as_bytes())?;
    let mut summary = serde_json::to_string_pretty(&result.summary).expect("summary serializes");
    summary.push('\n');
    emit(Some(&dir.join(format!("{name}.summary.json"))), summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}
