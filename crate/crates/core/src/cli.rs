//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime or I/O failure, 2 configuration error.
//! Human-readable text goes to stdout; every machine-readable artifact is a
//! file in the output directory, and `manifest.json` is written last.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::calibration::{
    estimate_plugin, fit_sequential_logistic, split_calibrate, Estimator, PluginOptions, SplitCalibration,
};
use crate::datagen::{generate, observe, write_observed_csv, write_subjects_csv, ObservedRecord};
use crate::demo;
use crate::params::ScenarioConfig;
use crate::quadrature::{mu_star_plus, QuadratureError, QuadratureSpec};
use crate::report::{write_calibration_csv, write_effects_csv, CalibrationRow, EffectRow, RunManifest};
use crate::strata::{oracle_effect, StratumLabel};

/// z-multiplier for quadrature/MC agreement.
pub const AGREEMENT_Z: f64 = 3.5;
/// Multiplier of the split SD for the calibration MATCH verdict.
pub const VERDICT_Z: f64 = 5.0;

#[derive(Debug, Parser)]
#[command(name = "stratum-bias", version, about = "Null-scenario stratum effects: simulation, quadrature and split calibration")]
pub struct Cli {
    /// Override the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cap on worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Quadrature,
    Mc,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate potential outcomes and the observed trial; write subjects.csv and observed.csv.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        /// Keep Y observable after a subject stops adhering.
        #[arg(long)]
        keep_y_after_dropout: bool,
    },
    /// Report the true stratum effects; write effects.csv.
    TrueEffect {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        method: Method,
        #[arg(long)]
        n: Option<usize>,
        /// Gauss-Hermite nodes per dimension (refinement doubles them).
        #[arg(long, default_value_t = 64)]
        nodes: usize,
    },
    /// Random-split calibration on the control arm; write calibration.csv.
    Calibrate {
        scenario: PathBuf,
        #[arg(long, default_value = "plugin")]
        estimator: String,
        #[arg(long = "R", alias = "r", default_value_t = 200)]
        r: usize,
        #[arg(long)]
        n: Option<usize>,
        /// Lose Y after dropout (the default keeps it, which the control outcome model needs).
        #[arg(long)]
        drop_y_after_dropout: bool,
    },
    /// Run the bundled scenario suite and write report.md.
    PaperDemo,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("I/O error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(format!("CSV error: {e}"))
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut (dyn Write + Send), stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 { write!(stdout, "{e}") } else { write!(stderr, "{e}") };
            return code;
        }
    };
    let pool = match cli.threads {
        Some(0) => {
            let _ = writeln!(stderr, "error: --threads must be >= 1");
            return 2;
        }
        Some(t) => rayon::ThreadPoolBuilder::new().num_threads(t).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: cannot start worker pool: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(&cli, stdout)) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::Simulate { scenario, n, keep_y_after_dropout } => {
            let cfg = load_scenario(scenario, cli.seed, *n)?;
            cmd_simulate(&cfg, &cli.out, *keep_y_after_dropout, stdout)
        }
        Command::TrueEffect { scenario, method, n, nodes } => {
            let cfg = load_scenario(scenario, cli.seed, *n)?;
            cmd_true_effect(&cfg, *method, *nodes, &cli.out, stdout)
        }
        Command::Calibrate { scenario, estimator, r, n, drop_y_after_dropout } => {
            let cfg = load_scenario(scenario, cli.seed, *n)?;
            let estimator = Estimator::from_name(estimator, plugin_options(cfg.seed, 0))
                .map_err(|e| CliError::Config(e.to_string()))?;
            cmd_calibrate(&cfg, &estimator, *r, !drop_y_after_dropout, &cli.out, stdout)
        }
        Command::PaperDemo => demo::cmd_paper_demo(&cli.out, cli.seed, stdout),
    }
}

/// Reads a scenario file; flags override file fields.
pub fn load_scenario(path: &Path, seed: Option<u64>, n: Option<usize>) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read scenario {}: {e}", path.display())))?;
    let mut cfg = ScenarioConfig::from_json_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(n) = n {
        cfg.n = n;
    }
    cfg.check().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

pub fn plugin_options(seed: u64, bootstrap: usize) -> PluginOptions {
    PluginOptions { seed, bootstrap, ..Default::default() }
}

pub(crate) fn create_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

pub(crate) fn create_file(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

pub(crate) fn finish(
    dir: &Path,
    label: &str,
    command: &str,
    seed: u64,
    outputs: Vec<PathBuf>,
    started: Instant,
) -> Result<PathBuf, CliError> {
    let manifest = RunManifest {
        scenario_label: label.to_string(),
        command: command.to_string(),
        timestamp: chrono::Utc::now().to_rfc3339(),
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs,
        duration_secs: started.elapsed().as_secs_f64(),
    };
    Ok(manifest.write(dir)?)
}

pub fn cmd_simulate(
    cfg: &ScenarioConfig,
    out: &Path,
    keep_y_after_dropout: bool,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let started = Instant::now();
    create_out_dir(out)?;
    let records = generate(cfg);
    let observed = observe(&records, keep_y_after_dropout);
    let subjects_path = out.join("subjects.csv");
    write_subjects_csv(&records, cfg.params.k, create_file(&subjects_path)?)?;
    let observed_path = out.join("observed.csv");
    write_observed_csv(&observed, cfg.params.k, create_file(&observed_path)?)?;
    let adherent = [0, 1].map(|t| records.iter().filter(|r| r.a[t]).count());
    writeln!(stdout, "scenario {}: {} subjects (seed {})", cfg.label, records.len(), cfg.seed)?;
    writeln!(
        stdout,
        "potential adherence: arm 0 {:.4}, arm 1 {:.4}",
        adherent[0] as f64 / records.len() as f64,
        adherent[1] as f64 / records.len() as f64
    )?;
    finish(out, &cfg.label, "simulate", cfg.seed, vec![subjects_path, observed_path], started)?;
    writeln!(stdout, "wrote {}", out.display())?;
    Ok(0)
}

pub fn cmd_true_effect(
    cfg: &ScenarioConfig,
    method: Method,
    nodes: usize,
    out: &Path,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let started = Instant::now();
    let spec = QuadratureSpec::with_nodes(nodes);
    let quad = match method {
        Method::Mc => None,
        Method::Quadrature | Method::Both => Some(mu_star_plus(&cfg.params, &spec).map_err(|e| match e {
            QuadratureError::NotOutcomeNull => CliError::Config(format!("{e} (--method mc)")),
            QuadratureError::InvalidSpec(_) => CliError::Config(e.to_string()),
            QuadratureError::Refinement { .. } => CliError::Runtime(e.to_string()),
        })?),
    };
    create_out_dir(out)?;
    let mut rows = Vec::new();
    let mut mc_star = None;
    if method != Method::Quadrature {
        let records = generate(cfg);
        for label in [StratumLabel::PLUS_PLUS, StratumLabel::STAR_PLUS] {
            let e = oracle_effect(&records, label).map_err(|e| CliError::Runtime(e.to_string()))?;
            writeln!(stdout, "{:<24} MC   {:>9.4} (SE {:.4}, n_members {})", label.name(), e.value, e.se, e.n_members)?;
            rows.push(EffectRow {
                scenario_label: cfg.label.clone(),
                stratum: label.name(),
                n_members: e.n_members,
                value: e.value,
                se: e.se,
            });
            if label == StratumLabel::STAR_PLUS {
                mc_star = Some(e);
            }
        }
    }
    if let Some(q) = quad {
        writeln!(stdout, "{:<24} QUAD {:>9.4}", "S_star_plus", q)?;
        rows.push(EffectRow {
            scenario_label: cfg.label.clone(),
            stratum: "S_star_plus_quadrature".into(),
            n_members: 0,
            value: q,
            se: 0.0,
        });
    }
    if let (Some(q), Some(mc)) = (quad, &mc_star) {
        let verdict = if mc.within(q, AGREEMENT_Z) { "AGREE" } else { "DISAGREE" };
        writeln!(
            stdout,
            "agreement: |quad - mc| = {:.4} vs {AGREEMENT_Z} SE = {:.4} -> {verdict}",
            (q - mc.value).abs(),
            AGREEMENT_Z * mc.se
        )?;
    }
    let path = out.join("effects.csv");
    write_effects_csv(&rows, create_file(&path)?)?;
    finish(out, &cfg.label, "true-effect", cfg.seed, vec![path], started)?;
    Ok(0)
}

/// Control-arm records of a trial.
pub fn control_arm(observed: &[ObservedRecord]) -> Vec<ObservedRecord> {
    observed.iter().filter(|r| r.t_assigned == 0).cloned().collect()
}

/// `|mean_offset - truth| <= VERDICT_Z * sd(offsets)`.
///
/// The spread of single pseudo-trial estimates bounds the sampling error of
/// the averaged offset, which averaging over splits of one dataset cannot
/// remove.
pub fn calibration_matches(cal: &SplitCalibration, truth: f64) -> bool {
    (cal.mean_offset - truth).abs() <= VERDICT_Z * cal.sd_offset()
}

pub fn cmd_calibrate(
    cfg: &ScenarioConfig,
    estimator: &Estimator,
    r: usize,
    keep_y_after_dropout: bool,
    out: &Path,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let started = Instant::now();
    create_out_dir(out)?;
    let observed = observe(&generate(cfg), keep_y_after_dropout);
    let control = control_arm(&observed);
    let cal = split_calibrate(&control, estimator, r, cfg.seed).map_err(|e| CliError::Runtime(e.to_string()))?;
    writeln!(
        stdout,
        "{} split calibration ({} splits, {} failed): mean offset {:.4} \u{b1} {:.4} (split SD {:.4})",
        estimator.name(),
        cal.r,
        cal.n_failed,
        cal.mean_offset,
        cal.se_offset,
        cal.sd_offset()
    )?;
    let mut outputs = Vec::new();
    if let Estimator::Plugin(_) = estimator {
        let est = estimate_plugin(&observed, &plugin_options(cfg.seed, 0)).map_err(|e| CliError::Runtime(e.to_string()))?;
        writeln!(stdout, "plugin estimate on the trial: {:.4}", est.value)?;
        if let Ok(fit) = fit_sequential_logistic(&observed, 1) {
            let path = out.join("fit.csv");
            fit.write_csv(create_file(&path)?)?;
            outputs.push(path);
        }
    }
    if cfg.params.is_y_null() {
        match mu_star_plus(&cfg.params, &QuadratureSpec::default()) {
            Ok(truth) => {
                let verdict = if calibration_matches(&cal, truth) { "MATCH" } else { "MISMATCH" };
                writeln!(
                    stdout,
                    "true S_star_plus effect (quadrature) {truth:.4}; |offset - truth| = {:.4} vs {VERDICT_Z} SD = {:.4} -> {verdict}",
                    (cal.mean_offset - truth).abs(),
                    VERDICT_Z * cal.sd_offset()
                )?;
            }
            Err(e) => writeln!(stdout, "true effect unavailable: {e}")?,
        }
    }
    let path = out.join("calibration.csv");
    let row = CalibrationRow { scenario_label: cfg.label.clone(), estimator: estimator.name().into(), calibration: cal };
    write_calibration_csv(&[row], create_file(&path)?)?;
    outputs.insert(0, path);
    finish(out, &cfg.label, "calibrate", cfg.seed, outputs, started)?;
    Ok(0)
}
