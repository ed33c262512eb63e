//! Command-line front end: runs the three-spin correlation experiment,
//! dumps stage matrices, enumerates local assignments, reports timing, and
//! round-trips pulse-program files. All data outputs are deterministic:
//! identical inputs produce byte-identical files.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ghzsim_core::acquire::{spectrum_csv, MultipletJson, DEFAULT_DWELL_S, DEFAULT_N_POINTS};
use ghzsim_core::engine::{
    normalize_pseudo_pure, rho_pp_exact, EngineState, MatrixDump, RunOptions,
};
use ghzsim_core::ghz::{
    ghz_deviation_reference, lhv_enumerate, lhv_table, run_experiment, timing_report,
    ExperimentConfig, GhzError, MeasurementSetting, TimingJson,
};
use ghzsim_core::seqlang::{self, prepare_pp, rotate_ghz};
use ghzsim_core::spinsys::SystemConfig;

#[derive(Parser)]
#[command(
    name = "ghzsim",
    version,
    about = "Three-spin correlation experiment simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment and write spectra, multiplets, and the report.
    Run(RunArgs),
    /// Print the simulated deviation matrix at a protocol stage.
    Matrix(MatrixArgs),
    /// Enumerate all 64 deterministic local outcome assignments.
    Lhv(LhvArgs),
    /// Print protocol stage durations.
    Timing(TimingArgs),
    /// Parse a pulse-program file and print its canonical form.
    Parse(ParseArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Spin-system JSON file; builtin alanine parameters when omitted.
    #[arg(long)]
    system: Option<PathBuf>,
    /// Output directory for CSVs and JSON reports.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run a single setting (xyy, yxy, yyx, or xxx) instead of all four.
    #[arg(long)]
    measure: Option<String>,
    /// Dwell time between acquired points, seconds.
    #[arg(long)]
    dwell: Option<f64>,
    /// Number of acquired complex points.
    #[arg(long)]
    points: Option<usize>,
    /// Include couplings marked weak in the system file.
    #[arg(long)]
    include_weak_couplings: bool,
    /// Dead time inserted between consecutive pulses, milliseconds.
    #[arg(long)]
    gap_ms: Option<f64>,
    /// JSON file holding the same keys as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum Stage {
    /// Thermal equilibrium deviation.
    Eq,
    /// After pseudo-pure preparation and scale normalization.
    Pp,
    /// After the entangling rotation.
    Ghz,
}

#[derive(Args)]
struct MatrixArgs {
    /// Protocol stage to dump.
    #[arg(value_enum)]
    stage: Stage,
    /// Spin-system JSON file; builtin alanine parameters when omitted.
    #[arg(long)]
    system: Option<PathBuf>,
    /// Include couplings marked weak in the system file.
    #[arg(long)]
    include_weak_couplings: bool,
}

#[derive(Args)]
struct LhvArgs {
    /// Print all 64 assignments with their products and parity.
    #[arg(long)]
    list: bool,
}

#[derive(Args)]
struct TimingArgs {
    /// Spin-system JSON file; builtin alanine parameters when omitted.
    #[arg(long)]
    system: Option<PathBuf>,
    /// Dead time inserted between consecutive pulses, milliseconds.
    #[arg(long)]
    gap_ms: Option<f64>,
}

#[derive(Args)]
struct ParseArgs {
    /// Pulse-program file to check.
    file: PathBuf,
}

enum CliError {
    /// Bad input: missing files, invalid config, unusable parameters.
    Config(String),
    /// The simulation ran but its outputs failed a correlation check.
    Failure(String),
}

impl CliError {
    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Failure(m) => m,
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

// Die quietly when a pipe consumer stops reading, like other line tools.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn main() -> ExitCode {
    reset_sigpipe();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Matrix(a) => cmd_matrix(a),
        Cmd::Lhv(a) => cmd_lhv(a),
        Cmd::Timing(a) => cmd_timing(a),
        Cmd::Parse(a) => cmd_parse(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// Optional run-config file mirroring the `run` flags.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunFile {
    system: Option<String>,
    out: Option<String>,
    measure: Option<String>,
    dwell: Option<f64>,
    points: Option<usize>,
    include_weak_couplings: Option<bool>,
    gap_ms: Option<f64>,
}

struct ResolvedRun {
    system: Option<PathBuf>,
    out: PathBuf,
    measure: Option<MeasurementSetting>,
    dwell: f64,
    points: usize,
    include_weak: bool,
    gap_ms: f64,
}

fn resolve_run(a: RunArgs) -> Result<ResolvedRun, CliError> {
    let file: RunFile = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("failed to read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?
        }
        None => RunFile::default(),
    };

    let measure = match a.measure.or(file.measure) {
        Some(text) => Some(
            text.parse::<MeasurementSetting>()
                .map_err(CliError::Config)?,
        ),
        None => None,
    };
    let resolved = ResolvedRun {
        system: a.system.or(file.system.map(PathBuf::from)),
        out: a
            .out
            .or(file.out.map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("results")),
        measure,
        dwell: a.dwell.or(file.dwell).unwrap_or(DEFAULT_DWELL_S),
        points: a.points.or(file.points).unwrap_or(DEFAULT_N_POINTS),
        include_weak: a.include_weak_couplings || file.include_weak_couplings.unwrap_or(false),
        gap_ms: a.gap_ms.or(file.gap_ms).unwrap_or(0.0),
    };
    if !(resolved.dwell.is_finite() && resolved.dwell > 0.0) {
        return Err(CliError::Config(format!(
            "dwell must be a positive time in seconds, got {}",
            resolved.dwell
        )));
    }
    if resolved.points < 2 {
        return Err(CliError::Config(format!(
            "points must be at least 2, got {}",
            resolved.points
        )));
    }
    if !(resolved.gap_ms.is_finite() && resolved.gap_ms >= 0.0) {
        return Err(CliError::Config(format!(
            "gap-ms must be a nonnegative time in milliseconds, got {}",
            resolved.gap_ms
        )));
    }
    Ok(resolved)
}

fn load_system(
    path: &Option<PathBuf>,
    include_weak: bool,
) -> Result<ghzsim_core::SpinSystem, CliError> {
    let config = match path {
        Some(p) => SystemConfig::from_path(p).map_err(|e| CliError::Config(e.to_string()))?,
        None => SystemConfig::alanine(),
    };
    config
        .build(include_weak)
        .map_err(|e| CliError::Config(e.to_string()))
}

fn classify(e: GhzError) -> CliError {
    match e {
        GhzError::Decode { .. } | GhzError::InconsistentLines { .. } => {
            CliError::Failure(e.to_string())
        }
        other => CliError::Config(other.to_string()),
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content)
        .map_err(|e| CliError::Config(format!("failed to write {}: {e}", path.display())))
}

fn cmd_run(a: RunArgs) -> Result<(), CliError> {
    let cfg = resolve_run(a)?;
    let sys = load_system(&cfg.system, cfg.include_weak)?;
    let settings: Vec<MeasurementSetting> = match cfg.measure {
        Some(m) => vec![m],
        None => MeasurementSetting::standard_four().to_vec(),
    };
    let exp = ExperimentConfig {
        dwell_s: cfg.dwell,
        n_points: cfg.points,
        opts: RunOptions {
            inter_pulse_gap_s: cfg.gap_ms * 1e-3,
            ..RunOptions::default()
        },
    };
    let run = run_experiment(&sys, &settings, &exp).map_err(classify)?;

    fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Config(format!("failed to create {}: {e}", cfg.out.display())))?;
    for o in &run.outcomes {
        let axes = o.setting.to_string();
        write_file(
            &cfg.out.join(format!("spectrum_{axes}.csv")),
            &spectrum_csv(&o.spectrum),
        )?;
        let mj = MultipletJson::new(&axes, &o.multiplet, o.product);
        write_file(
            &cfg.out.join(format!("multiplet_{axes}.json")),
            &(mj.to_json() + "\n"),
        )?;
        println!("{axes}: product {:+}, oracle {:+.6}", o.product, o.oracle);
    }
    let report_path = cfg.out.join("report.json");
    write_file(&report_path, &(run.report_json() + "\n"))?;
    println!("report: {}", report_path.display());
    println!("pass: {}", run.pass);
    if run.pass {
        Ok(())
    } else {
        Err(CliError::Failure(
            "correlation checks failed; see report.json".into(),
        ))
    }
}

#[derive(Serialize)]
struct StageDump {
    schema_version: String,
    stage: String,
    dim: usize,
    scale: f64,
    matrix: Vec<Vec<[f64; 2]>>,
    /// Largest entry difference from the ideal matrix for this stage;
    /// omitted for the equilibrium dump, which is exact by construction.
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_deviation: Option<f64>,
}

fn cmd_matrix(a: MatrixArgs) -> Result<(), CliError> {
    let sys = load_system(&a.system, a.include_weak_couplings)?;
    let opts = RunOptions::default();
    let engine_err = |e: ghzsim_core::engine::EngineError| CliError::Config(e.to_string());

    let (stage, rho, scale, reference_deviation) = match a.stage {
        Stage::Eq => ("eq", sys.equilibrium_deviation(), 1.0, None),
        Stage::Pp => {
            let prepared = EngineState::equilibrium(sys.clone(), opts)
                .run(&prepare_pp())
                .map_err(engine_err)?;
            let (rho, scale) = normalize_pseudo_pure(&prepared.rho).map_err(engine_err)?;
            let dev = rho.max_abs_diff(&rho_pp_exact());
            ("pp", rho, scale, Some(dev))
        }
        Stage::Ghz => {
            let prepared = EngineState::equilibrium(sys.clone(), opts)
                .run(&prepare_pp())
                .map_err(engine_err)?;
            let (pp, scale) = normalize_pseudo_pure(&prepared.rho).map_err(engine_err)?;
            let rotated = EngineState::with_state(sys.clone(), pp, opts)
                .run(&rotate_ghz())
                .map_err(engine_err)?;
            let dev = rotated.rho.max_abs_diff(&ghz_deviation_reference());
            ("ghz", rotated.rho, scale, Some(dev))
        }
    };
    let dump = MatrixDump::new(&rho, scale);
    let doc = StageDump {
        schema_version: dump.schema_version,
        stage: stage.to_string(),
        dim: dump.dim,
        scale: dump.scale,
        matrix: dump.matrix,
        reference_deviation,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&doc).expect("stage dump serialization cannot fail")
    );
    Ok(())
}

fn pm(v: i8) -> &'static str {
    if v > 0 {
        "+1"
    } else {
        "-1"
    }
}

fn cmd_lhv(a: LhvArgs) -> Result<(), CliError> {
    if a.list {
        println!("assignments (x1 y1 x2 y2 x3 y3 -> xyy yxy yyx xxx, parity):");
        for (idx, (assignment, prods)) in lhv_table().into_iter().enumerate() {
            let v = assignment.values;
            let parity: i8 = prods.iter().product();
            println!(
                "{idx:2}  {} {} {} {} {} {}  ->  {} {} {} {}  parity {}",
                pm(v[0][0]),
                pm(v[0][1]),
                pm(v[1][0]),
                pm(v[1][1]),
                pm(v[2][0]),
                pm(v[2][1]),
                pm(prods[0]),
                pm(prods[1]),
                pm(prods[2]),
                pm(prods[3]),
                pm(parity),
            );
        }
    }
    let summary = lhv_enumerate();
    println!("achievable product patterns (xyy yxy yyx xxx):");
    for p in &summary.achievable {
        println!("  {} {} {} {}", pm(p[0]), pm(p[1]), pm(p[2]), pm(p[3]));
    }
    println!(
        "max satisfied: {}/4; quantum pattern achievable: {}",
        summary.max_satisfied,
        if summary.quantum_achievable {
            "yes"
        } else {
            "no"
        }
    );
    Ok(())
}

fn cmd_timing(a: TimingArgs) -> Result<(), CliError> {
    let gap_ms = a.gap_ms.unwrap_or(0.0);
    if !(gap_ms.is_finite() && gap_ms >= 0.0) {
        return Err(CliError::Config(format!(
            "gap-ms must be a nonnegative time in milliseconds, got {gap_ms}"
        )));
    }
    let sys = load_system(&a.system, false)?;
    let opts = RunOptions {
        inter_pulse_gap_s: gap_ms * 1e-3,
        ..RunOptions::default()
    };
    let report = timing_report(&sys, &opts).map_err(|e| CliError::Config(e.to_string()))?;
    println!(
        "{}",
        serde_json::to_string_pretty(&TimingJson::from(&report))
            .expect("timing serialization cannot fail")
    );
    Ok(())
}

fn cmd_parse(a: ParseArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.file)
        .map_err(|e| CliError::Config(format!("failed to read {}: {e}", a.file.display())))?;
    let seq = seqlang::parse(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", a.file.display())))?;
    let canonical = seqlang::format(&seq);
    let reparsed = seqlang::parse(&canonical)
        .map_err(|e| CliError::Failure(format!("canonical form failed to reparse: {e}")))?;
    if reparsed != seq {
        return Err(CliError::Failure(
            "canonical form parsed back to a different sequence".into(),
        ));
    }
    print!("{canonical}");
    Ok(())
}
