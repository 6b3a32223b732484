use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use diffeoraptor::evaluation::jacobian_determinant;
use diffeoraptor::io::config::{apply_override, load_config, to_table};
use diffeoraptor::io::{
    make_phantom, read_displacement, read_labels, read_volume, write_displacement, write_labels, write_volume,
    PhantomKind, PhantomParams,
};
use diffeoraptor::{
    dice as dice_score, jacobian_histogram, minimize, MetricKind, RegistrationConfig, RegistrationResult,
};
use log::info;
use serde::Serialize;

use crate::output::Outputs;
use crate::{DiceArgs, JacobianArgs, PhantomArgs, RegisterArgs};

#[derive(Debug)]
pub enum CliError {
    MissingInput(PathBuf),
    Usage(String),
    Io { path: PathBuf, source: std::io::Error },
    Library(diffeoraptor::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::MissingInput(_) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingInput(p) => write!(f, "input not found: {}", p.display()),
            Self::Usage(msg) => f.write_str(msg),
            Self::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Self::Library(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<diffeoraptor::Error> for CliError {
    fn from(e: diffeoraptor::Error) -> Self {
        Self::Library(e)
    }
}

fn require(paths: &[&Path]) -> Result<(), CliError> {
    match paths.iter().find(|p| !p.exists()) {
        Some(p) => Err(CliError::MissingInput(p.to_path_buf())),
        None => Ok(()),
    }
}

fn build_config(args: &RegisterArgs) -> Result<RegistrationConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => RegistrationConfig::default(),
    };
    if let Some(m) = &args.metric {
        cfg.metric = MetricKind::parse(m)?;
    }
    for o in &args.overrides {
        apply_override(&mut cfg, o)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct EnergySummary {
    data: f64,
    reg: f64,
    total: f64,
}

#[derive(Serialize)]
struct RunSummary {
    fixed: String,
    moving: String,
    metric: &'static str,
    config: serde_json::Value,
    iterations: usize,
    converged: bool,
    initial_energy: Option<EnergySummary>,
    final_energy: Option<EnergySummary>,
    min_det_jacobian: f64,
    non_positive_det_voxels: u64,
    seconds: f64,
    threads: usize,
}

fn energy_summary(r: Option<&diffeoraptor::optimizer::EnergyRecord>) -> Option<EnergySummary> {
    r.map(|e| EnergySummary { data: e.data, reg: e.reg, total: e.total })
}

fn trace_csv(r: &RegistrationResult) -> String {
    let mut out = String::from("level,iteration,data,reg,total\n");
    for e in &r.trace {
        out.push_str(&format!("{},{},{:e},{:e},{:e}\n", e.level, e.iteration, e.data, e.reg, e.total));
    }
    out
}

pub fn register(args: &RegisterArgs) -> Result<(), CliError> {
    let mut inputs = vec![args.fixed.as_path(), args.moving.as_path()];
    if let Some(c) = &args.config {
        inputs.push(c);
    }
    require(&inputs)?;
    let cfg = build_config(args)?;
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }

    let fixed = read_volume(&args.fixed)?;
    let moving = read_volume(&args.moving)?;
    info!("registering {} onto {} with {}", args.moving.display(), args.fixed.display(), cfg.metric.as_str());
    let start = Instant::now();
    let result = minimize(&fixed, &moving, &cfg)?;
    let seconds = start.elapsed().as_secs_f64();

    let det = jacobian_determinant(&result.inverse_map)?;
    let summary = RunSummary {
        fixed: args.fixed.display().to_string(),
        moving: args.moving.display().to_string(),
        metric: cfg.metric.as_str(),
        config: serde_json::to_value(to_table(&cfg)).map_err(|e| CliError::Usage(e.to_string()))?,
        iterations: result.iterations,
        converged: result.converged,
        initial_energy: energy_summary(result.initial_energy()),
        final_energy: energy_summary(result.final_energy()),
        min_det_jacobian: det.data.iter().copied().fold(f64::INFINITY, f64::min),
        non_positive_det_voxels: det.data.iter().filter(|&&v| v <= 0.0).count() as u64,
        seconds,
        threads: rayon::current_num_threads(),
    };
    let summary_json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Usage(e.to_string()))?;

    let mut outputs = Outputs::new();
    outputs.write(&args.out_warped, |p| Ok(write_volume(&result.warped, p)?))?;
    outputs.write(&args.out_field, |p| Ok(write_displacement(&result.inverse_map, p)?))?;
    if let Some(p) = &args.out_trace {
        outputs.write_text(p, &trace_csv(&result))?;
    }
    match &args.out_summary {
        Some(p) => outputs.write_text(p, &(summary_json + "\n"))?,
        None => println!("{summary_json}"),
    }
    outputs.commit();
    Ok(())
}

pub fn dice(args: &DiceArgs) -> Result<(), CliError> {
    require(&[&args.labels_a, &args.labels_b])?;
    let a = read_labels(&args.labels_a)?;
    let b = read_labels(&args.labels_b)?;
    let d = dice_score(&a, &b, args.label)?;
    if args.header {
        println!("label,dice,voxels_a,voxels_b");
    }
    println!("{},{d:.6},{},{}", args.label, a.count(args.label), b.count(args.label));
    Ok(())
}

pub fn jacobian(args: &JacobianArgs) -> Result<(), CliError> {
    require(&[&args.field])?;
    let field = read_displacement(&args.field)?;
    let hist = jacobian_histogram(&field, args.bin_width)?;
    let mut outputs = Outputs::new();
    outputs.write_text(&args.out, &hist.to_csv())?;
    outputs.commit();
    eprintln!(
        "{} voxels, {} with non-positive determinant, {} in the central bin",
        hist.total(),
        hist.non_positive,
        hist.count_at(0.0)
    );
    Ok(())
}

fn parse_dims(s: &str) -> Result<[usize; 3], CliError> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--dims expects N or NX,NY,NZ, got '{s}'")))?;
    match parts.as_slice() {
        [n] => Ok([*n; 3]),
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err(CliError::Usage(format!("--dims expects N or NX,NY,NZ, got '{s}'"))),
    }
}

pub fn phantom(args: &PhantomArgs) -> Result<(), CliError> {
    let kind = PhantomKind::parse(&args.kind)?;
    let dims = parse_dims(&args.dims)?;
    let params = PhantomParams {
        radius: args.radius,
        period: args.period,
        noise_sigma: args.noise,
        seed: args.seed,
        ..Default::default()
    };
    let (volume, labels) = make_phantom(kind, dims, &params)?;
    let mut outputs = Outputs::new();
    outputs.write(&args.out, |p| Ok(write_volume(&volume, p)?))?;
    outputs.write(&args.out_labels, |p| Ok(write_labels(&labels, p)?))?;
    outputs.commit();
    Ok(())
}
