use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use periodic_rips::curvature::{level_profiles, ProfileParams, WeightAssignment};
use periodic_rips::features::{write_features_csv, SCHEMA_VERSION};
use periodic_rips::hsmp::{generate_weights, load_weights, ModelConfig};
use periodic_rips::pipeline::{build_unit_filtration, check_unit, featurize_unit, FeaturizeOptions, FeaturizedUnit, Predictor};
use periodic_rips::polymer::{parse_repeating_unit, RepeatingUnit};
use periodic_rips::rips::MAX_SUPPORTED_DIM;
use periodic_rips::stats::{analyze, read_predictions, summarize_families, write_analysis, write_predictions, write_summaries};
use periodic_rips::stats::{Comparison, PredictionRecord};
use periodic_rips::tensor::DType;
use periodic_rips::{Error, ErrorKind};

const EXIT_PARSE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_VERSION: u8 = 3;
const EXIT_PARTIAL: u8 = 4;

/// Periodic Vietoris–Rips featurization and HSMP inference for polymer repeating units.
///
/// Exit codes: 0 success, 1 unreadable or malformed input, 2 validation
/// error, 3 schema/version mismatch, 4 some inputs of a batch failed.
#[derive(Parser)]
#[command(name = "periodic-rips", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the periodic distance matrix and the Vietoris–Rips complex of every level.
    Rips(RipsArgs),
    /// Forman curvature profiles of every simplex at every level.
    Curvature(CurvatureArgs),
    /// Write feature containers for one unit or a directory of units.
    Featurize(FeaturizeArgs),
    /// Predict with one or more weight files (one column per file).
    Predict(PredictArgs),
    /// Matched-pair and family statistics over a predictions CSV.
    Analyze(AnalyzeArgs),
    /// Write seed-generated weights for testing.
    GenTestWeights(GenWeightsArgs),
}

#[derive(Args)]
struct GeometryArgs {
    /// Ascending cutoffs in Å.
    #[arg(long, value_delimiter = ',', default_values_t = [2.0, 3.0, 4.0])]
    cutoffs: Vec<f64>,
    /// Use only frame 0 (intra-unit distances).
    #[arg(long)]
    non_periodic: bool,
}

#[derive(Args)]
struct RipsArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    geometry: GeometryArgs,
    #[arg(long, default_value_t = 2)]
    max_dim: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProfileArgs {
    /// Sub-cutoff spacing in Å.
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
    /// Sub-cutoffs per level.
    #[arg(long, default_value_t = 5)]
    steps: usize,
    /// Normalization temperature.
    #[arg(long, default_value_t = 10.0)]
    temperature: f64,
    /// JSON edge-weight assignment for the weighted edge curvature.
    #[arg(long)]
    simplex_weights: Option<PathBuf>,
}

#[derive(Args)]
struct CurvatureArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    geometry: GeometryArgs,
    #[command(flatten)]
    profile: ProfileArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturizeArgs {
    /// A unit JSON file or a directory of them.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    geometry: GeometryArgs,
    #[command(flatten)]
    profile: ProfileArgs,
    /// Also write a CSV dump next to each container.
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Unit JSON files, feature containers, or directories of either.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// One weight file per fold.
    #[arg(long, required = true, num_args = 1..)]
    weights: Vec<PathBuf>,
    /// Featurize JSON inputs with frame 0 only.
    #[arg(long)]
    non_periodic: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    predictions: PathBuf,
    /// ester_to_amide, alpha_methylation, families or all.
    #[arg(long, default_value = "all")]
    comparison: String,
    /// Confidence level of the t intervals.
    #[arg(long, default_value_t = 0.99)]
    level: f64,
    /// Optional per-family summary CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum StorageType {
    F64,
    F32,
}

#[derive(Args)]
struct GenWeightsArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 768)]
    hidden_dim: usize,
    #[arg(long, default_value_t = 12)]
    heads: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [2.0, 3.0, 4.0])]
    cutoffs: Vec<f64>,
    #[arg(long, value_enum, default_value = "f64")]
    dtype: StorageType,
    #[arg(long)]
    out: PathBuf,
}

/// Sidecar record of one invocation. The only place timestamps appear.
#[derive(Serialize)]
struct RunManifest {
    tool_version: &'static str,
    subcommand: &'static str,
    inputs: Vec<String>,
    output: String,
    config: Value,
    schema_version: &'static str,
    weights: Vec<Value>,
    outputs: Vec<String>,
    failures: Vec<Failure>,
    started_unix_ms: u128,
    elapsed_ms: u128,
}

#[derive(Serialize, Clone)]
struct Failure {
    input: String,
    error: String,
}

struct Run {
    manifest: RunManifest,
    started: Instant,
}

impl Run {
    fn new(subcommand: &'static str, inputs: &[PathBuf], output: &Path, config: Value) -> Self {
        let started_unix_ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
        Self {
            manifest: RunManifest {
                tool_version: env!("CARGO_PKG_VERSION"),
                subcommand,
                inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
                output: output.display().to_string(),
                config,
                schema_version: SCHEMA_VERSION,
                weights: Vec::new(),
                outputs: Vec::new(),
                failures: Vec::new(),
                started_unix_ms,
                elapsed_ms: 0,
            },
            started: Instant::now(),
        }
    }

    fn output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.display().to_string());
    }

    /// Writes the manifest atomically to `path`.
    fn finish(mut self, path: &Path) -> Result<(), Error> {
        self.manifest.elapsed_ms = self.started.elapsed().as_millis();
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        write_atomic(path, (text + "\n").as_bytes())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn load_unit(path: &Path) -> Result<RepeatingUnit, Error> {
    Ok(parse_repeating_unit(&fs::read(path)?)?)
}

fn profile_params(p: &ProfileArgs) -> ProfileParams {
    ProfileParams { delta: p.delta, steps: p.steps, temperature: p.temperature, ..ProfileParams::default() }
}

fn edge_weights(p: &ProfileArgs) -> Result<Option<WeightAssignment>, Error> {
    p.simplex_weights
        .as_ref()
        .map(|path| Ok(WeightAssignment::from_json(&fs::read_to_string(path)?)?))
        .transpose()
}

fn featurize_options(g: &GeometryArgs, p: &ProfileArgs) -> Result<FeaturizeOptions, Error> {
    Ok(FeaturizeOptions {
        cutoffs: g.cutoffs.clone(),
        profile: profile_params(p),
        periodic: !g.non_periodic,
        edge_weights: edge_weights(p)?,
    })
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "unit".into())
}

/// Files of a directory with the given extension, sorted; a file is returned as is.
fn expand(path: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>, Error> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out: Vec<PathBuf> = fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| extensions.iter().any(|x| e == *x)))
        .filter(|p| !p.file_name().is_some_and(|n| n.to_string_lossy().ends_with("manifest.json")))
        .collect();
    out.sort();
    Ok(out)
}

fn cmd_rips(args: &RipsArgs) -> Result<u8, Error> {
    if args.max_dim > MAX_SUPPORTED_DIM {
        return Err(periodic_rips::rips::RipsError::MaxDim(args.max_dim).into());
    }
    let mut run = Run::new(
        "rips",
        std::slice::from_ref(&args.input),
        &args.out,
        json!({"cutoffs": args.geometry.cutoffs, "max_dim": args.max_dim, "periodic": !args.geometry.non_periodic}),
    );
    let unit = load_unit(&args.input)?;
    check_unit(&unit)?;
    let options = FeaturizeOptions {
        cutoffs: args.geometry.cutoffs.clone(),
        periodic: !args.geometry.non_periodic,
        ..FeaturizeOptions::default()
    };
    let d = periodic_rips::pipeline::distance_matrix(&unit, options.periodic)?;
    let filtration = periodic_rips::rips::build_filtration(&d, &options.cutoffs, args.max_dim)?;
    fs::create_dir_all(&args.out)?;
    let matrix_path = args.out.join("distances.csv");
    let mut buf = Vec::new();
    d.write_csv(&mut buf)?;
    write_atomic(&matrix_path, &buf)?;
    run.output(&matrix_path);
    for (i, complex) in filtration.levels().iter().enumerate() {
        let path = args.out.join(format!("level{i}.txt"));
        let mut buf = Vec::new();
        complex.write_text(&mut buf)?;
        write_atomic(&path, &buf)?;
        run.output(&path);
    }
    run.finish(&args.out.join("manifest.json"))?;
    Ok(0)
}

fn cmd_curvature(args: &CurvatureArgs) -> Result<u8, Error> {
    let options = featurize_options(&args.geometry, &args.profile)?;
    let mut run = Run::new(
        "curvature",
        std::slice::from_ref(&args.input),
        &args.out,
        json!({"cutoffs": options.cutoffs, "profile": options.profile, "periodic": options.periodic}),
    );
    let unit = load_unit(&args.input)?;
    check_unit(&unit)?;
    let (d, filtration) = build_unit_filtration(&unit, &options)?;
    fs::create_dir_all(&args.out)?;
    for (i, complex) in filtration.levels().iter().enumerate() {
        let profiles = level_profiles(&d, complex, 2, &options.profile, options.edge_weights.as_ref())?;
        let path = args.out.join(format!("level{i}_curvature.csv"));
        let mut buf = Vec::new();
        let steps = options.profile.steps;
        let raw: Vec<String> = (0..steps).map(|k| format!("raw_{k}")).collect();
        let norm: Vec<String> = (0..steps).map(|k| format!("norm_{k}")).collect();
        writeln!(buf, "dim,simplex,{},{}", raw.join(","), norm.join(","))?;
        for (dim, list) in profiles.iter().enumerate() {
            for (id, p) in list.iter().enumerate() {
                let s = complex.simplex(dim, id);
                let verts: Vec<String> = s.vertices().iter().map(|v| v.to_string()).collect();
                let raw: Vec<String> = p.raw.iter().map(|v| v.to_string()).collect();
                let vals: Vec<String> = p.values.iter().map(|v| v.to_string()).collect();
                writeln!(buf, "{dim},{},{},{}", verts.join(" "), raw.join(","), vals.join(","))?;
            }
        }
        write_atomic(&path, &buf)?;
        run.output(&path);
    }
    run.finish(&args.out.join("manifest.json"))?;
    Ok(0)
}

fn unit_header(unit: &RepeatingUnit, fallback: &str) -> Vec<(&'static str, String)> {
    let meta = unit.meta();
    let clean = |s: &str| s.replace(['\n', '\r'], " ");
    let mut h = vec![("name", clean(meta.name.as_deref().unwrap_or(fallback)))];
    if let Some(f) = &meta.family {
        h.push(("family", clean(f)));
    }
    if let Some(k) = &meta.substitution_key {
        h.push(("substitution_key", clean(k)));
    }
    h
}

fn cmd_featurize(args: &FeaturizeArgs) -> Result<u8, Error> {
    let options = featurize_options(&args.geometry, &args.profile)?;
    let mut run = Run::new(
        "featurize",
        std::slice::from_ref(&args.input),
        &args.out,
        json!({"cutoffs": options.cutoffs, "profile": options.profile, "periodic": options.periodic}),
    );
    let files = expand(&args.input, &["json"])?;
    let single = !args.input.is_dir();
    fs::create_dir_all(&args.out)?;
    let results: Vec<Result<(RepeatingUnit, FeaturizedUnit), Error>> = files
        .par_iter()
        .map(|path| {
            let unit = load_unit(path)?;
            let features = featurize_unit(&unit, &options)?;
            Ok((unit, features))
        })
        .collect();
    let mut first_error = None;
    for (path, result) in files.iter().zip(results) {
        match result {
            Ok((unit, features)) => {
                let name = stem(path);
                let out = args.out.join(format!("{name}.features"));
                write_atomic(&out, &features.to_bytes(&unit_header(&unit, &name)))?;
                run.output(&out);
                if args.csv {
                    let csv_path = args.out.join(format!("{name}.features.csv"));
                    let mut buf = Vec::new();
                    write_features_csv(&mut buf, &features.filtration, &features.levels)?;
                    write_atomic(&csv_path, &buf)?;
                    run.output(&csv_path);
                }
            }
            Err(e) => {
                if !single {
                    log::error!("{}: {e}", path.display());
                }
                run.manifest.failures.push(Failure { input: path.display().to_string(), error: e.to_string() });
                first_error.get_or_insert(e);
            }
        }
    }
    let failures = run.manifest.failures.clone();
    run.finish(&args.out.join("manifest.json"))?;
    finish_batch(single, files.len(), &failures, first_error)
}

/// Exit status of a batch: a lone input reports its own error class.
fn finish_batch(single: bool, total: usize, failures: &[Failure], first_error: Option<Error>) -> Result<u8, Error> {
    match first_error {
        None => Ok(0),
        Some(e) if single => Err(e),
        Some(_) => {
            eprintln!("{} of {total} inputs failed:", failures.len());
            for f in failures {
                eprintln!("  {}: {}", f.input, f.error);
            }
            Ok(EXIT_PARTIAL)
        }
    }
}

struct PredictInput {
    id: String,
    family: String,
    key: String,
    features: FeaturizedUnit,
}

fn load_predict_input(path: &Path, options: &FeaturizeOptions) -> Result<PredictInput, Error> {
    let name = stem(path);
    if path.extension().is_some_and(|e| e == "features") {
        let container = periodic_rips::tensor::TensorContainer::from_bytes(
            &fs::read(path)?,
            periodic_rips::features::FEATURE_MAGIC,
        )?;
        let get = |k: &str| container.header_value(k).unwrap_or("").to_string();
        let id = container.header_value("name").map(str::to_string).unwrap_or(name);
        Ok(PredictInput {
            id,
            family: get("family"),
            key: get("substitution_key"),
            features: FeaturizedUnit::from_container(&container)?,
        })
    } else {
        let unit = load_unit(path)?;
        let meta = unit.meta().clone();
        Ok(PredictInput {
            id: meta.name.unwrap_or(name),
            family: meta.family.unwrap_or_default(),
            key: meta.substitution_key.unwrap_or_default(),
            features: featurize_unit(&unit, options)?,
        })
    }
}

fn cmd_predict(args: &PredictArgs) -> Result<u8, Error> {
    let mut run = Run::new("predict", &args.input, &args.out, json!({"periodic": !args.non_periodic}));
    let predictors = args
        .weights
        .iter()
        .map(|p| Predictor::new(load_weights(p)?))
        .collect::<Result<Vec<_>, Error>>()?;
    let reference = predictors[0].weights().config();
    for (p, path) in predictors.iter().zip(&args.weights) {
        let c = p.weights().config();
        if c.schema_version != reference.schema_version || c.cutoffs != reference.cutoffs {
            return Err(Error::Version(format!("{} disagrees with the first weight file", path.display())));
        }
        run.manifest.weights.push(json!({
            "path": path.display().to_string(),
            "seed": p.weights().seed(),
            "schema_version": c.schema_version,
            "hidden_dim": c.hidden_dim,
            "heads": c.heads,
            "schedule": c.schedule_string(),
        }));
    }
    let options = predictors[0].featurize_options(!args.non_periodic);
    let mut files = Vec::new();
    for p in &args.input {
        files.extend(expand(p, &["json", "features"])?);
    }
    let single = files.len() == 1;
    let results: Vec<Result<PredictionRecord, Error>> = files
        .par_iter()
        .map(|path| {
            let input = load_predict_input(path, &options)?;
            let folds = predictors
                .iter()
                .map(|p| p.predict_features(&input.features))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(PredictionRecord { id: input.id, family: input.family, substitution_key: input.key, folds })
        })
        .collect();
    let mut records = Vec::new();
    let mut first_error = None;
    for (path, r) in files.iter().zip(results) {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => {
                if !single {
                    log::error!("{}: {e}", path.display());
                }
                run.manifest.failures.push(Failure { input: path.display().to_string(), error: e.to_string() });
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut buf = Vec::new();
    write_predictions(&mut buf, &records)?;
    write_atomic(&args.out, &buf)?;
    run.output(&args.out);
    let failures = run.manifest.failures.clone();
    run.finish(&sidecar(&args.out))?;
    finish_batch(single, files.len(), &failures, first_error)
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<u8, Error> {
    let comparison: Comparison = args.comparison.parse().map_err(|e: periodic_rips::stats::StatsError| Error::Validation(e.to_string()))?;
    let mut run = Run::new(
        "analyze",
        std::slice::from_ref(&args.predictions),
        &args.out,
        json!({"comparison": args.comparison, "level": args.level}),
    );
    let records = read_predictions(fs::File::open(&args.predictions)?)?;
    let analysis = analyze(&records, comparison, args.level)?;
    for (name, family, key) in &analysis.unmatched {
        log::warn!("{name}: key {key:?} of {family} has no partner");
    }
    let mut buf = Vec::new();
    write_analysis(&mut buf, &analysis)?;
    write_atomic(&args.out, &buf)?;
    run.output(&args.out);
    if let Some(path) = &args.summary {
        let mut buf = Vec::new();
        write_summaries(&mut buf, &summarize_families(&records))?;
        write_atomic(path, &buf)?;
        run.output(path);
    }
    run.finish(&sidecar(&args.out))?;
    Ok(0)
}

fn cmd_gen_weights(args: &GenWeightsArgs) -> Result<u8, Error> {
    let config = ModelConfig { cutoffs: args.cutoffs.clone(), ..ModelConfig::with_width(args.hidden_dim, args.heads) };
    let mut run = Run::new(
        "gen-test-weights",
        &[],
        &args.out,
        json!({"seed": args.seed, "hidden_dim": args.hidden_dim, "heads": args.heads, "cutoffs": args.cutoffs}),
    );
    let weights = generate_weights(&config, args.seed)?;
    let dtype = match args.dtype {
        StorageType::F64 => DType::F64,
        StorageType::F32 => DType::F32,
    };
    write_atomic(&args.out, &weights.to_bytes(dtype))?;
    run.output(&args.out);
    run.manifest.weights.push(json!({"path": args.out.display().to_string(), "seed": args.seed}));
    run.finish(&sidecar(&args.out))?;
    Ok(0)
}

fn configure_threads() {
    if let Ok(v) = std::env::var("PERIODIC_RIPS_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not size the worker pool: {e}");
                }
            }
            _ => log::warn!("ignoring PERIODIC_RIPS_THREADS={v:?}"),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    configure_threads();
    let result = match &cli.command {
        Command::Rips(a) => cmd_rips(a),
        Command::Curvature(a) => cmd_curvature(a),
        Command::Featurize(a) => cmd_featurize(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::GenTestWeights(a) => cmd_gen_weights(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let _ = writeln!(BufWriter::new(io::stderr()), "error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Parse => EXIT_PARSE,
                ErrorKind::Validation => EXIT_VALIDATION,
                ErrorKind::Version => EXIT_VERSION,
            })
        }
    }
}
