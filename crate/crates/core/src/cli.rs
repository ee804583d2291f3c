//! Command-line front end.

use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::classifiers::ClassifierKind;
use crate::csvio::{load_features, save_features};
use crate::dataset::UNKNOWN_LABEL;
use crate::eval::{boxplot_csv, evaluate, feature_importance_report, per_feature_class_summary, write_report_dir};
use crate::features::{feature_names, feature_values, FeatureConfig, FeatureVector};
use crate::persist::{read_model, write_model};
use crate::pipeline::{fit_pipeline, predict_trace_at, stratified_split, PipelineConfig};
use crate::preprocess::{calibrate, clean, SensorCalibration};
use crate::scaling::ScalerKind;
use crate::synth::{default_signatures, generate_dataset, DatasetConfig, MAX_CLASSES};
use crate::trace_io::{load_manifest, read_trace, save_trace, Port, RawTrace, SerialDecoder};

#[derive(Debug, Parser)]
#[command(name = "portscope", version, about = "Power side-channel trace toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct GlobalArgs {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Log progress to standard error.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    /// Worker threads (default: logical CPUs).
    #[arg(long, global = true, env = "PORTSCOPE_JOBS")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Generate a synthetic labelled dataset.
    Synth(SynthArgs),
    /// Extract features from a dataset directory into a CSV table.
    Featurize(FeaturizeArgs),
    /// Split, fit a pipeline, report holdout metrics and save the model.
    Train(TrainArgs),
    /// Classify a single trace file.
    Predict(PredictArgs),
    /// Evaluate a saved model on a feature table and write a report.
    Eval(EvalArgs),
    /// Decode a serial stream dump into a trace file.
    Capture(CaptureArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..=MAX_CLASSES as u64))]
    pub classes: u64,
    #[arg(long, default_value_t = 25, value_parser = clap::value_parser!(u64).range(1..))]
    pub traces: u64,
    /// Seconds per trace.
    #[arg(long, default_value_t = 10.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 40_000.0)]
    pub rate: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write traces of one extra, withheld signature to `unknown/`.
    #[arg(long)]
    pub with_unknown: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct FeaturizeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Feature table for traces under `unknown/`.
    #[arg(long)]
    pub unknown_out: Option<PathBuf>,
    /// Convert counts to milliamps: `SENSITIVITY_MV_PER_A,ZERO_OFFSET_COUNTS`.
    #[arg(long, value_parser = parse_calibration)]
    #[serde(skip)]
    pub calibrate: Option<SensorCalibration>,
}

fn parse_calibration(s: &str) -> Result<SensorCalibration, String> {
    let (a, b) = s.split_once(',').ok_or("expected SENSITIVITY,OFFSET")?;
    let sens: f64 = a.trim().parse().map_err(|_| format!("bad sensitivity {a:?}"))?;
    let offset: f64 = b.trim().parse().map_err(|_| format!("bad offset {b:?}"))?;
    let cal = SensorCalibration::new(sens, offset);
    cal.validate(16).map_err(|e| e.to_string())?;
    Ok(cal)
}

fn scaler_parser() -> impl TypedValueParser<Value = ScalerKind> {
    PossibleValuesParser::new(ScalerKind::ALL.map(ScalerKind::name)).map(|s| s.parse().expect("listed value"))
}

fn classifier_parser() -> impl TypedValueParser<Value = ClassifierKind> {
    PossibleValuesParser::new(["knn", "forest"]).map(|s| s.parse().expect("listed value"))
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value = "knn", value_parser = classifier_parser())]
    pub classifier: ClassifierKind,
    #[arg(long, default_value = "normalizer", value_parser = scaler_parser())]
    pub scaler: ScalerKind,
    #[arg(long, default_value_t = 30)]
    pub k_best: usize,
    #[arg(long, default_value_t = 5)]
    pub knn_k: usize,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long, default_value_t = 0.5, value_parser = unit_interval)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long)]
    pub model: PathBuf,
    /// Write the held-out rows here for a later `eval`.
    #[arg(long)]
    pub holdout_out: Option<PathBuf>,
    /// Unknown-class feature table; adds open-set holdout metrics.
    #[arg(long)]
    pub unknown: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub trace: PathBuf,
    /// Overrides the threshold stored in the model.
    #[arg(long, value_parser = unit_interval)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Unknown-class feature table; switches to open-set evaluation.
    #[arg(long)]
    pub unknown: Option<PathBuf>,
    /// Open-set evaluation even without unknown rows.
    #[arg(long)]
    pub open_set: bool,
    #[arg(long)]
    pub report: PathBuf,
    /// Also export per-class box-plot data of this feature.
    #[arg(long)]
    pub boxplot: Option<String>,
    #[arg(long, default_value_t = 30)]
    pub top: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct CaptureArgs {
    /// Stream dump, or `-` for standard input.
    #[arg(long)]
    pub input: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 40_000.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u32).range(1..=16))]
    pub bits: u32,
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long, default_value = "USB")]
    #[serde(serialize_with = "display")]
    pub port: Port,
    #[arg(long)]
    pub trace_id: Option<String>,
}

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn ensure_dir(path: &Path) -> anyhow::Result<()> {
    if !path.is_dir() {
        bail!("{} is not a directory", path.display());
    }
    Ok(())
}

fn ensure_file(path: &Path) -> anyhow::Result<()> {
    if !path.is_file() {
        bail!("{} does not exist or is not a file", path.display());
    }
    Ok(())
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => bail!("directory {} does not exist", p.display()),
        _ => Ok(()),
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            bail!("--jobs must be positive");
        }
        crate::par::configure_workers(jobs);
    }
    println!(
        "config={}",
        serde_json::to_string(&serde_json::json!({"global": &cli.global, "command": &cli.command}))?
    );
    let seed = cli.global.seed;
    match cli.command {
        Command::Synth(a) => synth(a, seed),
        Command::Featurize(a) => featurize(a),
        Command::Train(a) => train(a, seed),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a),
        Command::Capture(a) => capture(a),
    }
}

fn synth(a: SynthArgs, seed: u64) -> anyhow::Result<()> {
    let n = a.classes as usize;
    let mut sigs = default_signatures(n + usize::from(a.with_unknown), seed)?;
    let unknown = if a.with_unknown { sigs.pop() } else { None };
    let cfg = DatasetConfig {
        traces_per_class: a.traces as usize,
        duration_s: a.duration,
        sample_rate_hz: a.rate,
        seed,
    };
    std::fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let manifest = generate_dataset(&sigs, unknown.as_ref(), &cfg, &a.out)?;
    println!("classes={}", manifest.classes.len());
    println!("traces={}", manifest.n_traces());
    println!("unknown_traces={}", manifest.unknown_paths.as_ref().map_or(0, Vec::len));
    Ok(())
}

fn featurize_paths(paths: &[(String, PathBuf)], cal: Option<&SensorCalibration>, cfg: &FeatureConfig) -> anyhow::Result<Vec<FeatureVector>> {
    let names: std::sync::Arc<[String]> = feature_names(cfg).into();
    let rows = crate::par::try_map(paths, |(label, path)| {
        let raw = read_trace(path)?;
        let mut t = clean(&raw)?;
        if let Some(c) = cal {
            t = calibrate(&t, c, raw.adc_bits)?;
        }
        let values = feature_values(&t.values, t.sample_rate_hz, cfg).map_err(|e| e.in_file(path))?;
        Ok::<_, crate::Error>(FeatureVector {
            trace_id: t.trace_id,
            label: Some(label.clone()),
            names: names.clone(),
            values,
        })
    })?;
    Ok(rows)
}

fn featurize(a: FeaturizeArgs) -> anyhow::Result<()> {
    ensure_dir(&a.input)?;
    ensure_parent(&a.out)?;
    if let Some(u) = &a.unknown_out {
        ensure_parent(u)?;
    }
    let cfg = FeatureConfig::default();
    let names = feature_names(&cfg);
    let manifest = load_manifest(&a.input)?;
    log::info!("featurizing {} traces", manifest.n_traces());

    let rows = featurize_paths(&manifest.entries(), a.calibrate.as_ref(), &cfg)?;
    save_features(&a.out, &names, &rows)?;
    println!("rows={}", rows.len());
    println!("features={}", names.len());

    match (&manifest.unknown_paths, &a.unknown_out) {
        (Some(paths), Some(out)) => {
            let entries: Vec<(String, PathBuf)> = paths.iter().map(|p| (UNKNOWN_LABEL.to_string(), p.clone())).collect();
            let rows = featurize_paths(&entries, a.calibrate.as_ref(), &cfg)?;
            save_features(out, &names, &rows)?;
            println!("unknown_rows={}", rows.len());
        }
        (Some(paths), None) => log::warn!("{} unknown traces skipped (no --unknown-out)", paths.len()),
        (None, Some(_)) => bail!("--unknown-out given but {} has no unknown/ directory", a.input.display()),
        (None, None) => {}
    }
    Ok(())
}

fn train(a: TrainArgs, seed: u64) -> anyhow::Result<()> {
    ensure_file(&a.features)?;
    ensure_parent(&a.model)?;
    if let Some(p) = &a.unknown {
        ensure_file(p)?;
    }
    let data = load_features(&a.features)?;
    let (train, test) = stratified_split(&data, a.test_fraction, seed)?;
    let cfg = PipelineConfig {
        scaler: a.scaler,
        classifier: a.classifier,
        k_best: a.k_best,
        knn_k: a.knn_k,
        minkowski_p: 2.0,
        n_trees: a.trees,
        threshold: a.threshold,
        seed,
    };
    let model = fit_pipeline(&train, &cfg)?;
    println!("n_train={}", train.n_samples());

    let closed = evaluate(&model, &test, false, None)?;
    for line in closed.summary_lines() {
        println!("{line}");
    }
    if let Some(p) = &a.unknown {
        let unknown = load_features(p)?;
        if unknown.feature_names != data.feature_names {
            bail!("{} has different feature columns", p.display());
        }
        let open = evaluate(&model, &test, true, Some(&unknown.matrix))?;
        for line in open.summary_lines() {
            println!("open_{line}");
        }
    }
    write_model(&a.model, &model)?;
    if let Some(out) = &a.holdout_out {
        write_holdout(out, &test)?;
    }
    Ok(())
}

fn write_holdout(path: &Path, test: &crate::dataset::LabeledDataset) -> anyhow::Result<()> {
    let names: std::sync::Arc<[String]> = test.feature_names.clone().into();
    let rows: Vec<FeatureVector> = (0..test.n_samples())
        .map(|i| FeatureVector {
            trace_id: test.trace_ids[i].clone(),
            label: Some(test.labels[i].clone()),
            names: names.clone(),
            values: test.matrix.row(i).to_vec(),
        })
        .collect();
    save_features(path, &test.feature_names, &rows)?;
    Ok(())
}

fn predict(a: PredictArgs) -> anyhow::Result<()> {
    ensure_file(&a.model)?;
    ensure_file(&a.trace)?;
    let model = read_model(&a.model)?;
    let trace = read_trace(&a.trace)?;
    let threshold = a.threshold.unwrap_or(model.threshold);
    let p = predict_trace_at(&model, &trace, &FeatureConfig::default(), threshold)?;
    println!("label={} confidence={}", p.label_str(), p.confidence);
    Ok(())
}

fn eval(a: EvalArgs) -> anyhow::Result<()> {
    ensure_file(&a.model)?;
    ensure_file(&a.features)?;
    if let Some(p) = &a.unknown {
        ensure_file(p)?;
    }
    let model = read_model(&a.model)?;
    let data = load_features(&a.features)?;
    let unknown = a.unknown.as_deref().map(load_features).transpose()?;
    let open = a.open_set || unknown.is_some();
    let report = evaluate(&model, &data, open, unknown.as_ref().map(|u| &u.matrix))?;
    let importance = feature_importance_report(&model.selector, &model.feature_names, a.top)?;
    write_report_dir(&a.report, &report, &importance)?;
    if let Some(feature) = &a.boxplot {
        let rows = per_feature_class_summary(&data, feature)?;
        let path = a.report.join(format!("boxplot_{feature}.csv"));
        std::fs::write(&path, boxplot_csv(&rows)).with_context(|| format!("writing {}", path.display()))?;
    }
    for line in report.summary_lines() {
        println!("{line}");
    }
    Ok(())
}

fn capture(a: CaptureArgs) -> anyhow::Result<()> {
    ensure_parent(&a.out)?;
    let mut decoder = SerialDecoder::new(a.bits);
    let mut samples = Vec::new();
    let mut buf = vec![0u8; 64 * 1024];
    let mut source: Box<dyn Read> = if a.input == "-" {
        Box::new(std::io::stdin().lock())
    } else {
        Box::new(std::fs::File::open(&a.input).with_context(|| format!("cannot open {}", a.input))?)
    };
    loop {
        let n = source.read(&mut buf).context("reading stream")?;
        if n == 0 {
            break;
        }
        decoder.push(&buf[..n], &mut samples);
    }
    let discarded = decoder.finish();
    println!("samples={}", samples.len());
    println!("discarded={discarded}");
    if samples.is_empty() {
        bail!("no valid samples in stream");
    }
    let trace = RawTrace {
        samples,
        sample_rate_hz: a.rate,
        adc_bits: a.bits,
        port: a.port,
        label: a.label,
        trace_id: a.trace_id.unwrap_or_else(|| {
            a.out
                .file_stem()
                .map_or_else(|| "capture".to_string(), |s| s.to_string_lossy().into_owned())
        }),
        captured_gap_s: None,
    };
    trace.validate()?;
    save_trace(&a.out, &trace)?;
    Ok(())
}
