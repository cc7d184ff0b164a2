//! `divsample` command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data, validation and
//! I/O errors. Every output file is written atomically, and each run echoes
//! its fully-resolved configuration to `<out>.config.json`.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use divsample::classifiers::{self, GlmModel, Model, ModelKind, ModelSpec, TrainedModel};
use divsample::data::{self, format_float, Dataset, Standardizer};
use divsample::diversity;
use divsample::evaluation::{self, DatasetSource, ExperimentConfig, RunOptions};
use divsample::resampling::{self, Method, ResamplePlan};
use divsample::sort::{self, Asa5Handling, EncodingOptions, MalignancyMode, SortCoefficients};

use output::{sidecar_path, write_atomic, write_json, CliError};

#[derive(Parser)]
#[command(
    name = "divsample",
    version,
    about = "Diversity-preserving re-sampling for imbalanced binary classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
enum Command {
    /// Write a two-cluster Gaussian benchmark dataset.
    GenSynth(GenSynthArgs),
    /// Re-sample a training CSV.
    Resample(ResampleArgs),
    /// Keep the most diverse rows of a CSV by greedy removal.
    DiversitySelect(DiversitySelectArgs),
    /// Fit a classifier on a training CSV and report test PR-AUC.
    Evaluate(EvaluateArgs),
    /// Run a repeated experiment described by a JSON config.
    ///
    /// The config is a flat JSON object with the fields datasets,
    /// imbalance_levels, methods, classifiers, repetitions, train_fraction,
    /// master_seed, standardize, target_balance, hybrid_size_ratio, smote_k,
    /// surplus_factor, theta, ridge and select_from_originals. Relative
    /// dataset paths are resolved against the config file's directory.
    Experiment(ExperimentArgs),
    /// Score SORT patients, or run the SORT re-sampling case study.
    SortScore(SortScoreArgs),
}

#[derive(Args, Serialize)]
struct InputArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Name of the label column.
    #[arg(long, default_value = "label")]
    label: String,
    /// Label value of the positive (minority) class.
    #[arg(long, default_value = "1")]
    positive: String,
}

#[derive(Args, Serialize)]
struct GenSynthArgs {
    #[arg(long)]
    n_major: usize,
    #[arg(long)]
    n_minor: usize,
    #[arg(long)]
    dim: usize,
    /// Distance of the minority centre from the origin along the first axis.
    #[arg(long)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: resampling::ResampleError| e.to_string())
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: classifiers::ClassifierError| e.to_string())
}

#[derive(Args, Serialize)]
struct ResampleArgs {
    #[command(flatten)]
    input: InputArgs,
    /// none, ros, rus, smote, osus or smoteus.
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// Add the diversity selection stage.
    #[arg(long)]
    diversity: bool,
    /// Minority:majority ratio after re-sampling.
    #[arg(long, default_value_t = 1.0)]
    balance: f64,
    /// Hybrid output size as a fraction of the input size.
    #[arg(long, default_value_t = 0.5)]
    size_ratio: f64,
    #[arg(long, default_value_t = 5)]
    smote_k: usize,
    /// Candidate pool multiplier for diversity over-sampling.
    #[arg(long, default_value_t = 2.0)]
    surplus: f64,
    #[arg(long, default_value_t = diversity::DEFAULT_THETA)]
    theta: f64,
    #[arg(long, default_value_t = diversity::DEFAULT_RIDGE)]
    ridge: f64,
    /// Let diversity over-sampling discard original minority rows.
    #[arg(long)]
    from_originals: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Work on raw features instead of train-fitted z-scores.
    #[arg(long)]
    no_standardize: bool,
    /// Append a provenance column.
    #[arg(long)]
    provenance: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct DiversitySelectArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Number of rows to keep.
    #[arg(long)]
    keep: usize,
    #[arg(long, default_value_t = diversity::DEFAULT_THETA)]
    theta: f64,
    #[arg(long, default_value_t = diversity::DEFAULT_RIDGE)]
    ridge: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_standardize: bool,
    #[arg(long)]
    out: PathBuf,
    /// Write the removal order as CSV (removed_row, contribution, step).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "label")]
    label: String,
    #[arg(long, default_value = "1")]
    positive: String,
    /// glm, knn, dt or rf.
    #[arg(long, value_parser = parse_kind)]
    classifier: ModelKind,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    max_depth: usize,
    #[arg(long, default_value_t = 5)]
    min_leaf: usize,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Candidate features per split; defaults to ceil(sqrt(d)).
    #[arg(long)]
    features_per_split: Option<usize>,
    #[arg(long)]
    no_bootstrap: bool,
    #[arg(long, default_value_t = 1e-6)]
    glm_ridge: f64,
    #[arg(long, default_value_t = 100)]
    glm_max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_standardize: bool,
    /// Score with GLM coefficients from this JSON file instead of fitting.
    #[arg(long)]
    coefficients: Option<PathBuf>,
    /// Write the fitted GLM coefficients (raw feature scale) as JSON.
    #[arg(long)]
    export_coefficients: Option<PathBuf>,
    /// Per-row scores CSV (row, label, score).
    #[arg(long)]
    out: Option<PathBuf>,
    /// PR curve points CSV (threshold, recall, precision).
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Per-repetition results CSV.
    #[arg(long)]
    out: PathBuf,
    /// Per-cell summary CSV with signed-rank p-values.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Aligned text tables.
    #[arg(long)]
    tables: Option<PathBuf>,
    /// PR curve points for every test evaluation.
    #[arg(long)]
    curves: Option<PathBuf>,
    /// Worker thread cap; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Asa5Arg {
    Clamp,
    Reject,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MalignancyArg {
    Graded,
    Binary,
}

#[derive(Args, Serialize)]
struct SortScoreArgs {
    /// Patients CSV: asa_ps or cci, emergency, severity, malignancy, age_group.
    #[arg(long, required_unless_present = "synthetic")]
    patients: Option<PathBuf>,
    /// Coefficients JSON; the built-in defaults are used when omitted.
    #[arg(long)]
    coefficients: Option<PathBuf>,
    /// How ASA-PS 5 is encoded.
    #[arg(long, value_enum, default_value = "clamp")]
    asa5: Asa5Arg,
    #[arg(long, value_enum, default_value = "graded")]
    malignancy: MalignancyArg,
    /// Run the re-sampling case study instead of scoring.
    #[arg(long)]
    case_study: bool,
    /// Outcome column (0/1) for the case study.
    #[arg(long, default_value = "mortality")]
    outcome: String,
    /// Case study on a generated cohort of this size instead of --patients.
    #[arg(long, requires = "case_study")]
    synthetic: Option<usize>,
    /// Case-study methods, each run with and without diversity selection.
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "ros,rus,smote,osus,smoteus")]
    methods: Vec<Method>,
    /// Hybrid size ratios for the case study.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75")]
    ratios: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: &Command) -> Result<(), CliError> {
    let echo = serde_json::to_value(command).expect("arguments serialize");
    match command {
        Command::GenSynth(a) => gen_synth(a, echo),
        Command::Resample(a) => resample(a, echo),
        Command::DiversitySelect(a) => diversity_select(a, echo),
        Command::Evaluate(a) => evaluate(a, echo),
        Command::Experiment(a) => experiment(a),
        Command::SortScore(a) => sort_score(a, echo),
    }
}

fn load(input: &InputArgs) -> Result<Dataset, CliError> {
    let report = Dataset::load_csv(&input.input, &input.label, &input.positive)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok(report.dataset)
}

fn csv_bytes(d: &Dataset, extra: Option<(&str, &[String])>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    d.write_csv(&mut buf, extra)?;
    Ok(buf)
}

fn gen_synth(a: &GenSynthArgs, echo: Value) -> Result<(), CliError> {
    let d = data::generate_synthetic(a.n_major, a.n_minor, a.dim, a.separation, a.seed)?;
    write_atomic(&a.out, &csv_bytes(&d, None)?)?;
    write_json(&sidecar_path(&a.out), &echo)
}

fn resample(a: &ResampleArgs, mut echo: Value) -> Result<(), CliError> {
    let d = load(&a.input)?;
    let plan = ResamplePlan {
        method: a.method,
        diversity: a.diversity,
        target_balance: a.balance,
        hybrid_size_ratio: a.size_ratio,
        smote_k: a.smote_k,
        surplus_factor: a.surplus,
        theta: a.theta,
        ridge: a.ridge,
        select_from_originals: a.from_originals,
        seed: a.seed,
    };
    let (outcome, result) = if a.no_standardize {
        let o = resampling::resample(&d, &plan)?;
        let r = o.dataset.clone();
        (o, r)
    } else {
        let s = Standardizer::fit(&d);
        let o = resampling::resample(&s.transform(&d)?, &plan)?;
        let r = o.restore_scale(&d, &s)?;
        (o, r)
    };
    let tags: Vec<String> = outcome.provenance.iter().map(|p| p.as_str().to_string()).collect();
    let extra = a.provenance.then_some(("provenance", tags.as_slice()));
    write_atomic(&a.out, &csv_bytes(&result, extra)?)?;
    echo["plan"] = serde_json::to_value(&outcome.plan_echo).expect("plan serializes");
    write_json(&sidecar_path(&a.out), &echo)
}

fn diversity_select(a: &DiversitySelectArgs, mut echo: Value) -> Result<(), CliError> {
    let d = load(&a.input)?;
    let points: Vec<Vec<f64>> = if a.no_standardize {
        d.rows().map(<[f64]>::to_vec).collect()
    } else {
        let s = Standardizer::fit(&d);
        d.rows().map(|r| s.transform_row(r)).collect()
    };
    let sel = diversity::greedy_select(&points, a.keep, a.theta, a.ridge, a.seed)
        ?;
    write_atomic(&a.out, &csv_bytes(&d.select(&sel.kept_indices), None)?)?;
    if let Some(path) = &a.trace {
        let mut text = String::from("removed_row,contribution,step\n");
        for (step, r) in sel.removal_trace.iter().enumerate() {
            text += &format!("{},{},{step}\n", r.index, format_float(r.contribution));
        }
        write_atomic(path, text.as_bytes())?;
    }
    println!("final_diversity,{}", format_float(sel.final_diversity));
    echo["final_diversity"] = json!(sel.final_diversity);
    write_json(&sidecar_path(&a.out), &echo)
}

fn model_spec(a: &EvaluateArgs) -> ModelSpec {
    let mut spec = ModelSpec::new(a.classifier);
    spec.glm.l2_ridge = a.glm_ridge;
    spec.glm.max_iterations = a.glm_max_iter;
    spec.knn.k = a.k;
    spec.dt.max_depth = a.max_depth;
    spec.dt.min_leaf = a.min_leaf;
    spec.rf.trees = a.trees;
    spec.rf.features_per_split = a.features_per_split;
    spec.rf.bootstrap = !a.no_bootstrap;
    spec.seed = a.seed;
    spec
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::json(path, e))
}

fn evaluate(a: &EvaluateArgs, mut echo: Value) -> Result<(), CliError> {
    let train = Dataset::load_csv(&a.train, &a.label, &a.positive)?.dataset;
    let test = Dataset::load_csv(&a.test, &a.label, &a.positive)?.dataset;
    let spec = model_spec(a);
    let model = if let Some(path) = &a.coefficients {
        if a.classifier != ModelKind::Glm {
            return Err(CliError::usage("--coefficients requires --classifier glm"));
        }
        let glm = GlmModel::from_json(&read_json(path)?)?;
        TrainedModel {
            kind: ModelKind::Glm,
            n_features: glm.feature_names.len(),
            model: Model::Glm(glm),
            standardizer: None,
        }
    } else if a.no_standardize {
        classifiers::fit(&train, &spec)?
    } else {
        let s = Standardizer::fit(&train);
        let fitted = classifiers::fit(&s.transform(&train)?, &spec)?;
        match fitted.model {
            // fold the scaling into the coefficients so exports are raw-scale
            Model::Glm(g) => TrainedModel {
                model: Model::Glm(g.unstandardized(&s)),
                ..fitted
            },
            _ => fitted.with_standardizer(s),
        }
    };
    if let Some(path) = &a.export_coefficients {
        let glm = model
            .as_glm()
            .ok_or_else(|| CliError::usage("--export-coefficients requires --classifier glm"))?;
        write_json(path, &glm.to_json())?;
    }
    let scores = classifiers::predict_scores(&model, &test)?;
    let curve = evaluation::pr_curve(test.labels(), &scores)?;
    let ap = curve.average_precision();
    println!("pr_auc,{}", format_float(ap));
    if let Some(path) = &a.out {
        let mut text = String::from("row,label,score\n");
        for (i, s) in scores.iter().enumerate() {
            text += &format!("{i},{},{}\n", test.label(i), format_float(*s));
        }
        write_atomic(path, text.as_bytes())?;
    }
    if let Some(path) = &a.curve {
        let mut text = String::from("threshold,recall,precision\n");
        for p in &curve.points {
            text += &format!(
                "{},{},{}\n",
                format_float(p.threshold),
                format_float(p.recall),
                format_float(p.precision)
            );
        }
        write_atomic(path, text.as_bytes())?;
    }
    echo["model_spec"] = serde_json::to_value(&spec).expect("spec serializes");
    echo["pr_auc"] = json!(ap);
    echo["pr_auc_rule"] = json!("step-wise average precision");
    let sidecar = a
        .out
        .as_deref()
        .map(sidecar_path)
        .unwrap_or_else(|| sidecar_path(&a.test.with_extension("evaluate")));
    write_json(&sidecar, &echo)
}

/// Makes relative CSV dataset paths absolute against `base`.
fn resolve_paths(config: &mut ExperimentConfig, base: &Path) -> Result<(), CliError> {
    for d in &mut config.datasets {
        if let DatasetSource::Csv { path, .. } = d {
            let joined = if path.is_relative() { base.join(&*path) } else { path.clone() };
            *path = std::path::absolute(&joined).map_err(|e| CliError::io(&joined, e))?;
        }
    }
    Ok(())
}

fn experiment(a: &ExperimentArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.config).map_err(|e| CliError::io(&a.config, e))?;
    let mut config: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| CliError::json(&a.config, e))?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    resolve_paths(&mut config, base)?;
    let options = RunOptions {
        collect_curves: a.curves.is_some(),
    };
    let result = match a.threads {
        Some(t) => evaluation::run_experiment_with_threads(&config, options, t)?,
        None => evaluation::run_experiment(&config, options)?,
    };
    write_atomic(&a.out, evaluation::raw_csv(&result).as_bytes())?;
    let summary = evaluation::summarize(&result);
    if let Some(path) = &a.summary {
        write_atomic(path, evaluation::summary_csv(&summary).as_bytes())?;
    }
    if let Some(path) = &a.tables {
        let mut text = String::from(
            "PR-AUC (step-wise average precision), mean±std over repetitions; \
             * marks p < 0.05 against the base method with a higher mean\n\n",
        );
        text += &evaluation::text_tables(&summary);
        write_atomic(path, text.as_bytes())?;
    }
    if let Some(path) = &a.curves {
        write_atomic(path, evaluation::curves_csv(&result).as_bytes())?;
    }
    // the echo is a loadable config, so it doubles as a reproduction recipe
    let echo = serde_json::to_value(&config).expect("config serializes");
    write_json(&sidecar_path(&a.out), &echo)
}

fn encoding(a: &SortScoreArgs) -> EncodingOptions {
    EncodingOptions {
        asa5: match a.asa5 {
            Asa5Arg::Clamp => Asa5Handling::Clamp,
            Asa5Arg::Reject => Asa5Handling::Reject,
        },
        malignancy: match a.malignancy {
            MalignancyArg::Graded => MalignancyMode::Graded,
            MalignancyArg::Binary => MalignancyMode::Binary,
        },
    }
}

fn sort_score(a: &SortScoreArgs, mut echo: Value) -> Result<(), CliError> {
    let coefficients = match &a.coefficients {
        Some(p) => SortCoefficients::from_json(&read_json(p)?)?,
        None => SortCoefficients::default(),
    };
    let opts = encoding(a);
    echo["resolved_coefficients"] = coefficients.to_json();

    if !a.case_study {
        let path = a.patients.as_ref().expect("clap requires --patients");
        let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        let table = sort::read_patients(file, None)
            .map_err(|e| divsample::Error::from(e).context(path.display().to_string()))?;
        let mut buf = Vec::new();
        sort::write_scored(&mut buf, &table, &coefficients, opts)?;
        write_atomic(&a.out, &buf)?;
        return write_json(&sidecar_path(&a.out), &echo);
    }

    let (patients, outcomes) = match (a.synthetic, &a.patients) {
        (Some(n), _) => sort::generate_cohort(n, &coefficients, a.seed),
        (None, Some(path)) => {
            let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
            let table = sort::read_patients(file, Some(&a.outcome))
                .map_err(|e| divsample::Error::from(e).context(path.display().to_string()))?;
            let outcomes = table.outcomes.expect("outcome column requested");
            (table.patients, outcomes)
        }
        (None, None) => unreachable!("clap requires --patients or --synthetic"),
    };
    let dataset = sort::patients_to_dataset(&patients, &outcomes, opts)?;
    let mut plans = Vec::new();
    for &m in a.methods.iter().filter(|m| **m != Method::None) {
        for diversity in [false, true] {
            if m.is_hybrid() {
                for &r in &a.ratios {
                    plans.push(ResamplePlan::new(m, diversity).with_size_ratio(r));
                }
            } else {
                plans.push(ResamplePlan::new(m, diversity));
            }
        }
    }
    let result = sort::run_case_study(
        &dataset,
        &plans,
        &coefficients,
        classifiers::GlmParams::default(),
        a.seed,
    )?;
    write_atomic(&a.out, result.to_csv().as_bytes())?;
    echo["plans"] = serde_json::to_value(&plans).expect("plans serialize");
    echo["train_size"] = json!(result.train_size);
    echo["test_size"] = json!(result.test_size);
    write_json(&sidecar_path(&a.out), &echo)
}
