//! Command-line front end.
//!
//! Every subcommand loads a [`RunConfig`] (file, then flags), writes its
//! outputs atomically under the output directory and prints one JSON line
//! on stdout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::embed::{train, write_checkpoint, Base, Mode, ModelConfig, TrainingSet};
use crate::error::{Error, Result};
use crate::eval::{
    ablate_ontology, alpha_model, embedding_baseline, heatmap_csv, psl_baseline, score_pairs,
    threshold_heatmap, two_stage_ensemble, AblationMode, OntologyComponent, StageMetrics,
    DEFAULT_HEATMAP_GRID,
};
use crate::kg::{
    load_kg, split_kg, write_kg, EntityId, EvalSet, KnowledgeGraph, LabelId, LoadOptions, Triple,
};
use crate::noise::{assign_extraction_scores, corrupt_kg, score_means};
use crate::pipeline::{iterefine, scored_relations, IterefineRun};
use crate::psl::{infer, InferenceResult, RuleWeights, SolverMethod};
use crate::synth;
use crate::util::write_atomic;

pub const DEFAULT_OUTPUT: &str = "kgrefine-out";

#[derive(Debug, Parser)]
#[command(
    name = "kgrefine",
    version,
    about = "Knowledge-graph refinement with soft logic and type-gated embeddings"
)]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Graph directory (triples.tsv, labels.tsv, truth.tsv, noise.tsv, ontology/).
    #[arg(long, global = true)]
    pub kg: Option<PathBuf>,
    /// Ontology directory, overriding <kg>/ontology.
    #[arg(long, global = true)]
    pub ontology: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corrupt a clean graph (or a generated one) and attach extraction scores.
    Prepare(PrepareArgs),
    /// One round of soft-logic inference.
    Infer(InferArgs),
    /// Train an embedding model.
    Train(TrainArgs),
    /// Run the refinement loop.
    Iterate(IterateArgs),
    /// Compare the refinement loop with its baselines.
    Eval(EvalArgs),
    /// Soft-logic runs with ontology components removed.
    Ablate(AblateArgs),
    /// Feedback-percentage grid of single soft-logic rounds.
    Heatmap(HeatmapArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Clean triples (3 columns, or 5 with confidence and source).
    #[arg(long, conflicts_with = "synthetic")]
    pub triples: Option<PathBuf>,
    /// Type assertions: entity, label, confidence, source.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Generate the synthetic graph described by the [synth] section.
    #[arg(long)]
    pub synthetic: bool,
    /// Fraction of facts and labels to corrupt.
    #[arg(long)]
    pub noise_fraction: Option<f64>,
    /// Fraction of corruptions kept DOM/RNG compatible.
    #[arg(long)]
    pub compatible_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Rule weights (TOML, same keys as the [psl] section).
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Solver iteration limit.
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Solver stopping tolerance.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// 1 for linear, 2 for squared hinges.
    #[arg(long)]
    pub hinge_power: Option<u8>,
    /// admm or subgradient.
    #[arg(long, value_parser = parse_enum::<SolverMethod>)]
    pub solver: Option<SolverMethod>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model configuration (TOML, same keys as the [model] section).
    #[arg(long)]
    pub model_config: Option<PathBuf>,
    /// complex or distmult.
    #[arg(long, value_parser = parse_enum::<Base>)]
    pub base: Option<Base>,
    /// plain, implicit_typed or typee.
    #[arg(long, value_parser = parse_enum::<Mode>)]
    pub mode: Option<Mode>,
    /// Base embedding dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Implicit type embedding dimension.
    #[arg(long)]
    pub type_dim: Option<usize>,
    /// Explicit label embedding dimension.
    #[arg(long)]
    pub label_dim: Option<usize>,
    /// Corrupted triples per positive.
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Adagrad learning rate.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// L2 penalty on the rows touched by a sample.
    #[arg(long)]
    pub l2_reg: Option<f64>,
    /// Training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Samples per update.
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Entity types for typee mode: entity, label per row. Missing entities are UNK.
    #[arg(long)]
    pub types: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeedbackArgs {
    /// Refinement iterations.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Scale of the positive feedback margin.
    #[arg(long)]
    pub phi1: Option<f64>,
    /// Scale of the negative feedback margin.
    #[arg(long)]
    pub phi2: Option<f64>,
    /// Stop once normalized graph growth exceeds this.
    #[arg(long)]
    pub size_cap: Option<f64>,
    /// Weight of the feedback rules.
    #[arg(long)]
    pub feedback_weight: Option<f64>,
}

#[derive(Debug, Args)]
pub struct IterateArgs {
    #[command(flatten)]
    pub feedback: FeedbackArgs,
    /// Rule weights (TOML, same keys as the [psl] section).
    #[arg(long)]
    pub psl_config: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub feedback: FeedbackArgs,
    /// Rule weights (TOML, same keys as the [psl] section).
    #[arg(long)]
    pub psl_config: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Skip the two-stage ensemble baseline.
    #[arg(long)]
    pub no_ensemble: bool,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Ablation modes such as all, none, without:RNG, only:DOM+RNG.
    /// Defaults to all, none and without:X for every component.
    #[arg(long, value_delimiter = ',')]
    pub modes: Vec<String>,
    /// Rule weights (TOML, same keys as the [psl] section).
    #[arg(long)]
    pub psl_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    /// Percentages used on both axes.
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<f64>,
    /// Rule weights (TOML, same keys as the [psl] section).
    #[arg(long)]
    pub psl_config: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(Value::String(s.to_owned())).map_err(|e| e.to_string())
}

fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl ModelArgs {
    fn apply(&self, config: &mut ModelConfig) -> Result<()> {
        if let Some(p) = &self.model_config {
            let seed = config.seed;
            *config = read_toml(p)?;
            config.seed = seed;
        }
        set(&mut config.base, self.base);
        set(&mut config.mode, self.mode);
        set(&mut config.dim, self.dim);
        set(&mut config.type_dim, self.type_dim);
        set(&mut config.label_dim, self.label_dim);
        set(&mut config.negatives, self.negatives);
        set(&mut config.learning_rate, self.learning_rate);
        set(&mut config.l2_reg, self.l2_reg);
        set(&mut config.epochs, self.epochs);
        set(&mut config.batch_size, self.batch_size);
        Ok(())
    }
}

impl FeedbackArgs {
    fn apply(&self, config: &mut RunConfig) {
        let f = &mut config.feedback;
        set(&mut f.max_iter, self.max_iter);
        set(&mut f.phi1, self.phi1);
        set(&mut f.phi2, self.phi2);
        set(&mut f.size_cap, self.size_cap);
        set(&mut f.feedback_weight, self.feedback_weight);
    }
}

fn apply_weights(path: &Option<PathBuf>, config: &mut RunConfig) -> Result<()> {
    if let Some(p) = path {
        config.psl = read_toml::<RuleWeights>(p)?;
    }
    Ok(())
}

/// Builds the effective configuration for `cli`.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    if cli.out.is_some() {
        config.paths.output = cli.out.clone();
    }
    if cli.kg.is_some() {
        config.paths.kg = cli.kg.clone();
    }
    if cli.ontology.is_some() {
        config.paths.ontology = cli.ontology.clone();
    }
    match &cli.command {
        Command::Prepare(a) => {
            set(&mut config.noise.corrupt_fraction, a.noise_fraction);
            set(
                &mut config.noise.type_compatible_fraction,
                a.compatible_fraction,
            );
            if a.synthetic {
                set(&mut config.synth.noise.corrupt_fraction, a.noise_fraction);
                set(
                    &mut config.synth.noise.type_compatible_fraction,
                    a.compatible_fraction,
                );
            }
        }
        Command::Infer(a) => {
            apply_weights(&a.solver.weights, &mut config)?;
            set(&mut config.solver.max_iterations, a.solver.max_iterations);
            set(&mut config.solver.tolerance, a.solver.tolerance);
            set(&mut config.psl.hinge_power, a.solver.hinge_power);
            set(&mut config.solver.method, a.solver.solver);
        }
        Command::Train(a) => a.model.apply(&mut config.model)?,
        Command::Iterate(a) => {
            apply_weights(&a.psl_config, &mut config)?;
            a.feedback.apply(&mut config);
            a.model.apply(&mut config.model)?;
        }
        Command::Eval(a) => {
            apply_weights(&a.psl_config, &mut config)?;
            a.feedback.apply(&mut config);
            a.model.apply(&mut config.model)?;
        }
        Command::Ablate(a) => apply_weights(&a.psl_config, &mut config)?,
        Command::Heatmap(a) => {
            apply_weights(&a.psl_config, &mut config)?;
            a.model.apply(&mut config.model)?;
        }
    }
    config.propagate_seed();
    config.validate()?;
    Ok(config)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Prepare(_) => "prepare",
        Command::Infer(_) => "infer",
        Command::Train(_) => "train",
        Command::Iterate(_) => "iterate",
        Command::Eval(_) => "eval",
        Command::Ablate(_) => "ablate",
        Command::Heatmap(_) => "heatmap",
    }
}

/// Parses `args` (program name first), runs the subcommand, prints the
/// summary line and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let name = command_name(&cli.command);
    match execute(&cli) {
        Ok(mut summary) => {
            summary["command"] = json!(name);
            summary["status"] = json!("ok");
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            println!(
                "{}",
                json!({"command": name, "status": "error", "error": e.to_string(), "exit_code": e.exit_code()})
            );
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Value> {
    let config = resolve_config(cli)?;
    let out = config
        .paths
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
    fs::create_dir_all(&out).map_err(|e| Error::io(format!("creating {}", out.display()), e))?;
    match &cli.command {
        Command::Prepare(a) => prepare(a, &config, &out),
        Command::Infer(_) => infer_cmd(&config, &out),
        Command::Train(a) => train_cmd(a, &config, &out),
        Command::Iterate(_) => iterate_cmd(&config, &out),
        Command::Eval(a) => eval_cmd(a, &config, &out),
        Command::Ablate(a) => ablate_cmd(a, &config, &out),
        Command::Heatmap(a) => heatmap_cmd(a, &config, &out),
    }
}

fn load(config: &RunConfig) -> Result<KnowledgeGraph> {
    let dir = config
        .paths
        .kg
        .as_ref()
        .ok_or_else(|| Error::Config("no graph directory given (--kg or [paths].kg)".into()))?;
    let mut opts = LoadOptions::from_dir(dir);
    if let Some(o) = &config.paths.ontology {
        opts.ontology_dir = Some(o.clone());
    }
    let kg = load_kg(&opts)?;
    kg.validate()?;
    info!(
        "loaded {} facts, {} entities, {} relations",
        kg.num_facts(),
        kg.num_entities(),
        kg.num_relations()
    );
    Ok(kg)
}

fn splits(kg: &KnowledgeGraph, config: &RunConfig) -> Result<(EvalSet, EvalSet)> {
    if kg.truth().is_none() {
        return Err(Error::Data(
            "this command needs gold labels (truth.tsv)".into(),
        ));
    }
    let (_, valid, test) = split_kg(kg, &config.split)?;
    Ok((valid, test))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn triple_row(kg: &KnowledgeGraph, t: &Triple) -> String {
    let v = &kg.vocab;
    format!(
        "{}\t{}\t{}",
        v.entity_name(t.subject),
        v.relation_name(t.relation),
        v.entity_name(t.object)
    )
}

/// `inferred.tsv`: one `REL s r o score` or `LBL e l score` row per atom.
fn write_scores(kg: &KnowledgeGraph, result: &InferenceResult, dir: &Path) -> Result<()> {
    let mut out = String::new();
    for (t, s) in &result.rel_scores {
        let _ = writeln!(out, "REL\t{}\t{s}", triple_row(kg, t));
    }
    for ((e, l), s) in &result.lbl_scores {
        let _ = writeln!(
            out,
            "LBL\t{}\t{}\t{s}",
            kg.vocab.entity_name(*e),
            kg.vocab.label_name(*l)
        );
    }
    write_atomic(&dir.join("inferred.tsv"), out.as_bytes())
}

fn prepare(a: &PrepareArgs, config: &RunConfig, out: &Path) -> Result<Value> {
    let (noisy, stats) = if a.synthetic {
        let s = synth::generate(&config.synth)?;
        (s.kg, s.noise)
    } else {
        let triples = a
            .triples
            .clone()
            .ok_or_else(|| Error::Config("prepare needs --triples or --synthetic".into()))?;
        let mut opts = LoadOptions::new(triples);
        opts.labels = a.labels.clone();
        opts.ontology_dir = config.paths.ontology.clone();
        let clean = load_kg(&opts)?;
        clean.validate()?;
        let (corrupted, stats) = corrupt_kg(&clean, &config.noise)?;
        (assign_extraction_scores(&corrupted, &config.noise)?, stats)
    };
    write_kg(&noisy, out)?;
    let (clean_mean, noisy_mean) = score_means(&noisy);
    let compat_rate = if stats.corrupted_facts == 0 {
        0.0
    } else {
        stats.type_compatible as f64 / stats.corrupted_facts as f64
    };
    let summary = json!({
        "facts": noisy.num_facts(),
        "labels": noisy.labels().len(),
        "entities": noisy.num_entities(),
        "relations": noisy.num_relations(),
        "corrupted": stats.corrupted,
        "corrupted_facts": stats.corrupted_facts,
        "corrupted_labels": stats.corrupted_labels,
        "type_compatible": stats.type_compatible,
        "fallbacks": stats.fallbacks,
        "compatibility_rate": compat_rate,
        "clean_score_mean": clean_mean,
        "noisy_score_mean": noisy_mean,
    });
    write_json(&out.join("stats.json"), &summary)?;
    Ok(json!({"output": out, "facts": noisy.num_facts(), "corrupted": stats.corrupted}))
}

fn infer_cmd(config: &RunConfig, out: &Path) -> Result<Value> {
    let kg = load(config)?;
    let result = infer(&kg, &config.psl, None, &config.solver)?;
    write_scores(&kg, &result, out)?;
    let metrics = match kg.truth() {
        Some(_) => {
            let (valid, test) = splits(&kg, config)?;
            Some(StageMetrics::tune(
                &score_pairs(&valid, |t| result.rel_score(t)),
                &score_pairs(&test, |t| result.rel_score(t)),
            )?)
        }
        None => None,
    };
    let report = json!({
        "objective": result.objective,
        "iterations": result.iterations,
        "relation_atoms": result.rel_scores.len(),
        "label_atoms": result.lbl_scores.len(),
        "metrics": metrics,
    });
    write_json(&out.join("infer.json"), &report)?;
    Ok(json!({
        "output": out,
        "objective": result.objective,
        "iterations": result.iterations,
        "test_wf1": metrics.map(|m| m.test.wf1),
    }))
}

fn read_types(kg: &KnowledgeGraph, path: &Path) -> Result<BTreeMap<EntityId, LabelId>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut types = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            msg,
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 2 {
            return Err(parse_err(format!(
                "expected entity and label, found {} columns",
                f.len()
            )));
        }
        let e = kg.vocab.entities.get(f[0]).ok_or_else(|| {
            Error::Reference(format!(
                "{}:{}: unknown entity {:?}",
                path.display(),
                i + 1,
                f[0]
            ))
        })?;
        let l = kg.vocab.labels.get(f[1]).ok_or_else(|| {
            Error::Reference(format!(
                "{}:{}: unknown label {:?}",
                path.display(),
                i + 1,
                f[1]
            ))
        })?;
        types.insert(EntityId(e), LabelId(l));
    }
    Ok(types)
}

fn model_pairs(model: &crate::embed::EmbeddingModel, set: &EvalSet) -> Result<Vec<(f64, bool)>> {
    let triples: Vec<Triple> = set.triples().collect();
    Ok(model
        .predict(&triples)?
        .into_iter()
        .zip(set.items.iter().map(|(_, g)| *g))
        .collect())
}

fn train_cmd(a: &TrainArgs, config: &RunConfig, out: &Path) -> Result<Value> {
    let kg = load(config)?;
    let types = match &a.types {
        Some(p) => read_types(&kg, p)?,
        None => BTreeMap::new(),
    };
    let held_out = match kg.truth() {
        Some(_) => Some(splits(&kg, config)?),
        None => None,
    };
    let set = match &held_out {
        Some((valid, test)) => TrainingSet::from_kg_excluding(&kg, &[valid, test])?,
        None => TrainingSet::from_kg(&kg)?,
    };
    let (model, trace) = train(&set, &types, &config.model)?;
    write_checkpoint(&model, &out.join("model.bin"))?;
    let metrics = match &held_out {
        Some((valid, test)) => Some(StageMetrics::tune(
            &model_pairs(&model, valid)?,
            &model_pairs(&model, test)?,
        )?),
        None => None,
    };
    write_json(
        &out.join("train.json"),
        &json!({"config": config.model, "loss_trace": trace, "parameters": model.num_parameters(), "metrics": metrics}),
    )?;
    Ok(json!({
        "output": out,
        "positives": set.positives.len(),
        "final_loss": trace.last(),
        "test_wf1": metrics.map(|m| m.test.wf1),
    }))
}

fn write_run(kg: &KnowledgeGraph, run: &IterefineRun, out: &Path) -> Result<()> {
    write_json(&out.join("reports.json"), &run.reports)?;
    for (i, art) in run.artifacts.iter().enumerate() {
        let dir = out.join(format!("iter-{}", i + 1));
        fs::create_dir_all(&dir)
            .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        write_scores(kg, &art.inference, &dir)?;
        let mut fb = String::new();
        for (t, s) in &art.feedback.positive {
            let _ = writeln!(fb, "{}\t{s}\t1", triple_row(kg, t));
        }
        for (t, s) in &art.feedback.negative {
            let _ = writeln!(fb, "{}\t{s}\t0", triple_row(kg, t));
        }
        write_atomic(&dir.join("feedback.tsv"), fb.as_bytes())?;
    }
    write_checkpoint(&run.model, &out.join("model.bin"))?;
    crate::kg::write_triples(&run.refined, &out.join("refined.tsv"))
}

fn iterate_cmd(config: &RunConfig, out: &Path) -> Result<Value> {
    let kg = load(config)?;
    let (valid, test) = splits(&kg, config)?;
    let run = iterefine(&kg, &config.refine(), &valid, &test)?;
    write_run(&kg, &run, out)?;
    let last = run.reports.last().expect("at least one iteration");
    Ok(json!({
        "output": out,
        "iterations": run.reports.len(),
        "halted_on_size": run.halted_on_size,
        "psl_test_wf1": last.psl_test.wf1,
        "model_test_wf1": last.model_test.wf1,
        "normalized_size": last.normalized_size,
    }))
}

fn baseline_entry(name: &str, m: &StageMetrics) -> Value {
    json!({"model": name, "threshold": m.threshold, "valid": m.valid, "test": m.test})
}

fn base_name(base: Base) -> &'static str {
    match base {
        Base::Complex => "complex",
        Base::Distmult => "distmult",
    }
}

fn eval_cmd(a: &EvalArgs, config: &RunConfig, out: &Path) -> Result<Value> {
    let kg = load(config)?;
    let (valid, test) = splits(&kg, config)?;
    let base = base_name(config.model.base);
    let mut entries = Vec::new();

    let (psl, psl_result) = psl_baseline(&kg, &config.psl, &config.solver, &valid, &test)?;
    entries.push(baseline_entry("psl", &psl));

    let plain_config = ModelConfig {
        mode: Mode::Plain,
        ..config.model.clone()
    };
    let (plain, plain_model) = embedding_baseline(&kg, &plain_config, &valid, &test)?;
    entries.push(baseline_entry(base, &plain));

    let (alpha, alpha_test) = alpha_model(&psl_result, &plain_model, &valid, &test)?;
    entries.push(json!({
        "model": format!("alpha-{base}"),
        "alpha": alpha.alpha,
        "threshold": alpha.threshold,
        "valid": alpha.valid,
        "test": alpha_test,
    }));

    if !a.no_ensemble {
        let stage1 = ModelConfig {
            base: Base::Distmult,
            ..plain_config.clone()
        };
        let ens = two_stage_ensemble(&kg, &stage1, &plain_config, &valid, &test)?;
        entries.push(baseline_entry(&format!("distmult+{base}"), &ens));
    }

    let run = iterefine(&kg, &config.refine(), &valid, &test)?;
    write_run(&kg, &run, out)?;
    let best = run
        .reports
        .iter()
        .take(3)
        .max_by(|x, y| {
            x.model_valid
                .wf1
                .total_cmp(&y.model_valid.wf1)
                .then(y.iteration.cmp(&x.iteration))
        })
        .expect("at least one iteration");
    let mode_name = match config.model.mode {
        Mode::Plain => base.to_owned(),
        Mode::ImplicitTyped => format!("implicit-{base}"),
        Mode::Typee => format!("typee-{base}"),
    };
    entries.push(json!({
        "model": mode_name,
        "iteration": best.iteration,
        "threshold": best.t1,
        "valid": best.model_valid,
        "test": best.model_test,
    }));

    let summary: BTreeMap<String, f64> = entries
        .iter()
        .map(|e| {
            (
                e["model"].as_str().unwrap_or_default().to_owned(),
                e["test"]["wf1"].as_f64().unwrap_or(0.0),
            )
        })
        .collect();
    write_json(&out.join("eval.json"), &entries)?;
    Ok(json!({"output": out, "test_wf1": summary}))
}

fn default_ablations() -> Vec<AblationMode> {
    let mut modes = vec![AblationMode::All, AblationMode::None];
    modes.extend(
        OntologyComponent::ALL
            .iter()
            .map(|c| AblationMode::Without(vec![*c])),
    );
    modes
}

fn ablate_cmd(a: &AblateArgs, config: &RunConfig, out: &Path) -> Result<Value> {
    let kg = load(config)?;
    let (valid, test) = splits(&kg, config)?;
    let modes = if a.modes.is_empty() {
        default_ablations()
    } else {
        a.modes
            .iter()
            .map(|m| m.parse())
            .collect::<Result<Vec<AblationMode>>>()?
    };
    let mut csv = String::from("mode,threshold,pos_f1,neg_f1,wf1\n");
    let mut rows = BTreeMap::new();
    for mode in &modes {
        let mut g = kg.clone();
        g.ontology = ablate_ontology(&kg.ontology, mode);
        let (m, _) = psl_baseline(&g, &config.psl, &config.solver, &valid, &test)?;
        let _ = writeln!(
            csv,
            "{mode},{},{},{},{}",
            m.threshold, m.test.pos_f1, m.test.neg_f1, m.test.wf1
        );
        rows.insert(mode.to_string(), m.test.wf1);
    }
    write_atomic(&out.join("ablation.csv"), csv.as_bytes())?;
    Ok(json!({"output": out, "test_wf1": rows}))
}

fn heatmap_cmd(a: &HeatmapArgs, config: &RunConfig, out: &Path) -> Result<Value> {
    let kg = load(config)?;
    let (valid, test) = splits(&kg, config)?;
    let axis: Vec<f64> = if a.grid.is_empty() {
        DEFAULT_HEATMAP_GRID.to_vec()
    } else {
        a.grid.clone()
    };
    if let Some(bad) = axis.iter().find(|p| !(0.0..=100.0).contains(*p)) {
        return Err(Error::Config(format!(
            "grid percentage {bad} outside [0, 100]"
        )));
    }
    let grid: Vec<(f64, f64)> = axis
        .iter()
        .flat_map(|&p| axis.iter().map(move |&n| (p, n)))
        .collect();

    // One refinement round supplies the model that scores the atom universe.
    let mut one = config.refine();
    one.feedback.max_iter = 1;
    let run = iterefine(&kg, &one, &valid, &test)?;
    let universe: Vec<Triple> = scored_relations(&run.artifacts[0].inference)
        .into_iter()
        .map(|(t, _)| t)
        .collect();
    let scores = run.model.predict(&universe)?;
    let scored: Vec<(Triple, f64)> = universe.into_iter().zip(scores).collect();

    let cells = threshold_heatmap(
        &kg,
        &config.psl,
        &config.solver,
        &scored,
        &valid,
        &test,
        &grid,
    )?;
    write_atomic(&out.join("heatmap.csv"), heatmap_csv(&cells).as_bytes())?;
    Ok(json!({"output": out, "cells": cells.len()}))
}
