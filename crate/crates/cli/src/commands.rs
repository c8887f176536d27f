use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::{Args, ValueEnum};
use jointcoref::augment::{
    apply_plan, build_plan, harvest_scores, read_plan, train_mention_detector, write_plan, AugmentPlan,
};
use jointcoref::corpus::corpus_stats;
use jointcoref::learning::train::{write_history, TrainOutcome};
use jointcoref::learning::{train, Checkpoint, Model, ModelConfig, Objective, TrainConfig};
use jointcoref::metrics::report::{build_table, load_runs, BenchmarkTable};
use jointcoref::metrics::tasks::{choice_accuracy, pair_f1, read_choice_tasks, read_pair_tasks, ChoiceScore};
use jointcoref::metrics::{score_corpus, MetricReport, Prf, ScoreOptions};
use jointcoref::mixer::{self, build_epoch, Cap, CorpusRef, MixConfig, MixEntry, MixSpec};
use jointcoref::synth::{self, SynthConfig};
use jointcoref::{Cluster, Corpus, Split};
use serde::{Deserialize, Serialize};

use crate::io::{
    data_error, load_profile, print_json, read_config, read_corpus, relative_to, write_corpus, write_text, Format,
};
use crate::manifest::Recorder;

/// Input corpus with its format and profile.
#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Corpus file (CoNLL or jsonlines).
    pub input: PathBuf,
    /// Builtin profile name or profile file (JSON or TOML).
    #[arg(long)]
    pub profile: String,
    /// Input format; inferred from the extension when omitted.
    #[arg(long)]
    pub format: Option<Format>,
    #[arg(long, default_value = "dev")]
    pub split: Split,
}

impl CorpusArgs {
    fn load(&self) -> Result<Corpus> {
        let profile = load_profile(&self.profile)?;
        read_corpus(&self.input, Format::resolve(self.format, &self.input), &profile, self.split)
    }
}

// ---------------------------------------------------------------- convert

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long, value_enum)]
    pub from: Format,
    #[arg(long, value_enum)]
    pub to: Format,
    #[arg(long)]
    pub profile: String,
    #[arg(long, default_value = "train")]
    pub split: Split,
    pub input: PathBuf,
    pub output: PathBuf,
    /// Manifest location (default: `<output>.manifest.json`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn convert(a: &ConvertArgs) -> Result<()> {
    let mut rec = Recorder::start("convert");
    let profile = load_profile(&a.profile)?;
    let corpus = read_corpus(&a.input, a.from, &profile, a.split)?;
    write_corpus(&corpus, &a.output, a.to)?;
    rec.config(&serde_json::json!({ "from": a.from, "to": a.to, "profile": profile, "split": a.split }))?;
    rec.input(&a.input);
    rec.output(&a.output);
    rec.write(a.manifest.as_deref(), &a.output)?;
    eprintln!("converted {} documents", corpus.len());
    Ok(())
}

// ---------------------------------------------------------------- validate / stats

pub fn validate(a: &CorpusArgs) -> Result<()> {
    let corpus = a.load()?;
    let violations = corpus.validate();
    let count: usize = violations.values().map(Vec::len).sum();
    print_json(&serde_json::json!({
        "documents": corpus.len(),
        "valid": count == 0,
        "violation_count": count,
        "violations": violations,
    }))?;
    if count > 0 {
        return Err(data_error(format!("{count} violations in {} documents", violations.len())));
    }
    Ok(())
}

pub fn stats(a: &CorpusArgs) -> Result<()> {
    let corpus = a.load()?;
    let s = corpus_stats(&corpus).map_err(|e| data_error(e.to_string()))?;
    print_json(&serde_json::json!({ "dataset": corpus.profile.name, "split": corpus.split, "stats": s }))
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveArg {
    #[default]
    Full,
    /// Mention proposal only (the detector used for augmentation).
    Mention,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Objective {
        match o {
            ObjectiveArg::Full => Objective::Full,
            ObjectiveArg::Mention => Objective::MentionOnly,
        }
    }
}

/// Training config file: `[model]`, `[train]` and a `[mix]` of corpora.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainFile {
    pub objective: ObjectiveArg,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub mix: Option<MixConfig>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TOML (or JSON) training config.
    #[arg(long)]
    pub config: PathBuf,
    /// Where to write the best checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Evaluation history as CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

fn load_refs(config: &Path, refs: &[CorpusRef], split: Split, rec: &mut Recorder) -> Result<Vec<(Corpus, Cap)>> {
    refs.iter()
        .map(|r| {
            let path = relative_to(config, &r.path);
            let profile = load_profile(&r.profile)?;
            let corpus = read_corpus(&path, Format::infer(&path), &profile, split)?;
            rec.input(&path);
            Ok((corpus, r.cap))
        })
        .collect()
}

pub fn train_cmd(a: &TrainArgs) -> Result<()> {
    let mut rec = Recorder::start("train");
    let mut file: TrainFile = read_config(&a.config)?;
    if let Some(steps) = a.steps {
        file.train.steps = steps;
    }
    if let Some(seed) = a.seed {
        file.train.seed = seed;
        file.model.seed = seed;
    }
    file.model.validate().map_err(|e| data_error(e.to_string()))?;
    file.train.validate().map_err(|e| data_error(e.to_string()))?;
    let mix = file.mix.clone().ok_or_else(|| data_error("config has no [mix] section"))?;
    rec.input(&a.config);

    let train_sets = load_refs(&a.config, &mix.corpora, Split::Train, &mut rec)?;
    let dev: Vec<Corpus> = load_refs(&a.config, &mix.dev, Split::Dev, &mut rec)?.into_iter().map(|(c, _)| c).collect();
    mixer::check_dev(&dev)?;
    let entries = train_sets.iter().map(|(corpus, cap)| MixEntry { corpus, cap: *cap }).collect();
    let spec = MixSpec::new(entries, mix.seed)?;

    let corpora: Vec<&Corpus> = train_sets.iter().map(|(c, _)| c).collect();
    let model = Model::for_corpora(file.model, &corpora)?;
    let docs = mixer::stream(&spec, file.train.steps).map(|item| item.doc);
    let outcome = train(model, docs, &dev, &file.train, file.objective.into())?;

    save_outcome(&outcome, &file.train, &a.checkpoint, a.history.as_deref(), &mut rec)?;
    rec.config(&file)?;
    rec.config_hash(jointcoref::learning::config_hash(&file.model, Some(&file.train)));
    rec.seed("model", file.model.seed);
    rec.seed("train", file.train.seed);
    rec.seed("mix", mix.seed);
    rec.write(a.manifest.as_deref(), &a.checkpoint)?;
    print_json(&serde_json::json!({
        "best_step": outcome.best_step,
        "best_dev_score": outcome.best_score,
        "steps_run": outcome.steps_run,
        "stopped_early": outcome.stopped_early,
        "final_loss": outcome.losses.last(),
    }))
}

fn save_outcome(
    outcome: &TrainOutcome,
    cfg: &TrainConfig,
    checkpoint: &Path,
    history: Option<&Path>,
    rec: &mut Recorder,
) -> Result<()> {
    if let Some(dir) = checkpoint.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let ck = Checkpoint::new(outcome.best.clone(), Some(*cfg), outcome.optimizer.clone(), outcome.best_step);
    ck.save(checkpoint)?;
    rec.output(checkpoint);
    if let Some(h) = history {
        write_history(h, &outcome.history)?;
        rec.output(h);
    }
    Ok(())
}

// ---------------------------------------------------------------- predict

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Output format; defaults to the input format.
    #[arg(long)]
    pub out_format: Option<Format>,
    /// Cluster the gold mentions instead of proposed ones.
    #[arg(long)]
    pub gold_mentions: bool,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    let mut rec = Recorder::start("predict");
    let ck = Checkpoint::load(&a.checkpoint).map_err(|e| data_error(format!("{}: {e}", a.checkpoint.display())))?;
    let corpus = a.corpus.load()?;
    let mut clustering = ck.model.config.clustering;
    clustering.gold_mention_mode = a.gold_mentions;
    clustering.teacher_forcing = false;
    let docs = corpus
        .documents
        .iter()
        .map(|d| ck.model.predict_with(d, &clustering))
        .collect::<Result<Vec<_>, _>>()?;
    let out = Corpus::new(corpus.profile.clone(), docs, corpus.split);
    let fmt = a.out_format.unwrap_or_else(|| Format::resolve(a.corpus.format, &a.corpus.input));
    write_corpus(&out, &a.out, fmt)?;

    rec.config(&serde_json::json!({ "clustering": clustering, "profile": corpus.profile }))?;
    rec.config_hash(ck.config_hash.clone());
    rec.seed("model", ck.model.config.seed);
    rec.input(&a.checkpoint);
    rec.input(&a.corpus.input);
    rec.output(&a.out);
    rec.write(a.manifest.as_deref(), &a.out)?;
    eprintln!("predicted {} documents", out.len());
    Ok(())
}

// ---------------------------------------------------------------- score

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Full coreference against a gold corpus.
    #[default]
    Coref,
    /// Pronoun/name pair decisions; `--gold` is a task file.
    Pair,
    /// Multiple-choice pronoun resolution; `--gold` is a task file.
    Choice,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Required for coreference scoring; its singleton policy is applied to predictions.
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub format: Option<Format>,
    #[arg(long, value_enum, default_value_t)]
    pub task: Task,
    /// Also report singleton F1 and CoNLL F1 over clusters of size ≥ 2.
    #[arg(long)]
    pub split_singletons: bool,
    /// Print JSON instead of the table.
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON report here.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum ScoreReport {
    Coref(MetricReport),
    Pair { documents: usize, pair: Prf },
    Choice { documents: usize, choice: ChoiceScore },
}

fn clusters_by_key(corpus: &Corpus) -> HashMap<String, Vec<Cluster>> {
    corpus.documents.iter().map(|d| (d.doc_key.clone(), d.clusters.clone())).collect()
}

pub fn score(a: &ScoreArgs) -> Result<()> {
    let profile_or = |name: &str| match &a.profile {
        Some(p) => load_profile(p),
        None => Ok(jointcoref::DatasetProfile::builtin(name).expect("builtin")),
    };
    let report = match a.task {
        Task::Coref => {
            let spec = a.profile.as_deref().ok_or_else(|| data_error("--profile is required for coreference scoring"))?;
            let profile = load_profile(spec)?;
            let gold = read_corpus(&a.gold, Format::resolve(a.format, &a.gold), &profile, Split::Dev)?;
            let pred = read_corpus(&a.pred, Format::resolve(a.format, &a.pred), &profile, Split::Dev)?;
            let opts = ScoreOptions { split_singletons: a.split_singletons };
            ScoreReport::Coref(score_corpus(&gold, &pred.documents, opts))
        }
        Task::Pair => {
            let tasks = read_pair_tasks(&a.gold)?;
            let pred = read_corpus(&a.pred, Format::resolve(a.format, &a.pred), &profile_or("gap")?, Split::Dev)?;
            ScoreReport::Pair { documents: tasks.len(), pair: pair_f1(&tasks, &clusters_by_key(&pred))? }
        }
        Task::Choice => {
            let tasks = read_choice_tasks(&a.gold)?;
            let pred = read_corpus(&a.pred, Format::resolve(a.format, &a.pred), &profile_or("wsc")?, Split::Dev)?;
            ScoreReport::Choice { documents: tasks.len(), choice: choice_accuracy(&tasks, &clusters_by_key(&pred))? }
        }
    };
    if let Some(path) = &a.json_out {
        write_text(path, &serde_json::to_string_pretty(&report)?)?;
    }
    if a.json {
        print_json(&report)
    } else {
        print!("{}", render_score(&report));
        Ok(())
    }
}

fn prf_row(name: &str, p: &Prf) -> String {
    format!("{name:<14}{:>10.4}{:>10.4}{:>10.4}\n", p.recall, p.precision, p.f1)
}

/// Plain-text table; every number is the JSON value rounded to four decimals.
pub fn render_score(report: &ScoreReport) -> String {
    let mut out = format!("{:<14}{:>10}{:>10}{:>10}\n", "metric", "recall", "precision", "f1");
    match report {
        ScoreReport::Coref(r) => {
            out += &prf_row("muc", &r.muc);
            out += &prf_row("b_cubed", &r.b_cubed);
            out += &prf_row("ceaf_e", &r.ceaf_e);
            out += &prf_row("mention", &r.mention);
            out += &format!("{:<14}{:>30.4}\n", "conll_f1", r.conll_f1);
            if let Some(s) = &r.singleton_split {
                out += &prf_row("singleton", &s.singleton);
                out += &format!("{:<14}{:>30.4}\n", "non_singleton", s.non_singleton_conll_f1);
                if s.no_gold_singletons {
                    out += "note: gold has no singletons; singleton scores are undefined (reported as 0)\n";
                }
            }
            if r.predicted_singletons_stripped {
                out += "note: predicted singletons were removed (profile does not annotate them)\n";
            }
            if !r.missing_predictions.is_empty() {
                out += &format!("note: {} gold documents had no prediction\n", r.missing_predictions.len());
            }
        }
        ScoreReport::Pair { pair, .. } => out += &prf_row("pair", pair),
        ScoreReport::Choice { choice, .. } => {
            out += &format!("{:<14}{:>30.4}\n", "accuracy", choice.accuracy);
            out += &format!("({} of {} correct)\n", choice.correct, choice.total);
        }
    }
    out
}

// ---------------------------------------------------------------- report

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory of run JSON files, one per trained model.
    #[arg(long)]
    pub runs: PathBuf,
    /// Comma-separated dataset columns (default: every dataset seen, in benchmark order).
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

pub fn report(a: &ReportArgs) -> Result<()> {
    let runs = load_runs(&a.runs)?;
    if runs.is_empty() {
        return Err(data_error(format!("no run files in {}", a.runs.display())));
    }
    let table: BenchmarkTable = build_table(&runs, a.columns.clone());
    if let Some(path) = &a.json_out {
        write_text(path, &serde_json::to_string_pretty(&table)?)?;
    }
    if a.json {
        print_json(&table)
    } else {
        print!("{}", table.render_text());
        Ok(())
    }
}

// ---------------------------------------------------------------- augment

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Training corpus to augment.
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Number of pseudo-singletons to add across the whole corpus.
    #[arg(long)]
    pub n: Option<usize>,
    /// Size the plan for joint rather than single-dataset training when `--n` is absent.
    #[arg(long)]
    pub joint: bool,
    /// Trained mention detector; otherwise one is trained with `--config`.
    #[arg(long, conflicts_with = "config")]
    pub detector: Option<PathBuf>,
    /// Detector training config (`[model]` and `[train]` sections).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Apply this existing plan instead of building one.
    #[arg(long, conflicts_with_all = ["detector", "config", "n"])]
    pub from_plan: Option<PathBuf>,
    /// Where to write the plan (jsonlines).
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Write the augmented corpus here.
    #[arg(long)]
    pub apply: Option<PathBuf>,
    /// Save the detector trained from `--config`.
    #[arg(long)]
    pub save_detector: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn augment(a: &AugmentArgs) -> Result<()> {
    let mut rec = Recorder::start("augment");
    let corpus = a.corpus.load()?;
    rec.input(&a.corpus.input);
    let plan: AugmentPlan = if let Some(p) = &a.from_plan {
        rec.input(p);
        rec.config(&serde_json::json!({ "from_plan": p }))?;
        read_plan(p)?
    } else {
        let total_n = a.n.unwrap_or_else(|| mixer::default_pseudo_singletons(a.joint));
        let detector = if let Some(path) = &a.detector {
            rec.input(path);
            let ck = Checkpoint::load(path).map_err(|e| data_error(format!("{}: {e}", path.display())))?;
            rec.config(&serde_json::json!({ "n": total_n, "detector_hash": ck.config_hash }))?;
            ck.model
        } else {
            let cfg_path = a.config.as_ref().ok_or_else(|| data_error("either --detector or --config is required"))?;
            rec.input(cfg_path);
            let file: TrainFile = read_config(cfg_path)?;
            file.model.validate().map_err(|e| data_error(e.to_string()))?;
            file.train.validate().map_err(|e| data_error(e.to_string()))?;
            let train_corpus = Corpus { split: Split::Train, ..corpus.clone() };
            let outcome = train_mention_detector(&train_corpus, file.model, &file.train, &[])?;
            if let Some(path) = &a.save_detector {
                save_outcome(&outcome, &file.train, path, None, &mut rec)?;
            }
            rec.config(&serde_json::json!({ "n": total_n, "model": file.model, "train": file.train }))?;
            rec.seed("model", file.model.seed);
            rec.seed("train", file.train.seed);
            outcome.best
        };
        build_plan(&harvest_scores(&corpus, &detector), total_n)
    };
    if plan.is_short() {
        crate::diagnostic(
            "warning",
            &format!("only {} of {} requested pseudo-singletons were available", plan.len(), plan.total_n),
        );
    }
    let primary = match (&a.plan, &a.apply) {
        (None, None) => return Err(data_error("nothing to write: pass --plan and/or --apply")),
        (Some(p), _) => p.clone(),
        (None, Some(p)) => p.clone(),
    };
    if let Some(p) = &a.plan {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        write_plan(&plan, p)?;
        rec.output(p);
    }
    if let Some(p) = &a.apply {
        let augmented = apply_plan(&corpus, &plan)?;
        write_corpus(&augmented, p, Format::resolve(a.corpus.format, &a.corpus.input))?;
        rec.output(p);
    }
    rec.write(a.manifest.as_deref(), &primary)?;
    print_json(&serde_json::json!({ "requested": plan.total_n, "planned": plan.len() }))
}

// ---------------------------------------------------------------- mix-plan

#[derive(Debug, Args)]
pub struct MixPlanArgs {
    /// Mix config (`seed` and `[[corpora]]` with path, profile, cap).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Epoch plans as jsonlines, one epoch per line.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn mix_plan(a: &MixPlanArgs) -> Result<()> {
    let mut rec = Recorder::start("mix-plan");
    let mut cfg: MixConfig = read_config(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    rec.input(&a.config);
    let sets = load_refs(&a.config, &cfg.corpora, Split::Train, &mut rec)?;
    let spec = MixSpec::new(sets.iter().map(|(corpus, cap)| MixEntry { corpus, cap: *cap }).collect(), cfg.seed)?;
    let mut text = String::new();
    let mut summary = Vec::new();
    for epoch in 0..a.epochs {
        let plan = build_epoch(&spec, epoch);
        let counts: std::collections::BTreeMap<&str, usize> =
            sets.iter().map(|(c, _)| (c.profile.name.as_str(), plan.count_of(&c.profile.name))).collect();
        summary.push(serde_json::json!({ "epoch": epoch, "length": plan.len(), "counts": counts }));
        text.push_str(&serde_json::to_string(&plan)?);
        text.push('\n');
    }
    write_text(&a.out, &text)?;
    rec.output(&a.out);
    rec.config(&cfg)?;
    rec.seed("mix", cfg.seed);
    rec.write(a.manifest.as_deref(), &a.out)?;
    print_json(&summary)
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Optional generator config; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub docs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Leave size-1 clusters out of the annotation.
    #[arg(long)]
    pub no_singletons: bool,
    #[arg(long, default_value = "train")]
    pub split: Split,
    #[arg(long, value_enum, default_value = "jsonl")]
    pub format: Format,
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn synth_cmd(a: &SynthArgs) -> Result<()> {
    let mut rec = Recorder::start("synth");
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => {
            rec.input(p);
            read_config(p)?
        }
        None => SynthConfig::default(),
    };
    if let Some(d) = a.docs {
        cfg.docs = d;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if a.no_singletons {
        cfg.annotate_singletons = false;
        if cfg.dataset_tag == "synthetic" {
            cfg.dataset_tag = synth::profile(false).name;
        }
    }
    let corpus = synth::generate(&cfg, a.split);
    write_corpus(&corpus, &a.out, a.format)?;
    let profile_path = a.out.with_extension("profile.json");
    write_text(&profile_path, &serde_json::to_string_pretty(&corpus.profile)?)?;
    rec.config(&cfg)?;
    rec.seed("synth", cfg.seed);
    rec.output(&a.out);
    rec.output(&profile_path);
    rec.write(a.manifest.as_deref(), &a.out)?;
    eprintln!("wrote {} documents; profile at {}", corpus.len(), profile_path.display());
    Ok(())
}
