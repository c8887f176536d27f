//! `jointcoref` — convert, check, train, predict with and score coreference corpora.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error. Diagnostics go
//! to stderr as one JSON object per line.

mod commands;
mod io;
mod manifest;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use jointcoref::augment::AugmentError;
use jointcoref::corpus::CorpusError;
use jointcoref::formats::FormatError;
use jointcoref::learning::LearningError;
use jointcoref::metrics::MetricsError;
use jointcoref::mixer::MixError;

use commands::*;

#[derive(Debug, Parser)]
#[command(name = "jointcoref", version, about = "Coreference corpora, training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a corpus between CoNLL and jsonlines.
    Convert(ConvertArgs),
    /// Check a corpus against its profile; exits 2 on violations.
    Validate(CorpusArgs),
    /// Dataset statistics.
    Stats(CorpusArgs),
    /// Add pseudo-singletons from a mention detector.
    Augment(AugmentArgs),
    /// Train a model on a mix of corpora.
    Train(TrainArgs),
    /// Write predicted clusters for a corpus.
    Predict(PredictArgs),
    /// Score predictions against gold.
    Score(ScoreArgs),
    /// Benchmark table with macro averages over a directory of runs.
    Report(ReportArgs),
    /// Per-epoch sampling plans for a corpus mix.
    MixPlan(MixPlanArgs),
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
}

const USAGE: u8 = 1;
const DATA: u8 = 2;
const INTERNAL: u8 = 3;

pub(crate) fn diagnostic(level: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ "level": level, "message": message }));
}

fn report_error(code: u8, err: &anyhow::Error) {
    let kind = match code {
        USAGE => "usage",
        DATA => "data",
        _ => "internal",
    };
    let causes: Vec<String> = err.chain().skip(1).map(ToString::to_string).collect();
    eprintln!(
        "{}",
        serde_json::json!({ "level": "error", "kind": kind, "exit_code": code, "message": err.to_string(), "causes": causes })
    );
}

/// Bad input or configuration is a data error; anything else is internal.
fn classify(err: &anyhow::Error) -> u8 {
    let data = err.chain().any(|e| {
        if let Some(l) = e.downcast_ref::<LearningError>() {
            return !matches!(l, LearningError::NonFinite(_) | LearningError::Engine(_));
        }
        e.is::<io::DataError>()
            || e.is::<FormatError>()
            || e.is::<CorpusError>()
            || e.is::<AugmentError>()
            || e.is::<MixError>()
            || e.is::<MetricsError>()
            || e.is::<std::io::Error>()
    });
    if data {
        DATA
    } else {
        INTERNAL
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Convert(a) => convert(a),
        Command::Validate(a) => validate(a),
        Command::Stats(a) => stats(a),
        Command::Augment(a) => augment(a),
        Command::Train(a) => train_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Score(a) => score(a),
        Command::Report(a) => report(a),
        Command::MixPlan(a) => mix_plan(a),
        Command::Synth(a) => synth_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error(USAGE, &anyhow::anyhow!(e.render().to_string().trim().to_string()));
            return ExitCode::from(USAGE);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = classify(&e);
            report_error(code, &e);
            ExitCode::from(code)
        }
    }
}
