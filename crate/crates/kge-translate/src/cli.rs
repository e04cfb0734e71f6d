//! Command-line front end: `train`, `eval` and `predict`.
//!
//! All output is line-oriented `key=value` text, except `predict`, which
//! prints `rank<TAB>entity<TAB>score` rows.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use kge_translate_core::kb::parse_triples;
use kge_translate_core::training::EpochStats;
use kge_translate_core::{
    predict_top_k, DissimilarityKind, EntityId, Hyperparams, ProgressSink, RelationId, Scorer,
    Split,
};

use crate::error::{Error, Result};
use crate::model_file::{load_model, save_model, SavedModel};
use crate::parallel::ParallelEvaluator;
use crate::triples_file::{load_dataset, parse_records};

#[derive(Debug, Parser)]
#[command(
    name = "kge-translate",
    version,
    about = "Translation embeddings for knowledge bases"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write the best validation snapshot.
    Train(TrainArgs),
    /// Rank a triple file against a saved model.
    Eval(EvalArgs),
    /// List the most plausible tails for a head and a label.
    Predict(PredictArgs),
}

/// `all` or a positive count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidSample(pub Option<usize>);

impl FromStr for ValidSample {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "all" {
            return Ok(ValidSample(None));
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("expected a positive integer or 'all', got {s:?}")),
            Ok(n) => Ok(ValidSample(Some(n))),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub valid: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Embedding dimension.
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub margin: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value = "l1", value_parser = parse_dissim)]
    pub dissim: DissimilarityKind,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 25)]
    pub eval_every: usize,
    /// Validation triples ranked at each evaluation (`all` for every one).
    #[arg(long, default_value = "1000")]
    pub valid_sample: ValidSample,
    /// Evaluation threads; 0 uses every core. Training itself is sequential.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Where to write the model.
    #[arg(long)]
    pub out: PathBuf,
    /// Write progress lines here instead of standard output.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Triple file to rank; names must exist in the model's dictionaries.
    #[arg(long, alias = "test")]
    pub triples: PathBuf,
    #[arg(long, default_value = "translate", value_parser = parse_scorer)]
    pub scorer: Scorer,
    /// Fail unless the model has this dimension.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub head: String,
    #[arg(long)]
    pub label: String,
    #[arg(long, default_value_t = 10)]
    pub top_n: usize,
    #[arg(long, default_value = "translate", value_parser = parse_scorer)]
    pub scorer: Scorer,
}

fn parse_dissim(s: &str) -> std::result::Result<DissimilarityKind, String> {
    s.parse()
        .map_err(|e: kge_translate_core::Error| e.to_string())
}

fn parse_scorer(s: &str) -> std::result::Result<Scorer, String> {
    s.parse()
        .map_err(|e: kge_translate_core::Error| e.to_string())
}

impl TrainArgs {
    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            k: self.k,
            gamma: self.margin,
            eta: self.lr,
            max_epochs: self.epochs,
            eval_every: self.eval_every,
            seed: self.seed,
            dissim: self.dissim,
            valid_sample: self.valid_sample.0,
        }
    }
}

/// Writes `epoch=<n> mean_loss=<float>` and
/// `epoch=<n> valid_mean_rank=<float> best=<bool>` lines.
pub struct LineProgress<W: Write> {
    out: W,
    error: Option<std::io::Error>,
}

impl<W: Write> LineProgress<W> {
    pub fn new(out: W) -> Self {
        LineProgress { out, error: None }
    }

    fn emit(&mut self, args: std::fmt::Arguments<'_>) {
        if self.error.is_none() {
            if let Err(e) = self.out.write_fmt(args).and_then(|()| self.out.flush()) {
                self.error = Some(e);
            }
        }
    }

    /// The first write error, if any.
    pub fn finish(self) -> std::io::Result<()> {
        self.error.map_or(Ok(()), Err)
    }
}

impl<W: Write> ProgressSink for LineProgress<W> {
    fn epoch(&mut self, epoch: usize, stats: &EpochStats) {
        self.emit(format_args!(
            "epoch={epoch} mean_loss={:.6}\n",
            stats.mean_loss
        ));
    }

    fn evaluation(&mut self, epoch: usize, valid_mean_rank: f64, best: bool) {
        self.emit(format_args!(
            "epoch={epoch} valid_mean_rank={valid_mean_rank:.3} best={best}\n"
        ));
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(&args, out),
        Command::Eval(args) => cmd_eval(&args, out),
        Command::Predict(args) => cmd_predict(&args, out),
    }
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<output>", e)
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let hp = args.hyperparams();
    hp.validate()?;
    let kb = load_dataset(&args.train, &args.valid, &args.test)?;
    let (n_train, n_valid, n_test) = kb.counts();
    writeln!(
        out,
        "entities={} relations={} train={n_train} valid={n_valid} test={n_test}",
        kb.num_entities(),
        kb.num_relations()
    )
    .map_err(stdout_err)?;
    let ranker = ParallelEvaluator::new(args.threads)?;

    let (model, report) = match &args.log {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut sink = LineProgress::new(BufWriter::new(file));
            let trained = kge_translate_core::train(&kb, &hp, &ranker, &mut sink)?;
            sink.finish().map_err(|e| Error::io(path, e))?;
            trained
        }
        None => {
            let mut sink = LineProgress::new(&mut *out);
            let trained = kge_translate_core::train(&kb, &hp, &ranker, &mut sink)?;
            sink.finish().map_err(stdout_err)?;
            trained
        }
    };
    save_model(&model, kb.entities(), kb.relations(), &args.out)?;
    writeln!(
        out,
        "best_epoch={} best_valid_mean_rank={:.3} epochs={} triples_visited={} repaired_rows={} model={}",
        report.best_epoch,
        report.best_valid_mean_rank,
        report.epoch_losses.len(),
        report.triples_visited,
        report.repaired_rows,
        args.out.display()
    )
    .map_err(stdout_err)?;
    Ok(())
}

/// Reads a triple file and indexes it with the dictionaries stored in a model.
pub fn read_triples_for(
    saved: &SavedModel,
    path: &Path,
) -> Result<Vec<kge_translate_core::Triple>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let in_file = |source| Error::InFile {
        path: path.to_path_buf(),
        source,
    };
    let records = parse_records(&text).map_err(in_file)?;
    parse_triples(&records, &saved.entities, &saved.relations, Split::Test).map_err(in_file)
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let saved = load_model(&args.model)?;
    if let Some(k) = args.k {
        if k != saved.model.k() {
            return Err(Error::Usage(format!(
                "dimension mismatch: expected k={k}, model file has k={}",
                saved.model.k()
            )));
        }
    }
    let triples = read_triples_for(&saved, &args.triples)?;
    let evaluator = ParallelEvaluator::new(args.threads)?;
    let metrics = evaluator.evaluate(&saved.model, &triples, args.scorer)?;
    write!(out, "{metrics}").map_err(stdout_err)?;
    Ok(())
}

pub fn cmd_predict(args: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let saved = load_model(&args.model)?;
    let head = saved
        .entities
        .id(&args.head)
        .ok_or_else(|| Error::Usage(format!("unknown entity {}", args.head)))?;
    let label = saved
        .relations
        .id(&args.label)
        .ok_or_else(|| Error::Usage(format!("unknown relation {}", args.label)))?;
    let top = predict_top_k(
        &saved.model,
        EntityId(head),
        RelationId(label),
        args.top_n,
        args.scorer,
    )?;
    for (rank, (entity, score)) in top.iter().enumerate() {
        let name = saved.entities.name(entity.0).unwrap_or("?");
        writeln!(out, "{}\t{name}\t{:.6}", rank + 1, score.value()).map_err(stdout_err)?;
    }
    Ok(())
}
