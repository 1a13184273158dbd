use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use slu_core::corpus::{load_dataset, synth_generate, write_dataset};
use slu_core::eval::{report, DatasetResult, ReportRow};
use slu_core::exec::Exec;
use slu_core::model::{load_checkpoint, save_checkpoint, score_predictions, train, Prediction, TrainConfig};
use slu_service::{AppState, ServiceConfig};

/// Joint intent detection and slot filling: training, evaluation, tagging and serving.
#[derive(Parser)]
#[command(name = "slu", version)]
struct Cli {
    /// Line-delimited JSON on stdout, and JSON errors on stderr.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint plus per-epoch metrics.
    Train(TrainArgs),
    /// Score a model (or a prediction directory) against a labelled dataset.
    Eval(EvalArgs),
    /// Tag one sentence.
    Tag(TagArgs),
    /// Write the synthetic corpus.
    Synth(SynthArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory with seq.in, seq.out and label.
    #[arg(long)]
    data: PathBuf,
    /// Development split; enables best-epoch selection and early stopping.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// key = value settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra settings as key=value; applied after --config.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    /// Metrics file; defaults to the checkpoint path plus `.metrics.jsonl`.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Compute minibatch gradients on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, conflicts_with = "pred", required_unless_present = "pred")]
    model: Option<PathBuf>,
    /// Directory of predictions in dataset format, scored instead of running a model.
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Also write the report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Row name in the report.
    #[arg(long, default_value = "Our Model")]
    name: String,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct TagArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    text: String,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// Service settings file; flags and SLU_* variables override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    data: Option<PathBuf>,
}

fn exec(sequential: bool) -> Exec {
    if sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

fn print_line(json_mode: bool, value: serde_json::Value, text: impl FnOnce() -> String) {
    if json_mode {
        println!("{value}");
    } else {
        println!("{}", text());
    }
}

fn run_train(a: TrainArgs, json_mode: bool) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            TrainConfig::from_key_values(&text)?
        }
        None => TrainConfig::default(),
    };
    for o in &a.overrides {
        let (k, v) = o.split_once('=').with_context(|| format!("--set {o:?}: expected KEY=VALUE"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(e) = a.epochs {
        cfg.set("epochs", &e.to_string())?;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let data = load_dataset(&a.data)?;
    let dev = a.dev.as_ref().map(load_dataset).transpose()?.unwrap_or_default();
    let metrics_path = a.metrics.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".metrics.jsonl");
        PathBuf::from(p)
    });
    let mut log = BufWriter::new(
        File::create(&metrics_path).with_context(|| format!("creating {}", metrics_path.display()))?,
    );
    let mut log_error = None;
    let outcome = train(&data, &dev, &cfg, exec(a.sequential), |m| {
        let line = serde_json::to_string(m).expect("metrics serialise");
        if let Err(e) = writeln!(log, "{line}") {
            log_error.get_or_insert(e);
        }
        if json_mode {
            println!("{line}");
        } else {
            let dev = match (m.dev_f1, m.dev_intent_acc) {
                (Some(f), Some(a)) => format!("  dev slot F1 {:.4}  intent acc {:.4}", f, a),
                _ => String::new(),
            };
            println!("epoch {:>3}  loss {:.4}{dev}", m.epoch, m.loss);
        }
    })?;
    if let Some(e) = log_error {
        return Err(e).context("writing metrics");
    }
    log.flush()?;
    save_checkpoint(&outcome.model, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    print_line(
        json_mode,
        json!({"checkpoint": a.out, "metrics": metrics_path, "best_epoch": outcome.best_epoch}),
        || format!("wrote {} (epoch {})", a.out.display(), outcome.best_epoch),
    );
    Ok(())
}

fn dataset_name(dir: &Path) -> String {
    dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "data".into())
}

fn run_eval(a: EvalArgs, json_mode: bool) -> Result<()> {
    let gold = load_dataset(&a.data)?;
    let result: DatasetResult = match (&a.model, &a.pred) {
        (Some(m), _) => load_checkpoint(m)?.evaluate(exec(a.sequential), &gold)?,
        (None, Some(p)) => {
            let pred: Vec<Prediction> = load_dataset(p)?
                .into_iter()
                .map(|e| Prediction { tokens: e.forms, intent: e.intent, intent_probs: Vec::new(), slots: e.slots })
                .collect();
            if pred.len() != gold.len() {
                bail!("{} predictions for {} gold sentences", pred.len(), gold.len());
            }
            score_predictions(&gold, &pred)?
        }
        (None, None) => unreachable!("clap requires --model or --pred"),
    };
    let name = dataset_name(&a.data);
    let table = report(&[&name], &[ReportRow { model: a.name.clone(), results: vec![Some(result)] }]);
    if let Some(path) = &a.report {
        std::fs::write(path, &table).with_context(|| format!("writing {}", path.display()))?;
    }
    print_line(
        json_mode,
        json!({"dataset": name, "model": a.name, "slot_f1": result.slot_f1, "intent_acc": result.intent_acc}),
        || table.trim_end().to_string(),
    );
    Ok(())
}

fn run_tag(a: TagArgs, json_mode: bool) -> Result<()> {
    let model = load_checkpoint(&a.model)?;
    let p = model.predict_text(&a.text)?;
    let pairs: Vec<String> = p.tokens.iter().zip(&p.slots).map(|(t, s)| format!("{t}/{s}")).collect();
    print_line(
        json_mode,
        json!({"intent": p.intent, "tokens": p.tokens, "slots": p.slots}),
        || format!("{}\n{}", p.intent, pairs.join(" ")),
    );
    Ok(())
}

fn run_synth(a: SynthArgs, json_mode: bool) -> Result<()> {
    let data = synth_generate(a.seed, a.n);
    write_dataset(&a.out, &data)?;
    print_line(json_mode, json!({"out": a.out, "examples": data.len()}), || {
        format!("wrote {} examples to {}", data.len(), a.out.display())
    });
    Ok(())
}

fn run_serve(a: ServeArgs, json_mode: bool) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    cfg.apply_env(std::env::vars())?;
    if let Some(m) = a.model {
        cfg.model = Some(m);
    }
    if let Some(p) = a.port {
        cfg.port = p;
    }
    if let Some(d) = a.data {
        cfg.data_dir = d;
    }
    let (host, port) = (cfg.host.clone(), cfg.port);
    let state = AppState::from_config(cfg)?;
    print_line(json_mode, json!({"listening": format!("{host}:{port}")}), || {
        format!("listening on http://{host}:{port}")
    });
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(slu_service::serve(state))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json_mode = cli.json;
    let result = match cli.command {
        Command::Train(a) => run_train(a, json_mode),
        Command::Eval(a) => run_eval(a, json_mode),
        Command::Tag(a) => run_tag(a, json_mode),
        Command::Synth(a) => run_synth(a, json_mode),
        Command::Serve(a) => run_serve(a, json_mode),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if json_mode {
                eprintln!("{}", json!({"error": format!("{e:#}")}));
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::FAILURE
        }
    }
}
