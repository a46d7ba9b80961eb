use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Result;
use clap::{Parser, Subcommand};
use seal::commands;
use seal_core::eval::Protocol;

#[derive(Parser)]
#[command(name = "seal", version, about = "Keyphrase extraction and classification for scientific abstracts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize a BRAT corpus and cache tokens with BILOU labels.
    Preprocess {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the BiLSTM-CRF extractor.
    TrainExtract {
        #[arg(long)]
        config: PathBuf,
        /// Override a config entry, e.g. `--set max_epochs=10`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Train the random-forest keyphrase classifier.
    TrainClassify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Annotate text from a file or stdin, or a directory of documents.
    Tag {
        #[arg(long, required_unless_present = "gold_spans")]
        model: Option<PathBuf>,
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        /// Table for classifier features; defaults to `--embeddings`.
        #[arg(long)]
        class_embeddings: Option<PathBuf>,
        #[arg(long, conflicts_with = "input_dir")]
        input: Option<PathBuf>,
        #[arg(long, requires = "output_dir")]
        input_dir: Option<PathBuf>,
        #[arg(long, requires = "input_dir")]
        output_dir: Option<PathBuf>,
        /// Classify the gold spans of `--input-dir` instead of extracting.
        #[arg(long, requires = "input_dir")]
        gold_spans: bool,
    },
    /// Score predicted BRAT files against gold.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        protocol: Protocol,
        #[arg(long)]
        json: bool,
    },
    /// Serve the annotation API and demo page.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        class_embeddings: Option<PathBuf>,
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

fn run(cli: Cli) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Preprocess { data_dir, out: dest } => {
            for s in commands::preprocess(&data_dir, &dest)? {
                writeln!(
                    out,
                    "{}: {} documents, {} tokens, {} keyphrases",
                    s.name, s.documents, s.tokens, s.keyphrases
                )?;
            }
        }
        Command::TrainExtract { config, overrides } => commands::train_extract(&config, &overrides, &mut out)?,
        Command::TrainClassify { config, overrides } => commands::train_classify(&config, &overrides, &mut out)?,
        Command::Tag {
            model,
            classifier,
            embeddings,
            class_embeddings,
            input,
            input_dir,
            output_dir,
            gold_spans,
        } => {
            let annotator = match &model {
                Some(m) => Some(commands::load_annotator(m, &classifier, &embeddings, class_embeddings.as_deref())?),
                None => None,
            };
            match (input_dir, output_dir) {
                (Some(i), Some(o)) => {
                    let span_classifier = match &annotator {
                        Some(a) => a.classifier().clone(),
                        None => commands::load_classifier(
                            &classifier,
                            class_embeddings.as_deref().unwrap_or(&embeddings),
                        )?,
                    };
                    let n = commands::tag_directory(annotator.as_ref(), &span_classifier, &i, &o, gold_spans)?;
                    writeln!(out, "tagged {n} documents into {}", o.display())?;
                }
                _ => {
                    let annotator = annotator.expect("clap requires --model without --gold-spans");
                    let text = commands::read_input(input.as_deref())?;
                    let result = annotator.annotate(&text)?;
                    serde_json::to_writer(&mut out, &result)?;
                    writeln!(out)?;
                }
            }
        }
        Command::Eval {
            gold,
            pred,
            protocol,
            json,
        } => {
            let report = commands::evaluate(&gold, &pred, protocol)?;
            if json {
                serde_json::to_writer_pretty(&mut out, &report)?;
                writeln!(out)?;
            } else {
                writeln!(out, "{report}")?;
            }
        }
        Command::Serve {
            model,
            classifier,
            embeddings,
            class_embeddings,
            port,
            host,
        } => {
            let annotator =
                commands::load_annotator(&model, &classifier, &embeddings, class_embeddings.as_deref())?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(seal::service::serve(Arc::new(annotator), &format!("{host}:{port}")))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
