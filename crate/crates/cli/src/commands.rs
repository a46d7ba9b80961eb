//! Implementations behind each `seal` subcommand.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use seal_core::classify::{build_training_set, train_forest, Forest};
use seal_core::corpus::{load_split, parse_brat, project_bilou, write_brat};
use seal_core::embed::load_table;
use seal_core::eval::{corpus_classification_given_gold, corpus_span_f1, EvalReport, Protocol};
use seal_core::train::{evaluate_extractor, load_checkpoint, save_checkpoint, train_extractor, EmbeddingSource};
use seal_core::{Annotator, Document, KeyphraseSpan, SpanClassifier, Token};

use crate::config::{classifier_config, classifier_pairs, extractor_config, extractor_pairs, log_resolved, KvConfig};

pub const SPLITS: [&str; 3] = ["train", "dev", "test"];

#[derive(Serialize)]
struct CachedDocument<'a> {
    id: &'a str,
    tokens: &'a [Token],
    labels: Vec<&'static str>,
    spans: &'a [KeyphraseSpan],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitSummary {
    pub name: String,
    pub documents: usize,
    pub tokens: usize,
    pub keyphrases: usize,
}

/// Splits under `data_dir`: the `train`/`dev`/`test` subdirectories that
/// exist, or the directory itself when it has none.
pub fn corpus_splits(data_dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    if !data_dir.is_dir() {
        bail!("{} is not a directory", data_dir.display());
    }
    let found: Vec<(String, PathBuf)> = SPLITS
        .iter()
        .map(|s| (s.to_string(), data_dir.join(s)))
        .filter(|(_, p)| p.is_dir())
        .collect();
    if found.is_empty() {
        Ok(vec![("all".to_string(), data_dir.to_path_buf())])
    } else {
        Ok(found)
    }
}

/// Writes `<out>/<split>.jsonl` with tokens and BILOU labels per document.
pub fn preprocess(data_dir: &Path, out: &Path) -> Result<Vec<SplitSummary>> {
    let mut summaries = Vec::new();
    let mut loaded = Vec::new();
    for (name, dir) in corpus_splits(data_dir)? {
        let docs = load_split(&dir).with_context(|| format!("loading split {name}"))?;
        loaded.push((name, docs));
    }
    if loaded.iter().all(|(_, d)| d.is_empty()) {
        bail!("no documents found under {}", data_dir.display());
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (name, docs) in loaded {
        let mut buf = Vec::new();
        for doc in &docs {
            let labels: Vec<&str> = project_bilou(doc).iter().map(|l| l.as_str()).collect();
            let cached = CachedDocument {
                id: &doc.id,
                tokens: &doc.tokens,
                labels,
                spans: &doc.gold_spans,
            };
            serde_json::to_writer(&mut buf, &cached)?;
            buf.push(b'\n');
        }
        let path = out.join(format!("{name}.jsonl"));
        fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
        summaries.push(SplitSummary {
            documents: docs.len(),
            tokens: docs.iter().map(|d| d.tokens.len()).sum(),
            keyphrases: docs.iter().map(|d| d.gold_spans.len()).sum(),
            name,
        });
    }
    Ok(summaries)
}

fn embedding_source(kv: &mut KvConfig, docs: &[&Document]) -> Result<(EmbeddingSource, String)> {
    match (kv.take_path("embeddings"), kv.take_path("contextual_dir")) {
        (Some(p), None) => {
            let table = load_table(&p).with_context(|| format!("loading embeddings {}", p.display()))?;
            Ok((EmbeddingSource::Static(table), p.display().to_string()))
        }
        (None, Some(dir)) => {
            let source = EmbeddingSource::contextual_from_dir(&dir, docs.iter().copied())
                .with_context(|| format!("loading contextual embeddings from {}", dir.display()))?;
            Ok((source, format!("contextual:{}", dir.display())))
        }
        (Some(_), Some(_)) => bail!("set only one of `embeddings` and `contextual_dir`"),
        (None, None) => bail!("config needs `embeddings` or `contextual_dir`"),
    }
}

/// Trains the extractor described by `config` and writes its checkpoint.
pub fn train_extract(config: &Path, overrides: &[String], out: &mut dyn Write) -> Result<()> {
    let mut kv = KvConfig::load(config)?;
    kv.apply_overrides(overrides)?;
    let train_dir = kv.require_path("train_dir")?;
    let dev_dir = kv.take_path("dev_dir");
    let test_dir = kv.take_path("test_dir");
    let output = kv.require_path("output")?;
    let train = load_split(&train_dir).with_context(|| format!("loading {}", train_dir.display()))?;
    let dev = match &dev_dir {
        Some(d) => load_split(d).with_context(|| format!("loading {}", d.display()))?,
        None => Vec::new(),
    };
    let test = match &test_dir {
        Some(d) => load_split(d).with_context(|| format!("loading {}", d.display()))?,
        None => Vec::new(),
    };
    let all: Vec<&Document> = train.iter().chain(&dev).chain(&test).collect();
    let (source, source_name) = embedding_source(&mut kv, &all)?;
    let ec = extractor_config(&mut kv)?;
    kv.finish()?;

    let mut pairs = vec![
        ("train_dir", train_dir.display().to_string()),
        ("dev_dir", dev_dir.as_ref().map_or("-".into(), |d| d.display().to_string())),
        ("test_dir", test_dir.as_ref().map_or("-".into(), |d| d.display().to_string())),
        ("embeddings", source_name),
        ("output", output.display().to_string()),
    ];
    pairs.extend(extractor_pairs(&ec));
    log_resolved("train-extract", &pairs);

    let (model, history) = train_extractor::<f32>(&train, &dev, &source, &ec)?;
    save_checkpoint(&model, &ec, &history, &output)?;
    writeln!(out, "epochs: {}", history.epochs.len())?;
    writeln!(out, "best_epoch: {}", history.best_epoch)?;
    if !dev.is_empty() {
        writeln!(out, "dev_f1: {:.4}", history.best_dev_f1)?;
    }
    if !test.is_empty() {
        let report = evaluate_extractor(&model, &test, &source)?;
        writeln!(out, "test_f1: {:.4}", report.f1)?;
    }
    writeln!(out, "checkpoint: {}", output.display())?;
    Ok(())
}

/// Trains the span classifier described by `config` and writes the forest.
pub fn train_classify(config: &Path, overrides: &[String], out: &mut dyn Write) -> Result<()> {
    let mut kv = KvConfig::load(config)?;
    kv.apply_overrides(overrides)?;
    let train_dir = kv.require_path("train_dir")?;
    let eval_dir = kv.take_path("eval_dir");
    let embeddings = kv.require_path("embeddings")?;
    let output = kv.require_path("output")?;
    let cc = classifier_config(&mut kv)?;
    kv.finish()?;

    let mut pairs = vec![
        ("train_dir", train_dir.display().to_string()),
        ("eval_dir", eval_dir.as_ref().map_or("-".into(), |d| d.display().to_string())),
        ("embeddings", embeddings.display().to_string()),
        ("output", output.display().to_string()),
    ];
    pairs.extend(classifier_pairs(&cc));
    log_resolved("train-classify", &pairs);

    let train = load_split(&train_dir).with_context(|| format!("loading {}", train_dir.display()))?;
    let table = load_table(&embeddings).with_context(|| format!("loading embeddings {}", embeddings.display()))?;
    let (x, y) = build_training_set(&train, &table)?;
    log::info!("training forest on {} token rows of width {}", x.nrows(), x.ncols());
    let forest = train_forest(x.view(), &y, &cc)?;
    forest.save(&output)?;
    writeln!(out, "trees: {}", forest.trees.len())?;
    writeln!(out, "rows: {}", x.nrows())?;
    if let Some(dir) = eval_dir {
        let docs = load_split(&dir).with_context(|| format!("loading {}", dir.display()))?;
        let classifier = SpanClassifier::new(forest, table)?;
        let report = classify_gold_report(&classifier, &docs)?;
        writeln!(out, "eval_f1: {:.4}", report.f1)?;
    }
    writeln!(out, "classifier: {}", output.display())?;
    Ok(())
}

/// Classifies the gold boundaries of `docs` and scores against their classes.
pub fn classify_gold_report(classifier: &SpanClassifier, docs: &[Document]) -> Result<EvalReport> {
    let mut preds = Vec::with_capacity(docs.len());
    for doc in docs {
        let mut spans = untyped(&doc.gold_spans);
        classifier.classify_with_rules(doc, &mut spans)?;
        preds.push(spans);
    }
    Ok(corpus_classification_given_gold(
        docs.iter()
            .zip(&preds)
            .map(|(d, p)| (d.gold_spans.as_slice(), p.as_slice())),
    )?)
}

fn untyped(spans: &[KeyphraseSpan]) -> Vec<KeyphraseSpan> {
    spans
        .iter()
        .map(|s| KeyphraseSpan {
            klass: None,
            ..s.clone()
        })
        .collect()
}

pub fn load_classifier(classifier: &Path, embeddings: &Path) -> Result<SpanClassifier> {
    let forest = Forest::load(classifier).with_context(|| format!("loading classifier {}", classifier.display()))?;
    let table = load_table(embeddings).with_context(|| format!("loading embeddings {}", embeddings.display()))?;
    Ok(SpanClassifier::new(forest, table)?)
}

/// Loads the extractor, forest and tables. `class_embeddings` defaults to `embeddings`.
pub fn load_annotator(
    model: &Path,
    classifier: &Path,
    embeddings: &Path,
    class_embeddings: Option<&Path>,
) -> Result<Annotator> {
    let checkpoint = load_checkpoint(model).with_context(|| format!("loading model {}", model.display()))?;
    let table = load_table(embeddings).with_context(|| format!("loading embeddings {}", embeddings.display()))?;
    let span_classifier = match class_embeddings {
        Some(p) => load_classifier(classifier, p)?,
        None => {
            let forest =
                Forest::load(classifier).with_context(|| format!("loading classifier {}", classifier.display()))?;
            SpanClassifier::new(forest, table.clone())?
        }
    };
    Ok(Annotator::new(checkpoint.model, table, span_classifier)?)
}

pub fn read_input(input: Option<&Path>) -> Result<String> {
    match input {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).context("reading stdin")?;
            Ok(s)
        }
    }
}

/// Annotates every document of `input_dir` into BRAT files under `output_dir`.
///
/// With `gold_spans`, existing boundaries are classified instead of extracted.
pub fn tag_directory(
    annotator: Option<&Annotator>,
    classifier: &SpanClassifier,
    input_dir: &Path,
    output_dir: &Path,
    gold_spans: bool,
) -> Result<usize> {
    let docs = load_split(input_dir).with_context(|| format!("loading {}", input_dir.display()))?;
    fs::create_dir_all(output_dir).with_context(|| format!("creating {}", output_dir.display()))?;
    for doc in &docs {
        let spans = if gold_spans {
            let mut s = untyped(&doc.gold_spans);
            classifier.classify_with_rules(doc, &mut s)?;
            s
        } else {
            let annotator = annotator.context("extraction needs --model")?;
            let mut s = annotator.annotate_document(doc)?;
            s.sort_by_key(|s| (s.start, s.end));
            for (k, span) in s.iter_mut().enumerate() {
                span.id = format!("T{}", k + 1);
            }
            s
        };
        let ann = output_dir.join(format!("{}.ann", doc.id));
        fs::write(&ann, write_brat(&spans)).with_context(|| format!("writing {}", ann.display()))?;
        let txt = output_dir.join(format!("{}.txt", doc.id));
        fs::write(&txt, &doc.text).with_context(|| format!("writing {}", txt.display()))?;
    }
    Ok(docs.len())
}

/// Scores `<pred>/<id>.ann` against every gold document.
pub fn evaluate(gold: &Path, pred: &Path, protocol: Protocol) -> Result<EvalReport> {
    let gold_docs = load_split(gold).with_context(|| format!("loading {}", gold.display()))?;
    if gold_docs.is_empty() {
        bail!("no gold documents in {}", gold.display());
    }
    if !pred.is_dir() {
        bail!("{} is not a directory", pred.display());
    }
    let mut preds = Vec::with_capacity(gold_docs.len());
    for doc in &gold_docs {
        let path = pred.join(format!("{}.ann", doc.id));
        let spans = if path.exists() {
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            parse_brat(&text, doc).with_context(|| format!("parsing {}", path.display()))?
        } else {
            log::warn!("no prediction file for {}; counting it as empty", doc.id);
            Vec::new()
        };
        preds.push(spans);
    }
    let pairs = gold_docs
        .iter()
        .zip(&preds)
        .map(|(d, p)| (d.gold_spans.as_slice(), p.as_slice()));
    Ok(match protocol {
        Protocol::Extraction => corpus_span_f1(pairs, false),
        Protocol::Typed => corpus_span_f1(pairs, true),
        Protocol::ClassificationGivenGold => corpus_classification_given_gold(pairs)?,
    })
}

