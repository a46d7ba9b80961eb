//! Mini-batch training of the BiLSTM-CRF extractor and its checkpoint format.
//!
//! A checkpoint is a directory holding `manifest.json` (configuration,
//! tensor names and shapes, label names, metric history) and `params.bin`
//! (the magic `SEALPRM1` followed by every tensor as little-endian `f32`,
//! in manifest order).

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{bilou_to_spans, project_bilou, Bilou, Document, KeyphraseSpan, LABEL_COUNT};
use crate::crf::{crf_backward, viterbi, CrfParams, TransitionMask};
use crate::embed::{load_contextual_for, ContextualEmbeddings, EmbeddingTable};
use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::eval::{corpus_span_f1, EvalReport};
use crate::params::{ParamSet, Tensor};
use crate::postprocess::repair_bilou;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractorConfig {
    pub layer_output_sizes: Vec<usize>,
    pub label_count: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    #[serde(with = "infinite_as_null")]
    pub grad_clip_norm: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub mask_decoding: bool,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            layer_output_sizes: vec![96, 48, 24],
            label_count: LABEL_COUNT,
            learning_rate: 1e-3,
            max_epochs: 50,
            patience: 5,
            grad_clip_norm: 5.0,
            batch_size: 8,
            seed: 42,
            mask_decoding: true,
        }
    }
}

impl ExtractorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.label_count != LABEL_COUNT {
            return bad("label_count must be 5");
        }
        if self.layer_output_sizes.is_empty() || self.layer_output_sizes.iter().any(|&s| s == 0 || s % 2 != 0) {
            return bad("layer_output_sizes must be non-empty positive even numbers");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.max_epochs == 0 || self.patience == 0 || self.batch_size == 0 {
            return bad("max_epochs, patience and batch_size must be positive");
        }
        if self.grad_clip_norm.is_nan() || self.grad_clip_norm <= 0.0 {
            return bad("grad_clip_norm must be positive");
        }
        Ok(())
    }
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Encoder, CRF and decoding policy.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractorModel<T> {
    pub encoder: EncoderParams<T>,
    pub crf: CrfParams<T>,
    pub mask_decoding: bool,
}

impl<T: Scalar> ParamSet<T> for ExtractorModel<T> {
    fn tensors(&self) -> Vec<Tensor<'_, T>> {
        let mut t = self.encoder.tensors();
        t.extend(self.crf.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut t = self.encoder.tensors_mut();
        t.extend(self.crf.tensors_mut());
        t
    }
}

impl<T: Scalar> ExtractorModel<T> {
    pub fn new(input_dim: usize, config: &ExtractorConfig, rng: &mut impl rand::Rng) -> Result<Self> {
        config.validate()?;
        Ok(ExtractorModel {
            encoder: EncoderParams::random(input_dim, &config.layer_output_sizes, LABEL_COUNT, rng)?,
            crf: CrfParams::zeros(),
            mask_decoding: config.mask_decoding,
        })
    }

    pub fn zeros(input_dim: usize, config: &ExtractorConfig) -> Result<Self> {
        Ok(ExtractorModel {
            encoder: EncoderParams::zeros(input_dim, &config.layer_output_sizes, LABEL_COUNT)?,
            crf: CrfParams::zeros(),
            mask_decoding: config.mask_decoding,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn emissions(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        Ok(self.encoder.forward(x)?.0)
    }

    pub fn decode_mask(&self) -> TransitionMask {
        if self.mask_decoding {
            TransitionMask::bilou()
        } else {
            TransitionMask::unconstrained()
        }
    }

    /// Viterbi labels followed by BILOU repair. Empty input gives no labels.
    pub fn predict_labels(&self, x: ArrayView2<'_, T>) -> Result<Vec<Bilou>> {
        if x.nrows() == 0 {
            return Ok(Vec::new());
        }
        let emissions = self.emissions(x)?;
        let (labels, _) = viterbi(emissions.view(), &self.crf, &self.decode_mask())?;
        Ok(repair_bilou(&labels))
    }

    /// NLL of `labels` and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, x: ArrayView2<'_, T>, labels: &[Bilou]) -> Result<(T, ExtractorModel<T>)> {
        let (emissions, cache) = self.encoder.forward(x)?;
        let crf = crf_backward(emissions.view(), labels, &self.crf)?;
        let (encoder, _) = self.encoder.backward(&cache, crf.d_emissions.view())?;
        Ok((
            crf.nll,
            ExtractorModel {
                encoder,
                crf: crf.d_params,
                mask_decoding: self.mask_decoding,
            },
        ))
    }

    /// Untyped spans predicted for `doc` from its feature matrix.
    pub fn predict_spans(&self, doc: &Document, x: ArrayView2<'_, T>) -> Result<Vec<KeyphraseSpan>> {
        let labels = self.predict_labels(x)?;
        bilou_to_spans(doc, &labels)
    }
}

/// Where token features for a document come from.
#[derive(Clone, Debug)]
pub enum EmbeddingSource {
    Static(EmbeddingTable),
    /// Contextual matrices keyed by document id.
    Contextual(HashMap<String, ContextualEmbeddings>),
}

impl EmbeddingSource {
    /// Loads `<dir>/<doc-id>.cemb` for every document.
    pub fn contextual_from_dir<'a>(dir: &Path, docs: impl IntoIterator<Item = &'a Document>) -> Result<Self> {
        let mut map = HashMap::new();
        for doc in docs {
            let path = dir.join(format!("{}.cemb", doc.id));
            if !path.exists() {
                return Err(Error::MissingEmbeddings(doc.id.clone()));
            }
            map.insert(doc.id.clone(), load_contextual_for(&path, doc)?);
        }
        Ok(EmbeddingSource::Contextual(map))
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            EmbeddingSource::Static(t) => Some(t.dim()),
            EmbeddingSource::Contextual(m) => m.values().next().map(|e| e.dim()),
        }
    }

    pub fn features(&self, doc: &Document) -> Result<Array2<f32>> {
        match self {
            EmbeddingSource::Static(t) => Ok(t.lookup_sequence(&doc.tokens)),
            EmbeddingSource::Contextual(m) => {
                let e = m
                    .get(&doc.id)
                    .ok_or_else(|| Error::MissingEmbeddings(doc.id.clone()))?;
                e.check_document(doc)?;
                Ok(e.matrix.clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-document NLL over the epoch.
    pub train_nll: f64,
    pub dev_f1: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_dev_f1: f64,
}

struct Adam<T> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    step: i32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    fn new(model: &impl ParamSet<T>, lr: f64) -> Self {
        let zeros: Vec<Vec<T>> = model
            .tensors()
            .iter()
            .map(|t| vec![T::zero(); t.data.len()])
            .collect();
        Adam {
            lr: T::of(lr),
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    fn update<P: ParamSet<T>>(&mut self, params: &mut P, grads: &P) {
        self.step += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.step);
        let c2 = one - self.beta2.powi(self.step);
        let g_all = grads.tensors();
        for (k, p) in params.tensors_mut().into_iter().enumerate() {
            let g = g_all[k].data;
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (one - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (one - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

struct Prepared<T> {
    x: Array2<T>,
    labels: Vec<Bilou>,
}

fn prepare<T: Scalar>(docs: &[Document], source: &EmbeddingSource, with_labels: bool) -> Result<Vec<Prepared<T>>> {
    docs.iter()
        .map(|doc| {
            let x = source.features(doc)?.mapv(|v| T::of(v as f64));
            let labels = if with_labels { project_bilou(doc) } else { Vec::new() };
            Ok(Prepared { x, labels })
        })
        .collect()
}

/// Untyped extraction F1 of `model` on `docs`.
pub fn evaluate_extractor<T: Scalar>(
    model: &ExtractorModel<T>,
    docs: &[Document],
    source: &EmbeddingSource,
) -> Result<EvalReport> {
    let inputs = prepare::<T>(docs, source, false)?;
    evaluate_prepared(model, docs, &inputs)
}

fn evaluate_prepared<T: Scalar>(
    model: &ExtractorModel<T>,
    docs: &[Document],
    inputs: &[Prepared<T>],
) -> Result<EvalReport> {
    let preds: Vec<Vec<KeyphraseSpan>> = docs
        .par_iter()
        .zip(inputs.par_iter())
        .map(|(doc, p)| model.predict_spans(doc, p.x.view()))
        .collect::<Result<_>>()?;
    Ok(corpus_span_f1(
        docs.iter()
            .zip(&preds)
            .map(|(d, p)| (d.gold_spans.as_slice(), p.as_slice())),
        false,
    ))
}

/// Trains an extractor with Adam, clipping, and early stopping on dev F1.
///
/// When `dev_docs` is empty the lowest training NLL selects the kept epoch.
/// Documents without tokens are skipped.
pub fn train_extractor<T: Scalar>(
    train_docs: &[Document],
    dev_docs: &[Document],
    source: &EmbeddingSource,
    config: &ExtractorConfig,
) -> Result<(ExtractorModel<T>, TrainingHistory)> {
    config.validate()?;
    let train_docs: Vec<Document> = train_docs.iter().filter(|d| !d.tokens.is_empty()).cloned().collect();
    if train_docs.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let train = prepare::<T>(&train_docs, source, true)?;
    let dev = prepare::<T>(dev_docs, source, false)?;
    let input_dim = train[0].x.ncols();

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut model = ExtractorModel::<T>::new(input_dim, config, &mut init_rng)?;
    let mut adam = Adam::new(&model, config.learning_rate);

    let mut history = TrainingHistory::default();
    let mut best = model.clone();
    let mut best_score = f64::NEG_INFINITY;
    let mut stale = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(config.batch_size) {
            let results: Vec<Result<(T, ExtractorModel<T>)>> = batch
                .par_iter()
                .map(|&i| model.loss_and_grad(train[i].x.view(), &train[i].labels))
                .collect();
            let mut grad = ExtractorModel::zeros(input_dim, config)?;
            for (r, &i) in results.into_iter().zip(batch) {
                let (loss, g) = r?;
                let loss = loss.to_f64_lossy();
                if !loss.is_finite() || !g.all_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        doc_id: train_docs[i].id.clone(),
                    });
                }
                epoch_loss += loss;
                grad.add_assign_from(&g);
            }
            let norm = grad.squared_norm().to_f64_lossy().sqrt();
            if config.grad_clip_norm.is_finite() && norm > config.grad_clip_norm {
                grad.scale(T::of(config.grad_clip_norm / norm));
            }
            adam.update(&mut model, &grad);
        }
        let train_nll = epoch_loss / train.len() as f64;
        let dev_f1 = if dev.is_empty() {
            0.0
        } else {
            evaluate_prepared(&model, dev_docs, &dev)?.f1
        };
        let score = if dev.is_empty() { -train_nll } else { dev_f1 };
        log::info!("epoch {epoch}: train_nll {train_nll:.4} dev_f1 {dev_f1:.4}");
        history.epochs.push(EpochRecord {
            epoch,
            train_nll,
            dev_f1,
        });
        if score > best_score {
            best_score = score;
            best = model.clone();
            history.best_epoch = epoch;
            history.best_dev_f1 = dev_f1;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    Ok((best, history))
}

const CHECKPOINT_FORMAT: &str = "seal-extractor";
const PARAMS_MAGIC: &[u8; 8] = b"SEALPRM1";

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TensorSpec {
    name: String,
    shape: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    input_dim: usize,
    labels: Vec<String>,
    config: ExtractorConfig,
    tensors: Vec<TensorSpec>,
    #[serde(default)]
    history: TrainingHistory,
}

/// A loaded checkpoint.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: ExtractorModel<f32>,
    pub config: ExtractorConfig,
    pub history: TrainingHistory,
}

pub fn save_checkpoint(
    model: &ExtractorModel<f32>,
    config: &ExtractorConfig,
    history: &TrainingHistory,
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut config = config.clone();
    config.mask_decoding = model.mask_decoding;
    config.layer_output_sizes = model.encoder.layer_output_sizes();
    let tensors = model.tensors();
    let manifest = Manifest {
        format: CHECKPOINT_FORMAT.into(),
        version: 1,
        input_dim: model.input_dim(),
        labels: Bilou::ALL.iter().map(|l| l.as_str().to_string()).collect(),
        config,
        tensors: tensors
            .iter()
            .map(|t| TensorSpec {
                name: t.name.clone(),
                shape: t.shape.clone(),
            })
            .collect(),
        history: history.clone(),
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;

    let total: usize = tensors.iter().map(|t| t.data.len()).sum();
    let mut bytes = Vec::with_capacity(PARAMS_MAGIC.len() + 4 * total);
    bytes.extend_from_slice(PARAMS_MAGIC);
    for t in &tensors {
        for v in t.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let path = dir.join("params.bin");
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let path = dir.join("manifest.json");
    let raw = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_slice(&raw)
        .map_err(|e| Error::CorruptCheckpoint(format!("manifest: {e}")))?;
    if manifest.format != CHECKPOINT_FORMAT {
        return Err(Error::CorruptCheckpoint(format!(
            "unexpected format {:?}",
            manifest.format
        )));
    }
    let expected_labels: Vec<String> = Bilou::ALL.iter().map(|l| l.as_str().to_string()).collect();
    if manifest.labels != expected_labels {
        return Err(Error::CorruptCheckpoint(format!("unexpected labels {:?}", manifest.labels)));
    }
    let mut model = ExtractorModel::<f32>::zeros(manifest.input_dim, &manifest.config)
        .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    {
        let own = model.tensors();
        if own.len() != manifest.tensors.len()
            || own
                .iter()
                .zip(&manifest.tensors)
                .any(|(a, b)| a.name != b.name || a.shape != b.shape)
        {
            return Err(Error::CorruptCheckpoint(
                "tensor list does not match the declared architecture".into(),
            ));
        }
    }
    let declared: usize = manifest
        .tensors
        .iter()
        .map(|t| t.shape.iter().product::<usize>())
        .sum();

    let path = dir.join("params.bin");
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if bytes.len() < PARAMS_MAGIC.len() || &bytes[..PARAMS_MAGIC.len()] != PARAMS_MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic in params.bin".into()));
    }
    let payload = &bytes[PARAMS_MAGIC.len()..];
    if payload.len() != 4 * declared {
        return Err(Error::CorruptCheckpoint(format!(
            "params.bin holds {} bytes, manifest declares {} values",
            payload.len(),
            declared
        )));
    }
    let mut values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    for t in model.tensors_mut() {
        for (slot, v) in t.iter_mut().zip(values.by_ref()) {
            *slot = v;
        }
    }
    model.mask_decoding = manifest.config.mask_decoding;
    Ok(Checkpoint {
        model,
        config: manifest.config,
        history: manifest.history,
    })
}
