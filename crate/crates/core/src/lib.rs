//! Keyphrase extraction and classification for scientific abstracts.
//!
//! Extraction runs a stacked BiLSTM over token embeddings, projects to
//! BILOU emission scores and decodes with a linear-chain CRF. Each
//! extracted keyphrase is then classified as Task, Process or Material by
//! a random forest over `[prev; cur; next]` token embeddings, and refined
//! by abbreviation and chemical-formula rules.
//!
//! The encoder and CRF are generic over [`Scalar`]; runtime models use
//! `f32` and gradient checks use `f64`.

pub mod classify;
pub mod corpus;
pub mod crf;
pub mod embed;
pub mod encoder;
mod error;
pub mod eval;
pub mod params;
pub mod pipeline;
pub mod postprocess;
mod scalar;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
pub use scalar::{log_sum_exp, Scalar};

pub use corpus::{Bilou, Document, KeyClass, KeyphraseSpan, LabelSequence, Token};
pub use pipeline::{AnnotatedSpan, AnnotationResult, Annotator, SpanClassifier};

/// Runtime extractor.
pub type Extractor = train::ExtractorModel<f32>;
/// Double-precision extractor, used for gradient checks.
pub type Extractor64 = train::ExtractorModel<f64>;
pub type Encoder = encoder::EncoderParams<f32>;
pub type Encoder64 = encoder::EncoderParams<f64>;
pub type Crf = crf::CrfParams<f32>;
pub type Crf64 = crf::CrfParams<f64>;
