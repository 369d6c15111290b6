//! Unsupervised word segmentation and lexicon learning for speech feature
//! sequences.
//!
//! The pipeline has four stages:
//!
//! 1. [`unit_segmenter`]: duration-penalised dynamic programming (DPDP) over
//!    frame features against a K-means [`codebook`], giving phone-like
//!    acoustic units.
//! 2. [`word_segmenter`]: DPDP over the unit-code sequence, scoring candidate
//!    words with the reconstruction loss of a recurrent [`autoencoder`].
//! 3. [`lexicon`]: mean-pooled acoustic word embeddings per word segment.
//! 4. [`lexicon`]: K-means over those embeddings, attaching a cluster id to
//!    every word token.
//!
//! [`evaluator`] scores the result with boundary F1, token F1 and normalised
//! edit distance, and [`pipeline`] ties the stages together on disk.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default) and plain iterators otherwise.
//! Results are identical either way.

pub mod autoencoder;
pub mod codebook;
pub mod corpus_io;
pub mod dp;
mod error;
pub mod evaluator;
pub mod lexicon;
pub mod matrix;
pub mod par;
pub mod pipeline;
pub mod synth;
pub mod unit_segmenter;
pub mod word_segmenter;

pub use error::{Error, Result};
pub use matrix::Matrix;
