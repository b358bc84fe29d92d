//! Experiment framework for multilingual binary hate-speech classification.
//!
//! The crate is organised along the pipeline:
//!
//! * [`corpus`] unifies heterogeneous labelled sources into canonical
//!   [`corpus::Record`]s (label unification, transliteration, cleaning).
//! * [`embeddings`] maps text to vectors (sentence, token or raw-token
//!   granularity) with a deterministic offline mock and an on-disk cache.
//! * [`models`] trains the three classifier families on top of the small
//!   reverse-mode autodiff engine in [`nn`].
//! * [`scenarios`] builds stratified splits and runs the monolingual,
//!   multilingual and language-family protocols, writing run manifests.
//! * [`evaluation`] computes class-weighted F1 and renders comparison tables.
//! * [`cli`] wires everything into the `hatebench` binary.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod embeddings;
pub mod evaluation;
pub mod lang;
pub mod models;
pub mod nn;
pub mod scenarios;
pub mod seed;

pub use corpus::{Label, Record, Split};
pub use lang::Language;
