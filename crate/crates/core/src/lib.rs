//! Core library for probing political opinions of multilingual chat models.
//!
//! The pipeline: a multilingual statement corpus ([`corpus`]) is rendered
//! into a grid of prompt conditions ([`prompting`]), dispatched to model
//! endpoints or mocks ([`gateway`]), parsed into binary stances
//! ([`parsing`]), screened with a six-test robustness battery
//! ([`robustness`]), and aggregated into stance scores ([`stance`]) that
//! feed nonparametric and beta-regression inference ([`stats`]).
//! [`aligndata`] compiles preference-pair datasets from annotated manifesto
//! corpora and [`openended`] scores free-form generations with a judge
//! model. [`pipeline`] ties the stages into runs, reports, and persistence.

pub mod aligndata;
pub mod analysis;
pub mod config;
pub mod corpus;
pub mod error;
pub mod gateway;
pub mod lang;
pub mod openended;
pub mod parsing;
pub mod pipeline;
pub mod prompting;
pub mod report;
pub mod robustness;
pub mod run;
pub mod stance;
pub mod stats;
pub mod util;

pub use error::{Error, Result};
pub use lang::Language;
