//! Deterministic rational boolean series, pushdown grammars, bounded
//! bisimulation games and self-generating proof sets for deciding
//! bisimilarity of pushdown processes.

pub mod alphabet;
pub mod decide;
pub mod error;
pub mod grammar;
pub mod games;
pub mod graphs;
pub mod proofs;
pub mod triangulation;
pub mod series;

pub use alphabet::{Alphabet, Letter};
pub use error::{Error, Result};
pub use grammar::{Config, Grammar, Pda, PdaPipeline, Production};
pub use series::{LeftDetType, Series, SeriesMatrix, SeriesVector};
