//! Sentiment arcs for long-form narrative text.
//!
//! The pipeline runs in stages, one module each:
//!
//! * [`lexicon`] loads a word table with valence/arousal/dominance scores.
//! * [`corpus`] tokenizes documents, cuts them into fixed-size word windows
//!   and counts lexicon words per window.
//! * [`sentiment`] turns the stacked window counts into an arc using a
//!   trailing context of windows (10 by default).
//! * [`arcshape`] smooths, resamples and z-normalizes arcs and matches them
//!   against the six canonical story shapes.
//! * [`cluster`] runs Ward agglomerative clustering over a corpus of arcs.
//! * [`structure`] is a multinomial bag-of-words tagger for narrative
//!   categories such as tension or reward.
//!
//! [`plot`] renders deterministic SVG charts and [`cli`] wires everything
//! into the `narrarc` command-line tool.

pub mod arcshape;
pub mod cli;
pub mod cluster;
pub mod corpus;
pub mod io;
pub mod lexicon;
pub mod plot;
pub mod sentiment;
pub mod structure;

pub use arcshape::{ArcLabel, ArcShape, NormalizedArc};
pub use cluster::{ClusterAssignment, DistanceMatrix, Linkage, Merge};
pub use corpus::{FreqVector, Segment, SegmentMatrix, WordList};
pub use lexicon::{ColumnMap, Dimension, Lexicon, LexiconEntry, ScoreVector, StopMask};
pub use sentiment::{ArcPoint, SentimentArc};
pub use structure::{StructureModel, StructurePrediction};
