//! Batch opinion and emotion analytics over comment streams.
//!
//! The pipeline stages are:
//!
//! 1. [`frontier`]: Bloom-filter deduplication of incoming item keys.
//! 2. [`textprep`]: visible-text extraction, normalization and stopword removal.
//! 3. [`segmenter`]: BEMS hidden Markov model word segmentation decoded with Viterbi.
//! 4. [`lexicon`]: sentiment dictionaries, SO-PMI expansion and bursty new-word mining.
//! 5. [`polarity`]: boolean-weight Naive Bayes positive/negative classifier.
//! 6. [`emotion`]: seven-emotion lexicon traversal with negation and degree adverbs.
//! 7. [`trends`]: daily emotion series and hot-word ranking.
//! 8. [`evalharness`]: sample-wise comparison of a scorer against labeled truth.

pub mod emotion;
pub mod error;
pub mod evalharness;
pub mod frontier;
pub mod lexicon;
pub mod polarity;
pub mod segmenter;
pub mod textprep;
pub mod trends;

pub use error::{Error, Result};
