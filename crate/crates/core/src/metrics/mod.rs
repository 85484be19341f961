//! Error rates, cepstral distortion and boundary statistics.

mod boundary;
mod edit;
mod mcd;
mod report;

pub use boundary::{boundary_accuracy, interior_boundary_errors, BoundaryReport, UtteranceBoundaries};
pub use edit::{error_rate, merge_streams, merge_symbol, split_streams, split_symbol, ErrorRateReport};
pub use mcd::{dtw_path, mcd, MCD_SCALE};
pub use report::{read_transcripts, transcript_error_rates, write_eval_tsv, EvalReport, UtteranceEval};
