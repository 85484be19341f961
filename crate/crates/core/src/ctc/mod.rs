//! CTC loss, best-path duration extraction and forced alignment.

mod loss;
mod pda;
mod record;
mod sequence;
mod viterbi;

pub use loss::{ctc_loss, CtcOutput};
pub use pda::{collapse_labels, pda, pda_from_labels, MismatchReport, PdaOutcome};
pub use record::{
    align_with_policy, read_alignments, write_alignment_tsv, write_alignments, AlignMethod, AlignPolicy,
    AlignmentRecord, PolicyOutcome,
};
pub use sequence::{DurationSequence, TargetSequence};
pub use viterbi::{forced_viterbi, ViterbiAlignment};
