use super::{DurationSequence, TargetSequence};
use crate::acoustic::LikelihoodMatrix;
use crate::error::{contract_err, Result};
use crate::scalar::Scalar;

/// Best single path through the blank-expanded lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiAlignment<S> {
    pub durations: DurationSequence,
    /// Log-probability of the chosen path.
    pub log_prob: S,
    /// Expanded-lattice state index visited at each frame.
    pub states: Vec<usize>,
}

/// Phoneme position owning expanded state `s`: label states map to themselves,
/// blanks to the phoneme before them (the first phoneme for the leading blank).
fn owner(s: usize) -> usize {
    if s % 2 == 1 {
        (s - 1) / 2
    } else {
        (s / 2).saturating_sub(1)
    }
}

/// Forced alignment: max-product recursion over the same lattice as the CTC loss.
/// Ties prefer staying in a state, then the single step, then the skip.
pub fn forced_viterbi<S: Scalar>(c: &LikelihoodMatrix<S>, x: &TargetSequence) -> Result<ViterbiAlignment<S>> {
    if x.blank() != c.blank_id() {
        return contract_err(format!(
            "target blank {} does not match likelihood blank {}",
            x.blank(),
            c.blank_id()
        ));
    }
    x.check_feasible(c.frames())?;
    let ext = x.expanded();
    let blank = x.blank();
    let states = ext.len();
    let frames = c.frames();
    let ninf = S::neg_infinity();

    let mut delta = vec![ninf; states];
    let mut next = vec![ninf; states];
    let mut back = vec![0u8; frames * states];
    delta[0] = c.log_prob(ext[0], 0);
    delta[1] = c.log_prob(ext[1], 0);
    for t in 1..frames {
        for s in 0..states {
            let mut best = delta[s];
            let mut step = 0u8;
            if s >= 1 && delta[s - 1] > best {
                best = delta[s - 1];
                step = 1;
            }
            if s >= 2 && ext[s] != blank && ext[s] != ext[s - 2] && delta[s - 2] > best {
                best = delta[s - 2];
                step = 2;
            }
            back[t * states + s] = step;
            next[s] = if best == ninf { ninf } else { best + c.log_prob(ext[s], t) };
        }
        std::mem::swap(&mut delta, &mut next);
    }

    let (mut s, log_prob) = if delta[states - 2] > delta[states - 1] {
        (states - 2, delta[states - 2])
    } else {
        (states - 1, delta[states - 1])
    };
    if log_prob == ninf {
        return contract_err("no alignment path has nonzero probability");
    }
    let mut path = vec![0; frames];
    for t in (0..frames).rev() {
        path[t] = s;
        s -= back[t * states + s] as usize;
    }
    let mut durations = vec![0; x.len()];
    for &s in &path {
        durations[owner(s)] += 1;
    }
    Ok(ViterbiAlignment {
        durations: DurationSequence::new(durations, frames)?,
        log_prob,
        states: path,
    })
}
