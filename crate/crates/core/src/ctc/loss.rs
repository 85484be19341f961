use super::TargetSequence;
use crate::acoustic::LikelihoodMatrix;
use crate::error::{contract_err, Result};
use crate::scalar::{log_add, Scalar};

/// CTC negative log-likelihood and its gradient with respect to every log-probability.
#[derive(Debug, Clone)]
pub struct CtcOutput<S> {
    pub loss: S,
    /// Same frame-major layout as the likelihood matrix: `-posterior(k, t)`.
    pub grad: Vec<S>,
}

/// Whether expanded state `s` may be entered directly from `s - 2`.
#[inline]
fn can_skip(expanded: &[usize], s: usize, blank: usize) -> bool {
    s >= 2 && expanded[s] != blank && expanded[s] != expanded[s - 2]
}

/// Forward variables `alpha[t][s]` (log domain, emission at `t` included).
pub(crate) fn forward_log_alpha<S: Scalar>(c: &LikelihoodMatrix<S>, x: &TargetSequence) -> Vec<Vec<S>> {
    let ext = x.expanded();
    let blank = x.blank();
    let states = ext.len();
    let frames = c.frames();
    let mut alpha = vec![vec![S::neg_infinity(); states]; frames];
    alpha[0][0] = c.log_prob(ext[0], 0);
    alpha[0][1] = c.log_prob(ext[1], 0);
    for t in 1..frames {
        let (prev, cur) = alpha.split_at_mut(t);
        let prev = &prev[t - 1];
        let cur = &mut cur[0];
        for s in 0..states {
            let mut acc = prev[s];
            if s >= 1 {
                acc = log_add(acc, prev[s - 1]);
            }
            if can_skip(ext, s, blank) {
                acc = log_add(acc, prev[s - 2]);
            }
            if acc != S::neg_infinity() {
                cur[s] = acc + c.log_prob(ext[s], t);
            }
        }
    }
    alpha
}

/// Backward variables `beta[t][s]` (log domain, emission at `t` excluded).
fn backward_log_beta<S: Scalar>(c: &LikelihoodMatrix<S>, x: &TargetSequence) -> Vec<Vec<S>> {
    let ext = x.expanded();
    let blank = x.blank();
    let states = ext.len();
    let frames = c.frames();
    let mut beta = vec![vec![S::neg_infinity(); states]; frames];
    beta[frames - 1][states - 1] = S::zero();
    beta[frames - 1][states - 2] = S::zero();
    for t in (0..frames - 1).rev() {
        let (cur, next) = beta.split_at_mut(t + 1);
        let next = &next[0];
        let cur = &mut cur[t];
        for s in 0..states {
            let via = |s2: usize| next[s2] + c.log_prob(ext[s2], t + 1);
            let mut acc = via(s);
            if s + 1 < states {
                acc = log_add(acc, via(s + 1));
            }
            if s + 2 < states && can_skip(ext, s + 2, blank) {
                acc = log_add(acc, via(s + 2));
            }
            cur[s] = acc;
        }
    }
    beta
}

/// `-ln sum over valid alignments of prod_t p(pi_t | t)`, with gradient from forward-backward
/// posteriors. Infinite loss (zero-probability lattice) yields a zero gradient.
pub fn ctc_loss<S: Scalar>(c: &LikelihoodMatrix<S>, x: &TargetSequence) -> Result<CtcOutput<S>> {
    if x.blank() != c.blank_id() {
        return contract_err(format!(
            "target blank {} does not match likelihood blank {}",
            x.blank(),
            c.blank_id()
        ));
    }
    x.check_feasible(c.frames())?;
    let alpha = forward_log_alpha(c, x);
    let states = x.expanded().len();
    let last = &alpha[c.frames() - 1];
    let log_z = log_add(last[states - 1], last[states - 2]);
    let mut grad = vec![S::zero(); c.values().len()];
    if log_z == S::neg_infinity() {
        return Ok(CtcOutput {
            loss: S::infinity(),
            grad,
        });
    }
    let beta = backward_log_beta(c, x);
    let ext = x.expanded();
    let classes = c.classes();
    for t in 0..c.frames() {
        for s in 0..states {
            let lp = alpha[t][s] + beta[t][s];
            if lp != S::neg_infinity() {
                grad[t * classes + ext[s]] -= (lp - log_z).exp();
            }
        }
    }
    Ok(CtcOutput { loss: -log_z, grad })
}
