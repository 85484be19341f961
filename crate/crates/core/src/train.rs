//! Pieces shared by the two training loops.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tensor;
use crate::scalar::Scalar;

/// Warm-up then inverse-square-root decay, peaking at `peak` when `step == warmup`.
/// Steps count from 1.
pub fn warmup_lr(peak: f64, warmup: usize, step: u64) -> f64 {
    let step = step.max(1) as f64;
    let w = warmup.max(1) as f64;
    peak * (w / step).sqrt().min(step / w)
}

/// Groups example indices into batches of similar length. Examples are shuffled,
/// ordered by length bucket, cut into batches, and the batch order shuffled again.
pub fn bucketed_batches(lengths: &[usize], batch_size: usize, bucket_width: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.shuffle(rng);
    let width = bucket_width.max(1);
    order.sort_by_key(|&i| lengths[i] / width);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
    batches.shuffle(rng);
    batches
}

/// Sums per-example gradients in order and divides by their count.
pub fn mean_gradients<S: Scalar>(per_example: Vec<Vec<Tensor<S>>>) -> Option<Vec<Tensor<S>>> {
    let n = per_example.len();
    let mut iter = per_example.into_iter();
    let mut acc = iter.next()?;
    for grads in iter {
        for (a, g) in acc.iter_mut().zip(&grads) {
            a.add_assign(g);
        }
    }
    let inv = S::one() / S::of_usize(n);
    for a in &mut acc {
        a.scale_assign(inv);
    }
    Some(acc)
}
