use aligner_core::acoustic::LikelihoodMatrix;
use aligner_core::ctc::{collapse_labels, ctc_loss, forced_viterbi, pda, TargetSequence};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Standard CTC collapse: merge repeats, then drop blanks.
fn ctc_collapse(path: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &k in path {
        if Some(k) != prev && k != blank {
            out.push(k);
        }
        prev = Some(k);
    }
    out
}

/// Every label path of length `frames` over `classes` symbols.
fn all_paths(classes: usize, frames: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = classes.pow(frames as u32);
    (0..total).map(move |mut n| {
        let mut p = vec![0; frames];
        for slot in p.iter_mut() {
            *slot = n % classes;
            n /= classes;
        }
        p
    })
}

fn path_log_prob(c: &LikelihoodMatrix<f64>, path: &[usize]) -> f64 {
    path.iter().enumerate().map(|(t, &k)| c.log_prob(k, t)).sum()
}

fn random_matrix(rng: &mut ChaCha8Rng, classes: usize, frames: usize) -> LikelihoodMatrix<f64> {
    let probs: Vec<Vec<f64>> = (0..frames)
        .map(|_| {
            let raw: Vec<f64> = (0..classes).map(|_| rng.random_range(0.05..1.0)).collect();
            let z: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / z).collect()
        })
        .collect();
    LikelihoodMatrix::from_probs(&probs, 0.01).unwrap()
}

fn random_target(rng: &mut ChaCha8Rng, phonemes: usize, frames: usize) -> TargetSequence {
    loop {
        let len = rng.random_range(1..=3);
        let ids: Vec<usize> = (0..len).map(|_| rng.random_range(0..phonemes)).collect();
        let x = TargetSequence::new(ids, phonemes).unwrap();
        if x.min_frames() <= frames {
            return x;
        }
    }
}

#[test]
fn loss_matches_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let frames = rng.random_range(1..=6);
        let c = random_matrix(&mut rng, 4, frames);
        let x = random_target(&mut rng, 3, frames);
        let total: f64 = all_paths(4, frames)
            .filter(|p| ctc_collapse(p, 3) == x.ids())
            .map(|p| path_log_prob(&c, &p).exp())
            .sum();
        let loss = ctc_loss(&c, &x).unwrap().loss;
        assert!((loss + total.ln()).abs() < 1e-9, "loss {loss} vs {}", -total.ln());
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let h = 1e-6;
    for _ in 0..10 {
        let frames = rng.random_range(2..=6);
        let c = random_matrix(&mut rng, 4, frames);
        let x = random_target(&mut rng, 3, frames);
        let out = ctc_loss(&c, &x).unwrap();
        for i in 0..c.values().len() {
            let mut up = c.clone();
            up.values_mut()[i] += h;
            let mut down = c.clone();
            down.values_mut()[i] -= h;
            let fd = (ctc_loss(&up, &x).unwrap().loss - ctc_loss(&down, &x).unwrap().loss) / (2.0 * h);
            let denom = fd.abs().max(out.grad[i].abs()).max(1e-3);
            assert!((fd - out.grad[i]).abs() / denom < 1e-6, "index {i}: fd {fd} vs {}", out.grad[i]);
        }
    }
}

#[test]
fn viterbi_matches_best_enumerated_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..40 {
        let frames = rng.random_range(1..=6);
        let c = random_matrix(&mut rng, 4, frames);
        let x = random_target(&mut rng, 3, frames);
        let best = all_paths(4, frames)
            .filter(|p| ctc_collapse(p, 3) == x.ids())
            .map(|p| path_log_prob(&c, &p))
            .fold(f64::NEG_INFINITY, f64::max);
        let v = forced_viterbi(&c, &x).unwrap();
        assert!((v.log_prob - best).abs() < 1e-9);
        let loss = ctc_loss(&c, &x).unwrap().loss;
        assert!(v.log_prob <= -loss + 1e-12);
        // the reported path is itself valid and scores what it claims
        let labels: Vec<usize> = v.states.iter().map(|&s| x.expanded()[s]).collect();
        assert_eq!(ctc_collapse(&labels, 3), x.ids());
        assert!((path_log_prob(&c, &labels) - v.log_prob).abs() < 1e-9);
    }
}

#[test]
fn pda_and_viterbi_agree_up_to_blank_attribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut checked = 0;
    while checked < 30 {
        let frames = rng.random_range(3..=12);
        // sharp columns along a random valid path
        let path: Vec<usize> = (0..frames).map(|_| rng.random_range(0..4)).collect();
        let ids = ctc_collapse(&path, 3);
        if ids.is_empty() || ids.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        let probs: Vec<Vec<f64>> = path
            .iter()
            .map(|&l| (0..4).map(|k| if k == l { 0.7 } else { 0.1 }).collect())
            .collect();
        let c = LikelihoodMatrix::<f64>::from_probs(&probs, 0.01).unwrap();
        let x = TargetSequence::new(ids, 3).unwrap();
        let p = pda(&c, &x).unwrap();
        let d = p.durations().expect("argmax path spells the target");
        let v = forced_viterbi(&c, &x).unwrap();
        let blanks = path.iter().filter(|&&k| k == 3).count();
        for (a, b) in d.durations().iter().zip(v.durations.durations()) {
            assert!(a.abs_diff(*b) <= blanks);
        }
        checked += 1;
    }
}

proptest! {
    #[test]
    fn loss_is_a_valid_negative_log_probability(seed in 0u64..1000, frames in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_matrix(&mut rng, 4, frames);
        let x = random_target(&mut rng, 3, frames);
        let loss = ctc_loss(&c, &x).unwrap().loss;
        prop_assert!(loss >= -1e-12 && loss.is_finite());
    }

    #[test]
    fn viterbi_durations_tile_the_utterance(seed in 0u64..1000, frames in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_matrix(&mut rng, 4, frames);
        let x = random_target(&mut rng, 3, frames);
        let v = forced_viterbi(&c, &x).unwrap();
        prop_assert_eq!(v.durations.len(), x.len());
        prop_assert_eq!(v.durations.total_frames(), frames);
        prop_assert!(v.durations.durations().iter().all(|&d| d >= 1));
    }

    #[test]
    fn collapse_conserves_frames(labels in proptest::collection::vec(0usize..4, 1..40)) {
        let runs = collapse_labels(&labels, 3);
        let total: usize = runs.iter().map(|r| r.1).sum();
        if labels.iter().all(|&l| l == 3) {
            prop_assert!(runs.is_empty());
        } else {
            prop_assert_eq!(total, labels.len());
            prop_assert!(runs.iter().all(|r| r.1 >= 1));
        }
    }
}
