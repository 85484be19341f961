use std::f64::consts::LN_10;

use crate::error::{contract_err, Result};
use crate::features::FeatureMatrix;
use crate::scalar::Scalar;

/// `10 / ln 10 * sqrt(2)`, the dB scale of one unit of cepstral distance.
pub const MCD_SCALE: f64 = 10.0 / LN_10 * std::f64::consts::SQRT_2;

/// Cepstral distance of two frames, ignoring coefficient 0.
fn frame_distance<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    let sq: f64 = a[1..]
        .iter()
        .zip(&b[1..])
        .map(|(&x, &y)| {
            let d = x.to_f64_lossy() - y.to_f64_lossy();
            d * d
        })
        .sum();
    (10.0 / LN_10) * (2.0 * sq).sqrt()
}

/// Minimum-cost monotone alignment with steps (1,0), (0,1), (1,1). Returns the
/// frame pairs of the best path, first to last.
pub fn dtw_path(cost: impl Fn(usize, usize) -> f64, n: usize, m: usize) -> Vec<(usize, usize)> {
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let mut acc = vec![f64::INFINITY; n * m];
    for i in 0..n {
        for j in 0..m {
            let c = cost(i, j);
            acc[i * m + j] = if i == 0 && j == 0 {
                c
            } else {
                let diag = if i > 0 && j > 0 { acc[(i - 1) * m + j - 1] } else { f64::INFINITY };
                let up = if i > 0 { acc[(i - 1) * m + j] } else { f64::INFINITY };
                let left = if j > 0 { acc[i * m + j - 1] } else { f64::INFINITY };
                c + diag.min(up).min(left)
            };
        }
    }
    let (mut i, mut j) = (n - 1, m - 1);
    let mut path = vec![(i, j)];
    while i > 0 || j > 0 {
        let diag = if i > 0 && j > 0 { acc[(i - 1) * m + j - 1] } else { f64::INFINITY };
        let up = if i > 0 { acc[(i - 1) * m + j] } else { f64::INFINITY };
        let left = if j > 0 { acc[i * m + j - 1] } else { f64::INFINITY };
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
        path.push((i, j));
    }
    path.reverse();
    path
}

/// Mean mel cepstral distortion in dB. Frames are paired by DTW when `use_dtw`,
/// otherwise by index up to the shorter length.
pub fn mcd<S: Scalar>(reference: &FeatureMatrix<S>, hypothesis: &FeatureMatrix<S>, use_dtw: bool) -> Result<f64> {
    if reference.dim() != hypothesis.dim() {
        return contract_err(format!(
            "coefficient counts differ: {} vs {}",
            reference.dim(),
            hypothesis.dim()
        ));
    }
    if reference.dim() < 2 {
        return contract_err("MCD needs at least two coefficients (c0 is excluded)");
    }
    let dist = |i: usize, j: usize| frame_distance(reference.frame(i), hypothesis.frame(j));
    let pairs: Vec<(usize, usize)> = if use_dtw {
        dtw_path(dist, reference.frames(), hypothesis.frames())
    } else {
        (0..reference.frames().min(hypothesis.frames())).map(|t| (t, t)).collect()
    };
    Ok(pairs.iter().map(|&(i, j)| dist(i, j)).sum::<f64>() / pairs.len() as f64)
}
