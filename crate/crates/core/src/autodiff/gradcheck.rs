//! Central finite differences, used as an independent oracle for analytic gradients.

use super::Tensor;

/// Central-difference gradient of `f` with respect to every input tensor.
pub fn finite_difference(
    inputs: &[Tensor<f64>],
    eps: f64,
    f: impl Fn(&[Tensor<f64>]) -> f64,
) -> Vec<Tensor<f64>> {
    let mut work = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for t in 0..inputs.len() {
        let mut g = Tensor::zeros(inputs[t].shape());
        for i in 0..inputs[t].numel() {
            let orig = work[t].data()[i];
            work[t].data_mut()[i] = orig + eps;
            let plus = f(&work);
            work[t].data_mut()[i] = orig - eps;
            let minus = f(&work);
            work[t].data_mut()[i] = orig;
            g.data_mut()[i] = (plus - minus) / (2.0 * eps);
        }
        out.push(g);
    }
    out
}

/// Largest relative error `|a - b| / max(|a|, |b|, floor)` over all entries.
pub fn max_relative_error(analytic: &[Tensor<f64>], numeric: &[Tensor<f64>], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .flat_map(|(a, n)| a.data().iter().zip(n.data()))
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{concat, Tape, Var};
use crate::error::Result;

type Build = for<'t> fn(&[Var<'t, f64>]) -> Result<Var<'t, f64>>;

/// One differentiable op exercised through a scalar probe loss.
pub struct OpCase {
    pub name: &'static str,
    pub input_shapes: Vec<Vec<usize>>,
    pub build: Build,
}

/// `sum(v * w)` with a fixed non-uniform `w`, so every output entry matters.
pub fn probe<'t>(v: Var<'t, f64>) -> Result<Var<'t, f64>> {
    let shape = v.shape();
    let w = Tensor::from_fn(&shape, |i| (0.7 * i as f64 + 0.3).sin() + 0.1);
    let tape = tape_of(v);
    v.mul(tape.constant(w)).map(|p| p.sum())
}

fn tape_of<'t>(v: Var<'t, f64>) -> &'t Tape<f64> {
    v.tape_ref()
}

/// Every op the tape supports, each with a probe loss.
pub fn op_cases() -> Vec<OpCase> {
    fn m(r: usize, c: usize) -> Vec<usize> {
        vec![r, c]
    }
    vec![
        OpCase { name: "matmul", input_shapes: vec![m(3, 4), m(4, 2)], build: |x| probe(x[0].matmul(x[1])?) },
        OpCase { name: "add", input_shapes: vec![m(2, 3), m(2, 3)], build: |x| probe(x[0].add(x[1])?) },
        OpCase { name: "add_scalar_broadcast", input_shapes: vec![m(2, 3), vec![]], build: |x| probe(x[0].add(x[1])?) },
        OpCase { name: "sub", input_shapes: vec![m(2, 3), m(2, 3)], build: |x| probe(x[0].sub(x[1])?) },
        OpCase { name: "mul", input_shapes: vec![m(3, 2), m(3, 2)], build: |x| probe(x[0].mul(x[1])?) },
        OpCase { name: "mul_scalar_broadcast", input_shapes: vec![vec![], m(3, 2)], build: |x| probe(x[0].mul(x[1])?) },
        OpCase { name: "scale", input_shapes: vec![m(2, 2)], build: |x| probe(x[0].scale(-1.7)) },
        OpCase { name: "add_scalar", input_shapes: vec![m(2, 2)], build: |x| probe(x[0].add_scalar(0.4)) },
        OpCase { name: "sigmoid", input_shapes: vec![m(2, 3)], build: |x| probe(x[0].sigmoid()) },
        OpCase { name: "tanh", input_shapes: vec![m(2, 3)], build: |x| probe(x[0].tanh()) },
        OpCase { name: "relu", input_shapes: vec![m(3, 3)], build: |x| probe(x[0].relu()) },
        OpCase { name: "abs", input_shapes: vec![m(3, 3)], build: |x| probe(x[0].abs()) },
        OpCase { name: "log_softmax_rows", input_shapes: vec![m(3, 4)], build: |x| probe(x[0].log_softmax(1)?) },
        OpCase { name: "log_softmax_cols", input_shapes: vec![m(3, 4)], build: |x| probe(x[0].log_softmax(0)?) },
        OpCase { name: "concat_rows", input_shapes: vec![m(2, 3), m(1, 3)], build: |x| probe(concat(&[x[0], x[1]], 0)?) },
        OpCase { name: "concat_cols", input_shapes: vec![m(2, 3), m(2, 2)], build: |x| probe(concat(&[x[0], x[1]], 1)?) },
        OpCase { name: "slice_rows", input_shapes: vec![m(4, 3)], build: |x| probe(x[0].slice(0, 1, 2)?) },
        OpCase { name: "slice_cols", input_shapes: vec![m(3, 5)], build: |x| probe(x[0].slice(1, 2, 3)?) },
        OpCase { name: "sum", input_shapes: vec![m(2, 3)], build: |x| Ok(x[0].mul(x[0])?.sum()) },
        OpCase { name: "mean", input_shapes: vec![m(2, 3)], build: |x| Ok(x[0].mul(x[0])?.mean()) },
        OpCase { name: "transpose", input_shapes: vec![m(2, 3)], build: |x| probe(x[0].transpose()?) },
        OpCase { name: "embedding_lookup", input_shapes: vec![m(3, 4)], build: |x| probe(x[0].embedding_lookup(&[2, 0, 2, 1])?) },
        OpCase { name: "repeat_rows", input_shapes: vec![m(1, 3)], build: |x| probe(x[0].repeat_rows(4)?) },
        OpCase {
            name: "external_scalar",
            input_shapes: vec![m(2, 2)],
            build: |x| {
                // f(x) = sum(x^3) / 3 evaluated outside the tape
                let v = x[0].value().clone();
                let f = v.data().iter().map(|a| a * a * a / 3.0).sum();
                let g = Tensor::from_fn(v.shape(), |i| v.data()[i] * v.data()[i]);
                x[0].external_scalar(f, g)
            },
        },
    ]
}

/// Random inputs for a case; magnitudes kept in `[0.1, 1]` away from the kinks of relu/abs.
pub fn random_inputs(case: &OpCase, seed: u64) -> Vec<Tensor<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    case.input_shapes
        .iter()
        .map(|s| {
            Tensor::from_fn(s, |_| {
                let mag = rng.random_range(0.1..1.0);
                if rng.random_bool(0.5) { mag } else { -mag }
            })
        })
        .collect()
}

/// Analytic gradient of a case's loss at `inputs`, plus the node visit counts.
pub fn analytic_gradient(case: &OpCase, inputs: &[Tensor<f64>]) -> Result<(Vec<Tensor<f64>>, Vec<u32>)> {
    let tape = Tape::new();
    let vars: Vec<Var<'_, f64>> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let loss = (case.build)(&vars)?;
    let grads = tape.backward(loss)?;
    Ok((vars.iter().map(|&v| grads.wrt(v)).collect(), grads.visit_counts().to_vec()))
}

/// Max relative error between analytic and central-difference gradients.
pub fn check_case(case: &OpCase, seed: u64, eps: f64) -> Result<f64> {
    let inputs = random_inputs(case, seed);
    let (analytic, _) = analytic_gradient(case, &inputs)?;
    let numeric = finite_difference(&inputs, eps, |xs| {
        let tape = Tape::new();
        let vars: Vec<Var<'_, f64>> = xs.iter().map(|t| tape.constant(t.clone())).collect();
        (case.build)(&vars).expect("op case").item()
    });
    Ok(max_relative_error(&analytic, &numeric, 1e-3))
}
