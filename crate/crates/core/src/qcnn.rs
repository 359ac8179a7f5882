//! The 8 -> 2 qubit convolutional classifier and its matchgate restriction.
//!
//! Pooling is realized by deferred measurement: a measured qubit either
//! controls rotations on its partner (full variant) or is coupled to it by
//! matchgate evolutions (matchgate variant), and is traced out when the two
//! output qubits are read.

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::models::LabeledExample;
use crate::pauli::{Pauli, PauliString};
use crate::scalar::Real;
use crate::state::{marginal_probs, StateVector};

pub const N_IN: usize = 8;
pub const N_OUT: usize = 2;
/// Parameter count of [`Variant::Full`]: two 15-parameter convolution blocks
/// and two 3-parameter controlled Euler rotations.
pub const FULL_PARAMS: usize = 36;
/// Parameter count of [`Variant::Matchgate`]: two 5-parameter blocks and two
/// 2-parameter pooling units.
pub const MATCHGATE_PARAMS: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Full,
    Matchgate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    Conv { params: usize, pairs: Vec<(usize, usize)> },
    Pool { measured: Vec<usize>, kept: Vec<usize>, params: usize },
}

impl Layer {
    pub fn params(&self) -> usize {
        match self {
            Layer::Conv { params, .. } | Layer::Pool { params, .. } => *params,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QcnnArchitecture {
    pub n_in: usize,
    pub n_out: usize,
    pub layers: Vec<Layer>,
    pub variant: Option<Variant>,
    pub total_params: usize,
    /// Qubits read at the end, most significant outcome bit first.
    pub outputs: [usize; 2],
    circuit: Circuit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction<T = f64> {
    /// `(p00, p01, p10, p11)`.
    pub probs: [T; 4],
}

impl<T: Real> Prediction<T> {
    /// Index of the largest of the first `m` probabilities, lowest on ties.
    pub fn class(&self, m: usize) -> usize {
        let mut best = 0;
        for j in 1..m.min(4) {
            if self.probs[j] > self.probs[best] {
                best = j;
            }
        }
        best
    }
}

fn ps(sites: &[(usize, Pauli)]) -> PauliString {
    PauliString::from_sites(N_IN, sites)
}

/// Euler rotation `RZ RY RZ` on qubit `q`, parameters `o..o+3`.
fn euler(c: &mut Circuit, q: usize, o: usize) -> Result<()> {
    for (k, p) in [Pauli::Z, Pauli::Y, Pauli::Z].into_iter().enumerate() {
        c.push(Gate::rotation(ps(&[(q, p)]), o + k))?;
    }
    Ok(())
}

/// 15-parameter two-qubit block.
fn full_block(c: &mut Circuit, a: usize, b: usize, o: usize) -> Result<()> {
    euler(c, a, o)?;
    euler(c, b, o + 3)?;
    for (k, p) in [Pauli::X, Pauli::Y, Pauli::Z].into_iter().enumerate() {
        c.push(Gate::rotation(ps(&[(a, p), (b, p)]), o + 6 + k))?;
    }
    euler(c, a, o + 9)?;
    euler(c, b, o + 12)
}

/// Controlled Euler rotation on `kept`, conditioned on `measured`.
fn full_pool(c: &mut Circuit, measured: usize, kept: usize, o: usize) -> Result<()> {
    for (k, p) in [Pauli::Z, Pauli::Y, Pauli::Z].into_iter().enumerate() {
        c.push(Gate::controlled(measured, ps(&[(kept, p)]), o + k))?;
    }
    Ok(())
}

/// 5-parameter matchgate block: `Z_a, Z_b, X_a X_b, Z_a, Z_b`.
fn matchgate_block(c: &mut Circuit, a: usize, b: usize, o: usize) -> Result<()> {
    c.push(Gate::evolution(ps(&[(a, Pauli::Z)]), o))?;
    c.push(Gate::evolution(ps(&[(b, Pauli::Z)]), o + 1))?;
    c.push(Gate::evolution(ps(&[(a, Pauli::X), (b, Pauli::X)]), o + 2))?;
    c.push(Gate::evolution(ps(&[(a, Pauli::Z)]), o + 3))?;
    c.push(Gate::evolution(ps(&[(b, Pauli::Z)]), o + 4))?;
    Ok(())
}

/// `X_m X_k` then `Z_k`, coupling a discarded qubit to its kept neighbour.
fn matchgate_pool(c: &mut Circuit, measured: usize, kept: usize, o: usize) -> Result<()> {
    c.push(Gate::evolution(ps(&[(measured, Pauli::X), (kept, Pauli::X)]), o))?;
    c.push(Gate::evolution(ps(&[(kept, Pauli::Z)]), o + 1))?;
    Ok(())
}

pub fn build_qcnn(variant: Variant) -> QcnnArchitecture {
    let built = match variant {
        Variant::Full => build_full(),
        Variant::Matchgate => build_matchgate(),
    };
    built.expect("fixed layouts are valid")
}

fn build_full() -> Result<QcnnArchitecture> {
    let conv1 = vec![(0, 1), (2, 3), (4, 5), (6, 7), (1, 2), (3, 4), (5, 6), (7, 0)];
    let pool1 = (vec![0, 2, 4, 6], vec![1, 3, 5, 7]);
    let conv2 = vec![(1, 3), (5, 7), (3, 5), (7, 1)];
    let pool2 = (vec![1, 5], vec![3, 7]);

    let mut c = Circuit::new(N_IN, FULL_PARAMS);
    for &(a, b) in &conv1 {
        full_block(&mut c, a, b, 0)?;
    }
    for (&m, &k) in pool1.0.iter().zip(&pool1.1) {
        full_pool(&mut c, m, k, 15)?;
    }
    for &(a, b) in &conv2 {
        full_block(&mut c, a, b, 18)?;
    }
    for (&m, &k) in pool2.0.iter().zip(&pool2.1) {
        full_pool(&mut c, m, k, 33)?;
    }
    let layers = vec![
        Layer::Conv { params: 15, pairs: conv1 },
        Layer::Pool { measured: pool1.0, kept: pool1.1, params: 3 },
        Layer::Conv { params: 15, pairs: conv2 },
        Layer::Pool { measured: pool2.0, kept: pool2.1, params: 3 },
    ];
    QcnnArchitecture::from_parts(layers, Some(Variant::Full), [3, 7], c)
}

fn build_matchgate() -> Result<QcnnArchitecture> {
    // Open chain; pooling folds the register inwards so every coupling stays
    // nearest-neighbour.
    let conv1 = vec![(0, 1), (2, 3), (4, 5), (6, 7), (1, 2), (3, 4), (5, 6)];
    let pool1 = (vec![0, 1, 6, 7], vec![2, 3, 4, 5]);
    let conv2 = vec![(2, 3), (4, 5), (3, 4)];
    let pool2 = (vec![2, 5], vec![3, 4]);

    let mut c = Circuit::new(N_IN, MATCHGATE_PARAMS);
    for &(a, b) in &conv1 {
        matchgate_block(&mut c, a, b, 0)?;
    }
    matchgate_pool(&mut c, 1, 2, 5)?;
    matchgate_pool(&mut c, 6, 5, 5)?;
    for &(a, b) in &conv2 {
        matchgate_block(&mut c, a, b, 7)?;
    }
    matchgate_pool(&mut c, 2, 3, 12)?;
    matchgate_pool(&mut c, 5, 4, 12)?;
    let layers = vec![
        Layer::Conv { params: 5, pairs: conv1 },
        Layer::Pool { measured: pool1.0, kept: pool1.1, params: 2 },
        Layer::Conv { params: 5, pairs: conv2 },
        Layer::Pool { measured: pool2.0, kept: pool2.1, params: 2 },
    ];
    QcnnArchitecture::from_parts(layers, Some(Variant::Matchgate), [3, 4], c)
}

/// Squared error over the first `m` outcomes.
pub fn mse<T: Real>(probs: &[T; 4], label: &[f64], m: usize) -> Result<T> {
    check_label(label, m)?;
    Ok((0..m).fold(T::zero(), |acc, j| {
        let d = probs[j] - T::of(label[j]);
        acc + d * d
    }))
}

fn check_label(label: &[f64], m: usize) -> Result<()> {
    if !(m == 3 || m == 4) {
        return Err(Error::InvalidArgument(format!("number of classes must be 3 or 4, got {m}")));
    }
    if label.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: label.len() });
    }
    Ok(())
}

impl QcnnArchitecture {
    fn from_parts(layers: Vec<Layer>, variant: Option<Variant>, outputs: [usize; 2], circuit: Circuit) -> Result<Self> {
        let total_params = layers.iter().map(Layer::params).sum::<usize>();
        if total_params != circuit.num_params() {
            return Err(Error::InvalidArgument(format!(
                "layers declare {total_params} parameters, circuit uses {}",
                circuit.num_params()
            )));
        }
        Ok(QcnnArchitecture { n_in: circuit.n(), n_out: N_OUT, layers, variant, total_params, outputs, circuit })
    }

    /// Architecture over an arbitrary circuit, read out on `outputs`.
    pub fn custom(circuit: Circuit, outputs: [usize; 2]) -> Result<Self> {
        if outputs[0] == outputs[1] || outputs.iter().any(|&q| q >= circuit.n()) {
            return Err(Error::InvalidSubset(format!("bad output qubits {outputs:?}")));
        }
        let layers = vec![Layer::Conv { params: circuit.num_params(), pairs: Vec::new() }];
        Self::from_parts(layers, None, outputs, circuit)
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    /// Register sizes before the first layer and after each pooling layer.
    pub fn register_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.n_in];
        for l in &self.layers {
            if let Layer::Pool { kept, .. } = l {
                sizes.push(kept.len());
            }
        }
        sizes
    }

    /// Independent uniform angles on `[-pi, pi)`.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.total_params).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect()
    }

    /// Full register state before the measured qubits are traced out.
    pub fn output_state<T: Real>(&self, theta: &[T], psi: &StateVector<T>) -> Result<StateVector<T>> {
        self.circuit.run(theta, psi)
    }

    pub fn forward<T: Real>(&self, theta: &[T], psi: &StateVector<T>) -> Result<Prediction<T>> {
        let out = self.circuit.run(theta, psi)?;
        let p = marginal_probs(&out, &self.outputs)?;
        Ok(Prediction { probs: [p[0], p[1], p[2], p[3]] })
    }

    pub fn loss(&self, theta: &[f64], example: &LabeledExample, m: usize) -> Result<f64> {
        check_label(&example.label, m)?;
        mse(&self.forward(theta, &example.state)?.probs, &example.label, m)
    }

    pub fn risk(&self, theta: &[f64], batch: &[&LabeledExample], m: usize) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let losses = batch.par_iter().map(|e| self.loss(theta, e, m)).collect::<Result<Vec<_>>>()?;
        Ok(losses.iter().sum::<f64>() / batch.len() as f64)
    }

    /// Loss of one example and its gradient.
    pub fn loss_gradient(&self, theta: &[f64], example: &LabeledExample, m: usize) -> Result<(f64, Vec<f64>)> {
        check_label(&example.label, m)?;
        let n = self.n_in;
        let shifts = [n - 1 - self.outputs[0], n - 1 - self.outputs[1]];
        let outcome = move |b: usize| (((b >> shifts[0]) & 1) << 1) | ((b >> shifts[1]) & 1);
        self.circuit.gradient_with(theta, &example.state, |out| {
            let mut probs = [0.0; 4];
            for (b, a) in out.amplitudes().iter().enumerate() {
                probs[outcome(b)] += a.norm_sqr();
            }
            // dL/dp_j; outcomes beyond the class count carry no weight
            let mut w = [0.0; 4];
            for j in 0..m {
                w[j] = 2.0 * (probs[j] - example.label[j]);
            }
            let value = mse(&probs, &example.label, m)?;
            let lambda = out
                .amplitudes()
                .iter()
                .enumerate()
                .map(|(b, a)| *a * w[outcome(b)])
                .collect::<Vec<Complex<f64>>>();
            // <psi|O|psi> = sum_j w_j p_j differs from the loss by a constant,
            // so only its gradient is used
            Ok((value, lambda))
        })
    }

    /// Batch risk and its gradient. Per-example terms are evaluated in
    /// parallel and summed in batch order.
    pub fn risk_gradient(&self, theta: &[f64], batch: &[&LabeledExample], m: usize) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let parts = batch
            .par_iter()
            .map(|e| self.loss_gradient(theta, e, m))
            .collect::<Result<Vec<_>>>()?;
        let scale = 1.0 / batch.len() as f64;
        let mut grad = vec![0.0; self.total_params];
        let mut risk = 0.0;
        for (l, g) in &parts {
            risk += l;
            for (acc, gi) in grad.iter_mut().zip(g) {
                *acc += gi;
            }
        }
        grad.iter_mut().for_each(|g| *g *= scale);
        Ok((risk * scale, grad))
    }

    pub fn gradient(&self, theta: &[f64], batch: &[&LabeledExample], m: usize) -> Result<Vec<f64>> {
        Ok(self.risk_gradient(theta, batch, m)?.1)
    }

    /// Fraction of examples whose arg-max class matches the phase label.
    pub fn accuracy(&self, theta: &[f64], examples: &[LabeledExample], m: usize) -> Result<f64> {
        if examples.is_empty() {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        let hits = examples
            .par_iter()
            .map(|e| Ok(usize::from(self.forward(theta, &e.state)?.class(m) == e.phase_index)))
            .collect::<Result<Vec<_>>>()?;
        Ok(hits.iter().sum::<usize>() as f64 / examples.len() as f64)
    }
}
