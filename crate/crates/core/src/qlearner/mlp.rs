//! Fully-connected action-value network with hand-written backprop.
//!
//! Parameters live in one flat array, layer by layer: weights row-major
//! (`[out][in]`) followed by biases. Hidden layers use ReLU, the output layer
//! is linear.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive};
use rand::Rng;

use super::QError;

pub trait Real: Float + FromPrimitive + Default + Debug + Send + Sync + 'static {}

impl<T: Float + FromPrimitive + Default + Debug + Send + Sync + 'static> Real for T {}

#[derive(Debug, Clone, PartialEq)]
pub struct QFunction<F: Real = f32> {
    sizes: Vec<usize>,
    params: Vec<F>,
}

#[derive(Debug, Clone, Copy)]
struct LayerView {
    weights: usize,
    biases: usize,
    inputs: usize,
    outputs: usize,
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn check_sizes(sizes: &[usize]) -> Result<(), QError> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(QError::Shape(format!("invalid layer sizes {sizes:?}")));
    }
    Ok(())
}

impl<F: Real> QFunction<F> {
    pub fn zeros(sizes: &[usize]) -> Result<Self, QError> {
        check_sizes(sizes)?;
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![F::zero(); param_count(sizes)],
        })
    }

    /// Uniform init in `±1/sqrt(fan_in)` for weights and biases.
    pub fn random(sizes: &[usize], rng: &mut impl Rng) -> Result<Self, QError> {
        let mut qf = Self::zeros(sizes)?;
        for layer in qf.layers() {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            let end = layer.biases + layer.outputs;
            for p in &mut qf.params[layer.weights..end] {
                *p = F::from_f64(rng.random_range(-bound..bound)).unwrap();
            }
        }
        Ok(qf)
    }

    pub fn from_params(sizes: &[usize], params: Vec<F>) -> Result<Self, QError> {
        check_sizes(sizes)?;
        if params.len() != param_count(sizes) {
            return Err(QError::Shape(format!(
                "{} parameters for layer sizes {sizes:?}, expected {}",
                params.len(),
                param_count(sizes)
            )));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn layers(&self) -> Vec<LayerView> {
        let mut offset = 0;
        self.sizes
            .windows(2)
            .map(|w| {
                let v = LayerView {
                    weights: offset,
                    biases: offset + w[0] * w[1],
                    inputs: w[0],
                    outputs: w[1],
                };
                offset += w[0] * w[1] + w[1];
                v
            })
            .collect()
    }

    fn check_input(&self, x: &[F]) -> Result<(), QError> {
        if x.len() != self.input_len() {
            return Err(QError::Shape(format!(
                "input of length {}, network expects {}",
                x.len(),
                self.input_len()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[F]) -> Result<Vec<F>, QError> {
        self.check_input(x)?;
        Ok(self.activations(x).pop().unwrap())
    }

    // Per-layer outputs, input first. Assumes a checked input.
    fn activations(&self, x: &[F]) -> Vec<Vec<F>> {
        let layers = self.layers();
        let mut acts = Vec::with_capacity(layers.len() + 1);
        acts.push(x.to_vec());
        for (l, layer) in layers.iter().enumerate() {
            let input = &acts[l];
            let last = l + 1 == layers.len();
            let mut out = Vec::with_capacity(layer.outputs);
            for o in 0..layer.outputs {
                let row = &self.params
                    [layer.weights + o * layer.inputs..layer.weights + (o + 1) * layer.inputs];
                let mut z = self.params[layer.biases + o];
                for (w, a) in row.iter().zip(input) {
                    z = z + *w * *a;
                }
                out.push(if last || z > F::zero() { z } else { F::zero() });
            }
            acts.push(out);
        }
        acts
    }

    // Adds d(loss)/d(params) into `grad` given d(loss)/d(output).
    fn backprop(&self, acts: &[Vec<F>], d_out: &[F], grad: &mut [F]) {
        let layers = self.layers();
        let mut delta = d_out.to_vec();
        for (l, layer) in layers.iter().enumerate().rev() {
            let input = &acts[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == F::zero() {
                    continue;
                }
                grad[layer.biases + o] = grad[layer.biases + o] + d;
                let row = layer.weights + o * layer.inputs;
                for (i, a) in input.iter().enumerate() {
                    grad[row + i] = grad[row + i] + d * *a;
                }
            }
            if l == 0 {
                break;
            }
            let mut prev = vec![F::zero(); layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == F::zero() {
                    continue;
                }
                let row = &self.params
                    [layer.weights + o * layer.inputs..layer.weights + (o + 1) * layer.inputs];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p = *p + *w * d;
                }
            }
            // ReLU derivative: hidden outputs are positive exactly where z > 0.
            for (p, a) in prev.iter_mut().zip(input) {
                if *a <= F::zero() {
                    *p = F::zero();
                }
            }
            delta = prev;
        }
    }

    /// Mean Huber (threshold 1) TD loss on the taken actions and its exact
    /// gradient with respect to every parameter.
    pub fn td_loss_and_grad(
        &self,
        inputs: &[&[F]],
        actions: &[usize],
        targets: &[F],
    ) -> Result<(F, Vec<F>), QError> {
        if inputs.is_empty() || inputs.len() != actions.len() || inputs.len() != targets.len() {
            return Err(QError::Shape(format!(
                "batch of {} inputs, {} actions, {} targets",
                inputs.len(),
                actions.len(),
                targets.len()
            )));
        }
        let n = F::from_usize(inputs.len()).unwrap();
        let half = F::from_f64(0.5).unwrap();
        let mut loss = F::zero();
        let mut grad = vec![F::zero(); self.params.len()];
        let mut d_out = vec![F::zero(); self.output_len()];
        for ((x, &a), &y) in inputs.iter().zip(actions).zip(targets) {
            self.check_input(x)?;
            if a >= self.output_len() {
                return Err(QError::Shape(format!("action {a} out of range")));
            }
            let acts = self.activations(x);
            let err = acts.last().unwrap()[a] - y;
            let abs = err.abs();
            loss = loss
                + if abs <= F::one() {
                    half * err * err
                } else {
                    abs - half
                };
            d_out.iter_mut().for_each(|d| *d = F::zero());
            d_out[a] = err.max(-F::one()).min(F::one()) / n;
            self.backprop(&acts, &d_out, &mut grad);
        }
        Ok((loss / n, grad))
    }
}

/// RMS-scaled gradient descent: each parameter's step is divided by the
/// root of its running mean squared gradient.
#[derive(Debug, Clone)]
pub struct RmsProp<F: Real = f32> {
    mean_sq: Vec<F>,
    decay: F,
    eps: F,
}

impl<F: Real> RmsProp<F> {
    pub fn new(param_count: usize, decay: f64, eps: f64) -> Self {
        Self {
            mean_sq: vec![F::zero(); param_count],
            decay: F::from_f64(decay).unwrap(),
            eps: F::from_f64(eps).unwrap(),
        }
    }

    /// One descent step on the TD loss; returns the pre-update mean loss.
    pub fn apply_update(
        &mut self,
        qf: &mut QFunction<F>,
        inputs: &[&[F]],
        actions: &[usize],
        targets: &[F],
        learning_rate: f64,
    ) -> Result<F, QError> {
        if self.mean_sq.len() != qf.param_count() {
            return Err(QError::Shape(
                "optimizer state does not match network".into(),
            ));
        }
        let (loss, grad) = qf.td_loss_and_grad(inputs, actions, targets)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(QError::Divergence(format!(
                "non-finite loss or gradient (loss = {loss:?})"
            )));
        }
        let lr = F::from_f64(learning_rate).unwrap();
        let keep = F::one() - self.decay;
        for ((p, ms), g) in qf.params.iter_mut().zip(&mut self.mean_sq).zip(&grad) {
            *ms = self.decay * *ms + keep * *g * *g;
            if *g != F::zero() {
                *p = *p - lr * *g / (ms.sqrt() + self.eps);
            }
        }
        if !qf.is_finite() {
            return Err(QError::Divergence("parameters became non-finite".into()));
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    // Straightforward matrix arithmetic on explicit weight matrices.
    fn reference_forward(sizes: &[usize], params: &[f64], x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let mut off = 0;
        for (l, w) in sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights: Vec<Vec<f64>> = (0..n_out)
                .map(|o| params[off + o * n_in..off + (o + 1) * n_in].to_vec())
                .collect();
            let biases = &params[off + n_in * n_out..off + n_in * n_out + n_out];
            off += n_in * n_out + n_out;
            let z: Vec<f64> = weights
                .iter()
                .zip(biases)
                .map(|(row, b)| row.iter().zip(&a).map(|(w, v)| w * v).sum::<f64>() + b)
                .collect();
            a = if l + 2 == sizes.len() {
                z
            } else {
                z.into_iter().map(|v| v.max(0.0)).collect()
            };
        }
        a
    }

    #[test]
    fn zero_network_outputs_biases() {
        let mut qf = QFunction::<f64>::zeros(&[9, 4, 3]).unwrap();
        let n = qf.param_count();
        qf.params_mut()[n - 3..].copy_from_slice(&[0.1, -0.2, 0.3]);
        assert_eq!(qf.forward(&[0.5; 9]).unwrap(), vec![0.1, -0.2, 0.3]);
    }

    #[test]
    fn forward_matches_reference() {
        let mut r = rng::stream(11);
        for sizes in [vec![9, 8, 3], vec![5, 7, 6, 3], vec![4, 3]] {
            let qf = QFunction::<f64>::random(&sizes, &mut r).unwrap();
            let x: Vec<f64> = (0..sizes[0]).map(|_| r.random_range(-1.0..1.0)).collect();
            let got = qf.forward(&x).unwrap();
            let want = reference_forward(&sizes, qf.params(), &x);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-10);
            }
            assert_eq!(got, qf.forward(&x).unwrap());
        }
    }

    #[test]
    fn shape_errors() {
        let qf = QFunction::<f32>::zeros(&[9, 4, 3]).unwrap();
        assert!(matches!(qf.forward(&[0.0; 8]), Err(QError::Shape(_))));
        assert!(QFunction::<f32>::zeros(&[9]).is_err());
        assert!(QFunction::<f32>::from_params(&[2, 2], vec![0.0; 5]).is_err());
    }

    #[test]
    fn matched_targets_leave_params_unchanged() {
        let mut r = rng::stream(3);
        let mut qf = QFunction::<f64>::random(&[4, 5, 3], &mut r).unwrap();
        let x = [0.1, 0.2, -0.3, 0.4];
        let q = qf.forward(&x).unwrap();
        let before = qf.clone();
        let mut opt = RmsProp::new(qf.param_count(), 0.95, 1e-6);
        let loss = opt
            .apply_update(&mut qf, &[&x], &[1], &[q[1]], 1e-3)
            .unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(qf, before);
    }

    #[test]
    fn repeated_updates_reduce_loss() {
        let mut r = rng::stream(5);
        let mut qf = QFunction::<f64>::random(&[9, 16, 3], &mut r).unwrap();
        let x: Vec<f64> = (0..9).map(|_| r.random_range(-1.0..1.0)).collect();
        let mut opt = RmsProp::new(qf.param_count(), 0.95, 1e-6);
        let mut prev = f64::INFINITY;
        for _ in 0..10 {
            let loss = opt
                .apply_update(&mut qf, &[&x], &[2], &[3.0], 1e-3)
                .unwrap();
            assert!(loss < prev, "{loss} !< {prev}");
            prev = loss;
        }
    }

    #[test]
    fn divergence_detected() {
        let mut qf = QFunction::<f64>::zeros(&[2, 3]).unwrap();
        let mut opt = RmsProp::new(qf.param_count(), 0.95, 1e-6);
        let err = opt.apply_update(&mut qf, &[&[f64::NAN, 0.0]], &[0], &[1.0], 1e-3);
        assert!(matches!(err, Err(QError::Divergence(_))));
    }
}
