use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Bias-corrected Adam.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self::with_betas(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { lr, beta1, beta2, eps, t: 0, m: Vec::new(), v: Vec::new() }
    }

    /// First and second moment estimates, one buffer per parameter.
    pub fn moments(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.m, &self.v)
    }

    fn ensure(&mut self, lens: impl Iterator<Item = usize> + Clone) -> Result<()> {
        if self.m.is_empty() {
            self.m = lens.clone().map(|n| vec![0.0; n]).collect();
            self.v = lens.map(|n| vec![0.0; n]).collect();
            return Ok(());
        }
        let lens: Vec<usize> = lens.collect();
        if lens.len() != self.m.len() || lens.iter().zip(&self.m).any(|(n, m)| *n != m.len()) {
            return Err(Error::InvalidArgument("parameter set changed between Adam steps".into()));
        }
        Ok(())
    }

    /// One update of every parameter whose `mask` entry is true.
    pub fn step_masked(&mut self, params: &mut [&mut Tensor], grads: &[Tensor], mask: &[bool]) -> Result<()> {
        if params.len() != grads.len() || params.len() != mask.len() {
            return Err(Error::InvalidArgument(format!(
                "{} parameters, {} gradients, {} mask entries",
                params.len(),
                grads.len(),
                mask.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::ShapeMismatch { op: "adam", lhs: p.shape().to_vec(), rhs: g.shape().to_vec() });
            }
        }
        self.ensure(params.iter().map(|p| p.len()).collect::<Vec<_>>().into_iter())?;
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            if !mask[i] {
                continue;
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, (x, gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                *x -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        let mask = vec![true; params.len()];
        self.step_masked(params, grads, &mask)
    }

    /// Updates the trainable entries of a store; frozen entries are skipped.
    pub fn step_store(&mut self, store: &mut ParamStore, grads: &[Tensor]) -> Result<()> {
        let mask = store.trainable_mask();
        let mut refs = store.tensors_mut();
        self.step_masked(&mut refs, grads, &mask)
    }
}
