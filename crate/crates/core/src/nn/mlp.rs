use super::params::{Bound, ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::Result;

/// Fully connected network `x·W + b` with swish between layers.
#[derive(Clone, Debug)]
pub struct Mlp {
    layers: Vec<(ParamId, ParamId)>,
    activate_last: bool,
    widths: Vec<usize>,
}

impl Mlp {
    /// `widths` lists the input width followed by each layer's output width.
    pub fn new(store: &mut ParamStore, prefix: &str, widths: &[usize], activate_last: bool, seed: u64) -> Result<Self> {
        assert!(widths.len() >= 2, "an MLP needs at least one layer");
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for (i, w) in widths.windows(2).enumerate() {
            let weight = store.add_glorot(&format!("{prefix}.{i}.weight"), w[0], w[1], seed)?;
            let bias = store.add(format!("{prefix}.{i}.bias"), Tensor::zeros(&[1, w[1]]), true)?;
            layers.push((weight, bias));
        }
        Ok(Self { layers, activate_last, widths: widths.to_vec() })
    }

    pub fn in_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn layers(&self) -> &[(ParamId, ParamId)] {
        &self.layers
    }

    /// Zeroes the last layer so the network outputs exactly zero (or swish(0) = 0).
    pub fn zero_last(&self, store: &mut ParamStore) {
        let (w, b) = *self.layers.last().unwrap();
        store.get_mut(w).data_mut().fill(0.0);
        store.get_mut(b).data_mut().fill(0.0);
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, (w, b)) in self.layers.iter().enumerate() {
            h = tape.matmul(h, bound.var(*w))?;
            h = tape.add_row(h, bound.var(*b))?;
            if i + 1 < self.layers.len() || self.activate_last {
                h = tape.swish(h);
            }
        }
        Ok(h)
    }
}
