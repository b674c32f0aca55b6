use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub tensor: Tensor,
    pub trainable: bool,
}

/// Named parameter tensors owned outside any tape.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
}

/// FNV-1a, so that initial values depend only on `(seed, name)`.
fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Random stream dedicated to one named parameter.
pub fn param_rng(seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ name_hash(name))
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor, trainable: bool) -> Result<ParamId> {
        let name = name.into();
        if self.entries.iter().any(|e| e.name == name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter name {name}")));
        }
        self.entries.push(ParamEntry { name, tensor, trainable });
        Ok(ParamId(self.entries.len() - 1))
    }

    /// Glorot-uniform matrix seeded by `(seed, name)`.
    pub fn add_glorot(&mut self, name: &str, rows: usize, cols: usize, seed: u64) -> Result<ParamId> {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).unwrap();
        let mut rng = param_rng(seed, name);
        let data = (0..rows * cols).map(|_| dist.sample(&mut rng)).collect();
        self.add(name, Tensor::matrix(rows, cols, data)?, true)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].tensor
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].tensor
    }

    pub fn set(&mut self, id: ParamId, tensor: Tensor) -> Result<()> {
        let cur = &mut self.entries[id.0].tensor;
        if cur.shape() != tensor.shape() {
            return Err(Error::ShapeMismatch { op: "set", lhs: cur.shape().to_vec(), rhs: tensor.shape().to_vec() });
        }
        *cur = tensor;
        Ok(())
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.entries.iter_mut().map(|e| &mut e.tensor).collect()
    }

    pub fn trainable_mask(&self) -> Vec<bool> {
        self.entries.iter().map(|e| e.trainable).collect()
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.entries[id.0].trainable = trainable;
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|e| e.tensor.len()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().flat_map(|e| e.tensor.data()).map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Puts every parameter on the tape as a leaf.
    pub fn bind(&self, tape: &mut Tape, with_grad: bool) -> Bound {
        Bound { vars: self.entries.iter().map(|e| tape.leaf(e.tensor.clone(), with_grad && e.trainable)).collect() }
    }

    /// Overwrites all values from named tensors, requiring an exact name and shape match.
    pub fn load_named(&mut self, named: Vec<(String, Tensor)>) -> Result<()> {
        if named.len() != self.entries.len() {
            return Err(Error::Checkpoint(format!("expected {} tensors, found {}", self.entries.len(), named.len())));
        }
        for (name, t) in named {
            let id = self.find(&name).ok_or_else(|| Error::Checkpoint(format!("unknown tensor {name}")))?;
            self.set(id, t)?;
        }
        Ok(())
    }
}

/// Tape handles for every parameter of a store, indexed by [`ParamId`].
#[derive(Clone, Debug)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    /// Wraps existing tape variables, one per store entry in store order.
    pub fn from_vars(vars: Vec<Var>) -> Self {
        Self { vars }
    }

    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    /// Gradients read back from the tape, zero where none arrived.
    pub fn grads(&self, tape: &Tape, store: &ParamStore) -> Vec<Tensor> {
        self.vars
            .iter()
            .zip(store.entries())
            .map(|(v, e)| match tape.grad(*v) {
                Some(g) => Tensor::new(e.tensor.shape().to_vec(), g.to_vec()).unwrap(),
                None => Tensor::zeros(e.tensor.shape()),
            })
            .collect()
    }
}
