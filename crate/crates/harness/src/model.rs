//! Lift → embedding → residual conv blocks → pooling → head.

use std::io::{Read, Write};

use anyhow::{anyhow, bail, Context, Result};
use gigp_core::gigp::init_anchors;
use gigp_core::lieconv::{ConvGeometry, ConvLayerConfig, ResidualBlock};
use gigp_core::nn::checkpoint::{read_checkpoint, write_checkpoint};
use gigp_core::nn::{Bound, Mlp, ParamId, ParamStore, Tape, Tensor, Var};
use gigp_core::{lift, GigpLayer, RawPointCloud};

use crate::config::{ExperimentConfig, Pooling, Task};
use crate::data::{xyz::ELEMENTS, Target};

/// Largest orbit sample used to place anchors.
const ANCHOR_SAMPLE: usize = 20_000;

#[derive(Clone, Debug)]
pub enum Pool {
    Mean,
    Gigp(GigpLayer),
}

/// How GIGP anchors are chosen when the model is built.
#[derive(Clone, Copy, Debug)]
pub enum AnchorInit<'a> {
    /// Quantiles of a sample of training orbit coordinates.
    FromOrbits(&'a [f64]),
    /// Explicit anchors and bandwidth, as restored from a checkpoint.
    Fixed(&'a [f64], f64),
}

/// A cloud lifted once, with its neighborhoods precomputed.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub orbits: Vec<f64>,
    pub geom: ConvGeometry,
    pub feats: Tensor,
}

#[derive(Clone, Debug)]
pub struct Model {
    pub config: ExperimentConfig,
    pub store: ParamStore,
    embed_w: ParamId,
    embed_b: ParamId,
    blocks: Vec<ResidualBlock>,
    pool: Pool,
    head: Mlp,
    /// `[mean, std]` of regression targets; outputs are standardized.
    target_stats: ParamId,
}

/// Input feature width and output width of a task.
pub fn task_dims(task: Task) -> (usize, usize) {
    match task {
        Task::RotDigits => (1, 10),
        Task::SynthInvariant => (1, 1),
        Task::XyzRegression => (ELEMENTS.len(), 1),
    }
}

impl Model {
    pub fn build(config: &ExperimentConfig, anchors: AnchorInit) -> Result<Self> {
        config.validate()?;
        let (in_dim, out_dim) = task_dims(config.task);
        let c = config.channels;
        let seed = config.seed;
        let mut store = ParamStore::new();
        let embed_w = store.add_glorot("embed.weight", in_dim, c, seed)?;
        let embed_b = store.add("embed.bias", Tensor::zeros(&[1, c]), true)?;
        let mut conv = ConvLayerConfig::new(c, c, config.nbhd);
        conv.mc_fraction = config.mc_fraction;
        conv.kernel_hidden = config.kernel_hidden.clone();
        conv.orbit_weight = config.orbit_weight;
        let blocks = (0..config.blocks)
            .map(|i| ResidualBlock::new(&mut store, &format!("block{i}"), conv.clone(), config.group, seed))
            .collect::<gigp_core::Result<Vec<_>>>()?;
        let pool = match config.pooling {
            Pooling::Mean => Pool::Mean,
            Pooling::Gigp => {
                let (anchors, sigma) = match anchors {
                    AnchorInit::FromOrbits(sample) => {
                        let sample = &sample[..sample.len().min(ANCHOR_SAMPLE)];
                        let (a, s) = init_anchors(sample, config.gigp_anchors)?;
                        (a, config.gigp_sigma.unwrap_or(s))
                    }
                    AnchorInit::Fixed(a, s) => (a.to_vec(), s),
                };
                let layer = GigpLayer::new(&mut store, "pool", &anchors, sigma, c, &config.gigp_phi_hidden, config.learn_anchors, seed)?;
                store.add("pool.sigma", Tensor::scalar(sigma), false)?;
                Pool::Gigp(layer)
            }
        };
        let mut widths = vec![c];
        widths.extend(&config.head_hidden);
        widths.push(out_dim);
        let head = Mlp::new(&mut store, "head", &widths, false, seed)?;
        let target_stats = store.add("target.stats", Tensor::row(vec![0.0, 1.0]), false)?;
        Ok(Self { config: config.clone(), store, embed_w, embed_b, blocks, pool, head, target_stats })
    }

    pub fn pool(&self) -> &Pool {
        &self.pool
    }

    pub fn blocks(&self) -> &[ResidualBlock] {
        &self.blocks
    }

    pub fn param_count(&self) -> usize {
        self.store.scalar_count()
    }

    pub fn target_stats(&self) -> (f64, f64) {
        let s = self.store.get(self.target_stats).data();
        (s[0], s[1])
    }

    pub fn set_target_stats(&mut self, mean: f64, std: f64) {
        self.store.get_mut(self.target_stats).data_mut().copy_from_slice(&[mean, std]);
    }

    pub fn prepare(&self, cloud: &RawPointCloud) -> Result<Prepared> {
        let (in_dim, _) = task_dims(self.config.task);
        if cloud.feat_dim != in_dim {
            bail!("model expects {in_dim} input features, cloud has {}", cloud.feat_dim);
        }
        let lifted = lift(cloud, self.config.group)?;
        let geom = ConvGeometry::build(&lifted, self.config.nbhd.min(lifted.len()), self.config.orbit_weight)?;
        Ok(Prepared { orbits: lifted.orbits(), geom, feats: Tensor::matrix(cloud.len(), cloud.feat_dim, cloud.features.clone())? })
    }

    /// Per-point features after the residual blocks, `[N, channels]`.
    pub fn point_features(&self, tape: &mut Tape, bound: &Bound, p: &Prepared, mc_seed: u64) -> Result<Var> {
        let x = tape.constant(p.feats.clone());
        let h = tape.matmul(x, bound.var(self.embed_w))?;
        let mut h = tape.add_row(h, bound.var(self.embed_b))?;
        for (i, block) in self.blocks.iter().enumerate() {
            h = block.forward(tape, bound, h, &p.geom, mc_seed.wrapping_add(2 * i as u64))?;
        }
        Ok(h)
    }

    /// Raw head output `[1, out]`; standardized for regression tasks.
    pub fn forward(&self, tape: &mut Tape, bound: &Bound, p: &Prepared, mc_seed: u64) -> Result<Var> {
        let h = self.point_features(tape, bound, p, mc_seed)?;
        let h = tape.swish(h);
        let pooled = match &self.pool {
            Pool::Mean => tape.mean_rows(h),
            Pool::Gigp(layer) => layer.forward(tape, bound, h, &p.orbits)?,
        };
        Ok(self.head.forward(tape, bound, pooled)?)
    }

    pub fn loss(&self, tape: &mut Tape, bound: &Bound, p: &Prepared, target: Target, mc_seed: u64) -> Result<Var> {
        let out = self.forward(tape, bound, p, mc_seed)?;
        Ok(match target {
            Target::Class(c) => tape.softmax_cross_entropy(out, &[c])?,
            Target::Value(y) => {
                let (mean, std) = self.target_stats();
                let t = tape.constant(Tensor::row(vec![(y - mean) / std]));
                let d = tape.sub(out, t)?;
                let sq = tape.square(d);
                tape.sum(sq)
            }
        })
    }

    /// Head output mapped back to task units (logits, or de-standardized values).
    pub fn predict_prepared(&self, tape: &mut Tape, bound: &Bound, p: &Prepared, mc_seed: u64) -> Result<Vec<f64>> {
        let out = self.forward(tape, bound, p, mc_seed)?;
        let mut v = tape.value(out).data().to_vec();
        if !self.config.task.is_classification() {
            let (mean, std) = self.target_stats();
            v.iter_mut().for_each(|x| *x = *x * std + mean);
        }
        Ok(v)
    }

    pub fn predict(&self, cloud: &RawPointCloud, mc_seed: u64) -> Result<Vec<f64>> {
        let p = self.prepare(cloud)?;
        let mut tape = Tape::new();
        let bound = self.store.bind(&mut tape, false);
        self.predict_prepared(&mut tape, &bound, &p, mc_seed)
    }

    pub fn save(&self, w: &mut impl Write) -> Result<()> {
        write_checkpoint(w, self.store.entries().iter().map(|e| (e.name.as_str(), &e.tensor)))?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.save(&mut buf).expect("writing to memory");
        buf
    }

    /// Rebuilds a model of the given config from checkpoint tensors.
    pub fn load(config: &ExperimentConfig, r: &mut impl Read) -> Result<Self> {
        let named = read_checkpoint(r)?;
        let find = |name: &str| named.iter().find(|(n, _)| n == name).map(|(_, t)| t);
        let mut model = match config.pooling {
            Pooling::Mean => Model::build(config, AnchorInit::FromOrbits(&[]))?,
            Pooling::Gigp => {
                let anchors = find("pool.anchors").ok_or_else(|| anyhow!("checkpoint has no pool.anchors"))?;
                let sigma = find("pool.sigma").ok_or_else(|| anyhow!("checkpoint has no pool.sigma"))?;
                Model::build(config, AnchorInit::Fixed(anchors.data(), sigma.item()))?
            }
        };
        model.store.load_named(named).context("checkpoint does not match the config")?;
        Ok(model)
    }
}
