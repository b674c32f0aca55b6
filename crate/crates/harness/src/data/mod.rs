//! Dataset ingestion for the three tasks.

pub mod digits;
pub mod idx;
pub mod synth;
pub mod xyz;

use std::path::Path;

use anyhow::{anyhow, bail, Result};
use gigp_core::RawPointCloud;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, Task};

pub use digits::image_to_cloud;
pub use idx::{load_idx_images, load_idx_labels, ImageSet};
pub use synth::{gen_synth_invariant, SynthSample};
pub use xyz::{load_xyz, load_xyz_frames, recenter, Molecule};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Target {
    Class(usize),
    Value(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub cloud: RawPointCloud,
    pub target: Target,
}

#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Stable 64-bit seed for a named stream under a base seed (FNV-1a).
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for b in tag.bytes().chain(seed.to_le_bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Loads digit images and labels, giving each image a uniform random rotation.
pub fn load_digits(images: &Path, labels: &Path, limit: usize, config: &ExperimentConfig, split: Split) -> Result<Vec<Example>> {
    let set = load_idx_images(images)?;
    let labels = load_idx_labels(labels)?;
    if labels.len() != set.images.len() {
        bail!("{} images but {} labels", set.images.len(), labels.len());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, split.name()));
    Ok(set
        .images
        .iter()
        .zip(labels)
        .take(limit)
        .map(|(img, label)| {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let sub_seed = rng.random();
            Example {
                cloud: image_to_cloud(img, set.rows, set.cols, config.threshold, config.max_points, angle, sub_seed),
                target: Target::Class(label as usize),
            }
        })
        .collect())
}

fn synth_examples(samples: Vec<SynthSample>, limit: usize) -> Vec<Example> {
    samples.into_iter().take(limit).map(|s| Example { cloud: s.cloud, target: Target::Value(s.target) }).collect()
}

fn xyz_examples(path: &Path, limit: usize) -> Result<Vec<Example>> {
    load_xyz_frames(path)?
        .into_iter()
        .take(limit)
        .enumerate()
        .map(|(i, m)| {
            let y = m.target().ok_or_else(|| anyhow!("{}: molecule {i} has no target in its comment", path.display()))?;
            Ok(Example { cloud: recenter(&m.cloud), target: Target::Value(y) })
        })
        .collect()
}

/// Loads one split of the configured task, capped at the configured size.
pub fn load_split(config: &ExperimentConfig, split: Split) -> Result<Vec<Example>> {
    let (limit, images, labels, data) = match split {
        Split::Train => (config.n_train, &config.train_images, &config.train_labels, &config.train_data),
        Split::Val => (config.n_val, &config.val_images, &config.val_labels, &config.val_data),
        Split::Test => (config.n_test, &config.test_images, &config.test_labels, &config.test_data),
    };
    let missing = |what: &str| anyhow!("config has no {}_{what} for task {}", split.name(), config.task.name());
    let examples = match config.task {
        Task::RotDigits => {
            let images = images.as_ref().ok_or_else(|| missing("images"))?;
            let labels = labels.as_ref().ok_or_else(|| missing("labels"))?;
            load_digits(images, labels, limit, config, split)?
        }
        Task::SynthInvariant => match data {
            Some(path) => synth_examples(synth::load_jsonl(path)?, limit),
            None => synth_examples(
                gen_synth_invariant(limit, config.synth_points, config.group.space_dim(), derive_seed(config.seed, split.name())),
                limit,
            ),
        },
        Task::XyzRegression => xyz_examples(data.as_ref().ok_or_else(|| missing("data"))?, limit)?,
    };
    if examples.is_empty() {
        bail!("{} split is empty", split.name());
    }
    let dim = config.group.space_dim();
    if let Some(e) = examples.iter().find(|e| e.cloud.dim != dim) {
        bail!("{} split has {}-d points but group {} acts on {dim}-d space", split.name(), e.cloud.dim, config.group);
    }
    Ok(examples)
}

pub fn load_splits(config: &ExperimentConfig) -> Result<Splits> {
    Ok(Splits { train: load_split(config, Split::Train)?, val: load_split(config, Split::Val)?, test: load_split(config, Split::Test)? })
}
