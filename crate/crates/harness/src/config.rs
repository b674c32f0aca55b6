//! Experiment configuration: a flat `key = value` file with `#` comments.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use gigp_core::GroupId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    RotDigits,
    SynthInvariant,
    XyzRegression,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pooling {
    Mean,
    Gigp,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::RotDigits => "rot_digits",
            Task::SynthInvariant => "synth_invariant",
            Task::XyzRegression => "xyz_regression",
        }
    }

    pub fn is_classification(self) -> bool {
        self == Task::RotDigits
    }
}

impl Pooling {
    pub fn name(self) -> &'static str {
        match self {
            Pooling::Mean => "mean",
            Pooling::Gigp => "gigp",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub task: Task,
    pub group: GroupId,
    pub pooling: Pooling,
    pub channels: usize,
    pub blocks: usize,
    pub nbhd: usize,
    pub mc_fraction: f64,
    pub kernel_hidden: Vec<usize>,
    pub orbit_weight: f64,
    pub gigp_anchors: usize,
    pub gigp_sigma: Option<f64>,
    pub gigp_phi_hidden: Vec<usize>,
    pub learn_anchors: bool,
    pub head_hidden: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,

    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Digits: pixels brighter than this become points.
    pub threshold: f64,
    /// Digits: clouds larger than this are subsampled.
    pub max_points: usize,
    /// Synthetic task: points per cloud.
    pub synth_points: usize,

    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub val_images: Option<PathBuf>,
    pub val_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub train_data: Option<PathBuf>,
    pub val_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: Task::RotDigits,
            group: GroupId::SO2,
            pooling: Pooling::Gigp,
            channels: 32,
            blocks: 2,
            nbhd: 16,
            mc_fraction: 1.0,
            kernel_hidden: vec![16, 16],
            orbit_weight: 1.0,
            gigp_anchors: 4,
            gigp_sigma: None,
            gigp_phi_hidden: vec![16],
            learn_anchors: false,
            head_hidden: Vec::new(),
            lr: 0.003,
            batch_size: 32,
            epochs: 30,
            seed: 0,
            n_train: 2000,
            n_val: 500,
            n_test: 1000,
            threshold: 0.5,
            max_points: 64,
            synth_points: 16,
            train_images: None,
            train_labels: None,
            val_images: None,
            val_labels: None,
            test_images: None,
            test_labels: None,
            train_data: None,
            val_data: None,
            test_data: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow!("{key}: cannot parse {value:?}: {e}"))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.is_empty() || value == "none" {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn list_text(v: &[usize]) -> String {
    if v.is_empty() {
        "none".into()
    } else {
        v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
    }
}

impl ExperimentConfig {
    /// Parses config text; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut c = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected key = value", lineno + 1))?;
            c.set(key.trim(), value.trim(), base).with_context(|| format!("line {}", lineno + 1))?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = || Some(base.join(value));
        match key {
            "task" => {
                self.task = match value {
                    "rot_digits" => Task::RotDigits,
                    "synth_invariant" => Task::SynthInvariant,
                    "xyz_regression" => Task::XyzRegression,
                    _ => bail!("unknown task {value:?}"),
                }
            }
            "group" => {
                self.group = match value {
                    "SO2" => GroupId::SO2,
                    "SO3" => GroupId::SO3,
                    _ => bail!("unsupported group {value:?}"),
                }
            }
            "pooling" => {
                self.pooling = match value {
                    "mean" => Pooling::Mean,
                    "gigp" => Pooling::Gigp,
                    _ => bail!("unknown pooling {value:?}"),
                }
            }
            "channels" => self.channels = parse(key, value)?,
            "blocks" => self.blocks = parse(key, value)?,
            "nbhd" => self.nbhd = parse(key, value)?,
            "mc_fraction" => self.mc_fraction = parse(key, value)?,
            "kernel_hidden" => self.kernel_hidden = parse_list(key, value)?,
            "orbit_weight" => self.orbit_weight = parse(key, value)?,
            "gigp_anchors" => self.gigp_anchors = parse(key, value)?,
            "gigp_sigma" => self.gigp_sigma = if value == "auto" { None } else { Some(parse(key, value)?) },
            "gigp_phi_hidden" => self.gigp_phi_hidden = parse_list(key, value)?,
            "learn_anchors" => self.learn_anchors = parse(key, value)?,
            "head_hidden" => self.head_hidden = parse_list(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "n_train" => self.n_train = parse(key, value)?,
            "n_val" => self.n_val = parse(key, value)?,
            "n_test" => self.n_test = parse(key, value)?,
            "threshold" => self.threshold = parse(key, value)?,
            "max_points" => self.max_points = parse(key, value)?,
            "synth_points" => self.synth_points = parse(key, value)?,
            "train_images" => self.train_images = path(),
            "train_labels" => self.train_labels = path(),
            "val_images" => self.val_images = path(),
            "val_labels" => self.val_labels = path(),
            "test_images" => self.test_images = path(),
            "test_labels" => self.test_labels = path(),
            "train_data" => self.train_data = path(),
            "val_data" => self.val_data = path(),
            "test_data" => self.test_data = path(),
            _ => bail!("unknown key {key:?}"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("channels", self.channels),
            ("blocks", self.blocks),
            ("nbhd", self.nbhd),
            ("gigp_anchors", self.gigp_anchors),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("n_train", self.n_train),
            ("n_val", self.n_val),
            ("n_test", self.n_test),
            ("max_points", self.max_points),
            ("synth_points", self.synth_points),
        ];
        for (name, v) in counts {
            if v == 0 {
                bail!("{name} must be at least 1");
            }
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            bail!("lr must be finite and nonnegative");
        }
        if !(self.mc_fraction > 0.0 && self.mc_fraction <= 1.0) {
            bail!("mc_fraction must lie in (0, 1]");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            bail!("threshold must lie in (0, 1)");
        }
        if let Some(s) = self.gigp_sigma {
            if !(s > 0.0) {
                bail!("gigp_sigma must be positive");
            }
        }
        if self.kernel_hidden.is_empty() {
            bail!("kernel_hidden needs at least one layer");
        }
        match (self.task, self.group) {
            (Task::RotDigits, GroupId::SO2) | (Task::XyzRegression, GroupId::SO3) | (Task::SynthInvariant, _) => Ok(()),
            (task, group) => bail!("task {} does not run on group {group}", task.name()),
        }
    }

    /// Canonical text form; parsing it back yields an equal config.
    pub fn to_text(&self) -> String {
        let group = match self.group {
            GroupId::SO2 => "SO2",
            GroupId::SO3 => "SO3",
            GroupId::Tn(_) => unreachable!("validated"),
        };
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("task", self.task.name().into());
        kv("group", group.into());
        kv("pooling", self.pooling.name().into());
        kv("channels", self.channels.to_string());
        kv("blocks", self.blocks.to_string());
        kv("nbhd", self.nbhd.to_string());
        kv("mc_fraction", format!("{:?}", self.mc_fraction));
        kv("kernel_hidden", list_text(&self.kernel_hidden));
        kv("orbit_weight", format!("{:?}", self.orbit_weight));
        kv("gigp_anchors", self.gigp_anchors.to_string());
        kv("gigp_sigma", self.gigp_sigma.map_or("auto".into(), |s| format!("{s:?}")));
        kv("gigp_phi_hidden", list_text(&self.gigp_phi_hidden));
        kv("learn_anchors", self.learn_anchors.to_string());
        kv("head_hidden", list_text(&self.head_hidden));
        kv("lr", format!("{:?}", self.lr));
        kv("batch_size", self.batch_size.to_string());
        kv("epochs", self.epochs.to_string());
        kv("seed", self.seed.to_string());
        kv("n_train", self.n_train.to_string());
        kv("n_val", self.n_val.to_string());
        kv("n_test", self.n_test.to_string());
        kv("threshold", format!("{:?}", self.threshold));
        kv("max_points", self.max_points.to_string());
        kv("synth_points", self.synth_points.to_string());
        let paths = [
            ("train_images", &self.train_images),
            ("train_labels", &self.train_labels),
            ("val_images", &self.val_images),
            ("val_labels", &self.val_labels),
            ("test_images", &self.test_images),
            ("test_labels", &self.test_labels),
            ("train_data", &self.train_data),
            ("val_data", &self.val_data),
            ("test_data", &self.test_data),
        ];
        for (k, p) in paths {
            if let Some(p) = p {
                let abs = std::path::absolute(p).unwrap_or_else(|_| p.clone());
                kv(k, abs.display().to_string());
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments_and_resolves_paths() {
        let text = "# desk run\ntask = synth_invariant\n\npooling = mean # baseline\nchannels=8\nkernel_hidden = 4, 4\ntrain_data = data/train.jsonl\ngigp_sigma = 0.25\n";
        let c = ExperimentConfig::parse(text, Path::new("/base")).unwrap();
        assert_eq!(c.task, Task::SynthInvariant);
        assert_eq!(c.pooling, Pooling::Mean);
        assert_eq!(c.channels, 8);
        assert_eq!(c.kernel_hidden, vec![4, 4]);
        assert_eq!(c.gigp_sigma, Some(0.25));
        assert_eq!(c.train_data, Some(PathBuf::from("/base/data/train.jsonl")));
        assert_eq!(c.blocks, 2);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_errors() {
        let base = Path::new(".");
        let err = ExperimentConfig::parse("chanels = 3", base).unwrap_err();
        assert!(format!("{err:#}").contains("unknown key"));
        assert!(ExperimentConfig::parse("channels = 0", base).is_err());
        assert!(ExperimentConfig::parse("lr = -1", base).is_err());
        assert!(ExperimentConfig::parse("mc_fraction = 1.5", base).is_err());
        assert!(ExperimentConfig::parse("mc_fraction = 0", base).is_err());
        assert!(ExperimentConfig::parse("channels", base).is_err());
        assert!(ExperimentConfig::parse("task = rot_digits\ngroup = SO3", base).is_err());
    }

    #[test]
    fn text_form_roundtrips() {
        let mut c = ExperimentConfig {
            task: Task::SynthInvariant,
            group: GroupId::SO3,
            gigp_sigma: Some(0.3),
            mc_fraction: 0.1 + 0.2,
            head_hidden: vec![7],
            ..Default::default()
        };
        c.test_data = Some(PathBuf::from("/abs/test.jsonl"));
        let back = ExperimentConfig::parse(&c.to_text(), Path::new("/elsewhere")).unwrap();
        assert_eq!(back, c);
    }
}
