//! Synthetic invariant regression: clouds on radial shells whose target is a
//! sum of per-shell contributions.

use std::io::{BufRead, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use gigp_core::RawPointCloud;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

pub const SHELLS: [f64; 3] = [1.0, 2.0, 3.0];
pub const RADIAL_NOISE: f64 = 0.05;

/// Contribution of one point on the shell of radius `r`.
pub fn shell_value(r: f64) -> f64 {
    r.sin() + r * r / 10.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSample {
    pub cloud: RawPointCloud,
    pub target: f64,
}

/// Each sample draws its own shell mixture weights, then places every point
/// on a shell with weight-proportional probability, at a uniformly random
/// direction and a radius perturbed by Gaussian noise. Features are all 1.
/// The target uses the nominal shell radii.
pub fn gen_synth_invariant(n_samples: usize, n_points: usize, dim: usize, seed: u64) -> Vec<SynthSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples)
        .map(|_| {
            let w: Vec<f64> = SHELLS.iter().map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = w.iter().sum();
            let mut coords = Vec::with_capacity(n_points * dim);
            let mut target = 0.0;
            for _ in 0..n_points {
                let mut u = rng.random::<f64>() * total;
                let mut shell = SHELLS.len() - 1;
                for (i, wi) in w.iter().enumerate() {
                    if u < *wi {
                        shell = i;
                        break;
                    }
                    u -= wi;
                }
                let r = SHELLS[shell];
                target += shell_value(r);
                let radius = r + RADIAL_NOISE * rng.sample::<f64, _>(StandardNormal);
                let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                coords.extend(dir.iter().map(|x| x / norm * radius));
            }
            SynthSample { cloud: RawPointCloud::new(dim, coords, 1, vec![1.0; n_points]).unwrap(), target }
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct Record {
    coords: Vec<Vec<f64>>,
    features: Vec<Vec<f64>>,
    target: f64,
}

pub fn write_jsonl(w: &mut impl Write, samples: &[SynthSample]) -> Result<()> {
    for s in samples {
        let c = &s.cloud;
        let rec = Record {
            coords: c.coords.chunks(c.dim).map(|p| p.to_vec()).collect(),
            features: c.features.chunks(c.feat_dim).map(|f| f.to_vec()).collect(),
            target: s.target,
        };
        serde_json::to_writer(&mut *w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(r: impl BufRead) -> Result<Vec<SynthSample>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).with_context(|| format!("line {}", i + 1))?;
        let dim = rec.coords.first().map_or(0, |p| p.len());
        let feat_dim = rec.features.first().map_or(0, |f| f.len());
        if rec.coords.iter().any(|p| p.len() != dim) || rec.features.iter().any(|f| f.len() != feat_dim) {
            bail!("line {}: ragged coordinates or features", i + 1);
        }
        let cloud =
            RawPointCloud::new(dim, rec.coords.concat(), feat_dim, rec.features.concat()).with_context(|| format!("line {}", i + 1))?;
        out.push(SynthSample { cloud, target: rec.target });
    }
    Ok(out)
}

pub fn load_jsonl(path: &Path) -> Result<Vec<SynthSample>> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_jsonl(std::io::BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}
