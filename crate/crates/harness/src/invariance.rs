//! Output invariance under random group elements.

use anyhow::Result;
use gigp_core::{AlgebraVector, GroupElement, GroupId, RawPointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const INVARIANCE_TOL: f64 = 1e-6;

/// A uniformly random rotation (Haar measure) of SO(2) or SO(3).
pub fn random_rotation(group: GroupId, rng: &mut impl Rng) -> GroupElement {
    match group {
        GroupId::SO2 => GroupElement::so2(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)),
        GroupId::SO3 => {
            // unit quaternion from a normalized Gaussian 4-vector, as axis-angle
            let q: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
            let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
            let (w, v) = (q[0] / n, [q[1] / n, q[2] / n, q[3] / n]);
            let s = (1.0 - w * w).max(0.0).sqrt();
            let angle = 2.0 * w.clamp(-1.0, 1.0).acos();
            let axis = if s < 1e-12 { [0.0; 3] } else { [v[0] / s, v[1] / s, v[2] / s] };
            GroupElement::exp(&AlgebraVector::new(group, axis.iter().map(|a| a * angle).collect()).unwrap())
        }
        GroupId::Tn(n) => GroupElement::translation((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceReport {
    pub samples: usize,
    pub transforms: usize,
    pub max_deviation: f64,
    /// `(sample, transform, deviation)` for every check above tolerance.
    pub failures: Vec<(usize, usize, f64)>,
}

impl InvarianceReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Max-abs difference of `f(g·x)` and `f(x)` over clouds and random `g`.
pub fn check_invariance<F>(f: F, clouds: &[RawPointCloud], group: GroupId, n_transforms: usize, seed: u64) -> Result<InvarianceReport>
where
    F: Fn(&RawPointCloud) -> Result<Vec<f64>>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = InvarianceReport { samples: clouds.len(), transforms: n_transforms, max_deviation: 0.0, failures: Vec::new() };
    for (i, cloud) in clouds.iter().enumerate() {
        let base = f(cloud)?;
        for t in 0..n_transforms {
            let g = random_rotation(group, &mut rng);
            let out = f(&cloud.transformed(&g)?)?;
            let dev = base.iter().zip(&out).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let dev = if base.len() == out.len() { dev } else { f64::INFINITY };
            report.max_deviation = report.max_deviation.max(dev);
            if !(dev < INVARIANCE_TOL) {
                report.failures.push((i, t, dev));
            }
        }
    }
    Ok(report)
}

/// Negative control: a "model" that returns the raw coordinates.
pub fn raw_coordinates(cloud: &RawPointCloud) -> Result<Vec<f64>> {
    Ok(cloud.coords.clone())
}
