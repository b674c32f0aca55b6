//! Group convolution over lifted point clouds.
//!
//! For a target `u` the layer averages `K(a(u, v), q_u, q_v) · f(v)` over the
//! `k` nearest points `v`, where `a(u, v)` are the algebra coordinates of
//! `log(v⁻¹u)` and `K` is an MLP whose last linear layer is read as an
//! `out × in` matrix. The average is the uniform Monte-Carlo estimate of the
//! convolution integral over the neighborhood; with `mc_fraction < 1` only a
//! seeded random subset of each neighborhood is used.
//!
//! SO(3) lifts carry an arbitrary stabilizer component (rotations about the
//! first axis), so `log(v⁻¹u)` is reduced to its double-coset representative
//! `(0, 0, θ)`, with `θ` the angle between the directions of the two points.
//! This is the only part of `log(v⁻¹u)` that does not depend on the choice of
//! lift, which keeps the layer exactly equivariant.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::group::{normalize_angle, GroupElement, GroupId};
use crate::lifting::{LiftedCloud, LiftedPoint};
use crate::nn::{Bound, Mlp, ParamId, ParamStore, Tape, Tensor, Var};

/// Weight of squared orbit separation in the neighborhood metric.
pub const DEFAULT_ORBIT_WEIGHT: f64 = 1.0;

/// Distances closer than this are treated as ties and ordered by index.
const TIE_RESOLUTION: f64 = 1e-9;

/// SO(2) differences within this of −π are mapped to π.
const BRANCH_SNAP: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayerConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Neighborhood size `k`.
    pub nbhd: usize,
    /// Fraction of each neighborhood sampled per forward pass.
    pub mc_fraction: f64,
    pub kernel_hidden: Vec<usize>,
    /// `λ` in `d² = ‖a‖² + λ (q − q')²`.
    pub orbit_weight: f64,
}

impl ConvLayerConfig {
    pub fn new(in_channels: usize, out_channels: usize, nbhd: usize) -> Self {
        Self { in_channels, out_channels, nbhd, mc_fraction: 1.0, kernel_hidden: vec![16, 16], orbit_weight: DEFAULT_ORBIT_WEIGHT }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.nbhd == 0 {
            return Err(Error::InvalidArgument("channels and neighborhood size must be positive".into()));
        }
        if !(self.mc_fraction > 0.0 && self.mc_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!("mc_fraction {} not in (0, 1]", self.mc_fraction)));
        }
        if self.kernel_hidden.is_empty() || self.kernel_hidden.contains(&0) {
            return Err(Error::InvalidArgument("kernel needs at least one hidden layer".into()));
        }
        if !(self.orbit_weight >= 0.0) {
            return Err(Error::InvalidArgument("orbit weight must be nonnegative".into()));
        }
        Ok(())
    }

    /// Neighbors actually averaged per point.
    pub fn sample_size(&self, k: usize) -> usize {
        ((self.mc_fraction * k as f64).ceil() as usize).clamp(1, k)
    }
}

/// Algebra coordinates of `log(v⁻¹u)`, reduced modulo stabilizers where the
/// group has them. Pairs involving a point at the origin get zero.
pub fn pair_algebra(u: &LiftedPoint, v: &LiftedPoint) -> Vec<f64> {
    let degenerate = u.orbit == 0.0 || v.orbit == 0.0;
    match (&u.elem, &v.elem) {
        (GroupElement::SO2(a), GroupElement::SO2(b)) => {
            if degenerate {
                return vec![0.0];
            }
            let mut d = normalize_angle(a - b);
            if d <= -std::f64::consts::PI + BRANCH_SNAP {
                d = std::f64::consts::PI;
            }
            vec![d]
        }
        (GroupElement::SO3(a), GroupElement::SO3(b)) => {
            if degenerate {
                return vec![0.0; 3];
            }
            let (x, y) = (a.column(0), b.column(0));
            let theta = x.cross(&y).norm().atan2(x.dot(&y));
            vec![0.0, 0.0, theta]
        }
        (GroupElement::Tn(a), GroupElement::Tn(b)) => a.iter().zip(b).map(|(p, q)| p - q).collect(),
        _ => panic!("pair_algebra on mixed groups"),
    }
}

pub fn pair_distance(u: &LiftedPoint, v: &LiftedPoint, orbit_weight: f64) -> f64 {
    let a: f64 = pair_algebra(u, v).iter().map(|x| x * x).sum();
    let dq = u.orbit - v.orbit;
    (a + orbit_weight * dq * dq).sqrt()
}

/// The `k` nearest points to `target`, nearest first, the target itself first
/// of all. Ties (within 1e−9) are broken by ascending index.
pub fn neighborhood(target: usize, cloud: &LiftedCloud, k: usize, orbit_weight: f64) -> Result<Vec<usize>> {
    let n = cloud.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("neighborhood size {k} for {n} points")));
    }
    if target >= n {
        return Err(Error::InvalidArgument(format!("target {target} out of {n} points")));
    }
    let u = &cloud.points[target];
    let mut others: Vec<(i64, usize)> = (0..n)
        .filter(|&j| j != target)
        .map(|j| {
            let d = pair_distance(u, &cloud.points[j], orbit_weight);
            ((d / TIE_RESOLUTION).round() as i64, j)
        })
        .collect();
    others.sort_unstable();
    let mut out = Vec::with_capacity(k);
    out.push(target);
    out.extend(others.into_iter().take(k - 1).map(|(_, j)| j));
    Ok(out)
}

/// Precomputed neighborhoods and kernel inputs of a cloud. Depends only on
/// geometry, so it is shared by every layer and every epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGeometry {
    pub n: usize,
    pub k: usize,
    /// `n × k` neighbor indices.
    pub neighbors: Vec<usize>,
    /// `(n·k) × (algebra_dim + 2)` rows of `[a(u, v), q_u, q_v]`.
    pub pair_inputs: Tensor,
}

impl ConvGeometry {
    pub fn build(cloud: &LiftedCloud, k: usize, orbit_weight: f64) -> Result<Self> {
        let n = cloud.len();
        let k = k.min(n);
        let width = cloud.group.algebra_dim() + 2;
        let mut neighbors = Vec::with_capacity(n * k);
        let mut inputs = Vec::with_capacity(n * k * width);
        for i in 0..n {
            let u = &cloud.points[i];
            for j in neighborhood(i, cloud, k, orbit_weight)? {
                let v = &cloud.points[j];
                neighbors.push(j);
                inputs.extend(pair_algebra(u, v));
                inputs.push(u.orbit);
                inputs.push(v.orbit);
            }
        }
        Ok(Self { n, k, neighbors, pair_inputs: Tensor::matrix(n * k, width, inputs)? })
    }

    pub fn input_width(&self) -> usize {
        self.pair_inputs.cols()
    }

    /// Keeps `s` seeded-random neighbors of every point, preserving their order.
    pub fn sample(&self, s: usize, seed: u64) -> (Vec<usize>, Tensor) {
        if s >= self.k {
            return (self.neighbors.clone(), self.pair_inputs.clone());
        }
        let width = self.input_width();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut neighbors = Vec::with_capacity(self.n * s);
        let mut inputs = Vec::with_capacity(self.n * s * width);
        for i in 0..self.n {
            let mut pick = index::sample(&mut rng, self.k, s).into_vec();
            pick.sort_unstable();
            for t in pick {
                let row = i * self.k + t;
                neighbors.push(self.neighbors[row]);
                inputs.extend_from_slice(&self.pair_inputs.data()[row * width..(row + 1) * width]);
            }
        }
        (neighbors, Tensor::matrix(self.n * s, width, inputs).unwrap())
    }
}

/// One convolution layer; parameters live in a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct ConvLayer {
    pub config: ConvLayerConfig,
    kernel: Mlp,
    /// Final kernel layer laid out as `[(r + 1)·in, out]`: row `j·in + i`
    /// holds the weights from hidden unit `j` (or the bias when `j = r`) to
    /// entry `(·, i)` of the `out × in` kernel matrix.
    mix: ParamId,
}

impl ConvLayer {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        config: ConvLayerConfig,
        group: GroupId,
        seed: u64,
        zero_output: bool,
    ) -> Result<Self> {
        config.validate()?;
        let mut widths = vec![group.algebra_dim() + 2];
        widths.extend(&config.kernel_hidden);
        let kernel = Mlp::new(store, &format!("{prefix}.kernel"), &widths, true, seed)?;
        let rows = (kernel.out_dim() + 1) * config.in_channels;
        let mix = if zero_output {
            store.add(format!("{prefix}.mix"), Tensor::zeros(&[rows, config.out_channels]), true)?
        } else {
            let id = store.add_glorot(&format!("{prefix}.mix"), rows, config.out_channels, seed)?;
            // Each output averages over (r + 1)·in products; keep activations O(1).
            let fan = (kernel.out_dim() + 1) as f64;
            store.get_mut(id).data_mut().iter_mut().for_each(|w| *w /= fan.sqrt());
            id
        };
        Ok(Self { config, kernel, mix })
    }

    pub fn mix(&self) -> ParamId {
        self.mix
    }

    pub fn kernel(&self) -> &Mlp {
        &self.kernel
    }

    /// Features `[n, in]` → `[n, out]` over a precomputed geometry.
    pub fn forward(&self, tape: &mut Tape, bound: &Bound, feats: Var, geom: &ConvGeometry, mc_seed: u64) -> Result<Var> {
        let t = tape.value(feats);
        if t.cols() != self.config.in_channels || t.rows() != geom.n {
            return Err(Error::ShapeMismatch { op: "conv_forward", lhs: t.shape().to_vec(), rhs: vec![geom.n, self.config.in_channels] });
        }
        let s = self.config.sample_size(geom.k);
        let (neighbors, inputs) = geom.sample(s, mc_seed);
        let x = tape.constant(inputs);
        let k = self.kernel.forward(tape, bound, x)?;
        let k = tape.append_ones_col(k);
        let f = tape.gather_rows(feats, &neighbors)?;
        let m = tape.pair_contract(k, f, s)?;
        tape.matmul(m, bound.var(self.mix))
    }

    /// The `out × in` kernel matrix `K(a, q_u, q_v)` for one kernel input row.
    pub fn kernel_matrix(&self, store: &ParamStore, input: &[f64]) -> Result<Tensor> {
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape, false);
        let x = tape.constant(Tensor::row(input.to_vec()));
        let h = self.kernel.forward(&mut tape, &bound, x)?;
        let h = tape.append_ones_col(h);
        let hidden = tape.value(h).data().to_vec();
        let (cin, cout) = (self.config.in_channels, self.config.out_channels);
        let mix = store.get(self.mix).data();
        let mut out = vec![0.0; cout * cin];
        for (j, hj) in hidden.iter().enumerate() {
            for i in 0..cin {
                for o in 0..cout {
                    out[o * cin + i] += hj * mix[(j * cin + i) * cout + o];
                }
            }
        }
        Tensor::matrix(cout, cin, out)
    }
}

/// Applies one layer to a lifted cloud; geometry passes through unchanged.
pub fn conv_forward(layer: &ConvLayer, store: &ParamStore, cloud: &LiftedCloud, mc_seed: u64) -> Result<LiftedCloud> {
    if cloud.feat_dim() != layer.config.in_channels {
        return Err(Error::DimensionMismatch { expected: layer.config.in_channels, actual: cloud.feat_dim() });
    }
    let geom = ConvGeometry::build(cloud, layer.config.nbhd.min(cloud.len()), layer.config.orbit_weight)?;
    let mut tape = Tape::new();
    let bound = store.bind(&mut tape, false);
    let f = tape.constant(Tensor::matrix(cloud.len(), cloud.feat_dim(), cloud.feature_matrix())?);
    let h = layer.forward(&mut tape, &bound, f, &geom, mc_seed)?;
    cloud.with_features(layer.config.out_channels, tape.value(h).data())
}

/// `f + conv2(swish(conv1(f)))`, with `conv2`'s final kernel layer zeroed at
/// construction so the block starts as the identity.
#[derive(Clone, Debug)]
pub struct ResidualBlock {
    pub conv1: ConvLayer,
    pub conv2: ConvLayer,
}

impl ResidualBlock {
    pub fn new(store: &mut ParamStore, prefix: &str, config: ConvLayerConfig, group: GroupId, seed: u64) -> Result<Self> {
        if config.in_channels != config.out_channels {
            return Err(Error::InvalidArgument("residual blocks need equal in and out channels".into()));
        }
        let conv1 = ConvLayer::new(store, &format!("{prefix}.conv1"), config.clone(), group, seed, false)?;
        let conv2 = ConvLayer::new(store, &format!("{prefix}.conv2"), config, group, seed, true)?;
        Ok(Self { conv1, conv2 })
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, feats: Var, geom: &ConvGeometry, mc_seed: u64) -> Result<Var> {
        let h = self.conv1.forward(tape, bound, feats, geom, mc_seed)?;
        let h = tape.swish(h);
        let h = self.conv2.forward(tape, bound, h, geom, mc_seed.wrapping_add(1))?;
        tape.add(feats, h)
    }
}

pub fn residual_block(cloud: &LiftedCloud, block: &ResidualBlock, store: &ParamStore, mc_seed: u64) -> Result<LiftedCloud> {
    let c = block.conv1.config.in_channels;
    if cloud.feat_dim() != c {
        return Err(Error::DimensionMismatch { expected: c, actual: cloud.feat_dim() });
    }
    let cfg = &block.conv1.config;
    let geom = ConvGeometry::build(cloud, cfg.nbhd.min(cloud.len()), cfg.orbit_weight)?;
    let mut tape = Tape::new();
    let bound = store.bind(&mut tape, false);
    let f = tape.constant(Tensor::matrix(cloud.len(), c, cloud.feature_matrix())?);
    let h = block.forward(&mut tape, &bound, f, &geom, mc_seed)?;
    cloud.with_features(c, tape.value(h).data())
}

/// Uniform random subset of `m` points without replacement, in original order.
pub fn subsample(cloud: &LiftedCloud, m: usize, seed: u64) -> Result<LiftedCloud> {
    let n = cloud.len();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("cannot keep {m} of {n} points")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = index::sample(&mut rng, n, m).into_vec();
    keep.sort_unstable();
    Ok(LiftedCloud { group: cloud.group, points: keep.into_iter().map(|i| cloud.points[i].clone()).collect() })
}
