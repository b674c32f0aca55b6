//! Group Invariant Global Pooling.
//!
//! Points are softly assigned to `M` anchor orbits by a Gaussian softmax over
//! orbit distance. Each anchor collects the assignment-weighted sum `s_m` of
//! the point features, which is invariant because the group action keeps
//! every point on its orbit. The pooled output is
//!
//! ```text
//! C · Σ_m w_m · Φ(s_m, q_m),   Φ(s, q) = s / N + alpha · MLP(s, q)
//! ```
//!
//! With `alpha = 0`, `w = 1` and `C = 1` this is exactly global mean pooling,
//! which is how the layer is initialized.

use crate::error::{Error, Result};
use crate::lifting::LiftedCloud;
use crate::nn::tape::softmax_in_place;
use crate::nn::{Bound, Mlp, ParamId, ParamStore, Tape, Tensor, Var};

/// Smallest bandwidth produced by [`init_anchors`].
pub const MIN_BANDWIDTH: f64 = 1e-3;

/// Soft membership of each orbit coordinate in each anchor orbit, `N × M`
/// row-major; rows sum to one.
pub fn assign_orbits(orbits: &[f64], anchors: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("bandwidth {sigma} must be positive")));
    }
    if anchors.is_empty() {
        return Err(Error::InvalidArgument("no anchor orbits".into()));
    }
    let scale = -1.0 / (2.0 * sigma * sigma);
    let mut out = Vec::with_capacity(orbits.len() * anchors.len());
    for q in orbits {
        let start = out.len();
        out.extend(anchors.iter().map(|a| (q - a) * (q - a) * scale));
        softmax_in_place(&mut out[start..]);
    }
    Ok(out)
}

/// Type-7 (linear interpolation) empirical quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Anchors at the centers of `m` equal-mass bins of the sampled orbit
/// coordinates, and a bandwidth equal to the median nearest-anchor gap.
///
/// Coinciding quantiles are merged, so fewer than `m` anchors may come back.
pub fn init_anchors(orbits_sample: &[f64], m: usize) -> Result<(Vec<f64>, f64)> {
    if orbits_sample.is_empty() || m == 0 {
        return Err(Error::InvalidArgument("need a nonempty sample and at least one anchor".into()));
    }
    let mut sorted = orbits_sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let raw: Vec<f64> = (0..m).map(|k| quantile(&sorted, (2 * k + 1) as f64 / (2 * m) as f64)).collect();
    let mut gaps: Vec<f64> = (0..m)
        .filter_map(|k| {
            let left = k.checked_sub(1).map(|j| raw[k] - raw[j]);
            let right = raw.get(k + 1).map(|r| r - raw[k]);
            match (left, right) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            }
        })
        .collect();
    gaps.sort_by(f64::total_cmp);
    let median_gap = if gaps.is_empty() {
        0.0
    } else if gaps.len() % 2 == 1 {
        gaps[gaps.len() / 2]
    } else {
        0.5 * (gaps[gaps.len() / 2 - 1] + gaps[gaps.len() / 2])
    };
    let mut anchors = raw;
    anchors.dedup();
    Ok((anchors, median_gap.max(MIN_BANDWIDTH)))
}

/// Canonical reduction order: by orbit coordinate, then by original index.
pub fn canonical_order(orbits: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..orbits.len()).collect();
    order.sort_by(|&a, &b| orbits[a].total_cmp(&orbits[b]).then(a.cmp(&b)));
    order
}

#[derive(Clone, Debug)]
pub struct GigpLayer {
    pub sigma: f64,
    pub feat_dim: usize,
    phi: Mlp,
    anchors: ParamId,
    w: ParamId,
    alpha: ParamId,
    c: ParamId,
}

impl GigpLayer {
    /// Builds the layer already initialized as mean pooling. Anchors are frozen
    /// unless `learn_anchors` is set.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        anchors: &[f64],
        sigma: f64,
        feat_dim: usize,
        phi_hidden: &[usize],
        learn_anchors: bool,
        seed: u64,
    ) -> Result<Self> {
        if anchors.is_empty() || !(sigma > 0.0) || feat_dim == 0 {
            return Err(Error::InvalidArgument("GIGP needs anchors, a positive bandwidth and features".into()));
        }
        if anchors.windows(2).any(|w| !(w[0] < w[1])) || anchors.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::InvalidArgument("anchors must be nonnegative, ascending and distinct".into()));
        }
        let m = anchors.len();
        let anchors_id = store.add(format!("{prefix}.anchors"), Tensor::row(anchors.to_vec()), learn_anchors)?;
        let w = store.add(format!("{prefix}.w"), Tensor::filled(&[1, m], 1.0), true)?;
        let alpha = store.add(format!("{prefix}.alpha"), Tensor::scalar(0.0), true)?;
        // C is kept fixed after initialization; its role overlaps w entirely.
        let c = store.add(format!("{prefix}.c"), Tensor::scalar(1.0), false)?;
        let mut widths = vec![feat_dim + 1];
        widths.extend(phi_hidden);
        widths.push(feat_dim);
        let phi = Mlp::new(store, &format!("{prefix}.phi"), &widths, false, seed)?;
        Ok(Self { sigma, feat_dim, phi, anchors: anchors_id, w, alpha, c })
    }

    pub fn anchors<'a>(&self, store: &'a ParamStore) -> &'a [f64] {
        store.get(self.anchors).data()
    }

    pub fn num_anchors(&self, store: &ParamStore) -> usize {
        store.get(self.anchors).len()
    }

    pub fn ids(&self) -> GigpParamIds {
        GigpParamIds { anchors: self.anchors, w: self.w, alpha: self.alpha, c: self.c }
    }

    pub fn phi(&self) -> &Mlp {
        &self.phi
    }

    /// Resets `alpha = 0`, `w = 1`, `C = 1` so the layer pools by the mean.
    pub fn init_as_mean_pool(&self, store: &mut ParamStore) {
        store.get_mut(self.alpha).data_mut().fill(0.0);
        store.get_mut(self.w).data_mut().fill(1.0);
        store.get_mut(self.c).data_mut().fill(1.0);
    }

    /// Pools `[N, d]` features with their orbit coordinates into `[1, d]`.
    pub fn forward(&self, tape: &mut Tape, bound: &Bound, feats: Var, orbits: &[f64]) -> Result<Var> {
        let t = tape.value(feats);
        if t.cols() != self.feat_dim || t.rows() != orbits.len() {
            return Err(Error::ShapeMismatch { op: "gigp_forward", lhs: t.shape().to_vec(), rhs: vec![orbits.len(), self.feat_dim] });
        }
        let n = orbits.len();
        let order = canonical_order(orbits);
        let f = tape.gather_rows(feats, &order)?;
        let q = tape.constant(Tensor::matrix(n, 1, order.iter().map(|&i| orbits[i]).collect())?);

        let anchors = bound.var(self.anchors);
        let m = tape.value(anchors).len();
        let diff = tape.outer_sub(q, anchors);
        let sq = tape.square(diff);
        let logits = tape.scale(sq, -1.0 / (2.0 * self.sigma * self.sigma));
        let assign = tape.softmax_rows(logits);

        let assign_t = tape.transpose(assign);
        let sums = tape.matmul(assign_t, f)?;
        let anchor_col = tape.reshape(anchors, &[m, 1])?;
        let phi_in = tape.concat_cols(sums, anchor_col)?;
        let learned = self.phi.forward(tape, bound, phi_in)?;
        let learned = tape.mul_scalar(learned, bound.var(self.alpha))?;
        let base = tape.scale(sums, 1.0 / n as f64);
        let phi = tape.add(base, learned)?;

        let pooled = tape.matmul(bound.var(self.w), phi)?;
        tape.mul_scalar(pooled, bound.var(self.c))
    }
}

/// Handles of the scalar-ish GIGP parameters inside a store.
#[derive(Clone, Copy, Debug)]
pub struct GigpParamIds {
    pub anchors: ParamId,
    pub w: ParamId,
    pub alpha: ParamId,
    pub c: ParamId,
}

/// Pools a lifted cloud. Depends only on orbit coordinates and features.
pub fn gigp_forward(layer: &GigpLayer, store: &ParamStore, cloud: &LiftedCloud) -> Result<Vec<f64>> {
    if cloud.feat_dim() != layer.feat_dim {
        return Err(Error::DimensionMismatch { expected: layer.feat_dim, actual: cloud.feat_dim() });
    }
    let mut tape = Tape::new();
    let bound = store.bind(&mut tape, false);
    let f = tape.constant(Tensor::matrix(cloud.len(), layer.feat_dim, cloud.feature_matrix())?);
    let out = layer.forward(&mut tape, &bound, f, &cloud.orbits())?;
    Ok(tape.value(out).data().to_vec())
}
