//! Lifting raw point clouds to group elements paired with orbit coordinates.
//!
//! For SO(n) acting on ℝⁿ the orbits are spheres, so the orbit coordinate is
//! the radius and the canonical origin of orbit `r` is `(r, 0, …, 0)`. Each
//! point is lifted to the single element carrying that origin onto it. For
//! SO(3) this is the minimal-geodesic rotation; the remaining stabilizer
//! freedom can be sampled with [`stabilizer_sample`].

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::group::{minimal_rotation, so3_exp, GroupElement, GroupId};

/// Coordinates and features of an unlifted cloud, both stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RawPointCloud {
    pub dim: usize,
    pub feat_dim: usize,
    pub coords: Vec<f64>,
    pub features: Vec<f64>,
}

impl RawPointCloud {
    pub fn new(dim: usize, coords: Vec<f64>, feat_dim: usize, features: Vec<f64>) -> Result<Self> {
        if dim == 0 || feat_dim == 0 {
            return Err(Error::InvalidArgument("point and feature dimensions must be positive".into()));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!("{} coordinates do not form a nonempty set of {dim}-d points", coords.len())));
        }
        let n = coords.len() / dim;
        if features.len() != n * feat_dim {
            return Err(Error::DimensionMismatch { expected: n * feat_dim, actual: features.len() });
        }
        if !coords.iter().chain(&features).all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinate or feature".into()));
        }
        Ok(Self { dim, feat_dim, coords, features })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.feat_dim..(i + 1) * self.feat_dim]
    }

    /// The same cloud with every point moved by `g`; features untouched.
    pub fn transformed(&self, g: &GroupElement) -> Result<Self> {
        let mut coords = Vec::with_capacity(self.coords.len());
        for i in 0..self.len() {
            coords.extend(g.act(self.point(i))?);
        }
        Ok(Self { coords, ..self.clone() })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiftedPoint {
    pub elem: GroupElement,
    /// Orbit coordinate: the radius for rotation groups, 0 for translations.
    pub orbit: f64,
    pub feature: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiftedCloud {
    pub group: GroupId,
    pub points: Vec<LiftedPoint>,
}

impl LiftedCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn feat_dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.feature.len())
    }

    pub fn orbits(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.orbit).collect()
    }

    /// Features stacked row-major into an `N × d` buffer.
    pub fn feature_matrix(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| p.feature.iter().copied()).collect()
    }

    /// Replaces the features, keeping the geometry.
    pub fn with_features(&self, feat_dim: usize, features: &[f64]) -> Result<Self> {
        if features.len() != self.len() * feat_dim {
            return Err(Error::DimensionMismatch { expected: self.len() * feat_dim, actual: features.len() });
        }
        let points = self
            .points
            .iter()
            .zip(features.chunks(feat_dim.max(1)))
            .map(|(p, f)| LiftedPoint { elem: p.elem.clone(), orbit: p.orbit, feature: f.to_vec() })
            .collect();
        Ok(Self { group: self.group, points })
    }

    /// Left-multiplies every element by `g`.
    pub fn left_multiplied(&self, g: &GroupElement) -> Result<Self> {
        let points = self
            .points
            .iter()
            .map(|p| Ok(LiftedPoint { elem: g.compose(&p.elem)?, orbit: p.orbit, feature: p.feature.clone() }))
            .collect::<Result<_>>()?;
        Ok(Self { group: self.group, points })
    }
}

fn check_dim(x: &[f64], group: GroupId) -> Result<()> {
    if x.len() != group.space_dim() {
        return Err(Error::DimensionMismatch { expected: group.space_dim(), actual: x.len() });
    }
    Ok(())
}

pub fn orbit_of(x: &[f64], group: GroupId) -> f64 {
    match group {
        GroupId::SO2 | GroupId::SO3 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        GroupId::Tn(_) => 0.0,
    }
}

/// Canonical representative of an orbit in `n`-dimensional space.
pub fn origin_of(orbit: f64, group: GroupId, n: usize) -> Vec<f64> {
    let mut o = vec![0.0; n];
    if matches!(group, GroupId::SO2 | GroupId::SO3) && n > 0 {
        o[0] = orbit;
    }
    o
}

/// The canonical group element carrying `origin_of(orbit_of(x))` onto `x`.
/// Points at the exact origin lift to the identity.
pub fn canonical_element(x: &[f64], group: GroupId) -> Result<GroupElement> {
    check_dim(x, group)?;
    Ok(match group {
        GroupId::SO2 => {
            if x[0] == 0.0 && x[1] == 0.0 {
                GroupElement::identity(group)
            } else {
                GroupElement::so2(x[1].atan2(x[0]))
            }
        }
        GroupId::SO3 => {
            let v = Vector3::new(x[0], x[1], x[2]);
            let r = v.norm();
            if r == 0.0 {
                GroupElement::identity(group)
            } else {
                GroupElement::SO3(minimal_rotation(&Vector3::x(), &(v / r)))
            }
        }
        GroupId::Tn(_) => GroupElement::translation(x.to_vec()),
    })
}

/// Lifts every point to one group element (K = 1) plus its orbit coordinate.
pub fn lift(cloud: &RawPointCloud, group: GroupId) -> Result<LiftedCloud> {
    if cloud.dim != group.space_dim() {
        return Err(Error::DimensionMismatch { expected: group.space_dim(), actual: cloud.dim });
    }
    let points = (0..cloud.len())
        .map(|i| {
            let x = cloud.point(i);
            Ok(LiftedPoint { elem: canonical_element(x, group)?, orbit: orbit_of(x, group), feature: cloud.feature(i).to_vec() })
        })
        .collect::<Result<_>>()?;
    Ok(LiftedCloud { group, points })
}

/// Samples `m` elements of the coset `{u : u·o = x}` for SO(3). The first is
/// always the canonical lift; the rest are composed with rotations about the
/// first axis by angles drawn uniformly from `[0, 2π)`.
pub fn stabilizer_sample(x: &[f64], group: GroupId, m: usize, seed: u64) -> Result<Vec<GroupElement>> {
    if group != GroupId::SO3 {
        return Err(Error::Unsupported { group, what: "stabilizer sampling (stabilizer is trivial)" });
    }
    if m == 0 {
        return Err(Error::InvalidArgument("stabilizer sample count must be at least 1".into()));
    }
    let base = match canonical_element(x, group)? {
        GroupElement::SO3(r) => r,
        _ => unreachable!(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![GroupElement::SO3(base)];
    for _ in 1..m {
        let phi = rng.random_range(0.0..2.0 * std::f64::consts::PI);
        let stab: Matrix3<f64> = so3_exp(&Vector3::new(phi, 0.0, 0.0));
        out.push(GroupElement::SO3(base * stab));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cloud(dim: usize, coords: Vec<f64>) -> RawPointCloud {
        let n = coords.len() / dim;
        RawPointCloud::new(dim, coords, 1, vec![1.0; n]).unwrap()
    }

    #[test]
    fn orbit_examples() {
        assert_eq!(orbit_of(&[3.0, 4.0], GroupId::SO2), 5.0);
        assert_eq!(orbit_of(&[0.0, 0.0, 0.0], GroupId::SO3), 0.0);
        assert_eq!(orbit_of(&[7.0, -2.0], GroupId::Tn(2)), 0.0);
    }

    #[test]
    fn origin_examples() {
        assert_eq!(origin_of(5.0, GroupId::SO2, 2), vec![5.0, 0.0]);
        assert_eq!(origin_of(1.0, GroupId::SO3, 3), vec![1.0, 0.0, 0.0]);
        assert_eq!(origin_of(0.0, GroupId::SO3, 3), vec![0.0; 3]);
        assert_eq!(origin_of(2.0, GroupId::Tn(2), 2), vec![0.0; 2]);
    }

    #[test]
    fn so2_lift_examples() {
        let lifted = lift(&cloud(2, vec![0.0, 2.0, 1.5, 0.0]), GroupId::SO2).unwrap();
        assert_eq!(lifted.points[0].elem, GroupElement::SO2(PI / 2.0));
        assert_eq!(lifted.points[0].orbit, 2.0);
        assert_eq!(lifted.points[1].elem, GroupElement::identity(GroupId::SO2));
        assert_eq!(lifted.points[1].orbit, 1.5);
    }

    #[test]
    fn origin_points_lift_to_identity() {
        for (g, dim) in [(GroupId::SO2, 2), (GroupId::SO3, 3)] {
            let lifted = lift(&cloud(dim, vec![0.0; dim]), g).unwrap();
            assert_eq!(lifted.points[0].elem, GroupElement::identity(g));
            assert_eq!(lifted.points[0].orbit, 0.0);
        }
    }

    #[test]
    fn lift_round_trips() {
        let coords = vec![0.3, -0.2, 0.9, -1.0, 0.0, 0.0, 0.0, 0.5, 0.0, 1e-9, 2.0, -3.0];
        for (g, dim) in [(GroupId::SO2, 2), (GroupId::SO3, 3), (GroupId::Tn(3), 3)] {
            let c = cloud(dim, coords.clone());
            let lifted = lift(&c, g).unwrap();
            for (i, p) in lifted.points.iter().enumerate() {
                let back = p.elem.act(&origin_of(p.orbit, g, dim)).unwrap();
                for (a, b) in back.iter().zip(c.point(i)) {
                    assert!((a - b).abs() < 1e-9, "{g} point {i}");
                }
            }
        }
    }

    #[test]
    fn stabilizer_samples_fix_the_point() {
        let x = [0.3, -1.1, 0.4];
        let us = stabilizer_sample(&x, GroupId::SO3, 5, 11).unwrap();
        assert_eq!(us[0], canonical_element(&x, GroupId::SO3).unwrap());
        let o = origin_of(orbit_of(&x, GroupId::SO3), GroupId::SO3, 3);
        for u in &us {
            let y = u.act(&o).unwrap();
            assert!(y.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-9));
        }
        let a = stabilizer_sample(&x, GroupId::SO3, 2, 1).unwrap();
        let b = stabilizer_sample(&x, GroupId::SO3, 2, 2).unwrap();
        assert_ne!(a[1], b[1]);
        assert_eq!(a, stabilizer_sample(&x, GroupId::SO3, 2, 1).unwrap());
        assert!(stabilizer_sample(&[1.0, 0.0], GroupId::SO2, 2, 0).is_err());
    }

    #[test]
    fn rejects_bad_clouds() {
        assert!(RawPointCloud::new(2, vec![], 1, vec![]).is_err());
        assert!(RawPointCloud::new(2, vec![1.0, 2.0], 1, vec![1.0, 2.0]).is_err());
        assert!(RawPointCloud::new(2, vec![f64::NAN, 2.0], 1, vec![1.0]).is_err());
        assert!(lift(&cloud(2, vec![1.0, 2.0]), GroupId::SO3).is_err());
    }
}
