//! Lie groups acting on Euclidean space: SO(2), SO(3) and translations T(n).
//!
//! Elements are stored in their most transparent form: an angle for SO(2), an
//! explicit rotation matrix for SO(3) and a vector for T(n). The Lie algebra is
//! coordinatized as the angle, the rotation vector (axis times angle) and the
//! translation vector respectively.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix3, Unit, Vector3};

use crate::error::{Error, Result};

/// Drift of `RᵀR` from the identity above which SO(3) matrices are re-projected.
const ORTHO_DRIFT: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GroupId {
    SO2,
    SO3,
    /// Translations of n-dimensional space.
    Tn(usize),
}

impl GroupId {
    /// Dimension of the Euclidean space the group acts on.
    pub fn space_dim(self) -> usize {
        match self {
            GroupId::SO2 => 2,
            GroupId::SO3 => 3,
            GroupId::Tn(n) => n,
        }
    }

    /// Dimension of the Lie algebra.
    pub fn algebra_dim(self) -> usize {
        match self {
            GroupId::SO2 => 1,
            GroupId::SO3 => 3,
            GroupId::Tn(n) => n,
        }
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupId::SO2 => write!(f, "SO2"),
            GroupId::SO3 => write!(f, "SO3"),
            GroupId::Tn(n) => write!(f, "T{n}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GroupElement {
    /// Rotation angle, normalized into (−π, π].
    SO2(f64),
    SO3(Matrix3<f64>),
    Tn(Vec<f64>),
}

/// Tangent-space coordinates of a group element.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraVector {
    pub group: GroupId,
    pub coords: Vec<f64>,
}

impl AlgebraVector {
    pub fn new(group: GroupId, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != group.algebra_dim() {
            return Err(Error::DimensionMismatch { expected: group.algebra_dim(), actual: coords.len() });
        }
        Ok(Self { group, coords })
    }

    pub fn zero(group: GroupId) -> Self {
        Self { group, coords: vec![0.0; group.algebra_dim()] }
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Wraps an angle into the principal interval (−π, π].
pub fn normalize_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

fn ortho_drift(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).amax()
}

/// Projects a near-rotation onto SO(3) through its polar decomposition.
fn reproject(r: Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut q = u * vt;
    if q.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        q = u * vt;
    }
    q
}

fn skew_vee(r: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]) * 0.5
}

/// Rodrigues' formula for the rotation by `|w|` about `w / |w|`.
pub fn so3_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    let k = w.cross_matrix();
    let (a, b) = if theta < 1e-6 { (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0) } else { (theta.sin() / theta, (1.0 - theta.cos()) / theta2) };
    Matrix3::identity() + k * a + k * k * b
}

/// Principal logarithm of a rotation matrix as a rotation vector.
///
/// At an angle of exactly π the axis sign is ambiguous; the first nonzero
/// component of the returned axis is made positive.
pub fn so3_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let w = skew_vee(r);
    let sin = w.norm();
    let cos = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = sin.atan2(cos);
    if theta < 1e-6 {
        return w * (1.0 + theta * theta / 6.0);
    }
    if cos > -0.99 {
        return w * (theta / sin);
    }
    // Near π the skew part vanishes; recover the axis from the symmetric part
    // (R + Rᵀ)/2 − cos·I = (1 − cos)·nnᵀ.
    let sym = (r + r.transpose()) * 0.5 - Matrix3::identity() * cos;
    let mut best = 0;
    for i in 1..3 {
        if sym[(i, i)] > sym[(best, best)] {
            best = i;
        }
    }
    let mut axis: Vector3<f64> = sym.column(best).into_owned();
    axis /= axis.norm();
    if sin > 1e-12 {
        if axis.dot(&w) < 0.0 {
            axis = -axis;
        }
    } else if let Some(first) = axis.iter().find(|c| c.abs() > 1e-12) {
        if *first < 0.0 {
            axis = -axis;
        }
    }
    axis * theta
}

/// Rotation taking the unit vector `from` onto the unit vector `to` along the
/// shortest geodesic. Antipodal inputs rotate by π about an axis orthogonal to
/// `from` (the z axis whenever it is orthogonal).
pub fn minimal_rotation(from: &Vector3<f64>, to: &Vector3<f64>) -> Matrix3<f64> {
    let cross = from.cross(to);
    let sin = cross.norm();
    let cos = from.dot(to);
    let theta = sin.atan2(cos);
    if sin > 1e-15 {
        return so3_exp(&(cross * (theta / sin)));
    }
    if cos > 0.0 {
        return Matrix3::identity();
    }
    let mut axis = Vector3::z().cross(from).cross(from);
    if axis.norm() < 1e-12 {
        axis = Vector3::x().cross(from).cross(from);
    }
    let axis = Unit::new_normalize(axis);
    so3_exp(&(axis.into_inner() * PI))
}

impl GroupElement {
    pub fn group(&self) -> GroupId {
        match self {
            GroupElement::SO2(_) => GroupId::SO2,
            GroupElement::SO3(_) => GroupId::SO3,
            GroupElement::Tn(t) => GroupId::Tn(t.len()),
        }
    }

    pub fn identity(group: GroupId) -> Self {
        match group {
            GroupId::SO2 => GroupElement::SO2(0.0),
            GroupId::SO3 => GroupElement::SO3(Matrix3::identity()),
            GroupId::Tn(n) => GroupElement::Tn(vec![0.0; n]),
        }
    }

    /// Builds an SO(2) element, normalizing the angle.
    pub fn so2(theta: f64) -> Self {
        GroupElement::SO2(normalize_angle(theta))
    }

    /// Builds an SO(3) element, checking orthogonality and orientation.
    pub fn so3(r: Matrix3<f64>) -> Result<Self> {
        if !r.iter().all(|v| v.is_finite()) || ortho_drift(&r) > 1e-6 || r.determinant() <= 0.0 {
            return Err(Error::InvalidElement("matrix is not a proper rotation".into()));
        }
        let r = if ortho_drift(&r) > ORTHO_DRIFT { reproject(r) } else { r };
        Ok(GroupElement::SO3(r))
    }

    pub fn translation(t: Vec<f64>) -> Self {
        GroupElement::Tn(t)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.group() != other.group() {
            return Err(Error::GroupMismatch { left: self.group(), right: other.group() });
        }
        Ok(())
    }

    /// Group product `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(match (self, other) {
            (GroupElement::SO2(a), GroupElement::SO2(b)) => GroupElement::so2(a + b),
            (GroupElement::SO3(a), GroupElement::SO3(b)) => {
                let r = a * b;
                GroupElement::SO3(if ortho_drift(&r) > ORTHO_DRIFT { reproject(r) } else { r })
            }
            (GroupElement::Tn(a), GroupElement::Tn(b)) => GroupElement::Tn(a.iter().zip(b).map(|(x, y)| x + y).collect()),
            _ => unreachable!(),
        })
    }

    pub fn inverse(&self) -> Self {
        match self {
            GroupElement::SO2(a) => GroupElement::so2(-a),
            GroupElement::SO3(r) => GroupElement::SO3(r.transpose()),
            GroupElement::Tn(t) => GroupElement::Tn(t.iter().map(|x| -x).collect()),
        }
    }

    pub fn exp(a: &AlgebraVector) -> Self {
        match a.group {
            GroupId::SO2 => GroupElement::so2(a.coords[0]),
            GroupId::SO3 => GroupElement::SO3(so3_exp(&Vector3::new(a.coords[0], a.coords[1], a.coords[2]))),
            GroupId::Tn(_) => GroupElement::Tn(a.coords.clone()),
        }
    }

    pub fn log(&self) -> AlgebraVector {
        let coords = match self {
            GroupElement::SO2(a) => vec![*a],
            GroupElement::SO3(r) => so3_log(r).iter().copied().collect(),
            GroupElement::Tn(t) => t.clone(),
        };
        AlgebraVector { group: self.group(), coords }
    }

    /// Applies the element to a point of the space the group acts on.
    pub fn act(&self, x: &[f64]) -> Result<Vec<f64>> {
        let dim = self.group().space_dim();
        if x.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: x.len() });
        }
        Ok(match self {
            GroupElement::SO2(a) => {
                let (s, c) = a.sin_cos();
                vec![c * x[0] - s * x[1], s * x[0] + c * x[1]]
            }
            GroupElement::SO3(r) => {
                let y = r * Vector3::new(x[0], x[1], x[2]);
                vec![y[0], y[1], y[2]]
            }
            GroupElement::Tn(t) => x.iter().zip(t).map(|(a, b)| a + b).collect(),
        })
    }

    /// Representation as a matrix acting on homogeneous coordinates for T(n),
    /// and as the plain rotation matrix otherwise. Row-major.
    pub fn matrix(&self) -> Vec<f64> {
        match self {
            GroupElement::SO2(a) => {
                let (s, c) = a.sin_cos();
                vec![c, -s, s, c]
            }
            GroupElement::SO3(r) => r.transpose().iter().copied().collect(),
            GroupElement::Tn(t) => {
                let n = t.len() + 1;
                let mut m = vec![0.0; n * n];
                for i in 0..n {
                    m[i * n + i] = 1.0;
                }
                for (i, ti) in t.iter().enumerate() {
                    m[i * n + n - 1] = *ti;
                }
                m
            }
        }
    }
}

/// Left-invariant distance `‖log(u⁻¹v)‖₂`.
pub fn left_invariant_distance(u: &GroupElement, v: &GroupElement) -> Result<f64> {
    Ok(u.inverse().compose(v)?.log().norm())
}
