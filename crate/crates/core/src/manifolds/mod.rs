//! Geometry kernels for the sphere `S^d`, the planar preshape sphere and
//! `SPD(n)`.
//!
//! Points carry their ambient representation: a unit vector in `R^{d+1}`,
//! a centered unit vector in `R^{2k}`, or a symmetric positive definite
//! matrix. Preshapes reuse the sphere's exponential and log maps.

mod atlas;
pub mod linalg;
mod mean;
pub mod preshape;
pub mod sphere;
pub mod spd;

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use atlas::{
    bump, normal_coords, partition_weights, Atlas, Chart, TangentFrame, DEFAULT_TWO_POLE_RADIUS,
};
pub use mean::{frechet_mean, frechet_mean_with, log_euclidean_mean, MeanOptions};
pub use preshape::{preshape, preshape_flat, shape_distance, vw_embed};

/// Which manifold a point lives on, with its size parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Manifold {
    /// `S^dim ⊂ R^{dim+1}`.
    Sphere { dim: usize },
    /// Preshape sphere of `landmarks` planar landmarks, in `R^{2·landmarks}`.
    Preshape { landmarks: usize },
    /// `size × size` SPD matrices.
    Spd { size: usize },
}

impl Manifold {
    /// Dimension of the manifold itself.
    pub fn intrinsic_dim(&self) -> usize {
        match *self {
            Manifold::Sphere { dim } => dim,
            Manifold::Preshape { landmarks } => 2 * landmarks - 3,
            Manifold::Spd { size } => linalg::sym_vec_len(size),
        }
    }

    /// Length of the flattened ambient representation.
    pub fn ambient_len(&self) -> usize {
        match *self {
            Manifold::Sphere { dim } => dim + 1,
            Manifold::Preshape { landmarks } => 2 * landmarks,
            Manifold::Spd { size } => linalg::sym_vec_len(size),
        }
    }

    /// Number of stored coordinates: `ambient_len` except SPD, which keeps
    /// all `n²` matrix entries.
    pub fn flat_len(&self) -> usize {
        match *self {
            Manifold::Spd { size } => size * size,
            m => m.ambient_len(),
        }
    }

    pub fn is_spherical(&self) -> bool {
        !matches!(self, Manifold::Spd { .. })
    }
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Manifold::Sphere { dim } => write!(f, "sphere-{dim}"),
            Manifold::Preshape { landmarks } => write!(f, "preshape-{landmarks}"),
            Manifold::Spd { size } => write!(f, "spd-{size}"),
        }
    }
}

impl std::str::FromStr for Manifold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, n) = s
            .rsplit_once('-')
            .ok_or_else(|| Error::Parse(format!("manifold tag {s:?} is not <kind>-<size>")))?;
        let n: usize = n
            .parse()
            .map_err(|_| Error::Parse(format!("bad size in manifold tag {s:?}")))?;
        match kind {
            "sphere" if n >= 1 => Ok(Manifold::Sphere { dim: n }),
            "preshape" if n >= 3 => Ok(Manifold::Preshape { landmarks: n }),
            "spd" if n >= 1 => Ok(Manifold::Spd { size: n }),
            _ => Err(Error::Parse(format!("unknown manifold tag {s:?}"))),
        }
    }
}

impl TryFrom<String> for Manifold {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Manifold> for String {
    fn from(m: Manifold) -> String {
        m.to_string()
    }
}

/// A point in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum ManifoldPoint {
    Sphere(DVector<f64>),
    Preshape(DVector<f64>),
    Spd(DMatrix<f64>),
}

impl fmt::Display for ManifoldPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let coords: Vec<f64> = match self {
            ManifoldPoint::Sphere(v) | ManifoldPoint::Preshape(v) => v.iter().copied().collect(),
            ManifoldPoint::Spd(m) => m.iter().copied().collect(),
        };
        let shown: Vec<String> = coords.iter().take(6).map(|c| format!("{c:.4}")).collect();
        let ellipsis = if coords.len() > 6 { ", …" } else { "" };
        write!(f, "{}[{}{}]", self.manifold(), shown.join(", "), ellipsis)
    }
}

impl ManifoldPoint {
    /// Validated sphere point (`‖x‖ = 1` within `1e-10`).
    pub fn sphere(x: DVector<f64>) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::Shape("sphere points need at least 2 coordinates".into()));
        }
        sphere::check_unit(&x)?;
        Ok(ManifoldPoint::Sphere(x))
    }

    /// Sphere point from any nonzero vector.
    pub fn sphere_normalized(x: DVector<f64>) -> Result<Self> {
        let n = x.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Geometry("cannot normalize a zero vector".into()));
        }
        ManifoldPoint::sphere(x / n)
    }

    /// Validated preshape (zero centroid, unit norm, both within `1e-10`).
    pub fn preshape(x: DVector<f64>) -> Result<Self> {
        if !x.len().is_multiple_of(2) || x.len() < 6 {
            return Err(Error::Shape(format!(
                "preshape needs an even length of at least 6, got {}",
                x.len()
            )));
        }
        sphere::check_unit(&x)?;
        let k = x.len() / 2;
        for dir in preshape::translation_directions(k) {
            let c = dir.dot(&x);
            if c.abs() > 1e-10 {
                return Err(Error::Geometry(format!(
                    "preshape centroid is not zero (component {c:e})"
                )));
            }
        }
        Ok(ManifoldPoint::Preshape(x))
    }

    /// Validated SPD matrix.
    pub fn spd(m: DMatrix<f64>) -> Result<Self> {
        spd::check_spd(&m)?;
        Ok(ManifoldPoint::Spd(m))
    }

    pub fn manifold(&self) -> Manifold {
        match self {
            ManifoldPoint::Sphere(v) => Manifold::Sphere { dim: v.len() - 1 },
            ManifoldPoint::Preshape(v) => Manifold::Preshape {
                landmarks: v.len() / 2,
            },
            ManifoldPoint::Spd(m) => Manifold::Spd { size: m.nrows() },
        }
    }

    /// Re-runs the validity checks of the point's constructor.
    pub fn validate(&self) -> Result<()> {
        match self {
            ManifoldPoint::Sphere(v) => ManifoldPoint::sphere(v.clone()).map(drop),
            ManifoldPoint::Preshape(v) => ManifoldPoint::preshape(v.clone()).map(drop),
            ManifoldPoint::Spd(m) => spd::check_spd(m).map(drop),
        }
    }

    /// Ambient vector for sphere and preshape points.
    pub fn as_vector(&self) -> Option<&DVector<f64>> {
        match self {
            ManifoldPoint::Sphere(v) | ManifoldPoint::Preshape(v) => Some(v),
            ManifoldPoint::Spd(_) => None,
        }
    }

    pub fn as_matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            ManifoldPoint::Spd(m) => Some(m),
            _ => None,
        }
    }

    /// Raw ambient coordinates as one flat vector; SPD matrices are
    /// vectorized with [`linalg::vec_sym`] without taking the log.
    pub fn ambient_coords(&self) -> DVector<f64> {
        match self {
            ManifoldPoint::Sphere(v) | ManifoldPoint::Preshape(v) => v.clone(),
            ManifoldPoint::Spd(m) => linalg::vec_sym(m),
        }
    }

    /// Same variant as `self` with new ambient data, no validation.
    fn with_vector(&self, v: DVector<f64>) -> Self {
        match self {
            ManifoldPoint::Preshape(_) => ManifoldPoint::Preshape(v),
            _ => ManifoldPoint::Sphere(v),
        }
    }
}

/// Tangent vector in ambient coordinates: orthogonal to the base point on
/// spheres, a symmetric matrix on `SPD(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: ManifoldPoint,
    pub coords: TangentCoords,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TangentCoords {
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
}

impl TangentVector {
    pub fn vector(base: ManifoldPoint, v: DVector<f64>) -> Result<Self> {
        let p = base
            .as_vector()
            .ok_or_else(|| Error::InvalidSpec("vector tangent at an SPD point".into()))?;
        sphere::check_tangent(p, &v)?;
        Ok(Self {
            base,
            coords: TangentCoords::Vector(v),
        })
    }

    pub fn matrix(base: ManifoldPoint, s: DMatrix<f64>) -> Result<Self> {
        let p = base
            .as_matrix()
            .ok_or_else(|| Error::InvalidSpec("matrix tangent at a sphere point".into()))?;
        if p.shape() != s.shape() {
            return Err(Error::Shape(format!("{:?} tangent at {:?} point", s.shape(), p.shape())));
        }
        spd::check_symmetric(&s)?;
        Ok(Self {
            base,
            coords: TangentCoords::Matrix(s),
        })
    }

    pub fn as_vector(&self) -> Option<&DVector<f64>> {
        match &self.coords {
            TangentCoords::Vector(v) => Some(v),
            TangentCoords::Matrix(_) => None,
        }
    }

    pub fn as_matrix(&self) -> Option<&DMatrix<f64>> {
        match &self.coords {
            TangentCoords::Matrix(m) => Some(m),
            TangentCoords::Vector(_) => None,
        }
    }

    /// Riemannian norm; for SPD the affine metric with the ½ scale.
    pub fn norm(&self) -> Result<f64> {
        match (&self.base, &self.coords) {
            (ManifoldPoint::Spd(p), TangentCoords::Matrix(s)) => {
                let roots = spd::SpdRoots::new(p)?;
                Ok(0.5 * roots.whiten(s).norm())
            }
            (_, TangentCoords::Vector(v)) => Ok(v.norm()),
            _ => Err(Error::InvalidSpec("tangent coordinates do not match base".into())),
        }
    }
}

fn require_spherical(p: &ManifoldPoint) -> Result<&DVector<f64>> {
    p.as_vector().ok_or_else(|| {
        Error::InvalidSpec(format!("{} is not a sphere or preshape point", p.manifold()))
    })
}

fn require_spd(p: &ManifoldPoint) -> Result<&DMatrix<f64>> {
    p.as_matrix()
        .ok_or_else(|| Error::InvalidSpec(format!("{} is not an SPD point", p.manifold())))
}

fn same_manifold(p: &ManifoldPoint, q: &ManifoldPoint) -> Result<()> {
    if p.manifold() != q.manifold() {
        return Err(Error::InvalidSpec(format!(
            "points on different manifolds: {} and {}",
            p.manifold(),
            q.manifold()
        )));
    }
    Ok(())
}

/// Exponential map on the sphere or preshape sphere.
pub fn sphere_exp(p: &ManifoldPoint, v: &TangentVector) -> Result<ManifoldPoint> {
    let x = require_spherical(p)?;
    let v = v
        .as_vector()
        .ok_or_else(|| Error::InvalidSpec("sphere exp needs a vector tangent".into()))?;
    Ok(p.with_vector(sphere::exp(x, v)?))
}

/// Log map on the sphere or preshape sphere.
pub fn sphere_log(p: &ManifoldPoint, q: &ManifoldPoint) -> Result<TangentVector> {
    same_manifold(p, q)?;
    let v = sphere::log(require_spherical(p)?, require_spherical(q)?)?;
    Ok(TangentVector {
        base: p.clone(),
        coords: TangentCoords::Vector(v),
    })
}

pub fn spd_exp_point(p0: &ManifoldPoint, s: &TangentVector) -> Result<ManifoldPoint> {
    let base = require_spd(p0)?;
    let s = s
        .as_matrix()
        .ok_or_else(|| Error::InvalidSpec("SPD exp needs a matrix tangent".into()))?;
    Ok(ManifoldPoint::Spd(spd::exp_at(base, s)?))
}

pub fn spd_log_point(p0: &ManifoldPoint, p: &ManifoldPoint) -> Result<TangentVector> {
    same_manifold(p0, p)?;
    let s = spd::log_at(require_spd(p0)?, require_spd(p)?)?;
    Ok(TangentVector {
        base: p0.clone(),
        coords: TangentCoords::Matrix(s),
    })
}

/// Riemannian metric on `SPD(n)` used for distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpdMetric {
    Affine,
    LogEuclidean,
}

pub fn spd_dist(p1: &ManifoldPoint, p2: &ManifoldPoint, metric: SpdMetric) -> Result<f64> {
    same_manifold(p1, p2)?;
    let (a, b) = (require_spd(p1)?, require_spd(p2)?);
    match metric {
        SpdMetric::Affine => spd::affine_distance(a, b),
        SpdMetric::LogEuclidean => spd::log_euclidean_distance(a, b),
    }
}

/// Matrix-log embedding of an SPD point, vectorized isometrically.
pub fn spd_embed(p: &ManifoldPoint) -> Result<DVector<f64>> {
    spd::log_embed(require_spd(p)?)
}

/// Exponential map on any supported manifold.
pub fn exp(v: &TangentVector) -> Result<ManifoldPoint> {
    match &v.base {
        ManifoldPoint::Spd(_) => spd_exp_point(&v.base, v),
        p => sphere_exp(p, v),
    }
}

/// Log map on any supported manifold.
pub fn log(p: &ManifoldPoint, q: &ManifoldPoint) -> Result<TangentVector> {
    match p {
        ManifoldPoint::Spd(_) => spd_log_point(p, q),
        _ => sphere_log(p, q),
    }
}

/// Geodesic distance: arc length on spheres, affine metric on SPD.
pub fn geodesic_distance(p: &ManifoldPoint, q: &ManifoldPoint) -> Result<f64> {
    same_manifold(p, q)?;
    match (p, q) {
        (ManifoldPoint::Spd(a), ManifoldPoint::Spd(b)) => spd::affine_distance(a, b),
        _ => Ok(sphere::distance(
            require_spherical(p)?,
            require_spherical(q)?,
        )),
    }
}

/// Ambient (chord) distance: Euclidean on spheres, Frobenius on SPD.
pub fn chord_distance(p: &ManifoldPoint, q: &ManifoldPoint) -> Result<f64> {
    same_manifold(p, q)?;
    Ok(match (p, q) {
        (ManifoldPoint::Spd(a), ManifoldPoint::Spd(b)) => linalg::frobenius_distance(a, b),
        _ => (require_spherical(p)? - require_spherical(q)?).norm(),
    })
}
