//! Charts in normal coordinates and a bump-function partition of unity.

use nalgebra::DVector;

use super::linalg::vec_sym;
use super::preshape::translation_directions;
use super::spd::{self, SpdRoots};
use super::{chord_distance, sphere, Manifold, ManifoldPoint};
use crate::{Error, Result};

/// Chord radius that lets two antipodal charts cover a sphere with overlap.
pub const DEFAULT_TWO_POLE_RADIUS: f64 = 1.9;

const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

/// How tangent vectors at a chart's base point become coordinates.
#[derive(Debug, Clone)]
pub enum TangentFrame {
    /// Explicit orthonormal basis of the tangent space (sphere, preshape).
    Basis(Vec<DVector<f64>>),
    /// SPD: coordinates are `½ vec_sym(log(P0^{-1/2} P P0^{-1/2}))`, i.e. the
    /// whitened log expressed in an orthonormal basis of the affine metric.
    SpdWhitened(SpdRoots),
}

/// A chart `(x_k, U_k, v_{k1..kd})` with a bump of chord radius `radius`.
#[derive(Debug, Clone)]
pub struct Chart {
    pub index: usize,
    base: ManifoldPoint,
    frame: TangentFrame,
    radius: f64,
    sharpness: f64,
}

impl Chart {
    /// Chart with the default deterministic tangent frame.
    pub fn new(index: usize, base: ManifoldPoint, radius: f64) -> Result<Self> {
        let frame = default_frame(&base)?;
        Self::with_frame(index, base, frame, radius, 1.0)
    }

    pub fn with_frame(
        index: usize,
        base: ManifoldPoint,
        frame: TangentFrame,
        radius: f64,
        sharpness: f64,
    ) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidSpec(format!("chart radius must be positive, got {radius}")));
        }
        if !(sharpness > 0.0) || !sharpness.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "bump sharpness must be positive, got {sharpness}"
            )));
        }
        base.validate()?;
        match (&base, &frame) {
            (ManifoldPoint::Spd(_), TangentFrame::SpdWhitened(_)) => {}
            (ManifoldPoint::Spd(_), _) | (_, TangentFrame::SpdWhitened(_)) => {
                return Err(Error::InvalidSpec("frame does not match the base point".into()))
            }
            (_, TangentFrame::Basis(basis)) => check_basis(base.as_vector().unwrap(), basis)?,
        }
        Ok(Self {
            index,
            base,
            frame,
            radius,
            sharpness,
        })
    }

    pub fn base(&self) -> &ManifoldPoint {
        &self.base
    }

    pub fn frame(&self) -> &TangentFrame {
        &self.frame
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn sharpness(&self) -> f64 {
        self.sharpness
    }

    /// Number of normal coordinates.
    pub fn dim(&self) -> usize {
        match &self.frame {
            TangentFrame::Basis(b) => b.len(),
            TangentFrame::SpdWhitened(r) => super::linalg::sym_vec_len(r.sqrt.nrows()),
        }
    }
}

fn check_basis(base: &DVector<f64>, basis: &[DVector<f64>]) -> Result<()> {
    for (i, v) in basis.iter().enumerate() {
        if v.len() != base.len() {
            return Err(Error::Shape(format!("basis vector {i} has wrong length")));
        }
        if v.dot(base).abs() > ORTHONORMAL_TOLERANCE {
            return Err(Error::Geometry(format!("basis vector {i} is not tangent")));
        }
        for (j, w) in basis.iter().enumerate().take(i + 1) {
            let want = if i == j { 1.0 } else { 0.0 };
            if (v.dot(w) - want).abs() > ORTHONORMAL_TOLERANCE {
                return Err(Error::Geometry(format!(
                    "basis vectors {i} and {j} are not orthonormal"
                )));
            }
        }
    }
    Ok(())
}

/// Gram–Schmidt on the ambient standard basis projected onto the tangent
/// space, in coordinate order. Preshapes also drop the translation
/// directions.
pub fn tangent_basis(base: &ManifoldPoint) -> Result<Vec<DVector<f64>>> {
    let x = base
        .as_vector()
        .ok_or_else(|| Error::InvalidSpec("explicit tangent basis needs a sphere point".into()))?;
    let n = x.len();
    let mut constraints = vec![x.clone()];
    if let ManifoldPoint::Preshape(_) = base {
        constraints.extend(translation_directions(n / 2));
    }
    let dim = base.manifold().intrinsic_dim();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(dim);
    for i in 0..n {
        if basis.len() == dim {
            break;
        }
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for c in constraints.iter().chain(basis.iter()) {
                let proj = c.dot(&v);
                v.axpy(-proj, c, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            basis.push(v / norm);
        }
    }
    if basis.len() != dim {
        return Err(Error::Geometry(format!(
            "could only build {} of {dim} tangent directions",
            basis.len()
        )));
    }
    Ok(basis)
}

fn default_frame(base: &ManifoldPoint) -> Result<TangentFrame> {
    match base {
        ManifoldPoint::Spd(m) => Ok(TangentFrame::SpdWhitened(SpdRoots::new(m)?)),
        _ => Ok(TangentFrame::Basis(tangent_basis(base)?)),
    }
}

/// Coordinates of `log_{x_k}(x)` in the chart's orthonormal frame. Their
/// Euclidean norm is the geodesic distance from the base point.
pub fn normal_coords(chart: &Chart, x: &ManifoldPoint) -> Result<DVector<f64>> {
    if x.manifold() != chart.base.manifold() {
        return Err(Error::InvalidSpec(format!(
            "point on {} but chart on {}",
            x.manifold(),
            chart.base.manifold()
        )));
    }
    match (&chart.frame, x) {
        (TangentFrame::SpdWhitened(roots), ManifoldPoint::Spd(p)) => {
            Ok(vec_sym(&spd::whitened_log(roots, p)?) * 0.5)
        }
        (TangentFrame::Basis(basis), _) => {
            let v = sphere::log(chart.base.as_vector().unwrap(), x.as_vector().unwrap())?;
            Ok(DVector::from_iterator(
                basis.len(),
                basis.iter().map(|b| b.dot(&v)),
            ))
        }
        _ => Err(Error::InvalidSpec("frame does not match the point".into())),
    }
}

/// Raw bump `exp(−s / (1 − (‖x − x_k‖ / r)²))` inside the chord ball, else 0.
pub fn bump(chart: &Chart, x: &ManifoldPoint) -> Result<f64> {
    let t = chord_distance(&chart.base, x)? / chart.radius;
    if t >= 1.0 {
        return Ok(0.0);
    }
    Ok((-chart.sharpness / (1.0 - t * t)).exp())
}

/// Ordered charts whose bumps cover the manifold.
#[derive(Debug, Clone)]
pub struct Atlas {
    charts: Vec<Chart>,
    /// Total bump mass below which a point counts as uncovered.
    pub covering_tolerance: f64,
}

impl Atlas {
    pub fn new(charts: Vec<Chart>) -> Result<Self> {
        let first = charts
            .first()
            .ok_or_else(|| Error::InvalidSpec("atlas needs at least one chart".into()))?;
        let m = first.base.manifold();
        if charts.iter().any(|c| c.base.manifold() != m) {
            return Err(Error::InvalidSpec("atlas charts live on different manifolds".into()));
        }
        Ok(Self {
            charts,
            covering_tolerance: 0.0,
        })
    }

    /// Charts at `±x_N` where `x_N` is the first ambient coordinate axis
    /// (for preshapes: the preshape of a configuration with one landmark
    /// off the origin).
    pub fn two_pole(manifold: Manifold, radius: f64) -> Result<Self> {
        let north = match manifold {
            Manifold::Sphere { dim } => {
                let mut v = DVector::zeros(dim + 1);
                v[0] = 1.0;
                ManifoldPoint::sphere(v)?
            }
            Manifold::Preshape { landmarks } => {
                let mut xy = vec![0.0; 2 * landmarks];
                xy[0] = 1.0;
                super::preshape_flat(&xy)?
            }
            Manifold::Spd { .. } => {
                return Err(Error::InvalidSpec(
                    "SPD manifolds need explicit atlas base points".into(),
                ))
            }
        };
        let south = north.with_vector(-north.as_vector().unwrap());
        Atlas::new(vec![
            Chart::new(0, north, radius)?,
            Chart::new(1, south, radius)?,
        ])
    }

    /// Charts at explicit base points sharing one radius.
    pub fn from_base_points(points: Vec<ManifoldPoint>, radius: f64) -> Result<Self> {
        let charts = points
            .into_iter()
            .enumerate()
            .map(|(i, p)| Chart::new(i, p, radius))
            .collect::<Result<Vec<_>>>()?;
        Atlas::new(charts)
    }

    /// Single chart at `base`; with it the intrinsic network is a tangent one.
    pub fn single(base: ManifoldPoint) -> Result<Self> {
        Atlas::new(vec![Chart::new(0, base, f64::MAX)?])
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn len(&self) -> usize {
        self.charts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charts.is_empty()
    }

    pub fn manifold(&self) -> Manifold {
        self.charts[0].base.manifold()
    }

    /// Chart dimension (shared by all charts).
    pub fn dim(&self) -> usize {
        self.charts[0].dim()
    }
}

/// Partition-of-unity weights `τ_k(x) = b_k(x) / Σ_j b_j(x)`.
pub fn partition_weights(atlas: &Atlas, x: &ManifoldPoint) -> Result<Vec<f64>> {
    let bumps = atlas
        .charts
        .iter()
        .map(|c| bump(c, x))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = bumps.iter().sum();
    if !(total > atlas.covering_tolerance) {
        return Err(Error::CoverageGap(x.to_string()));
    }
    Ok(bumps.into_iter().map(|b| b / total).collect())
}
