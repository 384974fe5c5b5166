//! Affine-invariant and log-Euclidean geometry of SPD matrices.
//!
//! The affine distance carries a factor ½:
//! `d(P1, P2) = ½ ‖log(P1^{-1/2} P2 P1^{-1/2})‖_F`. Normal coordinates
//! use the same scale so that their norm is the geodesic distance.

use nalgebra::{DMatrix, DVector};

use super::linalg::{sym_eigen, symmetrize, vec_sym, SymEigen};
use crate::{Error, Result};

pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
/// Eigenvalues at or below this multiple of the spectral norm are rejected.
pub const PD_RELATIVE_FLOOR: f64 = 1e-12;

fn spectral_scale(e: &SymEigen) -> f64 {
    e.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn check_symmetric(p: &DMatrix<f64>) -> Result<()> {
    if !p.is_square() {
        return Err(Error::Shape(format!("matrix is {}x{}", p.nrows(), p.ncols())));
    }
    let scale = p.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let asym = (p - p.transpose()).amax();
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(Error::Geometry(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    Ok(())
}

/// Validates symmetry and positive definiteness, returning the spectrum.
pub fn check_spd(p: &DMatrix<f64>) -> Result<SymEigen> {
    check_symmetric(p)?;
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite("non-finite entry".into()));
    }
    let e = sym_eigen(p);
    let floor = PD_RELATIVE_FLOOR * spectral_scale(&e);
    if e.min() <= floor || e.min() <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest eigenvalue {:e}",
            e.min()
        )));
    }
    Ok(e)
}

fn clamped(e: &SymEigen) -> impl Fn(f64) -> f64 {
    let floor = PD_RELATIVE_FLOOR * spectral_scale(e);
    move |l: f64| l.max(floor)
}

/// `log` of a validated spectrum, with eigenvalues floored before the log.
pub fn log_of(e: &SymEigen) -> DMatrix<f64> {
    let floor = clamped(e);
    e.map(|l| floor(l).ln())
}

/// Square root and inverse square root of an SPD matrix.
#[derive(Debug, Clone)]
pub struct SpdRoots {
    pub sqrt: DMatrix<f64>,
    pub inv_sqrt: DMatrix<f64>,
}

impl SpdRoots {
    pub fn new(p: &DMatrix<f64>) -> Result<Self> {
        let e = check_spd(p)?;
        Ok(Self::from_eigen(&e))
    }

    pub fn from_eigen(e: &SymEigen) -> Self {
        let floor = clamped(e);
        Self {
            sqrt: e.map(|l| floor(l).sqrt()),
            inv_sqrt: e.map(|l| 1.0 / floor(l).sqrt()),
        }
    }

    /// `W P W` with `W = P0^{-1/2}`, symmetrized.
    pub fn whiten(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        symmetrize(&(&self.inv_sqrt * p * &self.inv_sqrt))
    }

    pub fn unwhiten(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        symmetrize(&(&self.sqrt * m * &self.sqrt))
    }
}

pub fn matrix_log(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(log_of(&check_spd(p)?))
}

pub fn matrix_exp(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(s)?;
    Ok(sym_eigen(s).map(f64::exp))
}

/// `Exp_{P0}(S) = P0^{1/2} exp(P0^{-1/2} S P0^{-1/2}) P0^{1/2}`.
pub fn exp_at(p0: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let roots = SpdRoots::new(p0)?;
    exp_with(&roots, s)
}

pub fn exp_with(roots: &SpdRoots, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(s)?;
    if s.shape() != roots.sqrt.shape() {
        return Err(Error::Shape(format!(
            "tangent matrix {:?} at base {:?}",
            s.shape(),
            roots.sqrt.shape()
        )));
    }
    let inner = sym_eigen(&roots.whiten(s)).map(f64::exp);
    Ok(roots.unwhiten(&inner))
}

/// `Log_{P0}(P) = P0^{1/2} log(P0^{-1/2} P P0^{-1/2}) P0^{1/2}`.
pub fn log_at(p0: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let roots = SpdRoots::new(p0)?;
    log_with(&roots, p)
}

pub fn log_with(roots: &SpdRoots, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(roots.unwhiten(&whitened_log(roots, p)?))
}

/// `log(P0^{-1/2} P P0^{-1/2})`, the log map in whitened coordinates.
pub fn whitened_log(roots: &SpdRoots, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_spd(p)?;
    if p.shape() != roots.sqrt.shape() {
        return Err(Error::Shape(format!(
            "point {:?} at base {:?}",
            p.shape(),
            roots.sqrt.shape()
        )));
    }
    Ok(log_of(&sym_eigen(&roots.whiten(p))))
}

pub fn affine_distance(p1: &DMatrix<f64>, p2: &DMatrix<f64>) -> Result<f64> {
    let roots = SpdRoots::new(p1)?;
    Ok(0.5 * whitened_log(&roots, p2)?.norm())
}

pub fn log_euclidean_distance(p1: &DMatrix<f64>, p2: &DMatrix<f64>) -> Result<f64> {
    Ok((matrix_log(p1)? - matrix_log(p2)?).norm())
}

/// Vectorized matrix logarithm, the SPD embedding into `Sym(n)`.
pub fn log_embed(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    Ok(vec_sym(&matrix_log(p)?))
}
