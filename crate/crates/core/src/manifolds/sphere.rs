//! Closed-form geometry of the unit sphere in ambient coordinates.

use nalgebra::DVector;

use crate::{Error, Result};

/// Tolerance on `1 + ⟨p, q⟩` below which `q` is treated as antipodal.
pub const ANTIPODAL_TOLERANCE: f64 = 1e-8;
pub const UNIT_TOLERANCE: f64 = 1e-10;
pub const TANGENT_TOLERANCE: f64 = 1e-9;

pub fn check_unit(x: &DVector<f64>) -> Result<()> {
    let n = x.norm();
    if (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::Geometry(format!(
            "point has norm {n}, expected 1"
        )));
    }
    Ok(())
}

pub fn check_tangent(p: &DVector<f64>, v: &DVector<f64>) -> Result<()> {
    if p.len() != v.len() {
        return Err(Error::Shape(format!(
            "tangent vector of length {} at point of length {}",
            v.len(),
            p.len()
        )));
    }
    let ip = p.dot(v);
    if ip.abs() > TANGENT_TOLERANCE * v.norm().max(1.0) {
        return Err(Error::Geometry(format!(
            "vector is not tangent: <v, p> = {ip:e}"
        )));
    }
    Ok(())
}

/// `cos(‖v‖) p + sin(‖v‖) v / ‖v‖`, renormalized.
pub fn exp(p: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_tangent(p, v)?;
    let t = v.norm();
    if t == 0.0 {
        return Ok(p.clone());
    }
    let q = p * t.cos() + v * (t.sin() / t);
    Ok(q.normalize())
}

/// Inverse of [`exp`]: the tangent vector at `p` pointing along the minor
/// great circle to `q`, with length equal to the arc length.
pub fn log(p: &DVector<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!(
            "points of lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    let c = p.dot(q);
    if 1.0 + c < ANTIPODAL_TOLERANCE {
        return Err(Error::CutLocus(format!("1 + <p, q> = {:e}", 1.0 + c)));
    }
    let w = q - p * c;
    let s = w.norm();
    if s == 0.0 {
        return Ok(DVector::zeros(p.len()));
    }
    let theta = s.atan2(c);
    Ok(w * (theta / s))
}

/// Great-circle distance.
pub fn distance(p: &DVector<f64>, q: &DVector<f64>) -> f64 {
    let c = p.dot(q);
    let s = (q - p * c).norm();
    s.atan2(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn v3(x: f64, y: f64, z: f64) -> DVector<f64> {
        DVector::from_vec(vec![x, y, z])
    }

    #[test]
    fn zero_vector_fixes_base() {
        let p = v3(0.0, 0.0, 1.0);
        assert_eq!(exp(&p, &DVector::zeros(3)).unwrap(), p);
    }

    #[test]
    fn quarter_great_circle() {
        let p = v3(0.0, 0.0, 1.0);
        let q = exp(&p, &v3(FRAC_PI_2, 0.0, 0.0)).unwrap();
        assert!((q - v3(1.0, 0.0, 0.0)).norm() < 1e-15);
        let v = log(&p, &v3(1.0, 0.0, 0.0)).unwrap();
        assert!((v - v3(FRAC_PI_2, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn log_of_self_is_zero() {
        let p = v3(0.6, 0.0, 0.8);
        assert_eq!(log(&p, &p).unwrap(), DVector::zeros(3));
    }

    #[test]
    fn antipode_is_cut_locus() {
        let p = v3(0.0, 0.0, 1.0);
        assert!(matches!(log(&p, &(-&p)), Err(Error::CutLocus(_))));
    }

    #[test]
    fn non_tangent_vector_rejected() {
        let p = v3(0.0, 0.0, 1.0);
        assert!(matches!(exp(&p, &v3(0.0, 0.0, 0.1)), Err(Error::Geometry(_))));
    }
}
