use nalgebra::{DMatrix, DVector};

use super::linalg::{sym_eigen, symmetrize};
use super::spd::{self, SpdRoots};
use super::{sphere, ManifoldPoint};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct MeanOptions {
    /// Stop once the Riemannian norm of the update falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for MeanOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 200,
        }
    }
}

/// Fréchet (Karcher) mean by the fixed-point iteration
/// `x ← exp_x(mean_i log_x p_i)`; affine metric on SPD.
pub fn frechet_mean(points: &[ManifoldPoint]) -> Result<ManifoldPoint> {
    frechet_mean_with(points, MeanOptions::default())
}

pub fn frechet_mean_with(points: &[ManifoldPoint], opts: MeanOptions) -> Result<ManifoldPoint> {
    let first = points
        .first()
        .ok_or_else(|| Error::InvalidSpec("Fréchet mean of an empty set".into()))?;
    let manifold = first.manifold();
    if let Some(i) = points.iter().position(|p| p.manifold() != manifold) {
        return Err(Error::InvalidSpec(format!(
            "point {i} is on {}, expected {manifold}",
            points[i].manifold()
        )));
    }
    match first {
        ManifoldPoint::Spd(_) => {
            let mats: Vec<&DMatrix<f64>> = points.iter().filter_map(|p| p.as_matrix()).collect();
            spd_affine_mean(&mats, opts).map(ManifoldPoint::Spd)
        }
        _ => {
            let vecs: Vec<&DVector<f64>> = points.iter().filter_map(|p| p.as_vector()).collect();
            let wrap = |v: DVector<f64>| first.with_vector(v);
            sphere_mean(&vecs, opts).map_err(|e| match e {
                Error::Convergence {
                    iterations,
                    step_norm,
                    last,
                } => Error::Convergence {
                    iterations,
                    step_norm,
                    last: Box::new(match *last {
                        ManifoldPoint::Sphere(v) => wrap(v),
                        other => other,
                    }),
                },
                e => e,
            })
            .map(wrap)
        }
    }
}

fn sphere_mean(points: &[&DVector<f64>], opts: MeanOptions) -> Result<DVector<f64>> {
    let n = points.len() as f64;
    let mut sum = DVector::zeros(points[0].len());
    for p in points {
        sum += *p;
    }
    let mut x = if sum.norm() > 1e-8 * n {
        sum.normalize()
    } else {
        points[0].clone()
    };
    let mut step_norm = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let mut step = DVector::zeros(x.len());
        for p in points {
            step += sphere::log(&x, p)?;
        }
        step /= n;
        // Keep the step exactly tangent before mapping back.
        let step = &step - &x * x.dot(&step);
        step_norm = step.norm();
        x = sphere::exp(&x, &step)?;
        if step_norm < opts.tolerance {
            return Ok(x);
        }
    }
    Err(Error::Convergence {
        iterations: opts.max_iterations,
        step_norm,
        last: Box::new(ManifoldPoint::Sphere(x)),
    })
}

fn spd_affine_mean(points: &[&DMatrix<f64>], opts: MeanOptions) -> Result<DMatrix<f64>> {
    let n = points.len() as f64;
    let mut x = DMatrix::zeros(points[0].nrows(), points[0].ncols());
    for p in points {
        spd::check_spd(p)?;
        x += *p;
    }
    x /= n;
    let e = sym_eigen(&x);
    let floor = spd::PD_RELATIVE_FLOOR * e.max().abs();
    let mut x = e.map(|l| l.max(floor));
    let mut step_norm = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let roots = SpdRoots::from_eigen(&sym_eigen(&x));
        let mut step = DMatrix::zeros(x.nrows(), x.ncols());
        for p in points {
            step += spd::log_of(&sym_eigen(&roots.whiten(p)));
        }
        step /= n;
        step_norm = 0.5 * step.norm();
        x = roots.unwhiten(&sym_eigen(&symmetrize(&step)).map(f64::exp));
        if step_norm < opts.tolerance {
            return Ok(x);
        }
    }
    Err(Error::Convergence {
        iterations: opts.max_iterations,
        step_norm,
        last: Box::new(ManifoldPoint::Spd(x)),
    })
}

/// Closed-form log-Euclidean mean `exp(mean_i log P_i)`.
pub fn log_euclidean_mean(points: &[ManifoldPoint]) -> Result<ManifoldPoint> {
    let first = points
        .first()
        .and_then(|p| p.as_matrix())
        .ok_or_else(|| Error::InvalidSpec("log-Euclidean mean needs SPD points".into()))?;
    let mut acc = DMatrix::zeros(first.nrows(), first.ncols());
    for (i, p) in points.iter().enumerate() {
        let m = p
            .as_matrix()
            .ok_or_else(|| Error::InvalidSpec(format!("point {i} is not SPD")))?;
        acc += spd::matrix_log(m).map_err(|e| e.at_sample(i))?;
    }
    acc /= points.len() as f64;
    Ok(ManifoldPoint::Spd(sym_eigen(&acc).map(f64::exp)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_mean() {
        let p = ManifoldPoint::sphere(DVector::from_vec(vec![0.6, 0.8, 0.0])).unwrap();
        let m = frechet_mean(std::slice::from_ref(&p)).unwrap();
        assert!((m.as_vector().unwrap() - p.as_vector().unwrap()).norm() < 1e-15);
    }

    #[test]
    fn symmetric_pair_mean_is_pole() {
        let (s, c) = 0.2f64.sin_cos();
        let a = ManifoldPoint::sphere(DVector::from_vec(vec![s, 0.0, c])).unwrap();
        let b = ManifoldPoint::sphere(DVector::from_vec(vec![-s, 0.0, c])).unwrap();
        let m = frechet_mean(&[a, b]).unwrap();
        assert!((m.as_vector().unwrap() - DVector::from_vec(vec![0.0, 0.0, 1.0])).norm() < 1e-8);
    }

    #[test]
    fn commuting_spd_mean_is_geometric() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        let m = frechet_mean(&[ManifoldPoint::Spd(a), ManifoldPoint::Spd(b)]).unwrap();
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0]));
        assert!((m.as_matrix().unwrap() - want).norm() < 1e-10);
    }

    #[test]
    fn empty_mean_rejected() {
        assert!(frechet_mean(&[]).is_err());
    }

    #[test]
    fn non_convergence_returns_last_iterate() {
        let pts: Vec<ManifoldPoint> = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
            .iter()
            .map(|v| ManifoldPoint::sphere(DVector::from_row_slice(v)).unwrap())
            .collect();
        let opts = MeanOptions {
            tolerance: 0.0,
            max_iterations: 3,
        };
        match frechet_mean_with(&pts, opts) {
            Err(Error::Convergence { iterations, last, .. }) => {
                assert_eq!(iterations, 3);
                assert!(matches!(*last, ManifoldPoint::Sphere(_)));
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }
}
