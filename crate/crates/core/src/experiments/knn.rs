use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::manifolds::linalg::vec_sym;
use crate::manifolds::spd::{check_spd, log_of, SpdRoots, PD_RELATIVE_FLOOR};
use crate::manifolds::{shape_distance, sphere, ManifoldPoint};
use crate::nn::Targets;
use crate::synthdata::Dataset;
use crate::{Error, Result};

/// Distance used by the kNN baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KnnMetric {
    /// Arc length on spheres, Kendall shape distance on preshapes, affine
    /// distance on SPD matrices.
    Geodesic,
    /// `‖log P − log Q‖_F` on SPD; falls back to [`KnnMetric::Geodesic`]
    /// elsewhere.
    LogEuclidean,
}

/// `queries × reference` matrix of pairwise distances.
pub fn knn_distance_matrix(
    reference: &[ManifoldPoint],
    queries: &[ManifoldPoint],
    metric: KnnMetric,
) -> Result<DMatrix<f64>> {
    let mut d = DMatrix::zeros(queries.len(), reference.len());
    let Some(first) = reference.first() else {
        return Ok(d);
    };
    if let Some(i) = queries.iter().position(|q| q.manifold() != first.manifold()) {
        return Err(Error::InvalidSpec("query on a different manifold".into()).at_sample(i));
    }
    match (first, metric) {
        (ManifoldPoint::Spd(_), KnnMetric::LogEuclidean) => {
            let logs = |ps: &[ManifoldPoint]| -> Result<Vec<DVector<f64>>> {
                ps.iter()
                    .enumerate()
                    .map(|(i, p)| {
                        let m = p.as_matrix().unwrap();
                        Ok(vec_sym(&log_of(&check_spd(m).map_err(|e| e.at_sample(i))?)))
                    })
                    .collect()
            };
            let (r, q) = (logs(reference)?, logs(queries)?);
            for (i, a) in q.iter().enumerate() {
                for (j, b) in r.iter().enumerate() {
                    d[(i, j)] = (a - b).norm();
                }
            }
        }
        (ManifoldPoint::Spd(_), KnnMetric::Geodesic) => {
            for (i, q) in queries.iter().enumerate() {
                let roots = SpdRoots::new(q.as_matrix().unwrap()).map_err(|e| e.at_sample(i))?;
                for (j, p) in reference.iter().enumerate() {
                    let w = roots.whiten(p.as_matrix().unwrap());
                    let ev = w.symmetric_eigenvalues();
                    let floor = PD_RELATIVE_FLOOR * ev.amax();
                    let ss: f64 = ev.iter().map(|&l| l.max(floor).ln().powi(2)).sum();
                    d[(i, j)] = 0.5 * ss.sqrt();
                }
            }
        }
        (ManifoldPoint::Preshape(_), _) => {
            for (i, q) in queries.iter().enumerate() {
                for (j, p) in reference.iter().enumerate() {
                    d[(i, j)] = shape_distance(q, p)?;
                }
            }
        }
        (ManifoldPoint::Sphere(_), _) => {
            for (i, q) in queries.iter().enumerate() {
                let a = q.as_vector().unwrap();
                for (j, p) in reference.iter().enumerate() {
                    d[(i, j)] = sphere::distance(a, p.as_vector().unwrap());
                }
            }
        }
    }
    Ok(d)
}

/// `(distance, index)` of the `k` nearest entries of `row`, nearest first;
/// equal distances keep index order.
fn nearest(row: impl Iterator<Item = f64>, k: usize) -> Vec<(f64, usize)> {
    let mut all: Vec<(f64, usize)> = row.enumerate().map(|(j, d)| (d, j)).collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let k = k.min(all.len());
    if k < all.len() {
        all.select_nth_unstable_by(k, cmp);
        all.truncate(k);
    }
    all.sort_by(cmp);
    all
}

/// Majority label; ties go to the smallest summed distance, then the
/// lowest label.
fn vote(neighbors: &[(f64, usize)], labels: &[usize], classes: usize) -> usize {
    let mut count = vec![0usize; classes];
    let mut dist = vec![0.0; classes];
    for &(d, j) in neighbors {
        count[labels[j]] += 1;
        dist[labels[j]] += d;
    }
    (0..classes)
        .filter(|&c| count[c] > 0)
        .min_by(|&a, &b| {
            count[b]
                .cmp(&count[a])
                .then(dist[a].total_cmp(&dist[b]))
                .then(a.cmp(&b))
        })
        .unwrap_or(0)
}

fn label_info(targets: &Targets) -> Result<(&[usize], usize)> {
    match targets {
        Targets::Labels { labels, classes } => Ok((labels, *classes)),
        Targets::Values(_) => Err(Error::InvalidSpec("kNN needs class labels".into())),
    }
}

/// Predicted labels for each row of a `queries × reference` distance matrix.
pub fn knn_predict(distances: &DMatrix<f64>, reference: &Targets, k: usize) -> Result<Vec<usize>> {
    let (labels, classes) = label_info(reference)?;
    if k == 0 || k > labels.len() {
        return Err(Error::InvalidSpec(format!(
            "k = {k} with {} reference points",
            labels.len()
        )));
    }
    Ok(distances
        .row_iter()
        .map(|row| vote(&nearest(row.iter().copied(), k), labels, classes))
        .collect())
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

/// Accuracy of `k`-NN on `test` with `train` as reference.
pub fn knn_baseline(train: &Dataset, test: &Dataset, k: usize, metric: KnnMetric) -> Result<f64> {
    let d = knn_distance_matrix(train.inputs(), test.inputs(), metric)?;
    let pred = knn_predict(&d, train.targets(), k)?;
    Ok(accuracy(&pred, label_info(test.targets())?.0))
}

/// The `k` from `ks` with the best validation accuracy (smallest on ties),
/// with that accuracy.
pub fn tune_knn(fit: &Dataset, val: &Dataset, ks: &[usize], metric: KnnMetric) -> Result<(usize, f64)> {
    let (labels, classes) = label_info(fit.targets())?;
    let truth = label_info(val.targets())?.0;
    let mut ks: Vec<usize> = ks.iter().copied().filter(|&k| k >= 1 && k <= labels.len()).collect();
    ks.sort_unstable();
    ks.dedup();
    let kmax = *ks
        .last()
        .ok_or_else(|| Error::InvalidSpec("no usable k for the reference set size".into()))?;
    let d = knn_distance_matrix(fit.inputs(), val.inputs(), metric)?;
    let neighbors: Vec<Vec<(f64, usize)>> =
        d.row_iter().map(|r| nearest(r.iter().copied(), kmax)).collect();
    let mut best = (ks[0], -1.0);
    for &k in &ks {
        let pred: Vec<usize> = neighbors.iter().map(|n| vote(&n[..k], labels, classes)).collect();
        let acc = accuracy(&pred, truth);
        if acc > best.1 {
            best = (k, acc);
        }
    }
    Ok(best)
}
