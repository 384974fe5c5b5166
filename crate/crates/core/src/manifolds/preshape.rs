//! Planar landmark configurations: preshapes and the Veronese–Whitney
//! embedding.
//!
//! A configuration of `k` landmarks is stored interleaved as
//! `(x_1, y_1, …, x_k, y_k)` and read as the complex vector
//! `z_j = x_j + i y_j`.

use nalgebra::DVector;

use super::ManifoldPoint;
use crate::{Error, Result};

/// Removes translation and scale: subtract the centroid, divide by the
/// Frobenius norm.
pub fn preshape(landmarks: &[[f64; 2]]) -> Result<ManifoldPoint> {
    let flat: Vec<f64> = landmarks.iter().flat_map(|p| [p[0], p[1]]).collect();
    preshape_flat(&flat)
}

/// [`preshape`] for an interleaved `(x_1, y_1, …)` slice.
pub fn preshape_flat(xy: &[f64]) -> Result<ManifoldPoint> {
    if !xy.len().is_multiple_of(2) {
        return Err(Error::Shape(format!(
            "landmark vector has odd length {}",
            xy.len()
        )));
    }
    let k = xy.len() / 2;
    if k < 3 {
        return Err(Error::DegenerateShape(format!(
            "need at least 3 landmarks, got {k}"
        )));
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for p in xy.chunks_exact(2) {
        cx += p[0];
        cy += p[1];
    }
    cx /= k as f64;
    cy /= k as f64;
    let mut v = DVector::from_column_slice(xy);
    for p in v.as_mut_slice().chunks_exact_mut(2) {
        p[0] -= cx;
        p[1] -= cy;
    }
    let norm = v.norm();
    let scale = xy.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    if !(norm > 1e-12 * scale) {
        return Err(Error::DegenerateShape(
            "all landmarks coincide".into(),
        ));
    }
    v /= norm;
    ManifoldPoint::preshape(v)
}

/// Veronese–Whitney features of `u u*` for a preshape `u`.
///
/// Layout (length `k²`): the `k` diagonal entries `|u_i|²`, then
/// `Re(u_i ū_j)` for `i < j` row by row, then `Im(u_i ū_j)` in the same
/// order.
pub fn vw_embed(point: &ManifoldPoint) -> Result<DVector<f64>> {
    let u = match point {
        ManifoldPoint::Preshape(u) => u,
        other => {
            return Err(Error::InvalidSpec(format!(
                "Veronese-Whitney embedding needs a preshape, got {}",
                other.manifold()
            )))
        }
    };
    let k = u.len() / 2;
    let re = |i: usize| u[2 * i];
    let im = |i: usize| u[2 * i + 1];
    let pairs = k * (k - 1) / 2;
    let mut out = DVector::zeros(k * k);
    for i in 0..k {
        out[i] = re(i) * re(i) + im(i) * im(i);
    }
    let mut slot = 0;
    for i in 0..k {
        for j in i + 1..k {
            // u_i * conj(u_j)
            out[k + slot] = re(i) * re(j) + im(i) * im(j);
            out[k + pairs + slot] = im(i) * re(j) - re(i) * im(j);
            slot += 1;
        }
    }
    Ok(out)
}

/// Kendall shape distance `arccos |⟨u, v⟩|` between two preshapes, the
/// geodesic distance after optimal rotation.
pub fn shape_distance(u: &ManifoldPoint, v: &ManifoldPoint) -> Result<f64> {
    let (ManifoldPoint::Preshape(a), ManifoldPoint::Preshape(b)) = (u, v) else {
        return Err(Error::InvalidSpec("shape distance needs two preshapes".into()));
    };
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} vs {} coordinates", a.len(), b.len())));
    }
    let (mut re, mut im) = (0.0, 0.0);
    for (p, q) in a.as_slice().chunks_exact(2).zip(b.as_slice().chunks_exact(2)) {
        re += p[0] * q[0] + p[1] * q[1];
        im += p[1] * q[0] - p[0] * q[1];
    }
    let r = re.hypot(im);
    if r == 0.0 {
        return Ok(std::f64::consts::FRAC_PI_2);
    }
    // Chord to the optimally rotated `v`, accurate for nearby shapes.
    let (c, s) = (re / r, im / r);
    let chord = a
        .as_slice()
        .chunks_exact(2)
        .zip(b.as_slice().chunks_exact(2))
        .map(|(p, q)| {
            let dx = p[0] - (c * q[0] - s * q[1]);
            let dy = p[1] - (s * q[0] + c * q[1]);
            dx * dx + dy * dy
        })
        .sum::<f64>()
        .sqrt();
    Ok(2.0 * (0.5 * chord).min(1.0).asin())
}

/// Orthonormal directions spanning pure translations in `R^{2k}`.
pub fn translation_directions(k: usize) -> [DVector<f64>; 2] {
    let s = 1.0 / (k as f64).sqrt();
    let mut tx = DVector::zeros(2 * k);
    let mut ty = DVector::zeros(2 * k);
    for j in 0..k {
        tx[2 * j] = s;
        ty[2 * j + 1] = s;
    }
    [tx, ty]
}

/// Rotates, scales and translates a landmark configuration.
pub fn similarity_transform(
    landmarks: &[[f64; 2]],
    angle: f64,
    scale: f64,
    shift: [f64; 2],
) -> Vec<[f64; 2]> {
    let (s, c) = angle.sin_cos();
    landmarks
        .iter()
        .map(|p| {
            [
                scale * (c * p[0] - s * p[1]) + shift[0],
                scale * (s * p[0] + c * p[1]) + shift[1],
            ]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::linalg::sym_eigen;
    use nalgebra::DMatrix;

    #[test]
    fn shape_distance_ignores_rotation() {
        let z = [[0.0, 0.0], [1.0, 0.0], [0.3, 0.9], [-0.4, 0.5]];
        let u = preshape(&z).unwrap();
        let v = preshape(&similarity_transform(&z, 2.1, 3.0, [1.0, -2.0])).unwrap();
        assert!(shape_distance(&u, &v).unwrap() < 1e-12);
        let w = preshape(&[[0.0, 0.0], [1.0, 0.0], [0.5, 0.1], [0.2, -0.8]]).unwrap();
        assert!(shape_distance(&u, &w).unwrap() > 0.1);
    }

    #[test]
    fn collinear_example() {
        let u = preshape(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let want = [-s, 0.0, 0.0, 0.0, s, 0.0];
        for (a, b) in u.as_vector().unwrap().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_shape_rejected() {
        let err = preshape(&[[1.0, 1.0]; 4]).unwrap_err();
        assert!(matches!(err, Error::DegenerateShape(_)));
        assert!(preshape(&[[0.0, 0.0], [1.0, 0.0]]).is_err());
    }

    #[test]
    fn first_basis_vector_embeds_to_e11() {
        let mut v = DVector::zeros(6);
        v[0] = 1.0;
        // Not centered, so feed the embedding directly.
        let f = vw_embed(&ManifoldPoint::Preshape(v)).unwrap();
        assert_eq!(f[0], 1.0);
        assert_eq!(f.iter().filter(|&&x| x != 0.0).count(), 1);
    }

    fn hermitian_from_features(f: &DVector<f64>, k: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let pairs = k * (k - 1) / 2;
        let mut re = DMatrix::zeros(k, k);
        let mut im = DMatrix::zeros(k, k);
        for i in 0..k {
            re[(i, i)] = f[i];
        }
        let mut s = 0;
        for i in 0..k {
            for j in i + 1..k {
                re[(i, j)] = f[k + s];
                re[(j, i)] = f[k + s];
                im[(i, j)] = f[k + pairs + s];
                im[(j, i)] = -f[k + pairs + s];
                s += 1;
            }
        }
        (re, im)
    }

    #[test]
    fn embedded_matrix_is_rank_one_projector() {
        let z = [[0.3, -1.0], [2.0, 0.5], [1.1, 1.7], [-0.4, 0.9], [0.0, -2.2]];
        let u = preshape(&z).unwrap();
        let k = z.len();
        let f = vw_embed(&u).unwrap();
        let (re, im) = hermitian_from_features(&f, k);
        // Hermitian A + iB as the real symmetric block matrix [[A, -B], [B, A]];
        // each eigenvalue of the Hermitian matrix appears twice.
        let mut block = DMatrix::zeros(2 * k, 2 * k);
        block.view_mut((0, 0), (k, k)).copy_from(&re);
        block.view_mut((k, k), (k, k)).copy_from(&re);
        block.view_mut((0, k), (k, k)).copy_from(&(-&im));
        block.view_mut((k, 0), (k, k)).copy_from(&im);
        let e = sym_eigen(&block);
        let trace: f64 = (0..k).map(|i| re[(i, i)]).sum();
        assert!((trace - 1.0).abs() < 1e-12);
        assert!((e.values[2 * k - 1] - 1.0).abs() < 1e-12);
        assert!((e.values[2 * k - 2] - 1.0).abs() < 1e-12);
        for &l in e.values.iter().take(2 * k - 2) {
            assert!(l.abs() < 1e-10);
        }
    }

    #[test]
    fn embedding_removes_similarity() {
        let z = [[0.3, -1.0], [2.0, 0.5], [1.1, 1.7], [-0.4, 0.9]];
        let base = vw_embed(&preshape(&z).unwrap()).unwrap();
        let moved = similarity_transform(&z, 2.1, 7.0, [5.0, -3.0]);
        let other = vw_embed(&preshape(&moved).unwrap()).unwrap();
        assert!((base - other).amax() < 1e-12);
    }
}
