//! Symmetric-matrix helpers: spectral functions, their derivatives, and
//! the isometric vectorization of `Sym(n)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigen-gaps below this use the derivative limit in divided differences.
pub const DEGENERATE_GAP: f64 = 1e-10;

/// Eigendecomposition `M = U diag(λ) Uᵀ` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn sym_eigen(m: &DMatrix<f64>) -> SymEigen {
    let eig = SymmetricEigen::new(symmetrize(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    SymEigen { values, vectors }
}

impl SymEigen {
    /// `U diag(f(λ)) Uᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[j]);
        }
        let out = scaled * self.vectors.transpose();
        symmetrize(&out)
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Gradient of a scalar loss through `F = U f(Λ) Uᵀ`.
    ///
    /// Given `upstream = ∂L/∂F`, returns the symmetric `∂L/∂M`
    /// `U (K ∘ (Uᵀ sym(upstream) U)) Uᵀ`, where `K_ij` is the divided
    /// difference `(f(λ_i) − f(λ_j)) / (λ_i − λ_j)` and `f'` on the diagonal
    /// or across near-degenerate pairs.
    pub fn backward(
        &self,
        f: impl Fn(f64) -> f64,
        f_prime: impl Fn(f64) -> f64,
        upstream: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let n = self.values.len();
        let u = &self.vectors;
        let mut inner = u.transpose() * symmetrize(upstream) * u;
        let fv: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        for i in 0..n {
            for j in 0..n {
                let (li, lj) = (self.values[i], self.values[j]);
                let k = if i == j {
                    f_prime(li)
                } else if (li - lj).abs() < DEGENERATE_GAP {
                    f_prime(0.5 * (li + lj))
                } else {
                    (fv[i] - fv[j]) / (li - lj)
                };
                inner[(i, j)] *= k;
            }
        }
        symmetrize(&(u * inner * u.transpose()))
    }
}

/// Length of the vectorization of an `n × n` symmetric matrix.
pub fn sym_vec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Diagonal first, then the strict upper triangle row by row scaled by
/// `√2`, so the Euclidean norm of the output equals the Frobenius norm.
pub fn vec_sym(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let mut out = DVector::zeros(sym_vec_len(n));
    for i in 0..n {
        out[i] = m[(i, i)];
    }
    let mut k = n;
    for i in 0..n {
        for j in i + 1..n {
            out[k] = std::f64::consts::SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)]);
            k += 1;
        }
    }
    out
}

/// Inverse of [`vec_sym`].
pub fn unvec_sym(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = v[i];
    }
    let mut k = n;
    for i in 0..n {
        for j in i + 1..n {
            let x = v[k] / std::f64::consts::SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

/// Symmetric matrix `G` with `⟨G, dM⟩ = ⟨g, vec_sym(dM)⟩` for symmetric `dM`.
pub fn vec_sym_adjoint(g: &DVector<f64>, n: usize) -> DMatrix<f64> {
    // The adjoint of an isometry is its inverse.
    unvec_sym(g, n)
}

/// Frobenius norm of `a - b`.
pub fn frobenius_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}
