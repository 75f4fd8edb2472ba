//! Restarted Lanczos for the smallest eigenpair of a symmetric positive
//! semidefinite operator on the orthogonal complement of a known null vector.

use nalgebra::{DMatrix, SymmetricEigen};

/// Symmetric matrix in CSR form.
#[derive(Debug, Clone)]
pub struct SymmetricCsr {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SymmetricCsr {
    /// Build from full (both triangles) row lists.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| self.vals[k] * x[self.cols[k]])
                    .sum()
            })
            .collect()
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| self.vals[k].abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] += self.vals[k];
            }
        }
        m
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Outcome of [`smallest_deflated`].
#[derive(Debug, Clone)]
pub struct LanczosResult {
    pub eigenvalue: f64,
    pub eigenvector: Vec<f64>,
    pub residual: f64,
    pub restarts: usize,
    pub converged: bool,
}

/// Smallest eigenpair of `a` restricted to `null⊥`; `null` must be a unit
/// vector. Full reorthogonalization keeps the basis orthogonal to `null`.
pub fn smallest_deflated(
    a: &SymmetricCsr,
    null: &[f64],
    krylov_dim: usize,
    tol: f64,
    max_restarts: usize,
) -> LanczosResult {
    let n = a.dim();
    let scale = a.norm_bound().max(f64::MIN_POSITIVE);
    let m = krylov_dim.min(n.saturating_sub(1)).max(1);

    // deterministic start with no special structure
    let mut start: Vec<f64> = (0..n)
        .map(|k| 1.0 + ((k as f64 + 1.0) * 0.618_033_988_75).fract())
        .collect();
    let mut best = LanczosResult {
        eigenvalue: f64::NAN,
        eigenvector: vec![0.0; n],
        residual: f64::INFINITY,
        restarts: 0,
        converged: false,
    };

    for restart in 0..max_restarts.max(1) {
        let c = dot(&start, null);
        axpy(&mut start, -c, null);
        if normalize(&mut start) == 0.0 {
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alphas = Vec::with_capacity(m);
        let mut betas: Vec<f64> = Vec::with_capacity(m);
        for j in 0..m {
            let mut w = a.apply(&basis[j]);
            let alpha = dot(&w, &basis[j]);
            alphas.push(alpha);
            // two passes of Gram-Schmidt against the null vector and the basis
            for _ in 0..2 {
                let c = dot(&w, null);
                axpy(&mut w, -c, null);
                for q in &basis {
                    let c = dot(&w, q);
                    axpy(&mut w, -c, q);
                }
            }
            let beta = normalize(&mut w);
            if j + 1 == m || beta <= 1e-13 * scale {
                break;
            }
            betas.push(beta);
            basis.push(w);
        }
        let k = alphas.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (idx, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1))
            .expect("nonempty tridiagonal");
        let mut x = vec![0.0; n];
        for (i, q) in basis.iter().enumerate().take(k) {
            axpy(&mut x, eig.eigenvectors[(i, idx)], q);
        }
        let c = dot(&x, null);
        axpy(&mut x, -c, null);
        normalize(&mut x);
        let ax = a.apply(&x);
        let rayleigh = dot(&x, &ax);
        let residual = ax
            .iter()
            .zip(&x)
            .map(|(p, q)| (p - rayleigh * q).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual < best.residual {
            best = LanczosResult {
                eigenvalue: rayleigh,
                eigenvector: x.clone(),
                residual,
                restarts: restart,
                converged: false,
            };
        }
        if residual <= tol * scale {
            best.converged = true;
            break;
        }
        start = x;
    }
    best
}
