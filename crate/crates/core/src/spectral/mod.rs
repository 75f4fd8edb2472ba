//! Exact numerics on a truncated chain: stationary law, transient laws,
//! quadratic forms and the optimal Poincaré constant.

mod classes;
pub mod lanczos;
pub mod uniformization;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub use classes::{closed_class, ClosedClass};
pub use uniformization::{
    evolve_function, integrate_function, transient_distribution, weighted_f_exact,
};

use crate::error::{Error, Result};
use crate::state_space::SparseGenerator;
use crate::stats::pairwise_sum;
use lanczos::SymmetricCsr;

/// Largest support handled by dense linear algebra.
pub const DENSE_CUTOFF: usize = 2000;

/// Power iteration runs on `I + Q/Λ` with `Λ` this factor times the largest
/// exit rate, which makes the kernel aperiodic.
const POWER_RATE_FACTOR: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StationaryMethod {
    Dense,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryOptions {
    pub dense_cutoff: usize,
    /// Stop when successive power iterates differ by less than this in ℓ¹.
    pub power_tol: f64,
    pub max_power_iterations: usize,
    /// Run power iteration as well when the dense solve is used.
    pub cross_check: bool,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self {
            dense_cutoff: DENSE_CUTOFF,
            power_tol: 1e-15,
            max_power_iterations: 5_000_000,
            cross_check: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryDistribution {
    pub probabilities: Vec<f64>,
    /// `‖μᵀQ‖∞`
    pub residual: f64,
    /// Closed class, sorted.
    pub support: Vec<usize>,
    pub method: StationaryMethod,
    /// Total variation between dense and power results when both ran.
    pub cross_check_tv: Option<f64>,
    pub power_iterations: Option<usize>,
}

impl StationaryDistribution {
    pub fn expectation(&self, f: &[f64]) -> f64 {
        expectation(&self.probabilities, f)
    }
}

pub fn expectation(mu: &[f64], f: &[f64]) -> f64 {
    let terms: Vec<f64> = mu
        .iter()
        .zip(f)
        .map(|(m, v)| if *m == 0.0 { 0.0 } else { m * v })
        .collect();
    pairwise_sum(&terms)
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    0.5 * pairwise_sum(&diffs)
}

pub fn stationarity_residual(gen: &SparseGenerator, mu: &[f64]) -> f64 {
    gen.apply_transpose(mu)
        .iter()
        .fold(0.0, |m, v| m.max(v.abs()))
}

/// Grassmann–Taksar–Heyman state reduction. Only off-diagonal rates are read
/// and no subtraction occurs, so tiny probabilities keep full relative accuracy.
fn gth(mut a: DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    for k in (1..n).rev() {
        let s: f64 = (0..k).map(|j| a[(k, j)]).sum();
        for i in 0..k {
            a[(i, k)] /= s;
        }
        for i in 0..k {
            let aik = a[(i, k)];
            if aik != 0.0 {
                for j in 0..k {
                    a[(i, j)] += aik * a[(k, j)];
                }
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for j in 1..n {
        pi[j] = (0..j).map(|i| pi[i] * a[(i, j)]).sum();
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    pi
}

fn local_index(dim: usize, support: &[usize]) -> Vec<usize> {
    let mut local = vec![usize::MAX; dim];
    for (l, &k) in support.iter().enumerate() {
        local[k] = l;
    }
    local
}

fn dense_stationary(gen: &SparseGenerator, support: &[usize]) -> Vec<f64> {
    let local = local_index(gen.dim(), support);
    let n = support.len();
    let mut a = DMatrix::zeros(n, n);
    for (l, &k) in support.iter().enumerate() {
        for (j, q) in gen.row(k) {
            a[(l, local[j])] += q;
        }
    }
    gth(a)
}

fn power_stationary(
    gen: &SparseGenerator,
    support: &[usize],
    opts: &StationaryOptions,
) -> (Vec<f64>, usize) {
    let local = local_index(gen.dim(), support);
    let n = support.len();
    let rate = POWER_RATE_FACTOR
        * support
            .iter()
            .map(|&k| gen.exit_rate(k))
            .fold(0.0, f64::max);
    let mut v = vec![1.0 / n as f64; n];
    if rate == 0.0 {
        return (v, 0);
    }
    let edges: Vec<Vec<(usize, f64)>> = support
        .iter()
        .map(|&k| gen.row(k).map(|(j, q)| (local[j], q / rate)).collect())
        .collect();
    let stay: Vec<f64> = support
        .iter()
        .map(|&k| 1.0 - gen.exit_rate(k) / rate)
        .collect();
    let mut iterations = 0;
    while iterations < opts.max_power_iterations {
        let mut next: Vec<f64> = v.iter().zip(&stay).map(|(p, s)| p * s).collect();
        for (l, row) in edges.iter().enumerate() {
            for &(j, p) in row {
                next[j] += v[l] * p;
            }
        }
        let total = pairwise_sum(&next);
        next.iter_mut().for_each(|p| *p /= total);
        iterations += 1;
        let diff: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        if diff < opts.power_tol {
            break;
        }
    }
    (v, iterations)
}

fn scatter(dim: usize, support: &[usize], local: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (&k, &p) in support.iter().zip(local) {
        out[k] = p;
    }
    out
}

pub fn stationary(gen: &SparseGenerator) -> Result<StationaryDistribution> {
    stationary_with(gen, &StationaryOptions::default())
}

/// Stationary law of the unique closed class. Dense state reduction below the
/// cutoff, power iteration on the uniformized kernel otherwise.
pub fn stationary_with(
    gen: &SparseGenerator,
    opts: &StationaryOptions,
) -> Result<StationaryDistribution> {
    let class = closed_class(gen)?;
    let support = class.members;
    let dim = gen.dim();
    let (probabilities, method, cross_check_tv, power_iterations) =
        if support.len() <= opts.dense_cutoff {
            let dense = scatter(dim, &support, &dense_stationary(gen, &support));
            if opts.cross_check {
                let (p, it) = power_stationary(gen, &support, opts);
                let power = scatter(dim, &support, &p);
                let tv = total_variation(&dense, &power);
                (dense, StationaryMethod::Dense, Some(tv), Some(it))
            } else {
                (dense, StationaryMethod::Dense, None, None)
            }
        } else {
            let (p, it) = power_stationary(gen, &support, opts);
            (
                scatter(dim, &support, &p),
                StationaryMethod::Power,
                None,
                Some(it),
            )
        };
    let residual = stationarity_residual(gen, &probabilities);
    Ok(StationaryDistribution {
        probabilities,
        residual,
        support,
        method,
        cross_check_tv,
        power_iterations,
    })
}

/// `(Var_μ(f), μ(Γ(f,f)))` with Γ taken from the truncated generator.
pub fn variance_and_energy(gen: &SparseGenerator, mu: &[f64], f: &[f64]) -> (f64, f64) {
    let mean = expectation(mu, f);
    let centered: Vec<f64> = f.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = expectation(mu, &centered);
    let energy = expectation(mu, &gen.carre_du_champ(f));
    (var, energy)
}

/// `−μ(f·Qf)`, equal to the energy when μ is stationary.
pub fn dirichlet_form(gen: &SparseGenerator, mu: &[f64], f: &[f64]) -> f64 {
    let qf = gen.apply(f);
    let prod: Vec<f64> = f.iter().zip(&qf).map(|(a, b)| -a * b).collect();
    expectation(mu, &prod)
}

/// `S f = −(Q + Q*) f / 2` with `Q*` the μ-adjoint; zero off supp μ.
pub fn symmetrized_apply(gen: &SparseGenerator, mu: &[f64], f: &[f64]) -> Vec<f64> {
    let qf = gen.apply(f);
    let weighted: Vec<f64> = mu.iter().zip(f).map(|(m, v)| m * v).collect();
    let qt = gen.apply_transpose(&weighted);
    (0..f.len())
        .map(|x| {
            if mu[x] > 0.0 {
                -0.5 * (qf[x] + qt[x] / mu[x])
            } else {
                0.0
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapMethod {
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapResult {
    pub poincare_constant: f64,
    pub gap: f64,
    /// Optimizer tabulated over the whole space, zero off supp μ.
    pub eigenfunction: Vec<f64>,
    pub method: GapMethod,
    /// `Var_μ(f*) / μ(Γ(f*,f*))`, which should reproduce `poincare_constant`.
    pub eigenfunction_quotient: f64,
    pub support_size: usize,
    /// Residual of the eigenpair; zero for the direct method.
    pub eigen_residual: f64,
}

pub fn poincare_constant(gen: &SparseGenerator, mu: &StationaryDistribution) -> Result<GapResult> {
    poincare_constant_with(gen, &mu.probabilities, DENSE_CUTOFF)
}

/// `C_opt = 1/λ₁` for the μ-symmetrized generator on supp μ. Works with the
/// similar matrix `M = D^{1/2} S D^{-1/2}`, whose kernel is spanned by `√μ`.
pub fn poincare_constant_with(
    gen: &SparseGenerator,
    mu: &[f64],
    dense_cutoff: usize,
) -> Result<GapResult> {
    let support: Vec<usize> = (0..gen.dim()).filter(|&k| mu[k] > 0.0).collect();
    let n = support.len();
    if n < 2 {
        return Err(Error::DegenerateSupport(format!(
            "stationary law has {n} support state(s); the Poincaré constant is undefined"
        )));
    }
    let local = local_index(gen.dim(), &support);
    let sqrt_mu: Vec<f64> = support.iter().map(|&k| mu[k].sqrt()).collect();
    let mut rows: Vec<Vec<(usize, f64)>> = support
        .iter()
        .enumerate()
        .map(|(l, &k)| vec![(l, gen.exit_rate(k))])
        .collect();
    for (a, &k) in support.iter().enumerate() {
        for (j, q) in gen.row(k) {
            let b = local[j];
            if b == usize::MAX {
                continue;
            }
            let w = -0.5 * q * (mu[k] / mu[j]).sqrt();
            rows[a].push((b, w));
            rows[b].push((a, w));
        }
    }
    // merge duplicate columns
    for row in rows.iter_mut() {
        row.sort_by_key(|e| e.0);
        row.dedup_by(|next, prev| {
            if next.0 == prev.0 {
                prev.1 += next.1;
                true
            } else {
                false
            }
        });
    }
    let matrix = SymmetricCsr::from_rows(rows);
    let norm = sqrt_mu.iter().map(|s| s * s).sum::<f64>().sqrt();
    let null: Vec<f64> = sqrt_mu.iter().map(|s| s / norm).collect();

    let (lambda1, g, method, eigen_residual) = if n <= dense_cutoff {
        let eig = SymmetricEigen::new(matrix.to_dense());
        let kernel = (0..n)
            .max_by(|&a, &b| {
                let da: f64 = eig
                    .eigenvectors
                    .column(a)
                    .iter()
                    .zip(&null)
                    .map(|(x, y)| x * y)
                    .sum();
                let db: f64 = eig
                    .eigenvectors
                    .column(b)
                    .iter()
                    .zip(&null)
                    .map(|(x, y)| x * y)
                    .sum();
                da.abs().total_cmp(&db.abs())
            })
            .unwrap_or(0);
        let idx = (0..n)
            .filter(|&k| k != kernel)
            .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
            .unwrap_or(0);
        let g: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        (eig.eigenvalues[idx], g, GapMethod::Direct, 0.0)
    } else {
        let res = lanczos::smallest_deflated(&matrix, &null, 150, 1e-12, 400);
        (
            res.eigenvalue,
            res.eigenvector,
            GapMethod::Iterative,
            res.residual,
        )
    };
    if !(lambda1 > 0.0) {
        return Err(Error::DegenerateSupport(format!(
            "smallest nonzero eigenvalue is {lambda1}"
        )));
    }
    let mut eigenfunction = vec![0.0; gen.dim()];
    for (l, &k) in support.iter().enumerate() {
        eigenfunction[k] = g[l] / sqrt_mu[l];
    }
    let (var, energy) = variance_and_energy(gen, mu, &eigenfunction);
    Ok(GapResult {
        poincare_constant: 1.0 / lambda1,
        gap: lambda1,
        eigenfunction,
        method,
        eigenfunction_quotient: var / energy,
        support_size: n,
        eigen_residual,
    })
}

/// One row of [`semigroup_variance_profile`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileRow {
    pub t: f64,
    /// `∫ Var_{P_t}(f)(x) μ(dx)`
    pub lhs: f64,
    /// `μ(Γ(f,f))`
    pub energy: f64,
    /// `μ(F(t,φ)·P_t(Γ(f,f)·1_D))`
    pub local: f64,
}

/// The three functionals of the weighted semigroup inequality at each `t`.
/// `total_intensity` is `φ̄` tabulated on the space and `d_mask` the set `D`.
pub fn semigroup_variance_profile(
    gen: &SparseGenerator,
    mu: &[f64],
    f: &[f64],
    t_grid: &[f64],
    eps: f64,
    total_intensity: &[f64],
    d_mask: &[bool],
) -> Result<Vec<ProfileRow>> {
    if let Some(t) = t_grid.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "t grid must be positive, got {t}"
        )));
    }
    // centring leaves every functional unchanged and makes constants exact zeros
    let mean = match f.first() {
        Some(&c) if f.iter().all(|v| *v == c) => c,
        _ => expectation(mu, f),
    };
    let f: Vec<f64> = f.iter().map(|v| v - mean).collect();
    let f = &f[..];
    let f2: Vec<f64> = f.iter().map(|v| v * v).collect();
    let gamma = gen.carre_du_champ(f);
    let energy = expectation(mu, &gamma);
    let gamma_d: Vec<f64> = gamma
        .iter()
        .zip(d_mask)
        .map(|(g, &d)| if d { *g } else { 0.0 })
        .collect();
    t_grid
        .iter()
        .map(|&t| {
            let pf = evolve_function(gen, f, t, eps)?;
            let pf2 = evolve_function(gen, &f2, t, eps)?;
            let var: Vec<f64> = pf2
                .iter()
                .zip(&pf)
                .map(|(a, b)| (a - b * b).max(0.0))
                .collect();
            let lhs = expectation(mu, &var);
            let local = if gamma_d.iter().all(|g| *g == 0.0) {
                0.0
            } else {
                let pg = evolve_function(gen, &gamma_d, t, eps)?;
                let big_f = integrate_function(gen, total_intensity, t, eps)?;
                let prod: Vec<f64> = big_f.iter().zip(&pg).map(|(a, b)| a * b).collect();
                expectation(mu, &prod)
            };
            Ok(ProfileRow {
                t,
                lhs,
                energy,
                local,
            })
        })
        .collect()
}
