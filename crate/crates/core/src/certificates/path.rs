use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{lyapunov_function, SynapticNetwork};
use crate::spectral::expectation;
use crate::state_space::{EnumeratedSpace, SparseGenerator};

/// Canonical-path bound on the Poincaré constant over the enumerated box.
#[derive(Debug, Clone, Serialize)]
pub struct PathMethodReport {
    /// `N² / (2·min μ·δ)`; `None` when the support is a single state.
    pub c0_path: Option<f64>,
    pub min_mu: f64,
    pub support_size: usize,
    /// Longest shortest spike path between two support states.
    pub max_path_length: usize,
    /// Ordered support pairs with no connecting spike path.
    pub disconnected_pairs: usize,
    pub degenerate: bool,
}

fn bfs_lengths(gen: &SparseGenerator, from: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; gen.dim()];
    dist[from] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(k) = queue.pop_front() {
        let d = dist[k].unwrap_or(0);
        for (j, _) in gen.row(k) {
            if dist[j].is_none() {
                dist[j] = Some(d + 1);
                queue.push_back(j);
            }
        }
    }
    dist
}

pub fn path_method_c0(
    net: &SynapticNetwork,
    gen: &SparseGenerator,
    mu: &[f64],
) -> PathMethodReport {
    let support: Vec<usize> = (0..gen.dim()).filter(|&k| mu[k] > 0.0).collect();
    let min_mu = support.iter().map(|&k| mu[k]).fold(f64::INFINITY, f64::min);
    let mut max_path_length = 0;
    let mut disconnected_pairs = 0;
    for &a in &support {
        let dist = bfs_lengths(gen, a);
        for &b in &support {
            match dist[b] {
                Some(d) => max_path_length = max_path_length.max(d),
                None => disconnected_pairs += 1,
            }
        }
    }
    let degenerate = support.len() < 2;
    let n = net.n_neurons() as f64;
    let c0_path = (!degenerate).then(|| n * n / (2.0 * min_mu * net.intensity().delta));
    PathMethodReport {
        c0_path,
        min_mu,
        support_size: support.len(),
        max_path_length,
        disconnected_pairs,
        degenerate,
    }
}

/// Measured stand-in for the additive constant of the drift-to-Poincaré step:
/// the largest `μ(f²·(−𝓛V/V)·1_{outside inner box}) / μ(Γ(f,f))` over `suite`.
pub fn measured_lyapunov_d1(
    space: &EnumeratedSpace,
    gen: &SparseGenerator,
    mu: &[f64],
    suite: &[Vec<f64>],
    inner_bound: f64,
) -> Result<f64> {
    if suite.is_empty() {
        return Err(Error::InvalidParameter("empty function suite".into()));
    }
    let v = space.tabulate(lyapunov_function);
    let lv = gen.apply(&v);
    let inner = space.box_indicator(inner_bound);
    let weight: Vec<f64> = (0..space.len())
        .map(|k| {
            if inner[k] {
                0.0
            } else {
                (-lv[k] / v[k]).max(0.0)
            }
        })
        .collect();
    let mut best = 0.0f64;
    for f in suite {
        let energy = expectation(mu, &gen.carre_du_champ(f));
        if energy <= 0.0 {
            continue;
        }
        let num: Vec<f64> = f.iter().zip(&weight).map(|(a, w)| a * a * w).collect();
        best = best.max(expectation(mu, &num) / energy);
    }
    Ok(best)
}
