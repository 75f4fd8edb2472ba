//! Transient analysis by uniformization: `P_t = Σ_k Pois(k; Λt) Pᵏ` with the
//! discrete kernel `P = I + Q/Λ` and `Λ` the largest exit rate of the chain.

use crate::error::{Error, Result};
use crate::state_space::SparseGenerator;

fn check(t: f64, eps: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "t must be finite and >= 0, got {t}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "eps must lie in (0,1), got {eps}"
        )));
    }
    Ok(())
}

/// Smallest `K` with `P(N > K) ≤ eps` for `N ~ Poisson(mean)`, using the
/// Chernoff bound `P(N ≥ k) ≤ exp(−mean + k − k ln(k/mean))`.
pub fn poisson_right_truncation(mean: f64, eps: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let log_eps = eps.ln();
    let mut k = mean.floor() as usize + 1;
    loop {
        let kf = k as f64;
        let log_bound = -mean + kf - kf * (kf / mean).ln();
        if log_bound <= log_eps {
            return k - 1;
        }
        k += 1;
    }
}

/// `Pois(k; mean)` for `k = 0..=k_max`, evaluated in log space.
pub fn poisson_weights(mean: f64, k_max: usize) -> Vec<f64> {
    if mean <= 0.0 {
        let mut w = vec![0.0; k_max + 1];
        w[0] = 1.0;
        return w;
    }
    let log_mean = mean.ln();
    let mut log_p = -mean;
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(log_p.exp());
    for k in 1..=k_max {
        log_p += log_mean - (k as f64).ln();
        out.push(log_p.exp());
    }
    out
}

fn step_function(gen: &SparseGenerator, rate: f64, g: &[f64]) -> Vec<f64> {
    gen.apply(g)
        .iter()
        .zip(g)
        .map(|(q, v)| v + q / rate)
        .collect()
}

fn step_distribution(gen: &SparseGenerator, rate: f64, v: &[f64]) -> Vec<f64> {
    gen.apply_transpose(v)
        .iter()
        .zip(v)
        .map(|(q, p)| p + q / rate)
        .collect()
}

/// Row `P_t(x0, ·)`; the dropped Poisson tail is at most `eps`.
pub fn transient_distribution(
    gen: &SparseGenerator,
    x0: usize,
    t: f64,
    eps: f64,
) -> Result<Vec<f64>> {
    check(t, eps)?;
    if x0 >= gen.dim() {
        return Err(Error::InvalidParameter(format!(
            "state {x0} outside dimension {}",
            gen.dim()
        )));
    }
    let mut v = vec![0.0; gen.dim()];
    v[x0] = 1.0;
    let rate = gen.max_exit_rate();
    if rate == 0.0 || t == 0.0 {
        return Ok(v);
    }
    let k_max = poisson_right_truncation(rate * t, eps);
    let weights = poisson_weights(rate * t, k_max);
    let mut out = vec![0.0; gen.dim()];
    for (k, w) in weights.iter().enumerate() {
        for (o, p) in out.iter_mut().zip(&v) {
            *o += w * p;
        }
        if k < k_max {
            v = step_distribution(gen, rate, &v);
        }
    }
    Ok(out)
}

/// Column `P_t g`.
pub fn evolve_function(gen: &SparseGenerator, g: &[f64], t: f64, eps: f64) -> Result<Vec<f64>> {
    check(t, eps)?;
    let rate = gen.max_exit_rate();
    if rate == 0.0 || t == 0.0 {
        return Ok(g.to_vec());
    }
    let k_max = poisson_right_truncation(rate * t, eps);
    let weights = poisson_weights(rate * t, k_max);
    let mut v = g.to_vec();
    let mut out = vec![0.0; g.len()];
    for (k, w) in weights.iter().enumerate() {
        for (o, p) in out.iter_mut().zip(&v) {
            *o += w * p;
        }
        if k < k_max {
            v = step_function(gen, rate, &v);
        }
    }
    Ok(out)
}

/// `∫₀ᵗ P_s g ds`, using `∫₀ᵗ Pois(k; Λs) ds = P(N_{Λt} > k) / Λ`. The
/// truncation error is at most `eps` in sup norm.
pub fn integrate_function(gen: &SparseGenerator, g: &[f64], t: f64, eps: f64) -> Result<Vec<f64>> {
    check(t, eps)?;
    if t == 0.0 {
        return Ok(vec![0.0; g.len()]);
    }
    let rate = gen.max_exit_rate();
    if rate == 0.0 {
        return Ok(g.iter().map(|v| v * t).collect());
    }
    let sup = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // error ≤ sup·t·P(N ≥ K) for a series cut after K terms
    let target = if sup > 0.0 {
        (eps / (sup * t)).min(eps)
    } else {
        eps
    };
    let k_max = poisson_right_truncation(rate * t, target * 1e-3) + 1;
    let weights = poisson_weights(rate * t, k_max);
    let mut survival = vec![0.0; k_max + 1];
    let mut acc = 0.0;
    for k in (0..=k_max).rev() {
        survival[k] = acc;
        acc += weights[k];
    }
    let mut v = g.to_vec();
    let mut out = vec![0.0; g.len()];
    for s in &survival[..k_max] {
        let w = s / rate;
        for (o, p) in out.iter_mut().zip(&v) {
            *o += w * p;
        }
        v = step_function(gen, rate, &v);
    }
    Ok(out)
}

/// `F(t, φ)(x0) = ∫₀ᵗ Σ_y P_s(x0, y) φ̄(y) ds` on the truncated chain.
pub fn weighted_f_exact(
    gen: &SparseGenerator,
    total_intensity: &[f64],
    x0: usize,
    t: f64,
    eps: f64,
) -> Result<f64> {
    if x0 >= gen.dim() {
        return Err(Error::InvalidParameter(format!(
            "state {x0} outside dimension {}",
            gen.dim()
        )));
    }
    Ok(integrate_function(gen, total_intensity, t, eps)?[x0])
}
