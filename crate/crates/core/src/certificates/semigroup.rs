use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{JumpWindow, SynapticNetwork};
use crate::spectral::{semigroup_variance_profile, ProfileRow};
use crate::state_space::{EnumeratedSpace, SparseGenerator};
use crate::stats::replica_rng;

/// Growth caps for the fitted constants: cubic and quadratic orders plus
/// regression slack.
pub const D1_EXPONENT_CAP: f64 = 3.25;
pub const D2_EXPONENT_CAP: f64 = 2.25;
pub const SUITE_SIZE: usize = 50;

/// `θ = (N·e)^N`.
pub fn theta(n: usize) -> f64 {
    (n as f64 * std::f64::consts::E).powi(n as i32)
}

/// Largest jump-window mode `t0` over support states and neurons.
pub fn max_t0(net: &SynapticNetwork, space: &EnumeratedSpace, mu: &[f64]) -> Result<f64> {
    let mut best = 0.0f64;
    for (k, x) in space.states().iter().enumerate() {
        if mu[k] <= 0.0 {
            continue;
        }
        for i in 0..net.n_neurons() {
            best = best.max(JumpWindow::compute(net, x, i, 1.0)?.t0);
        }
    }
    Ok(best)
}

/// `t1 = 1/δ + max t0`.
pub fn t1(net: &SynapticNetwork, space: &EnumeratedSpace, mu: &[f64]) -> Result<f64> {
    Ok(1.0 / net.intensity().delta + max_t0(net, space, mu)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteFunction {
    pub name: String,
    pub values: Vec<f64>,
    /// Vanishes on `{x_i ≤ outside_threshold for all i}`.
    pub outside: bool,
}

/// Deterministic test functions: smooth shapes, functions living beyond
/// `outside_threshold`, and seeded random tables, `SUITE_SIZE` in total.
pub fn default_function_suite(
    net: &SynapticNetwork,
    space: &EnumeratedSpace,
    outside_threshold: f64,
    seed: u64,
) -> Vec<SuiteFunction> {
    let n = net.n_neurons();
    let mut suite = Vec::with_capacity(SUITE_SIZE);
    let mut push = |name: String, values: Vec<f64>, outside: bool| {
        suite.push(SuiteFunction {
            name,
            values,
            outside,
        })
    };

    push("constant".into(), vec![1.0; space.len()], false);
    push("sum".into(), space.tabulate(|x| x.total()), false);
    push(
        "sum_sq".into(),
        space.tabulate(|x| x.values().iter().map(|v| v * v).sum()),
        false,
    );
    push(
        "max".into(),
        space.tabulate(|x| x.values().into_iter().fold(0.0, f64::max)),
        false,
    );
    push(
        "log_v".into(),
        space.tabulate(|x| (1.0 + x.total()).ln()),
        false,
    );
    push(
        "sqrt_v".into(),
        space.tabulate(|x| (1.0 + x.total()).sqrt()),
        false,
    );
    push(
        "tanh_sum".into(),
        space.tabulate(|x| (x.total() - 2.0).tanh()),
        false,
    );
    for i in 0..n.min(4) {
        push(format!("x{}", i + 1), space.tabulate(|x| x.value(i)), false);
        push(
            format!("x{}_sq", i + 1),
            space.tabulate(|x| x.value(i).powi(2)),
            false,
        );
        push(
            format!("exp_neg_x{}", i + 1),
            space.tabulate(|x| (-x.value(i)).exp()),
            false,
        );
        push(
            format!("sin_x{}", i + 1),
            space.tabulate(|x| x.value(i).sin()),
            false,
        );
    }
    let beyond = |x: &crate::model::PotentialState| -> f64 {
        x.values()
            .iter()
            .map(|v| (v - outside_threshold).max(0.0))
            .sum()
    };
    push("outside_linear".into(), space.tabulate(beyond), true);
    push(
        "outside_sq".into(),
        space.tabulate(|x| beyond(x).powi(2)),
        true,
    );
    push(
        "outside_tanh".into(),
        space.tabulate(|x| beyond(x).tanh()),
        true,
    );
    push(
        "outside_sqrt".into(),
        space.tabulate(|x| beyond(x).sqrt()),
        true,
    );
    for i in 0..n.min(2) {
        push(
            format!("outside_x{}", i + 1),
            space.tabulate(|x| (x.value(i) - outside_threshold).max(0.0)),
            true,
        );
    }
    let mut rng = replica_rng(seed, 0);
    let mut r = 0;
    while suite.len() < SUITE_SIZE {
        let values = (0..space.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        suite.push(SuiteFunction {
            name: format!("random_{r}"),
            values,
            outside: false,
        });
        r += 1;
    }
    suite.truncate(SUITE_SIZE);
    suite
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitRow {
    pub t: f64,
    pub d1: f64,
    pub d2: f64,
    /// `max_f LHS/μ(Γ)`: the constant needed with the first term alone.
    pub d1_alone: f64,
    /// `max_f LHS/local`: the constant needed with the second term alone.
    pub d2_alone: f64,
}

/// Balanced fit: scale the pair of one-term constants by the smallest factor
/// that keeps every function feasible.
fn fit(t: f64, rows: &[ProfileRow]) -> FitRow {
    let ratio_max = |den: fn(&ProfileRow) -> f64| {
        rows.iter()
            .filter(|r| r.lhs > 0.0 && den(r) > 0.0)
            .map(|r| r.lhs / den(r))
            .fold(0.0, f64::max)
    };
    let d1_alone = ratio_max(|r| r.energy);
    let d2_alone = ratio_max(|r| r.local);
    let scale = rows
        .iter()
        .filter(|r| r.lhs > 0.0 && r.energy + r.local > 0.0)
        .map(|r| r.lhs / (d1_alone * r.energy + d2_alone * r.local))
        .fold(0.0, f64::max);
    FitRow {
        t,
        d1: scale * d1_alone,
        d2: scale * d2_alone,
        d1_alone,
        d2_alone,
    }
}

/// Least-squares slope of `ln y` against `ln t`; `None` unless every value is positive.
pub fn log_log_slope(t: &[f64], y: &[f64]) -> Option<f64> {
    if t.len() < 2 || y.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, Serialize)]
pub struct OutsideSupportCheck {
    pub functions: usize,
    /// Largest second-term value over outside functions; zero when `D` is the inner box.
    pub max_local: f64,
    /// Largest `LHS / (d̂1·μ(Γ))` over outside functions.
    pub max_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SemigroupReport {
    pub theta: f64,
    pub t1: f64,
    pub t0_max: f64,
    pub inner_bound: f64,
    pub outside_threshold: f64,
    pub suite_size: usize,
    pub rows: Vec<FitRow>,
    pub d1_exponent: Option<f64>,
    pub d2_exponent: Option<f64>,
    pub exponents_pass: bool,
    pub outside_support: OutsideSupportCheck,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SemigroupOptions {
    /// `D = {x_i ≤ inner_bound}`.
    pub inner_bound: f64,
    pub eps: f64,
}

/// Measures the constants of the weighted semigroup Poincaré inequality
/// over `suite` on each grid time, all of which must be at least `t1`.
pub fn semigroup_poincare_report(
    net: &SynapticNetwork,
    space: &EnumeratedSpace,
    gen: &SparseGenerator,
    mu: &[f64],
    suite: &[SuiteFunction],
    t_grid: &[f64],
    opts: SemigroupOptions,
) -> Result<SemigroupReport> {
    if t_grid.is_empty() || suite.is_empty() {
        return Err(Error::InvalidParameter(
            "empty t grid or function suite".into(),
        ));
    }
    let t0_max = max_t0(net, space, mu)?;
    let t1 = 1.0 / net.intensity().delta + t0_max;
    if let Some(t) = t_grid.iter().find(|&&t| t < t1 * (1.0 - 1e-12)) {
        return Err(Error::InvalidParameter(format!(
            "t = {t} lies below t1 = {t1}"
        )));
    }
    let d_mask = space.box_indicator(opts.inner_bound);
    let phi_bar = space.total_intensities(net);
    let profiles: Vec<Vec<ProfileRow>> = suite
        .par_iter()
        .map(|f| {
            semigroup_variance_profile(gen, mu, &f.values, t_grid, opts.eps, &phi_bar, &d_mask)
        })
        .collect::<Result<_>>()?;

    let rows: Vec<FitRow> = t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let at_t: Vec<ProfileRow> = profiles.iter().map(|p| p[k]).collect();
            fit(t, &at_t)
        })
        .collect();
    let d1: Vec<f64> = rows.iter().map(|r| r.d1).collect();
    let d2: Vec<f64> = rows.iter().map(|r| r.d2).collect();
    let d1_exponent = log_log_slope(t_grid, &d1);
    let d2_exponent = log_log_slope(t_grid, &d2);
    let exponents_pass = d1_exponent.is_none_or(|e| e <= D1_EXPONENT_CAP)
        && d2_exponent.is_none_or(|e| e <= D2_EXPONENT_CAP);

    let mut max_local = 0.0f64;
    let mut max_ratio = 0.0f64;
    let mut functions = 0;
    for (f, profile) in suite.iter().zip(&profiles) {
        if !f.outside {
            continue;
        }
        functions += 1;
        for (row, fit) in profile.iter().zip(&rows) {
            max_local = max_local.max(row.local);
            if row.lhs > 0.0 {
                max_ratio = max_ratio.max(row.lhs / (fit.d1 * row.energy));
            }
        }
    }
    let outside_support = OutsideSupportCheck {
        functions,
        max_local,
        max_ratio,
        pass: max_local == 0.0 && max_ratio <= 1.0 + 1e-12,
    };
    let pass = exponents_pass && outside_support.pass;
    Ok(SemigroupReport {
        theta: theta(net.n_neurons()),
        t1,
        t0_max,
        inner_bound: opts.inner_bound,
        outside_threshold: opts.inner_bound + net.max_weight(),
        suite_size: suite.len(),
        rows,
        d1_exponent,
        d2_exponent,
        exponents_pass,
        outside_support,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_for_two_neurons() {
        assert!((theta(2) - 29.556_224_395_722_6).abs() < 1e-12);
        assert_eq!(theta(1), std::f64::consts::E);
    }

    #[test]
    fn slope_of_power_law() {
        let t = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = t.iter().map(|v: &f64| 3.0 * v.powf(1.7)).collect();
        assert!((log_log_slope(&t, &y).unwrap() - 1.7).abs() < 1e-12);
        assert_eq!(log_log_slope(&t, &[1.0, 0.0, 1.0, 1.0]), None);
    }
}
