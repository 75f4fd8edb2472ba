use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SynapticNetwork;
use crate::spectral::expectation;
use crate::state_space::EnumeratedSpace;

/// Default distance kept from the boundary `λ²C0C3 = 1`.
pub const DEFAULT_MARGIN: f64 = 0.1;
/// Smallest λ accepted from [`admissible_lambda`].
pub const MIN_LAMBDA: f64 = 1e-8;

/// The λ-independent pieces of the exponential-moment constant for `F = Σxⁱ`.
#[derive(Debug, Clone, Serialize)]
pub struct SumFunctionC3 {
    /// `μ(φ(xⁱ)(xⁱ)²) + N₀²μ(φ(xⁱ))` per neuron.
    pub mean_terms: Vec<f64>,
    /// Essential supremum of `φ(xⁱ)(xⁱ)²` over supp μ, per neuron.
    pub sup_terms: Vec<f64>,
    /// `N₀ = maxᵢ Σ_j W_{i→j}`.
    pub n0: f64,
    /// `N₀²φ(N₀)`.
    pub jump_coefficient: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct C3Report {
    pub lambda: f64,
    pub n0: f64,
    /// Per neuron: (mean term, sup term, jump term, max).
    pub per_neuron: Vec<[f64; 4]>,
    /// Sum over neurons of the per-neuron maxima.
    pub c3: f64,
    pub degenerate: bool,
}

impl SumFunctionC3 {
    pub fn new(net: &SynapticNetwork, space: &EnumeratedSpace, mu: &[f64]) -> Self {
        let phi = net.intensity();
        let n0 = net.max_row_sum();
        let mut mean_terms = Vec::with_capacity(net.n_neurons());
        let mut sup_terms = Vec::with_capacity(net.n_neurons());
        for i in 0..net.n_neurons() {
            let rate: Vec<f64> = space.tabulate(|x| phi.eval(x.value(i)));
            let second: Vec<f64> = space.tabulate(|x| phi.eval(x.value(i)) * x.value(i).powi(2));
            mean_terms.push(expectation(mu, &second) + n0 * n0 * expectation(mu, &rate));
            let sup = (0..space.len())
                .filter(|&k| mu[k] > 0.0)
                .map(|k| second[k])
                .fold(0.0, f64::max);
            sup_terms.push(sup);
        }
        Self {
            mean_terms,
            sup_terms,
            n0,
            jump_coefficient: n0 * n0 * phi.eval(n0),
        }
    }

    pub fn jump_term(&self, lambda: f64) -> f64 {
        self.jump_coefficient * (lambda * self.n0).exp()
    }

    /// `C3(λ)`, nondecreasing in λ.
    pub fn at(&self, lambda: f64) -> f64 {
        let jump = self.jump_term(lambda);
        self.mean_terms
            .iter()
            .zip(&self.sup_terms)
            .map(|(a, b)| a.max(*b).max(jump))
            .sum()
    }

    pub fn report(&self, lambda: f64) -> C3Report {
        let jump = self.jump_term(lambda);
        let per_neuron: Vec<[f64; 4]> = self
            .mean_terms
            .iter()
            .zip(&self.sup_terms)
            .map(|(a, b)| [*a, *b, jump, a.max(*b).max(jump)])
            .collect();
        let c3 = per_neuron.iter().map(|t| t[3]).sum();
        C3Report {
            lambda,
            n0: self.n0,
            per_neuron,
            c3,
            degenerate: c3 == 0.0,
        }
    }
}

pub fn compute_c3_sum_function(
    net: &SynapticNetwork,
    space: &EnumeratedSpace,
    mu: &[f64],
    lambda: f64,
) -> Result<C3Report> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    Ok(SumFunctionC3::new(net, space, mu).report(lambda))
}

/// Ess-sups over supp μ of `φ(xⁱ)D(f)²` and `φ(xⁱ)e^{λD(f)}D(f)²`, maximized
/// over neurons, with `D(f)(x,i) = |f(Δᵢx) − f(x)|` on the truncated chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralHypotheses {
    pub phi_d2: f64,
    pub phi_exp_d2: f64,
}

impl GeneralHypotheses {
    pub fn hold(&self) -> bool {
        self.phi_d2 < 1.0 && self.phi_exp_d2 < 1.0
    }
}

/// `(φ(xⁱ), D(f)(x,i))` over support states and neurons.
fn jump_differences(
    net: &SynapticNetwork,
    space: &EnumeratedSpace,
    f: &[f64],
    mu: &[f64],
) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for (k, x) in space.states().iter().enumerate() {
        if mu[k] <= 0.0 {
            continue;
        }
        for i in 0..net.n_neurons() {
            let y = space.truncated_jump(net, x, i);
            let j = space
                .index_of(&y)
                .expect("enumerated space is closed under jumps");
            out.push((net.intensity().eval(x.value(i)), (f[j] - f[k]).abs()));
        }
    }
    out
}

fn hypotheses_from(diffs: &[(f64, f64)], scale: f64, lambda: f64) -> GeneralHypotheses {
    let mut h = GeneralHypotheses {
        phi_d2: 0.0,
        phi_exp_d2: 0.0,
    };
    for &(phi, d) in diffs {
        let d = scale * d;
        h.phi_d2 = h.phi_d2.max(phi * d * d);
        h.phi_exp_d2 = h.phi_exp_d2.max(phi * (lambda * d).exp() * d * d);
    }
    h
}

pub fn general_hypotheses(
    net: &SynapticNetwork,
    space: &EnumeratedSpace,
    f: &[f64],
    mu: &[f64],
    lambda: f64,
) -> GeneralHypotheses {
    hypotheses_from(&jump_differences(net, space, f, mu), 1.0, lambda)
}

/// `3N` when both hypotheses hold for `f`; otherwise names the first violated one.
pub fn compute_c3_general(
    net: &SynapticNetwork,
    space: &EnumeratedSpace,
    f: &[f64],
    mu: &[f64],
    lambda: f64,
) -> Result<f64> {
    let h = general_hypotheses(net, space, f, mu, lambda);
    if h.phi_d2 >= 1.0 {
        return Err(Error::HypothesisViolated {
            name: "ess-sup phi*D(f)^2",
            value: h.phi_d2,
        });
    }
    if h.phi_exp_d2 >= 1.0 {
        return Err(Error::HypothesisViolated {
            name: "ess-sup phi*exp(lambda*D(f))*D(f)^2",
            value: h.phi_exp_d2,
        });
    }
    Ok(3.0 * net.n_neurons() as f64)
}

/// Supremum of the scales `ε` for which `εf` satisfies both hypotheses,
/// located by bisection to relative width `1e-12`. Infinite when `D(f) ≡ 0`.
pub fn epsilon_star(
    net: &SynapticNetwork,
    space: &EnumeratedSpace,
    f: &[f64],
    mu: &[f64],
    lambda: f64,
) -> f64 {
    let diffs = jump_differences(net, space, f, mu);
    if diffs.iter().all(|&(phi, d)| phi * d == 0.0) {
        return f64::INFINITY;
    }
    let holds = |eps: f64| hypotheses_from(&diffs, eps, lambda).hold();
    let mut lo = 0.0;
    let mut hi = 1.0;
    while holds(hi) {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `ln λ0 = Σ_k 2^k·(−ln(1 − q/4^k))` with `q = λ²C0C3`, summed until the
/// remaining tail is provably below `tol`.
pub fn lambda0_log(c0: f64, c3: f64, lambda: f64, tol: f64) -> Result<f64> {
    let q = lambda * lambda * c0 * c3;
    if !(q >= 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need q >= 0 and tol > 0, got q={q}, tol={tol}"
        )));
    }
    if q >= 1.0 {
        return Err(Error::Inadmissible { q });
    }
    let mut sum = 0.0;
    let mut k = 0i32;
    loop {
        let x = q / 4f64.powi(k);
        sum += 2f64.powi(k) * -(-x).ln_1p();
        // for j > k: 2^j·(−ln(1−q/4^j)) ≤ q·2^{−j}/(1 − q/4^{k+1})
        let tail = q * 2f64.powi(-k) / (1.0 - q / 4f64.powi(k + 1));
        if tail <= tol {
            return Ok(sum);
        }
        k += 1;
    }
}

pub fn lambda0_product(c0: f64, c3: f64, lambda: f64, tol: f64) -> Result<f64> {
    Ok(lambda0_log(c0, c3, lambda, tol)?.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibleLambda {
    pub lambda: f64,
    pub lambda0: f64,
    pub c3: f64,
    /// `λ²·C0·C3(λ)`
    pub q: f64,
    pub bisection_width: f64,
}

/// Largest λ with `λ²·C0·C3(λ) ≤ 1 − margin` for a nondecreasing `C3(λ)`.
pub fn admissible_lambda<F: Fn(f64) -> f64>(
    c0: f64,
    c3: F,
    margin: f64,
    tol: f64,
) -> Result<AdmissibleLambda> {
    if !(c0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "C0 must be positive, got {c0}"
        )));
    }
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "margin must lie in (0,1), got {margin}"
        )));
    }
    let target = 1.0 - margin;
    let g = |l: f64| l * l * c0 * c3(l);
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    // NaN from inf·0 keeps doubling until the overflow guard fires
    while !(g(hi) > target) {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 1100 || !hi.is_finite() {
            return Err(Error::DegenerateSupport(
                "C3 vanishes; every lambda is admissible".into(),
            ));
        }
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo <= MIN_LAMBDA {
        return Err(Error::Inadmissible { q: g(hi) });
    }
    let c3_lo = c3(lo);
    let lambda0 = lambda0_product(c0, c3_lo, lo, tol)?;
    Ok(AdmissibleLambda {
        lambda: lo,
        lambda0,
        c3: c3_lo,
        q: g(lo),
        bisection_width: hi - lo,
    })
}

/// Constants of the exponential tail bound `λ0·e^{λμ(F_r)}·e^{−λr}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcentrationCertificate {
    pub c0: f64,
    pub c3: f64,
    pub n0: f64,
    pub lambda: f64,
    pub lambda0: f64,
}

impl ConcentrationCertificate {
    pub fn q(&self) -> f64 {
        self.lambda * self.lambda * self.c0 * self.c3
    }

    /// `λ0·e^{λ·mean}·e^{−λr}`, evaluated in log space.
    pub fn tail_bound(&self, r: f64, mean: f64) -> f64 {
        (self.lambda0.ln() + self.lambda * (mean - r)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub r: f64,
    /// `μ(F ≥ r)`
    pub exact: f64,
    /// `λ0·e^{λμ(F_r)}·e^{−λr}`
    pub bound: f64,
    /// `λ0·e^{λμ(F)}·e^{−λr}`
    pub bound_mean: f64,
    /// `μ(F − μ(F) ≥ r)`
    pub centered_exact: f64,
    /// Same bound applied to `F − μ(F)`.
    pub centered_bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TalagrandReport {
    pub certificate: ConcentrationCertificate,
    pub mean: f64,
    pub rows: Vec<TailRow>,
    pub centered_pass: bool,
    pub pass: bool,
}

pub fn talagrand_verdict(
    cert: &ConcentrationCertificate,
    mu: &[f64],
    f: &[f64],
    r_grid: &[f64],
) -> TalagrandReport {
    let mean = expectation(mu, f);
    let tail = |g: &dyn Fn(f64) -> bool| -> f64 {
        let ind: Vec<f64> = f.iter().map(|&v| if g(v) { 1.0 } else { 0.0 }).collect();
        expectation(mu, &ind)
    };
    let rows: Vec<TailRow> = r_grid
        .iter()
        .map(|&r| {
            let exact = tail(&|v| v >= r);
            let truncated: Vec<f64> = f.iter().map(|v| v.min(r)).collect();
            let bound = cert.tail_bound(r, expectation(mu, &truncated));
            let centered_exact = tail(&|v| v - mean >= r);
            let centered: Vec<f64> = f.iter().map(|v| (v - mean).min(r)).collect();
            let centered_bound = cert.tail_bound(r, expectation(mu, &centered));
            TailRow {
                r,
                exact,
                bound,
                bound_mean: cert.tail_bound(r, mean),
                centered_exact,
                centered_bound,
                pass: exact <= bound,
            }
        })
        .collect();
    let pass = rows.iter().all(|row| row.pass);
    let centered_pass = rows
        .iter()
        .all(|row| row.centered_exact <= row.centered_bound);
    TalagrandReport {
        certificate: *cert,
        mean,
        rows,
        centered_pass,
        pass,
    }
}
