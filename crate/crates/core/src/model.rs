//! The network model: intensities, the spike (jump) map, the generator and
//! its carré du champ, the Lyapunov drift certificate and the closed-form
//! probabilities of short jump windows.
//!
//! Membrane potentials live on the lattice `(1/D)·ℕ^N`, where `D` is the
//! least common denominator of all synaptic weights. A spike of neuron `i`
//! resets `x_i` to zero and adds `W_{i→j}` to every other coordinate, so the
//! lattice is closed under the dynamics and states can be hashed exactly.
//!
//! Only the affine intensity `φ(x) = δ + slope·x` is provided. It satisfies
//! `φ ≥ δ` and `φ(x) > slope·x` by inspection. Other monotone intensities can
//! be added by extending [`IntensityFunction`] as long as they declare their
//! own lower bound `δ` and linear constant `c`.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative gap below which the two totals of a jump window are treated as equal.
pub const EQUAL_TOTALS_RTOL: f64 = 1e-12;

/// Affine spiking intensity `φ(x) = delta + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityFunction {
    pub delta: f64,
    pub slope: f64,
}

impl IntensityFunction {
    pub fn new(delta: f64, slope: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidModel(format!(
                "delta must be positive, got {delta}"
            )));
        }
        if !(slope.is_finite() && slope > 0.0) {
            return Err(Error::InvalidModel(format!(
                "slope must be positive, got {slope}"
            )));
        }
        Ok(Self { delta, slope })
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.delta + self.slope * x
    }

    /// The constant `c` with `φ(x) > c·x` on `x > 0`.
    #[inline]
    pub fn linear_constant(&self) -> f64 {
        self.slope
    }

    /// `c ∧ δ`.
    #[inline]
    pub fn drift_rate(&self) -> f64 {
        self.slope.min(self.delta)
    }

    /// True when both `δ > 1` and `c > 1`, which is what a drift rate `ϑ > 1` needs.
    pub fn lyapunov_strong(&self) -> bool {
        self.delta > 1.0 && self.slope > 1.0
    }
}

/// A point of the potential lattice. Coordinate `i` equals
/// `numerators[i] / denominator`; the denominator is shared by every state of
/// one network, so equality of states is equality of numerator vectors.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PotentialState {
    pub numerators: Vec<u64>,
    pub denominator: u64,
}

impl PotentialState {
    pub fn zeros(n: usize, denominator: u64) -> Self {
        Self {
            numerators: vec![0; n],
            denominator,
        }
    }

    pub fn len(&self) -> usize {
        self.numerators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numerators.is_empty()
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.numerators[i] as f64 / self.denominator as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }

    /// `Σ x^i`.
    pub fn total(&self) -> f64 {
        self.numerators.iter().sum::<u64>() as f64 / self.denominator as f64
    }
}

impl fmt::Debug for PotentialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denominator == 1 {
            write!(f, "{:?}", self.numerators)
        } else {
            write!(f, "{:?}/{}", self.numerators, self.denominator)
        }
    }
}

/// `N` neurons, nonnegative rational weights with zero diagonal, and an intensity.
#[derive(Debug, Clone)]
pub struct SynapticNetwork {
    n: usize,
    weights: Vec<Vec<Ratio<i64>>>,
    row_sums: Vec<Ratio<i64>>,
    denominator: u64,
    // Row-major `W_{i→j}·D`.
    weight_numerators: Vec<u64>,
    intensity: IntensityFunction,
}

impl SynapticNetwork {
    pub fn new(weights: Vec<Vec<Ratio<i64>>>, intensity: IntensityFunction) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::InvalidModel(
                "network needs at least one neuron".into(),
            ));
        }
        let mut denominator: i64 = 1;
        for (i, row) in weights.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidModel(format!(
                    "weight row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, w) in row.iter().enumerate() {
                if *w < Ratio::from_integer(0) {
                    return Err(Error::InvalidModel(format!("weight {i}->{j} is negative")));
                }
                if i == j && *w != Ratio::from_integer(0) {
                    return Err(Error::InvalidModel(format!(
                        "self weight {i}->{i} must be zero"
                    )));
                }
                denominator = denominator.lcm(w.denom());
            }
        }
        let d = Ratio::from_integer(denominator);
        let mut weight_numerators = Vec::with_capacity(n * n);
        for row in &weights {
            for w in row {
                let scaled = *w * d;
                debug_assert!(scaled.is_integer());
                weight_numerators.push(scaled.to_integer() as u64);
            }
        }
        let row_sums = weights
            .iter()
            .map(|row| row.iter().fold(Ratio::from_integer(0), |acc, w| acc + *w))
            .collect();
        Ok(Self {
            n,
            weights,
            row_sums,
            denominator: denominator as u64,
            weight_numerators,
            intensity,
        })
    }

    /// Parses the JSON model document
    /// `{"n": int, "weights": [[rational]], "intensity": {"delta": num, "slope": num}}`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(text)?;
        spec.build()
    }

    pub fn n_neurons(&self) -> usize {
        self.n
    }

    pub fn intensity(&self) -> &IntensityFunction {
        &self.intensity
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn weight_ratio(&self, i: usize, j: usize) -> Ratio<i64> {
        self.weights[i][j]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        ratio_to_f64(self.weights[i][j])
    }

    #[inline]
    pub(crate) fn weight_numerator(&self, i: usize, j: usize) -> u64 {
        self.weight_numerators[i * self.n + j]
    }

    /// Exact `W_i = Σ_{j≠i} W_{i→j}`.
    pub fn row_sum_ratio(&self, i: usize) -> Ratio<i64> {
        self.row_sums[i]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        ratio_to_f64(self.row_sums[i])
    }

    /// `N₀ = max_i W_i`.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.n).map(|i| self.row_sum(i)).fold(0.0, f64::max)
    }

    /// `max_{i,j} W_{i→j}`.
    pub fn max_weight(&self) -> f64 {
        self.weights
            .iter()
            .flatten()
            .map(|w| ratio_to_f64(*w))
            .fold(0.0, f64::max)
    }

    pub fn zero_state(&self) -> PotentialState {
        PotentialState::zeros(self.n, self.denominator)
    }

    pub fn state_from_numerators(&self, numerators: Vec<u64>) -> Result<PotentialState> {
        if numerators.len() != self.n {
            return Err(Error::InvalidParameter(format!(
                "state has {} coordinates, network has {}",
                numerators.len(),
                self.n
            )));
        }
        Ok(PotentialState {
            numerators,
            denominator: self.denominator,
        })
    }

    /// Builds a state from real coordinates that must sit on the lattice.
    pub fn state_from_values(&self, values: &[f64]) -> Result<PotentialState> {
        let d = self.denominator as f64;
        let numerators = values
            .iter()
            .map(|&v| {
                let scaled = v * d;
                let rounded = scaled.round();
                if v < 0.0
                    || !v.is_finite()
                    || (scaled - rounded).abs() > 1e-9 * scaled.abs().max(1.0)
                {
                    Err(Error::InvalidParameter(format!(
                        "potential {v} is not a nonnegative multiple of 1/{}",
                        self.denominator
                    )))
                } else {
                    Ok(rounded as u64)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        self.state_from_numerators(numerators)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n {
            Err(Error::IndexOutOfRange {
                index: i,
                n: self.n,
            })
        } else {
            Ok(())
        }
    }

    /// `φ(x^i)` for a zero-based neuron index.
    pub fn intensity_at(&self, x: &PotentialState, i: usize) -> Result<f64> {
        self.check_index(i)?;
        Ok(self.rate(x, i))
    }

    #[inline]
    pub(crate) fn rate(&self, x: &PotentialState, i: usize) -> f64 {
        self.intensity.eval(x.value(i))
    }

    /// `φ̄(x) = Σ_i φ(x^i)`.
    pub fn total_intensity(&self, x: &PotentialState) -> f64 {
        (0..self.n).map(|i| self.rate(x, i)).sum()
    }

    /// `Δ_i(x)`: neuron `i` resets, every other neuron gains `W_{i→j}`.
    pub fn jump_map(&self, x: &PotentialState, i: usize) -> Result<PotentialState> {
        self.check_index(i)?;
        Ok(self.jump(x, i))
    }

    pub(crate) fn jump(&self, x: &PotentialState, i: usize) -> PotentialState {
        let numerators = x
            .numerators
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                if j == i {
                    0
                } else {
                    v + self.weight_numerator(i, j)
                }
            })
            .collect();
        PotentialState {
            numerators,
            denominator: x.denominator,
        }
    }

    /// `𝓛f(x) = Σ_i φ(x^i)[f(Δ_i x) − f(x)]`.
    pub fn apply_generator<F>(&self, f: F, x: &PotentialState) -> f64
    where
        F: Fn(&PotentialState) -> f64,
    {
        let fx = f(x);
        (0..self.n)
            .map(|i| self.rate(x, i) * (f(&self.jump(x, i)) - fx))
            .sum()
    }

    /// `Γ(f,f)(x) = ½ Σ_i φ(x^i)[f(Δ_i x) − f(x)]²`.
    pub fn carre_du_champ<F>(&self, f: F, x: &PotentialState) -> f64
    where
        F: Fn(&PotentialState) -> f64,
    {
        let fx = f(x);
        0.5 * (0..self.n)
            .map(|i| {
                let diff = f(&self.jump(x, i)) - fx;
                self.rate(x, i) * diff * diff
            })
            .sum::<f64>()
    }

    /// `𝓛V(x) = Σ_i φ(x^i)(W_i − x^i)` for `V = 1 + Σ x^i`.
    pub fn lyapunov_drift(&self, x: &PotentialState) -> f64 {
        (0..self.n)
            .map(|i| self.rate(x, i) * (self.row_sum(i) - x.value(i)))
            .sum()
    }
}

/// `V(x) = 1 + Σ_i x^i`.
pub fn lyapunov_function(x: &PotentialState) -> f64 {
    1.0 + x.total()
}

fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Constants of the drift inequality `𝓛V ≤ −ϑV + b·1_B`, `B = {Σx^i ≤ m}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCertificate {
    pub alpha: f64,
    /// `c ∧ δ`.
    pub drift_rate: f64,
    /// `ϑ = α(c ∧ δ)`.
    pub theta_drift: f64,
    /// `b = Σ_i φ(1 + W_i)·W_i`.
    pub b: f64,
    /// `m = (b + ϑ) / ((1 − α)(c ∧ δ))`.
    pub m: f64,
}

impl LyapunovCertificate {
    pub fn new(net: &SynapticNetwork, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0,1), got {alpha}"
            )));
        }
        let phi = net.intensity();
        let drift_rate = phi.drift_rate();
        let theta_drift = alpha * drift_rate;
        let b = (0..net.n_neurons())
            .map(|i| {
                let w = net.row_sum(i);
                phi.eval(1.0 + w) * w
            })
            .sum::<f64>();
        let m = (b + theta_drift) / ((1.0 - alpha) * drift_rate);
        Ok(Self {
            alpha,
            drift_rate,
            theta_drift,
            b,
            m,
        })
    }

    pub fn in_set(&self, x: &PotentialState) -> bool {
        x.total() <= self.m
    }

    /// `(−ϑV(x) + b·1_B(x)) − 𝓛V(x)`; nonnegative where the drift inequality holds.
    pub fn slack(&self, net: &SynapticNetwork, x: &PotentialState) -> f64 {
        self.slack_with(net, x, self.b)
    }

    /// Same as [`slack`](Self::slack) with the indicator coefficient `b + ϑ`
    /// that the drift argument actually produces; this form holds at every state.
    pub fn proof_form_slack(&self, net: &SynapticNetwork, x: &PotentialState) -> f64 {
        self.slack_with(net, x, self.b + self.theta_drift)
    }

    fn slack_with(&self, net: &SynapticNetwork, x: &PotentialState, coefficient: f64) -> f64 {
        let indicator = if self.in_set(x) { coefficient } else { 0.0 };
        -self.theta_drift * lyapunov_function(x) + indicator - net.lyapunov_drift(x)
    }
}

/// Probabilities of the jump window `[0, s]` started at `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpWindow {
    /// `p_s(x)`: no jump at all.
    pub p_none: f64,
    /// `p_s^i(x)`: exactly one jump, by neuron `i`.
    pub p_single: f64,
    /// Maximiser of `s ↦ p_s^i(x)`.
    pub t0: f64,
    /// `φ̄(x)`.
    pub total_before: f64,
    /// `φ̄(Δ_i x)`.
    pub total_after: f64,
}

impl JumpWindow {
    pub fn compute(net: &SynapticNetwork, x: &PotentialState, i: usize, s: f64) -> Result<Self> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "window length must be >= 0, got {s}"
            )));
        }
        let rate_i = net.intensity_at(x, i)?;
        let a = net.total_intensity(x);
        let b = net.total_intensity(&net.jump(x, i));
        let d = a - b;
        let equal = d.abs() < EQUAL_TOTALS_RTOL * a;

        let p_none = (-s * a).exp();
        let p_single = if s == 0.0 {
            0.0
        } else if equal {
            s * rate_i * (-s * a).exp()
        } else if (s * d).abs() < 1.0 {
            // e^{-sa}(e^{sd} − 1)/d without cancellation.
            rate_i * (-s * a).exp() * (s * d).exp_m1() / d
        } else {
            rate_i / d * ((-s * b).exp() - (-s * a).exp())
        };
        let t0 = if equal { 1.0 / a } else { (d / b).ln_1p() / d };
        Ok(Self {
            p_none,
            p_single: p_single.clamp(0.0, 1.0),
            t0,
            total_before: a,
            total_after: b,
        })
    }
}

/// Serialized form of a network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n: usize,
    pub weights: Vec<Vec<RationalEntry>>,
    pub intensity: IntensitySpec,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntensitySpec {
    pub delta: f64,
    pub slope: f64,
}

/// A weight given either as a JSON integer or as a `"p/q"` / `"p"` string.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalEntry {
    Integer(i64),
    Text(String),
}

impl RationalEntry {
    pub fn to_ratio(&self) -> Result<Ratio<i64>> {
        match self {
            RationalEntry::Integer(v) => Ok(Ratio::from_integer(*v)),
            RationalEntry::Text(s) => Ratio::from_str(s.trim()).map_err(|_| {
                Error::InvalidModel(format!("cannot parse weight {s:?} as a rational"))
            }),
        }
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<SynapticNetwork> {
        if self.weights.len() != self.n {
            return Err(Error::InvalidModel(format!(
                "n = {} but {} weight rows given",
                self.n,
                self.weights.len()
            )));
        }
        let weights = self
            .weights
            .iter()
            .map(|row| {
                row.iter()
                    .map(RationalEntry::to_ratio)
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let intensity = IntensityFunction::new(self.intensity.delta, self.intensity.slope)?;
        SynapticNetwork::new(weights, intensity)
    }
}
