//! Exact event-driven simulation and Monte Carlo estimators.
//!
//! Rates are constant between spikes, so the next event is an exponential race:
//! the holding time is `Exp(φ̄(x))` and neuron `i` fires with probability
//! `φ(x^i)/φ̄(x)`. There is no time discretisation anywhere.
//!
//! Replica `r` of an estimator draws from [`replica_rng`]`(seed, r)`; results are
//! collected in replica order and reduced by pairwise summation, so they do not
//! depend on the number of worker threads.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{PotentialState, SynapticNetwork};
use crate::stats::{
    pairwise_sum, replica_rng, sample_variance, variance_estimate, EstimatorResult,
};

/// Number of time batches used for ergodic standard errors.
pub const ERGODIC_BATCHES: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEvent {
    pub time: f64,
    pub neuron: usize,
    pub pre_state: PotentialState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: PotentialState,
    pub horizon: f64,
    pub events: Vec<TrajectoryEvent>,
    pub final_state: PotentialState,
}

impl Trajectory {
    /// State occupied at time `t` (right-continuous paths).
    pub fn state_at(&self, net: &SynapticNetwork, t: f64) -> PotentialState {
        match self.events.iter().rposition(|e| e.time <= t) {
            Some(k) => net.jump(&self.events[k].pre_state, self.events[k].neuron),
            None => self.initial.clone(),
        }
    }
}

/// Draws the holding time and the spiking neuron of the next event from `x`.
pub fn next_event<R: Rng + ?Sized>(
    net: &SynapticNetwork,
    x: &PotentialState,
    rng: &mut R,
) -> (f64, usize) {
    let total = net.total_intensity(x);
    let holding = loop {
        let e: f64 = Exp1.sample(rng);
        if e > 0.0 {
            break e / total;
        }
    };
    let n = net.n_neurons();
    let mut target = rng.random::<f64>() * total;
    let mut neuron = n - 1;
    for i in 0..n {
        let r = net.rate(x, i);
        if target < r {
            neuron = i;
            break;
        }
        target -= r;
    }
    (holding, neuron)
}

fn check_horizon(t: f64, what: &str) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{what} must be a finite nonnegative time, got {t}"
        )))
    }
}

/// Full trajectory on `[0, horizon]`, reproducible from `seed`.
pub fn simulate_path(
    net: &SynapticNetwork,
    x0: &PotentialState,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory> {
    check_horizon(horizon, "horizon")?;
    let mut rng = replica_rng(seed, 0);
    let mut state = x0.clone();
    let mut time = 0.0;
    let mut events = Vec::new();
    loop {
        let (holding, neuron) = next_event(net, &state, &mut rng);
        time += holding;
        if time > horizon {
            break;
        }
        let next = net.jump(&state, neuron);
        events.push(TrajectoryEvent {
            time,
            neuron,
            pre_state: state,
        });
        state = next;
    }
    Ok(Trajectory {
        initial: x0.clone(),
        horizon,
        events,
        final_state: state,
    })
}

/// What one replica saw on `[0, t]`.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub final_state: PotentialState,
    pub n_events: usize,
    /// `∫₀ᵗ φ̄(X_s) ds`, exact for the piecewise-constant path.
    pub intensity_integral: f64,
}

/// Runs one replica from `x0` up to time `t`.
pub fn run_until<R: Rng + ?Sized>(
    net: &SynapticNetwork,
    x0: &PotentialState,
    t: f64,
    rng: &mut R,
) -> RunSummary {
    let mut state = x0.clone();
    let mut time = 0.0;
    let mut n_events = 0;
    let mut integral = 0.0;
    loop {
        let total = net.total_intensity(&state);
        let (holding, neuron) = next_event(net, &state, rng);
        if time + holding > t {
            integral += total * (t - time);
            break;
        }
        integral += total * holding;
        time += holding;
        n_events += 1;
        state = net.jump(&state, neuron);
    }
    RunSummary {
        final_state: state,
        n_events,
        intensity_integral: integral,
    }
}

fn replicas<T, F>(n_replicas: usize, seed: u64, body: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> T + Sync,
{
    (0..n_replicas as u64)
        .into_par_iter()
        .map(|r| body(&mut replica_rng(seed, r)))
        .collect()
}

fn check_replicas(n: usize, min: usize) -> Result<()> {
    if n < min {
        Err(Error::InvalidParameter(format!(
            "need at least {min} replicas, got {n}"
        )))
    } else {
        Ok(())
    }
}

/// Estimates of `P_t f(x)` and `Var_{P_t}(f)(x)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SemigroupEstimate {
    pub mean: EstimatorResult,
    pub variance: EstimatorResult,
}

pub fn estimate_semigroup<F>(
    net: &SynapticNetwork,
    f: F,
    x: &PotentialState,
    t: f64,
    n_replicas: usize,
    seed: u64,
) -> Result<SemigroupEstimate>
where
    F: Fn(&PotentialState) -> f64 + Sync,
{
    check_horizon(t, "t")?;
    check_replicas(n_replicas, 2)?;
    let values = replicas(n_replicas, seed, |rng| {
        f(&run_until(net, x, t, rng).final_state)
    });
    Ok(SemigroupEstimate {
        mean: EstimatorResult::from_samples(&values, seed),
        variance: variance_estimate(&values, seed),
    })
}

/// Per-replica `∫₀ᵗ φ̄(X_s) ds`, i.e. the weight `F(t, φ)` at `x`.
pub fn estimate_weight_f(
    net: &SynapticNetwork,
    x: &PotentialState,
    t: f64,
    n_replicas: usize,
    seed: u64,
) -> Result<EstimatorResult> {
    check_horizon(t, "t")?;
    check_replicas(n_replicas, 2)?;
    let values = replicas(n_replicas, seed, |rng| {
        run_until(net, x, t, rng).intensity_integral
    });
    Ok(EstimatorResult::from_samples(&values, seed))
}

/// Mean number of spikes in `[0, t]`.
pub fn estimate_jump_count(
    net: &SynapticNetwork,
    x: &PotentialState,
    t: f64,
    n_replicas: usize,
    seed: u64,
) -> Result<EstimatorResult> {
    check_horizon(t, "t")?;
    check_replicas(n_replicas, 2)?;
    let values = replicas(n_replicas, seed, |rng| {
        run_until(net, x, t, rng).n_events as f64
    });
    Ok(EstimatorResult::from_samples(&values, seed))
}

/// Monte Carlo frequencies of the jump-window events on a grid of window
/// lengths. Each replica draws its first two events once and is reused for
/// every `s`.
#[derive(Debug, Clone, Serialize)]
pub struct JumpWindowEstimate {
    pub s: Vec<f64>,
    /// No spike in `[0, s]`.
    pub p_none: Vec<EstimatorResult>,
    /// Exactly one spike in `[0, s]`, fired by the chosen neuron.
    pub p_single: Vec<EstimatorResult>,
}

fn bernoulli(count: usize, n: usize, seed: u64) -> EstimatorResult {
    let nf = n as f64;
    let p = count as f64 / nf;
    let var = p * (1.0 - p) * nf / (nf - 1.0);
    EstimatorResult {
        mean: p,
        std_error: (var / nf).sqrt(),
        n_samples: n,
        seed,
    }
}

pub fn estimate_jump_window(
    net: &SynapticNetwork,
    x: &PotentialState,
    neuron: usize,
    s_grid: &[f64],
    n_replicas: usize,
    seed: u64,
) -> Result<JumpWindowEstimate> {
    net.intensity_at(x, neuron)?;
    check_replicas(n_replicas, 2)?;
    for &s in s_grid {
        check_horizon(s, "s")?;
    }
    let draws = replicas(n_replicas, seed, |rng| {
        let (t1, i) = next_event(net, x, rng);
        let (t2, _) = next_event(net, &net.jump(x, i), rng);
        (t1, i == neuron, t1 + t2)
    });
    let mut p_none = Vec::with_capacity(s_grid.len());
    let mut p_single = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let none = draws.iter().filter(|d| d.0 > s).count();
        let single = draws.iter().filter(|d| d.0 <= s && d.1 && d.2 > s).count();
        p_none.push(bernoulli(none, n_replicas, seed));
        p_single.push(bernoulli(single, n_replicas, seed));
    }
    Ok(JumpWindowEstimate {
        s: s_grid.to_vec(),
        p_none,
        p_single,
    })
}

/// Occupation integrals of `k` functions over `[burn_in, horizon]`, split into
/// [`ERGODIC_BATCHES`] equal time batches. Returns `[function][batch]`.
fn occupation_batches<G>(
    net: &SynapticNetwork,
    x0: &PotentialState,
    burn_in: f64,
    horizon: f64,
    seed: u64,
    k: usize,
    fill: G,
) -> Result<Vec<Vec<f64>>>
where
    G: Fn(&PotentialState, &mut [f64]),
{
    check_horizon(burn_in, "burn_in")?;
    check_horizon(horizon, "horizon")?;
    if horizon <= burn_in {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} must exceed burn_in {burn_in}"
        )));
    }
    let batch_len = (horizon - burn_in) / ERGODIC_BATCHES as f64;
    let batch_start = |b: usize| burn_in + b as f64 * batch_len;
    let mut integrals = vec![vec![0.0; ERGODIC_BATCHES]; k];
    let mut values = vec![0.0; k];
    let mut rng = replica_rng(seed, 0);
    let mut state = x0.clone();
    let mut time = 0.0;
    while time < horizon {
        let (holding, neuron) = next_event(net, &state, &mut rng);
        let end = (time + holding).min(horizon);
        if end > burn_in {
            fill(&state, &mut values);
            let mut lo = time.max(burn_in);
            let mut b = (((lo - burn_in) / batch_len) as usize).min(ERGODIC_BATCHES - 1);
            while lo < end {
                let hi = if b + 1 == ERGODIC_BATCHES {
                    end
                } else {
                    end.min(batch_start(b + 1))
                };
                let dt = hi - lo;
                for (acc, v) in integrals.iter_mut().zip(&values) {
                    acc[b] += v * dt;
                }
                lo = hi;
                b += 1;
                if b == ERGODIC_BATCHES {
                    break;
                }
            }
        }
        time += holding;
        state = net.jump(&state, neuron);
    }
    Ok(integrals)
}

fn batch_estimate(batch_integrals: &[f64], batch_len: f64, seed: u64) -> EstimatorResult {
    let means: Vec<f64> = batch_integrals.iter().map(|v| v / batch_len).collect();
    let mean = pairwise_sum(batch_integrals) / (batch_len * ERGODIC_BATCHES as f64);
    let var = sample_variance(&means, mean);
    EstimatorResult {
        mean,
        std_error: (var / ERGODIC_BATCHES as f64).sqrt(),
        n_samples: ERGODIC_BATCHES,
        seed,
    }
}

/// Time-weighted average of `f` after `burn_in`; batch-means standard error.
pub fn ergodic_average<F>(
    net: &SynapticNetwork,
    f: F,
    x0: &PotentialState,
    burn_in: f64,
    horizon: f64,
    seed: u64,
) -> Result<EstimatorResult>
where
    F: Fn(&PotentialState) -> f64,
{
    let integrals = occupation_batches(net, x0, burn_in, horizon, seed, 1, |x, out| out[0] = f(x))?;
    let batch_len = (horizon - burn_in) / ERGODIC_BATCHES as f64;
    Ok(batch_estimate(&integrals[0], batch_len, seed))
}

/// Occupation fractions of `{Σ x^i ≥ r}` for each `r` of an increasing grid.
pub fn empirical_tail(
    net: &SynapticNetwork,
    r_grid: &[f64],
    x0: &PotentialState,
    burn_in: f64,
    horizon: f64,
    seed: u64,
) -> Result<Vec<EstimatorResult>> {
    if r_grid.is_empty() {
        return Err(Error::InvalidParameter("r grid is empty".into()));
    }
    if r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "r grid must be strictly increasing".into(),
        ));
    }
    let integrals = occupation_batches(net, x0, burn_in, horizon, seed, r_grid.len(), |x, out| {
        let total = x.total();
        for (o, r) in out.iter_mut().zip(r_grid) {
            *o = if total >= *r { 1.0 } else { 0.0 };
        }
    })?;
    let batch_len = (horizon - burn_in) / ERGODIC_BATCHES as f64;
    Ok(integrals
        .iter()
        .map(|b| batch_estimate(b, batch_len, seed))
        .collect())
}
