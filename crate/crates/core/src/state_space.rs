//! Reachable states inside the truncation box `D = {x : x_i ≤ m_box}` and the
//! generator of the truncated chain.
//!
//! Jumps that leave the box are saturated: each coordinate is capped at the
//! largest lattice value not exceeding `m_box`. The truncated chain therefore
//! keeps a proper probability flow and has a stationary vector.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{PotentialState, SynapticNetwork};

pub const DEFAULT_MAX_STATES: usize = 2_000_000;

/// Largest numerator `k` with `k / denominator ≤ m_box`.
pub fn cap_numerator(m_box: f64, denominator: u64) -> u64 {
    (m_box * denominator as f64 + 1e-9).floor().max(0.0) as u64
}

/// Caps every coordinate at the largest lattice value `≤ m_box`.
pub fn saturate(x: &PotentialState, m_box: f64) -> PotentialState {
    let cap = cap_numerator(m_box, x.denominator);
    saturate_numerators(x, cap)
}

fn saturate_numerators(x: &PotentialState, cap: u64) -> PotentialState {
    PotentialState {
        numerators: x.numerators.iter().map(|&v| v.min(cap)).collect(),
        denominator: x.denominator,
    }
}

#[derive(Debug, Clone)]
pub struct EnumeratedSpace {
    states: Vec<PotentialState>,
    index: HashMap<PotentialState, usize>,
    m_box: f64,
    cap: u64,
    origin: PotentialState,
}

impl EnumeratedSpace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[PotentialState] {
        &self.states
    }

    pub fn state(&self, k: usize) -> &PotentialState {
        &self.states[k]
    }

    pub fn index_of(&self, x: &PotentialState) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn m_box(&self) -> f64 {
        self.m_box
    }

    pub fn cap_numerator(&self) -> u64 {
        self.cap
    }

    pub fn origin(&self) -> &PotentialState {
        &self.origin
    }

    /// Image of `Δ_i` in the truncated chain.
    pub fn truncated_jump(
        &self,
        net: &SynapticNetwork,
        x: &PotentialState,
        i: usize,
    ) -> PotentialState {
        saturate_numerators(&net.jump(x, i), self.cap)
    }

    /// True when no jump out of state `k` needs saturation.
    pub fn is_interior(&self, net: &SynapticNetwork, k: usize) -> bool {
        let x = &self.states[k];
        (0..net.n_neurons()).all(|i| net.jump(x, i).numerators.iter().all(|&v| v <= self.cap))
    }

    pub fn tabulate<F: Fn(&PotentialState) -> f64>(&self, f: F) -> Vec<f64> {
        self.states.iter().map(f).collect()
    }

    /// Indicator of the inner box `{x_i ≤ bound for all i}`.
    pub fn box_indicator(&self, bound: f64) -> Vec<bool> {
        let cap = cap_numerator(bound, self.origin.denominator);
        self.states
            .iter()
            .map(|x| x.numerators.iter().all(|&v| v <= cap))
            .collect()
    }

    /// `φ̄` tabulated on the space.
    pub fn total_intensities(&self, net: &SynapticNetwork) -> Vec<f64> {
        self.tabulate(|x| net.total_intensity(x))
    }

    /// Writes `index,x1_num,...,xN_num,denominator`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.origin.len();
        let header: Vec<String> = (1..=n).map(|i| format!("x{i}_num")).collect();
        writeln!(out, "index,{},denominator", header.join(","))?;
        for (k, x) in self.states.iter().enumerate() {
            let nums: Vec<String> = x.numerators.iter().map(u64::to_string).collect();
            writeln!(out, "{k},{},{}", nums.join(","), x.denominator)?;
        }
        Ok(())
    }
}

/// Breadth-first closure of `saturate(x0)` under the truncated jumps. States
/// discovered at the same depth are ordered lexicographically by numerators.
pub fn enumerate_states(
    net: &SynapticNetwork,
    x0: &PotentialState,
    m_box: f64,
    max_states: usize,
) -> Result<EnumeratedSpace> {
    if !(m_box > 0.0 && m_box.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "m_box must be positive, got {m_box}"
        )));
    }
    if x0.len() != net.n_neurons() || x0.denominator != net.denominator() {
        return Err(Error::InvalidParameter(
            "initial state does not belong to the network".into(),
        ));
    }
    let cap = cap_numerator(m_box, net.denominator());
    let origin = saturate_numerators(x0, cap);
    let mut states = vec![origin.clone()];
    let mut index = HashMap::from([(origin.clone(), 0usize)]);
    let mut frontier = vec![origin.clone()];
    while !frontier.is_empty() {
        let mut level = BTreeSet::new();
        for x in &frontier {
            for i in 0..net.n_neurons() {
                let y = saturate_numerators(&net.jump(x, i), cap);
                if !index.contains_key(&y) {
                    level.insert(y);
                }
            }
        }
        if states.len() + level.len() > max_states {
            return Err(Error::StateCapExceeded { cap: max_states });
        }
        frontier = level.into_iter().collect();
        for y in &frontier {
            index.insert(y.clone(), states.len());
            states.push(y.clone());
        }
    }
    Ok(EnumeratedSpace {
        states,
        index,
        m_box,
        cap,
        origin,
    })
}

/// Row-compressed rate matrix of the truncated chain. Only off-diagonal rates
/// are stored; the diagonal is minus the row sum of off-diagonal rates.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGenerator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    rates: Vec<f64>,
    diagonal: Vec<f64>,
}

impl SparseGenerator {
    /// Builds a generator from `(from, to, rate)` triplets. Duplicates are
    /// summed and self-loops ignored.
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for (from, to, rate) in triplets {
            if from >= dim || to >= dim {
                return Err(Error::InvalidParameter(format!(
                    "triplet ({from},{to}) outside dimension {dim}"
                )));
            }
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "rate {rate} must be finite and >= 0"
                )));
            }
            if from != to && rate > 0.0 {
                rows[from].push((to, rate));
            }
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut rates = Vec::new();
        let mut diagonal = Vec::with_capacity(dim);
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut exit = 0.0;
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut r = 0.0;
                while k < row.len() && row[k].0 == c {
                    r += row[k].1;
                    k += 1;
                }
                cols.push(c);
                rates.push(r);
                exit += r;
            }
            diagonal.push(-exit);
            row_ptr.push(cols.len());
        }
        Ok(Self {
            dim,
            row_ptr,
            cols,
            rates,
            diagonal,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Off-diagonal entries stored.
    pub fn nnz_off_diagonal(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[k]..self.row_ptr[k + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.rates[span].iter().copied())
    }

    pub fn diagonal(&self, k: usize) -> f64 {
        self.diagonal[k]
    }

    pub fn exit_rate(&self, k: usize) -> f64 {
        -self.diagonal[k]
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.diagonal.iter().fold(0.0, |m, d| m.max(-d))
    }

    /// `max_k |Σ_j Q(k, j)|`.
    pub fn max_abs_row_sum(&self) -> f64 {
        (0..self.dim)
            .map(|k| (self.row(k).map(|(_, r)| r).sum::<f64>() + self.diagonal[k]).abs())
            .fold(0.0, f64::max)
    }

    /// `(Qf)(k) = Σ_j Q(k, j)(f(j) − f(k))`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|k| self.row(k).map(|(j, r)| r * (f[j] - f[k])).sum())
            .collect()
    }

    /// Row vector times generator, `(vᵀQ)(j)`.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.dim).map(|k| v[k] * self.diagonal[k]).collect();
        for (k, vk) in v.iter().enumerate() {
            for (j, r) in self.row(k) {
                out[j] += vk * r;
            }
        }
        out
    }

    /// Truncated-chain carré du champ `½ Σ_j Q(k, j)(f(j) − f(k))²`.
    pub fn carre_du_champ(&self, f: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|k| {
                0.5 * self
                    .row(k)
                    .map(|(j, r)| {
                        let d = f[j] - f[k];
                        r * d * d
                    })
                    .sum::<f64>()
            })
            .collect()
    }

    /// MatrixMarket coordinate export, 1-based, diagonal included.
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "% generator of the truncated chain; rows sum to zero")?;
        let nnz = self.nnz_off_diagonal() + self.diagonal.iter().filter(|d| **d != 0.0).count();
        writeln!(out, "{} {} {}", self.dim, self.dim, nnz)?;
        for k in 0..self.dim {
            let mut entries: Vec<(usize, f64)> = self.row(k).collect();
            if self.diagonal[k] != 0.0 {
                entries.push((k, self.diagonal[k]));
                entries.sort_by_key(|&(c, _)| c);
            }
            for (c, v) in entries {
                writeln!(out, "{} {} {:e}", k + 1, c + 1, v)?;
            }
        }
        Ok(())
    }
}

/// Rate `φ(x^i)` from each state to `saturate(Δ_i x)`, merged per target.
pub fn assemble_generator(
    net: &SynapticNetwork,
    space: &EnumeratedSpace,
) -> Result<SparseGenerator> {
    let mut triplets = Vec::with_capacity(space.len() * net.n_neurons());
    for (k, x) in space.states().iter().enumerate() {
        for i in 0..net.n_neurons() {
            let y = space.truncated_jump(net, x, i);
            let j = space.index_of(&y).ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "state {y:?} missing from the space; was it enumerated with this network?"
                ))
            })?;
            triplets.push((k, j, net.rate(x, i)));
        }
    }
    SparseGenerator::from_triplets(space.len(), triplets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring2() -> SynapticNetwork {
        SynapticNetwork::from_json_str(
            r#"{"n":2,"weights":[[0,1],[1,0]],"intensity":{"delta":1.5,"slope":1.5}}"#,
        )
        .unwrap()
    }

    #[test]
    fn saturate_examples() {
        let net = ring2();
        let x = net.state_from_values(&[2.0, 0.0]).unwrap();
        assert_eq!(saturate(&x, 34.0), x);
        let far = net.state_from_values(&[40.0, 0.0]).unwrap();
        let capped = saturate(&far, 34.0);
        assert_eq!(capped.numerators, vec![34, 0]);
        assert_eq!(saturate(&capped, 34.0), capped);
        // m computed in floating point may exceed 34 by one ulp
        assert_eq!(saturate(&far, 34.0f64.next_up()).numerators, vec![34, 0]);
        assert_eq!(saturate(&far, 33.9).numerators, vec![33, 0]);
    }

    #[test]
    fn ring2_box5_has_eleven_states() {
        let net = ring2();
        let space = enumerate_states(&net, &net.zero_state(), 5.0, 100).unwrap();
        assert_eq!(space.len(), 11);
        assert_eq!(space.state(0).numerators, vec![0, 0]);
        assert_eq!(space.state(1).numerators, vec![0, 1]);
        assert_eq!(space.state(2).numerators, vec![1, 0]);
        for k in 1..=5 {
            assert!(space
                .index_of(&net.state_from_numerators(vec![k, 0]).unwrap())
                .is_some());
            assert!(space
                .index_of(&net.state_from_numerators(vec![0, k]).unwrap())
                .is_some());
        }
        assert!(matches!(
            enumerate_states(&net, &net.zero_state(), 5.0, 4),
            Err(Error::StateCapExceeded { cap: 4 })
        ));
        assert!(enumerate_states(&net, &net.zero_state(), 0.0, 4).is_err());
    }

    #[test]
    fn degenerate_spaces() {
        let zero = SynapticNetwork::from_json_str(
            r#"{"n":2,"weights":[[0,0],[0,0]],"intensity":{"delta":1,"slope":1}}"#,
        )
        .unwrap();
        assert_eq!(
            enumerate_states(&zero, &zero.zero_state(), 3.0, 10)
                .unwrap()
                .len(),
            1
        );

        let single = SynapticNetwork::from_json_str(
            r#"{"n":1,"weights":[[0]],"intensity":{"delta":1,"slope":1}}"#,
        )
        .unwrap();
        let x0 = single.state_from_values(&[2.0]).unwrap();
        assert_eq!(enumerate_states(&single, &x0, 10.0, 10).unwrap().len(), 2);
        assert_eq!(
            enumerate_states(&single, &single.zero_state(), 10.0, 10)
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn generator_rows_for_ring2() {
        let net = ring2();
        let space = enumerate_states(&net, &net.zero_state(), 5.0, 100).unwrap();
        let gen = assemble_generator(&net, &space).unwrap();
        assert!(gen.max_abs_row_sum() <= 1e-12);
        let row0: Vec<(usize, f64)> = gen.row(0).collect();
        assert_eq!(row0, vec![(1, 1.5), (2, 1.5)]);
        for k in 0..gen.dim() {
            assert!(gen.row(k).count() <= 2);
            assert!(gen.row(k).all(|(_, r)| r > 0.0));
        }
        // (0,5): neuron 1 would push to (0,6), saturated back onto itself
        let edge = space
            .index_of(&net.state_from_numerators(vec![0, 5]).unwrap())
            .unwrap();
        assert_eq!(gen.row(edge).count(), 1);
        assert!(!space.is_interior(&net, edge));
        assert!(space.is_interior(&net, 0));
    }

    #[test]
    fn triplets_merge_and_validate() {
        let gen =
            SparseGenerator::from_triplets(3, [(0, 1, 1.0), (0, 1, 2.0), (0, 0, 5.0), (2, 0, 0.5)])
                .unwrap();
        assert_eq!(gen.row(0).collect::<Vec<_>>(), vec![(1, 3.0)]);
        assert_eq!(gen.diagonal(0), -3.0);
        assert_eq!(gen.diagonal(1), 0.0);
        assert!(SparseGenerator::from_triplets(2, [(0, 2, 1.0)]).is_err());
        assert!(SparseGenerator::from_triplets(2, [(0, 1, -1.0)]).is_err());
    }

    #[test]
    fn matrix_market_export() {
        let gen = SparseGenerator::from_triplets(2, [(0, 1, 2.0), (1, 0, 3.0)]).unwrap();
        let mut buf = Vec::new();
        gen.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "%%MatrixMarket matrix coordinate real general");
        assert_eq!(lines[2], "2 2 4");
        assert_eq!(&lines[3..], ["1 1 -2e0", "1 2 2e0", "2 1 3e0", "2 2 -3e0"]);
    }

    #[test]
    fn state_csv_export() {
        let net = ring2();
        let space = enumerate_states(&net, &net.zero_state(), 1.0, 100).unwrap();
        let mut buf = Vec::new();
        space.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "index,x1_num,x2_num,denominator\n0,0,0,1\n1,0,1,1\n2,1,0,1\n"
        );
    }
}
