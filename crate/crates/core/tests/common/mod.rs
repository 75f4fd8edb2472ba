#![allow(dead_code)]

use num_rational::Ratio;
use pjmp::spectral::{stationary, StationaryDistribution};
use pjmp::{
    assemble_generator, enumerate_states, EnumeratedSpace, IntensityFunction, SparseGenerator,
    SynapticNetwork,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const RING2: &str = r#"{"n":2,"weights":[[0,1],[1,0]],"intensity":{"delta":1.5,"slope":1.5}}"#;

pub fn ring2() -> SynapticNetwork {
    SynapticNetwork::from_json_str(RING2).unwrap()
}

pub fn zero_weights(n: usize) -> SynapticNetwork {
    let w = vec![vec![Ratio::from_integer(0); n]; n];
    SynapticNetwork::new(w, IntensityFunction::new(1.0, 1.0).unwrap()).unwrap()
}

/// Three neurons, weights in {0, 1/2, 1, 3/2}, intensity parameters in [0.5, 2].
pub fn random_model(seed: u64) -> SynapticNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = vec![vec![Ratio::from_integer(0); 3]; 3];
    for (i, row) in w.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = Ratio::new(rng.random_range(0..4i64), 2);
            }
        }
    }
    let delta = rng.random_range(0.5..2.0);
    let slope = rng.random_range(0.5..2.0);
    SynapticNetwork::new(w, IntensityFunction::new(delta, slope).unwrap()).unwrap()
}

pub struct Chain {
    pub space: EnumeratedSpace,
    pub gen: SparseGenerator,
    pub mu: StationaryDistribution,
}

pub fn chain(net: &SynapticNetwork, m_box: f64) -> Chain {
    let space = enumerate_states(net, &net.zero_state(), m_box, 1_000_000).unwrap();
    let gen = assemble_generator(net, &space).unwrap();
    let mu = stationary(&gen).unwrap();
    Chain { space, gen, mu }
}

pub fn random_table(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}
