//! Random layered DAGs for property tests and sweeps.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{weight_range, Neuron, NeuronKind, SdcnnGraph, Synapse, DEFAULT_WEIGHT_BITS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// Each layer reads only the previous one.
    Chain,
    /// Adds skip synapses from two layers back.
    Residual,
    /// Any earlier layer may feed any later one.
    Dense,
}

impl Topology {
    pub const ALL: [Topology; 3] = [Topology::Chain, Topology::Residual, Topology::Dense];
}

impl std::str::FromStr for Topology {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "chain" => Ok(Topology::Chain),
            "residual" => Ok(Topology::Residual),
            "dense" => Ok(Topology::Dense),
            other => Err(format!("unknown topology {other:?} (expected chain, residual or dense)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomDagOptions {
    pub topology: Topology,
    pub layers: usize,
    pub max_width: usize,
    pub fan_in: usize,
    /// Fraction of synapses removed after generation.
    pub prune: f64,
    pub max_threshold: u32,
}

impl Default for RandomDagOptions {
    fn default() -> Self {
        RandomDagOptions {
            topology: Topology::Chain,
            layers: 6,
            max_width: 6,
            fan_in: 3,
            prune: 0.0,
            max_threshold: 3,
        }
    }
}

/// Layered random graph: layer 0 holds inputs, the last layer outputs.
pub fn random_dag(opts: &RandomDagOptions, seed: u64) -> SdcnnGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = weight_range(DEFAULT_WEIGHT_BITS);
    let layers = opts.layers.max(2);
    let mut ids: Vec<Vec<u32>> = Vec::with_capacity(layers);
    let mut neurons = Vec::new();
    let mut next = 0u32;
    for l in 0..layers {
        let w = rng.gen_range(1..=opts.max_width.max(1));
        let kind = if l == 0 {
            NeuronKind::Input
        } else if l == layers - 1 {
            NeuronKind::Output
        } else {
            NeuronKind::Hidden
        };
        let mut layer = Vec::with_capacity(w);
        for _ in 0..w {
            neurons.push(Neuron::new(next, kind, rng.gen_range(1..=opts.max_threshold.max(1))));
            layer.push(next);
            next += 1;
        }
        ids.push(layer);
    }
    let mut synapses = Vec::new();
    for l in 1..layers {
        let mut pool: Vec<u32> = ids[l - 1].clone();
        match opts.topology {
            Topology::Chain => {}
            Topology::Residual if l >= 2 => pool.extend(&ids[l - 2]),
            Topology::Residual => {}
            Topology::Dense => pool.extend(ids[..l - 1].iter().flatten()),
        }
        for &dst in &ids[l] {
            // Always keep one synapse from the previous layer so every layer
            // stays reachable.
            let prev = *ids[l - 1].choose(&mut rng).expect("non-empty layer");
            let mut srcs = vec![prev];
            for &s in pool.choose_multiple(&mut rng, opts.fan_in.min(pool.len())) {
                if !srcs.contains(&s) {
                    srcs.push(s);
                }
            }
            for src in srcs {
                let mut w = rng.gen_range(lo..=hi);
                if w == 0 {
                    w = hi;
                }
                synapses.push(Synapse::new(src, dst, w));
            }
        }
    }
    let drop = (opts.prune * synapses.len() as f64).floor() as usize;
    for _ in 0..drop {
        let k = rng.gen_range(0..synapses.len());
        synapses.swap_remove(k);
    }
    synapses.sort_by_key(|s| (s.src, s.dst));
    SdcnnGraph::new(
        format!("random-{:?}-{seed}", opts.topology).to_lowercase(),
        DEFAULT_WEIGHT_BITS,
        neurons,
        synapses,
    )
    .expect("layered construction is a valid DAG")
}
