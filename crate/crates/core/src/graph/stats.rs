use serde::{Deserialize, Serialize};

use super::{NeuronId, SdcnnGraph};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: usize,
    pub max: usize,
    pub avg: f64,
}

impl Summary {
    fn of(values: impl Iterator<Item = usize>) -> Summary {
        let (mut min, mut max, mut sum, mut n) = (usize::MAX, 0usize, 0usize, 0usize);
        for v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
            n += 1;
        }
        if n == 0 {
            return Summary {
                min: 0,
                max: 0,
                avg: 0.0,
            };
        }
        Summary {
            min,
            max,
            avg: sum as f64 / n as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeuronNeighbors {
    pub id: NeuronId,
    pub l1: usize,
    pub l2: usize,
}

/// L1 = distinct pre-synaptic neurons; L2 = distinct pre-synaptic neurons of
/// those.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborStats {
    pub per_neuron: Vec<NeuronNeighbors>,
    pub l1: Summary,
    pub l2: Summary,
}

pub fn neighbor_stats(g: &SdcnnGraph) -> NeighborStats {
    let n = g.len();
    // Stamp array instead of a fresh set per neuron.
    let mut mark = vec![usize::MAX; n];
    let mut per_neuron = Vec::with_capacity(n);
    for i in 0..n {
        let l1 = g.in_degree(i);
        let mut l2 = 0;
        for p in g.predecessors(i) {
            for pp in g.predecessors(p) {
                if mark[pp] != i {
                    mark[pp] = i;
                    l2 += 1;
                }
            }
        }
        per_neuron.push(NeuronNeighbors {
            id: g.neurons()[i].id,
            l1,
            l2,
        });
    }
    NeighborStats {
        l1: Summary::of(per_neuron.iter().map(|x| x.l1)),
        l2: Summary::of(per_neuron.iter().map(|x| x.l2)),
        per_neuron,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Neuron, NeuronKind, Synapse};

    fn graph(n: u32, edges: &[(u32, u32)]) -> SdcnnGraph {
        let mut has_in = vec![false; n as usize];
        for &(_, d) in edges {
            has_in[d as usize] = true;
        }
        let neurons = (0..n)
            .map(|i| {
                let kind = if has_in[i as usize] {
                    NeuronKind::Hidden
                } else {
                    NeuronKind::Input
                };
                Neuron::new(i, kind, 1)
            })
            .collect();
        let syn = edges.iter().map(|&(s, d)| Synapse::new(s, d, 1)).collect();
        SdcnnGraph::new("t", 2, neurons, syn).unwrap()
    }

    fn of(stats: &NeighborStats, id: u32) -> NeuronNeighbors {
        *stats.per_neuron.iter().find(|x| x.id.0 == id).unwrap()
    }

    #[test]
    fn chain() {
        let s = neighbor_stats(&graph(3, &[(0, 1), (1, 2)]));
        assert_eq!((of(&s, 2).l1, of(&s, 2).l2), (1, 1));
        assert_eq!(s.l1.max, 1);
        assert_eq!(s.l1.min, 0);
    }

    #[test]
    fn diamond_counts_shared_grandparent_once() {
        let s = neighbor_stats(&graph(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]));
        assert_eq!((of(&s, 3).l1, of(&s, 3).l2), (2, 1));
        assert!(s.l1.max as f64 >= s.l1.avg && s.l1.avg >= s.l1.min as f64);
    }
}
