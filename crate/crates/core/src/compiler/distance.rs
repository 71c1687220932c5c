use std::collections::HashMap;

use crate::graph::{NeuronId, SdcnnGraph};

use super::CompileError;

/// Distance assigned to neurons with no path to the sink.
pub const LARGE: u32 = u32::MAX;

/// Neurons not yet placed into a sub-network.
#[derive(Clone, Debug)]
pub struct Residual {
    live: Vec<bool>,
    count: usize,
}

impl Residual {
    pub fn full(g: &SdcnnGraph) -> Self {
        Residual {
            live: vec![true; g.len()],
            count: g.len(),
        }
    }

    pub fn from_ids(g: &SdcnnGraph, ids: impl IntoIterator<Item = NeuronId>) -> Self {
        let mut live = vec![false; g.len()];
        let mut count = 0;
        for id in ids {
            if let Some(i) = g.index_of(id) {
                if !live[i] {
                    live[i] = true;
                    count += 1;
                }
            }
        }
        Residual { live, count }
    }

    pub fn is_live(&self, i: usize) -> bool {
        self.live[i]
    }

    pub fn remove(&mut self, i: usize) {
        if std::mem::replace(&mut self.live[i], false) {
            self.count -= 1;
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Live neuron with no live successor.
    pub fn is_sink(&self, g: &SdcnnGraph, i: usize) -> bool {
        self.live[i] && g.successors(i).all(|s| !self.live[s])
    }

    pub fn sinks(&self, g: &SdcnnGraph) -> Vec<usize> {
        let mut v: Vec<usize> = (0..g.len()).filter(|&i| self.is_sink(g, i)).collect();
        v.sort_by_key(|&i| g.neurons()[i].id);
        v
    }
}

/// Longest-path distances (in synapses) from live neurons to one sink.
#[derive(Clone, Debug)]
pub struct Distances {
    sink: NeuronId,
    finite: HashMap<NeuronId, u32>,
}

impl Distances {
    pub fn sink(&self) -> NeuronId {
        self.sink
    }

    /// `LARGE` when the neuron cannot reach the sink through live neurons.
    pub fn get(&self, id: NeuronId) -> u32 {
        self.finite.get(&id).copied().unwrap_or(LARGE)
    }

    pub fn finite(&self) -> impl Iterator<Item = (NeuronId, u32)> + '_ {
        self.finite.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.finite.len()
    }

    pub fn is_empty(&self) -> bool {
        self.finite.is_empty()
    }
}

/// Dynamic program over the sink's live ancestor cone in reverse
/// topological order.
pub fn longest_path_distances(
    g: &SdcnnGraph,
    sink: NeuronId,
    live: &Residual,
) -> Result<Distances, CompileError> {
    let s = g
        .index_of(sink)
        .filter(|&i| live.is_live(i))
        .ok_or(CompileError::SinkNotLive(sink))?;

    let mut in_cone = HashMap::new();
    in_cone.insert(s, ());
    let mut stack = vec![s];
    while let Some(v) = stack.pop() {
        for p in g.predecessors(v) {
            if live.is_live(p) && in_cone.insert(p, ()).is_none() {
                stack.push(p);
            }
        }
    }

    let mut pos = vec![0usize; g.len()];
    for (k, &i) in g.topological_order().iter().enumerate() {
        pos[i] = k;
    }
    let mut cone: Vec<usize> = in_cone.into_keys().collect();
    cone.sort_by_key(|&i| std::cmp::Reverse(pos[i]));

    let mut dist: HashMap<usize, u32> = HashMap::with_capacity(cone.len());
    for v in cone {
        if v == s {
            dist.insert(v, 0);
            continue;
        }
        let d = g
            .successors(v)
            .filter_map(|w| dist.get(&w))
            .max()
            .map(|d| d + 1)
            .expect("cone member reaches the sink through a processed successor");
        dist.insert(v, d);
    }
    Ok(Distances {
        sink,
        finite: dist
            .into_iter()
            .map(|(i, d)| (g.neurons()[i].id, d))
            .collect(),
    })
}

/// Orders reachable neurons by (distance, id). Neurons at distance `LARGE`
/// are not indexed.
pub fn index_neurons(distances: &Distances) -> Vec<NeuronId> {
    let mut v: Vec<(u32, NeuronId)> = distances.finite().map(|(id, d)| (d, id)).collect();
    v.sort();
    v.into_iter().map(|(_, id)| id).collect()
}
