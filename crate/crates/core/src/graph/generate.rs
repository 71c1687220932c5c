//! Synthetic spiking CNN generator.
//!
//! Layers are listed in order; element 0 must be the `input` layer. Each
//! later layer consumes the previous one unless `from` names earlier layer
//! indices. `add` and `concat` give residual and dense topologies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    weight_range, GraphError, Neuron, NeuronKind, SdcnnGraph, Synapse, DEFAULT_THRESHOLD,
    DEFAULT_WEIGHT_BITS,
};

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum LayerSpec {
    Input {
        channels: usize,
        height: usize,
        width: usize,
    },
    Conv {
        #[serde(default = "one")]
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        from: Option<usize>,
    },
    Pool {
        kernel: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stride: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        from: Option<usize>,
    },
    Dense {
        units: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        from: Option<usize>,
    },
    Concat {
        from: Vec<usize>,
    },
    Add {
        from: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateOptions {
    pub name: String,
    pub weight_bits: u8,
    pub threshold: u32,
    /// Probability that a generated weight is excitatory.
    pub excitatory: f64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            name: "generated".into(),
            weight_bits: DEFAULT_WEIGHT_BITS,
            threshold: DEFAULT_THRESHOLD,
            excitatory: 0.7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Shape {
    c: usize,
    h: usize,
    w: usize,
}

impl Shape {
    fn size(&self) -> usize {
        self.c * self.h * self.w
    }
}

struct Layer {
    shape: Shape,
    first_id: u32,
}

impl Layer {
    fn id(&self, c: usize, y: usize, x: usize) -> u32 {
        self.first_id + (c * self.shape.h * self.shape.w + y * self.shape.w + x) as u32
    }
}

fn mismatch(layer: usize, what: impl Into<String>) -> GraphError {
    GraphError::Generator(format!("layer {layer}: dimension mismatch: {}", what.into()))
}

pub fn generate_network(
    spec: &[LayerSpec],
    prune_fraction: f64,
    seed: u64,
) -> Result<SdcnnGraph, GraphError> {
    generate_network_with(spec, prune_fraction, seed, &GenerateOptions::default())
}

/// Builds the graph, draws a real-valued latent weight per synapse, drops the
/// `prune_fraction` of synapses with the smallest latent magnitude (ties by
/// synapse id), and quantizes survivors to `weight_bits` signed integers.
pub fn generate_network_with(
    spec: &[LayerSpec],
    prune_fraction: f64,
    seed: u64,
    opts: &GenerateOptions,
) -> Result<SdcnnGraph, GraphError> {
    if spec.is_empty() {
        return Err(GraphError::Generator("empty layer spec".into()));
    }
    if !(0.0..1.0).contains(&prune_fraction) {
        return Err(GraphError::Generator(format!(
            "prune_fraction must be in [0, 1), got {prune_fraction}"
        )));
    }
    let mut layers: Vec<Layer> = Vec::with_capacity(spec.len());
    // (src, dst) pairs in creation order; position is the synapse id.
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut next_id = 0u32;

    for (li, layer) in spec.iter().enumerate() {
        let source = |from: &Option<usize>| -> Result<usize, GraphError> {
            let s = from.unwrap_or(li.wrapping_sub(1));
            if li == 0 || s >= li {
                return Err(GraphError::Generator(format!(
                    "layer {li}: source layer {s} must precede it"
                )));
            }
            Ok(s)
        };
        let shape = match layer {
            LayerSpec::Input {
                channels,
                height,
                width,
            } => {
                if li != 0 {
                    return Err(GraphError::Generator(format!(
                        "layer {li}: input layer must come first"
                    )));
                }
                Shape {
                    c: *channels,
                    h: *height,
                    w: *width,
                }
            }
            _ if li == 0 => {
                return Err(GraphError::Generator(
                    "first layer must be an input layer".into(),
                ))
            }
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
                padding,
                from,
            } => {
                let s = source(from)?;
                let inp = layers[s].shape;
                if *kernel == 0 || *stride == 0 {
                    return Err(mismatch(li, "kernel and stride must be positive"));
                }
                if inp.h + 2 * padding < *kernel || inp.w + 2 * padding < *kernel {
                    return Err(mismatch(
                        li,
                        format!("{k}x{k} kernel exceeds {}x{} input", inp.h, inp.w, k = kernel),
                    ));
                }
                Shape {
                    c: *out_channels,
                    h: (inp.h + 2 * padding - kernel) / stride + 1,
                    w: (inp.w + 2 * padding - kernel) / stride + 1,
                }
            }
            LayerSpec::Pool { kernel, stride, from } => {
                let s = source(from)?;
                let inp = layers[s].shape;
                let stride = stride.unwrap_or(*kernel);
                if *kernel == 0 || stride == 0 {
                    return Err(mismatch(li, "kernel and stride must be positive"));
                }
                if inp.h < *kernel || inp.w < *kernel {
                    return Err(mismatch(
                        li,
                        format!("{k}x{k} pool exceeds {}x{} input", inp.h, inp.w, k = kernel),
                    ));
                }
                Shape {
                    c: inp.c,
                    h: (inp.h - kernel) / stride + 1,
                    w: (inp.w - kernel) / stride + 1,
                }
            }
            LayerSpec::Dense { units, from } => {
                source(from)?;
                Shape {
                    c: *units,
                    h: 1,
                    w: 1,
                }
            }
            LayerSpec::Concat { from } | LayerSpec::Add { from } => {
                if from.len() < 2 {
                    return Err(mismatch(li, "needs at least two source layers"));
                }
                for &s in from {
                    source(&Some(s))?;
                }
                let first = layers[from[0]].shape;
                let is_add = matches!(layer, LayerSpec::Add { .. });
                let mut c = 0;
                for &s in from {
                    let sh = layers[s].shape;
                    if is_add && sh != first {
                        return Err(mismatch(li, format!("add of {first:?} and {sh:?}")));
                    }
                    if !is_add && (sh.h, sh.w) != (first.h, first.w) {
                        return Err(mismatch(li, format!("concat of {first:?} and {sh:?}")));
                    }
                    c += sh.c;
                }
                Shape {
                    c: if is_add { first.c } else { c },
                    h: first.h,
                    w: first.w,
                }
            }
        };
        if shape.size() == 0 {
            return Err(mismatch(li, "empty feature map"));
        }
        let out = Layer {
            shape,
            first_id: next_id,
        };
        next_id += shape.size() as u32;

        match layer {
            LayerSpec::Input { .. } => {}
            LayerSpec::Conv {
                kernel,
                stride,
                padding,
                from,
                ..
            } => {
                let inp = &layers[source(from)?];
                let (k, st, p) = (*kernel as isize, *stride as isize, *padding as isize);
                for oc in 0..shape.c {
                    for oy in 0..shape.h {
                        for ox in 0..shape.w {
                            let dst = out.id(oc, oy, ox);
                            for ic in 0..inp.shape.c {
                                for ky in 0..k {
                                    for kx in 0..k {
                                        let iy = oy as isize * st + ky - p;
                                        let ix = ox as isize * st + kx - p;
                                        if iy < 0
                                            || ix < 0
                                            || iy >= inp.shape.h as isize
                                            || ix >= inp.shape.w as isize
                                        {
                                            continue;
                                        }
                                        edges.push((inp.id(ic, iy as usize, ix as usize), dst));
                                    }
                                }
                            }
                        }
                    }
                }
            }
            LayerSpec::Pool { kernel, stride, from } => {
                let inp = &layers[source(from)?];
                let stride = stride.unwrap_or(*kernel);
                for c in 0..shape.c {
                    for oy in 0..shape.h {
                        for ox in 0..shape.w {
                            let dst = out.id(c, oy, ox);
                            for ky in 0..*kernel {
                                for kx in 0..*kernel {
                                    edges.push((inp.id(c, oy * stride + ky, ox * stride + kx), dst));
                                }
                            }
                        }
                    }
                }
            }
            LayerSpec::Dense { from, .. } => {
                let inp = &layers[source(from)?];
                for u in 0..shape.c {
                    let dst = out.first_id + u as u32;
                    for k in 0..inp.shape.size() {
                        edges.push((inp.first_id + k as u32, dst));
                    }
                }
            }
            LayerSpec::Add { from } => {
                for &s in from {
                    let inp = &layers[s];
                    for k in 0..shape.size() {
                        edges.push((inp.first_id + k as u32, out.first_id + k as u32));
                    }
                }
            }
            LayerSpec::Concat { from } => {
                let mut base = 0usize;
                for &s in from {
                    let inp = &layers[s];
                    let plane = inp.shape.h * inp.shape.w;
                    for k in 0..inp.shape.size() {
                        let dst = out.first_id + (base * plane + k) as u32;
                        edges.push((inp.first_id + k as u32, dst));
                    }
                    base += inp.shape.c;
                }
            }
        }
        layers.push(out);
    }

    // Consumers referring to the same source can duplicate a (src, dst) pair
    // only through `add`/`concat` listing a layer twice; keep the first.
    let mut seen = std::collections::HashSet::with_capacity(edges.len());
    edges.retain(|e| seen.insert(*e));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let latent: Vec<f64> = edges
        .iter()
        .map(|_| {
            let mag: f64 = rng.gen_range(1e-6..1.0);
            if rng.gen_bool(opts.excitatory) {
                mag
            } else {
                -mag
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by(|&a, &b| {
        latent[a]
            .abs()
            .total_cmp(&latent[b].abs())
            .then(a.cmp(&b))
    });
    let n_pruned = (prune_fraction * edges.len() as f64).floor() as usize;
    let mut keep = vec![true; edges.len()];
    for &k in &order[..n_pruned] {
        keep[k] = false;
    }

    let (lo, hi) = weight_range(opts.weight_bits);
    let synapses: Vec<Synapse> = edges
        .iter()
        .zip(&latent)
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|((&(src, dst), &w), _)| Synapse::new(src, dst, quantize(w, lo, hi)))
        .collect();

    let last = layers.len() - 1;
    let mut neurons = Vec::with_capacity(next_id as usize);
    for (li, layer) in layers.iter().enumerate() {
        let kind = if li == 0 {
            NeuronKind::Input
        } else if li == last {
            NeuronKind::Output
        } else {
            NeuronKind::Hidden
        };
        for k in 0..layer.shape.size() {
            neurons.push(Neuron::new(layer.first_id + k as u32, kind, opts.threshold));
        }
    }
    SdcnnGraph::new(opts.name.clone(), opts.weight_bits, neurons, synapses)
}

/// Maps a latent weight in (-1, 1) onto the nonzero signed integer range.
fn quantize(w: f64, lo: i32, hi: i32) -> i32 {
    if w >= 0.0 {
        ((w * hi as f64).round() as i32).clamp(1, hi)
    } else {
        ((w * -(lo as f64)).round() as i32).clamp(lo, -1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::neighbor_stats;
    use std::collections::HashSet;

    fn conv4x4() -> Vec<LayerSpec> {
        vec![
            LayerSpec::Input {
                channels: 1,
                height: 4,
                width: 4,
            },
            LayerSpec::Conv {
                out_channels: 1,
                kernel: 3,
                stride: 1,
                padding: 0,
                from: None,
            },
        ]
    }

    #[test]
    fn single_conv_layer_fan_in() {
        let g = generate_network(&conv4x4(), 0.0, 1).unwrap();
        assert_eq!(g.len(), 20);
        assert_eq!(g.inputs().len(), 16);
        let outs = g.sinks();
        assert_eq!(outs.len(), 4);
        for o in outs {
            assert_eq!(g.in_degree(g.index_of(o).unwrap()), 9);
        }
        assert_eq!(neighbor_stats(&g).l1.max, 9);
    }

    #[test]
    fn pruning_half_is_a_subset_of_exact_size() {
        let spec = conv4x4();
        let full = generate_network(&spec, 0.0, 9).unwrap();
        let half = generate_network(&spec, 0.5, 9).unwrap();
        assert_eq!(full.synapses().len(), 36);
        assert_eq!(half.synapses().len(), 18);
        let f: HashSet<_> = full.synapses().iter().map(|s| (s.src, s.dst)).collect();
        assert!(half.synapses().iter().all(|s| f.contains(&(s.src, s.dst))));
    }

    #[test]
    fn empty_spec_is_an_error() {
        assert!(generate_network(&[], 0.0, 0).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let spec = vec![
            LayerSpec::Input {
                channels: 1,
                height: 2,
                width: 2,
            },
            LayerSpec::Conv {
                out_channels: 1,
                kernel: 3,
                stride: 1,
                padding: 0,
                from: None,
            },
        ];
        let err = generate_network(&spec, 0.0, 0).unwrap_err();
        assert!(err.to_string().contains("dimension mismatch"), "{err}");

        let add = vec![
            LayerSpec::Input {
                channels: 1,
                height: 4,
                width: 4,
            },
            LayerSpec::Pool {
                kernel: 2,
                stride: None,
                from: None,
            },
            LayerSpec::Add { from: vec![0, 1] },
        ];
        assert!(generate_network(&add, 0.0, 0).is_err());
    }

    #[test]
    fn residual_and_dense_topologies_count_every_feature_map() {
        let spec = vec![
            LayerSpec::Input {
                channels: 1,
                height: 6,
                width: 6,
            },
            LayerSpec::Conv {
                out_channels: 2,
                kernel: 3,
                stride: 1,
                padding: 1,
                from: None,
            },
            LayerSpec::Conv {
                out_channels: 2,
                kernel: 3,
                stride: 1,
                padding: 1,
                from: None,
            },
            LayerSpec::Add { from: vec![1, 2] },
            LayerSpec::Concat { from: vec![1, 3] },
            LayerSpec::Pool {
                kernel: 2,
                stride: None,
                from: None,
            },
            LayerSpec::Dense {
                units: 3,
                from: None,
            },
        ];
        let g = generate_network(&spec, 0.2, 3).unwrap();
        assert_eq!(g.len(), 36 + 72 + 72 + 72 + 144 + 36 + 3);
        assert!(g.sinks().len() >= 3);
    }

    #[test]
    fn spec_parses_from_json() {
        let text = r#"[{"type":"input","channels":1,"height":4,"width":4},
                       {"type":"conv","kernel":3},
                       {"type":"dense","units":2}]"#;
        let spec: Vec<LayerSpec> = serde_json::from_str(text).unwrap();
        let g = generate_network(&spec, 0.0, 0).unwrap();
        assert_eq!(g.len(), 22);
    }
}
