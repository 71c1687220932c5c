use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{NeuronId, NeuronKind, SdcnnGraph};

use super::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InputSpike {
    pub neuron: NeuronId,
    pub time_ps: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Image {
    pub spikes: Vec<InputSpike>,
}

/// Input spike trains for a batch of images.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stimulus {
    pub images: Vec<Image>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StimulusOptions {
    pub images: usize,
    /// Time steps per image.
    pub steps: u64,
    pub step_ps: u64,
    /// Chance that an input spikes at a given step.
    pub rate: f64,
}

impl Default for StimulusOptions {
    fn default() -> Self {
        StimulusOptions {
            images: 4,
            steps: 8,
            step_ps: 10_000,
            rate: 0.3,
        }
    }
}

impl Stimulus {
    pub fn empty(images: usize) -> Self {
        Stimulus {
            images: vec![Image::default(); images],
        }
    }

    /// `copies` identical copies of `image`.
    pub fn repeat(image: &Image, copies: usize) -> Self {
        Stimulus {
            images: vec![image.clone(); copies],
        }
    }

    /// Bernoulli spike trains on every input neuron.
    pub fn random(g: &SdcnnGraph, opts: &StimulusOptions, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = g.inputs();
        let images = (0..opts.images)
            .map(|_| {
                let mut spikes = Vec::new();
                for step in 0..opts.steps {
                    for &n in &inputs {
                        if rng.gen_bool(opts.rate) {
                            spikes.push(InputSpike {
                                neuron: n,
                                time_ps: step * opts.step_ps,
                            });
                        }
                    }
                }
                Image { spikes }
            })
            .collect();
        Stimulus { images }
    }

    pub fn validate(&self, g: &SdcnnGraph) -> Result<(), SimError> {
        for s in self.images.iter().flat_map(|i| &i.spikes) {
            match g.neuron(s.neuron) {
                Some(n) if n.kind == NeuronKind::Input => {}
                _ => return Err(SimError::UnknownInput(s.neuron)),
            }
        }
        Ok(())
    }

    pub fn spike_count(&self) -> usize {
        self.images.iter().map(|i| i.spikes.len()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stimulus serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
