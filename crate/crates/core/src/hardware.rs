//! Core geometries, the linear area/power cost model and the hardware
//! configuration file.
//!
//! A three-layer core with layer sizes `l2 x l1 x l0` provisions
//! `f * (l2*l1 + l1*l0 + l2*l0)` synapses, where `f` is the synapse
//! multiplicity. The default `f` maps the 256x64x16 baseline onto its 38K
//! synapses. Static power and area are linear in provisioned synapses and
//! neurons; the default coefficients put the baseline at 40.3 uW.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Provisioned synapses of the 336-neuron baseline core.
pub const BASELINE_SYNAPSES: u64 = 38_000;
pub const BASELINE_STATIC_POWER_UW: f64 = 40.3;
pub const BASELINE_SPIKE_ENERGY_PJ: f64 = 26.0;
pub const BASELINE_LAYERS: (u64, u64, u64) = (256, 64, 16);

pub const DYNAPS_NEURONS: u64 = 256;
pub const DYNAPS_SYNAPSES: u64 = 16 * 1024;
pub const LOIHI_NEURONS: u64 = 130_000;
pub const LOIHI_SYNAPSES: u64 = 130_000_000;

#[derive(Debug, Error)]
pub enum HardwareError {
    #[error("cannot read hardware config: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed hardware config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cost model is not calibrated: {0}")]
    Calibration(String),
    #[error("core config {name}: {reason}")]
    InvalidConfig { name: String, reason: String },
    #[error("palette is empty")]
    EmptyPalette,
    #[error("no palette config fits a sub-network with layers {l2}x{l1}x{l0} and {synapses} synapses")]
    NoFit {
        l2: u64,
        l1: u64,
        l0: u64,
        synapses: u64,
    },
    #[error("unsupported palette size {0} (expected 1, 2, 4 or 8)")]
    PaletteSize(usize),
    #[error("duplicate core id {0}")]
    DuplicateCore(usize),
    #[error("core {core} uses config {config} which is not in the palette")]
    NotInPalette { core: usize, config: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryModel {
    Integrated,
    Offchip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Mubrain,
    Dynaps,
    Loihi,
}

impl Backend {
    /// Largest distance from the sub-network sink admitted into one core.
    pub fn max_distance(self) -> u32 {
        match self {
            Backend::Mubrain => 2,
            Backend::Dynaps | Backend::Loihi => 1,
        }
    }

    pub fn layer_count(self) -> usize {
        self.max_distance() as usize + 1
    }
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mubrain" => Ok(Backend::Mubrain),
            "dynaps" => Ok(Backend::Dynaps),
            "loihi" => Ok(Backend::Loihi),
            other => Err(format!("unknown backend {other:?}")),
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Mubrain => "mubrain",
            Backend::Dynaps => "dynaps",
            Backend::Loihi => "loihi",
        })
    }
}

/// Layer occupancy and synapse demand of a sub-network.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Footprint {
    pub l2: u64,
    pub l1: u64,
    pub l0: u64,
    pub synapses: u64,
}

impl Footprint {
    pub fn neurons(&self) -> u64 {
        self.l2 + self.l1 + self.l0
    }

    pub fn is_empty(&self) -> bool {
        self.neurons() == 0
    }
}

impl std::ops::Add for Footprint {
    type Output = Footprint;

    fn add(self, o: Footprint) -> Footprint {
        Footprint {
            l2: self.l2 + o.l2,
            l1: self.l1 + o.l1,
            l0: self.l0 + o.l0,
            synapses: self.synapses + o.synapses,
        }
    }
}

/// A core geometry. `l2_capacity == 0` marks a two-layer crossbar core.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoreConfig {
    pub name: String,
    pub l2_capacity: u64,
    pub l1_capacity: u64,
    pub l0_capacity: u64,
    /// Total neurons the core provisions; may be below the layer sum for
    /// crossbars whose two layers share one neuron array.
    pub neuron_capacity: u64,
    pub synapse_capacity: u64,
    pub memory_model: MemoryModel,
}

/// Fully programmable inter-layer connectivity of a three-layer core.
pub fn raw_synapse_slots(l2: u64, l1: u64, l0: u64) -> u64 {
    l2 * l1 + l1 * l0 + l2 * l0
}

/// Multiplicity that maps the baseline geometry onto its 38K synapses.
pub fn default_multiplicity() -> f64 {
    let (l2, l1, l0) = BASELINE_LAYERS;
    BASELINE_SYNAPSES as f64 / raw_synapse_slots(l2, l1, l0) as f64
}

impl CoreConfig {
    pub fn three_layer(name: impl Into<String>, l2: u64, l1: u64, l0: u64, multiplicity: f64) -> Self {
        CoreConfig {
            name: name.into(),
            l2_capacity: l2,
            l1_capacity: l1,
            l0_capacity: l0,
            neuron_capacity: l2 + l1 + l0,
            synapse_capacity: (multiplicity * raw_synapse_slots(l2, l1, l0) as f64).round() as u64,
            memory_model: MemoryModel::Integrated,
        }
    }

    pub fn baseline(multiplicity: f64) -> Self {
        let (l2, l1, l0) = BASELINE_LAYERS;
        Self::three_layer("mubrain-baseline", l2, l1, l0, multiplicity)
    }

    pub fn is_two_layer(&self) -> bool {
        self.l2_capacity == 0
    }

    pub fn fits(&self, fp: &Footprint) -> bool {
        fp.l2 <= self.l2_capacity
            && fp.l1 <= self.l1_capacity
            && fp.l0 <= self.l0_capacity
            && fp.neurons() <= self.neuron_capacity
            && fp.synapses <= self.synapse_capacity
    }

    pub fn validate(&self, multiplicity: f64) -> Result<(), HardwareError> {
        let bad = |reason: String| HardwareError::InvalidConfig {
            name: self.name.clone(),
            reason,
        };
        if self.l1_capacity == 0 || self.l0_capacity == 0 || self.neuron_capacity == 0 {
            return Err(bad("capacities must be >= 1".into()));
        }
        if !self.is_two_layer() {
            let want = Self::three_layer("", self.l2_capacity, self.l1_capacity, self.l0_capacity, multiplicity);
            if self.synapse_capacity != want.synapse_capacity {
                return Err(bad(format!(
                    "synapse_capacity {} disagrees with geometry ({} expected)",
                    self.synapse_capacity, want.synapse_capacity
                )));
            }
            if self.neuron_capacity != want.neuron_capacity {
                return Err(bad("neuron_capacity must equal the layer sum".into()));
            }
        }
        Ok(())
    }
}

/// The four big/little presets, smallest first.
pub fn preset_palette(multiplicity: f64) -> Vec<CoreConfig> {
    vec![
        CoreConfig::three_layer("little-1", 256, 64, 16, multiplicity),
        CoreConfig::three_layer("little-2", 1024, 256, 16, multiplicity),
        CoreConfig::three_layer("big-1", 4096, 1024, 16, multiplicity),
        CoreConfig::three_layer("big-2", 16384, 4096, 16, multiplicity),
    ]
}

/// Nested palettes of 1, 2, 4 or 8 geometries. Size 1 is the conservative
/// design sized for the worst-case neighbor counts.
pub fn palette_of_size(size: usize, multiplicity: f64) -> Result<Vec<CoreConfig>, HardwareError> {
    let p = preset_palette(multiplicity);
    match size {
        1 => Ok(vec![p[3].clone()]),
        2 => Ok(vec![p[1].clone(), p[3].clone()]),
        4 => Ok(p),
        8 => {
            let mut v = p;
            v.extend([
                CoreConfig::three_layer("mid-1", 256, 128, 16, multiplicity),
                CoreConfig::three_layer("mid-2", 512, 128, 16, multiplicity),
                CoreConfig::three_layer("mid-3", 2048, 512, 16, multiplicity),
                CoreConfig::three_layer("mid-4", 8192, 2048, 16, multiplicity),
            ]);
            Ok(v)
        }
        n => Err(HardwareError::PaletteSize(n)),
    }
}

pub fn make_core_profile(kind: Backend, multiplicity: f64) -> CoreConfig {
    match kind {
        Backend::Mubrain => CoreConfig::baseline(multiplicity),
        Backend::Dynaps => CoreConfig {
            name: "dynaps".into(),
            l2_capacity: 0,
            l1_capacity: DYNAPS_NEURONS,
            l0_capacity: DYNAPS_NEURONS,
            neuron_capacity: DYNAPS_NEURONS,
            synapse_capacity: DYNAPS_SYNAPSES,
            memory_model: MemoryModel::Integrated,
        },
        Backend::Loihi => CoreConfig {
            name: "loihi".into(),
            l2_capacity: 0,
            l1_capacity: LOIHI_NEURONS,
            l0_capacity: LOIHI_NEURONS,
            neuron_capacity: LOIHI_NEURONS,
            synapse_capacity: LOIHI_SYNAPSES,
            memory_model: MemoryModel::Offchip,
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub static_power_per_synapse_uw: f64,
    pub static_power_per_neuron_uw: f64,
    pub area_per_synapse_um2: f64,
    pub area_per_neuron_um2: f64,
    pub dynamic_energy_per_spike_pj: f64,
    /// Extra energy per spike for cores whose synaptic memory is off-chip.
    pub offchip_energy_per_spike_pj: f64,
    pub synapse_multiplicity: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel::calibrated(0.01)
    }
}

impl CostModel {
    /// Picks the per-synapse coefficient so the baseline hits 40.3 uW.
    pub fn calibrated(static_power_per_neuron_uw: f64) -> Self {
        let (l2, l1, l0) = BASELINE_LAYERS;
        let neurons = (l2 + l1 + l0) as f64;
        CostModel {
            static_power_per_synapse_uw: (BASELINE_STATIC_POWER_UW
                - static_power_per_neuron_uw * neurons)
                / BASELINE_SYNAPSES as f64,
            static_power_per_neuron_uw,
            area_per_synapse_um2: 0.9,
            area_per_neuron_um2: 120.0,
            dynamic_energy_per_spike_pj: BASELINE_SPIKE_ENERGY_PJ,
            offchip_energy_per_spike_pj: 50.0,
            synapse_multiplicity: default_multiplicity(),
        }
    }

    pub fn static_power(&self, c: &CoreConfig) -> f64 {
        static_power(c, self)
    }

    pub fn area(&self, c: &CoreConfig) -> f64 {
        self.area_per_synapse_um2 * c.synapse_capacity as f64
            + self.area_per_neuron_um2 * c.neuron_capacity as f64
    }

    /// Energy of one spike on a core, in integer femtojoules.
    pub fn spike_energy_fj(&self, memory: MemoryModel) -> u64 {
        let pj = match memory {
            MemoryModel::Integrated => self.dynamic_energy_per_spike_pj,
            MemoryModel::Offchip => {
                self.dynamic_energy_per_spike_pj + self.offchip_energy_per_spike_pj
            }
        };
        (pj * 1000.0).round() as u64
    }

    pub fn baseline_static_power(&self) -> f64 {
        self.static_power(&CoreConfig::baseline(self.synapse_multiplicity))
    }

    pub fn check_calibration(&self) -> Result<(), HardwareError> {
        let base = CoreConfig::baseline(self.synapse_multiplicity);
        if base.synapse_capacity != BASELINE_SYNAPSES {
            return Err(HardwareError::Calibration(format!(
                "baseline provisions {} synapses, expected {BASELINE_SYNAPSES}",
                base.synapse_capacity
            )));
        }
        let p = self.static_power(&base);
        let rel = (p - BASELINE_STATIC_POWER_UW).abs() / BASELINE_STATIC_POWER_UW;
        if rel > 1e-9 {
            return Err(HardwareError::Calibration(format!(
                "baseline static power {p} uW, expected {BASELINE_STATIC_POWER_UW} uW"
            )));
        }
        if self.spike_energy_fj(MemoryModel::Integrated) != 26_000 {
            return Err(HardwareError::Calibration(format!(
                "dynamic energy {} pJ/spike, expected 26 pJ",
                self.dynamic_energy_per_spike_pj
            )));
        }
        if self.static_power_per_synapse_uw <= 0.0
            || self.static_power_per_neuron_uw <= 0.0
            || self.area_per_synapse_um2 <= 0.0
            || self.area_per_neuron_um2 <= 0.0
        {
            return Err(HardwareError::Calibration(
                "coefficients must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Static power in uW, driven by provisioned rather than used resources.
pub fn static_power(c: &CoreConfig, m: &CostModel) -> f64 {
    m.static_power_per_synapse_uw * c.synapse_capacity as f64
        + m.static_power_per_neuron_uw * c.neuron_capacity as f64
}

/// Dynamic energy in pJ for `spike_count` spikes on an integrated-memory core.
pub fn dynamic_energy(spike_count: u64, m: &CostModel) -> f64 {
    (spike_count * m.spike_energy_fj(MemoryModel::Integrated)) as f64 / 1000.0
}

/// Cheapest (by static power) palette entry that fits; ties keep palette order.
pub fn fit_config<'a>(
    fp: &Footprint,
    palette: &'a [CoreConfig],
    m: &CostModel,
) -> Result<&'a CoreConfig, HardwareError> {
    if palette.is_empty() {
        return Err(HardwareError::EmptyPalette);
    }
    let mut best: Option<(&CoreConfig, f64)> = None;
    for c in palette.iter().filter(|c| c.fits(fp)) {
        let p = m.static_power(c);
        if best.is_none_or(|(_, bp)| p < bp) {
            best = Some((c, p));
        }
    }
    best.map(|(c, _)| c).ok_or(HardwareError::NoFit {
        l2: fp.l2,
        l1: fp.l1,
        l0: fp.l0,
        synapses: fp.synapses,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentedBusParams {
    pub segment_energy_pj: f64,
    pub segment_delay_ps: u64,
    pub segment_length_um: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NocParams {
    pub link_energy_pj: f64,
    pub router_energy_pj: f64,
    pub hop_latency_ps: u64,
    pub router_latency_ps: u64,
    /// Mesh columns and rows; `None` picks the smallest square that holds
    /// every core.
    #[serde(default)]
    pub mesh: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterconnectParams {
    pub segmented_bus: SegmentedBusParams,
    pub noc: NocParams,
}

impl Default for InterconnectParams {
    fn default() -> Self {
        InterconnectParams {
            segmented_bus: SegmentedBusParams {
                segment_energy_pj: 0.1,
                segment_delay_ps: 50,
                segment_length_um: 250.0,
            },
            noc: NocParams {
                link_energy_pj: 0.5,
                router_energy_pj: 2.0,
                hop_latency_ps: 100,
                router_latency_ps: 400,
                mesh: None,
            },
        }
    }
}

/// Event timing constants, all in integer picoseconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingParams {
    /// Delay between a neuron firing and its targets integrating the spike.
    pub neuron_delay_ps: u64,
    /// Sub-network execution time per processed synaptic event.
    pub exec_per_event_ps: u64,
    /// Fixed sub-network execution overhead per image.
    pub exec_overhead_ps: u64,
}

impl Default for TimingParams {
    fn default() -> Self {
        TimingParams {
            neuron_delay_ps: 1_000,
            exec_per_event_ps: 2_000,
            exec_overhead_ps: 50_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelayPolicy {
    /// Every layer-skipping synapse goes through a relay neuron.
    #[default]
    Always,
    /// l2 -> l0 synapses use the programmable skip block directly.
    Direct,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompilerParams {
    #[serde(default)]
    pub relay_policy: RelayPolicy,
}

/// Neuron dynamics switches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronParams {
    /// Clamp the accumulator at zero from below.
    pub floor_at_zero: bool,
    /// Reset to zero on fire; otherwise subtract the threshold.
    pub reset_to_zero: bool,
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams {
            floor_at_zero: true,
            reset_to_zero: true,
        }
    }
}

/// The hardware configuration file: every calibration constant in one place.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareConfig {
    pub palette: Vec<CoreConfig>,
    pub cost_model: CostModel,
    #[serde(default)]
    pub interconnect: InterconnectParams,
    #[serde(default)]
    pub timing: TimingParams,
    #[serde(default)]
    pub compiler: CompilerParams,
    #[serde(default)]
    pub neuron: NeuronParams,
}

impl Default for HardwareConfig {
    fn default() -> Self {
        let cost_model = CostModel::default();
        HardwareConfig {
            palette: preset_palette(cost_model.synapse_multiplicity),
            cost_model,
            interconnect: InterconnectParams::default(),
            timing: TimingParams::default(),
            compiler: CompilerParams::default(),
            neuron: NeuronParams::default(),
        }
    }
}

impl HardwareConfig {
    pub fn validate(&self) -> Result<(), HardwareError> {
        self.cost_model.check_calibration()?;
        if self.palette.is_empty() {
            return Err(HardwareError::EmptyPalette);
        }
        for c in &self.palette {
            c.validate(self.cost_model.synapse_multiplicity)?;
        }
        Ok(())
    }

    pub fn with_palette(&self, palette: Vec<CoreConfig>) -> Self {
        HardwareConfig {
            palette,
            ..self.clone()
        }
    }

    /// Palette used by a backend: the configured one for the three-layer
    /// core, the fixed device profile otherwise.
    pub fn palette_for(&self, backend: Backend) -> Vec<CoreConfig> {
        match backend {
            Backend::Mubrain => self.palette.clone(),
            other => vec![make_core_profile(other, self.cost_model.synapse_multiplicity)],
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HardwareError> {
        let cfg: HardwareConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HardwareError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// A core slot on the chip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoreId(pub usize);

/// Instantiated cores plus the interconnect that joins them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardwarePlatform {
    pub cores: Vec<(CoreId, CoreConfig)>,
    pub interconnect: crate::segbus::Interconnect,
    pub config_palette: Vec<CoreConfig>,
}

impl HardwarePlatform {
    pub fn new(
        cores: Vec<(CoreId, CoreConfig)>,
        interconnect: crate::segbus::Interconnect,
        config_palette: Vec<CoreConfig>,
    ) -> Result<Self, HardwareError> {
        if !matches!(config_palette.len(), 1 | 2 | 4 | 8) {
            return Err(HardwareError::PaletteSize(config_palette.len()));
        }
        let mut seen = std::collections::HashSet::new();
        for (id, c) in &cores {
            if !seen.insert(*id) {
                return Err(HardwareError::DuplicateCore(id.0));
            }
            if !config_palette.contains(c) {
                return Err(HardwareError::NotInPalette {
                    core: id.0,
                    config: c.name.clone(),
                });
            }
        }
        Ok(HardwarePlatform {
            cores,
            interconnect,
            config_palette,
        })
    }

    pub fn total_static_power(&self, m: &CostModel) -> f64 {
        self.cores.iter().map(|(_, c)| m.static_power(c)).sum()
    }
}
