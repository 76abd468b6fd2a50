//! Config parsing: a single JSON file selects the experiment, the measure(s),
//! the numeric knobs, and the output path.

use serde::{Deserialize, Serialize};

use fracdim_core::measures::{MeasureSpec, Similarity};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Experiment tag: dim | scan | cpchain | bc-grid | convolve | lift-check.
    pub experiment: String,
    /// Seed for every sampler in the run (mandatory).
    pub seed: u64,
    /// Output CSV path; the manifest is written next to it.
    pub output: String,
    #[serde(default)]
    pub measure: Option<SpecConfig>,
    #[serde(default)]
    pub params: Params,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Tree depth (dim) or lift depth (lift-check).
    pub depth: Option<usize>,
    /// Entropy scale exponent for e_q estimators.
    pub q: Option<u32>,
    /// Scenery/chain steps per sample.
    pub steps: Option<usize>,
    /// Independent Monte-Carlo samples (chains or paths).
    pub samples: Option<usize>,
    /// Grid resolution exponent for histogram fallbacks (cells 2^-K).
    pub resolution: Option<u32>,
    /// Points drawn when a sampler-backed grid state is needed.
    pub grid_points: Option<usize>,
    /// Slope grid for scans.
    pub slopes: Option<SlopeGrid>,
    /// Initial eccentricity parameter for the ×2/×3 chain (default: random).
    pub w0: Option<f64>,
    /// Partition operator name: "base-<b>" or "rw".
    pub operator: Option<String>,
    /// Contraction grid for bc-grid.
    pub t_grid: Option<Vec<f64>>,
    /// Sign bias for bc-grid.
    pub weight: Option<f64>,
    /// Block lengths for bc-grid.
    pub block_lengths: Option<Vec<usize>>,
    /// Self-convolution powers for convolve.
    pub iterations: Option<usize>,
    /// Histogram level for convolve.
    pub level: Option<u32>,
    /// Lift map tag: "identity" or "half-sum".
    pub map: Option<String>,
    /// Base of the lift map digit system.
    pub base: Option<u32>,
    /// Flagging threshold for scans (estimate below max − epsilon).
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeGrid {
    pub from: f64,
    pub to: f64,
    pub count: usize,
    /// Mirror each slope with its negative.
    #[serde(default)]
    pub two_sided: bool,
    /// Prepend the coordinate projections.
    #[serde(default)]
    pub include_axes: bool,
}

impl SlopeGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.from];
        }
        (0..self.count)
            .map(|i| self.from + (self.to - self.from) * i as f64 / (self.count - 1) as f64)
            .collect()
    }
}

/// Measure description as written in configs; mirrors the library spec type.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpecConfig {
    BernoulliDigits {
        base: u32,
        digits: Vec<DigitEntry>,
        probs: Vec<f64>,
    },
    MarkovDigits {
        base: u32,
        digits: Vec<u8>,
        transition: Vec<Vec<f64>>,
        initial: Vec<f64>,
    },
    LinearIfs {
        maps: Vec<MapConfig>,
        weights: Vec<f64>,
    },
    Product {
        left: Box<SpecConfig>,
        right: Box<SpecConfig>,
    },
    BernoulliConvolution {
        contraction: f64,
        weight: f64,
        #[serde(default = "default_block_len")]
        block_len: usize,
    },
}

fn default_block_len() -> usize {
    8
}

/// One digit: a scalar for measures on [0,1], a pair for the square.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DigitEntry {
    One(u8),
    Two([u8; 2]),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub ratio: f64,
    #[serde(default)]
    pub rotation: f64,
    #[serde(default)]
    pub reflect: bool,
    pub translation: Vec<f64>,
}

impl SpecConfig {
    pub fn to_spec(&self) -> MeasureSpec {
        match self {
            SpecConfig::BernoulliDigits { base, digits, probs } => MeasureSpec::BernoulliDigits {
                base: *base,
                digits: digits
                    .iter()
                    .map(|d| match d {
                        DigitEntry::One(v) => vec![*v],
                        DigitEntry::Two(v) => vec![v[0], v[1]],
                    })
                    .collect(),
                probs: probs.clone(),
            },
            SpecConfig::MarkovDigits { base, digits, transition, initial } => {
                MeasureSpec::MarkovDigits {
                    base: *base,
                    digits: digits.clone(),
                    transition: transition.clone(),
                    initial: initial.clone(),
                }
            }
            SpecConfig::LinearIfs { maps, weights } => MeasureSpec::LinearIfs {
                maps: maps
                    .iter()
                    .map(|m| Similarity {
                        ratio: m.ratio,
                        rotation: m.rotation,
                        reflect: m.reflect,
                        translation: m.translation.clone(),
                    })
                    .collect(),
                weights: weights.clone(),
            },
            SpecConfig::Product { left, right } => MeasureSpec::Product {
                left: Box::new(left.to_spec()),
                right: Box::new(right.to_spec()),
            },
            SpecConfig::BernoulliConvolution { contraction, weight, block_len } => {
                MeasureSpec::BernoulliConvolution {
                    contraction: *contraction,
                    weight: *weight,
                    block_len: *block_len,
                }
            }
        }
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, String> {
    serde_json::from_str(text).map_err(|e| format!("config error: {e}"))
}
