//! Experiment configuration: a JSON file validated into the library
//! types, with shorthand forms for the binary example family. Command
//! line flags override the file; every report embeds the resolved
//! configuration so runs are reproducible from their outputs alone.

use idauth_core::codec::{CodebookSpec, TypicalityParams};
use idauth_core::probability::{Channel, Pmf};
use idauth_core::region::{AuxChannels, ObjectiveWeights, SourceModel};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Source specification: the erasure-cascade shorthand or explicit
/// tables. The two forms are mutually exclusive by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Erasure {
        p: f64,
        q: f64,
    },
    Explicit {
        px: Vec<f64>,
        pyz_given_x: Vec<Vec<f64>>,
        y_size: usize,
        z_size: usize,
    },
}

impl SourceSpec {
    pub fn build(&self) -> Result<SourceModel, ConfigError> {
        match self {
            SourceSpec::Erasure { p, q } => SourceModel::erasure_cascade(*p, *q)
                .map_err(|e| ConfigError(e.to_string())),
            SourceSpec::Explicit {
                px,
                pyz_given_x,
                y_size,
                z_size,
            } => {
                let px = Pmf::new(px.clone()).map_err(|e| ConfigError(e.to_string()))?;
                let ch = Channel::from_rows(pyz_given_x.clone())
                    .map_err(|e| ConfigError(e.to_string()))?;
                SourceModel::new(px, ch, *y_size, *z_size)
                    .map_err(|e| ConfigError(e.to_string()))
            }
        }
    }

    /// The erasure parameters when this is the shorthand form.
    pub fn erasure_params(&self) -> Option<(f64, f64)> {
        match self {
            SourceSpec::Erasure { p, q } => Some((*p, *q)),
            SourceSpec::Explicit { .. } => None,
        }
    }
}

/// Auxiliary-channel specification: a binary-symmetric shorthand (with
/// constant or identity second stage), a sweep over crossover values, or
/// explicit tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AuxSpec {
    /// `V = BSC(alpha)(X)`; `u` selects the second stage.
    Bsc {
        alpha: f64,
        #[serde(default)]
        u: SecondStage,
    },
    BscSweep {
        alphas: Vec<f64>,
        #[serde(default)]
        u: SecondStage,
    },
    Explicit {
        pvx: Vec<Vec<f64>>,
        puv: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondStage {
    #[default]
    Constant,
    EqualV,
}

impl AuxSpec {
    /// The sweep labels and channels this spec expands to.
    pub fn expand(&self) -> Result<Vec<(Option<f64>, AuxChannels)>, ConfigError> {
        let build_bsc = |alpha: f64, u: SecondStage| -> Result<AuxChannels, ConfigError> {
            let res = match u {
                SecondStage::Constant => AuxChannels::bsc_with_constant_u(alpha),
                SecondStage::EqualV => AuxChannels::bsc_with_u_equal_v(alpha),
            };
            res.map_err(|e| ConfigError(e.to_string()))
        };
        match self {
            AuxSpec::Bsc { alpha, u } => Ok(vec![(Some(*alpha), build_bsc(*alpha, *u)?)]),
            AuxSpec::BscSweep { alphas, u } => {
                if alphas.is_empty() {
                    return bad("bsc_sweep needs at least one alpha");
                }
                alphas
                    .iter()
                    .map(|&a| Ok((Some(a), build_bsc(a, *u)?)))
                    .collect()
            }
            AuxSpec::Explicit { pvx, puv } => {
                let pvx =
                    Channel::from_rows(pvx.clone()).map_err(|e| ConfigError(e.to_string()))?;
                let puv =
                    Channel::from_rows(puv.clone()).map_err(|e| ConfigError(e.to_string()))?;
                Ok(vec![(
                    None,
                    AuxChannels::new(pvx, puv).map_err(|e| ConfigError(e.to_string()))?,
                )])
            }
        }
    }

    /// A single auxiliary pair; sweeps are rejected.
    pub fn single(&self) -> Result<AuxChannels, ConfigError> {
        let mut expanded = self.expand()?;
        if expanded.len() != 1 {
            return bad("this command needs a single aux channel, not a sweep");
        }
        Ok(expanded.remove(0).1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecSection {
    pub n: usize,
    pub k_users: usize,
    #[serde(default)]
    pub r_i: f64,
    pub epsilon: f64,
    pub delta_eps: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionMode {
    Corners,
    Optimize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSection {
    pub mode: RegionMode,
    #[serde(default)]
    pub weights: Option<WeightsSection>,
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Drop corners dominated by time-shared mixtures of other corners.
    #[serde(default)]
    pub timeshare_prune: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    pub identification: f64,
    pub compression: f64,
    pub leakage: f64,
    pub key: f64,
}

impl WeightsSection {
    pub fn build(&self) -> Result<ObjectiveWeights, ConfigError> {
        let w = ObjectiveWeights {
            identification: self.identification,
            compression: self.compression,
            leakage: self.leakage,
            key: self.key,
        };
        w.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinarySection {
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulateMode {
    Exact,
    Mc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub mode: SimulateMode,
    #[serde(default)]
    pub trials: Option<u64>,
    #[serde(default)]
    pub include_attack: bool,
    /// Override the blocklength per run and report one row per value.
    #[serde(default)]
    pub n_sweep: Option<Vec<usize>>,
    #[serde(default)]
    pub svg: bool,
    /// Fall back to Monte Carlo when exact enumeration exceeds its cap.
    #[serde(default)]
    pub fallback_to_mc: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    #[serde(default)]
    pub dump_best_response: bool,
    /// Force this many key subbins when the key-rate bound is not
    /// positive (degraded sources); absent means refuse to run there.
    #[serde(default)]
    pub force_key_bins: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    #[serde(default = "default_check_joints")]
    pub joints: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Also run a deliberately corrupted joint and expect the suite to
    /// flag it (diagnostic of the checks themselves).
    #[serde(default)]
    pub inject_corruption: bool,
}

fn default_check_joints() -> usize {
    100
}

/// The top-level experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: SourceSpec,
    #[serde(default)]
    pub aux: Option<AuxSpec>,
    #[serde(default)]
    pub codec: Option<CodecSection>,
    #[serde(default)]
    pub region: Option<RegionSection>,
    #[serde(default)]
    pub binary: Option<BinarySection>,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
    #[serde(default)]
    pub attack: Option<AttackSection>,
    #[serde(default)]
    pub check: Option<CheckSection>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn aux(&self) -> Result<&AuxSpec, ConfigError> {
        match &self.aux {
            Some(a) => Ok(a),
            None => bad("this command needs an `aux` section"),
        }
    }

    pub fn codec(&self) -> Result<&CodecSection, ConfigError> {
        match &self.codec {
            Some(c) => Ok(c),
            None => bad("this command needs a `codec` section"),
        }
    }

    /// The fully validated codebook spec, with an optional seed override.
    pub fn codebook_spec(&self, seed_override: Option<u64>) -> Result<CodebookSpec, ConfigError> {
        let codec = self.codec()?;
        let src = self.source.build()?;
        let aux = self.aux()?.single()?;
        let typ = TypicalityParams::new(codec.epsilon, codec.delta_eps)
            .map_err(|e| ConfigError(e.to_string()))?;
        Ok(CodebookSpec {
            n: codec.n,
            k_users: codec.k_users,
            r_i: codec.r_i,
            src,
            aux,
            typ,
            seed: seed_override.unwrap_or(codec.seed),
        })
    }
}
