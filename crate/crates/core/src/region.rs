//! Rate-region evaluation and frontier search.
//!
//! For a memoryless source `P_X` with broadcast side channel `P_{Y,Z|X}`
//! and auxiliary chain `U - V - X - (Y, Z)` given by `P_{V|X}` and
//! `P_{U|V}`, the achievable identification / compression / leakage / key
//! tuples are bounded by four functionals of the composed joint:
//!
//! * `R_I  <= I(Y; U)`
//! * `R_C  >= R_I + I(X; V | Y)`
//! * `L    >= I(X; V, Y) - I(X; Y | U) + I(X; Z | U)`
//! * `R_S  <= I(V; Y | U) - I(V; Z | U)`
//!
//! The same four functionals bound the false-acceptance exponent region:
//! the exponent bound is field-identical to the key bound, so one corner
//! evaluator serves both. Auxiliary alphabets never need to exceed
//! `|U| <= |X| + 4`, `|V| <= (|X| + 4)(|X| + 2)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::probability::{
    binary_entropy, compose_chain, conditional_mutual_information, mutual_information, stable_sum,
    Axis, Channel, JointPmf, Pmf, ProbError,
};

#[derive(Debug, Error)]
pub enum RegionError {
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error("auxiliary alphabet |{which}| = {size} exceeds cap {cap}")]
    CapExceeded {
        which: char,
        size: usize,
        cap: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("special-case precondition violated: {0}")]
    Precondition(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// The fixed memoryless source: `P_X` and the broadcast channel
/// `P_{Y,Z|X}` with the output pair flattened as `y * z_size + z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    px: Pmf,
    pyz_given_x: Channel,
    y_size: usize,
    z_size: usize,
}

impl SourceModel {
    pub fn new(
        px: Pmf,
        pyz_given_x: Channel,
        y_size: usize,
        z_size: usize,
    ) -> Result<Self, RegionError> {
        if pyz_given_x.input_size() != px.support_size() {
            return Err(RegionError::DimensionMismatch(format!(
                "channel input {} vs |X| {}",
                pyz_given_x.input_size(),
                px.support_size()
            )));
        }
        if pyz_given_x.output_size() != y_size * z_size {
            return Err(RegionError::DimensionMismatch(format!(
                "channel output {} vs |Y|*|Z| = {}",
                pyz_given_x.output_size(),
                y_size * z_size
            )));
        }
        Ok(Self {
            px,
            pyz_given_x,
            y_size,
            z_size,
        })
    }

    /// The binary example family: `X ~ Bernoulli(1/2)`, `Y` an erasure of
    /// `X` with probability `p`, `Z` an erasure of `Y` with probability
    /// `q`, so `X - Y - Z` and both `Y` and `Z` live on `{0, 1, e}` with
    /// the erasure symbol at index 2.
    pub fn erasure_cascade(p: f64, q: f64) -> Result<Self, RegionError> {
        if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
            return Err(RegionError::InvalidArgument(format!(
                "erasure probabilities must lie in [0,1], got ({p}, {q})"
            )));
        }
        let rows = (0..2usize)
            .map(|x| {
                let mut mass = vec![0.0; 9];
                mass[x * 3 + x] = (1.0 - p) * (1.0 - q); // y = x, z = x
                mass[x * 3 + 2] = (1.0 - p) * q; //         y = x, z = e
                mass[2 * 3 + 2] = p; //                     y = e, z = e
                Pmf::new(mass)
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(RegionError::Prob)?;
        Self::new(Pmf::uniform(2), Channel::new(rows)?, 3, 3)
    }

    pub fn px(&self) -> &Pmf {
        &self.px
    }

    pub fn pyz_given_x(&self) -> &Channel {
        &self.pyz_given_x
    }

    pub fn x_size(&self) -> usize {
        self.px.support_size()
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn z_size(&self) -> usize {
        self.z_size
    }

    /// Marginal probability of measurement pair `(y, z)` given `x`.
    pub fn pyz(&self, y: usize, z: usize, x: usize) -> f64 {
        self.pyz_given_x.prob(y * self.z_size + z, x)
    }

    /// The single-letter joint `P_{X,Y,Z}` with axes `(x, y, z)`.
    pub fn joint(&self) -> JointPmf {
        let (nx, ny, nz) = (self.x_size(), self.y_size, self.z_size);
        let mut mass = vec![0.0; nx * ny * nz];
        for x in 0..nx {
            let px = self.px.get(x);
            for y in 0..ny {
                for z in 0..nz {
                    mass[(x * ny + y) * nz + z] = px * self.pyz(y, z, x);
                }
            }
        }
        JointPmf::new(
            vec![Axis::new("x", nx), Axis::new("y", ny), Axis::new("z", nz)],
            mass,
        )
        .expect("source joint normalized by construction")
    }
}

/// Upper bounds on the auxiliary alphabet sizes, configurable downward per
/// call. `theorem_default` is the general cap; the single-user special
/// case admits the tighter `|U| <= |X| + 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardinalityCaps {
    pub u_max: usize,
    pub v_max: usize,
}

impl CardinalityCaps {
    pub fn theorem_default(x_size: usize) -> Self {
        Self {
            u_max: x_size + 4,
            v_max: (x_size + 4) * (x_size + 2),
        }
    }

    pub fn single_user(x_size: usize) -> Self {
        Self {
            u_max: x_size + 3,
            v_max: (x_size + 3) * (x_size + 2),
        }
    }
}

/// The auxiliary chain `P_{V|X}`, `P_{U|V}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxChannels {
    pub pvx: Channel,
    pub puv: Channel,
}

impl AuxChannels {
    pub fn new(pvx: Channel, puv: Channel) -> Result<Self, RegionError> {
        if puv.input_size() != pvx.output_size() {
            return Err(RegionError::DimensionMismatch(format!(
                "P(u|v) input {} vs |V| {}",
                puv.input_size(),
                pvx.output_size()
            )));
        }
        Ok(Self { pvx, puv })
    }

    /// `V = BSC(alpha)(X)` with constant `U`.
    pub fn bsc_with_constant_u(alpha: f64) -> Result<Self, RegionError> {
        Ok(Self {
            pvx: Channel::bsc(alpha).map_err(RegionError::Prob)?,
            puv: Channel::constant(2),
        })
    }

    /// `U = V = BSC(alpha)(X)`.
    pub fn bsc_with_u_equal_v(alpha: f64) -> Result<Self, RegionError> {
        Ok(Self {
            pvx: Channel::bsc(alpha).map_err(RegionError::Prob)?,
            puv: Channel::identity(2),
        })
    }

    pub fn v_size(&self) -> usize {
        self.pvx.output_size()
    }

    pub fn u_size(&self) -> usize {
        self.puv.output_size()
    }

    pub fn check_caps(&self, caps: CardinalityCaps) -> Result<(), RegionError> {
        if self.u_size() > caps.u_max {
            return Err(RegionError::CapExceeded {
                which: 'U',
                size: self.u_size(),
                cap: caps.u_max,
            });
        }
        if self.v_size() > caps.v_max {
            return Err(RegionError::CapExceeded {
                which: 'V',
                size: self.v_size(),
                cap: caps.v_max,
            });
        }
        Ok(())
    }

    /// Stable 16-hex-digit identifier derived from the channel entries;
    /// used to label frontier rows that did not come from a shorthand.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for ch in [&self.pvx, &self.puv] {
            hasher.update((ch.input_size() as u64).to_le_bytes());
            hasher.update((ch.output_size() as u64).to_le_bytes());
            for i in 0..ch.input_size() {
                for &p in ch.row(i).as_slice() {
                    hasher.update(p.to_le_bytes());
                }
            }
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    fn is_identity_puv(&self) -> bool {
        let n = self.puv.input_size();
        if self.puv.output_size() != n {
            return false;
        }
        (0..n).all(|v| (self.puv.prob(v, v) - 1.0).abs() <= 1e-12)
    }
}

/// One point of the achievable region for a fixed source and auxiliary
/// chain: the four bound values, with the key bound clamped to the
/// nonnegative orthant and its raw signed value kept for diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionCorner {
    pub aux: AuxChannels,
    /// `I(Y; U)`: the identification-rate cap.
    pub i_yu: f64,
    /// `I(X; V | Y)`: compression in excess of the identification rate.
    pub i_xv_given_y: f64,
    /// `I(X; V, Y) - I(X; Y | U) + I(X; Z | U)`: the leakage floor.
    pub l_min: f64,
    /// `max(0, I(V; Y | U) - I(V; Z | U))`: the key-rate / exponent cap.
    pub key_max: f64,
    /// The unclamped key difference.
    pub key_raw: f64,
}

impl RegionCorner {
    /// Minimal compression rate at the maximal identification rate.
    pub fn r_c_min(&self) -> f64 {
        self.i_yu + self.i_xv_given_y
    }
}

/// An identification / compression / leakage / key-or-exponent tuple in
/// the nonnegative orthant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateTuple {
    pub r_i: f64,
    pub r_c: f64,
    pub l: f64,
    pub r_s_or_e: f64,
}

impl RateTuple {
    pub fn new(r_i: f64, r_c: f64, l: f64, r_s_or_e: f64) -> Result<Self, RegionError> {
        for (name, v) in [("r_i", r_i), ("r_c", r_c), ("l", l), ("r_s_or_e", r_s_or_e)] {
            if !v.is_finite() || v < 0.0 {
                return Err(RegionError::InvalidArgument(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(Self {
            r_i,
            r_c,
            l,
            r_s_or_e,
        })
    }
}

fn corner_from_joint(joint: &JointPmf, aux: AuxChannels) -> Result<RegionCorner, RegionError> {
    let i_yu = mutual_information(joint, &["y"], &["u"])?;
    let i_xv_given_y = conditional_mutual_information(joint, &["x"], &["v"], &["y"])?;
    let i_x_vy = mutual_information(joint, &["x"], &["v", "y"])?;
    let i_xy_u = conditional_mutual_information(joint, &["x"], &["y"], &["u"])?;
    let i_xz_u = conditional_mutual_information(joint, &["x"], &["z"], &["u"])?;
    let key_raw = conditional_mutual_information(joint, &["v"], &["y"], &["u"])?
        - conditional_mutual_information(joint, &["v"], &["z"], &["u"])?;
    Ok(RegionCorner {
        aux,
        i_yu,
        i_xv_given_y,
        l_min: i_x_vy - i_xy_u + i_xz_u,
        key_max: key_raw.max(0.0),
        key_raw,
    })
}

/// Evaluates the four region functionals on the composed joint, under the
/// general cardinality caps.
pub fn evaluate_corner(src: &SourceModel, aux: &AuxChannels) -> Result<RegionCorner, RegionError> {
    evaluate_corner_with_caps(src, aux, CardinalityCaps::theorem_default(src.x_size()))
}

pub fn evaluate_corner_with_caps(
    src: &SourceModel,
    aux: &AuxChannels,
    caps: CardinalityCaps,
) -> Result<RegionCorner, RegionError> {
    aux.check_caps(caps)?;
    let joint = compose_chain(&src.joint(), &aux.pvx, &aux.puv)?;
    corner_from_joint(&joint, aux.clone())
}

/// The exponent region shares the evaluator: the false-acceptance exponent
/// bound equals the key-rate bound field for field.
pub fn evaluate_exponent_corner(
    src: &SourceModel,
    aux: &AuxChannels,
) -> Result<RegionCorner, RegionError> {
    evaluate_corner(src, aux)
}

/// Whether `t` satisfies all four corner constraints, each loosened by
/// `slack` (use 0 for the boundary-exact test).
pub fn is_achievable(
    src: &SourceModel,
    aux: &AuxChannels,
    t: &RateTuple,
    slack: f64,
) -> Result<bool, RegionError> {
    let c = evaluate_corner(src, aux)?;
    Ok(t.r_i <= c.i_yu + slack
        && t.r_c >= t.r_i + c.i_xv_given_y - slack
        && t.l >= c.l_min - slack
        && t.r_s_or_e <= c.key_max + slack)
}

/// The reduced-region specializations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialCase {
    /// One enrolled user: the identification rate drops out and the caps
    /// tighten to `|U| <= |X| + 3`.
    SingleUser,
    /// No secret key (`V = U` required): identification, compression and
    /// leakage only, with the leakage floor collapsing to `I(X; U, Z)`.
    NoKey,
    /// No compression constraint and degenerate `Z`: bounds on
    /// identification, leakage and key only.
    NoCompressionNoZ,
}

/// Bound values of a reduced region. Fields not constrained by the chosen
/// case are `None`. `r_c_min_excess` is the compression floor above the
/// identification rate actually used.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecialCaseBounds {
    pub case: SpecialCase,
    pub r_i_max: Option<f64>,
    pub r_c_min_excess: Option<f64>,
    pub l_min: f64,
    pub key_max: Option<f64>,
    /// For [`SpecialCase::NoCompressionNoZ`]: earlier formulations pin the
    /// identification rate to its maximum `I(Y; U)` instead of allowing
    /// any smaller value; both are reported so the gap is visible.
    pub pinned_r_i: Option<f64>,
}

pub fn special_case_region(
    src: &SourceModel,
    case: SpecialCase,
    aux: &AuxChannels,
) -> Result<SpecialCaseBounds, RegionError> {
    let corner = match case {
        SpecialCase::SingleUser => {
            evaluate_corner_with_caps(src, aux, CardinalityCaps::single_user(src.x_size()))?
        }
        _ => evaluate_corner(src, aux)?,
    };
    match case {
        SpecialCase::SingleUser => Ok(SpecialCaseBounds {
            case,
            r_i_max: None,
            r_c_min_excess: Some(corner.i_xv_given_y),
            l_min: corner.l_min,
            key_max: Some(corner.key_max),
            pinned_r_i: None,
        }),
        SpecialCase::NoKey => {
            if !aux.is_identity_puv() {
                return Err(RegionError::Precondition(
                    "the no-key case requires V = U, i.e. an identity P(u|v)".into(),
                ));
            }
            Ok(SpecialCaseBounds {
                case,
                r_i_max: Some(corner.i_yu),
                r_c_min_excess: Some(corner.i_xv_given_y),
                l_min: corner.l_min,
                key_max: None,
                pinned_r_i: None,
            })
        }
        SpecialCase::NoCompressionNoZ => {
            let degenerate = src.z_size() == 1 || {
                // A z axis whose value is constant with probability one.
                let mz = src.joint().marginalize(&["z"]).unwrap();
                mz.mass().iter().filter(|&&p| p > 0.0).count() <= 1
            };
            if !degenerate {
                return Err(RegionError::Precondition(
                    "the no-compression case requires a degenerate Z axis".into(),
                ));
            }
            Ok(SpecialCaseBounds {
                case,
                r_i_max: Some(corner.i_yu),
                r_c_min_excess: None,
                l_min: corner.l_min,
                key_max: Some(corner.key_max),
                pinned_r_i: Some(corner.i_yu),
            })
        }
    }
}

/// Which closed-form curve of the binary erasure-cascade example to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFormCase {
    /// Compression / leakage / key tradeoff (no identification constraint).
    CompressionLeakageKey,
    /// Identification / compression / leakage tradeoff (no key).
    IdentificationCompressionLeakage,
}

/// One closed-form boundary point of the erasure-cascade region, at
/// crossover parameter `alpha`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClosedFormPoint {
    pub case: ClosedFormCase,
    pub alpha: f64,
    pub r_i_max: Option<f64>,
    /// Compression floor; in the identification case this sits on top of
    /// the identification rate.
    pub r_c_excess: f64,
    pub l_min: f64,
    pub key_max: Option<f64>,
}

/// Closed-form region boundary for the erasure cascade, parameterized by
/// the crossover `alpha in [0, 1/2]` of a binary symmetric test channel:
///
/// * case `CompressionLeakageKey`:
///   `R_C >= p (1-h(a))`, `L >= (1-q)(1-p) + p (1-h(a))`,
///   `R_S <= q (1-p) (1-h(a))`.
/// * case `IdentificationCompressionLeakage`:
///   `R_I <= (1-p)(1-h(a))`, `R_C >= R_I + p (1-h(a))`,
///   `L >= 1 - h(a) ((1-p) q + p)`.
pub fn erasure_closed_form(
    p: f64,
    q: f64,
    alpha: f64,
    case: ClosedFormCase,
) -> Result<ClosedFormPoint, RegionError> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(RegionError::InvalidArgument(format!(
            "erasure probabilities must lie in [0,1], got ({p}, {q})"
        )));
    }
    if !(0.0..=0.5).contains(&alpha) {
        return Err(RegionError::InvalidArgument(format!(
            "alpha must lie in [0, 1/2], got {alpha}"
        )));
    }
    let h = binary_entropy(alpha).map_err(RegionError::Prob)?;
    let gain = 1.0 - h;
    Ok(match case {
        ClosedFormCase::CompressionLeakageKey => ClosedFormPoint {
            case,
            alpha,
            r_i_max: None,
            r_c_excess: p * gain,
            l_min: (1.0 - q) * (1.0 - p) + p * gain,
            key_max: Some(q * (1.0 - p) * gain),
        },
        ClosedFormCase::IdentificationCompressionLeakage => ClosedFormPoint {
            case,
            alpha,
            r_i_max: Some((1.0 - p) * gain),
            r_c_excess: p * gain,
            l_min: 1.0 - h * ((1.0 - p) * q + p),
            key_max: None,
        },
    })
}

/// Max conditional-mutual-information violation of the chain structure
/// `U - V - X - (Y, Z)` on the composed joint:
/// `max(I(U; X,Y,Z | V), I(Y,Z; U,V | X))`. Zero (to rounding) for every
/// composed chain; strictly positive for joints built any other way.
pub fn markov_structure_check(src: &SourceModel, aux: &AuxChannels) -> Result<f64, RegionError> {
    let joint = compose_chain(&src.joint(), &aux.pvx, &aux.puv)?;
    markov_structure_check_joint(&joint)
}

/// Same check on an arbitrary joint over `(u, v, x, y, z)`.
pub fn markov_structure_check_joint(joint: &JointPmf) -> Result<f64, RegionError> {
    let m1 = conditional_mutual_information(joint, &["u"], &["x", "y", "z"], &["v"])?;
    let m2 = conditional_mutual_information(joint, &["y", "z"], &["u", "v"], &["x"])?;
    Ok(m1.max(m2))
}

/// Scalarization weights over `(r_i, -r_c, -l, key)`; all nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub identification: f64,
    pub compression: f64,
    pub leakage: f64,
    pub key: f64,
}

impl ObjectiveWeights {
    pub fn validate(&self) -> Result<(), RegionError> {
        let ws = [
            self.identification,
            self.compression,
            self.leakage,
            self.key,
        ];
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(RegionError::InvalidArgument(
                "objective weights must be finite and nonnegative".into(),
            ));
        }
        if ws.iter().all(|w| *w == 0.0) {
            return Err(RegionError::InvalidArgument(
                "objective weights must not all be zero".into(),
            ));
        }
        Ok(())
    }
}

/// Best scalarized value of a corner. The identification rate is free in
/// `[0, I(Y;U)]` and enters the compression floor linearly, so the optimal
/// choice is an endpoint decided by the weight difference.
pub fn scalarize(corner: &RegionCorner, w: &ObjectiveWeights) -> f64 {
    let r_i = if w.identification > w.compression {
        corner.i_yu
    } else {
        0.0
    };
    w.identification * r_i - w.compression * (r_i + corner.i_xv_given_y) - w.leakage * corner.l_min
        + w.key * corner.key_max
}

/// A corner found by the frontier search, with its scalarized value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub aux: AuxChannels,
    pub corner: RegionCorner,
    pub score: f64,
}

/// Search configuration for [`optimize_frontier_with_options`].
#[derive(Debug, Clone, Copy)]
pub struct FrontierOptions {
    pub caps: CardinalityCaps,
    /// Auxiliary alphabet sizes actually searched (must respect the caps;
    /// smaller sizes embed into larger ones by leaving symbols unused).
    pub u_size: usize,
    pub v_size: usize,
    /// Corner evaluations granted to each restart's local refinement.
    pub evals_per_restart: u64,
}

impl FrontierOptions {
    pub fn for_source(src: &SourceModel) -> Self {
        let caps = CardinalityCaps::theorem_default(src.x_size());
        Self {
            caps,
            u_size: (src.x_size() + 1).min(caps.u_max),
            v_size: (src.x_size() + 2).min(caps.v_max),
            evals_per_restart: 120,
        }
    }
}

/// Multi-start maximization of the scalarized objective over the auxiliary
/// channel pair, followed by nondominance filtering of the per-restart
/// optima. Channel rows are parameterized as normalized exponentials of
/// logits; refinement is coordinate-wise with a shrinking step. Restarts
/// run in parallel with per-restart generators derived from
/// `(seed, restart index)`, so the result is independent of scheduling and
/// thread count.
pub fn optimize_frontier(
    src: &SourceModel,
    weights: &ObjectiveWeights,
    budget: u64,
    seed: u64,
) -> Result<Vec<FrontierPoint>, RegionError> {
    optimize_frontier_with_options(src, weights, budget, seed, FrontierOptions::for_source(src))
}

struct Logits {
    pvx: Vec<f64>,
    puv: Vec<f64>,
    x_size: usize,
    v_size: usize,
    u_size: usize,
}

impl Logits {
    fn to_aux(&self) -> AuxChannels {
        AuxChannels {
            pvx: softmax_channel(&self.pvx, self.x_size, self.v_size),
            puv: softmax_channel(&self.puv, self.v_size, self.u_size),
        }
    }
}

fn softmax_channel(logits: &[f64], rows: usize, cols: usize) -> Channel {
    let pmf_rows = (0..rows)
        .map(|r| {
            let row = &logits[r * cols..(r + 1) * cols];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut mass: Vec<f64> = row.iter().map(|&l| (l - m).exp()).collect();
            let sum = stable_sum(mass.iter().copied());
            for p in &mut mass {
                *p /= sum;
            }
            let corr = stable_sum(mass.iter().copied());
            for p in &mut mass {
                *p /= corr;
            }
            Pmf::new(mass).expect("softmax rows are normalized")
        })
        .collect();
    Channel::new(pmf_rows).expect("rows share output size")
}

const LOGIT_HI: f64 = 12.0;

/// Deterministic starting points covering the degenerate corners that
/// scalarized objectives often favor: `V = X` with constant `U`,
/// `V = U = X`, and constant `V`.
fn canonical_logits(idx: usize, x_size: usize, v_size: usize, u_size: usize) -> Logits {
    let mut pvx = vec![-LOGIT_HI; x_size * v_size];
    let mut puv = vec![-LOGIT_HI; v_size * u_size];
    match idx {
        0 | 1 => {
            for x in 0..x_size {
                pvx[x * v_size + (x % v_size)] = LOGIT_HI;
            }
            for v in 0..v_size {
                let u = if idx == 0 { 0 } else { v % u_size };
                puv[v * u_size + u] = LOGIT_HI;
            }
        }
        _ => {
            for x in 0..x_size {
                pvx[x * v_size] = LOGIT_HI;
            }
            for v in 0..v_size {
                puv[v * u_size] = LOGIT_HI;
            }
        }
    }
    Logits {
        pvx,
        puv,
        x_size,
        v_size,
        u_size,
    }
}

pub fn optimize_frontier_with_options(
    src: &SourceModel,
    weights: &ObjectiveWeights,
    budget: u64,
    seed: u64,
    opts: FrontierOptions,
) -> Result<Vec<FrontierPoint>, RegionError> {
    weights.validate()?;
    if budget < 1 {
        return Err(RegionError::InvalidArgument("budget must be >= 1".into()));
    }
    if opts.u_size > opts.caps.u_max || opts.v_size > opts.caps.v_max {
        return Err(RegionError::CapExceeded {
            which: if opts.u_size > opts.caps.u_max {
                'U'
            } else {
                'V'
            },
            size: opts.u_size.max(opts.v_size),
            cap: opts.caps.u_max.min(opts.caps.v_max),
        });
    }
    let per_restart = opts.evals_per_restart.max(8);
    let restarts = ((budget + per_restart - 1) / per_restart).max(3) as usize;
    let src_joint = src.joint();
    let (x_size, v_size, u_size) = (src.x_size(), opts.v_size, opts.u_size);

    let eval = |logits: &Logits| -> (AuxChannels, RegionCorner, f64) {
        let aux = logits.to_aux();
        let joint = compose_chain(&src_joint, &aux.pvx, &aux.puv).expect("sizes fixed");
        let corner = corner_from_joint(&joint, aux.clone()).expect("valid joint");
        let score = scalarize(&corner, weights);
        (aux, corner, score)
    };

    let mut best_per_restart: Vec<FrontierPoint> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut logits = if r < 3 {
                canonical_logits(r, x_size, v_size, u_size)
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r as u64);
                let draw = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
                    (0..n).map(|_| 4.0 * (rng.random::<f64>() - 0.5)).collect()
                };
                Logits {
                    pvx: draw(&mut rng, x_size * v_size),
                    puv: draw(&mut rng, v_size * u_size),
                    x_size,
                    v_size,
                    u_size,
                }
            };
            let (mut aux, mut corner, mut score) = eval(&logits);
            let mut evals: u64 = 1;
            let mut step = 4.0f64;
            let dims = logits.pvx.len() + logits.puv.len();
            while step >= 0.05 && evals < per_restart {
                let mut improved = false;
                for d in 0..dims {
                    if evals >= per_restart {
                        break;
                    }
                    for dir in [1.0f64, -1.0] {
                        if evals >= per_restart {
                            break;
                        }
                        let slot = if d < logits.pvx.len() {
                            &mut logits.pvx[d]
                        } else {
                            &mut logits.puv[d - logits.pvx.len()]
                        };
                        let old = *slot;
                        *slot = old + dir * step;
                        let (a, c, s) = eval(&logits);
                        evals += 1;
                        if s > score + 1e-15 {
                            aux = a;
                            corner = c;
                            score = s;
                            improved = true;
                            break;
                        }
                        let slot = if d < logits.pvx.len() {
                            &mut logits.pvx[d]
                        } else {
                            &mut logits.puv[d - logits.pvx.len()]
                        };
                        *slot = old;
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            FrontierPoint { aux, corner, score }
        })
        .collect();

    // Re-verify every candidate through the public evaluator before
    // reporting it.
    for point in &mut best_per_restart {
        point.corner = evaluate_corner_with_caps(src, &point.aux, opts.caps)?;
        point.score = scalarize(&point.corner, weights);
    }
    Ok(nondominated_filter(best_per_restart, 1e-9))
}

fn dominates(a: &RegionCorner, b: &RegionCorner, tol: f64) -> bool {
    let no_worse = a.i_yu >= b.i_yu - tol
        && a.i_xv_given_y <= b.i_xv_given_y + tol
        && a.l_min <= b.l_min + tol
        && a.key_max >= b.key_max - tol;
    let strictly_better = a.i_yu > b.i_yu + tol
        || a.i_xv_given_y < b.i_xv_given_y - tol
        || a.l_min < b.l_min - tol
        || a.key_max > b.key_max + tol;
    no_worse && strictly_better
}

/// Component-wise nondominance filter with tolerance, preserving input
/// order among survivors and dropping near-duplicates.
pub fn nondominated_filter(points: Vec<FrontierPoint>, tol: f64) -> Vec<FrontierPoint> {
    let mut keep: Vec<FrontierPoint> = Vec::new();
    for p in points {
        if keep.iter().any(|k| {
            dominates(&k.corner, &p.corner, tol)
                || ((k.corner.i_yu - p.corner.i_yu).abs() <= tol
                    && (k.corner.i_xv_given_y - p.corner.i_xv_given_y).abs() <= tol
                    && (k.corner.l_min - p.corner.l_min).abs() <= tol
                    && (k.corner.key_max - p.corner.key_max).abs() <= tol)
        }) {
            continue;
        }
        keep.retain(|k| !dominates(&p.corner, &k.corner, tol));
        keep.push(p);
    }
    keep
}

/// Time-sharing post-processing: removes corners that a convex combination
/// of two other returned corners already dominates. Mixtures are scanned
/// on a fixed grid of the mixing coefficient.
pub fn prune_time_sharing_dominated(
    points: Vec<FrontierPoint>,
    tol: f64,
) -> Vec<FrontierPoint> {
    const LAMBDA_STEPS: usize = 16;
    let tuple = |c: &RegionCorner| [c.i_yu, c.r_c_min(), c.l_min, c.key_max];
    let dominated_by_mix = |target: &[f64; 4], a: &[f64; 4], b: &[f64; 4]| -> bool {
        (0..=LAMBDA_STEPS).any(|s| {
            let lam = s as f64 / LAMBDA_STEPS as f64;
            let mix = [
                lam * a[0] + (1.0 - lam) * b[0],
                lam * a[1] + (1.0 - lam) * b[1],
                lam * a[2] + (1.0 - lam) * b[2],
                lam * a[3] + (1.0 - lam) * b[3],
            ];
            let no_worse = mix[0] >= target[0] - tol
                && mix[1] <= target[1] + tol
                && mix[2] <= target[2] + tol
                && mix[3] >= target[3] - tol;
            let better = mix[0] > target[0] + tol
                || mix[1] < target[1] - tol
                || mix[2] < target[2] - tol
                || mix[3] > target[3] + tol;
            no_worse && better
        })
    };
    let tuples: Vec<[f64; 4]> = points.iter().map(|p| tuple(&p.corner)).collect();
    let mut keep = Vec::new();
    for (i, p) in points.into_iter().enumerate() {
        let dominated = (0..tuples.len()).any(|a| {
            (a + 1..tuples.len()).any(|b| {
                a != i && b != i && dominated_by_mix(&tuples[i], &tuples[a], &tuples[b])
            })
        });
        if !dominated {
            keep.push(p);
        }
    }
    keep
}

/// CSV export of frontier corners: one row per corner labeled by the
/// sweep parameter when one exists (else a content hash of the channels),
/// then the four bound values and the flattened channel entries.
pub fn frontier_csv(points: &[FrontierPoint], labels: Option<&[f64]>) -> String {
    use crate::textio::fmt_sig;
    let mut out = String::new();
    if points.is_empty() {
        return "alpha_or_hash,r_i,r_c_min,l_min,key_max\n".to_string();
    }
    let pvx_len = points[0].aux.pvx.input_size() * points[0].aux.pvx.output_size();
    let puv_len = points[0].aux.puv.input_size() * points[0].aux.puv.output_size();
    out.push_str("alpha_or_hash,r_i,r_c_min,l_min,key_max");
    for i in 0..pvx_len {
        out.push_str(&format!(",pvx_{i}"));
    }
    for i in 0..puv_len {
        out.push_str(&format!(",puv_{i}"));
    }
    out.push('\n');
    for (row, p) in points.iter().enumerate() {
        let label = match labels {
            Some(ls) => fmt_sig(ls[row], 12),
            None => p.aux.content_hash(),
        };
        out.push_str(&label);
        for v in [
            p.corner.i_yu,
            p.corner.r_c_min(),
            p.corner.l_min,
            p.corner.key_max,
        ] {
            out.push(',');
            out.push_str(&fmt_sig(v, 12));
        }
        for ch in [&p.aux.pvx, &p.aux.puv] {
            for r in 0..ch.input_size() {
                for &v in ch.row(r).as_slice() {
                    out.push(',');
                    out.push_str(&fmt_sig(v, 12));
                }
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const CASE_I_REF: (f64, f64, f64) =
        (0.15930132192321565, 0.5093013219232156, 0.18585154224375158);

    fn erasure_src() -> SourceModel {
        SourceModel::erasure_cascade(0.3, 0.5).unwrap()
    }

    #[test]
    fn corner_matches_closed_form_case_i() {
        let src = erasure_src();
        let aux = AuxChannels::bsc_with_constant_u(0.1).unwrap();
        let c = evaluate_corner(&src, &aux).unwrap();
        assert!(c.i_yu.abs() < 1e-12);
        assert!((c.i_xv_given_y - CASE_I_REF.0).abs() < 1e-9);
        assert!((c.l_min - CASE_I_REF.1).abs() < 1e-9);
        assert!((c.key_max - CASE_I_REF.2).abs() < 1e-9);
    }

    #[test]
    fn corner_with_both_aux_constant() {
        let src = erasure_src();
        let aux = AuxChannels::new(Channel::constant(2), Channel::constant(1)).unwrap();
        let c = evaluate_corner(&src, &aux).unwrap();
        assert!(c.i_yu.abs() < 1e-12);
        assert!(c.i_xv_given_y.abs() < 1e-12);
        assert!((c.l_min - 0.35).abs() < 1e-9); // collapses to I(X; Z)
        assert!(c.key_max.abs() < 1e-12);
    }

    #[test]
    fn corner_with_identity_v() {
        let src = erasure_src();
        let aux = AuxChannels::new(Channel::identity(2), Channel::constant(2)).unwrap();
        let c = evaluate_corner(&src, &aux).unwrap();
        assert!(c.i_yu.abs() < 1e-12);
        assert!((c.i_xv_given_y - 0.3).abs() < 1e-9);
        assert!((c.l_min - 0.65).abs() < 1e-9);
        assert!((c.key_max - 0.35).abs() < 1e-9);
    }

    #[test]
    fn cap_violation_is_rejected() {
        let src = erasure_src();
        // |V| = 25 exceeds (2+4)(2+2) = 24.
        let pvx = Channel::new(vec![Pmf::uniform(25), Pmf::uniform(25)]).unwrap();
        let aux = AuxChannels::new(pvx, Channel::constant(25)).unwrap();
        assert!(matches!(
            evaluate_corner(&src, &aux),
            Err(RegionError::CapExceeded { which: 'V', .. })
        ));
    }

    #[test]
    fn achievability_boundary() {
        let src = erasure_src();
        let aux = AuxChannels::bsc_with_constant_u(0.1).unwrap();
        let t = RateTuple::new(0.0, CASE_I_REF.0, CASE_I_REF.1, CASE_I_REF.2).unwrap();
        assert!(is_achievable(&src, &aux, &t, 1e-9).unwrap());
        let too_much_key =
            RateTuple::new(0.0, CASE_I_REF.0, CASE_I_REF.1, CASE_I_REF.2 + 0.01).unwrap();
        assert!(!is_achievable(&src, &aux, &too_much_key, 0.0).unwrap());
        // r_c below r_i violates the compression floor for every aux.
        let bad = RateTuple::new(0.5, 0.2, 1.0, 0.0).unwrap();
        assert!(!is_achievable(&src, &aux, &bad, 0.0).unwrap());
        // Leakage H(X) with constant V is always achievable.
        let v_const = AuxChannels::new(Channel::constant(2), Channel::constant(1)).unwrap();
        let generous = RateTuple::new(0.0, 0.0, 1.0, 0.0).unwrap();
        assert!(is_achievable(&src, &v_const, &generous, 1e-12).unwrap());
    }

    #[test]
    fn closed_form_cases() {
        let pt = erasure_closed_form(0.3, 0.5, 0.1, ClosedFormCase::CompressionLeakageKey).unwrap();
        assert!((pt.r_c_excess - CASE_I_REF.0).abs() < 1e-12);
        assert!((pt.l_min - CASE_I_REF.1).abs() < 1e-12);
        assert!((pt.key_max.unwrap() - CASE_I_REF.2).abs() < 1e-12);

        // alpha = 1/2 kills every (1 - h) factor.
        let flat = erasure_closed_form(0.3, 0.5, 0.5, ClosedFormCase::CompressionLeakageKey).unwrap();
        assert!(flat.r_c_excess.abs() < 1e-12);
        assert!((flat.l_min - 0.35).abs() < 1e-12);
        assert!(flat.key_max.unwrap().abs() < 1e-12);

        let pt2 = erasure_closed_form(
            0.2,
            0.4,
            0.25,
            ClosedFormCase::IdentificationCompressionLeakage,
        )
        .unwrap();
        assert!((pt2.r_i_max.unwrap() - 0.15097750043269374).abs() < 1e-9);
        assert!((pt2.r_c_excess - 0.037744375108173434).abs() < 1e-9);
        assert!((pt2.l_min - 0.5781353752812509).abs() < 1e-9);

        assert!(erasure_closed_form(0.3, 0.5, 0.7, ClosedFormCase::CompressionLeakageKey).is_err());
    }

    #[test]
    fn closed_form_matches_evaluator_on_grid() {
        let src = erasure_src();
        for i in 0..=50 {
            let alpha = 0.5 * i as f64 / 50.0;
            let aux = AuxChannels::bsc_with_constant_u(alpha).unwrap();
            let c = evaluate_corner(&src, &aux).unwrap();
            let pt =
                erasure_closed_form(0.3, 0.5, alpha, ClosedFormCase::CompressionLeakageKey).unwrap();
            assert!((c.i_xv_given_y - pt.r_c_excess).abs() < 1e-9, "alpha={alpha}");
            assert!((c.l_min - pt.l_min).abs() < 1e-9, "alpha={alpha}");
            assert!((c.key_max - pt.key_max.unwrap()).abs() < 1e-9, "alpha={alpha}");
        }
    }

    #[test]
    fn case_ii_matches_evaluator_with_u_equal_v() {
        let src = SourceModel::erasure_cascade(0.2, 0.4).unwrap();
        let aux = AuxChannels::bsc_with_u_equal_v(0.25).unwrap();
        let c = evaluate_corner(&src, &aux).unwrap();
        let pt = erasure_closed_form(
            0.2,
            0.4,
            0.25,
            ClosedFormCase::IdentificationCompressionLeakage,
        )
        .unwrap();
        assert!((c.i_yu - pt.r_i_max.unwrap()).abs() < 1e-9);
        assert!((c.i_xv_given_y - pt.r_c_excess).abs() < 1e-9);
        assert!((c.l_min - pt.l_min).abs() < 1e-9);
    }

    #[test]
    fn special_cases_remap_the_evaluator() {
        let src = erasure_src();
        let aux_ident = AuxChannels::new(Channel::identity(2), Channel::identity(2)).unwrap();
        let corner = evaluate_corner(&src, &aux_ident).unwrap();
        let b = special_case_region(&src, SpecialCase::NoKey, &aux_ident).unwrap();
        assert_eq!(b.r_i_max.unwrap(), corner.i_yu);
        assert_eq!(b.r_c_min_excess.unwrap(), corner.i_xv_given_y);
        assert_eq!(b.l_min, corner.l_min);
        assert!(b.key_max.is_none());
        // U = V = X: R_I <= 1-p, excess = p, L >= I(X; X, Z) = H(X) = 1.
        assert!((b.r_i_max.unwrap() - 0.7).abs() < 1e-9);
        assert!((b.r_c_min_excess.unwrap() - 0.3).abs() < 1e-9);
        assert!((b.l_min - 1.0).abs() < 1e-9);

        // Non-identity P(u|v) violates the no-key precondition.
        let aux_bad = AuxChannels::bsc_with_constant_u(0.1).unwrap();
        assert!(matches!(
            special_case_region(&src, SpecialCase::NoKey, &aux_bad),
            Err(RegionError::Precondition(_))
        ));

        let single = special_case_region(&src, SpecialCase::SingleUser, &aux_bad).unwrap();
        let c2 = evaluate_corner(&src, &aux_bad).unwrap();
        assert!(single.r_i_max.is_none());
        assert_eq!(single.r_c_min_excess.unwrap(), c2.i_xv_given_y);
        assert_eq!(single.l_min, c2.l_min);
        assert_eq!(single.key_max.unwrap(), c2.key_max);
    }

    #[test]
    fn no_compression_case_requires_degenerate_z() {
        let src = erasure_src();
        let aux = AuxChannels::bsc_with_constant_u(0.1).unwrap();
        assert!(matches!(
            special_case_region(&src, SpecialCase::NoCompressionNoZ, &aux),
            Err(RegionError::Precondition(_))
        ));

        // Degenerate Z: erase Y fully (q = 1 makes Z = e with probability 1).
        let src_degen = SourceModel::erasure_cascade(0.3, 1.0).unwrap();
        let b = special_case_region(&src_degen, SpecialCase::NoCompressionNoZ, &aux).unwrap();
        let c = evaluate_corner(&src_degen, &aux).unwrap();
        // U constant: R_S <= I(Y; V), L >= I(X; V | Y).
        assert!((b.key_max.unwrap() - c.key_raw).abs() < 1e-12);
        let joint = compose_chain(&src_degen.joint(), &aux.pvx, &aux.puv).unwrap();
        let i_yv = mutual_information(&joint, &["y"], &["v"]).unwrap();
        assert!((b.key_max.unwrap() - i_yv).abs() < 1e-10);
        assert!((b.l_min - c.i_xv_given_y).abs() < 1e-10);
        assert_eq!(b.pinned_r_i.unwrap(), c.i_yu);
    }

    #[test]
    fn key_bound_clamps_on_degraded_sources() {
        // Z = X exactly while Y is an erasure: the adversary sees more
        // than the decoder, so the raw key difference goes negative.
        let rows = (0..2usize)
            .map(|x| {
                let mut mass = vec![0.0; 6]; // y in {0,1,e}, z in {0,1}
                mass[x * 2 + x] = 0.7;
                mass[2 * 2 + x] = 0.3;
                Pmf::new(mass).unwrap()
            })
            .collect();
        let src = SourceModel::new(
            Pmf::uniform(2),
            Channel::new(rows).unwrap(),
            3,
            2,
        )
        .unwrap();
        let aux = AuxChannels::bsc_with_constant_u(0.05).unwrap();
        let c = evaluate_corner(&src, &aux).unwrap();
        assert!(c.key_raw < -1e-3);
        assert_eq!(c.key_max, 0.0);

        // Z = Y (q = 0): the difference vanishes.
        let src_eq = SourceModel::erasure_cascade(0.3, 0.0).unwrap();
        let c2 = evaluate_corner(&src_eq, &aux).unwrap();
        assert!(c2.key_raw.abs() < 1e-10);
        assert_eq!(c2.key_max, c2.key_raw.max(0.0));
    }

    #[test]
    fn exponent_corner_shares_the_evaluator() {
        let src = erasure_src();
        let aux = AuxChannels::bsc_with_constant_u(0.2).unwrap();
        let a = evaluate_corner(&src, &aux).unwrap();
        let b = evaluate_exponent_corner(&src, &aux).unwrap();
        assert_eq!(a.i_yu, b.i_yu);
        assert_eq!(a.i_xv_given_y, b.i_xv_given_y);
        assert_eq!(a.l_min, b.l_min);
        assert_eq!(a.key_max, b.key_max);
    }

    #[test]
    fn markov_check_detects_violations() {
        let src = erasure_src();
        let aux = AuxChannels::bsc_with_constant_u(0.1).unwrap();
        assert!(markov_structure_check(&src, &aux).unwrap() < 1e-12);

        // A joint where U copies Y directly breaks the chain.
        let j = src.joint();
        let mut mass = vec![0.0; 3 * 2 * 2 * 3 * 3];
        j.for_each_cell(|idx, p| {
            let (x, y, z) = (idx[0], idx[1], idx[2]);
            let (u, v) = (y, x);
            mass[(((u * 2 + v) * 2 + x) * 3 + y) * 3 + z] += p;
        });
        let bad = JointPmf::new(
            vec![
                Axis::new("u", 3),
                Axis::new("v", 2),
                Axis::new("x", 2),
                Axis::new("y", 3),
                Axis::new("z", 3),
            ],
            mass,
        )
        .unwrap();
        assert!(markov_structure_check_joint(&bad).unwrap() > 1e-3);
    }

    #[test]
    fn optimizer_reaches_known_extremes() {
        let src = erasure_src();
        // Maximize the key rate alone: optimum q(1-p) = 0.35 at V = X,
        // U constant.
        let w_key = ObjectiveWeights {
            identification: 0.0,
            compression: 0.0,
            leakage: 0.0,
            key: 1.0,
        };
        let pts = optimize_frontier(&src, &w_key, 600, 7).unwrap();
        let best = pts.iter().map(|p| p.score).fold(f64::NEG_INFINITY, f64::max);
        assert!(best >= 0.35 - 1e-3, "best key {best}");

        // Minimize leakage alone: floor I(X; Z) = 0.35 at constant V.
        let w_leak = ObjectiveWeights {
            identification: 0.0,
            compression: 0.0,
            leakage: 1.0,
            key: 0.0,
        };
        let pts = optimize_frontier(&src, &w_leak, 600, 7).unwrap();
        let best_l = pts
            .iter()
            .map(|p| p.corner.l_min)
            .fold(f64::INFINITY, f64::min);
        assert!(best_l <= 0.35 + 1e-6, "best leakage {best_l}");
    }

    #[test]
    fn optimizer_is_deterministic() {
        let src = erasure_src();
        let w = ObjectiveWeights {
            identification: 1.0,
            compression: 0.2,
            leakage: 0.5,
            key: 1.0,
        };
        let a = optimize_frontier(&src, &w, 480, 99).unwrap();
        let b = optimize_frontier(&src, &w, 480, 99).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert!(optimize_frontier(
            &src,
            &ObjectiveWeights {
                identification: 0.0,
                compression: 0.0,
                leakage: 0.0,
                key: 0.0
            },
            100,
            1
        )
        .is_err());
    }

    #[test]
    fn nondominance_and_time_sharing_filters() {
        let src = erasure_src();
        let mk = |alpha: f64| {
            let aux = AuxChannels::bsc_with_constant_u(alpha).unwrap();
            let corner = evaluate_corner(&src, &aux).unwrap();
            FrontierPoint {
                aux,
                corner,
                score: 0.0,
            }
        };
        // All boundary alphas are mutually nondominated (the curve trades
        // leakage against key rate).
        let pts = vec![mk(0.0), mk(0.2), mk(0.4)];
        assert_eq!(nondominated_filter(pts, 1e-9).len(), 3);

        // A corner strictly worse in leakage with no compensation is
        // dropped.
        let mut worse = mk(0.0);
        worse.corner.l_min += 0.1;
        let pts = vec![mk(0.0), worse];
        assert_eq!(nondominated_filter(pts, 1e-9).len(), 1);

        // Time sharing: a synthetic middle point strictly inside the
        // segment between two corners is pruned.
        let a = mk(0.0);
        let b = mk(0.4);
        let mut mid = mk(0.2);
        mid.corner.i_yu = 0.5 * (a.corner.i_yu + b.corner.i_yu);
        mid.corner.i_xv_given_y =
            0.5 * (a.corner.i_xv_given_y + b.corner.i_xv_given_y) + 0.05;
        mid.corner.l_min = 0.5 * (a.corner.l_min + b.corner.l_min) + 0.05;
        mid.corner.key_max = 0.5 * (a.corner.key_max + b.corner.key_max) - 0.05;
        let kept = prune_time_sharing_dominated(vec![a, mid, b], 1e-9);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn frontier_csv_shape() {
        let src = erasure_src();
        let aux = AuxChannels::bsc_with_constant_u(0.1).unwrap();
        let corner = evaluate_corner(&src, &aux).unwrap();
        let pts = vec![FrontierPoint {
            aux,
            corner,
            score: 0.0,
        }];
        let csv = frontier_csv(&pts, Some(&[0.1]));
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("alpha_or_hash,r_i,r_c_min,l_min,key_max,pvx_0"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("0.100000000000,"));
        let hashed = frontier_csv(
            &[],
            None,
        );
        assert!(hashed.starts_with("alpha_or_hash"));
    }
}
