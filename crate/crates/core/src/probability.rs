//! Exact finite discrete probability.
//!
//! Dense n-variate joint tables with named axes, marginalization,
//! conditioning, channel composition and information measures in bits
//! (log base 2). All values are immutable after construction and every
//! operation is a pure function, so sharing across threads needs no
//! coordination.
//!
//! Conventions: `0 * log 0 = 0`, and conditioning on a zero-probability
//! event contributes zero mass. Tables are validated to sum to one within
//! [`NORMALIZATION_TOL`] at construction; nothing renormalizes silently.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when checking that a mass vector sums to one.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Default cap on the number of cells a product extension may produce.
pub const DEFAULT_CELL_CAP: usize = 1 << 26;

#[derive(Debug, Error)]
pub enum ProbError {
    #[error("mass vector must be non-empty")]
    EmptySupport,
    #[error("negative mass {value} at index {index}")]
    NegativeMass { index: usize, value: f64 },
    #[error("mass sums to {sum}, expected 1 within {NORMALIZATION_TOL}")]
    NotNormalized { sum: f64 },
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("channel rows must share one output size")]
    RaggedChannel,
    #[error("channel has no rows")]
    EmptyChannel,
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("duplicate axis name `{0}`")]
    DuplicateAxis(String),
    #[error("axis groups overlap on `{0}`")]
    OverlappingGroups(String),
    #[error("axis group must be non-empty")]
    EmptyGroup,
    #[error("mass length {got} does not match axis product {expected}")]
    MassLengthMismatch { got: usize, expected: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("product extension needs {needed} cells, cap is {cap}")]
    CellCapExceeded { needed: u128, cap: usize },
    #[error("sequence length must be at least 1")]
    ZeroLength,
}

/// Neumaier compensated summation. Joint tables can hold tens of millions
/// of cells, where naive summation loses enough precision to trip the
/// 1e-12 normalization check.
pub fn stable_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn check_mass(mass: &[f64]) -> Result<(), ProbError> {
    if mass.is_empty() {
        return Err(ProbError::EmptySupport);
    }
    for (i, &p) in mass.iter().enumerate() {
        if p < 0.0 || !p.is_finite() {
            return Err(ProbError::NegativeMass { index: i, value: p });
        }
    }
    let sum = stable_sum(mass.iter().copied());
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(ProbError::NotNormalized { sum });
    }
    Ok(())
}

/// A probability mass function over `{0, .., support_size-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPmf", into = "RawPmf")]
pub struct Pmf {
    mass: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawPmf {
    mass: Vec<f64>,
}

impl TryFrom<RawPmf> for Pmf {
    type Error = ProbError;
    fn try_from(raw: RawPmf) -> Result<Self, Self::Error> {
        Pmf::new(raw.mass)
    }
}

impl From<Pmf> for RawPmf {
    fn from(p: Pmf) -> Self {
        RawPmf { mass: p.mass }
    }
}

impl Pmf {
    pub fn new(mass: Vec<f64>) -> Result<Self, ProbError> {
        check_mass(&mass)?;
        Ok(Self { mass })
    }

    pub fn uniform(support_size: usize) -> Self {
        assert!(support_size >= 1);
        Self {
            mass: vec![1.0 / support_size as f64; support_size],
        }
    }

    pub fn point_mass(support_size: usize, at: usize) -> Self {
        assert!(at < support_size);
        let mut mass = vec![0.0; support_size];
        mass[at] = 1.0;
        Self { mass }
    }

    pub fn support_size(&self) -> usize {
        self.mass.len()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.mass[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.mass
    }

    /// Explicitly renormalizes (never done implicitly by any operation).
    pub fn renormalized(mut self) -> Self {
        let sum = stable_sum(self.mass.iter().copied());
        assert!(sum > 0.0, "cannot renormalize zero mass");
        for p in &mut self.mass {
            *p /= sum;
        }
        self
    }
}

/// Shannon entropy of `p` in bits, with `0 log 0 = 0`.
pub fn entropy(p: &Pmf) -> f64 {
    neg_sum_p_log2_p(p.mass.iter().copied())
}

fn neg_sum_p_log2_p(mass: impl Iterator<Item = f64>) -> f64 {
    -stable_sum(mass.filter(|&p| p > 0.0).map(|p| p * p.log2()))
}

/// Binary entropy `h(a) = -a log2 a - (1-a) log2(1-a)` in bits.
pub fn binary_entropy(a: f64) -> Result<f64, ProbError> {
    if !(0.0..=1.0).contains(&a) {
        return Err(ProbError::ProbabilityOutOfRange(a));
    }
    Ok(neg_sum_p_log2_p([a, 1.0 - a].into_iter()))
}

/// A discrete memoryless channel: one output [`Pmf`] per input symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannel", into = "RawChannel")]
pub struct Channel {
    rows: Vec<Pmf>,
    output_size: usize,
}

#[derive(Serialize, Deserialize)]
struct RawChannel {
    rows: Vec<Vec<f64>>,
}

impl TryFrom<RawChannel> for Channel {
    type Error = ProbError;
    fn try_from(raw: RawChannel) -> Result<Self, Self::Error> {
        let rows = raw
            .rows
            .into_iter()
            .map(Pmf::new)
            .collect::<Result<Vec<_>, _>>()?;
        Channel::new(rows)
    }
}

impl From<Channel> for RawChannel {
    fn from(c: Channel) -> Self {
        RawChannel {
            rows: c.rows.into_iter().map(|r| r.mass).collect(),
        }
    }
}

impl Channel {
    pub fn new(rows: Vec<Pmf>) -> Result<Self, ProbError> {
        if rows.is_empty() {
            return Err(ProbError::EmptyChannel);
        }
        let output_size = rows[0].support_size();
        if rows.iter().any(|r| r.support_size() != output_size) {
            return Err(ProbError::RaggedChannel);
        }
        Ok(Self { rows, output_size })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, ProbError> {
        Self::new(rows.into_iter().map(Pmf::new).collect::<Result<_, _>>()?)
    }

    /// Identity channel on `size` symbols.
    pub fn identity(size: usize) -> Self {
        let rows = (0..size).map(|i| Pmf::point_mass(size, i)).collect();
        Self {
            rows,
            output_size: size,
        }
    }

    /// Channel that maps every input to the single output symbol 0.
    pub fn constant(input_size: usize) -> Self {
        Self {
            rows: vec![Pmf::point_mass(1, 0); input_size],
            output_size: 1,
        }
    }

    /// Binary symmetric channel with crossover probability `alpha`.
    pub fn bsc(alpha: f64) -> Result<Self, ProbError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(ProbError::ProbabilityOutOfRange(alpha));
        }
        Self::from_rows(vec![vec![1.0 - alpha, alpha], vec![alpha, 1.0 - alpha]])
    }

    /// Erasure channel: input symbol `i` of `input_size` passes through
    /// unchanged with probability `1-p` and becomes the erasure symbol
    /// (index `input_size`) with probability `p`.
    pub fn erasure(input_size: usize, p: f64) -> Result<Self, ProbError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(ProbError::ProbabilityOutOfRange(p));
        }
        let out = input_size + 1;
        let rows = (0..input_size)
            .map(|i| {
                let mut mass = vec![0.0; out];
                mass[i] = 1.0 - p;
                mass[input_size] = p;
                Pmf::new(mass)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(rows)
    }

    pub fn input_size(&self) -> usize {
        self.rows.len()
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn row(&self, input: usize) -> &Pmf {
        &self.rows[input]
    }

    pub fn prob(&self, output: usize, input: usize) -> f64 {
        self.rows[input].get(output)
    }

    /// Output distribution for input distribution `px`.
    pub fn push_forward(&self, px: &Pmf) -> Result<Pmf, ProbError> {
        if px.support_size() != self.input_size() {
            return Err(ProbError::DimensionMismatch(format!(
                "input pmf size {} vs channel input {}",
                px.support_size(),
                self.input_size()
            )));
        }
        let mut mass = vec![0.0; self.output_size];
        for (x, row) in self.rows.iter().enumerate() {
            let p = px.get(x);
            for (y, &q) in row.as_slice().iter().enumerate() {
                mass[y] += p * q;
            }
        }
        Pmf::new(mass)
    }

    /// Composition `other ∘ self`: feed this channel's output into `other`.
    pub fn compose(&self, other: &Channel) -> Result<Channel, ProbError> {
        if self.output_size != other.input_size() {
            return Err(ProbError::DimensionMismatch(format!(
                "output {} vs next input {}",
                self.output_size,
                other.input_size()
            )));
        }
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut mass = vec![0.0; other.output_size()];
                for (mid, &p) in row.as_slice().iter().enumerate() {
                    for (out, &q) in other.row(mid).as_slice().iter().enumerate() {
                        mass[out] += p * q;
                    }
                }
                Pmf::new(mass)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Channel::new(rows)
    }
}

/// One named axis of a joint table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub size: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        Self {
            name: name.into(),
            size,
        }
    }
}

/// Dense joint distribution over a product alphabet with named axes.
/// Mass is stored row-major with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJoint", into = "RawJoint")]
pub struct JointPmf {
    axes: Vec<Axis>,
    mass: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawJoint {
    axes: Vec<Axis>,
    mass: Vec<f64>,
}

impl TryFrom<RawJoint> for JointPmf {
    type Error = ProbError;
    fn try_from(raw: RawJoint) -> Result<Self, Self::Error> {
        JointPmf::new(raw.axes, raw.mass)
    }
}

impl From<JointPmf> for RawJoint {
    fn from(j: JointPmf) -> Self {
        RawJoint {
            axes: j.axes,
            mass: j.mass,
        }
    }
}

impl JointPmf {
    pub fn new(axes: Vec<Axis>, mass: Vec<f64>) -> Result<Self, ProbError> {
        if axes.is_empty() || axes.iter().any(|a| a.size == 0) {
            return Err(ProbError::EmptySupport);
        }
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].iter().any(|b| b.name == a.name) {
                return Err(ProbError::DuplicateAxis(a.name.clone()));
            }
        }
        let expected: usize = axes.iter().map(|a| a.size).product();
        if mass.len() != expected {
            return Err(ProbError::MassLengthMismatch {
                got: mass.len(),
                expected,
            });
        }
        check_mass(&mass)?;
        Ok(Self { axes, mass })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn num_cells(&self) -> usize {
        self.mass.len()
    }

    pub fn axis_index(&self, name: &str) -> Result<usize, ProbError> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| ProbError::UnknownAxis(name.to_string()))
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.axes.len()];
        for i in (0..self.axes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.axes[i + 1].size;
        }
        strides
    }

    pub fn prob(&self, idx: &[usize]) -> f64 {
        assert_eq!(idx.len(), self.axes.len());
        let strides = self.strides();
        let mut flat = 0;
        for (i, &v) in idx.iter().enumerate() {
            assert!(v < self.axes[i].size);
            flat += v * strides[i];
        }
        self.mass[flat]
    }

    /// Visits every cell as `(multi_index, mass)`.
    pub fn for_each_cell(&self, mut f: impl FnMut(&[usize], f64)) {
        let k = self.axes.len();
        let mut idx = vec![0usize; k];
        for &p in &self.mass {
            f(&idx, p);
            for d in (0..k).rev() {
                idx[d] += 1;
                if idx[d] < self.axes[d].size {
                    break;
                }
                idx[d] = 0;
            }
        }
    }

    fn resolve_group(&self, group: &[&str]) -> Result<Vec<usize>, ProbError> {
        group.iter().map(|n| self.axis_index(n)).collect()
    }

    /// Sums out every axis not listed in `keep`; the output axis order is
    /// the order of `keep`.
    pub fn marginalize(&self, keep: &[&str]) -> Result<JointPmf, ProbError> {
        let keep_idx = self.resolve_group(keep)?;
        for (i, &a) in keep_idx.iter().enumerate() {
            if keep_idx[..i].contains(&a) {
                return Err(ProbError::DuplicateAxis(keep[i].to_string()));
            }
        }
        if keep_idx.is_empty() {
            return Err(ProbError::EmptyGroup);
        }
        let out_axes: Vec<Axis> = keep_idx.iter().map(|&i| self.axes[i].clone()).collect();
        let out_len: usize = out_axes.iter().map(|a| a.size).product();
        let mut out_strides = vec![1usize; out_axes.len()];
        for i in (0..out_axes.len().saturating_sub(1)).rev() {
            out_strides[i] = out_strides[i + 1] * out_axes[i + 1].size;
        }
        let mut out = vec![0.0f64; out_len];
        self.for_each_cell(|idx, p| {
            let mut flat = 0;
            for (pos, &ax) in keep_idx.iter().enumerate() {
                flat += idx[ax] * out_strides[pos];
            }
            out[flat] += p;
        });
        JointPmf::new(out_axes, out)
    }

    /// Entropy in bits of the marginal over `group`.
    pub fn group_entropy(&self, group: &[&str]) -> Result<f64, ProbError> {
        if group.is_empty() {
            return Ok(0.0);
        }
        let marg = self.marginalize(group)?;
        Ok(neg_sum_p_log2_p(marg.mass.iter().copied()))
    }

    /// Conditional entropy `H(target | given)` computed by explicit
    /// conditioning: sum over assignments of `given` of the entropy of the
    /// renormalized slice. Zero-probability conditions contribute nothing.
    pub fn conditional_entropy(&self, target: &[&str], given: &[&str]) -> Result<f64, ProbError> {
        check_disjoint(&[target, given])?;
        if target.is_empty() {
            return Ok(0.0);
        }
        if given.is_empty() {
            return self.group_entropy(target);
        }
        let mut names: Vec<&str> = given.to_vec();
        names.extend_from_slice(target);
        let joint = self.marginalize(&names)?;
        let g_len: usize = given
            .iter()
            .map(|n| joint.axes[joint.axis_index(n).unwrap()].size)
            .product();
        let t_len = joint.mass.len() / g_len;
        // After marginalizing with `given` first, the table is laid out as
        // g_len contiguous blocks of t_len entries.
        let mut acc = 0.0;
        for g in 0..g_len {
            let block = &joint.mass[g * t_len..(g + 1) * t_len];
            let pg = stable_sum(block.iter().copied());
            if pg > 0.0 {
                acc += pg * neg_sum_p_log2_p(block.iter().map(|&p| p / pg));
            }
        }
        Ok(acc)
    }
}

fn check_disjoint(groups: &[&[&str]]) -> Result<(), ProbError> {
    for (i, g) in groups.iter().enumerate() {
        for name in g.iter() {
            for other in &groups[..i] {
                if other.contains(name) {
                    return Err(ProbError::OverlappingGroups(name.to_string()));
                }
            }
        }
    }
    Ok(())
}

/// Mutual information `I(A; B)` in bits, computed as `H(A)+H(B)-H(A,B)`.
pub fn mutual_information(
    joint: &JointPmf,
    group_a: &[&str],
    group_b: &[&str],
) -> Result<f64, ProbError> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(ProbError::EmptyGroup);
    }
    check_disjoint(&[group_a, group_b])?;
    let h_a = joint.group_entropy(group_a)?;
    let h_b = joint.group_entropy(group_b)?;
    let mut ab: Vec<&str> = group_a.to_vec();
    ab.extend_from_slice(group_b);
    let h_ab = joint.group_entropy(&ab)?;
    Ok(h_a + h_b - h_ab)
}

/// Conditional mutual information `I(A; B | C)` in bits, computed as
/// `H(A,C)+H(B,C)-H(A,B,C)-H(C)`. An empty `A` or `B` yields 0; an empty
/// `C` reduces to plain mutual information.
pub fn conditional_mutual_information(
    joint: &JointPmf,
    group_a: &[&str],
    group_b: &[&str],
    group_c: &[&str],
) -> Result<f64, ProbError> {
    check_disjoint(&[group_a, group_b, group_c])?;
    if group_a.is_empty() || group_b.is_empty() {
        return Ok(0.0);
    }
    fn join<'a>(g1: &[&'a str], g2: &[&'a str]) -> Vec<&'a str> {
        let mut v: Vec<&str> = g1.to_vec();
        v.extend_from_slice(g2);
        v
    }
    let h_ac = joint.group_entropy(&join(group_a, group_c))?;
    let h_bc = joint.group_entropy(&join(group_b, group_c))?;
    let h_abc = joint.group_entropy(&join(&join(group_a, group_b), group_c))?;
    let h_c = joint.group_entropy(group_c)?;
    Ok(h_ac + h_bc - h_abc - h_c)
}

/// Composes a source joint over `(x, y, z)` with auxiliary channels
/// `P(v|x)` and `P(u|v)` into the five-variate joint over `(u, v, x, y, z)`
/// with `mass(u,v,x,y,z) = P(x,y,z) P(v|x) P(u|v)`. The output satisfies
/// the chain `U - V - X - (Y, Z)` by construction.
pub fn compose_chain(
    source: &JointPmf,
    pvx: &Channel,
    puv: &Channel,
) -> Result<JointPmf, ProbError> {
    let xi = source.axis_index("x")?;
    let yi = source.axis_index("y")?;
    let zi = source.axis_index("z")?;
    if source.axes().len() != 3 {
        return Err(ProbError::DimensionMismatch(
            "source joint must have exactly axes (x, y, z)".into(),
        ));
    }
    let x_size = source.axes()[xi].size;
    let y_size = source.axes()[yi].size;
    let z_size = source.axes()[zi].size;
    if pvx.input_size() != x_size {
        return Err(ProbError::DimensionMismatch(format!(
            "P(v|x) input {} vs |X| {}",
            pvx.input_size(),
            x_size
        )));
    }
    if puv.input_size() != pvx.output_size() {
        return Err(ProbError::DimensionMismatch(format!(
            "P(u|v) input {} vs |V| {}",
            puv.input_size(),
            pvx.output_size()
        )));
    }
    let v_size = pvx.output_size();
    let u_size = puv.output_size();
    let axes = vec![
        Axis::new("u", u_size),
        Axis::new("v", v_size),
        Axis::new("x", x_size),
        Axis::new("y", y_size),
        Axis::new("z", z_size),
    ];
    let mut mass = vec![0.0f64; u_size * v_size * x_size * y_size * z_size];
    let stride_v = x_size * y_size * z_size;
    let stride_u = v_size * stride_v;
    source.for_each_cell(|idx, p| {
        if p == 0.0 {
            return;
        }
        let (x, y, z) = (idx[xi], idx[yi], idx[zi]);
        let base = (x * y_size + y) * z_size + z;
        for v in 0..v_size {
            let pv = pvx.prob(v, x);
            if pv == 0.0 {
                continue;
            }
            for u in 0..u_size {
                let pu = puv.prob(u, v);
                if pu > 0.0 {
                    mass[u * stride_u + v * stride_v + base] += p * pv * pu;
                }
            }
        }
    });
    JointPmf::new(axes, mass)
}

/// The `n`-fold i.i.d. extension: each axis becomes sequence-valued with
/// alphabet `size^n`, sequences encoded base-`size` with position 0 most
/// significant, and `mass(a^n, b^n, ..) = prod_t mass(a_t, b_t, ..)`.
pub fn product_extension(
    joint: &JointPmf,
    n: usize,
    cell_cap: usize,
) -> Result<JointPmf, ProbError> {
    if n == 0 {
        return Err(ProbError::ZeroLength);
    }
    let mut needed: u128 = 1;
    for a in joint.axes() {
        let axis_cells = (a.size as u128).checked_pow(n as u32);
        needed = axis_cells
            .and_then(|c| needed.checked_mul(c))
            .unwrap_or(u128::MAX);
    }
    if needed > cell_cap as u128 {
        return Err(ProbError::CellCapExceeded {
            needed,
            cap: cell_cap,
        });
    }
    if n == 1 {
        return Ok(joint.clone());
    }
    let k = joint.axes().len();
    let base_sizes: Vec<usize> = joint.axes().iter().map(|a| a.size).collect();
    let out_axes: Vec<Axis> = joint
        .axes()
        .iter()
        .map(|a| Axis::new(a.name.clone(), a.size.pow(n as u32)))
        .collect();
    let out_len = needed as usize;
    let base_strides = {
        let mut s = vec![1usize; k];
        for i in (0..k - 1).rev() {
            s[i] = s[i + 1] * base_sizes[i + 1];
        }
        s
    };
    let mut out = vec![0.0f64; out_len];
    let mut seq_idx = vec![0usize; k];
    for (flat, slot) in out.iter_mut().enumerate() {
        // Decode the flat output index into one sequence index per axis.
        let mut rem = flat;
        for i in (0..k).rev() {
            let cells = base_sizes[i].pow(n as u32);
            seq_idx[i] = rem % cells;
            rem /= cells;
        }
        let mut p = 1.0f64;
        let mut digits = seq_idx.clone();
        for _t in 0..n {
            let mut cell = 0usize;
            for i in 0..k {
                let pow = base_sizes[i].pow((n - 1 - _t) as u32);
                let d = digits[i] / pow;
                digits[i] -= d * pow;
                cell += d * base_strides[i];
            }
            p *= joint.mass()[cell];
            if p == 0.0 {
                break;
            }
        }
        *slot = p;
    }
    JointPmf::new(out_axes, out)
}

/// Seeded random distributions for property suites: exponential weights,
/// normalized. Used by the identity checks and tests; not part of any
/// inference path.
pub fn random_pmf<R: rand::Rng>(rng: &mut R, support_size: usize) -> Pmf {
    let mut mass: Vec<f64> = (0..support_size)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let sum: f64 = mass.iter().sum();
    for p in &mut mass {
        *p /= sum;
    }
    // Exact renormalization so the constructor's 1e-12 check always holds.
    let corr = stable_sum(mass.iter().copied());
    for p in &mut mass {
        *p /= corr;
    }
    Pmf::new(mass).expect("normalized by construction")
}

pub fn random_channel<R: rand::Rng>(rng: &mut R, input: usize, output: usize) -> Channel {
    Channel::new((0..input).map(|_| random_pmf(rng, output)).collect())
        .expect("rows share output size")
}

pub fn random_joint<R: rand::Rng>(rng: &mut R, axes: Vec<Axis>) -> JointPmf {
    let len: usize = axes.iter().map(|a| a.size).product();
    let pmf = random_pmf(rng, len);
    JointPmf::new(axes, pmf.as_slice().to_vec()).expect("normalized by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-12;

    fn erasure_cascade_joint(p: f64, q: f64) -> JointPmf {
        crate::region::SourceModel::erasure_cascade(p, q)
            .unwrap()
            .joint()
    }

    #[test]
    fn entropy_matches_known_values() {
        assert!((entropy(&Pmf::new(vec![0.5, 0.5]).unwrap()) - 1.0).abs() < TOL);
        assert!(entropy(&Pmf::new(vec![1.0, 0.0]).unwrap()).abs() < TOL);
        // Frozen from direct evaluation of -sum p log2 p.
        assert!((entropy(&Pmf::new(vec![0.9, 0.1]).unwrap()) - 0.4689955935892812).abs() < 1e-12);
    }

    #[test]
    fn binary_entropy_matches_entropy() {
        assert!((binary_entropy(0.5).unwrap() - 1.0).abs() < TOL);
        assert!(binary_entropy(0.0).unwrap().abs() < TOL);
        assert!((binary_entropy(0.1).unwrap() - 0.4689955935892812).abs() < 1e-12);
        assert!(binary_entropy(1.3).is_err());
        assert!(binary_entropy(-0.1).is_err());
    }

    #[test]
    fn pmf_validation_rejects_bad_mass() {
        assert!(matches!(
            Pmf::new(vec![0.5, -0.5, 1.0]),
            Err(ProbError::NegativeMass { .. })
        ));
        assert!(matches!(
            Pmf::new(vec![0.5, 0.6]),
            Err(ProbError::NotNormalized { .. })
        ));
        assert!(matches!(Pmf::new(vec![]), Err(ProbError::EmptySupport)));
    }

    #[test]
    fn marginalize_independent_and_correlated_pairs() {
        let indep = JointPmf::new(
            vec![Axis::new("a", 2), Axis::new("b", 2)],
            vec![0.25, 0.25, 0.25, 0.25],
        )
        .unwrap();
        let ma = indep.marginalize(&["a"]).unwrap();
        assert_eq!(ma.mass(), &[0.5, 0.5]);

        let corr = JointPmf::new(
            vec![Axis::new("a", 2), Axis::new("b", 2)],
            vec![0.5, 0.0, 0.0, 0.5],
        )
        .unwrap();
        let mb = corr.marginalize(&["b"]).unwrap();
        assert_eq!(mb.mass(), &[0.5, 0.5]);
        assert!(corr.marginalize(&["nope"]).is_err());
    }

    #[test]
    fn marginalize_erasure_cascade_z() {
        // Hand-summed cascade probabilities at (p, q) = (0.3, 0.5):
        // P(Z = x) = 0.5 (1-p)(1-q) = 0.175 for each symbol,
        // P(Z = e) = p + (1-p) q = 0.65.
        let j = erasure_cascade_joint(0.3, 0.5);
        let mz = j.marginalize(&["z"]).unwrap();
        assert!((mz.mass()[0] - 0.175).abs() < 1e-12);
        assert!((mz.mass()[1] - 0.175).abs() < 1e-12);
        assert!((mz.mass()[2] - 0.65).abs() < 1e-12);
        // Brute-force cross-check: sum cells directly.
        let mut pz = [0.0f64; 3];
        j.for_each_cell(|idx, p| pz[idx[2]] += p);
        for (a, b) in pz.iter().zip(mz.mass()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn marginalize_preserves_keep_order() {
        let j = erasure_cascade_joint(0.3, 0.5);
        let zy = j.marginalize(&["z", "y"]).unwrap();
        assert_eq!(zy.axes()[0].name, "z");
        assert_eq!(zy.axes()[1].name, "y");
        let yz = j.marginalize(&["y", "z"]).unwrap();
        assert!((zy.prob(&[2, 0]) - yz.prob(&[0, 2])).abs() < 1e-15);
    }

    #[test]
    fn mutual_information_known_cases() {
        let indep = JointPmf::new(
            vec![Axis::new("a", 2), Axis::new("b", 2)],
            vec![0.25, 0.25, 0.25, 0.25],
        )
        .unwrap();
        assert!(mutual_information(&indep, &["a"], &["b"]).unwrap().abs() < 1e-12);

        let ident = JointPmf::new(
            vec![Axis::new("a", 2), Axis::new("b", 2)],
            vec![0.5, 0.0, 0.0, 0.5],
        )
        .unwrap();
        assert!((mutual_information(&ident, &["a"], &["b"]).unwrap() - 1.0).abs() < 1e-12);

        // Erasure of a uniform bit: I(X; Y) = 1 - p.
        let j = erasure_cascade_joint(0.3, 0.5);
        assert!((mutual_information(&j, &["x"], &["y"]).unwrap() - 0.7).abs() < 1e-9);
        assert!(matches!(
            mutual_information(&j, &["x"], &["x"]),
            Err(ProbError::OverlappingGroups(_))
        ));
    }

    #[test]
    fn conditional_mutual_information_known_cases() {
        // Markov A - C - B: I(A; B | C) = 0.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pc = random_pmf(&mut rng, 3);
        let ca = random_channel(&mut rng, 3, 2);
        let cb = random_channel(&mut rng, 3, 2);
        let mut mass = vec![0.0; 3 * 2 * 2];
        for c in 0..3 {
            for a in 0..2 {
                for b in 0..2 {
                    mass[(c * 2 + a) * 2 + b] = pc.get(c) * ca.prob(a, c) * cb.prob(b, c);
                }
            }
        }
        let j = JointPmf::new(
            vec![Axis::new("c", 3), Axis::new("a", 2), Axis::new("b", 2)],
            mass,
        )
        .unwrap();
        let cmi = conditional_mutual_information(&j, &["a"], &["b"], &["c"]).unwrap();
        assert!(cmi.abs() < 1e-10);

        // Constant C degenerates to plain mutual information.
        let j2 = erasure_cascade_joint(0.3, 0.5);
        let mi = mutual_information(&j2, &["x"], &["y"]).unwrap();
        let with_const = {
            let mut axes = j2.axes().to_vec();
            axes.push(Axis::new("t", 1));
            JointPmf::new(axes, j2.mass().to_vec()).unwrap()
        };
        let cmi2 = conditional_mutual_information(&with_const, &["x"], &["y"], &["t"]).unwrap();
        assert!((cmi2 - mi).abs() < 1e-12);

        // Erasure cascade: I(X; Y | Z) = I(X; Y) - I(X; Z) = 0.35.
        let v = conditional_mutual_information(&j2, &["x"], &["y"], &["z"]).unwrap();
        assert!((v - 0.35).abs() < 1e-9);

        // Empty side groups contribute zero.
        assert_eq!(
            conditional_mutual_information(&j2, &[], &["y"], &["z"]).unwrap(),
            0.0
        );
    }

    #[test]
    fn compose_chain_identity_and_independence() {
        let j = erasure_cascade_joint(0.3, 0.5);
        let ident = compose_chain(&j, &Channel::identity(2), &Channel::identity(2)).unwrap();
        // U = V = X deterministically on the diagonal.
        ident.for_each_cell(|idx, p| {
            if p > 0.0 {
                assert_eq!(idx[0], idx[2]);
                assert_eq!(idx[1], idx[2]);
            }
        });

        let flat = Channel::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let noise = compose_chain(&j, &flat, &Channel::identity(2)).unwrap();
        assert!(mutual_information(&noise, &["x"], &["v"]).unwrap().abs() < 1e-10);
    }

    #[test]
    fn compose_chain_bsc_matches_closed_form() {
        // U constant, V = BSC(0.1)(X) on the (0.3, 0.5) cascade:
        // I(V;Y|U) - I(V;Z|U) = q (1-p) (1 - h(0.1)).
        let j = erasure_cascade_joint(0.3, 0.5);
        let composed = compose_chain(&j, &Channel::bsc(0.1).unwrap(), &Channel::constant(2)).unwrap();
        let key = conditional_mutual_information(&composed, &["v"], &["y"], &["u"]).unwrap()
            - conditional_mutual_information(&composed, &["v"], &["z"], &["u"]).unwrap();
        assert!((key - 0.18585154224375158).abs() < 1e-9);
    }

    #[test]
    fn compose_chain_markov_structure_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let src = random_joint(
                &mut rng,
                vec![Axis::new("x", 2), Axis::new("y", 3), Axis::new("z", 2)],
            );
            let pvx = random_channel(&mut rng, 2, 3);
            let puv = random_channel(&mut rng, 3, 2);
            let c = compose_chain(&src, &pvx, &puv).unwrap();
            let m1 = conditional_mutual_information(&c, &["u"], &["x", "y", "z"], &["v"]).unwrap();
            let m2 = conditional_mutual_information(&c, &["y", "z"], &["u", "v"], &["x"]).unwrap();
            assert!(m1.abs() < 1e-10, "I(U;XYZ|V) = {m1}");
            assert!(m2.abs() < 1e-10, "I(YZ;UV|X) = {m2}");
        }
    }

    #[test]
    fn product_extension_small_cases() {
        let j = erasure_cascade_joint(0.3, 0.5);
        let same = product_extension(&j, 1, DEFAULT_CELL_CAP).unwrap();
        assert_eq!(same, j);

        let bern = JointPmf::new(vec![Axis::new("x", 2)], vec![0.5, 0.5]).unwrap();
        let pairs = product_extension(&bern, 2, DEFAULT_CELL_CAP).unwrap();
        assert_eq!(pairs.num_cells(), 4);
        for &p in pairs.mass() {
            assert!((p - 0.25).abs() < 1e-15);
        }

        // n = 3 erasure: P(y^3 = eee, x^3) = (1/8) p^3 for every x^3.
        let xy = j.marginalize(&["x", "y"]).unwrap();
        let ext = product_extension(&xy, 3, DEFAULT_CELL_CAP).unwrap();
        let eee = 2 * 9 + 2 * 3 + 2;
        for x in 0..8 {
            assert!((ext.prob(&[x, eee]) - 0.125 * 0.027).abs() < 1e-12);
        }

        assert!(matches!(
            product_extension(&j, 9, 1000),
            Err(ProbError::CellCapExceeded { .. })
        ));
        assert!(matches!(
            product_extension(&j, 0, 1000),
            Err(ProbError::ZeroLength)
        ));
    }

    #[test]
    fn chain_rule_on_random_joints() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let k = 3 + (rng.random::<u32>() % 2) as usize;
            let axes: Vec<Axis> = (0..k)
                .map(|i| Axis::new(format!("a{i}"), 2 + (rng.random::<u32>() % 3) as usize))
                .collect();
            let j = random_joint(&mut rng, axes);
            let split = 1 + (rng.random::<u32>() as usize % (k - 1));
            let names: Vec<String> = j.axes().iter().map(|a| a.name.clone()).collect();
            let a: Vec<&str> = names[..split].iter().map(|s| s.as_str()).collect();
            let b: Vec<&str> = names[split..].iter().map(|s| s.as_str()).collect();
            let all: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
            let h_ab = j.group_entropy(&all).unwrap();
            let h_a = j.group_entropy(&a).unwrap();
            let h_b_given_a = j.conditional_entropy(&b, &a).unwrap();
            assert!(
                (h_ab - h_a - h_b_given_a).abs() < 1e-10,
                "chain rule violated: {h_ab} vs {h_a} + {h_b_given_a}"
            );
        }
    }

    #[test]
    fn serde_round_trips() {
        let p = Pmf::new(vec![0.25, 0.75]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<Pmf>(&s).unwrap(), p);

        let c = Channel::bsc(0.1).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<Channel>(&s).unwrap(), c);

        let j = erasure_cascade_joint(0.3, 0.5);
        let s = serde_json::to_string(&j).unwrap();
        assert_eq!(serde_json::from_str::<JointPmf>(&s).unwrap(), j);

        // Deserialization re-validates.
        assert!(serde_json::from_str::<Pmf>(r#"{"mass":[0.5,0.6]}"#).is_err());
    }
}
