//! Numeric information-identity suites over seeded random joints.
//!
//! These are the on-demand self-checks behind the `check` command and the
//! acceptance tests: chain rule, mutual-information nonnegativity, data
//! processing, the Csiszar sum identity, and the Markov structure of
//! composed chains. Each runner is deterministic in its seed and returns
//! the worst violation it saw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::probability::{
    compose_chain, conditional_mutual_information, mutual_information, random_channel,
    random_joint, random_pmf, Axis, JointPmf,
};

/// Worst-case violations observed by one run of the suite, in bits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub seed: u64,
    pub joints_per_check: usize,
    pub chain_rule_max_abs: f64,
    pub mi_min: f64,
    pub cmi_min: f64,
    pub data_processing_max_excess: f64,
    pub csiszar_sum_max_abs: f64,
    pub compose_markov_max: f64,
}

impl IdentityReport {
    /// Names of the checks that exceed their tolerance, or empty if all pass.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !(self.chain_rule_max_abs <= 1e-9) {
            out.push("chain_rule");
        }
        if !(self.mi_min >= -1e-9) {
            out.push("mi_nonnegativity");
        }
        if !(self.cmi_min >= -1e-9) {
            out.push("cmi_nonnegativity");
        }
        if !(self.data_processing_max_excess <= 1e-9) {
            out.push("data_processing");
        }
        if !(self.csiszar_sum_max_abs <= 1e-9) {
            out.push("csiszar_sum");
        }
        if !(self.compose_markov_max <= 1e-9) {
            out.push("compose_markov");
        }
        out
    }

    pub fn all_pass(&self) -> bool {
        self.failures().is_empty()
    }
}

fn random_axes(rng: &mut ChaCha8Rng) -> Vec<Axis> {
    let k = 3 + (rng.random::<u32>() % 2) as usize;
    (0..k)
        .map(|i| Axis::new(format!("a{i}"), 2 + (rng.random::<u32>() % 3) as usize))
        .collect()
}

fn split_names(names: &[String], at: usize) -> (Vec<&str>, Vec<&str>) {
    let a = names[..at].iter().map(|s| s.as_str()).collect();
    let b = names[at..].iter().map(|s| s.as_str()).collect();
    (a, b)
}

pub fn chain_rule_max_abs(seed: u64, joints: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..joints {
        let axes = random_axes(&mut rng);
        let j = random_joint(&mut rng, axes);
        let names: Vec<String> = j.axes().iter().map(|a| a.name.clone()).collect();
        let at = 1 + (rng.random::<u32>() as usize % (names.len() - 1));
        let (a, b) = split_names(&names, at);
        let all: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let lhs = j.group_entropy(&all).unwrap();
        let rhs = j.group_entropy(&a).unwrap() + j.conditional_entropy(&b, &a).unwrap();
        worst = worst.max((lhs - rhs).abs());
    }
    worst
}

/// Returns `(min MI, min CMI)` over random joints and random disjoint groups.
pub fn information_min(seed: u64, joints: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_mi = f64::INFINITY;
    let mut min_cmi = f64::INFINITY;
    for _ in 0..joints {
        let axes = random_axes(&mut rng);
        let j = random_joint(&mut rng, axes);
        let names: Vec<String> = j.axes().iter().map(|a| a.name.clone()).collect();
        let at = 1 + (rng.random::<u32>() as usize % (names.len() - 1));
        let (a, b) = split_names(&names, at);
        min_mi = min_mi.min(mutual_information(&j, &a, &b).unwrap());
        if b.len() >= 2 {
            let (b1, c) = (vec![b[0]], b[1..].to_vec());
            min_cmi = min_cmi.min(conditional_mutual_information(&j, &a, &b1, &c).unwrap());
        }
    }
    (min_mi, min_cmi)
}

/// Max of `I(U;Y) - I(V;Y)` over random composed chains `U - V - X - Y`;
/// data processing says this never exceeds zero.
pub fn data_processing_max_excess(seed: u64, joints: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..joints {
        let x_size = 2 + (rng.random::<u32>() % 2) as usize;
        let y_size = 2 + (rng.random::<u32>() % 2) as usize;
        let px = random_pmf(&mut rng, x_size);
        let pyx = random_channel(&mut rng, x_size, y_size);
        let mut mass = vec![0.0; x_size * y_size];
        for x in 0..x_size {
            for y in 0..y_size {
                mass[x * y_size + y] = px.get(x) * pyx.prob(y, x);
            }
        }
        // Degenerate z axis keeps the source in (x, y, z) form.
        let src = JointPmf::new(
            vec![
                Axis::new("x", x_size),
                Axis::new("y", y_size),
                Axis::new("z", 1),
            ],
            mass,
        )
        .unwrap();
        let v_size = 2 + (rng.random::<u32>() % 3) as usize;
        let pvx = random_channel(&mut rng, x_size, v_size);
        let u_size = 2 + (rng.random::<u32>() % 3) as usize;
        let puv = random_channel(&mut rng, pvx.output_size(), u_size);
        let chain = compose_chain(&src, &pvx, &puv).unwrap();
        let i_uy = mutual_information(&chain, &["u"], &["y"]).unwrap();
        let i_vy = mutual_information(&chain, &["v"], &["y"]).unwrap();
        worst = worst.max(i_uy - i_vy);
    }
    worst
}

/// Max absolute value of the Csiszar sum identity residual
/// `sum_i I(Y_i; Z^{i-1} | T, Y_{i+1}^n) - sum_i I(Z_i; Y_{i+1}^n | T, Z^{i-1})`
/// over random joints with sequence length `n in {2, 3}`, computed purely
/// through conditional mutual information.
pub fn csiszar_sum_max_abs(seed: u64, joints: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for trial in 0..joints {
        let n = 2 + (trial % 2);
        let mut axes = Vec::new();
        for i in 1..=n {
            axes.push(Axis::new(format!("y{i}"), 2));
        }
        for i in 1..=n {
            axes.push(Axis::new(format!("z{i}"), 2));
        }
        axes.push(Axis::new("t", 2));
        let j = random_joint(&mut rng, axes);
        let y: Vec<String> = (1..=n).map(|i| format!("y{i}")).collect();
        let z: Vec<String> = (1..=n).map(|i| format!("z{i}")).collect();
        let mut residual = 0.0;
        for i in 1..=n {
            // I(Y_i; Z^{i-1} | T, Y_{i+1}^n)
            let a = vec![y[i - 1].as_str()];
            let b: Vec<&str> = z[..i - 1].iter().map(|s| s.as_str()).collect();
            let mut c: Vec<&str> = vec!["t"];
            c.extend(y[i..].iter().map(|s| s.as_str()));
            residual += conditional_mutual_information(&j, &a, &b, &c).unwrap();
            // I(Z_i; Y_{i+1}^n | T, Z^{i-1})
            let a2 = vec![z[i - 1].as_str()];
            let b2: Vec<&str> = y[i..].iter().map(|s| s.as_str()).collect();
            let mut c2: Vec<&str> = vec!["t"];
            c2.extend(z[..i - 1].iter().map(|s| s.as_str()));
            residual -= conditional_mutual_information(&j, &a2, &b2, &c2).unwrap();
        }
        worst = worst.max(residual.abs());
    }
    worst
}

/// Max Markov-structure violation of composed chains:
/// `max(I(U; X,Y,Z | V), I(Y,Z; U,V | X))` over random compositions.
pub fn compose_markov_max(seed: u64, joints: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..joints {
        let src = random_joint(
            &mut rng,
            vec![Axis::new("x", 2), Axis::new("y", 3), Axis::new("z", 3)],
        );
        let pvx = random_channel(&mut rng, 2, 3);
        let puv = random_channel(&mut rng, 3, 2);
        let c = compose_chain(&src, &pvx, &puv).unwrap();
        let m1 = conditional_mutual_information(&c, &["u"], &["x", "y", "z"], &["v"]).unwrap();
        let m2 = conditional_mutual_information(&c, &["y", "z"], &["u", "v"], &["x"]).unwrap();
        worst = worst.max(m1.max(m2));
    }
    worst
}

/// Runs every suite with per-check seeds derived from `seed`.
pub fn run_identity_suite(seed: u64, joints_per_check: usize) -> IdentityReport {
    let (mi_min, cmi_min) = information_min(seed.wrapping_add(1), joints_per_check);
    IdentityReport {
        seed,
        joints_per_check,
        chain_rule_max_abs: chain_rule_max_abs(seed, joints_per_check),
        mi_min,
        cmi_min,
        data_processing_max_excess: data_processing_max_excess(
            seed.wrapping_add(2),
            joints_per_check,
        ),
        csiszar_sum_max_abs: csiszar_sum_max_abs(seed.wrapping_add(3), joints_per_check),
        compose_markov_max: compose_markov_max(seed.wrapping_add(4), joints_per_check),
    }
}
