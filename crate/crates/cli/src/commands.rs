//! The five batch commands. Every command reads one JSON experiment
//! file, writes its outputs under the chosen directory, prints one
//! summary line per artifact, and maps failures onto the documented exit
//! codes: 0 success, 1 property failure, 2 invalid configuration,
//! 3 resource cap exceeded.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use idauth_core::analysis::{
    attack_analysis, build_exact_model, full_metrics, monte_carlo, AnalysisError, AttackOptions,
    McReport, MetricsReport,
};
use idauth_core::codec::{
    generate_codebook, generate_codebook_forcing_key_bins, CodecError, DEFAULT_SYMBOL_CAP,
};
use idauth_core::identities::run_identity_suite;
use idauth_core::probability::{compose_chain, Axis, JointPmf};
use idauth_core::region::{
    erasure_closed_form, evaluate_corner, evaluate_exponent_corner, frontier_csv,
    markov_structure_check_joint, optimize_frontier, prune_time_sharing_dominated,
    ClosedFormCase, FrontierPoint, RegionError,
};
use idauth_core::textio::fmt_sig;

use crate::config::{
    CheckSection, ConfigError, ExperimentConfig, RegionMode, RegionSection, SimulateMode,
};
use crate::svg::line_plot;

pub const SCHEMA_VERSION: u32 = 1;

/// Failure modes mapped to process exit codes.
#[derive(Debug)]
pub enum CmdError {
    /// Exit 1: a property/identity check failed.
    Property(String),
    /// Exit 2: invalid configuration or environment.
    Config(String),
    /// Exit 3: a resource cap was exceeded.
    Cap(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Property(_) => 1,
            CmdError::Config(_) => 2,
            CmdError::Cap(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CmdError::Property(m) | CmdError::Config(m) | CmdError::Cap(m) => m,
        }
    }
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Config(e.to_string())
    }
}

impl From<RegionError> for CmdError {
    fn from(e: RegionError) -> Self {
        match e {
            RegionError::CapExceeded { .. } => CmdError::Cap(e.to_string()),
            other => CmdError::Config(other.to_string()),
        }
    }
}

impl From<CodecError> for CmdError {
    fn from(e: CodecError) -> Self {
        match e {
            CodecError::MemoryCapExceeded { .. } => CmdError::Cap(e.to_string()),
            other => CmdError::Config(other.to_string()),
        }
    }
}

impl From<AnalysisError> for CmdError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::CapExceeded { .. } => CmdError::Cap(e.to_string()),
            AnalysisError::Codec(inner) => inner.into(),
            other => CmdError::Config(other.to_string()),
        }
    }
}

/// Execution context shared by all commands.
pub struct Ctx {
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
    pub seed_override: Option<u64>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    schema_version: u32,
    command: &'static str,
    seed: Option<u64>,
    config: &'a ExperimentConfig,
    results: T,
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<(), CmdError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)
            .map_err(|e| CmdError::Config(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, bytes)
        .map_err(|e| CmdError::Config(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_json<T: Serialize>(
    ctx: &Ctx,
    name: &str,
    command: &'static str,
    seed: Option<u64>,
    results: T,
) -> Result<(), CmdError> {
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command,
        seed,
        config: &ctx.config,
        results,
    };
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| CmdError::Config(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_out(&ctx.out_dir.join(name), text.as_bytes())
}

pub fn cmd_region(ctx: &Ctx) -> Result<(), CmdError> {
    let src = ctx.config.source.build()?;
    let default_section = RegionSection {
        mode: RegionMode::Corners,
        weights: None,
        budget: None,
        seed: None,
        timeshare_prune: false,
    };
    let section = ctx.config.region.as_ref().unwrap_or(&default_section);
    let (points, labels): (Vec<FrontierPoint>, Option<Vec<f64>>) = match section.mode {
        RegionMode::Corners => {
            let expanded = ctx.config.aux()?.expand()?;
            let mut labels = Vec::new();
            let mut all_some = true;
            let mut points = Vec::new();
            for (label, aux) in expanded {
                let corner = evaluate_corner(&src, &aux)?;
                points.push(FrontierPoint {
                    aux,
                    corner,
                    score: 0.0,
                });
                match label {
                    Some(a) => labels.push(a),
                    None => all_some = false,
                }
            }
            (points, all_some.then_some(labels))
        }
        RegionMode::Optimize => {
            let weights = section
                .weights
                .as_ref()
                .ok_or_else(|| CmdError::Config("optimize mode needs `weights`".into()))?
                .build()?;
            let budget = section.budget.unwrap_or(10_000);
            let seed = ctx.seed_override.or(section.seed).unwrap_or(0);
            let mut points = optimize_frontier(&src, &weights, budget, seed)?;
            if section.timeshare_prune {
                points = prune_time_sharing_dominated(points, 1e-9);
            }
            (points, None)
        }
    };
    match ctx.format {
        OutputFormat::Csv => {
            let csv = frontier_csv(&points, labels.as_deref());
            write_out(&ctx.out_dir.join("region.csv"), csv.as_bytes())?;
        }
        OutputFormat::Json => {
            write_json(
                ctx,
                "region.json",
                "region",
                ctx.seed_override.or(section.seed),
                &points,
            )?;
        }
    }
    println!("region: {} corner(s)", points.len());
    Ok(())
}

#[derive(Serialize)]
struct BinaryRow {
    alpha: f64,
    r_i: Option<f64>,
    r_c: f64,
    l: f64,
    r_s: Option<f64>,
}

pub fn cmd_binary(ctx: &Ctx) -> Result<(), CmdError> {
    let (p, q) = ctx
        .config
        .source
        .erasure_params()
        .ok_or_else(|| CmdError::Config("the binary command needs the erasure source shorthand".into()))?;
    let default_alphas: Vec<f64> = (0..=5).map(|i| i as f64 * 0.1).collect();
    let alphas = ctx
        .config
        .binary
        .as_ref()
        .map(|b| b.alphas.clone())
        .unwrap_or(default_alphas);
    if alphas.is_empty() {
        return Err(CmdError::Config("binary: empty alpha grid".into()));
    }
    let mut case_i = Vec::new();
    let mut case_ii = Vec::new();
    for &alpha in &alphas {
        let pt = erasure_closed_form(p, q, alpha, ClosedFormCase::CompressionLeakageKey)?;
        case_i.push(BinaryRow {
            alpha,
            r_i: None,
            r_c: pt.r_c_excess,
            l: pt.l_min,
            r_s: pt.key_max,
        });
        let pt2 =
            erasure_closed_form(p, q, alpha, ClosedFormCase::IdentificationCompressionLeakage)?;
        let r_i = pt2.r_i_max.unwrap();
        case_ii.push(BinaryRow {
            alpha,
            r_i: Some(r_i),
            r_c: r_i + pt2.r_c_excess,
            l: pt2.l_min,
            r_s: None,
        });
    }
    match ctx.format {
        OutputFormat::Csv => {
            let mut csv_i = String::from("alpha,r_c,l,r_s\n");
            for row in &case_i {
                csv_i.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_sig(row.alpha, 12),
                    fmt_sig(row.r_c, 12),
                    fmt_sig(row.l, 12),
                    fmt_sig(row.r_s.unwrap(), 12)
                ));
            }
            write_out(&ctx.out_dir.join("binary_case_i.csv"), csv_i.as_bytes())?;
            let mut csv_ii = String::from("alpha,r_i,r_c_min,l\n");
            for row in &case_ii {
                csv_ii.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_sig(row.alpha, 12),
                    fmt_sig(row.r_i.unwrap(), 12),
                    fmt_sig(row.r_c, 12),
                    fmt_sig(row.l, 12)
                ));
            }
            write_out(&ctx.out_dir.join("binary_case_ii.csv"), csv_ii.as_bytes())?;
        }
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct Both {
                case_i: Vec<BinaryRow>,
                case_ii: Vec<BinaryRow>,
            }
            write_json(ctx, "binary.json", "binary", None, Both { case_i, case_ii })?;
        }
    }
    println!("binary: {} alpha value(s)", alphas.len());
    Ok(())
}

#[derive(Serialize)]
struct SimulateRow {
    n: usize,
    exact: Option<MetricsReport>,
    mc: Option<McReport>,
}

pub fn cmd_simulate(ctx: &Ctx) -> Result<(), CmdError> {
    let section = ctx
        .config
        .simulate
        .as_ref()
        .ok_or_else(|| CmdError::Config("simulate needs a `simulate` section".into()))?;
    let base_spec = ctx.config.codebook_spec(ctx.seed_override)?;
    let ns = section
        .n_sweep
        .clone()
        .unwrap_or_else(|| vec![base_spec.n]);
    if ns.is_empty() {
        return Err(CmdError::Config("simulate: empty n sweep".into()));
    }
    let mut rows = Vec::new();
    for &n in &ns {
        let mut spec = base_spec.clone();
        spec.n = n;
        let cb = generate_codebook(&spec)?;
        let row = match section.mode {
            SimulateMode::Exact => match build_exact_model(&cb) {
                Ok(model) => SimulateRow {
                    n,
                    exact: Some(full_metrics(&model, section.include_attack)?),
                    mc: None,
                },
                Err(AnalysisError::CapExceeded { needed, cap }) if section.fallback_to_mc => {
                    eprintln!(
                        "simulate: exact enumeration needs {needed} terms (cap {cap}); falling back to Monte Carlo at n = {n}"
                    );
                    let trials = section.trials.unwrap_or(10_000);
                    SimulateRow {
                        n,
                        exact: None,
                        mc: Some(monte_carlo(&cb, trials, spec.seed)?),
                    }
                }
                Err(e) => return Err(e.into()),
            },
            SimulateMode::Mc => {
                let trials = section.trials.unwrap_or(10_000);
                SimulateRow {
                    n,
                    exact: None,
                    mc: Some(monte_carlo(&cb, trials, spec.seed)?),
                }
            }
        };
        rows.push(row);
    }
    if section.svg && rows.len() >= 2 {
        let points: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| {
                let err = r
                    .exact
                    .as_ref()
                    .map(|m| m.error.max_error)
                    .or_else(|| r.mc.as_ref().map(|m| m.error_rate))
                    .unwrap_or(0.0);
                (r.n as f64, err)
            })
            .collect();
        let svg = line_plot(
            &points,
            "identification/authentication failure vs blocklength",
            "n",
            "max error probability",
        );
        write_out(&ctx.out_dir.join("simulate.svg"), svg.as_bytes())?;
    }
    write_json(ctx, "simulate.json", "simulate", Some(base_spec.seed), &rows)?;
    for row in &rows {
        let err = row
            .exact
            .as_ref()
            .map(|m| m.error.max_error)
            .or_else(|| row.mc.as_ref().map(|m| m.error_rate))
            .unwrap_or(f64::NAN);
        println!("simulate: n = {}, max error = {}", row.n, fmt_sig(err, 6));
    }
    Ok(())
}

#[derive(Serialize)]
struct AttackReport {
    mfap: f64,
    exponent: f64,
    map_lower_bound: f64,
    guess_probability: f64,
    min_entropy_bits: f64,
    s_count: u64,
    /// The single-letter exponent bound of the configured auxiliary
    /// chain, for side-by-side comparison.
    single_letter_exponent: f64,
    key_difference_raw: f64,
    forced_key_bins: Option<u64>,
}

pub fn cmd_attack(ctx: &Ctx) -> Result<(), CmdError> {
    let section = ctx.config.attack.clone().unwrap_or_default();
    let spec = ctx.config.codebook_spec(ctx.seed_override)?;
    let corner = evaluate_exponent_corner(&spec.src, &spec.aux)?;
    let cb = if corner.key_raw <= 0.0 {
        eprintln!(
            "attack: key-rate bound is not positive (raw difference {}); the exponent region is degenerate",
            fmt_sig(corner.key_raw, 6)
        );
        match section.force_key_bins {
            Some(bins) => {
                eprintln!("attack: forcing |S| = {bins} key bins as configured");
                generate_codebook_forcing_key_bins(&spec, DEFAULT_SYMBOL_CAP, bins)?
            }
            None => {
                return Err(CmdError::Config(
                    "key-rate bound non-positive; set attack.force_key_bins to run anyway".into(),
                ))
            }
        }
    } else {
        generate_codebook(&spec)?
    };
    let model = build_exact_model(&cb)?;
    let result = attack_analysis(
        &model,
        AttackOptions {
            with_best_response_dump: section.dump_best_response,
            ..AttackOptions::default()
        },
    )?;
    if let Some(rows) = &result.best_response {
        let mut csv = String::from("database,z,best_y,success\n");
        for row in rows {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                row.database,
                row.z,
                row.best_y,
                fmt_sig(row.success, 12)
            ));
        }
        write_out(&ctx.out_dir.join("attack_best_response.csv"), csv.as_bytes())?;
    }
    let report = AttackReport {
        mfap: result.mfap,
        exponent: result.exponent,
        map_lower_bound: result.map_lower_bound,
        guess_probability: result.guess_probability,
        min_entropy_bits: result.min_entropy_bits,
        s_count: result.s_count,
        single_letter_exponent: corner.key_max,
        key_difference_raw: corner.key_raw,
        forced_key_bins: section.force_key_bins,
    };
    write_json(ctx, "attack.json", "attack", Some(spec.seed), &report)?;
    println!(
        "attack: mfap = {}, exponent = {}, map lower bound = {}",
        fmt_sig(report.mfap, 6),
        fmt_sig(report.exponent, 6),
        fmt_sig(report.map_lower_bound, 6)
    );
    Ok(())
}

#[derive(Serialize)]
struct CheckResults {
    report: idauth_core::identities::IdentityReport,
    failures: Vec<String>,
    injected_violation: Option<f64>,
    pass: bool,
}

pub fn cmd_check(ctx: &Ctx) -> Result<(), CmdError> {
    let section = ctx.config.check.clone().unwrap_or(CheckSection {
        joints: 100,
        seed: None,
        inject_corruption: false,
    });
    let seed = ctx.seed_override.or(section.seed).unwrap_or(0xC0FFEE);
    let report = run_identity_suite(seed, section.joints);
    let mut failures: Vec<String> = report.failures().iter().map(|s| s.to_string()).collect();

    // Optional fixture: a joint where the first auxiliary copies the
    // measurement directly, which the chain check must flag.
    let injected_violation = if section.inject_corruption {
        let src = ctx.config.source.build()?;
        let joint = src.joint();
        let y_size = src.y_size();
        let z_size = src.z_size();
        let x_size = src.x_size();
        let mut mass = vec![0.0; y_size * x_size * x_size * y_size * z_size];
        joint.for_each_cell(|idx, p| {
            let (x, y, z) = (idx[0], idx[1], idx[2]);
            let (u, v) = (y, x);
            mass[(((u * x_size + v) * x_size + x) * y_size + y) * z_size + z] += p;
        });
        let bad = JointPmf::new(
            vec![
                Axis::new("u", y_size),
                Axis::new("v", x_size),
                Axis::new("x", x_size),
                Axis::new("y", y_size),
                Axis::new("z", z_size),
            ],
            mass,
        )
        .map_err(|e| CmdError::Config(e.to_string()))?;
        let violation = markov_structure_check_joint(&bad)?;
        if violation > 1e-9 {
            failures.push(format!(
                "injected_corruption:compose_markov (violation {} bits)",
                fmt_sig(violation, 6)
            ));
        }
        Some(violation)
    } else {
        // Sanity: a genuinely composed chain stays clean.
        let src = ctx.config.source.build()?;
        let aux = match &ctx.config.aux {
            Some(spec) => spec.single()?,
            None => idauth_core::region::AuxChannels::bsc_with_constant_u(0.1)?,
        };
        let joint = compose_chain(&src.joint(), &aux.pvx, &aux.puv)
            .map_err(|e| CmdError::Config(e.to_string()))?;
        let violation = markov_structure_check_joint(&joint)?;
        if violation > 1e-9 {
            failures.push("compose_markov_on_configured_chain".to_string());
        }
        None
    };

    let pass = failures.is_empty();
    write_json(
        ctx,
        "check.json",
        "check",
        Some(seed),
        CheckResults {
            report,
            failures: failures.clone(),
            injected_violation,
            pass,
        },
    )?;
    if pass {
        println!("check: all identities hold");
        Ok(())
    } else {
        println!("check: FAILED: {}", failures.join(", "));
        Err(CmdError::Property(failures.join(", ")))
    }
}
