//! Command-line front end: argument parsing, config layering and command dispatch.
//!
//! Every command produces one artifact (JSON report, CSV series or matrix JSON)
//! and a list of checks. The exit code is 0 when all checks pass, 1 when any
//! fails and 2 for an invalid configuration.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::matrix::{self, MatrixJson, Operator, HERMITIAN_TOL, PSD_TOL};
use crate::private::{self, CcqReport, PditFile, PrivateState, ProductBasis};
use crate::protocol::{self, MemCap};
use crate::random;
use crate::report::{sig12, Check, Report};
use crate::states::{self, KeyShieldState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "boundkey", version, about = "Verify bound entangled states with nonzero distillable key")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Check every algebraic property of X_D and ρ^(D)
    VerifyState,
    /// Smallest eigenvalue of the partial transpose over BB'
    Ppt,
    /// Key-block trace norm series k = 1..k-max
    Criterion,
    /// Dense recurrence protocol run, compared step by step with the closed form
    Protocol,
    /// ccq distribution, security verdict and one-way key rate
    Ccq {
        /// Private state description to analyse instead of ρ^(D,k)
        #[arg(long)]
        pdit: Option<PathBuf>,
    },
    /// One-way key rate of a mixture of two random private bits against 1 - h(p1)
    PbitMixture,
    /// Dump a constructed operator as matrix JSON
    Export { factory: Factory },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factory {
    Rho,
    X,
    Projectors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Flags {
    /// Shield dimension per side
    #[arg(long = "D", global = true)]
    pub dim: Option<usize>,
    /// Number of copies
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Largest number of copies in the criterion series
    #[arg(long = "k-max", global = true)]
    pub k_max: Option<usize>,
    /// Weight of the first private bit
    #[arg(long, global = true)]
    pub p1: Option<f64>,
    /// Seed for random private bits
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// PSD tolerance: eigenvalues down to -tol count as nonnegative
    #[arg(long = "tol-psd", global = true)]
    pub tol_psd: Option<f64>,
    /// Largest entrywise |M - M^dag| accepted as Hermitian
    #[arg(long = "tol-herm", global = true)]
    pub tol_herm: Option<f64>,
    /// Write the artifact here instead of standard output
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Artifact format; csv is available for criterion only
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// JSON file with defaults for any of the flags above
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Flag values read from a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct ConfigFile {
    #[serde(rename = "D")]
    pub dim: Option<usize>,
    pub k: Option<usize>,
    pub k_max: Option<usize>,
    pub p1: Option<f64>,
    pub seed: Option<u64>,
    pub tol_psd: Option<f64>,
    pub tol_herm: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub dim: usize,
    /// `None` picks the command's own default.
    pub k: Option<usize>,
    pub k_max: usize,
    pub p1: f64,
    pub seed: u64,
    pub tol_psd: f64,
    pub tol_herm: f64,
    pub output_path: Option<PathBuf>,
    pub format: Format,
    pub mem_cap: MemCap,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            dim: 3,
            k: None,
            k_max: 20,
            p1: 0.75,
            seed: 0,
            tol_psd: PSD_TOL,
            tol_herm: HERMITIAN_TOL,
            output_path: None,
            format: Format::Json,
            mem_cap: MemCap::DEFAULT,
        }
    }

    /// Layers command-line flags over the config file over the defaults.
    pub fn resolve(cli: Cli) -> Result<Self> {
        let file = match &cli.flags.config {
            Some(path) => read_config(path)?,
            None => ConfigFile::default(),
        };
        let f = cli.flags;
        let mut cfg = RunConfig::new(cli.command);
        cfg.dim = f.dim.or(file.dim).unwrap_or(cfg.dim);
        cfg.k = f.k.or(file.k);
        cfg.k_max = f.k_max.or(file.k_max).unwrap_or(cfg.k_max);
        cfg.p1 = f.p1.or(file.p1).unwrap_or(cfg.p1);
        cfg.seed = f.seed.or(file.seed).unwrap_or(cfg.seed);
        cfg.tol_psd = f.tol_psd.or(file.tol_psd).unwrap_or(cfg.tol_psd);
        cfg.tol_herm = f.tol_herm.or(file.tol_herm).unwrap_or(cfg.tol_herm);
        cfg.output_path = f.out.or(file.out);
        cfg.format = f.format.or(file.format).unwrap_or(cfg.format);
        cfg.mem_cap = MemCap::from_env()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.dim < 3 && !matches!(self.command, Command::PbitMixture | Command::Ccq { pdit: Some(_) }) {
            return bad(format!("--D must be at least 3, got {}", self.dim));
        }
        if self.k == Some(0) || self.k_max == 0 {
            return bad("--k and --k-max must be at least 1".into());
        }
        if !(self.tol_psd > 0.0 && self.tol_herm > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.p1) {
            return bad(format!("--p1 must lie in [0, 1], got {}", self.p1));
        }
        let csv_ok = matches!(self.command, Command::Criterion);
        if self.format == Format::Csv && !csv_ok {
            return bad("csv output is only available for the criterion command".into());
        }
        Ok(())
    }
}

fn read_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// The artifact of a run together with its checks.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub artifact: String,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            EXIT_OK
        } else {
            EXIT_FAILED
        }
    }
}

/// Exit code for an error raised while running a command.
pub fn error_exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter(_) | Error::MemoryCap { .. } | Error::Json(_) | Error::Io(_) | Error::Format(_) => {
            EXIT_INVALID
        }
        _ => EXIT_FAILED,
    }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let (name, checks, data) = match &cfg.command {
        Command::VerifyState => ("verify-state", verify_state(cfg)?, json!({ "D": cfg.dim })),
        Command::Ppt => ppt(cfg)?,
        Command::Criterion => return criterion(cfg),
        Command::Protocol => protocol_run(cfg)?,
        Command::Ccq { pdit } => ccq(cfg, pdit.as_deref())?,
        Command::PbitMixture => pbit_mixture(cfg)?,
        Command::Export { factory } => return export(cfg, *factory),
    };
    let report = Report::new(name, checks, round_floats(data));
    Ok(Outcome { checks: report.checks.clone(), artifact: to_json(&report)? })
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

/// Rounds every float in a JSON payload to 12 significant digits.
fn round_floats(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            sig12(x).parse::<f64>().ok().and_then(serde_json::Number::from_f64).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_floats).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

fn ratio_text(r: states::Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn idempotency_error(m: &Operator) -> f64 {
    m.mul(m).and_then(|sq| sq.max_abs_diff(m)).unwrap_or(f64::INFINITY)
}

fn product_norm(a: &Operator, b: &Operator) -> f64 {
    a.mul(b).map(|p| p.max_abs()).unwrap_or(f64::INFINITY)
}

fn verify_state(cfg: &RunConfig) -> Result<Vec<Check>> {
    let d = cfg.dim;
    let closed_tol = 1e-10;
    let f = states::make_projector_family(d)?;
    let mut checks = Vec::new();
    for (name, m) in [("P_plus", &f.p_plus), ("P", &f.p), ("Q", &f.q), ("S", &f.s)] {
        checks.push(Check::at_most(format!("projector_{name}"), idempotency_error(m), 1e-12));
    }
    let complement = f.identity.sub(&f.q)?;
    checks.push(Check::at_most("orthogonal_P_plus_P", product_norm(&f.p_plus, &f.p), 1e-12));
    checks.push(Check::at_most("orthogonal_P_plus_Q", product_norm(&f.p_plus, &f.q), 1e-12));
    checks.push(Check::at_most("orthogonal_P_Q", product_norm(&f.p, &f.q), 1e-12));
    checks.push(Check::at_most("orthogonal_S_I_minus_Q", product_norm(&f.s, &complement), 1e-12));
    let completeness = f.p_plus.add(&f.p)?.add(&f.q)?.max_abs_diff(&f.identity)?;
    checks.push(Check::at_most("completeness", completeness, 1e-12));
    checks.push(Check::at_most("swap_involution", f.v.mul(&f.v)?.max_abs_diff(&f.identity)?, 0.0));

    let x = states::make_x(d)?;
    let transposed = Operator::new(x.x.dims().to_vec(), x.x.data().transpose())?;
    let symmetric = x.x.max_abs_diff(&transposed)?.max(if x.x.is_real() { 0.0 } else { f64::INFINITY });
    checks.push(Check::at_most("X_real_symmetric", symmetric, cfg.tol_herm));
    checks.push(Check::close("trace_norm_X", matrix::trace_norm(&x.x), 1.0, closed_tol, "1"));
    checks.push(Check::at_least("min_eig_abs_X_ptB", matrix::min_eigenvalue(&x.abs_x_pt)?, -cfg.tol_psd));
    checks.push(Check::at_least(
        "min_eig_abs_X_ptB_abs_ptB",
        matrix::min_eigenvalue(&x.abs_x_pt_abs_pt)?,
        -cfg.tol_psd,
    ));

    let numeric = states::XFamily::from_numeric(d)?;
    for (name, a, b) in [
        ("abs_X", &x.abs_x, &numeric.abs_x),
        ("X_ptB", &x.x_pt, &numeric.x_pt),
        ("abs_X_ptB", &x.abs_x_pt_abs, &numeric.abs_x_pt_abs),
        ("abs_X_ptB_ptB", &x.abs_x_pt_abs_pt, &numeric.abs_x_pt_abs_pt),
    ] {
        checks.push(Check::at_most(format!("closed_form_{name}"), a.max_abs_diff(b)?, closed_tol));
    }

    let prefactor = states::rho_prefactor(d)?;
    checks.push(Check::close(
        "prefactor",
        states::ratio_to_f64(prefactor),
        states::ratio_to_f64(prefactor),
        0.0,
        ratio_text(prefactor),
    ));
    let rho = states::make_rho(d)?;
    checks.push(Check::at_most("rho_hermiticity", rho.rho().hermiticity_error(), cfg.tol_herm));
    checks.push(Check::close("rho_trace", rho.rho().trace().re, 1.0, 1e-12, "1"));
    checks.push(Check::at_least("rho_min_eigenvalue", matrix::min_eigenvalue(rho.rho())?, -cfg.tol_psd));
    let pt = matrix::partial_transpose(rho.rho(), &[1, 3])?;
    let blocks = states::rho_partial_transpose_blocks(d)?;
    checks.push(Check::at_most("rho_ptBB_block_form", pt.max_abs_diff(blocks.rho())?, 1e-12));
    let report = states::check_ppt(&rho, cfg.tol_psd)?;
    checks.push(Check::at_least("min_eigenvalue_ptBB", report.min_eigenvalue, -cfg.tol_psd));
    checks.push(Check::flag("ppt", report.is_ppt));
    Ok(checks)
}

fn state_for(cfg: &RunConfig, default_k: usize) -> Result<(usize, KeyShieldState)> {
    let k = cfg.k.unwrap_or(default_k);
    let state = if k == 1 { states::make_rho(cfg.dim)? } else { protocol::rho_k_closed_form(cfg.dim, k, cfg.mem_cap)? };
    Ok((k, state))
}

type Section = (&'static str, Vec<Check>, Value);

fn ppt(cfg: &RunConfig) -> Result<Section> {
    let (k, state) = state_for(cfg, 1)?;
    let report = states::check_ppt(&state, cfg.tol_psd)?;
    let checks = vec![
        Check::at_least("min_eigenvalue_ptBB", report.min_eigenvalue, -cfg.tol_psd),
        Check::flag("ppt", report.is_ppt),
    ];
    let data =
        json!({ "D": cfg.dim, "k": k, "min_eigenvalue_after_T_BB'": report.min_eigenvalue, "is_ppt": report.is_ppt });
    Ok(("ppt", checks, data))
}

fn criterion(cfg: &RunConfig) -> Result<Outcome> {
    let series = protocol::criterion_series(cfg.dim, cfg.k_max, cfg.mem_cap)?;
    let mut checks = Vec::new();
    for e in &series.entries {
        let formula = protocol::key_block_norm_closed_form(cfg.dim, e.k);
        checks.push(Check::close(
            format!("key_block_trace_norm[k={}]", e.k),
            e.key_block_trace_norm,
            formula,
            1e-12,
            "1/N_{D,k}",
        ));
        if let Some(dense) = e.dense_key_block_trace_norm {
            checks.push(Check::close(
                format!("dense_key_block_trace_norm[k={}]", e.k),
                dense,
                formula,
                1e-9,
                "1/N_{D,k}",
            ));
        }
    }
    let increasing = series.entries.windows(2).all(|w| w[1].key_block_trace_norm > w[0].key_block_trace_norm);
    checks.push(Check::flag("strictly_increasing", increasing));
    checks.push(Check::flag("bounded_by_half", series.entries.iter().all(|e| e.key_block_trace_norm < 0.5)));
    let distances: Vec<f64> = series.entries.iter().filter_map(|e| e.pbit_trace_distance).collect();
    checks.push(Check::flag("pbit_distance_decreasing", distances.windows(2).all(|w| w[1] < w[0])));
    let artifact = match cfg.format {
        Format::Csv => series.to_csv()?,
        Format::Json => {
            let report = Report::new("criterion", checks.clone(), round_floats(serde_json::to_value(&series)?));
            to_json(&report)?
        }
    };
    Ok(Outcome { checks, artifact })
}

fn protocol_run(cfg: &RunConfig) -> Result<Section> {
    let k = cfg.k.unwrap_or(2);
    let steps = protocol::run_protocol(cfg.dim, k, cfg.mem_cap)?;
    let mut checks = Vec::new();
    let mut step_data = Vec::new();
    let mut overall = 1.0;
    for step in &steps {
        let expected = protocol::rho_k_closed_form(cfg.dim, step.copies, cfg.mem_cap)?;
        let deviation = step.state.rho().max_abs_diff(expected.rho())?;
        checks.push(Check::at_most(format!("closed_form_match[k={}]", step.copies), deviation, 1e-10));
        let norm = protocol::key_block_trace_norm(&step.state)?;
        let formula = protocol::key_block_norm_closed_form(cfg.dim, step.copies);
        checks.push(Check::close(format!("key_block_trace_norm[k={}]", step.copies), norm, formula, 1e-9, "1/N_{D,k}"));
        overall *= step.success_probability;
        step_data.push(json!({
            "k": step.copies,
            "success_probability": step.success_probability,
            "key_block_trace_norm": norm,
            "max_deviation_from_closed_form": deviation,
        }));
    }
    let final_state = steps.last().map_or_else(|| states::make_rho(cfg.dim), |s| Ok(s.state.clone()))?;
    let ppt = states::check_ppt(&final_state, cfg.tol_psd)?;
    checks.push(Check::flag("ppt", ppt.is_ppt));
    let data = json!({ "D": cfg.dim, "k": k, "steps": step_data, "overall_yield": overall });
    Ok(("protocol", checks, data))
}

fn ccq(cfg: &RunConfig, pdit: Option<&Path>) -> Result<Section> {
    let (state, basis, source) = match pdit {
        Some(path) => {
            let file: PditFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            let pdit = PrivateState::try_from(file)?;
            (pdit.assemble(), pdit.basis().clone(), json!({ "pdit": path.display().to_string() }))
        }
        None => {
            let (k, state) = state_for(cfg, 1)?;
            (state, ProductBasis::standard(2), json!({ "D": cfg.dim, "k": k }))
        }
    };
    let c = private::ccq(&state, &basis)?;
    let report = CcqReport::from_ccq(&c, 1e-9)?;
    let total: f64 = c.p.iter().flatten().sum();
    let mut checks = vec![Check::close("distribution_total", total, 1.0, 1e-12, "1")];
    let direct = matrix::partial_trace(&private::purify(state.rho())?.projector(), &[0, 1, 2, 3])?;
    checks.push(Check::at_most("eve_marginal_consistency", c.eve_marginal().max_abs_diff(&direct)?, 1e-10));
    let mut data = serde_json::to_value(&report)?;
    data["source"] = source;
    Ok(("ccq", checks, data))
}

fn pbit_mixture(cfg: &RunConfig) -> Result<Section> {
    let mut rng = random::seeded(cfg.seed);
    let gamma1 = PrivateState::random(2, (2, 2), &mut rng);
    let gamma2 = PrivateState::random(2, (2, 2), &mut rng);
    let mixture = private::flipped_pbit_mixture(&gamma1, &gamma2, cfg.p1)?;
    let c = private::ccq(&mixture, &ProductBasis::standard(2))?;
    let rate = private::dw_rate(&c)?;
    let bound = 1.0 - private::binary_entropy(cfg.p1);
    let checks = vec![
        Check::at_least("dw_rate", rate, bound - 1e-9),
        Check::close(
            "key_block_trace_norm_gamma1",
            protocol::key_block_trace_norm(&gamma1.assemble())?,
            0.5,
            1e-10,
            "1/2",
        ),
        Check::close(
            "key_block_trace_norm_gamma2",
            protocol::key_block_trace_norm(&gamma2.assemble())?,
            0.5,
            1e-10,
            "1/2",
        ),
    ];
    let data = json!({
        "p1": cfg.p1,
        "seed": cfg.seed,
        "dw_rate": rate,
        "bound_1_minus_h": bound,
        "mutual_information_AB": c.mutual_information_ab(),
        "mutual_information_AE": c.mutual_information_ae()?,
    });
    Ok(("pbit-mixture", checks, data))
}

fn export(cfg: &RunConfig, factory: Factory) -> Result<Outcome> {
    let (value, checks) = match factory {
        Factory::Rho => {
            let (_, state) = state_for(cfg, 1)?;
            let trace = state.rho().trace().re;
            (serde_json::to_value(MatrixJson::from(state.rho()))?, vec![Check::close("trace", trace, 1.0, 1e-12, "1")])
        }
        Factory::X => {
            let x = states::make_x(cfg.dim)?;
            let norm = matrix::trace_norm(&x.x);
            (serde_json::to_value(MatrixJson::from(&x.x))?, vec![Check::close("trace_norm_X", norm, 1.0, 1e-10, "1")])
        }
        Factory::Projectors => {
            let f = states::make_projector_family(cfg.dim)?;
            let value = json!({
                "P_plus": MatrixJson::from(&f.p_plus),
                "P": MatrixJson::from(&f.p),
                "Q": MatrixJson::from(&f.q),
                "S": MatrixJson::from(&f.s),
                "V": MatrixJson::from(&f.v),
                "identity": MatrixJson::from(&f.identity),
            });
            (value, Vec::new())
        }
    };
    Ok(Outcome { checks, artifact: serde_json::to_string(&value)? + "\n" })
}

/// Parses arguments, runs the command, writes the artifact and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = err.print();
            return code;
        }
    };
    let cfg = match RunConfig::resolve(cli) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_INVALID;
        }
    };
    let outcome = match run(&cfg) {
        Ok(outcome) => outcome,
        Err(err) => {
            eprintln!("error: {err}");
            return error_exit_code(&err);
        }
    };
    for check in &outcome.checks {
        eprintln!("[{}] {}", if check.passed { "PASS" } else { "FAIL" }, check.summary);
    }
    let written = match &cfg.output_path {
        Some(path) => std::fs::write(path, &outcome.artifact),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(outcome.artifact.as_bytes())
        }
    };
    if let Err(err) = written {
        eprintln!("error: cannot write artifact: {err}");
        return EXIT_INVALID;
    }
    outcome.exit_code()
}
