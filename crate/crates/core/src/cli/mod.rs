//! Command-line front end.
//!
//! Every subcommand writes JSON into `--out` and maps its result to an exit
//! code: 0 success, 1 usage or configuration error (or a failed claim),
//! 2 protocol abort.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{
    acceptance_report, blindness_enumeration, catch_rate_report, detection_rate, forwarding_stats,
    BlindnessParams, Report,
};
use crate::mbqc::{output_distribution, Computation, ENUMERATION_MAX_VERTICES};
use crate::parties::{
    exact_output_distribution, sample_shots, ForwardOrder, PaddingStrategy, PartyId, RunConfig,
    Strategy, Variant,
};
use crate::qsim::checks::{blind_measurement_identity, residual_identity, swap_oracle};
use crate::qsim::Angle;
use crate::seed::SeedTree;
use crate::stats::tv_distance;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_ABORT: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Bfk,
    Double,
    Triple,
    Single,
    SingleClassical,
}

impl ProtocolArg {
    fn apply(self, cfg: &mut RunConfig) {
        let (variant, classical) = match self {
            ProtocolArg::Bfk => (Variant::Bfk, false),
            ProtocolArg::Double => (Variant::Double, false),
            ProtocolArg::Triple => (Variant::Triple, false),
            ProtocolArg::Single => (Variant::Single, false),
            ProtocolArg::SingleClassical => (Variant::Single, true),
        };
        cfg.variant = variant;
        cfg.classical_client = classical;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PaddingArg {
    Equalizing,
    ConstantZero,
}

impl From<PaddingArg> for PaddingStrategy {
    fn from(p: PaddingArg) -> Self {
        match p {
            PaddingArg::Equalizing => PaddingStrategy::Equalizing,
            PaddingArg::ConstantZero => PaddingStrategy::ConstantZero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    Arrival,
    Shuffled,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse()
}

fn parse_party(s: &str) -> Result<PartyId, String> {
    serde_json::from_value(json!(s)).map_err(|_| format!("unknown party {s:?}"))
}

/// Options shared by every subcommand. Flags override the config file.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// RunConfig JSON document.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Computation JSON document; defaults to a linear cluster of `m`
    /// qubits measured at π/4.
    #[arg(long)]
    pub computation: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub protocol: Option<ProtocolArg>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long = "p-forward")]
    pub p_forward: Option<f64>,
    /// Decoy pairs generated by the center.
    #[arg(long)]
    pub decoys: Option<usize>,
    /// Decoy pairs checked by the client.
    #[arg(long = "check-decoys")]
    pub check_decoys: Option<usize>,
    /// honest, guess_bell, flip_bits, wrong_basis:K or collude.
    #[arg(long, value_parser = parse_strategy)]
    pub adversary: Option<Strategy>,
    /// Server that runs the adversary strategy (Bob, Bob1, Bob2, Bob3).
    #[arg(long = "adversary-role", value_parser = parse_party)]
    pub adversary_role: Option<PartyId>,
    #[arg(long, value_enum)]
    pub padding: Option<PaddingArg>,
    #[arg(long = "forward-order", value_enum)]
    pub forward_order: Option<OrderArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Parser)]
#[command(
    name = "blindqc",
    version,
    about = "Blind quantum computation protocol simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a protocol for a number of shots; writes transcript.jsonl and result.json.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        shots: u64,
    },
    /// Run the identity checks and exact cross-protocol comparison; writes check.json.
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Enumerate the server's view for one computation qubit; writes blindness.json.
    Blindness {
        #[command(flatten)]
        common: Common,
        /// First-half positions.
        #[arg(long, default_value_t = 8)]
        n: usize,
    },
    /// Estimate decoy detection rates; writes detect.json.
    Detect {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
    },
    /// Estimate how often forwarding leaves enough particles; writes forward.json.
    ForwardStats {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
    },
}

/// A usage or configuration problem, reported on standard error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError(pub String);

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

impl Common {
    /// Config file (or defaults for the single-server protocol) with flag
    /// overrides applied.
    fn run_config(&self) -> Result<RunConfig, CliError> {
        let cfg = self.load_config()?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn load_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text =
                    fs::read_to_string(p).map_err(|e| CliError(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::new(Variant::Single),
        };
        if let Some(p) = self.protocol {
            p.apply(&mut cfg);
        }
        if let Some(m) = self.m {
            cfg.m = Some(m);
        }
        if let Some(d) = self.delta {
            cfg.delta = d;
        }
        if let Some(p) = self.p_forward {
            cfg.p_forward = p;
        }
        if let Some(h) = self.decoys {
            cfg.h = h;
        }
        if let Some(l) = self.check_decoys {
            cfg.l = l;
        }
        if let Some(s) = self.adversary {
            cfg.adversary.strategy = s;
        }
        if let Some(r) = self.adversary_role {
            cfg.adversary.role = Some(r);
        }
        if let Some(p) = self.padding {
            cfg.padding = p.into();
        }
        if let Some(o) = self.forward_order {
            cfg.forward_order = match o {
                OrderArg::Arrival => ForwardOrder::Arrival,
                OrderArg::Shuffled => ForwardOrder::Shuffled,
            };
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    fn computation(&self, cfg: &RunConfig) -> Result<Computation, CliError> {
        match &self.computation {
            Some(p) => {
                let text =
                    fs::read_to_string(p).map_err(|e| CliError(format!("{}: {e}", p.display())))?;
                Ok(Computation::from_json(&text)
                    .map_err(|e| CliError(format!("{}: {e}", p.display())))?)
            }
            None => default_computation(cfg.m.unwrap_or(2)),
        }
    }
}

/// Linear cluster of `m` qubits, every measured qubit at π/4.
pub fn default_computation(m: usize) -> Result<Computation, CliError> {
    if m == 0 {
        return Err(CliError("m must be at least 1".into()));
    }
    Ok(Computation::linear(&vec![Angle::new(1); m - 1])?)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn exit_for(pass: bool) -> i32 {
    if pass {
        EXIT_OK
    } else {
        EXIT_CONFIG
    }
}

fn variant_name(cfg: &RunConfig) -> &'static str {
    match (cfg.variant, cfg.classical_client) {
        (Variant::Bfk, _) => "bfk",
        (Variant::Double, _) => "double",
        (Variant::Triple, _) => "triple",
        (Variant::Single, false) => "single",
        (Variant::Single, true) => "single-classical",
    }
}

pub fn cmd_run(common: &Common, shots: u64) -> Result<i32, CliError> {
    let cfg = common.run_config()?;
    let comp = common.computation(&cfg)?;
    let summary = sample_shots(&cfg, &comp, SeedTree::new(cfg.seed), shots)?;

    let shown = summary
        .first_abort
        .as_ref()
        .map_or(&summary.first, |(_, r)| r);
    fs::create_dir_all(&common.out)
        .map_err(|e| CliError(format!("{}: {e}", common.out.display())))?;
    let tpath = common.out.join("transcript.jsonl");
    fs::write(&tpath, shown.transcript.to_jsonl())
        .map_err(|e| CliError(format!("{}: {e}", tpath.display())))?;

    let freqs = summary.frequencies();
    let oracle = (comp.graph().num_vertices() <= ENUMERATION_MAX_VERTICES)
        .then(|| output_distribution(&comp))
        .transpose()?;
    let tv = oracle
        .as_ref()
        .filter(|_| summary.completed() > 0)
        .map(|o| tv_distance(&freqs, o));
    let result = json!({
        "protocol": variant_name(&cfg),
        "seed": cfg.seed,
        "vertices": comp.graph().num_vertices(),
        "shots": shots,
        "completed": summary.completed(),
        "attempts": summary.attempts,
        "aborts": summary.aborts,
        "first_abort": summary.first_abort.as_ref().map(|(i, r)| json!({"shot": i, "reason": r.aborted()})),
        "counts": summary.counts,
        "frequencies": freqs,
        "oracle": oracle,
        "tv": tv,
    });
    write_json(&common.out, "result.json", &result)?;
    if let Some((i, r)) = &summary.first_abort {
        eprintln!("shot {i} aborted: {}", r.aborted().expect("aborted"));
        return Ok(EXIT_ABORT);
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct CheckEntry {
    name: String,
    pass: bool,
    detail: String,
}

pub fn cmd_check(common: &Common) -> Result<i32, CliError> {
    let cfg = common.run_config()?;
    let mut checks = Vec::new();
    let mut add = |name: &str, pass: bool, detail: String| {
        checks.push(CheckEntry {
            name: name.into(),
            pass,
            detail,
        })
    };

    let o = swap_oracle()?;
    add(
        "swap_oracle",
        o.passed(),
        format!(
            "{} cases, max probability error {:e}",
            o.cases, o.max_probability_error
        ),
    );
    let o = residual_identity(cfg.signs.frame)?;
    add(
        "residual_identity",
        o.passed(),
        format!("{} cases, {} failures", o.cases, o.failures),
    );
    let o = blind_measurement_identity(cfg.signs.bfk)?;
    add(
        "blind_measurement_identity",
        o.passed(),
        format!("{} cases, {} failures", o.cases, o.failures),
    );

    let comp = common.computation(&cfg)?;
    let oracle = output_distribution(&comp)?;
    for (name, variant, classical) in [
        ("equivalence_bfk", Variant::Bfk, false),
        ("equivalence_double", Variant::Double, false),
        ("equivalence_triple", Variant::Triple, false),
        ("equivalence_single", Variant::Single, false),
        ("equivalence_single_classical", Variant::Single, true),
    ] {
        let mut c = RunConfig::new(variant);
        c.classical_client = classical;
        c.signs = cfg.signs;
        c.p_forward = 1.0;
        c.delta = 0.01;
        c.seed = cfg.seed;
        if variant == Variant::Single {
            c.h = 1;
        }
        match exact_output_distribution(&c, &comp, SeedTree::new(cfg.seed), 1 << 22) {
            Ok(run) => {
                let tv = tv_distance(&run.distribution, &oracle);
                add(
                    name,
                    tv <= 1e-9 && run.aborted.is_empty(),
                    format!("exact TV {tv:e} over {} branches", run.paths),
                );
            }
            Err(e) => add(name, false, e.to_string()),
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    for c in checks.iter().filter(|c| !c.pass) {
        eprintln!("check {} failed: {}", c.name, c.detail);
    }
    write_json(
        &common.out,
        "check.json",
        &json!({ "pass": pass, "checks": checks }),
    )?;
    Ok(exit_for(pass))
}

pub fn cmd_blindness(common: &Common, n: usize) -> Result<i32, CliError> {
    let cfg = common.run_config()?;
    let params = BlindnessParams {
        n,
        padding: Some(cfg.padding),
        forced_frame: None,
    };
    let table = blindness_enumeration(params)?;
    let score = table.leak_score();
    // equalizing padding over at least eight positions should hide the angle; anything else should leak
    let blind_expected = cfg.padding == PaddingStrategy::Equalizing && n >= 8;
    let report = Report {
        claim: if blind_expected {
            format!("server view is independent of the secret angle (n={n}, equalizing padding)")
        } else {
            format!(
                "server view depends on the secret angle (n={n}, {:?} padding)",
                cfg.padding
            )
        },
        expected: blind_expected.then_some(0.0),
        estimate: score,
        stderr: 0.0,
        trials: table.paths as u64,
        pass: if blind_expected {
            score <= 1e-9
        } else {
            score > 1e-9
        },
    };
    write_json(&common.out, "blindness.json", &report)?;
    Ok(exit_for(report.pass))
}

pub fn cmd_detect(common: &Common, trials: u64) -> Result<i32, CliError> {
    let mut cfg = common.load_config()?;
    let l = if cfg.l > 0 { cfg.l } else { 1 };
    let h = common.decoys.unwrap_or(cfg.h.max(l + 1));
    cfg.variant = Variant::Single;
    cfg.l = l;
    cfg.h = h;
    cfg.validate()?;
    let strategy = common.adversary.unwrap_or(
        if cfg.adversary.strategy == Strategy::Honest && common.config.is_none() {
            Strategy::GuessBell
        } else {
            cfg.adversary.strategy
        },
    );
    let rep = detection_rate(l, h, trials, strategy, SeedTree::new(cfg.seed))?;
    let report = match strategy {
        Strategy::GuessBell => catch_rate_report(&rep),
        Strategy::Honest => Report {
            claim: "an honest server is never caught".into(),
            expected: Some(0.0),
            estimate: rep.caught as f64 / trials as f64,
            stderr: 0.0,
            trials,
            pass: rep.caught == 0,
        },
        other => Report {
            claim: format!("per-decoy catch rate of a {other:?} server"),
            expected: None,
            estimate: rep.per_decoy_catch_rate(),
            stderr: crate::stats::binomial_stderr(rep.per_decoy_catch_rate(), rep.checked),
            trials,
            pass: true,
        },
    };
    let mut pass = report.pass;
    let mut doc: BTreeMap<&str, serde_json::Value> = BTreeMap::new();
    doc.insert("counts", serde_json::to_value(rep)?);
    if strategy == Strategy::GuessBell {
        let acc = acceptance_report(&rep);
        pass &= acc.pass;
        doc.insert("acceptance", serde_json::to_value(&acc)?);
    }
    write_json(&common.out, "detect.json", &report)?;
    write_json(&common.out, "detect_details.json", &doc)?;
    Ok(exit_for(pass))
}

pub fn cmd_forward_stats(common: &Common, trials: u64) -> Result<i32, CliError> {
    let cfg = common.run_config()?;
    let m = cfg.m.unwrap_or(10);
    let report = forwarding_stats(m, cfg.delta, cfg.p_forward, trials, SeedTree::new(cfg.seed))?;
    write_json(&common.out, "forward.json", &report)?;
    Ok(exit_for(report.pass))
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run { common, shots } => cmd_run(common, *shots),
        Command::Check { common } => cmd_check(common),
        Command::Blindness { common, n } => cmd_blindness(common, *n),
        Command::Detect { common, trials } => cmd_detect(common, *trials),
        Command::ForwardStats { common, trials } => cmd_forward_stats(common, *trials),
    };
    match result {
        Ok(code) => code,
        Err(CliError(msg)) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
    }
}
