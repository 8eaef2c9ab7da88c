//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification or runtime failure, 2 usage error.

use std::f64::consts::FRAC_PI_4;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::analysis::{
    audit_closed_forms, class_label, csv_string, flatness_probe, run_sweep, write_file, SweepSpec,
};
use crate::error::{Error, Result};
use crate::fock::{seeded_theta_triples, verify_against_oracle, VerifyReport, DEFAULT_FOCK_TAIL};
use crate::harness::Harness;
use crate::protocol::tables::{table_report, MismatchKind};
use crate::protocol::{enumerate_outcomes, parity_string, Leg, Parity, ProtocolParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Largest α the verify command accepts (oracle truncation guard).
pub const VERIFY_MAX_ALPHA: f64 = 2.5;
pub const VERIFY_TOLERANCE: f64 = 1e-6;
pub const VERIFY_ALPHA_GRID: [f64; 5] = [0.3, 0.7, 1.0, 1.5, 2.0];
pub const AUDIT_ALPHA_GRID: [f64; 6] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];

#[derive(Debug, Parser)]
#[command(
    name = "cyclic-teleport",
    version,
    about = "Cyclic teleportation of cat coherent states"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the three-party protocol once and print a summary.
    Demo(Common),
    /// Dump every enumerated detection event.
    Enumerate(Common),
    /// Cross-check the coherent algebra against the Fock oracle.
    Verify(VerifyArgs),
    /// Derive the correction table and diff it against the printed one.
    Tables(Common),
    /// Sweep α and θ grids.
    Sweep(SweepArgs),
    /// Closed-form audit and average-fidelity flatness probe.
    Audit(Common),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Coherent amplitude α (> 0).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Information-state angles θ1 θ2 θ3.
    #[arg(long, num_args = 3, value_names = ["T1", "T2", "T3"], allow_negative_numbers = true)]
    pub theta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Per-detector photon cutoff (default ceil(2α² + 8α + 10)).
    #[arg(long)]
    pub cutoff: Option<u32>,
    /// Allowed missing probability mass.
    #[arg(long, default_value_t = 1e-9)]
    pub tail: f64,
    /// Output file (or directory for `tables`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Seeded random θ triples checked in addition to --theta.
    #[arg(long, default_value_t = 5)]
    pub samples: usize,
    /// Added to α on the algebra side only (fault injection).
    #[arg(
        long,
        hide = true,
        default_value_t = 0.0,
        allow_negative_numbers = true
    )]
    pub perturb: f64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',')]
    pub alpha_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub theta1_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub theta2_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub theta3_grid: Option<Vec<f64>>,
    /// Where to write the summary JSON.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

/// Validated settings shared by all subcommands.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: ProtocolParams,
    pub alpha_given: bool,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    pub fn from_common(c: &Common) -> Result<Self> {
        let theta = match &c.theta {
            Some(t) => [t[0], t[1], t[2]],
            None => [FRAC_PI_4; 3],
        };
        let mut params =
            ProtocolParams::new(c.alpha.unwrap_or(1.0), theta)?.with_tail_budget(c.tail)?;
        if let Some(n) = c.cutoff {
            params = params.with_cutoff(n);
        }
        Ok(RunConfig {
            params,
            alpha_given: c.alpha.is_some(),
            seed: c.seed,
            out: c.out.clone(),
            format: c.format,
        })
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(&cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            match e {
                Error::InvalidParams(_) => EXIT_USAGE,
                _ => EXIT_FAILURE,
            }
        }
    }
}

fn dispatch(cmd: &Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Demo(c) => cmd_demo(&RunConfig::from_common(c)?, out),
        Command::Enumerate(c) => cmd_enumerate(&RunConfig::from_common(c)?, out),
        Command::Verify(v) => cmd_verify(
            &RunConfig::from_common(&v.common)?,
            v.samples,
            v.perturb,
            out,
        ),
        Command::Tables(c) => cmd_tables(&RunConfig::from_common(c)?, out),
        Command::Sweep(s) => cmd_sweep(s, out),
        Command::Audit(c) => cmd_audit(&RunConfig::from_common(c)?, out),
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

/// Writes to `path` if given, else to `out`.
fn emit(path: Option<&Path>, contents: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => write_file(p, contents),
        None => out.write_all(contents.as_bytes()).map_err(io_err),
    }
}

pub fn cmd_demo(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let harness = Harness::new(cfg.params)?;
    let trace = harness.run(cfg.seed)?;
    let path = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("trace.jsonl"));
    write_file(&path, &trace.to_json_lines())?;
    let p = cfg.params;
    let mut text = format!(
        "alpha = {}, theta = ({:.6}, {:.6}, {:.6}), seed = {}\n",
        p.alpha, p.theta[0], p.theta[1], p.theta[2], cfg.seed
    );
    text += &format!("event {} -> case {}\n", trace.event, trace.case);
    match (trace.parities, trace.fidelities) {
        (Some(par), Some(fid)) => {
            text += &format!("parities {}\n", parity_string(par));
            for leg in Leg::ALL {
                let k = leg.index();
                let receiver = crate::harness::Party::ALL
                    .into_iter()
                    .find(|x| x.receives() == leg)
                    .expect("every leg has a receiver");
                let op = trace.correction(receiver).map_or("-", |o| o.code());
                let tag = if par[k] == Parity::Even {
                    "faithful"
                } else {
                    "near-faithful"
                };
                text += &format!(
                    "{} ({} on mode {}): op {:<2} F = {:.6} ({})\n",
                    leg.name(),
                    receiver,
                    leg.receiver_mode(),
                    op,
                    fid[k],
                    tag
                );
            }
        }
        _ => text += "run failed: a detector pair stayed silent, no corrections applied\n",
    }
    text += &format!("trace written to {}\n", path.display());
    out.write_all(text.as_bytes()).map_err(io_err)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct EnumerateRow {
    n7: Option<u32>,
    n8: Option<u32>,
    n9: Option<u32>,
    n10: Option<u32>,
    n11: Option<u32>,
    n12: Option<u32>,
    case: String,
    parities: String,
    probability: f64,
    fidelity_ab: Option<f64>,
    fidelity_bc: Option<f64>,
    fidelity_ca: Option<f64>,
    faithful: Option<bool>,
}

pub fn cmd_enumerate(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let e = enumerate_outcomes(&cfg.params)?;
    let text = match cfg.format {
        Format::Csv => {
            let mut rows: Vec<EnumerateRow> = e
                .iter()
                .map(|r| {
                    let c = r.event.counts;
                    let fid = |k: usize| r.fidelities[k].is_finite().then_some(r.fidelities[k]);
                    EnumerateRow {
                        n7: Some(c[0]),
                        n8: Some(c[1]),
                        n9: Some(c[2]),
                        n10: Some(c[3]),
                        n11: Some(c[4]),
                        n12: Some(c[5]),
                        case: r.case.name().to_string(),
                        parities: r.parities.map(parity_string).unwrap_or_default(),
                        probability: r.probability,
                        fidelity_ab: fid(0),
                        fidelity_bc: fid(1),
                        fidelity_ca: fid(2),
                        faithful: Some(r.faithful),
                    }
                })
                .collect();
            rows.push(EnumerateRow {
                n7: None,
                n8: None,
                n9: None,
                n10: None,
                n11: None,
                n12: None,
                case: "TOTAL".into(),
                parities: format!("ambiguous={}", e.ambiguous_mass()),
                probability: e.total_mass(),
                fidelity_ab: None,
                fidelity_bc: None,
                fidelity_ca: None,
                faithful: None,
            });
            csv_string(&rows)?
        }
        Format::Json => {
            let outcomes: Vec<_> = e.iter().collect();
            serde_json::to_string_pretty(&json!({
                "params": cfg.params,
                "total_mass": e.total_mass(),
                "ambiguous_mass": e.ambiguous_mass(),
                "outcomes": outcomes,
            }))? + "\n"
        }
    };
    emit(cfg.out.as_deref(), &text, out)?;
    if let Some(p) = &cfg.out {
        writeln!(
            out,
            "{} events, total mass {:.12}, ambiguous mass {:.12} -> {}",
            e.len(),
            e.total_mass(),
            e.ambiguous_mass(),
            p.display()
        )
        .map_err(io_err)?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_verify(
    cfg: &RunConfig,
    samples: usize,
    perturb: f64,
    out: &mut dyn Write,
) -> Result<i32> {
    let alphas: Vec<f64> = if cfg.alpha_given {
        vec![cfg.params.alpha]
    } else {
        VERIFY_ALPHA_GRID.to_vec()
    };
    if let Some(a) = alphas.iter().find(|&&a| a > VERIFY_MAX_ALPHA) {
        return Err(Error::InvalidParams(format!(
            "verify supports alpha <= {VERIFY_MAX_ALPHA} (oracle truncation), got {a}"
        )));
    }
    let mut thetas = vec![cfg.params.theta];
    thetas.extend(seeded_theta_triples(cfg.seed, samples));
    let mut reports: Vec<VerifyReport> = Vec::new();
    let mut worst: Option<VerifyReport> = None;
    for &alpha in &alphas {
        for theta in &thetas {
            let mut p =
                ProtocolParams::new(alpha, *theta)?.with_tail_budget(cfg.params.tail_budget)?;
            if cfg.params.cutoff != crate::protocol::default_cutoff(cfg.params.alpha) {
                p = p.with_cutoff(cfg.params.cutoff);
            }
            let r = match verify_against_oracle(&p, perturb, DEFAULT_FOCK_TAIL) {
                Ok(r) => r,
                Err(e @ Error::TailBudget { .. }) => {
                    writeln!(out, "alpha {alpha}: {e}").map_err(io_err)?;
                    return Ok(EXIT_FAILURE);
                }
                Err(e) => return Err(e),
            };
            if worst
                .as_ref()
                .map_or(true, |w| r.max_deviation() > w.max_deviation())
            {
                worst = Some(r.clone());
            }
            reports.push(r);
        }
    }
    let worst = worst.expect("at least one point");
    let pass = reports.iter().all(|r| r.passes(VERIFY_TOLERANCE));
    let text = match cfg.format {
        Format::Json => {
            serde_json::to_string_pretty(&json!({
                "tolerance": VERIFY_TOLERANCE,
                "pass": pass,
                "worst": worst,
                "points": reports,
            }))? + "\n"
        }
        Format::Csv => {
            let mut s = String::new();
            for r in &reports {
                s += &format!(
                    "alpha {:<4} theta ({:.4}, {:.4}, {:.4}): {} events, dP {:.3e} at {}, dF {:.3e} at {} {}\n",
                    r.alpha,
                    r.theta[0],
                    r.theta[1],
                    r.theta[2],
                    r.events,
                    r.max_probability_deviation,
                    r.max_probability_event,
                    r.max_fidelity_deviation,
                    r.max_fidelity_event,
                    r.max_fidelity_leg
                );
            }
            let where_ = if worst.max_probability_deviation >= worst.max_fidelity_deviation {
                format!("probability of event {}", worst.max_probability_event)
            } else {
                format!(
                    "fidelity of leg {} in event {}",
                    worst.max_fidelity_leg, worst.max_fidelity_event
                )
            };
            s += &format!(
                "max deviation {:.3e} at alpha {} ({}): {}\n",
                worst.max_deviation(),
                worst.alpha,
                where_,
                if pass { "PASS" } else { "FAIL" }
            );
            s
        }
    };
    emit(cfg.out.as_deref(), &text, out)?;
    Ok(if pass { EXIT_OK } else { EXIT_FAILURE })
}

#[derive(Serialize)]
struct DerivedRow {
    case: String,
    parity_class: usize,
    parities: String,
    mode4: String,
    mode5: String,
    mode6: String,
    op4: String,
    op5: String,
    op6: String,
    faithful: bool,
}

#[derive(Serialize)]
struct MismatchRow {
    case: String,
    parity_class: Option<usize>,
    field: String,
    printed: String,
    derived: String,
    kind: MismatchKind,
    note: String,
}

pub fn cmd_tables(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let report = table_report()?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let (table_path, diff_path) = match cfg.format {
        Format::Csv => (dir.join("derived_table.csv"), dir.join("table_diff.csv")),
        Format::Json => (dir.join("derived_table.json"), dir.join("table_diff.json")),
    };
    match cfg.format {
        Format::Csv => {
            let rows: Vec<DerivedRow> = report
                .derived
                .iter()
                .map(|r| DerivedRow {
                    case: r.case.name().into(),
                    parity_class: r.parity_class,
                    parities: parity_string(r.parities),
                    mode4: r.states[0].to_string(),
                    mode5: r.states[1].to_string(),
                    mode6: r.states[2].to_string(),
                    op4: r.ops[0].code().into(),
                    op5: r.ops[1].code().into(),
                    op6: r.ops[2].code().into(),
                    faithful: r.faithful,
                })
                .collect();
            write_file(&table_path, &csv_string(&rows)?)?;
            let diff: Vec<MismatchRow> = report
                .mismatches
                .iter()
                .map(|m| MismatchRow {
                    case: m.case.name().into(),
                    parity_class: m.parity_class,
                    field: m.field.clone(),
                    printed: m.printed.clone(),
                    derived: m.derived.clone(),
                    kind: m.kind,
                    note: m.note.clone(),
                })
                .collect();
            write_file(&diff_path, &csv_string(&diff)?)?;
        }
        Format::Json => {
            write_file(
                &table_path,
                &(serde_json::to_string_pretty(&report.derived)? + "\n"),
            )?;
            write_file(
                &diff_path,
                &(serde_json::to_string_pretty(&report.mismatches)? + "\n"),
            )?;
        }
    }
    let faithful = report.derived.iter().filter(|r| r.faithful).count();
    let typos = report
        .mismatches
        .iter()
        .filter(|m| m.kind == MismatchKind::PrintedTypo)
        .count();
    let divergences = report.mismatches.len() - typos;
    writeln!(
        out,
        "{} derived rows, {} faithful; {} mismatches against the printed tables ({} typos, {} layout divergences)",
        report.derived.len(),
        faithful,
        report.mismatches.len(),
        typos,
        divergences
    )
    .map_err(io_err)?;
    writeln!(
        out,
        "table -> {}\ndiff  -> {}",
        table_path.display(),
        diff_path.display()
    )
    .map_err(io_err)?;
    for p in &report.problems {
        writeln!(out, "problem: {p}").map_err(io_err)?;
    }
    Ok(if report.problems.is_empty() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    })
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = RunConfig::from_common(&args.common)?;
    let p = cfg.params;
    let mut spec = SweepSpec::new(
        args.alpha_grid.clone().unwrap_or_else(|| vec![p.alpha]),
        args.theta1_grid.clone().unwrap_or_else(|| vec![p.theta[0]]),
        args.theta2_grid.clone().unwrap_or_else(|| vec![p.theta[1]]),
        args.theta3_grid.clone().unwrap_or_else(|| vec![p.theta[2]]),
    );
    spec.cutoff = args.common.cutoff;
    spec.tail_budget = p.tail_budget;
    let result = run_sweep(&spec)?;
    let text = match cfg.format {
        Format::Csv => result.csv()?,
        Format::Json => {
            serde_json::to_string_pretty(&json!({
                "summary": result.summary,
                "rows": result.rows,
            }))? + "\n"
        }
    };
    emit(cfg.out.as_deref(), &text, out)?;
    if let Some(path) = &args.summary {
        write_file(path, &(result.summary_json()? + "\n"))?;
    }
    if cfg.out.is_some() {
        let t = &result.summary.totals;
        writeln!(
            out,
            "{} points, {} rows, min total mass {:.12}, max |closed-form deviation| {:.3e}",
            t.points, t.rows, t.min_total_mass, t.max_abs_deviation
        )
        .map_err(io_err)?;
        for c in &result.summary.chains {
            writeln!(
                out,
                "chain {}: {}",
                c.name,
                if c.pass { "pass" } else { "fail" }
            )
            .map_err(io_err)?;
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_audit(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let p = cfg.params;
    let audit = audit_closed_forms(&AUDIT_ALPHA_GRID, p.theta)?;
    let alphas = [0.5, 1.0, 1.5, 2.0, 2.5];
    let thetas: Vec<f64> = (0..5)
        .map(|k| k as f64 * std::f64::consts::PI / 4.0)
        .collect();
    let flat = flatness_probe(&alphas, &thetas, p.theta[1], p.theta[2])?;
    let text = match cfg.format {
        Format::Json => {
            serde_json::to_string_pretty(&json!({ "audit": audit, "flatness": flat }))? + "\n"
        }
        Format::Csv => {
            let mut s = csv_string(&audit.rows)?;
            s += &format!(
                "# max |deviation| inverse-square {:.6e}, verbatim {:.6e}, probability {:.6e}\n",
                audit.max_abs_deviation,
                audit.max_abs_deviation_verbatim,
                audit.max_abs_probability_deviation
            );
            s += "# flatness: alpha,theta1,avg_ab,avg_bc,avg_ca\n";
            for pt in &flat.points {
                s += &format!(
                    "# {},{},{},{},{}\n",
                    pt.alpha, pt.theta1, pt.averages[0], pt.averages[1], pt.averages[2]
                );
            }
            s += &format!(
                "# flatness spread (A→B) {:.6e}, largest spread across theta1 at fixed alpha {:.6e}\n",
                flat.spread, flat.theta_spread
            );
            s
        }
    };
    emit(cfg.out.as_deref(), &text, out)?;
    Ok(EXIT_OK)
}

/// Short label for a branch, e.g. `V 3:OEO`.
pub fn branch_label(case: crate::protocol::CaseId, parity_class: usize) -> String {
    format!("{} {}", case, class_label(parity_class))
}
