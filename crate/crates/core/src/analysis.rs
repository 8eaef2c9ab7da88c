//! Fidelity reports, equality chains, average fidelities, closed-form audit
//! and parameter sweeps.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{
    enumerate_outcomes, parity_string, CaseId, Enumeration, Leg, Parity, ProtocolParams,
    PARITY_ROWS,
};

/// Tolerance for equality chains among branch fidelities.
pub const CHAIN_TOLERANCE: f64 = 1e-10;

/// How the printed normalization symbols are read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// The printed polynomial is the inverse square of the constant.
    InverseSquare,
    /// The printed symbols taken literally.
    Verbatim,
}

/// (Nₐ, N₁ₐ) for coefficients `(a0, a1)` under a convention.
pub fn normalization_constants(a: (f64, f64), alpha: f64, convention: Convention) -> (f64, f64) {
    let (a0, a1) = a;
    let a2 = alpha * alpha;
    let info = a0 * a0 + a1 * a1 + 2.0 * (-4.0 * a2).exp() * a0 * a1;
    let odd = a0 * a0 + a1 * a1 - 2.0 * (-2.0 * a2).exp() * a0 * a1;
    match convention {
        Convention::InverseSquare => (info.powf(-0.5), odd.powf(-0.5)),
        // (N₁ₐ)^{-2} is printed as the square of `odd`
        Convention::Verbatim => (info, 1.0 / odd.abs()),
    }
}

/// Printed near-faithful fidelity `(N₁ₐNₐ)² e^{−π²/8α²} (a0 + a1 + 2e^{−2α²}a0a1)²`.
pub fn closed_form_fidelity(a: (f64, f64), alpha: f64, convention: Convention) -> f64 {
    let (na, n1a) = normalization_constants(a, alpha, convention);
    let (a0, a1) = a;
    let bracket = a0 + a1 + 2.0 * (-2.0 * alpha * alpha).exp() * a0 * a1;
    (n1a * na).powi(2) * (-PI * PI / (8.0 * alpha * alpha)).exp() * bracket * bracket
}

/// Printed branch probability `(Nₐ/8N₁ₐ)² ((1 − e^{−2α²})/(1 + e^{−2α²}))²`.
pub fn closed_form_probability(a: (f64, f64), alpha: f64, convention: Convention) -> f64 {
    let (na, n1a) = normalization_constants(a, alpha, convention);
    let e = (-2.0 * alpha * alpha).exp();
    (na / (8.0 * n1a)).powi(2) * ((1.0 - e) / (1.0 + e)).powi(2)
}

/// One (case, parity class, leg) entry of a fidelity report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchFidelity {
    pub case: CaseId,
    /// 1-based row in the parity-row order.
    pub parity_class: usize,
    pub parities: [Parity; 3],
    pub leg: Leg,
    /// Probability of the whole (case, parity class) branch.
    pub probability: f64,
    pub fidelity: f64,
    /// Printed expression for odd legs, 1 for even legs.
    pub closed_form: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FidelityReport {
    pub params: ProtocolParams,
    pub convention: Convention,
    pub rows: Vec<BranchFidelity>,
    pub total_mass: f64,
    pub ambiguous_mass: f64,
}

impl FidelityReport {
    pub fn get(&self, leg: Leg, case: CaseId, parity_class: usize) -> Option<&BranchFidelity> {
        self.rows
            .iter()
            .find(|r| r.leg == leg && r.case == case && r.parity_class == parity_class)
    }

    /// Sum of branch probabilities plus the Ambiguous mass.
    pub fn probability_sum(&self) -> f64 {
        // every class appears once per leg
        self.rows.iter().map(|r| r.probability).sum::<f64>() / 3.0 + self.ambiguous_mass
    }
}

pub fn fidelity_report(e: &Enumeration, convention: Convention) -> FidelityReport {
    let alpha = e.params.alpha;
    let mut rows = Vec::with_capacity(192);
    for case in CaseId::CASES {
        for (i, parities) in PARITY_ROWS.iter().enumerate() {
            let probability = e.class_mass(case, *parities);
            for leg in Leg::ALL {
                let fidelity = e
                    .branch_fidelity(leg, case, *parities)
                    .expect("lowest counts are always enumerated");
                let closed_form = match parities[leg.index()] {
                    Parity::Even => 1.0,
                    Parity::Odd => {
                        closed_form_fidelity(e.params.coefficients(leg), alpha, convention)
                    }
                };
                rows.push(BranchFidelity {
                    case,
                    parity_class: i + 1,
                    parities: *parities,
                    leg,
                    probability,
                    fidelity,
                    closed_form,
                    deviation: fidelity - closed_form,
                });
            }
        }
    }
    FidelityReport {
        params: e.params,
        convention,
        rows,
        total_mass: e.total_mass(),
        ambiguous_mass: e.ambiguous_mass(),
    }
}

/// A printed equality chain: all listed fidelities of one leg are equal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub name: String,
    pub leg: Leg,
    pub cases: Vec<CaseId>,
    pub classes: Vec<usize>,
}

/// The printed chains: per leg, two index groups within Case I and the same
/// groups across Cases II–VIII.
pub fn printed_chains() -> Vec<Chain> {
    let groups: [(Leg, [&[usize]; 2]); 3] = [
        (Leg::AliceToBob, [&[1, 2, 3, 8], &[4, 5, 6, 7]]),
        (Leg::BobToCharlie, [&[1, 2, 4, 6, 7], &[3, 5, 8]]),
        (Leg::CharlieToAlice, [&[1, 3, 4, 6], &[2, 5, 7, 8]]),
    ];
    let mut chains = Vec::new();
    for (cases, tag) in [(&CaseId::CASES[..1], "I"), (&CaseId::CASES[1..], "II-VIII")] {
        for (leg, sets) in groups {
            for set in sets {
                let idx: Vec<String> = set.iter().map(|i| i.to_string()).collect();
                chains.push(Chain {
                    name: format!("{} {} {{{}}}", leg.name(), tag, idx.join(",")),
                    leg,
                    cases: cases.to_vec(),
                    classes: set.to_vec(),
                });
            }
        }
    }
    chains
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainVerdict {
    pub name: String,
    pub pass: bool,
    /// max − min over the chain's fidelities.
    pub spread: f64,
}

/// Checks every printed chain on the report's direct fidelities.
pub fn fidelity_grouping_check(report: &FidelityReport, tol: f64) -> Vec<ChainVerdict> {
    printed_chains()
        .into_iter()
        .map(|chain| {
            let values: Vec<f64> = chain
                .cases
                .iter()
                .flat_map(|&case| chain.classes.iter().map(move |&i| (case, i)))
                .map(|(case, i)| {
                    report
                        .get(chain.leg, case, i)
                        .map_or(f64::NAN, |r| r.fidelity)
                })
                .collect();
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let spread = if values.iter().any(|v| v.is_nan()) {
                f64::NAN
            } else {
                max - min
            };
            ChainVerdict {
                name: chain.name,
                pass: spread <= tol,
                spread,
            }
        })
        .collect()
}

pub const AVERAGE_CONDITIONING: &str =
    "branches weighted by probability, renormalized over cases I-VIII (Ambiguous excluded)";

/// Probability-weighted fidelity of one leg over cases I–VIII.
pub fn average_fidelity(e: &Enumeration, leg: Leg) -> f64 {
    e.average_fidelity(leg)
}

/// Weighted fidelity of one leg restricted to all-even events.
pub fn all_even_average(e: &Enumeration, leg: Leg) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for r in e.iter() {
        if r.faithful {
            num += r.probability * r.fidelities[leg.index()];
            den += r.probability;
        }
    }
    num / den
}

/// What a sweep emits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepOutputs {
    pub branches: bool,
    pub averages: bool,
}

impl Default for SweepOutputs {
    fn default() -> Self {
        SweepOutputs {
            branches: true,
            averages: true,
        }
    }
}

/// Grid of parameter points; θ grids are combined as a Cartesian product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub alphas: Vec<f64>,
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub theta3: Vec<f64>,
    pub outputs: SweepOutputs,
    pub convention: Convention,
    pub cutoff: Option<u32>,
    pub tail_budget: f64,
}

impl SweepSpec {
    pub fn new(alphas: Vec<f64>, theta1: Vec<f64>, theta2: Vec<f64>, theta3: Vec<f64>) -> Self {
        SweepSpec {
            alphas,
            theta1,
            theta2,
            theta3,
            outputs: SweepOutputs::default(),
            convention: Convention::InverseSquare,
            cutoff: None,
            tail_budget: crate::protocol::DEFAULT_TAIL_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let grids = [&self.alphas, &self.theta1, &self.theta2, &self.theta3];
        if grids.iter().any(|g| g.is_empty()) {
            return Err(Error::InvalidParams("sweep grids must be non-empty".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::InvalidParams(format!(
                "sweep alpha must be positive, got {a}"
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> Result<Vec<ProtocolParams>> {
        self.validate()?;
        let mut out = Vec::new();
        for &alpha in &self.alphas {
            for &t1 in &self.theta1 {
                for &t2 in &self.theta2 {
                    for &t3 in &self.theta3 {
                        let mut p = ProtocolParams::new(alpha, [t1, t2, t3])?
                            .with_tail_budget(self.tail_budget)?;
                        if let Some(c) = self.cutoff {
                            p = p.with_cutoff(c);
                        }
                        out.push(p);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One CSV row. Average rows use case `AVG` and leave the branch-only
/// columns empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub leg: String,
    pub case: String,
    pub parity_class: Option<usize>,
    pub probability: f64,
    pub fidelity: f64,
    pub closed_form: Option<f64>,
    pub deviation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTotals {
    pub points: usize,
    pub rows: usize,
    pub min_total_mass: f64,
    pub max_ambiguous_mass: f64,
    pub max_abs_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub params: SweepSpec,
    pub totals: SweepTotals,
    /// A chain passes when it holds at every point.
    pub chains: Vec<ChainVerdict>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

/// Rows for one parameter point.
pub fn point_rows(
    e: &Enumeration,
    report: &FidelityReport,
    outputs: SweepOutputs,
) -> Vec<SweepRow> {
    let p = e.params;
    let base = |leg: Leg, case: String| SweepRow {
        alpha: p.alpha,
        theta1: p.theta[0],
        theta2: p.theta[1],
        theta3: p.theta[2],
        leg: leg.name().to_string(),
        case,
        parity_class: None,
        probability: 0.0,
        fidelity: 0.0,
        closed_form: None,
        deviation: None,
    };
    let mut rows = Vec::new();
    if outputs.branches {
        for r in &report.rows {
            rows.push(SweepRow {
                parity_class: Some(r.parity_class),
                probability: r.probability,
                fidelity: r.fidelity,
                closed_form: Some(r.closed_form),
                deviation: Some(r.deviation),
                ..base(r.leg, r.case.name().to_string())
            });
        }
    }
    if outputs.averages {
        let lit = e.total_mass() - e.ambiguous_mass();
        for leg in Leg::ALL {
            rows.push(SweepRow {
                probability: lit,
                fidelity: average_fidelity(e, leg),
                ..base(leg, "AVG".to_string())
            });
        }
    }
    rows
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    let points = spec.points()?;
    let mut rows = Vec::new();
    let mut chains: Vec<ChainVerdict> = Vec::new();
    let mut totals = SweepTotals {
        points: points.len(),
        rows: 0,
        min_total_mass: f64::INFINITY,
        max_ambiguous_mass: 0.0,
        max_abs_deviation: 0.0,
    };
    for params in &points {
        let e = enumerate_outcomes(params)?;
        let report = fidelity_report(&e, spec.convention);
        let verdicts = fidelity_grouping_check(&report, CHAIN_TOLERANCE);
        if chains.is_empty() {
            chains = verdicts;
        } else {
            for (acc, v) in chains.iter_mut().zip(verdicts) {
                acc.pass &= v.pass;
                acc.spread = acc.spread.max(v.spread);
            }
        }
        totals.min_total_mass = totals.min_total_mass.min(e.total_mass());
        totals.max_ambiguous_mass = totals.max_ambiguous_mass.max(e.ambiguous_mass());
        for r in &report.rows {
            totals.max_abs_deviation = totals.max_abs_deviation.max(r.deviation.abs());
        }
        rows.extend(point_rows(&e, &report, spec.outputs));
    }
    totals.rows = rows.len();
    let notes = vec![
        format!("average fidelity: {AVERAGE_CONDITIONING}"),
        format!(
            "closed forms evaluated under the {} convention; deviation = direct - closed form",
            match spec.convention {
                Convention::InverseSquare => "inverse-square",
                Convention::Verbatim => "verbatim",
            }
        ),
        "AVG rows: probability is the non-ambiguous mass".to_string(),
    ];
    Ok(SweepResult {
        rows,
        summary: SweepSummary {
            params: spec.clone(),
            totals,
            chains,
            notes,
        },
    })
}

pub fn write_csv<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

impl SweepResult {
    pub fn csv(&self) -> Result<String> {
        csv_string(&self.rows)
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary)?)
    }
}

/// Closed-form audit entry for the odd branch of one leg at one α.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub alpha: f64,
    pub leg: String,
    pub theta: f64,
    pub direct: f64,
    pub closed_form: f64,
    pub closed_form_verbatim: f64,
    pub deviation: f64,
    pub deviation_verbatim: f64,
    /// Case I, all-odd class probability.
    pub class_probability: f64,
    pub probability_closed_form: f64,
    pub probability_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub rows: Vec<AuditRow>,
    pub max_abs_deviation: f64,
    pub max_abs_deviation_verbatim: f64,
    pub max_abs_probability_deviation: f64,
}

/// Compares the printed odd-branch fidelity and probability against direct
/// values on an α grid. Nothing is asserted; the deviations are the output.
pub fn audit_closed_forms(alphas: &[f64], theta: [f64; 3]) -> Result<AuditReport> {
    let mut rows = Vec::new();
    for &alpha in alphas {
        let params = ProtocolParams::new(alpha, theta)?;
        let e = enumerate_outcomes(&params)?;
        let odd = [Parity::Odd; 3];
        let class_probability = e.class_mass(CaseId::I, odd);
        for leg in Leg::ALL {
            let a = params.coefficients(leg);
            let direct = e.branch_fidelity(leg, CaseId::I, odd).expect("enumerated");
            let cf = closed_form_fidelity(a, alpha, Convention::InverseSquare);
            let cfv = closed_form_fidelity(a, alpha, Convention::Verbatim);
            let pcf = closed_form_probability(a, alpha, Convention::InverseSquare);
            rows.push(AuditRow {
                alpha,
                leg: leg.name().to_string(),
                theta: theta[leg.index()],
                direct,
                closed_form: cf,
                closed_form_verbatim: cfv,
                deviation: direct - cf,
                deviation_verbatim: direct - cfv,
                class_probability,
                probability_closed_form: pcf,
                probability_deviation: class_probability - pcf,
            });
        }
    }
    let max = |f: fn(&AuditRow) -> f64| rows.iter().map(|r| f(r).abs()).fold(0.0, f64::max);
    Ok(AuditReport {
        max_abs_deviation: max(|r| r.deviation),
        max_abs_deviation_verbatim: max(|r| r.deviation_verbatim),
        max_abs_probability_deviation: max(|r| r.probability_deviation),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatnessPoint {
    pub alpha: f64,
    pub theta1: f64,
    /// Average fidelity per leg.
    pub averages: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub theta2: f64,
    pub theta3: f64,
    pub points: Vec<FlatnessPoint>,
    /// max − min of the A→B average over the whole grid.
    pub spread: f64,
    /// Largest A→B spread across θ₁ at a fixed α.
    pub theta_spread: f64,
}

/// Average fidelity on an (α, θ₁) grid with θ₂, θ₃ fixed.
pub fn flatness_probe(
    alphas: &[f64],
    theta1: &[f64],
    theta2: f64,
    theta3: f64,
) -> Result<FlatnessReport> {
    let mut points = Vec::new();
    let mut theta_spread: f64 = 0.0;
    for &alpha in alphas {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &t1 in theta1 {
            let e = enumerate_outcomes(&ProtocolParams::new(alpha, [t1, theta2, theta3])?)?;
            let averages = Leg::ALL.map(|l| average_fidelity(&e, l));
            lo = lo.min(averages[0]);
            hi = hi.max(averages[0]);
            points.push(FlatnessPoint {
                alpha,
                theta1: t1,
                averages,
            });
        }
        theta_spread = theta_spread.max(hi - lo);
    }
    let ab = points.iter().map(|p| p.averages[0]);
    let spread = ab.clone().fold(f64::NEG_INFINITY, f64::max) - ab.fold(f64::INFINITY, f64::min);
    Ok(FlatnessReport {
        theta2,
        theta3,
        points,
        spread,
        theta_spread,
    })
}

/// Odd-branch (Case I, all-odd) A→B fidelity along an α grid.
pub fn odd_fidelity_trend(alphas: &[f64], theta: f64) -> Result<Vec<(f64, f64)>> {
    alphas
        .iter()
        .map(|&alpha| {
            let e = enumerate_outcomes(&ProtocolParams::new(alpha, [theta; 3])?)?;
            let f = e
                .branch_fidelity(Leg::AliceToBob, CaseId::I, [Parity::Odd; 3])
                .expect("enumerated");
            Ok((alpha, f))
        })
        .collect()
}

/// Label for a parity class, e.g. `3:OEO`.
pub fn class_label(parity_class: usize) -> String {
    format!(
        "{}:{}",
        parity_class,
        parity_string(PARITY_ROWS[parity_class - 1])
    )
}
