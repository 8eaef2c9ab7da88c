//! The cyclic teleportation protocol: state preparation, mode wiring,
//! detection-event classification, heralding and correction.
//!
//! Three Bell coherent pairs share modes (1,4), (2,5), (3,6). Alice mixes her
//! cat state on `a` with mode 1, Bob mixes `b` with 2, Charlie mixes `c` with
//! 3. The six detector counts (n7..n12) herald a product state on modes 4, 5,
//! 6, which the receivers correct with phase shifts and displacements.

mod enumerate;
pub mod tables;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::coherent::{fidelity, ModeLabel, SuperposedState, C64};
use crate::error::{Error, Result};

pub use enumerate::{
    compute_leg_table, corrected_fidelity, enumerate_outcomes, herald_leg, leg_pairs,
    mixed_leg_state, Enumeration, LegBranch, LegTable, OutcomeRecord,
};

/// Schmidt/factorization tolerance for heralded product states.
pub const FACTORIZATION_TOLERANCE: f64 = 1e-10;

/// Default per-detector photon cutoff: `ceil(2α² + 8α + 10)`.
pub fn default_cutoff(alpha: f64) -> u32 {
    (2.0 * alpha * alpha + 8.0 * alpha + 10.0).ceil() as u32
}

pub const DEFAULT_TAIL_BUDGET: f64 = 1e-9;

/// One of the three teleportation legs, named by sender and receiver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Leg {
    #[serde(rename = "A→B")]
    AliceToBob,
    #[serde(rename = "B→C")]
    BobToCharlie,
    #[serde(rename = "C→A")]
    CharlieToAlice,
}

impl Leg {
    pub const ALL: [Leg; 3] = [Leg::AliceToBob, Leg::BobToCharlie, Leg::CharlieToAlice];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Leg::AliceToBob => "A→B",
            Leg::BobToCharlie => "B→C",
            Leg::CharlieToAlice => "C→A",
        }
    }

    /// Mode holding the sender's information state.
    pub fn info_mode(self) -> ModeLabel {
        ModeLabel::Name(['a', 'b', 'c'][self.index()])
    }

    /// Channel mode mixed with the information mode.
    pub fn source_mode(self) -> ModeLabel {
        ModeLabel::Port(1 + self.index() as u8)
    }

    /// Channel mode on which the teleported state arrives.
    pub fn receiver_mode(self) -> ModeLabel {
        ModeLabel::Port(4 + self.index() as u8)
    }

    pub fn sum_port(self) -> ModeLabel {
        ModeLabel::Port(7 + 2 * self.index() as u8)
    }

    pub fn difference_port(self) -> ModeLabel {
        ModeLabel::Port(8 + 2 * self.index() as u8)
    }
}

impl fmt::Display for Leg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which detector of a pair fired.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Port {
    Sum,
    Difference,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(n: u32) -> Parity {
        if n % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Parity::Even => 'E',
            Parity::Odd => 'O',
        }
    }
}

/// Parity triples (Alice, Bob, Charlie) in the row order of the printed
/// correction tables; a branch's parity class is its 1-based position here.
pub const PARITY_ROWS: [[Parity; 3]; 8] = {
    use Parity::{Even as E, Odd as O};
    [
        [O, O, O],
        [O, O, E],
        [O, E, O],
        [E, O, O],
        [E, E, E],
        [E, E, O],
        [E, O, E],
        [O, E, E],
    ]
};

pub fn parity_class(parities: [Parity; 3]) -> usize {
    PARITY_ROWS
        .iter()
        .position(|row| *row == parities)
        .expect("every parity triple has a row")
        + 1
}

pub fn parity_string(parities: [Parity; 3]) -> String {
    parities.iter().map(|p| p.symbol()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseId {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
    VIII,
    Ambiguous,
    Impossible,
}

impl CaseId {
    pub const CASES: [CaseId; 8] = [
        CaseId::I,
        CaseId::II,
        CaseId::III,
        CaseId::IV,
        CaseId::V,
        CaseId::VI,
        CaseId::VII,
        CaseId::VIII,
    ];

    /// Lit detector per pair (7/8, 9/10, 11/12) for the eight proper cases.
    pub fn ports(self) -> Option<[Port; 3]> {
        use Port::{Difference as D, Sum as S};
        Some(match self {
            CaseId::I => [S, S, S],
            CaseId::II => [D, D, D],
            CaseId::III => [S, S, D],
            CaseId::IV => [S, D, S],
            CaseId::V => [S, D, D],
            CaseId::VI => [D, S, S],
            CaseId::VII => [D, S, D],
            CaseId::VIII => [D, D, S],
            CaseId::Ambiguous | CaseId::Impossible => return None,
        })
    }

    pub fn from_ports(ports: [Port; 3]) -> CaseId {
        *CaseId::CASES
            .iter()
            .find(|c| c.ports() == Some(ports))
            .expect("all eight port patterns are cases")
    }

    pub fn is_case(self) -> bool {
        self.ports().is_some()
    }

    pub fn name(self) -> &'static str {
        match self {
            CaseId::I => "I",
            CaseId::II => "II",
            CaseId::III => "III",
            CaseId::IV => "IV",
            CaseId::V => "V",
            CaseId::VI => "VI",
            CaseId::VII => "VII",
            CaseId::VIII => "VIII",
            CaseId::Ambiguous => "Ambiguous",
            CaseId::Impossible => "Impossible",
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Photon counts (n7, n8, n9, n10, n11, n12).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub counts: [u32; 6],
}

impl DetectionEvent {
    pub fn new(counts: [u32; 6]) -> Self {
        DetectionEvent { counts }
    }

    pub fn from_pairs(pairs: [(u32, u32); 3]) -> Self {
        let [(a, b), (c, d), (e, f)] = pairs;
        DetectionEvent::new([a, b, c, d, e, f])
    }

    pub fn pair(&self, leg: Leg) -> (u32, u32) {
        let k = 2 * leg.index();
        (self.counts[k], self.counts[k + 1])
    }

    pub fn pairs(&self) -> [(u32, u32); 3] {
        Leg::ALL.map(|l| self.pair(l))
    }
}

impl fmt::Display for DetectionEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.counts;
        write!(f, "({},{},{},{},{},{})", c[0], c[1], c[2], c[3], c[4], c[5])
    }
}

/// What a single detector pair reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairReading {
    Silent,
    Lit(Port, Parity),
    Both,
}

pub fn read_pair((sum, diff): (u32, u32)) -> PairReading {
    match (sum, diff) {
        (0, 0) => PairReading::Silent,
        (n, 0) => PairReading::Lit(Port::Sum, Parity::of(n)),
        (0, n) => PairReading::Lit(Port::Difference, Parity::of(n)),
        _ => PairReading::Both,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub case: CaseId,
    /// Parity of the nonzero count in each pair; only for cases I–VIII.
    pub parities: Option<[Parity; 3]>,
}

/// Classifies an event. A pair with both detectors lit makes the event
/// Impossible even when another pair is silent.
pub fn classify_event(event: &DetectionEvent) -> Classification {
    let readings = event.pairs().map(read_pair);
    if readings.contains(&PairReading::Both) {
        return Classification {
            case: CaseId::Impossible,
            parities: None,
        };
    }
    if readings.contains(&PairReading::Silent) {
        return Classification {
            case: CaseId::Ambiguous,
            parities: None,
        };
    }
    let mut ports = [Port::Sum; 3];
    let mut parities = [Parity::Even; 3];
    for (k, r) in readings.iter().enumerate() {
        if let PairReading::Lit(port, parity) = *r {
            ports[k] = port;
            parities[k] = parity;
        }
    }
    Classification {
        case: CaseId::from_ports(ports),
        parities: Some(parities),
    }
}

/// Validated protocol parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub alpha: f64,
    pub theta: [f64; 3],
    pub cutoff: u32,
    pub tail_budget: f64,
}

impl ProtocolParams {
    pub fn new(alpha: f64, theta: [f64; 3]) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParams(format!(
                "alpha must be a finite positive number, got {alpha}"
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParams("theta values must be finite".into()));
        }
        Ok(ProtocolParams {
            alpha,
            theta,
            cutoff: default_cutoff(alpha),
            tail_budget: DEFAULT_TAIL_BUDGET,
        })
    }

    pub fn with_cutoff(mut self, cutoff: u32) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn with_tail_budget(mut self, budget: f64) -> Result<Self> {
        if !(budget.is_finite() && budget >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "tail budget must be non-negative, got {budget}"
            )));
        }
        self.tail_budget = budget;
        Ok(self)
    }

    /// `(cos θ, sin θ)` for the leg's information state.
    pub fn coefficients(&self, leg: Leg) -> (f64, f64) {
        let t = self.theta[leg.index()];
        (t.cos(), t.sin())
    }

    pub fn alpha_c(&self) -> C64 {
        C64::new(self.alpha, 0.0)
    }
}

/// `Ñ(|α,α⟩ + |−α,−α⟩)` on `(i, j)`, built by sending an even cat of
/// amplitude √2·α and the vacuum through the beam splitter.
pub fn prepare_bell_pair(alpha: f64, i: ModeLabel, j: ModeLabel) -> Result<SuperposedState> {
    let one = C64::new(1.0, 0.0);
    let cat = SuperposedState::cat(i, one, one, C64::new(alpha * 2f64.sqrt(), 0.0));
    cat.tensor(&SuperposedState::vacuum(j))?
        .apply_bps(i, j, i, j)?
        .normalize()
}

/// Three Bell pairs over modes 1..6, pairs (1,4), (2,5), (3,6).
pub fn prepare_channel(alpha: f64) -> Result<SuperposedState> {
    let mut state: Option<SuperposedState> = None;
    for leg in Leg::ALL {
        let pair = prepare_bell_pair(alpha, leg.source_mode(), leg.receiver_mode())?;
        state = Some(match state {
            None => pair,
            Some(s) => s.tensor(&pair)?,
        });
    }
    let order: Vec<ModeLabel> = (1..=6).map(ModeLabel::Port).collect();
    state
        .expect("three legs")
        .with_modes_permuted(&order)?
        .normalize()
}

/// Normalized `cos θ|α⟩ + sin θ|−α⟩` on `mode`.
pub fn info_state(mode: ModeLabel, theta: f64, alpha: f64) -> Result<SuperposedState> {
    SuperposedState::cat(
        mode,
        C64::new(theta.cos(), 0.0),
        C64::new(theta.sin(), 0.0),
        C64::new(alpha, 0.0),
    )
    .normalize()
}

pub fn prepare_info_states(theta: [f64; 3], alpha: f64) -> Result<[SuperposedState; 3]> {
    let [a, b, c] = Leg::ALL.map(|l| info_state(l.info_mode(), theta[l.index()], alpha));
    Ok([a?, b?, c?])
}

/// Information states ⊗ channel, over modes a, b, c, 1..6.
pub fn global_state(params: &ProtocolParams) -> Result<SuperposedState> {
    let [a, b, c] = prepare_info_states(params.theta, params.alpha)?;
    a.tensor(&b)?
        .tensor(&c)?
        .tensor(&prepare_channel(params.alpha)?)
}

/// Beam splitters (a,1)→(7,8), (b,2)→(9,10), (c,3)→(11,12).
pub fn mix_network(global: &SuperposedState) -> Result<SuperposedState> {
    let mut state = global.clone();
    for leg in Leg::ALL {
        state = state.apply_bps(
            leg.info_mode(),
            leg.source_mode(),
            leg.sum_port(),
            leg.difference_port(),
        )?;
    }
    Ok(state)
}

/// Contracts the detector modes with the event's Fock states; returns the
/// un-normalized state on modes 4, 5, 6 and its squared norm.
pub fn herald(
    post_mix: &SuperposedState,
    event: &DetectionEvent,
) -> Result<(SuperposedState, f64)> {
    let mut counts = Vec::with_capacity(6);
    for leg in Leg::ALL {
        let (s, d) = event.pair(leg);
        counts.push((leg.sum_port(), s));
        counts.push((leg.difference_port(), d));
    }
    let raw = post_mix.project_fock_many(&counts, None)?;
    let order: Vec<ModeLabel> = Leg::ALL.iter().map(|l| l.receiver_mode()).collect();
    let raw = raw.with_modes_permuted(&order)?;
    let p = raw.norm_sqr().max(0.0);
    Ok((raw, p))
}

/// Unitary applied by a receiver to its mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CorrectionOp {
    Identity,
    /// Phase shift by π.
    Phase,
    /// Displacement by iπ/(2α).
    Displace,
    /// Phase shift by π, then displacement by iπ/(2α).
    PhaseDisplace,
}

impl CorrectionOp {
    pub fn new(phase: bool, displace: bool) -> Self {
        match (phase, displace) {
            (false, false) => CorrectionOp::Identity,
            (true, false) => CorrectionOp::Phase,
            (false, true) => CorrectionOp::Displace,
            (true, true) => CorrectionOp::PhaseDisplace,
        }
    }

    /// Correction for one lit detector pair.
    pub fn for_reading(port: Port, parity: Parity) -> Self {
        CorrectionOp::new(port == Port::Difference, parity == Parity::Odd)
    }

    pub fn has_phase(self) -> bool {
        matches!(self, CorrectionOp::Phase | CorrectionOp::PhaseDisplace)
    }

    pub fn has_displacement(self) -> bool {
        matches!(self, CorrectionOp::Displace | CorrectionOp::PhaseDisplace)
    }

    /// Short code used in tables: `I`, `P`, `D`, `DP` (D after P).
    pub fn code(self) -> &'static str {
        match self {
            CorrectionOp::Identity => "I",
            CorrectionOp::Phase => "P",
            CorrectionOp::Displace => "D",
            CorrectionOp::PhaseDisplace => "DP",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Some(match code {
            "I" => CorrectionOp::Identity,
            "P" => CorrectionOp::Phase,
            "D" => CorrectionOp::Displace,
            "DP" => CorrectionOp::PhaseDisplace,
            _ => return None,
        })
    }

    pub fn apply(
        self,
        state: &SuperposedState,
        mode: ModeLabel,
        alpha: f64,
    ) -> Result<SuperposedState> {
        let mut out = state.clone();
        if self.has_phase() {
            out = out.phase_shift(mode, PI)?;
        }
        if self.has_displacement() {
            out = out.displace(mode, displacement_amount(alpha))?;
        }
        Ok(out)
    }
}

impl fmt::Display for CorrectionOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrectionOp::Identity => "I",
            CorrectionOp::Phase => "P(π)",
            CorrectionOp::Displace => "D(iπ/2α)",
            CorrectionOp::PhaseDisplace => "D(iπ/2α)·P(π)",
        })
    }
}

/// δ = iπ/(2α).
pub fn displacement_amount(alpha: f64) -> C64 {
    C64::new(0.0, PI / (2.0 * alpha))
}

/// Per-receiver corrections for modes 4, 5, 6.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorrectionPlan {
    pub ops: [CorrectionOp; 3],
    pub faithful: bool,
}

impl CorrectionPlan {
    pub fn op(&self, leg: Leg) -> CorrectionOp {
        self.ops[leg.index()]
    }
}

pub fn plan_correction(case: CaseId, parities: [Parity; 3]) -> Result<CorrectionPlan> {
    let ports = case.ports().ok_or(Error::NotACase(case))?;
    let ops = [0, 1, 2].map(|k| CorrectionOp::for_reading(ports[k], parities[k]));
    Ok(CorrectionPlan {
        ops,
        faithful: parities.iter().all(|&p| p == Parity::Even),
    })
}

/// Correction a receiver derives from the single count pair it was sent.
/// A silent pair leaves the mode untouched.
pub fn correction_for_pair(pair: (u32, u32)) -> CorrectionOp {
    match read_pair(pair) {
        PairReading::Lit(port, parity) => CorrectionOp::for_reading(port, parity),
        PairReading::Silent | PairReading::Both => CorrectionOp::Identity,
    }
}

/// A heralded event, its state on modes 4, 5, 6 and the corrected result.
#[derive(Clone, Debug)]
pub struct HeraldedOutcome {
    pub event: DetectionEvent,
    pub case: CaseId,
    pub parities: Option<[Parity; 3]>,
    pub probability: f64,
    /// Un-normalized post-measurement state on modes 4, 5, 6.
    pub raw_state: SuperposedState,
    pub plan: Option<CorrectionPlan>,
    /// Corrected single-mode states (modes 4, 5, 6); absent for Impossible.
    pub corrected: Option<[SuperposedState; 3]>,
    /// F(A→B), F(B→C), F(C→A); absent for Impossible.
    pub fidelities: Option<[f64; 3]>,
}

impl HeraldedOutcome {
    pub fn faithful(&self) -> bool {
        self.plan.map(|p| p.faithful).unwrap_or(false)
    }
}

/// Full nine-mode path: prepare, mix, project all six detectors, factorize
/// the heralded state and correct each factor.
pub fn herald_outcome(params: &ProtocolParams, event: DetectionEvent) -> Result<HeraldedOutcome> {
    let post_mix = mix_network(&global_state(params)?)?;
    herald_outcome_from(params, &post_mix, event)
}

/// Like [`herald_outcome`], reusing an already mixed global state.
pub fn herald_outcome_from(
    params: &ProtocolParams,
    post_mix: &SuperposedState,
    event: DetectionEvent,
) -> Result<HeraldedOutcome> {
    let class = classify_event(&event);
    let (raw, probability) = herald(post_mix, &event)?;
    let mut outcome = HeraldedOutcome {
        event,
        case: class.case,
        parities: class.parities,
        probability,
        raw_state: raw,
        plan: None,
        corrected: None,
        fidelities: None,
    };
    if class.case == CaseId::Impossible || outcome.raw_state.is_empty() {
        return Ok(outcome);
    }
    let ops = match class.parities {
        Some(parities) => {
            let plan = plan_correction(class.case, parities)?;
            outcome.plan = Some(plan);
            plan.ops
        }
        None => event.pairs().map(correction_for_pair),
    };
    let factors = outcome
        .raw_state
        .normalize_relative()?
        .factorize(FACTORIZATION_TOLERANCE)?;
    let mut corrected = Vec::with_capacity(3);
    let mut fids = [0.0; 3];
    for leg in Leg::ALL {
        let k = leg.index();
        let fixed = ops[k].apply(&factors[k], leg.receiver_mode(), params.alpha)?;
        let target = info_state(leg.receiver_mode(), params.theta[k], params.alpha)?;
        fids[k] = fidelity(&target, &fixed)?;
        corrected.push(fixed);
    }
    let [x, y, z]: [SuperposedState; 3] = corrected.try_into().expect("three legs");
    outcome.corrected = Some([x, y, z]);
    outcome.fidelities = Some(fids);
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn classification_examples() {
        let cl = classify_event(&DetectionEvent::new([2, 0, 4, 0, 6, 0]));
        assert_eq!(cl.case, CaseId::I);
        assert_eq!(cl.parities, Some([Parity::Even; 3]));
        let cl = classify_event(&DetectionEvent::new([0, 0, 1, 0, 1, 0]));
        assert_eq!(cl.case, CaseId::Ambiguous);
        let cl = classify_event(&DetectionEvent::new([1, 1, 0, 2, 0, 2]));
        assert_eq!(cl.case, CaseId::Impossible);
        let cl = classify_event(&DetectionEvent::new([0, 0, 1, 1, 3, 0]));
        assert_eq!(cl.case, CaseId::Impossible);
        let cl = classify_event(&DetectionEvent::new([0, 3, 0, 1, 2, 0]));
        assert_eq!(cl.case, CaseId::VIII);
        assert_eq!(cl.parities, Some([Parity::Odd, Parity::Odd, Parity::Even]));
    }

    #[test]
    fn case_port_patterns_are_distinct() {
        for (i, a) in CaseId::CASES.iter().enumerate() {
            assert_eq!(CaseId::from_ports(a.ports().unwrap()), *a);
            for b in &CaseId::CASES[i + 1..] {
                assert_ne!(a.ports(), b.ports());
            }
        }
    }

    #[test]
    fn parity_rows_cover_all_triples() {
        let mut seen: Vec<[Parity; 3]> = PARITY_ROWS.to_vec();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 8);
        assert_eq!(parity_class([Parity::Odd; 3]), 1);
        assert_eq!(parity_class([Parity::Even; 3]), 5);
    }

    #[test]
    fn bell_pair_matches_direct_construction() {
        let alpha = 1.0;
        let built = prepare_bell_pair(alpha, 4.into(), 5.into()).unwrap();
        let n = 1.0 / (2.0 * (1.0 + (-4.0f64).exp())).sqrt();
        assert_eq!(built.num_terms(), 2);
        for t in built.terms() {
            assert!((t.weight - c(n)).norm() < 1e-12);
            assert!((t.amplitudes[0] - t.amplitudes[1]).norm() < 1e-12);
            assert!((t.amplitudes[0].norm() - alpha).abs() < 1e-12);
        }
        let big = prepare_bell_pair(5.0, 4.into(), 5.into()).unwrap();
        assert!((big.weights()[0].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn channel_norm_matches_printed_constant() {
        for alpha in [0.3, 0.7, 1.0, 1.6] {
            let ch = prepare_channel(alpha).unwrap();
            assert_eq!(ch.num_terms(), 8);
            assert_eq!(ch.prune(1e-15).num_terms(), 8);
            let a2 = alpha * alpha;
            let printed = 8.0
                * (1.0 + (-12.0 * a2).exp() + 3.0 * (-8.0 * a2).exp() + 3.0 * (-4.0 * a2).exp());
            // weights are N_Ch·Ñ³ with Ñ for the raw sum; the raw 8-term sum has
            // squared norm equal to the printed bracket
            let w = ch.weights()[0].re;
            assert!((1.0 / (w * w) - printed).abs() < 1e-10 * printed);
            for t in ch.terms() {
                assert!((t.amplitudes[0] - t.amplitudes[3]).norm() < 1e-12);
                assert!((t.amplitudes[1] - t.amplitudes[4]).norm() < 1e-12);
                assert!((t.amplitudes[2] - t.amplitudes[5]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn info_state_examples() {
        let s = info_state('a'.into(), 0.0, 1.0).unwrap();
        assert!((s.weights()[0] - c(1.0)).norm() < 1e-15);
        assert!(s.weights()[1].norm() < 1e-15);
        let s = info_state('a'.into(), FRAC_PI_4, 1.0).unwrap();
        let n = 1.0 / (1.0 + (-2.0f64).exp()).sqrt();
        assert!((s.weights()[0].re - n * FRAC_PI_4.cos()).abs() < 1e-14);
        let s = info_state('a'.into(), std::f64::consts::FRAC_PI_2, 1.0).unwrap();
        assert!((s.weights()[1] - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn mixing_lights_one_port_per_pair() {
        let params = ProtocolParams::new(1.0, [0.3, 0.9, 1.4]).unwrap();
        let global = global_state(&params).unwrap();
        assert_eq!(global.num_terms(), 64);
        let mixed = mix_network(&global).unwrap();
        assert!((mixed.norm() - 1.0).abs() < 1e-12);
        let r2 = 2f64.sqrt();
        for t in mixed.terms() {
            for leg in Leg::ALL {
                let s = t.amplitudes[mixed.mode_index(leg.sum_port()).unwrap()];
                let d = t.amplitudes[mixed.mode_index(leg.difference_port()).unwrap()];
                assert!((s.norm() < 1e-12) != (d.norm() < 1e-12));
                assert!(((s.norm() + d.norm()) - r2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn plan_examples() {
        use CorrectionOp::*;
        let even = [Parity::Even; 3];
        let odd = [Parity::Odd; 3];
        let p = plan_correction(CaseId::I, even).unwrap();
        assert_eq!(p.ops, [Identity; 3]);
        assert!(p.faithful);
        let p = plan_correction(CaseId::I, odd).unwrap();
        assert_eq!(p.ops, [Displace; 3]);
        assert!(!p.faithful);
        assert_eq!(plan_correction(CaseId::II, even).unwrap().ops, [Phase; 3]);
        assert_eq!(
            plan_correction(CaseId::III, even).unwrap().ops,
            [Identity, Identity, Phase]
        );
        assert_eq!(
            plan_correction(CaseId::IV, even).unwrap().ops,
            [Identity, Phase, Identity]
        );
        assert_eq!(
            plan_correction(CaseId::V, even).unwrap().ops,
            [Identity, Phase, Phase]
        );
        assert_eq!(
            plan_correction(CaseId::VI, even).unwrap().ops,
            [Phase, Identity, Identity]
        );
        assert_eq!(
            plan_correction(CaseId::VII, even).unwrap().ops,
            [Phase, Identity, Phase]
        );
        assert_eq!(
            plan_correction(CaseId::VIII, even).unwrap().ops,
            [Phase, Phase, Identity]
        );
        assert!(matches!(
            plan_correction(CaseId::Ambiguous, even),
            Err(Error::NotACase(CaseId::Ambiguous))
        ));
    }

    #[test]
    fn case_one_all_even_is_exact_replica() {
        let params = ProtocolParams::new(1.0, [FRAC_PI_4, 0.6, 0.4]).unwrap();
        let out = herald_outcome(&params, DetectionEvent::new([2, 0, 4, 0, 2, 0])).unwrap();
        assert_eq!(out.case, CaseId::I);
        assert!(out.faithful());
        assert_eq!(out.raw_state.prune(0.0).num_terms(), 8);
        for f in out.fidelities.unwrap() {
            assert!((f - 1.0).abs() < 1e-12);
        }
        assert!(out.raw_state.schmidt_rank_one(1, FACTORIZATION_TOLERANCE));
        assert!(out.raw_state.schmidt_rank_one(2, FACTORIZATION_TOLERANCE));
    }

    #[test]
    fn odd_count_flips_sign_of_second_coefficient() {
        let params = ProtocolParams::new(1.0, [0.5, 0.0, 0.0]).unwrap();
        let even = herald_outcome(&params, DetectionEvent::new([2, 0, 2, 0, 2, 0])).unwrap();
        let odd = herald_outcome(&params, DetectionEvent::new([1, 0, 2, 0, 2, 0])).unwrap();
        let fe = even
            .raw_state
            .normalize_relative()
            .unwrap()
            .factorize(1e-10)
            .unwrap();
        let fo = odd
            .raw_state
            .normalize_relative()
            .unwrap()
            .factorize(1e-10)
            .unwrap();
        let ratio = |s: &SuperposedState| {
            let t: Vec<_> = s.terms().collect();
            let (plus, minus) = if t[0].amplitudes[0].re > 0.0 {
                (0, 1)
            } else {
                (1, 0)
            };
            t[minus].weight / t[plus].weight
        };
        assert!((ratio(&fe[0]) + ratio(&fo[0])).norm() < 1e-12);
        assert!((ratio(&fe[0]).re - 0.5f64.tan()).abs() < 1e-12);
    }

    #[test]
    fn impossible_event_has_zero_probability() {
        let params = ProtocolParams::new(1.0, [0.2, 0.4, 0.6]).unwrap();
        let out = herald_outcome(&params, DetectionEvent::new([1, 1, 0, 2, 0, 2])).unwrap();
        assert_eq!(out.case, CaseId::Impossible);
        assert!(out.probability < 1e-20);
        assert!(out.fidelities.is_none());
    }

    #[test]
    fn params_validation() {
        assert!(ProtocolParams::new(0.0, [0.0; 3]).is_err());
        assert!(ProtocolParams::new(-1.0, [0.0; 3]).is_err());
        assert!(ProtocolParams::new(f64::NAN, [0.0; 3]).is_err());
        let p = ProtocolParams::new(1.0, [0.0; 3]).unwrap();
        assert_eq!(p.cutoff, 20);
        assert!(p.with_tail_budget(-1.0).is_err());
    }
}
