//! Three-party simulation of the protocol as message-passing state machines.
//!
//! A single-threaded scheduler advances Alice, Bob and Charlie in logical
//! time and owns the classical channel queues. Measurement outcomes are drawn
//! once per run from the enumerated distribution; each party then reads its
//! own detector pair, sends it to the next party, and corrects the mode it
//! holds from the pair it receives.

use std::collections::VecDeque;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::coherent::{FockKernelCache, ModeLabel, SuperposedState, C64};
use crate::error::{Error, Result};
use crate::protocol::{
    classify_event, corrected_fidelity, correction_for_pair, enumerate_outcomes, herald_leg,
    info_state, mixed_leg_state, plan_correction, CaseId, CorrectionOp, DetectionEvent,
    Enumeration, Leg, Parity, ProtocolParams,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
    Charlie,
}

impl Party {
    pub const ALL: [Party; 3] = [Party::Alice, Party::Bob, Party::Charlie];

    pub fn name(self) -> &'static str {
        match self {
            Party::Alice => "Alice",
            Party::Bob => "Bob",
            Party::Charlie => "Charlie",
        }
    }

    /// Information mode, channel source mode, received channel mode.
    pub fn modes(self) -> [ModeLabel; 3] {
        let send = self.sends();
        let recv = self.receives();
        [send.info_mode(), send.source_mode(), recv.receiver_mode()]
    }

    /// Leg whose detector pair this party measures.
    pub fn sends(self) -> Leg {
        match self {
            Party::Alice => Leg::AliceToBob,
            Party::Bob => Leg::BobToCharlie,
            Party::Charlie => Leg::CharlieToAlice,
        }
    }

    /// Leg whose receiver mode this party holds.
    pub fn receives(self) -> Leg {
        match self {
            Party::Alice => Leg::CharlieToAlice,
            Party::Bob => Leg::AliceToBob,
            Party::Charlie => Leg::BobToCharlie,
        }
    }

    pub fn next(self) -> Party {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Charlie,
            Party::Charlie => Party::Alice,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Prepare,
    Measure,
    AwaitCounts,
    Correct,
    Done,
}

impl Phase {
    fn next(self) -> Phase {
        match self {
            Phase::Prepare => Phase::Measure,
            Phase::Measure => Phase::AwaitCounts,
            Phase::AwaitCounts => Phase::Correct,
            Phase::Correct | Phase::Done => Phase::Done,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalMessage {
    pub from: Party,
    pub to: Party,
    pub counts: (u32, u32),
    pub seq: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: u64,
    pub actor: String,
    pub action: String,
    pub payload: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub seed: u64,
    pub event: DetectionEvent,
    pub case: CaseId,
    pub parities: Option<[Parity; 3]>,
    pub messages: Vec<ClassicalMessage>,
    /// Per party (Alice, Bob, Charlie); `None` when nothing was applied.
    pub corrections: [Option<CorrectionOp>; 3],
    /// Per leg (A→B, B→C, C→A); `None` for failed runs.
    pub fidelities: Option<[f64; 3]>,
    pub failed: bool,
    pub steps: Vec<TraceStep>,
}

impl RunTrace {
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("trace steps serialize"));
            out.push('\n');
        }
        out
    }

    pub fn correction(&self, party: Party) -> Option<CorrectionOp> {
        self.corrections[party.index()]
    }

    /// One bit per leg: the parity of the lit count.
    pub fn steering_bits(&self) -> Option<[bool; 3]> {
        self.parities.map(|p| p.map(|x| x == Parity::Odd))
    }
}

/// Rebuilds the correction plan from the case and the three steering bits.
pub fn plan_from_bits(case: CaseId, bits: [bool; 3]) -> Result<[CorrectionOp; 3]> {
    let parities = bits.map(|odd| if odd { Parity::Odd } else { Parity::Even });
    Ok(plan_correction(case, parities)?.ops)
}

/// Lexicographically ordered events with their cumulative probability.
#[derive(Clone, Debug)]
pub struct Distribution {
    events: Vec<DetectionEvent>,
    cumulative: Vec<f64>,
}

impl Distribution {
    pub fn from_enumeration(e: &Enumeration) -> Result<Self> {
        let mut events = Vec::with_capacity(e.len());
        let mut cumulative = Vec::with_capacity(e.len());
        let mut acc = 0.0;
        for r in e.iter() {
            if r.probability > 0.0 {
                acc += r.probability;
                events.push(r.event);
                cumulative.push(acc);
            }
        }
        if events.is_empty() || acc <= 0.0 {
            return Err(Error::EmptyDistribution);
        }
        Ok(Distribution { events, cumulative })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn total(&self) -> f64 {
        *self.cumulative.last().expect("non-empty")
    }

    pub fn contains(&self, event: &DetectionEvent) -> bool {
        self.events.binary_search(event).is_ok()
    }

    /// Inverse-CDF draw, normalized by the enumerated mass.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> DetectionEvent {
        let u = rng.random::<f64>() * self.total();
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.events[i.min(self.events.len() - 1)]
    }
}

pub fn sample_event(dist: &Distribution, seed: u64) -> DetectionEvent {
    dist.sample(&mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Clone, Debug)]
struct PartyNode {
    party: Party,
    phase: Phase,
    inbox: VecDeque<ClassicalMessage>,
    outbox: VecDeque<ClassicalMessage>,
    measured: Option<(u32, u32)>,
    received: Option<(u32, u32)>,
    heralded: Option<SuperposedState>,
    correction: Option<CorrectionOp>,
    fidelity: Option<f64>,
    failed: bool,
}

impl PartyNode {
    fn new(party: Party) -> Self {
        PartyNode {
            party,
            phase: Phase::Prepare,
            inbox: VecDeque::new(),
            outbox: VecDeque::new(),
            measured: None,
            received: None,
            heralded: None,
            correction: None,
            fidelity: None,
            failed: false,
        }
    }
}

/// Per-leg data the parties need, built once per parameter set.
struct LegContext {
    mixed: SuperposedState,
    target: SuperposedState,
    cache: FockKernelCache,
}

/// Reusable simulator for one parameter set.
pub struct Harness {
    params: ProtocolParams,
    enumeration: Enumeration,
    distribution: Distribution,
    legs: Vec<LegContext>,
}

impl Harness {
    pub fn new(params: ProtocolParams) -> Result<Self> {
        let enumeration = enumerate_outcomes(&params)?;
        let distribution = Distribution::from_enumeration(&enumeration)?;
        let r = C64::new(params.alpha * 2f64.sqrt(), 0.0);
        let legs = Leg::ALL
            .iter()
            .map(|&leg| {
                Ok(LegContext {
                    mixed: mixed_leg_state(&params, leg)?,
                    target: info_state(
                        leg.receiver_mode(),
                        params.theta[leg.index()],
                        params.alpha,
                    )?,
                    cache: FockKernelCache::new(&[C64::new(0.0, 0.0), r, -r], params.cutoff),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Harness {
            params,
            enumeration,
            distribution,
            legs,
        })
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn enumeration(&self) -> &Enumeration {
        &self.enumeration
    }

    pub fn distribution(&self) -> &Distribution {
        &self.distribution
    }

    pub fn run(&self, seed: u64) -> Result<RunTrace> {
        let event = sample_event(&self.distribution, seed);
        self.run_event(seed, event)
    }

    /// Runs the choreography for a given event.
    pub fn run_event(&self, seed: u64, event: DetectionEvent) -> Result<RunTrace> {
        let mut nodes = Party::ALL.map(PartyNode::new);
        let mut steps = Vec::new();
        let mut messages = Vec::new();
        let mut t: u64 = 0;
        let mut seq = 0;
        let mut case: Option<CaseId> = None;
        let mut log = |t: u64, actor: &str, action: &str, payload: serde_json::Value| {
            steps.push(TraceStep {
                t,
                actor: actor.to_string(),
                action: action.to_string(),
                payload,
            });
        };
        log(
            t,
            "scheduler",
            "sample",
            json!({ "seed": seed, "event": event.counts }),
        );
        let classification = classify_event(&event);

        loop {
            t += 1;
            let mut progressed = false;
            for node in nodes.iter_mut() {
                let party = node.party;
                let name = party.name();
                match node.phase {
                    Phase::Prepare => {
                        let modes: Vec<String> =
                            party.modes().iter().map(|m| m.to_string()).collect();
                        log(t, name, "prepare", json!({ "modes": modes }));
                    }
                    Phase::Measure => {
                        let leg = party.sends();
                        let counts = event.pair(leg);
                        node.measured = Some(counts);
                        seq += 1;
                        let msg = ClassicalMessage {
                            from: party,
                            to: party.next(),
                            counts,
                            seq,
                        };
                        node.outbox.push_back(msg);
                        log(
                            t,
                            name,
                            "measure",
                            json!({ "leg": leg.name(), "counts": [counts.0, counts.1] }),
                        );
                    }
                    Phase::AwaitCounts => match node.inbox.pop_front() {
                        Some(msg) => {
                            node.received = Some(msg.counts);
                            let ctx = &self.legs[party.receives().index()];
                            node.heralded = Some(herald_leg(
                                &ctx.mixed,
                                party.receives(),
                                msg.counts,
                                Some(&ctx.cache),
                            )?);
                            log(
                                t,
                                name,
                                "receive",
                                json!({ "from": msg.from.name(), "seq": msg.seq, "counts": [msg.counts.0, msg.counts.1] }),
                            );
                        }
                        None => continue,
                    },
                    Phase::Correct => {
                        let Some(c) = case else { continue };
                        let leg = party.receives();
                        let mode = leg.receiver_mode();
                        if c.is_case() {
                            let op = correction_for_pair(node.received.expect("received"));
                            let ctx = &self.legs[leg.index()];
                            let f = corrected_fidelity(
                                node.heralded.as_ref().expect("heralded"),
                                op,
                                mode,
                                &ctx.target,
                                self.params.alpha,
                            )?;
                            node.correction = Some(op);
                            node.fidelity = Some(f);
                            log(
                                t,
                                name,
                                "correct",
                                json!({ "mode": mode.to_string(), "op": op.code(), "fidelity": f }),
                            );
                        } else {
                            node.failed = true;
                            log(
                                t,
                                name,
                                "abort",
                                json!({ "mode": mode.to_string(), "case": c.name() }),
                            );
                        }
                    }
                    Phase::Done => continue,
                }
                node.phase = node.phase.next();
                progressed = true;
                if node.phase == Phase::Done {
                    log(t, name, "done", json!({ "failed": node.failed }));
                }
            }
            // deliver in send order
            for k in 0..nodes.len() {
                while let Some(msg) = nodes[k].outbox.pop_front() {
                    nodes[msg.to.index()].inbox.push_back(msg);
                    messages.push(msg);
                    log(
                        t,
                        "channel",
                        "deliver",
                        json!({ "from": msg.from.name(), "to": msg.to.name(), "seq": msg.seq }),
                    );
                    progressed = true;
                }
            }
            if case.is_none() && nodes.iter().all(|n| n.received.is_some()) {
                case = Some(classification.case);
                log(
                    t,
                    "scheduler",
                    "resolve_case",
                    json!({ "case": classification.case.name() }),
                );
                progressed = true;
            }
            if nodes.iter().all(|n| n.phase == Phase::Done) {
                break;
            }
            if !progressed {
                let stuck: Vec<String> = nodes
                    .iter()
                    .filter(|n| n.phase != Phase::Done)
                    .map(|n| format!("{} in {:?}", n.party, n.phase))
                    .collect();
                return Err(Error::Deadlock(stuck.join(", ")));
            }
        }

        let failed = nodes.iter().any(|n| n.failed);
        let fidelities = if failed {
            None
        } else {
            Some(Leg::ALL.map(|leg| {
                nodes
                    .iter()
                    .find(|n| n.party.receives() == leg)
                    .and_then(|n| n.fidelity)
                    .expect("every leg corrected")
            }))
        };
        Ok(RunTrace {
            seed,
            event,
            case: classification.case,
            parities: classification.parities,
            messages,
            corrections: [0, 1, 2].map(|k| nodes[k].correction),
            fidelities,
            failed,
            steps,
        })
    }

    /// Re-runs a trace's seed and compares the JSON-lines output byte for byte.
    pub fn replays(&self, trace: &RunTrace) -> Result<bool> {
        Ok(self.run(trace.seed)?.to_json_lines() == trace.to_json_lines())
    }
}

pub fn run_protocol(params: &ProtocolParams, seed: u64) -> Result<RunTrace> {
    Harness::new(*params)?.run(seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    pub case: CaseId,
    pub expected: f64,
    pub observed: u64,
    /// (observed − N·p) / σ.
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyCheck {
    pub runs: u64,
    pub classes: Vec<ClassCount>,
    pub pass: bool,
}

/// Runs seeds `first_seed..first_seed + runs` and compares case-class counts
/// with the enumerated probabilities at 3σ.
pub fn frequency_check(harness: &Harness, runs: u64, first_seed: u64) -> Result<FrequencyCheck> {
    let mut classes: Vec<CaseId> = CaseId::CASES.to_vec();
    classes.push(CaseId::Ambiguous);
    let mut observed = vec![0u64; classes.len()];
    for s in 0..runs {
        let trace = harness.run(first_seed + s)?;
        let k = classes
            .iter()
            .position(|&c| c == trace.case)
            .ok_or(Error::NotACase(trace.case))?;
        observed[k] += 1;
    }
    let e = harness.enumeration();
    let n = runs as f64;
    let mut pass = true;
    let counts = classes
        .iter()
        .zip(&observed)
        .map(|(&case, &obs)| {
            let p = e.case_mass(case) / e.total_mass();
            let sigma = (n * p * (1.0 - p)).sqrt();
            let z = (obs as f64 - n * p) / sigma;
            pass &= z.abs() <= 3.0;
            ClassCount {
                case,
                expected: p,
                observed: obs,
                z,
            }
        })
        .collect();
    Ok(FrequencyCheck {
        runs,
        classes: counts,
        pass,
    })
}
