//! Outcome enumeration.
//!
//! The channel is a product over the three Bell pairs and each information
//! mode meets only its own pair, so the mixed state is a product of three
//! independent legs. Each leg is enumerated on its own (a 3-mode state) and
//! events are formed as products. Events with both detectors of a pair lit
//! carry exactly zero probability and are not listed.

use serde::{Deserialize, Serialize};

use super::{
    classify_event, correction_for_pair, info_state, prepare_bell_pair, read_pair, CaseId,
    CorrectionOp, DetectionEvent, Leg, PairReading, Parity, Port, ProtocolParams,
};
use crate::coherent::{fidelity, FockKernelCache, SuperposedState, C64};
use crate::error::{Error, Result};

/// One detector-pair outcome of a single leg.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegBranch {
    pub pair: (u32, u32),
    pub probability: f64,
    /// Fidelity of the corrected receiver mode with the sender's state.
    pub fidelity: f64,
}

#[derive(Clone, Debug)]
pub struct LegTable {
    pub leg: Leg,
    /// Pairs (0,0), (0,1)..(0,N), (1,0)..(N,0), in lexicographic order.
    pub branches: Vec<LegBranch>,
}

impl LegTable {
    pub fn mass(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }

    pub fn silent_mass(&self) -> f64 {
        self.branches[0].probability
    }

    pub fn lit_mass(&self, port: Option<Port>, parity: Option<Parity>) -> f64 {
        self.branches
            .iter()
            .filter(|b| match read_pair(b.pair) {
                PairReading::Lit(po, pa) => {
                    port.map_or(true, |x| x == po) && parity.map_or(true, |x| x == pa)
                }
                _ => false,
            })
            .map(|b| b.probability)
            .sum()
    }

    pub fn branch(&self, pair: (u32, u32)) -> Option<&LegBranch> {
        self.branches.iter().find(|b| b.pair == pair)
    }
}

/// Pairs enumerated per leg up to `cutoff` photons on the lit detector.
pub fn leg_pairs(cutoff: u32) -> Vec<(u32, u32)> {
    let mut pairs: Vec<(u32, u32)> = (0..=cutoff).map(|n| (0, n)).collect();
    pairs.extend((1..=cutoff).map(|n| (n, 0)));
    pairs
}

/// The leg's information state mixed with its half of the channel, over
/// (sum port, difference port, receiver).
pub fn mixed_leg_state(params: &ProtocolParams, leg: Leg) -> Result<SuperposedState> {
    let info = info_state(leg.info_mode(), params.theta[leg.index()], params.alpha)?;
    let bell = prepare_bell_pair(params.alpha, leg.source_mode(), leg.receiver_mode())?;
    info.tensor(&bell)?.apply_bps(
        leg.info_mode(),
        leg.source_mode(),
        leg.sum_port(),
        leg.difference_port(),
    )
}

/// Un-normalized receiver state of a leg heralded by `pair`.
pub fn herald_leg(
    mixed: &SuperposedState,
    leg: Leg,
    pair: (u32, u32),
    cache: Option<&FockKernelCache>,
) -> Result<SuperposedState> {
    mixed.project_fock_many(
        &[(leg.sum_port(), pair.0), (leg.difference_port(), pair.1)],
        cache,
    )
}

/// Applies `op` to a heralded receiver state and scores it against
/// `target`. Zero-probability branches score NaN.
pub fn corrected_fidelity(
    heralded: &SuperposedState,
    op: CorrectionOp,
    mode: crate::coherent::ModeLabel,
    target: &SuperposedState,
    alpha: f64,
) -> Result<f64> {
    if heralded.norm_sqr() <= 0.0 {
        return Ok(f64::NAN);
    }
    // rescale before correcting; heralded weights can be tiny
    let max = heralded
        .weights()
        .iter()
        .map(|w| w.norm())
        .fold(0.0, f64::max);
    let scaled = heralded.scaled(C64::new(1.0 / max, 0.0));
    fidelity(target, &op.apply(&scaled, mode, alpha)?)
}

pub fn compute_leg_table(params: &ProtocolParams, leg: Leg, cutoff: u32) -> Result<LegTable> {
    let alpha = params.alpha;
    let mixed = mixed_leg_state(params, leg)?;
    let r = C64::new(alpha * 2f64.sqrt(), 0.0);
    let cache = FockKernelCache::new(&[C64::new(0.0, 0.0), r, -r], cutoff);
    let target = info_state(leg.receiver_mode(), params.theta[leg.index()], alpha)?;
    let mut branches = Vec::with_capacity(2 * cutoff as usize + 1);
    for pair in leg_pairs(cutoff) {
        let proj = herald_leg(&mixed, leg, pair, Some(&cache))?;
        let probability = proj.norm_sqr().max(0.0);
        let fid = corrected_fidelity(
            &proj,
            correction_for_pair(pair),
            leg.receiver_mode(),
            &target,
            alpha,
        )?;
        branches.push(LegBranch {
            pair,
            probability,
            fidelity: fid,
        });
    }
    Ok(LegTable { leg, branches })
}

/// One enumerated detection event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub event: DetectionEvent,
    pub case: CaseId,
    pub parities: Option<[Parity; 3]>,
    pub probability: f64,
    pub fidelities: [f64; 3],
    pub faithful: bool,
}

/// All events with each count at most the cutoff, as a product of leg tables.
#[derive(Clone, Debug)]
pub struct Enumeration {
    pub params: ProtocolParams,
    pub legs: [LegTable; 3],
    total_mass: f64,
    ambiguous_mass: f64,
}

pub fn enumerate_outcomes(params: &ProtocolParams) -> Result<Enumeration> {
    let [a, b, c] = Leg::ALL.map(|leg| compute_leg_table(params, leg, params.cutoff));
    let legs = [a?, b?, c?];
    let total_mass: f64 = legs.iter().map(LegTable::mass).product();
    let lit: f64 = legs.iter().map(|l| l.lit_mass(None, None)).product();
    let missing = 1.0 - total_mass;
    if missing > params.tail_budget {
        return Err(Error::TailUnreachable {
            mass: total_mass,
            missing,
            budget: params.tail_budget,
            cutoff: params.cutoff,
        });
    }
    Ok(Enumeration {
        params: *params,
        legs,
        total_mass,
        ambiguous_mass: total_mass - lit,
    })
}

impl Enumeration {
    pub fn len(&self) -> usize {
        self.legs.iter().map(|l| l.branches.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn ambiguous_mass(&self) -> f64 {
        self.ambiguous_mass
    }

    pub fn leg(&self, leg: Leg) -> &LegTable {
        &self.legs[leg.index()]
    }

    /// Events in lexicographic order of (n7, …, n12).
    pub fn iter(&self) -> impl Iterator<Item = OutcomeRecord> + '_ {
        let [x, y, z] = &self.legs;
        x.branches.iter().flat_map(move |p| {
            y.branches
                .iter()
                .flat_map(move |q| z.branches.iter().map(move |r| combine([p, q, r])))
        })
    }

    pub fn outcomes(&self) -> Vec<OutcomeRecord> {
        self.iter().collect()
    }

    /// Total probability of one case (all parities).
    pub fn case_mass(&self, case: CaseId) -> f64 {
        match case.ports() {
            Some(ports) => (0..3)
                .map(|k| self.legs[k].lit_mass(Some(ports[k]), None))
                .product(),
            None if case == CaseId::Ambiguous => self.ambiguous_mass,
            None => 0.0,
        }
    }

    /// Probability of one (case, parity triple) branch class.
    pub fn class_mass(&self, case: CaseId, parities: [Parity; 3]) -> f64 {
        match case.ports() {
            Some(ports) => (0..3)
                .map(|k| self.legs[k].lit_mass(Some(ports[k]), Some(parities[k])))
                .product(),
            None => 0.0,
        }
    }

    /// Fidelity of `leg` in a branch class, read off the lowest count with
    /// the required parity (fidelities depend only on port and parity).
    pub fn branch_fidelity(&self, leg: Leg, case: CaseId, parities: [Parity; 3]) -> Option<f64> {
        let ports = case.ports()?;
        let k = leg.index();
        let n = if parities[k] == Parity::Odd { 1 } else { 2 };
        let pair = match ports[k] {
            Port::Sum => (n, 0),
            Port::Difference => (0, n),
        };
        self.legs[k].branch(pair).map(|b| b.fidelity)
    }

    /// Probability-weighted fidelity of `leg` over cases I–VIII,
    /// renormalized by their total mass (Ambiguous excluded).
    pub fn average_fidelity(&self, leg: Leg) -> f64 {
        let t = &self.legs[leg.index()];
        let mut num = 0.0;
        let mut den = 0.0;
        for b in &t.branches {
            if matches!(read_pair(b.pair), PairReading::Lit(..)) {
                num += b.probability * b.fidelity;
                den += b.probability;
            }
        }
        num / den
    }
}

fn combine(branches: [&LegBranch; 3]) -> OutcomeRecord {
    let event = DetectionEvent::from_pairs(branches.map(|b| b.pair));
    let class = classify_event(&event);
    OutcomeRecord {
        event,
        case: class.case,
        parities: class.parities,
        probability: branches[0].probability * branches[1].probability * branches[2].probability,
        fidelities: branches.map(|b| b.fidelity),
        faithful: class
            .parities
            .map(|p| p.iter().all(|&x| x == Parity::Even))
            .unwrap_or(false),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{global_state, herald_outcome_from, mix_network};

    #[test]
    fn pairs_are_lexicographic() {
        let p = leg_pairs(3);
        assert_eq!(
            p,
            vec![(0, 0), (0, 1), (0, 2), (0, 3), (1, 0), (2, 0), (3, 0)]
        );
        let mut sorted = p.clone();
        sorted.sort();
        assert_eq!(sorted, p);
    }

    #[test]
    fn events_are_lexicographic_and_complete() {
        let params = ProtocolParams::new(0.6, [0.1, 0.2, 0.3]).unwrap();
        let e = enumerate_outcomes(&params).unwrap();
        let events: Vec<_> = e.iter().map(|r| r.event).collect();
        assert_eq!(events.len(), e.len());
        assert!(events.windows(2).all(|w| w[0] < w[1]));
        let sum: f64 = e.iter().map(|r| r.probability).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!((sum - e.total_mass()).abs() < 1e-12);
    }

    #[test]
    fn factorized_records_match_full_herald() {
        let params = ProtocolParams::new(0.8, [0.4, 1.1, 2.0]).unwrap();
        let e = enumerate_outcomes(&params).unwrap();
        let post = mix_network(&global_state(&params).unwrap()).unwrap();
        let picks = [
            [1, 0, 2, 0, 3, 0],
            [0, 1, 0, 2, 0, 3],
            [2, 0, 0, 1, 0, 0],
            [0, 0, 0, 0, 0, 0],
            [0, 4, 5, 0, 0, 1],
        ];
        for counts in picks {
            let event = DetectionEvent::new(counts);
            let rec = e.iter().find(|r| r.event == event).unwrap();
            let full = herald_outcome_from(&params, &post, event).unwrap();
            assert_eq!(rec.case, full.case);
            assert!((rec.probability - full.probability).abs() < 1e-14);
            let ff = full.fidelities.unwrap();
            for k in 0..3 {
                assert!((rec.fidelities[k] - ff[k]).abs() < 1e-10, "{event} leg {k}");
            }
        }
    }

    #[test]
    fn tail_unreachable_at_tiny_cutoff() {
        let params = ProtocolParams::new(2.0, [0.0; 3]).unwrap().with_cutoff(3);
        assert!(matches!(
            enumerate_outcomes(&params),
            Err(Error::TailUnreachable { cutoff: 3, .. })
        ));
    }
}
