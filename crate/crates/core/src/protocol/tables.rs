//! Correction tables: the 64-row table derived from the heralded sign
//! algebra, a transcription of the printed tables, and a diff between them.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    plan_correction, CaseId, CorrectionOp, CorrectionPlan, Leg, Parity, Port, PARITY_ROWS,
};
use crate::error::Result;

/// One single-mode heralded state as printed: `x0|±α⟩ ± y1|±α⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateCell {
    /// Coefficient letter on the first and second term (`a`, `b` or `c`).
    pub letters: [char; 2],
    /// Whether each term's ket is `|+α⟩`.
    pub kets_plus: [bool; 2],
    /// Whether the terms are joined by `+`.
    pub plus: bool,
}

impl StateCell {
    /// Parses the compact code `a+-a-`: letter, first ket sign, joining sign,
    /// letter, second ket sign.
    pub fn parse(code: &str) -> Option<Self> {
        let c: Vec<char> = code.chars().collect();
        if c.len() != 5 {
            return None;
        }
        let sign = |x: char| match x {
            '+' => Some(true),
            '-' => Some(false),
            _ => None,
        };
        Some(StateCell {
            letters: [c[0], c[3]],
            kets_plus: [sign(c[1])?, sign(c[4])?],
            plus: sign(c[2])?,
        })
    }

    pub fn code(&self) -> String {
        let s = |b: bool| if b { '+' } else { '-' };
        format!(
            "{}{}{}{}{}",
            self.letters[0],
            s(self.kets_plus[0]),
            s(self.plus),
            self.letters[1],
            s(self.kets_plus[1])
        )
    }

    /// State heralded on the receiver of `leg` by a lit `port` with `parity`.
    pub fn derived(leg: Leg, port: Port, parity: Parity) -> Self {
        let letter = ['a', 'b', 'c'][leg.index()];
        let first_plus = port == Port::Sum;
        StateCell {
            letters: [letter, letter],
            kets_plus: [first_plus, !first_plus],
            plus: parity == Parity::Even,
        }
    }

    fn well_formed(&self, leg: Leg) -> bool {
        let letter = ['a', 'b', 'c'][leg.index()];
        self.letters == [letter, letter] && self.kets_plus[0] != self.kets_plus[1]
    }

    /// Correction that maps this state back to `x0|α⟩ + x1|−α⟩`, if the
    /// cell describes a cat with opposite kets.
    pub fn implied_op(&self) -> Option<CorrectionOp> {
        if self.kets_plus[0] == self.kets_plus[1] {
            return None;
        }
        Some(CorrectionOp::new(!self.kets_plus[0], !self.plus))
    }
}

impl fmt::Display for StateCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ket = |p: bool| if p { "|α⟩" } else { "|−α⟩" };
        write!(
            f,
            "{}0{} {} {}1{}",
            self.letters[0],
            ket(self.kets_plus[0]),
            if self.plus { '+' } else { '−' },
            self.letters[1],
            ket(self.kets_plus[1])
        )
    }
}

/// One row of a correction table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub case: CaseId,
    /// 1-based position in the printed row order.
    pub parity_class: usize,
    pub parities: [Parity; 3],
    /// Heralded states on modes 4, 5, 6.
    pub states: [StateCell; 3],
    /// Corrections for modes 4, 5, 6.
    pub ops: [CorrectionOp; 3],
    pub faithful: bool,
}

/// The 64 rows implied by the heralded sign algebra, case-major in printed
/// row order.
pub fn derive_table() -> Vec<TableRow> {
    let mut rows = Vec::with_capacity(64);
    for case in CaseId::CASES {
        let ports = case.ports().expect("proper case");
        for (i, parities) in PARITY_ROWS.iter().enumerate() {
            let plan: CorrectionPlan = plan_correction(case, *parities).expect("proper case");
            rows.push(TableRow {
                case,
                parity_class: i + 1,
                parities: *parities,
                states: Leg::ALL
                    .map(|l| StateCell::derived(l, ports[l.index()], parities[l.index()])),
                ops: plan.ops,
                faithful: plan.faithful,
            });
        }
    }
    rows
}

/// Internal consistency problems of a table, empty when consistent: one
/// faithful all-even row per case, no displacement in faithful rows, and
/// every op equal to the one its own state cell calls for.
pub fn check_table(rows: &[TableRow]) -> Vec<String> {
    let mut problems = Vec::new();
    if rows.len() != 64 {
        problems.push(format!("expected 64 rows, found {}", rows.len()));
    }
    for case in CaseId::CASES {
        let faithful: Vec<&TableRow> = rows
            .iter()
            .filter(|r| r.case == case && r.faithful)
            .collect();
        if faithful.len() != 1 {
            problems.push(format!("case {case}: {} faithful rows", faithful.len()));
        }
        for r in faithful {
            if r.parities != [Parity::Even; 3] {
                problems.push(format!("case {case}: faithful row is not all-even"));
            }
            if r.ops.iter().any(|o| o.has_displacement()) {
                problems.push(format!("case {case}: faithful row contains a displacement"));
            }
        }
    }
    for r in rows {
        for leg in Leg::ALL {
            let k = leg.index();
            if r.states[k].implied_op() != Some(r.ops[k]) {
                problems.push(format!(
                    "case {} row {} mode {}: op {} does not undo {}",
                    r.case,
                    r.parity_class,
                    leg.receiver_mode(),
                    r.ops[k].code(),
                    r.states[k]
                ));
            }
        }
    }
    problems
}

// Transcription of the printed tables. Per row: case, parity labels
// (Alice, Bob, Charlie), state cells for modes 4, 5, 6, ops as printed under
// the Alice, Bob, Charlie columns (the labs owning modes 6, 4, 5), and the
// F/NF tag.
const PRINTED_TABLES: &str = "\
I    OOO a+-a- b+-b- c+-c- D  D  D  NF
I    OOE a+-a- b+-b- c++c- I  D  D  NF
I    OEO a+-a- b++b- c+-c- D  D  I  NF
I    EOO a++a- b+-b- c+-c- D  I  D  NF
I    EEE a++a- b++b- c++c- I  I  I  F
I    EEO a++a- b+-b- c+-c- D  I  D  NF
I    EOE a++a- b+-b- c++c- I  I  D  NF
I    OEE a+-a- b++b- c++c- I  D  I  NF
II   OOO a--a+ b--b+ c--c+ DP DP DP NF
II   OOE a-+a+ b-+b+ c--c+ P  DP DP NF
II   OEO a-+a+ b--b+ c-+c+ DP DP P  NF
II   EOO a--a+ b-+b+ c-+c+ DP P  DP NF
II   EEE a-+a+ b-+b+ c-+c+ P  P  P  F
II   EEO a-+a+ b-+b+ c--c+ DP P  DP NF
II   EOE a-+a+ b--b+ c-+c+ P  P  DP NF
II   OEE a--a+ b-+b+ c-+c+ P  DP P  NF
III  OOO a+-a- b+-b- c+-c+ DP D  D  NF
III  OOE a+-a- b+-b- c++c+ P  D  D  NF
III  OEO a+-a- b++b- c+-c+ DP D  I  NF
III  EOO a++a- b+-b- c+-c+ DP I  D  NF
III  EEE a++a- b++b- c++c+ P  I  I  F
III  EEO a++a- b+-b- c+-c+ DP I  D  NF
III  EOE a++a- b+-b- c++c+ P  I  D  NF
III  OEE a+-a- b++b- c++c+ P  D  I  NF
IV   OOO a+-a- b+-b+ c+-c- D  D  DP NF
IV   OOE a+-a- b+-b+ c++c- I  D  DP NF
IV   OEO a+-a- b++b+ c+-c- D  D  P  NF
IV   EOO a++a- b+-b- c+-c- D  I  DP NF
IV   EEE a++a- b++b+ c++c- I  I  P  F
IV   EEO a++a- b+-b+ c+-c- D  I  DP NF
IV   EOE a++a- b+-b+ c++c- I  I  DP NF
IV   OEE a+-a- b++b+ c++c- I  D  P  NF
V    OOO a+-a- b+-b+ c+-c+ DP D  DP NF
V    OOE a+-a+ b+-b+ c++c+ P  D  DP NF
V    OEO a+-a- b++b+ c+-c+ DP D  P  NF
V    EOO a++a- b+-b+ c+-c+ DP I  DP NF
V    EEE a++a+ b++b+ c++c+ P  I  P  F
V    EEO a++a- b+-b+ c+-c+ DP I  DP NF
V    EOE a++a- b+-b+ c++c+ P  I  DP NF
V    OEE a+-a+ b++b+ c++c+ P  D  P  NF
VI   OOO a+-a+ b+-b- c+-c- D  DP D  NF
VI   OOE a+-a+ b+-b- c++c- I  DP D  NF
VI   OEO a+-a+ b++b- c+-c- D  DP I  NF
VI   EOO a++a+ b+-b- c+-c- D  P  D  NF
VI   EEE a++a+ b++b- c++c- I  P  I  F
VI   EEO a++a+ b+-b- c+-c- D  P  D  NF
VI   EOE a++a+ b+-b- c++c- I  P  D  NF
VI   OEE a+-a+ b++b- c++c- I  DP I  NF
VII  OOO a--a+ b+-b- c--c+ DP DP D  NF
VII  OOE a--a+ b+-b- c-+c+ P  DP D  NF
VII  OEO a--a+ b++b- c--c+ DP DP I  NF
VII  EOO a-+a+ b+-b- c--c+ DP P  D  NF
VII  EEE a-+a+ b++b- c-+c+ P  P  I  F
VII  EEO a-+a+ b+-b- c--c+ DP P  D  NF
VII  EOE a-+a+ b+-b- c-+c+ P  P  D  NF
VII  OEE a--a+ b++b- c-+c+ P  DP I  NF
VIII OOO a--a+ b--a+ a+-a- D  DP DP NF
VIII OOE a-+a+ b-+a+ a+-a- D  P  P  NF
VIII OEO a-+a+ b--a+ a++a- I  P  DP NF
VIII EOO a--a+ b-+a+ a++a- I  DP P  NF
VIII EEE a-+a+ b-+a+ a++a- I  P  P  F
VIII EEO a-+a+ b-+a+ a+-a- D  P  P  NF
VIII EOE a-+a+ b--a+ a++a- I  P  DP NF
VIII OEE a--a+ b-+a+ a++a- I  DP P  NF
";

fn parse_case(s: &str) -> Option<CaseId> {
    CaseId::CASES.iter().copied().find(|c| c.name() == s)
}

fn parse_parities(s: &str) -> Option<[Parity; 3]> {
    let v: Vec<Parity> = s
        .chars()
        .map(|c| match c {
            'O' => Some(Parity::Odd),
            'E' => Some(Parity::Even),
            _ => None,
        })
        .collect::<Option<_>>()?;
    v.try_into().ok()
}

fn malformed<T>(line: &str) -> T {
    panic!("malformed fixture row: {line}")
}

/// The printed tables as rows (ops re-keyed from lab columns to modes).
pub fn printed_table() -> Vec<TableRow> {
    PRINTED_TABLES
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split_whitespace().collect();
            let case = parse_case(f[0]).unwrap_or_else(|| malformed(line));
            let parities = parse_parities(f[1]).unwrap_or_else(|| malformed(line));
            let states =
                [f[2], f[3], f[4]].map(|c| StateCell::parse(c).unwrap_or_else(|| malformed(line)));
            let [alice, bob, charlie] = [f[5], f[6], f[7]]
                .map(|c| CorrectionOp::from_code(c).unwrap_or_else(|| malformed(line)));
            TableRow {
                case,
                parity_class: super::parity_class(parities),
                parities,
                states,
                // Bob holds mode 4, Charlie mode 5, Alice mode 6
                ops: [bob, charlie, alice],
                faithful: match f[8] {
                    "F" => true,
                    "NF" => false,
                    _ => malformed(line),
                },
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MismatchKind {
    /// The printed cell contradicts its own row labels or case header.
    PrintedTypo,
    /// The printed cell is self-consistent but laid out under a different
    /// convention than the derived table.
    LayoutDivergence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub case: CaseId,
    pub parity_class: Option<usize>,
    pub field: String,
    pub printed: String,
    pub derived: String,
    pub kind: MismatchKind,
    pub note: String,
}

/// Compares the printed tables against the derived one, cell by cell.
pub fn diff_tables(derived: &[TableRow], printed: &[TableRow]) -> Vec<Mismatch> {
    let mut out = Vec::new();
    for table in 0..4 {
        out.push(Mismatch {
            case: CaseId::CASES[2 * table],
            parity_class: None,
            field: "column layout".into(),
            printed: "Alice: mode 6, Bob: mode 4, Charlie: mode 5".into(),
            derived: "ops keyed by receiving mode 4, 5, 6".into(),
            kind: MismatchKind::LayoutDivergence,
            note: format!(
                "table {} lists each op under the lab that applies it; mode 4 is steered by n7/n8",
                ["I", "II", "III", "IV"][table]
            ),
        });
    }
    for p in printed {
        let Some(d) = derived
            .iter()
            .find(|d| d.case == p.case && d.parities == p.parities)
        else {
            continue;
        };
        let ports = p.case.ports().expect("printed rows are proper cases");
        for leg in Leg::ALL {
            let k = leg.index();
            let mode = leg.receiver_mode();
            if p.states[k] != d.states[k] {
                out.push(Mismatch {
                    case: p.case,
                    parity_class: Some(p.parity_class),
                    field: format!("state mode {mode}"),
                    printed: p.states[k].to_string(),
                    derived: d.states[k].to_string(),
                    kind: MismatchKind::PrintedTypo,
                    note: state_note(&p.states[k], leg, ports[k], p.parities[k]),
                });
            }
            if p.ops[k] != d.ops[k] {
                let follows = p.states[k].implied_op() == Some(p.ops[k]);
                out.push(Mismatch {
                    case: p.case,
                    parity_class: Some(p.parity_class),
                    field: format!("op mode {mode}"),
                    printed: p.ops[k].code().into(),
                    derived: d.ops[k].code().into(),
                    kind: MismatchKind::PrintedTypo,
                    note: if follows {
                        "op undoes the printed state, which is itself inconsistent".into()
                    } else {
                        format!(
                            "{} pair lit on the {} port with {} count needs {}",
                            leg,
                            if ports[k] == Port::Sum {
                                "sum"
                            } else {
                                "difference"
                            },
                            if p.parities[k] == Parity::Odd {
                                "an odd"
                            } else {
                                "an even"
                            },
                            d.ops[k].code()
                        )
                    },
                });
            }
        }
        if p.faithful != d.faithful {
            out.push(Mismatch {
                case: p.case,
                parity_class: Some(p.parity_class),
                field: "tag".into(),
                printed: if p.faithful { "F" } else { "NF" }.into(),
                derived: if d.faithful { "F" } else { "NF" }.into(),
                kind: MismatchKind::PrintedTypo,
                note: "faithful exactly when all three counts are even".into(),
            });
        }
    }
    out
}

fn state_note(cell: &StateCell, leg: Leg, port: Port, parity: Parity) -> String {
    let letter = ['a', 'b', 'c'][leg.index()];
    if cell.letters != [letter, letter] {
        return format!(
            "coefficients {}0/{}1 in the slot of {letter}0/{letter}1",
            cell.letters[0], cell.letters[1]
        );
    }
    if !cell.well_formed(leg) {
        return "both terms carry the same ket".into();
    }
    let header_first_plus = port == Port::Sum;
    if cell.kets_plus[0] != header_first_plus {
        return "kets contradict the lit port in the case header".into();
    }
    format!(
        "joining sign contradicts the {} parity label",
        if parity == Parity::Odd { "odd" } else { "even" }
    )
}

/// Derived table, printed table, their diff and any internal problems.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableReport {
    pub derived: Vec<TableRow>,
    pub mismatches: Vec<Mismatch>,
    pub problems: Vec<String>,
}

pub fn table_report() -> Result<TableReport> {
    let derived = derive_table();
    let printed = printed_table();
    Ok(TableReport {
        mismatches: diff_tables(&derived, &printed),
        problems: check_table(&derived),
        derived,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_codes_round_trip() {
        for code in ["a+-a-", "b-+a+", "c++c+"] {
            assert_eq!(StateCell::parse(code).unwrap().code(), code);
        }
        assert!(StateCell::parse("a+*a-").is_none());
        let cell = StateCell::parse("a--a+").unwrap();
        assert_eq!(cell.to_string(), "a0|−α⟩ − a1|α⟩");
        assert_eq!(cell.implied_op(), Some(CorrectionOp::PhaseDisplace));
    }

    #[test]
    fn derived_table_is_consistent() {
        let rows = derive_table();
        assert_eq!(rows.len(), 64);
        assert!(check_table(&rows).is_empty(), "{:?}", check_table(&rows));
        assert_eq!(rows.iter().filter(|r| r.faithful).count(), 8);
    }

    #[test]
    fn fixture_shape() {
        let rows = printed_table();
        assert_eq!(rows.len(), 64);
        for case in CaseId::CASES {
            let n = rows.iter().filter(|r| r.case == case).count();
            assert_eq!(n, 8);
            let f: Vec<_> = rows
                .iter()
                .filter(|r| r.case == case && r.faithful)
                .collect();
            assert_eq!(f.len(), 1);
            assert_eq!(f[0].parities, [Parity::Even; 3]);
        }
    }

    #[test]
    fn printed_case_one_matches_except_row_six() {
        let derived = derive_table();
        let printed = printed_table();
        let diff = diff_tables(&derived, &printed);
        let case_one: Vec<_> = diff
            .iter()
            .filter(|m| m.case == CaseId::I && m.parity_class.is_some())
            .collect();
        assert_eq!(case_one.len(), 2);
        assert!(case_one.iter().all(|m| m.parity_class == Some(6)));
        assert_eq!(case_one[0].field, "state mode 5");
        assert_eq!(case_one[1].field, "op mode 5");
    }

    #[test]
    fn diff_reports_coefficient_typos() {
        let report = table_report().unwrap();
        let letters: Vec<_> = report
            .mismatches
            .iter()
            .filter(|m| m.note.starts_with("coefficients"))
            .collect();
        assert!(letters.iter().all(|m| m.case == CaseId::VIII));
        // modes 5 and 6 of all eight rows
        assert_eq!(letters.len(), 16);
        assert!(report.problems.is_empty());
    }
}
