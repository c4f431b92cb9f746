//! The three-person Extended Prisoner's Dilemma.
//!
//! Each person picks one of five options (`A` keep silent, `B` confess,
//! `C` implicate the next person, `D` implicate the third person, `E`
//! implicate both others). The resulting degrees of charges select a reward
//! probability per person. The 125-row table ships in `data/epd_table.csv`
//! and is authoritative; [`epd_degrees_oracle`] and [`level_rule_probs`]
//! recompute rows from the option semantics so disagreements can be reported.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use rand::{Rng, RngCore};

use super::{machine_label, parse_machine_label, pattern_label, Environment};
use crate::error::{Error, Result};
use crate::metrics::{OutcomeClass, ReferencePoint};

const BUNDLED: &str = include_str!("../../data/epd_table.csv");

pub const PLAYERS: usize = 3;
pub const OPTIONS: usize = 5;

pub const T3: f64 = 0.79;
pub const T2: f64 = 0.76;
pub const T1: f64 = 0.73;
pub const R: f64 = 0.70;
pub const R1: f64 = 0.60;
pub const R2: f64 = 0.55;
pub const P: f64 = 0.50;
pub const S1: f64 = 0.40;
pub const S2: f64 = 0.30;
pub const S3: f64 = 0.20;

/// Every probability level a table row may use.
pub const LEVELS: [f64; 10] = [T3, T2, T1, R, R1, R2, P, S1, S2, S3];

pub type Pattern = [usize; PLAYERS];

#[derive(Debug, Clone, PartialEq)]
pub struct EpdRow {
    pub pattern: Pattern,
    pub degrees: [u8; PLAYERS],
    pub probs: [f64; PLAYERS],
}

/// Oracle/table (or prose/oracle) disagreement on degrees of charges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeDiscrepancy {
    pub pattern: Pattern,
    pub stated: [u8; PLAYERS],
    pub oracle: [u8; PLAYERS],
}

impl std::fmt::Display for DegreeDiscrepancy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} stated {:?} but option semantics give {:?}",
            pattern_label(&self.pattern),
            self.stated,
            self.oracle
        )
    }
}

/// Table row whose probabilities differ from the level rule applied to its degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelDiscrepancy {
    pub pattern: Pattern,
    pub degrees: [u8; PLAYERS],
    pub table: [f64; PLAYERS],
    pub rule: [f64; PLAYERS],
}

/// Degree examples given alongside the table in the original write-up.
pub const PROSE_DEGREE_EXAMPLES: [(Pattern, [u8; PLAYERS]); 6] = [
    ([1, 1, 1], [1, 1, 1]),
    ([0, 1, 2], [1, 1, 0]),
    ([1, 2, 3], [2, 1, 1]),
    ([2, 3, 3], [2, 2, 1]),
    ([3, 3, 3], [2, 2, 2]),
    ([1, 3, 3], [3, 1, 1]),
];

/// Degrees of charges implied by the option semantics.
///
/// Persons are circular `1 -> 2 -> 3 -> 1`: `C` charges the next person,
/// `D` the one after that, `E` both others, `B` oneself, `A` nobody.
pub fn epd_degrees_oracle(pattern: Pattern) -> Result<[u8; PLAYERS]> {
    let mut degrees = [0u8; PLAYERS];
    for (i, &choice) in pattern.iter().enumerate() {
        let next = (i + 1) % PLAYERS;
        let third = (i + 2) % PLAYERS;
        match choice {
            0 => {}
            1 => degrees[i] += 1,
            2 => degrees[next] += 1,
            3 => degrees[third] += 1,
            4 => {
                degrees[next] += 1;
                degrees[third] += 1;
            }
            other => {
                return Err(Error::input(format!("option index {other} outside A..E")));
            }
        }
    }
    Ok(degrees)
}

fn is_perm_of_211(d: [u8; PLAYERS]) -> bool {
    let mut s = d;
    s.sort_unstable();
    s == [1, 1, 2]
}

/// Reward probabilities the verbal level rule assigns to a degree pattern.
pub fn level_rule_probs(degrees: [u8; PLAYERS]) -> [f64; PLAYERS] {
    match degrees {
        [0, 0, 0] => return [R2; PLAYERS],
        [1, 1, 1] => return [R1; PLAYERS],
        [2, 2, 2] => return [P; PLAYERS],
        d if is_perm_of_211(d) => return [R; PLAYERS],
        _ => {}
    }
    let min = *degrees.iter().min().unwrap_or(&0);
    let spread = degrees.iter().max().unwrap_or(&0) - min;
    let t = [0.0, T1, T2, T3][spread.min(3) as usize];
    degrees.map(|d| match d - min {
        0 => t,
        1 => S1,
        2 => S2,
        _ => S3,
    })
}

/// The 125-row selection-pattern table.
#[derive(Debug, Clone)]
pub struct EpdTable {
    rows: Vec<EpdRow>,
    index: HashMap<Pattern, usize>,
}

fn parse_degree(s: &str) -> Result<u8> {
    let d: u8 = s
        .trim()
        .parse()
        .map_err(|_| Error::Integrity(format!("bad degree {s:?}")))?;
    if d > 3 {
        return Err(Error::Integrity(format!("degree {d} outside 0..=3")));
    }
    Ok(d)
}

fn parse_prob(s: &str) -> Result<f64> {
    let p: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Integrity(format!("bad probability {s:?}")))?;
    if !LEVELS.iter().any(|&l| (l - p).abs() < 1e-12) {
        return Err(Error::Integrity(format!("probability {p} is not a named level")));
    }
    Ok(p)
}

fn parse_choice(s: &str) -> Result<usize> {
    let mut chars = s.trim().chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => {
            let k = parse_machine_label(c).map_err(|e| Error::Integrity(e.to_string()))?;
            if k < OPTIONS {
                Ok(k)
            } else {
                Err(Error::Integrity(format!("choice {c:?} outside A..E")))
            }
        }
        _ => Err(Error::Integrity(format!("bad choice {s:?}"))),
    }
}

impl EpdTable {
    /// The table bundled with the crate.
    pub fn bundled() -> Result<Self> {
        Self::from_reader(BUNDLED.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    /// Parses `choice1,choice2,choice3,deg1,deg2,deg3,p1,p2,p3` rows.
    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut rows = Vec::with_capacity(125);
        for (line, record) in csv.records().enumerate() {
            let record = record.map_err(|e| Error::Integrity(format!("row {}: {e}", line + 1)))?;
            if record.len() != 9 {
                return Err(Error::Integrity(format!(
                    "row {}: expected 9 fields, got {}",
                    line + 1,
                    record.len()
                )));
            }
            let pattern = [
                parse_choice(&record[0])?,
                parse_choice(&record[1])?,
                parse_choice(&record[2])?,
            ];
            let degrees = [
                parse_degree(&record[3])?,
                parse_degree(&record[4])?,
                parse_degree(&record[5])?,
            ];
            let probs = [
                parse_prob(&record[6])?,
                parse_prob(&record[7])?,
                parse_prob(&record[8])?,
            ];
            rows.push(EpdRow {
                pattern,
                degrees,
                probs,
            });
        }
        Self::from_rows(rows)
    }

    pub fn from_rows(rows: Vec<EpdRow>) -> Result<Self> {
        let mut index = HashMap::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if index.insert(row.pattern, i).is_some() {
                return Err(Error::Integrity(format!(
                    "duplicate row for {}",
                    pattern_label(&row.pattern)
                )));
            }
        }
        let expected = OPTIONS.pow(PLAYERS as u32);
        if rows.len() != expected {
            return Err(Error::Integrity(format!(
                "expected {expected} rows, found {}",
                rows.len()
            )));
        }
        Ok(Self { rows, index })
    }

    pub fn rows(&self) -> &[EpdRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The stored row for a pattern, verbatim.
    pub fn epd_payoff(&self, pattern: Pattern) -> Result<&EpdRow> {
        if pattern.iter().any(|&k| k >= OPTIONS) {
            return Err(Error::input(format!(
                "pattern {pattern:?} outside {{A..E}}^3"
            )));
        }
        self.index
            .get(&pattern)
            .map(|&i| &self.rows[i])
            .ok_or_else(|| Error::Integrity(format!("missing row {}", pattern_label(&pattern))))
    }

    /// Rows whose stored degrees differ from [`epd_degrees_oracle`].
    pub fn degree_discrepancies(&self) -> Vec<DegreeDiscrepancy> {
        self.rows
            .iter()
            .filter_map(|row| {
                let oracle = epd_degrees_oracle(row.pattern).ok()?;
                (oracle != row.degrees).then_some(DegreeDiscrepancy {
                    pattern: row.pattern,
                    stated: row.degrees,
                    oracle,
                })
            })
            .collect()
    }

    /// Rows whose probabilities differ from [`level_rule_probs`] of their own degrees.
    pub fn level_discrepancies(&self) -> Vec<LevelDiscrepancy> {
        self.rows
            .iter()
            .filter_map(|row| {
                let rule = level_rule_probs(row.degrees);
                let same = rule
                    .iter()
                    .zip(row.probs.iter())
                    .all(|(a, b)| (a - b).abs() < 1e-12);
                (!same).then_some(LevelDiscrepancy {
                    pattern: row.pattern,
                    degrees: row.degrees,
                    table: row.probs,
                    rule,
                })
            })
            .collect()
    }

    /// Prose degree examples that disagree with the option semantics.
    pub fn prose_discrepancies() -> Vec<DegreeDiscrepancy> {
        PROSE_DEGREE_EXAMPLES
            .iter()
            .filter_map(|&(pattern, stated)| {
                let oracle = epd_degrees_oracle(pattern).ok()?;
                (oracle != stated).then_some(DegreeDiscrepancy {
                    pattern,
                    stated,
                    oracle,
                })
            })
            .collect()
    }

    /// Rows violating the four anchor degree patterns: `(0,0,0)`, `(1,1,1)`,
    /// permutations of `(2,1,1)` and `(2,2,2)`.
    pub fn anchor_violations(&self) -> Vec<&EpdRow> {
        self.rows
            .iter()
            .filter(|row| {
                let want = match row.degrees {
                    [0, 0, 0] => R2,
                    [1, 1, 1] => R1,
                    [2, 2, 2] => P,
                    d if is_perm_of_211(d) => R,
                    _ => return false,
                };
                row.probs.iter().any(|p| (p - want).abs() > 1e-12)
            })
            .collect()
    }

    fn max_total(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.probs.iter().sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The bombe's view of the EPD: five options, three players, per-person
/// Bernoulli rewards from the table row of the joint selection.
#[derive(Debug, Clone)]
pub struct EpdEnvironment {
    table: EpdTable,
    max_total: f64,
}

impl EpdEnvironment {
    pub fn new(table: EpdTable) -> Self {
        let max_total = table.max_total();
        Self { table, max_total }
    }

    pub fn table(&self) -> &EpdTable {
        &self.table
    }

    fn row(&self, pattern: &[usize]) -> Result<&EpdRow> {
        let p: Pattern = pattern.try_into().map_err(|_| {
            Error::input(format!(
                "the EPD needs exactly {PLAYERS} players, got {}",
                pattern.len()
            ))
        })?;
        self.table.epd_payoff(p)
    }
}

impl Environment for EpdEnvironment {
    fn machines(&self) -> usize {
        OPTIONS
    }

    fn expected_payoff(&self, pattern: &[usize]) -> Result<Vec<f64>> {
        Ok(self.row(pattern)?.probs.to_vec())
    }

    fn draw(&self, selections: &[usize], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let row = self.row(selections)?;
        Ok(row
            .probs
            .iter()
            .map(|&p| {
                let u: f64 = rng.random();
                if u < p {
                    1.0
                } else {
                    0.0
                }
            })
            .collect())
    }

    fn classify(&self, pattern: &[usize]) -> OutcomeClass {
        let Ok(row) = self.row(pattern) else {
            return OutcomeClass::Other;
        };
        let total: f64 = row.probs.iter().sum();
        if (total - self.max_total).abs() < 1e-12 {
            let id = self
                .table
                .rows
                .iter()
                .filter(|r| (r.probs.iter().sum::<f64>() - self.max_total).abs() < 1e-12)
                .position(|r| r.pattern == row.pattern)
                .unwrap_or(0);
            return OutcomeClass::SocialMaximum(id as u32 + 1);
        }
        if row.degrees == [2, 2, 2] {
            return OutcomeClass::NashEquilibrium;
        }
        OutcomeClass::Other
    }

    fn reference_points(&self, _players: usize, plays: usize) -> Vec<ReferencePoint> {
        let n = plays as f64;
        vec![
            ReferencePoint {
                class: OutcomeClass::SocialMaximum(1),
                score: vec![R * n; PLAYERS],
            },
            ReferencePoint {
                class: OutcomeClass::NashEquilibrium,
                score: vec![P * n; PLAYERS],
            },
        ]
    }
}

/// Formats a row the way the bundled file stores it.
pub fn format_row(row: &EpdRow) -> String {
    format!(
        "{},{},{},{},{},{},{:.2},{:.2},{:.2}",
        machine_label(row.pattern[0]),
        machine_label(row.pattern[1]),
        machine_label(row.pattern[2]),
        row.degrees[0],
        row.degrees[1],
        row.degrees[2],
        row.probs[0],
        row.probs[1],
        row.probs[2]
    )
}
