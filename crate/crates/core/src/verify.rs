//! Self-checks behind `verify-tables` and `verify-invariants`.

use std::fmt;

use ndarray::{Array2, Axis};
use rand::{Rng, RngCore};

use crate::bombe::{BombeConfig, BombeState};
use crate::environment::epd::{DegreeDiscrepancy, LevelDiscrepancy};
use crate::environment::{
    pattern_label, BernoulliEnv, CollisionPolicy, EpdTable, MachineSet, CANONICAL_PROBS,
};
use crate::error::Result;
use crate::fluctuations::{internal_fixed, internal_m_random, internal_random};
use crate::harness::rng_stream;
use crate::metrics::OutcomeClass;
use crate::tow::{gamma_prime, omega0, tow_principle_gap, OmegaMode};

const C: usize = 2;
const D: usize = 3;
const E: usize = 4;

/// The three printed payoff matrices of the canonical machine set (players
/// restricted to C, D, E), with their SM / NE marks.
pub const MAIN_TABLE_CELLS: [([usize; 3], [f64; 3], Option<OutcomeClassMark>); 27] = {
    use OutcomeClassMark::{Ne, Sm};
    [
        ([C, C, C], [1.0 / 30.0, 1.0 / 30.0, 1.0 / 30.0], None),
        ([C, D, C], [0.05, 0.2, 0.05], None),
        ([C, E, C], [0.05, 0.9, 0.05], None),
        ([D, C, C], [0.2, 0.05, 0.05], None),
        ([D, D, C], [0.1, 0.1, 0.1], None),
        ([D, E, C], [0.2, 0.9, 0.1], Some(Sm)),
        ([E, C, C], [0.9, 0.05, 0.05], None),
        ([E, D, C], [0.9, 0.2, 0.1], Some(Sm)),
        ([E, E, C], [0.45, 0.45, 0.1], None),
        ([C, C, D], [0.05, 0.05, 0.2], None),
        ([C, D, D], [0.1, 0.1, 0.1], None),
        ([C, E, D], [0.1, 0.9, 0.2], Some(Sm)),
        ([D, C, D], [0.1, 0.1, 0.1], None),
        ([D, D, D], [2.0 / 30.0, 2.0 / 30.0, 2.0 / 30.0], None),
        ([D, E, D], [0.1, 0.9, 0.1], None),
        ([E, C, D], [0.9, 0.1, 0.2], Some(Sm)),
        ([E, D, D], [0.9, 0.1, 0.1], None),
        ([E, E, D], [0.45, 0.45, 0.2], None),
        ([C, C, E], [0.05, 0.05, 0.9], None),
        ([C, D, E], [0.1, 0.2, 0.9], Some(Sm)),
        ([C, E, E], [0.1, 0.45, 0.45], None),
        ([D, C, E], [0.2, 0.1, 0.9], Some(Sm)),
        ([D, D, E], [0.1, 0.1, 0.9], None),
        ([D, E, E], [0.2, 0.45, 0.45], None),
        ([E, C, E], [0.45, 0.1, 0.45], None),
        ([E, D, E], [0.45, 0.2, 0.45], None),
        ([E, E, E], [0.3, 0.3, 0.3], Some(Ne)),
    ]
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeClassMark {
    Sm,
    Ne,
}

/// One printed cell against the computed expectation and classification.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCheck {
    pub pattern: [usize; 3],
    pub printed: [f64; 3],
    pub computed: Vec<f64>,
    pub mark: Option<OutcomeClassMark>,
    pub class: OutcomeClass,
}

impl CellCheck {
    pub fn payoff_matches(&self) -> bool {
        self.computed.len() == 3
            && self
                .computed
                .iter()
                .zip(self.printed)
                .all(|(a, b)| (a - b).abs() <= 1e-15)
    }

    pub fn mark_matches(&self) -> bool {
        match self.mark {
            Some(OutcomeClassMark::Sm) => self.class.is_social_maximum(),
            Some(OutcomeClassMark::Ne) => self.class == OutcomeClass::NashEquilibrium,
            None => self.class == OutcomeClass::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableReport {
    pub cells: Vec<CellCheck>,
    pub epd_rows: usize,
    pub anchor_violations: Vec<[usize; 3]>,
    pub degree_discrepancies: Vec<DegreeDiscrepancy>,
    pub level_discrepancies: Vec<LevelDiscrepancy>,
    pub prose_discrepancies: Vec<DegreeDiscrepancy>,
}

impl TableReport {
    /// Printed cells and anchors agree and the EPD table is complete.
    /// Degree and level discrepancies are informational.
    pub fn is_consistent(&self) -> bool {
        self.cells.iter().all(|c| c.payoff_matches() && c.mark_matches())
            && self.epd_rows == 125
            && self.anchor_violations.is_empty()
    }
}

impl fmt::Display for TableReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ok = self.cells.iter().filter(|c| c.payoff_matches()).count();
        writeln!(f, "payoff cells: {ok}/{} match", self.cells.len())?;
        for c in self.cells.iter().filter(|c| !c.payoff_matches() || !c.mark_matches()) {
            writeln!(
                f,
                "  MISMATCH {}: printed {:?}, computed {:?}, class {}",
                pattern_label(&c.pattern),
                c.printed,
                c.computed,
                c.class
            )?;
        }
        writeln!(f, "epd rows: {}", self.epd_rows)?;
        writeln!(f, "anchor violations: {}", self.anchor_violations.len())?;
        for p in &self.anchor_violations {
            writeln!(f, "  {}", pattern_label(p))?;
        }
        writeln!(f, "table/oracle degree discrepancies: {}", self.degree_discrepancies.len())?;
        for d in &self.degree_discrepancies {
            writeln!(f, "  {d}")?;
        }
        writeln!(f, "table/level-rule discrepancies: {}", self.level_discrepancies.len())?;
        for d in &self.level_discrepancies {
            writeln!(
                f,
                "  {} degrees {:?}: table {:?}, rule {:?}",
                pattern_label(&d.pattern),
                d.degrees,
                d.table,
                d.rule
            )?;
        }
        writeln!(f, "prose/oracle degree discrepancies: {}", self.prose_discrepancies.len())?;
        for d in &self.prose_discrepancies {
            writeln!(f, "  {d}")?;
        }
        Ok(())
    }
}

pub fn verify_tables(table: &EpdTable) -> Result<TableReport> {
    use crate::environment::Environment;
    let machines = MachineSet::new(CANONICAL_PROBS.to_vec())?;
    let env = BernoulliEnv::new(machines.clone(), CollisionPolicy::SplitProbability);
    let cells = MAIN_TABLE_CELLS
        .iter()
        .map(|&(pattern, printed, mark)| {
            Ok(CellCheck {
                pattern,
                printed,
                computed: machines.expected_payoff(&pattern)?,
                mark,
                class: env.classify(&pattern),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TableReport {
        cells,
        epd_rows: table.len(),
        anchor_violations: table.anchor_violations().iter().map(|r| r.pattern).collect(),
        degree_discrepancies: table.degree_discrepancies(),
        level_discrepancies: table.level_discrepancies(),
        prose_discrepancies: EpdTable::prose_discrepancies(),
    })
}

/// Outcome of one property check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Sizes of the invariant suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvariantBudget {
    pub bombe_steps: usize,
    pub generations: usize,
    pub tuples: usize,
}

impl Default for InvariantBudget {
    fn default() -> Self {
        Self {
            bombe_steps: 100_000,
            generations: 10_000,
            tuples: 1_000,
        }
    }
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Largest drift of `Q` column sums and height row sums over `steps` random
/// bombe steps from rest (3 players, 5 machines, random fluctuations).
pub fn conservation_drift(steps: usize, rng: &mut dyn RngCore) -> Result<(f64, f64)> {
    let env = BernoulliEnv::new(MachineSet::canonical(), CollisionPolicy::SplitProbability);
    let cfg = BombeConfig::new(3, 5, OmegaMode::Adaptive);
    let mut state = BombeState::new(&cfg)?;
    let (mut col, mut row) = (0.0f64, 0.0f64);
    for _ in 0..steps {
        let osc = internal_random(1.0, 10, 3, 5, rng)?;
        state.step(&cfg, &env, &osc, rng)?;
        col = col.max(max_abs(state.estimates().sum_axis(Axis(0))));
        row = row.max(max_abs(state.heights()?.sum_axis(Axis(1))));
    }
    Ok((col, row))
}

/// Largest row or column sum over `generations` matrices of each internal kind.
pub fn fluctuation_drift(generations: usize, rng: &mut dyn RngCore) -> Result<f64> {
    let sums = |a: &Array2<f64>| {
        max_abs(a.sum_axis(Axis(0))).max(max_abs(a.sum_axis(Axis(1))))
    };
    let mut worst = 0.0f64;
    for t in 0..generations {
        let amplitude = rng.random_range(0.1..20.0);
        worst = worst.max(sums(&internal_fixed(t as u64, amplitude, 3, 5)?));
        worst = worst.max(sums(&internal_random(amplitude, 10, 3, 5, rng)?));
        worst = worst.max(sums(&internal_m_random(amplitude, 10, 3, 5, rng)?));
    }
    Ok(worst)
}

/// Largest relative gap between the two TOW-principle differences.
pub fn principle_gap(tuples: usize, rng: &mut dyn RngCore) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..tuples {
        let n_a = rng.random_range(1..10_000u64);
        let n_b = rng.random_range(1..10_000u64);
        let l_a = rng.random_range(0..=n_a);
        let l_b = rng.random_range(0..=n_b);
        let gamma = rng.random_range(0.01..1.99);
        let (a, b) = tow_principle_gap(n_a, n_b, l_a, l_b, gamma)?;
        let scale = a.abs().max(b.abs()).max(1.0);
        worst = worst.max((a - b).abs() / scale);
    }
    Ok(worst)
}

/// Conservation, zero-sum fluctuations, the TOW-principle identity and the
/// canonical omega anchor.
pub fn verify_invariants(seed: u64, budget: InvariantBudget) -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    let (col, row) = conservation_drift(budget.bombe_steps, &mut rng_stream(seed, 0))?;
    checks.push(Check {
        name: "estimate conservation",
        passed: col <= 1e-9 && row <= 1e-9,
        detail: format!(
            "{} steps, max |column sum| {col:.3e}, max |height row sum| {row:.3e}",
            budget.bombe_steps
        ),
    });

    let drift = fluctuation_drift(budget.generations, &mut rng_stream(seed, 1))?;
    checks.push(Check {
        name: "zero-sum internal fluctuations",
        passed: drift <= 1e-12,
        detail: format!("{} generations per kind, max |sum| {drift:.3e}", budget.generations),
    });

    let gap = principle_gap(budget.tuples, &mut rng_stream(seed, 2))?;
    checks.push(Check {
        name: "TOW principle identity",
        passed: gap <= 1e-12,
        detail: format!("{} tuples, max relative gap {gap:.3e}", budget.tuples),
    });

    let g = gamma_prime(&CANONICAL_PROBS, 3)?;
    let w = omega0(g)?;
    checks.push(Check {
        name: "canonical omega",
        passed: (g - 0.15).abs() < 1e-12 && (w * 100.0).round() == 8.0,
        detail: format!("gamma' = {g}, omega0 = {w:.6}"),
    });
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printed_tables_are_reproduced() {
        let report = verify_tables(&EpdTable::bundled().unwrap()).unwrap();
        assert!(report.is_consistent(), "{report}");
        assert_eq!(report.cells.len(), 27);
        let sm = report.cells.iter().filter(|c| c.class.is_social_maximum()).count();
        assert_eq!(sm, 6);
    }

    #[test]
    fn small_invariant_suite_passes() {
        let budget = InvariantBudget {
            bombe_steps: 2_000,
            generations: 500,
            tuples: 200,
        };
        for check in verify_invariants(5, budget).unwrap() {
            assert!(check.passed, "{check}");
        }
    }

    #[test]
    fn report_lists_prose_discrepancies() {
        let report = verify_tables(&EpdTable::bundled().unwrap()).unwrap();
        let text = report.to_string();
        assert!(text.contains("(B,C,D)"), "{text}");
    }
}
