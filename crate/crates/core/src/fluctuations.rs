//! Per-step fluctuation matrices added to the interface heights.
//!
//! Three internal kinds conserve both fluids: every row and every column of
//! the generated `M x N` matrix sums to zero. The external oscillation drives
//! every player identically, so only its rows sum to zero.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use crate::error::{Error, Result};

/// Default number of accumulated sheets for the random kinds.
pub const DEFAULT_DEPTH: usize = 10;

/// Period of the external oscillation, in steps.
pub const EXTERNAL_PERIOD: f64 = 5.0;

/// Fixed moves `O_0..O_4` in units of the amplitude.
const FIXED_MOVES: [f64; 5] = [0.0, 1.0, 0.0, -1.0, 0.0];

/// Index of the fixed move each player uses, by `num` (rows are players 1..3).
const FIXED_CASES: [[usize; 5]; 3] = [[0, 1, 2, 3, 4], [3, 4, 0, 1, 2], [1, 3, 4, 2, 0]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FluctuationKind {
    #[default]
    None,
    InternalFixed,
    InternalRandom,
    InternalMRandom,
    ExternalOscillation,
}

impl FluctuationKind {
    pub const ALL: [FluctuationKind; 5] = [
        FluctuationKind::None,
        FluctuationKind::InternalFixed,
        FluctuationKind::InternalRandom,
        FluctuationKind::InternalMRandom,
        FluctuationKind::ExternalOscillation,
    ];

    pub fn token(self) -> &'static str {
        match self {
            FluctuationKind::None => "none",
            FluctuationKind::InternalFixed => "fixed",
            FluctuationKind::InternalRandom => "random",
            FluctuationKind::InternalMRandom => "m-random",
            FluctuationKind::ExternalOscillation => "external",
        }
    }

    /// Internal kinds keep every column sum at zero.
    pub fn is_internal(self) -> bool {
        matches!(
            self,
            FluctuationKind::InternalFixed
                | FluctuationKind::InternalRandom
                | FluctuationKind::InternalMRandom
        )
    }
}

impl fmt::Display for FluctuationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for FluctuationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FluctuationKind::ALL
            .into_iter()
            .find(|k| k.token() == s)
            .ok_or_else(|| {
                Error::input(format!(
                    "unknown fluctuation kind {s:?} (expected none|fixed|random|m-random|external)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuationSpec {
    pub kind: FluctuationKind,
    pub amplitude: f64,
    pub depth: usize,
    /// Allow the fixed kind on shapes other than 3 x 5.
    pub generalized: bool,
}

impl Default for FluctuationSpec {
    fn default() -> Self {
        Self {
            kind: FluctuationKind::None,
            amplitude: 0.0,
            depth: DEFAULT_DEPTH,
            generalized: false,
        }
    }
}

impl FluctuationSpec {
    pub fn new(kind: FluctuationKind, amplitude: f64, depth: usize) -> Result<Self> {
        let spec = Self {
            kind,
            amplitude,
            depth,
            generalized: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::input(format!(
                "amplitude must be finite and >= 0, got {}",
                self.amplitude
            )));
        }
        if self.depth == 0 {
            return Err(Error::input("depth must be at least 1"));
        }
        Ok(())
    }

    /// Checks that this spec can drive an `m x n` bombe.
    pub fn check_shape(&self, m: usize, n: usize) -> Result<()> {
        match self.kind {
            FluctuationKind::InternalFixed if !self.generalized && (m, n) != (3, 5) => {
                Err(Error::input(format!(
                    "fixed fluctuations are defined for 3 players x 5 machines, got {m} x {n} \
                     (enable the generalized pattern)"
                )))
            }
            FluctuationKind::InternalFixed if m < 2 || n < 2 => {
                Err(Error::input("fixed fluctuations need at least 2 x 2"))
            }
            FluctuationKind::InternalRandom if m < 2 || n < 2 => {
                Err(Error::input("random fluctuations need at least 2 x 2"))
            }
            FluctuationKind::InternalMRandom if m < 2 || n <= m => Err(Error::domain(format!(
                "m-random fluctuations need 2 <= M < N, got M = {m}, N = {n}"
            ))),
            _ => Ok(()),
        }
    }

    /// The matrix for step `t`. A zero amplitude yields zeros without
    /// consuming randomness, so every kind coincides at `A = 0`.
    pub fn generate(
        &self,
        t: u64,
        m: usize,
        n: usize,
        rng: &mut (impl RngCore + ?Sized),
    ) -> Result<Array2<f64>> {
        if self.kind == FluctuationKind::None || self.amplitude == 0.0 {
            return Ok(Array2::zeros((m, n)));
        }
        match self.kind {
            FluctuationKind::None => unreachable!(),
            FluctuationKind::InternalFixed if self.generalized => {
                internal_fixed_generalized(t, self.amplitude, m, n)
            }
            FluctuationKind::InternalFixed => internal_fixed(t, self.amplitude, m, n),
            FluctuationKind::InternalRandom => {
                internal_random(self.amplitude, self.depth, m, n, rng)
            }
            FluctuationKind::InternalMRandom => {
                internal_m_random(self.amplitude, self.depth, m, n, rng)
            }
            FluctuationKind::ExternalOscillation => {
                Ok(external_oscillation(t, self.amplitude, m, n))
            }
        }
    }
}

/// `num = (t + (k - 2)) mod 5` for one-based machine `k`, never negative.
pub fn fixed_num(t: u64, k: usize) -> usize {
    ((t as i64 + k as i64 - 2).rem_euclid(5)) as usize
}

/// Deterministic fixed moves for three players and five machines.
pub fn internal_fixed(t: u64, amplitude: f64, m: usize, n: usize) -> Result<Array2<f64>> {
    if (m, n) != (3, 5) {
        return Err(Error::input(format!(
            "fixed fluctuations are defined for 3 x 5, got {m} x {n}"
        )));
    }
    Ok(Array2::from_shape_fn((3, 5), |(i, k)| {
        let num = fixed_num(t, k + 1);
        amplitude * FIXED_MOVES[FIXED_CASES[i][num]]
    }))
}

/// Fixed pattern for any `m, n >= 2`: `A (e_p - e_q)(e_c - e_d)^T` with
/// `p = t mod m`, `q = (t+1) mod m`, `c = t mod n`, `d = (t+2) mod n`
/// (`d = (t+1) mod n` when `n = 2`). Entries lie in `{0, +-A}`.
pub fn internal_fixed_generalized(t: u64, amplitude: f64, m: usize, n: usize) -> Result<Array2<f64>> {
    if m < 2 || n < 2 {
        return Err(Error::input("fixed fluctuations need at least 2 x 2"));
    }
    let t = t as usize;
    let (p, q) = (t % m, (t + 1) % m);
    let c = t % n;
    let d = if n == 2 { (t + 1) % n } else { (t + 2) % n };
    let mut osc = Array2::zeros((m, n));
    osc[(p, c)] += amplitude;
    osc[(p, d)] -= amplitude;
    osc[(q, c)] -= amplitude;
    osc[(q, d)] += amplitude;
    Ok(osc)
}

/// Coefficients of one random sheet: seed cell, rest of its column, rest of
/// its row, everything else.
pub fn sheet_coefficients(m: usize, n: usize) -> (f64, f64, f64, f64) {
    let (m1, n1) = ((m - 1) as f64, (n - 1) as f64);
    (1.0, -1.0 / m1, -1.0 / n1, 1.0 / (m1 * n1))
}

/// Sum of `depth` single-seed sheets, scaled by `A / depth`.
///
/// Each sheet draws `r ~ U[0,1)` and a uniform cell `(i0, k0)`, in that order.
pub fn internal_random(
    amplitude: f64,
    depth: usize,
    m: usize,
    n: usize,
    rng: &mut (impl RngCore + ?Sized),
) -> Result<Array2<f64>> {
    if m < 2 || n < 2 {
        return Err(Error::input("random fluctuations need at least 2 x 2"));
    }
    if depth == 0 {
        return Err(Error::input("depth must be at least 1"));
    }
    let (seed_c, col_c, row_c, rest_c) = sheet_coefficients(m, n);
    let mut sum = Array2::<f64>::zeros((m, n));
    for _ in 0..depth {
        let r: f64 = rng.random();
        let i0 = rng.random_range(0..m);
        let k0 = rng.random_range(0..n);
        for ((i, k), cell) in sum.indexed_iter_mut() {
            *cell += r * match (i == i0, k == k0) {
                (true, true) => seed_c,
                (false, true) => col_c,
                (true, false) => row_c,
                (false, false) => rest_c,
            };
        }
    }
    Ok(sum * (amplitude / depth as f64))
}

/// Number of ways to give `m` players distinct seed columns among `n`.
pub fn seed_arrangements(m: usize, n: usize) -> u64 {
    if m > n {
        return 0;
    }
    ((n - m + 1)..=n).map(|x| x as u64).product()
}

/// Sum of `depth` sheets where every player seeds its own distinct column.
///
/// Per sheet: draws `r_1..r_M` in player order, then a uniform arrangement of
/// distinct columns by partial shuffle of `0..N`. The seeded column of
/// player `i` is `-r_i/(M-1)` elsewhere; the remaining cells of row `i` are
/// `-(r_i - sum_{j != i} r_j/(M-1)) / (N - M)`.
pub fn internal_m_random(
    amplitude: f64,
    depth: usize,
    m: usize,
    n: usize,
    rng: &mut (impl RngCore + ?Sized),
) -> Result<Array2<f64>> {
    if m < 2 || n <= m {
        return Err(Error::domain(format!(
            "m-random fluctuations need 2 <= M < N, got M = {m}, N = {n}"
        )));
    }
    if depth == 0 {
        return Err(Error::input("depth must be at least 1"));
    }
    let m1 = (m - 1) as f64;
    let spare = (n - m) as f64;
    let mut columns: Vec<usize> = (0..n).collect();
    let mut sum = Array2::<f64>::zeros((m, n));
    let mut sheet = Array2::<f64>::zeros((m, n));
    for _ in 0..depth {
        let seeds: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        columns.sort_unstable();
        let (chosen, _) = columns.partial_shuffle(rng, m);
        let chosen = chosen.to_vec();
        let total: f64 = seeds.iter().sum();

        for i in 0..m {
            let others = (total - seeds[i]) / m1;
            let fill = -(seeds[i] - others) / spare;
            sheet.row_mut(i).fill(fill);
        }
        for (i, &k0) in chosen.iter().enumerate() {
            for j in 0..m {
                sheet[(j, k0)] = if j == i { seeds[i] } else { -seeds[i] / m1 };
            }
        }
        sum += &sheet;
    }
    Ok(sum * (amplitude / depth as f64))
}

/// `A sin(2 pi t / 5 + 2 pi (k - 1) / N)`, identical for every player.
pub fn external_oscillation(t: u64, amplitude: f64, m: usize, n: usize) -> Array2<f64> {
    Array2::from_shape_fn((m, n), |(_, k)| {
        // the phase only depends on t modulo the period; reducing first keeps it exact
        let phase = (t % EXTERNAL_PERIOD as u64) as f64 / EXTERNAL_PERIOD;
        amplitude * (2.0 * PI * phase + 2.0 * PI * k as f64 / n as f64).sin()
    })
}

/// Largest absolute entry over a series of matrices.
pub fn max_fluctuation<'a>(series: impl IntoIterator<Item = &'a Array2<f64>>) -> Result<f64> {
    let mut seen = false;
    let mut max = 0.0f64;
    for osc in series {
        seen = true;
        max = osc.iter().fold(max, |acc, v| acc.max(v.abs()));
    }
    if seen {
        Ok(max)
    } else {
        Err(Error::input("max_fluctuation needs at least one matrix"))
    }
}
