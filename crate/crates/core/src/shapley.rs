//! Shapley values of a finite game given by its characteristic values.
//!
//! Values are stored densely, indexed by the subset bitmask.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::Family;
use crate::measures::FitMeasure;

/// Largest player count for the all-orderings computation (9! orderings).
pub const MAX_PERMUTATION_PLAYERS: usize = 9;

/// Compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(self) -> f64 {
        self.sum
    }
}

/// `n choose k`, exact. Panics on overflow, which cannot happen for `n <= 62`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    u64::try_from(acc).expect("binomial coefficient overflows u64")
}

/// Weight `|S|! (p - |S| - 1)! / p!` of a coalition of size `k` not containing
/// the player, computed as `1 / (p * C(p - 1, k))`.
pub fn shapley_weight(p: usize, k: usize) -> Result<f64> {
    if p == 0 || k >= p {
        return Err(Error::Argument(format!(
            "coalition size {k} out of range for {p} players"
        )));
    }
    Ok(1.0 / (p as f64 * binomial(p as u64 - 1, k as u64) as f64))
}

fn check_dense(values: &[f64], p: usize) -> Result<()> {
    if p > 30 || values.len() != 1usize << p {
        return Err(Error::Argument(format!(
            "expected 2^{p} characteristic values, got {}",
            values.len()
        )));
    }
    Ok(())
}

/// Exact Shapley values by the subset formula. Accumulation runs over
/// subsets in increasing key order with compensated summation.
pub fn shapley_from_values(values: &[f64], p: usize) -> Result<Vec<f64>> {
    check_dense(values, p)?;
    let weights: Vec<f64> = (0..p)
        .map(|k| shapley_weight(p, k))
        .collect::<Result<_>>()?;
    let mut acc = vec![KahanSum::default(); p];
    for s in 0..values.len() {
        let size = (s as u64).count_ones() as usize;
        if size == p {
            continue;
        }
        let w = weights[size];
        for (i, a) in acc.iter_mut().enumerate() {
            if s >> i & 1 == 0 {
                a.add(w * (values[s | 1 << i] - values[s]));
            }
        }
    }
    Ok(acc.into_iter().map(KahanSum::value).collect())
}

/// Shapley values as the average marginal contribution over all `p!`
/// orderings of the players. Independent of [`shapley_from_values`].
pub fn shapley_permutation_oracle(values: &[f64], p: usize) -> Result<Vec<f64>> {
    if p > MAX_PERMUTATION_PLAYERS {
        return Err(Error::TooManyPlayers {
            method: "all-orderings average",
            p,
            limit: MAX_PERMUTATION_PLAYERS,
        });
    }
    check_dense(values, p)?;
    let mut totals = vec![KahanSum::default(); p];
    let mut count = 0u64;
    let mut order: Vec<usize> = (0..p).collect();
    // Heap's algorithm, iterative form
    let mut c = vec![0usize; p];
    let mut visit = |order: &[usize]| {
        let mut s = 0usize;
        for &i in order {
            let next = s | 1 << i;
            totals[i].add(values[next] - values[s]);
            s = next;
        }
        count += 1;
    };
    visit(&order);
    let mut i = 0;
    while i < p {
        if c[i] < i {
            if i % 2 == 0 {
                order.swap(0, i);
            } else {
                order.swap(c[i], i);
            }
            visit(&order);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(totals
        .into_iter()
        .map(|t| t.value() / count as f64)
        .collect())
}

/// Shapley decomposition of one measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapleyResult {
    pub measure: FitMeasure,
    pub players: Vec<String>,
    pub phi: Vec<f64>,
    /// `v(P)`
    pub v_grand: f64,
    /// `v(0)`
    pub v_empty: f64,
    /// True when `v(0) != 0`, so the values sum to `v(P) - v(0)` rather than `v(P)`.
    pub is_pseudo: bool,
    /// `phi_i / sum(phi)`; absent when the sum is zero.
    pub imp_fm: Option<Vec<f64>>,
    /// `phi_i / 1`; present only for measures bounded above by one.
    pub imp_bm: Option<Vec<f64>>,
    /// Monte Carlo standard errors; present only for sampled runs.
    pub mc_stderr: Option<Vec<f64>>,
}

impl ShapleyResult {
    pub fn new(
        measure: FitMeasure,
        players: Vec<String>,
        phi: Vec<f64>,
        v_grand: f64,
        v_empty: f64,
    ) -> ShapleyResult {
        ShapleyResult {
            measure,
            players,
            phi,
            v_grand,
            v_empty,
            is_pseudo: v_empty != 0.0,
            imp_fm: None,
            imp_bm: None,
            mc_stderr: None,
        }
    }

    pub fn phi_sum(&self) -> f64 {
        let mut s = KahanSum::default();
        self.phi.iter().for_each(|&v| s.add(v));
        s.value()
    }

    /// `|sum(phi) - (v(P) - v(0))|`
    pub fn efficiency_gap(&self) -> f64 {
        (self.phi_sum() - (self.v_grand - self.v_empty)).abs()
    }

    pub fn phi_of(&self, player: &str) -> Option<f64> {
        self.players
            .iter()
            .position(|p| p == player)
            .map(|i| self.phi[i])
    }

    /// Player indices sorted by decreasing value (ties by index).
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.phi.len()).collect();
        idx.sort_by(|&a, &b| self.phi[b].total_cmp(&self.phi[a]).then(a.cmp(&b)));
        idx
    }
}

/// Fills in the relative (`impFM`) and absolute (`impBM`) importance shares.
pub fn importance_measures(mut res: ShapleyResult, family: Family) -> ShapleyResult {
    let total = res.phi_sum();
    res.imp_fm = (total != 0.0).then(|| res.phi.iter().map(|v| v / total).collect());
    res.imp_bm = res
        .measure
        .has_upper_bound_one(family)
        .then(|| res.phi.clone());
    res
}
