//! Hanging-rootogram data: observed against expected count frequencies on
//! the square-root scale.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::family::Family;
use crate::glm::{self, FitControl};
use crate::hurdle::{self, HurdleSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootogramData {
    pub n: usize,
    /// Counts `0..=j_max`, where `j_max` is the largest observed count.
    pub counts: Vec<u64>,
    pub observed: Vec<f64>,
    pub expected: Vec<f64>,
    pub sqrt_observed: Vec<f64>,
    pub sqrt_expected: Vec<f64>,
    /// Bar bottoms of the hanging display, `sqrt(expected) - sqrt(observed)`.
    pub hanging_bottom: Vec<f64>,
    /// Expected frequency of counts above `j_max`.
    pub expected_tail: f64,
}

impl RootogramData {
    pub fn j_max(&self) -> u64 {
        self.counts.last().copied().unwrap_or(0)
    }

    pub fn observed_total(&self) -> f64 {
        self.observed.iter().sum()
    }

    /// Expected mass over the full support, tail included.
    pub fn expected_total(&self) -> f64 {
        self.expected.iter().sum::<f64>() + self.expected_tail
    }
}

/// Builds the rootogram from observed counts and per-observation pmfs.
pub fn build(
    y: &[f64],
    pmf: impl Fn(usize, u64) -> f64,
    tail_start: impl Fn(usize) -> f64,
) -> RootogramData {
    let j_max = y.iter().fold(0.0f64, |m, &v| m.max(v)) as u64;
    let counts: Vec<u64> = (0..=j_max).collect();
    let mut observed = vec![0.0f64; counts.len()];
    for &v in y {
        observed[v as usize] += 1.0;
    }
    let mut expected = vec![0.0f64; counts.len()];
    let mut expected_tail = 0.0;
    for i in 0..y.len() {
        for (j, e) in expected.iter_mut().enumerate() {
            *e += pmf(i, j as u64);
        }
        // Terms past the mode decrease monotonically; sum until negligible.
        let mode = tail_start(i);
        let mut j = j_max + 1;
        loop {
            let term = pmf(i, j);
            expected_tail += term;
            if (j as f64 > mode && term < 1e-18) || j > j_max + 1_000_000 {
                break;
            }
            j += 1;
        }
    }
    let sqrt_observed: Vec<f64> = observed.iter().map(|v| v.sqrt()).collect();
    let sqrt_expected: Vec<f64> = expected.iter().map(|v| v.sqrt()).collect();
    let hanging_bottom = sqrt_expected
        .iter()
        .zip(&sqrt_observed)
        .map(|(e, o)| e - o)
        .collect();
    RootogramData {
        n: y.len(),
        counts,
        observed,
        expected,
        sqrt_observed,
        sqrt_expected,
        hanging_bottom,
        expected_tail,
    }
}

/// Rootogram of the full-model fit of a count family.
pub fn glm_rootogram(ds: &Dataset, family: Family, ctl: &FitControl) -> Result<RootogramData> {
    if !family.is_discrete() {
        return Err(Error::Unsupported(
            "rootograms need a count or binary family".into(),
        ));
    }
    let fit = glm::fit(ds, family, ds.full_key(), ctl)?;
    let mu = fit.mu;
    Ok(build(
        ds.y(),
        |i, j| glm::predict_prob(family, mu[i], j),
        |i| 2.0 * mu[i] + 10.0,
    ))
}

/// Rootogram of the hurdle model: `f(0) = 1 - p_i` and
/// `f(j) = p_i * ztpois(j; mu_i)` for `j > 0`, with `p_i` from the binary part.
pub fn hurdle_rootogram(
    ds: &Dataset,
    spec: &HurdleSpec,
    ctl: &FitControl,
) -> Result<RootogramData> {
    let (binary_ds, count_ds) = hurdle::split(ds)?;
    let pick = |d: &Dataset, players: &[String]| {
        if players.is_empty() {
            Ok(d.clone())
        } else {
            d.with_players(players)
        }
    };
    let binary_ds = pick(&binary_ds, &spec.binary_players)?;
    let count_ds = pick(&count_ds, &spec.count_players)?;
    let binary = glm::fit(&binary_ds, Family::Logit, binary_ds.full_key(), ctl)?;
    let count = glm::fit(&count_ds, Family::ZtPoisson, count_ds.full_key(), ctl)?;

    // Count-part rates for every observation, zeros included.
    let all_count = pick(ds, &spec.count_players)?;
    let eta =
        all_count.model_matrix(all_count.full_key()) * DVector::from_column_slice(&count.beta);
    let rate: Vec<f64> = eta.iter().map(|&e| e.exp()).collect();
    let positive = binary.mu;
    Ok(build(
        ds.y(),
        |i, j| {
            if j == 0 {
                1.0 - positive[i]
            } else {
                positive[i] * glm::predict_prob(Family::ZtPoisson, rate[i], j)
            }
        },
        |i| 2.0 * rate[i] + 10.0,
    ))
}
