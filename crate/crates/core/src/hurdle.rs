//! Two-part (hurdle) Poisson analysis: a logit model for `y > 0` on all
//! observations and a zero-truncated Poisson model on the positive counts.
//! The hurdle log-likelihood is the sum of the two parts, so each part is
//! fitted and decomposed on its own.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::engine::{self, Analysis, AnalysisOptions};
use crate::error::{Error, Result};
use crate::family::Family;
use crate::measures::NullConvention;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HurdleSpec {
    /// Players of the binary part; empty means all players.
    pub binary_players: Vec<String>,
    /// Players of the count part; empty means all players.
    pub count_players: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HurdleReport {
    pub binary: Analysis,
    pub count: Analysis,
    pub n: usize,
    pub n_plus: usize,
    /// `l_binary(P) + l_zt(P)`
    pub total_loglik: f64,
}

/// Splits a count dataset into the occurrence indicator (all rows) and the
/// positive counts (rows with `y > 0`).
pub fn split(ds: &Dataset) -> Result<(Dataset, Dataset)> {
    Family::Poisson.validate_response(ds.y())?;
    let n_plus = ds.y().iter().filter(|&&v| v > 0.0).count();
    if n_plus == 0 {
        return Err(Error::DegenerateHurdle("count"));
    }
    if n_plus == ds.n() {
        return Err(Error::DegenerateHurdle("binary (zero)"));
    }
    let indicator = ds
        .y()
        .iter()
        .map(|&v| if v > 0.0 { 1.0 } else { 0.0 })
        .collect();
    let binary = ds.with_response(indicator)?;
    let count = ds.filter_rows(|_, v| v > 0.0)?;
    Ok((binary, count))
}

fn restrict(ds: &Dataset, players: &[String]) -> Result<Dataset> {
    if players.is_empty() {
        Ok(ds.clone())
    } else {
        ds.with_players(players)
    }
}

/// Runs the exact analysis on each part. The binary part always uses the ML
/// null; `opts.null` applies to the count part.
pub fn analyze_hurdle(
    ds: &Dataset,
    spec: &HurdleSpec,
    opts: &AnalysisOptions,
) -> Result<HurdleReport> {
    let (binary_ds, count_ds) = split(ds)?;
    let binary_ds = restrict(&binary_ds, &spec.binary_players)?;
    let count_ds = restrict(&count_ds, &spec.count_players)?;
    let part = |name: &'static str| {
        move |e: Error| Error::Part {
            part: name,
            source: Box::new(e),
        }
    };

    let binary_opts = AnalysisOptions {
        null: NullConvention::Ml,
        ..opts.clone()
    };
    let (binary, count) = rayon::join(
        || engine::analyze(&binary_ds, Family::Logit, &binary_opts).map_err(part("binary")),
        || engine::analyze(&count_ds, Family::ZtPoisson, opts).map_err(part("count")),
    );
    let (binary, count) = (binary?, count?);
    let total_loglik = binary.full.loglik + count.full.loglik;
    Ok(HurdleReport {
        n: ds.n(),
        n_plus: count_ds.n(),
        binary,
        count,
        total_loglik,
    })
}
