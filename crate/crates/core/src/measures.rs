//! Goodness-of-fit measures used as characteristic functions.
//!
//! All four measures are affine in the subset log-likelihood `l(S)`, so a
//! run only needs `(l(S), deviance(S))` per subset plus a few run-level
//! constants to evaluate any of them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SubsetKey};
use crate::error::{Error, Result};
use crate::family::Family;
use crate::glm::{self, FitControl};

/// Tolerance used for bound checks and report clamping.
pub const BOUND_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMeasure {
    /// Fraction of deviance explained, `(l(S) - l(0)) / (l(y,y) - l(0))`.
    KlR2,
    /// `1 - l(S) / l(0)`.
    McfaddenR2,
    /// Raw log-likelihood; not zero-normalized.
    Loglik,
    /// `l(S) - l(0)`.
    ShiftedLoglik,
}

impl FitMeasure {
    pub const ALL: [FitMeasure; 4] = [
        FitMeasure::KlR2,
        FitMeasure::McfaddenR2,
        FitMeasure::Loglik,
        FitMeasure::ShiftedLoglik,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FitMeasure::KlR2 => "kl-r2",
            FitMeasure::McfaddenR2 => "mcfadden-r2",
            FitMeasure::Loglik => "loglik",
            FitMeasure::ShiftedLoglik => "shifted-loglik",
        }
    }

    /// `v >= 0` on every subset (given monotonicity and `v(0) = 0`).
    pub fn has_lower_bound(self) -> bool {
        !matches!(self, FitMeasure::Loglik)
    }

    /// `v(saturated) = 1`. McFadden's index attains 1 only when `l(y,y) = 0`,
    /// i.e. for binary responses.
    pub fn has_upper_bound_one(self, family: Family) -> bool {
        match self {
            FitMeasure::KlR2 => true,
            FitMeasure::McfaddenR2 => family.is_binary(),
            FitMeasure::Loglik | FitMeasure::ShiftedLoglik => false,
        }
    }

    pub fn is_zero_normalized(self) -> bool {
        self != FitMeasure::Loglik
    }

    pub fn parse_list(s: &str) -> Result<Vec<FitMeasure>> {
        let list: Vec<FitMeasure> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        if list.is_empty() {
            return Err(Error::Argument("empty measure list".into()));
        }
        Ok(list)
    }
}

impl fmt::Display for FitMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FitMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<FitMeasure> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "kl-r2" | "kl" | "r2-kl" => Ok(FitMeasure::KlR2),
            "mcfadden-r2" | "mcfadden" => Ok(FitMeasure::McfaddenR2),
            "loglik" | "ll" => Ok(FitMeasure::Loglik),
            "shifted-loglik" => Ok(FitMeasure::ShiftedLoglik),
            other => Err(Error::Argument(format!("unknown measure `{other}`"))),
        }
    }
}

/// Cached statistics of one subset fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetStats {
    pub loglik: f64,
    pub deviance: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullConvention {
    /// Intercept-only maximum-likelihood fit.
    #[default]
    Ml,
    /// Zero-truncated Poisson only: the null log-likelihood is evaluated at
    /// rate equal to the mean positive count.
    Plugin,
}

impl FromStr for NullConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<NullConvention> {
        match s.to_ascii_lowercase().as_str() {
            "ml" | "ml-null" => Ok(NullConvention::Ml),
            "plugin" | "plugin-null" => Ok(NullConvention::Plugin),
            other => Err(Error::Argument(format!(
                "unknown null convention `{other}`"
            ))),
        }
    }
}

impl fmt::Display for NullConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NullConvention::Ml => "ml",
            NullConvention::Plugin => "plugin",
        })
    }
}

/// Run-level constants shared by every subset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConstants {
    pub loglik_null: f64,
    pub loglik_sat: f64,
    /// `2 (l(y,y) - l(0))`
    pub null_deviance: f64,
    /// `1 - l(y,y) / l(0)`; absent when `l(0) = 0`.
    pub zeta: Option<f64>,
    /// `1 / (l(y,y) - l(0))`
    pub c: f64,
}

impl RunConstants {
    pub fn new(loglik_null: f64, loglik_sat: f64) -> Result<RunConstants> {
        let gap = loglik_sat - loglik_null;
        if !gap.is_finite() || gap <= 1e-10 * (1.0 + loglik_sat.abs()) {
            return Err(Error::DegenerateRun(format!(
                "null deviance {} is not positive (constant response?)",
                2.0 * gap
            )));
        }
        Ok(RunConstants {
            loglik_null,
            loglik_sat,
            null_deviance: 2.0 * gap,
            zeta: (loglik_null != 0.0).then(|| 1.0 - loglik_sat / loglik_null),
            c: 1.0 / gap,
        })
    }

    /// `-l(0) / (l(y,y) - l(0))`, the factor taking McFadden values to KL values.
    pub fn zeta_a(&self) -> f64 {
        -self.loglik_null * self.c
    }
}

/// Value of `measure` for a subset with statistics `stats`.
pub fn evaluate(measure: FitMeasure, stats: SubsetStats, consts: &RunConstants) -> Result<f64> {
    let shifted = stats.loglik - consts.loglik_null;
    Ok(match measure {
        FitMeasure::KlR2 => shifted * consts.c,
        FitMeasure::McfaddenR2 => {
            if consts.loglik_null == 0.0 {
                return Err(Error::UndefinedZeta);
            }
            1.0 - stats.loglik / consts.loglik_null
        }
        FitMeasure::Loglik => stats.loglik,
        FitMeasure::ShiftedLoglik => shifted,
    })
}

pub fn zeta(consts: &RunConstants) -> Result<f64> {
    consts.zeta.ok_or(Error::UndefinedZeta)
}

/// Likelihood-ratio statistic of the full model against the null, `2 (l(P) - l(0))`.
pub fn lr_statistic(stats_full: SubsetStats, consts: &RunConstants) -> f64 {
    2.0 * (stats_full.loglik - consts.loglik_null)
}

/// The null model of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullModel {
    pub convention: NullConvention,
    /// Distribution parameter shared by every observation.
    pub mu: f64,
    pub loglik: f64,
    pub deviance: f64,
}

/// Evaluates the null model under `mode`.
pub fn null_fit_convention(
    ds: &Dataset,
    family: Family,
    mode: NullConvention,
    ctl: &FitControl,
) -> Result<NullModel> {
    let sat = glm::saturated_loglik(ds, family);
    match mode {
        NullConvention::Ml => {
            let f = glm::fit(ds, family, SubsetKey::EMPTY, ctl)?;
            Ok(NullModel {
                convention: mode,
                mu: f.mu[0],
                loglik: f.loglik,
                deviance: f.deviance,
            })
        }
        NullConvention::Plugin => {
            if family != Family::ZtPoisson {
                return Err(Error::Unsupported(format!(
                    "plugin null convention is defined for zt-poisson only, not {family}"
                )));
            }
            family.validate_response(ds.y())?;
            let rate = ds.y().iter().sum::<f64>() / ds.n() as f64;
            let loglik = glm::loglik_at(ds, family, &vec![rate; ds.n()])?;
            Ok(NullModel {
                convention: mode,
                mu: rate,
                loglik,
                deviance: 2.0 * (sat - loglik),
            })
        }
    }
}
