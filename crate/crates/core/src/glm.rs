//! Maximum-likelihood fitting of the supported GLMs on a column subset.
//!
//! Fits use safeguarded Newton iterations on the log-likelihood in `beta`.
//! For the canonical links this is Fisher scoring; for the geometric family
//! (log link, non-canonical) the observed information is used, which is
//! positive for every observation so the log-likelihood stays concave.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SubsetKey};
use crate::error::{Error, Result};
use crate::family::Family;
use crate::linalg;

/// Linear predictors beyond this magnitude mean fitted probabilities (or
/// rates) are numerically 0 or 1, which only happens under separation.
const ETA_SEPARATION_LIMIT: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitControl {
    pub max_iter: usize,
    /// Relative log-likelihood change, `|dl| / (|l| + 0.1)`, that ends iteration.
    pub tol: f64,
    /// Maximum number of step halvings per iteration.
    pub step_halving: usize,
}

impl Default for FitControl {
    fn default() -> Self {
        FitControl {
            max_iter: 100,
            tol: 1e-10,
            step_halving: 10,
        }
    }
}

impl FitControl {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::Argument("max_iter must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Argument("tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedGlm {
    pub family: Family,
    pub subset: SubsetKey,
    /// Intercept first, then the selected design columns in order.
    pub beta: Vec<f64>,
    pub eta: Vec<f64>,
    pub mu: Vec<f64>,
    pub loglik: f64,
    pub deviance: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Log-likelihood of a fixed design/response pair as a function of `beta`.
#[derive(Clone, Debug)]
pub struct GlmProblem {
    family: Family,
    x: DMatrix<f64>,
    y: Vec<f64>,
    scale: f64,
    column_names: Vec<String>,
}

/// Value, gradient and negative Hessian of the log-likelihood.
struct Local {
    loglik: f64,
    score: DVector<f64>,
    information: DMatrix<f64>,
}

impl GlmProblem {
    /// Problem for the players in `key`; checks the response domain and the
    /// rank of the model matrix.
    pub fn for_subset(ds: &Dataset, family: Family, key: SubsetKey) -> Result<GlmProblem> {
        family.validate_response(ds.y())?;
        let x = ds.model_matrix(key);
        let names = ds.model_column_names(key);
        let aliased = linalg::aliased_columns(&x);
        if !aliased.is_empty() {
            return Err(Error::Singular {
                aliased: aliased.into_iter().map(|c| names[c].clone()).collect(),
            });
        }
        Ok(GlmProblem {
            family,
            x,
            y: ds.y().to_vec(),
            scale: family.scale_for(ds.y()),
            column_names: names,
        })
    }

    /// Problem over an explicit model matrix (intercept column included by the caller).
    pub fn from_parts(
        family: Family,
        x: DMatrix<f64>,
        y: Vec<f64>,
        scale: f64,
    ) -> Result<GlmProblem> {
        if x.nrows() != y.len() {
            return Err(Error::Argument("row count mismatch".into()));
        }
        family.validate_response(&y)?;
        let column_names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        Ok(GlmProblem {
            family,
            x,
            y,
            scale,
            column_names,
        })
    }

    pub fn n_params(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn linear_predictor(&self, beta: &[f64]) -> DVector<f64> {
        &self.x * DVector::from_column_slice(beta)
    }

    pub fn loglik(&self, beta: &[f64]) -> f64 {
        let eta = self.linear_predictor(beta);
        self.y
            .iter()
            .zip(eta.iter())
            .map(|(&y, &e)| self.family.loglik_eta(y, e, self.scale).0)
            .sum()
    }

    /// Gradient of the log-likelihood with respect to `beta`.
    pub fn score(&self, beta: &[f64]) -> Vec<f64> {
        self.local(&DVector::from_column_slice(beta))
            .score
            .as_slice()
            .to_vec()
    }

    fn local(&self, beta: &DVector<f64>) -> Local {
        let eta = &self.x * beta;
        let n = self.y.len();
        let mut loglik = 0.0;
        let mut s = DVector::zeros(n);
        let mut xw = self.x.clone();
        for i in 0..n {
            let (l, si, wi) = self.family.loglik_eta(self.y[i], eta[i], self.scale);
            loglik += l;
            s[i] = si;
            xw.row_mut(i).scale_mut(wi);
        }
        Local {
            loglik,
            score: self.x.tr_mul(&s),
            information: self.x.tr_mul(&xw),
        }
    }

    /// Maximizes the log-likelihood starting from `start`.
    pub fn maximize(&self, start: &[f64], ctl: &FitControl) -> Result<(Vec<f64>, usize, bool)> {
        ctl.validate()?;
        let mut beta = DVector::from_column_slice(start);
        let mut current = self.local(&beta);
        if !current.loglik.is_finite() {
            return Err(Error::NonConvergence {
                reason: "log-likelihood is not finite at the starting values".into(),
                iterations: 0,
                best_beta: start.to_vec(),
                best_loglik: current.loglik,
                trace: vec![current.loglik],
            });
        }
        let mut trace = vec![current.loglik];
        let fail =
            |reason: &str, iterations: usize, beta: &DVector<f64>, ll: f64, trace: &[f64]| {
                Error::NonConvergence {
                    reason: reason.to_string(),
                    iterations,
                    best_beta: beta.as_slice().to_vec(),
                    best_loglik: ll,
                    trace: trace.to_vec(),
                }
            };
        for iter in 1..=ctl.max_iter {
            let Some(chol) = current.information.clone().cholesky() else {
                return Err(fail(
                    "information matrix is not positive definite",
                    iter,
                    &beta,
                    current.loglik,
                    &trace,
                ));
            };
            let step = chol.solve(&current.score);
            let slack = 1e-12 * (current.loglik.abs() + 1.0);
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..=ctl.step_halving {
                let candidate = &beta + &step * t;
                let ll = self.loglik(candidate.as_slice());
                if ll.is_finite() && ll >= current.loglik - slack {
                    accepted = Some(candidate);
                    break;
                }
                t *= 0.5;
            }
            let Some(next) = accepted else {
                // No ascent along the Newton direction: either we are already at
                // the optimum up to rounding, or the problem is ill-posed.
                let g = current.score.amax();
                if g <= 1e-6 * self.y.len() as f64 {
                    return Ok((beta.as_slice().to_vec(), iter, true));
                }
                return Err(fail(
                    "step halving exhausted",
                    iter,
                    &beta,
                    current.loglik,
                    &trace,
                ));
            };
            let next_local = self.local(&next);
            let change =
                (next_local.loglik - current.loglik).abs() / (next_local.loglik.abs() + 0.1);
            beta = next;
            current = next_local;
            trace.push(current.loglik);
            if change < ctl.tol {
                return Ok((beta.as_slice().to_vec(), iter, true));
            }
        }
        Err(fail(
            "iteration limit reached",
            ctl.max_iter,
            &beta,
            current.loglik,
            &trace,
        ))
    }
}

/// Maximum-likelihood intercept of the intercept-only model.
pub fn null_intercept(family: Family, y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    match family {
        Family::ZtPoisson => {
            // Solve mu + mu / (e^mu - 1) = mean for eta = log mu; mean >= 1.
            if mean <= 1.0 {
                return -ETA_SEPARATION_LIMIT;
            }
            let mut eta = (mean - 1.0).max(1e-3).ln().max(mean.ln() - 1.0);
            for _ in 0..100 {
                let (_, s, w) = family.loglik_eta(mean, eta, 1.0);
                let delta = s / w;
                eta += delta;
                if delta.abs() < 1e-14 {
                    break;
                }
            }
            eta
        }
        _ => family.link(mean),
    }
}

/// Fits the model with the players in `key` by maximum likelihood.
pub fn fit(ds: &Dataset, family: Family, key: SubsetKey, ctl: &FitControl) -> Result<FittedGlm> {
    let problem = GlmProblem::for_subset(ds, family, key)?;
    fit_problem(&problem, key, ctl)
}

pub(crate) fn fit_problem(
    problem: &GlmProblem,
    key: SubsetKey,
    ctl: &FitControl,
) -> Result<FittedGlm> {
    let family = problem.family;
    let mut start = vec![0.0; problem.n_params()];
    start[0] = null_intercept(family, &problem.y);
    let (beta, iterations, converged) = problem.maximize(&start, ctl)?;
    let eta = problem.linear_predictor(&beta);
    let separated = match family {
        Family::Gaussian => false,
        Family::Logit => eta.iter().any(|e| e.abs() > ETA_SEPARATION_LIMIT),
        _ => eta.iter().any(|&e| e < -ETA_SEPARATION_LIMIT),
    };
    if separated {
        return Err(Error::NonConvergence {
            reason: "fitted values numerically on the boundary (separation)".into(),
            iterations,
            best_beta: beta.clone(),
            best_loglik: problem.loglik(&beta),
            trace: vec![],
        });
    }
    let mu: Vec<f64> = eta.iter().map(|&e| family.mu(e)).collect();
    let loglik = problem.loglik(&beta);
    let saturated = saturated_loglik_of(family, &problem.y, problem.scale);
    Ok(FittedGlm {
        family,
        subset: key,
        beta,
        eta: eta.as_slice().to_vec(),
        mu,
        loglik,
        deviance: 2.0 * (saturated - loglik),
        iterations,
        converged,
    })
}

/// `l(y, y)`: the log-likelihood with every parameter set to its observation.
///
/// For Bernoulli responses this is exactly 0. For the zero-truncated Poisson
/// the density is evaluated at rate `y`, matching the closed-form deviance
/// used for that model.
pub fn saturated_loglik(ds: &Dataset, family: Family) -> f64 {
    saturated_loglik_of(family, ds.y(), family.scale_for(ds.y()))
}

pub(crate) fn saturated_loglik_of(family: Family, y: &[f64], scale: f64) -> f64 {
    y.iter().map(|&v| family.saturated_term(v, scale)).sum()
}

/// Log-likelihood `l(y, mu)` for an arbitrary parameter vector.
pub fn loglik_at(ds: &Dataset, family: Family, mu: &[f64]) -> Result<f64> {
    if mu.len() != ds.n() {
        return Err(Error::Argument(format!(
            "{} means for {} observations",
            mu.len(),
            ds.n()
        )));
    }
    let scale = family.scale_for(ds.y());
    Ok(ds
        .y()
        .iter()
        .zip(mu)
        .map(|(&y, &m)| family.log_density(y, m, scale))
        .sum())
}

/// Deviance `K(y, mu) = 2 (l(y, y) - l(y, mu))`.
pub fn kl_divergence(ds: &Dataset, family: Family, mu: &[f64]) -> Result<f64> {
    family.validate_response(ds.y())?;
    if mu.len() != ds.n() {
        return Err(Error::Argument(format!(
            "{} means for {} observations",
            mu.len(),
            ds.n()
        )));
    }
    let scale = family.scale_for(ds.y());
    // Boundary means are fine only where they reproduce the observation.
    if let Some(i) = (0..ds.n()).find(|&i| !family.log_density(ds.y()[i], mu[i], scale).is_finite())
    {
        return Err(Error::InfiniteDivergence(format!(
            "mean {} at row {} is on or outside the {} domain boundary",
            mu[i],
            i + 1,
            family
        )));
    }
    let k = 2.0 * (saturated_loglik(ds, family) - loglik_at(ds, family, mu)?);
    if !k.is_finite() {
        return Err(Error::InfiniteDivergence(
            "log-likelihood is not finite".into(),
        ));
    }
    Ok(k)
}

/// `f(j; mu)` for the count families; 0 outside the support (and for the Gaussian family).
pub fn predict_prob(family: Family, mu: f64, j: u64) -> f64 {
    family.prob(mu, j).unwrap_or(0.0)
}
