//! Exponential-family response distributions and their links.
//!
//! Every family is parameterized by `mu`, the parameter of its density
//! (for the zero-truncated Poisson this is the untruncated rate, not the
//! mean of the truncated distribution), with `eta = link(mu)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Normal, identity link. Uses a fixed, data-derived variance (see [`Family::scale_for`]).
    Gaussian,
    /// Bernoulli, logit link.
    Logit,
    /// Poisson, log link.
    Poisson,
    /// Zero-truncated Poisson, log link on the untruncated rate.
    ZtPoisson,
    /// Geometric (negative binomial with shape 1), log link.
    Geometric,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Gaussian,
        Family::Logit,
        Family::Poisson,
        Family::ZtPoisson,
        Family::Geometric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Logit => "logit",
            Family::Poisson => "poisson",
            Family::ZtPoisson => "zt-poisson",
            Family::Geometric => "geometric",
        }
    }

    /// True when the link is the canonical one, so that the score equations
    /// read `X'(y - mu) = 0`.
    pub fn is_canonical_mean_link(self) -> bool {
        matches!(self, Family::Gaussian | Family::Logit | Family::Poisson)
    }

    pub fn is_binary(self) -> bool {
        self == Family::Logit
    }

    pub fn is_discrete(self) -> bool {
        self != Family::Gaussian
    }

    /// Dispersion used in the log-density. For the Gaussian family this is
    /// the profiled variance of the intercept-only model, `TSS / n`, held
    /// fixed across all subsets so that the deviance is `RSS / scale` and the
    /// Kullback-Leibler R-squared equals `1 - RSS/TSS`.
    pub fn scale_for(self, y: &[f64]) -> f64 {
        match self {
            Family::Gaussian => {
                let n = y.len() as f64;
                let mean = y.iter().sum::<f64>() / n;
                let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
                if tss > 0.0 {
                    tss / n
                } else {
                    1.0
                }
            }
            _ => 1.0,
        }
    }

    pub fn validate_response(self, y: &[f64]) -> Result<()> {
        let bad = |message: String| Error::InvalidResponse {
            family: self.name().into(),
            message,
        };
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(bad(format!("non-finite value at row {}", i + 1)));
            }
            let integer = v.fract() == 0.0;
            let ok = match self {
                Family::Gaussian => true,
                Family::Logit => v == 0.0 || v == 1.0,
                Family::Poisson | Family::Geometric => integer && v >= 0.0,
                Family::ZtPoisson => integer && v >= 1.0,
            };
            if !ok {
                let need = match self {
                    Family::Gaussian => unreachable!(),
                    Family::Logit => "0 or 1",
                    Family::Poisson | Family::Geometric => "a nonnegative integer",
                    Family::ZtPoisson => "a positive integer",
                };
                return Err(bad(format!("row {}: value {v} is not {need}", i + 1)));
            }
        }
        Ok(())
    }

    /// Inverse link.
    pub fn mu(self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => eta,
            Family::Logit => sigmoid(eta),
            Family::Poisson | Family::ZtPoisson | Family::Geometric => eta.exp(),
        }
    }

    pub fn link(self, mu: f64) -> f64 {
        match self {
            Family::Gaussian => mu,
            Family::Logit => (mu / (1.0 - mu)).ln(),
            Family::Poisson | Family::ZtPoisson | Family::Geometric => mu.ln(),
        }
    }

    /// Expected response given the distribution parameter.
    pub fn mean(self, mu: f64) -> f64 {
        match self {
            Family::ZtPoisson => mu + mu / mu.exp_m1(),
            _ => mu,
        }
    }

    /// True when `mu` lies strictly inside the parameter domain.
    pub fn in_domain(self, mu: f64) -> bool {
        match self {
            Family::Gaussian => mu.is_finite(),
            Family::Logit => mu > 0.0 && mu < 1.0,
            _ => mu > 0.0 && mu.is_finite(),
        }
    }

    /// `log f(y; mu)` with `0 log 0 = 0`.
    pub fn log_density(self, y: f64, mu: f64, scale: f64) -> f64 {
        match self {
            Family::Gaussian => {
                -0.5 * (2.0 * std::f64::consts::PI * scale).ln() - (y - mu).powi(2) / (2.0 * scale)
            }
            Family::Logit => xlogy(y, mu) + xlogy(1.0 - y, 1.0 - mu),
            Family::Poisson => xlogy(y, mu) - mu - ln_fact(y),
            Family::ZtPoisson => xlogy(y, mu) - log_expm1(mu) - ln_fact(y),
            Family::Geometric => xlogy(y, mu) - (y + 1.0) * mu.ln_1p(),
        }
    }

    /// Log-density together with its first derivative and the negative of its
    /// second derivative with respect to `eta`.
    pub fn loglik_eta(self, y: f64, eta: f64, scale: f64) -> (f64, f64, f64) {
        match self {
            Family::Gaussian => {
                let r = y - eta;
                (
                    -0.5 * (2.0 * std::f64::consts::PI * scale).ln() - r * r / (2.0 * scale),
                    r / scale,
                    1.0 / scale,
                )
            }
            Family::Logit => {
                let p = sigmoid(eta);
                (y * eta - softplus(eta), y - p, p * (1.0 - p))
            }
            Family::Poisson => {
                let mu = eta.exp();
                (y * eta - mu - ln_fact(y), y - mu, mu)
            }
            Family::ZtPoisson => {
                let mu = eta.exp();
                // q = mu / (e^mu - 1); the truncated mean is mu + q
                let q = if mu > 0.0 { mu / mu.exp_m1() } else { 1.0 };
                let m = mu + q;
                (y * eta - log_expm1(mu) - ln_fact(y), y - m, m * (1.0 - q))
            }
            Family::Geometric => {
                let p = sigmoid(eta);
                (
                    y * eta - (y + 1.0) * softplus(eta),
                    y - (y + 1.0) * p,
                    (y + 1.0) * p * (1.0 - p),
                )
            }
        }
    }

    /// Contribution of one observation to the saturated log-likelihood,
    /// `log f(y; mu = y)`.
    pub fn saturated_term(self, y: f64, scale: f64) -> f64 {
        match self {
            Family::Gaussian => -0.5 * (2.0 * std::f64::consts::PI * scale).ln(),
            _ => self.log_density(y, y, scale),
        }
    }

    /// Natural parameter and cumulant function at `mu`.
    fn natural(self, mu: f64, scale: f64) -> (f64, f64) {
        match self {
            Family::Gaussian => (mu / scale, mu * mu / (2.0 * scale)),
            Family::Logit => (mu.ln() - (-mu).ln_1p(), -(-mu).ln_1p()),
            Family::Poisson => (mu.ln(), mu),
            Family::ZtPoisson => (mu.ln(), log_expm1(mu)),
            Family::Geometric => (mu.ln() - mu.ln_1p(), mu.ln_1p()),
        }
    }

    /// Kullback-Leibler divergence `K(mu1, mu2) = 2 E_1[log f1/f2]` for one observation.
    pub fn kl_between(self, mu1: f64, mu2: f64, scale: f64) -> f64 {
        let (t1, b1) = self.natural(mu1, scale);
        let (t2, b2) = self.natural(mu2, scale);
        2.0 * ((t1 - t2) * self.mean(mu1) - (b1 - b2))
    }

    /// Probability of count `j` under parameter `mu`; `None` for the
    /// continuous Gaussian family. Counts outside the support get 0.
    pub fn prob(self, mu: f64, j: u64) -> Option<f64> {
        let jf = j as f64;
        let p = match self {
            Family::Gaussian => return None,
            Family::Logit => match j {
                0 => 1.0 - mu,
                1 => mu,
                _ => 0.0,
            },
            Family::Poisson => (xlogy(jf, mu) - mu - ln_factorial(j)).exp(),
            Family::ZtPoisson => {
                if j == 0 {
                    0.0
                } else {
                    (jf * mu.ln() - log_expm1(mu) - ln_factorial(j)).exp()
                }
            }
            Family::Geometric => (xlogy(jf, mu) - (jf + 1.0) * mu.ln_1p()).exp(),
        };
        Some(p)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Family> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "logit" | "binomial" | "bernoulli" => Ok(Family::Logit),
            "poisson" => Ok(Family::Poisson),
            "zt-poisson" | "ztpoisson" => Ok(Family::ZtPoisson),
            "geometric" => Ok(Family::Geometric),
            other => Err(Error::Argument(format!("unknown family `{other}`"))),
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)`
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `log(e^x - 1)` for `x > 0`.
pub(crate) fn log_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// `x log y` with `0 log y = 0`.
pub(crate) fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

fn ln_fact(y: f64) -> f64 {
    ln_factorial(y as u64)
}
