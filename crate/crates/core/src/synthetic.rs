//! Seeded synthetic datasets for demos and tests.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Geometric, Normal, Poisson, StandardNormal};

use crate::data::{Dataset, Player};
use crate::error::{Error, Result};
use crate::family::Family;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub family: Family,
    pub n: usize,
    /// Number of single-column players `x1..xp`.
    pub p: usize,
    pub seed: u64,
    /// Slopes are drawn uniformly from `[-coef_bound, coef_bound]`.
    pub coef_bound: f64,
    pub intercept: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            family: Family::Poisson,
            n: 200,
            p: 3,
            seed: 0,
            coef_bound: 1.0,
            intercept: 0.3,
        }
    }
}

/// Standard-normal regressors, uniform slopes, response drawn from `spec.family`.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, p) = (spec.n, spec.p);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let beta: Vec<f64> = (0..p)
        .map(|_| rng.random_range(-spec.coef_bound..=spec.coef_bound))
        .collect();
    let eta: Vec<f64> = (0..n)
        .map(|i| spec.intercept + (0..p).map(|j| x[(i, j)] * beta[j]).sum::<f64>())
        .collect();
    let bad = |e: &dyn std::fmt::Display| Error::Argument(format!("synthetic draw: {e}"));
    let y: Vec<f64> = eta
        .iter()
        .map(|&e| -> Result<f64> {
            let mu = spec.family.mu(e);
            Ok(match spec.family {
                Family::Gaussian => {
                    mu + Normal::new(0.0, 1.0).map_err(|e| bad(&e))?.sample(&mut rng)
                }
                Family::Logit => f64::from(u8::from(
                    Bernoulli::new(mu).map_err(|e| bad(&e))?.sample(&mut rng),
                )),
                Family::Poisson => Poisson::new(mu).map_err(|e| bad(&e))?.sample(&mut rng),
                Family::ZtPoisson => {
                    let d = Poisson::new(mu.max(1e-3)).map_err(|e| bad(&e))?;
                    let mut v = 0.0;
                    for _ in 0..1_000_000 {
                        v = d.sample(&mut rng);
                        if v > 0.0 {
                            break;
                        }
                    }
                    v.max(1.0)
                }
                Family::Geometric => Geometric::new(1.0 / (1.0 + mu))
                    .map_err(|e| bad(&e))?
                    .sample(&mut rng) as f64,
            })
        })
        .collect::<Result<_>>()?;
    let names: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    let players = names
        .iter()
        .enumerate()
        .map(|(j, name)| Player {
            name: name.clone(),
            columns: vec![j],
        })
        .collect();
    Dataset::new("y", y, x, names, players)
}
