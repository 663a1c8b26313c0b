//! Subset enumeration: fits every regressor subset (or the subsets reached by
//! sampled orderings), caches `(loglik, deviance)` per subset and derives
//! Shapley values for each requested measure.

use std::collections::BTreeSet;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SubsetKey, MAX_EXACT_PLAYERS};
use crate::error::{Error, Result};
use crate::family::Family;
use crate::glm::{self, FitControl};
use crate::measures::{self, FitMeasure, NullConvention, NullModel, RunConstants, SubsetStats};
use crate::shapley::{self, importance_measures, KahanSum, ShapleyResult};

/// Above this many players an exact run still works but logs a warning.
pub const EXACT_WARN_PLAYERS: usize = 15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub measures: Vec<FitMeasure>,
    pub null: NullConvention,
    pub control: FitControl,
    /// Worker threads for subset fits; `None` uses the available parallelism.
    pub workers: Option<usize>,
    /// Substitute the best iterate of a failed fit instead of aborting.
    pub permissive: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            measures: vec![FitMeasure::KlR2],
            null: NullConvention::Ml,
            control: FitControl::default(),
            workers: None,
            permissive: false,
        }
    }
}

/// Monte Carlo settings for permutation sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingOptions {
    pub samples: usize,
    pub seed: u64,
    /// When `p! <= samples`, average over every ordering once instead of sampling.
    pub exhaustive_when_covered: bool,
}

/// Per-subset statistics, sorted by key. Dense (all `2^p` keys) after an exact run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetFitCache {
    pub p: usize,
    keys: Vec<SubsetKey>,
    stats: Vec<SubsetStats>,
}

impl SubsetFitCache {
    fn from_pairs(p: usize, mut pairs: Vec<(SubsetKey, SubsetStats)>) -> SubsetFitCache {
        pairs.sort_by_key(|(k, _)| *k);
        pairs.dedup_by_key(|(k, _)| *k);
        let (keys, stats) = pairs.into_iter().unzip();
        SubsetFitCache { p, keys, stats }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.p <= 30 && self.keys.len() == 1 << self.p
    }

    pub fn get(&self, key: SubsetKey) -> Option<SubsetStats> {
        if self.is_complete() {
            return self.stats.get(key.index()).copied();
        }
        self.keys.binary_search(&key).ok().map(|i| self.stats[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (SubsetKey, SubsetStats)> + '_ {
        self.keys.iter().copied().zip(self.stats.iter().copied())
    }

    /// Values of `measure` for all subsets in key order (complete caches only).
    pub fn values(&self, measure: FitMeasure, consts: &RunConstants) -> Result<Vec<f64>> {
        if !self.is_complete() {
            return Err(Error::Argument("cache does not cover every subset".into()));
        }
        self.stats
            .iter()
            .map(|&s| measures::evaluate(measure, s, consts))
            .collect()
    }
}

/// Result of one analysis over one dataset and family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub family: Family,
    pub n: usize,
    pub players: Vec<String>,
    pub null_model: NullModel,
    pub constants: RunConstants,
    pub full: SubsetStats,
    pub results: Vec<ShapleyResult>,
    pub cache: SubsetFitCache,
    pub warnings: Vec<String>,
}

impl Analysis {
    pub fn result(&self, measure: FitMeasure) -> Option<&ShapleyResult> {
        self.results.iter().find(|r| r.measure == measure)
    }

    pub fn lr_statistic(&self) -> f64 {
        measures::lr_statistic(self.full, &self.constants)
    }
}

/// Keys ordered by increasing size, then numerically.
pub fn enumeration_order(p: usize) -> Vec<SubsetKey> {
    let mut keys: Vec<SubsetKey> = (0..1u64 << p).map(SubsetKey).collect();
    keys.sort_by_key(|k| (k.len(), k.0));
    keys
}

struct Setup {
    null_model: NullModel,
    constants: RunConstants,
    sat: f64,
}

fn setup(ds: &Dataset, family: Family, opts: &AnalysisOptions) -> Result<Setup> {
    family.validate_response(ds.y())?;
    opts.control.validate()?;
    if opts.measures.is_empty() {
        return Err(Error::Argument("no measures requested".into()));
    }
    let null_model = measures::null_fit_convention(ds, family, opts.null, &opts.control)?;
    let sat = glm::saturated_loglik(ds, family);
    let constants = RunConstants::new(null_model.loglik, sat)?;
    Ok(Setup {
        null_model,
        constants,
        sat,
    })
}

fn with_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

type KeyedStats = (SubsetKey, SubsetStats);

/// Fits the given subsets in parallel. Output order follows `keys`.
fn fit_subsets(
    ds: &Dataset,
    family: Family,
    keys: &[SubsetKey],
    setup: &Setup,
    opts: &AnalysisOptions,
) -> Result<(Vec<KeyedStats>, Vec<String>)> {
    let outcomes: Vec<Result<SubsetStats>> = with_pool(opts.workers, || {
        keys.par_iter()
            .map(|&key| {
                if key.is_empty() {
                    // The null model defines the empty coalition under either convention.
                    return Ok(SubsetStats {
                        loglik: setup.null_model.loglik,
                        deviance: setup.null_model.deviance,
                    });
                }
                glm::fit(ds, family, key, &opts.control).map(|f| SubsetStats {
                    loglik: f.loglik,
                    deviance: f.deviance,
                })
            })
            .collect()
    })?;
    let mut pairs = Vec::with_capacity(keys.len());
    let mut warnings = Vec::new();
    for (&key, outcome) in keys.iter().zip(outcomes) {
        match outcome {
            Ok(s) => pairs.push((key, s)),
            Err(Error::NonConvergence {
                best_loglik,
                ref reason,
                ..
            }) if opts.permissive && best_loglik.is_finite() => {
                let msg = format!(
                    "subset {key} ({}) did not converge ({reason}); using best iterate",
                    ds.describe(key)
                );
                warn!("{msg}");
                warnings.push(msg);
                pairs.push((
                    key,
                    SubsetStats {
                        loglik: best_loglik,
                        deviance: 2.0 * (setup.sat - best_loglik),
                    },
                ));
            }
            Err(e) => {
                return Err(Error::SubsetFit {
                    key,
                    players: ds.describe(key),
                    source: Box::new(e),
                })
            }
        }
    }
    Ok((pairs, warnings))
}

/// Fits all `2^p` subsets and computes exact Shapley values for every requested measure.
pub fn analyze(ds: &Dataset, family: Family, opts: &AnalysisOptions) -> Result<Analysis> {
    let p = ds.p();
    if p > MAX_EXACT_PLAYERS {
        return Err(Error::TooManyPlayers {
            method: "exact enumeration (use sampling)",
            p,
            limit: MAX_EXACT_PLAYERS,
        });
    }
    let mut warnings = Vec::new();
    if p > EXACT_WARN_PLAYERS {
        let msg = format!(
            "exact enumeration over {p} players requires {} fits",
            1u64 << p
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    let setup = setup(ds, family, opts)?;
    let keys = enumeration_order(p);
    let (pairs, fit_warnings) = fit_subsets(ds, family, &keys, &setup, opts)?;
    warnings.extend(fit_warnings);
    let cache = SubsetFitCache::from_pairs(p, pairs);
    let results = opts
        .measures
        .iter()
        .map(|&m| exact_result(&cache, m, &setup.constants, ds.player_names(), family))
        .collect::<Result<Vec<_>>>()?;
    let full = cache.get(ds.full_key()).expect("complete cache");
    Ok(Analysis {
        family,
        n: ds.n(),
        players: ds.player_names(),
        null_model: setup.null_model,
        constants: setup.constants,
        full,
        results,
        cache,
        warnings,
    })
}

/// Exact Shapley values of one measure from a complete cache.
pub fn exact_result(
    cache: &SubsetFitCache,
    measure: FitMeasure,
    consts: &RunConstants,
    players: Vec<String>,
    family: Family,
) -> Result<ShapleyResult> {
    let values = cache.values(measure, consts)?;
    let phi = shapley::shapley_from_values(&values, cache.p)?;
    let res = ShapleyResult::new(measure, players, phi, values[values.len() - 1], values[0]);
    Ok(importance_measures(res, family))
}

/// Exact Shapley values for a single measure.
pub fn shapley_exact(
    ds: &Dataset,
    family: Family,
    measure: FitMeasure,
    ctl: &FitControl,
) -> Result<(ShapleyResult, SubsetFitCache)> {
    let opts = AnalysisOptions {
        measures: vec![measure],
        control: *ctl,
        ..AnalysisOptions::default()
    };
    let mut a = analyze(ds, family, &opts)?;
    Ok((a.results.remove(0), a.cache))
}

/// Averages marginal contributions over all orderings, reading values from a complete cache.
pub fn shapley_permutation_oracle(
    cache: &SubsetFitCache,
    measure: FitMeasure,
    consts: &RunConstants,
) -> Result<Vec<f64>> {
    if cache.p > shapley::MAX_PERMUTATION_PLAYERS {
        return Err(Error::TooManyPlayers {
            method: "all-orderings average",
            p: cache.p,
            limit: shapley::MAX_PERMUTATION_PLAYERS,
        });
    }
    let values = cache.values(measure, consts)?;
    shapley::shapley_permutation_oracle(&values, cache.p)
}

fn all_orderings(p: usize) -> Vec<Vec<usize>> {
    if p == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in all_orderings(p - 1) {
        for pos in 0..=rest.len() {
            let mut o = rest.clone();
            o.insert(pos, p - 1);
            out.push(o);
        }
    }
    out
}

/// Monte Carlo permutation estimate of the Shapley values.
///
/// Orderings are drawn from a ChaCha stream seeded with `sampling.seed`; the
/// subsets they visit are fitted in parallel and the contributions are then
/// accumulated serially in draw order, so the output is bit-reproducible.
pub fn shapley_sampled(
    ds: &Dataset,
    family: Family,
    opts: &AnalysisOptions,
    sampling: &SamplingOptions,
) -> Result<Analysis> {
    if sampling.samples < 1 {
        return Err(Error::Argument("at least one sample is required".into()));
    }
    let p = ds.p();
    let setup = setup(ds, family, opts)?;

    let exhaustive = sampling.exhaustive_when_covered
        && p <= 12
        && (1..=p as u64).product::<u64>() <= sampling.samples as u64;
    let orderings: Vec<Vec<usize>> = if exhaustive {
        all_orderings(p)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
        (0..sampling.samples)
            .map(|_| {
                let mut o: Vec<usize> = (0..p).collect();
                o.shuffle(&mut rng);
                o
            })
            .collect()
    };

    let mut needed = BTreeSet::new();
    for o in &orderings {
        let mut s = SubsetKey::EMPTY;
        needed.insert(s);
        for &i in o {
            s = s.with(i);
            needed.insert(s);
        }
    }
    let keys: Vec<SubsetKey> = needed.into_iter().collect();
    let (pairs, warnings) = fit_subsets(ds, family, &keys, &setup, opts)?;
    let cache = SubsetFitCache::from_pairs(p, pairs);
    let full = cache
        .get(ds.full_key())
        .expect("full subset is always visited");

    let mut results = Vec::with_capacity(opts.measures.len());
    for &measure in &opts.measures {
        let value = |k: SubsetKey| -> Result<f64> {
            measures::evaluate(
                measure,
                cache.get(k).expect("visited subset"),
                &setup.constants,
            )
        };
        let m = orderings.len() as f64;
        let mut sum = vec![KahanSum::default(); p];
        let mut sum_sq = vec![KahanSum::default(); p];
        for o in &orderings {
            let mut s = SubsetKey::EMPTY;
            let mut prev = value(s)?;
            for &i in o {
                s = s.with(i);
                let cur = value(s)?;
                let d = cur - prev;
                sum[i].add(d);
                sum_sq[i].add(d * d);
                prev = cur;
            }
        }
        let phi: Vec<f64> = sum.iter().map(|s| s.value() / m).collect();
        let stderr = if exhaustive {
            Some(vec![0.0; p])
        } else if orderings.len() >= 2 {
            Some(
                (0..p)
                    .map(|i| {
                        let var = (sum_sq[i].value() - m * phi[i] * phi[i]).max(0.0) / (m - 1.0);
                        (var / m).sqrt()
                    })
                    .collect(),
            )
        } else {
            None
        };
        let mut res = ShapleyResult::new(
            measure,
            ds.player_names(),
            phi,
            value(ds.full_key())?,
            value(SubsetKey::EMPTY)?,
        );
        res.mc_stderr = stderr;
        results.push(importance_measures(res, family));
    }

    Ok(Analysis {
        family,
        n: ds.n(),
        players: ds.player_names(),
        null_model: setup.null_model,
        constants: setup.constants,
        full,
        results,
        cache,
        warnings,
    })
}
