//! Helpers shared by the integration tests: case-study loaders and oracles
//! that do not go through the library's Shapley code.

#![allow(dead_code)]

use std::path::PathBuf;

use glmshap::data::{encode_dataset, FactorPolicy, PlayerSpec, RawTable};
use glmshap::Dataset;

pub fn data_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(file)
}

fn load(file: &str, response: &str, players: &[&str]) -> Option<Dataset> {
    let path = data_path(file);
    if !path.exists() {
        return None;
    }
    let raw = RawTable::from_path(&path, b',').expect("readable csv");
    let specs: Vec<PlayerSpec> = players.iter().map(|p| PlayerSpec::single(*p)).collect();
    Some(encode_dataset(&raw, response, &specs, &FactorPolicy::default()).expect("encodable data"))
}

pub const DOCTOR_PLAYERS: [&str; 9] = [
    "age", "gender", "health", "illness", "income", "lchronic", "nchronic", "private", "reduced",
];

pub const NMES_PLAYERS: [&str; 10] = [
    "adl",
    "afam",
    "age",
    "chronic",
    "employed",
    "gender",
    "health",
    "income",
    "insurance",
    "married",
];

pub const AUTOCLAIM_PLAYERS: [&str; 13] = [
    "age",
    "area",
    "cartype",
    "educ",
    "gender",
    "income",
    "jobclass",
    "married",
    "red",
    "revoked",
    "singlep",
    "usage",
    "violation",
];

pub fn doctor_visits() -> Option<Dataset> {
    load("doctorvisits.csv", "visits", &DOCTOR_PLAYERS)
}

pub fn nmes1988() -> Option<Dataset> {
    load("nmes1988.csv", "visits", &NMES_PLAYERS)
}

pub fn autoclaim() -> Option<Dataset> {
    load("autoclaim.csv", "cfreq5", &AUTOCLAIM_PLAYERS)
}

/// Neumaier compensated sum.
#[derive(Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Shapley values by averaging marginal contributions over every ordering
/// (lexicographic enumeration), with `v` indexed by player bitmask.
pub fn shapley_by_orderings(v: &[f64], p: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..p).collect();
    let mut phi = vec![Compensated::default(); p];
    let mut count = 0usize;
    loop {
        let mut s = 0usize;
        for &i in &order {
            phi[i].add(v[s | (1 << i)] - v[s]);
            s |= 1 << i;
        }
        count += 1;
        if !next_permutation(&mut order) {
            break;
        }
    }
    phi.iter().map(|x| x.value() / count as f64).collect()
}

fn next_permutation(a: &mut [usize]) -> bool {
    let Some(i) = (1..a.len()).rev().find(|&i| a[i - 1] < a[i]) else {
        return false;
    };
    let j = (i..a.len()).rev().find(|&j| a[j] > a[i - 1]).unwrap();
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

/// Shapley values via `sum_S |S|! (p-|S|-1)! / p! * (v(S+i) - v(S))`, with
/// factorials in floating point.
pub fn shapley_by_factorials(v: &[f64], p: usize) -> Vec<f64> {
    let fact = |k: usize| (1..=k).map(|x| x as f64).product::<f64>();
    (0..p)
        .map(|i| {
            (0..1usize << p)
                .filter(|s| s & (1 << i) == 0)
                .map(|s| {
                    let k = s.count_ones() as usize;
                    fact(k) * fact(p - k - 1) / fact(p) * (v[s | (1 << i)] - v[s])
                })
                .sum()
        })
        .collect()
}
