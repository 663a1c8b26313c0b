mod common;

use glmshap::engine::{analyze, shapley_sampled, AnalysisOptions, SamplingOptions};
use glmshap::glm::{self, FitControl};
use glmshap::measures::{self, evaluate};
use glmshap::synthetic::{generate, SyntheticSpec};
use glmshap::{Dataset, Family, FitMeasure, NullConvention, SubsetKey};
use nalgebra::DVector;

const ALL_MEASURES: [FitMeasure; 4] = [
    FitMeasure::KlR2,
    FitMeasure::McfaddenR2,
    FitMeasure::Loglik,
    FitMeasure::ShiftedLoglik,
];

fn dataset(family: Family, p: usize, seed: u64) -> Dataset {
    generate(&SyntheticSpec {
        family,
        p,
        seed,
        ..Default::default()
    })
    .unwrap()
}

fn all_measures() -> AnalysisOptions {
    AnalysisOptions {
        measures: ALL_MEASURES.to_vec(),
        ..Default::default()
    }
}

#[test]
fn nested_subsets_never_lose_fit() {
    for family in Family::ALL {
        for seed in 0..4 {
            let ds = dataset(family, 4, 40 + seed);
            let a = analyze(&ds, family, &AnalysisOptions::default()).unwrap();
            for (s1, st1) in a.cache.iter() {
                for (s2, st2) in a.cache.iter().filter(|(s2, _)| s1.is_subset_of(*s2)) {
                    assert!(st2.loglik >= st1.loglik - 1e-8, "{family} {s1} -> {s2}");
                    assert!(st2.deviance <= st1.deviance + 1e-8, "{family} {s1} -> {s2}");
                }
            }
        }
    }
}

#[test]
fn deviance_matches_saturated_gap() {
    let ctl = FitControl::default();
    for family in Family::ALL {
        let ds = dataset(family, 3, 9);
        let sat = glm::saturated_loglik(&ds, family);
        for key in [SubsetKey::EMPTY, SubsetKey(0b101), ds.full_key()] {
            let f = glm::fit(&ds, family, key, &ctl).unwrap();
            assert!(
                (f.deviance - 2.0 * (sat - f.loglik)).abs() <= 1e-8,
                "{family}"
            );
            let kl = glm::kl_divergence(&ds, family, &f.mu).unwrap();
            assert!(
                (kl - f.deviance).abs() <= 1e-8 * (1.0 + kl.abs()),
                "{family}"
            );
            if family != Family::ZtPoisson {
                assert!(f.deviance >= -1e-8, "{family}");
            }
            for (e, m) in f.eta.iter().zip(&f.mu) {
                assert_eq!(family.mu(*e), *m);
            }
        }
    }
}

#[test]
fn score_equations_hold_at_optimum() {
    let ctl = FitControl::default();
    // log is the canonical link of the truncated Poisson as well
    for family in [
        Family::Gaussian,
        Family::Logit,
        Family::Poisson,
        Family::ZtPoisson,
    ] {
        for seed in 0..3 {
            let ds = dataset(family, 3, 60 + seed);
            let f = glm::fit(&ds, family, ds.full_key(), &ctl).unwrap();
            let x = ds.model_matrix(ds.full_key());
            let resid = DVector::from_iterator(
                ds.n(),
                ds.y().iter().zip(&f.mu).map(|(y, m)| y - family.mean(*m)),
            );
            let score = x.transpose() * resid;
            let worst = score.amax();
            assert!(worst <= 1e-6 * ds.n() as f64, "{family}: {worst}");
        }
    }
}

#[test]
fn pythagorean_relation_for_nested_fits() {
    let ctl = FitControl::default();
    for family in [Family::Gaussian, Family::Logit, Family::Poisson] {
        let ds = dataset(family, 4, 5);
        let scale = family.scale_for(ds.y());
        let full = glm::fit(&ds, family, ds.full_key(), &ctl).unwrap();
        for key in [SubsetKey::EMPTY, SubsetKey(0b0010), SubsetKey(0b1011)] {
            let sub = glm::fit(&ds, family, key, &ctl).unwrap();
            let between: f64 = full
                .mu
                .iter()
                .zip(&sub.mu)
                .map(|(a, b)| family.kl_between(*a, *b, scale))
                .sum();
            let gap = sub.deviance - full.deviance;
            assert!(
                (between - gap).abs() <= 1e-6,
                "{family} {key}: {between} vs {gap}"
            );
        }
    }
}

#[test]
fn lr_statistic_relations() {
    let ctl = FitControl::default();
    for family in Family::ALL {
        let ds = generate(&SyntheticSpec {
            family,
            n: 50,
            p: 2,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let a = analyze(&ds, family, &all_measures()).unwrap();
        let lr = a.lr_statistic();
        let kl = a.result(FitMeasure::KlR2).unwrap().v_grand;
        assert!(
            (kl - lr / a.constants.null_deviance).abs() <= 1e-10,
            "{family}"
        );
        let shifted = a.result(FitMeasure::ShiftedLoglik).unwrap().v_grand;
        assert!((lr - 2.0 * shifted).abs() <= 1e-10 * lr.abs().max(1.0));
        let full = glm::fit(&ds, family, ds.full_key(), &ctl).unwrap();
        let null = glm::fit(&ds, family, SubsetKey::EMPTY, &ctl).unwrap();
        assert!(
            (lr - 2.0 * (full.loglik - null.loglik)).abs() <= 1e-8,
            "{family}"
        );
    }
    let consts = measures::RunConstants::new(-10.0, -2.0).unwrap();
    let same = glmshap::SubsetStats {
        loglik: -10.0,
        deviance: 16.0,
    };
    assert_eq!(measures::lr_statistic(same, &consts), 0.0);
}

#[test]
fn measure_bounds_on_every_subset() {
    for family in Family::ALL {
        for seed in 0..3 {
            let ds = dataset(family, 4, 90 + seed);
            let a = analyze(&ds, family, &all_measures()).unwrap();
            for measure in ALL_MEASURES {
                for (key, stats) in a.cache.iter() {
                    let v = evaluate(measure, stats, &a.constants).unwrap();
                    if measure.has_lower_bound() {
                        assert!(v >= -1e-8, "{family} {measure:?} {key}: {v}");
                    }
                    if measure.has_upper_bound_one(family) {
                        assert!(v <= 1.0 + 1e-8, "{family} {measure:?} {key}: {v}");
                    }
                }
            }
        }
    }
}

#[test]
fn measures_linear_in_each_subset() {
    for family in Family::ALL {
        let ds = dataset(family, 3, 17);
        let a = analyze(&ds, family, &all_measures()).unwrap();
        let k = &a.constants;
        for (_, stats) in a.cache.iter() {
            let kl = evaluate(FitMeasure::KlR2, stats, k).unwrap();
            let shifted = evaluate(FitMeasure::ShiftedLoglik, stats, k).unwrap();
            let mcf = evaluate(FitMeasure::McfaddenR2, stats, k).unwrap();
            assert!((kl - k.c * shifted).abs() <= 1e-10);
            assert!((kl - k.zeta_a() * mcf).abs() <= 1e-10);
            assert!((mcf - k.zeta.unwrap() * kl).abs() <= 1e-10);
        }
    }
}

#[test]
fn cache_is_complete_and_anchored() {
    for family in Family::ALL {
        let ds = dataset(family, 3, 2);
        let a = analyze(&ds, family, &all_measures()).unwrap();
        assert_eq!(a.cache.len(), 8);
        assert!(a.cache.is_complete());
        assert_eq!(
            a.cache.get(SubsetKey::EMPTY).unwrap().loglik,
            a.constants.loglik_null
        );
        for r in &a.results {
            let zero_normalized = r.measure.is_zero_normalized();
            assert_eq!(
                r.v_empty == 0.0,
                zero_normalized,
                "{family} {:?}",
                r.measure
            );
            assert_eq!(r.is_pseudo, !zero_normalized);
            let fm = r.imp_fm.as_ref().unwrap();
            assert!((fm.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
            assert_eq!(r.imp_bm.is_some(), r.measure.has_upper_bound_one(family));
        }
    }
}

#[test]
fn plugin_null_keeps_empty_subset_at_zero() {
    let ds = dataset(Family::ZtPoisson, 3, 8);
    let opts = AnalysisOptions {
        null: NullConvention::Plugin,
        ..all_measures()
    };
    let a = analyze(&ds, Family::ZtPoisson, &opts).unwrap();
    let rate = ds.y().iter().sum::<f64>() / ds.n() as f64;
    assert_eq!(a.null_model.mu, rate);
    for r in &a.results {
        assert!((r.phi_sum() - (r.v_grand - r.v_empty)).abs() <= 1e-10);
    }
    assert_eq!(a.result(FitMeasure::KlR2).unwrap().v_empty, 0.0);
}

#[test]
fn single_player_gets_everything() {
    for family in Family::ALL {
        let ds = dataset(family, 1, 12);
        let a = analyze(&ds, family, &all_measures()).unwrap();
        for r in &a.results {
            assert_eq!(r.phi[0], r.v_grand - r.v_empty);
        }
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let ds = dataset(Family::Geometric, 5, 31);
    let parallel = analyze(&ds, Family::Geometric, &all_measures()).unwrap();
    let serial = analyze(
        &ds,
        Family::Geometric,
        &AnalysisOptions {
            workers: Some(1),
            ..all_measures()
        },
    )
    .unwrap();
    assert_eq!(
        serde_json::to_string(&parallel).unwrap(),
        serde_json::to_string(&serial).unwrap()
    );
}

#[test]
fn exhaustive_sampling_equals_exact() {
    let ds = dataset(Family::Poisson, 4, 14);
    let exact = analyze(&ds, Family::Poisson, &AnalysisOptions::default()).unwrap();
    let sampling = SamplingOptions {
        samples: 24,
        seed: 1,
        exhaustive_when_covered: true,
    };
    let mc = shapley_sampled(&ds, Family::Poisson, &AnalysisOptions::default(), &sampling).unwrap();
    for (a, b) in exact.results[0].phi.iter().zip(&mc.results[0].phi) {
        assert!((a - b).abs() <= 1e-12);
    }
    assert_eq!(mc.results[0].mc_stderr.as_deref(), Some(&[0.0; 4][..]));
}

#[test]
fn sampled_estimates_depend_on_seed_only() {
    let ds = dataset(Family::Logit, 5, 15);
    let run = |seed| {
        let s = SamplingOptions {
            samples: 500,
            seed,
            exhaustive_when_covered: false,
        };
        shapley_sampled(&ds, Family::Logit, &AnalysisOptions::default(), &s)
            .unwrap()
            .results
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));
}

#[test]
fn subset_formula_matches_factorial_weights() {
    let ds = dataset(Family::Poisson, 5, 71);
    let a = analyze(&ds, Family::Poisson, &AnalysisOptions::default()).unwrap();
    let values = a.cache.values(FitMeasure::KlR2, &a.constants).unwrap();
    let oracle = common::shapley_by_factorials(&values, 5);
    for (x, y) in a.results[0].phi.iter().zip(&oracle) {
        assert!((x - y).abs() <= 1e-12);
    }
}
