mod common;

use common::*;
use divsample::classifiers::{self, fit_tree, ModelKind, ModelSpec, Node};
use divsample::data::{self, apportion, Dataset, Standardizer};
use divsample::diversity::{diversity_of, DEFAULT_RIDGE};
use divsample::evaluation::{pr_auc, pr_curve, wilcoxon_signed_rank};
use divsample::resampling::{self, Method, Provenance, ResamplePlan};
use divsample::seed;
use divsample::sort::{self, AgeGroup, SortCoefficients, SortPatient};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn points(max_n: usize, max_d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_d).prop_flat_map(move |d| {
        prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), 1..=max_n)
    })
}

/// Distinct-valued two-class data: majority rows first.
fn two_class(maj: usize, min: usize, d: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let mut rows = random_points(&mut r, maj, d, 2.0);
    rows.extend(
        random_points(&mut r, min, d, 1.0)
            .into_iter()
            .map(|p| p.into_iter().map(|x| x + 1.0).collect::<Vec<_>>()),
    );
    let labels = (0..maj + min).map(|i| u8::from(i >= maj)).collect();
    Dataset::from_rows(&rows, labels).unwrap()
}

/// (minority, majority) after re-sampling, or `None` when the plan cannot
/// be met.
fn expected_counts(d: &Dataset, plan: &ResamplePlan) -> Option<(usize, usize)> {
    let (min, maj) = (d.minority_count(), d.majority_count());
    let round = |v: f64| v.round() as usize;
    match plan.method {
        Method::None => Some((min, maj)),
        Method::Ros | Method::Smote => Some((min.max(round(plan.target_balance * maj as f64)), maj)),
        Method::Rus => {
            let t = round(min as f64 / plan.target_balance);
            (t <= maj).then_some((min, t))
        }
        Method::Osus | Method::Smoteus => {
            let raw = plan.hybrid_size_ratio * d.len() as f64;
            let t = round(raw);
            (raw >= 4.0 && t >= 4 && t / 2 <= maj).then_some((t - t / 2, t / 2))
        }
    }
}

fn contains_row(d: &Dataset, row: &[f64]) -> bool {
    d.rows().any(|r| r.iter().zip(row).all(|(a, b)| a.to_bits() == b.to_bits()))
}

proptest! {
    #![proptest_config(config(1000))]

    #[test]
    fn split_covers_input_with_apportioned_counts(
        maj in 2usize..300, min in 2usize..60, frac in 0.1f64..0.9, seed in any::<u64>()
    ) {
        let labels: Vec<u8> = (0..maj + min).map(|i| u8::from(i % (maj + min) >= maj)).collect();
        let rows: Vec<Vec<f64>> = (0..maj + min).map(|i| vec![i as f64]).collect();
        let d = Dataset::from_rows(&rows, labels).unwrap();
        let s = data::stratified_split(&d, frac, seed).unwrap();
        let mut all: Vec<usize> = s.train_indices.iter().chain(&s.test_indices).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..maj + min).collect::<Vec<_>>());
        let want = apportion(&[maj, min], frac);
        prop_assert_eq!(vec![s.train.majority_count(), s.train.minority_count()], want);
    }
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn imbalance_level_is_met_within_one_row(
        maj in 100usize..1500, min in 30usize..400, level in 0.01f64..0.2, seed in any::<u64>()
    ) {
        let rows: Vec<Vec<f64>> = (0..maj + min).map(|i| vec![i as f64]).collect();
        let labels = (0..maj + min).map(|i| u8::from(i >= maj)).collect();
        let d = Dataset::from_rows(&rows, labels).unwrap();
        match data::apply_imbalance_level(&d, level, seed) {
            Ok(out) => {
                prop_assert_eq!(out.majority_count(), maj);
                prop_assert!((out.minority_fraction() - level).abs() <= 1.0 / out.len() as f64);
                prop_assert_eq!(data::apply_imbalance_level(&d, level, seed).unwrap(), out);
            }
            Err(_) => {
                let kept = data::minority_target_for_level(level, maj);
                prop_assert!(kept < data::MIN_MINORITY_AFTER_LEVEL || level >= d.minority_fraction());
            }
        }
    }

    #[test]
    fn standardized_train_has_zero_mean_unit_std(
        rows in (1usize..6).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-1e3f64..1e3, d), 4..60)),
        constant in -5.0f64..5.0,
    ) {
        let mut rows = rows;
        for r in rows.iter_mut() {
            r.push(constant);
        }
        let labels = (0..rows.len()).map(|i| u8::from(i % 2 == 0)).collect();
        let d = Dataset::from_rows(&rows, labels).unwrap();
        let s = Standardizer::fit(&d);
        let z = s.transform(&d).unwrap();
        let n = z.len() as f64;
        for j in 0..z.n_features() {
            let col: Vec<f64> = z.rows().map(|r| r[j]).collect();
            let m = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
            if s.stds[j] == 0.0 {
                prop_assert!(col.iter().all(|v| v.is_finite()));
            } else {
                prop_assert!(m.abs() <= 1e-9, "mean {m}");
                prop_assert!((sd - 1.0).abs() <= 1e-9, "std {sd}");
            }
        }
        prop_assert_eq!(s.stds[d.n_features() - 1], 0.0);
    }

    #[test]
    fn adding_a_new_point_increases_diversity(pts in points(15, 5), extra in prop::collection::vec(-3.0f64..3.0, 5)) {
        let x: Vec<f64> = extra[..pts[0].len()].to_vec();
        prop_assume!(!pts.contains(&x));
        let before = diversity_of(&pts, 1.0, DEFAULT_RIDGE).unwrap();
        let mut more = pts.clone();
        more.push(x);
        prop_assert!(diversity_of(&more, 1.0, DEFAULT_RIDGE).unwrap() > before - 1e-9);
    }

    #[test]
    fn duplicating_a_point_changes_nothing(pts in points(15, 5), pick in any::<prop::sample::Index>()) {
        let before = diversity_of(&pts, 1.0, DEFAULT_RIDGE).unwrap();
        let mut twin = pts.clone();
        twin.push(pts[pick.index(pts.len())].clone());
        prop_assert_eq!(diversity_of(&twin, 1.0, DEFAULT_RIDGE).unwrap(), before);
    }

    #[test]
    fn spreading_points_never_lowers_diversity(pts in points(15, 5), s in 1.0f64..5.0) {
        let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| v * s).collect()).collect();
        let a = diversity_of(&pts, 1.0, DEFAULT_RIDGE).unwrap();
        prop_assert!(diversity_of(&scaled, 1.0, DEFAULT_RIDGE).unwrap() >= a - 1e-9);
    }

    #[test]
    fn diversity_between_one_and_n(pts in points(15, 5)) {
        let mut uniq = pts.clone();
        uniq.sort_by(|a, b| a.partial_cmp(b).unwrap());
        uniq.dedup();
        let v = diversity_of(&pts, 1.0, 0.0).unwrap();
        prop_assert!(v >= 1.0 - 1e-9 && v <= uniq.len() as f64 + 1e-9, "{v}");
    }

    #[test]
    fn smote_stays_between_parents(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 7..20),
        k in 1usize..6,
        s in any::<u64>(),
    ) {
        let samples = resampling::smote_from_rows(&rows, 50, k, &mut seed::rng(s)).unwrap();
        prop_assert_eq!(samples.len(), 50);
        for smp in samples {
            let (a, b) = (&rows[smp.base], &rows[smp.neighbor]);
            prop_assert!((0.0..=1.0).contains(&smp.gap));
            for j in 0..3 {
                let (lo, hi) = (a[j].min(b[j]), a[j].max(b[j]));
                prop_assert!(smp.row[j] >= lo && smp.row[j] <= hi);
            }
        }
    }
}

fn method() -> impl Strategy<Value = Method> {
    prop::sample::select(Method::ALL.to_vec())
}

proptest! {
    #![proptest_config(config(500))]

    #[test]
    fn resample_meets_exact_counts(
        maj in 15usize..80, min in 6usize..25, dim in 1usize..4, data_seed in any::<u64>(),
        m in method(), diversity in any::<bool>(), balance in 0.3f64..1.0,
        ratio in 0.05f64..1.0, seed in any::<u64>(),
    ) {
        let d = two_class(maj, min, dim, data_seed);
        let plan = ResamplePlan {
            method: m,
            diversity: diversity && m != Method::None,
            target_balance: balance,
            hybrid_size_ratio: ratio,
            seed,
            ..ResamplePlan::default()
        };
        let want = expected_counts(&d, &plan);
        match resampling::resample(&d, &plan) {
            Ok(out) => {
                prop_assert_eq!(Some((out.dataset.minority_count(), out.dataset.majority_count())), want);
                prop_assert_eq!(out.provenance.len(), out.dataset.len());
                for i in 0..out.dataset.len() {
                    match (out.provenance[i], out.origin[i]) {
                        (Provenance::Synthetic, None) => {}
                        (Provenance::Synthetic, Some(_)) => prop_assert!(false, "synthetic row with origin"),
                        (_, Some(o)) => prop_assert_eq!(out.dataset.row(i), d.row(o)),
                        (_, None) => prop_assert!(false, "copied row without origin"),
                    }
                }
                if matches!(m, Method::Rus) {
                    for row in out.dataset.class_rows(0) {
                        prop_assert!(contains_row(&d, &row));
                    }
                }
                let twin = ResamplePlan { diversity: !plan.diversity, ..plan.clone() };
                if m != Method::None {
                    let other = resampling::resample(&d, &twin).unwrap();
                    prop_assert_eq!(
                        (other.dataset.minority_count(), other.dataset.majority_count()),
                        (out.dataset.minority_count(), out.dataset.majority_count())
                    );
                }
                prop_assert_eq!(resampling::resample(&d, &plan).unwrap(), out);
            }
            Err(e) => prop_assert!(want.is_none(), "unexpected error {}", e),
        }
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn classifier_scores_lie_in_unit_interval(
        kind in prop::sample::select(vec![ModelKind::Glm, ModelKind::Knn, ModelKind::Dt, ModelKind::Rf]),
        data_seed in any::<u64>(),
        queries in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 2), 1..20),
    ) {
        let d = two_class(40, 12, 2, data_seed);
        let mut spec = ModelSpec::new(kind);
        spec.rf.trees = 20;
        let model = classifiers::fit(&d, &spec).unwrap();
        let again = classifiers::fit(&d, &spec).unwrap();
        for q in &queries {
            let s = model.score_row(q);
            prop_assert!(s.is_finite() && (0.0..=1.0).contains(&s));
            prop_assert_eq!(s, again.score_row(q));
        }
    }

    #[test]
    fn tree_leaves_partition_training_rows(data_seed in any::<u64>(), depth in 1usize..8) {
        let d = two_class(50, 20, 3, data_seed);
        let mut spec = ModelSpec::new(ModelKind::Dt);
        spec.dt.max_depth = depth;
        let t = fit_tree(&d, &spec).unwrap();
        let mut hits = vec![0usize; t.nodes().len()];
        for row in d.rows() {
            hits[t.leaf_index(row)] += 1;
        }
        let mut total = 0;
        for (i, node) in t.nodes().iter().enumerate() {
            match node {
                Node::Leaf { count, .. } => {
                    prop_assert_eq!(hits[i], *count);
                    total += count;
                }
                _ => prop_assert_eq!(hits[i], 0),
            }
        }
        prop_assert_eq!(total, d.len());
    }
}

fn scored() -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
    (2usize..80).prop_flat_map(|n| {
        (
            prop::collection::vec(0u8..=1, n),
            prop::collection::vec((0u32..20).prop_map(|v| f64::from(v) / 4.0 - 2.0), n),
        )
    })
}

proptest! {
    #![proptest_config(config(300))]

    #[test]
    fn pr_auc_ignores_monotone_transforms((labels, scores) in scored(), a in 0.1f64..5.0, b in -3.0f64..3.0) {
        prop_assume!(labels.contains(&1));
        let base = pr_auc(&labels, &scores).unwrap();
        let affine: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
        let cubed: Vec<f64> = scores.iter().map(|s| s.powi(3) + s).collect();
        let squashed: Vec<f64> = scores.iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect();
        prop_assert_eq!(pr_auc(&labels, &affine).unwrap(), base);
        prop_assert_eq!(pr_auc(&labels, &cubed).unwrap(), base);
        prop_assert_eq!(pr_auc(&labels, &squashed).unwrap(), base);
    }

    #[test]
    fn pr_curve_points_are_well_formed((labels, scores) in scored()) {
        prop_assume!(labels.contains(&1));
        let c = pr_curve(&labels, &scores).unwrap();
        let mut prev = 0.0;
        for p in &c.points {
            prop_assert!(p.recall >= prev && (0.0..=1.0).contains(&p.recall));
            prop_assert!((0.0..=1.0).contains(&p.precision));
            prev = p.recall;
        }
        prop_assert_eq!(c.points.last().unwrap().recall, 1.0);
    }

    #[test]
    fn wilcoxon_p_is_sign_symmetric(
        pairs in prop::collection::vec(((0u8..6), (0u8..6)), 1..30)
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let b: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
        match (wilcoxon_signed_rank(&a, &b), wilcoxon_signed_rank(&b, &a)) {
            (Ok(x), Ok(y)) => {
                prop_assert!((x.p_value - y.p_value).abs() <= 1e-12);
                prop_assert!(x.p_value > 0.0 && x.p_value <= 1.0);
                let n = x.n_effective as f64;
                prop_assert!((x.statistic + y.statistic - n * (n + 1.0) / 2.0).abs() < 1e-9);
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "asymmetric failure"),
        }
    }
}

fn patient() -> impl Strategy<Value = SortPatient> {
    (
        1u8..=5,
        any::<bool>(),
        prop::sample::select(sort::Severity::ALL.to_vec()),
        0u8..=3,
        prop::sample::select(vec![AgeGroup::Base, AgeGroup::Grp1, AgeGroup::Grp2]),
    )
        .prop_map(|(asa_ps, emergency, severity, m, age_group)| SortPatient {
            asa_ps,
            emergency,
            severity,
            malignancy: f64::from(m),
            age_group,
        })
}

proptest! {
    #![proptest_config(config(300))]

    #[test]
    fn cci_mapping_is_monotone(a in 0u32..50, b in 0u32..50) {
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(sort::cci_to_asa(lo) <= sort::cci_to_asa(hi));
        prop_assert!((1..=5).contains(&sort::cci_to_asa(a)));
    }

    #[test]
    fn sort_scores_are_probabilities_and_monotone(p in patient()) {
        let c = SortCoefficients::default();
        let s = sort::sort_score(&p, &c);
        prop_assert!(s > 0.0 && s < 1.0);
        if !p.emergency {
            let urgent = SortPatient { emergency: true, ..p };
            prop_assert!(sort::sort_score(&urgent, &c) > s);
        }
        let worse = SortPatient { malignancy: p.malignancy + 1.0, ..p };
        prop_assert!(sort::sort_score(&worse, &c) > s);
        let r = sort::sort_score(&SortPatient::reference(), &c);
        prop_assert!(s >= r);
    }

    #[test]
    fn raising_a_positive_feature_raises_the_score(
        x in prop::collection::vec(0.0f64..2.0, 10), j in 0usize..10, delta in 0.01f64..2.0
    ) {
        let c = SortCoefficients::default();
        prop_assume!(c.slopes()[j] > 0.0);
        let mut y = x.clone();
        y[j] += delta;
        prop_assert!(c.linear_predictor(&y) > c.linear_predictor(&x));
    }
}

#[test]
fn cci_mapping_is_onto() {
    let image: Vec<u8> = (0..=4).map(sort::cci_to_asa).collect();
    assert_eq!(image, vec![1, 2, 3, 4, 5]);
}
