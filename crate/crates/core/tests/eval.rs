mod common;

use common::*;
use mobnet_core::embeddings::{EmbeddingMatrix, EmbeddingMethod};
use mobnet_core::eval::{concat_features, make_split, r_squared, EvalReport, SeedSummary, SplitKind, TargetScaler};
use mobnet_core::{AttributeTable, Matrix};
use proptest::prelude::*;

#[test]
fn r_squared_trivial_cases() {
    let y = [1.0, 2.0, 3.0, 7.5];
    assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
    let mean = y.iter().sum::<f64>() / 4.0;
    assert_eq!(r_squared(&y, &[mean; 4]).unwrap(), 0.0);
    assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
    assert!(r_squared(&[4.0, 4.0], &[1.0, 2.0]).is_err());
    assert!(r_squared(&[1.0], &[1.0]).is_err());
    assert!(r_squared(&[1.0, 2.0], &[1.0]).is_err());
}

#[test]
fn constant_test_target_reports_zero() {
    let report = EvalReport::new(vec![0, 1], vec![5.0, 5.0], vec![4.0, 6.0], 0, 0).unwrap();
    assert_eq!(report.r2, 0.0);
    assert!(EvalReport::new(vec![0, 1], vec![1.0, 5.0], vec![f64::NAN, 6.0], 0, 0).is_err());
}

#[test]
fn split_examples() {
    let plan = make_split(&[true; 10], SplitKind::Holdout { train_fraction: 0.7 }, 3).unwrap();
    let p = plan.partition(0).unwrap();
    assert_eq!((p.train.len(), p.test.len()), (7, 3));

    let plan = make_split(&[true; 100], SplitKind::KFold { k: 5 }, 3).unwrap();
    for f in 0..5 {
        assert_eq!(plan.partition(f).unwrap().test.len(), 20);
    }
    assert!(make_split(&[true; 9], SplitKind::default(), 0).is_err());
    assert_eq!(
        make_split(&[true; 40], SplitKind::default(), 9).unwrap(),
        make_split(&[true; 40], SplitKind::default(), 9).unwrap()
    );
}

#[test]
fn concat_features_widths_and_mismatch() {
    let regions: Vec<_> = (0..4).map(tract).collect();
    let net = network(&Matrix::filled(4, 4, 1.0));
    let emb = EmbeddingMatrix::new(
        Matrix::from_vec(4, 5, (0..20).map(|v| (v * v % 7) as f64).collect()).unwrap(),
        EmbeddingMethod::Svd,
    );
    let mut table = AttributeTable::new(vec!["density".into()]);
    for (i, r) in regions.iter().enumerate() {
        table.insert(r.clone(), vec![Some(10.0 * i as f64)]).unwrap();
    }
    let block = concat_features(&emb, &net, &table).unwrap();
    assert_eq!(block.values.cols(), 6);
    let col = block.values.column(5);
    assert!(col.iter().sum::<f64>().abs() < 1e-12);

    let mut shifted = AttributeTable::new(vec!["density".into()]);
    for i in 1..5 {
        shifted.insert(tract(i), vec![Some(1.0)]).unwrap();
    }
    let err = concat_features(&emb, &net, &shifted).unwrap_err().to_string();
    assert!(err.contains(tract(0).as_str()) && err.contains(tract(4).as_str()), "{err}");
}

fn series() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            proptest::collection::vec(-10.0..10.0f64, n),
            proptest::collection::vec(-10.0..10.0f64, n),
        )
    })
}

proptest! {
    #[test]
    fn r_squared_never_exceeds_one((y, y_hat) in series()) {
        prop_assume!(y.iter().any(|v| *v != y[0]));
        let r2 = r_squared(&y, &y_hat).unwrap();
        prop_assert!(r2 <= 1.0);
        prop_assert_eq!(r2 == 1.0, y == y_hat);
    }

    #[test]
    fn r_squared_is_affine_invariant(
        (y, y_hat) in series(),
        a in prop_oneof![-10.0..-0.1f64, 0.1..10.0f64],
        b in -100.0..100.0f64,
    ) {
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        prop_assume!(y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() > 1.0);
        let base = r_squared(&y, &y_hat).unwrap();
        let ty: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        let th: Vec<f64> = y_hat.iter().map(|v| a * v + b).collect();
        prop_assert!((r_squared(&ty, &th).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn holdout_partitions_eligible_nodes(
        eligible in proptest::collection::vec(prop::bool::weighted(0.8), 12..120),
        frac in 0.05..0.95f64,
        seed in any::<u64>(),
    ) {
        let m = eligible.iter().filter(|e| **e).count();
        prop_assume!(m >= 10);
        let plan = make_split(&eligible, SplitKind::Holdout { train_fraction: frac }, seed).unwrap();
        let p = plan.partition(0).unwrap();
        prop_assert!((p.train.len() as f64 / m as f64 - frac).abs() <= 1.0 / m as f64);
        let mut all: Vec<usize> = p.train.iter().chain(&p.test).copied().collect();
        all.sort_unstable();
        let expected: Vec<usize> = (0..eligible.len()).filter(|&i| eligible[i]).collect();
        prop_assert_eq!(all, expected);
    }

    #[test]
    fn kfold_places_each_node_once(
        eligible in proptest::collection::vec(prop::bool::weighted(0.8), 12..120),
        k in 2usize..8,
        seed in any::<u64>(),
    ) {
        let m = eligible.iter().filter(|e| **e).count();
        prop_assume!(m >= 10 && k <= m);
        let plan = make_split(&eligible, SplitKind::KFold { k }, seed).unwrap();
        let mut count = vec![0; eligible.len()];
        for f in 0..k {
            let p = plan.partition(f).unwrap();
            prop_assert_eq!(p.train.len() + p.test.len(), m);
            for i in p.test {
                count[i] += 1;
            }
        }
        for (i, c) in count.iter().enumerate() {
            prop_assert_eq!(*c, usize::from(eligible[i]));
        }
    }

    #[test]
    fn seed_mean_is_arithmetic_mean(r2 in proptest::collection::vec(-1.0..1.0f64, 1..12)) {
        let seeds: Vec<u64> = (0..r2.len() as u64).collect();
        let s = SeedSummary::new(seeds, r2.clone()).unwrap();
        prop_assert!((s.mean - r2.iter().sum::<f64>() / r2.len() as f64).abs() < 1e-15);
        prop_assert!(s.half_width >= 0.0);
    }

    #[test]
    fn target_scaler_round_trips(values in proptest::collection::vec(1e3..1e5f64, 1..30)) {
        let s = TargetScaler::fit(&values);
        for v in &values {
            prop_assert!((s.inverse(s.forward(*v)) - v).abs() < 1e-9);
        }
    }
}
