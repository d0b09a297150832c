mod common;

use common::*;
use mobnet_core::embeddings::{kmeans_restarts, laplacian_spectrum, svd_embedding, EmbeddingMatrix, EmbeddingMethod};
use mobnet_core::eval::{make_split, median, SplitKind};
use mobnet_core::gnn::{train_end_to_end, GnnConfig, GnnModel, GraphInputs, LayerKind};
use mobnet_core::synth::{generate, PlantedCitySpec};
use mobnet_core::vnn::{
    predict_income_from_embedding, reconstruction_target, train_vnn_embedding, HeadConfig, PairFeature, VnnConfig,
};
use mobnet_core::{Matrix, RegionId, WeightTransform};
use rand::seq::SliceRandom;
use rand::Rng;

fn small_vnn(seed: u64) -> VnnConfig {
    VnnConfig {
        d: 3,
        epochs: 30,
        batch_size: 64,
        patience: 0,
        seed,
        ..Default::default()
    }
}

#[test]
fn vnn_training_reduces_reconstruction_loss() {
    let mut r = rng(30);
    for seed in 0..4 {
        let net = random_network(12, 0.3, &mut r);
        let init = svd_embedding(&net, 3, WeightTransform::Log1p).unwrap();
        let config = VnnConfig { epochs: 100, ..small_vnn(seed) };
        let model = train_vnn_embedding(&net, Some(&init), &config).unwrap();
        assert!(model.final_mse() < model.initial_mse(), "seed {seed}");
        assert_eq!(model.epochs_run(), 100);
    }
}

#[test]
fn vnn_is_invariant_to_node_relabeling() {
    let mut r = rng(31);
    let n = 12;
    let a = random_weights(n, 0.3, &mut r);
    let net = network(&a);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut r);
    // Node k of the relabeled network is node perm[k] of the original.
    let regions: Vec<RegionId> = perm.iter().map(|&p| tract(p)).collect();
    let mut pa = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            pa[(i, j)] = a[(perm[i], perm[j])];
        }
    }
    let pnet = mobnet_core::MobilityNetwork::from_dense(regions, &pa).unwrap();

    let base = train_vnn_embedding(&net, None, &small_vnn(5)).unwrap();
    let moved = train_vnn_embedding(&pnet, None, &small_vnn(5)).unwrap();
    assert!((base.final_mse() - moved.final_mse()).abs() < 1e-6);
    for (x, y) in base.loss_trace().iter().zip(moved.loss_trace()) {
        assert!((x - y).abs() < 1e-6);
    }
    let e = base.embedding().into_values();
    let pe = moved.embedding().into_values();
    for k in 0..n {
        assert!(max_abs_diff(pe.row(k), e.row(perm[k])) < 1e-6);
    }
}

#[test]
fn reconstruction_target_is_symmetric_for_squared_differences() {
    let net = random_network(7, 0.4, &mut rng(32));
    let t = reconstruction_target(&net, WeightTransform::Log1p, PairFeature::SquaredDiff);
    assert!(t.max_abs_diff(&t.transpose()) == 0.0);
    assert!((0..7).all(|i| t[(i, i)] == net.weight(i, i).ln_1p()));
}

fn head_case(n: usize, seed: u64, linear: bool) -> f64 {
    let mut r = rng(1000 + seed);
    let e = random_matrix(n, 5, 1.0, &mut r);
    let coef = [1.5, -2.0, 0.7, 3.0, -0.4];
    let targets: Vec<Option<f64>> = (0..n)
        .map(|i| {
            Some(if linear {
                40_000.0 + 5_000.0 * (0..5).map(|c| coef[c] * e[(i, c)]).sum::<f64>()
            } else {
                40_000.0 + 5_000.0 * r.gen_range(-1.0..1.0)
            })
        })
        .collect();
    let split = make_split(&vec![true; n], SplitKind::default(), seed).unwrap();
    let emb = EmbeddingMatrix::new(e, EmbeddingMethod::Svd);
    let head = HeadConfig { seed, ..Default::default() };
    predict_income_from_embedding(&emb, &targets, &split, 0, &head).unwrap().r2
}

#[test]
fn head_recovers_noiseless_linear_target() {
    for seed in 0..3 {
        let r2 = head_case(300, seed, true);
        assert!(r2 >= 0.99, "seed {seed}: R² {r2}");
    }
}

#[test]
fn head_finds_nothing_in_pure_noise() {
    let r2: Vec<f64> = (0..10).map(|s| head_case(120, s, false)).collect();
    let mean = r2.iter().sum::<f64>() / r2.len() as f64;
    assert!(mean <= 0.05, "mean R² {mean}");
}

fn planted(seed: u64) -> mobnet_core::synth::PlantedCity {
    generate(&PlantedCitySpec::default(), seed).unwrap()
}

fn small_gnn(seed: u64) -> GnnConfig {
    GnnConfig {
        hidden: (16, 8),
        epochs: 150,
        seed,
        ..Default::default()
    }
}

#[test]
fn masked_loss_ignores_test_targets() {
    let city = planted(3);
    let inputs = GraphInputs::new(&city.network, WeightTransform::Log1p);
    let h0 = svd_embedding(&city.network, 4, WeightTransform::Log1p).unwrap().standardized();
    let targets: Vec<Option<f64>> = city.income_values().into_iter().map(Some).collect();
    let part = make_split(&vec![true; 60], SplitKind::default(), 3).unwrap().partition(0).unwrap();
    for kind in [LayerKind::Gcn, LayerKind::Gat] {
        let config = GnnConfig { layer_kind: kind, epochs: 30, heads: 2, ..small_gnn(1) };
        let a = train_end_to_end(&inputs, &h0, &targets, &part, &config).unwrap();
        let mut moved = targets.clone();
        for &i in &part.test {
            moved[i] = Some(moved[i].unwrap() * 3.0 + 1e6);
        }
        let b = train_end_to_end(&inputs, &h0, &moved, &part, &config).unwrap();
        assert_eq!(a.model.loss_trace(), b.model.loss_trace());
    }
}

#[test]
fn constant_target_is_learned_everywhere() {
    let city = planted(4);
    let inputs = GraphInputs::new(&city.network, WeightTransform::Log1p);
    let h0 = svd_embedding(&city.network, 4, WeightTransform::Log1p).unwrap().standardized();
    let targets = vec![Some(42_000.0); 60];
    let part = make_split(&vec![true; 60], SplitKind::default(), 0).unwrap().partition(0).unwrap();
    let run = train_end_to_end(&inputs, &h0, &targets, &part, &small_gnn(0)).unwrap();
    assert!(*run.model.loss_trace().last().unwrap() < 1e-4);
    let pred = run.model.predict(&inputs, h0.values()).unwrap();
    assert!(pred.iter().all(|p| (p - 42_000.0).abs() < 1e-2));
}

#[test]
fn hidden_state_contract() {
    let city = planted(5);
    let inputs = GraphInputs::new(&city.network, WeightTransform::Log1p);
    let h0 = svd_embedding(&city.network, 4, WeightTransform::Log1p).unwrap().standardized();
    let config = GnnConfig { layer_kind: LayerKind::Gat, heads: 3, ..small_gnn(2) };
    let untrained = GnnModel::new(4, &config).unwrap();
    assert!(untrained.extract_hidden(&inputs, h0.values(), 2).is_err());
    let s1 = untrained.layer_states(&inputs, h0.values()).unwrap();
    let s2 = GnnModel::new(4, &config).unwrap().layer_states(&inputs, h0.values()).unwrap();
    assert_eq!(s1.h[2], s2.h[2]);
    assert_eq!(&s1.h[0], h0.values());

    let targets: Vec<Option<f64>> = city.income_values().into_iter().map(Some).collect();
    let part = make_split(&vec![true; 60], SplitKind::default(), 5).unwrap().partition(0).unwrap();
    let run = train_end_to_end(&inputs, &h0, &targets, &part, &GnnConfig { epochs: 20, ..config }).unwrap();
    assert_eq!(run.model.extract_hidden(&inputs, h0.values(), 1).unwrap().dim(), 16 * 3);
    assert_eq!(run.model.extract_hidden(&inputs, h0.values(), 2).unwrap().dim(), 8);
    assert!(run.model.extract_hidden(&inputs, h0.values(), 3).is_err());
}

#[test]
fn trained_hidden_states_separate_communities() {
    let mut agreement = Vec::new();
    for seed in 0..5 {
        let city = planted(seed);
        let inputs = GraphInputs::new(&city.network, WeightTransform::Log1p);
        let h0 = svd_embedding(&city.network, 5, WeightTransform::Log1p).unwrap().standardized();
        let targets: Vec<Option<f64>> = city.income_values().into_iter().map(Some).collect();
        let part = make_split(&vec![true; 60], SplitKind::default(), seed).unwrap().partition(0).unwrap();
        let run = train_end_to_end(&inputs, &h0, &targets, &part, &small_gnn(seed)).unwrap();
        let h2 = run.model.extract_hidden(&inputs, h0.values(), 2).unwrap();
        let km = kmeans_restarts(h2.values(), 2, seed, 100, 10).unwrap();
        agreement.push(permutation_agreement(&city.communities, &km.labels, 2));
    }
    assert!(median(&agreement) >= 0.9, "{agreement:?}");
}

#[test]
fn planted_flows_match_poisson_rates() {
    for seed in 0..3 {
        let city = planted(seed);
        let n = city.communities.len();
        let (mut win, mut nin, mut wout, mut nout) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let w = city.network.weight(i, j);
                if city.communities[i] == city.communities[j] {
                    win += w;
                    nin += 1.0;
                } else {
                    wout += w;
                    nout += 1.0;
                }
            }
        }
        assert!((win / nin - 5.0).abs() <= 0.5, "seed {seed}: within mean {}", win / nin);
        assert!((wout / nout - 0.2).abs() <= 0.02, "seed {seed}: across mean {}", wout / nout);
    }
}

#[test]
fn fiedler_vector_splits_planted_communities() {
    for seed in 0..5 {
        let city = planted(seed);
        let eig = laplacian_spectrum(&city.network, WeightTransform::Log1p).unwrap();
        let signs: Vec<usize> = eig.vectors.column(1).iter().map(|v| usize::from(*v > 0.0)).collect();
        let agree = permutation_agreement(&city.communities, &signs, 2);
        assert!(agree >= 0.95, "seed {seed}: {agree}");
    }
}

#[test]
fn planted_income_without_noise_is_constant_per_community() {
    let spec = PlantedCitySpec { noise_sd: 0.0, ..Default::default() };
    let city = generate(&spec, 1).unwrap();
    for (v, c) in city.income_values().iter().zip(&city.communities) {
        assert_eq!(*v, 50_000.0 + 30_000.0 * *c as f64);
    }
    let again = generate(&spec, 1).unwrap();
    assert_eq!(city.flows, again.flows);
}
