mod common;

use common::*;
use mobnet_core::gnn::{GnnConfig, GnnModel, GraphInputs, LayerKind};
use mobnet_core::nn::{Activation, Mlp, ModelParams, OptimizerConfig, Tape};
use mobnet_core::vnn::{make_pairs, reconstruction_target, PairFeature, PairSampling, VnnConfig, VnnEmbedModel};
use mobnet_core::{Matrix, WeightTransform};

const TOL: f64 = 1e-4;

struct MlpCase {
    params: ModelParams,
    mlp: Mlp,
    x: Matrix,
    y: Matrix,
}

fn mlp_params(c: &mut MlpCase) -> &mut ModelParams {
    &mut c.params
}

#[test]
fn mlp_gradients_match_finite_differences() {
    for seed in 0..5 {
        let mut r = rng(seed);
        let mut params = ModelParams::new();
        let mlp = Mlp::new(&mut params, "m", &[4, 6, 5, 1], Activation::Relu, &mut r).unwrap();
        jitter_params(&mut params, 0.8, &mut r);
        let mut case = MlpCase {
            params,
            mlp,
            x: random_matrix(8, 4, 1.0, &mut r),
            y: random_matrix(8, 1, 1.0, &mut r),
        };
        let err = gradient_check(&mut case, mlp_params, |c| {
            let mut tape = Tape::new();
            let x = tape.constant(c.x.clone());
            let out = c.mlp.forward(&mut tape, &c.params, x).unwrap();
            let loss = tape.mse(out, &c.y, None).unwrap();
            let v = tape.value(loss)[(0, 0)];
            tape.backward(loss, &mut c.params).unwrap();
            v
        });
        assert!(err < TOL, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn linear_mse_gradient_has_closed_form() {
    // loss = mean((xW − y)²) over N rows; ∂/∂W = 2/N · xᵀ(xW − y).
    let mut r = rng(11);
    let x = random_matrix(5, 3, 1.0, &mut r);
    let y = random_matrix(5, 1, 1.0, &mut r);
    let w0 = random_matrix(3, 1, 1.0, &mut r);
    let mut params = ModelParams::new();
    let w = params.add("w", w0.clone()).unwrap();
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let wv = tape.param(&params, w);
    let pred = tape.matmul(xv, wv).unwrap();
    let loss = tape.mse(pred, &y, None).unwrap();
    tape.backward(loss, &mut params).unwrap();

    let mut expected = vec![0.0; 3];
    for i in 0..5 {
        let resid: f64 = (0..3).map(|k| x[(i, k)] * w0[(k, 0)]).sum::<f64>() - y[(i, 0)];
        for (k, e) in expected.iter_mut().enumerate() {
            *e += 2.0 / 5.0 * x[(i, k)] * resid;
        }
    }
    assert!(max_abs_diff(params.grad(w).unwrap().as_slice(), &expected) < 1e-12);
}

struct GnnCase {
    model: GnnModel,
    inputs: GraphInputs,
    h0: Matrix,
    y: Matrix,
    mask: Vec<bool>,
}

fn gnn_params(c: &mut GnnCase) -> &mut ModelParams {
    c.model.params_mut()
}

fn gnn_case(kind: LayerKind, n: usize, seed: u64) -> GnnCase {
    let mut r = rng(seed);
    let net = random_network(n, 0.35, &mut r);
    let config = GnnConfig {
        layer_kind: kind,
        hidden: (4, 3),
        heads: 2,
        head_hidden: vec![5],
        seed,
        ..Default::default()
    };
    let mut model = GnnModel::new(3, &config).unwrap();
    jitter_params(model.params_mut(), 0.7, &mut r);
    let mask = (0..n).map(|i| i % 3 != 0).collect();
    GnnCase {
        model,
        inputs: GraphInputs::new(&net, WeightTransform::Log1p),
        h0: random_matrix(n, 3, 1.0, &mut r),
        y: random_matrix(n, 1, 1.0, &mut r),
        mask,
    }
}

fn check_gnn(kind: LayerKind) {
    for seed in 0..4 {
        let n = [6, 7, 8, 5][seed as usize];
        let mut case = gnn_case(kind, n, seed);
        let err = gradient_check(&mut case, gnn_params, |c| {
            c.model.loss_with_grad(&c.inputs, &c.h0, &c.y, &c.mask, None).unwrap()
        });
        assert!(err < TOL, "{kind:?} seed {seed}: relative error {err:e}");
    }
}

#[test]
fn gcn_stack_gradients_match_finite_differences() {
    check_gnn(LayerKind::Gcn);
}

#[test]
fn gat_stack_gradients_match_finite_differences() {
    check_gnn(LayerKind::Gat);
}

struct VnnCase {
    model: VnnEmbedModel,
    batch: mobnet_core::vnn::PairwiseBatch,
}

fn vnn_params(c: &mut VnnCase) -> &mut ModelParams {
    c.model.params_mut()
}

#[test]
fn pairwise_pipeline_gradients_match_finite_differences() {
    for (seed, feature) in [(0, PairFeature::SquaredDiff), (1, PairFeature::SquaredDiff), (2, PairFeature::Concat)] {
        let mut r = rng(100 + seed);
        let net = random_network(6, 0.4, &mut r);
        let config = VnnConfig {
            d: 2,
            feature,
            optimizer: OptimizerConfig::sgd(0.1),
            seed,
            ..Default::default()
        };
        let mut model = VnnEmbedModel::new(&net, None, &config).unwrap();
        jitter_params(model.params_mut(), 0.9, &mut r);
        let target = reconstruction_target(&net, WeightTransform::Log1p, feature);
        let e = model.embedding().into_values();
        let batch = make_pairs(&e, &net, &target, PairSampling::AllPairs, 64, &mut rng(seed))
            .unwrap()
            .remove(0);
        let mut case = VnnCase { model, batch };
        let err = gradient_check(&mut case, vnn_params, |c| c.model.batch_loss(&c.batch).unwrap());
        assert!(err < TOL, "{feature:?} seed {seed}: relative error {err:e}");
    }
}
