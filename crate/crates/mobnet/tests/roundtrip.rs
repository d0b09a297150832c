use mobnet::config::RunConfig;
use mobnet::formats::{read_checkpoint, read_edge_list, write_checkpoint, write_edge_list};
use mobnet_core::eval::{Init, Method, SplitKind};
use mobnet_core::nn::ModelParams;
use mobnet_core::{GeoLevel, Matrix, MobilityNetwork, RegionId, WeightTransform};
use proptest::prelude::*;

fn network(n: usize, weights: &[u32], zero_mask: &[bool]) -> MobilityNetwork {
    let regions = (0..n)
        .map(|i| RegionId::parse(&format!("48453{:06}", 7 * i + 1), GeoLevel::Tract).unwrap())
        .collect();
    let values = (0..n * n)
        .map(|k| if zero_mask[k] { 0.0 } else { weights[k] as f64 })
        .collect();
    MobilityNetwork::from_dense(regions, &Matrix::from_vec(n, n, values).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edge_list_round_trip_is_exact(
        n in 1usize..12,
        weights in prop::collection::vec(0u32..5000, 144),
        zero_mask in prop::collection::vec(prop::bool::weighted(0.6), 144),
    ) {
        let net = network(n, &weights, &zero_mask);
        let mut buf = Vec::new();
        write_edge_list(&net, &mut buf).unwrap();
        let back = read_edge_list(buf.as_slice()).unwrap();
        prop_assert_eq!(back.regions(), net.regions());
        prop_assert_eq!(back.to_dense(), net.to_dense());
        prop_assert_eq!(back.total_weight(), net.total_weight());
    }

    #[test]
    fn checkpoint_round_trip_is_exact(
        shapes in prop::collection::vec((1usize..5, 1usize..5), 1..5),
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mut params = ModelParams::new();
        for (k, (r, c)) in shapes.iter().enumerate() {
            let v: Vec<f64> = (0..r * c).map(|_| rng.gen_range(-1e3..1e3) * 10f64.powi(rng.gen_range(-12..12))).collect();
            params.add(format!("layer{k}.w"), Matrix::from_vec(*r, *c, v).unwrap()).unwrap();
        }
        let mut buf = Vec::new();
        write_checkpoint(&params, &mut buf).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        prop_assert_eq!(back, params);
    }

    #[test]
    fn config_render_parse_round_trip(
        d in 1usize..64,
        seed in any::<u64>(),
        seeds in 1usize..20,
        frac in 0.01f64..0.99,
        k in 2usize..10,
        kfold in any::<bool>(),
        method in 0usize..4,
        init in 0usize..4,
        transform in 0usize..3,
        lr in 1e-6f64..1.0,
        city in "[a-zA-Z][a-zA-Z _-]{0,15}[a-zA-Z]",
        dims in prop::collection::vec(1usize..40, 1..5),
        lambda_in in 1.0f64..20.0,
        od_path in prop::option::of("[a-z]{1,8}/[a-z]{1,8}\\.csv"),
    ) {
        let mut cfg = RunConfig {
            city,
            d,
            seed,
            seeds,
            method: Method::ALL[method],
            init: Init::ALL[init],
            grid_dims: dims,
            od_path: od_path.map(Into::into),
            ..RunConfig::default()
        };
        cfg.pipeline.split = if kfold { SplitKind::KFold { k } } else { SplitKind::Holdout { train_fraction: frac } };
        cfg.pipeline.transform = [WeightTransform::Raw, WeightTransform::Log1p, WeightTransform::Binary][transform];
        cfg.pipeline.gnn.optimizer.lr = lr;
        cfg.synth.lambda_in = lambda_in;
        let back = RunConfig::parse(&cfg.render()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
