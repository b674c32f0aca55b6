use gigp_core::group::{GroupElement, GroupId};
use gigp_core::lieconv::{conv_forward, residual_block, subsample, ConvLayer, ConvLayerConfig, ResidualBlock};
use gigp_core::lifting::{lift, orbit_of, stabilizer_sample, LiftedCloud, RawPointCloud};
use gigp_core::nn::ParamStore;
use proptest::prelude::*;

fn cloud_strategy(dim: usize, feat_dim: usize, max_n: usize) -> impl Strategy<Value = RawPointCloud> {
    (2..=max_n).prop_flat_map(move |n| {
        (prop::collection::vec(-3.0f64..3.0, n * dim), prop::collection::vec(-1.0f64..1.0, n * feat_dim))
            .prop_map(move |(c, f)| RawPointCloud::new(dim, c, feat_dim, f).unwrap())
    })
}

fn so3_rotation(w: [f64; 3]) -> GroupElement {
    GroupElement::exp(&gigp_core::AlgebraVector::new(GroupId::SO3, w.to_vec()).unwrap())
}

fn features(c: &LiftedCloud) -> Vec<f64> {
    c.feature_matrix()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn layer(group: GroupId, cin: usize, cout: usize, k: usize, seed: u64) -> (ParamStore, ConvLayer) {
    let mut store = ParamStore::new();
    let l = ConvLayer::new(&mut store, "conv", ConvLayerConfig::new(cin, cout, k), group, seed, false).unwrap();
    (store, l)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn so2_lift_is_equivariant(raw in cloud_strategy(2, 1, 12), theta in -3.1f64..3.1) {
        let g = GroupElement::so2(theta);
        let direct = lift(&raw.transformed(&g).unwrap(), GroupId::SO2).unwrap();
        let moved = lift(&raw, GroupId::SO2).unwrap().left_multiplied(&g).unwrap();
        for (a, b) in direct.points.iter().zip(&moved.points) {
            prop_assert!((a.orbit - b.orbit).abs() < 1e-12);
            let x = [1.0, 0.5];
            prop_assert!(max_diff(&a.elem.act(&x).unwrap(), &b.elem.act(&x).unwrap()) < 1e-9);
        }
    }

    #[test]
    fn orbits_are_invariant(raw in cloud_strategy(3, 1, 12), w in prop::array::uniform3(-2.0f64..2.0)) {
        let g = so3_rotation(w);
        let moved = raw.transformed(&g).unwrap();
        for i in 0..raw.len() {
            prop_assert!((orbit_of(raw.point(i), GroupId::SO3) - orbit_of(moved.point(i), GroupId::SO3)).abs() < 1e-12);
        }
    }

    #[test]
    fn lifts_carry_origin_onto_point(raw in cloud_strategy(3, 1, 8), seed in any::<u64>()) {
        let lifted = lift(&raw, GroupId::SO3).unwrap();
        for (i, p) in lifted.points.iter().enumerate() {
            let origin = [p.orbit, 0.0, 0.0];
            prop_assert!(max_diff(&p.elem.act(&origin).unwrap(), raw.point(i)) < 1e-12);
            for u in stabilizer_sample(raw.point(i), GroupId::SO3, 4, seed).unwrap() {
                prop_assert!(max_diff(&u.act(&origin).unwrap(), raw.point(i)) < 1e-12);
            }
        }
    }

    #[test]
    fn so2_conv_is_equivariant(raw in cloud_strategy(2, 3, 16), theta in -3.1f64..3.1, seed in 0u64..1000) {
        let (store, l) = layer(GroupId::SO2, 3, 4, 5, seed);
        let g = GroupElement::so2(theta);
        let a = conv_forward(&l, &store, &lift(&raw, GroupId::SO2).unwrap(), 7).unwrap();
        let b = conv_forward(&l, &store, &lift(&raw.transformed(&g).unwrap(), GroupId::SO2).unwrap(), 7).unwrap();
        prop_assert!(max_diff(&features(&a), &features(&b)) < 1e-9);
    }

    #[test]
    fn so3_conv_is_equivariant(raw in cloud_strategy(3, 2, 16), w in prop::array::uniform3(-2.0f64..2.0), seed in 0u64..1000) {
        let (store, l) = layer(GroupId::SO3, 2, 3, 5, seed);
        let g = so3_rotation(w);
        let a = conv_forward(&l, &store, &lift(&raw, GroupId::SO3).unwrap(), 7).unwrap();
        let b = conv_forward(&l, &store, &lift(&raw.transformed(&g).unwrap(), GroupId::SO3).unwrap(), 7).unwrap();
        prop_assert!(max_diff(&features(&a), &features(&b)) < 1e-9);
    }

    #[test]
    fn translation_conv_is_equivariant(raw in cloud_strategy(2, 2, 12), t in prop::array::uniform2(-4.0f64..4.0)) {
        let (store, l) = layer(GroupId::Tn(2), 2, 2, 4, 3);
        let g = GroupElement::translation(t.to_vec());
        let a = conv_forward(&l, &store, &lift(&raw, GroupId::Tn(2)).unwrap(), 0).unwrap();
        let b = conv_forward(&l, &store, &lift(&raw.transformed(&g).unwrap(), GroupId::Tn(2)).unwrap(), 0).unwrap();
        prop_assert!(max_diff(&features(&a), &features(&b)) < 1e-9);
    }

    #[test]
    fn conv_is_linear_in_features(raw in cloud_strategy(2, 2, 12), other in prop::collection::vec(-1.0f64..1.0, 24), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let (store, l) = layer(GroupId::SO2, 2, 3, 4, 11);
        let base = lift(&raw, GroupId::SO2).unwrap();
        let f1 = base.feature_matrix();
        let f2: Vec<f64> = other[..f1.len()].to_vec();
        let mix: Vec<f64> = f1.iter().zip(&f2).map(|(x, y)| a * x + b * y).collect();
        let o1 = features(&conv_forward(&l, &store, &base, 1).unwrap());
        let o2 = features(&conv_forward(&l, &store, &base.with_features(2, &f2).unwrap(), 1).unwrap());
        let om = features(&conv_forward(&l, &store, &base.with_features(2, &mix).unwrap(), 1).unwrap());
        let expect: Vec<f64> = o1.iter().zip(&o2).map(|(x, y)| a * x + b * y).collect();
        prop_assert!(max_diff(&om, &expect) < 1e-10);
    }

    #[test]
    fn fresh_residual_block_is_identity(raw in cloud_strategy(2, 4, 12)) {
        let mut store = ParamStore::new();
        let block = ResidualBlock::new(&mut store, "b", ConvLayerConfig::new(4, 4, 4), GroupId::SO2, 5).unwrap();
        let cloud = lift(&raw, GroupId::SO2).unwrap();
        let out = residual_block(&cloud, &block, &store, 0).unwrap();
        prop_assert_eq!(features(&out), features(&cloud));
    }
}

/// Evaluates the convolution sum directly: per target, the k nearest points by
/// brute force, and each kernel matrix applied to the neighbor feature.
#[test]
fn conv_matches_explicit_kernel_sum() {
    let coords = vec![1.0, 0.0, 0.2, 1.3, -0.7, 0.4, 0.5, -1.1, 2.0, 2.0, -1.5, -0.3];
    let feats: Vec<f64> = (0..12).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3).collect();
    let raw = RawPointCloud::new(2, coords.clone(), 2, feats.clone()).unwrap();
    let cloud = lift(&raw, GroupId::SO2).unwrap();
    let (store, l) = layer(GroupId::SO2, 2, 3, 3, 21);
    let out = features(&conv_forward(&l, &store, &cloud, 0).unwrap());

    let n = 6;
    let angle = |i: usize| coords[2 * i + 1].atan2(coords[2 * i]);
    let radius = |i: usize| coords[2 * i].hypot(coords[2 * i + 1]);
    let wrap = |mut d: f64| {
        while d > std::f64::consts::PI {
            d -= 2.0 * std::f64::consts::PI;
        }
        while d <= -std::f64::consts::PI {
            d += 2.0 * std::f64::consts::PI;
        }
        d
    };
    for u in 0..n {
        let mut cand: Vec<(f64, usize)> = (0..n)
            .map(|v| {
                let a = wrap(angle(u) - angle(v));
                (a * a + (radius(u) - radius(v)).powi(2), v)
            })
            .collect();
        cand.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut acc = [0.0; 3];
        for &(_, v) in &cand[..3] {
            let input = [wrap(angle(u) - angle(v)), radius(u), radius(v)];
            let k = store_kernel(&l, &store, &input);
            for o in 0..3 {
                for i in 0..2 {
                    acc[o] += k[o * 2 + i] * feats[v * 2 + i] / 3.0;
                }
            }
        }
        assert!(max_diff(&acc, &out[u * 3..u * 3 + 3]) < 1e-12, "target {u}");
    }
}

fn store_kernel(l: &ConvLayer, store: &ParamStore, input: &[f64]) -> Vec<f64> {
    l.kernel_matrix(store, input).unwrap().into_data()
}

#[test]
fn monte_carlo_error_shrinks_with_sample_fraction() {
    let n = 40;
    let coords: Vec<f64> = (0..2 * n).map(|i| ((i as f64) * 1.618).sin() * 2.0).collect();
    let feats: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.77).cos()).collect();
    let cloud = lift(&RawPointCloud::new(2, coords, 1, feats).unwrap(), GroupId::SO2).unwrap();
    let (store, full) = layer(GroupId::SO2, 1, 2, 16, 4);
    let exact = features(&conv_forward(&full, &store, &cloud, 0).unwrap());
    let mut errors = Vec::new();
    for frac in [0.125, 0.25, 0.5, 1.0] {
        let mut l = full.clone();
        l.config.mc_fraction = frac;
        let mut total = 0.0;
        for seed in 0..50 {
            let approx = features(&conv_forward(&l, &store, &cloud, seed).unwrap());
            total += approx.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        errors.push(total / 50.0);
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert_eq!(errors[3], 0.0);
}

#[test]
fn subsample_keeps_points_uniformly() {
    let raw = RawPointCloud::new(2, (0..12).map(|i| i as f64 + 1.0).collect(), 1, vec![0.0; 6]).unwrap();
    let cloud = lift(&raw, GroupId::SO2).unwrap();
    let mut hits = [0usize; 6];
    let trials = 10_000;
    for seed in 0..trials {
        let kept = subsample(&cloud, 1, seed).unwrap();
        let i = cloud.points.iter().position(|p| p == &kept.points[0]).unwrap();
        hits[i] += 1;
    }
    for h in hits {
        assert!((h as f64 / trials as f64 - 1.0 / 6.0).abs() < 0.02, "{hits:?}");
    }
}
