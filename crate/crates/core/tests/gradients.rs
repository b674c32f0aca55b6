use gigp_core::gigp::GigpLayer;
use gigp_core::group::GroupId;
use gigp_core::lieconv::{ConvGeometry, ConvLayerConfig, ResidualBlock};
use gigp_core::lifting::{lift, RawPointCloud};
use gigp_core::nn::{grad_check, Bound, GradCheckReport, ParamStore, Tape, Tensor, Var};
use gigp_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-6;
const TOL: f64 = 1e-6;

fn random(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Contracts any tensor to a scalar with fixed random weights, so every output
/// entry reaches the loss with a distinct coefficient.
fn project(tape: &mut Tape, v: Var) -> Result<Var> {
    let shape = tape.value(v).shape().to_vec();
    let w = tape.constant(random(&shape, 99));
    let p = tape.mul(v, w)?;
    Ok(tape.sum(p))
}

fn inputs(shapes: &[&[usize]]) -> Vec<(String, Tensor)> {
    shapes.iter().enumerate().map(|(i, s)| (format!("x{i}"), random(s, i as u64 + 1))).collect()
}

fn assert_passes(report: GradCheckReport) {
    assert!(report.passed(), "{:?}", report.failures().collect::<Vec<_>>());
}

fn check(shapes: &[&[usize]], f: impl Fn(&mut Tape, &[Var]) -> Result<Var>) {
    let report = grad_check(
        |t: &mut Tape, v: &[Var]| {
            let out = f(t, v)?;
            project(t, out)
        },
        &inputs(shapes),
        STEP,
        TOL,
    )
    .unwrap();
    assert_passes(report);
}

#[test]
fn elementwise_primitives() {
    check(&[&[3, 4], &[3, 4]], |t, v| t.add(v[0], v[1]));
    check(&[&[3, 4], &[3, 4]], |t, v| t.sub(v[0], v[1]));
    check(&[&[3, 4], &[3, 4]], |t, v| t.mul(v[0], v[1]));
    check(&[&[3, 4], &[1, 4]], |t, v| t.add_row(v[0], v[1]));
    check(&[&[3, 4]], |t, v| Ok(t.scale(v[0], -2.5)));
    check(&[&[3, 4], &[1]], |t, v| t.mul_scalar(v[0], v[1]));
    check(&[&[3, 4]], |t, v| Ok(t.swish(v[0])));
    check(&[&[3, 4]], |t, v| Ok(t.square(v[0])));
}

#[test]
fn reductions_and_layout() {
    check(&[&[3, 4]], |t, v| Ok(t.softmax_rows(v[0])));
    check(&[&[3, 4]], |t, v| Ok(t.sum(v[0])));
    check(&[&[3, 4]], |t, v| Ok(t.mean(v[0])));
    check(&[&[3, 4]], |t, v| Ok(t.mean_rows(v[0])));
    check(&[&[3, 4]], |t, v| Ok(t.transpose(v[0])));
    check(&[&[3, 4]], |t, v| t.gather_rows(v[0], &[2, 0, 2, 1, 2]));
    check(&[&[3, 4], &[3, 2]], |t, v| t.concat_cols(v[0], v[1]));
    check(&[&[3, 4]], |t, v| Ok(t.append_ones_col(v[0])));
    check(&[&[3, 1], &[1, 4]], |t, v| Ok(t.outer_sub(v[0], v[1])));
    check(&[&[3, 4]], |t, v| t.reshape(v[0], &[4, 3]));
}

#[test]
fn products() {
    check(&[&[3, 4], &[4, 5]], |t, v| t.matmul(v[0], v[1]));
    check(&[&[6, 3], &[6, 2]], |t, v| t.pair_contract(v[0], v[1], 3));
    let labels = [1usize, 3, 0];
    let report = grad_check(|t: &mut Tape, v: &[Var]| t.softmax_cross_entropy(v[0], &labels), &inputs(&[&[3, 4]]), STEP, TOL).unwrap();
    assert_passes(report);
}

fn cloud(group: GroupId, n: usize, d: usize) -> gigp_core::LiftedCloud {
    let dim = group.space_dim();
    let coords = random(&[n * dim], 17).into_data().iter().map(|x| 2.0 * x).collect();
    let feats = random(&[n * d], 18).into_data();
    lift(&RawPointCloud::new(dim, coords, d, feats).unwrap(), group).unwrap()
}

/// Every parameter of `store` plus one extra input, checked end to end.
fn check_model(store: &ParamStore, extra: Tensor, f: impl Fn(&mut Tape, &Bound, Var) -> Result<Var>) {
    let mut named: Vec<(String, Tensor)> = store.entries().iter().map(|e| (e.name.clone(), e.tensor.clone())).collect();
    named.push(("features".into(), extra));
    let p = store.len();
    let report = grad_check(
        |t: &mut Tape, v: &[Var]| {
            let bound = Bound::from_vars(v[..p].to_vec());
            let out = f(t, &bound, v[p])?;
            project(t, out)
        },
        &named,
        STEP,
        TOL,
    )
    .unwrap();
    assert_passes(report);
}

#[test]
fn residual_block_end_to_end() {
    for group in [GroupId::SO2, GroupId::SO3] {
        let c = cloud(group, 7, 3);
        let mut store = ParamStore::new();
        let mut cfg = ConvLayerConfig::new(3, 3, 4);
        cfg.kernel_hidden = vec![5];
        let block = ResidualBlock::new(&mut store, "b", cfg, group, 2).unwrap();
        // leave no parameter at exactly zero so every path carries gradient
        for e in store.entries().to_vec() {
            let id = store.find(&e.name).unwrap();
            let fresh = random(e.tensor.shape(), e.name.len() as u64);
            store.set(id, fresh).unwrap();
        }
        let geom = ConvGeometry::build(&c, 4, 1.0).unwrap();
        let feats = Tensor::matrix(7, 3, c.feature_matrix()).unwrap();
        check_model(&store, feats, |t, b, f| block.forward(t, b, f, &geom, 0));
    }
}

#[test]
fn gigp_end_to_end_including_anchors() {
    let c = cloud(GroupId::SO2, 9, 3);
    let mut store = ParamStore::new();
    let layer = GigpLayer::new(&mut store, "pool", &[0.4, 1.1, 2.0], 0.5, 3, &[6], true, 3).unwrap();
    let ids = layer.ids();
    store.get_mut(ids.alpha).data_mut()[0] = 0.8;
    store.get_mut(ids.w).data_mut().copy_from_slice(&[0.3, -1.2, 0.9]);
    store.get_mut(ids.c).data_mut()[0] = 1.3;
    let orbits = c.orbits();
    let feats = Tensor::matrix(9, 3, c.feature_matrix()).unwrap();
    check_model(&store, feats, |t, b, f| layer.forward(t, b, f, &orbits));
}

#[test]
fn corrupted_gradient_is_detected() {
    // d/dx sum(x²) = 2x; evaluating 2.02x instead must fail the check
    let x = random(&[4], 5);
    let analytic: Vec<Tensor> = vec![Tensor::new(vec![4], x.data().iter().map(|v| 2.02 * v).collect()).unwrap()];
    let numeric = gigp_core::nn::gradcheck::numeric_gradients(
        &|t: &mut Tape, v: &[Var]| {
            let s = t.square(v[0]);
            Ok(t.sum(s))
        },
        &[x],
        STEP,
    )
    .unwrap();
    let report = gigp_core::nn::gradcheck::compare(&["x".into()], &analytic, &numeric, STEP, 1e-4);
    assert!(!report.passed());
}
