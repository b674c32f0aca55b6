//! Self-contained property suites behind `grad-check` and `check-expressivity`.

use anyhow::Result;
use gigp_core::gigp::GigpLayer;
use gigp_core::lieconv::{ConvGeometry, ConvLayerConfig, ResidualBlock};
use gigp_core::nn::{grad_check, Bound, GradCheckReport, ParamStore, Tape, Tensor, Var};
use gigp_core::oracle::{random_invariant_table, set_partitions, tabulate, verify_expressivity, FiniteDomain};
use gigp_core::{lift, GroupId, RawPointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRAD_STEP: f64 = 1e-6;

fn random(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn project(tape: &mut Tape, v: Var) -> gigp_core::Result<Var> {
    let shape = tape.value(v).shape().to_vec();
    let w = tape.constant(random(&shape, 99));
    let p = tape.mul(v, w)?;
    Ok(tape.sum(p))
}

type Primitive = fn(&mut Tape, &[Var]) -> gigp_core::Result<Var>;

fn primitives() -> Vec<(&'static str, Vec<Vec<usize>>, Primitive)> {
    vec![
        ("matmul", vec![vec![3, 4], vec![4, 5]], |t, v| t.matmul(v[0], v[1])),
        ("add", vec![vec![3, 4], vec![3, 4]], |t, v| t.add(v[0], v[1])),
        ("sub", vec![vec![3, 4], vec![3, 4]], |t, v| t.sub(v[0], v[1])),
        ("mul", vec![vec![3, 4], vec![3, 4]], |t, v| t.mul(v[0], v[1])),
        ("add_row", vec![vec![3, 4], vec![1, 4]], |t, v| t.add_row(v[0], v[1])),
        ("scale", vec![vec![3, 4]], |t, v| Ok(t.scale(v[0], -1.7))),
        ("mul_scalar", vec![vec![3, 4], vec![1]], |t, v| t.mul_scalar(v[0], v[1])),
        ("swish", vec![vec![3, 4]], |t, v| Ok(t.swish(v[0]))),
        ("square", vec![vec![3, 4]], |t, v| Ok(t.square(v[0]))),
        ("softmax_rows", vec![vec![3, 4]], |t, v| Ok(t.softmax_rows(v[0]))),
        ("sum", vec![vec![3, 4]], |t, v| Ok(t.sum(v[0]))),
        ("mean", vec![vec![3, 4]], |t, v| Ok(t.mean(v[0]))),
        ("mean_rows", vec![vec![3, 4]], |t, v| Ok(t.mean_rows(v[0]))),
        ("transpose", vec![vec![3, 4]], |t, v| Ok(t.transpose(v[0]))),
        ("gather_rows", vec![vec![3, 4]], |t, v| t.gather_rows(v[0], &[2, 0, 2, 1])),
        ("concat_cols", vec![vec![3, 4], vec![3, 2]], |t, v| t.concat_cols(v[0], v[1])),
        ("append_ones_col", vec![vec![3, 4]], |t, v| Ok(t.append_ones_col(v[0]))),
        ("outer_sub", vec![vec![3, 1], vec![1, 4]], |t, v| Ok(t.outer_sub(v[0], v[1]))),
        ("pair_contract", vec![vec![6, 3], vec![6, 2]], |t, v| t.pair_contract(v[0], v[1], 3)),
        ("reshape", vec![vec![3, 4]], |t, v| t.reshape(v[0], &[2, 6])),
        ("softmax_cross_entropy", vec![vec![3, 4]], |t, v| t.softmax_cross_entropy(v[0], &[1, 3, 0])),
    ]
}

fn check_model(
    store: &ParamStore,
    extra: Tensor,
    tol: f64,
    f: impl Fn(&mut Tape, &Bound, Var) -> gigp_core::Result<Var>,
) -> Result<GradCheckReport> {
    let mut named: Vec<(String, Tensor)> = store.entries().iter().map(|e| (e.name.clone(), e.tensor.clone())).collect();
    named.push(("features".into(), extra));
    let p = store.len();
    Ok(grad_check(
        |t: &mut Tape, v: &[Var]| {
            let bound = Bound::from_vars(v[..p].to_vec());
            let out = f(t, &bound, v[p])?;
            project(t, out)
        },
        &named,
        GRAD_STEP,
        tol,
    )?)
}

fn test_cloud(group: GroupId, n: usize, d: usize) -> Result<gigp_core::LiftedCloud> {
    let dim = group.space_dim();
    let coords = random(&[n * dim], 17).into_data().iter().map(|x| 2.0 * x).collect();
    Ok(lift(&RawPointCloud::new(dim, coords, d, random(&[n * d], 18).into_data())?, group)?)
}

/// Gradient checks of every tape primitive, a residual conv block per group,
/// and the GIGP layer end to end with anchors treated as inputs.
pub fn grad_suite(tol: f64) -> Result<Vec<(String, GradCheckReport)>> {
    let mut out = Vec::new();
    for (name, shapes, f) in primitives() {
        let inputs: Vec<(String, Tensor)> = shapes.iter().enumerate().map(|(i, s)| (format!("x{i}"), random(s, i as u64 + 1))).collect();
        let report = grad_check(
            |t: &mut Tape, v: &[Var]| {
                let o = f(t, v)?;
                if t.value(o).len() == 1 {
                    Ok(o)
                } else {
                    project(t, o)
                }
            },
            &inputs,
            GRAD_STEP,
            tol,
        )?;
        out.push((name.to_string(), report));
    }

    for group in [GroupId::SO2, GroupId::SO3] {
        let c = test_cloud(group, 7, 3)?;
        let mut store = ParamStore::new();
        let mut cfg = ConvLayerConfig::new(3, 3, 4);
        cfg.kernel_hidden = vec![5];
        let block = ResidualBlock::new(&mut store, "b", cfg, group, 2)?;
        for (i, e) in store.entries().to_vec().iter().enumerate() {
            let id = store.find(&e.name).unwrap();
            store.set(id, random(e.tensor.shape(), 1000 + i as u64))?;
        }
        let geom = ConvGeometry::build(&c, 4, 1.0)?;
        let feats = Tensor::matrix(7, 3, c.feature_matrix())?;
        let report = check_model(&store, feats, tol, |t, b, f| block.forward(t, b, f, &geom, 0))?;
        out.push((format!("residual_block_{group}"), report));
    }

    let c = test_cloud(GroupId::SO2, 9, 3)?;
    let mut store = ParamStore::new();
    let layer = GigpLayer::new(&mut store, "pool", &[0.4, 1.1, 2.0], 0.5, 3, &[6], true, 3)?;
    let ids = layer.ids();
    store.get_mut(ids.alpha).data_mut()[0] = 0.8;
    store.get_mut(ids.w).data_mut().copy_from_slice(&[0.3, -1.2, 0.9]);
    store.get_mut(ids.c).data_mut()[0] = 1.3;
    let orbits = c.orbits();
    let feats = Tensor::matrix(9, 3, c.feature_matrix())?;
    let report = check_model(&store, feats, tol, |t, b, f| layer.forward(t, b, f, &orbits))?;
    out.push(("gigp_end_to_end".into(), report));
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExpressivitySummary {
    pub domains: usize,
    pub functions: usize,
    pub random_functions: usize,
    pub max_classes: usize,
    pub max_code_ln: f64,
    pub failures: Vec<String>,
}

impl ExpressivitySummary {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Every domain with at most `max_elems` elements, 3 values and 3 orbits; on
/// each, two structured invariant functions and `random_per_domain` random ones.
pub fn expressivity_suite(max_elems: usize, random_per_domain: usize, seed: u64) -> Result<ExpressivitySummary> {
    let mut s = ExpressivitySummary::default();
    for n in 1..=max_elems {
        for partition in set_partitions(n, 3) {
            for values in 1..=3 {
                let domain = FiniteDomain::new(n, values, partition.clone())?;
                s.domains += 1;
                let mut tables = vec![
                    tabulate(&domain, |a| domain.orbits[0].iter().filter(|&&x| a.0[x] == 0).count() as i64),
                    tabulate(&domain, |a| a.0.iter().map(|&v| v as i64 * v as i64).sum()),
                ];
                for r in 0..random_per_domain {
                    tables.push(random_invariant_table(&domain, seed ^ ((s.domains * 1000 + r) as u64), 1 << 20));
                    s.random_functions += 1;
                }
                for table in tables {
                    let report = verify_expressivity(&domain, &table)?;
                    s.functions += 1;
                    s.max_classes = s.max_classes.max(report.classes);
                    s.max_code_ln = s.max_code_ln.max(report.max_code_ln);
                    if !report.passed() {
                        s.failures.push(format!("{domain:?}: {report:?}"));
                    }
                }
            }
        }
    }
    Ok(s)
}
