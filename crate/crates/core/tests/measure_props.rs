mod oracle;

use oracle::{gaussian, rng};
use proptest::prelude::*;
use rglm::measure::{
    gen_bernoulli_mask_dataset, gen_entrywise_ops, gen_gaussian_ops, gen_ground_truth,
    gen_pairwise_ops, spikiness, standard_scale,
};
use rglm::{DenseMatrix, GlmFamily, MeasurementOp, TruthStyle};

fn mean_square_inner(ops: &[MeasurementOp], x: &DenseMatrix) -> f64 {
    ops.iter().map(|op| op.inner(x).powi(2)).sum::<f64>() / ops.len() as f64
}

#[test]
fn gaussian_entry_moments() {
    let mut g = rng(1);
    let ops = gen_gaussian_ops(2, 2, 100_000, &mut g).unwrap();
    for cell in 0..4 {
        let vals: Vec<f64> = ops
            .iter()
            .map(|op| op.to_dense(2, 2).as_slice()[cell])
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!(mean.abs() <= 0.01, "{mean}");
        assert!((var - 1.0).abs() <= 0.02, "{var}");
    }
}

#[test]
fn isotropy_identities() {
    let mut g = rng(2);
    let x = gaussian(5, 6, &mut g);
    let f2 = x.dot(&x);
    let n = 100_000;
    let gauss = mean_square_inner(&gen_gaussian_ops(5, 6, n, &mut g).unwrap(), &x);
    assert!((gauss / f2 - 1.0).abs() <= 0.03, "{gauss} vs {f2}");
    let entry = mean_square_inner(&gen_entrywise_ops(5, 6, n, &mut g).unwrap(), &x);
    assert!((entry / f2 - 1.0).abs() <= 0.03, "{entry} vs {f2}");

    let mut xc = x.clone();
    xc.center_rows();
    let f2c = xc.dot(&xc);
    let pair = mean_square_inner(&gen_pairwise_ops(5, 6, n, &mut g).unwrap(), &xc);
    assert!((pair / (2.0 * f2c) - 1.0).abs() <= 0.03, "{pair} vs {}", 2.0 * f2c);
}

#[test]
fn structured_inner_products() {
    let x = DenseMatrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64);
    let s = standard_scale(3, 4);
    let e = MeasurementOp::Entry { k: 1, l: 2, scale: s };
    assert_eq!(e.inner(&x), s * 6.0);
    let p = MeasurementOp::Pair { k: 2, l: 3, j: 0, scale: s };
    assert_eq!(p.inner(&x), s * 3.0);
    let constant_rows = DenseMatrix::from_fn(3, 4, |i, _| i as f64 + 0.5);
    let mut g = rng(3);
    for op in gen_pairwise_ops(3, 4, 200, &mut g).unwrap() {
        assert_eq!(op.inner(&constant_rows), 0.0);
    }
}

#[test]
fn entry_index_histogram() {
    let (d1, d2) = (3, 4);
    let n = 1_000_000;
    let mut g = rng(4);
    let mut counts = vec![0usize; d1 * d2];
    for op in gen_entrywise_ops(d1, d2, n, &mut g).unwrap() {
        if let MeasurementOp::Entry { k, l, .. } = op {
            counts[k * d2 + l] += 1;
        }
    }
    let p = 1.0 / (d1 * d2) as f64;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    for c in counts {
        assert!((c as f64 - n as f64 * p).abs() <= 4.0 * sd);
    }
}

#[test]
fn bernoulli_mask_counts() {
    let x = DenseMatrix::zeros(100, 100);
    let fam = GlmFamily::logistic();
    let mut total = 0.0;
    let mut ones = 0.0;
    for seed in 0..100 {
        let ds = gen_bernoulli_mask_dataset(&x, 0.5, fam, &mut rng(seed)).unwrap();
        let n = ds.len() as f64;
        assert!((n - 5000.0).abs() <= 200.0, "{n}");
        assert_eq!(ds.effective_n(), 5000.0);
        total += n;
        ones += ds.responses().iter().sum::<f64>();
    }
    assert!((ones / total - 0.5).abs() <= 0.02);

    let full = gen_bernoulli_mask_dataset(&x, 1.0, fam, &mut rng(0)).unwrap();
    assert_eq!(full.len(), 10_000);
    assert!(gen_bernoulli_mask_dataset(&x, 0.0, fam, &mut rng(0)).is_err());
    assert!(gen_bernoulli_mask_dataset(&x, 1.5, fam, &mut rng(0)).is_err());
}

#[test]
fn ground_truth_normalisation() {
    let mut g = rng(5);
    let t = gen_ground_truth(10, 8, 2, TruthStyle::UnitFro, &mut g).unwrap();
    assert!((t.x.fro_norm() - 1.0).abs() <= 1e-12);
    assert_eq!(t.rank, 2);
    let t = gen_ground_truth(10, 8, 3, TruthStyle::InfScaled(0.3), &mut g).unwrap();
    assert!((t.x.inf_norm() - 1.0 / 0.3).abs() <= 1e-12);
    let t = gen_ground_truth(2, 2, 1, TruthStyle::UnitFro, &mut g).unwrap();
    assert_eq!(rglm::linalg::numerical_rank(&t.x, rglm::linalg::RANK_TOL).unwrap(), 1);
    assert!((t.spikiness - spikiness(&t.x).unwrap()).abs() < 1e-15);
}

#[test]
fn spikiness_examples() {
    assert!((spikiness(&DenseMatrix::from_fn(3, 7, |_, _| 1.0)).unwrap() - 1.0).abs() < 1e-12);
    let e11 = DenseMatrix::from_fn(2, 2, |i, j| if i + j == 0 { 1.0 } else { 0.0 });
    assert_eq!(spikiness(&e11).unwrap(), 2.0);
    assert!(spikiness(&DenseMatrix::zeros(2, 2)).is_err());
}

#[test]
fn generators_are_deterministic() {
    let a = gen_gaussian_ops(3, 3, 20, &mut rng(9)).unwrap();
    let b = gen_gaussian_ops(3, 3, 20, &mut rng(9)).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        gen_entrywise_ops(4, 5, 50, &mut rng(9)).unwrap(),
        gen_entrywise_ops(4, 5, 50, &mut rng(9)).unwrap()
    );
    assert_eq!(
        gen_pairwise_ops(4, 5, 50, &mut rng(9)).unwrap(),
        gen_pairwise_ops(4, 5, 50, &mut rng(9)).unwrap()
    );
    let x = gaussian(6, 6, &mut rng(1));
    let fam = GlmFamily::logistic();
    let a = gen_bernoulli_mask_dataset(&x, 0.3, fam, &mut rng(9)).unwrap();
    let b = gen_bernoulli_mask_dataset(&x, 0.3, fam, &mut rng(9)).unwrap();
    assert_eq!(a.ops(), b.ops());
    assert_eq!(a.responses(), b.responses());
}

fn any_op(d1: usize, d2: usize) -> impl Strategy<Value = MeasurementOp> {
    let s = standard_scale(d1, d2);
    prop_oneof![
        prop::collection::vec(-3.0f64..3.0, d1 * d2).prop_map(move |v| MeasurementOp::Dense {
            a: DenseMatrix::from_row_major(d1, d2, v).unwrap()
        }),
        (0..d1, 0..d2).prop_map(move |(k, l)| MeasurementOp::Entry { k, l, scale: s }),
        (0..d1, 0..d2, 0..d2).prop_map(move |(k, l, j)| MeasurementOp::Pair { k, l, j, scale: s }),
        (0..d1, 0..d2, 0.1f64..3.0).prop_map(|(k, l, scale)| MeasurementOp::MaskedEntry { k, l, scale }),
    ]
}

fn mat(d1: usize, d2: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-5.0f64..5.0, d1 * d2)
        .prop_map(move |v| DenseMatrix::from_row_major(d1, d2, v).unwrap())
}

proptest! {
    #[test]
    fn inner_is_linear(op in any_op(3, 4), x in mat(3, 4), y in mat(3, 4), a in -4.0f64..4.0, b in -4.0f64..4.0) {
        let lhs = op.inner(&x.lincomb(a, &y, b));
        let rhs = a * op.inner(&x) + b * op.inner(&y);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()) * 10.0);
    }

    #[test]
    fn accumulate_is_adjoint_of_inner(
        ops in prop::collection::vec(any_op(3, 4), 1..20),
        w in prop::collection::vec(-2.0f64..2.0, 20),
        d in mat(3, 4),
    ) {
        let mut g = DenseMatrix::zeros(3, 4);
        for (op, wi) in ops.iter().zip(&w) {
            op.accumulate_into(*wi, &mut g);
        }
        let direct: f64 = ops.iter().zip(&w).map(|(op, wi)| wi * op.inner(&d)).sum();
        prop_assert!((g.dot(&d) - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
        for op in &ops {
            prop_assert!((op.to_dense(3, 4).dot(&d) - op.inner(&d)).abs() <= 1e-10 * (1.0 + d.fro_norm()));
        }
    }

    #[test]
    fn spikiness_in_range(x in mat(4, 6)) {
        prop_assume!(x.fro_norm() > 0.0);
        let s = spikiness(&x).unwrap();
        prop_assert!(s >= 1.0 - 1e-12 && s <= standard_scale(4, 6) + 1e-12);
    }
}
