mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use tcpr_core::{
    cp_contract_predictor, generalized_inner, interaction_matrix, matricize, normalize, outer_product, truncate,
    CpTensor, DenseTensor, Matrix, ModeSplit, TensorError,
};

#[test]
fn outer_product_hand_example() {
    let t = outer_product(&[&[1.0, 2.0][..], &[3.0, 4.0][..]]).unwrap();
    // column-major [[3,4],[6,8]]
    assert_eq!(t.data(), &[3.0, 6.0, 4.0, 8.0]);
    let s = outer_product(&[&[2.0][..], &[3.0][..], &[4.0][..]]).unwrap();
    assert_eq!(s.dims(), &[1, 1, 1]);
    assert_eq!(s.data(), &[24.0]);
}

#[test]
fn outer_product_matches_oracle() {
    let mut g = rng(1);
    for _ in 0..200 {
        let order = g.random_range(1..=4);
        let dims = rand_dims(&mut g, order, 4);
        let vs: Vec<Vec<f64>> = dims.iter().map(|&p| gauss_vec(&mut g, p)).collect();
        let refs: Vec<&[f64]> = vs.iter().map(Vec::as_slice).collect();
        let t = outer_product(&refs).unwrap();
        assert_eq!(t.dims(), dims.as_slice());
        assert!(max_abs_diff(t.data(), &outer_oracle(&vs)) < 1e-12);
    }
}

#[test]
fn mode_product_matches_triple_loop() {
    let mut g = rng(2);
    let t = rand_tensor(&mut g, &[2, 3, 2]);
    let m = rand_matrix(&mut g, 4, 3);
    let got = t.mode_product(&m, 1).unwrap();
    assert_eq!(got.dims(), &[2, 4, 2]);
    assert!(max_abs_diff(got.data(), &mode_multiply_oracle(&t, &m, 1)) < 1e-12);
}

#[test]
fn mode_product_shape_mismatch() {
    let t = DenseTensor::<f64>::zeros(vec![2, 3]).unwrap();
    let m = Matrix::zeros(2, 2);
    assert!(matches!(t.mode_product(&m, 1), Err(TensorError::Shape(_))));
}

#[test]
fn generalized_inner_reduces_to_matvec() {
    let mut g = rng(3);
    let b = rand_tensor(&mut g, &[3, 4]);
    let x = rand_tensor(&mut g, &[4]);
    let mat = Matrix::from_col_major(3, 4, b.data().to_vec()).unwrap();
    let got = generalized_inner(&b, &x).unwrap();
    assert!(max_abs_diff(got.data(), &mat.matvec(x.data()).unwrap()) < 1e-12);
    let zero = DenseTensor::zeros(vec![4]).unwrap();
    assert!(generalized_inner(&b, &zero).unwrap().data().iter().all(|&v| v == 0.0));
}

#[test]
fn generalized_inner_is_matricized_product() {
    let mut g = rng(4);
    let b = rand_tensor(&mut g, &[2, 2, 3, 3]);
    let x = rand_tensor(&mut g, &[3, 3]);
    let got = generalized_inner(&b, &x).unwrap();
    let via = matricize(&b, 2).unwrap().matvec(x.data()).unwrap();
    assert_eq!(got.dims(), &[2, 2]);
    assert!(max_abs_diff(got.data(), &via) < 1e-12);
    assert!(max_abs_diff(got.data(), &inner_oracle(&b, &x)) < 1e-12);
}

#[test]
fn generalized_inner_rejects_trailing_mismatch() {
    let b = DenseTensor::<f64>::zeros(vec![2, 3]).unwrap();
    let x = DenseTensor::zeros(vec![2]).unwrap();
    assert!(matches!(generalized_inner(&b, &x), Err(TensorError::Shape(_))));
}

#[test]
fn matricize_columns_are_mode_one_fibers() {
    let mut g = rng(5);
    let t = rand_tensor(&mut g, &[2, 3, 4]);
    let m = matricize(&t, 1).unwrap();
    assert_eq!((m.rows(), m.cols()), (2, 12));
    for j in multi_indices(&[3, 4]) {
        let col = offset(&[3, 4], &j);
        for i in 0..2 {
            assert_eq!(m[(i, col)], t.get(&[i, j[0], j[1]]));
        }
    }
    assert!(matches!(matricize(&t, 0), Err(TensorError::Argument(_))));
    assert!(matches!(matricize(&t, 3), Err(TensorError::Argument(_))));
}

#[test]
fn reconstruct_examples() {
    let e = |p: usize| {
        let mut v = vec![0.0; p];
        v[0] = 1.0;
        Matrix::from_col_major(p, 1, v).unwrap()
    };
    let c = CpTensor::new(vec![2.0], vec![e(2), e(3)]).unwrap();
    let t = c.reconstruct();
    assert_eq!(t.get(&[0, 0]), 2.0);
    assert_eq!(t.data().iter().filter(|&&v| v != 0.0).count(), 1);

    let mut g = rng(6);
    for _ in 0..50 {
        let dims = rand_dims(&mut g, 3, 4);
        let rank = g.random_range(1..=3);
        let c = rand_cp(&mut g, &dims, rank);
        assert!(max_abs_diff(c.reconstruct().data(), reconstruct_oracle(&c).data()) < 1e-12);
    }
}

#[test]
fn contract_predictor_examples() {
    let mut g = rng(7);
    let split = ModeSplit::new(vec![2, 3], vec![3]).unwrap();
    let c = rand_cp(&mut g, &split.dims(), 1);
    let zero = DenseTensor::zeros(vec![3]).unwrap();
    let (pred, f) = cp_contract_predictor(&c, &split, &zero).unwrap();
    assert!(pred.data().iter().all(|&v| v == 0.0) && f == vec![0.0]);
    let x = DenseTensor::new(vec![3], c.loading(0, 2).to_vec()).unwrap();
    let (_, f) = cp_contract_predictor(&c, &split, &x).unwrap();
    assert!((f[0] - 1.0).abs() < 1e-12);
    let wrong = DenseTensor::zeros(vec![2]).unwrap();
    assert!(matches!(cp_contract_predictor(&c, &split, &wrong), Err(TensorError::Shape(_))));
}

#[test]
fn normalize_and_truncate_examples() {
    assert_eq!(normalize(&[3.0, 4.0]).unwrap(), vec![0.6, 0.8]);
    assert_eq!(normalize(&[0.0, -2.0, 0.0]).unwrap(), vec![0.0, -1.0, 0.0]);
    assert_eq!(normalize(&[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
    assert!(matches!(normalize(&[0.0f64, 0.0]), Err(TensorError::DegenerateDirection)));

    assert_eq!(truncate(&[0.5, -0.8, 0.3], 2), vec![0.5, -0.8, 0.0]);
    assert_eq!(truncate(&[1.0, 1.0, 1.0], 1), vec![1.0, 0.0, 0.0]);
    assert_eq!(truncate(&[1.0, -2.0], 2), vec![1.0, -2.0]);
}

#[test]
fn interaction_matrix_is_outer_product() {
    let mut g = rng(8);
    let c = rand_cp(&mut g, &[3, 4, 2], 2);
    let m = interaction_matrix(&c, 1, 0, 1).unwrap();
    let o = outer_product(&[c.loading(1, 0), c.loading(1, 1)]).unwrap();
    assert_eq!(m.as_slice(), o.data());
    assert!(matches!(interaction_matrix(&c, 0, 1, 1), Err(TensorError::Argument(_))));
}

#[test]
fn reconstruct_norm_is_bounded_by_weight_sum() {
    let mut g = rng(9);
    for _ in 0..100 {
        let dims = rand_dims(&mut g, 4, 4);
        let rank = g.random_range(1..=3);
        let c = rand_cp(&mut g, &dims, rank);
        let bound: f64 = c.weights().iter().sum();
        assert!(c.reconstruct().frobenius_norm() <= bound * (1.0 + 1e-12));
    }
}

fn small_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1..12)
}

proptest! {
    #[test]
    fn truncate_is_idempotent_with_bounded_support(v in small_vec(), s in 1usize..12) {
        let once = truncate(&v, s);
        prop_assert!(once.iter().filter(|&&x| x != 0.0).count() <= s);
        prop_assert_eq!(truncate(&once, s), once);
    }

    #[test]
    fn matricize_round_trips(seed in any::<u64>(), order in 2usize..5) {
        let mut g = rng(seed);
        let dims = rand_dims(&mut g, order, 4);
        let t = rand_tensor(&mut g, &dims);
        let split = g.random_range(1..order);
        let m = matricize(&t, split).unwrap();
        let back = DenseTensor::new(dims, m.into_vec()).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn generalized_inner_is_bilinear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut g = rng(seed);
        let lead = rand_dims(&mut g, 2, 3);
        let tail = rand_dims(&mut g, 2, 3);
        let full: Vec<usize> = lead.iter().chain(&tail).copied().collect();
        let (b1, b2) = (rand_tensor(&mut g, &full), rand_tensor(&mut g, &full));
        let (x1, x2) = (rand_tensor(&mut g, &tail), rand_tensor(&mut g, &tail));
        let combo = |u: &DenseTensor<f64>, v: &DenseTensor<f64>| {
            let mut w = u.clone();
            w.scale(a);
            w.add_scaled(b, v).unwrap();
            w
        };
        let inner = |bb: &DenseTensor<f64>, xx: &DenseTensor<f64>| generalized_inner(bb, xx).unwrap();
        let lhs = inner(&b1, &combo(&x1, &x2));
        let rhs = combo(&inner(&b1, &x1), &inner(&b1, &x2));
        let scale = 1.0 + rhs.frobenius_norm();
        prop_assert!(max_abs_diff(lhs.data(), rhs.data()) <= 1e-12 * scale);
        let lhs = inner(&combo(&b1, &b2), &x1);
        let rhs = combo(&inner(&b1, &x1), &inner(&b2, &x1));
        let scale = 1.0 + rhs.frobenius_norm();
        prop_assert!(max_abs_diff(lhs.data(), rhs.data()) <= 1e-12 * scale);
    }

    #[test]
    fn contract_predictor_matches_dense(seed in any::<u64>()) {
        let mut g = rng(seed);
        let m = g.random_range(1..=2);
        let n = g.random_range(1..=2);
        let split = ModeSplit::new(rand_dims(&mut g, m, 4), rand_dims(&mut g, n, 4)).unwrap();
        let rank = g.random_range(1..=3);
        let c = rand_cp(&mut g, &split.dims(), rank);
        let x = rand_tensor(&mut g, split.predictor_dims());
        let (pred, f) = cp_contract_predictor(&c, &split, &x).unwrap();
        prop_assert!(max_abs_diff(pred.data(), &inner_oracle(&reconstruct_oracle(&c), &x)) < 1e-10);
        prop_assert!(max_abs_diff(&f, &factor_oracle(&c, m, &x)) < 1e-10);
    }
}
