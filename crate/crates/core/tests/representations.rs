mod common;

use common::*;
use nalgebra::DMatrix;
use rand::Rng;
use shape_metrics::representations::{
    center_columns, circular_shift, match_dimensions, partial_whiten, reshape_flat, reshape_strict, FeatureWarning,
};
use shape_metrics::{ConvRepresentation, DimPolicy, Error, RepresentationMatrix};

#[test]
fn center_two_rows() {
    let x = RepresentationMatrix::from_row_slice(2, 1, &[1.0, 3.0]).unwrap();
    assert_eq!(center_columns(&x).data().as_slice(), &[-1.0, 1.0]);
}

#[test]
fn center_is_idempotent() {
    let mut r = rng(1);
    let x = center_columns(&random_rep(&mut r, 7, 3));
    let again = center_columns(&x);
    assert!((x.data() - again.data()).amax() < 1e-12);
}

#[test]
fn centered_column_sums_vanish() {
    let mut r = rng(2);
    let x = center_columns(&random_rep(&mut r, 5, 3));
    for j in 0..3 {
        let s: f64 = x.data().column(j).iter().sum();
        assert!(s.abs() < 1e-10, "column {j} sums to {s}");
    }
}

#[test]
fn non_finite_input_rejected() {
    let err = RepresentationMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]).unwrap_err();
    assert!(matches!(err, Error::InvalidInput(_)));
}

#[test]
fn normalize_gives_unit_norm() {
    let mut r = rng(3);
    let x = random_rep(&mut r, 9, 4).normalize_frobenius().unwrap();
    assert!((x.frobenius_norm() - 1.0).abs() < 1e-12);
}

#[test]
fn whiten_alpha_one_is_centering() {
    let mut r = rng(4);
    let x = random_rep(&mut r, 6, 3);
    let w = partial_whiten(&x, 1.0).unwrap();
    assert_eq!(w.rep.data(), center_columns(&x).data());
    assert!(w.warning.is_none());
}

#[test]
fn whiten_alpha_zero_gives_identity_covariance() {
    let mut r = rng(5);
    let x = random_rep(&mut r, 6, 3);
    let w = partial_whiten(&x, 0.0).unwrap().rep;
    let cov = cross(w.data(), w.data());
    assert!((cov - DMatrix::identity(3, 3)).amax() < 1e-8);
}

#[test]
fn whiten_half_matches_jacobi_construction() {
    let mut r = rng(6);
    let x = random_rep(&mut r, 6, 3);
    let c = centered(x.data());
    let cov = cross(&c, &c);
    let expected = &c * (DMatrix::identity(3, 3) * 0.5 + sym_power(&cov, -0.5) * 0.5);
    let got = partial_whiten(&x, 0.5).unwrap().rep;
    assert!((got.data() - expected).amax() < 1e-10);
}

#[test]
fn whiten_rejects_bad_alpha() {
    let mut r = rng(7);
    let x = random_rep(&mut r, 6, 3);
    assert!(matches!(partial_whiten(&x, 1.5), Err(Error::Parameter(_))));
    assert!(matches!(partial_whiten(&x, -0.1), Err(Error::Parameter(_))));
}

#[test]
fn whiten_rank_deficient_warns() {
    let mut r = rng(8);
    let base = normal_matrix(&mut r, 10, 2);
    let x = DMatrix::from_fn(10, 3, |i, j| {
        if j < 2 {
            base[(i, j)]
        } else {
            base[(i, 0)] + base[(i, 1)]
        }
    });
    let w = partial_whiten(&RepresentationMatrix::new(x).unwrap(), 0.0).unwrap();
    assert!(matches!(
        w.warning,
        Some(FeatureWarning::RankDeficient { rank: 2, dim: 3 })
    ));
    assert!(w.rep.data().iter().all(|v| v.is_finite()));
}

#[test]
fn require_equal_keeps_input() {
    let mut r = rng(9);
    let reps = vec![random_rep(&mut r, 5, 4), random_rep(&mut r, 5, 4)];
    let out = match_dimensions(&reps, DimPolicy::RequireEqual).unwrap();
    assert_eq!(out, reps);
}

#[test]
fn require_equal_rejects_mismatch() {
    let mut r = rng(10);
    let reps = vec![random_rep(&mut r, 5, 3), random_rep(&mut r, 5, 4)];
    assert!(matches!(
        match_dimensions(&reps, DimPolicy::RequireEqual),
        Err(Error::Shape(_))
    ));
    let reps = vec![random_rep(&mut r, 5, 3), random_rep(&mut r, 6, 3)];
    assert!(matches!(
        match_dimensions(&reps, DimPolicy::ZeroPad),
        Err(Error::Shape(_))
    ));
}

#[test]
fn zero_pad_appends_zero_columns() {
    let mut r = rng(11);
    let reps = vec![random_rep(&mut r, 4, 3), random_rep(&mut r, 4, 5)];
    let out = match_dimensions(&reps, DimPolicy::ZeroPad).unwrap();
    assert!(out.iter().all(|x| x.n() == 5));
    assert!(out[0].data().columns(3, 2).iter().all(|&v| v == 0.0));
    assert_eq!(out[0].data().columns(0, 3), reps[0].data().columns(0, 3));
}

#[test]
fn pca_keeps_rank_two_data() {
    let mut r = rng(12);
    let x = normal_matrix(&mut r, 10, 2) * normal_matrix(&mut r, 2, 4);
    let rep = RepresentationMatrix::new(x.clone()).unwrap();
    let out = match_dimensions(&[rep], DimPolicy::Pca { dim: 2 }).unwrap();
    // projected data keeps every pairwise row distance, so X·VVᵀ reconstructs X
    let gram_in = &x * x.transpose();
    let gram_out = out[0].data() * out[0].data().transpose();
    assert!((gram_in - gram_out).norm() < 1e-8);
}

#[test]
fn pca_target_too_large() {
    let mut r = rng(13);
    let reps = vec![random_rep(&mut r, 5, 3), random_rep(&mut r, 5, 6)];
    assert!(matches!(
        match_dimensions(&reps, DimPolicy::Pca { dim: 4 }),
        Err(Error::Parameter(_))
    ));
}

fn tensor(values: &[f64], shape: [usize; 4]) -> ConvRepresentation {
    ConvRepresentation::new(values.to_vec(), shape).unwrap()
}

#[test]
fn strict_single_entry() {
    let t = tensor(&[7.0], [1, 1, 1, 1]);
    assert_eq!(reshape_strict(&t).data().as_slice(), &[7.0]);
}

#[test]
fn strict_row_order() {
    let t = tensor(&[1.0, 2.0, 3.0, 4.0], [1, 2, 2, 1]);
    let s = reshape_strict(&t);
    assert_eq!(s.data().shape(), (4, 1));
    assert_eq!(s.data().as_slice(), &[1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn strict_index_arithmetic() {
    let mut r = rng(14);
    let t = random_tensor(&mut r, [2, 3, 4, 5]);
    let s = reshape_strict(&t);
    for _ in 0..50 {
        let (i, y, x, ch) = (
            r.random_range(0..2),
            r.random_range(0..3),
            r.random_range(0..4),
            r.random_range(0..5),
        );
        assert_eq!(s.data()[((i * 3 + y) * 4 + x, ch)], t.get(i, y, x, ch));
    }
    let back = ConvRepresentation::from_strict(s.data(), 2, 3, 4).unwrap();
    assert_eq!(back.as_slice(), t.as_slice());
}

#[test]
fn flat_layout_and_round_trip() {
    let t = tensor(&[1.0, 2.0, 3.0, 4.0], [1, 2, 2, 1]);
    let f = reshape_flat(&t);
    assert_eq!(f.data().shape(), (1, 4));
    assert_eq!(f.data().as_slice(), &[1.0, 2.0, 3.0, 4.0]);
    let one = tensor(&[2.5], [1, 1, 1, 1]);
    assert_eq!(reshape_flat(&one).data().as_slice(), &[2.5]);

    let mut r = rng(15);
    let t = random_tensor(&mut r, [3, 2, 4, 2]);
    let f = reshape_flat(&t);
    assert_eq!(f.data()[(1, (4 + 3) * 2 + 1)], t.get(1, 1, 3, 1));
    let back = ConvRepresentation::from_flat(f.data(), 2, 4, 2).unwrap();
    assert_eq!(back.as_slice(), t.as_slice());
}

#[test]
fn shift_identities() {
    let mut r = rng(16);
    let t = random_tensor(&mut r, [2, 3, 4, 2]);
    assert_eq!(circular_shift(&t, 0, 0).as_slice(), t.as_slice());
    assert_eq!(circular_shift(&t, 3, 4).as_slice(), t.as_slice());
    assert_eq!(circular_shift(&circular_shift(&t, 1, 0), 2, 0).as_slice(), t.as_slice());
    assert_eq!(
        circular_shift(&t, -1, 5).as_slice(),
        circular_shift(&t, 2, 1).as_slice()
    );
}

#[test]
fn shift_moves_entries() {
    let mut r = rng(17);
    let t = random_tensor(&mut r, [1, 3, 4, 2]);
    let s = circular_shift(&t, 1, 2);
    for y in 0..3 {
        for x in 0..4 {
            for ch in 0..2 {
                assert_eq!(s.get(0, y, x, ch), t.get(0, (y + 2) % 3, (x + 2) % 4, ch));
            }
        }
    }
}

#[test]
fn tensor_validation() {
    assert!(ConvRepresentation::new(vec![1.0; 5], [1, 2, 2, 1]).is_err());
    assert!(ConvRepresentation::new(vec![], [0, 1, 1, 1]).is_err());
    assert!(ConvRepresentation::new(vec![f64::INFINITY], [1, 1, 1, 1]).is_err());
}
