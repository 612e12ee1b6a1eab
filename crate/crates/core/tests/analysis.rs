mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use shape_metrics::analysis::{
    convergence_curve, fit_regressor, pca_project, ward_cluster, ConvergenceOptions, HyperGrid, RegressionModel,
    RegressorKind, Split,
};
use shape_metrics::{DistanceMatrix, Error, Measure, MetricSpec};

fn random_distances(r: &mut rand_chacha::ChaCha8Rng, k: usize) -> DistanceMatrix {
    let points = normal_matrix(r, k, 3);
    DistanceMatrix::new(euclidean_distances(&points), vec![], "euclidean").unwrap()
}

#[test]
fn ward_two_items() {
    let d = DistanceMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 2.5, 2.5, 0.0]), vec![], "x").unwrap();
    let tree = ward_cluster(&d).unwrap();
    assert_eq!(tree.merges.len(), 1);
    let m = tree.merges[0];
    assert_eq!((m.cluster_a, m.cluster_b, m.height, m.size), (0, 1, 2.5, 2));
    assert_eq!(tree.leaf_labels, vec!["0", "1"]);
}

#[test]
fn ward_separated_groups_merge_internally_first() {
    let mut values = DMatrix::from_element(6, 6, 10.0);
    for i in 0..6 {
        for j in 0..6 {
            if i == j {
                values[(i, j)] = 0.0;
            } else if (i < 3) == (j < 3) {
                values[(i, j)] = 1.0 + 0.01 * (i + j) as f64;
            }
        }
    }
    let tree = ward_cluster(&DistanceMatrix::new(values, vec![], "x").unwrap()).unwrap();
    let groups = |id: usize| {
        if id < 3 {
            0
        } else if id < 6 {
            1
        } else {
            2
        }
    };
    for m in &tree.merges[..2] {
        if m.cluster_a < 6 && m.cluster_b < 6 {
            assert_eq!(groups(m.cluster_a), groups(m.cluster_b));
        }
    }
    assert_eq!(tree.merges.last().unwrap().size, 6);
}

fn members(tree: &shape_metrics::analysis::Dendrogram, k: usize) -> Vec<Vec<usize>> {
    let mut sets: Vec<Vec<usize>> = (0..k).map(|i| vec![i]).collect();
    for m in &tree.merges {
        let mut s = sets[m.cluster_a].clone();
        s.extend(&sets[m.cluster_b]);
        s.sort_unstable();
        sets.push(s);
    }
    sets.split_off(k)
}

#[test]
fn ward_matches_naive_agglomeration() {
    let mut r = rng(90);
    for _ in 0..10 {
        let d = random_distances(&mut r, 6);
        let tree = ward_cluster(&d).unwrap();
        let naive = naive_ward(d.values());
        let sets = members(&tree, 6);
        assert_eq!(sets.len(), naive.len());
        for ((set, merge), (expected_set, expected_height)) in sets.iter().zip(&tree.merges).zip(&naive) {
            assert_eq!(set, expected_set);
            assert!((merge.height - expected_height).abs() < 1e-10);
        }
        assert!(tree.merges.windows(2).all(|w| w[1].height >= w[0].height - 1e-12));
    }
}

#[test]
fn ward_needs_two_items() {
    let d = DistanceMatrix::new(DMatrix::zeros(1, 1), vec![], "x").unwrap();
    assert!(matches!(ward_cluster(&d), Err(Error::Parameter(_))));
}

#[test]
fn pca_single_direction() {
    let mut r = rng(91);
    let u = normal_matrix(&mut r, 12, 1);
    let v = normal_matrix(&mut r, 1, 4);
    let p = pca_project(&(u * v), 1).unwrap();
    assert!((p.explained[0] - 1.0).abs() < 1e-10);
}

#[test]
fn pca_full_rank_is_isometry() {
    let mut r = rng(92);
    let z = normal_matrix(&mut r, 15, 4);
    let p = pca_project(&z, 4).unwrap();
    assert!((euclidean_distances(&z) - euclidean_distances(&p.scores)).amax() < 1e-8);
    assert!(p.explained.iter().sum::<f64>() <= 1.0 + 1e-12);
}

#[test]
fn pca_explained_matches_jacobi() {
    let mut r = rng(93);
    let z = normal_matrix(&mut r, 20, 5);
    let sv = jacobi_singular_values(&centered(&z));
    let total: f64 = sv.iter().map(|s| s * s).sum();
    let p = pca_project(&z, 3).unwrap();
    for (k, e) in p.explained.iter().enumerate() {
        assert!((e - sv[k] * sv[k] / total).abs() < 1e-10);
    }
    assert!(matches!(pca_project(&z, 6), Err(Error::Parameter(_))));
    assert!(matches!(pca_project(&z, 0), Err(Error::Parameter(_))));
}

#[test]
fn ridge_on_realizable_target() {
    let mut r = rng(94);
    let z = normal_matrix(&mut r, 40, 3);
    let w = DVector::from_vec(vec![1.5, -2.0, 0.25]);
    let y = &z * w + DVector::from_element(40, 4.0);
    let report = fit_regressor(
        &z,
        &y,
        RegressorKind::Ridge,
        &HyperGrid::fixed(1e-8, None),
        &Split::default(),
        3,
    )
    .unwrap();
    assert!(report.test_r2 > 0.999);
}

#[test]
fn noise_targets_do_not_generalize() {
    let mut r = rng(95);
    let mut total = 0.0;
    for seed in 0..20 {
        let z = normal_matrix(&mut r, 40, 3);
        let y = DVector::from_fn(40, |_, _| r.random::<f64>());
        let report = fit_regressor(
            &z,
            &y,
            RegressorKind::Ridge,
            &HyperGrid::default(),
            &Split::default(),
            seed,
        )
        .unwrap();
        total += report.test_r2;
    }
    assert!(total / 20.0 <= 0.1, "mean R² {}", total / 20.0);
}

#[test]
fn kernel_ridge_matches_direct_solve() {
    let mut r = rng(96);
    let x = normal_matrix(&mut r, 10, 2);
    let y = DVector::from_fn(10, |i, _| x[(i, 0)].sin() + x[(i, 1)]);
    let (ridge, bw) = (0.1, 0.8);
    let model = RegressionModel::fit(&x, &y, RegressorKind::KernelRidgeRbf, ridge, Some(bw)).unwrap();

    let gram = DMatrix::from_fn(10, 10, |i, j| {
        let sq: f64 = (0..2).map(|c| (x[(i, c)] - x[(j, c)]).powi(2)).sum();
        (-sq / (2.0 * bw * bw)).exp()
    });
    let mean = y.mean();
    let centered_y: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let dual = gauss_solve(&(&gram + DMatrix::identity(10, 10) * ridge), &centered_y);
    let queries = normal_matrix(&mut r, 5, 2);
    let pred = model.predict(&queries);
    for q in 0..5 {
        let expected: f64 = (0..10)
            .map(|i| {
                let sq: f64 = (0..2).map(|c| (queries[(q, c)] - x[(i, c)]).powi(2)).sum();
                (-sq / (2.0 * bw * bw)).exp() * dual[i]
            })
            .sum::<f64>()
            + mean;
        assert!((pred[q] - expected).abs() < 1e-8);
    }
}

#[test]
fn regression_is_reproducible() {
    let mut r = rng(97);
    let z = normal_matrix(&mut r, 30, 3);
    let y = DVector::from_fn(30, |i, _| z[(i, 0)] * z[(i, 1)]);
    let split = Split {
        train: 0.6,
        val: 0.2,
        test: 0.2,
    };
    let a = fit_regressor(&z, &y, RegressorKind::KernelRidgeRbf, &HyperGrid::default(), &split, 8).unwrap();
    let b = fit_regressor(&z, &y, RegressorKind::KernelRidgeRbf, &HyperGrid::default(), &split, 8).unwrap();
    assert_eq!(a.model.predict(&z), b.model.predict(&z));
    assert!(a.model.predict(&z).iter().all(|v| v.is_finite()));
}

#[test]
fn regression_preconditions() {
    let mut r = rng(98);
    let z = normal_matrix(&mut r, 10, 2);
    let flat = DVector::from_element(10, 2.0);
    let err = fit_regressor(
        &z,
        &flat,
        RegressorKind::Ridge,
        &HyperGrid::default(),
        &Split::default(),
        0,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Degenerate(_)));
    let y = DVector::from_fn(10, |i, _| i as f64);
    let uneven = Split {
        train: 0.7,
        val: 0.2,
        test: 0.2,
    };
    assert!(matches!(
        fit_regressor(&z, &y, RegressorKind::Ridge, &HyperGrid::default(), &uneven, 0),
        Err(Error::Parameter(_))
    ));
}

#[test]
fn convergence_full_sample_has_no_spread() {
    let mut r = rng(99);
    let a = random_rep(&mut r, 40, 3);
    let b = random_rep(&mut r, 40, 3);
    let measure = Measure::Shape(MetricSpec::cca(0.0));
    let curve = convergence_curve(&a, &b, &measure, &ConvergenceOptions::new(vec![40], 5, 1)).unwrap();
    let full = measure.distance(&a, &b).unwrap();
    assert!(curve.records.iter().all(|rec| rec.distance == full));
    let s = curve.summary[0];
    assert_eq!((s.mean, s.p10, s.p90), (full, full, full));
}

#[test]
fn convergence_bands_shrink_on_random_data() {
    let mut r = rng(100);
    let a = random_rep(&mut r, 400, 4);
    let b = random_rep(&mut r, 400, 4);
    let opts = ConvergenceOptions::new(vec![20, 80, 320], 20, 2);
    let curve = convergence_curve(&a, &b, &Measure::Shape(MetricSpec::procrustes_angular()), &opts).unwrap();
    let bands: Vec<f64> = curve.summary.iter().map(|s| s.band()).collect();
    assert!(bands.windows(2).all(|w| w[1] < w[0]), "{bands:?}");
}

#[test]
fn convergence_writes_csv() {
    let mut r = rng(101);
    let a = random_rep(&mut r, 20, 2);
    let b = random_rep(&mut r, 20, 2);
    let curve = convergence_curve(&a, &b, &Measure::Cka, &ConvergenceOptions::new(vec![5, 10], 2, 0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    curve.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "m,repeat,distance");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("5,0,"));
}
