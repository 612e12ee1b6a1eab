use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorKind {
    Ridge,
    KernelRidgeRbf,
}

/// Candidate hyperparameters. An empty bandwidth list means the median
/// pairwise training distance times `{0.25, 0.5, 1, 2, 4}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub ridge: Vec<f64>,
    #[serde(default)]
    pub bandwidth: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            ridge: (-4..=2).map(|e| 10f64.powi(e)).collect(),
            bandwidth: Vec::new(),
        }
    }
}

impl HyperGrid {
    pub fn fixed(ridge: f64, bandwidth: Option<f64>) -> Self {
        HyperGrid {
            ridge: vec![ridge],
            bandwidth: bandwidth.into_iter().collect(),
        }
    }
}

const BANDWIDTH_SCALES: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

/// Train/validation/test fractions; they must sum to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for Split {
    fn default() -> Self {
        Split {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

/// A fitted ridge or RBF kernel ridge regressor. Targets are mean-centered
/// on the training set; the mean is added back as intercept.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionModel {
    pub kind: RegressorKind,
    pub ridge: f64,
    pub bandwidth: Option<f64>,
    /// Primal weights (ridge) or dual coefficients (kernel ridge).
    pub weights: DVector<f64>,
    pub intercept: f64,
    support: DMatrix<f64>,
}

impl RegressionModel {
    pub fn fit(
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        kind: RegressorKind,
        ridge: f64,
        bandwidth: Option<f64>,
    ) -> Result<Self> {
        if !(ridge > 0.0 && ridge.is_finite()) {
            return Err(Error::Parameter(format!("ridge must be positive, got {ridge}")));
        }
        let y_mean = y.mean();
        let yc = y.add_scalar(-y_mean);
        match kind {
            RegressorKind::Ridge => {
                let mean = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.mean()));
                let xc = linalg::center_columns(x);
                let mut gram = xc.transpose() * &xc;
                for i in 0..gram.nrows() {
                    gram[(i, i)] += ridge;
                }
                let weights = cholesky_solve(gram, &(xc.transpose() * yc))?;
                let intercept = y_mean - mean.dot(&weights);
                Ok(RegressionModel {
                    kind,
                    ridge,
                    bandwidth: None,
                    weights,
                    intercept,
                    support: DMatrix::zeros(0, x.ncols()),
                })
            }
            RegressorKind::KernelRidgeRbf => {
                let bw = bandwidth
                    .filter(|b| *b > 0.0 && b.is_finite())
                    .ok_or_else(|| Error::Parameter("RBF bandwidth must be positive".into()))?;
                let mut k = rbf(x, x, bw);
                for i in 0..k.nrows() {
                    k[(i, i)] += ridge;
                }
                let weights = cholesky_solve(k, &yc)?;
                Ok(RegressionModel {
                    kind,
                    ridge,
                    bandwidth: Some(bw),
                    weights,
                    intercept: y_mean,
                    support: x.clone(),
                })
            }
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        match self.kind {
            RegressorKind::Ridge => (x * &self.weights).add_scalar(self.intercept),
            RegressorKind::KernelRidgeRbf => {
                let bw = self.bandwidth.expect("kernel model has a bandwidth");
                (rbf(x, &self.support, bw) * &self.weights).add_scalar(self.intercept)
            }
        }
    }
}

fn cholesky_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    Cholesky::new(a)
        .map(|c| c.solve(b))
        .ok_or_else(|| Error::Numerical("regularized system is not positive definite".into()))
}

fn rbf(a: &DMatrix<f64>, b: &DMatrix<f64>, bandwidth: f64) -> DMatrix<f64> {
    let denom = 2.0 * bandwidth * bandwidth;
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        let sq = (a.row(i) - b.row(j)).norm_squared();
        (-sq / denom).exp()
    })
}

/// Coefficient of determination; fails when the targets have no variance.
pub fn r_squared(truth: &DVector<f64>, pred: &DVector<f64>) -> Result<f64> {
    let mean = truth.mean();
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Degenerate("targets have zero variance".into()));
    }
    let ss_res: f64 = truth.iter().zip(pred.iter()).map(|(t, p)| (t - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub ridge: f64,
    pub bandwidth: Option<f64>,
    pub val_r2: f64,
}

#[derive(Clone, Debug)]
pub struct RegressionReport {
    pub model: RegressionModel,
    pub grid_scores: Vec<GridScore>,
    pub train_r2: f64,
    pub val_r2: Option<f64>,
    pub test_r2: f64,
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub seed: u64,
}

fn split_indices(k: usize, split: &Split, seed: u64) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let parts = [split.train, split.val, split.test];
    if parts.iter().any(|f| !(0.0..=1.0).contains(f)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!(
            "split fractions must be in [0, 1] and sum to 1, got {parts:?}"
        )));
    }
    let n_test = (k as f64 * split.test).round() as usize;
    let n_val = (k as f64 * split.val).round() as usize;
    if n_test < 2 || n_test + n_val + 2 > k {
        return Err(Error::Parameter(format!(
            "split of {k} items leaves too few for training or testing"
        )));
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = order[..n_test].to_vec();
    let val = order[n_test..n_test + n_val].to_vec();
    let train = order[n_test + n_val..].to_vec();
    Ok((train, val, test))
}

fn median_distance(x: &DMatrix<f64>) -> f64 {
    let d = linalg::row_distances(x);
    let mut vals: Vec<f64> = (0..x.nrows())
        .flat_map(|i| ((i + 1)..x.nrows()).map(move |j| (i, j)))
        .map(|(i, j)| d[(i, j)])
        .collect();
    vals.sort_by(f64::total_cmp);
    let med = linalg::percentile_sorted(&vals, 50.0);
    if med > 0.0 && med.is_finite() {
        med
    } else {
        1.0
    }
}

/// Fits on the training split, selects hyperparameters by validation R²
/// when the grid has more than one candidate, and scores on the test split.
pub fn fit_regressor(
    z: &DMatrix<f64>,
    targets: &DVector<f64>,
    kind: RegressorKind,
    grid: &HyperGrid,
    split: &Split,
    seed: u64,
) -> Result<RegressionReport> {
    let k = z.nrows();
    if targets.len() != k {
        return Err(Error::Shape(format!("{} targets for {k} rows", targets.len())));
    }
    if k < 5 {
        return Err(Error::Parameter(format!("regression needs at least 5 items, got {k}")));
    }
    if z.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("regression inputs must be finite".into()));
    }
    let mean = targets.mean();
    if targets.iter().all(|&t| t == mean) {
        return Err(Error::Degenerate("targets have zero variance".into()));
    }
    if grid.ridge.is_empty() {
        return Err(Error::Parameter("ridge grid is empty".into()));
    }
    let (train_idx, val_idx, test_idx) = split_indices(k, split, seed)?;
    let pick = |idx: &[usize]| {
        (
            z.select_rows(idx),
            DVector::from_iterator(idx.len(), idx.iter().map(|&i| targets[i])),
        )
    };
    let (x_train, y_train) = pick(&train_idx);
    let (x_val, y_val) = pick(&val_idx);
    let (x_test, y_test) = pick(&test_idx);

    let bandwidths: Vec<Option<f64>> = match kind {
        RegressorKind::Ridge => vec![None],
        RegressorKind::KernelRidgeRbf if grid.bandwidth.is_empty() => {
            let med = median_distance(&x_train);
            BANDWIDTH_SCALES.iter().map(|s| Some(s * med)).collect()
        }
        RegressorKind::KernelRidgeRbf => grid.bandwidth.iter().map(|&b| Some(b)).collect(),
    };
    let candidates: Vec<(f64, Option<f64>)> = grid
        .ridge
        .iter()
        .flat_map(|&r| bandwidths.iter().map(move |&b| (r, b)))
        .collect();

    let mut grid_scores = Vec::new();
    let model = if candidates.len() == 1 {
        let (r, b) = candidates[0];
        RegressionModel::fit(&x_train, &y_train, kind, r, b)?
    } else {
        if val_idx.len() < 2 {
            return Err(Error::Parameter(
                "a hyperparameter grid needs at least two validation items".into(),
            ));
        }
        let mut best: Option<(f64, RegressionModel)> = None;
        for (r, b) in candidates {
            let model = RegressionModel::fit(&x_train, &y_train, kind, r, b)?;
            let score = r_squared(&y_val, &model.predict(&x_val))?;
            grid_scores.push(GridScore {
                ridge: r,
                bandwidth: b,
                val_r2: score,
            });
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, model));
            }
        }
        best.expect("grid is non-empty").1
    };
    let train_r2 = r_squared(&y_train, &model.predict(&x_train))?;
    let val_r2 = if val_idx.len() >= 2 {
        r_squared(&y_val, &model.predict(&x_val)).ok()
    } else {
        None
    };
    let test_r2 = r_squared(&y_test, &model.predict(&x_test))?;
    Ok(RegressionReport {
        model,
        grid_scores,
        train_r2,
        val_r2,
        test_r2,
        train_idx,
        val_idx,
        test_idx,
        seed,
    })
}
