//! Small dense linear-algebra helpers shared by the metric code.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

/// Relative eigenvalue floor used when inverting covariance square roots.
pub const EIGEN_FLOOR: f64 = 1e-10;

/// Symmetric eigendecomposition with eigenvalues sorted in decreasing order.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Builds `V · diag(f(λ)) · Vᵀ`.
pub fn sym_from_spectrum(values: &DVector<f64>, vectors: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (j, &lambda) in values.iter().enumerate() {
        let s = f(lambda);
        scaled.column_mut(j).scale_mut(s);
    }
    scaled * vectors.transpose()
}

/// Singular values of `m`, in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    SVD::new(m.clone(), false, false).singular_values
}

pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).sum()
}

/// Subtracts each column's mean.
pub fn center_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let rows = m.nrows() as f64;
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / rows;
        col.add_scalar_mut(-mean);
    }
    out
}

/// Double-centers a square matrix: `C · K · C`.
pub fn double_center(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).sum() / nf).collect();
    let col_means: Vec<f64> = (0..n).map(|j| k.column(j).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    DMatrix::from_fn(n, n, |i, j| k[(i, j)] - row_means[i] - col_means[j] + grand)
}

/// Flips the sign of each column so that its largest-magnitude entry is positive.
pub fn orient_columns(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let mut best = 0.0f64;
        for &x in col.iter() {
            if x.abs() > best.abs() {
                best = x;
            }
        }
        if best < 0.0 {
            col.neg_mut();
        }
    }
}

/// Frobenius inner product `Tr[AᵀB]`.
pub fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Euclidean distances between the rows of `m`.
pub fn row_distances(m: &DMatrix<f64>) -> DMatrix<f64> {
    let k = m.nrows();
    let mut d = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in (i + 1)..k {
            let mut s = 0.0;
            for c in 0..m.ncols() {
                let diff = m[(i, c)] - m[(j, c)];
                s += diff * diff;
            }
            let v = s.sqrt();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Linear-interpolated percentile (`q` in `[0, 100]`) of already sorted values.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi || sorted[hi] == sorted[lo] {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}
