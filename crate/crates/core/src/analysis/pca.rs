use nalgebra::{DMatrix, SVD};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Clone, Debug, PartialEq)]
pub struct PcaProjection {
    /// `K × k` scores of the centered data.
    pub scores: DMatrix<f64>,
    /// `L × k` principal directions.
    pub components: DMatrix<f64>,
    /// Fraction of total variance per retained component.
    pub explained: Vec<f64>,
}

/// Projects column-centered `z` onto its top `k` principal directions.
pub fn pca_project(z: &DMatrix<f64>, k: usize) -> Result<PcaProjection> {
    let (rows, cols) = z.shape();
    if k == 0 || k > rows.min(cols) {
        return Err(Error::Parameter(format!(
            "PCA dimension must lie in [1, {}], got {k}",
            rows.min(cols)
        )));
    }
    let centered = linalg::center_columns(z);
    let svd = SVD::new(centered.clone(), false, true);
    let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Err(Error::Degenerate("data has zero variance".into()));
    }
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut components = v_t.rows(0, k).transpose();
    linalg::orient_columns(&mut components);
    let explained = svd.singular_values.iter().take(k).map(|s| s * s / total).collect();
    Ok(PcaProjection {
        scores: centered * &components,
        components,
        explained,
    })
}
