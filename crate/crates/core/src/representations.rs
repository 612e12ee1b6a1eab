//! Raw and feature-mapped representations.
//!
//! A [`RepresentationMatrix`] holds one network's responses: rows are stimuli,
//! columns are neurons. A [`ConvRepresentation`] holds convolutional
//! activations laid out as `m × h × w × c` in C order.

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Dense `m × n` response matrix with a free-form label.
#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationMatrix {
    data: DMatrix<f64>,
    label: String,
}

impl RepresentationMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "representation must be at least 1x1, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry at row {}, column {}",
                pos % data.nrows(),
                pos / data.nrows()
            )));
        }
        Ok(RepresentationMatrix {
            data,
            label: String::new(),
        })
    }

    /// Builds from row-major values.
    pub fn from_row_slice(m: usize, n: usize, values: &[f64]) -> Result<Self> {
        if values.len() != m * n {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {m}x{n} matrix",
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(m, n, values))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    /// Number of stimuli (rows).
    pub fn m(&self) -> usize {
        self.data.nrows()
    }

    /// Number of neurons (columns).
    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.norm()
    }

    /// Scales to unit Frobenius norm.
    pub fn normalize_frobenius(&self) -> Result<Self> {
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            return Err(Error::Degenerate("cannot normalize a zero matrix".to_string()));
        }
        Ok(self.map_data(self.data.unscale(norm)))
    }

    /// Rows at the given indices, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        self.map_data(self.data.select_rows(rows))
    }

    /// Replaces the data, keeping the label. Internal values are assumed finite.
    pub(crate) fn map_data(&self, data: DMatrix<f64>) -> Self {
        RepresentationMatrix {
            data,
            label: self.label.clone(),
        }
    }

    /// Row-major copy of the values.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.data.transpose().as_slice().to_vec()
    }
}

/// Convolutional activations, `m × h × w × c`, stored in C order.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvRepresentation {
    data: Vec<f64>,
    shape: [usize; 4],
    label: String,
}

impl ConvRepresentation {
    pub fn new(data: Vec<f64>, shape: [usize; 4]) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::InvalidInput(format!(
                "conv tensor dimensions must be positive, got {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "{} values cannot fill a tensor of shape {shape:?}",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite entry in conv tensor".into()));
        }
        Ok(ConvRepresentation {
            data,
            shape,
            label: String::new(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `[m, h, w, c]`.
    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn index(&self, i: usize, y: usize, x: usize, ch: usize) -> usize {
        let [_, h, w, c] = self.shape;
        ((i * h + y) * w + x) * c + ch
    }

    #[inline]
    pub fn get(&self, i: usize, y: usize, x: usize, ch: usize) -> f64 {
        self.data[self.index(i, y, x, ch)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Inverse of [`reshape_strict`]: an `(m·h·w) × c` matrix back into a tensor.
    pub fn from_strict(mat: &DMatrix<f64>, m: usize, h: usize, w: usize) -> Result<Self> {
        if mat.nrows() != m * h * w {
            return Err(Error::Shape(format!(
                "{} rows do not match m*h*w = {}",
                mat.nrows(),
                m * h * w
            )));
        }
        let c = mat.ncols();
        Self::new(mat.transpose().as_slice().to_vec(), [m, h, w, c])
    }

    /// Inverse of [`reshape_flat`]: an `m × (h·w·c)` matrix back into a tensor.
    pub fn from_flat(mat: &DMatrix<f64>, h: usize, w: usize, c: usize) -> Result<Self> {
        if mat.ncols() != h * w * c {
            return Err(Error::Shape(format!(
                "{} columns do not match h*w*c = {}",
                mat.ncols(),
                h * w * c
            )));
        }
        Self::new(mat.transpose().as_slice().to_vec(), [mat.nrows(), h, w, c])
    }
}

/// Positive-definite kernel used by the nonlinear feature map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    /// `exp(-‖x − y‖² / (2 σ²))`.
    Rbf {
        bandwidth: f64,
    },
}

/// Feature map applied to each representation before alignment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMap {
    Identity,
    Center,
    PartialWhiten {
        alpha: f64,
    },
    /// Square root of the centered kernel matrix, then partial whitening.
    KernelSqrt {
        kernel: KernelSpec,
        alpha: f64,
    },
}

/// How representations with different neuron counts are brought to a common width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum DimPolicy {
    RequireEqual,
    Pca { dim: usize },
    ZeroPad,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMapSpec {
    pub kind: FeatureMap,
    pub dim_policy: DimPolicy,
}

impl FeatureMapSpec {
    pub fn new(kind: FeatureMap) -> Self {
        FeatureMapSpec {
            kind,
            dim_policy: DimPolicy::RequireEqual,
        }
    }

    pub fn with_dim_policy(mut self, policy: DimPolicy) -> Self {
        self.dim_policy = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            FeatureMap::PartialWhiten { alpha } => check_alpha(alpha),
            FeatureMap::KernelSqrt { kernel, alpha } => {
                check_alpha(alpha)?;
                if alpha == 0.0 {
                    return Err(Error::Parameter("kernel feature map requires alpha in (0, 1]".into()));
                }
                check_kernel(&kernel)
            }
            _ => Ok(()),
        }?;
        if let DimPolicy::Pca { dim: 0 } = self.dim_policy {
            return Err(Error::Parameter("PCA target dimension must be positive".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Parameter(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(())
}

pub(crate) fn check_kernel(kernel: &KernelSpec) -> Result<()> {
    if let KernelSpec::Rbf { bandwidth } = kernel {
        if !(bandwidth.is_finite() && *bandwidth > 0.0) {
            return Err(Error::Parameter(format!(
                "RBF bandwidth must be positive, got {bandwidth}"
            )));
        }
    }
    Ok(())
}

/// Non-fatal conditions encountered while mapping features.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FeatureWarning {
    /// Covariance had eigenvalues below the floor; they were clamped.
    RankDeficient { rank: usize, dim: usize },
    /// Kernel matrix had negative eigenvalues; they were clamped to zero.
    NotPsd { negative: usize },
}

/// Output of [`partial_whiten`].
#[derive(Clone, Debug)]
pub struct Whitened {
    pub rep: RepresentationMatrix,
    pub warning: Option<FeatureWarning>,
}

/// Mean-centers every column: `C·X` with `C = I − 𝟙𝟙ᵀ/m`.
pub fn center_columns(x: &RepresentationMatrix) -> RepresentationMatrix {
    x.map_data(linalg::center_columns(x.data()))
}

/// `C·X·(αI + (1−α)(XᵀCX)^{−1/2})`.
///
/// The inverse square root floors eigenvalues at `1e-10 · λ_max`.
pub fn partial_whiten(x: &RepresentationMatrix, alpha: f64) -> Result<Whitened> {
    check_alpha(alpha)?;
    if x.m() < 2 {
        return Err(Error::InvalidInput(
            "partial whitening needs at least two stimuli".into(),
        ));
    }
    let centered = linalg::center_columns(x.data());
    if alpha == 1.0 {
        return Ok(Whitened {
            rep: x.map_data(centered),
            warning: None,
        });
    }
    let cov = centered.transpose() * &centered;
    let (values, vectors) = linalg::sym_eigen(&cov);
    let top = values[0];
    if top <= 0.0 {
        return Err(Error::Degenerate(
            "covariance is zero; cannot whiten a constant representation".into(),
        ));
    }
    let floor = linalg::EIGEN_FLOOR * top;
    let rank = values.iter().filter(|&&v| v > floor).count();
    let inv_sqrt = linalg::sym_from_spectrum(&values, &vectors, |v| 1.0 / v.max(floor).sqrt());
    let n = x.n();
    let transform = DMatrix::<f64>::identity(n, n) * alpha + inv_sqrt * (1.0 - alpha);
    let warning = (alpha == 0.0 && rank < n).then(|| {
        log::warn!(
            "covariance of '{}' has rank {rank} < {n}; eigenvalues floored",
            x.label()
        );
        FeatureWarning::RankDeficient { rank, dim: n }
    });
    Ok(Whitened {
        rep: x.map_data(centered * transform),
        warning,
    })
}

/// Un-centered `m × m` kernel matrix over the rows of `x`.
pub fn kernel_matrix(x: &DMatrix<f64>, kernel: &KernelSpec) -> DMatrix<f64> {
    match kernel {
        KernelSpec::Linear => x * x.transpose(),
        KernelSpec::Rbf { bandwidth } => {
            let d = linalg::row_distances(x);
            let denom = 2.0 * bandwidth * bandwidth;
            d.map(|v| (-(v * v) / denom).exp())
        }
    }
}

/// Symmetric square root of the centered kernel matrix, used as an `m × m` feature matrix.
pub fn kernel_sqrt(
    x: &RepresentationMatrix,
    kernel: &KernelSpec,
) -> Result<(RepresentationMatrix, Option<FeatureWarning>)> {
    check_kernel(kernel)?;
    let centered = linalg::double_center(&kernel_matrix(x.data(), kernel));
    let (values, vectors) = linalg::sym_eigen(&centered);
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let negative = values
        .iter()
        .filter(|&&v| v < -linalg::EIGEN_FLOOR * scale.max(f64::MIN_POSITIVE))
        .count();
    let warning = (negative > 0).then(|| {
        log::warn!(
            "kernel matrix of '{}' is not PSD; clamping {negative} eigenvalues",
            x.label()
        );
        FeatureWarning::NotPsd { negative }
    });
    let root = linalg::sym_from_spectrum(&values, &vectors, |v| v.max(0.0).sqrt());
    Ok((x.map_data(root), warning))
}

/// Applies a feature map, logging (not returning) any warnings.
pub fn apply_feature_map(x: &RepresentationMatrix, map: &FeatureMap) -> Result<RepresentationMatrix> {
    match *map {
        FeatureMap::Identity => Ok(x.clone()),
        FeatureMap::Center => Ok(center_columns(x)),
        FeatureMap::PartialWhiten { alpha } => Ok(partial_whiten(x, alpha)?.rep),
        FeatureMap::KernelSqrt { kernel, alpha } => {
            let (root, _) = kernel_sqrt(x, &kernel)?;
            Ok(partial_whiten(&root, alpha)?.rep)
        }
    }
}

/// Brings a batch of representations to a common column count.
///
/// PCA is fit per representation: each is projected onto its own top-`p`
/// right singular directions, each oriented so its largest-magnitude entry is positive.
pub fn match_dimensions(reps: &[RepresentationMatrix], policy: DimPolicy) -> Result<Vec<RepresentationMatrix>> {
    let Some(first) = reps.first() else {
        return Ok(Vec::new());
    };
    let m = first.m();
    if let Some(bad) = reps.iter().find(|r| r.m() != m) {
        return Err(Error::Shape(format!(
            "stimulus counts differ: '{}' has {} rows, expected {m}",
            bad.label(),
            bad.m()
        )));
    }
    match policy {
        DimPolicy::RequireEqual => {
            let n = first.n();
            if let Some(bad) = reps.iter().find(|r| r.n() != n) {
                return Err(Error::Shape(format!(
                    "neuron counts differ: '{}' has {} columns, expected {n}",
                    bad.label(),
                    bad.n()
                )));
            }
            Ok(reps.to_vec())
        }
        DimPolicy::ZeroPad => {
            let target = reps.iter().map(|r| r.n()).max().unwrap_or(0);
            Ok(reps
                .iter()
                .map(|r| {
                    let padded = r.data().clone().resize_horizontally(target, 0.0);
                    r.map_data(padded)
                })
                .collect())
        }
        DimPolicy::Pca { dim } => {
            if dim == 0 {
                return Err(Error::Parameter("PCA target dimension must be positive".into()));
            }
            if let Some(bad) = reps.iter().find(|r| dim > r.m().min(r.n())) {
                return Err(Error::Parameter(format!(
                    "PCA target {dim} exceeds min(m, n) = {} for '{}'",
                    bad.m().min(bad.n()),
                    bad.label()
                )));
            }
            Ok(reps.iter().map(|r| pca_reduce(r, dim)).collect())
        }
    }
}

fn pca_reduce(x: &RepresentationMatrix, dim: usize) -> RepresentationMatrix {
    let svd = SVD::new(x.data().clone(), false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut basis = v_t.rows(0, dim).transpose();
    linalg::orient_columns(&mut basis);
    x.map_data(x.data() * basis)
}

/// `(m·h·w) × c` matrix; row index `((i·h + y)·w + x)`.
pub fn reshape_strict(t: &ConvRepresentation) -> RepresentationMatrix {
    let [m, h, w, c] = t.shape();
    RepresentationMatrix {
        data: DMatrix::from_row_slice(m * h * w, c, t.as_slice()),
        label: t.label().to_string(),
    }
}

/// `m × (h·w·c)` matrix; column index `(y·w + x)·c + ch`.
pub fn reshape_flat(t: &ConvRepresentation) -> RepresentationMatrix {
    let [m, h, w, c] = t.shape();
    RepresentationMatrix {
        data: DMatrix::from_row_slice(m, h * w * c, t.as_slice()),
        label: t.label().to_string(),
    }
}

/// `out[i, y, x, ch] = in[i, (y − s1) mod h, (x − s2) mod w, ch]`.
pub fn circular_shift(t: &ConvRepresentation, s1: i64, s2: i64) -> ConvRepresentation {
    let [m, h, w, c] = t.shape();
    let s1 = s1.rem_euclid(h as i64) as usize;
    let s2 = s2.rem_euclid(w as i64) as usize;
    let mut out = vec![0.0; t.as_slice().len()];
    for i in 0..m {
        for y in 0..h {
            let src_y = (y + h - s1) % h;
            for x in 0..w {
                let src_x = (x + w - s2) % w;
                let dst = t.index(i, y, x, 0);
                let src = t.index(i, src_y, src_x, 0);
                out[dst..dst + c].copy_from_slice(&t.as_slice()[src..src + c]);
            }
        }
    }
    ConvRepresentation {
        data: out,
        shape: t.shape(),
        label: t.label().to_string(),
    }
}
