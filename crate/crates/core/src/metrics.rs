//! Shape metrics between representations, their convolutional variants, and
//! the non-metric heuristics they are audited against.
//!
//! A [`MetricSpec`] combines a feature map, a group of isometries and a
//! distance form. Euclidean form: `min_T ‖Xᵢ^φ − Xⱼ^φ T‖`. Angular form:
//! `min_T arccos ⟨Xᵢ^φ, Xⱼ^φ T⟩ / (‖Xᵢ^φ‖‖Xⱼ^φ‖)`, in `[0, π]`.

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::alignment::{self, Group};
use crate::error::{Error, Result};
use crate::linalg;
use crate::representations::{
    self, apply_feature_map, center_columns, check_alpha, ConvRepresentation, DimPolicy, FeatureMap, FeatureMapSpec,
    KernelSpec, RepresentationMatrix,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceForm {
    Euclidean,
    Angular,
}

/// How convolutional tensors are compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ConvMode {
    /// `(m·h·w) × c` reshape; alignment acts on channels only.
    Strict,
    /// Strict, plus a search over circular spatial shifts.
    ShiftSearch {
        #[serde(default = "default_stride")]
        stride: usize,
    },
    /// `m × (h·w·c)` reshape; ignores spatial structure.
    Flatten,
}

fn default_stride() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub form: DistanceForm,
    pub group: Group,
    pub feature: FeatureMapSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conv_mode: Option<ConvMode>,
}

impl MetricSpec {
    pub fn new(form: DistanceForm, group: Group, feature: FeatureMap) -> Self {
        MetricSpec {
            form,
            group,
            feature: FeatureMapSpec::new(feature),
            conv_mode: None,
        }
    }

    /// Angular distance after centering with orthogonal alignment.
    pub fn procrustes_angular() -> Self {
        Self::new(DistanceForm::Angular, Group::Orthogonal, FeatureMap::Center)
    }

    /// Euclidean distance after centering with orthogonal alignment.
    pub fn procrustes_euclidean() -> Self {
        Self::new(DistanceForm::Euclidean, Group::Orthogonal, FeatureMap::Center)
    }

    /// Euclidean distance on raw responses with neuron permutations.
    pub fn permutation_euclidean() -> Self {
        Self::new(DistanceForm::Euclidean, Group::Permutation, FeatureMap::Identity)
    }

    /// Angular distance on partially whitened responses; `alpha = 0` is CCA.
    pub fn cca(alpha: f64) -> Self {
        Self::new(
            DistanceForm::Angular,
            Group::Orthogonal,
            FeatureMap::PartialWhiten { alpha },
        )
    }

    pub fn with_dim_policy(mut self, policy: DimPolicy) -> Self {
        self.feature.dim_policy = policy;
        self
    }

    pub fn with_conv_mode(mut self, mode: ConvMode) -> Self {
        self.conv_mode = Some(mode);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.feature.validate()?;
        if let Some(ConvMode::ShiftSearch { stride: 0 }) = self.conv_mode {
            return Err(Error::Parameter("shift stride must be positive".into()));
        }
        Ok(())
    }

    /// Short human-readable description, e.g. `angular/orthogonal/center`.
    pub fn describe(&self) -> String {
        let form = match self.form {
            DistanceForm::Euclidean => "euclidean",
            DistanceForm::Angular => "angular",
        };
        let feature = match self.feature.kind {
            FeatureMap::Identity => "identity".to_string(),
            FeatureMap::Center => "center".to_string(),
            FeatureMap::PartialWhiten { alpha } => format!("partial_whiten(alpha={alpha})"),
            FeatureMap::KernelSqrt { kernel, alpha } => match kernel {
                KernelSpec::Linear => format!("kernel_sqrt(linear, alpha={alpha})"),
                KernelSpec::Rbf { bandwidth } => {
                    format!("kernel_sqrt(rbf(bandwidth={bandwidth}), alpha={alpha})")
                }
            },
        };
        let mut out = format!("{form}/{}/{feature}", self.group.name());
        match self.conv_mode {
            Some(ConvMode::Strict) => out.push_str("/conv-strict"),
            Some(ConvMode::Flatten) => out.push_str("/conv-flatten"),
            Some(ConvMode::ShiftSearch { stride }) => out.push_str(&format!("/conv-shift(stride={stride})")),
            None => {}
        }
        out
    }
}

/// Distance between feature-mapped matrices that are already the same shape.
pub fn aligned_distance(a: &DMatrix<f64>, b: &DMatrix<f64>, form: DistanceForm, group: Group) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "feature-mapped shapes differ: {}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    match form {
        DistanceForm::Euclidean => {
            let res = alignment::solve(a, b, group)?;
            Ok((a - b * &res.transform).norm())
        }
        DistanceForm::Angular => {
            let (a, b) = unit_pair(a, b)?;
            let res = alignment::solve(&a, &b, group)?;
            Ok(chord_to_angle((&a - &b * &res.transform).norm()))
        }
    }
}

fn unit_pair(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate(
            "angular distance is undefined for a zero representation".into(),
        ));
    }
    Ok((a.unscale(na), b.unscale(nb)))
}

/// Angle between unit vectors from their chord length: `θ = 2·asin(‖a − b‖/2)`.
///
/// Identical to `arccos⟨a, b⟩` (clamped) but keeps full precision near zero.
fn chord_to_angle(chord: f64) -> f64 {
    2.0 * (chord / 2.0).clamp(0.0, 1.0).asin()
}

pub(crate) fn clamped_acos(x: f64) -> f64 {
    x.clamp(-1.0, 1.0).acos()
}

/// Applies dimension matching and the feature map to a batch.
pub fn prepare_features(reps: &[RepresentationMatrix], feature: &FeatureMapSpec) -> Result<Vec<DMatrix<f64>>> {
    feature.validate()?;
    let matched = representations::match_dimensions(reps, feature.dim_policy)?;
    matched
        .iter()
        .map(|r| apply_feature_map(r, &feature.kind).map(RepresentationMatrix::into_data))
        .collect()
}

/// Generalized shape distance between two representations.
pub fn shape_distance(xi: &RepresentationMatrix, xj: &RepresentationMatrix, spec: &MetricSpec) -> Result<f64> {
    spec.validate()?;
    let feats = prepare_features(&[xi.clone(), xj.clone()], &spec.feature)?;
    aligned_distance(&feats[0], &feats[1], spec.form, spec.group)
}

/// Angular distance between partially whitened representations; `arccos(Σ ρ_ℓ)`.
///
/// At `alpha = 0`, `cos` of the result is the mean canonical correlation.
pub fn cca_distance(xi: &RepresentationMatrix, xj: &RepresentationMatrix, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if xi.m() <= xi.n().max(xj.n()) {
        log::warn!(
            "CCA with m = {} <= n = {}; canonical correlations are degenerate",
            xi.m(),
            xi.n().max(xj.n())
        );
    }
    shape_distance(xi, xj, &MetricSpec::cca(alpha))
}

/// `1 − Σ ρ_ℓ`, one minus the mean (regularized) canonical correlation.
///
/// Not a metric: it can violate the triangle inequality. Provided for auditing.
pub fn linear_heuristic(xi: &RepresentationMatrix, xj: &RepresentationMatrix, alpha: f64) -> Result<f64> {
    Ok(1.0 - cca_distance(xi, xj, alpha)?.cos())
}

fn check_conv_pair(ti: &ConvRepresentation, tj: &ConvRepresentation) -> Result<()> {
    if ti.shape() != tj.shape() {
        return Err(Error::Shape(format!(
            "conv tensors differ in shape: {:?} vs {:?}",
            ti.shape(),
            tj.shape()
        )));
    }
    Ok(())
}

/// Feature-maps a conv tensor through its strict reshape.
pub fn prepare_conv(t: &ConvRepresentation, spec: &MetricSpec) -> Result<ConvRepresentation> {
    if let FeatureMap::KernelSqrt { .. } = spec.feature.kind {
        return Err(Error::Parameter(
            "kernel feature maps do not preserve the conv tensor layout".into(),
        ));
    }
    if spec.feature.dim_policy != DimPolicy::RequireEqual {
        return Err(Error::Parameter(
            "conv metrics require the require_equal dimension policy".into(),
        ));
    }
    let [m, h, w, _] = t.shape();
    let mapped = apply_feature_map(&representations::reshape_strict(t), &spec.feature.kind)?;
    Ok(ConvRepresentation::from_strict(mapped.data(), m, h, w)?.with_label(t.label()))
}

/// Distance between two already feature-mapped conv tensors under shift search.
pub fn shift_distance(
    ti: &ConvRepresentation,
    tj: &ConvRepresentation,
    form: DistanceForm,
    group: Group,
    stride: usize,
) -> Result<f64> {
    check_conv_pair(ti, tj)?;
    let [m, h, w, c] = ti.shape();
    let (a, b) = match form {
        DistanceForm::Euclidean => (ti.clone(), tj.clone()),
        DistanceForm::Angular => {
            let (na, nb) = (ti.frobenius_norm(), tj.frobenius_norm());
            if na == 0.0 || nb == 0.0 {
                return Err(Error::Degenerate(
                    "angular distance is undefined for a zero representation".into(),
                ));
            }
            let scale = |t: &ConvRepresentation, s: f64| {
                ConvRepresentation::new(t.as_slice().iter().map(|v| v / s).collect(), [m, h, w, c])
            };
            (scale(ti, na)?, scale(tj, nb)?)
        }
    };
    let best = alignment::solve_shift(&a, &b, group, stride)?;
    let (s1, s2) = best.shift.expect("shift search reports a shift");
    let shifted = representations::circular_shift(&b, s1 as i64, s2 as i64);
    let residual = (representations::reshape_strict(&a).data()
        - representations::reshape_strict(&shifted).data() * &best.transform)
        .norm();
    Ok(match form {
        DistanceForm::Euclidean => residual,
        DistanceForm::Angular => chord_to_angle(residual),
    })
}

/// Shape distance between convolutional representations.
///
/// The mode defaults to [`ConvMode::Strict`] when the spec has none.
pub fn conv_distance(ti: &ConvRepresentation, tj: &ConvRepresentation, spec: &MetricSpec) -> Result<f64> {
    spec.validate()?;
    check_conv_pair(ti, tj)?;
    let flat_spec = MetricSpec {
        conv_mode: None,
        ..*spec
    };
    match spec.conv_mode.unwrap_or(ConvMode::Strict) {
        ConvMode::Strict => shape_distance(
            &representations::reshape_strict(ti),
            &representations::reshape_strict(tj),
            &flat_spec,
        ),
        ConvMode::Flatten => shape_distance(
            &representations::reshape_flat(ti),
            &representations::reshape_flat(tj),
            &flat_spec,
        ),
        ConvMode::ShiftSearch { stride } => {
            let a = prepare_conv(ti, spec)?;
            let b = prepare_conv(tj, spec)?;
            shift_distance(&a, &b, spec.form, spec.group, stride)
        }
    }
}

fn check_same_m(xi: &RepresentationMatrix, xj: &RepresentationMatrix) -> Result<()> {
    if xi.m() != xj.m() {
        return Err(Error::Shape(format!(
            "stimulus counts differ: {} vs {}",
            xi.m(),
            xj.m()
        )));
    }
    Ok(())
}

/// `arccos` of linear CKA on centered data:
/// `arccos(‖XᵀY‖² / (‖XXᵀ‖·‖YYᵀ‖))`.
pub fn cka_distance(xi: &RepresentationMatrix, xj: &RepresentationMatrix) -> Result<f64> {
    check_same_m(xi, xj)?;
    let x = center_columns(xi).into_data();
    let y = center_columns(xj).into_data();
    let cross = (x.transpose() * &y).norm_squared();
    // ‖XXᵀ‖_F = ‖XᵀX‖_F, cheaper when n < m
    let nx = (x.transpose() * &x).norm();
    let ny = (y.transpose() * &y).norm();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::Degenerate(
            "CKA is undefined for a constant representation".into(),
        ));
    }
    Ok(clamped_acos(cross / nx / ny))
}

/// How the representational dissimilarity matrix is built.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RdmKind {
    /// Euclidean distance between response patterns.
    #[default]
    Euclidean,
    /// One minus the Pearson correlation between response patterns.
    Correlation,
}

fn rdm_upper(x: &DMatrix<f64>, kind: RdmKind) -> Vec<f64> {
    let m = x.nrows();
    let mut out = Vec::with_capacity(m * (m - 1) / 2);
    match kind {
        RdmKind::Euclidean => {
            let d = linalg::row_distances(x);
            for i in 0..m {
                for j in (i + 1)..m {
                    out.push(d[(i, j)]);
                }
            }
        }
        RdmKind::Correlation => {
            let rows: Vec<Vec<f64>> = (0..m).map(|i| x.row(i).iter().cloned().collect()).collect();
            for i in 0..m {
                for j in (i + 1)..m {
                    out.push(1.0 - pearson(&rows[i], &rows[j]).unwrap_or(0.0));
                }
            }
        }
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa.sqrt() * sbb.sqrt()))
}

/// Ranks starting at 1; tied values share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// `1 − Spearman(RDMᵢ, RDMⱼ)` over upper-triangular RDM entries, in `[0, 2]`.
///
/// Not a metric. Provided for auditing.
pub fn rsa_dissimilarity(xi: &RepresentationMatrix, xj: &RepresentationMatrix) -> Result<f64> {
    rsa_dissimilarity_with(xi, xj, RdmKind::Euclidean)
}

pub fn rsa_dissimilarity_with(xi: &RepresentationMatrix, xj: &RepresentationMatrix, kind: RdmKind) -> Result<f64> {
    check_same_m(xi, xj)?;
    if xi.m() < 3 {
        return Err(Error::InvalidInput("RSA needs at least three stimuli".into()));
    }
    let ri = average_ranks(&rdm_upper(xi.data(), kind));
    let rj = average_ranks(&rdm_upper(xj.data(), kind));
    let rho =
        pearson(&ri, &rj).ok_or_else(|| Error::Degenerate("RDM is constant; rank correlation undefined".into()))?;
    Ok((1.0 - rho).clamp(0.0, 2.0))
}

/// Centered Gram matrix plus ridge; default ridge is `1e-6 · tr(K) / m`.
fn regularized_gram(x: &RepresentationMatrix, ridge: Option<f64>) -> Result<DMatrix<f64>> {
    let c = center_columns(x).into_data();
    let mut k = &c * c.transpose();
    let m = k.nrows();
    let ridge = match ridge {
        Some(r) if r > 0.0 && r.is_finite() => r,
        Some(r) => return Err(Error::Parameter(format!("ridge must be positive, got {r}"))),
        None => {
            let r = 1e-6 * k.trace() / m as f64;
            if r <= 0.0 {
                return Err(Error::Degenerate("Gram matrix is zero; default ridge undefined".into()));
            }
            r
        }
    };
    for i in 0..m {
        k[(i, i)] += ridge;
    }
    Ok(k)
}

/// Ascending eigenvalues of `a⁻¹b` through a Cholesky factor of `a`.
fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = Cholesky::new(a.clone())
        .ok_or_else(|| Error::Numerical("regularized Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let half = l
        .solve_lower_triangular(b)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let whitened = l
        .solve_lower_triangular(&half.transpose())
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let (values, _) = linalg::sym_eigen(&whitened);
    let mut values: Vec<f64> = values.iter().copied().collect();
    if values.iter().any(|&v| v.is_nan() || v <= 0.0) {
        return Err(Error::Numerical("generalized eigenvalues are not positive".into()));
    }
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Affine-invariant Riemannian distance between regularized centered Gram
/// matrices: `sqrt(Σ log² λᵢ)`, `λ` the eigenvalues of `Kₓ⁻¹K_y`.
///
/// Eigenvalues far below one lose relative accuracy in the Cholesky-whitened
/// problem, so each log is taken from whichever of `Kₓ⁻¹K_y` and `K_y⁻¹Kₓ`
/// holds it as a value of at least one.
pub fn pd_riemannian_distance(xi: &RepresentationMatrix, xj: &RepresentationMatrix, ridge: Option<f64>) -> Result<f64> {
    check_same_m(xi, xj)?;
    let kx = regularized_gram(xi, ridge)?;
    let ky = regularized_gram(xj, ridge)?;
    let forward = generalized_eigenvalues(&kx, &ky)?;
    let backward = generalized_eigenvalues(&ky, &kx)?;
    let m = forward.len();
    let mut squares: Vec<f64> = (0..m)
        .map(|k| {
            let up = forward[k].ln();
            let down = -backward[m - 1 - k].ln();
            if up + down >= 0.0 {
                up * up
            } else {
                down * down
            }
        })
        .collect();
    squares.sort_by(f64::total_cmp);
    Ok(squares.iter().sum::<f64>().sqrt())
}

/// Angular distance between square roots of centered kernel matrices after
/// partial whitening, a kernel generalization of [`cca_distance`].
pub fn kernel_shape_distance(
    xi: &RepresentationMatrix,
    xj: &RepresentationMatrix,
    kernel: KernelSpec,
    alpha: f64,
) -> Result<f64> {
    check_same_m(xi, xj)?;
    let spec = MetricSpec::new(
        DistanceForm::Angular,
        Group::Orthogonal,
        FeatureMap::KernelSqrt { kernel, alpha },
    );
    shape_distance(xi, xj, &spec)
}

/// Any distance or dissimilarity that can fill a pairwise matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "measure", rename_all = "snake_case")]
pub enum Measure {
    Shape(MetricSpec),
    Cka,
    PdRiemannian {
        #[serde(default)]
        ridge: Option<f64>,
    },
    LinearHeuristic {
        alpha: f64,
    },
    Rsa {
        #[serde(default)]
        rdm: RdmKind,
    },
}

impl Measure {
    /// Whether the measure satisfies the metric axioms.
    pub fn is_metric(&self) -> bool {
        !matches!(self, Measure::LinearHeuristic { .. } | Measure::Rsa { .. })
    }

    pub fn describe(&self) -> String {
        match self {
            Measure::Shape(spec) => spec.describe(),
            Measure::Cka => "cka_angular".into(),
            Measure::PdRiemannian { ridge: Some(r) } => format!("pd_riemannian(ridge={r})"),
            Measure::PdRiemannian { ridge: None } => "pd_riemannian(ridge=default)".into(),
            Measure::LinearHeuristic { alpha } => format!("linear_heuristic(alpha={alpha})"),
            Measure::Rsa { rdm } => format!("rsa_spearman(rdm={rdm:?})").to_lowercase(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Measure::Shape(spec) => spec.validate(),
            Measure::LinearHeuristic { alpha } => check_alpha(*alpha),
            Measure::PdRiemannian { ridge: Some(r) } if r.is_nan() || *r <= 0.0 => {
                Err(Error::Parameter(format!("ridge must be positive, got {r}")))
            }
            _ => Ok(()),
        }
    }

    pub fn distance(&self, xi: &RepresentationMatrix, xj: &RepresentationMatrix) -> Result<f64> {
        match self {
            Measure::Shape(spec) => shape_distance(xi, xj, spec),
            Measure::Cka => cka_distance(xi, xj),
            Measure::PdRiemannian { ridge } => pd_riemannian_distance(xi, xj, *ridge),
            Measure::LinearHeuristic { alpha } => linear_heuristic(xi, xj, *alpha),
            Measure::Rsa { rdm } => rsa_dissimilarity_with(xi, xj, *rdm),
        }
    }
}
