//! Pipeline configuration, read from a TOML file and overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shape_metrics::alignment::Group;
use shape_metrics::analysis::{HyperGrid, RegressorKind, Split};
use shape_metrics::pairwise::DEFAULT_TOL;
use shape_metrics::{
    ConvMode, DimPolicy, DistanceForm, FeatureMap, FeatureMapSpec, KernelSpec, Measure, MetricSpec, RdmKind,
};

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<InputEntry>,
    #[serde(default)]
    pub metric: MetricConfig,
    #[serde(default)]
    pub audit: AuditConfig,
    #[serde(default)]
    pub embed: EmbedConfig,
    #[serde(default)]
    pub cluster: ClusterConfig,
    #[serde(default)]
    pub regress: RegressConfig,
    #[serde(default)]
    pub converge: ConvergeConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputEntry {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    #[default]
    Shape,
    Cka,
    PdRiemannian,
    LinearHeuristic,
    Rsa,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Identity,
    #[default]
    Center,
    PartialWhiten,
    KernelSqrt,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    #[default]
    Linear,
    Rbf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvModeKind {
    Strict,
    ShiftSearch,
    Flatten,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimPolicyKind {
    #[default]
    RequireEqual,
    Pca,
    ZeroPad,
}

/// Flat description of the measure; converted to a library `Measure`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    #[serde(default)]
    pub measure: MeasureKind,
    #[serde(default = "default_form")]
    pub form: DistanceForm,
    #[serde(default = "default_group")]
    pub group: Group,
    #[serde(default)]
    pub feature: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub kernel: KernelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conv_mode: Option<ConvModeKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(default)]
    pub dim_policy: DimPolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
    #[serde(default)]
    pub rdm: RdmKind,
    #[serde(default)]
    pub allow_partial: bool,
}

fn default_form() -> DistanceForm {
    DistanceForm::Angular
}

fn default_group() -> Group {
    Group::Orthogonal
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            measure: MeasureKind::Shape,
            form: default_form(),
            group: default_group(),
            feature: FeatureKind::Center,
            alpha: None,
            kernel: KernelKind::Linear,
            bandwidth: None,
            conv_mode: None,
            stride: None,
            dim_policy: DimPolicyKind::RequireEqual,
            pca_dim: None,
            ridge: None,
            rdm: RdmKind::Euclidean,
            allow_partial: false,
        }
    }
}

fn param(msg: impl Into<String>) -> CliError {
    CliError::Config {
        path: None,
        message: msg.into(),
    }
}

impl MetricConfig {
    fn alpha_or(&self, default: f64) -> f64 {
        self.alpha.unwrap_or(default)
    }

    pub fn to_spec(&self) -> Result<MetricSpec, CliError> {
        let feature = match self.feature {
            FeatureKind::Identity => FeatureMap::Identity,
            FeatureKind::Center => FeatureMap::Center,
            FeatureKind::PartialWhiten => FeatureMap::PartialWhiten {
                alpha: self
                    .alpha
                    .ok_or_else(|| param("metric.alpha is required for partial_whiten"))?,
            },
            FeatureKind::KernelSqrt => {
                let kernel = match self.kernel {
                    KernelKind::Linear => KernelSpec::Linear,
                    KernelKind::Rbf => KernelSpec::Rbf {
                        bandwidth: self
                            .bandwidth
                            .ok_or_else(|| param("metric.bandwidth is required for rbf"))?,
                    },
                };
                FeatureMap::KernelSqrt {
                    kernel,
                    alpha: self.alpha_or(1.0),
                }
            }
        };
        let dim_policy = match self.dim_policy {
            DimPolicyKind::RequireEqual => DimPolicy::RequireEqual,
            DimPolicyKind::ZeroPad => DimPolicy::ZeroPad,
            DimPolicyKind::Pca => DimPolicy::Pca {
                dim: self
                    .pca_dim
                    .ok_or_else(|| param("metric.pca_dim is required for the pca policy"))?,
            },
        };
        let conv_mode = self.conv_mode.map(|mode| match mode {
            ConvModeKind::Strict => ConvMode::Strict,
            ConvModeKind::Flatten => ConvMode::Flatten,
            ConvModeKind::ShiftSearch => ConvMode::ShiftSearch {
                stride: self.stride.unwrap_or(1),
            },
        });
        Ok(MetricSpec {
            form: self.form,
            group: self.group,
            feature: FeatureMapSpec::new(feature).with_dim_policy(dim_policy),
            conv_mode,
        })
    }

    pub fn to_measure(&self) -> Result<Measure, CliError> {
        let measure = match self.measure {
            MeasureKind::Shape => Measure::Shape(self.to_spec()?),
            MeasureKind::Cka => Measure::Cka,
            MeasureKind::PdRiemannian => Measure::PdRiemannian { ridge: self.ridge },
            MeasureKind::LinearHeuristic => Measure::LinearHeuristic {
                alpha: self.alpha_or(1.0),
            },
            MeasureKind::Rsa => Measure::Rsa { rdm: self.rdm },
        };
        measure.validate()?;
        Ok(measure)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Sample this many triples instead of the automatic choice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<usize>,
}

impl AuditConfig {
    pub fn tol(&self) -> f64 {
        self.tol.unwrap_or(DEFAULT_TOL)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_smacof_tol")]
    pub tol: f64,
    #[serde(default)]
    pub restarts: usize,
}

fn default_max_iter() -> usize {
    300
}

fn default_smacof_tol() -> f64 {
    1e-9
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            distances: None,
            dims: Vec::new(),
            seeds: Vec::new(),
            max_iter: default_max_iter(),
            tol: default_smacof_tol(),
            restarts: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<PathBuf>,
    #[serde(default = "default_regressor")]
    pub model: RegressorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<HyperGrid>,
    #[serde(default)]
    pub split: Split,
}

fn default_regressor() -> RegressorKind {
    RegressorKind::Ridge
}

impl Default for RegressConfig {
    fn default() -> Self {
        RegressConfig {
            features: None,
            targets: None,
            model: default_regressor(),
            grid: None,
            split: Split::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub m_grid: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

fn default_repeats() -> usize {
    20
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        ConvergeConfig {
            x: None,
            y: None,
            m_grid: Vec::new(),
            repeats: default_repeats(),
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| param(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: Some(path.to_path_buf()),
            message: e.to_string(),
        })?;
        let mut config = Self::parse(&text).map_err(|e| match e {
            CliError::Config { message, .. } => CliError::Config {
                path: Some(path.to_path_buf()),
                message,
            },
            other => other,
        })?;
        config.resolve_relative(path.parent().unwrap_or(Path::new("")));
        Ok(config)
    }

    /// Makes relative paths in the file relative to the file's directory.
    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let fix_opt = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        self.inputs.iter_mut().for_each(|i| fix(&mut i.path));
        fix_opt(&mut self.out);
        fix_opt(&mut self.audit.distances);
        fix_opt(&mut self.embed.distances);
        fix_opt(&mut self.cluster.distances);
        fix_opt(&mut self.regress.features);
        fix_opt(&mut self.regress.targets);
        fix_opt(&mut self.converge.x);
        fix_opt(&mut self.converge.y);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or(0)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}
