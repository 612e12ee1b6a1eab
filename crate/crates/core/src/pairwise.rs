//! K×K distance matrices and triangle-inequality audits.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::metrics::{self, Measure, MetricSpec};
use crate::representations::{ConvRepresentation, RepresentationMatrix};

pub const DEFAULT_TOL: f64 = 1e-8;
/// Above this many items the triangle scan samples triples instead of enumerating.
pub const FULL_SCAN_LIMIT: usize = 200;
pub const DEFAULT_SAMPLE: usize = 100_000;

const SYMMETRY_TOL: f64 = 1e-10;

/// A pair whose distance could not be computed (only under `allow_partial`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairFailure {
    pub i: usize,
    pub j: usize,
    pub kind: String,
    pub message: String,
}

/// Symmetric, zero-diagonal matrix of pairwise distances.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    values: DMatrix<f64>,
    labels: Vec<String>,
    measure: String,
    parameters: serde_json::Value,
    failures: Vec<PairFailure>,
}

/// JSON sidecar stored next to the NPY values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistanceSidecar {
    pub labels: Vec<String>,
    pub measure: String,
    pub tool_version: String,
    #[serde(default)]
    pub parameters: serde_json::Value,
    #[serde(default)]
    pub failed_pairs: Vec<PairFailure>,
}

impl DistanceMatrix {
    /// Validates symmetry, zero diagonal and finite non-negative entries.
    pub fn new(values: DMatrix<f64>, labels: Vec<String>, measure: impl Into<String>) -> Result<Self> {
        Self::validate(&values, false)?;
        let labels = Self::fill_labels(labels, values.nrows())?;
        Ok(DistanceMatrix {
            values,
            labels,
            measure: measure.into(),
            parameters: serde_json::Value::Null,
            failures: Vec::new(),
        })
    }

    fn fill_labels(labels: Vec<String>, k: usize) -> Result<Vec<String>> {
        if labels.is_empty() {
            return Ok((0..k).map(|i| i.to_string()).collect());
        }
        if labels.len() != k {
            return Err(Error::Shape(format!("{} labels for {k} items", labels.len())));
        }
        Ok(labels)
    }

    fn validate(values: &DMatrix<f64>, allow_nan: bool) -> Result<()> {
        let k = values.nrows();
        if values.ncols() != k {
            return Err(Error::InvalidInput(format!(
                "distance matrix must be square, got {}x{}",
                k,
                values.ncols()
            )));
        }
        for i in 0..k {
            if values[(i, i)] != 0.0 {
                return Err(Error::InvalidInput(format!("nonzero diagonal at {i}")));
            }
            for j in (i + 1)..k {
                let (a, b) = (values[(i, j)], values[(j, i)]);
                if a.is_nan() || b.is_nan() {
                    if allow_nan && a.is_nan() && b.is_nan() {
                        continue;
                    }
                    return Err(Error::InvalidInput(format!("NaN distance at ({i}, {j})")));
                }
                if !a.is_finite() || a < 0.0 || b < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "distance at ({i}, {j}) must be finite and non-negative, got {a}"
                    )));
                }
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn measure(&self) -> &str {
        &self.measure
    }

    pub fn parameters(&self) -> &serde_json::Value {
        &self.parameters
    }

    pub fn failures(&self) -> &[PairFailure] {
        &self.failures
    }

    pub fn with_parameters(mut self, parameters: serde_json::Value) -> Self {
        self.parameters = parameters;
        self
    }

    /// Upper-triangular entries `(i, j, d)` with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let k = self.len();
        (0..k).flat_map(move |i| ((i + 1)..k).map(move |j| (i, j, self.values[(i, j)])))
    }

    pub fn sidecar(&self) -> DistanceSidecar {
        DistanceSidecar {
            labels: self.labels.clone(),
            measure: self.measure.clone(),
            tool_version: crate::VERSION.to_string(),
            parameters: self.parameters.clone(),
            failed_pairs: self.failures.clone(),
        }
    }

    /// Writes `path` (NPY values) and a `.json` sidecar beside it.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        io::write_matrix_npy(path, &self.values)?;
        let sidecar = io::sidecar_path(path, "json");
        let text = serde_json::to_string_pretty(&self.sidecar()).expect("sidecar serializes");
        std::fs::write(&sidecar, text + "\n").map_err(|source| Error::Io {
            path: sidecar.clone(),
            source,
        })
    }

    /// Reads NPY values plus the sidecar if one exists.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let array = io::read_npy(path)?;
        let values = array.into_matrix().ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            message: "distance matrix must be 2-D".into(),
        })?;
        let sidecar_path = io::sidecar_path(path, "json");
        let sidecar: Option<DistanceSidecar> = if sidecar_path.exists() {
            let text = std::fs::read_to_string(&sidecar_path).map_err(|source| Error::Io {
                path: sidecar_path.clone(),
                source,
            })?;
            Some(serde_json::from_str(&text).map_err(|e| Error::Format {
                path: sidecar_path.clone(),
                message: e.to_string(),
            })?)
        } else {
            None
        };
        let allow_nan = sidecar.as_ref().is_some_and(|s| !s.failed_pairs.is_empty());
        Self::validate(&values, allow_nan).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let k = values.nrows();
        let (labels, measure, parameters, failures) = match sidecar {
            Some(s) => (s.labels, s.measure, s.parameters, s.failed_pairs),
            None => (Vec::new(), "unknown".to_string(), serde_json::Value::Null, Vec::new()),
        };
        Ok(DistanceMatrix {
            values,
            labels: Self::fill_labels(labels, k)?,
            measure,
            parameters,
            failures,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PairwiseOptions {
    /// Worker threads; 0 uses all available cores.
    pub workers: usize,
    /// Record failing pairs as NaN instead of failing the whole computation.
    pub allow_partial: bool,
}

impl Default for PairwiseOptions {
    fn default() -> Self {
        PairwiseOptions {
            workers: 1,
            allow_partial: false,
        }
    }
}

pub(crate) fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn upper_pairs(k: usize) -> Vec<(usize, usize)> {
    (0..k).flat_map(|i| ((i + 1)..k).map(move |j| (i, j))).collect()
}

fn assemble(
    k: usize,
    pairs: &[(usize, usize)],
    results: Vec<Result<f64>>,
    opts: &PairwiseOptions,
) -> Result<(DMatrix<f64>, Vec<PairFailure>)> {
    let mut values = DMatrix::zeros(k, k);
    let mut failures = Vec::new();
    for (&(i, j), res) in pairs.iter().zip(results) {
        let outcome = match res {
            Ok(d) if !d.is_finite() => Err(Error::Numerical(format!("distance evaluated to {d}"))),
            other => other,
        };
        let d = match outcome {
            Ok(d) => d,
            Err(e) => partial(i, j, e, opts, &mut failures)?,
        };
        values[(i, j)] = d;
        values[(j, i)] = d;
    }
    Ok((values, failures))
}

fn partial(i: usize, j: usize, e: Error, opts: &PairwiseOptions, failures: &mut Vec<PairFailure>) -> Result<f64> {
    if !opts.allow_partial {
        return Err(Error::Pair {
            i,
            j,
            source: Box::new(e),
        });
    }
    failures.push(PairFailure {
        i,
        j,
        kind: e.kind().to_string(),
        message: e.to_string(),
    });
    Ok(f64::NAN)
}

/// Distances between every pair of representations.
///
/// Each unordered pair is evaluated once; the result does not depend on the
/// number of workers.
pub fn pairwise_distances(
    reps: &[RepresentationMatrix],
    measure: &Measure,
    opts: &PairwiseOptions,
) -> Result<DistanceMatrix> {
    measure.validate()?;
    let k = reps.len();
    if k < 2 {
        return Err(Error::Parameter(format!("need at least two representations, got {k}")));
    }
    let pairs = upper_pairs(k);
    let results = with_pool(opts.workers, || -> Result<Vec<Result<f64>>> {
        match measure {
            Measure::Shape(spec) => {
                let feats = metrics::prepare_features(reps, &spec.feature)?;
                Ok(pairs
                    .par_iter()
                    .map(|&(i, j)| metrics::aligned_distance(&feats[i], &feats[j], spec.form, spec.group))
                    .collect())
            }
            other => Ok(pairs
                .par_iter()
                .map(|&(i, j)| other.distance(&reps[i], &reps[j]))
                .collect()),
        }
    })??;
    let (values, failures) = assemble(k, &pairs, results, opts)?;
    Ok(DistanceMatrix {
        values,
        labels: reps.iter().map(|r| r.label().to_string()).collect(),
        measure: measure.describe(),
        parameters: serde_json::to_value(measure).expect("measure serializes"),
        failures,
    })
}

/// Distances between every pair of convolutional representations.
pub fn pairwise_conv_distances(
    tensors: &[ConvRepresentation],
    spec: &MetricSpec,
    opts: &PairwiseOptions,
) -> Result<DistanceMatrix> {
    spec.validate()?;
    let k = tensors.len();
    if k < 2 {
        return Err(Error::Parameter(format!("need at least two representations, got {k}")));
    }
    let pairs = upper_pairs(k);
    let results = with_pool(opts.workers, || {
        pairs
            .par_iter()
            .map(|&(i, j)| metrics::conv_distance(&tensors[i], &tensors[j], spec))
            .collect::<Vec<_>>()
    })?;
    let (values, failures) = assemble(k, &pairs, results, opts)?;
    Ok(DistanceMatrix {
        values,
        labels: tensors.iter().map(|t| t.label().to_string()).collect(),
        measure: spec.describe(),
        parameters: serde_json::to_value(Measure::Shape(*spec)).expect("spec serializes"),
        failures,
    })
}

/// One violated triangle: `slack = d(i,j) − d(i,k) − d(k,j) > tol`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub triples: Vec<Violation>,
    /// Unordered pairs `{i, j}` that are the long side of at least one violation.
    pub pairs_with_violation: usize,
    pub total_pairs: usize,
    pub triples_examined: usize,
    /// Sample size when triples were sampled rather than enumerated.
    pub sample_size: Option<usize>,
    pub tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanMode {
    /// Enumerate when `K ≤ 200`, otherwise sample 10⁵ triples.
    Auto {
        seed: u64,
    },
    Exhaustive,
    Sample {
        size: usize,
        seed: u64,
    },
}

/// Checks the triangle inequality on every `(pair, midpoint)` triple.
pub fn scan_triangle_violations(d: &DistanceMatrix, tol: f64) -> Result<ViolationReport> {
    scan_triangle_violations_with(d, tol, ScanMode::Auto { seed: 0 })
}

pub fn scan_triangle_violations_with(d: &DistanceMatrix, tol: f64, mode: ScanMode) -> Result<ViolationReport> {
    DistanceMatrix::validate(d.values(), !d.failures.is_empty())?;
    let k = d.len();
    let mode = match mode {
        ScanMode::Auto { seed } if k > FULL_SCAN_LIMIT => ScanMode::Sample {
            size: DEFAULT_SAMPLE,
            seed,
        },
        ScanMode::Auto { .. } => ScanMode::Exhaustive,
        other => other,
    };
    let mut triples = Vec::new();
    let mut examined = 0usize;
    let check = |i: usize, j: usize, m: usize, triples: &mut Vec<Violation>| {
        let slack = d.get(i, j) - d.get(i, m) - d.get(m, j);
        // NaN entries fail the comparison and are skipped
        if slack > tol {
            triples.push(Violation { i, j, k: m, slack });
        }
    };
    let sample_size = match mode {
        ScanMode::Exhaustive | ScanMode::Auto { .. } => {
            for i in 0..k {
                for j in (i + 1)..k {
                    for m in 0..k {
                        if m != i && m != j {
                            check(i, j, m, &mut triples);
                            examined += 1;
                        }
                    }
                }
            }
            None
        }
        ScanMode::Sample { size, seed } => {
            if k < 3 {
                return Err(Error::Parameter("sampling triples needs K >= 3".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..size {
                let i = rng.random_range(0..k);
                let mut j = rng.random_range(0..k - 1);
                if j >= i {
                    j += 1;
                }
                let mut m = rng.random_range(0..k - 2);
                for skip in [i.min(j), i.max(j)] {
                    if m >= skip {
                        m += 1;
                    }
                }
                check(i.min(j), i.max(j), m, &mut triples);
                examined += 1;
            }
            Some(size)
        }
    };
    let pairs: BTreeSet<(usize, usize)> = triples.iter().map(|v| (v.i, v.j)).collect();
    Ok(ViolationReport {
        pairs_with_violation: pairs.len(),
        total_pairs: k * k.saturating_sub(1) / 2,
        triples_examined: examined,
        sample_size,
        triples,
        tol,
    })
}
