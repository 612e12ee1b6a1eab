//! One function per subcommand. Every input is loaded and validated before
//! any computation, and files are written only after computation succeeds.

use std::path::{Path, PathBuf};

use log::info;
use nalgebra::{DMatrix, DVector};
use serde_json::json;
use shape_metrics::analysis::{convergence_curve, fit_regressor, ward_cluster, ConvergenceOptions, RegressorKind};
use shape_metrics::io::{load_representation, read_csv_matrix, read_npy, LoadedRepresentation};
use shape_metrics::pairwise::scan_triangle_violations_with;
use shape_metrics::{
    pairwise_conv_distances, pairwise_distances, smacof_embed, ConvRepresentation, DistanceMatrix, Measure,
    PairwiseOptions, RepresentationMatrix, ScanMode, SmacofOptions,
};

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::output::Outputs;

/// Text printed to standard output after a successful run.
pub type Summary = String;

fn required<'a>(value: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CliError> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("missing {what}")))
}

enum Inputs {
    Matrices(Vec<RepresentationMatrix>),
    Conv(Vec<ConvRepresentation>),
}

fn load_inputs(config: &PipelineConfig) -> Result<Inputs, CliError> {
    if config.inputs.len() < 2 {
        return Err(CliError::Usage(format!(
            "distances needs at least two inputs, got {}",
            config.inputs.len()
        )));
    }
    let mut matrices = Vec::new();
    let mut tensors = Vec::new();
    for entry in &config.inputs {
        match load_representation(&entry.path)? {
            LoadedRepresentation::Matrix(m) => {
                let label = entry.label.clone().unwrap_or_else(|| m.label().to_string());
                matrices.push(m.with_label(label));
            }
            LoadedRepresentation::Conv(t) => {
                let label = entry.label.clone().unwrap_or_else(|| t.label().to_string());
                tensors.push(t.with_label(label));
            }
        }
    }
    match (matrices.is_empty(), tensors.is_empty()) {
        (false, true) => Ok(Inputs::Matrices(matrices)),
        (true, false) => Ok(Inputs::Conv(tensors)),
        _ => Err(CliError::Usage(
            "inputs mix 2-D matrices and 4-D convolutional tensors".into(),
        )),
    }
}

fn load_matrix_rep(path: &Path) -> Result<RepresentationMatrix, CliError> {
    match load_representation(path)? {
        LoadedRepresentation::Matrix(m) => Ok(m),
        LoadedRepresentation::Conv(_) => Err(CliError::Core(shape_metrics::Error::Format {
            path: path.to_path_buf(),
            message: "expected a 2-D representation".into(),
        })),
    }
}

pub fn distances(config: &PipelineConfig, out: &mut Outputs) -> Result<Summary, CliError> {
    let measure = config.metric.to_measure()?;
    let inputs = load_inputs(config)?;
    let opts = PairwiseOptions {
        workers: config.workers(),
        allow_partial: config.metric.allow_partial,
    };
    let d = match (&inputs, measure) {
        (Inputs::Matrices(xs), measure) => {
            info!(
                "computing {} pairs with {}",
                xs.len() * (xs.len() - 1) / 2,
                measure.describe()
            );
            pairwise_distances(xs, &measure, &opts)?
        }
        (Inputs::Conv(ts), Measure::Shape(spec)) => {
            info!(
                "computing {} convolutional pairs with {}",
                ts.len() * (ts.len() - 1) / 2,
                spec.describe()
            );
            pairwise_conv_distances(ts, &spec, &opts)?
        }
        (Inputs::Conv(_), other) => {
            return Err(CliError::Usage(format!(
                "convolutional inputs need a shape metric, got {}",
                other.describe()
            )))
        }
    };
    let path = out.prepare("distances.npy")?;
    out.record_sidecar(&path, "json");
    d.write(&path)?;
    let mut summary = format!("wrote {}×{} distance matrix ({})", d.len(), d.len(), d.measure());
    if !d.failures().is_empty() {
        summary.push_str(&format!("; {} pairs failed", d.failures().len()));
    }
    Ok(summary)
}

pub fn audit(config: &PipelineConfig, out: &mut Outputs) -> Result<Summary, CliError> {
    let d = DistanceMatrix::read(required(&config.audit.distances, "distance matrix path")?)?;
    let mode = match config.audit.sample {
        Some(size) => ScanMode::Sample {
            size,
            seed: config.seed(),
        },
        None => ScanMode::Auto { seed: config.seed() },
    };
    let report = scan_triangle_violations_with(&d, config.audit.tol(), mode)?;
    out.write_json(
        "violations.json",
        &json!({
            "measure": d.measure(),
            "labels": d.labels(),
            "report": report,
        }),
    )?;
    Ok(format!(
        "{} violating pairs of {}; {} violating triples of {} examined",
        report.pairs_with_violation,
        report.total_pairs,
        report.triples.len(),
        report.triples_examined
    ))
}

pub fn embed(config: &PipelineConfig, out: &mut Outputs) -> Result<Summary, CliError> {
    let d = DistanceMatrix::read(required(&config.embed.distances, "distance matrix path")?)?;
    if config.embed.dims.is_empty() {
        return Err(CliError::Usage("embed needs at least one dimension".into()));
    }
    let seeds = if config.embed.seeds.is_empty() {
        vec![config.seed()]
    } else {
        config.embed.seeds.clone()
    };
    let k = d.len();
    for &dim in &config.embed.dims {
        if dim == 0 || dim >= k {
            return Err(CliError::Core(shape_metrics::Error::Parameter(format!(
                "embedding dimension must lie in [1, {}], got {dim}",
                k.saturating_sub(1)
            ))));
        }
    }
    let mut runs = Vec::new();
    for &dim in &config.embed.dims {
        for &seed in &seeds {
            let opts = SmacofOptions {
                dim,
                max_iter: config.embed.max_iter,
                tol: config.embed.tol,
                seed,
                restarts: config.embed.restarts,
            };
            info!("embedding in {dim} dimensions, seed {seed}");
            runs.push(smacof_embed(&d, &opts)?);
        }
    }
    let mut csv = String::from("L,seed,median,p5,p95\n");
    for emb in &runs {
        let dim = emb.coords.ncols();
        let stem = format!("embedding_L{dim}_seed{}", emb.seed);
        let npy = out.prepare(&format!("{stem}.npy"))?;
        shape_metrics::io::write_matrix_npy(&npy, &emb.coords)?;
        out.write_json(
            &format!("{stem}.json"),
            &json!({
                "labels": d.labels(),
                "measure": d.measure(),
                "dim": dim,
                "seed": emb.seed,
                "iterations": emb.iterations,
                "converged": emb.converged,
                "stress_trace": emb.stress_trace,
                "distortion": emb.distortion,
            }),
        )?;
        let s = &emb.distortion;
        csv.push_str(&format!("{dim},{},{},{},{}\n", emb.seed, s.median, s.p5, s.p95));
    }
    out.write_text("distortion.csv", &csv)?;
    Ok(format!("wrote {} embeddings", runs.len()))
}

pub fn cluster(config: &PipelineConfig, out: &mut Outputs) -> Result<Summary, CliError> {
    let d = DistanceMatrix::read(required(&config.cluster.distances, "distance matrix path")?)?;
    let tree = ward_cluster(&d)?;
    out.write_json(
        "dendrogram.json",
        &json!({
            "linkage": "ward",
            "measure": d.measure(),
            "leaf_labels": tree.leaf_labels,
            "merges": tree.merges,
        }),
    )?;
    Ok(format!("wrote dendrogram with {} merges", tree.merges.len()))
}

fn load_targets(path: &Path) -> Result<DVector<f64>, CliError> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let values = if is_csv {
        let m = read_csv_matrix(path)?;
        if m.nrows() != 1 && m.ncols() != 1 {
            return Err(target_shape_error(path, &[m.nrows(), m.ncols()]));
        }
        m.iter().copied().collect::<Vec<_>>()
    } else {
        let array = read_npy(path)?;
        match array.shape[..] {
            [_] | [_, 1] | [1, _] => array.data,
            _ => return Err(target_shape_error(path, &array.shape)),
        }
    };
    Ok(DVector::from_vec(values))
}

fn target_shape_error(path: &Path, shape: &[usize]) -> CliError {
    CliError::Core(shape_metrics::Error::Format {
        path: path.to_path_buf(),
        message: format!("targets must be a vector, got shape {shape:?}"),
    })
}

pub fn regress(config: &PipelineConfig, out: &mut Outputs) -> Result<Summary, CliError> {
    let rc = &config.regress;
    let features = load_matrix_rep(required(&rc.features, "feature matrix path")?)?;
    let targets = load_targets(required(&rc.targets, "target vector path")?)?;
    let z: DMatrix<f64> = features.into_data();
    if targets.len() != z.nrows() {
        return Err(CliError::Core(shape_metrics::Error::Shape(format!(
            "{} feature rows but {} targets",
            z.nrows(),
            targets.len()
        ))));
    }
    let grid = rc.grid.clone().unwrap_or_default();
    let report = fit_regressor(&z, &targets, rc.model, &grid, &rc.split, config.seed())?;
    let test_rows: Vec<usize> = report.test_idx.clone();
    let test_z = DMatrix::from_fn(test_rows.len(), z.ncols(), |r, c| z[(test_rows[r], c)]);
    let predictions = report.model.predict(&test_z);
    let model = &report.model;
    out.write_json(
        "regression.json",
        &json!({
            "model": {
                "kind": model.kind,
                "ridge": model.ridge,
                "bandwidth": model.bandwidth,
                "intercept": model.intercept,
                "weights": model.weights.as_slice(),
                "weights_are_dual": model.kind == RegressorKind::KernelRidgeRbf,
            },
            "train_r2": report.train_r2,
            "val_r2": report.val_r2,
            "test_r2": report.test_r2,
            "grid": grid,
            "grid_scores": report.grid_scores,
            "split": rc.split,
            "seed": report.seed,
            "train_idx": report.train_idx,
            "val_idx": report.val_idx,
            "test_idx": report.test_idx,
            "test_predictions": predictions.as_slice(),
        }),
    )?;
    Ok(format!("test R^2 = {}", report.test_r2))
}

pub fn converge(config: &PipelineConfig, out: &mut Outputs) -> Result<Summary, CliError> {
    let cc = &config.converge;
    let measure = config.metric.to_measure()?;
    let x = load_matrix_rep(required(&cc.x, "first representation path")?)?;
    let y = load_matrix_rep(required(&cc.y, "second representation path")?)?;
    let opts = ConvergenceOptions {
        m_grid: cc.m_grid.clone(),
        repeats: cc.repeats,
        seed: config.seed(),
        workers: config.workers(),
    };
    let curve = convergence_curve(&x, &y, &measure, &opts)?;
    let csv = out.prepare("convergence.csv")?;
    curve.write_csv(&csv)?;
    out.write_json(
        "convergence_summary.json",
        &json!({
            "measure": measure.describe(),
            "repeats": cc.repeats,
            "seed": config.seed(),
            "summary": curve.summary,
        }),
    )?;
    Ok(format!(
        "wrote convergence curve over {} sample sizes",
        curve.summary.len()
    ))
}
