use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::metrics::Measure;
use crate::pairwise::with_pool;
use crate::representations::RepresentationMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceOptions {
    pub m_grid: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub workers: usize,
}

impl ConvergenceOptions {
    pub fn new(m_grid: Vec<usize>, repeats: usize, seed: u64) -> Self {
        ConvergenceOptions {
            m_grid,
            repeats,
            seed,
            workers: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub m: usize,
    pub repeat: usize,
    pub distance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub m: usize,
    pub mean: f64,
    pub p10: f64,
    pub p90: f64,
}

impl ConvergenceSummary {
    pub fn band(&self) -> f64 {
        self.p90 - self.p10
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceCurve {
    pub records: Vec<ConvergenceRecord>,
    pub summary: Vec<ConvergenceSummary>,
}

impl ConvergenceCurve {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        writeln!(file, "m,repeat,distance").map_err(io_err)?;
        for r in &self.records {
            writeln!(file, "{},{},{:.17e}", r.m, r.repeat, r.distance).map_err(io_err)?;
        }
        file.flush().map_err(io_err)
    }
}

/// Row indices for one cell, drawn without replacement and sorted so that
/// `m` equal to the full count reproduces the full-data distance exactly.
fn sample_rows(total: usize, m: usize, seed: u64, cell: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cell);
    let mut idx = rand::seq::index::sample(&mut rng, total, m).into_vec();
    idx.sort_unstable();
    idx
}

/// Distance between row subsamples of two networks over a grid of sample
/// counts, with the same stimuli drawn for both networks.
pub fn convergence_curve(
    xi: &RepresentationMatrix,
    xj: &RepresentationMatrix,
    measure: &Measure,
    opts: &ConvergenceOptions,
) -> Result<ConvergenceCurve> {
    measure.validate()?;
    let total = xi.m();
    if xj.m() != total {
        return Err(Error::Shape(format!(
            "networks have different stimulus counts: {} vs {}",
            total,
            xj.m()
        )));
    }
    if opts.m_grid.is_empty() || opts.repeats == 0 {
        return Err(Error::Parameter(
            "convergence needs a non-empty grid and at least one repeat".into(),
        ));
    }
    if let Some(&m) = opts.m_grid.iter().find(|&&m| m < 2 || m > total) {
        return Err(Error::Parameter(format!("sample count {m} outside [2, {total}]")));
    }
    let cells: Vec<(usize, usize, usize)> = opts
        .m_grid
        .iter()
        .enumerate()
        .flat_map(|(mi, &m)| (0..opts.repeats).map(move |r| (mi, m, r)))
        .collect();
    let seed = opts.seed;
    let distances: Vec<Result<f64>> = with_pool(opts.workers, || {
        cells
            .par_iter()
            .map(|&(mi, m, r)| {
                let rows = sample_rows(total, m, seed, ((mi as u64) << 32) | r as u64);
                measure.distance(&xi.select_rows(&rows), &xj.select_rows(&rows))
            })
            .collect()
    })?;
    let mut records = Vec::with_capacity(cells.len());
    for (&(_, m, repeat), d) in cells.iter().zip(distances) {
        records.push(ConvergenceRecord {
            m,
            repeat,
            distance: d?,
        });
    }
    let summary = opts
        .m_grid
        .iter()
        .enumerate()
        .map(|(mi, &m)| {
            let mut vals: Vec<f64> = records[mi * opts.repeats..(mi + 1) * opts.repeats]
                .iter()
                .map(|r| r.distance)
                .collect();
            vals.sort_by(f64::total_cmp);
            ConvergenceSummary {
                m,
                mean: vals.iter().sum::<f64>() / vals.len() as f64,
                p10: linalg::percentile_sorted(&vals, 10.0),
                p90: linalg::percentile_sorted(&vals, 90.0),
            }
        })
        .collect();
    Ok(ConvergenceCurve { records, summary })
}
