//! Euclidean embedding of a distance matrix by SMACOF, and multiplicative
//! distortion of the result.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alignment;
use crate::error::{Error, Result};
use crate::linalg;
use crate::pairwise::DistanceMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmacofOptions {
    pub dim: usize,
    pub max_iter: usize,
    /// Stop once the relative stress decrease falls below this.
    pub tol: f64,
    pub seed: u64,
    /// Extra runs from random starts; the lowest final stress wins.
    pub restarts: usize,
}

impl SmacofOptions {
    pub fn new(dim: usize) -> Self {
        SmacofOptions {
            dim,
            max_iter: 300,
            tol: 1e-9,
            seed: 0,
            restarts: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionStats {
    pub median: f64,
    pub p5: f64,
    pub p25: f64,
    pub p75: f64,
    pub p95: f64,
    pub iqr: f64,
    /// Pairs included in the statistics.
    pub pairs: usize,
    /// Pairs with zero target distance, excluded.
    pub zero_distance_pairs: usize,
    /// Included pairs embedded at the same point despite a nonzero target.
    pub infinite_pairs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDistortion {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Distortion {
    pub stats: DistortionStats,
    pub values: Vec<PairDistortion>,
}

#[derive(Clone, Debug)]
pub struct Embedding {
    /// `K × L` coordinates.
    pub coords: DMatrix<f64>,
    /// Raw stress at the start and after every accepted iteration.
    pub stress_trace: Vec<f64>,
    pub distortion: DistortionStats,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
}

/// `Σ_{i<j} (D_ij − ‖yᵢ − yⱼ‖)²`.
pub fn raw_stress(d: &DMatrix<f64>, coords: &DMatrix<f64>) -> f64 {
    let e = linalg::row_distances(coords);
    let k = d.nrows();
    let mut s = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            let r = d[(i, j)] - e[(i, j)];
            s += r * r;
        }
    }
    s
}

/// Classical (Torgerson) MDS: top eigenvectors of `−½ J D² J`.
///
/// Returns the coordinates and the eigenvalues used (possibly non-positive).
pub fn classical_mds(d: &DMatrix<f64>, dim: usize) -> (DMatrix<f64>, Vec<f64>) {
    let k = d.nrows();
    let b = linalg::double_center(&d.map(|v| v * v)) * -0.5;
    let (values, vectors) = linalg::sym_eigen(&b);
    let mut coords = DMatrix::zeros(k, dim);
    let mut used = Vec::with_capacity(dim);
    for c in 0..dim.min(k) {
        let lambda = values[c];
        used.push(lambda);
        if lambda > 0.0 {
            coords.set_column(c, &(vectors.column(c) * lambda.sqrt()));
        }
    }
    (coords, used)
}

fn guttman(d: &DMatrix<f64>, coords: &DMatrix<f64>) -> DMatrix<f64> {
    let k = d.nrows();
    let e = linalg::row_distances(coords);
    let mut b = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            if i != j && e[(i, j)] > 0.0 {
                b[(i, j)] = -d[(i, j)] / e[(i, j)];
            }
        }
        let row_sum: f64 = b.row(i).sum();
        b[(i, i)] = -row_sum;
    }
    (b * coords) / k as f64
}

struct Run {
    coords: DMatrix<f64>,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn run_smacof(d: &DMatrix<f64>, mut coords: DMatrix<f64>, max_iter: usize, tol: f64) -> Run {
    let mut stress = raw_stress(d, &coords);
    let mut trace = vec![stress];
    let mut converged = stress == 0.0;
    let mut iterations = 0;
    while !converged && iterations < max_iter {
        let next = guttman(d, &coords);
        let next_stress = raw_stress(d, &next);
        iterations += 1;
        // rounding can produce a tiny increase at the fixed point
        if next_stress > stress {
            converged = true;
            break;
        }
        let decrease = stress - next_stress;
        coords = next;
        trace.push(next_stress);
        converged = next_stress == 0.0 || decrease / stress < tol;
        stress = next_stress;
    }
    Run {
        coords,
        trace,
        iterations,
        converged,
    }
}

fn check_input(d: &DistanceMatrix, dim: usize) -> Result<()> {
    let k = d.len();
    if dim < 1 || dim + 1 > k {
        return Err(Error::Parameter(format!(
            "embedding dimension must lie in [1, K-1] = [1, {}], got {dim}",
            k.saturating_sub(1)
        )));
    }
    if d.values().iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("distance matrix has missing entries".into()));
    }
    Ok(())
}

/// SMACOF from a classical-MDS start.
///
/// Initial dimensions with non-positive classical-MDS eigenvalue would stay
/// at zero under the Guttman transform; they are filled with small seeded noise.
pub fn smacof_embed(d: &DistanceMatrix, opts: &SmacofOptions) -> Result<Embedding> {
    check_input(d, opts.dim)?;
    if opts.tol < 0.0 || !opts.tol.is_finite() {
        return Err(Error::Parameter(format!(
            "tolerance must be non-negative, got {}",
            opts.tol
        )));
    }
    let target = d.values();
    let k = d.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let rms = (target.norm_squared() / (k * k) as f64).sqrt();

    let (mut init, eigen) = classical_mds(target, opts.dim);
    let top = eigen.first().copied().unwrap_or(0.0).max(0.0);
    let noise = 1e-3 * if top > 0.0 { (top / k as f64).sqrt() } else { rms };
    for (c, &lambda) in eigen.iter().enumerate() {
        if lambda <= linalg::EIGEN_FLOOR * top {
            for r in 0..k {
                init[(r, c)] = noise * (rng.random::<f64>() * 2.0 - 1.0);
            }
        }
    }
    let mut best = run_smacof(target, init, opts.max_iter, opts.tol);
    for _ in 0..opts.restarts {
        let start = DMatrix::from_fn(k, opts.dim, |_, _| rms * (rng.random::<f64>() * 2.0 - 1.0));
        let run = run_smacof(target, start, opts.max_iter, opts.tol);
        if run.trace.last() < best.trace.last() {
            best = run;
        }
    }
    let distortion = compute_distortion(d, &best.coords)?.stats;
    Ok(Embedding {
        coords: best.coords,
        stress_trace: best.trace,
        distortion,
        seed: opts.seed,
        iterations: best.iterations,
        converged: best.converged,
    })
}

/// Per-pair `max(d/‖Δy‖, ‖Δy‖/d)` and summary statistics.
pub fn compute_distortion(d: &DistanceMatrix, coords: &DMatrix<f64>) -> Result<Distortion> {
    let k = d.len();
    if coords.nrows() != k {
        return Err(Error::Shape(format!(
            "{} embedded points for a {k}x{k} distance matrix",
            coords.nrows()
        )));
    }
    let embedded = linalg::row_distances(coords);
    let mut values = Vec::new();
    let mut zero = 0;
    let mut infinite = 0;
    for (i, j, target) in d.pairs() {
        if target.is_nan() {
            continue;
        }
        if target == 0.0 {
            zero += 1;
            continue;
        }
        let e = embedded[(i, j)];
        let value = if e == 0.0 {
            infinite += 1;
            f64::INFINITY
        } else {
            (target / e).max(e / target)
        };
        values.push(PairDistortion { i, j, value });
    }
    let mut sorted: Vec<f64> = values.iter().map(|p| p.value).collect();
    sorted.sort_by(f64::total_cmp);
    let pct = |q| linalg::percentile_sorted(&sorted, q);
    let (p25, p75) = (pct(25.0), pct(75.0));
    Ok(Distortion {
        stats: DistortionStats {
            median: pct(50.0),
            p5: pct(5.0),
            p25,
            p75,
            p95: pct(95.0),
            iqr: p75 - p25,
            pairs: sorted.len(),
            zero_distance_pairs: zero,
            infinite_pairs: infinite,
        },
        values,
    })
}

/// Rotates every embedding onto the first one by Procrustes on centered coordinates.
pub fn align_embeddings(zs: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
    let Some(reference) = zs.first() else {
        return Ok(Vec::new());
    };
    let centered_ref = linalg::center_columns(reference);
    let mut out = Vec::with_capacity(zs.len());
    out.push(reference.clone());
    for z in &zs[1..] {
        if z.shape() != reference.shape() {
            return Err(Error::Shape(format!(
                "embedding is {}x{}, reference is {}x{}",
                z.nrows(),
                z.ncols(),
                reference.nrows(),
                reference.ncols()
            )));
        }
        let q = alignment::solve_procrustes(&centered_ref, &linalg::center_columns(z))?.transform;
        out.push(z * q);
    }
    Ok(out)
}
