//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the library's decompositions: eigenvalues come from
//! cyclic Jacobi, singular values from one-sided Jacobi, linear systems from
//! Gaussian elimination.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use shape_metrics::{ConvRepresentation, RepresentationMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal))
}

pub fn random_rep(rng: &mut ChaCha8Rng, m: usize, n: usize) -> RepresentationMatrix {
    RepresentationMatrix::new(normal_matrix(rng, m, n)).unwrap()
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: [usize; 4]) -> ConvRepresentation {
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    ConvRepresentation::new(data, shape).unwrap()
}

/// Haar-ish orthogonal matrix by Gram–Schmidt on a Gaussian matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut q = normal_matrix(rng, n, n);
    for j in 0..n {
        for _ in 0..2 {
            for k in 0..j {
                let proj: f64 = (0..n).map(|r| q[(r, j)] * q[(r, k)]).sum();
                for r in 0..n {
                    q[(r, j)] -= proj * q[(r, k)];
                }
            }
        }
        let norm: f64 = (0..n).map(|r| q[(r, j)] * q[(r, j)]).sum::<f64>().sqrt();
        for r in 0..n {
            q[(r, j)] /= norm;
        }
    }
    q
}

/// Invertible matrix `Q₁·diag(s)·Q₂` with singular values in `[0.5, 2]`.
pub fn random_invertible(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let s = DMatrix::from_fn(n, n, |r, c| if r == c { rng.random_range(0.5..2.0) } else { 0.0 });
    random_orthogonal(rng, n) * s * random_orthogonal(rng, n)
}

pub fn determinant(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut a = m.clone();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs()))
            .unwrap();
        if a[(pivot, col)] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap_rows(pivot, col);
            det = -det;
        }
        det *= a[(col, col)];
        for r in (col + 1)..n {
            let f = a[(r, col)] / a[(col, col)];
            for c in col..n {
                a[(r, c)] -= f * a[(col, c)];
            }
        }
    }
    det
}

pub fn random_rotation(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut q = random_orthogonal(rng, n);
    if determinant(&q) < 0.0 {
        for r in 0..n {
            q[(r, 0)] = -q[(r, 0)];
        }
    }
    q
}

pub fn permutation_matrix(perm: &[usize]) -> DMatrix<f64> {
    let n = perm.len();
    DMatrix::from_fn(n, n, |r, c| if perm[c] == r { 1.0 } else { 0.0 })
}

pub fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        p.swap(i, j);
    }
    p
}

/// All permutations of `0..n` (Heap's algorithm).
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        heap(k - 1, a, out);
        for i in 0..(k - 1) {
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, out);
        }
    }
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

pub fn cross(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.ncols(), b.ncols(), |r, c| {
        (0..a.nrows()).map(|i| a[(i, r)] * b[(i, c)]).sum()
    })
}

/// `max_Π Tr[AᵀB·Π]` by enumeration.
pub fn brute_permutation_objective(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let m = cross(a, b);
    all_permutations(a.ncols())
        .iter()
        .map(|p| (0..p.len()).map(|r| m[(p[r], r)]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Best `Tr[M·T]` over a 3600-step angle grid of 2×2 rotations, and
/// optionally reflections.
pub fn angle_grid_objective(m: &DMatrix<f64>, reflections: bool) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for step in 0..3600 {
        let t = step as f64 * std::f64::consts::TAU / 3600.0;
        let (s, c) = t.sin_cos();
        let rot = m[(0, 0)] * c + m[(0, 1)] * s - m[(1, 0)] * s + m[(1, 1)] * c;
        best = best.max(rot);
        if reflections {
            let refl = m[(0, 0)] * c + m[(0, 1)] * s + m[(1, 0)] * s - m[(1, 1)] * c;
            best = best.max(refl);
        }
    }
    best
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix; values descending.
pub fn jacobi_eigen(s: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = s.nrows();
    let mut a = (s + s.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let scale: f64 = a.iter().map(|x| x * x).sum();
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(y, y)].total_cmp(&a[(x, x)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Singular values by one-sided (Hestenes) Jacobi, descending.
pub fn jacobi_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut a = if m.nrows() >= m.ncols() {
        m.clone()
    } else {
        m.transpose()
    };
    let n = a.ncols();
    let rows = a.nrows();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    alpha += a[(i, p)] * a[(i, p)];
                    beta += a[(i, q)] * a[(i, q)];
                    gamma += a[(i, p)] * a[(i, q)];
                }
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let ap = a[(i, p)];
                    let aq = a[(i, q)];
                    a[(i, p)] = c * ap - s * aq;
                    a[(i, q)] = s * ap + c * aq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..n)
        .map(|j| (0..rows).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    jacobi_singular_values(m).iter().sum()
}

pub fn sym_power(s: &DMatrix<f64>, p: f64) -> DMatrix<f64> {
    let (vals, vecs) = jacobi_eigen(s);
    let n = vals.len();
    DMatrix::from_fn(n, n, |r, c| {
        (0..n)
            .map(|k| vecs[(r, k)] * vals[k].max(0.0).powf(p) * vecs[(c, k)])
            .sum()
    })
}

pub fn centered(x: &DMatrix<f64>) -> DMatrix<f64> {
    let m = x.nrows() as f64;
    let mut out = x.clone();
    for j in 0..x.ncols() {
        let mean: f64 = (0..x.nrows()).map(|i| x[(i, j)]).sum::<f64>() / m;
        for i in 0..x.nrows() {
            out[(i, j)] -= mean;
        }
    }
    out
}

pub fn frob(x: &DMatrix<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Mean canonical correlation: singular values of `Σxx^{-1/2} Σxy Σyy^{-1/2}`.
pub fn textbook_cca_mean(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let xc = centered(x);
    let yc = centered(y);
    let sxx = cross(&xc, &xc);
    let syy = cross(&yc, &yc);
    let sxy = cross(&xc, &yc);
    let core = sym_power(&sxx, -0.5) * sxy * sym_power(&syy, -0.5);
    let rho = jacobi_singular_values(&core);
    rho.iter().sum::<f64>() / rho.len() as f64
}

/// `arccos` of centered linear CKA from explicit Gram matrices.
pub fn cka_angle(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let m = x.nrows();
    let h = DMatrix::from_fn(m, m, |r, c| if r == c { 1.0 } else { 0.0 } - 1.0 / m as f64);
    let k = &h * (x * x.transpose()) * &h;
    let l = &h * (y * y.transpose()) * &h;
    let kl: f64 = k.iter().zip(l.iter()).map(|(a, b)| a * b).sum();
    (kl / (frob(&k) * frob(&l))).clamp(-1.0, 1.0).acos()
}

/// `sqrt(Σ log² λ)` for the generalized eigenvalues of `(b, a)` via `a^{-1/2} b a^{-1/2}`.
pub fn pd_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let w = sym_power(a, -0.5);
    let (vals, _) = jacobi_eigen(&(&w * b * &w));
    vals.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt()
}

/// Solves `a·x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[(x, col)].abs().total_cmp(&m[(y, col)].abs()))
            .unwrap();
        m.swap_rows(pivot, col);
        rhs.swap(pivot, col);
        for r in (col + 1)..n {
            let f = m[(r, col)] / m[(col, col)];
            for c in col..n {
                m[(r, c)] -= f * m[(col, c)];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|c| m[(r, c)] * x[c]).sum();
        x[r] = (rhs[r] - s) / m[(r, r)];
    }
    x
}

/// Naive Ward agglomeration: recomputes every cluster-pair cost from member
/// sets each step. Returns merged member sets (sorted) and heights.
pub fn naive_ward(d: &DMatrix<f64>) -> Vec<(Vec<usize>, f64)> {
    let k = d.nrows();
    let mut clusters: Vec<Vec<usize>> = (0..k).map(|i| vec![i]).collect();
    let mean_sq = |a: &[usize], b: &[usize]| -> f64 {
        let mut s = 0.0;
        for &i in a {
            for &j in b {
                s += d[(i, j)] * d[(i, j)];
            }
        }
        s / (a.len() * b.len()) as f64
    };
    let mut out = Vec::new();
    while clusters.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for x in 0..clusters.len() {
            for y in (x + 1)..clusters.len() {
                let (a, b) = (&clusters[x], &clusters[y]);
                let gap = mean_sq(a, b) - 0.5 * mean_sq(a, a) - 0.5 * mean_sq(b, b);
                let (na, nb) = (a.len() as f64, b.len() as f64);
                let cost = (2.0 * na * nb / (na + nb) * gap).max(0.0).sqrt();
                if cost < best.0 {
                    best = (cost, x, y);
                }
            }
        }
        let (h, x, y) = best;
        let b = clusters.remove(y);
        let mut merged = clusters.remove(x);
        merged.extend(b);
        merged.sort_unstable();
        out.push((merged.clone(), h));
        clusters.push(merged);
    }
    out
}

pub fn euclidean_distances(points: &DMatrix<f64>) -> DMatrix<f64> {
    let k = points.nrows();
    DMatrix::from_fn(k, k, |i, j| {
        (0..points.ncols())
            .map(|c| (points[(i, c)] - points[(j, c)]).powi(2))
            .sum::<f64>()
            .sqrt()
    })
}
