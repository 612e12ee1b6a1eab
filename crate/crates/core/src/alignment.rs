//! Optimal alignment of one representation onto another within a group of
//! orthogonal transformations.
//!
//! Every solver maximizes `⟨A, B·T⟩ = Tr[AᵀB·T]` over `T` in its group, so it
//! only needs the `n × n` cross-product `AᵀB`.

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lap;
use crate::representations::ConvRepresentation;

/// Group of linear isometries the alignment searches over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Identity,
    Permutation,
    Orthogonal,
    SpecialOrthogonal,
}

impl Group {
    pub fn name(&self) -> &'static str {
        match self {
            Group::Identity => "identity",
            Group::Permutation => "permutation",
            Group::Orthogonal => "orthogonal",
            Group::SpecialOrthogonal => "special_orthogonal",
        }
    }
}

#[derive(Clone, Debug)]
pub struct AlignmentResult {
    /// `n × n` (or `c × c` for conv tensors) transform applied on the right of `B`.
    pub transform: DMatrix<f64>,
    /// Maximized inner product `⟨A, B·T⟩`.
    pub objective: f64,
    pub group: Group,
    /// Circular shift `(s1, s2)` applied to the second tensor, conv alignments only.
    pub shift: Option<(usize, usize)>,
    /// Set when the shift search was subsampled.
    pub approximate: bool,
    /// Column index in `B` assigned to each column of `A`, permutation alignments only.
    pub permutation: Option<Vec<usize>>,
}

fn check_shapes(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "cannot align {}x{} with {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

/// Maximizes `Tr[M·T]` over the group for a square cross-product `M`.
pub fn align_cross(cross: &DMatrix<f64>, group: Group) -> Result<AlignmentResult> {
    let n = cross.nrows();
    if cross.ncols() != n {
        return Err(Error::Shape("cross-product matrix must be square".into()));
    }
    let (transform, objective, permutation) = match group {
        Group::Identity => (DMatrix::identity(n, n), cross.trace(), None),
        Group::Orthogonal => {
            let (q, sv) = procrustes_from_cross(cross)?;
            (q, sv.iter().sum(), None)
        }
        Group::SpecialOrthogonal => {
            let (r, obj) = rotation_from_cross(cross)?;
            (r, obj, None)
        }
        Group::Permutation => {
            let cost = -cross;
            let assignment = lap::solve_min_cost(&cost)?;
            let mut t = DMatrix::zeros(n, n);
            let mut objective = 0.0;
            for (col, &src) in assignment.iter().enumerate() {
                t[(src, col)] = 1.0;
                objective += cross[(col, src)];
            }
            (t, objective, Some(assignment))
        }
    };
    Ok(AlignmentResult {
        transform,
        objective,
        group,
        shift: None,
        approximate: false,
        permutation,
    })
}

fn svd_parts(cross: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let svd = SVD::try_new(cross.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = svd.u.expect("left singular vectors requested");
    let v = svd.v_t.expect("right singular vectors requested").transpose();
    let n = cross.nrows();
    let mut us = DMatrix::zeros(n, n);
    let mut vs = DMatrix::zeros(n, n);
    let mut sv = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        us.set_column(dst, &u.column(src));
        vs.set_column(dst, &v.column(src));
        sv.push(svd.singular_values[src]);
    }
    Ok((us, sv, vs))
}

/// `Q* = V Uᵀ` for `M = U S Vᵀ`; returns the transform and singular values.
fn procrustes_from_cross(cross: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let (u, sv, v) = svd_parts(cross)?;
    Ok((v * u.transpose(), sv))
}

/// Optimally signed SVD: flip the smallest singular direction when `det(V Uᵀ) < 0`.
fn rotation_from_cross(cross: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let (u, sv, mut v) = svd_parts(cross)?;
    let n = sv.len();
    let mut objective: f64 = sv.iter().sum();
    let q = &v * u.transpose();
    if n > 0 && q.determinant() < 0.0 {
        v.column_mut(n - 1).neg_mut();
        objective -= 2.0 * sv[n - 1];
        return Ok((v * u.transpose(), objective));
    }
    Ok((q, objective))
}

/// Dispatches to the solver for `group`.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>, group: Group) -> Result<AlignmentResult> {
    check_shapes(a, b)?;
    align_cross(&(a.transpose() * b), group)
}

/// Orthogonal Procrustes: `Q = argmax ⟨A, B·Q⟩` over `O(n)`. The objective is `‖AᵀB‖_*`.
pub fn solve_procrustes(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<AlignmentResult> {
    solve(a, b, Group::Orthogonal)
}

/// Procrustes restricted to rotations, `SO(n)`.
pub fn solve_rotation(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<AlignmentResult> {
    solve(a, b, Group::SpecialOrthogonal)
}

/// Best neuron matching, solved exactly as a linear assignment problem.
pub fn solve_permutation(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<AlignmentResult> {
    solve(a, b, Group::Permutation)
}

/// Channel cross-product between `ti` and `tj` circularly shifted by `(s1, s2)`.
fn shifted_cross(ti: &ConvRepresentation, tj: &ConvRepresentation, s1: usize, s2: usize) -> DMatrix<f64> {
    let [m, h, w, c] = ti.shape();
    let a = ti.as_slice();
    let b = tj.as_slice();
    // row-major c × c accumulator
    let mut acc = vec![0.0; c * c];
    for i in 0..m {
        for y in 0..h {
            let src_y = (y + h - s1) % h;
            for x in 0..w {
                let src_x = (x + w - s2) % w;
                let pa = ti.index(i, y, x, 0);
                let pb = tj.index(i, src_y, src_x, 0);
                let row_a = &a[pa..pa + c];
                let row_b = &b[pb..pb + c];
                for (p, &va) in row_a.iter().enumerate() {
                    let out = &mut acc[p * c..(p + 1) * c];
                    for (o, &vb) in out.iter_mut().zip(row_b) {
                        *o += va * vb;
                    }
                }
            }
        }
    }
    DMatrix::from_row_slice(c, c, &acc)
}

/// Searches circular spatial shifts of `tj` and, at each one, the best channel
/// transform in `group`. `stride > 1` visits every `stride`-th shift along each
/// axis and marks the result approximate.
pub fn solve_shift(
    ti: &ConvRepresentation,
    tj: &ConvRepresentation,
    group: Group,
    stride: usize,
) -> Result<AlignmentResult> {
    if ti.shape() != tj.shape() {
        return Err(Error::Shape(format!(
            "conv tensors differ in shape: {:?} vs {:?}",
            ti.shape(),
            tj.shape()
        )));
    }
    if stride == 0 {
        return Err(Error::Parameter("shift stride must be positive".into()));
    }
    let [_, h, w, _] = ti.shape();
    let mut best: Option<AlignmentResult> = None;
    for s1 in (0..h).step_by(stride) {
        for s2 in (0..w).step_by(stride) {
            let cross = shifted_cross(ti, tj, s1, s2);
            let mut res = align_cross(&cross, group)?;
            if best.as_ref().is_none_or(|b| res.objective > b.objective) {
                res.shift = Some((s1, s2));
                best = Some(res);
            }
        }
    }
    let mut best = best.expect("at least one shift is searched");
    best.approximate = stride > 1 && (h > 1 || w > 1);
    Ok(best)
}

/// Exhaustive shift search with orthogonal channel alignment.
pub fn solve_shift_procrustes(ti: &ConvRepresentation, tj: &ConvRepresentation) -> Result<AlignmentResult> {
    solve_shift(ti, tj, Group::Orthogonal, 1)
}
