use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairwise::DistanceMatrix;

/// One agglomeration step. Leaves are `0..K`; the cluster formed at step `t` is `K + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub cluster_a: usize,
    pub cluster_b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub merges: Vec<Merge>,
    pub leaf_labels: Vec<String>,
}

/// Ward agglomeration on a precomputed distance matrix via the Lance–Williams update
///
/// `d(k, i∪j)² = ((nᵢ+n_k) d(k,i)² + (nⱼ+n_k) d(k,j)² − n_k d(i,j)²) / (nᵢ+nⱼ+n_k)`.
///
/// Ties go to the pair of lowest slot indices.
pub fn ward_cluster(d: &DistanceMatrix) -> Result<Dendrogram> {
    let k = d.len();
    if k < 2 {
        return Err(Error::Parameter(format!(
            "clustering needs at least two items, got {k}"
        )));
    }
    if d.values().iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("distance matrix has missing entries".into()));
    }
    let mut dist: Vec<f64> = d.values().transpose().as_slice().to_vec();
    let mut active = vec![true; k];
    let mut ids: Vec<usize> = (0..k).collect();
    let mut sizes = vec![1usize; k];
    let mut merges = Vec::with_capacity(k - 1);

    for step in 0..k - 1 {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for a in 0..k {
            if !active[a] {
                continue;
            }
            for b in (a + 1)..k {
                if active[b] && dist[a * k + b] < best.2 {
                    best = (a, b, dist[a * k + b]);
                }
            }
        }
        let (a, b, height) = best;
        let (na, nb) = (sizes[a] as f64, sizes[b] as f64);
        for c in 0..k {
            if !active[c] || c == a || c == b {
                continue;
            }
            let nc = sizes[c] as f64;
            let (dac, dbc) = (dist[a * k + c], dist[b * k + c]);
            let sq = ((na + nc) * dac * dac + (nb + nc) * dbc * dbc - nc * height * height) / (na + nb + nc);
            let updated = sq.max(0.0).sqrt();
            dist[a * k + c] = updated;
            dist[c * k + a] = updated;
        }
        merges.push(Merge {
            cluster_a: ids[a].min(ids[b]),
            cluster_b: ids[a].max(ids[b]),
            height,
            size: sizes[a] + sizes[b],
        });
        sizes[a] += sizes[b];
        ids[a] = k + step;
        active[b] = false;
    }
    Ok(Dendrogram {
        merges,
        leaf_labels: d.labels().to_vec(),
    })
}
