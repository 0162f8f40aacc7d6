use rayon::prelude::*;

use super::EvalError;
use crate::diffgrad::Tensor;

/// The `k` rows closest to `query` by Euclidean distance, nearest first,
/// ties broken by row index. `candidates` restricts the pool (all rows
/// otherwise); the query itself is never returned. A `k` larger than the
/// pool returns the whole pool.
pub fn knn_topk(
    embeddings: &Tensor,
    query: usize,
    k: usize,
    candidates: Option<&[usize]>,
) -> Result<Vec<(usize, f64)>, EvalError> {
    if k == 0 {
        return Err(EvalError::Input("k must be at least 1".into()));
    }
    let n = embeddings.rows();
    if query >= n {
        return Err(EvalError::Input(format!("query row {query} out of range for {n} rows")));
    }
    let q = embeddings.row(query);
    let pool: Vec<usize> = match candidates {
        Some(c) => {
            if let Some(&bad) = c.iter().find(|&&i| i >= n) {
                return Err(EvalError::Input(format!("candidate row {bad} out of range")));
            }
            c.iter().copied().filter(|&i| i != query).collect()
        }
        None => (0..n).filter(|&i| i != query).collect(),
    };
    let mut scored: Vec<(usize, f64)> = pool
        .into_iter()
        .map(|i| {
            let d2: f64 = embeddings.row(i).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            (i, d2)
        })
        .collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    scored.dedup_by_key(|e| e.0);
    scored.truncate(k);
    Ok(scored.into_iter().map(|(i, d2)| (i, d2.sqrt())).collect())
}

/// [`knn_topk`] for many queries, in query order.
pub fn knn_batch(
    embeddings: &Tensor,
    queries: &[usize],
    k: usize,
    candidates: Option<&[usize]>,
) -> Result<Vec<Vec<(usize, f64)>>, EvalError> {
    queries
        .par_iter()
        .map(|&q| knn_topk(embeddings, q, k, candidates))
        .collect()
}

/// Fraction of queries whose target is among the first `k` recommendations.
pub fn hit_rate(recommendations: &[Vec<usize>], targets: &[usize], k: usize) -> Result<f64, EvalError> {
    if recommendations.len() != targets.len() {
        return Err(EvalError::Input(format!(
            "{} recommendation lists but {} targets",
            recommendations.len(),
            targets.len()
        )));
    }
    if targets.is_empty() {
        return Err(EvalError::Empty("queries"));
    }
    let hits = recommendations
        .iter()
        .zip(targets)
        .filter(|(r, t)| r.iter().take(k).any(|x| x == *t))
        .count();
    Ok(hits as f64 / targets.len() as f64)
}
