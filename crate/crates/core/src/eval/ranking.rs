use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::numeric::{dot, Embedding};
use crate::scalar::Scalar;

/// An embedding with the annotations ranking needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe<T> {
    pub embedding: Embedding<T>,
    pub identity: u64,
    pub camera: usize,
}

/// One query's gallery ordering. Same-identity, same-camera items are removed.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRanking<T> {
    /// Gallery indices, most similar first, ties by ascending index.
    pub order: Vec<usize>,
    pub scores: Vec<T>,
    /// Parallel to `order`: whether the item shares the query's identity.
    pub relevant: Vec<bool>,
}

impl<T> QueryRanking<T> {
    pub fn num_relevant(&self) -> usize {
        self.relevant.iter().filter(|&&r| r).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingResult<T> {
    pub queries: Vec<QueryRanking<T>>,
}

pub fn rank<T: Scalar>(queries: &[Probe<T>], gallery: &[Probe<T>]) -> Result<RankingResult<T>> {
    let mut out = Vec::with_capacity(queries.len());
    for (qi, q) in queries.iter().enumerate() {
        let mut items: Vec<(usize, T)> = gallery
            .iter()
            .enumerate()
            .filter(|(_, g)| !(g.identity == q.identity && g.camera == q.camera))
            .map(|(gi, g)| (gi, dot(&q.embedding, &g.embedding)))
            .collect();
        items.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
        let relevant: Vec<bool> = items.iter().map(|&(gi, _)| gallery[gi].identity == q.identity).collect();
        if !relevant.contains(&true) {
            return Err(Error::NoValidPositive { query: qi });
        }
        out.push(QueryRanking {
            order: items.iter().map(|&(gi, _)| gi).collect(),
            scores: items.iter().map(|&(_, s)| s).collect(),
            relevant,
        });
    }
    Ok(RankingResult { queries: out })
}

impl<T: Scalar> RankingResult<T> {
    /// Fraction of queries with a correct match among the top `k`.
    pub fn cmc(&self, k: usize) -> f64 {
        if self.queries.is_empty() {
            return 0.0;
        }
        let hits = self.queries.iter().filter(|q| q.relevant.iter().take(k).any(|&r| r)).count();
        hits as f64 / self.queries.len() as f64
    }

    pub fn mean_ap(&self) -> f64 {
        if self.queries.is_empty() {
            return 0.0;
        }
        self.queries.iter().map(|q| average_precision(&q.relevant)).sum::<f64>() / self.queries.len() as f64
    }
}

/// Mean over relevant positions `r` of the precision within the top `r`.
pub fn average_precision(relevant: &[bool]) -> f64 {
    let mut hits = 0;
    let mut sum = 0.0;
    for (pos, &r) in relevant.iter().enumerate() {
        if r {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

pub fn cmc_rank_k<T: Scalar>(queries: &[Probe<T>], gallery: &[Probe<T>], k: usize) -> Result<f64> {
    Ok(rank(queries, gallery)?.cmc(k))
}

pub fn mean_ap<T: Scalar>(queries: &[Probe<T>], gallery: &[Probe<T>]) -> Result<f64> {
    Ok(rank(queries, gallery)?.mean_ap())
}
