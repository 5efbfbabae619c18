use std::collections::VecDeque;

use crate::numeric::{dot, Embedding};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    Cluster(usize),
    Noise,
}

impl Assignment {
    pub fn cluster(self) -> Option<usize> {
        match self {
            Assignment::Cluster(c) => Some(c),
            Assignment::Noise => None,
        }
    }
}

/// DBSCAN over unit embeddings with cosine distance `1 - <a, b>`.
///
/// A point is its own neighbor, and the radius is inclusive. Clusters are
/// numbered in order of their first core point; a border point reachable from
/// several clusters goes to the one that reaches it first.
pub fn dbscan<T: Scalar>(points: &[Embedding<T>], eps: T, min_pts: usize) -> Vec<Assignment> {
    let n = points.len();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| T::one() - dot(&points[i], &points[j]) <= eps).collect())
        .collect();
    let is_core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut out: Vec<Option<Assignment>> = vec![None; n];
    let mut next = 0;
    for seed in 0..n {
        if out[seed].is_some() || !is_core[seed] {
            continue;
        }
        let id = next;
        next += 1;
        out[seed] = Some(Assignment::Cluster(id));
        let mut queue = VecDeque::from([seed]);
        while let Some(p) = queue.pop_front() {
            if !is_core[p] {
                continue;
            }
            for &q in &neighbors[p] {
                if out[q].is_none() {
                    out[q] = Some(Assignment::Cluster(id));
                    queue.push_back(q);
                }
            }
        }
    }
    out.into_iter().map(|a| a.unwrap_or(Assignment::Noise)).collect()
}
