//! Embedding extraction, ranking metrics and pseudo-label diagnostics.

mod ranking;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ranking::{average_precision, cmc_rank_k, mean_ap, rank, Probe, QueryRanking, RankingResult};

use crate::data::{MultiCamDataset, PersonSample};
use crate::encoder::Mlp;
use crate::error::{Error, Result};
use crate::numeric::Embedding;
use crate::pseudolabel::PseudoLabeledPool;
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Embed samples in order, without augmentation.
pub fn extract<T: Scalar>(params: &Mlp<T>, samples: &[PersonSample<T>]) -> Result<Vec<Embedding<T>>> {
    samples.iter().map(|s| params.embed(&s.features)).collect()
}

/// [`extract`] fanned out over `workers` threads; output order is unchanged.
pub fn extract_parallel<T: Scalar>(
    params: &Mlp<T>,
    samples: &[PersonSample<T>],
    workers: usize,
) -> Result<Vec<Embedding<T>>> {
    if workers <= 1 {
        return extract(params, samples);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| samples.par_iter().map(|s| params.embed(&s.features)).collect())
}

/// Size-weighted share of each cluster's majority hidden identity.
pub fn cluster_purity<T: Scalar>(pool: &PseudoLabeledPool<T>) -> Result<f64> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut majority = 0;
    let mut total = 0;
    for (_, members) in pool.clusters() {
        let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
        for m in members {
            *counts.entry(m.sample.hidden_identity).or_default() += 1;
        }
        majority += counts.values().max().copied().unwrap_or(0);
        total += members.len();
    }
    Ok(majority as f64 / total as f64)
}

/// Per (identity, camera), the sample with the smallest `sample_id` is a query;
/// everything else is gallery. Returns sample indices.
pub fn split_query_gallery<T: Scalar>(data: &MultiCamDataset<T>) -> (Vec<usize>, Vec<usize>) {
    let mut first: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (i, s) in data.samples().iter().enumerate() {
        let key = (s.identity.unwrap(), s.camera.unwrap());
        let slot = first.entry(key).or_insert(i);
        if s.sample_id < data.samples()[*slot].sample_id {
            *slot = i;
        }
    }
    let queries: Vec<usize> = first.into_values().collect();
    let mut is_query = vec![false; data.len()];
    for &q in &queries {
        is_query[q] = true;
    }
    let gallery = (0..data.len()).filter(|&i| !is_query[i]).collect();
    (queries, gallery)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub rank1: f64,
    pub rank5: f64,
    pub rank10: f64,
    #[serde(rename = "mAP")]
    pub map: f64,
    pub n_query: usize,
    pub n_gallery: usize,
    pub protocol: String,
}

impl EvalReport {
    pub fn from_ranking<T: Scalar>(r: &RankingResult<T>, n_gallery: usize) -> Self {
        Self {
            rank1: r.cmc(1),
            rank5: r.cmc(5),
            rank10: r.cmc(10),
            map: r.mean_ap(),
            n_query: r.queries.len(),
            n_gallery,
            protocol: "cross-domain".into(),
        }
    }
}

fn probes<T: Scalar>(data: &MultiCamDataset<T>, idx: &[usize], emb: &[Embedding<T>]) -> Vec<Probe<T>> {
    idx.iter()
        .map(|&i| {
            let s = &data.samples()[i];
            Probe { embedding: emb[i].clone(), identity: s.hidden_identity, camera: s.camera.unwrap() }
        })
        .collect()
}

/// Embed a held-out domain and score it with the query/gallery protocol.
pub fn evaluate_domain<T: Scalar>(params: &Mlp<T>, data: &MultiCamDataset<T>, workers: usize) -> Result<EvalReport> {
    let emb = extract_parallel(params, data.samples(), workers)?;
    let (q, g) = split_query_gallery(data);
    let ranking = rank(&probes(data, &q, &emb), &probes(data, &g, &emb))?;
    Ok(EvalReport::from_ranking(&ranking, g.len()))
}

/// Same protocol with gallery embeddings randomly reassigned among gallery
/// records: a chance-level reference for the metrics.
pub fn evaluate_shuffled<T: Scalar>(params: &Mlp<T>, data: &MultiCamDataset<T>, rng: &mut Rng) -> Result<EvalReport> {
    use rand::seq::SliceRandom;
    let emb = extract(params, data.samples())?;
    let (q, g) = split_query_gallery(data);
    let mut gallery = probes(data, &g, &emb);
    let mut pool: Vec<Embedding<T>> = gallery.iter().map(|p| p.embedding.clone()).collect();
    pool.shuffle(rng);
    for (p, e) in gallery.iter_mut().zip(pool) {
        p.embedding = e;
    }
    let ranking = rank(&probes(data, &q, &emb), &gallery)?;
    Ok(EvalReport::from_ranking(&ranking, g.len()))
}
