//! The four contrastive terms. Each returns its value and the gradient with
//! respect to the encoder outputs `f`; momentum embeddings and centroids are
//! constants. Embeddings are unit vectors, so dot products are cosine similarities.

use super::centroids::CentroidBank;
use super::view::{axpy, BatchLabel, BatchView, LossOutput, Scope};
use crate::data::Source;
use crate::error::Result;
use crate::numeric::{dot, log_sum_exp, softmax, Embedding};
use crate::scalar::Scalar;

fn tau_for<T: Scalar>(label: &BatchLabel, multi: T, single: T) -> T {
    match label.source {
        Source::Multi => multi,
        Source::Single => single,
    }
}

/// Accumulate `-(1/|targets|) Σ_t log softmax(pool)[t]` for one anchor.
///
/// `pool` holds scaled similarities, `vectors[k]` the constant that entry `k`
/// was dotted with. Returns the term value and adds its gradient to `grad`.
fn softmax_ce<T: Scalar>(pool: &[T], vectors: &[&[T]], targets: &[usize], tau: T, grad: &mut [T]) -> T {
    let lse = log_sum_exp(pool);
    let w = softmax(pool);
    let share = T::one() / T::lit(targets.len() as f64);
    let mut value = T::zero();
    for &t in targets {
        value -= share * (pool[t] - lse);
    }
    let inv_tau = T::one() / tau;
    for (k, v) in vectors.iter().enumerate() {
        let coeff = w[k] - if targets.contains(&k) { share } else { T::zero() };
        if coeff != T::zero() {
            axpy(grad, coeff * inv_tau, v);
        }
    }
    value
}

pub fn instance_loss<T: Scalar>(view: &BatchView<'_, T>, tau_multi: T, tau_single: T) -> Result<LossOutput<T>> {
    instance_loss_scoped(view, tau_multi, tau_single, false, Scope::ALL)
}

/// Anchor `f_i` against every same-label momentum embedding `m_j` (including
/// `j = i`). Each positive gets its own softmax over itself and the anchor's
/// negatives: different-label samples from the same source, or from both
/// sources when `cross_source_negatives` is set.
pub fn instance_loss_scoped<T: Scalar>(
    view: &BatchView<'_, T>,
    tau_multi: T,
    tau_single: T,
    cross_source_negatives: bool,
    scope: Scope,
) -> Result<LossOutput<T>> {
    let n = view.len();
    let mut out = LossOutput::zeros(n, view.dim());
    let mut anchors = 0;
    for i in 0..n {
        let li = view.labels[i];
        if !scope.anchor(&li) {
            continue;
        }
        anchors += 1;
        let tau = tau_for(&li, tau_multi, tau_single);
        let f = &view.f[i];
        let sim = |j: usize| dot(f, &view.m[j]) / tau;

        let positives: Vec<usize> = (0..n).filter(|&j| view.labels[j] == li).collect();
        let negatives: Vec<usize> = (0..n)
            .filter(|&k| {
                let lk = &view.labels[k];
                *lk != li && scope.pooled(lk) && (cross_source_negatives || lk.source == li.source)
            })
            .collect();
        let neg_sims: Vec<T> = negatives.iter().map(|&k| sim(k)).collect();

        let mut pool = Vec::with_capacity(negatives.len() + 1);
        let mut vectors: Vec<&[T]> = Vec::with_capacity(negatives.len() + 1);
        let share = T::one() / T::lit(positives.len() as f64);
        let mut term = T::zero();
        for &j in &positives {
            pool.clear();
            vectors.clear();
            pool.push(sim(j));
            vectors.push(&view.m[j]);
            pool.extend_from_slice(&neg_sims);
            vectors.extend(negatives.iter().map(|&k| view.m[k].as_slice()));
            let mut g = vec![T::zero(); view.dim()];
            term += share * softmax_ce(&pool, &vectors, &[0], tau, &mut g);
            axpy(&mut out.grads[i], share, &g);
        }
        out.value += term;
    }
    Ok(out.averaged(anchors))
}

pub fn augmentation_loss<T: Scalar>(view: &BatchView<'_, T>, tau: T) -> Result<LossOutput<T>> {
    augmentation_loss_scoped(view, tau, Scope::ALL)
}

/// Augmented encoder output `f_i` against the momentum embedding of its own
/// original, with every different-label sample in the batch as a negative.
pub fn augmentation_loss_scoped<T: Scalar>(view: &BatchView<'_, T>, tau: T, scope: Scope) -> Result<LossOutput<T>> {
    let n = view.len();
    let mut out = LossOutput::zeros(n, view.dim());
    let mut anchors = 0;
    for i in 0..n {
        let li = view.labels[i];
        if !scope.anchor(&li) {
            continue;
        }
        anchors += 1;
        let f = &view.f[i];
        let mut pool = vec![dot(f, &view.m[i]) / tau];
        let mut vectors: Vec<&[T]> = vec![&view.m[i]];
        for k in 0..n {
            let lk = &view.labels[k];
            if *lk != li && scope.pooled(lk) {
                pool.push(dot(f, &view.m[k]) / tau);
                vectors.push(&view.m[k]);
            }
        }
        out.value += softmax_ce(&pool, &vectors, &[0], tau, &mut out.grads[i]);
    }
    Ok(out.averaged(anchors))
}

pub fn centroids_loss<T: Scalar>(
    view: &BatchView<'_, T>,
    bank: &CentroidBank<T>,
    tau_multi: T,
    tau_single: T,
) -> Result<LossOutput<T>> {
    centroids_loss_scoped(view, bank, tau_multi, tau_single, Scope::ALL)
}

/// Each anchor against the centroids of all distinct labels in the batch,
/// its own centroid being the target.
pub fn centroids_loss_scoped<T: Scalar>(
    view: &BatchView<'_, T>,
    bank: &CentroidBank<T>,
    tau_multi: T,
    tau_single: T,
    scope: Scope,
) -> Result<LossOutput<T>> {
    let n = view.len();
    let mut out = LossOutput::zeros(n, view.dim());
    let pool_labels: Vec<BatchLabel> = view.distinct_labels().into_iter().filter(|l| scope.pooled(l)).collect();
    let centroids: Vec<&Embedding<T>> = pool_labels.iter().map(|l| bank.label(l)).collect::<Result<_>>()?;
    let vectors: Vec<&[T]> = centroids.iter().map(|c| c.as_slice()).collect();
    let mut anchors = 0;
    for i in 0..n {
        let li = view.labels[i];
        if !scope.anchor(&li) {
            continue;
        }
        let Some(target) = pool_labels.iter().position(|l| *l == li) else {
            // anchors are only enabled together with their own centroid
            continue;
        };
        anchors += 1;
        let tau = tau_for(&li, tau_multi, tau_single);
        let pool: Vec<T> = centroids.iter().map(|c| dot(&view.f[i], c) / tau).collect();
        out.value += softmax_ce(&pool, &vectors, &[target], tau, &mut out.grads[i]);
    }
    Ok(out.averaged(anchors))
}

/// For a multi-camera anchor with label `y` seen by camera `c`: the positives
/// are the centroids of `y` under every other camera, the negatives are all
/// camera centroids of the other multi-camera labels in the batch. Anchors with
/// no other-camera centroid are skipped; the mean runs over the rest.
pub fn camera_centroids_loss<T: Scalar>(
    view: &BatchView<'_, T>,
    bank: &CentroidBank<T>,
    tau: T,
) -> Result<LossOutput<T>> {
    let n = view.len();
    let mut out = LossOutput::zeros(n, view.dim());
    let batch_multi: Vec<usize> = view
        .distinct_labels()
        .into_iter()
        .filter(|l| l.source == Source::Multi)
        .map(|l| l.id)
        .collect();
    let mut contributing = 0;
    for i in 0..n {
        let li = view.labels[i];
        if li.source != Source::Multi {
            continue;
        }
        let Some(camera) = view.cameras[i] else { continue };
        let mut vectors: Vec<&[T]> = bank
            .cameras_of(li.id)
            .filter(|&(c, _)| c != camera)
            .map(|(_, e)| e.as_slice())
            .collect();
        if vectors.is_empty() {
            continue;
        }
        contributing += 1;
        let targets: Vec<usize> = (0..vectors.len()).collect();
        for &other in batch_multi.iter().filter(|&&l| l != li.id) {
            vectors.extend(bank.cameras_of(other).map(|(_, e)| e.as_slice()));
        }
        let pool: Vec<T> = vectors.iter().map(|v| dot(&view.f[i], v) / tau).collect();
        out.value += softmax_ce(&pool, &vectors, &targets, tau, &mut out.grads[i]);
    }
    Ok(out.averaged(contributing))
}
