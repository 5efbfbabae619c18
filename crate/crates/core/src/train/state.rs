use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{debug, info, warn};

use super::checkpoint::Checkpoint;
use super::config::{ModelConfig, TrainConfig};
use super::metrics::EpochMetrics;
use crate::data::{augment, compose_batch, MultiCamDataset, SingleCamCorpus};
use crate::encoder::{ema_update, Mlp, OptimizerState, ParamSet};
use crate::error::{Error, Result};
use crate::eval::{cluster_purity, extract};
use crate::losses::{build_centroids, total_loss, BatchLabel, BatchView, CentroidBank, LossBreakdown};
use crate::numeric::Embedding;
use crate::pseudolabel::{pseudo_label_epoch, PseudoLabeledPool};
use crate::rng::SeedTree;
use crate::scalar::Scalar;

/// Encoder, momentum encoder and optimizer, plus what the current epoch built.
#[derive(Debug, Clone)]
pub struct TrainState<T> {
    pub encoder: Mlp<T>,
    pub momentum: Mlp<T>,
    pub optimizer: OptimizerState<T>,
    /// Completed epochs; also the index of the next one.
    pub epoch: usize,
    pub bank: CentroidBank<T>,
    pub pool: Option<PseudoLabeledPool<T>>,
    pub metrics: Vec<EpochMetrics>,
}

impl<T: Scalar> TrainState<T> {
    /// Fresh encoder from the "init" stream; the momentum encoder starts as an exact copy.
    pub fn init(input_dim: usize, model: &ModelConfig, cfg: &TrainConfig, seeds: &SeedTree) -> Result<Self> {
        model.validate()?;
        let encoder = Mlp::init(&model.dims(input_dim), model.activation, &mut seeds.stream("init"))?;
        let momentum = Mlp::from_params(encoder.params().clone(), encoder.activation())?;
        let optimizer = OptimizerState::new(cfg.optimizer, encoder.params());
        Ok(Self { encoder, momentum, optimizer, epoch: 0, bank: CentroidBank::empty(0), pool: None, metrics: Vec::new() })
    }
}

fn multi_centroids<T: Scalar>(momentum: &Mlp<T>, multi: &MultiCamDataset<T>, epoch: usize) -> Result<CentroidBank<T>> {
    let embeddings = extract(momentum, multi.samples())?;
    let (labels, cameras): (Vec<_>, Vec<_>) =
        multi.samples().iter().map(|s| (BatchLabel::multi(s.identity.unwrap_or(0)), s.camera)).unzip();
    build_centroids(&embeddings, &labels, &cameras, epoch)
}

/// One pass of the training loop: refresh centroids and pseudo labels with the
/// momentum encoder, then run `cfg.iterations` optimizer steps, each followed
/// by one momentum update.
pub fn run_epoch<T: Scalar>(
    state: &mut TrainState<T>,
    multi: &MultiCamDataset<T>,
    corpus: Option<&SingleCamCorpus<T>>,
    cfg: &TrainConfig,
    seeds: &SeedTree,
) -> Result<EpochMetrics> {
    cfg.validate()?;
    let epoch = state.epoch;
    let index = epoch as u64;

    let mut bank = multi_centroids(&state.momentum, multi, epoch)?;
    if cfg.gamma > 0.0 && !bank.has_multi_view_label() {
        warn!("epoch {epoch}: no identity is seen by two cameras; the camera-centroid term is zero");
    }
    let pool = if cfg.use_single_cam {
        let corpus = corpus.ok_or_else(|| Error::InvalidConfig("single-camera training needs a corpus".into()))?;
        let pool = pseudo_label_epoch(
            corpus,
            &state.momentum,
            &cfg.pseudo,
            cfg.pseudo_limit(),
            &mut seeds.indexed_stream("pseudo", index),
        )?;
        for (label, centroid) in pool.centroids() {
            bank.insert_label(BatchLabel::single(label), centroid.clone());
        }
        Some(pool)
    } else {
        None
    };
    let purity = pool.as_ref().map(cluster_purity).transpose()?;

    let sizes = cfg.effective_batch();
    let loss_cfg = cfg.loss();
    let lambda = T::lit(cfg.lambda);
    let mut batch_rng = seeds.indexed_stream("batch", index);
    let mut augment_rng = seeds.indexed_stream("augment", index);
    let mut sums = LossBreakdown { ins: 0.0, aug: 0.0, cen: 0.0, cc: 0.0 };
    let mut total = 0.0;

    for _ in 0..cfg.iterations {
        let batch = compose_batch(multi, pool.as_ref(), sizes, &mut batch_rng)?;
        let mut features: Vec<&[T]> = Vec::with_capacity(batch.len());
        let mut labels = Vec::with_capacity(batch.len());
        let mut cameras = Vec::with_capacity(batch.len());
        for p in &batch.multi {
            features.push(&multi.samples()[p.index].features);
            labels.push(BatchLabel::multi(p.label));
            cameras.push(Some(p.camera));
        }
        if let Some(pool) = &pool {
            for p in &batch.single {
                features.push(&pool.members(p.pseudo_label)[p.member].sample.features);
                labels.push(BatchLabel::single(p.pseudo_label));
                cameras.push(None);
            }
        }

        let mut f: Vec<Embedding<T>> = Vec::with_capacity(features.len());
        let mut caches = Vec::with_capacity(features.len());
        for x in &features {
            let (e, cache) = state.encoder.forward(&augment(x, &cfg.augment, &mut augment_rng))?;
            f.push(e);
            caches.push(cache);
        }
        let m: Vec<Embedding<T>> = features.iter().map(|x| state.momentum.embed(x)).collect::<Result<_>>()?;

        let view = BatchView::new(&f, &m, &labels, &cameras)?;
        let loss = total_loss(&view, &bank, &loss_cfg)?;
        let mut grads = ParamSet::zeros_like(state.encoder.params());
        for (cache, g) in caches.iter().zip(&loss.grads) {
            if g.iter().any(|v| *v != T::zero()) {
                grads.add_assign(&state.encoder.backward(cache, g)?);
            }
        }
        state.optimizer.step(&mut state.encoder, &grads, epoch)?;
        ema_update(&mut state.momentum, &state.encoder, lambda)?;

        total += loss.value.as_f64();
        sums.ins += loss.parts.ins.as_f64();
        sums.aug += loss.parts.aug.as_f64();
        sums.cen += loss.parts.cen.as_f64();
        sums.cc += loss.parts.cc.as_f64();
    }

    let n = cfg.iterations as f64;
    let record = EpochMetrics {
        epoch,
        loss_total: total / n,
        loss_ins: sums.ins / n,
        loss_aug: sums.aug / n,
        loss_cen: sums.cen / n,
        loss_cc: sums.cc / n,
        pseudo_clusters: pool.as_ref().map_or(0, |p| p.num_clusters()),
        pseudo_noise: pool.as_ref().map_or(0, |p| p.noise_count()),
        purity,
        lr: cfg.optimizer.effective_lr(epoch),
    };
    debug!("{record:?}");
    state.bank = bank;
    state.pool = pool;
    state.metrics.push(record.clone());
    state.epoch += 1;
    Ok(record)
}

/// Hooks called by [`train`]. The defaults do nothing.
pub trait TrainObserver<T> {
    fn epoch_finished(&mut self, _metrics: &EpochMetrics) -> Result<()> {
        Ok(())
    }

    /// `last` marks the checkpoint taken after the final epoch.
    fn checkpoint(&mut self, _ckpt: &Checkpoint<T>, _last: bool) -> Result<()> {
        Ok(())
    }

    /// Called with the last fully completed state when an epoch fails.
    fn failed(&mut self, _partial: &Checkpoint<T>, _error: &Error) {}
}

impl<T> TrainObserver<T> for () {}

/// Writes metrics lines as epochs finish, the final checkpoint to `checkpoint`,
/// periodic ones next to it as `<stem>.epoch<N>.json`, and on failure
/// `<stem>.partial.json`.
pub struct FileObserver {
    checkpoint: PathBuf,
    metrics: BufWriter<File>,
}

impl FileObserver {
    pub fn create(checkpoint: &Path, metrics: &Path) -> Result<Self> {
        Ok(Self { checkpoint: checkpoint.to_path_buf(), metrics: BufWriter::new(File::create(metrics)?) })
    }

    fn sibling(&self, tag: &str) -> PathBuf {
        let stem = self.checkpoint.file_stem().and_then(|s| s.to_str()).unwrap_or("checkpoint");
        self.checkpoint.with_file_name(format!("{stem}.{tag}.json"))
    }
}

impl<T: Scalar> TrainObserver<T> for FileObserver {
    fn epoch_finished(&mut self, metrics: &EpochMetrics) -> Result<()> {
        metrics.write_line(&mut self.metrics)?;
        self.metrics.flush()?;
        Ok(())
    }

    fn checkpoint(&mut self, ckpt: &Checkpoint<T>, last: bool) -> Result<()> {
        if last {
            ckpt.save(&self.checkpoint)
        } else {
            ckpt.save(&self.sibling(&format!("epoch{}", ckpt.epoch)))
        }
    }

    fn failed(&mut self, partial: &Checkpoint<T>, error: &Error) {
        let path = self.sibling("partial");
        match partial.save(&path) {
            Ok(()) => warn!("training failed ({error}); state after epoch {} saved to {}", partial.epoch, path.display()),
            Err(e) => warn!("training failed ({error}) and the partial checkpoint could not be written: {e}"),
        }
    }
}

/// Runs `cfg.epochs` epochs from a fresh initialization. Inference should use
/// `state.momentum`.
pub fn train<T: Scalar>(
    multi: &MultiCamDataset<T>,
    corpus: Option<&SingleCamCorpus<T>>,
    model: &ModelConfig,
    cfg: &TrainConfig,
    seeds: &SeedTree,
    observer: &mut dyn TrainObserver<T>,
) -> Result<TrainState<T>> {
    cfg.validate()?;
    let mut state = TrainState::init(multi.dim(), model, cfg, seeds)?;
    for _ in 0..cfg.epochs {
        let last_good = (state.epoch, state.encoder.clone(), state.momentum.clone(), state.optimizer.clone());
        let record = match run_epoch(&mut state, multi, corpus, cfg, seeds) {
            Ok(r) => r,
            Err(e) => {
                (state.epoch, state.encoder, state.momentum, state.optimizer) = last_good;
                observer.failed(&Checkpoint::capture(&state, model, cfg, seeds.root()), &e);
                return Err(e);
            }
        };
        info!(
            "epoch {}: loss {:.4} (ins {:.4} aug {:.4} cen {:.4} cc {:.4}), {} pseudo clusters",
            record.epoch,
            record.loss_total,
            record.loss_ins,
            record.loss_aug,
            record.loss_cen,
            record.loss_cc,
            record.pseudo_clusters
        );
        observer.epoch_finished(&record)?;
        if cfg.checkpoint_every > 0 && state.epoch % cfg.checkpoint_every == 0 && state.epoch < cfg.epochs {
            observer.checkpoint(&Checkpoint::capture(&state, model, cfg, seeds.root()), false)?;
        }
    }
    observer.checkpoint(&Checkpoint::capture(&state, model, cfg, seeds.root()), true)?;
    Ok(state)
}
