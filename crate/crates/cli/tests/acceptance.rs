//! End-to-end acceptance checks. Runs as a plain binary (no libtest harness)
//! so each criterion prints exactly one PASS/FAIL line.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng as _;
use remix_cli::{cmd_generate, cmd_train, RunConfig};
use remix_core::data::{camera_diverse_pick, compose_batch, synth_generate, BatchSizes, MultiCamDataset, PersonSample, Source};
use remix_core::encoder::{ema_update, Activation, Mlp};
use remix_core::eval::{average_precision, cmc_rank_k, evaluate_domain, evaluate_shuffled, mean_ap, rank, Probe};
use remix_core::gradcheck::{run_gradcheck, GradcheckConfig};
use remix_core::losses::{
    augmentation_loss, build_centroids, camera_centroids_loss, centroids_loss, instance_loss, loss_terms, total_loss,
    BatchLabel, BatchView, LossConfig,
};
use remix_core::numeric::{dot, normalize};
use remix_core::pseudolabel::{dbscan, pseudo_label_epoch, Assignment};
use remix_core::train::{moving_average, train, TrainState};
use remix_core::{Embedding, Rng, SeedTree};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn unit(dim: usize, rng: &mut Rng) -> Embedding<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if let Ok(e) = normalize(&v) {
            return e;
        }
    }
}

fn e(v: &[f64]) -> Embedding<f64> {
    normalize(v).unwrap()
}

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let report = run_gradcheck(&GradcheckConfig::default(), 0).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let worst = report.checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    check(report.passed(), || format!("gradients disagree:\n{report}"))?;
    check(elapsed < Duration::from_secs(30), || format!("took {elapsed:.1?}"))?;
    Ok(format!("4 losses x 20 batches, worst relative error {worst:.2e}, {elapsed:.1?}"))
}

fn degenerate_zeros() -> Outcome {
    // one label, one source, f = m, nothing to push against
    let x = e(&[0.3, -0.2, 0.9]);
    let f = vec![x.clone(), x.clone()];
    let labels = [BatchLabel::multi(0); 2];
    let cams = [Some(0), Some(0)];
    let v = BatchView::new(&f, &f, &labels, &cams).map_err(|e| e.to_string())?;
    let bank = build_centroids(&f, &labels, &cams, 0).map_err(|e| e.to_string())?;
    let ins = instance_loss(&v, 0.1, 0.2).unwrap().value;
    let aug = augmentation_loss(&v, 0.1).unwrap().value;
    let cen = centroids_loss(&v, &bank, 0.5, 0.6).unwrap().value;
    check(ins == 0.0, || format!("instance loss {ins}"))?;
    check(aug == 0.0, || format!("augmentation loss {aug}"))?;
    check(cen == 0.0, || format!("centroids loss {cen}"))?;

    // every identity seen by one camera only
    let f = vec![e(&[1.0, 0.0]), e(&[0.0, 1.0]), e(&[0.6, 0.8])];
    let labels = [BatchLabel::multi(0), BatchLabel::multi(1), BatchLabel::multi(2)];
    let cams = [Some(0), Some(1), Some(1)];
    let v = BatchView::new(&f, &f, &labels, &cams).map_err(|e| e.to_string())?;
    let bank = build_centroids(&f, &labels, &cams, 0).map_err(|e| e.to_string())?;
    let cc = camera_centroids_loss(&v, &bank, 0.07).unwrap().value;
    check(cc == 0.0, || format!("camera-centroids loss {cc}"))?;

    let mut rng = SeedTree::new(4).stream("ema");
    let encoder = Mlp::<f64>::init(&[16, 32, 8], Activation::Tanh, &mut rng).unwrap();
    let mut momentum = Mlp::<f64>::init(&[16, 32, 8], Activation::Tanh, &mut rng).unwrap();
    ema_update(&mut momentum, &encoder, 0.0).unwrap();
    let same = momentum.params().iter().zip(encoder.params().iter()).all(|(a, b)| a.to_bits() == b.to_bits());
    check(same, || "EMA with lambda 0 differs from the encoder".into())?;
    Ok("four losses exactly 0; EMA(lambda=0) bit-identical".into())
}

/// Core points and their connected components, borders joined to the
/// lowest-numbered component with a core within reach.
fn dbscan_reference(points: &[Embedding<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let near = |i: usize, j: usize| 1.0 - dot(&points[i], &points[j]) <= eps;
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
    let mut comp: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    for s in 0..n {
        if !core[s] || comp[s].is_some() {
            continue;
        }
        let mut stack = vec![s];
        comp[s] = Some(next);
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if core[j] && comp[j].is_none() && near(i, j) {
                    comp[j] = Some(next);
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    (0..n)
        .map(|i| if core[i] { comp[i] } else { (0..n).filter(|&j| core[j] && near(i, j)).filter_map(|j| comp[j]).min() })
        .collect()
}

fn dbscan_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = SeedTree::new(3).stream("dbscan");
    let mut clusters = 0;
    for case in 0..200 {
        let n = rng.random_range(1..=64);
        let dim = rng.random_range(2..=6);
        // a few tight blobs plus scattered points so every regime shows up
        let centers: Vec<Embedding<f64>> = (0..rng.random_range(1..5)).map(|_| unit(dim, &mut rng)).collect();
        let spread = rng.random_range(0.05..0.8);
        let points: Vec<Embedding<f64>> = (0..n)
            .map(|_| {
                if rng.random_bool(0.2) {
                    return unit(dim, &mut rng);
                }
                let c = &centers[rng.random_range(0..centers.len())];
                let v: Vec<f64> = c.iter().map(|x| x + spread * rng.random_range(-1.0..1.0)).collect();
                normalize(&v).unwrap_or_else(|_| c.clone())
            })
            .collect();
        let eps = rng.random_range(0.2..=1.2);
        let min_pts = rng.random_range(2..=4);
        let got: Vec<Option<usize>> = dbscan(&points, eps, min_pts).into_iter().map(Assignment::cluster).collect();
        let want = dbscan_reference(&points, eps, min_pts);
        check(got == want, || format!("instance {case} (n={n}, eps={eps:.3}, minPts={min_pts}) differs"))?;
        clusters += want.iter().flatten().collect::<BTreeSet<_>>().len();
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(10), || format!("took {elapsed:.1?}"))?;
    Ok(format!("200 instances, {clusters} clusters, identical partitions, {elapsed:.1?}"))
}

fn probe(v: &[f64], identity: u64, camera: usize) -> Probe<f64> {
    Probe { embedding: e(v), identity, camera }
}

/// Each valid item's rank is one plus the number of valid items that beat it
/// (higher score, or equal score and lower index).
fn metric_reference(queries: &[Probe<f64>], gallery: &[Probe<f64>], k: usize) -> Option<(f64, f64)> {
    let (mut hits, mut ap_sum) = (0.0, 0.0);
    for q in queries {
        let valid: Vec<usize> =
            (0..gallery.len()).filter(|&g| !(gallery[g].identity == q.identity && gallery[g].camera == q.camera)).collect();
        let score = |g: usize| dot(&q.embedding, &gallery[g].embedding);
        let position =
            |g: usize| 1 + valid.iter().filter(|&&h| score(h) > score(g) || (score(h) == score(g) && h < g)).count();
        let relevant: Vec<usize> = valid.iter().copied().filter(|&g| gallery[g].identity == q.identity).collect();
        if relevant.is_empty() {
            return None;
        }
        if relevant.iter().any(|&g| position(g) <= k) {
            hits += 1.0;
        }
        let ap: f64 = relevant
            .iter()
            .map(|&g| {
                let p = position(g);
                relevant.iter().filter(|&&h| position(h) <= p).count() as f64 / p as f64
            })
            .sum();
        ap_sum += ap / relevant.len() as f64;
    }
    Some((hits / queries.len() as f64, ap_sum / queries.len() as f64))
}

/// Equal up to the last bit: (1 + 2/3) / 2 and 5/6 round differently.
fn ulp_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= f64::EPSILON * a.abs().max(b.abs())
}

fn metric_fixtures() -> Outcome {
    check(ulp_eq(average_precision(&[true, false, true]), 5.0 / 6.0), || "AP [r,i,r] != 5/6".into())?;
    check(average_precision(&[true, true, false]) == 1.0, || "AP with all relevant first != 1".into())?;
    for n in 1..=10 {
        let mut r = vec![false; n];
        r[n - 1] = true;
        check(average_precision(&r) == 1.0 / n as f64, || format!("AP single relevant at {n} != 1/{n}"))?;
    }
    // similarities 0.9 (same id), 0.5 (other), 0.1 (same id) -> ranking [r, i, r]
    let at = |c: f64| [c, (1.0 - c * c).sqrt()];
    let q = vec![probe(&[1.0, 0.0], 1, 0)];
    let g = vec![probe(&at(0.1), 1, 1), probe(&at(0.9), 1, 2), probe(&at(0.5), 2, 1)];
    check(ulp_eq(mean_ap(&q, &g).unwrap(), 5.0 / 6.0), || "mAP of ranked fixture != 5/6".into())?;
    check(cmc_rank_k(&q, &g, 1).unwrap() == 1.0, || "rank-1 of ranked fixture != 1".into())?;
    // the same-camera copy of the query's identity is masked out
    let g = vec![probe(&[1.0, 0.0], 1, 0), probe(&at(0.5), 2, 1), probe(&at(0.2), 1, 1)];
    check(cmc_rank_k(&q, &g, 1).unwrap() == 0.0, || "same-camera match was not masked".into())?;
    check(mean_ap(&q, &g).unwrap() == 0.5, || "masked fixture mAP != 1/2".into())?;

    let mut rng = SeedTree::new(99).stream("metrics");
    let random = |n: usize, rng: &mut Rng| -> Vec<Probe<f64>> {
        (0..n).map(|_| Probe { embedding: unit(4, rng), identity: rng.random_range(0..4), camera: rng.random_range(0..3) }).collect()
    };
    let mut checked = 0;
    while checked < 50 {
        let (q, g) = (random(5, &mut rng), random(20, &mut rng));
        let k = rng.random_range(1..6);
        let Some((cmc, map)) = metric_reference(&q, &g, k) else { continue };
        check(cmc_rank_k(&q, &g, k).unwrap() == cmc, || format!("rank-{k} differs on instance {checked}"))?;
        let got = rank(&q, &g).unwrap().mean_ap();
        check((got - map).abs() < 1e-15, || format!("mAP {got} vs {map} on instance {checked}"))?;
        checked += 1;
    }
    Ok("hand fixtures match; 50 random instances match the counting oracle".into())
}

/// The default momentum (0.999) barely moves over 1000 desk iterations, so the
/// desk runs use a faster EMA and learning rate.
const DESK: [&str; 2] = ["train.lambda=0.99", "train.optimizer.lr=0.004"];

#[derive(Clone)]
struct DeskRun {
    on: f64,
    off: f64,
    baseline: f64,
    purity: Vec<f64>,
}

fn desk_run(seed: u64) -> Result<DeskRun, String> {
    let mut sets: Vec<String> = DESK.iter().map(|s| s.to_string()).collect();
    sets.push(format!("seed={seed}"));
    let cfg = RunConfig::from_parts(None, &sets).map_err(|e| e.to_string())?;
    let data = synth_generate::<f64>(&cfg.generator, &mut SeedTree::new(seed).stream("generator")).map_err(|e| e.to_string())?;
    let seeds = SeedTree::new(seed);
    let on = train(&data.train, Some(&data.corpus), &cfg.model, &cfg.train, &seeds, &mut ()).map_err(|e| e.to_string())?;
    let mut off_cfg = cfg.train.clone();
    off_cfg.use_single_cam = false;
    let off = train(&data.train, None, &cfg.model, &off_cfg, &seeds, &mut ()).map_err(|e| e.to_string())?;
    let score = |s: &TrainState<f64>| evaluate_domain(&s.momentum, &data.target, 1).map(|r| r.map).map_err(|e| e.to_string());
    let baseline = evaluate_shuffled(&on.momentum, &data.target, &mut seeds.stream("baseline")).map_err(|e| e.to_string())?;
    Ok(DeskRun {
        on: score(&on)?,
        off: score(&off)?,
        baseline: baseline.map,
        purity: on.metrics.iter().map(|m| m.purity.unwrap_or(f64::NAN)).collect(),
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn direction_of_effect(runs: &[DeskRun], elapsed: Duration) -> Outcome {
    let on = mean(runs.iter().map(|r| r.on));
    let off = mean(runs.iter().map(|r| r.off));
    let base = mean(runs.iter().map(|r| r.baseline));
    let summary = format!(
        "mAP with single-camera {:.2}, without {:.2}, shuffled baseline {:.2} (gain {:+.2} points), {elapsed:.1?}",
        100.0 * on,
        100.0 * off,
        100.0 * base,
        100.0 * (on - off)
    );
    check(on - off >= 0.02, || format!("gain below 2 points: {summary}"))?;
    check(off - base >= 0.10, || format!("not 10 points above baseline: {summary}"))?;
    check(elapsed < Duration::from_secs(300), || format!("too slow: {summary}"))?;
    Ok(summary)
}

fn purity_trend(runs: &[DeskRun]) -> Outcome {
    let mut parts = Vec::new();
    for (seed, r) in runs.iter().enumerate() {
        let smoothed = moving_average(&r.purity, 3);
        let (first, last) = (r.purity[0], *smoothed.last().unwrap());
        parts.push(format!("seed {seed}: {first:.3} -> {last:.3}"));
        check(last >= first, || format!("purity fell: {}", parts.join(", ")))?;
        check(last >= 0.9, || format!("final purity below 0.9: {}", parts.join(", ")))?;
    }
    Ok(format!("3-epoch average purity {}", parts.join(", ")))
}

fn batch_composition() -> Outcome {
    let cfg = RunConfig::default();
    let data = synth_generate::<f64>(&cfg.generator, &mut SeedTree::new(0).stream("generator")).map_err(|e| e.to_string())?;
    let seeds = SeedTree::new(0);
    let state = TrainState::<f64>::init(cfg.generator.dim, &cfg.model, &cfg.train, &seeds).map_err(|e| e.to_string())?;
    let pool = pseudo_label_epoch(&data.corpus, &state.momentum, &cfg.train.pseudo, cfg.train.pseudo_limit(), &mut seeds.stream("pseudo"))
        .map_err(|e| e.to_string())?;
    let sizes = BatchSizes::default();
    check(sizes.total() == 64 && sizes.multi_len() == 32 && sizes.single_len() == 32, || format!("{sizes:?}"))?;
    let mut rng = seeds.stream("batches");
    for b in 0..10_000 {
        let batch = compose_batch(&data.train, Some(&pool), sizes, &mut rng).map_err(|e| e.to_string())?;
        let fail = |what: &str| format!("batch {b}: {what}");
        check(batch.multi.len() == 32 && batch.single.len() == 32, || fail("wrong size"))?;
        let mut per_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for p in &batch.multi {
            let s = &data.train.samples()[p.index];
            check(s.identity == Some(p.label) && s.camera == Some(p.camera), || fail("pick annotations disagree"))?;
            per_label.entry(p.label).or_default().push(p.camera);
        }
        check(per_label.len() == 8 && per_label.values().all(|c| c.len() == 4), || fail("multi half is not 8x4"))?;
        // every training identity is seen by 4 cameras, so 4 picks cover 4 cameras
        check(per_label.values().all(|c| c.iter().collect::<BTreeSet<_>>().len() == 4), || fail("camera diversity"))?;
        let mut per_pseudo: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for p in &batch.single {
            per_pseudo.entry(p.pseudo_label).or_default().insert(p.member);
        }
        check(per_pseudo.len() == 8, || fail("single half does not hold 8 pseudo labels"))?;
        for (label, members) in &per_pseudo {
            let want = pool.members(*label).len().min(4);
            check(members.len() == want, || fail("pseudo label without 4 distinct members"))?;
        }
        check(batch.single.len() == 32, || fail("single half is not 8x4"))?;
    }

    // identity 0 on cameras {1, 1, 2, 3}: four picks take every sample and cover all three cameras
    let sample = |id: u64, identity: usize, camera: usize| PersonSample {
        sample_id: id,
        features: vec![1.0, 0.0],
        identity: Some(identity),
        camera: Some(camera),
        video_id: None,
        source: Source::Multi,
        hidden_identity: identity as u64,
    };
    let fixture = MultiCamDataset::new(vec![
        sample(0, 0, 1),
        sample(1, 0, 1),
        sample(2, 0, 2),
        sample(3, 0, 3),
        sample(4, 1, 0),
        sample(5, 1, 0),
    ])
    .map_err(|e| e.to_string())?;
    for seed in 0..100 {
        let mut rng = SeedTree::new(seed).stream("fixture");
        let three = camera_diverse_pick(&fixture, 0, 3, &mut rng);
        check(three.iter().map(|p| p.camera).collect::<BTreeSet<_>>().len() == 3, || "3 picks miss a camera".into())?;
        let four = camera_diverse_pick(&fixture, 0, 4, &mut rng);
        check(four.iter().map(|p| p.index).collect::<BTreeSet<_>>().len() == 4, || "4 picks repeat a sample".into())?;
        let six = camera_diverse_pick(&fixture, 0, 6, &mut rng);
        check(six.len() == 6 && six.iter().all(|p| p.label == 0), || "oversized pick".into())?;
    }
    Ok("10000 default batches are 8x4 + 8x4 with full camera coverage; diversity fixture holds".into())
}

fn files_under(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut cfg = RunConfig::from_parts(None, &["train.epochs=2".into(), "seed=7".into()]).map_err(|e| e.to_string())?;
        cfg.io.rebase(dir.path());
        cmd_generate(&cfg).map_err(|e| e.to_string())?;
        cmd_train(&cfg).map_err(|e| e.to_string())?;
        outputs.push(files_under(dir.path()));
    }
    let names: Vec<&String> = outputs[0].keys().collect();
    check(outputs[0].contains_key("metrics.jsonl") && outputs[0].contains_key("checkpoint.json"), || {
        format!("missing outputs: {names:?}")
    })?;
    check(outputs[0] == outputs[1], || format!("outputs differ between runs: {names:?}"))?;
    Ok(format!("two 2-epoch runs wrote byte-identical {names:?}"))
}

fn loss_weights() -> Outcome {
    let mut rng = SeedTree::new(23).stream("weights");
    let cfg = LossConfig { gamma: 0.5, ..LossConfig::default() };
    let (mut worst_value, mut worst_grad) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let mut labels = Vec::new();
        let mut cameras = Vec::new();
        for l in 0..3 {
            for j in 0..4 {
                labels.push(BatchLabel::multi(l));
                cameras.push(Some((l + j) % 3));
            }
        }
        for l in 0..3 {
            for _ in 0..4 {
                labels.push(BatchLabel::single(l));
                cameras.push(None);
            }
        }
        let f: Vec<Embedding<f64>> = labels.iter().map(|_| unit(8, &mut rng)).collect();
        let m: Vec<Embedding<f64>> = labels.iter().map(|_| unit(8, &mut rng)).collect();
        let bank = build_centroids(&m, &labels, &cameras, 0).map_err(|e| e.to_string())?;
        let v = BatchView::new(&f, &m, &labels, &cameras).map_err(|e| e.to_string())?;
        let total = total_loss(&v, &bank, &cfg).map_err(|e| e.to_string())?;
        let t = loss_terms(&v, &bank, &cfg).map_err(|e| e.to_string())?;
        let cc = t.cc.as_ref().ok_or("camera-centroid term missing")?;
        let sum = t.ins.value + t.aug.value + t.cen.value + 0.5 * cc.value;
        worst_value = worst_value.max((total.value - sum).abs());
        for i in 0..v.len() {
            for d in 0..8 {
                let g = t.ins.grads[i][d] + t.aug.grads[i][d] + t.cen.grads[i][d] + 0.5 * cc.grads[i][d];
                worst_grad = worst_grad.max((total.grads[i][d] - g).abs());
            }
        }
    }
    check(worst_value <= 1e-12 && worst_grad <= 1e-12, || format!("value gap {worst_value:e}, gradient gap {worst_grad:e}"))?;
    Ok(format!("gamma=0.5: value gap {worst_value:.1e}, gradient gap {worst_grad:.1e}"))
}

fn guarded<R>(f: impl FnOnce() -> Result<R, String>) -> Result<R, String> {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
    })
}

fn main() -> ExitCode {
    let start = Instant::now();
    let runs = guarded(|| {
        let t = Instant::now();
        let runs: Vec<DeskRun> = (0..3).map(desk_run).collect::<Result<_, _>>()?;
        Ok((runs, t.elapsed()))
    });
    let desk = runs.map_err(|e| format!("desk runs failed: {e}"));
    let results: Vec<(&str, Outcome)> = vec![
        ("1 gradient fidelity", guarded(gradient_fidelity)),
        ("2 degenerate zeros", guarded(degenerate_zeros)),
        ("3 dbscan oracle", guarded(dbscan_oracle)),
        ("4 metric fixtures", guarded(metric_fixtures)),
        ("5 single-camera effect", desk.clone().and_then(|(r, t)| guarded(|| direction_of_effect(&r, t)))),
        ("6 pseudo-label purity", desk.and_then(|(r, _)| guarded(|| purity_trend(&r)))),
        ("7 batch composition", guarded(batch_composition)),
        ("8 determinism", guarded(determinism)),
        ("9 loss weights", guarded(loss_weights)),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed in {:.1?}", results.len() - failed, start.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
