//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//!
//! Criteria 1, 2, 3, 7 and 8 take seconds. Criteria 4, 5, 6 and 9 train full
//! desk-scale streams on the bundled MNIST subset and take most of the time;
//! progress goes to stderr. Reports of the desk runs are left under the
//! cargo target tmp directory for inspection.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use stam::baselines::knn_classify;
use stam::dataset::{ClassId, Image};
use stam::model::{
    blend, Ablation, Hierarchy, LayerConfig, LayerMemory, LtmPolicy, NoveltyWindow, PatchEvent,
    SearchTier, Tier,
};
use stam::rng::{seeded, StamRng};
use stam::tasks::{
    associations_from_encodings, classify_encoding, compute_associations, embedding_from_encoding,
    encode_image, EvalContext,
};
use stam_harness::{
    emit_report, run_ablation, run_experiment_with, AblationKind, Dataset, ExperimentConfig,
    ExperimentResult, PhaseMetrics,
};

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scratch(name: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR"))
        .join("acceptance")
        .join(name)
}

// ---------------------------------------------------------------------------
// shared slow reference code

fn naive_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn naive_normalize(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    if sd < 1e-8 {
        vec![0.0; v.len()]
    } else {
        v.iter().map(|x| (x - mean) / sd).collect()
    }
}

fn naive_patches(img: &Image, rho: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for r in 0..=img.height() - rho {
        for c in 0..=img.width() - rho {
            let v: Vec<f64> = (0..rho * rho)
                .map(|i| img.get(r + i / rho, c + i % rho))
                .collect();
            out.push(naive_normalize(&v));
        }
    }
    out
}

fn exhaustive(x: &[f64], pools: &[(Tier, Vec<Vec<f64>>)]) -> (Tier, usize, f64) {
    let mut best: Option<(Tier, usize, f64)> = None;
    for (tier, rows) in pools {
        for (i, c) in rows.iter().enumerate() {
            let d = naive_sq(x, c);
            if best.is_none_or(|b| d < b.2) {
                best = Some((*tier, i, d));
            }
        }
    }
    let (t, i, d) = best.expect("nonempty pools");
    (t, i, d.sqrt())
}

fn rows(layer: &LayerMemory, tier: Tier) -> Vec<Vec<f64>> {
    let p = layer.pool(tier);
    (0..p.len()).map(|i| p.values(i).to_vec()).collect()
}

fn random_image(rng: &mut impl Rng, h: usize, w: usize) -> Image {
    Image::new(h, w, (0..h * w).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn small_trained(rng: &mut impl Rng, side: usize, rhos: &[usize], cap: usize) -> Hierarchy {
    let cfgs = rhos
        .iter()
        .map(|&rho| LayerConfig {
            theta: 2,
            warmup: 5,
            window: 40,
            ..LayerConfig::new(rho, cap)
        })
        .collect();
    let mut h = Hierarchy::new(cfgs, Ablation::default()).unwrap();
    let first: Vec<Image> = (0..4).map(|_| random_image(rng, side, side)).collect();
    h.init_from_images(&first, rng.random()).unwrap();
    for _ in 0..rng.random_range(5..40) {
        h.process_image(&random_image(rng, side, side)).unwrap();
    }
    h
}

// ---------------------------------------------------------------------------
// 1. invariants over randomized events

fn layer_events(seed: u64, dynamic: bool) -> std::result::Result<usize, String> {
    let mut rng = seeded(seed);
    let rho = rng.random_range(1..4);
    let cap = rng.random_range(1..12);
    let theta = rng.random_range(1..8);
    let cfg = LayerConfig {
        theta,
        warmup: 20,
        window: 100,
        ..LayerConfig::new(rho, cap)
    };
    let dim = cfg.dim();
    let mut layer = LayerMemory::new(
        cfg,
        LtmPolicy {
            disabled: false,
            dynamic,
        },
    )
    .unwrap();
    let means: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let next = |rng: &mut StamRng| -> Vec<f64> {
        let m = means.choose(rng).unwrap();
        m.iter()
            .map(|v| v + 0.3 * rng.random_range(-1.0..1.0))
            .collect()
    };
    let init: Vec<Vec<f64>> = (0..cap).map(|_| next(&mut rng)).collect();
    layer.seed_stm(init.iter().map(Vec::as_slice)).unwrap();

    let mut frozen: HashMap<u64, Vec<f64>> = HashMap::new();
    let mut ltm_len = 0;
    let events = 500;
    for step in 0..events {
        let x = next(&mut rng);
        let out = layer.process_patch(&x).map_err(|e| e.to_string())?;
        let at = || format!("layer seed {seed}, event {step}");
        ensure(layer.stm().len() <= cap, || {
            format!("{}: STM over capacity", at())
        })?;
        ensure(layer.ltm().len() >= ltm_len, || {
            format!("{}: LTM shrank", at())
        })?;
        ensure(layer.dbar() >= 0.0, || {
            format!("{}: negative mean distance", at())
        })?;
        ltm_len = layer.ltm().len();
        if let PatchEvent::StmUpdate {
            id,
            consolidated: true,
        } = out.event
        {
            let i = layer.ltm().position_of(id).unwrap();
            ensure(layer.ltm().meta(i).select_count >= theta, || {
                format!("{}: consolidated below theta", at())
            })?;
            frozen.insert(id, layer.ltm().values(i).to_vec());
        }
        if !dynamic {
            for (i, m) in layer.ltm().metas().iter().enumerate() {
                ensure(layer.ltm().values(i) == frozen[&m.id].as_slice(), || {
                    format!("{}: frozen LTM centroid {} moved", at(), m.id)
                })?;
            }
        }
    }
    Ok(events)
}

fn blend_events(seed: u64, n: usize) -> std::result::Result<usize, String> {
    let mut rng = seeded(seed);
    for i in 0..n {
        let dim = rng.random_range(1..64);
        let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        let alpha = rng.random_range(0.001..0.999);
        let mut moved = c.clone();
        blend(&mut moved, &x, alpha);
        let before = naive_sq(&c, &x).sqrt();
        let after = naive_sq(&moved, &x).sqrt();
        ensure((after - (1.0 - alpha) * before).abs() < 1e-9, || {
            format!(
                "blend case {i}: contraction off by {}",
                after - (1.0 - alpha) * before
            )
        })?;
    }
    Ok(n)
}

fn striped(rng: &mut impl Rng, class: ClassId) -> Image {
    let pix = (0..64)
        .map(|i| {
            let (r, c) = (i / 8, i % 8);
            let base = match class {
                0 => (r % 2) as f64,
                1 => (c % 2) as f64,
                _ => ((r + c) % 2) as f64,
            };
            base + 0.3 * rng.random::<f64>()
        })
        .collect();
    Image::new(8, 8, pix).unwrap()
}

/// Evaluation-side invariants on a small trained hierarchy; returns the
/// number of checked classifications.
fn evaluation_events(seed: u64) -> std::result::Result<usize, String> {
    let mut rng = seeded(seed);
    let cfgs = vec![
        LayerConfig {
            theta: 3,
            warmup: 20,
            window: 200,
            ..LayerConfig::new(2, 6)
        },
        LayerConfig {
            theta: 3,
            warmup: 20,
            window: 200,
            ..LayerConfig::new(4, 6)
        },
    ];
    let mut h = Hierarchy::new(cfgs, Ablation::default()).unwrap();
    let first: Vec<Image> = (0..2).map(|i| striped(&mut rng, i)).collect();
    h.init_from_images(&first, seed).unwrap();
    for _ in 0..30 {
        let c = rng.random_range(0..3);
        let img = striped(&mut rng, c);
        h.process_image(&img).unwrap();
    }
    let ctx = EvalContext::of(&h);
    if ctx.centroids() == 0 {
        return Ok(0);
    }
    let labeled: Vec<_> = (0..9)
        .map(|i| {
            let c = (i % 3) as ClassId;
            (encode_image(&h, &striped(&mut rng, c), true).unwrap(), c)
        })
        .collect();
    let gamma = rng.random_range(0.0..0.6);
    let assoc = associations_from_encodings(&ctx, labeled.iter().map(|(e, c)| (e, *c)), gamma)
        .map_err(|e| e.to_string())?;
    for la in &assoc.layers {
        for ca in &la.centroids {
            ensure(ca.g.iter().all(|&g| g >= 0.0), || {
                "negative association".into()
            })?;
            if ca.mass > 0.0 {
                let s: f64 = ca.g.iter().sum();
                ensure((s - 1.0).abs() < 1e-9, || format!("association sum {s}"))?;
            }
        }
    }
    let layers = ctx.layers.len() as f64;
    let mut n = 0;
    for i in 0..20 {
        let img = striped(&mut rng, (i % 3) as ClassId);
        let enc = encode_image(&h, &img, true).map_err(|e| e.to_string())?;
        let c = classify_encoding(&assoc, &enc).map_err(|e| e.to_string())?;
        for lv in &c.layer_votes {
            ensure(lv.iter().all(|&v| (0.0..=1.0).contains(&v)), || {
                "layer vote out of [0,1]".into()
            })?;
        }
        ensure(c.votes.iter().all(|&v| (0.0..=layers).contains(&v)), || {
            "vote out of range".into()
        })?;
        let e = embedding_from_encoding(&ctx, &enc).map_err(|e| e.to_string())?;
        ensure(e.values.iter().all(|&v| v > 0.0 && v <= 1.0), || {
            "embedding entry out of (0,1]".into()
        })?;
        n += 1;
    }
    Ok(n)
}

fn criterion_1() -> Check {
    let t0 = Instant::now();
    let mut events = 0;
    for s in 0..24u64 {
        events += layer_events(1000 + s, s % 2 == 1)?;
    }
    events += blend_events(77, 2000)?;
    for s in 0..30u64 {
        events += evaluation_events(500 + s)?;
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(events >= 10_000, || format!("only {events} events"))?;
    ensure(secs < 60.0, || {
        format!("{events} events took {secs:.1}s (limit 60s)")
    })?;
    Ok(format!("{events} randomized events green in {secs:.1}s"))
}

// ---------------------------------------------------------------------------
// 2. optimized routines against exhaustive oracles

fn random_layer(rng: &mut impl Rng, rho: usize, cap: usize) -> LayerMemory {
    let cfg = LayerConfig {
        theta: 3,
        warmup: 10,
        window: 50,
        ..LayerConfig::new(rho, cap)
    };
    let dim = cfg.dim();
    let mut layer = LayerMemory::new(cfg, LtmPolicy::default()).unwrap();
    let seeds: Vec<Vec<f64>> = (0..cap)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    layer.seed_stm(seeds.iter().map(Vec::as_slice)).unwrap();
    for _ in 0..rng.random_range(0..200) {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        layer.process_patch(&x).unwrap();
    }
    layer
}

fn nearest_cases() -> std::result::Result<usize, String> {
    let mut rng = seeded(11);
    let mut cases = 0;
    let mut built = 0;
    while cases < 1000 {
        let (rho, cap) = if built % 10 == 9 {
            (rng.random_range(2..6), rng.random_range(1000..=10_000))
        } else {
            (rng.random_range(1..9), rng.random_range(1..60))
        };
        built += 1;
        let layer = random_layer(&mut rng, rho, cap);
        let ltm = rows(&layer, Tier::Ltm);
        let stm = rows(&layer, Tier::Stm);
        for _ in 0..20 {
            // an exact copy of a stored centroid often ties with a duplicate
            let x: Vec<f64> = if rng.random_range(0..4) == 0 && !stm.is_empty() {
                stm[rng.random_range(0..stm.len())].clone()
            } else {
                (0..rho * rho)
                    .map(|_| rng.random_range(-1.5..1.5))
                    .collect()
            };
            for (search, pools) in [
                (
                    SearchTier::All,
                    vec![(Tier::Ltm, ltm.clone()), (Tier::Stm, stm.clone())],
                ),
                (SearchTier::StmOnly, vec![(Tier::Stm, stm.clone())]),
                (SearchTier::LtmOnly, vec![(Tier::Ltm, ltm.clone())]),
            ] {
                if pools.iter().all(|(_, r)| r.is_empty()) {
                    continue;
                }
                let got = layer
                    .nearest_centroid(&x, search)
                    .map_err(|e| e.to_string())?;
                let (tier, index, d) = exhaustive(&x, &pools);
                ensure((got.tier, got.index) == (tier, index), || {
                    format!(
                        "nearest: got {:?}/{} want {tier:?}/{index}",
                        got.tier, got.index
                    )
                })?;
                ensure((got.distance - d).abs() <= 1e-12 * (1.0 + d), || {
                    format!("nearest distance {} vs {d}", got.distance)
                })?;
            }
            cases += 1;
        }
    }
    Ok(cases)
}

fn percentile_cases() -> std::result::Result<usize, String> {
    let mut rng = seeded(12);
    for case in 0..500 {
        let capacity = rng.random_range(1..3000);
        let pushes = rng.random_range(1..2 * capacity + 2);
        let k: usize = rng.random_range(1..100);
        let mut w = NoveltyWindow::new(capacity);
        let mut all = Vec::with_capacity(pushes);
        for _ in 0..pushes {
            let v = if case % 2 == 0 {
                rng.random_range(0..20) as f64
            } else {
                rng.random::<f64>() * 10.0
            };
            w.push(v);
            all.push(v);
        }
        let mut tail = all[all.len().saturating_sub(capacity)..].to_vec();
        tail.sort_by(f64::total_cmp);
        let rank = (k * tail.len()).div_ceil(100).max(1);
        ensure(
            w.percentile(k as f64 / 100.0) == Some(tail[rank - 1]),
            || format!("percentile buffer {case} disagrees"),
        )?;
    }
    Ok(500)
}

fn association_cases() -> std::result::Result<usize, String> {
    let mut rng = seeded(13);
    let gamma = 0.15;
    let classes = [3, 7];
    let mut checked = 0;
    while checked < 50 {
        let h = small_trained(&mut rng, 4, &[2, 3], 3);
        let labeled: Vec<(Image, ClassId)> = (0..4)
            .map(|i| (random_image(&mut rng, 4, 4), classes[i % 2]))
            .collect();
        if (0..h.len()).all(|l| h.layer(l).ltm().is_empty()) {
            continue;
        }
        let assoc = compute_associations(&h, labeled.iter().map(|(i, c)| (i, *c)), gamma)
            .map_err(|e| e.to_string())?;
        for la in &assoc.layers {
            let layer = h.layer(la.layer);
            let ltm = rows(layer, Tier::Ltm);
            let mut sums = vec![[0.0f64; 2]; ltm.len()];
            for (img, class) in &labeled {
                let k = classes.iter().position(|c| c == class).unwrap();
                for p in naive_patches(img, layer.config().rho) {
                    let (_, j, d) = exhaustive(&p, &[(Tier::Ltm, ltm.clone())]);
                    sums[j][k] += (-d / layer.dbar()).exp();
                }
            }
            for (ca, s) in la.centroids.iter().zip(&sums) {
                let total = s[0] + s[1];
                let g = if total > 0.0 {
                    [s[0] / total, s[1] / total]
                } else {
                    [0.5, 0.5]
                };
                ensure(
                    (ca.g[0] - g[0]).abs() < 1e-9 && (ca.g[1] - g[1]).abs() < 1e-9,
                    || format!("association {:?} vs brute force {g:?}", ca.g),
                )?;
                ensure(
                    ca.cin == (total > 0.0 && g[0].max(g[1]) > 0.5 + gamma),
                    || "CIN flag disagrees with brute force".into(),
                )?;
            }
        }
        checked += 1;
    }
    Ok(checked)
}

fn naive_knn(train: &[Vec<f64>], labels: &[ClassId], q: &[f64], k: usize) -> ClassId {
    let mut order: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, t)| (naive_sq(t, q), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let top = &order[..k];
    let mut best: Option<(usize, ClassId)> = None;
    for (rank, &(_, i)) in top.iter().enumerate() {
        let label = labels[i];
        if top[..rank].iter().any(|&(_, j)| labels[j] == label) {
            continue;
        }
        let votes = top.iter().filter(|&&(_, j)| labels[j] == label).count();
        if best.is_none_or(|b| votes > b.0) {
            best = Some((votes, label));
        }
    }
    best.unwrap().1
}

fn knn_cases() -> std::result::Result<usize, String> {
    let mut rng = seeded(14);
    let train: Vec<Vec<f64>> = (0..200)
        .map(|_| (0..5).map(|_| rng.random_range(0..4) as f64).collect())
        .collect();
    let labels: Vec<ClassId> = (0..200).map(|_| rng.random_range(0..4)).collect();
    for i in 0..300 {
        let q: Vec<f64> = (0..5).map(|_| rng.random_range(0..4) as f64).collect();
        let k = [1, 2, 3, 4, 5, 7, 10][rng.random_range(0..7)];
        let got = knn_classify(&train, &labels, &q, k).map_err(|e| e.to_string())?;
        ensure(got == naive_knn(&train, &labels, &q, k), || {
            format!("KNN query {i} (k={k}) disagrees")
        })?;
    }
    Ok(300)
}

fn criterion_2() -> Check {
    let n = nearest_cases()?;
    let p = percentile_cases()?;
    let a = association_cases()?;
    let k = knn_cases()?;
    Ok(format!(
        "{n} nearest-centroid cases, {p} percentile buffers, {a} association cases, {k} KNN queries agree"
    ))
}

// ---------------------------------------------------------------------------
// 3. planted clusters

fn criterion_3() -> Check {
    let t0 = Instant::now();
    let mut rng = seeded(15);
    let means: [[f64; 4]; 3] = [
        [1.0, 0.0, -1.0, 0.5],
        [-1.0, 1.0, 0.0, -0.5],
        [0.0, -1.0, 1.0, 1.0],
    ];
    let noise = Normal::new(0.0, 0.05).unwrap();
    let sample = |rng: &mut StamRng| means.choose(rng).unwrap().map(|v| v + noise.sample(rng));
    let cfg = LayerConfig {
        theta: 5,
        ..LayerConfig::new(2, 3)
    };
    let mut layer = LayerMemory::new(cfg, LtmPolicy::default()).unwrap();
    let seeds: Vec<[f64; 4]> = (0..3).map(|_| sample(&mut rng)).collect();
    layer.seed_stm(seeds.iter().map(|s| s.as_slice())).unwrap();
    for _ in 0..5000 {
        let x = sample(&mut rng);
        layer.process_patch(&x).map_err(|e| e.to_string())?;
    }
    let ltm = rows(&layer, Tier::Ltm);
    let mut worst: f64 = 0.0;
    for m in &means {
        let d = ltm
            .iter()
            .map(|c| naive_sq(c, m).sqrt())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(worst < 0.2, || {
        format!("a planted mean is {worst:.3} from the nearest LTM centroid")
    })?;
    ensure(secs < 5.0, || format!("took {secs:.2}s (limit 5s)"))?;
    Ok(format!(
        "all 3 means recovered (worst L2 {worst:.4}, {} LTM centroids) in {secs:.3}s",
        ltm.len()
    ))
}

// ---------------------------------------------------------------------------
// 7. memory footprint

fn criterion_7() -> Check {
    let mut rng = seeded(17);
    for case in 0..20 {
        let n_layers = rng.random_range(1..4);
        let mut rhos: Vec<usize> = (0..n_layers).map(|_| rng.random_range(1..5)).collect();
        rhos.sort();
        rhos.dedup();
        let caps: Vec<usize> = rhos.iter().map(|_| rng.random_range(1..10)).collect();
        let cfgs = rhos
            .iter()
            .zip(&caps)
            .map(|(&rho, &cap)| LayerConfig {
                theta: 2,
                warmup: 5,
                window: 40,
                ..LayerConfig::new(rho, cap)
            })
            .collect();
        let mut h = Hierarchy::new(cfgs, Ablation::default()).unwrap();
        let first: Vec<Image> = (0..10).map(|_| random_image(&mut rng, 6, 6)).collect();
        h.init_from_images(&first, case).unwrap();
        for _ in 0..rng.random_range(0..30) {
            h.process_image(&random_image(&mut rng, 6, 6)).unwrap();
        }
        let want: u64 = (0..h.len())
            .map(|l| {
                let rho = rhos[l] as u64;
                rho * rho * (h.layer(l).ltm().len() as u64 + caps[l] as u64)
            })
            .sum();
        ensure(h.memory_footprint() == want, || {
            format!(
                "config {case}: footprint {} vs closed form {want}",
                h.memory_footprint()
            )
        })?;
    }
    let mnist = Hierarchy::new(
        [8, 13, 20]
            .iter()
            .map(|&rho| LayerConfig::new(rho, 400))
            .collect(),
        Ablation::default(),
    )
    .unwrap();
    ensure(mnist.memory_footprint() == 253_200, || {
        format!("MNIST empty-LTM footprint {}", mnist.memory_footprint())
    })?;
    Ok("20 random configurations match the closed form; MNIST empty LTM = 253200 px".into())
}

// ---------------------------------------------------------------------------
// 8. determinism across two processes

fn criterion_8() -> Check {
    let dir = scratch("determinism");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let data = workspace().join("data/mnist-desk");
    let data = data
        .canonicalize()
        .map_err(|e| format!("{}: {e}", data.display()))?;
    let config = format!(
        r#"seed = 99
out_dir = "unused"

[data]
train_images = "{d}/train-images-idx3-ubyte.gz"
train_labels = "{d}/train-labels-idx1-ubyte.gz"
test_images = "{d}/t10k-images-idx3-ubyte.gz"
test_labels = "{d}/t10k-labels-idx1-ubyte.gz"

[stream]
mode = "incremental"
phases = [[0, 1], [2, 3]]
examples_per_phase = 150

[model]
rho = [8, 13, 20]
delta = 100

[eval]
labels_per_class = 5
test_per_class = 20
eval_repeats = 2
stream_repeats = 2

[baseline]
enabled = true
cap = 50
"#,
        d = data.display()
    );
    let cfg_path = dir.join("small.toml");
    std::fs::write(&cfg_path, config).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_stam"))
            .args(["run", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(&out)
            .env("RUST_LOG", "warn")
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.success(), || {
            format!("run {run} exited with {status}")
        })?;
        let bytes = std::fs::read(out.join("metrics.csv")).map_err(|e| e.to_string())?;
        outputs.push(bytes);
    }
    ensure(!outputs[0].is_empty(), || "metrics.csv is empty".into())?;
    ensure(outputs[0] == outputs[1], || {
        "metrics.csv differs between the two runs".into()
    })?;
    Ok(format!(
        "two processes wrote byte-identical metrics.csv ({} bytes)",
        outputs[0].len()
    ))
}

// ---------------------------------------------------------------------------
// desk-scale runs: 4, 5, 6, 9

struct Desk {
    cfg: ExperimentConfig,
    data: Dataset,
    full: ExperimentResult,
    full_secs: f64,
}

fn desk_config() -> std::result::Result<ExperimentConfig, String> {
    let path = workspace().join("configs/mnist-desk.toml");
    let mut cfg = ExperimentConfig::load(&path).map_err(|e| e.to_string())?;
    // The stream, model and label settings stay as configured. Only the
    // evaluation draws are trimmed to keep the run affordable.
    cfg.eval.test_per_class = 50;
    cfg.eval.eval_repeats = 2;
    cfg.eval.stream_repeats = 3;
    cfg.eval.clustering = false;
    cfg.eval.record_time = false;
    cfg.baseline.enabled = true;
    cfg.save_snapshots = true;
    cfg.out_dir = scratch("desk-full");
    Ok(cfg)
}

fn final_phase(rows: &[PhaseMetrics]) -> usize {
    rows.iter().map(|r| r.phase).max().unwrap_or(0)
}

/// Mean final-phase accuracy of each stream.
fn final_accuracy_by_stream(rows: &[PhaseMetrics]) -> Vec<f64> {
    let last = final_phase(rows);
    let mut by: HashMap<usize, Vec<f64>> = HashMap::new();
    for r in rows.iter().filter(|r| r.phase == last) {
        by.entry(r.stream_id).or_default().push(r.acc_mean);
    }
    let mut ids: Vec<_> = by.keys().copied().collect();
    ids.sort();
    ids.iter()
        .map(|s| by[s].iter().sum::<f64>() / by[s].len() as f64)
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn criterion_4(desk: &Desk) -> Check {
    let rows = &desk.full.metrics;
    let last = final_phase(rows);
    ensure(last == desk.cfg.stream.phases.len(), || {
        format!("run stopped at phase {last}")
    })?;
    let chance = 1.0 / desk.cfg.stream.phases.iter().flatten().count() as f64;
    let accs = final_accuracy_by_stream(rows);
    ensure(accs.len() == 3, || {
        format!("{} streams instead of 3", accs.len())
    })?;
    let first_classes = &desk.cfg.stream.phases[0];
    let mut detail = Vec::new();
    for (s, &acc) in accs.iter().enumerate() {
        ensure(acc >= 3.0 * chance, || {
            format!("stream {s}: final accuracy {acc:.3} < {:.2}", 3.0 * chance)
        })?;
        for &c in first_classes {
            let per: Vec<f64> = rows
                .iter()
                .filter(|r| r.stream_id == s && r.phase == last)
                .map(|r| {
                    let i = r.classes_seen.iter().position(|&x| x == c).unwrap();
                    r.acc_per_class[i]
                })
                .collect();
            let a = mean(&per);
            ensure(a >= chance, || {
                format!("stream {s}: class {c} fell to {a:.3} (< chance {chance})")
            })?;
            detail.push(format!("{c}:{a:.2}"));
        }
    }
    let budget = if desk.full_secs <= 600.0 {
        "within"
    } else {
        "over"
    };
    Ok(format!(
        "final accuracy per seed {:?} (>= {:.2}); phase-1 classes at the end {}; 3-seed run took {:.0}s on {} core(s), {budget} the 600s desktop budget",
        accs.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>(),
        3.0 * chance,
        detail.join(" "),
        desk.full_secs,
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    ))
}

fn criterion_5(desk: &Desk) -> Check {
    let mut cfg = desk.cfg.clone();
    cfg.baseline.enabled = false;
    cfg.save_snapshots = false;
    let full = mean(&final_accuracy_by_stream(&desk.full.metrics));
    let mut ablated = Vec::new();
    for kind in [AblationKind::NoLtm, AblationKind::DynamicLtm] {
        eprintln!("[acceptance] ablation {kind:?}");
        let r = run_ablation(&cfg, &kind, &desk.data).map_err(|e| e.to_string())?;
        let dir = scratch(&format!("desk-{kind:?}").to_lowercase());
        emit_report(&r, &dir, cfg.eval.trace_every, true).map_err(|e| e.to_string())?;
        ablated.push(mean(&final_accuracy_by_stream(&r.metrics)));
    }
    let (no_ltm, dynamic) = (ablated[0], ablated[1]);
    let line =
        format!("final accuracy no-LTM {no_ltm:.3}, dynamic LTM {dynamic:.3}, full {full:.3}");
    ensure(no_ltm < full, || {
        format!("{line}: no-LTM is not below full")
    })?;
    ensure(dynamic < full, || {
        format!("{line}: dynamic LTM is not below full")
    })?;
    ensure(dynamic > no_ltm, || {
        format!("{line}: dynamic LTM is not above no-LTM")
    })?;
    Ok(line)
}

fn criterion_6(desk: &Desk) -> Check {
    let traces = &desk.full.traces;
    ensure(!traces.is_empty(), || "no LTM traces".into())?;
    let layers = traces[0].layers.clone();
    let ends = traces[0].phase_ends.clone();
    let count = |t: &stam_harness::LtmTrace, images: usize, j: usize| -> f64 {
        if images == 0 {
            0.0
        } else {
            t.counts[images - 1][j] as f64
        }
    };
    let mut cells = Vec::new();
    let mut failed = Vec::new();
    for p in 1..ends.len() {
        let (start, prev_start) = (ends[p - 1], if p >= 2 { ends[p - 2] } else { 0 });
        let early_len = (ends[p] - start) / 10;
        let late_len = (start - prev_start) / 2;
        for (j, layer) in layers.iter().enumerate() {
            let early = mean(
                &traces
                    .iter()
                    .map(|t| count(t, start + early_len, j) - count(t, start, j))
                    .collect::<Vec<_>>(),
            );
            let late = mean(
                &traces
                    .iter()
                    .map(|t| count(t, start, j) - count(t, start - late_len, j))
                    .collect::<Vec<_>>(),
            );
            let cell = format!("p{}/L{layer} {early:.0}>{late:.0}", p + 1);
            if early <= late {
                failed.push(cell.replace('>', "<="));
            }
            cells.push(cell);
        }
    }
    ensure(failed.is_empty(), || {
        format!(
            "{} of {} (phase, layer) cells lack the spike, mean over seeds of first-10% vs last-50% growth: {}",
            failed.len(),
            cells.len(),
            failed.join(", ")
        )
    })?;
    Ok(format!(
        "start-of-phase growth exceeds late growth in all cells: {}",
        cells.join(", ")
    ))
}

fn criterion_9(desk: &Desk) -> Check {
    let cap = desk.cfg.baseline.cap;
    let rows = &desk.full.baseline;
    let phases = desk.cfg.stream.phases.len();
    let want_rows = 3 * phases * desk.cfg.eval.eval_repeats;
    ensure(rows.len() == want_rows, || {
        format!("{} baseline rows, expected {want_rows}", rows.len())
    })?;
    for r in rows {
        ensure(
            r.acc_mean.is_finite() && (0.0..=1.0).contains(&r.acc_mean),
            || format!("baseline accuracy {} out of range", r.acc_mean),
        )?;
        ensure(r.components >= 1 && r.components <= cap, || {
            format!("{} components with cap {cap}", r.components)
        })?;
        ensure(r.components == cap || r.explained >= 0.9 - 1e-9, || {
            format!(
                "{} components explain only {:.3}",
                r.components, r.explained
            )
        })?;
    }
    // the final models carry the full spectrum: the count must be the
    // smallest reaching 90%, unless the cap binds first
    let mut counts = Vec::new();
    for snap in &desk.full.snapshots {
        let model = snap.pca.as_ref().ok_or("missing PCA model")?;
        let mut acc = 0.0;
        let mut needed = model.spectrum.len();
        for (i, r) in model.spectrum.iter().enumerate() {
            acc += r;
            if acc >= 0.9 - 1e-12 {
                needed = i + 1;
                break;
            }
        }
        let want = needed.min(cap);
        ensure(model.n_components() == want, || {
            format!(
                "stream {}: {} components, rule gives {want}",
                snap.stream_id,
                model.n_components()
            )
        })?;
        counts.push(model.n_components());
    }
    ensure(counts.len() == 3, || format!("{} PCA models", counts.len()))?;
    let last: Vec<f64> = rows
        .iter()
        .filter(|r| r.phase == phases)
        .map(|r| r.acc_mean)
        .collect();
    Ok(format!(
        "PCA+KNN curve over {phases} phases; final components {counts:?} (cap {cap}, 90% rule); final accuracy {:.3}",
        mean(&last)
    ))
}

fn load_desk() -> std::result::Result<Desk, String> {
    let cfg = desk_config()?;
    let data = Dataset::load(&cfg).map_err(|e| e.to_string())?;
    eprintln!(
        "[acceptance] desk run: 3 streams x {} images",
        cfg.stream.phases.len() * cfg.stream.examples_per_phase
    );
    let t0 = Instant::now();
    let full = run_experiment_with(&cfg, &data).map_err(|e| e.to_string())?;
    let full_secs = t0.elapsed().as_secs_f64();
    emit_report(&full, &cfg.out_dir, cfg.eval.trace_every, true).map_err(|e| e.to_string())?;
    Ok(Desk {
        cfg,
        data,
        full,
        full_secs,
    })
}

// ---------------------------------------------------------------------------

fn guarded(f: impl FnOnce() -> Check) -> Check {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(format!(
            "panicked: {}",
            p.downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default()
        )),
    }
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, Check)> = Vec::new();
    let mut run = |n: u32, f: &dyn Fn() -> Check| {
        eprintln!("[acceptance] criterion {n}");
        let r = guarded(f);
        eprintln!(
            "[acceptance] criterion {n}: {}",
            if r.is_ok() { "PASS" } else { "FAIL" }
        );
        results.push((n, r));
    };
    run(1, &criterion_1);
    run(2, &criterion_2);
    run(3, &criterion_3);
    run(7, &criterion_7);
    run(8, &criterion_8);

    let desk = catch_unwind(load_desk).unwrap_or_else(|_| Err("desk run panicked".into()));
    match &desk {
        Ok(d) => {
            run(4, &|| criterion_4(d));
            run(6, &|| criterion_6(d));
            run(9, &|| criterion_9(d));
            run(5, &|| criterion_5(d));
        }
        Err(e) => {
            for n in [4, 5, 6, 9] {
                results.push((n, Err(format!("desk-scale run failed: {e}"))));
            }
        }
    }

    results.sort_by_key(|(n, _)| *n);
    let mut all = true;
    for (n, r) in &results {
        match r {
            Ok(msg) => println!("PASS criterion {n}: {msg}"),
            Err(msg) => {
                all = false;
                println!("FAIL criterion {n}: {msg}");
            }
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
