//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Runs with `harness = false` so the lines appear in `cargo test` output.
//! Criteria marked "reported" are measured and printed but do not fail the
//! process; every other line does.

use std::path::Path;
use std::time::{Duration, Instant};

use taba::report::{emit_report, METRICS_FILE};
use taba::runtime::ThreadedEvaluator;
use taba_core::adversary::{pgd_attack, AttackConfig};
use taba_core::augment::{taba_augment, AugmentConfig};
use taba_core::harness::{
    build_gauss_streams, run_continual, update_memory, Method, NoClock, RunOutcome, Runtime, TrainConfig,
};
use taba_core::losses::{
    distillation_loss, entropy, one_hot_rows, soft_cross_entropy, taba_total_grad, taba_total_loss, DistillConfig,
    SoftLabel, StudentOldProbs, TeacherOutput,
};
use taba_core::memory::{herd_select, ExemplarMemory, Sample};
use taba_core::nets::{Layer, Model, ModelSnapshot};
use taba_core::taskstream::setting2_sizes;
use taba_core::tensor::{finite_diff, softmax};
use taba_core::{Rng, Tensor};

struct Outcome {
    passed: bool,
    enforced: bool,
}

fn line(id: &str, name: &str, passed: bool, detail: String) -> Outcome {
    let verdict = if passed { "PASS" } else { "FAIL" };
    println!("[{verdict}] {id:<4} {name:<34} {detail}");
    Outcome { passed, enforced: true }
}

fn reported(id: &str, name: &str, passed: bool, detail: String) -> Outcome {
    let mut o = line(id, name, passed, format!("{detail} (reported)"));
    o.enforced = false;
    o
}

fn rows(rng: &mut Rng, n: usize, d: usize) -> Tensor {
    Tensor::new(&[n, d], (0..n * d).map(|_| rng.uniform()).collect()).unwrap()
}

fn simplex(rng: &mut Rng, k: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| rng.uniform() + 1e-3).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

// 1

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let input = 1 + rng.below(4);
        let classes = 2 + rng.below(4);
        let mut dims = vec![input];
        for _ in 0..rng.below(3) {
            dims.push(1 + rng.below(32));
        }
        dims.push(classes);
        let mut model = Model::init(&dims, &mut rng).unwrap();
        // move off the ReLU kinks that zero biases create
        let jittered: Vec<f64> = model.flat_parameters().iter().map(|v| v + rng.uniform_in(-0.1, 0.1)).collect();
        model.set_flat_parameters(&jittered).unwrap();
        let old = rng.below(classes);
        let teacher = (old > 0).then(|| {
            let mut td = dims.clone();
            *td.last_mut().unwrap() = old;
            ModelSnapshot::of(&Model::init(&td, &mut rng).unwrap())
        });
        let n = 1 + rng.below(4);
        let na = rng.below(3);
        let x = rows(&mut rng, n, input);
        let y = Tensor::from_rows(&(0..n).map(|_| simplex(&mut rng, classes)).collect::<Vec<_>>(), classes).unwrap();
        let xa = rows(&mut rng, na, input);
        let ya = Tensor::from_rows(&(0..na).map(|_| simplex(&mut rng, classes)).collect::<Vec<_>>(), classes).unwrap();
        let cfg = DistillConfig {
            temperature: [1.0, 2.0][rng.below(2)],
            student_old_probs: [StudentOldProbs::Renormalized, StudentOldProbs::FullSoftmaxSlice][rng.below(2)],
        };
        let (_, grads) = taba_total_grad(&model, teacher.as_ref(), (&x, &y), (&xa, &ya), &cfg).unwrap();
        let analytic: Vec<f64> = grads.iter().flat_map(|g| g.data().to_vec()).collect();
        let numeric = finite_diff(
            |p| {
                let mut m = model.clone();
                m.set_flat_parameters(p.data()).unwrap();
                taba_total_loss(&m, teacher.as_ref(), (&x, &y), (&xa, &ya), &cfg).unwrap()
            },
            &Tensor::vector(model.flat_parameters()),
            1e-6,
        )
        .unwrap();
        let diff = norm(analytic.iter().zip(numeric.data()).map(|(a, b)| a - b));
        let scale = norm(analytic.iter().copied()).max(norm(numeric.data().iter().copied())).max(1e-8);
        worst = worst.max(diff / scale);
    }
    let elapsed = start.elapsed();
    line(
        "1",
        "gradient oracle",
        worst <= 1e-5 && elapsed < Duration::from_secs(120),
        format!("100 MLPs, worst relative error {worst:.2e}, {:.1}s", elapsed.as_secs_f64()),
    )
}

// 2

fn linear_model(rng: &mut Rng, d: usize, c: usize) -> (Model, Vec<f64>, Vec<f64>) {
    let w: Vec<f64> = (0..d * c).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
    let b: Vec<f64> = (0..c).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
    let layer = Layer {
        weight: Tensor::new(&[d, c], w.clone()).unwrap(),
        bias: Tensor::vector(b.clone()),
    };
    (Model::from_layers(vec![layer]).unwrap(), w, b)
}

fn linear_probs(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let c = b.len();
    let z: Vec<f64> = (0..c).map(|j| b[j] + x.iter().enumerate().map(|(i, v)| v * w[i * c + j]).sum::<f64>()).collect();
    softmax(&Tensor::vector(z)).unwrap().into_data()
}

fn pgd_suite() -> Outcome {
    let mut rng = Rng::new(2);
    let mut excess: f64 = f64::NEG_INFINITY;
    let mut in_box = true;
    for _ in 0..1000 {
        let (n, d, c) = (1 + rng.below(6), 1 + rng.below(5), 2 + rng.below(4));
        let model = Model::init(&[d, 8, c], &mut rng).unwrap();
        let x = rows(&mut rng, n, d);
        let labels: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
        let y = one_hot_rows(&labels, c).unwrap();
        let eps = rng.uniform_in(0.0, 0.5);
        let cfg = AttackConfig {
            epsilon: eps,
            step_size: rng.uniform_in(1e-3, 0.2),
            steps: rng.below(10),
            random_init: rng.below(2) == 0,
            data_bounds: (0.0, 1.0),
        };
        let adv = pgd_attack(&model, &x, &y, &cfg, &mut rng).unwrap();
        for (a, o) in adv.data().iter().zip(x.data()) {
            excess = excess.max((a - o).abs() - eps);
            in_box &= (0.0..=1.0).contains(a);
        }
    }

    let mut sign_ok = true;
    let mut monotone = true;
    for _ in 0..200 {
        let (d, c) = (1 + rng.below(5), 2 + rng.below(4));
        let (model, w, b) = linear_model(&mut rng, d, c);
        let x = rows(&mut rng, 1, d);
        let label = rng.below(c);
        let y = one_hot_rows(&[label], c).unwrap();
        let eps = rng.uniform_in(0.01, 0.3);
        let one = AttackConfig {
            epsilon: eps,
            step_size: eps,
            steps: 1,
            random_init: false,
            data_bounds: (0.0, 1.0),
        };
        let adv = pgd_attack(&model, &x, &y, &one, &mut rng).unwrap();
        let p = linear_probs(&w, &b, x.row(0));
        for i in 0..d {
            let g: f64 = (0..c).map(|j| w[i * c + j] * (p[j] - f64::from(u8::from(j == label)))).sum();
            let expect = (x.row(0)[i] + eps * g.signum() * f64::from(u8::from(g != 0.0))).clamp(0.0, 1.0);
            sign_ok &= adv.row(0)[i] == expect;
        }
        let loss = |x: &[f64]| -linear_probs(&w, &b, x)[label].max(1e-12).ln();
        let mut last = loss(x.row(0));
        for steps in 1..8 {
            let cfg = AttackConfig {
                step_size: eps / 4.0,
                steps,
                ..one
            };
            let v = loss(pgd_attack(&model, &x, &y, &cfg, &mut rng).unwrap().row(0));
            monotone &= v >= last - 1e-12;
            last = v;
        }
    }
    line(
        "2",
        "PGD constraints",
        excess <= 1e-12 && in_box && sign_ok && monotone,
        format!("1000 attacks, max excess {excess:.1e}, box {in_box}, sign step {sign_ok}, monotone {monotone}"),
    )
}

// 3

fn loss_identities() -> Outcome {
    let cases: [(&[f64], &[f64], f64); 3] = [
        (&[1.0, 0.0], &[1.0, 0.0], 0.0),
        (&[0.5, 0.5], &[1.0, 0.0], std::f64::consts::LN_2),
        (&[1.0 / 3.0; 3], &[0.45, 0.0, 0.55], 3f64.ln()),
    ];
    let examples = cases.iter().all(|(p, y, want)| {
        (soft_cross_entropy(p, &SoftLabel::new(y.to_vec()).unwrap()).unwrap() - want).abs() <= 1e-9
    });
    let mut rng = Rng::new(3);
    let mut gibbs = true;
    for _ in 0..1000 {
        let k = 2 + rng.below(8);
        let (p, q) = (simplex(&mut rng, k), simplex(&mut rng, k));
        let t = TeacherOutput::new(q.clone()).unwrap();
        let h = entropy(&q);
        let cross = distillation_loss(&p, Some(&t)).unwrap();
        gibbs &= cross >= h - 1e-9;
        gibbs &= (distillation_loss(&q, Some(&t)).unwrap() - h).abs() <= 1e-9;
        // strict when p differs from p*
        let gap: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
        if gap > 1e-3 {
            gibbs &= cross > h;
        }
    }
    line(
        "3",
        "loss identities",
        examples && gibbs,
        format!("analytic examples {examples}, Gibbs on 1000 pairs {gibbs}"),
    )
}

// 4

fn brute_force_herding(rows: &[Vec<f64>], quota: usize) -> Vec<usize> {
    let d = rows[0].len();
    let mu: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64).collect();
    let mut picked: Vec<usize> = Vec::new();
    while picked.len() < quota.min(rows.len()) {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..rows.len()).filter(|i| !picked.contains(i)) {
            let mut candidate = picked.clone();
            candidate.push(i);
            let dist: f64 = (0..d)
                .map(|j| {
                    let mean = candidate.iter().map(|&p| rows[p][j]).sum::<f64>() / candidate.len() as f64;
                    (mu[j] - mean).powi(2)
                })
                .sum();
            if best.is_none_or(|(_, b)| dist < b) {
                best = Some((i, dist));
            }
        }
        picked.push(best.unwrap().0);
    }
    picked
}

fn herding_oracle() -> Outcome {
    let mut rng = Rng::new(4);
    let mut mismatches = 0;
    let mut comparisons = 0;
    for _ in 0..500 {
        let (n, d) = (1 + rng.below(8), 1 + rng.below(4));
        let r: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
        let t = Tensor::from_rows(&r, d).unwrap();
        for quota in 0..=n {
            comparisons += 1;
            if herd_select(&t, quota).unwrap() != brute_force_herding(&r, quota) {
                mismatches += 1;
            }
        }
    }
    line(
        "4",
        "herding oracle",
        mismatches == 0,
        format!("500 feature sets, {comparisons} quotas, {mismatches} mismatches"),
    )
}

// 5

fn tiny_config(method: Method, rng: &mut Rng) -> TrainConfig {
    let mut c = TrainConfig::for_method(method);
    c.seed = rng.next_u64();
    c.epochs = 1;
    c.batch_size = 16;
    c.hidden_layers = vec![8];
    c.memory_capacity = 1 + rng.below(40);
    c.stream.per_class = 12;
    c.stream.test_per_class = 3;
    c.stream.setting = 1 + rng.below(2) as u8;
    c.train_attack = AttackConfig::scaled(0.05, true);
    c.eval_attack = AttackConfig::scaled(0.05, false);
    c
}

fn serial() -> Runtime<'static> {
    Runtime {
        evaluator: &taba_core::harness::SerialEvaluator,
        clock: &NoClock,
    }
}

fn memory_invariants() -> Outcome {
    let mut rng = Rng::new(5);
    let mut ok = true;
    let mut runs = 0;
    for i in 0..12 {
        let method = [Method::Icarl, Method::RclTaba, Method::RclBoundaryExemplar][i % 3];
        let c = tiny_config(method, &mut rng);
        let data = build_gauss_streams(&c.stream, c.seed).unwrap();
        let out = run_continual(&data, &c, serial()).unwrap();
        runs += 1;
        let seen = out.metrics.last().unwrap().seen_classes;
        let quota = c.memory_capacity / seen;
        ok &= out.memory.len() <= c.memory_capacity;
        ok &= (0..seen).all(|k| out.memory.class_samples(k).len() == quota.min(c.stream.per_class));

        // replay the memory updates stage by stage with the run's final model
        let mut mem = ExemplarMemory::new(c.memory_capacity, c.stream.dim);
        let mut previous = mem.clone();
        for t in 0..data.train.stages().len() {
            let classes = data.train.stage_classes(t);
            let seen = classes.end;
            update_memory(&mut mem, &out.model, &data.train.stages()[t], classes, seen, method.selection()).unwrap();
            ok &= mem.check_invariants(seen).is_ok();
            ok &= mem.len() <= c.memory_capacity;
            let quota = c.memory_capacity / seen;
            for k in 0..seen {
                let now = mem.class_samples(k);
                ok &= now.len() == quota.min(c.stream.per_class);
                if k < previous.classes().count() {
                    ok &= now == &previous.class_samples(k)[..now.len()];
                }
            }
            previous = mem.clone();
        }
    }
    line("5", "memory invariants", ok, format!("{runs} fuzzed 5-stage runs"))
}

// 6

fn taba_contract() -> Outcome {
    let mut rng = Rng::new(6);
    let mut total = 0;
    let mut ok = true;
    while total < 10_000 {
        let (old, new) = (1 + rng.below(4), 1 + rng.below(4));
        let seen = old + new;
        let make = |rng: &mut Rng, lo: usize, width: usize| -> Vec<Sample> {
            (0..1 + rng.below(8))
                .map(|_| Sample {
                    x: vec![rng.uniform(), rng.uniform()],
                    label: lo + rng.below(width),
                })
                .collect()
        };
        let b_old = make(&mut rng, 0, old);
        let b_new = make(&mut rng, old, new);
        let out = taba_augment(&b_old, &b_new, &AugmentConfig::taba(16), seen, 100, &mut rng).unwrap();
        for s in &out {
            let lambda: f64 = s.y[..old].iter().sum();
            let new_mass: f64 = s.y[old..].iter().sum();
            ok &= (0.45..=0.55).contains(&lambda);
            ok &= s.y.iter().all(|&v| v >= 0.0) && (lambda + new_mass - 1.0).abs() <= 1e-12;
            ok &= s.y[..old].iter().filter(|&&v| v > 0.0).count() == 1;
            ok &= s.y[old..].iter().filter(|&&v| v > 0.0).count() == 1;
        }
        total += out.len();
    }

    // ablation matrix, checked through the training counters
    let mut matrix = true;
    let mut base = TrainConfig::for_method(Method::RclTaba);
    base.epochs = 2;
    base.batch_size = 16;
    base.hidden_layers = vec![8];
    base.memory_capacity = 20;
    base.stream.per_class = 10;
    base.stream.test_per_class = 3;
    base.stream.stages = 2;
    base.stream.num_classes = 4;
    let data = build_gauss_streams(&base.stream, 0).unwrap();
    let rows = [(false, false, false), (true, false, false), (true, true, false), (true, true, true)];
    let mut first: Option<RunOutcome> = None;
    for (b, t, l) in rows {
        let mut c = base.clone();
        c.augment = AugmentConfig::new(b, t, l, 16);
        let out = run_continual(&data, &c, serial()).unwrap();
        let s = out.instrumentation.augment;
        let pools = s.pools_built;
        matrix &= pools > 0 && out.instrumentation.augment_calls == pools;
        matrix &= s.boundary_source == if b { pools } else { 0 };
        matrix &= s.whole_source == if b { 0 } else { pools };
        matrix &= s.task_aware_pools == if t { pools } else { 0 };
        matrix &= s.random_pair_pools == if t { 0 } else { pools };
        if t {
            matrix &= s.cross_partition == s.samples;
        }
        if l {
            matrix &= s.lambda_min.is_none_or(|v| v >= 0.45) && s.lambda_max.is_none_or(|v| v <= 0.55);
        }
        first.get_or_insert(out);
    }
    // all switches off is the Mixup baseline
    let mixup = run_continual(&data, &base.with_method(Method::RclMixup), serial()).unwrap();
    let same_as_mixup = first.is_some_and(|o| o.metrics == mixup.metrics && o.model == mixup.model);
    line(
        "6",
        "boundary augmentation contract",
        ok && total >= 10_000 && matrix && same_as_mixup,
        format!("{total} samples {ok}, toggle matrix {matrix}, off/off/off == mixup {same_as_mixup}"),
    )
}

// 7 and 8

fn desk_config() -> TrainConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/desk_stream.json");
    taba::cli::load_config(&path).unwrap().0
}

#[derive(Default, Clone, Copy)]
struct Means {
    sa: f64,
    ra: f64,
    old_ra: f64,
}

fn desk_reproduction(evaluator: &ThreadedEvaluator) -> Vec<Outcome> {
    let start = Instant::now();
    let base = desk_config();
    let rt = Runtime {
        evaluator,
        clock: &NoClock,
    };
    let seeds = 5;
    let mut means = Vec::new();
    for method in [Method::Icarl, Method::Rcl, Method::RclTaba] {
        let mut m = Means::default();
        for seed in 0..seeds {
            let mut c = base.with_method(method);
            c.seed = seed;
            let data = build_gauss_streams(&c.stream, seed).unwrap();
            let last = run_continual(&data, &c, rt).unwrap().metrics.pop().unwrap();
            m.sa += last.sa / seeds as f64;
            m.ra += last.ra_pgd / seeds as f64;
            m.old_ra += last.old_task_ra.unwrap() / seeds as f64;
        }
        println!(
            "       {:<10} final stage over {seeds} seeds: SA {:.3}  RA(PGD) {:.3}  old-class RA(PGD) {:.3}",
            method.name(),
            m.sa,
            m.ra,
            m.old_ra
        );
        means.push(m);
    }
    let (icarl, rcl, taba) = (means[0], means[1], means[2]);
    let elapsed = start.elapsed();
    vec![
        reported(
            "7a",
            "icarl: high SA, collapsed RA",
            icarl.sa >= 0.8 && icarl.ra <= 0.1,
            format!("SA {:.3} (>= 0.8), RA {:.3} (<= 0.1)", icarl.sa, icarl.ra),
        ),
        reported(
            "7b",
            "rcl RA exceeds icarl RA",
            rcl.ra - icarl.ra >= 0.25,
            format!("gap {:+.3} (>= 0.25)", rcl.ra - icarl.ra),
        ),
        reported(
            "7c",
            "taba old-class RA >= rcl",
            taba.old_ra >= rcl.old_ra,
            format!("{:.3} vs {:.3}", taba.old_ra, rcl.old_ra),
        ),
        line(
            "7",
            "desk run budget",
            elapsed < Duration::from_secs(15 * 60),
            format!("15 runs in {:.1}s (< 900s)", elapsed.as_secs_f64()),
        ),
    ]
}

fn determinism(evaluator: &ThreadedEvaluator) -> Outcome {
    let c = desk_config();
    let rt = Runtime {
        evaluator,
        clock: &NoClock,
    };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut csv = Vec::new();
    for dir in &dirs {
        let data = build_gauss_streams(&c.stream, c.seed).unwrap();
        let out = run_continual(&data, &c, rt).unwrap();
        emit_report(&out.metrics, &c, data.train.global_class_order(), data.train.stage_sizes(), dir.path()).unwrap();
        csv.push(std::fs::read(dir.path().join(METRICS_FILE)).unwrap());
    }
    line(
        "8",
        "byte-identical reports",
        csv[0] == csv[1] && !csv[0].is_empty(),
        format!("{} bytes each", csv[0].len()),
    )
}

// 9

fn setting2_splitter() -> Outcome {
    let mut rng = Rng::new(9);
    let mut bad = 0;
    let (mut lo, mut hi) = (usize::MAX, 0);
    for _ in 0..10_000 {
        let s = setting2_sizes(100, 5, 5, 45, &mut rng).unwrap();
        if s.len() != 5 || s.iter().sum::<usize>() != 100 || !s.iter().all(|p| (5..=45).contains(p)) {
            bad += 1;
        }
        lo = lo.min(*s.iter().min().unwrap());
        hi = hi.max(*s.iter().max().unwrap());
    }
    line(
        "9",
        "unequal stage splitter",
        bad == 0,
        format!("10000 compositions, {bad} violations, observed sizes {lo}..={hi}"),
    )
}

// structural invariants of the training loop

fn run_invariants() -> Outcome {
    let mut c = desk_config();
    c.epochs = 3;
    let data = build_gauss_streams(&c.stream, 0).unwrap();
    let mut ok = true;
    for method in [Method::Icarl, Method::Rcl, Method::RclTaba] {
        let out = run_continual(&data, &c.with_method(method), serial()).unwrap();
        let ins = &out.instrumentation;
        ok &= match method {
            Method::Icarl => ins.train_attacks == 0 && ins.augment_calls == 0,
            Method::Rcl => ins.train_attacks > 0 && ins.augment_calls == 0,
            _ => ins.train_attacks > 0 && ins.augment_calls > 0,
        };
        for t in 1..out.metrics.len() {
            ok &= out.teacher_fingerprints[t] == Some(out.stage_end_fingerprints[t - 1]);
        }
        ok &= out.teacher_fingerprints[0].is_none();
        for record in out.last_batches.iter().flatten() {
            let recomputed = mean_objective(record.model.clone(), record.teacher.as_ref(), &record.x_adv, &record.y, &c.distill)
                + mean_objective(record.model.clone(), record.teacher.as_ref(), &record.aug_x_adv, &record.aug_y, &c.distill);
            ok &= (record.total - recomputed).abs() <= 1e-9;
            ok &= (record.total - (record.rcl + record.taba)).abs() <= 1e-9;
        }
    }
    line("inv", "mode matrix, teachers, decomposition", ok, "icarl/rcl/taba".into())
}

/// Batch mean of cross-entropy plus distillation, row by row through the
/// scalar loss functions.
fn mean_objective(model: Model, teacher: Option<&ModelSnapshot>, x: &Tensor, y: &Tensor, cfg: &DistillConfig) -> f64 {
    if x.rows() == 0 {
        return 0.0;
    }
    let logits = model.logits(x).unwrap();
    let mut total = 0.0;
    for r in 0..x.rows() {
        let p = softmax(&Tensor::vector(logits.row(r).to_vec())).unwrap();
        total += soft_cross_entropy(p.data(), &SoftLabel::new(y.row(r).to_vec()).unwrap()).unwrap();
        if let Some(t) = teacher {
            let old = t.num_classes();
            let tl = t.logits(&x.gather_rows(&[r])).unwrap();
            let target = softmax(&Tensor::vector(tl.data().iter().map(|v| v / cfg.temperature).collect())).unwrap();
            let scaled: Vec<f64> = logits.row(r).iter().map(|v| v / cfg.temperature).collect();
            let q = match cfg.student_old_probs {
                StudentOldProbs::Renormalized => softmax(&Tensor::vector(scaled[..old].to_vec())).unwrap().into_data(),
                StudentOldProbs::FullSoftmaxSlice => softmax(&Tensor::vector(scaled)).unwrap().data()[..old].to_vec(),
            };
            total += distillation_loss(&q, Some(&TeacherOutput::new(target.into_data()).unwrap())).unwrap();
        }
    }
    total / x.rows() as f64
}

fn main() {
    let evaluator = ThreadedEvaluator::default();
    let mut outcomes = vec![
        gradient_oracle(),
        pgd_suite(),
        loss_identities(),
        herding_oracle(),
        memory_invariants(),
        taba_contract(),
    ];
    outcomes.extend(desk_reproduction(&evaluator));
    outcomes.push(determinism(&evaluator));
    outcomes.push(setting2_splitter());
    outcomes.push(run_invariants());

    let failed = outcomes.iter().filter(|o| o.enforced && !o.passed).count();
    let gaps = outcomes.iter().filter(|o| !o.enforced && !o.passed).count();
    println!("acceptance: {failed} enforced failures, {gaps} reported shortfalls");
    if failed > 0 {
        std::process::exit(1);
    }
}
