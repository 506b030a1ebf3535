//! Fast invariant checks behind `taba selftest`.

use taba_core::adversary::{pgd_attack, AttackConfig};
use taba_core::augment::{taba_augment, AugmentConfig};
use taba_core::harness::{build_gauss_streams, run_continual, Method, Runtime, TrainConfig};
use taba_core::harness::{NoClock, SerialEvaluator};
use taba_core::losses::{distillation_loss, entropy, one_hot_rows, taba_total_grad, taba_total_loss, DistillConfig, TeacherOutput};
use taba_core::memory::{herd_select, Sample};
use taba_core::nets::{Model, ModelSnapshot};
use taba_core::taskstream::setting2_sizes;
use taba_core::tensor::finite_diff;
use taba_core::{Rng, Tensor};

use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn random_tensor(shape: &[usize], rng: &mut Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.uniform()).collect()).expect("shape matches")
}

fn gradients(rng: &mut Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let model = Model::init(&[3, 5, 4], rng)?;
        let teacher = ModelSnapshot::of(&Model::init(&[3, 5, 2], rng)?);
        let x = random_tensor(&[4, 3], rng);
        let y = one_hot_rows(&[0, 1, 2, 3], 4)?;
        let xa = random_tensor(&[2, 3], rng);
        let ya = Tensor::new(&[2, 4], vec![0.5, 0.0, 0.5, 0.0, 0.0, 0.3, 0.0, 0.7])?;
        let cfg = DistillConfig::default();
        let (_, grads) = taba_total_grad(&model, Some(&teacher), (&x, &y), (&xa, &ya), &cfg)?;
        let analytic: Vec<f64> = grads.iter().flat_map(|g| g.data().iter().copied()).collect();
        let flat = Tensor::vector(model.flat_parameters());
        let numeric = finite_diff(
            |p| {
                let mut m = model.clone();
                m.set_flat_parameters(p.data()).expect("same length");
                taba_total_loss(&m, Some(&teacher), (&x, &y), (&xa, &ya), &cfg).expect("valid batch")
            },
            &flat,
            1e-6,
        )?;
        let diff: f64 = analytic.iter().zip(numeric.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.data().iter().map(|b| b * b).sum::<f64>().sqrt()).max(1e-12);
        worst = worst.max(diff / scale);
    }
    Ok(check("gradients", worst <= 1e-5, format!("worst relative error {worst:.2e}")))
}

fn pgd_bounds(rng: &mut Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    let mut in_box = true;
    for _ in 0..50 {
        let model = Model::init(&[4, 8, 3], rng)?;
        let x = random_tensor(&[5, 4], rng);
        let labels: Vec<usize> = (0..5).map(|_| rng.below(3)).collect();
        let y = one_hot_rows(&labels, 3)?;
        let cfg = AttackConfig::scaled(rng.uniform_in(0.0, 0.3), true);
        let adv = pgd_attack(&model, &x, &y, &cfg, rng)?;
        for (a, c) in adv.data().iter().zip(x.data()) {
            worst = worst.max((a - c).abs() - cfg.epsilon);
            in_box &= (0.0..=1.0).contains(a);
        }
    }
    Ok(check("pgd constraints", worst <= 1e-12 && in_box, format!("max excess {worst:.1e}")))
}

fn gibbs(rng: &mut Rng) -> Result<Check> {
    let mut ok = true;
    for _ in 0..200 {
        let k = 2 + rng.below(5);
        let simplex = |rng: &mut Rng| {
            let v: Vec<f64> = (0..k).map(|_| rng.uniform() + 1e-3).collect();
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let (p, q) = (simplex(rng), simplex(rng));
        let t = TeacherOutput::new(q.clone())?;
        ok &= distillation_loss(&p, Some(&t))? >= entropy(&q) - 1e-9;
        ok &= (distillation_loss(&q, Some(&t))? - entropy(&q)).abs() <= 1e-9;
    }
    Ok(check("distillation lower bound", ok, "200 random pairs".into()))
}

fn herding(rng: &mut Rng) -> Result<Check> {
    // picks are a permutation prefix, and the full selection is a permutation
    let mut ok = true;
    for _ in 0..50 {
        let n = 1 + rng.below(8);
        let f = random_tensor(&[n, 3], rng);
        let all = herd_select(&f, n)?;
        let mut sorted = all.clone();
        sorted.sort_unstable();
        ok &= sorted == (0..n).collect::<Vec<_>>();
        for q in 0..=n {
            ok &= herd_select(&f, q)? == all[..q];
        }
    }
    Ok(check("herding prefix", ok, "50 random feature sets".into()))
}

fn augmentation(rng: &mut Rng) -> Result<Check> {
    let old: Vec<Sample> = (0..5).map(|i| Sample { x: vec![rng.uniform(); 2], label: i % 2 }).collect();
    let new: Vec<Sample> = (0..5).map(|i| Sample { x: vec![rng.uniform(); 2], label: 2 + i % 2 }).collect();
    let out = taba_augment(&old, &new, &AugmentConfig::taba(1), 4, 1000, rng)?;
    let ok = out.iter().all(|s| {
        let total: f64 = s.y.iter().sum();
        let old_mass: f64 = s.y[..2].iter().sum();
        (total - 1.0).abs() <= 1e-12 && (0.45..=0.55).contains(&old_mass)
    });
    Ok(check("boundary augmentation", ok && out.len() == 1000, "1000 samples".into()))
}

fn setting2(rng: &mut Rng) -> Result<Check> {
    let mut ok = true;
    for _ in 0..1000 {
        let s = setting2_sizes(100, 5, 5, 45, rng)?;
        ok &= s.iter().sum::<usize>() == 100 && s.iter().all(|&p| (5..=45).contains(&p));
    }
    Ok(check("unequal stage sizes", ok, "1000 draws".into()))
}

fn tiny_run() -> Result<Check> {
    let mut c = TrainConfig::for_method(Method::RclTaba);
    c.epochs = 2;
    c.batch_size = 16;
    c.hidden_layers = vec![8];
    c.memory_capacity = 20;
    c.stream.per_class = 10;
    c.stream.test_per_class = 5;
    let data = build_gauss_streams(&c.stream, 0)?;
    let rt = Runtime {
        evaluator: &SerialEvaluator,
        clock: &NoClock,
    };
    let a = run_continual(&data, &c, rt)?;
    let b = run_continual(&data, &c, rt)?;
    let teachers_ok = (1..a.metrics.len()).all(|t| a.teacher_fingerprints[t] == Some(a.stage_end_fingerprints[t - 1]));
    let ok = a.metrics == b.metrics && a.memory.check_invariants(10).is_ok() && teachers_ok;
    Ok(check("continual run", ok, format!("{} stages, deterministic", a.metrics.len())))
}

/// Runs every check with a fixed seed.
pub fn run_selftest() -> Result<Vec<Check>> {
    let mut rng = Rng::new(20240601);
    Ok(vec![
        gradients(&mut rng)?,
        pgd_bounds(&mut rng)?,
        gibbs(&mut rng)?,
        herding(&mut rng)?,
        augmentation(&mut rng)?,
        setting2(&mut rng)?,
        tiny_run()?,
    ])
}
