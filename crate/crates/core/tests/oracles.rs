use ctrlab_core::harness::detect_convergence;
use ctrlab_core::model::{logloss, ranking_loss};
use ctrlab_core::oracle::{expected_reweighted_sum, gradient_check, ranking_loss_brute};
use ctrlab_core::sampling::{apply, keep_probability};
use ctrlab_core::*;

fn example(rng: &Rng, t: u64, fields: u32, dim: u32, label: bool) -> Example {
    let features = (0..fields)
        .map(|f| Feature {
            field: f,
            index: (rng.bits(&[t, u64::from(f)]) % u64::from(dim)) as u32,
        })
        .collect();
    Example::new(t, features, label)
}

fn models() -> Vec<CtrModel> {
    let opt = OptimizerConfig {
        init_scale: 0.3,
        init_bias: -0.4,
        ..OptimizerConfig::default()
    };
    vec![
        CtrModel::new(Arch::Linear, HashConfig::new(32, 0).unwrap(), opt, 1).unwrap(),
        CtrModel::new(Arch::Mlp { hidden: 5 }, HashConfig::new(16, 0).unwrap(), opt, 2).unwrap(),
    ]
}

#[test]
fn gradients_match_finite_differences() {
    let rng = Rng::new(7, "grad");
    for mut model in models() {
        let dim = model.hash().dim;
        // give the linear weights some spread before probing
        for (i, p) in model.params_mut().iter_mut().enumerate() {
            *p += 0.2 * rng.normal(&[i as u64, 99]);
        }
        for t in 0..40 {
            let mut x = example(&rng, t, 6, dim, t % 3 == 0);
            let target = match t % 4 {
                0 => x.y(),
                1 => {
                    x.weight = 1.0 + 20.0 * rng.uniform01(&[t, 1]);
                    x.y()
                }
                2 => 0.5 * x.y() + 0.5 * rng.uniform01(&[t, 2]),
                _ => {
                    x.weight = 10.0;
                    0.3 * x.y() + 0.7 * rng.uniform01(&[t, 3])
                }
            };
            let err = gradient_check(&mut model, &x, target, 1e-5, 1e-6);
            assert!(err < 1e-4, "{:?} t={t}: {err}", model.arch());
        }
    }
}

#[test]
fn duplicate_hash_indices_are_differentiated_correctly() {
    for mut model in models() {
        let x = Example::new(
            0,
            vec![
                Feature { field: 0, index: 3 },
                Feature { field: 1, index: 3 },
                Feature { field: 2, index: 5 },
            ],
            true,
        );
        assert!(gradient_check(&mut model, &x, 1.0, 1e-5, 1e-6) < 1e-4);
    }
}

#[test]
fn importance_weighted_first_step_is_unbiased() {
    let rng = Rng::new(3, "iw");
    let mut model = models().remove(0);
    let n = model.params().len();
    let xs: Vec<Example> = (0..10).map(|t| example(&rng, t, 4, 32, t % 4 == 0)).collect();
    let qs: Vec<f64> = xs
        .iter()
        .enumerate()
        .map(|(i, x)| if x.label { 1.0 } else { 0.1 + 0.08 * i as f64 })
        .collect();
    let grads: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| model.gradient(x, x.y()).to_dense(n))
        .collect();
    let expected = expected_reweighted_sum(&grads, &qs);
    for i in 0..n {
        let full: f64 = grads.iter().map(|g| g[i]).sum();
        assert!((expected[i] - full).abs() < 1e-12, "param {i}");
    }
}

#[test]
fn sampler_enumeration_is_unbiased() {
    let rng = Rng::new(5, "enum");
    let model = models().remove(1);
    let policies = [
        SamplerPolicy::uniform(0.1, Schedule::Continuous),
        SamplerPolicy {
            signal: Signal::CountUncertainty {
                rate: 0.2,
                count_scale: 2.0,
            },
            ..SamplerPolicy::off()
        },
        SamplerPolicy {
            signal: Signal::LowLoss {
                rate: 0.3,
                loss_threshold: 0.7,
            },
            ..SamplerPolicy::off()
        },
    ];
    for policy in policies {
        let mut state = SamplerState::for_policy(&policy, 16);
        let keep_rng = Rng::new(1, "keep");
        let (mut losses, mut qs) = (Vec::new(), Vec::new());
        for t in 0..10 {
            let x = example(&rng, t, 4, 16, t == 2 || t == 7);
            let p = model.predict(&x);
            let q = keep_probability(&policy, &state, &x, p, t);
            let decision = apply(&policy, &mut state, &x, p, t, &keep_rng);
            assert_eq!(decision.keep_prob, q);
            if let Some(k) = decision.kept {
                assert!((k.weight - 1.0 / q).abs() < 1e-15);
            }
            losses.push(vec![logloss(p, x.y(), 1.0)]);
            qs.push(q);
        }
        let full: f64 = losses.iter().map(|l| l[0]).sum();
        let expected = expected_reweighted_sum(&losses, &qs)[0];
        assert!((expected - full).abs() < 1e-12, "{policy:?}: {expected} vs {full}");
    }
}

#[test]
fn keep_rate_within_three_sigma() {
    let rate = 0.1;
    let policy = SamplerPolicy::uniform(rate, Schedule::Continuous);
    let mut state = SamplerState::for_policy(&policy, 64);
    let keep_rng = Rng::new(11, "keep");
    let rng = Rng::new(2, "labels");
    let (mut neg, mut neg_kept, mut pos, mut pos_kept) = (0u64, 0u64, 0u64, 0u64);
    for t in 0..100_000u64 {
        let x = example(&rng, t, 3, 64, rng.uniform01(&[t, 7]) < 0.05);
        let d = apply(&policy, &mut state, &x, 0.05, t, &keep_rng);
        match (x.label, d.kept.is_some()) {
            (true, k) => {
                pos += 1;
                pos_kept += u64::from(k);
                assert_eq!(d.keep_prob, 1.0);
            }
            (false, k) => {
                neg += 1;
                neg_kept += u64::from(k);
            }
        }
    }
    assert_eq!(pos, pos_kept);
    let sigma = (neg as f64 * rate * (1.0 - rate)).sqrt();
    assert!((neg_kept as f64 - rate * neg as f64).abs() <= 3.0 * sigma);
}

#[test]
fn ranking_loss_matches_brute_force_with_ties() {
    let rng = Rng::new(13, "rl");
    let mut checked = 0;
    for w in 0..1000u64 {
        let n = 2 + (rng.bits(&[w]) % 199) as usize;
        let levels = 1 + rng.bits(&[w, 1]) % 12;
        let window: Vec<(f64, bool)> = (0..n as u64)
            .map(|i| {
                let score = (rng.bits(&[w, i, 2]) % levels) as f64 / levels as f64;
                (score, rng.uniform01(&[w, i, 3]) < 0.3)
            })
            .collect();
        match (ranking_loss(&window), ranking_loss_brute(&window)) {
            (Ok(a), Ok(b)) => {
                assert_eq!(a, b, "window {w}");
                checked += 1;
            }
            (Err(_), Err(_)) => {}
            (a, b) => panic!("window {w}: {a:?} vs {b:?}"),
        }
    }
    assert!(checked > 950);
}

#[test]
fn detector_finds_constructed_plateaus() {
    let rng = Rng::new(17, "plateau");
    let eps = 0.002;
    for c in 0..100u64 {
        let plateau = 10 + (rng.bits(&[c, 0]) % 70) as usize;
        let patience = 3 + (rng.bits(&[c, 1]) % 6) as usize;
        let slope = eps * (2.0 + 8.0 * rng.uniform01(&[c, 2]));
        // peak-to-peak noise strictly below eps
        let amplitude = 0.95 * eps * rng.uniform01(&[c, 3]);
        let level = 0.01 + slope * plateau as f64;
        let len = plateau + patience + 20;
        let series: Vec<f64> = (0..len)
            .map(|w| {
                if w < plateau {
                    level + slope * (plateau - w) as f64
                } else {
                    level + amplitude * (rng.uniform01(&[c, 4, w as u64]) - 0.5)
                }
            })
            .collect();
        let found = detect_convergence(&series, eps, patience).expect("plateau detected");
        assert!(
            (plateau..=plateau + patience).contains(&found),
            "construction {c}: {found} not in [{plateau}, {}]",
            plateau + patience
        );
    }
}

#[test]
fn detector_trivial_series() {
    assert_eq!(detect_convergence(&[0.02; 12], 0.002, 5), Some(0));
    let improving: Vec<f64> = (0..30).map(|w| 0.5 - 0.01 * w as f64).collect();
    assert_eq!(detect_convergence(&improving, 0.001, 5), None);
}
