use std::sync::Arc;

use ctrlab_core::datagen::Stream;
use ctrlab_core::distill::train_teacher;
use ctrlab_core::harness::{baseline_config, run_trial, run_trial_with};
use ctrlab_core::model::{checkpoint, MetricWindow};
use ctrlab_core::sweep::{count_positives, plan_iso, run_parallel, run_sweep, ModelSize};
use ctrlab_core::*;

fn config() -> TrialConfig {
    TrialConfig {
        stream: StreamSpec {
            n_fields: 6,
            vocab_per_field: 60,
            base_ctr: 0.05,
            seed: 4,
            ..StreamSpec::default()
        },
        hash: HashConfig::new(512, 1).unwrap(),
        arch: Arch::Linear,
        optimizer: OptimizerConfig::default(),
        hist_start: 0,
        hist_end: 40_000,
        online_end: 50_000,
        sampler: SamplerPolicy::off(),
        distill: DistillPolicy::default(),
        window: 5_000,
        eps_conv: 0.002,
        patience: 5,
        cost: CostModel::default(),
        seed: 9,
        eval_from: None,
        trace_decisions: false,
    }
}

fn teacher_spec() -> TeacherSpec {
    TeacherSpec {
        arch: Arch::Mlp { hidden: 4 },
        hash_dim: 1024,
        optimizer: OptimizerConfig::default(),
        start: 0,
        seed: 2,
    }
}

fn bytes(r: &RunRecord) -> (Vec<u8>, String) {
    (r.metrics_csv().unwrap(), r.summary_json().to_string())
}

#[test]
fn same_config_same_bytes() {
    let mut cfg = config();
    cfg.sampler = SamplerPolicy::uniform(0.3, Schedule::Continuous);
    assert_eq!(bytes(&run_trial(&cfg, None).unwrap()), bytes(&run_trial(&cfg, None).unwrap()));
}

#[test]
fn empty_online_range_has_only_history() {
    let mut cfg = config();
    cfg.online_end = cfg.hist_end;
    let r = run_trial(&cfg, None).unwrap();
    assert_eq!(r.rows.len(), 8);
    assert!(r.rows.iter().all(|row| row.t_end <= cfg.hist_end));
    assert_eq!(r.summary.examples_seen, cfg.hist_end);
}

#[test]
fn windows_and_costs_are_consistent() {
    let mut cfg = config();
    cfg.hist_start = 2_500;
    cfg.sampler = SamplerPolicy::uniform(0.5, Schedule::Continuous);
    let r = run_trial(&cfg, None).unwrap();
    // first window is partial and aligned to a multiple of the window length
    assert_eq!(r.rows[0].window, 0);
    assert_eq!(r.rows[0].count, 2_500);
    assert_eq!(r.rows.iter().map(|w| w.count).sum::<u64>(), 47_500);
    for w in &r.rows {
        assert_eq!(w.cum_cost, cfg.cost.accumulate_cost(cfg.param_count(), w.examples_kept));
    }
    assert_eq!(r.summary.total_cost, 513.0 * r.summary.examples_kept as f64);
}

#[test]
fn zero_alpha_distillation_matches_plain_training() {
    let cfg = config();
    let truth = Arc::new(GroundTruth::new(&cfg.stream).unwrap());
    let teacher = train_teacher(&teacher_spec(), &truth, 1, cfg.hist_end, cfg.online_end, cfg.window).unwrap();
    let plain = run_trial_with(&cfg, &truth, None).unwrap();
    let mut distilled = cfg.clone();
    distilled.distill = DistillPolicy {
        alpha: 0.0,
        schedule: DistillSchedule::Continuous,
    };
    let r = run_trial_with(&distilled, &truth, Some(&teacher)).unwrap();
    assert_eq!(r.metrics_csv().unwrap(), plain.metrics_csv().unwrap());
    assert_eq!(r.summary.final_metrics, plain.summary.final_metrics);
    assert_eq!(r.summary.distilled_examples, 50_000);
}

#[test]
fn teacher_is_unaffected_by_students() {
    let cfg = config();
    let truth = Arc::new(GroundTruth::new(&cfg.stream).unwrap());
    let train = || train_teacher(&teacher_spec(), &truth, 1, cfg.hist_end, cfg.online_end, cfg.window).unwrap();
    let teacher = train();
    let before = checkpoint::encode(&teacher.final_checkpoint);
    let mut student = cfg.clone();
    student.distill = DistillPolicy {
        alpha: 0.7,
        schedule: DistillSchedule::Continuous,
    };
    run_trial_with(&student, &truth, Some(&teacher)).unwrap();
    assert_eq!(checkpoint::encode(&teacher.final_checkpoint), before);
    assert_eq!(checkpoint::encode(&train().final_checkpoint), before);
    let reloaded = checkpoint::decode(&before).unwrap();
    assert_eq!(reloaded, teacher.final_checkpoint);
}

#[test]
fn teacher_beats_student_online() {
    let cfg = config();
    let truth = Arc::new(GroundTruth::new(&cfg.stream).unwrap());
    let teacher = train_teacher(&teacher_spec(), &truth, 1, cfg.hist_end, cfg.online_end, cfg.window).unwrap();
    let student = run_trial_with(&cfg, &truth, None).unwrap();
    let mut pooled = MetricWindow::new(10_000);
    let stream = Stream::new(Arc::clone(&truth), cfg.hash).unwrap();
    for (x, _) in stream.iter(cfg.hist_end, cfg.online_end) {
        pooled.push(teacher.prediction(x.t), x.label, 1.0);
    }
    assert!(pooled.metrics().logloss <= student.summary.final_metrics.logloss);
}

#[test]
fn teacher_coverage_is_checked() {
    let mut cfg = config();
    let truth = Arc::new(GroundTruth::new(&cfg.stream).unwrap());
    let mut spec = teacher_spec();
    spec.start = 10_000;
    let teacher = train_teacher(&spec, &truth, 1, cfg.hist_end, cfg.online_end, cfg.window).unwrap();
    cfg.distill.schedule = DistillSchedule::Continuous;
    assert!(matches!(
        run_trial_with(&cfg, &truth, Some(&teacher)),
        Err(Error::TeacherCoverage { .. })
    ));
    assert!(matches!(run_trial_with(&cfg, &truth, None), Err(Error::TeacherMissing)));
}

#[test]
fn prune_drops_exactly_the_skipped_prefix() {
    let cfg = config();
    assert_eq!(cfg.prune_start_date(0).unwrap(), cfg);
    let full = run_trial(&cfg, None).unwrap();
    let pruned_cfg = cfg.prune_start_date(7_000).unwrap();
    let pruned = run_trial(&pruned_cfg, None).unwrap();
    assert_eq!(full.summary.examples_seen - pruned.summary.examples_seen, 7_000);
    assert!(matches!(cfg.prune_start_date(40_000), Err(Error::PrunePastEnd { .. })));
}

#[test]
fn pruned_run_still_converges() {
    let mut cfg = config();
    cfg.hist_end = 120_000;
    cfg.online_end = 150_000;
    cfg.hist_start = 30_000;
    cfg.eps_conv = 0.01;
    let truth = Arc::new(GroundTruth::new(&cfg.stream).unwrap());
    let reference = run_trial_with(&baseline_config(&cfg, 0), &truth, None).unwrap();
    let mut run = run_trial_with(&cfg, &truth, None).unwrap();
    run.attach_baseline(&reference).unwrap();
    let conv = run.convergence.clone().expect("converges");
    assert!(conv.examples_seen < cfg.hist_end - cfg.hist_start);

    // advance the start but leave a margin over the data needed to converge
    let days = (cfg.hist_end - cfg.hist_start) - 2 * conv.examples_seen;
    let pruned_cfg = cfg.prune_start_date(days).unwrap();
    let mut pruned = run_trial_with(&pruned_cfg, &truth, None).unwrap();
    pruned.attach_baseline(&reference).unwrap();
    let c = pruned.convergence.expect("pruned run converges");
    assert!(c.examples_seen <= pruned_cfg.hist_end - pruned_cfg.hist_start);
}

#[test]
fn baseline_relative_loss_shrinks_with_data() {
    let mut cfg = config();
    cfg.hist_start = 20_000;
    cfg.hist_end = 100_000;
    cfg.online_end = 100_000;
    let truth = Arc::new(GroundTruth::new(&cfg.stream).unwrap());
    let reference = run_trial_with(&baseline_config(&cfg, 0), &truth, None).unwrap();
    let mut run = run_trial_with(&cfg, &truth, None).unwrap();
    run.attach_baseline(&reference).unwrap();
    let rel: Vec<f64> = run.relative_series().into_iter().map(Option::unwrap).collect();
    let k = rel.len().div_ceil(10);
    let head = rel[..k].iter().sum::<f64>() / k as f64;
    let tail = rel[rel.len() - k..].iter().sum::<f64>() / k as f64;
    assert!(tail <= head, "{head} -> {tail}");
}

#[test]
fn mismatched_baseline_is_rejected() {
    let cfg = config();
    let mut run = run_trial(&cfg, None).unwrap();
    let mut short = cfg.clone();
    short.online_end = 45_000;
    let base = run_trial(&short, None).unwrap();
    assert!(matches!(run.attach_baseline(&base), Err(Error::SeriesMismatch { .. })));
}

#[test]
fn cutoff_stops_sampling_and_continuous_does_not() {
    let mut cfg = config();
    cfg.trace_decisions = true;
    let t_cut = 20_000;
    cfg.sampler = SamplerPolicy::uniform(0.2, Schedule::Cutoff { t_cut });
    let cut = run_trial(&cfg, None).unwrap();
    cfg.sampler = SamplerPolicy::uniform(0.2, Schedule::Continuous);
    let cont = run_trial(&cfg, None).unwrap();

    for d in cut.trace.iter().filter(|d| d.t >= t_cut) {
        assert!(d.kept && d.keep_prob == 1.0);
    }
    let kept_after: u64 = cut.trace.iter().filter(|d| d.t >= t_cut && d.kept).count() as u64;
    assert_eq!(kept_after, cfg.online_end - t_cut);
    assert_eq!(cut.summary.sampler_signal_decisions_online, 0);
    assert!(cut.summary.sampler_signal_decisions_hist > 0);
    assert!(cont.summary.sampler_signal_decisions_online > 0);
    assert!(cont.summary.examples_kept < cut.summary.examples_kept);

    // post-cutoff keeps are exactly the raw stream
    let stream = Stream::new(Arc::new(GroundTruth::new(&cfg.stream).unwrap()), cfg.hash).unwrap();
    let raw: Vec<(u64, bool)> = stream.iter(t_cut, cfg.online_end).map(|(x, _)| (x.t, x.label)).collect();
    let kept: Vec<(u64, bool)> = cut.trace.iter().filter(|d| d.t >= t_cut).map(|d| (d.t, d.label)).collect();
    assert_eq!(raw, kept);
}

#[test]
fn horvitz_thompson_recovers_negative_count() {
    let mut cfg = config();
    cfg.trace_decisions = true;
    let rate = 0.25;
    cfg.sampler = SamplerPolicy::uniform(rate, Schedule::Continuous);
    let r = run_trial(&cfg, None).unwrap();
    let negatives = r.trace.iter().filter(|d| !d.label).count() as f64;
    let estimate: f64 = r
        .trace
        .iter()
        .filter(|d| !d.label && d.kept)
        .map(|d| 1.0 / d.keep_prob)
        .sum();
    let sigma = (negatives * (1.0 - rate) / rate).sqrt();
    assert!((estimate - negatives).abs() <= 3.0 * sigma, "{estimate} vs {negatives}");
}

#[test]
fn end_to_end_calibration() {
    let mut cfg = config();
    cfg.stream.n_fields = 8;
    cfg.stream.vocab_per_field = 200;
    cfg.stream.base_ctr = 0.02;
    cfg.hash = HashConfig::new(4096, 1).unwrap();
    cfg.hist_end = 400_000;
    cfg.online_end = 600_000;
    cfg.window = 50_000;
    let truth = Arc::new(GroundTruth::new(&cfg.stream).unwrap());
    let full = run_trial_with(&cfg, &truth, None).unwrap();
    let bias = full.summary.final_metrics.bias.unwrap();
    assert!((0.95..=1.05).contains(&bias), "unsampled bias {bias}");
    cfg.sampler = SamplerPolicy::uniform(0.1, Schedule::Continuous);
    let sampled = run_trial_with(&cfg, &truth, None).unwrap();
    let bias = sampled.summary.final_metrics.bias.unwrap();
    assert!((0.93..=1.07).contains(&bias), "sampled bias {bias}");
}

#[test]
fn frozen_model_goes_stale_under_drift() {
    let spec = StreamSpec {
        n_fields: 6,
        vocab_per_field: 60,
        base_ctr: 0.05,
        drift_period: 50_000,
        drift_magnitude: 1.0,
        seed: 8,
        ..StreamSpec::default()
    };
    let hash = HashConfig::new(512, 1).unwrap();
    let stream = Stream::new(Arc::new(GroundTruth::new(&spec).unwrap()), hash).unwrap();
    let mut model = CtrModel::new(Arch::Linear, hash, OptimizerConfig::default(), 0).unwrap();
    for (x, _) in stream.iter(0, 50_000) {
        model.step(&x, x.y());
    }
    let frozen = model.clone();
    let (mut fresh_w, mut frozen_w) = (MetricWindow::new(50_000), MetricWindow::new(50_000));
    for (x, _) in stream.iter(50_000, 100_000) {
        fresh_w.push(model.predict(&x), x.label, 1.0);
        frozen_w.push(frozen.predict(&x), x.label, 1.0);
        model.step(&x, x.y());
    }
    assert!(fresh_w.metrics().logloss < frozen_w.metrics().logloss);
}

#[test]
fn stream_positive_rate_within_three_sigma() {
    let spec = StreamSpec::default();
    let stream = Stream::new(Arc::new(GroundTruth::new(&spec).unwrap()), HashConfig::new(1024, 0).unwrap()).unwrap();
    let n = 1_000_000u64;
    let positives = stream.iter(0, n).filter(|(x, _)| x.label).count() as f64;
    let p = spec.base_ctr;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    assert!((positives - n as f64 * p).abs() <= 3.0 * sigma, "{positives}");
}

#[test]
fn sweep_is_independent_of_parallelism() {
    let mut cfg = config();
    cfg.hist_end = 30_000;
    cfg.online_end = 30_000;
    let truth = Arc::new(GroundTruth::new(&cfg.stream).unwrap());
    let spec = IsoComputeSpec {
        budget: 1.9e6,
        sizes: [64, 128, 256]
            .iter()
            .map(|&d| ModelSize {
                arch: Arch::Linear,
                hash_dim: d,
            })
            .collect(),
        min_examples: 1_000,
    };
    let planned = plan_iso(&spec, &cfg, count_positives(&truth, 0, 30_000)).unwrap();
    for p in &planned {
        assert!((p.planned_cost - spec.budget).abs() <= 0.01 * spec.budget);
    }
    let (serial, serial_runs) = run_sweep(&planned, &truth, 1).unwrap();
    let (parallel, parallel_runs) = run_sweep(&planned, &truth, 3).unwrap();
    assert_eq!(serial, parallel);
    for (a, b) in serial_runs.iter().zip(&parallel_runs) {
        assert_eq!(bytes(a), bytes(b));
    }
    let squares = run_parallel(&[3u64, 1, 2], 2, |&v| Ok(v * v)).unwrap();
    assert_eq!(squares, vec![9, 1, 4]);
}
