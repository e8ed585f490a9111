//! Acceptance suite. Each test prints one PASS/FAIL line for its
//! criterion; the CLI-level criteria (protocol shapes, byte determinism)
//! live in the CLI crate's acceptance suite.

use std::time::Instant;

use pedk::data::subsample_training;
use pedk::data::synth::render_part_patch;
use pedk::ensemble::{aggregate, thresholds_from_statistics, StatisticMode, VoteRule};
use pedk::experiment::{build_bundle, evaluate, train_with_early_stopping, Target};
use pedk::model::{build_network, ArchSpec, BuildPlan, PartKind, Role};
use pedk::nn::gradcheck::{gradient_check, randomize_params};
use pedk::patch::{patch_grid, WindowSpec};
use pedk::profile::{Profile, TrainConfig};
use pedk::rng;
use pedk::tensor::Tensor;

mod support;
use support::monotonicity_violations;

const EPSILON: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;

fn random_image(channels: usize, side: usize, seed: u64) -> Tensor {
    use rand::Rng;
    let mut r = rng::stream(seed, &[909]);
    let data = (0..channels * side * side)
        .map(|_| r.gen_range(0.0..1.0))
        .collect();
    Tensor::from_vec(&[channels, side, side], data).unwrap()
}

/// Criterion 1: analytic gradients match central finite differences for
/// every layer kind and for a full (3,3) network on 16x16 inputs, within
/// relative error 1e-4 at epsilon 1e-5, in under a minute.
#[test]
fn criterion_1_gradient_correctness() {
    let t0 = Instant::now();
    let plan = |side: usize, channels: usize| BuildPlan {
        input_side: side,
        input_channels: channels,
        early_filters: 2,
        late_filters: 3,
        dense_width: 5,
        dropout_p: 0.5,
        kernel: 3,
    };

    // per-layer-kind micro networks: conv (+relu, pool, dense, softmax),
    // a two-block stack, and a dropout-bearing dense stack
    let cases: [(&str, ArchSpec, BuildPlan, u64); 3] = [
        ("conv+pool+dense", ArchSpec::new(1, 1, Role::Component), plan(8, 1), 11),
        ("two conv blocks", ArchSpec::new(2, 2, Role::Component), plan(10, 1), 13),
        ("deep dense with dropout", ArchSpec::new(1, 3, Role::Component), plan(8, 1), 17),
    ];
    let mut worst: f64 = 0.0;
    for (name, arch, plan, seed) in cases {
        let mut net = build_network(arch, &plan, seed).unwrap();
        randomize_params(&mut net, 0.6, &mut rng::stream(seed, &[1]));
        let x = random_image(plan.input_channels, plan.input_side, seed);
        for label in [0usize, 1] {
            let report = gradient_check(&mut net, &x, label, EPSILON, TOLERANCE).unwrap();
            assert!(
                report.pass,
                "criterion 1 FAIL: {name} label {label} rel err {}",
                report.max_rel_err
            );
            worst = worst.max(report.max_rel_err);
        }
    }

    // the full (M=3, N=3) network on 16x16 inputs
    let full_plan = BuildPlan {
        input_side: 16,
        input_channels: 3,
        ..BuildPlan::desk()
    };
    let mut net = build_network(ArchSpec::new(3, 3, Role::Component), &full_plan, 23).unwrap();
    randomize_params(&mut net, 0.4, &mut rng::stream(23, &[1]));
    let x = random_image(3, 16, 29);
    let report = gradient_check(&mut net, &x, 1, EPSILON, TOLERANCE).unwrap();
    assert!(
        report.pass,
        "criterion 1 FAIL: full 3x3 rel err {}",
        report.max_rel_err
    );
    worst = worst.max(report.max_rel_err);

    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "criterion 1 FAIL: took {elapsed:?}, budget is one minute"
    );
    println!(
        "criterion 1 PASS: gradients within {TOLERANCE:.0e} (worst {:.2e}, {} params on the full net, {:.1}s)",
        worst,
        report.params_checked,
        elapsed.as_secs_f64()
    );
}

/// Criterion 2: theta_i is the midpoint of theta_p and theta_n on
/// balanced sets, and the published threshold table satisfies the same
/// identity within rounding.
#[test]
fn criterion_2_threshold_identities() {
    use rand::Rng;
    // random balanced sets: identity within 1e-9
    let mut r = rng::stream(7, &[2]);
    for _ in 0..200 {
        let n = r.gen_range(1..64);
        let pos: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..50.0)).collect();
        let neg: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..50.0)).collect();
        let t = thresholds_from_statistics(&pos, &neg, StatisticMode::Max).unwrap();
        assert!(
            (t.theta_i - (t.theta_p + t.theta_n) / 2.0).abs() < 1e-9,
            "criterion 2 FAIL: midpoint identity violated"
        );
    }

    // published values: (theta_p, theta_n, theta_i) per component network
    let published: [(&str, f64, f64, f64); 4] = [
        ("barrels", 32.385, 10.407, 21.396),
        ("magazines", 4.345, 3.462, 3.903),
        ("receivers", 24.822, 3.915, 14.368),
        ("stocks", 45.437, 6.397, 25.917),
    ];
    for (name, p, n, i) in published {
        let midpoint = (p + n) / 2.0;
        assert!(
            (midpoint - i).abs() <= 5.0e-4 + 1e-12,
            "criterion 2 FAIL: {name} midpoint {midpoint} vs published {i}"
        );
        assert!(n <= i && i <= p, "criterion 2 FAIL: {name} ordering");
    }
    println!("criterion 2 PASS: midpoint identity on 200 random balanced sets and all 4 published rows");
}

/// Criterion 3: TP non-increasing / TN non-decreasing in both the vote
/// threshold and the rule strictness, over at least 10,000 random
/// decision matrices. Zero violations allowed.
#[test]
fn criterion_3_vote_threshold_monotonicity() {
    let violations = monotonicity_violations(10_000, 4242);
    assert_eq!(
        violations, 0,
        "criterion 3 FAIL: {violations} monotonicity violations"
    );
    println!("criterion 3 PASS: 0 violations over 10000 random matrices");
}

/// Criterion 4: uniform weights with threshold k/4 - 1e-9 reproduce
/// k-of-4 on all 16 decision vectors, exhaustively.
#[test]
fn criterion_4_uniform_weight_equivalence() {
    for k in 1..=4usize {
        let weighted = VoteRule::weighted([0.25; 4], k as f64 / 4.0 - 1e-9).unwrap();
        let k_rule = VoteRule::k_of_four(k).unwrap();
        for bits in 0..16u32 {
            let decisions: [bool; 4] = std::array::from_fn(|i| bits & (1 << i) != 0);
            assert_eq!(
                aggregate(decisions, &weighted),
                aggregate(decisions, &k_rule),
                "criterion 4 FAIL: k={k} bits={bits:04b}"
            );
        }
    }
    println!("criterion 4 PASS: weighted(0.25, k/4 - 1e-9) == k_of_4 on all 16 vectors, k=1..4");
}

/// Criterion 5: patch-grid counts equal brute-force enumeration on 1,000
/// random cases, and the worked 400x400 example yields 9 patches.
#[test]
fn criterion_5_patch_grid_oracle() {
    use rand::Rng;
    let brute = |dim: usize, side: usize, stride: usize| -> usize {
        if side >= dim {
            return 1;
        }
        let last = dim - side;
        let mut positions: Vec<usize> = (0..=last).filter(|p| p % stride == 0).collect();
        if !positions.contains(&last) {
            positions.push(last);
        }
        positions.len()
    };

    let mut r = rng::stream(55, &[5]);
    let mut checked = 0;
    while checked < 1000 {
        let width = r.gen_range(16..500);
        let height = r.gen_range(16..500);
        let spec = WindowSpec::new(r.gen_range(0.05..=1.0), r.gen_range(0.01..=1.0)).unwrap();
        if spec.window_ratio * (width.min(height) as f64) < 8.0 {
            continue;
        }
        let grid = patch_grid(width, height, &spec).unwrap();
        let expected =
            brute(width, grid.side, grid.stride) * brute(height, grid.side, grid.stride);
        assert_eq!(
            grid.rects.len(),
            expected,
            "criterion 5 FAIL: {width}x{height} spec {spec:?}"
        );
        checked += 1;
    }

    let spec = WindowSpec::new(0.5, 0.5).unwrap();
    let grid = patch_grid(400, 400, &spec).unwrap();
    assert_eq!(grid.rects.len(), 9, "criterion 5 FAIL: worked example");
    println!("criterion 5 PASS: 1000 random grids match brute force; 400x400/0.5/0.5 gives 9 patches");
}

/// Profile for the low-data comparison: desk geometry with larger test
/// splits so accuracy drops resolve below one point.
fn lowdata_profile() -> Profile {
    let mut p = Profile::desk();
    p.synth.part_positives = 400;
    p.synth.part_negatives = 400;
    p.synth.whole_positives = 400;
    p.synth.whole_negatives = 800;
    p.part_ratios = (0.50, 0.125, 0.375); // 200 / 50 / 150 per label
    p.single_pos_ratios = (0.50, 0.125, 0.375);
    p.single_neg_ratios = (0.75, 0.0625, 0.1875); // 600 / 50 / 150
    p.train_target_per_label = 600;
    p.train = TrainConfig {
        epochs: 10,
        batch_size: 32,
        learning_rate: 0.01,
        momentum: 0.9,
    };
    p
}

/// Criterion 7: across 3 seeds, the single model's accuracy drop from
/// 100% to 25% training data exceeds the mean drop of the four component
/// networks in at least 2 seeds (direction, not magnitude).
#[test]
fn criterion_7_low_data_gap() {
    let profile = lowdata_profile();
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    // the published best architecture per network
    let archs = [
        (Target::Part(PartKind::Barrel), ArchSpec::new(4, 4, Role::Component)),
        (Target::Part(PartKind::Magazine), ArchSpec::new(4, 3, Role::Component)),
        (Target::Part(PartKind::Receiver), ArchSpec::new(5, 5, Role::Component)),
        (Target::Part(PartKind::Stock), ArchSpec::new(5, 5, Role::Component)),
        (Target::Whole, ArchSpec::new(4, 4, Role::Single)),
    ];

    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in [11u64, 22, 33] {
        let bundle = build_bundle(&profile, seed).unwrap();
        let jobs: Vec<(Target, ArchSpec, f64)> = archs
            .iter()
            .flat_map(|&(t, a)| [(t, a, 1.0f64), (t, a, 0.25)])
            .collect();
        let results = pedk::experiment::sims::run_jobs(jobs.len(), workers, |i| {
            let (target, arch, fraction) = jobs[i];
            let job_seed = rng::derive_seed(seed, &[700, target.index() as u64, (fraction * 100.0) as u64]);
            let ds = subsample_training(bundle.dataset_for(target), fraction, job_seed)?;
            let net = build_network(arch, &profile.plan, job_seed)?;
            let run = train_with_early_stopping(net, target, &ds, &profile.train, job_seed)?;
            Ok((target, fraction, evaluate(&run.network, &ds.test)?.accuracy))
        })
        .unwrap();

        let acc = |t: Target, f: f64| -> f64 {
            results
                .iter()
                .find(|(rt, rf, _)| *rt == t && (*rf - f).abs() < 1e-9)
                .unwrap()
                .2
        };
        let single_drop = acc(Target::Whole, 1.0) - acc(Target::Whole, 0.25);
        let part_drop: f64 = PartKind::ALL
            .iter()
            .map(|&p| acc(Target::Part(p), 1.0) - acc(Target::Part(p), 0.25))
            .sum::<f64>()
            / 4.0;
        let win = single_drop > part_drop;
        wins += usize::from(win);
        lines.push(format!(
            "seed {seed}: single drop {:.1} pts vs mean part drop {:.1} pts -> {}",
            single_drop * 100.0,
            part_drop * 100.0,
            if win { "single degrades more" } else { "no gap" }
        ));
    }
    for l in &lines {
        println!("  {l}");
    }
    assert!(
        wins >= 2,
        "criterion 7 FAIL: single model degraded more in only {wins}/3 seeds"
    );
    println!("criterion 7 PASS: single model degraded more in {wins}/3 seeds");
}

/// Criterion 9: checkpoint save/load/save is bit-exact and loaded
/// networks classify a 100-image fixture identically.
#[test]
fn criterion_9_checkpoint_round_trip() {
    use pedk::checkpoint;
    let plan = BuildPlan::desk();
    let net = build_network(ArchSpec::new(3, 3, Role::Component), &plan, 77).unwrap();

    let bytes = checkpoint::serialize(&net, Role::Component, Some(PartKind::Receiver)).unwrap();
    let (loaded, desc) = checkpoint::deserialize(&bytes).unwrap();
    assert_eq!(desc.part, Some(PartKind::Receiver));
    let bytes2 = checkpoint::serialize(&loaded, Role::Component, Some(PartKind::Receiver)).unwrap();
    assert_eq!(bytes, bytes2, "criterion 9 FAIL: second save differs");

    let (again, _) = checkpoint::deserialize(&bytes2).unwrap();
    let mut identical = 0;
    for i in 0..100u64 {
        let mut r = rng::stream(1000 + i, &[9]);
        let img = render_part_patch(plan.input_side, Some(PartKind::Receiver), (1, 4), &mut r)
            .to_tensor();
        let a = loaded.classify(&img).unwrap();
        let b = again.classify(&img).unwrap();
        assert_eq!(a, b, "criterion 9 FAIL: classification differs on fixture {i}");
        identical += 1;
    }
    println!("criterion 9 PASS: bit-exact round trip; {identical}/100 fixture classifications identical");
}
