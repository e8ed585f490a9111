//! The four reference simulations: architecture grid search, threshold
//! estimation, aggregation sweep, and the low-data study.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::data::subsample_training;
use crate::ensemble::{
    self, accuracy_weights, aggregate, image_statistic, thresholds_from_statistics,
    StatisticMode, ThetaChoice, ThresholdSet, VoteRule,
};
use crate::error::{Error, Result};
use crate::model::{build_network, ArchSpec, PartKind, Role};
use crate::nn::Network;
use crate::patch::{patch_grid, WindowSpec};
use crate::profile::Profile;
use crate::rng;

use super::{
    evaluate, train_with_early_stopping, DatasetBundle, EvalReport, Target, TrainRun,
};

/// Seed-path tags local to the simulations.
mod sim_tags {
    pub const SIM1: u64 = 100;
    pub const SIM4: u64 = 400;
}

/// Run `jobs` closures over a bounded worker pool, returning results in
/// job order. Each job must derive its own seeds, so scheduling order
/// cannot influence any output.
pub fn run_jobs<T, F>(n_jobs: usize, workers: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<T>>>> = (0..n_jobs).map(|_| Mutex::new(None)).collect();
    let workers = workers.max(1).min(n_jobs.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n_jobs {
                    break;
                }
                let out = job(i);
                *slots[i].lock().expect("result slot") = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("job completed"))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sim1Row {
    pub target: Target,
    pub arch: String,
    pub best_epoch: usize,
    pub val_accuracy: f64,
    pub tp_rate: f64,
    pub tn_rate: f64,
}

#[derive(Debug)]
pub struct Sim1Result {
    /// One row per (target, arch), target-major in grid order: 25 rows.
    pub rows: Vec<Sim1Row>,
    /// Index into `rows`/`runs` of the best arch per target, by validation
    /// accuracy with ties to the earliest grid entry.
    pub best: Vec<usize>,
    pub runs: Vec<TrainRun>,
}

impl Sim1Result {
    pub fn best_row(&self, target: Target) -> &Sim1Row {
        &self.rows[self.best[target.index()]]
    }

    pub fn best_run(&self, target: Target) -> &TrainRun {
        &self.runs[self.best[target.index()]]
    }

    /// The four best part networks in canonical part order.
    pub fn best_part_networks(&self) -> Vec<&Network> {
        PartKind::ALL
            .iter()
            .map(|&p| &self.best_run(Target::Part(p)).network)
            .collect()
    }

    /// Validation accuracies of the best part networks, canonical order.
    pub fn best_part_val_accuracies(&self) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (i, &p) in PartKind::ALL.iter().enumerate() {
            out[i] = self.best_row(Target::Part(p)).val_accuracy;
        }
        out
    }
}

fn role_for(target: Target) -> Role {
    match target {
        Target::Part(_) => Role::Component,
        Target::Whole => Role::Single,
    }
}

/// Train and evaluate the full grid: 5 architectures for each of the four
/// part networks and the single model, 25 networks total.
pub fn simulation1(
    bundle: &DatasetBundle,
    profile: &Profile,
    seed: u64,
    workers: usize,
) -> Result<Sim1Result> {
    let targets = Target::ALL;
    let mut jobs = Vec::new();
    for target in targets {
        for arch in crate::model::architecture_grid(role_for(target)) {
            jobs.push((target, arch));
        }
    }

    let runs: Vec<(TrainRun, EvalReport)> = run_jobs(jobs.len(), workers, |i| {
        let (target, arch) = jobs[i];
        let job_seed = rng::derive_seed(
            seed,
            &[sim_tags::SIM1, target.index() as u64, arch.conv_blocks as u64, arch.dense_layers as u64],
        );
        let dataset = bundle.dataset_for(target);
        let network = build_network(arch, &profile.plan, job_seed)?;
        let run = train_with_early_stopping(network, target, dataset, &profile.train, job_seed)?;
        let eval = evaluate(&run.network, &dataset.test)?;
        Ok((run, eval))
    })?;

    let mut rows = Vec::with_capacity(runs.len());
    let mut trained = Vec::with_capacity(runs.len());
    for ((target, _), (run, eval)) in jobs.iter().zip(runs) {
        rows.push(Sim1Row {
            target: *target,
            arch: run.arch_label.clone(),
            best_epoch: run.best_epoch,
            val_accuracy: run.best_val_accuracy,
            tp_rate: eval.tp_rate,
            tn_rate: eval.tn_rate,
        });
        trained.push(run);
    }

    let mut best = vec![0usize; targets.len()];
    for (t_idx, target) in targets.iter().enumerate() {
        let mut best_idx: Option<usize> = None;
        for (i, row) in rows.iter().enumerate() {
            if row.target == *target
                && best_idx.is_none_or(|b| rows[b].val_accuracy < row.val_accuracy)
            {
                best_idx = Some(i);
            }
        }
        best[t_idx] = best_idx.expect("grid covers every target");
    }

    Ok(Sim1Result {
        rows,
        best,
        runs: trained,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sim2Result {
    /// One threshold set per part network, canonical part order.
    pub thresholds: Vec<(PartKind, ThresholdSet)>,
}

/// Estimate per-network decision thresholds on the whole-image validation
/// split (labelled at whole-object level only).
pub fn simulation2(
    part_networks: &[&Network],
    validation: &[crate::data::Sample],
    window: &WindowSpec,
    mode: StatisticMode,
    workers: usize,
) -> Result<Sim2Result> {
    let stats = statistics_matrix(part_networks, validation, window, mode, workers)?;
    let mut thresholds = Vec::with_capacity(4);
    for (i, part) in PartKind::ALL.into_iter().enumerate() {
        let collect = |label: crate::data::Label| -> Vec<f64> {
            validation
                .iter()
                .zip(&stats)
                .filter(|(s, _)| s.label == label)
                .map(|(_, row)| row[i])
                .collect()
        };
        let set = thresholds_from_statistics(
            &collect(crate::data::Label::Positive),
            &collect(crate::data::Label::Negative),
            mode,
        )?;
        thresholds.push((part, set));
    }
    Ok(Sim2Result { thresholds })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepCell {
    pub rule_k: usize,
    pub theta: ThetaChoice,
    pub eval: EvalReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sim3Result {
    /// 16 cells, rule-major: k = 1..=4, theta in table order per rule.
    pub grid: Vec<SweepCell>,
    /// The accuracy-weighted vote evaluated at each theta choice.
    pub weighted: Vec<(ThetaChoice, EvalReport)>,
    pub weights: [f64; 4],
}

/// Per-image, per-network heatmap statistics for a labelled whole-image
/// set, computed concurrently across images.
pub fn statistics_matrix(
    part_networks: &[&Network],
    samples: &[crate::data::Sample],
    window: &WindowSpec,
    mode: StatisticMode,
    workers: usize,
) -> Result<Vec<[f64; 4]>> {
    run_jobs(samples.len(), workers, |j| {
        let image = samples[j].image.to_tensor();
        let &[_, h, w] = image.shape() else {
            unreachable!("to_tensor always yields [3,H,W]");
        };
        let grid = patch_grid(w, h, window)?;
        let mut row = [0.0; 4];
        for (i, net) in part_networks.iter().enumerate() {
            let map = ensemble::heatmap(&image, net, &grid)?;
            row[i] = image_statistic(&map, mode);
        }
        Ok(row)
    })
}

fn eval_rule(
    stats: &[[f64; 4]],
    labels: &[crate::data::Label],
    thresholds: &[(PartKind, ThresholdSet)],
    rule: &VoteRule,
    theta: ThetaChoice,
) -> EvalReport {
    let (mut pos, mut neg, mut tp, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (row, label) in stats.iter().zip(labels) {
        let decisions: [bool; 4] = std::array::from_fn(|i| {
            let set = thresholds[i].1;
            match set.value(theta) {
                None => row[i] > 0.0,
                Some(t) => ensemble::network_decision(row[i], t),
            }
        });
        let verdict = aggregate(decisions, rule);
        match label {
            crate::data::Label::Positive => {
                pos += 1;
                tp += usize::from(verdict);
            }
            crate::data::Label::Negative => {
                neg += 1;
                tn += usize::from(!verdict);
            }
        }
    }
    EvalReport::from_counts(pos.max(1), neg.max(1), tp, tn)
}

/// Sweep the four voting rules against the four threshold choices on the
/// single-model test set, plus the accuracy-weighted vote. Monotonicity of
/// the grid is asserted; a violation is an invariant error.
pub fn simulation3(
    part_networks: &[&Network],
    thresholds: &[(PartKind, ThresholdSet)],
    test: &[crate::data::Sample],
    window: &WindowSpec,
    part_val_accuracies: [f64; 4],
    workers: usize,
) -> Result<Sim3Result> {
    if test.is_empty() {
        return Err(Error::EmptyInput("sweep needs a non-empty test set".into()));
    }
    let mode = thresholds[0].1.mode;
    let stats = statistics_matrix(part_networks, test, window, mode, workers)?;
    let labels: Vec<crate::data::Label> = test.iter().map(|s| s.label).collect();

    let mut grid = Vec::with_capacity(16);
    for k in 1..=4 {
        let rule = VoteRule::k_of_four(k)?;
        for theta in ThetaChoice::ALL {
            grid.push(SweepCell {
                rule_k: k,
                theta,
                eval: eval_rule(&stats, &labels, thresholds, &rule, theta),
            });
        }
    }

    let weights = accuracy_weights(part_val_accuracies)?;
    let weighted_rule = VoteRule::weighted(weights, 0.5)?;
    let weighted = ThetaChoice::ALL
        .into_iter()
        .map(|theta| {
            (
                theta,
                eval_rule(&stats, &labels, thresholds, &weighted_rule, theta),
            )
        })
        .collect();

    let result = Sim3Result {
        grid,
        weighted,
        weights,
    };
    assert_sweep_monotonicity(&result)?;
    Ok(result)
}

/// Table-trend invariants: within a rule row, raising the threshold never
/// raises TP and never lowers TN; within a threshold column, stricter
/// rules never raise TP and never lower TN.
pub fn assert_sweep_monotonicity(result: &Sim3Result) -> Result<()> {
    let cell = |k: usize, t: usize| -> &SweepCell { &result.grid[(k - 1) * 4 + t] };
    for k in 1..=4 {
        for t in 1..4 {
            let prev = cell(k, t - 1);
            let cur = cell(k, t);
            if cur.eval.true_positives > prev.eval.true_positives
                || cur.eval.true_negatives < prev.eval.true_negatives
            {
                return Err(Error::Invariant(format!(
                    "sweep row {k}: {} -> {} breaks threshold monotonicity",
                    prev.theta.label(),
                    cur.theta.label()
                )));
            }
        }
    }
    for t in 0..4 {
        for k in 2..=4 {
            let prev = cell(k - 1, t);
            let cur = cell(k, t);
            if cur.eval.true_positives > prev.eval.true_positives
                || cur.eval.true_negatives < prev.eval.true_negatives
            {
                return Err(Error::Invariant(format!(
                    "sweep column {}: {}-of-4 -> {}-of-4 breaks rule monotonicity",
                    cur.theta.label(),
                    k - 1,
                    k
                )));
            }
        }
    }
    Ok(())
}

pub const LOW_DATA_FRACTIONS: [f64; 4] = [0.25, 0.50, 0.75, 1.00];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sim4Cell {
    pub target: Target,
    pub arch: String,
    pub fraction: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sim4Result {
    /// 5 models x 4 fractions, target-major, fractions ascending.
    pub cells: Vec<Sim4Cell>,
}

/// Retrain the best architectures on stratified training subsets and
/// re-evaluate on the untouched test split. The 100% column reuses the
/// grid-search result, which ran the identical computation.
pub fn simulation4(
    bundle: &DatasetBundle,
    sim1: &Sim1Result,
    profile: &Profile,
    seed: u64,
    workers: usize,
) -> Result<Sim4Result> {
    let mut jobs = Vec::new();
    for target in Target::ALL {
        let best = sim1.best_row(target);
        let arch = ArchSpec::parse_label(&best.arch, role_for(target)).ok_or_else(|| {
            Error::InvalidParameter(format!("unparseable arch label {}", best.arch))
        })?;
        for (f_idx, &fraction) in LOW_DATA_FRACTIONS.iter().enumerate() {
            if fraction < 1.0 {
                jobs.push((target, arch, f_idx, fraction));
            }
        }
    }

    let retrained: Vec<(Target, f64, f64, String)> = run_jobs(jobs.len(), workers, |i| {
        let (target, arch, f_idx, fraction) = jobs[i];
        let job_seed = rng::derive_seed(
            seed,
            &[sim_tags::SIM4, target.index() as u64, f_idx as u64],
        );
        let reduced = subsample_training(bundle.dataset_for(target), fraction, job_seed)?;
        let network = build_network(arch, &profile.plan, job_seed)?;
        let run = train_with_early_stopping(network, target, &reduced, &profile.train, job_seed)?;
        let eval = evaluate(&run.network, &reduced.test)?;
        Ok((target, fraction, eval.accuracy, run.arch_label))
    })?;

    let mut cells = Vec::with_capacity(20);
    for target in Target::ALL {
        let best = sim1.best_row(target);
        for &fraction in &LOW_DATA_FRACTIONS {
            let accuracy = if (fraction - 1.0).abs() < 1e-12 {
                (best.tp_rate + best.tn_rate) / 2.0
            } else {
                retrained
                    .iter()
                    .find(|(t, f, _, _)| *t == target && (*f - fraction).abs() < 1e-12)
                    .expect("every retrain job ran")
                    .2
            };
            cells.push(Sim4Cell {
                target,
                arch: best.arch.clone(),
                fraction,
                accuracy,
            });
        }
    }
    Ok(Sim4Result { cells })
}
