use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use pedk::checkpoint;
use pedk::data::manifest::{load_dataset, write_dataset};
use pedk::data::synth::SynthConfig;
use pedk::data::{ImageBuf, Split};
use pedk::ensemble::{
    accuracy_weights, aggregate, coverage_counts, heatmap, image_statistic, StatisticMode,
    ThetaChoice, ThresholdSet, VoteRule,
};
use pedk::error::{Error, Result};
use pedk::experiment::report::{self, write_json, write_text};
use pedk::experiment::sims::{
    simulation1, simulation2, simulation3, simulation4, Sim1Result, Sim1Row,
};
use pedk::experiment::{
    build_bundle, evaluate, train_with_early_stopping, DatasetBundle, Target,
};
use pedk::model::{build_network, ArchSpec, PartKind, Role};
use pedk::nn::Network;
use pedk::patch::{patch_grid, WindowSpec};
use pedk::profile::Profile;
use pedk::rng;

use crate::{Cli, Command};

struct Ctx {
    seed: u64,
    profile: Profile,
    workers: usize,
    json: bool,
}

fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

pub fn run(cli: Cli) -> Result<()> {
    let profile = match &cli.profile_file {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            serde_json::from_str(&text)?
        }
        None => Profile::by_name(&cli.profile).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "unknown profile {:?}; expected desk or paper",
                cli.profile
            ))
        })?,
    };
    let ctx = Ctx {
        seed: cli.seed,
        profile,
        workers: cli.workers.unwrap_or_else(default_workers),
        json: cli.json,
    };

    match cli.command {
        Command::Synth { out, config } => cmd_synth(&ctx, &out, config.as_deref()),
        Command::Train {
            data,
            out,
            grid,
            target,
            arch,
        } => cmd_train(&ctx, &data, &out, grid, target.as_deref(), arch.as_deref()),
        Command::Eval {
            data,
            checkpoint,
            split,
        } => cmd_eval(&ctx, &data, &checkpoint, &split),
        Command::Thresholds {
            data,
            models,
            mode,
            window_ratio,
            step_ratio,
            patch_size,
        } => {
            let window = window_override(&ctx, window_ratio, step_ratio)?;
            cmd_thresholds(&ctx, &data, &models, &mode, &window, patch_size)
        }
        Command::Sweep {
            data,
            models,
            out,
            window_ratio,
            step_ratio,
            patch_size,
        } => {
            let window = window_override(&ctx, window_ratio, step_ratio)?;
            cmd_sweep(&ctx, &data, &models, out.as_deref(), &window, patch_size)
        }
        Command::Lowdata { data, models, out } => cmd_lowdata(&ctx, &data, &models, out.as_deref()),
        Command::Detect {
            image,
            models,
            rule,
            theta,
            single,
            heatmaps,
            window_ratio,
            step_ratio,
            patch_size,
        } => {
            let window = window_override(&ctx, window_ratio, step_ratio)?;
            cmd_detect(
                &ctx,
                &image,
                &models,
                &rule,
                &theta,
                single,
                heatmaps.as_deref(),
                &window,
                patch_size,
            )
        }
        Command::ReproAll { out } => cmd_repro_all(&ctx, &out),
    }
}

fn window_override(ctx: &Ctx, wr: Option<f64>, sr: Option<f64>) -> Result<WindowSpec> {
    WindowSpec::new(
        wr.unwrap_or(ctx.profile.window.window_ratio),
        sr.unwrap_or(ctx.profile.window.step_ratio),
    )
}

fn check_patch_size(patch_size: Option<usize>, networks: &[&Network]) -> Result<()> {
    if let Some(p) = patch_size {
        for net in networks {
            if net.input_side != p {
                return Err(Error::InvalidParameter(format!(
                    "--patch-size {p} does not match the checkpoint input side {}",
                    net.input_side
                )));
            }
        }
    }
    Ok(())
}

fn write_run_config(ctx: &Ctx, dir: &Path, command: &str, args: serde_json::Value) -> Result<()> {
    let cfg = json!({
        "command": command,
        "seed": ctx.seed,
        "workers": ctx.workers,
        "profile": ctx.profile,
        "args": args,
    });
    write_json(&dir.join("run_config.json"), &cfg)
}

fn say(ctx: &Ctx, line: &str) {
    if !ctx.json {
        println!("{line}");
    }
}

fn emit_json<T: Serialize>(ctx: &Ctx, value: &T) -> Result<()> {
    if ctx.json {
        println!("{}", serde_json::to_string_pretty(value)?);
    }
    Ok(())
}

// ---------------------------------------------------------------------
// dataset bundle on disk

fn write_bundle(bundle: &DatasetBundle, dir: &Path) -> Result<()> {
    for (name, ds) in DatasetBundle::dataset_names()
        .iter()
        .zip(bundle.parts.iter().chain([&bundle.single]))
    {
        write_dataset(ds, &dir.join(name))?;
    }
    Ok(())
}

fn load_bundle(dir: &Path) -> Result<DatasetBundle> {
    let names = DatasetBundle::dataset_names();
    let mut parts = Vec::with_capacity(4);
    for name in &names[..4] {
        parts.push(load_dataset(&dir.join(name))?);
    }
    let single = load_dataset(&dir.join(names[4]))?;
    Ok(DatasetBundle { parts, single })
}

fn cmd_synth(ctx: &Ctx, out: &Path, config: Option<&Path>) -> Result<()> {
    let mut profile = ctx.profile.clone();
    if let Some(path) = config {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let synth: SynthConfig = serde_json::from_str(&text)?;
        profile.synth = synth;
    }
    let local = Ctx {
        seed: ctx.seed,
        profile,
        workers: ctx.workers,
        json: ctx.json,
    };
    let bundle = build_bundle(&local.profile, local.seed)?;
    write_bundle(&bundle, out)?;
    write_run_config(&local, out, "synth", json!({"out": out}))?;

    let mut counts = Vec::new();
    for (name, ds) in DatasetBundle::dataset_names()
        .iter()
        .zip(bundle.parts.iter().chain([&bundle.single]))
    {
        let (tr_p, tr_n) = ds.counts(Split::Train);
        let (va_p, va_n) = ds.counts(Split::Validation);
        let (te_p, te_n) = ds.counts(Split::Test);
        say(
            &local,
            &format!(
                "{name}: train {tr_p}+{tr_n}, validation {va_p}+{va_n}, test {te_p}+{te_n}"
            ),
        );
        counts.push(json!({
            "dataset": name,
            "train": [tr_p, tr_n],
            "validation": [va_p, va_n],
            "test": [te_p, te_n],
        }));
    }
    emit_json(&local, &json!({"out": out, "datasets": counts}))
}

// ---------------------------------------------------------------------
// training

/// Persisted outcome of a grid run, consumed by later commands.
#[derive(Debug, Serialize, Deserialize)]
pub struct TrainSummary {
    pub seed: u64,
    pub profile: String,
    pub rows: Vec<Sim1Row>,
    /// target label -> best arch label
    pub best: Vec<BestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BestEntry {
    pub target: String,
    pub arch: String,
    pub best_epoch: usize,
    pub val_accuracy: f64,
    pub tp_rate: f64,
    pub tn_rate: f64,
}

fn target_file_stem(target: Target) -> String {
    target.label()
}

fn save_grid_outputs(
    ctx: &Ctx,
    out: &Path,
    sim1: &Sim1Result,
) -> Result<()> {
    let grid_dir = out.join("grid");
    let best_dir = out.join("best");
    fs::create_dir_all(&grid_dir).map_err(|e| Error::io(grid_dir.display().to_string(), e))?;
    fs::create_dir_all(&best_dir).map_err(|e| Error::io(best_dir.display().to_string(), e))?;

    for (row, run) in sim1.rows.iter().zip(&sim1.runs) {
        let role = match row.target {
            Target::Part(_) => Role::Component,
            Target::Whole => Role::Single,
        };
        let part = match row.target {
            Target::Part(p) => Some(p),
            Target::Whole => None,
        };
        let path = grid_dir.join(format!("{}_{}.pedk", target_file_stem(row.target), row.arch));
        checkpoint::save(&run.network, role, part, &path)?;
    }
    for target in Target::ALL {
        let run = sim1.best_run(target);
        let (role, part) = match target {
            Target::Part(p) => (Role::Component, Some(p)),
            Target::Whole => (Role::Single, None),
        };
        let path = best_dir.join(format!("{}.pedk", target_file_stem(target)));
        checkpoint::save(&run.network, role, part, &path)?;
    }

    let reports = out.join("reports");
    for target in Target::ALL {
        write_text(
            &reports.join(format!("grid_{}.csv", target_file_stem(target))),
            &report::grid_table_csv(sim1, target),
        )?;
    }
    write_text(
        &reports.join("best_architectures.csv"),
        &report::best_table_csv(sim1),
    )?;

    let summary = TrainSummary {
        seed: ctx.seed,
        profile: ctx.profile.name.clone(),
        rows: sim1.rows.clone(),
        best: Target::ALL
            .into_iter()
            .map(|t| {
                let r = sim1.best_row(t);
                BestEntry {
                    target: t.label(),
                    arch: r.arch.clone(),
                    best_epoch: r.best_epoch,
                    val_accuracy: r.val_accuracy,
                    tp_rate: r.tp_rate,
                    tn_rate: r.tn_rate,
                }
            })
            .collect(),
    };
    write_json(&out.join("train_summary.json"), &summary)
}

fn load_summary(models: &Path) -> Result<TrainSummary> {
    let path = models.join("train_summary.json");
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&text)?)
}

fn run_grid(ctx: &Ctx, bundle: &DatasetBundle, out: &Path) -> Result<Sim1Result> {
    let sim1 = simulation1(bundle, &ctx.profile, ctx.seed, ctx.workers)?;
    save_grid_outputs(ctx, out, &sim1)?;
    for target in Target::ALL {
        let row = sim1.best_row(target);
        say(
            ctx,
            &format!(
                "{}: best arch {} (epoch {}, val {:.1}%, test TP {:.1}% TN {:.1}%)",
                target.label(),
                row.arch,
                row.best_epoch,
                row.val_accuracy * 100.0,
                row.tp_rate * 100.0,
                row.tn_rate * 100.0
            ),
        );
    }
    Ok(sim1)
}

fn cmd_train(
    ctx: &Ctx,
    data: &Path,
    out: &Path,
    grid: bool,
    target: Option<&str>,
    arch: Option<&str>,
) -> Result<()> {
    let bundle = load_bundle(data)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out.display().to_string(), e))?;

    if grid {
        let sim1 = run_grid(ctx, &bundle, out)?;
        write_run_config(ctx, out, "train", json!({"data": data, "out": out, "grid": true}))?;
        return emit_json(ctx, &json!({"trained": sim1.rows.len(), "out": out}));
    }

    let (Some(target), Some(arch)) = (target, arch) else {
        return Err(Error::InvalidParameter(
            "train needs either --grid or both --target and --arch".into(),
        ));
    };
    let target = Target::parse(target)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown target {target:?}")))?;
    let role = match target {
        Target::Part(_) => Role::Component,
        Target::Whole => Role::Single,
    };
    let arch = ArchSpec::parse_label(arch, role)
        .ok_or_else(|| Error::InvalidParameter(format!("arch must look like 4x3, got {arch:?}")))?;

    let job_seed = rng::derive_seed(ctx.seed, &[500, target.index() as u64]);
    let network = build_network(arch, &ctx.profile.plan, job_seed)?;
    let dataset = bundle.dataset_for(target);
    let run = train_with_early_stopping(network, target, dataset, &ctx.profile.train, job_seed)?;
    let eval = evaluate(&run.network, &dataset.test)?;

    let part = match target {
        Target::Part(p) => Some(p),
        Target::Whole => None,
    };
    let path = out.join(format!("{}_{}.pedk", target_file_stem(target), run.arch_label));
    checkpoint::save(&run.network, role, part, &path)?;
    write_run_config(
        ctx,
        out,
        "train",
        json!({"data": data, "out": out, "target": target.label(), "arch": run.arch_label}),
    )?;
    say(
        ctx,
        &format!(
            "{} {}: best epoch {} val {:.1}%, test TP {:.1}% TN {:.1}% -> {}",
            target.label(),
            run.arch_label,
            run.best_epoch,
            run.best_val_accuracy * 100.0,
            eval.tp_rate * 100.0,
            eval.tn_rate * 100.0,
            path.display()
        ),
    );
    emit_json(
        ctx,
        &json!({
            "target": target.label(),
            "arch": run.arch_label,
            "best_epoch": run.best_epoch,
            "val_accuracy": run.best_val_accuracy,
            "tp_rate": eval.tp_rate,
            "tn_rate": eval.tn_rate,
            "checkpoint": path,
        }),
    )
}

fn cmd_eval(ctx: &Ctx, data: &Path, ckpt_path: &Path, split: &str) -> Result<()> {
    let (network, descriptor) = checkpoint::load(ckpt_path)?;
    let split = match split {
        "test" => Split::Test,
        "validation" | "val" => Split::Validation,
        other => {
            return Err(Error::InvalidParameter(format!(
                "split must be test or validation, got {other:?}"
            )))
        }
    };
    let dataset_name = match descriptor.part {
        Some(p) => p.name(),
        None => "single",
    };
    let dataset = load_dataset(&data.join(dataset_name))?;
    let samples = dataset.split(split);
    let eval = evaluate(&network, samples)?;
    say(
        ctx,
        &format!(
            "{dataset_name} {:?}: TP {:.1}% TN {:.1}% total {:.1}% ({} samples)",
            split,
            eval.tp_rate * 100.0,
            eval.tn_rate * 100.0,
            eval.accuracy * 100.0,
            samples.len()
        ),
    );
    emit_json(ctx, &eval)
}

// ---------------------------------------------------------------------
// thresholds / sweep / lowdata

/// Sidecar stored next to each part checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdSidecar {
    pub part: PartKind,
    pub thresholds: ThresholdSet,
    pub validation_accuracy: f64,
}

fn sidecar_path(models: &Path, part: PartKind) -> PathBuf {
    models.join("best").join(format!("{}s.thresholds.json", part.name()))
}

fn load_best_part_networks(models: &Path) -> Result<Vec<Network>> {
    PartKind::ALL
        .iter()
        .map(|p| {
            let path = models.join("best").join(format!("{}s.pedk", p.name()));
            let (net, desc) = checkpoint::load(&path)?;
            if desc.part != Some(*p) {
                return Err(Error::Checkpoint(format!(
                    "{} holds {:?}, expected {:?}",
                    path.display(),
                    desc.part,
                    p
                )));
            }
            Ok(net)
        })
        .collect()
}

fn load_sidecars(models: &Path) -> Result<Vec<ThresholdSidecar>> {
    PartKind::ALL
        .iter()
        .map(|p| {
            let path = sidecar_path(models, *p);
            if !path.exists() {
                return Err(Error::Dataset(format!(
                    "missing thresholds sidecar {}; run `pedk thresholds` first",
                    path.display()
                )));
            }
            let text =
                fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
            Ok(serde_json::from_str(&text)?)
        })
        .collect()
}

fn cmd_thresholds(
    ctx: &Ctx,
    data: &Path,
    models: &Path,
    mode: &str,
    window: &WindowSpec,
    patch_size: Option<usize>,
) -> Result<()> {
    let mode = StatisticMode::parse(mode)
        .ok_or_else(|| Error::InvalidParameter(format!("mode must be max or mean, got {mode:?}")))?;
    let networks = load_best_part_networks(models)?;
    let refs: Vec<&Network> = networks.iter().collect();
    check_patch_size(patch_size, &refs)?;
    let single = load_dataset(&data.join("single"))?;
    let summary = load_summary(models)?;

    let sim2 = simulation2(&refs, &single.validation, window, mode, ctx.workers)?;

    for (part, set) in &sim2.thresholds {
        let val_accuracy = summary
            .rows
            .iter()
            .filter(|r| r.target == Target::Part(*part))
            .map(|r| r.val_accuracy)
            .fold(f64::NEG_INFINITY, f64::max);
        let sidecar = ThresholdSidecar {
            part: *part,
            thresholds: *set,
            validation_accuracy: val_accuracy,
        };
        write_json(&sidecar_path(models, *part), &sidecar)?;
        say(
            ctx,
            &format!(
                "{}s: theta_p {:.3} theta_n {:.3} theta_i {:.3}",
                part.name(),
                set.theta_p,
                set.theta_n,
                set.theta_i
            ),
        );
    }
    let reports = models.join("reports");
    write_text(&reports.join("thresholds.csv"), &report::thresholds_csv(&sim2))?;
    write_run_config(
        ctx,
        models,
        "thresholds",
        json!({"data": data, "models": models, "mode": mode.to_string(), "window": window}),
    )?;
    emit_json(ctx, &sim2)
}

fn cmd_sweep(
    ctx: &Ctx,
    data: &Path,
    models: &Path,
    out: Option<&Path>,
    window: &WindowSpec,
    patch_size: Option<usize>,
) -> Result<()> {
    let networks = load_best_part_networks(models)?;
    let refs: Vec<&Network> = networks.iter().collect();
    check_patch_size(patch_size, &refs)?;
    let sidecars = load_sidecars(models)?;
    let thresholds: Vec<(PartKind, ThresholdSet)> =
        sidecars.iter().map(|s| (s.part, s.thresholds)).collect();
    let accs: [f64; 4] = std::array::from_fn(|i| sidecars[i].validation_accuracy);
    let single = load_dataset(&data.join("single"))?;

    let sim3 = simulation3(&refs, &thresholds, &single.test, window, accs, ctx.workers)?;

    let out = out.unwrap_or(models).join("reports");
    write_text(&out.join("sweep.csv"), &report::sweep_csv(&sim3))?;
    write_text(&out.join("weighted_vote.csv"), &report::weighted_csv(&sim3))?;
    say(ctx, &report::sweep_csv(&sim3).to_string());
    write_run_config(
        ctx,
        out.parent().unwrap_or(&out),
        "sweep",
        json!({"data": data, "models": models, "window": window}),
    )?;
    emit_json(ctx, &sim3)
}

fn cmd_lowdata(ctx: &Ctx, data: &Path, models: &Path, out: Option<&Path>) -> Result<()> {
    let bundle = load_bundle(data)?;
    let summary = load_summary(models)?;

    // rebuild a Sim1Result view sufficient for simulation4
    let sim1 = Sim1Result {
        rows: summary.rows.clone(),
        best: best_indices(&summary.rows)?,
        runs: Vec::new(),
    };
    let sim4 = simulation4(&bundle, &sim1, &ctx.profile, ctx.seed, ctx.workers)?;

    let out = out.unwrap_or(models).join("reports");
    write_text(&out.join("lowdata.csv"), &report::lowdata_csv(&sim4))?;
    write_text(&out.join("lowdata_plot.csv"), &report::lowdata_plot_csv(&sim4))?;
    say(ctx, &report::lowdata_csv(&sim4).to_string());
    write_run_config(
        ctx,
        out.parent().unwrap_or(&out),
        "lowdata",
        json!({"data": data, "models": models}),
    )?;
    emit_json(ctx, &sim4)
}

fn best_indices(rows: &[Sim1Row]) -> Result<Vec<usize>> {
    let mut best = vec![usize::MAX; Target::ALL.len()];
    for (i, row) in rows.iter().enumerate() {
        let t = row.target.index();
        if best[t] == usize::MAX || rows[best[t]].val_accuracy < row.val_accuracy {
            best[t] = i;
        }
    }
    if best.contains(&usize::MAX) {
        return Err(Error::Dataset(
            "train summary does not cover all five targets".into(),
        ));
    }
    Ok(best)
}

// ---------------------------------------------------------------------
// detect

#[allow(clippy::too_many_arguments)]
fn cmd_detect(
    ctx: &Ctx,
    image_path: &Path,
    models: &Path,
    rule: &str,
    theta: &str,
    single: bool,
    heatmaps_out: Option<&Path>,
    window: &WindowSpec,
    patch_size: Option<usize>,
) -> Result<()> {
    if !image_path.exists() {
        return Err(Error::MissingFile(image_path.to_path_buf()));
    }
    let bytes =
        fs::read(image_path).map_err(|e| Error::io(image_path.display().to_string(), e))?;
    let image = ImageBuf::from_png_bytes(&bytes)?;
    let tensor = image.to_tensor();

    if single {
        let path = models.join("best").join("full_object.pedk");
        let (network, _) = checkpoint::load(&path)?;
        check_patch_size(patch_size, &[&network])?;
        let side = image.width.min(image.height);
        let input = pedk::patch::extract_rescale(
            &tensor,
            pedk::patch::Rect { x: 0, y: 0, side },
            network.input_side,
        )?;
        let probs = network.predict(&input)?;
        let p = probs.data()[1];
        say(
            ctx,
            &format!(
                "single model: P(object) = {:.4} -> {}",
                p,
                if p >= 0.5 { "POSITIVE" } else { "NEGATIVE" }
            ),
        );
        return emit_json(ctx, &json!({"probability": p, "positive": p >= 0.5}));
    }

    let theta_choice = ThetaChoice::parse(theta)
        .ok_or_else(|| Error::InvalidParameter(format!("theta must be zero|n|i|p, got {theta:?}")))?;
    let networks = load_best_part_networks(models)?;
    let refs: Vec<&Network> = networks.iter().collect();
    check_patch_size(patch_size, &refs)?;
    let sidecars = load_sidecars(models)?;

    let vote_rule = match rule {
        "weighted" => {
            let accs: [f64; 4] = std::array::from_fn(|i| sidecars[i].validation_accuracy);
            VoteRule::weighted(accuracy_weights(accs)?, 0.5)?
        }
        k => {
            let k: usize = k.parse().map_err(|_| {
                Error::InvalidParameter(format!("rule must be 1..4 or weighted, got {k:?}"))
            })?;
            VoteRule::k_of_four(k)?
        }
    };

    let grid = patch_grid(image.width, image.height, window)?;
    let mut decisions = [false; 4];
    let mut details = Vec::new();
    for (i, (net, sidecar)) in refs.iter().zip(&sidecars).enumerate() {
        let map = heatmap(&tensor, net, &grid)?;
        let stat = image_statistic(&map, sidecar.thresholds.mode);
        let decision = match sidecar.thresholds.value(theta_choice) {
            None => stat > 0.0,
            Some(t) => pedk::ensemble::network_decision(stat, t),
        };
        decisions[i] = decision;
        let uncertain = sidecar.thresholds.uncertain(stat);
        let cover = image_statistic(&coverage_counts(&grid), sidecar.thresholds.mode);
        say(
            ctx,
            &format!(
                "{:>9}: statistic {:>8.3} (bound {:>8.3})  theta {:>8.3}  -> {}{}",
                sidecar.part.name(),
                stat,
                cover,
                sidecar.thresholds.value(theta_choice).unwrap_or(0.0),
                if decision { "positive" } else { "negative" },
                if uncertain { "  [uncertain]" } else { "" }
            ),
        );
        if let Some(dir) = heatmaps_out {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
            let png = map.to_png_bytes()?;
            let path = dir.join(format!("heatmap_{}s.png", sidecar.part.name()));
            fs::write(&path, png).map_err(|e| Error::io(path.display().to_string(), e))?;
            let json_path = dir.join(format!("heatmap_{}s.json", sidecar.part.name()));
            write_text(&json_path, &map.to_json())?;
        }
        details.push(json!({
            "part": sidecar.part.name(),
            "statistic": stat,
            "theta": sidecar.thresholds.value(theta_choice),
            "decision": decision,
            "uncertain": uncertain,
        }));
    }

    let verdict = aggregate(decisions, &vote_rule);
    say(
        ctx,
        &format!(
            "verdict: {} (rule {}, {})",
            if verdict { "POSITIVE" } else { "NEGATIVE" },
            vote_rule.label(),
            theta_choice.label()
        ),
    );
    emit_json(
        ctx,
        &json!({"verdict": verdict, "rule": vote_rule.label(), "theta": theta_choice.label(), "networks": details}),
    )
}

// ---------------------------------------------------------------------
// repro-all

fn cmd_repro_all(ctx: &Ctx, out: &Path) -> Result<()> {
    let t0 = std::time::Instant::now();
    fs::create_dir_all(out).map_err(|e| Error::io(out.display().to_string(), e))?;

    say(ctx, "[1/5] generating synthetic dataset bundle");
    let bundle = build_bundle(&ctx.profile, ctx.seed)?;
    write_bundle(&bundle, &out.join("dataset"))?;

    say(ctx, "[2/5] training the 25-network architecture grid");
    let models = out.join("models");
    fs::create_dir_all(&models).map_err(|e| Error::io(models.display().to_string(), e))?;
    let sim1 = run_grid(ctx, &bundle, &models)?;

    say(ctx, "[3/5] estimating decision thresholds");
    let part_networks = sim1.best_part_networks();
    let mode = StatisticMode::Max;
    let sim2 = simulation2(
        &part_networks,
        &bundle.single.validation,
        &ctx.profile.window,
        mode,
        ctx.workers,
    )?;
    let reports = models.join("reports");
    write_text(&reports.join("thresholds.csv"), &report::thresholds_csv(&sim2))?;
    let val_accs = sim1.best_part_val_accuracies();
    for ((part, set), acc) in sim2.thresholds.iter().zip(val_accs) {
        write_json(
            &sidecar_path(&models, *part),
            &ThresholdSidecar {
                part: *part,
                thresholds: *set,
                validation_accuracy: acc,
            },
        )?;
    }

    say(ctx, "[4/5] sweeping voting rules against thresholds");
    let sim3 = simulation3(
        &part_networks,
        &sim2.thresholds,
        &bundle.single.test,
        &ctx.profile.window,
        val_accs,
        ctx.workers,
    )?;
    write_text(&reports.join("sweep.csv"), &report::sweep_csv(&sim3))?;
    write_text(&reports.join("weighted_vote.csv"), &report::weighted_csv(&sim3))?;

    say(ctx, "[5/5] low-data retraining study");
    let sim4 = simulation4(&bundle, &sim1, &ctx.profile, ctx.seed, ctx.workers)?;
    write_text(&reports.join("lowdata.csv"), &report::lowdata_csv(&sim4))?;
    write_text(&reports.join("lowdata_plot.csv"), &report::lowdata_plot_csv(&sim4))?;

    let consolidated = json!({
        "seed": ctx.seed,
        "profile": ctx.profile,
        "networks_trained": sim1.rows.len(),
        "grid": sim1.rows,
        "thresholds": sim2,
        "sweep": sim3,
        "lowdata": sim4,
    });
    write_json(&reports.join("report.json"), &consolidated)?;
    write_run_config(ctx, out, "repro-all", json!({"out": out}))?;

    say(
        ctx,
        &format!(
            "done: {} networks trained, reports under {} ({:.0}s)",
            sim1.rows.len(),
            reports.display(),
            t0.elapsed().as_secs_f64()
        ),
    );
    emit_json(ctx, &consolidated)
}
