// checks that the slowest grid point converges at desk scale
use pedk::experiment::{build_bundle, evaluate, train_with_early_stopping, Target};
use pedk::model::{build_network, ArchSpec, PartKind, Role};
use pedk::profile::Profile;

fn main() {
    let profile = Profile::desk();
    let bundle = build_bundle(&profile, 1).unwrap();
    for (m, n) in [(5usize, 5usize), (3, 3)] {
        let arch = ArchSpec::new(m, n, Role::Component);
        let net = build_network(arch, &profile.plan, 2).unwrap();
        let t = std::time::Instant::now();
        let run = train_with_early_stopping(
            net,
            Target::Part(PartKind::Barrel),
            &bundle.parts[0],
            &profile.train,
            3,
        )
        .unwrap();
        let eval = evaluate(&run.network, &bundle.parts[0].test).unwrap();
        println!(
            "{}x{}: {:.0}s, best epoch {} val {:.3}, test tp {:.2} tn {:.2}",
            m, n,
            t.elapsed().as_secs_f64(),
            run.best_epoch,
            run.best_val_accuracy,
            eval.tp_rate,
            eval.tn_rate
        );
        let accs: Vec<String> = run.history.iter().map(|e| format!("{:.2}", e.val_accuracy)).collect();
        println!("  history: {}", accs.join(" "));
    }
    // single model on whole scenes
    let arch = ArchSpec::new(4, 4, Role::Single);
    let net = build_network(arch, &profile.plan, 2).unwrap();
    let t = std::time::Instant::now();
    let run = train_with_early_stopping(net, Target::Whole, &bundle.single, &profile.train, 3).unwrap();
    let eval = evaluate(&run.network, &bundle.single.test).unwrap();
    println!(
        "single 4x4: {:.0}s, best epoch {} val {:.3}, test tp {:.2} tn {:.2}",
        t.elapsed().as_secs_f64(),
        run.best_epoch,
        run.best_val_accuracy,
        eval.tp_rate,
        eval.tn_rate
    );
}
