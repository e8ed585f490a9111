// probes the low-data gap mechanism: single-model drop vs part-net drop
use pedk::data::subsample_training;
use pedk::experiment::{build_bundle, evaluate, train_with_early_stopping, Target};
use pedk::model::{build_network, ArchSpec, PartKind, Role};
use pedk::profile::Profile;

fn main() {
    let profile = Profile::desk();
    for seed in [1u64, 2] {
        let bundle = build_bundle(&profile, seed).unwrap();
        for (label, target, arch) in [
            ("barrel", Target::Part(PartKind::Barrel), ArchSpec::new(3, 3, Role::Component)),
            ("stock ", Target::Part(PartKind::Stock), ArchSpec::new(3, 3, Role::Component)),
            ("single", Target::Whole, ArchSpec::new(4, 4, Role::Single)),
        ] {
            let ds = match target {
                Target::Part(p) => &bundle.parts[p.index()],
                Target::Whole => &bundle.single,
            };
            let mut accs = Vec::new();
            for frac in [1.0f64, 0.25] {
                let reduced = subsample_training(ds, frac, seed + 7).unwrap();
                let net = build_network(arch, &profile.plan, seed + 11).unwrap();
                let run = train_with_early_stopping(net, target, &reduced, &profile.train, seed + 13).unwrap();
                let eval = evaluate(&run.network, &reduced.test).unwrap();
                accs.push((frac, run.best_val_accuracy, eval.accuracy));
            }
            println!(
                "seed {seed} {label}: full val {:.3} test {:.3} | 25% val {:.3} test {:.3} | drop {:.1} pts",
                accs[0].1, accs[0].2, accs[1].1, accs[1].2,
                (accs[0].2 - accs[1].2) * 100.0
            );
        }
    }
}
