// rough throughput probe used while sizing the desk profile
use std::time::Instant;

use pedk::experiment::{build_bundle, train_with_early_stopping, Target};
use pedk::model::{build_network, ArchSpec, Role};
use pedk::profile::Profile;

fn main() {
    let mut profile = Profile::desk();
    profile.train.epochs = 1;
    let t0 = Instant::now();
    let bundle = build_bundle(&profile, 1).unwrap();
    println!("bundle generated in {:.1}s", t0.elapsed().as_secs_f64());
    println!(
        "part train {} val {} test {}; single train {}",
        bundle.parts[0].train.len(),
        bundle.parts[0].validation.len(),
        bundle.parts[0].test.len(),
        bundle.single.train.len()
    );

    for (m, n) in [(3usize, 3usize), (4, 4), (5, 5)] {
        let arch = ArchSpec::new(m, n, Role::Component);
        let net = build_network(arch, &profile.plan, 2).unwrap();
        println!("{}x{} params {}", m, n, net.param_count());
        let t = Instant::now();
        let run = train_with_early_stopping(
            net,
            Target::Part(pedk::model::PartKind::Barrel),
            &bundle.parts[0],
            &profile.train,
            3,
        )
        .unwrap();
        println!(
            "  1 epoch in {:.1}s, val acc {:.3}",
            t.elapsed().as_secs_f64(),
            run.best_val_accuracy
        );
    }
}
