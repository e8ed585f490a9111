//! Shared helpers for the property and acceptance suites.

use pedk::ensemble::{aggregate, network_decision, VoteRule};

/// Vote and threshold monotonicity over random decision matrices; the
/// acceptance suite runs the same generator at 10,000 cases.
pub fn monotonicity_violations(cases: usize, seed: u64) -> usize {
    use rand::Rng;
    let mut rng = pedk::rng::stream(seed, &[777]);
    let mut violations = 0usize;

    for _ in 0..cases {
        let n_images = rng.gen_range(4..24);
        // per-network threshold triples theta_n <= theta_i <= theta_p
        let thetas: Vec<[f64; 3]> = (0..4)
            .map(|_| {
                let a = rng.gen_range(0.0..20.0);
                let b = rng.gen_range(0.0..20.0);
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                [lo, (lo + hi) / 2.0, hi]
            })
            .collect();
        let stats: Vec<[f64; 4]> = (0..n_images)
            .map(|_| std::array::from_fn(|_| rng.gen_range(0.0..25.0)))
            .collect();
        let labels: Vec<bool> = (0..n_images).map(|_| rng.gen()).collect();

        // grid of (tp, tn) counts: 4 theta choices x 4 rules
        let mut tp = [[0usize; 4]; 4];
        let mut tn = [[0usize; 4]; 4];
        for (row, &label) in stats.iter().zip(&labels) {
            for t_idx in 0..4 {
                let decisions: [bool; 4] = std::array::from_fn(|n| match t_idx {
                    0 => row[n] > 0.0,
                    i => network_decision(row[n], thetas[n][i - 1]),
                });
                for k in 1..=4 {
                    let rule = VoteRule::k_of_four(k).unwrap();
                    let verdict = aggregate(decisions, &rule);
                    if label && verdict {
                        tp[k - 1][t_idx] += 1;
                    }
                    if !label && !verdict {
                        tn[k - 1][t_idx] += 1;
                    }
                }
            }
        }
        for k in 0..4 {
            for t in 1..4 {
                if tp[k][t] > tp[k][t - 1] || tn[k][t] < tn[k][t - 1] {
                    violations += 1;
                }
            }
        }
        for t in 0..4 {
            for k in 1..4 {
                if tp[k][t] > tp[k - 1][t] || tn[k][t] < tn[k - 1][t] {
                    violations += 1;
                }
            }
        }
    }
    violations
}

