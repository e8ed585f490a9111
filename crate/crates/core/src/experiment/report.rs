//! CSV and JSON report emission. All writers are pure string builders so
//! identical results serialize byte-identically.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::PartKind;

use super::sims::{Sim1Result, Sim2Result, Sim3Result, Sim4Result, LOW_DATA_FRACTIONS};
use super::Target;

fn pct(rate: f64) -> String {
    format!("{:.1}", rate * 100.0)
}

/// Per-target grid table: one row per architecture, grid order.
pub fn grid_table_csv(sim1: &Sim1Result, target: Target) -> String {
    let mut out = String::from("arch,epoch,acc_val_pct,tp_test_pct,tn_test_pct\n");
    for row in sim1.rows.iter().filter(|r| r.target == target) {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.arch,
            row.best_epoch,
            pct(row.val_accuracy),
            pct(row.tp_rate),
            pct(row.tn_rate),
        ));
    }
    out
}

/// Best architecture per network, single-model row first.
pub fn best_table_csv(sim1: &Sim1Result) -> String {
    let mut out = String::from("network,arch,epoch,acc_val_pct,tp_test_pct,tn_test_pct\n");
    let order = [
        Target::Whole,
        Target::Part(PartKind::Barrel),
        Target::Part(PartKind::Magazine),
        Target::Part(PartKind::Receiver),
        Target::Part(PartKind::Stock),
    ];
    for target in order {
        let row = sim1.best_row(target);
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            target.label(),
            row.arch,
            row.best_epoch,
            pct(row.val_accuracy),
            pct(row.tp_rate),
            pct(row.tn_rate),
        ));
    }
    out
}

/// Threshold table: 4 networks x (theta_p, theta_n, theta_i).
pub fn thresholds_csv(sim2: &Sim2Result) -> String {
    let mut out = String::from("network,theta_p,theta_n,theta_i\n");
    for (part, t) in &sim2.thresholds {
        out.push_str(&format!(
            "{}s,{:.3},{:.3},{:.3}\n",
            part.name(),
            t.theta_p,
            t.theta_n,
            t.theta_i
        ));
    }
    out
}

/// Aggregation sweep: 4 rule rows x 4 threshold columns, each cell spread
/// over tp/tn/tot sub-columns.
pub fn sweep_csv(sim3: &Sim3Result) -> String {
    let mut out = String::from("rule");
    for theta in ["theta0", "theta_n", "theta_i", "theta_p"] {
        out.push_str(&format!(",tp_{theta}_pct,tn_{theta}_pct,tot_{theta}_pct"));
    }
    out.push('\n');
    for k in 1..=4usize {
        out.push_str(&format!("{k}_of_4"));
        for cell in sim3.grid.iter().filter(|c| c.rule_k == k) {
            out.push_str(&format!(
                ",{},{},{}",
                pct(cell.eval.tp_rate),
                pct(cell.eval.tn_rate),
                pct(cell.eval.accuracy)
            ));
        }
        out.push('\n');
    }
    out
}

/// The accuracy-weighted vote at each threshold choice.
pub fn weighted_csv(sim3: &Sim3Result) -> String {
    let mut out = String::from("theta,tp_pct,tn_pct,tot_pct\n");
    for (theta, eval) in &sim3.weighted {
        out.push_str(&format!(
            "{},{},{},{}\n",
            theta.label(),
            pct(eval.tp_rate),
            pct(eval.tn_rate),
            pct(eval.accuracy)
        ));
    }
    out
}

/// Low-data table: 5 models x 4 training fractions.
pub fn lowdata_csv(sim4: &Sim4Result) -> String {
    let mut out = String::from("model,arch,acc_25_pct,acc_50_pct,acc_75_pct,acc_100_pct\n");
    for target in Target::ALL {
        let cells: Vec<_> = sim4.cells.iter().filter(|c| c.target == target).collect();
        let arch = &cells[0].arch;
        out.push_str(&format!("{},{}", target.label(), arch));
        for &fraction in &LOW_DATA_FRACTIONS {
            let cell = cells
                .iter()
                .find(|c| (c.fraction - fraction).abs() < 1e-12)
                .expect("cell per fraction");
            out.push_str(&format!(",{}", pct(cell.accuracy)));
        }
        out.push('\n');
    }
    out
}

/// Long-form plot data: fraction, model, accuracy.
pub fn lowdata_plot_csv(sim4: &Sim4Result) -> String {
    let mut out = String::from("fraction,model,accuracy\n");
    for &fraction in &LOW_DATA_FRACTIONS {
        for target in Target::ALL {
            let cell = sim4
                .cells
                .iter()
                .find(|c| c.target == target && (c.fraction - fraction).abs() < 1e-12)
                .expect("cell per fraction");
            out.push_str(&format!(
                "{:.2},{},{:.4}\n",
                fraction,
                target.label(),
                cell.accuracy
            ));
        }
    }
    out
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
    }
    fs::write(path, content).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value)?;
    json.push('\n');
    write_text(path, &json)
}
