//! Result-row schema, the claim coverage map, and the CSV/JSON artifact
//! writers. Column order is fixed; floats print in Rust's shortest
//! round-trip form, so identical runs produce byte-identical files.

use std::path::Path;

use mlshe_core::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    CrossMethod,
    Refinement,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::ClosedForm => "closed-form",
            Provenance::CrossMethod => "cross-method",
            Provenance::Refinement => "refinement",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "closed-form" => Provenance::ClosedForm,
            "cross-method" => Provenance::CrossMethod,
            "refinement" => Provenance::Refinement,
            other => return Err(Error::config(format!("bad provenance tag `{other}`"))),
        })
    }
}

/// One line of `results.csv`. Wall-clock time lives in the sidecar
/// `timings.csv` so that `results.csv` stays byte-identical across
/// re-runs and thread counts.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub experiment: String,
    pub check_id: String,
    pub quantity: String,
    pub value: f64,
    pub error_estimate: f64,
    pub reference_value: f64,
    pub provenance: Provenance,
    pub tolerance: f64,
    pub pass: bool,
    pub seed: u64,
}

impl ResultRow {
    /// Diagnostic rows are reported but do not gate the exit status.
    pub fn is_diagnostic(&self) -> bool {
        self.check_id.starts_with("diag-")
    }
}

pub const RESULTS_HEADER: &str = "experiment,check_id,quantity,value,\
stderr_or_error_estimate,reference_value,reference_provenance,tolerance,pass,seed";

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for r in rows {
        debug_assert!(
            !r.experiment.contains(',') && !r.check_id.contains(',') && !r.quantity.contains(','),
            "text fields must not contain commas"
        );
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.experiment,
            r.check_id,
            r.quantity,
            r.value,
            r.error_estimate,
            r.reference_value,
            r.provenance.as_str(),
            r.tolerance,
            if r.pass { "pass" } else { "fail" },
            r.seed
        ));
    }
    s
}

pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RESULTS_HEADER => {}
        _ => return Err(Error::config("results.csv has an unexpected header")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(Error::config(format!("results.csv row {} malformed", i + 2)));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::config(format!("results.csv row {}: bad number", i + 2)))
        };
        rows.push(ResultRow {
            experiment: f[0].to_string(),
            check_id: f[1].to_string(),
            quantity: f[2].to_string(),
            value: num(f[3])?,
            error_estimate: num(f[4])?,
            reference_value: num(f[5])?,
            provenance: Provenance::parse(f[6])?,
            tolerance: num(f[7])?,
            pass: match f[8] {
                "pass" => true,
                "fail" => false,
                _ => return Err(Error::config("pass column must be pass or fail")),
            },
            seed: f[9]
                .parse()
                .map_err(|_| Error::config(format!("results.csv row {}: bad seed", i + 2)))?,
        });
    }
    Ok(rows)
}

/// Maps a check id to the verified claim it covers; the report groups by
/// these names so every claim's coverage is visible at a glance.
pub fn claim_for(check_id: &str) -> &'static str {
    let base = check_id.strip_prefix("diag-").unwrap_or(check_id);
    let head = base.split("--").next().unwrap_or(base);
    match head {
        "free-field" | "kernel-power" => "heat-kernel baseline",
        "calibration" => "confluent determinant constant",
        "fk-det" => "distinct-endpoint determinant kernel",
        "confluent-mc" => "confluent determinant cross-method",
        "gt-ratio" | "interlace" | "gt-factorization" => "interlacing-volume reconstruction",
        "layer-residual" | "s-evolution" => "layer evolution equations",
        "rayleigh" => "local-time Rayleigh law",
        "second-moment" => "pair local-time second moment",
        "cm-shift" => "deterministic-shift expectation",
        "ratio-identity" => "confluent ratio identity",
        "flow" => "two-segment flow composition",
        "noise-replay" | "noise-moments" => "noise stream reproducibility",
        "line-ensemble" => "layer positivity diagnostics",
        "polymer" => "lattice-path determinant",
        "rsk" => "reflection symmetry",
        _ => "uncategorized",
    }
}

/// One `ledger.json` entry per layer index.
#[derive(Debug, Clone, Serialize)]
pub struct LedgerEntry {
    pub name: String,
    pub n: usize,
    pub t: f64,
    pub printed_value: f64,
    pub calibrated_value: f64,
    pub orientation_sign: f64,
    pub probe_count: usize,
}

pub fn write_artifacts(
    out_dir: &Path,
    rows: &[ResultRow],
    timings: &[(String, f64)],
    ledger: &[LedgerEntry],
    resolved_config: &str,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::config(format!("cannot create {}: {e}", out_dir.display())))?;
    let write = |name: &str, body: &str| -> Result<()> {
        std::fs::write(out_dir.join(name), body)
            .map_err(|e| Error::config(format!("cannot write {name}: {e}")))
    };
    write("results.csv", &results_csv(rows))?;
    let mut tim = String::from("check_id,wall_time_s\n");
    for (id, secs) in timings {
        tim.push_str(&format!("{},{:.3}\n", id, secs));
    }
    write("timings.csv", &tim)?;
    let json = serde_json::to_string_pretty(ledger)
        .map_err(|e| Error::config(format!("ledger serialization failed: {e}")))?;
    write("ledger.json", &json)?;
    write("resolved_config.txt", resolved_config)?;
    write("plot_results.py", PLOT_SCRIPT)?;
    Ok(())
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Bar chart of normalized deviations per check, grouped by claim."""
import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "results.csv"
rows = list(csv.DictReader(open(path)))
groups = defaultdict(list)
for r in rows:
    tol = float(r["tolerance"])
    dev = abs(float(r["value"]) - float(r["reference_value"]))
    groups[r["check_id"].split("--")[0]].append(dev / tol if tol else 0.0)

labels = sorted(groups)
vals = [max(groups[k]) for k in labels]
fig, ax = plt.subplots(figsize=(10, 4))
ax.bar(range(len(labels)), vals)
ax.axhline(1.0, color="red", linestyle="--", label="tolerance")
ax.set_xticks(range(len(labels)))
ax.set_xticklabels(labels, rotation=45, ha="right")
ax.set_ylabel("max |value - reference| / tolerance")
ax.legend()
fig.tight_layout()
fig.savefig("results.png", dpi=150)
print("wrote results.png")
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let rows = vec![ResultRow {
            experiment: "smooth-suite".into(),
            check_id: "free-field--max-rel".into(),
            quantity: "max relative error".into(),
            value: 3.25e-5,
            error_estimate: 0.0,
            reference_value: 0.0,
            provenance: Provenance::ClosedForm,
            tolerance: 1e-4,
            pass: true,
            seed: 7,
        }];
        let text = results_csv(&rows);
        let back = parse_results_csv(&text).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].value, 3.25e-5);
        assert_eq!(results_csv(&back), text);
    }

    #[test]
    fn claims_cover_all_prefixes() {
        for id in [
            "free-field--max-rel",
            "kernel-power--n2",
            "calibration--n2-spread",
            "fk-det--n2",
            "confluent-mc--n2",
            "gt-ratio--n3",
            "interlace--families",
            "layer-residual--n2",
            "s-evolution--ratio",
            "rayleigh--ks",
            "second-moment--t1",
            "cm-shift--det",
            "ratio-identity--decay",
            "flow--generic",
            "noise-replay--round-trip",
            "diag-line-ensemble--n2",
            "polymer--lgv-n2",
            "rsk--n3",
        ] {
            assert_ne!(claim_for(id), "uncategorized", "{id}");
        }
    }
}
