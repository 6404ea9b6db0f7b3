//! Human-readable summary of a results directory: pass/fail counts
//! grouped by the verified claim, failing checks listed first.

use std::collections::BTreeMap;
use std::path::Path;

use mlshe_core::error::{Error, Result};

use crate::rows::{claim_for, parse_results_csv, ResultRow};

pub struct Summary {
    pub text: String,
    pub failures: usize,
}

pub fn summarize(rows: &[ResultRow]) -> Summary {
    let mut groups: BTreeMap<&'static str, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(claim_for(&r.check_id)).or_default().push(r);
    }
    let mut text = String::new();
    let mut failures = 0usize;

    let failing: Vec<&ResultRow> = rows.iter().filter(|r| !r.pass).collect();
    if !failing.is_empty() {
        text.push_str("FAILING CHECKS\n");
        for r in &failing {
            if !r.is_diagnostic() {
                failures += 1;
            }
            text.push_str(&format!(
                "  {}  value={} reference={} tolerance={}{}\n",
                r.check_id,
                r.value,
                r.reference_value,
                r.tolerance,
                if r.is_diagnostic() { "  [diagnostic]" } else { "" }
            ));
        }
        text.push('\n');
    }

    text.push_str("CLAIM COVERAGE\n");
    for (claim, members) in &groups {
        let pass = members.iter().filter(|r| r.pass).count();
        let status = if pass == members.len() { "ok" } else { "FAIL" };
        text.push_str(&format!(
            "  {:<42} {:>2}/{:<2} {}\n",
            claim,
            pass,
            members.len(),
            status
        ));
    }
    let total = rows.len();
    let passed = rows.iter().filter(|r| r.pass).count();
    text.push_str(&format!("\n{passed}/{total} checks passed\n"));
    Summary { text, failures }
}

pub fn report_dir(dir: &Path) -> Result<Summary> {
    let path = dir.join("results.csv");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    let rows = parse_results_csv(&text)?;
    if rows.is_empty() {
        return Err(Error::config("results.csv contains no rows"));
    }
    Ok(summarize(&rows))
}
