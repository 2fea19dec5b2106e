//! Per-iteration means with normal-approximation 95% confidence intervals.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::harness::session::SessionRecord;
use crate::metrics::MetricsReport;

pub const AGGREGATE_HEADER: &str =
    "iteration,n,dice_mean,dice_ci,nsd_mean,nsd_ci,asd_mean,asd_ci,hd95_mean,hd95_ci,ratio_mean";
pub const SUMMARY_HEADER: &str = "sessions,failed,dice_mean,nsd_mean,asd_mean,hd95_mean,success_rate";

/// Which metrics a table is built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    WholeVolume,
    AnnotatedSlices,
}

impl Scope {
    fn pick(self, m: &MetricsReport) -> Option<&MetricsReport> {
        match self {
            Scope::WholeVolume => Some(m),
            Scope::AnnotatedSlices => m.annotated_slices_only.as_deref(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub iteration: usize,
    pub n: usize,
    pub dice: (f64, f64),
    pub nsd: (f64, f64),
    pub asd: (f64, f64),
    pub hd95: (f64, f64),
    pub ratio_mean: f64,
}

/// Mean and 95% half-width `1.96 · s / √n` (sample standard deviation; 0 for n = 1).
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// One row per iteration over all sessions that did not fail. Sessions that
/// stopped early contribute their last entry to later iterations.
pub fn aggregate(records: &[SessionRecord], iterations: usize, scope: Scope) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for k in 0..iterations {
        let entries: Vec<_> = records
            .iter()
            .filter(|r| !r.failed())
            .filter_map(|r| r.at_iteration(k))
            .filter_map(|it| scope.pick(&it.metrics).cloned().map(|m| (m, it.prompt_volume_ratio)))
            .collect();
        if entries.is_empty() {
            continue;
        }
        let col = |f: fn(&MetricsReport) -> f64| mean_ci(&entries.iter().map(|(m, _)| f(m)).collect::<Vec<_>>());
        rows.push(AggregateRow {
            iteration: k,
            n: entries.len(),
            dice: col(|m| m.dice),
            nsd: col(|m| m.nsd),
            asd: col(|m| m.asd_mm),
            hd95: col(|m| m.hd95_mm),
            ratio_mean: entries.iter().map(|(_, r)| r).sum::<f64>() / entries.len() as f64,
        });
    }
    rows
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut s = format!("{AGGREGATE_HEADER}\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.iteration, r.n, r.dice.0, r.dice.1, r.nsd.0, r.nsd.1, r.asd.0, r.asd.1, r.hd95.0, r.hd95.1, r.ratio_mean
        )
        .unwrap();
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub sessions: usize,
    pub failed: usize,
    /// Means at the final iteration over sessions that did not fail.
    pub dice: f64,
    pub nsd: f64,
    pub asd: f64,
    pub hd95: f64,
    /// Fraction of all sessions whose best Dice reached the success bar.
    pub success_rate: f64,
}

pub fn summarize(records: &[SessionRecord], iterations: usize) -> Summary {
    let finals: Vec<MetricsReport> = records
        .iter()
        .filter(|r| !r.failed())
        .filter_map(|r| r.at_iteration(iterations.saturating_sub(1)))
        .map(|it| it.metrics)
        .collect();
    let mean = |f: fn(&MetricsReport) -> f64| finals.iter().map(f).sum::<f64>() / finals.len() as f64;
    Summary {
        sessions: records.len(),
        failed: records.iter().filter(|r| r.failed()).count(),
        dice: mean(|m| m.dice),
        nsd: mean(|m| m.nsd),
        asd: mean(|m| m.asd_mm),
        hd95: mean(|m| m.hd95_mm),
        success_rate: records.iter().filter(|r| r.success).count() as f64 / records.len().max(1) as f64,
    }
}

pub fn summary_csv(s: &Summary) -> String {
    format!(
        "{SUMMARY_HEADER}\n{},{},{},{},{},{},{}\n",
        s.sessions, s.failed, s.dice, s.nsd, s.asd, s.hd95, s.success_rate
    )
}

pub fn records_to_ndjson(records: &[SessionRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("records serialize"));
        s.push('\n');
    }
    s
}

pub fn records_from_ndjson(text: &str) -> Result<Vec<SessionRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| Error::Config(format!("session record line {}: {e}", n + 1))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_ci_by_hand() {
        let (m, ci) = mean_ci(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // s² = 5/3, sem = sqrt(5/12)
        assert!((ci - 1.96 * (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_ci(&[0.7]), (0.7, 0.0));
    }
}
