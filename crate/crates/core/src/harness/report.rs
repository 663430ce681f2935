//! Cumulative valid-URL curves and per-arm throughput summary.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use super::memorization::{Arm, UrlRecord};
use super::csv_field;

#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub arm: Arm,
    pub elapsed_s: f64,
    pub cumulative_valid_unique: usize,
    pub cumulative_valid_with_dupes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArmSummary {
    pub arm: Arm,
    pub records: usize,
    pub elapsed_s: f64,
    pub unique_valid: usize,
    pub valid_with_dupes: usize,
    pub duplicates: usize,
    pub well_formed: usize,
    /// Unique valid URLs per second.
    pub throughput: f64,
    /// `throughput` over the best baseline arm's throughput.
    pub ratio_vs_best_baseline: f64,
}

impl ArmSummary {
    pub fn duplicate_fraction(&self) -> f64 {
        if self.records == 0 {
            0.0
        } else {
            self.duplicates as f64 / self.records as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThroughputReport {
    pub rows: Vec<CurveRow>,
    pub summary: Vec<ArmSummary>,
}

/// Builds per-arm cumulative curves (records in emission order) and the
/// throughput summary. Expects validated records.
pub fn throughput_report(records: &[UrlRecord]) -> ThroughputReport {
    let mut by_arm: BTreeMap<Arm, Vec<&UrlRecord>> = BTreeMap::new();
    for r in records {
        by_arm.entry(r.arm).or_default().push(r);
    }

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (&arm, recs) in &by_arm {
        let mut recs = recs.clone();
        recs.sort_by_key(|r| r.emission_index);
        let mut seen: HashSet<&str> = HashSet::new();
        let (mut unique, mut with_dupes, mut dupes, mut well_formed) = (0, 0, 0, 0);
        for r in &recs {
            let first = seen.insert(r.url.as_str());
            if !first {
                dupes += 1;
            }
            if r.well_formed {
                well_formed += 1;
            }
            if r.valid {
                with_dupes += 1;
                if first {
                    unique += 1;
                }
            }
            rows.push(CurveRow {
                arm,
                elapsed_s: r.emitted_at,
                cumulative_valid_unique: unique,
                cumulative_valid_with_dupes: with_dupes,
            });
        }
        let elapsed = recs.last().map_or(0.0, |r| r.emitted_at);
        summary.push(ArmSummary {
            arm,
            records: recs.len(),
            elapsed_s: elapsed,
            unique_valid: unique,
            valid_with_dupes: with_dupes,
            duplicates: dupes,
            well_formed,
            throughput: rate(unique, elapsed),
            ratio_vs_best_baseline: 0.0,
        });
    }

    let best = summary
        .iter()
        .filter(|s| matches!(s.arm, Arm::Baseline(_)))
        .map(|s| s.throughput)
        .fold(f64::NAN, f64::max);
    for s in &mut summary {
        s.ratio_vs_best_baseline = if best.is_nan() {
            f64::NAN
        } else if best == 0.0 {
            if s.throughput > 0.0 { f64::INFINITY } else { f64::NAN }
        } else {
            s.throughput / best
        };
    }
    ThroughputReport { rows, summary }
}

fn rate(count: usize, elapsed: f64) -> f64 {
    if count == 0 {
        0.0
    } else if elapsed > 0.0 {
        count as f64 / elapsed
    } else {
        f64::INFINITY
    }
}

impl ThroughputReport {
    pub fn summary_for(&self, arm: Arm) -> Option<&ArmSummary> {
        self.summary.iter().find(|s| s.arm == arm)
    }

    pub fn curve_csv(&self) -> String {
        let mut out = String::from("arm,elapsed_s,cumulative_valid_unique,cumulative_valid_with_dupes\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.6},{},{}",
                r.arm, r.elapsed_s, r.cumulative_valid_unique, r.cumulative_valid_with_dupes
            );
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "arm,records,elapsed_s,unique_valid,valid_with_dupes,duplicates,duplicate_fraction,well_formed,unique_valid_per_s,ratio_vs_best_baseline\n",
        );
        for s in &self.summary {
            let _ = writeln!(
                out,
                "{},{},{:.6},{},{},{},{:.6},{},{:.6},{:.6}",
                s.arm,
                s.records,
                s.elapsed_s,
                s.unique_valid,
                s.valid_with_dupes,
                s.duplicates,
                s.duplicate_fraction(),
                s.well_formed,
                s.throughput,
                s.ratio_vs_best_baseline
            );
        }
        out
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::write(dir.join("throughput.csv"), self.curve_csv())?;
        fs::write(dir.join("throughput_summary.csv"), self.summary_csv())
    }
}

/// Every record, one row each.
pub fn records_csv(records: &[UrlRecord]) -> String {
    let mut out = String::from("arm,emission_index,emitted_at,url,well_formed,status,valid,duplicate\n");
    for r in records {
        let status = r.status.as_ref().map_or_else(String::new, |s| s.to_string());
        let _ = writeln!(
            out,
            "{},{},{:.6},{},{},{},{},{}",
            r.arm,
            r.emission_index,
            r.emitted_at,
            csv_field(&r.url),
            r.well_formed,
            status,
            r.valid,
            r.duplicate
        );
    }
    out
}
