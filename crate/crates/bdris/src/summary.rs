//! Per-cell statistics over realizations.

use std::collections::BTreeMap;

use bdris_core::ris::{ArchKind, Mode};

use crate::config::{arch_name, mode_name, Framework};
use crate::experiment::{ResultsTable, RowStatus};

/// 97.5% standard normal quantile.
const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub framework: Framework,
    pub arch: ArchKind,
    pub mode: Mode,
    pub k: usize,
    pub l: usize,
    pub pt_dbm: f64,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; `None` for a single realization.
    pub std: Option<f64>,
    /// Half-width of the normal-approximation 95% interval; `None` for a single realization.
    pub ci95: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    /// Cells left out because none of their rows produced a result.
    pub warnings: Vec<String>,
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    framework: Framework,
    k: usize,
    pt_bits: OrdF64,
    arch: ArchKind,
    mode: Mode,
    l: usize,
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct OrdF64(i64);

impl OrdF64 {
    fn new(x: f64) -> Self {
        let b = x.to_bits() as i64;
        Self(b ^ (((b >> 63) as u64) >> 1) as i64)
    }
}

/// Groups rows by (framework, arch, mode, K, L, P_t) and reduces error-free
/// rows to mean, standard deviation and 95% interval.
pub fn summarize(tbl: &ResultsTable) -> Summary {
    let mut cells: BTreeMap<Key, (usize, Vec<f64>)> = BTreeMap::new();
    for (i, r) in tbl.rows.iter().enumerate() {
        let key =
            Key { framework: r.framework, k: r.k, pt_bits: OrdF64::new(r.pt_dbm), arch: r.arch, mode: r.mode, l: r.l };
        let cell = cells.entry(key).or_insert_with(|| (i, Vec::new()));
        if r.status != RowStatus::Error {
            cell.1.push(r.se_bps_hz);
        }
    }
    let mut out = Summary::default();
    for (_, (first, values)) in cells {
        let r = &tbl.rows[first];
        if values.is_empty() {
            out.warnings.push(format!(
                "no successful realization for {} {} {} K={} L={} pt={} dBm; cell excluded",
                r.framework.name(),
                arch_name(r.arch),
                mode_name(r.mode),
                r.k,
                r.l,
                r.pt_dbm
            ));
            continue;
        }
        let (mean, std) = mean_std(&values);
        out.rows.push(SummaryRow {
            framework: r.framework,
            arch: r.arch,
            mode: r.mode,
            k: r.k,
            l: r.l,
            pt_dbm: r.pt_dbm,
            count: values.len(),
            mean,
            std,
            ci95: std.map(|s| Z_975 * s / (values.len() as f64).sqrt()),
        });
    }
    out
}

fn mean_std(v: &[f64]) -> (f64, Option<f64>) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, None);
    }
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, Some((ss / (n - 1.0)).sqrt()))
}

impl Summary {
    pub fn find(&self, framework: Framework, k: usize, pt_dbm: f64) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.framework == framework && r.k == k && r.pt_dbm == pt_dbm)
    }

    /// Plain-text table for terminals.
    pub fn render(&self) -> String {
        let mut s = format!(
            "{:<8} {:<7} {:<13} {:>4} {:>4} {:>7} {:>5} {:>10} {:>10} {:>10}\n",
            "frame", "arch", "mode", "K", "L", "pt_dbm", "n", "mean", "std", "ci95"
        );
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        for r in &self.rows {
            s.push_str(&format!(
                "{:<8} {:<7} {:<13} {:>4} {:>4} {:>7} {:>5} {:>10.4} {:>10} {:>10}\n",
                r.framework.name(),
                arch_name(r.arch),
                mode_name(r.mode),
                r.k,
                r.l,
                r.pt_dbm,
                r.count,
                r.mean,
                opt(r.std),
                opt(r.ci95)
            ));
        }
        for w in &self.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::Row;

    fn row(framework: Framework, k: usize, pt: f64, se: f64, status: RowStatus) -> Row {
        Row {
            framework,
            arch: ArchKind::FullyConnected,
            mode: Mode::Transmissive,
            k,
            l: 1,
            pt_dbm: pt,
            realization: 0,
            seed: 0,
            se_bps_hz: se,
            outer_iters: 1,
            status,
            wall_ms: 0.0,
            trace: Vec::new(),
            error: None,
        }
    }

    fn table(rows: Vec<Row>) -> ResultsTable {
        ResultsTable { rows }
    }

    #[test]
    fn single_row_has_undefined_spread() {
        let s = summarize(&table(vec![row(Framework::BdRis, 8, 30.0, 3.25, RowStatus::Converged)]));
        assert_eq!(s.rows.len(), 1);
        assert_eq!(s.rows[0].mean, 3.25);
        assert_eq!(s.rows[0].std, None);
        assert_eq!(s.rows[0].ci95, None);
    }

    #[test]
    fn identical_rows_have_zero_std() {
        let rows = (0..2).map(|_| row(Framework::DRis, 8, 30.0, 2.5, RowStatus::Converged)).collect();
        let s = summarize(&table(rows));
        assert_eq!(s.rows[0].std, Some(0.0));
    }

    #[test]
    fn ten_and_twenty() {
        let rows = vec![
            row(Framework::BdRis, 8, 20.0, 10.0, RowStatus::Converged),
            row(Framework::BdRis, 8, 20.0, 20.0, RowStatus::Stalled),
        ];
        let s = summarize(&table(rows));
        let r = &s.rows[0];
        assert_eq!(r.mean, 15.0);
        assert!((r.std.unwrap() - 50f64.sqrt()).abs() < 1e-12);
        assert!((r.std.unwrap() - 7.071).abs() < 5e-4);
        assert!((r.ci95.unwrap() - Z_975 * 5.0).abs() < 1e-12);
    }

    #[test]
    fn error_rows_are_excluded() {
        let rows = vec![
            row(Framework::BdRis, 8, 20.0, 4.0, RowStatus::Converged),
            row(Framework::BdRis, 8, 20.0, 0.0, RowStatus::Error),
            row(Framework::DRis, 8, 20.0, 0.0, RowStatus::Error),
        ];
        let s = summarize(&table(rows));
        assert_eq!(s.rows.len(), 1);
        assert_eq!((s.rows[0].count, s.rows[0].mean), (1, 4.0));
        assert_eq!(s.warnings.len(), 1);
        assert!(s.warnings[0].contains("d-ris"));
    }

    #[test]
    fn cells_are_ordered() {
        let rows = vec![
            row(Framework::DRis, 8, 20.0, 1.0, RowStatus::Converged),
            row(Framework::BdRis, 16, 30.0, 1.0, RowStatus::Converged),
            row(Framework::BdRis, 16, -5.0, 1.0, RowStatus::Converged),
            row(Framework::BdRis, 8, 30.0, 1.0, RowStatus::Converged),
        ];
        let s = summarize(&table(rows));
        let keys: Vec<_> = s.rows.iter().map(|r| (r.framework, r.k, r.pt_dbm)).collect();
        assert_eq!(
            keys,
            vec![
                (Framework::BdRis, 8, 30.0),
                (Framework::BdRis, 16, -5.0),
                (Framework::BdRis, 16, 30.0),
                (Framework::DRis, 8, 20.0)
            ]
        );
    }
}
