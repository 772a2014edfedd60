//! Monte-Carlo execution and the results table.

use std::io::{Read, Write};
use std::time::Instant;

use bdris_core::channel::{sample_scenario, synth_channels, ChannelSet};
use bdris_core::optimizer::{alternate, alternate_diagonal, Solution};
use bdris_core::ris::{ArchKind, Architecture, Mode, Side};
use rayon::prelude::*;

use crate::config::{arch_name, mode_name, parse_arch, parse_mode, ExperimentConfig, Framework};
use crate::error::{HarnessError, Result};

pub const CSV_HEADER: [&str; 11] =
    ["framework", "arch", "mode", "K", "L", "pt_dbm", "seed", "se_bps_hz", "outer_iters", "stalled", "wall_ms"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Converged,
    Stalled,
    /// The instance could not be solved; the row's SE is 0 and is left out of summaries.
    Error,
}

impl RowStatus {
    fn as_str(self) -> &'static str {
        match self {
            RowStatus::Converged => "false",
            RowStatus::Stalled => "true",
            RowStatus::Error => "error",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "false" => Some(RowStatus::Converged),
            "true" => Some(RowStatus::Stalled),
            "error" => Some(RowStatus::Error),
            _ => None,
        }
    }
}

/// One (framework, K, P_t, realization) result.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub framework: Framework,
    pub arch: ArchKind,
    pub mode: Mode,
    pub k: usize,
    /// Number of groups.
    pub l: usize,
    pub pt_dbm: f64,
    pub realization: usize,
    pub seed: u64,
    pub se_bps_hz: f64,
    pub outer_iters: usize,
    pub status: RowStatus,
    pub wall_ms: f64,
    /// Outer SE trace; not persisted.
    pub trace: Vec<f64>,
    /// Failure message for error rows; not persisted.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsTable {
    pub rows: Vec<Row>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a word sequence.
pub fn seed_hash(words: &[u64]) -> u64 {
    words.iter().fold(0x6a09_e667_f3bc_c908, |acc, &w| splitmix(acc ^ splitmix(w)))
}

fn framework_tag(f: Framework) -> u64 {
    match f {
        Framework::BdRis => 1,
        Framework::DRis => 2,
    }
}

/// Optimizer seed of one row.
pub fn row_seed(base_seed: u64, framework: Framework, k: usize, pt_dbm: f64, r: usize) -> u64 {
    seed_hash(&[base_seed, framework_tag(framework), k as u64, pt_dbm.to_bits(), r as u64])
}

/// User positions depend only on the realization, fading also on `K`; both
/// are shared by every framework and power.
fn channel_seeds(base_seed: u64, k: usize, r: usize) -> (u64, u64) {
    (seed_hash(&[base_seed, 0x5c, r as u64]), seed_hash(&[base_seed, 0xfa, k as u64, r as u64]))
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

fn channels_for(cfg: &ExperimentConfig, k: usize, r: usize) -> bdris_core::Result<ChannelSet> {
    let scn_cfg = cfg.scenario_for(k);
    let (pos_seed, fade_seed) = channel_seeds(cfg.base_seed, k, r);
    let scn = sample_scenario(&scn_cfg, pos_seed)?;
    let side = if cfg.system.mode == Mode::Reflective { Side::Reflect } else { Side::Transmit };
    Ok(synth_channels(&scn, &scn_cfg, fade_seed)?.with_sides_all(side))
}

struct Task {
    framework: Framework,
    k: usize,
    pt_dbm: f64,
    r: usize,
}

fn run_task(cfg: &ExperimentConfig, t: &Task) -> Row {
    let seed = row_seed(cfg.base_seed, t.framework, t.k, t.pt_dbm, t.r);
    let mode = cfg.system.mode;
    let (arch, l) = match t.framework {
        Framework::BdRis => {
            let l = cfg.system.architecture(t.k).map(|a| a.num_groups()).unwrap_or(0);
            (cfg.system.arch, l)
        }
        Framework::DRis => (ArchKind::SingleConnected, t.k),
    };
    let start = Instant::now();
    let solved: bdris_core::Result<Solution> = channels_for(cfg, t.k, t.r).and_then(|ch| {
        let budget = dbm_to_mw(t.pt_dbm);
        match t.framework {
            Framework::BdRis => {
                let a = Architecture::for_elements(cfg.system.arch, cfg.system.groups, t.k)?;
                alternate(&ch, budget, a, mode, &cfg.optimizer, seed)
            }
            Framework::DRis => alternate_diagonal(&ch, budget, mode, &cfg.optimizer, seed),
        }
    });
    let wall_ms = if cfg.record_timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    let mut row = Row {
        framework: t.framework,
        arch,
        mode,
        k: t.k,
        l,
        pt_dbm: t.pt_dbm,
        realization: t.r,
        seed,
        se_bps_hz: 0.0,
        outer_iters: 0,
        status: RowStatus::Error,
        wall_ms,
        trace: Vec::new(),
        error: None,
    };
    match solved {
        Ok(sol) if sol.se.is_finite() && sol.se >= 0.0 => {
            row.se_bps_hz = sol.se;
            row.outer_iters = sol.outer_iters;
            row.status = if sol.stalled { RowStatus::Stalled } else { RowStatus::Converged };
            row.trace = sol.trace.iter().map(|&(_, se)| se).collect();
        }
        Ok(sol) => row.error = Some(format!("non-finite spectral efficiency {}", sol.se)),
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Runs every (framework, K, P_t, realization) cell.
///
/// Rows are returned sorted by framework, K, P_t and realization, so the
/// table does not depend on `workers` or scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    cfg.optimizer.validate()?;
    let mut tasks = Vec::new();
    for &framework in &cfg.frameworks {
        for &k in &cfg.system.k_values {
            for &pt_dbm in &cfg.pt_dbm {
                for r in 0..cfg.realizations {
                    tasks.push(Task { framework, k, pt_dbm, r });
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| HarnessError::Input(format!("cannot start worker pool: {e}")))?;
    let mut rows: Vec<Row> = pool.install(|| tasks.par_iter().map(|t| run_task(cfg, t)).collect());
    rows.sort_by(|a, b| {
        (a.framework, a.k)
            .cmp(&(b.framework, b.k))
            .then(a.pt_dbm.total_cmp(&b.pt_dbm))
            .then(a.realization.cmp(&b.realization))
    });
    Ok(ResultsTable { rows })
}

/// `%.9g` formatting.
pub fn fmt_g9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

impl ResultsTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.framework.name().to_string(),
                arch_name(r.arch).to_string(),
                mode_name(r.mode).to_string(),
                r.k.to_string(),
                r.l.to_string(),
                fmt_g9(r.pt_dbm),
                r.seed.to_string(),
                fmt_g9(r.se_bps_hz),
                r.outer_iters.to_string(),
                r.status.as_str().to_string(),
                fmt_g9(r.wall_ms),
            ])?;
        }
        w.flush().map_err(|e| HarnessError::Io { path: "<csv>".into(), source: e })?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Reads a table written by [`ResultsTable::write_csv`]. Traces and
    /// realization indices are not stored; rows are numbered in file order.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if header != CSV_HEADER {
            return Err(HarnessError::Input(format!("unexpected CSV header: {}", header.join(","))));
        }
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let bad = |col: &str| HarnessError::Input(format!("CSV line {line}: invalid {col} `{}`", field(&rec, col)));
            let num = |col: &str| field(&rec, col).parse::<f64>().map_err(|_| bad(col));
            let int = |col: &str| field(&rec, col).parse::<u64>().map_err(|_| bad(col));
            rows.push(Row {
                framework: Framework::parse(field(&rec, "framework")).ok_or_else(|| bad("framework"))?,
                arch: parse_arch(field(&rec, "arch")).ok_or_else(|| bad("arch"))?,
                mode: parse_mode(field(&rec, "mode")).ok_or_else(|| bad("mode"))?,
                k: int("K")? as usize,
                l: int("L")? as usize,
                pt_dbm: num("pt_dbm")?,
                realization: i,
                seed: int("seed")?,
                se_bps_hz: num("se_bps_hz")?,
                outer_iters: int("outer_iters")? as usize,
                status: RowStatus::parse(field(&rec, "stalled")).ok_or_else(|| bad("stalled"))?,
                wall_ms: num("wall_ms")?,
                trace: Vec::new(),
                error: None,
            });
        }
        Ok(Self { rows })
    }
}

fn field<'a>(rec: &'a csv::StringRecord, col: &str) -> &'a str {
    let idx = CSV_HEADER.iter().position(|c| *c == col).expect("known column");
    rec.get(idx).unwrap_or("")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn g9_formatting() {
        assert_eq!(fmt_g9(0.0), "0");
        assert_eq!(fmt_g9(1.0), "1");
        assert_eq!(fmt_g9(30.0), "30");
        assert_eq!(fmt_g9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_g9(123456.789012), "123456.789");
        assert_eq!(fmt_g9(1.5e-7), "1.5e-07");
        assert_eq!(fmt_g9(2.0e12), "2e+12");
        assert_eq!(fmt_g9(-0.25), "-0.25");
        assert_eq!(fmt_g9(999999999.5), "1e+09");
        assert_eq!(fmt_g9(0.0001), "0.0001");
    }

    #[test]
    fn seeds_depend_on_every_coordinate() {
        let s = row_seed(0, Framework::BdRis, 8, 20.0, 0);
        assert_ne!(s, row_seed(1, Framework::BdRis, 8, 20.0, 0));
        assert_ne!(s, row_seed(0, Framework::DRis, 8, 20.0, 0));
        assert_ne!(s, row_seed(0, Framework::BdRis, 16, 20.0, 0));
        assert_ne!(s, row_seed(0, Framework::BdRis, 8, 25.0, 0));
        assert_ne!(s, row_seed(0, Framework::BdRis, 8, 20.0, 1));
        assert_eq!(s, row_seed(0, Framework::BdRis, 8, 20.0, 0));
    }

    #[test]
    fn one_realization_gives_one_row_per_framework() {
        let cfg = parse_config("[system]\nk = 4\n[power]\npt_dbm = 30\n[experiment]\nrealizations = 1\n").unwrap();
        let t = run_experiment(&cfg).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows.iter().all(|r| r.status != RowStatus::Error && r.se_bps_hz > 0.0));
    }

    #[test]
    fn csv_round_trip() {
        let cfg = parse_config(
            "[system]\nk = [4, 6]\narch = \"group\"\ngroups = 2\n[power]\npt_dbm = [20, 30]\n\
             [experiment]\nrealizations = 2\n",
        )
        .unwrap();
        let t = run_experiment(&cfg).unwrap();
        assert_eq!(t.rows.len(), 16);
        let text = t.to_csv_string();
        assert!(text.starts_with("framework,arch,mode,K,L,pt_dbm,seed,se_bps_hz,outer_iters,stalled,wall_ms\n"));
        let back = ResultsTable::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back.to_csv_string(), text);
        let bd = &back.rows[0];
        assert_eq!((bd.framework, bd.arch, bd.l), (Framework::BdRis, ArchKind::GroupConnected, 2));
        let d = back.rows.iter().find(|r| r.framework == Framework::DRis).unwrap();
        assert_eq!((d.arch, d.l), (ArchKind::SingleConnected, d.k));
    }

    #[test]
    fn bad_csv_is_rejected() {
        assert!(ResultsTable::read_csv("a,b\n1,2\n".as_bytes()).is_err());
        let text = format!("{}\nbd-ris,fully,transmissive,x,1,30,0,1,1,false,0\n", CSV_HEADER.join(","));
        let err = ResultsTable::read_csv(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("K"), "{err}");
    }
}
