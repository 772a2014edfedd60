//! Experiment configuration files.
//!
//! The file is TOML with seven optional sections. Every key has a default, so
//! an empty file is a valid configuration; unknown keys are errors.
//!
//! ```toml
//! [scenario]
//! uav_position = [0.0, 0.0, 100.0]   # meters
//! ue_center = [0.0, 0.0]             # meters, ground disk center
//! ue_radius_m = 200.0
//! fc_hz = 28e9
//! element_spacing_wl = 0.5           # grid is the near-square factorization of K
//! feed_offset_m = 0.25
//!
//! [channel]
//! rician_factor_db = 5.0
//! link_budget = "normalized"         # or "physical" (free-space path gain)
//! n0_mw_per_hz = 0.001
//! bandwidth_hz = 20e6                # per resource block
//!
//! [system]
//! k = [32]                           # element count(s); a bare integer also works
//! n = 10                             # users
//! m = 10                             # resource blocks, n <= m
//! arch = "fully"                     # single | group | fully (BD-RIS framework)
//! groups = 1                         # L, read when arch = "group"
//! mode = "transmissive"              # reflective | transmissive | hybrid
//!
//! [power]
//! pt_dbm = [20.0, 25.0, 30.0]
//!
//! [optimizer]
//! inner_max_iters = 200
//! outer_max_iters = 50
//! inner_rel_tol = 1e-6
//! outer_rel_tol = 1e-5
//! armijo_init_step = 1.0
//! armijo_shrink = 0.5
//! armijo_slope = 1e-4
//! armijo_max_backtracks = 30
//! waterfill_tol = 1e-9
//!
//! [experiment]
//! realizations = 100                 # user positions and fading redrawn each time
//! base_seed = 0
//! frameworks = ["bd-ris", "d-ris"]
//! workers = 0                        # 0 = one per CPU
//! record_timing = false              # wall_ms column is 0 unless enabled
//!
//! [output]
//! csv = "results.csv"
//! plot = "se_vs_k.svg"
//! ```

use std::path::PathBuf;

use bdris_core::channel::{ElementGrid, LinkBudget, ScenarioConfig};
use bdris_core::optimizer::{Armijo, OptimOptions};
use bdris_core::ris::{ArchKind, Architecture, Mode};
use serde::{Deserialize, Serialize};

use crate::error::{ConfigIssue, HarnessError, Result};

/// Which surface model a result row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Framework {
    /// Beyond-diagonal surface with the configured architecture.
    BdRis,
    /// Conventional diagonal surface.
    DRis,
}

impl Framework {
    pub fn name(self) -> &'static str {
        match self {
            Framework::BdRis => "bd-ris",
            Framework::DRis => "d-ris",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bd-ris" => Some(Framework::BdRis),
            "d-ris" => Some(Framework::DRis),
            _ => None,
        }
    }
}

pub fn arch_name(kind: ArchKind) -> &'static str {
    match kind {
        ArchKind::SingleConnected => "single",
        ArchKind::GroupConnected => "group",
        ArchKind::FullyConnected => "fully",
    }
}

pub fn parse_arch(s: &str) -> Option<ArchKind> {
    match s {
        "single" => Some(ArchKind::SingleConnected),
        "group" => Some(ArchKind::GroupConnected),
        "fully" => Some(ArchKind::FullyConnected),
        _ => None,
    }
}

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Reflective => "reflective",
        Mode::Transmissive => "transmissive",
        Mode::Hybrid => "hybrid",
    }
}

pub fn parse_mode(s: &str) -> Option<Mode> {
    match s {
        "reflective" => Some(Mode::Reflective),
        "transmissive" => Some(Mode::Transmissive),
        "hybrid" => Some(Mode::Hybrid),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub k_values: Vec<usize>,
    pub n: usize,
    pub m: usize,
    pub arch: ArchKind,
    pub groups: usize,
    pub mode: Mode,
}

impl SystemConfig {
    /// The BD-RIS architecture for `k` elements.
    pub fn architecture(&self, k: usize) -> Result<Architecture> {
        Ok(Architecture::for_elements(self.arch, self.groups, k)?)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputPaths {
    pub csv: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

/// A validated experiment definition.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Scenario template; the element grid is rebuilt per `K`.
    pub scenario: ScenarioConfig,
    pub system: SystemConfig,
    pub pt_dbm: Vec<f64>,
    pub optimizer: OptimOptions,
    pub realizations: usize,
    pub base_seed: u64,
    pub frameworks: Vec<Framework>,
    pub workers: usize,
    pub record_timing: bool,
    pub output: OutputPaths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        parse_config("").expect("defaults are valid")
    }
}

impl ExperimentConfig {
    /// Scenario for a surface of `k` elements.
    pub fn scenario_for(&self, k: usize) -> ScenarioConfig {
        ScenarioConfig { grid: ElementGrid::near_square(k, self.scenario.grid.spacing_wl), ..self.scenario.clone() }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&RawConfig::from(self)).expect("configuration serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawScenario {
    uav_position: [f64; 3],
    ue_center: [f64; 2],
    ue_radius_m: f64,
    fc_hz: f64,
    element_spacing_wl: f64,
    feed_offset_m: f64,
}

impl Default for RawScenario {
    fn default() -> Self {
        let s = ScenarioConfig::default();
        Self {
            uav_position: s.uav_position,
            ue_center: s.ue_center,
            ue_radius_m: s.ue_radius,
            fc_hz: s.fc_hz,
            element_spacing_wl: s.grid.spacing_wl,
            feed_offset_m: s.feed_offset_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawChannel {
    rician_factor_db: f64,
    link_budget: String,
    n0_mw_per_hz: f64,
    bandwidth_hz: f64,
}

impl Default for RawChannel {
    fn default() -> Self {
        let s = ScenarioConfig::default();
        Self {
            rician_factor_db: s.rician_factor_db,
            link_budget: "normalized".into(),
            n0_mw_per_hz: s.n0_mw_per_hz,
            bandwidth_hz: s.bandwidth_hz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSystem {
    k: OneOrMany<usize>,
    n: usize,
    m: usize,
    arch: String,
    groups: usize,
    mode: String,
}

impl Default for RawSystem {
    fn default() -> Self {
        Self {
            k: OneOrMany::Many(vec![32]),
            n: 10,
            m: 10,
            arch: "fully".into(),
            groups: 1,
            mode: "transmissive".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawPower {
    pt_dbm: OneOrMany<f64>,
}

impl Default for RawPower {
    fn default() -> Self {
        Self { pt_dbm: OneOrMany::Many(vec![20.0, 25.0, 30.0]) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOptimizer {
    inner_max_iters: usize,
    outer_max_iters: usize,
    inner_rel_tol: f64,
    outer_rel_tol: f64,
    armijo_init_step: f64,
    armijo_shrink: f64,
    armijo_slope: f64,
    armijo_max_backtracks: usize,
    waterfill_tol: f64,
}

impl Default for RawOptimizer {
    fn default() -> Self {
        Self::from(&OptimOptions::default())
    }
}

impl From<&OptimOptions> for RawOptimizer {
    fn from(o: &OptimOptions) -> Self {
        Self {
            inner_max_iters: o.inner_max_iters,
            outer_max_iters: o.outer_max_iters,
            inner_rel_tol: o.inner_rel_tol,
            outer_rel_tol: o.outer_rel_tol,
            armijo_init_step: o.armijo.init_step,
            armijo_shrink: o.armijo.shrink,
            armijo_slope: o.armijo.slope,
            armijo_max_backtracks: o.armijo.max_backtracks,
            waterfill_tol: o.waterfill_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawExperiment {
    realizations: usize,
    base_seed: u64,
    frameworks: Vec<String>,
    workers: usize,
    record_timing: bool,
}

impl Default for RawExperiment {
    fn default() -> Self {
        Self {
            realizations: 100,
            base_seed: 0,
            frameworks: vec!["bd-ris".into(), "d-ris".into()],
            workers: 0,
            record_timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    plot: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    scenario: RawScenario,
    channel: RawChannel,
    system: RawSystem,
    power: RawPower,
    optimizer: RawOptimizer,
    experiment: RawExperiment,
    output: RawOutput,
}

impl From<&ExperimentConfig> for RawConfig {
    fn from(c: &ExperimentConfig) -> Self {
        let s = &c.scenario;
        RawConfig {
            scenario: RawScenario {
                uav_position: s.uav_position,
                ue_center: s.ue_center,
                ue_radius_m: s.ue_radius,
                fc_hz: s.fc_hz,
                element_spacing_wl: s.grid.spacing_wl,
                feed_offset_m: s.feed_offset_m,
            },
            channel: RawChannel {
                rician_factor_db: s.rician_factor_db,
                link_budget: match s.link_budget {
                    LinkBudget::Normalized => "normalized".into(),
                    LinkBudget::Physical => "physical".into(),
                },
                n0_mw_per_hz: s.n0_mw_per_hz,
                bandwidth_hz: s.bandwidth_hz,
            },
            system: RawSystem {
                k: OneOrMany::Many(c.system.k_values.clone()),
                n: c.system.n,
                m: c.system.m,
                arch: arch_name(c.system.arch).into(),
                groups: c.system.groups,
                mode: mode_name(c.system.mode).into(),
            },
            power: RawPower { pt_dbm: OneOrMany::Many(c.pt_dbm.clone()) },
            optimizer: RawOptimizer::from(&c.optimizer),
            experiment: RawExperiment {
                realizations: c.realizations,
                base_seed: c.base_seed,
                frameworks: c.frameworks.iter().map(|f| f.name().to_string()).collect(),
                workers: c.workers,
                record_timing: c.record_timing,
            },
            output: RawOutput { csv: c.output.csv.clone(), plot: c.output.plot.clone() },
        }
    }
}

/// 1-based line of `key` inside `[section]`, if it appears in `text`.
fn line_of(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = "";
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim();
            continue;
        }
        if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn line_at_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

struct Issues<'a> {
    text: &'a str,
    list: Vec<ConfigIssue>,
}

impl Issues<'_> {
    fn push(&mut self, section: &str, key: &str, message: impl Into<String>) {
        let line = line_of(self.text, section, key);
        self.list.push(ConfigIssue { line, message: format!("[{section}] {key}: {}", message.into()) });
    }

    fn require(&mut self, ok: bool, section: &str, key: &str, message: &str) {
        if !ok {
            self.push(section, key, message);
        }
    }
}

/// Parses and validates a configuration file, filling defaults.
///
/// All problems are collected; the error lists every one of them with the
/// line it refers to.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_at_offset(text, s.start));
        HarnessError::Config(vec![ConfigIssue { line, message: e.message().trim().to_string() }])
    })?;
    let mut issues = Issues { text, list: Vec::new() };

    let link_budget = match raw.channel.link_budget.as_str() {
        "normalized" => LinkBudget::Normalized,
        "physical" => LinkBudget::Physical,
        other => {
            issues.push("channel", "link_budget", format!("unknown link budget `{other}` (normalized | physical)"));
            LinkBudget::Normalized
        }
    };
    let arch = parse_arch(&raw.system.arch).unwrap_or_else(|| {
        issues.push("system", "arch", format!("unknown architecture `{}` (single | group | fully)", raw.system.arch));
        ArchKind::FullyConnected
    });
    let mode = parse_mode(&raw.system.mode).unwrap_or_else(|| {
        issues.push(
            "system",
            "mode",
            format!("unknown mode `{}` (reflective | transmissive | hybrid)", raw.system.mode),
        );
        Mode::Transmissive
    });
    let mut frameworks = Vec::new();
    for name in &raw.experiment.frameworks {
        match Framework::parse(name) {
            Some(f) if !frameworks.contains(&f) => frameworks.push(f),
            Some(_) => issues.push("experiment", "frameworks", format!("`{name}` listed twice")),
            None => issues.push("experiment", "frameworks", format!("unknown framework `{name}` (bd-ris | d-ris)")),
        }
    }
    issues.require(!frameworks.is_empty(), "experiment", "frameworks", "at least one framework is required");
    issues.require(raw.experiment.realizations >= 1, "experiment", "realizations", "must be at least 1");

    let k_values = raw.system.k.to_vec();
    issues.require(!k_values.is_empty(), "system", "k", "at least one element count is required");
    issues.require(k_values.iter().all(|&k| k >= 1), "system", "k", "element counts must be positive");
    issues.require(raw.system.n >= 1, "system", "n", "at least one user is required");
    issues.require(raw.system.n <= raw.system.m, "system", "n", "more users than resource blocks (need n <= m)");
    if arch == ArchKind::GroupConnected {
        for &k in k_values.iter().filter(|&&k| k >= 1) {
            match Architecture::for_elements(arch, raw.system.groups, k) {
                Ok(_) => {}
                Err(bdris_core::Error::GroupSize { k, groups }) => issues.push(
                    "system",
                    "groups",
                    format!("group size not integral: K = {k} is not divisible by L = {groups}"),
                ),
                Err(e) => issues.push("system", "groups", format!("K = {k}: {e}")),
            }
        }
    }

    let pt_dbm = raw.power.pt_dbm.to_vec();
    issues.require(!pt_dbm.is_empty(), "power", "pt_dbm", "at least one transmit power is required");
    issues.require(pt_dbm.iter().all(|p| p.is_finite()), "power", "pt_dbm", "powers must be finite");

    let sc = &raw.scenario;
    let ch = &raw.channel;
    issues.require(sc.ue_radius_m > 0.0 && sc.ue_radius_m.is_finite(), "scenario", "ue_radius_m", "must be positive");
    issues.require(sc.fc_hz > 0.0 && sc.fc_hz.is_finite(), "scenario", "fc_hz", "must be positive");
    issues.require(sc.element_spacing_wl > 0.0, "scenario", "element_spacing_wl", "must be positive");
    issues.require(
        sc.feed_offset_m > 0.0 && sc.feed_offset_m.is_finite(),
        "scenario",
        "feed_offset_m",
        "must be positive",
    );
    issues.require(
        sc.uav_position.iter().all(|v| v.is_finite()) && sc.uav_position[2] > 0.0,
        "scenario",
        "uav_position",
        "must be finite with positive altitude",
    );
    issues.require(sc.ue_center.iter().all(|v| v.is_finite()), "scenario", "ue_center", "must be finite");
    issues.require(!ch.rician_factor_db.is_nan(), "channel", "rician_factor_db", "must be a number");
    issues.require(ch.n0_mw_per_hz > 0.0 && ch.n0_mw_per_hz.is_finite(), "channel", "n0_mw_per_hz", "must be positive");
    issues.require(ch.bandwidth_hz > 0.0 && ch.bandwidth_hz.is_finite(), "channel", "bandwidth_hz", "must be positive");

    let o = &raw.optimizer;
    let optimizer = OptimOptions {
        inner_max_iters: o.inner_max_iters,
        outer_max_iters: o.outer_max_iters,
        inner_rel_tol: o.inner_rel_tol,
        outer_rel_tol: o.outer_rel_tol,
        armijo: Armijo {
            init_step: o.armijo_init_step,
            shrink: o.armijo_shrink,
            slope: o.armijo_slope,
            max_backtracks: o.armijo_max_backtracks,
        },
        waterfill_tol: o.waterfill_tol,
    };
    for (key, v) in [
        ("inner_rel_tol", o.inner_rel_tol),
        ("outer_rel_tol", o.outer_rel_tol),
        ("waterfill_tol", o.waterfill_tol),
        ("armijo_init_step", o.armijo_init_step),
    ] {
        issues.require(v > 0.0 && v.is_finite(), "optimizer", key, "must be positive");
    }
    issues.require(o.armijo_shrink > 0.0 && o.armijo_shrink < 1.0, "optimizer", "armijo_shrink", "must lie in (0, 1)");
    issues.require(o.armijo_slope > 0.0 && o.armijo_slope < 1.0, "optimizer", "armijo_slope", "must lie in (0, 1)");

    if !issues.list.is_empty() {
        return Err(HarnessError::Config(issues.list));
    }

    let scenario = ScenarioConfig {
        uav_position: sc.uav_position,
        ue_center: sc.ue_center,
        ue_radius: sc.ue_radius_m,
        num_ues: raw.system.n,
        fc_hz: sc.fc_hz,
        rician_factor_db: ch.rician_factor_db,
        link_budget,
        grid: ElementGrid::near_square(k_values[0], sc.element_spacing_wl),
        feed_offset_m: sc.feed_offset_m,
        n0_mw_per_hz: ch.n0_mw_per_hz,
        bandwidth_hz: ch.bandwidth_hz,
    };
    Ok(ExperimentConfig {
        scenario,
        system: SystemConfig { k_values, n: raw.system.n, m: raw.system.m, arch, groups: raw.system.groups, mode },
        pt_dbm,
        optimizer,
        realizations: raw.experiment.realizations,
        base_seed: raw.experiment.base_seed,
        frameworks,
        workers: raw.experiment.workers,
        record_timing: raw.experiment.record_timing,
        output: OutputPaths { csv: raw.output.csv, plot: raw.output.plot },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn issues(text: &str) -> Vec<ConfigIssue> {
        match parse_config(text) {
            Err(HarnessError::Config(list)) => list,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c.system.k_values, vec![32]);
        assert_eq!((c.system.n, c.system.m), (10, 10));
        assert_eq!(c.pt_dbm, vec![20.0, 25.0, 30.0]);
        assert_eq!(c.realizations, 100);
        assert_eq!(c.scenario.rician_factor_db, 5.0);
        assert_eq!(c.scenario.fc_hz, 28e9);
        assert_eq!(c.scenario.noise_power_mw(), 1e-3 * 20e6);
        assert_eq!(c.scenario.link_budget, LinkBudget::Normalized);
        assert_eq!(c.system.arch, ArchKind::FullyConnected);
        assert_eq!(c.system.mode, Mode::Transmissive);
        assert_eq!(c.frameworks, vec![Framework::BdRis, Framework::DRis]);
        assert_eq!(c.optimizer, OptimOptions::default());
    }

    #[test]
    fn group_size_must_divide_k() {
        let text = "[system]\nk = 30\narch = \"group\"\ngroups = 4\n";
        let list = issues(text);
        assert_eq!(list.len(), 1);
        assert!(list[0].message.contains("group size not integral"), "{}", list[0]);
        assert_eq!(list[0].line, Some(4));
    }

    #[test]
    fn unknown_keys_are_errors_with_lines() {
        let list = issues("[system]\nn = 4\nbogus = 1\n");
        assert_eq!(list.len(), 1);
        assert_eq!(list[0].line, Some(3));
        assert!(list[0].message.contains("bogus"));
        let list = issues("[nonsense]\nx = 1\n");
        assert_eq!(list[0].line, Some(1));
    }

    #[test]
    fn malformed_syntax_is_reported() {
        let list = issues("[system\nk = 3");
        assert_eq!(list.len(), 1);
        assert!(list[0].line.is_some());
    }

    #[test]
    fn every_violation_is_listed() {
        let text = "[system]\nn = 12\nm = 10\nmode = \"sideways\"\n\n[experiment]\nrealizations = 0\n";
        let list = issues(text);
        assert_eq!(list.len(), 3, "{list:?}");
        let lines: Vec<_> = list.iter().map(|i| i.line).collect();
        assert!(lines.contains(&Some(2)) && lines.contains(&Some(4)) && lines.contains(&Some(7)));
    }

    #[test]
    fn scalar_and_list_forms() {
        let c = parse_config("[system]\nk = 16\n[power]\npt_dbm = 27.5\n").unwrap();
        assert_eq!(c.system.k_values, vec![16]);
        assert_eq!(c.pt_dbm, vec![27.5]);
        assert_eq!(c.scenario_for(24).grid.elements(), 24);
    }

    #[test]
    fn serialized_config_reparses_identically() {
        let text = "[system]\nk = [8, 16]\narch = \"group\"\ngroups = 2\nmode = \"hybrid\"\n\
                    [channel]\nlink_budget = \"physical\"\nrician_factor_db = 7.5\n\
                    [output]\ncsv = \"out.csv\"\n";
        let c = parse_config(text).unwrap();
        let again = parse_config(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }
}
