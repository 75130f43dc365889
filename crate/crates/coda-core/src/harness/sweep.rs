//! Experiment sweeps and result emission.
//!
//! A sweep rewrites one parameter uniformly across the whole application
//! (cpu demand or element size), holds the other fixed, runs every selected
//! algorithm at every point and evaluates both objectives. Rows keep a
//! deterministic (algorithm, value) order so emitted files are byte-stable.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::baselines::{cloudpath, heft_oc, rtr_rp};
use crate::harness::Scenario;
use crate::matching::{staged_coda, MatchRunConfig};
use crate::metrics::evaluate;
use crate::model::{Matching, MicroserviceId, ResourceId};
use crate::ranking::RankingMode;
use crate::units;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Coda,
    HeftOc,
    RtrRp,
    Cloudpath,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] =
        [Algorithm::Coda, Algorithm::HeftOc, Algorithm::RtrRp, Algorithm::Cloudpath];

    pub fn parse(name: &str) -> Option<Algorithm> {
        match name {
            "coda" => Some(Algorithm::Coda),
            "heft_oc" => Some(Algorithm::HeftOc),
            "rtr_rp" => Some(Algorithm::RtrRp),
            "cloudpath" => Some(Algorithm::Cloudpath),
            _ => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Coda => f.write_str("coda"),
            Algorithm::HeftOc => f.write_str("heft_oc"),
            Algorithm::RtrRp => f.write_str("rtr_rp"),
            Algorithm::Cloudpath => f.write_str("cloudpath"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Varies the uniform cpu demand (MI); holds the element size fixed.
    Cpu,
    /// Varies the uniform element size (bits); holds the cpu demand fixed.
    Data,
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepKind::Cpu => f.write_str("cpu"),
            SweepKind::Data => f.write_str("data"),
        }
    }
}

/// One experiment axis: the swept values plus the held-constant parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub kind: SweepKind,
    /// Swept values: MI for cpu sweeps, bits for data sweeps.
    pub values: Vec<f64>,
    /// The fixed other parameter: bits for cpu sweeps, MI for data sweeps.
    pub fixed: f64,
}

impl Sweep {
    pub fn validate(&self) -> Result<(), String> {
        if self.values.is_empty() {
            return Err("sweep needs at least one value".into());
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err("sweep values must be strictly increasing".into());
        }
        Ok(())
    }

    /// The cpu experiment: demand 10000..40000 MI, elements fixed at 10 MB.
    pub fn cpu_default() -> Sweep {
        Sweep {
            kind: SweepKind::Cpu,
            values: vec![10_000.0, 20_000.0, 30_000.0, 40_000.0],
            fixed: units::megabytes_to_bits(10.0),
        }
    }

    /// The data experiment: elements 0.1..10 MB, demand fixed at 15000 MI.
    pub fn data_default() -> Sweep {
        Sweep {
            kind: SweepKind::Data,
            values: vec![0.1, 1.0, 5.0, 10.0].into_iter().map(units::megabytes_to_bits).collect(),
            fixed: 15_000.0,
        }
    }

    fn apply(&self, scenario: &Scenario, value: f64) -> Scenario {
        let mut s = scenario.clone();
        match self.kind {
            SweepKind::Cpu => {
                s.application.set_uniform_cpu_demand(value);
                s.application.set_uniform_element_size(self.fixed);
            }
            SweepKind::Data => {
                s.application.set_uniform_element_size(value);
                s.application.set_uniform_cpu_demand(self.fixed);
            }
        }
        s
    }
}

/// One (algorithm, sweep value) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algorithm: Algorithm,
    pub sweep_kind: SweepKind,
    pub sweep_value: f64,
    pub completion_time_s: Option<f64>,
    pub total_traffic: Option<f64>,
    /// Stability verdict; only the matching game reports one.
    pub stable: Option<bool>,
    pub placements: BTreeMap<MicroserviceId, ResourceId>,
    /// Set when the algorithm or the evaluation failed at this point.
    pub error: Option<String>,
}

/// Runs every algorithm at every sweep point. Failures (no feasible resource,
/// unplaced microservices, missing channels) mark their row and the sweep
/// continues.
pub fn run_sweep(
    scenario: &Scenario,
    sweep: &Sweep,
    algorithms: &[Algorithm],
    mode: RankingMode,
) -> Vec<ResultRow> {
    debug_assert!(sweep.validate().is_ok(), "{:?}", sweep.validate());
    let mut rows = Vec::new();
    let mut algorithms: Vec<Algorithm> = algorithms.to_vec();
    algorithms.sort();
    algorithms.dedup();
    for &algorithm in &algorithms {
        for &value in &sweep.values {
            let point = sweep.apply(scenario, value);
            rows.push(run_point(&point, algorithm, sweep, value, mode));
        }
    }
    rows
}

fn run_point(
    s: &Scenario,
    algorithm: Algorithm,
    sweep: &Sweep,
    value: f64,
    mode: RankingMode,
) -> ResultRow {
    let mut row = ResultRow {
        algorithm,
        sweep_kind: sweep.kind,
        sweep_value: value,
        completion_time_s: None,
        total_traffic: None,
        stable: None,
        placements: BTreeMap::new(),
        error: None,
    };
    let matching: Result<Matching, String> = match algorithm {
        Algorithm::Coda => {
            let cfg = MatchRunConfig::with_mode(mode);
            match staged_coda(&s.application, &s.topology, &s.gateway, &cfg) {
                Ok(outcome) => {
                    row.stable = Some(outcome.verify().stable);
                    Ok(outcome.matching)
                }
                Err(e) => Err(e.to_string()),
            }
        }
        Algorithm::HeftOc => heft_oc(&s.application, &s.topology, &s.gateway).map_err(|e| e.to_string()),
        Algorithm::RtrRp => rtr_rp(&s.application, &s.topology, &s.gateway).map_err(|e| e.to_string()),
        Algorithm::Cloudpath => cloudpath(&s.application, &s.topology, &s.gateway).map_err(|e| e.to_string()),
    };
    match matching {
        Ok(m) => {
            row.placements = m.assignment.clone();
            match evaluate(&s.application, &s.topology, &m, &s.gateway) {
                Ok(report) => {
                    row.completion_time_s = Some(report.completion_time);
                    row.total_traffic = Some(report.total_traffic);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
        }
        Err(e) => row.error = Some(e),
    }
    row
}

/// CSV emission: fixed header, one row per result, deterministic order and
/// formatting. Failed rows leave their numeric cells empty.
pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("algorithm,sweep_kind,sweep_value,completion_time_s,total_traffic,stable\n");
    for r in rows {
        let opt = |v: &Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        let stable = r.stable.map(|b| b.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.algorithm,
            r.sweep_kind,
            r.sweep_value,
            opt(&r.completion_time_s),
            opt(&r.total_traffic),
            stable
        ));
    }
    out
}

/// JSON emission: an array of row objects.
pub fn to_json(rows: &[ResultRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows always serialize")
}

/// Writes rows in the requested format.
pub fn emit_results(rows: &[ResultRow], format: &str, mut out: impl Write) -> std::io::Result<()> {
    let text = match format {
        "json" => to_json(rows),
        _ => to_csv(rows),
    };
    out.write_all(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::load_scenario_str;

    fn scenario() -> Scenario {
        let doc = serde_json::json!({
            "resources": [
                {"id": "gw", "tier": "fog1", "cpu_mips": 20000.0, "mem_mb": 8000.0, "stor_gb": 16.0, "capacity": 4},
                {"id": "fog2", "tier": "fog2", "cpu_mips": 75000.0, "mem_mb": 32000.0, "stor_gb": 128.0, "capacity": 4},
                {"id": "cloud", "tier": "cloud", "cpu_mips": 100000.0, "mem_mb": 128000.0, "stor_gb": 1200.0, "capacity": 8}
            ],
            "channels": [
                {"from": "gw", "to": "fog2", "bandwidth_mbps": 500.0, "latency_ms": 10.0, "symmetric": true},
                {"from": "gw", "to": "cloud", "bandwidth_mbps": 200.0, "latency_ms": 100.0, "symmetric": true},
                {"from": "fog2", "to": "cloud", "bandwidth_mbps": 200.0, "latency_ms": 50.0, "symmetric": true}
            ],
            "application": {
                "microservices": [
                    {"id": "a", "cpu_mi": 35000.0, "mem_mb": 400.0, "stor_gb": 3.0},
                    {"id": "b", "cpu_mi": 15000.0, "mem_mb": 200.0, "stor_gb": 1.5}
                ],
                "edges": [
                    {"from": "a", "to": "b", "element_sizes_mb": [10.0], "rate_per_s": 2.0}
                ],
                "src_stream": {"element_sizes_mb": [10.0], "rate_per_s": 1.0}
            },
            "source": "a",
            "sink": "b",
            "src_gateway": "gw"
        });
        load_scenario_str(&doc.to_string()).unwrap()
    }

    #[test]
    fn sixteen_rows_for_four_algorithms_by_four_values() {
        let rows = run_sweep(&scenario(), &Sweep::cpu_default(), &Algorithm::ALL, RankingMode::Staged);
        assert_eq!(rows.len(), 16);
        let csv = to_csv(&rows);
        assert_eq!(csv.lines().count(), 17, "header plus one line per row");
        for r in &rows {
            assert!(r.error.is_none(), "{:?} failed: {:?}", r.algorithm, r.error);
        }
    }

    #[test]
    fn data_sweep_also_yields_full_grid() {
        let rows = run_sweep(&scenario(), &Sweep::data_default(), &Algorithm::ALL, RankingMode::Staged);
        assert_eq!(rows.len(), 16);
    }

    #[test]
    fn empty_algorithm_list_is_vacuous() {
        let rows = run_sweep(&scenario(), &Sweep::cpu_default(), &[], RankingMode::Staged);
        assert!(rows.is_empty());
        assert_eq!(to_csv(&rows).lines().count(), 1);
    }

    #[test]
    fn json_rows_roundtrip() {
        let rows = run_sweep(&scenario(), &Sweep::cpu_default(), &[Algorithm::Coda], RankingMode::Staged);
        let json = to_json(&rows);
        let back: Vec<ResultRow> = serde_json::from_str(&json).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn failed_rows_are_marked_and_the_sweep_continues() {
        // No cloud tier at all: heft_oc fails per point while the others run.
        let doc = serde_json::json!({
            "resources": [
                {"id": "gw", "tier": "fog1", "cpu_mips": 20000.0, "mem_mb": 8000.0, "stor_gb": 16.0, "capacity": 4}
            ],
            "channels": [],
            "application": {
                "microservices": [{"id": "a", "cpu_mi": 15000.0, "mem_mb": 100.0, "stor_gb": 1.0}],
                "edges": [],
                "src_stream": {"element_sizes_mb": [1.0], "rate_per_s": 1.0}
            },
            "source": "a",
            "sink": "a",
            "src_gateway": "gw"
        });
        let s = load_scenario_str(&doc.to_string()).unwrap();
        let rows = run_sweep(&s, &Sweep::cpu_default(), &[Algorithm::Coda, Algorithm::HeftOc], RankingMode::Staged);
        assert_eq!(rows.len(), 8);
        for r in &rows {
            match r.algorithm {
                Algorithm::HeftOc => {
                    assert!(r.error.is_some());
                    assert!(r.completion_time_s.is_none());
                }
                _ => assert!(r.error.is_none()),
            }
        }
        // Failed rows leave their numeric CSV cells empty.
        let csv = to_csv(&rows);
        assert!(csv.lines().any(|l| l.starts_with("heft_oc,cpu,10000,,,")));
    }

    #[test]
    fn sweep_values_must_increase() {
        let bad = Sweep { kind: SweepKind::Cpu, values: vec![2.0, 1.0], fixed: 1.0 };
        assert!(bad.validate().is_err());
        assert!(Sweep::cpu_default().validate().is_ok());
    }
}
