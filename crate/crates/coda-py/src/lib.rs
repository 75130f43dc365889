//! Python bindings: load or generate scenarios, run the matching game and
//! the baseline schedulers, evaluate placements, and sweep experiments from
//! Python without shelling out to the CLI.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use coda_core::baselines;
use coda_core::harness::{
    self, generate_scenario, load_scenario, load_scenario_str, Algorithm, GenParams, Sweep,
};
use coda_core::matching::{staged_coda, MatchRunConfig};
use coda_core::metrics;
use coda_core::model::Matching;
use coda_core::ranking::RankingMode;

fn parse_mode(mode: &str) -> PyResult<RankingMode> {
    match mode {
        "staged" => Ok(RankingMode::Staged),
        "static" => Ok(RankingMode::Static),
        other => Err(PyValueError::new_err(format!("unknown mode `{other}`"))),
    }
}

/// Result of one placement run.
#[pyclass(frozen)]
struct PlacementResult {
    matching: Matching,
    stable: Option<bool>,
    algorithm: String,
}

#[pymethods]
impl PlacementResult {
    /// Microservice id -> resource id.
    #[getter]
    fn assignment(&self) -> BTreeMap<String, String> {
        self.matching.assignment.iter().map(|(m, r)| (m.0.clone(), r.0.clone())).collect()
    }

    /// Resource id -> held microservices, best residual bandwidth first.
    #[getter]
    fn alloc(&self) -> BTreeMap<String, Vec<String>> {
        self.matching
            .alloc
            .iter()
            .filter(|(_, l)| !l.is_empty())
            .map(|(r, l)| (r.0.clone(), l.iter().map(|e| e.microservice.0.clone()).collect()))
            .collect()
    }

    #[getter]
    fn unplaced(&self) -> Vec<String> {
        self.matching.unplaced.iter().map(|m| m.0.clone()).collect()
    }

    /// Transition log lines (`<step> <STATE> <microservice> <resource>`).
    #[getter]
    fn trace(&self) -> Vec<String> {
        self.matching.trace.iter().map(ToString::to_string).collect()
    }

    /// Stability verdict; None for the baseline schedulers.
    #[getter]
    fn stable(&self) -> Option<bool> {
        self.stable
    }

    #[getter]
    fn algorithm(&self) -> &str {
        &self.algorithm
    }

    fn __repr__(&self) -> String {
        format!(
            "PlacementResult(algorithm={:?}, placed={}, unplaced={})",
            self.algorithm,
            self.matching.assignment.len(),
            self.matching.unplaced.len()
        )
    }
}

/// A validated scenario: application DAG, resource topology and gateway.
#[pyclass(frozen)]
struct Scenario {
    inner: harness::Scenario,
    doc_json: String,
}

impl Scenario {
    fn from_doc_json(json: String) -> PyResult<Self> {
        let inner = load_scenario_str(&json).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Scenario { inner, doc_json: json })
    }

    fn baseline(
        &self,
        name: &str,
        run: impl Fn(
            &coda_core::model::StreamApplication,
            &coda_core::model::Topology,
            &coda_core::model::ResourceId,
        ) -> Result<Matching, baselines::BaselineError>,
    ) -> PyResult<PlacementResult> {
        let matching = run(&self.inner.application, &self.inner.topology, &self.inner.gateway)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PlacementResult { matching, stable: None, algorithm: name.to_owned() })
    }
}

#[pymethods]
impl Scenario {
    /// Load a scenario document from a JSON file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| PyValueError::new_err(format!("cannot read {path}: {e}")))?;
        let inner = load_scenario(path).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Scenario { inner, doc_json: json })
    }

    /// Parse a scenario document from a JSON string.
    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        Scenario::from_doc_json(json.to_owned())
    }

    /// Deterministically generate a random scenario.
    #[staticmethod]
    #[pyo3(signature = (seed, microservices=7, resources=5))]
    fn generate(seed: u64, microservices: usize, resources: usize) -> PyResult<Self> {
        if microservices < 1 || resources < 1 {
            return Err(PyValueError::new_err("need at least one microservice and one resource"));
        }
        let params = GenParams {
            n_microservices: microservices,
            n_resources: resources,
            ..Default::default()
        };
        let doc = generate_scenario(seed, &params);
        let json = serde_json::to_string_pretty(&doc)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Scenario::from_doc_json(json)
    }

    /// The scenario document as JSON.
    fn to_json(&self) -> &str {
        &self.doc_json
    }

    #[getter]
    fn microservice_ids(&self) -> Vec<String> {
        self.inner.application.microservice_ids().map(|m| m.0.clone()).collect()
    }

    #[getter]
    fn resource_ids(&self) -> Vec<String> {
        self.inner.topology.resource_ids().map(|r| r.0.clone()).collect()
    }

    #[getter]
    fn source(&self) -> String {
        self.inner.application.source_id().0.clone()
    }

    #[getter]
    fn sink(&self) -> String {
        self.inner.application.sink_id().0.clone()
    }

    #[getter]
    fn gateway(&self) -> String {
        self.inner.gateway.0.clone()
    }

    /// Run the two-sided matching game; `mode` is "staged" or "static".
    #[pyo3(signature = (mode="staged"))]
    fn place(&self, mode: &str) -> PyResult<PlacementResult> {
        let cfg = MatchRunConfig::with_mode(parse_mode(mode)?);
        let outcome =
            staged_coda(&self.inner.application, &self.inner.topology, &self.inner.gateway, &cfg)
                .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(PlacementResult {
            stable: Some(outcome.verify().stable),
            matching: outcome.matching,
            algorithm: "coda".to_owned(),
        })
    }

    /// HEFT restricted to cloud-tier resources.
    fn heft_oc(&self) -> PyResult<PlacementResult> {
        self.baseline("heft_oc", baselines::heft_oc)
    }

    /// Greedy fog-first placement with the sink pinned to the cloud.
    fn rtr_rp(&self) -> PyResult<PlacementResult> {
        self.baseline("rtr_rp", baselines::rtr_rp)
    }

    /// Bottom-up tier search.
    fn cloudpath(&self) -> PyResult<PlacementResult> {
        self.baseline("cloudpath", baselines::cloudpath)
    }

    /// Evaluate a complete placement: completion time and streaming traffic.
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        result: &PlacementResult,
    ) -> PyResult<Bound<'py, PyDict>> {
        let report = metrics::evaluate(
            &self.inner.application,
            &self.inner.topology,
            &result.matching,
            &self.inner.gateway,
        )
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let out = PyDict::new(py);
        out.set_item("completion_time_s", report.completion_time)?;
        out.set_item("total_traffic", report.total_traffic)?;
        let per_ms = PyDict::new(py);
        for (m, c) in &report.per_microservice_completion {
            per_ms.set_item(&m.0, c)?;
        }
        out.set_item("per_microservice_completion", per_ms)?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(microservices={}, resources={}, gateway={:?})",
            self.inner.application.len(),
            self.inner.topology.len(),
            self.inner.gateway.0
        )
    }
}

/// Run an experiment sweep; returns one dict per (algorithm, value) row.
#[pyfunction]
#[pyo3(signature = (scenario, kind="cpu", algorithms=None, mode="staged"))]
fn run_sweep<'py>(
    py: Python<'py>,
    scenario: &Scenario,
    kind: &str,
    algorithms: Option<Vec<String>>,
    mode: &str,
) -> PyResult<Bound<'py, PyList>> {
    let sweep = match kind {
        "cpu" => Sweep::cpu_default(),
        "data" => Sweep::data_default(),
        other => return Err(PyValueError::new_err(format!("unknown sweep kind `{other}`"))),
    };
    let algorithms = match algorithms {
        None => Algorithm::ALL.to_vec(),
        Some(names) => names
            .iter()
            .map(|n| {
                Algorithm::parse(n)
                    .ok_or_else(|| PyValueError::new_err(format!("unknown algorithm `{n}`")))
            })
            .collect::<PyResult<Vec<_>>>()?,
    };
    let rows = harness::run_sweep(&scenario.inner, &sweep, &algorithms, parse_mode(mode)?);
    let list = PyList::empty(py);
    for row in rows {
        let d = PyDict::new(py);
        d.set_item("algorithm", row.algorithm.to_string())?;
        d.set_item("sweep_kind", row.sweep_kind.to_string())?;
        d.set_item("sweep_value", row.sweep_value)?;
        d.set_item("completion_time_s", row.completion_time_s)?;
        d.set_item("total_traffic", row.total_traffic)?;
        d.set_item("stable", row.stable)?;
        d.set_item("error", row.error)?;
        let placements = PyDict::new(py);
        for (m, r) in &row.placements {
            placements.set_item(&m.0, &r.0)?;
        }
        d.set_item("placements", placements)?;
        list.append(d)?;
    }
    Ok(list)
}

/// Sweep rows rendered as the deterministic CSV the CLI emits.
#[pyfunction]
#[pyo3(signature = (scenario, kind="cpu", mode="staged"))]
fn sweep_csv(scenario: &Scenario, kind: &str, mode: &str) -> PyResult<String> {
    let sweep = match kind {
        "cpu" => Sweep::cpu_default(),
        "data" => Sweep::data_default(),
        other => return Err(PyValueError::new_err(format!("unknown sweep kind `{other}`"))),
    };
    let rows = harness::run_sweep(&scenario.inner, &sweep, &Algorithm::ALL, parse_mode(mode)?);
    Ok(harness::to_csv(&rows))
}

#[pymodule]
fn coda_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<PlacementResult>()?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_csv, m)?)?;
    Ok(())
}
