//! Objective functions evaluated over a complete placement.
//!
//! Completion time follows the DAG recursion: a microservice finishes when
//! its slowest upstream has finished and it has received and processed its
//! own worst stream on its placed resource. Joins need no extra barrier cost;
//! the max over upstreams is the barrier. Total streaming traffic sums, over
//! every stream (including the application input), the ingress traffic
//! divided by the bandwidth of the carrying channel; co-located endpoints
//! ride the infinite-bandwidth self-channel and contribute zero.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    topological_order, Matching, MicroserviceId, ModelError, ResourceId, StreamApplication,
    Topology,
};
use crate::ranking::microservice_stream_time;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("microservice `{0}` has no placement")]
    UnplacedMicroservice(MicroserviceId),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One stream's traffic contribution. `upstream` is `None` for the
/// application input stream entering the source microservice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTraffic {
    pub upstream: Option<MicroserviceId>,
    pub downstream: MicroserviceId,
    pub traffic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Completion time of the sink microservice, in seconds.
    pub completion_time: f64,
    /// Dimensionless sum of per-stream channel utilisation.
    pub total_traffic: f64,
    pub per_microservice_completion: BTreeMap<MicroserviceId, f64>,
    pub per_edge_traffic: Vec<EdgeTraffic>,
}

fn placement<'a>(
    matching: &'a Matching,
    m: &MicroserviceId,
) -> Result<&'a ResourceId, EvalError> {
    matching.resource_of(m).ok_or_else(|| EvalError::UnplacedMicroservice(m.clone()))
}

/// Per-microservice completion times, evaluated in topological order.
///
/// The source is charged its input stream over the channel from the gateway;
/// every other microservice is charged the worst of its incoming streams over
/// the channels from its upstreams' placed resources, on top of its slowest
/// upstream completion.
pub fn completion_time(
    app: &StreamApplication,
    topology: &Topology,
    matching: &Matching,
    gateway: &ResourceId,
) -> Result<BTreeMap<MicroserviceId, f64>, EvalError> {
    let mut done: BTreeMap<MicroserviceId, f64> = BTreeMap::new();
    for m_id in topological_order(app) {
        let m = app.microservice(&m_id).expect("topological order covers the application");
        let r_id = placement(matching, &m_id)?;
        let r = topology.resource(r_id).ok_or(ModelError::UnknownResource(r_id.clone()))?;

        let (ready, own_time) = if &m_id == app.source_id() {
            let ch = topology.channel_between(gateway, r_id)?;
            (0.0, microservice_stream_time(m, app.src_stream(), r, &ch))
        } else {
            let mut ready = 0.0f64;
            let mut worst = 0.0f64;
            for e in app.incoming(&m_id) {
                let q_id = placement(matching, &e.from)?;
                let ch = topology.channel_between(q_id, r_id)?;
                worst = worst.max(microservice_stream_time(m, &e.stream, r, &ch));
                ready = ready.max(done[&e.from]);
            }
            (ready, worst)
        };
        done.insert(m_id, ready + own_time);
    }
    Ok(done)
}

/// Per-stream channel utilisation under a fixed placement.
pub fn total_streaming_traffic(
    app: &StreamApplication,
    topology: &Topology,
    matching: &Matching,
    gateway: &ResourceId,
) -> Result<Vec<EdgeTraffic>, EvalError> {
    let mut out = Vec::new();
    let source_res = placement(matching, app.source_id())?;
    let src_ch = topology.channel_between(gateway, source_res)?;
    out.push(EdgeTraffic {
        upstream: None,
        downstream: app.source_id().clone(),
        traffic: utilisation(app.src_stream().ingress_traffic(), src_ch.bandwidth),
    });
    for e in app.edges() {
        let q = placement(matching, &e.from)?;
        let j = placement(matching, &e.to)?;
        let ch = topology.channel_between(q, j)?;
        out.push(EdgeTraffic {
            upstream: Some(e.from.clone()),
            downstream: e.to.clone(),
            traffic: utilisation(e.stream.ingress_traffic(), ch.bandwidth),
        });
    }
    Ok(out)
}

fn utilisation(ingress: f64, bandwidth: f64) -> f64 {
    if bandwidth.is_infinite() {
        0.0
    } else {
        ingress / bandwidth
    }
}

/// Evaluates both objectives for a complete placement.
pub fn evaluate(
    app: &StreamApplication,
    topology: &Topology,
    matching: &Matching,
    gateway: &ResourceId,
) -> Result<EvaluationReport, EvalError> {
    let per_microservice_completion = completion_time(app, topology, matching, gateway)?;
    let per_edge_traffic = total_streaming_traffic(app, topology, matching, gateway)?;
    Ok(EvaluationReport {
        completion_time: per_microservice_completion[app.sink_id()],
        total_traffic: per_edge_traffic.iter().map(|e| e.traffic).sum(),
        per_microservice_completion,
        per_edge_traffic,
    })
}
