//! Reference schedulers sharing the matching cost model.
//!
//! * [`heft_oc`]: list scheduling by upward rank, restricted to cloud-tier
//!   resources.
//! * [`rtr_rp`]: topological greedy on the fastest feasible resource,
//!   preferring fog tiers, with the sink pinned to the cloud.
//! * [`cloudpath`]: bottom-up tier search, taking the lowest tier that still
//!   has a feasible slot.
//!
//! All three produce [`Matching`] values with an empty trace; feasibility
//! (memory, storage, capacity, channel reachability) matches what the
//! preference tables enforce for the matching game.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{
    topological_order, Matching, Microservice, MicroserviceId, Resource, ResourceId,
    StreamApplication, Tier, Topology,
};
use crate::ranking::{microservice_stream_time, residual_bandwidth};

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("no feasible resource for microservice `{0}`")]
    NoFeasibleResource(MicroserviceId),
    #[error("the topology has no cloud-tier resource")]
    NoCloudResource,
}

struct Placer<'a> {
    app: &'a StreamApplication,
    topology: &'a Topology,
    gateway: &'a ResourceId,
    matching: Matching,
    used: BTreeMap<ResourceId, u32>,
}

impl<'a> Placer<'a> {
    fn new(app: &'a StreamApplication, topology: &'a Topology, gateway: &'a ResourceId) -> Self {
        Placer { app, topology, gateway, matching: Matching::default(), used: BTreeMap::new() }
    }

    fn fits(&self, m: &Microservice, r: &Resource) -> bool {
        let used = self.used.get(&r.id).copied().unwrap_or(0);
        used < r.capacity && m.mem_demand < r.mem && m.stor_demand < r.stor
    }

    /// Incoming streams of `m` with channel origins taken from placements
    /// already fixed (the source reads its input from the gateway).
    fn incoming_from_placed(
        &self,
        m_id: &MicroserviceId,
    ) -> Vec<(ResourceId, &'a crate::model::DataStream)> {
        if m_id == self.app.source_id() {
            return vec![(self.gateway.clone(), self.app.src_stream())];
        }
        self.app
            .incoming(m_id)
            .map(|e| {
                let q = self
                    .matching
                    .resource_of(&e.from)
                    .expect("topological placement fixes upstreams first")
                    .clone();
                (q, &e.stream)
            })
            .collect()
    }

    /// Worst stream time for `m` on `r`, or None when some upstream channel
    /// is missing.
    fn stream_time_on(&self, m: &Microservice, r: &Resource) -> Option<f64> {
        let mut worst = 0.0f64;
        for (q, stream) in self.incoming_from_placed(&m.id) {
            let ch = self.topology.channel_between(&q, &r.id).ok()?;
            worst = worst.max(microservice_stream_time(m, stream, r, &ch));
        }
        Some(worst)
    }

    /// Residual bandwidth of `m`'s heaviest ingress stream on `r`, used to
    /// keep allocation lists ordered the same way the matching game does.
    fn residual_on(&self, m_id: &MicroserviceId, r: &ResourceId) -> f64 {
        let incoming = self.incoming_from_placed(m_id);
        let worst = incoming
            .iter()
            .max_by(|a, b| {
                a.1.ingress_traffic().partial_cmp(&b.1.ingress_traffic()).expect("never NaN")
            })
            .expect("every microservice has an incoming stream");
        match self.topology.channel_between(&worst.0, r) {
            Ok(ch) => residual_bandwidth(worst.1, &ch),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn place(&mut self, m_id: &MicroserviceId, r_id: &ResourceId) {
        let residual = self.residual_on(m_id, r_id);
        self.matching.insert_allocation(r_id, m_id.clone(), residual);
        *self.used.entry(r_id.clone()).or_insert(0) += 1;
    }

    /// Fastest feasible resource for `m` among `pool`, ties by ascending id.
    fn best_in<'p>(
        &self,
        m: &Microservice,
        pool: impl Iterator<Item = &'p Resource>,
    ) -> Option<(ResourceId, f64)> {
        let mut best: Option<(ResourceId, f64)> = None;
        for r in pool {
            if !self.fits(m, r) {
                continue;
            }
            let Some(t) = self.stream_time_on(m, r) else { continue };
            let better = match &best {
                None => true,
                Some((_, bt)) => t < *bt,
            };
            if better {
                best = Some((r.id.clone(), t));
            }
        }
        best
    }
}

/// HEFT restricted to the cloud tier: microservices are ordered by upward
/// rank (mean compute plus mean inter-cloud transfer along the heaviest
/// downstream path) and greedily assigned to the cloud resource with the
/// earliest finish time under the shared completion model.
pub fn heft_oc(
    app: &StreamApplication,
    topology: &Topology,
    gateway: &ResourceId,
) -> Result<Matching, BaselineError> {
    let clouds: Vec<&Resource> = topology.resources().filter(|r| r.tier == Tier::Cloud).collect();
    if clouds.is_empty() {
        return Err(BaselineError::NoCloudResource);
    }
    let mean_speed =
        clouds.iter().map(|r| r.cpu_speed).sum::<f64>() / clouds.len() as f64;

    // Mean channel between distinct cloud resources; a single cloud node
    // communicates with itself for free.
    let mut pair_bw = Vec::new();
    let mut pair_lat = Vec::new();
    for q in &clouds {
        for j in &clouds {
            if q.id == j.id {
                continue;
            }
            if let Ok(ch) = topology.channel_between(&q.id, &j.id) {
                pair_bw.push(ch.bandwidth);
                pair_lat.push(ch.latency);
            }
        }
    }
    let mean_bw = mean(&pair_bw);
    let mean_lat = mean(&pair_lat);

    // Mean compute cost of a microservice: worst incoming stream, mean speed.
    let work = |m_id: &MicroserviceId| -> f64 {
        let m = app.microservice(m_id).unwrap();
        let elements = if m_id == app.source_id() {
            app.src_stream().size()
        } else {
            app.incoming(m_id).map(|e| e.stream.size()).max().unwrap_or(1)
        };
        elements as f64 * m.cpu_demand / mean_speed
    };
    // Mean transfer cost of a stream between two distinct cloud nodes.
    let comm = |stream: &crate::model::DataStream| -> f64 {
        match mean_bw {
            Some(bw) => stream.total_bits() / bw + stream.size() as f64 * mean_lat.unwrap_or(0.0),
            None => 0.0,
        }
    };

    let mut upward: BTreeMap<MicroserviceId, f64> = BTreeMap::new();
    for m_id in topological_order(app).into_iter().rev() {
        let downstream = app
            .outgoing(&m_id)
            .map(|e| comm(&e.stream) + upward[&e.to])
            .fold(0.0f64, f64::max);
        upward.insert(m_id.clone(), work(&m_id) + downstream);
    }
    let mut order: Vec<MicroserviceId> = app.microservice_ids().cloned().collect();
    order.sort_by(|a, b| {
        upward[b].partial_cmp(&upward[a]).expect("ranks are never NaN").then(a.cmp(b))
    });

    let mut placer = Placer::new(app, topology, gateway);
    let mut finish: BTreeMap<MicroserviceId, f64> = BTreeMap::new();
    for m_id in order {
        let m = app.microservice(&m_id).unwrap();
        let ready = if m_id == *app.source_id() {
            0.0
        } else {
            app.incoming(&m_id).map(|e| finish[&e.from]).fold(0.0f64, f64::max)
        };
        let mut best: Option<(ResourceId, f64)> = None;
        for r in &clouds {
            if !placer.fits(m, r) {
                continue;
            }
            let Some(t) = placer.stream_time_on(m, r) else { continue };
            let eft = ready + t;
            let better = match &best {
                None => true,
                Some((_, b)) => eft < *b,
            };
            if better {
                best = Some((r.id.clone(), eft));
            }
        }
        let (r_id, eft) = best.ok_or(BaselineError::NoFeasibleResource(m_id.clone()))?;
        placer.place(&m_id, &r_id);
        finish.insert(m_id, eft);
    }
    Ok(placer.matching)
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Greedy shortest-response-time placement preferring fog resources, with the
/// sink forced onto the cloud. Microservices are visited in topological order
/// so every upstream placement is fixed before its downstreams are scored.
pub fn rtr_rp(
    app: &StreamApplication,
    topology: &Topology,
    gateway: &ResourceId,
) -> Result<Matching, BaselineError> {
    let mut placer = Placer::new(app, topology, gateway);
    for m_id in topological_order(app) {
        let m = app.microservice(&m_id).unwrap();
        let choice = if &m_id == app.sink_id() {
            placer.best_in(m, topology.resources().filter(|r| r.tier == Tier::Cloud))
        } else {
            placer
                .best_in(m, topology.resources().filter(|r| r.tier != Tier::Cloud))
                .or_else(|| placer.best_in(m, topology.resources().filter(|r| r.tier == Tier::Cloud)))
        };
        let (r_id, _) = choice.ok_or(BaselineError::NoFeasibleResource(m_id.clone()))?;
        placer.place(&m_id, &r_id);
    }
    Ok(placer.matching)
}

/// Bottom-up tier search: for each microservice take the first tier, from
/// fog1 upward, holding a feasible resource with a free slot; within the tier
/// pick the fastest resource.
pub fn cloudpath(
    app: &StreamApplication,
    topology: &Topology,
    gateway: &ResourceId,
) -> Result<Matching, BaselineError> {
    const BOTTOM_UP: [Tier; 3] = [Tier::Fog1, Tier::Fog2, Tier::Cloud];
    let mut placer = Placer::new(app, topology, gateway);
    for m_id in topological_order(app) {
        let m = app.microservice(&m_id).unwrap();
        let mut choice = None;
        for tier in BOTTOM_UP {
            choice = placer.best_in(m, topology.resources().filter(|r| r.tier == tier));
            if choice.is_some() {
                break;
            }
        }
        let (r_id, _) = choice.ok_or(BaselineError::NoFeasibleResource(m_id.clone()))?;
        placer.place(&m_id, &r_id);
    }
    Ok(placer.matching)
}
