//! Domain entities: stream applications, resources, channels and matchings.
//!
//! Everything here is immutable after construction. [`build_application`]
//! validates the DAG shape once; the rest of the crate can then rely on a
//! single source, a single sink and full reachability without re-checking.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a microservice (a node of the application DAG).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MicroserviceId(pub String);

/// Identifier of a compute resource.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceId(pub String);

impl fmt::Display for MicroserviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for ResourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for MicroserviceId {
    fn from(s: &str) -> Self {
        MicroserviceId(s.to_owned())
    }
}

impl From<&str> for ResourceId {
    fn from(s: &str) -> Self {
        ResourceId(s.to_owned())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("application has no microservices")]
    EmptyApplication,
    #[error("duplicate microservice id `{0}`")]
    DuplicateMicroservice(MicroserviceId),
    #[error("edge {from}->{to} references an undeclared microservice")]
    DanglingEdge { from: MicroserviceId, to: MicroserviceId },
    #[error("duplicate edge {from}->{to}")]
    DuplicateEdge { from: MicroserviceId, to: MicroserviceId },
    #[error("cycle detected through `{0}`")]
    CycleDetected(MicroserviceId),
    #[error("microservices without upstreams {found:?} do not match the declared source `{declared}`")]
    MultipleSources { declared: MicroserviceId, found: Vec<MicroserviceId> },
    #[error("microservices without downstreams {found:?} do not match the declared sink `{declared}`")]
    MultipleSinks { declared: MicroserviceId, found: Vec<MicroserviceId> },
    #[error("microservice `{0}` is not on a source-to-sink path")]
    UnreachableMicroservice(MicroserviceId),
    #[error("microservice `{id}`: {reason}")]
    InvalidMicroservice { id: MicroserviceId, reason: String },
    #[error("stream {from}->{to}: {reason}")]
    InvalidStream { from: String, to: String, reason: String },
    #[error("resource `{id}`: {reason}")]
    InvalidResource { id: ResourceId, reason: String },
    #[error("channel {from}->{to}: {reason}")]
    InvalidChannel { from: ResourceId, to: ResourceId, reason: String },
    #[error("no channel declared from `{from}` to `{to}`")]
    ChannelMissing { from: ResourceId, to: ResourceId },
    #[error("unknown resource `{0}`")]
    UnknownResource(ResourceId),
}

/// A unit of placement: one node of the application DAG together with its
/// per-element resource demands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Microservice {
    pub id: MicroserviceId,
    /// Work per stream element, in MI.
    pub cpu_demand: f64,
    /// Memory demand in bytes.
    pub mem_demand: f64,
    /// Storage demand in bytes.
    pub stor_demand: f64,
}

impl Microservice {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // reject NaN too
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |reason: &str| ModelError::InvalidMicroservice {
            id: self.id.clone(),
            reason: reason.to_owned(),
        };
        if !(self.cpu_demand > 0.0) {
            return Err(fail("cpu_demand must be positive"));
        }
        if !(self.mem_demand >= 0.0) {
            return Err(fail("mem_demand must be non-negative"));
        }
        if !(self.stor_demand >= 0.0) {
            return Err(fail("stor_demand must be non-negative"));
        }
        Ok(())
    }
}

/// An ordered sequence of data elements flowing along one DAG edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataStream {
    /// Element sizes in bits, in transmission order.
    pub element_sizes: Vec<f64>,
    /// Elements per second entering the downstream microservice.
    pub ingress_rate: f64,
}

impl DataStream {
    pub fn new(element_sizes: Vec<f64>, ingress_rate: f64) -> Self {
        DataStream { element_sizes, ingress_rate }
    }

    /// Number of elements in the stream.
    pub fn size(&self) -> usize {
        self.element_sizes.len()
    }

    /// Sum of all element sizes, in bits.
    pub fn total_bits(&self) -> f64 {
        self.element_sizes.iter().sum()
    }

    /// Total ingress traffic, in bits/s: rate times summed element sizes.
    pub fn ingress_traffic(&self) -> f64 {
        self.ingress_rate * self.total_bits()
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)] // reject NaN too
    fn validate(&self, from: &str, to: &str) -> Result<(), ModelError> {
        let fail = |reason: &str| ModelError::InvalidStream {
            from: from.to_owned(),
            to: to.to_owned(),
            reason: reason.to_owned(),
        };
        if self.element_sizes.is_empty() {
            return Err(fail("stream must carry at least one element"));
        }
        if self.element_sizes.iter().any(|s| !(*s > 0.0)) {
            return Err(fail("every element size must be positive"));
        }
        if !(self.ingress_rate > 0.0) {
            return Err(fail("ingress_rate must be positive"));
        }
        Ok(())
    }
}

/// A directed DAG edge: `from` streams data to `to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: MicroserviceId,
    pub to: MicroserviceId,
    pub stream: DataStream,
}

/// A validated stream application: a DAG with one source, one sink, and a
/// stream on every edge. The source additionally receives `src_stream` from
/// outside the application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamApplication {
    microservices: BTreeMap<MicroserviceId, Microservice>,
    /// Canonically ordered by (from, to).
    edges: Vec<Edge>,
    source_id: MicroserviceId,
    sink_id: MicroserviceId,
    src_stream: DataStream,
}

impl StreamApplication {
    pub fn microservices(&self) -> impl Iterator<Item = &Microservice> {
        self.microservices.values()
    }

    pub fn microservice_ids(&self) -> impl Iterator<Item = &MicroserviceId> {
        self.microservices.keys()
    }

    pub fn microservice(&self, id: &MicroserviceId) -> Option<&Microservice> {
        self.microservices.get(id)
    }

    pub fn len(&self) -> usize {
        self.microservices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.microservices.is_empty()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn source_id(&self) -> &MicroserviceId {
        &self.source_id
    }

    pub fn sink_id(&self) -> &MicroserviceId {
        &self.sink_id
    }

    /// The stream entering the source microservice from outside.
    pub fn src_stream(&self) -> &DataStream {
        &self.src_stream
    }

    /// Edges whose downstream endpoint is `id`, in canonical order.
    pub fn incoming<'a>(&'a self, id: &MicroserviceId) -> impl Iterator<Item = &'a Edge> {
        let id = id.clone();
        self.edges.iter().filter(move |e| e.to == id)
    }

    /// Edges whose upstream endpoint is `id`, in canonical order.
    pub fn outgoing<'a>(&'a self, id: &MicroserviceId) -> impl Iterator<Item = &'a Edge> {
        let id = id.clone();
        self.edges.iter().filter(move |e| e.from == id)
    }

    /// Mutates every microservice's cpu demand. Used by experiment sweeps.
    pub fn set_uniform_cpu_demand(&mut self, cpu_mi: f64) {
        for m in self.microservices.values_mut() {
            m.cpu_demand = cpu_mi;
        }
    }

    /// Rewrites every element of every stream (including the source stream)
    /// to `bits`, keeping element counts. Used by experiment sweeps.
    pub fn set_uniform_element_size(&mut self, bits: f64) {
        for e in self.edges.iter_mut() {
            for s in e.stream.element_sizes.iter_mut() {
                *s = bits;
            }
        }
        for s in self.src_stream.element_sizes.iter_mut() {
            *s = bits;
        }
    }
}

/// Builds and validates a [`StreamApplication`].
///
/// Checks, in order: non-empty and well-formed parts, edge endpoints declared,
/// no duplicate edges, acyclicity, the declared source is the unique node
/// without upstreams (dually for the sink), and every microservice lies on a
/// source-to-sink path.
pub fn build_application(
    microservices: Vec<Microservice>,
    edges: Vec<Edge>,
    source_id: MicroserviceId,
    sink_id: MicroserviceId,
    src_stream: DataStream,
) -> Result<StreamApplication, ModelError> {
    if microservices.is_empty() {
        return Err(ModelError::EmptyApplication);
    }
    let mut by_id = BTreeMap::new();
    for m in microservices {
        m.validate()?;
        let id = m.id.clone();
        if by_id.insert(id.clone(), m).is_some() {
            return Err(ModelError::DuplicateMicroservice(id));
        }
    }
    src_stream.validate("src", &source_id.0)?;

    let mut edges = edges;
    edges.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
    let mut seen = BTreeSet::new();
    for e in &edges {
        if !by_id.contains_key(&e.from) || !by_id.contains_key(&e.to) {
            return Err(ModelError::DanglingEdge { from: e.from.clone(), to: e.to.clone() });
        }
        if !seen.insert((e.from.clone(), e.to.clone())) {
            return Err(ModelError::DuplicateEdge { from: e.from.clone(), to: e.to.clone() });
        }
        e.stream.validate(&e.from.0, &e.to.0)?;
    }

    let app = StreamApplication { microservices: by_id, edges, source_id, sink_id, src_stream };

    // Kahn's algorithm doubles as the cycle check.
    topological_order_impl(&app)?;

    let no_upstream: Vec<_> =
        app.microservice_ids().filter(|m| app.incoming(m).next().is_none()).cloned().collect();
    if no_upstream != [app.source_id.clone()] {
        return Err(ModelError::MultipleSources { declared: app.source_id, found: no_upstream });
    }
    let no_downstream: Vec<_> =
        app.microservice_ids().filter(|m| app.outgoing(m).next().is_none()).cloned().collect();
    if no_downstream != [app.sink_id.clone()] {
        return Err(ModelError::MultipleSinks { declared: app.sink_id, found: no_downstream });
    }

    let forward = reach(&app, &app.source_id, |a, m| Box::new(a.outgoing(m).map(|e| &e.to)));
    let backward = reach(&app, &app.sink_id, |a, m| Box::new(a.incoming(m).map(|e| &e.from)));
    for id in app.microservice_ids() {
        if !forward.contains(id) || !backward.contains(id) {
            return Err(ModelError::UnreachableMicroservice(id.clone()));
        }
    }
    Ok(app)
}

type Neighbours =
    for<'a> fn(&'a StreamApplication, &MicroserviceId) -> Box<dyn Iterator<Item = &'a MicroserviceId> + 'a>;

fn reach(app: &StreamApplication, start: &MicroserviceId, next: Neighbours) -> BTreeSet<MicroserviceId> {
    let mut seen = BTreeSet::from([start.clone()]);
    let mut frontier = VecDeque::from([start.clone()]);
    while let Some(m) = frontier.pop_front() {
        for n in next(app, &m) {
            if seen.insert(n.clone()) {
                frontier.push_back(n.clone());
            }
        }
    }
    seen
}

/// Deterministic topological order: upstreams before downstreams, ties broken
/// by ascending microservice id.
pub fn topological_order(app: &StreamApplication) -> Vec<MicroserviceId> {
    topological_order_impl(app).expect("validated application cannot be cyclic")
}

fn topological_order_impl(app: &StreamApplication) -> Result<Vec<MicroserviceId>, ModelError> {
    let mut in_deg: BTreeMap<&MicroserviceId, usize> =
        app.microservice_ids().map(|m| (m, 0)).collect();
    for e in app.edges() {
        *in_deg.get_mut(&e.to).expect("edge endpoints validated") += 1;
    }
    // BTreeSet keeps the ready set id-ordered, which fixes the tie-break.
    let mut ready: BTreeSet<&MicroserviceId> =
        in_deg.iter().filter(|(_, d)| **d == 0).map(|(m, _)| *m).collect();
    let mut order = Vec::with_capacity(app.len());
    while let Some(m) = ready.iter().next().cloned() {
        ready.remove(m);
        order.push(m.clone());
        for e in app.outgoing(m) {
            let d = in_deg.get_mut(&e.to).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert(&e.to);
            }
        }
    }
    if order.len() != app.len() {
        let stuck = in_deg
            .into_iter()
            .filter(|(_, d)| *d > 0)
            .map(|(m, _)| m.clone())
            .next()
            .expect("some node must remain when a cycle exists");
        return Err(ModelError::CycleDetected(stuck));
    }
    Ok(order)
}

/// Groups microservices by longest-path depth from the source. Every upstream
/// of a level-k microservice sits at a level strictly below k, so placements
/// fixed level by level always cover all upstreams.
pub fn dag_levels(app: &StreamApplication) -> Vec<Vec<MicroserviceId>> {
    let order = topological_order(app);
    let mut level: BTreeMap<MicroserviceId, usize> = BTreeMap::new();
    for m in &order {
        let l = app.incoming(m).map(|e| level[&e.from] + 1).max().unwrap_or(0);
        level.insert(m.clone(), l);
    }
    let depth = level.values().max().copied().unwrap_or(0);
    let mut levels = vec![Vec::new(); depth + 1];
    for m in order {
        let l = level[&m];
        levels[l].push(m);
    }
    levels
}

/// Hierarchy tier of a resource, used by the baseline schedulers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Cloud,
    Fog2,
    Fog1,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tier::Cloud => f.write_str("cloud"),
            Tier::Fog2 => f.write_str("fog2"),
            Tier::Fog1 => f.write_str("fog1"),
        }
    }
}

/// A compute node able to host up to `capacity` microservices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    pub id: ResourceId,
    /// Processing speed in MI/s.
    pub cpu_speed: f64,
    /// Memory in bytes.
    pub mem: f64,
    /// Storage in bytes.
    pub stor: f64,
    /// Maximum number of hosted microservices.
    pub capacity: u32,
    pub tier: Tier,
}

impl Resource {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // reject NaN too
    fn validate(&self) -> Result<(), ModelError> {
        let fail = |reason: &str| ModelError::InvalidResource {
            id: self.id.clone(),
            reason: reason.to_owned(),
        };
        if !(self.cpu_speed > 0.0) {
            return Err(fail("cpu_speed must be positive"));
        }
        if self.capacity < 1 {
            return Err(fail("capacity must be at least 1"));
        }
        if !(self.mem >= 0.0) || !(self.stor >= 0.0) {
            return Err(fail("mem and stor must be non-negative"));
        }
        Ok(())
    }
}

/// A directed network link between two resources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkChannel {
    pub from: ResourceId,
    pub to: ResourceId,
    /// Round-trip latency in seconds.
    pub latency: f64,
    /// Bandwidth in bits/s.
    pub bandwidth: f64,
}

impl NetworkChannel {
    /// The virtual channel between co-located microservices: zero latency,
    /// unbounded bandwidth.
    pub fn self_channel(at: &ResourceId) -> NetworkChannel {
        NetworkChannel {
            from: at.clone(),
            to: at.clone(),
            latency: 0.0,
            bandwidth: f64::INFINITY,
        }
    }

    pub fn is_self(&self) -> bool {
        self.from == self.to
    }
}

/// The resource side of a scenario: nodes plus directed channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    resources: BTreeMap<ResourceId, Resource>,
    channels: BTreeMap<(ResourceId, ResourceId), NetworkChannel>,
}

impl Topology {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // reject NaN too
    pub fn new(resources: Vec<Resource>, channels: Vec<NetworkChannel>) -> Result<Self, ModelError> {
        let mut by_id = BTreeMap::new();
        for r in resources {
            r.validate()?;
            let id = r.id.clone();
            if by_id.insert(id.clone(), r).is_some() {
                return Err(ModelError::InvalidResource { id, reason: "duplicate id".to_owned() });
            }
        }
        let mut by_pair = BTreeMap::new();
        for c in channels {
            let fail = |reason: &str| ModelError::InvalidChannel {
                from: c.from.clone(),
                to: c.to.clone(),
                reason: reason.to_owned(),
            };
            if c.from == c.to {
                return Err(fail("self-channels are implicit and must not be declared"));
            }
            if !by_id.contains_key(&c.from) || !by_id.contains_key(&c.to) {
                return Err(fail("endpoint not declared as a resource"));
            }
            if !(c.bandwidth > 0.0) || !c.bandwidth.is_finite() {
                return Err(fail("bandwidth must be positive and finite"));
            }
            if !(c.latency >= 0.0) {
                return Err(fail("latency must be non-negative"));
            }
            let key = (c.from.clone(), c.to.clone());
            if by_pair.insert(key, c.clone()).is_some() {
                return Err(ModelError::InvalidChannel {
                    from: c.from.clone(),
                    to: c.to.clone(),
                    reason: "duplicate channel for ordered pair".to_owned(),
                });
            }
        }
        Ok(Topology { resources: by_id, channels: by_pair })
    }

    pub fn resources(&self) -> impl Iterator<Item = &Resource> {
        self.resources.values()
    }

    pub fn resource_ids(&self) -> impl Iterator<Item = &ResourceId> {
        self.resources.keys()
    }

    pub fn resource(&self, id: &ResourceId) -> Option<&Resource> {
        self.resources.get(id)
    }

    pub fn len(&self) -> usize {
        self.resources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resources.is_empty()
    }

    pub fn declared_channels(&self) -> impl Iterator<Item = &NetworkChannel> {
        self.channels.values()
    }

    /// The channel from `q` to `j`. On the diagonal this is always the
    /// virtual self-channel (latency 0, bandwidth infinity); off the diagonal
    /// the channel must have been declared.
    pub fn channel_between(&self, q: &ResourceId, j: &ResourceId) -> Result<NetworkChannel, ModelError> {
        if !self.resources.contains_key(q) {
            return Err(ModelError::UnknownResource(q.clone()));
        }
        if !self.resources.contains_key(j) {
            return Err(ModelError::UnknownResource(j.clone()));
        }
        if q == j {
            return Ok(NetworkChannel::self_channel(q));
        }
        self.channels
            .get(&(q.clone(), j.clone()))
            .cloned()
            .ok_or(ModelError::ChannelMissing { from: q.clone(), to: j.clone() })
    }
}

/// Matching-game state transitions, recorded in the order they happen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchState {
    /// Mutual first choice matched directly.
    S1,
    /// Matched while not first in the resource's preference list.
    S2,
    /// Over capacity: the worst-ranked holding was rejected.
    S21,
    /// At capacity: the resource dropped a lower-ranked candidate pair.
    S22,
}

impl fmt::Display for MatchState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchState::S1 => f.write_str("S1"),
            MatchState::S2 => f.write_str("S2"),
            MatchState::S21 => f.write_str("S2.1"),
            MatchState::S22 => f.write_str("S2.2"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub state: MatchState,
    pub microservice: MicroserviceId,
    pub resource: ResourceId,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.step, self.state, self.microservice, self.resource)
    }
}

/// One held slot on a resource: the microservice plus the residual-bandwidth
/// score it was ranked with when placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocEntry {
    pub microservice: MicroserviceId,
    pub residual_bw: f64,
}

/// The outcome of a placement run: the assignment map, per-resource
/// allocation lists kept sorted by residual bandwidth descending, the
/// microservices whose preferences were exhausted, and the state-transition
/// trace.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Matching {
    pub assignment: BTreeMap<MicroserviceId, ResourceId>,
    pub alloc: BTreeMap<ResourceId, Vec<AllocEntry>>,
    pub unplaced: Vec<MicroserviceId>,
    pub trace: Vec<TraceRecord>,
}

impl Matching {
    pub fn resource_of(&self, m: &MicroserviceId) -> Option<&ResourceId> {
        self.assignment.get(m)
    }

    /// Microservices held by `r`, best residual bandwidth first.
    pub fn allocated(&self, r: &ResourceId) -> Vec<&MicroserviceId> {
        self.alloc.get(r).map(|v| v.iter().map(|e| &e.microservice).collect()).unwrap_or_default()
    }

    /// Inserts keeping the list sorted by residual bandwidth descending,
    /// ties by ascending microservice id.
    pub fn insert_allocation(&mut self, r: &ResourceId, m: MicroserviceId, residual_bw: f64) {
        self.assignment.insert(m.clone(), r.clone());
        let list = self.alloc.entry(r.clone()).or_default();
        let entry = AllocEntry { microservice: m, residual_bw };
        let pos = list
            .iter()
            .position(|e| {
                (e.residual_bw, &entry.microservice) < (entry.residual_bw, &e.microservice)
            })
            .unwrap_or(list.len());
        list.insert(pos, entry);
    }

    /// The trace export format: one `<step> <STATE> <microservice> <resource>`
    /// line per transition.
    pub fn trace_text(&self) -> String {
        let mut out = String::new();
        for rec in &self.trace {
            out.push_str(&rec.to_string());
            out.push('\n');
        }
        out
    }

    /// Structural audit shared by the matching game and the baselines:
    /// assignment and alloc lists must be mutually consistent inverses, each
    /// placed microservice held exactly once, capacities respected, and no
    /// microservice both placed and unplaced.
    pub fn check_structure(&self, capacities: &BTreeMap<ResourceId, u32>) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for (r, list) in &self.alloc {
            let cap = capacities.get(r).ok_or(format!("alloc references unknown resource {r}"))?;
            if list.len() > *cap as usize {
                return Err(format!("resource {r} holds {} > capacity {cap}", list.len()));
            }
            for pair in list.windows(2) {
                let ordered = (pair[0].residual_bw, &pair[1].microservice)
                    >= (pair[1].residual_bw, &pair[0].microservice);
                if !ordered {
                    return Err(format!("alloc list of {r} not sorted by residual bandwidth"));
                }
            }
            for e in list {
                if !seen.insert(e.microservice.clone()) {
                    return Err(format!("{} held by more than one resource", e.microservice));
                }
                if self.assignment.get(&e.microservice) != Some(r) {
                    return Err(format!("{} in alloc({r}) but assigned elsewhere", e.microservice));
                }
            }
        }
        for (m, r) in &self.assignment {
            let held = self
                .alloc
                .get(r)
                .map(|l| l.iter().any(|e| &e.microservice == m))
                .unwrap_or(false);
            if !held {
                return Err(format!("{m} assigned to {r} but missing from its alloc list"));
            }
        }
        for m in &self.unplaced {
            if self.assignment.contains_key(m) {
                return Err(format!("{m} is both placed and unplaced"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(id: &str) -> Microservice {
        Microservice { id: id.into(), cpu_demand: 1000.0, mem_demand: 1.0e8, stor_demand: 1.0e9 }
    }

    fn stream() -> DataStream {
        DataStream::new(vec![8.0e6], 1.0)
    }

    fn edge(from: &str, to: &str) -> Edge {
        Edge { from: from.into(), to: to.into(), stream: stream() }
    }

    fn fig2_app() -> StreamApplication {
        let names =
            ["encoding", "framing", "low_inference", "high_inference", "analysis", "transcoding", "packaging"];
        let edges = vec![
            edge("encoding", "framing"),
            edge("framing", "low_inference"),
            edge("framing", "analysis"),
            edge("low_inference", "analysis"),
            edge("analysis", "high_inference"),
            edge("analysis", "transcoding"),
            edge("high_inference", "packaging"),
            edge("transcoding", "packaging"),
        ];
        build_application(
            names.iter().map(|n| ms(n)).collect(),
            edges,
            "encoding".into(),
            "packaging".into(),
            stream(),
        )
        .unwrap()
    }

    #[test]
    fn seven_node_dag_builds() {
        let app = fig2_app();
        assert_eq!(app.len(), 7);
        assert_eq!(app.incoming(&"analysis".into()).count(), 2);
        assert_eq!(app.incoming(&"packaging".into()).count(), 2);
    }

    #[test]
    fn single_microservice_app_is_valid() {
        let app =
            build_application(vec![ms("only")], vec![], "only".into(), "only".into(), stream())
                .unwrap();
        assert_eq!(app.source_id(), app.sink_id());
    }

    #[test]
    fn two_cycle_is_rejected() {
        let err = build_application(
            vec![ms("a"), ms("b")],
            vec![edge("a", "b"), edge("b", "a")],
            "a".into(),
            "b".into(),
            stream(),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::CycleDetected(_)));
    }

    #[test]
    fn stray_sourceless_node_is_rejected() {
        let err = build_application(
            vec![ms("a"), ms("b"), ms("c")],
            vec![edge("a", "b"), edge("c", "b")],
            "a".into(),
            "b".into(),
            stream(),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::MultipleSources { .. }));
    }

    #[test]
    fn dangling_edge_is_rejected() {
        let err = build_application(
            vec![ms("a"), ms("b")],
            vec![edge("a", "b"), edge("a", "ghost")],
            "a".into(),
            "b".into(),
            stream(),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::DanglingEdge { .. }));
    }

    #[test]
    fn degenerate_streams_are_rejected() {
        let build = |stream: DataStream| {
            build_application(
                vec![ms("a"), ms("b")],
                vec![Edge { from: "a".into(), to: "b".into(), stream }],
                "a".into(),
                "b".into(),
                DataStream::new(vec![8.0e6], 1.0),
            )
        };
        for bad in [
            DataStream::new(vec![], 1.0),          // no elements
            DataStream::new(vec![0.0], 1.0),       // zero-sized element
            DataStream::new(vec![8.0e6, -1.0], 1.0),
            DataStream::new(vec![8.0e6], 0.0),     // no ingress
            DataStream::new(vec![8.0e6], -2.0),
        ] {
            assert!(matches!(build(bad).unwrap_err(), ModelError::InvalidStream { .. }));
        }
        assert!(build(DataStream::new(vec![8.0e6], 0.2)).is_ok());
    }

    #[test]
    fn duplicate_edges_are_rejected() {
        let err = build_application(
            vec![ms("a"), ms("b")],
            vec![edge("a", "b"), edge("a", "b")],
            "a".into(),
            "b".into(),
            stream(),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::DuplicateEdge { .. }));
    }

    #[test]
    fn side_cycle_is_rejected() {
        let err = build_application(
            vec![ms("a"), ms("b"), ms("c")],
            vec![edge("a", "b"), edge("a", "c"), edge("c", "b"), edge("b", "c")],
            "a".into(),
            "b".into(),
            stream(),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::CycleDetected(_)));
    }

    #[test]
    fn topo_order_chain_and_diamond() {
        let chain = build_application(
            vec![ms("a"), ms("b"), ms("c")],
            vec![edge("a", "b"), edge("b", "c")],
            "a".into(),
            "c".into(),
            stream(),
        )
        .unwrap();
        let want: Vec<MicroserviceId> = vec!["a".into(), "b".into(), "c".into()];
        assert_eq!(topological_order(&chain), want);

        let diamond = build_application(
            vec![ms("a"), ms("b"), ms("c"), ms("d")],
            vec![edge("a", "b"), edge("a", "c"), edge("b", "d"), edge("c", "d")],
            "a".into(),
            "d".into(),
            stream(),
        )
        .unwrap();
        let want: Vec<MicroserviceId> = vec!["a".into(), "b".into(), "c".into(), "d".into()];
        assert_eq!(topological_order(&diamond), want);
        assert_eq!(
            dag_levels(&diamond),
            vec![
                vec![MicroserviceId::from("a")],
                vec![MicroserviceId::from("b"), MicroserviceId::from("c")],
                vec![MicroserviceId::from("d")],
            ]
        );
    }

    #[test]
    fn fig2_topo_order_endpoints() {
        let order = topological_order(&fig2_app());
        assert_eq!(order.first().unwrap(), &MicroserviceId::from("encoding"));
        assert_eq!(order.last().unwrap(), &MicroserviceId::from("packaging"));
    }

    fn small_topology() -> Topology {
        Topology::new(
            vec![
                Resource { id: "fog1".into(), cpu_speed: 2.0e4, mem: 8.0e9, stor: 1.6e10, capacity: 2, tier: Tier::Fog1 },
                Resource { id: "cloud".into(), cpu_speed: 1.0e5, mem: 1.28e11, stor: 1.2e12, capacity: 2, tier: Tier::Cloud },
            ],
            vec![NetworkChannel { from: "fog1".into(), to: "cloud".into(), latency: 0.1, bandwidth: 2.0e8 }],
        )
        .unwrap()
    }

    #[test]
    fn self_channel_is_zero_latency_infinite_bandwidth() {
        let topo = small_topology();
        let ch = topo.channel_between(&"fog1".into(), &"fog1".into()).unwrap();
        assert_eq!(ch.latency, 0.0);
        assert_eq!(ch.bandwidth, f64::INFINITY);
    }

    #[test]
    fn declared_channel_is_returned_as_is() {
        let topo = small_topology();
        let ch = topo.channel_between(&"fog1".into(), &"cloud".into()).unwrap();
        assert_eq!(ch.bandwidth, 2.0e8);
        assert_eq!(ch.latency, 0.1);
    }

    #[test]
    fn undeclared_channel_is_missing() {
        let topo = small_topology();
        let err = topo.channel_between(&"cloud".into(), &"fog1".into()).unwrap_err();
        assert!(matches!(err, ModelError::ChannelMissing { .. }));
    }

    #[test]
    fn alloc_insert_keeps_residual_order() {
        let mut m = Matching::default();
        let r: ResourceId = "r".into();
        m.insert_allocation(&r, "b".into(), 5.0);
        m.insert_allocation(&r, "a".into(), 9.0);
        m.insert_allocation(&r, "c".into(), 5.0);
        let ids: Vec<_> = m.allocated(&r).into_iter().map(|m| m.0.clone()).collect();
        assert_eq!(ids, ["a", "b", "c"]); // 9.0 first, then the 5.0 tie by id
    }

    #[test]
    fn application_roundtrips_through_serde() {
        let app = fig2_app();
        let json = serde_json::to_string(&app).unwrap();
        let back: StreamApplication = serde_json::from_str(&json).unwrap();
        assert_eq!(app, back);
    }
}
