//! The two-sided cost model and preference-table construction.
//!
//! Microservices rank resources by stream processing time (compute plus
//! transmission plus latency, summed per element, worst incoming edge).
//! Resources rank microservices by the bandwidth left on the channel that
//! would feed them. Pairs whose residual bandwidth is zero or negative are
//! dropped from both tables so every acceptable match leaves surplus on the
//! channel.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    DataStream, Microservice, MicroserviceId, ModelError, NetworkChannel, Resource, ResourceId,
    StreamApplication, Topology,
};

#[derive(Debug, Error, PartialEq)]
pub enum RankError {
    #[error("upstream `{upstream}` of `{candidate}` has no placement yet")]
    UpstreamUnplaced { candidate: MicroserviceId, upstream: MicroserviceId },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Time for `m` on `r` to receive one element over `ch` and process it:
/// compute (cpu demand over speed) + transmission (element over bandwidth)
/// + channel latency. On a self-channel only the compute term remains.
pub fn element_processing_time(
    m: &Microservice,
    element_bits: f64,
    r: &Resource,
    ch: &NetworkChannel,
) -> f64 {
    let compute = m.cpu_demand / r.cpu_speed;
    if ch.is_self() {
        return compute;
    }
    compute + element_bits / ch.bandwidth + ch.latency
}

/// Stream processing time: element processing times summed over the stream.
pub fn microservice_stream_time(
    m: &Microservice,
    stream: &DataStream,
    r: &Resource,
    ch: &NetworkChannel,
) -> f64 {
    stream.element_sizes.iter().map(|&bits| element_processing_time(m, bits, r, ch)).sum()
}

/// Bandwidth left on `ch` after carrying the stream's ingress traffic
/// (rate times summed element sizes). Negative when the stream oversubscribes
/// the channel; infinite on a self-channel.
pub fn residual_bandwidth(stream: &DataStream, ch: &NetworkChannel) -> f64 {
    if ch.is_self() {
        return f64::INFINITY;
    }
    ch.bandwidth - stream.ingress_traffic()
}

/// How the channel feeding a candidate is resolved while ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankingMode {
    /// Each incoming edge uses the channel from the upstream's already-fixed
    /// resource. Requires placements for every upstream of every candidate;
    /// used when ranking and matching proceed level by level.
    Staged,
    /// Every edge uses the channel from the source gateway, making one global
    /// game possible without any prior placements.
    Static,
}

/// Everything the ranking operations need to resolve channels.
pub struct RankContext<'a> {
    pub app: &'a StreamApplication,
    pub topology: &'a Topology,
    /// Resource where the application's input stream enters the system.
    pub gateway: &'a ResourceId,
    pub mode: RankingMode,
    /// Fixed placements of earlier levels; consulted only in staged mode.
    pub placed: &'a BTreeMap<MicroserviceId, ResourceId>,
}

/// An incoming edge of a candidate, with the channel origin resolved.
struct ResolvedEdge<'a> {
    upstream_resource: ResourceId,
    stream: &'a DataStream,
}

impl<'a> RankContext<'a> {
    /// All streams entering `m` with their channel origins. The source
    /// microservice receives the application input stream from the gateway.
    fn resolved_incoming(&self, m: &MicroserviceId) -> Result<Vec<ResolvedEdge<'a>>, RankError> {
        if m == self.app.source_id() {
            return Ok(vec![ResolvedEdge {
                upstream_resource: self.gateway.clone(),
                stream: self.app.src_stream(),
            }]);
        }
        self.app
            .incoming(m)
            .map(|e| {
                let origin = match self.mode {
                    RankingMode::Static => self.gateway.clone(),
                    RankingMode::Staged => self
                        .placed
                        .get(&e.from)
                        .cloned()
                        .ok_or_else(|| RankError::UpstreamUnplaced {
                            candidate: m.clone(),
                            upstream: e.from.clone(),
                        })?,
                };
                Ok(ResolvedEdge { upstream_resource: origin, stream: &e.stream })
            })
            .collect()
    }

    /// The incoming edge with the highest ingress traffic; ties broken by the
    /// resolution order of [`resolved_incoming`], which is canonical.
    fn worst_ingress_edge(edges: &'a [ResolvedEdge<'a>]) -> &'a ResolvedEdge<'a> {
        edges
            .iter()
            .max_by(|a, b| {
                a.stream
                    .ingress_traffic()
                    .partial_cmp(&b.stream.ingress_traffic())
                    .expect("ingress traffic is never NaN")
            })
            .expect("every microservice has at least one incoming stream")
    }
}

/// One side's preference list entry: the partner plus the ranking score.
pub type RplEntry = (ResourceId, f64);
pub type MplEntry = (MicroserviceId, f64);

/// Both preference tables for one matching game. `rpl` lists are sorted by
/// ascending stream time (best first), `mpl` lists by descending residual
/// bandwidth; both tie-break on ascending partner id. Mutual acceptability
/// holds: `r` appears in `rpl[m]` exactly when `m` appears in `mpl[r]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PreferenceTables {
    pub rpl: BTreeMap<MicroserviceId, Vec<RplEntry>>,
    pub mpl: BTreeMap<ResourceId, Vec<MplEntry>>,
}

impl PreferenceTables {
    pub fn rpl_rank(&self, m: &MicroserviceId, r: &ResourceId) -> Option<usize> {
        self.rpl.get(m)?.iter().position(|(rid, _)| rid == r)
    }

    pub fn mpl_rank(&self, r: &ResourceId, m: &MicroserviceId) -> Option<usize> {
        self.mpl.get(r)?.iter().position(|(mid, _)| mid == m)
    }

    /// Checks the sort contracts and mutual acceptability.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (m, list) in &self.rpl {
            for w in list.windows(2) {
                if (w[0].1, &w[0].0) >= (w[1].1, &w[1].0) {
                    return Err(format!("rpl[{m}] not strictly ordered by (time, id)"));
                }
            }
            for (r, _) in list {
                if self.mpl_rank(r, m).is_none() {
                    return Err(format!("{r} in rpl[{m}] but {m} not in mpl[{r}]"));
                }
            }
        }
        for (r, list) in &self.mpl {
            for w in list.windows(2) {
                let ordered = (w[0].1, &w[1].0) > (w[1].1, &w[0].0);
                if !ordered {
                    return Err(format!("mpl[{r}] not ordered by (residual desc, id asc)"));
                }
            }
            for (m, _) in list {
                if self.rpl_rank(m, r).is_none() {
                    return Err(format!("{m} in mpl[{r}] but {r} not in rpl[{m}]"));
                }
            }
        }
        Ok(())
    }
}

/// Builds the resource preference list of every candidate.
///
/// A resource qualifies for a candidate when it strictly satisfies the memory
/// and storage demands, a channel from every resolved upstream resource
/// exists, and it is listed in `usable`. The score is the worst (maximum)
/// stream time over the candidate's incoming edges; lists are sorted
/// ascending so the first entry is the fastest resource. Candidates whose
/// list comes out empty have no feasible resource and are left with an empty
/// list for the matching stage to report.
pub fn build_rpl(
    ctx: &RankContext,
    candidates: &BTreeSet<MicroserviceId>,
    usable: &BTreeSet<ResourceId>,
) -> Result<BTreeMap<MicroserviceId, Vec<RplEntry>>, RankError> {
    let mut rpl = BTreeMap::new();
    for m_id in candidates {
        let m = self::candidate(ctx.app, m_id);
        let edges = ctx.resolved_incoming(m_id)?;
        let mut list: Vec<RplEntry> = Vec::new();
        for r in ctx.topology.resources() {
            if !usable.contains(&r.id) {
                continue;
            }
            if !(m.mem_demand < r.mem && m.stor_demand < r.stor) {
                continue;
            }
            let mut worst_time = f64::NEG_INFINITY;
            let mut reachable = true;
            for e in &edges {
                match ctx.topology.channel_between(&e.upstream_resource, &r.id) {
                    Ok(ch) => {
                        let t = microservice_stream_time(m, e.stream, r, &ch);
                        worst_time = worst_time.max(t);
                    }
                    Err(_) => {
                        reachable = false;
                        break;
                    }
                }
            }
            if reachable {
                list.push((r.id.clone(), worst_time));
            }
        }
        sort_rpl(&mut list);
        rpl.insert(m_id.clone(), list);
    }
    Ok(rpl)
}

/// Builds the microservice preference list of every usable resource from an
/// existing `rpl`, scoring each pair by the residual bandwidth of the
/// candidate's highest-ingress incoming edge over the channel to the
/// resource. Pairs with zero or negative residual are removed from both
/// tables, preserving mutual acceptability.
pub fn build_mpl(
    ctx: &RankContext,
    rpl: &mut BTreeMap<MicroserviceId, Vec<RplEntry>>,
) -> Result<BTreeMap<ResourceId, Vec<MplEntry>>, RankError> {
    let mut mpl: BTreeMap<ResourceId, Vec<MplEntry>> = BTreeMap::new();
    for (m_id, list) in rpl.iter_mut() {
        let edges = ctx.resolved_incoming(m_id)?;
        let worst = RankContext::worst_ingress_edge(&edges);
        list.retain(|(r_id, _)| {
            let ch = ctx
                .topology
                .channel_between(&worst.upstream_resource, r_id)
                .expect("rpl feasibility established every upstream channel");
            let residual = residual_bandwidth(worst.stream, &ch);
            if residual <= 0.0 {
                return false;
            }
            mpl.entry(r_id.clone()).or_default().push((m_id.clone(), residual));
            true
        });
    }
    for list in mpl.values_mut() {
        sort_mpl(list);
    }
    Ok(mpl)
}

/// Convenience wrapper running both ranking passes for one game.
pub fn build_tables(
    ctx: &RankContext,
    candidates: &BTreeSet<MicroserviceId>,
    usable: &BTreeSet<ResourceId>,
) -> Result<PreferenceTables, RankError> {
    let mut rpl = build_rpl(ctx, candidates, usable)?;
    let mpl = build_mpl(ctx, &mut rpl)?;
    Ok(PreferenceTables { rpl, mpl })
}

fn candidate<'a>(app: &'a StreamApplication, id: &MicroserviceId) -> &'a Microservice {
    app.microservice(id).expect("candidates are drawn from the application")
}

fn sort_rpl(list: &mut [RplEntry]) {
    list.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("times are never NaN").then(a.0.cmp(&b.0)));
}

fn sort_mpl(list: &mut [MplEntry]) {
    list.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("residuals are never NaN").then(a.0.cmp(&b.0)));
}
