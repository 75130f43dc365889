//! The many-to-one matching game and its independent stability verifier.
//!
//! [`coda_match`] plays one deferred-acceptance game over a pair of
//! preference tables: unmatched microservices propose to their best remaining
//! resource; resources hold up to their capacity, evict the worst holding on
//! overflow, and once full drop every candidate ranked below their worst
//! holding from both tables. Those deletions are what drives convergence.
//!
//! [`staged_coda`] runs the game level by level along the DAG so that every
//! channel cost is computable from already-fixed upstream placements, or as a
//! single global game in static mode.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use log::debug;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    dag_levels, MatchState, Matching, MicroserviceId, ResourceId, StreamApplication, Topology,
    TraceRecord,
};
use crate::ranking::{build_tables, PreferenceTables, RankContext, RankError, RankingMode};

#[derive(Debug, Error, PartialEq)]
pub enum MatchingError {
    #[error("matching exceeded the iteration bound of {0}; this indicates an implementation bug")]
    IterationBoundExceeded(usize),
    #[error(transparent)]
    Rank(#[from] RankError),
}

/// Run parameters for a matching game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchRunConfig {
    pub mode: RankingMode,
    /// Safety bound on game iterations. Sized so it never binds on legal
    /// input (every iteration either matches, deletes a table pair, or
    /// retires a microservice, so legal games finish within
    /// sum of rpl lengths + number of candidates steps).
    pub max_iterations: usize,
}

impl Default for MatchRunConfig {
    fn default() -> Self {
        MatchRunConfig { mode: RankingMode::Staged, max_iterations: 1_000_000 }
    }
}

impl MatchRunConfig {
    pub fn with_mode(mode: RankingMode) -> Self {
        MatchRunConfig { mode, ..Default::default() }
    }
}

/// Plays one matching game over `tables` against per-resource `capacities`.
///
/// The queue of unmatched microservices starts in ascending id order and is
/// FIFO; evictees rejoin at the tail. Each iteration pairs the queue head
/// with the first resource left in its preference list:
///
/// * State-1: the proposer is also the resource's first remaining preference
///   and a slot is free; match directly.
/// * State-2: otherwise match tentatively (the resource never refuses an
///   acceptable proposer; a first-ranked proposer against a full resource
///   takes this path too, displacing the worst holding).
/// * State-2.1: a match that overflows capacity evicts the holding with the
///   lowest residual bandwidth back into the queue.
/// * State-2.2: whenever a match leaves the resource exactly full, every
///   candidate ranked below its worst holding is dropped from the resource's
///   list and the resource from those candidates' lists.
///
/// A microservice whose list empties retires as unplaced. The input tables
/// are not mutated; deletions act on a private copy.
pub fn coda_match(
    tables: &PreferenceTables,
    capacities: &BTreeMap<ResourceId, u32>,
    cfg: &MatchRunConfig,
) -> Result<Matching, MatchingError> {
    let mut rpl = tables.rpl.clone();
    let mut mpl = tables.mpl.clone();
    let mut queue: VecDeque<MicroserviceId> = rpl.keys().cloned().collect();
    let mut matching = Matching::default();
    let mut step = 0usize;

    let mut iterations = 0usize;
    while let Some(m) = queue.front().cloned() {
        iterations += 1;
        if iterations > cfg.max_iterations {
            return Err(MatchingError::IterationBoundExceeded(cfg.max_iterations));
        }

        let Some((r, _)) = rpl[&m].first() else {
            queue.pop_front();
            matching.unplaced.push(m);
            continue;
        };
        let r = r.clone();
        let mpl_r = mpl.get(&r).map(Vec::as_slice).unwrap_or(&[]);
        let Some(rank) = mpl_r.iter().position(|(id, _)| id == &m) else {
            // Unreachable on mutually-acceptable tables; drop the stale entry
            // so the loop still makes progress if the precondition is broken.
            remove_rpl_entry(&mut rpl, &m, &r);
            continue;
        };
        let score = mpl_r[rank].1;
        let capacity = capacities.get(&r).copied().unwrap_or(0) as usize;
        let held = matching.alloc.get(&r).map(Vec::len).unwrap_or(0);

        queue.pop_front();
        let state = if rank == 0 && held != capacity { MatchState::S1 } else { MatchState::S2 };
        debug!("{state}: {m} -> {r} (rank {rank}, held {held}/{capacity})");
        matching.insert_allocation(&r, m.clone(), score);
        step += 1;
        matching.trace.push(TraceRecord { step, state, microservice: m, resource: r.clone() });

        if matching.alloc[&r].len() > capacity {
            // State-2.1: reject the worst holding.
            let evicted = matching.alloc.get_mut(&r).unwrap().pop().unwrap();
            debug!("S2.1: {r} rejects {}", evicted.microservice);
            matching.assignment.remove(&evicted.microservice);
            queue.push_back(evicted.microservice.clone());
            step += 1;
            matching.trace.push(TraceRecord {
                step,
                state: MatchState::S21,
                microservice: evicted.microservice,
                resource: r.clone(),
            });
        }

        if matching.alloc[&r].len() == capacity {
            // State-2.2: truncate both tables below the worst holding.
            let dropped: Vec<MicroserviceId> = match matching.alloc[&r].last() {
                Some(last) => {
                    let threshold = mpl[&r]
                        .iter()
                        .position(|(id, _)| id == &last.microservice)
                        .expect("holdings stay in the resource's preference list");
                    mpl[&r][threshold + 1..].iter().map(|(id, _)| id.clone()).collect()
                }
                // Capacity zero: nobody can ever hold this resource.
                None => mpl[&r].iter().map(|(id, _)| id.clone()).collect(),
            };
            for m_s in dropped {
                debug!("S2.2: {r} drops {m_s}");
                mpl.get_mut(&r).unwrap().retain(|(id, _)| id != &m_s);
                remove_rpl_entry(&mut rpl, &m_s, &r);
                step += 1;
                matching.trace.push(TraceRecord {
                    step,
                    state: MatchState::S22,
                    microservice: m_s.clone(),
                    resource: r.clone(),
                });
                if rpl[&m_s].is_empty() && queue.contains(&m_s) {
                    queue.retain(|q| q != &m_s);
                    matching.unplaced.push(m_s);
                }
            }
        }
    }
    Ok(matching)
}

fn remove_rpl_entry(
    rpl: &mut BTreeMap<MicroserviceId, Vec<(ResourceId, f64)>>,
    m: &MicroserviceId,
    r: &ResourceId,
) {
    if let Some(list) = rpl.get_mut(m) {
        list.retain(|(id, _)| id != r);
    }
}

/// A microservice-resource pair that would rather have each other than their
/// current situation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockingPair {
    pub microservice: MicroserviceId,
    pub resource: ResourceId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub blocking_pairs: Vec<BlockingPair>,
    pub violations: Vec<String>,
}

impl StabilityReport {
    fn merge(&mut self, other: StabilityReport) {
        self.stable &= other.stable;
        self.blocking_pairs.extend(other.blocking_pairs);
        self.violations.extend(other.violations);
    }
}

/// Independent stability oracle: an exhaustive scan over every
/// microservice-resource pair of the original tables, with no knowledge of
/// how [`coda_match`] reached its answer.
///
/// Checks that each placed microservice sits on exactly one resource drawn
/// from its preference list, that every resource holds only listed
/// microservices within its capacity, and that no mutually-acceptable pair
/// (m, r) exists where m strictly prefers r to its current assignment (or is
/// unplaced) while r has a free slot or ranks m above one of its holdings.
pub fn verify_stability(
    matching: &Matching,
    tables: &PreferenceTables,
    capacities: &BTreeMap<ResourceId, u32>,
) -> StabilityReport {
    let mut violations = Vec::new();
    if let Err(v) = matching.check_structure(capacities) {
        violations.push(v);
    }
    for (m, r) in &matching.assignment {
        if tables.rpl_rank(m, r).is_none() {
            violations.push(format!("{m} assigned to {r}, which is not in its preference list"));
        }
        if tables.mpl_rank(r, m).is_none() {
            violations.push(format!("{r} holds {m}, which is not in its preference list"));
        }
    }

    let mut blocking_pairs = Vec::new();
    for (m, rpl_list) in &tables.rpl {
        let current_rank = matching.resource_of(m).and_then(|r| tables.rpl_rank(m, r));
        for (candidate_rank, (r, _)) in rpl_list.iter().enumerate() {
            let m_prefers = match current_rank {
                None => true, // unplaced: any acceptable resource is an improvement
                Some(cur) => candidate_rank < cur,
            };
            if !m_prefers {
                continue;
            }
            let Some(m_rank_at_r) = tables.mpl_rank(r, m) else {
                continue; // not mutually acceptable
            };
            let capacity = capacities.get(r).copied().unwrap_or(0) as usize;
            let holdings = matching.alloc.get(r).map(Vec::as_slice).unwrap_or(&[]);
            let r_prefers = holdings.len() < capacity
                || holdings.iter().any(|held| {
                    tables
                        .mpl_rank(r, &held.microservice)
                        .map(|held_rank| m_rank_at_r < held_rank)
                        .unwrap_or(true)
                });
            if r_prefers {
                blocking_pairs.push(BlockingPair { microservice: m.clone(), resource: r.clone() });
            }
        }
    }
    StabilityReport {
        stable: violations.is_empty() && blocking_pairs.is_empty(),
        blocking_pairs,
        violations,
    }
}

/// One matching game inside a staged run: the candidates it placed, the
/// tables it played on, and the capacities that were still free. Kept so the
/// stability of every stage can be re-verified independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageGame {
    pub level: usize,
    pub candidates: BTreeSet<MicroserviceId>,
    pub tables: PreferenceTables,
    pub capacities: BTreeMap<ResourceId, u32>,
}

/// A complete placement run: the merged matching plus per-stage games.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagedOutcome {
    pub matching: Matching,
    pub stages: Vec<StageGame>,
}

impl StagedOutcome {
    /// Restricts the merged matching to one stage's candidates so it can be
    /// verified against that stage's tables.
    fn stage_matching(&self, stage: &StageGame) -> Matching {
        let mut sub = Matching::default();
        for (r, list) in &self.matching.alloc {
            for e in list {
                if stage.candidates.contains(&e.microservice) {
                    sub.insert_allocation(r, e.microservice.clone(), e.residual_bw);
                }
            }
        }
        sub.unplaced = self
            .matching
            .unplaced
            .iter()
            .filter(|m| stage.candidates.contains(*m))
            .cloned()
            .collect();
        sub
    }

    /// Verifies every stage's game against its own tables and merges the
    /// reports.
    pub fn verify(&self) -> StabilityReport {
        let mut report =
            StabilityReport { stable: true, blocking_pairs: Vec::new(), violations: Vec::new() };
        for stage in &self.stages {
            let sub = self.stage_matching(stage);
            report.merge(verify_stability(&sub, &stage.tables, &stage.capacities));
        }
        report
    }
}

/// Runs the full placement pipeline.
///
/// In staged mode the DAG is processed level by level: each level's
/// preference tables are built from the placements fixed by earlier levels,
/// the game runs against the capacities still free, and its placements are
/// folded into the global matching (placed microservices are never revisited,
/// so resources with no free slot are withheld from later tables). In static
/// mode a single game covers all microservices, with every channel resolved
/// from the source gateway.
pub fn staged_coda(
    app: &StreamApplication,
    topology: &Topology,
    gateway: &ResourceId,
    cfg: &MatchRunConfig,
) -> Result<StagedOutcome, MatchingError> {
    let groups: Vec<Vec<MicroserviceId>> = match cfg.mode {
        RankingMode::Staged => dag_levels(app),
        RankingMode::Static => vec![app.microservice_ids().cloned().collect()],
    };

    let mut placed: BTreeMap<MicroserviceId, ResourceId> = BTreeMap::new();
    let mut merged = Matching::default();
    let mut stages = Vec::new();

    for (level, group) in groups.into_iter().enumerate() {
        let mut candidates: BTreeSet<MicroserviceId> = group.into_iter().collect();
        if cfg.mode == RankingMode::Staged {
            // A candidate below an unplaced upstream has no computable channel
            // cost; it is transitively unplaceable.
            let orphaned: Vec<MicroserviceId> = candidates
                .iter()
                .filter(|m| {
                    *m != app.source_id()
                        && app.incoming(m).any(|e| !placed.contains_key(&e.from))
                })
                .cloned()
                .collect();
            for m in orphaned {
                candidates.remove(&m);
                merged.unplaced.push(m);
            }
        }
        let remaining: BTreeMap<ResourceId, u32> = topology
            .resources()
            .map(|r| {
                let used = merged.alloc.get(&r.id).map(Vec::len).unwrap_or(0) as u32;
                (r.id.clone(), r.capacity.saturating_sub(used))
            })
            .collect();
        let usable: BTreeSet<ResourceId> =
            remaining.iter().filter(|(_, c)| **c > 0).map(|(r, _)| r.clone()).collect();

        debug!("level {level}: {} candidates, {} usable resources", candidates.len(), usable.len());
        let ctx = RankContext { app, topology, gateway, mode: cfg.mode, placed: &placed };
        let tables = build_tables(&ctx, &candidates, &usable)?;
        let game_caps: BTreeMap<ResourceId, u32> =
            usable.iter().map(|r| (r.clone(), remaining[r])).collect();
        let result = coda_match(&tables, &game_caps, cfg)?;

        for (r, list) in &result.alloc {
            for e in list {
                placed.insert(e.microservice.clone(), r.clone());
                merged.insert_allocation(r, e.microservice.clone(), e.residual_bw);
            }
        }
        merged.unplaced.extend(result.unplaced.iter().cloned());
        let offset = merged.trace.len();
        merged.trace.extend(result.trace.into_iter().map(|mut t| {
            t.step += offset;
            t
        }));
        stages.push(StageGame { level, candidates, tables, capacities: game_caps });
    }
    Ok(StagedOutcome { matching: merged, stages })
}
