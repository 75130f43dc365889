//! Test-only oracles, compiled behind the `testkit` feature.
//!
//! These deliberately re-derive results along a different path than the
//! library: completion times by replaying every element through an explicit
//! clock, and stability by enumerating entire assignment spaces. Test suites
//! compare library output against them.

use std::collections::BTreeMap;

use crate::matching::{verify_stability, StabilityReport};
use crate::model::{
    topological_order, Matching, MicroserviceId, ResourceId, StreamApplication, Topology,
};
use crate::ranking::PreferenceTables;

/// Sequential event replay of the whole application under a fixed placement.
///
/// Walks the DAG in topological order. For every incoming stream of a
/// microservice an explicit clock starts at the upstream's completion and
/// advances element by element: first the transfer (size over bandwidth plus
/// channel latency), then the compute step. A microservice finishes when the
/// slowest of its per-stream clocks does; joins therefore wait for all
/// upstream data. No closed-form summation is used anywhere.
pub fn replay_completion(
    app: &StreamApplication,
    topology: &Topology,
    matching: &Matching,
    gateway: &ResourceId,
) -> BTreeMap<MicroserviceId, f64> {
    let mut finished: BTreeMap<MicroserviceId, f64> = BTreeMap::new();
    for m_id in topological_order(app) {
        let m = app.microservice(&m_id).unwrap();
        let r_id = matching.resource_of(&m_id).expect("replay needs a complete placement");
        let r = topology.resource(r_id).unwrap();

        // (origin resource, stream, upstream completion)
        let feeds: Vec<(ResourceId, &crate::model::DataStream, f64)> =
            if &m_id == app.source_id() {
                vec![(gateway.clone(), app.src_stream(), 0.0)]
            } else {
                app.incoming(&m_id)
                    .map(|e| {
                        let q = matching.resource_of(&e.from).unwrap().clone();
                        (q, &e.stream, finished[&e.from])
                    })
                    .collect()
            };

        let barrier = feeds.iter().map(|f| f.2).fold(0.0f64, f64::max);
        let mut done = 0.0f64;
        for (q, stream, _) in &feeds {
            let ch = topology.channel_between(q, r_id).unwrap();
            let mut clock = barrier;
            for &element in &stream.element_sizes {
                if !ch.is_self() {
                    clock += element / ch.bandwidth;
                    clock += ch.latency;
                }
                clock += m.cpu_demand / r.cpu_speed;
            }
            done = done.max(clock);
        }
        finished.insert(m_id, done);
    }
    finished
}

/// Exhaustively enumerates every assignment over the given tables (each
/// microservice placed on one resource of its preference list or left out)
/// that respects capacities, and returns those with no blocking pair and no
/// structural violation.
pub fn enumerate_stable_matchings(
    tables: &PreferenceTables,
    capacities: &BTreeMap<ResourceId, u32>,
) -> Vec<Matching> {
    let microservices: Vec<&MicroserviceId> = tables.rpl.keys().collect();
    let mut stable = Vec::new();
    let mut current: Vec<Option<ResourceId>> = vec![None; microservices.len()];
    enumerate(tables, capacities, &microservices, 0, &mut current, &mut stable);
    stable
}

fn enumerate(
    tables: &PreferenceTables,
    capacities: &BTreeMap<ResourceId, u32>,
    microservices: &[&MicroserviceId],
    index: usize,
    current: &mut Vec<Option<ResourceId>>,
    stable: &mut Vec<Matching>,
) {
    if index == microservices.len() {
        let candidate = to_matching(tables, microservices, current);
        let report = verify_stability(&candidate, tables, capacities);
        if report.stable {
            stable.push(candidate);
        }
        return;
    }
    let m = microservices[index];
    current[index] = None;
    enumerate(tables, capacities, microservices, index + 1, current, stable);
    for (r, _) in &tables.rpl[m] {
        let used = current[..index].iter().filter(|c| c.as_ref() == Some(r)).count();
        if used < capacities.get(r).copied().unwrap_or(0) as usize {
            current[index] = Some(r.clone());
            enumerate(tables, capacities, microservices, index + 1, current, stable);
            current[index] = None;
        }
    }
}

fn to_matching(
    tables: &PreferenceTables,
    microservices: &[&MicroserviceId],
    chosen: &[Option<ResourceId>],
) -> Matching {
    let mut m = Matching::default();
    for (i, choice) in chosen.iter().enumerate() {
        match choice {
            Some(r) => {
                let rank = tables.mpl_rank(r, microservices[i]);
                let score = rank
                    .and_then(|k| tables.mpl.get(r).map(|l| l[k].1))
                    .unwrap_or(f64::NEG_INFINITY);
                m.insert_allocation(r, microservices[i].clone(), score);
            }
            None => m.unplaced.push(microservices[i].clone()),
        }
    }
    m
}

/// Compares a matching against every enumerated stable matching: counts the
/// alternatives in which some microservice gets a strictly better-ranked
/// resource while no resource's k-th best holding gets worse. Used as an
/// informational probe of microservice-optimality, not as a hard gate.
pub fn count_dominating_stable_matchings(
    result: &Matching,
    tables: &PreferenceTables,
    capacities: &BTreeMap<ResourceId, u32>,
) -> (usize, usize) {
    let all = enumerate_stable_matchings(tables, capacities);
    let total = all.len();
    let dominating = all
        .iter()
        .filter(|alt| {
            let someone_better = tables.rpl.keys().any(|m| {
                let alt_rank = alt.resource_of(m).and_then(|r| tables.rpl_rank(m, r));
                let cur_rank = result.resource_of(m).and_then(|r| tables.rpl_rank(m, r));
                match (alt_rank, cur_rank) {
                    (Some(a), Some(c)) => a < c,
                    (Some(_), None) => true,
                    _ => false,
                }
            });
            someone_better && resources_no_worse(alt, result, tables)
        })
        .count();
    (dominating, total)
}

fn resources_no_worse(alt: &Matching, cur: &Matching, tables: &PreferenceTables) -> bool {
    tables.mpl.keys().all(|r| {
        let ranks = |m: &Matching| -> Vec<usize> {
            let mut v: Vec<usize> = m
                .allocated(r)
                .into_iter()
                .filter_map(|id| tables.mpl_rank(r, id))
                .collect();
            v.sort_unstable();
            v
        };
        let a = ranks(alt);
        let c = ranks(cur);
        // Pointwise: the k-th best holding must rank at least as well.
        a.len() >= c.len() && c.iter().zip(a.iter()).all(|(ck, ak)| ak <= ck)
    })
}

/// Replays a trace and checks capacity safety: a match may overflow a
/// resource by exactly one, and the very next record must be the rejection
/// that resolves it. Returns the first violation found.
pub fn replay_capacity_safety(
    matching: &Matching,
    capacities: &BTreeMap<ResourceId, u32>,
) -> Result<(), String> {
    use crate::model::MatchState;
    let mut held: BTreeMap<&ResourceId, i64> = BTreeMap::new();
    let mut pending_overflow: Option<&ResourceId> = None;
    for rec in &matching.trace {
        if let Some(r) = pending_overflow.take() {
            if rec.state != MatchState::S21 || &rec.resource != r {
                return Err(format!("overflow on {r} left unresolved at step {}", rec.step));
            }
        }
        match rec.state {
            MatchState::S1 | MatchState::S2 => {
                let h = held.entry(&rec.resource).or_insert(0);
                *h += 1;
                let cap = capacities.get(&rec.resource).copied().unwrap_or(0) as i64;
                if *h > cap + 1 {
                    return Err(format!("{} holds {h} > {} + 1 at step {}", rec.resource, cap, rec.step));
                }
                if *h > cap {
                    pending_overflow = Some(&rec.resource);
                }
            }
            MatchState::S21 => {
                *held.entry(&rec.resource).or_insert(0) -= 1;
            }
            MatchState::S22 => {}
        }
    }
    if let Some(r) = pending_overflow {
        return Err(format!("run ended with {r} over capacity"));
    }
    for (r, h) in held {
        let cap = capacities.get(r).copied().unwrap_or(0) as i64;
        if h > cap {
            return Err(format!("{r} ends holding {h} > capacity {cap}"));
        }
    }
    Ok(())
}

/// Shrinks an unstable instance by repeatedly dropping microservices while
/// the instability persists. Returns the reduced tables plus the report.
pub fn minimize_unstable_tables(
    tables: &PreferenceTables,
    capacities: &BTreeMap<ResourceId, u32>,
    run: impl Fn(&PreferenceTables) -> Option<Matching>,
) -> (PreferenceTables, StabilityReport) {
    let unstable = |t: &PreferenceTables| -> Option<StabilityReport> {
        let m = run(t)?;
        let report = verify_stability(&m, t, capacities);
        (!report.stable).then_some(report)
    };
    let mut current = tables.clone();
    let mut report = match unstable(&current) {
        Some(r) => r,
        None => {
            return (
                current,
                StabilityReport { stable: true, blocking_pairs: vec![], violations: vec![] },
            )
        }
    };
    loop {
        let mut shrunk = false;
        for m in current.rpl.keys().cloned().collect::<Vec<_>>() {
            let mut candidate = current.clone();
            candidate.rpl.remove(&m);
            for list in candidate.mpl.values_mut() {
                list.retain(|(id, _)| id != &m);
            }
            if let Some(r) = unstable(&candidate) {
                current = candidate;
                report = r;
                shrunk = true;
                break;
            }
        }
        if !shrunk {
            return (current, report);
        }
    }
}
