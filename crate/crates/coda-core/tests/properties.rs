//! Property tests for the cost model, tables, matching and harness.

use std::collections::BTreeMap;

use coda_core::harness::{generate_scenario, load_scenario_str, GenParams};
use coda_core::matching::{coda_match, staged_coda, verify_stability, MatchRunConfig};
use coda_core::model::{DataStream, Microservice, MicroserviceId, NetworkChannel, Resource, ResourceId, Tier};
use coda_core::ranking::{
    element_processing_time, microservice_stream_time, residual_bandwidth, PreferenceTables,
    RankingMode,
};
use coda_core::testkit::replay_capacity_safety;
use proptest::prelude::*;

fn microservice(cpu: f64) -> Microservice {
    Microservice { id: "m".into(), cpu_demand: cpu, mem_demand: 0.0, stor_demand: 0.0 }
}

fn resource(speed: f64) -> Resource {
    Resource { id: "r".into(), cpu_speed: speed, mem: 1.0, stor: 1.0, capacity: 1, tier: Tier::Cloud }
}

fn channel(bw: f64, lat: f64) -> NetworkChannel {
    NetworkChannel { from: "q".into(), to: "r".into(), bandwidth: bw, latency: lat }
}

proptest! {
    /// More work strictly increases the stream time.
    #[test]
    fn stream_time_is_strictly_monotone_in_cpu_demand(
        cpu in 1.0e3..4.0e4f64,
        bump in 1.0..1.0e4f64,
        speed in 2.0e4..1.0e5f64,
        bits in 8.0e5..8.0e7f64,
        bw in 2.0e8..1.0e9f64,
        lat in 0.0..0.1f64,
        n in 1usize..4,
    ) {
        let stream = DataStream::new(vec![bits; n], 1.0);
        let r = resource(speed);
        let ch = channel(bw, lat);
        let t0 = microservice_stream_time(&microservice(cpu), &stream, &r, &ch);
        let t1 = microservice_stream_time(&microservice(cpu + bump), &stream, &r, &ch);
        prop_assert!(t1 > t0);
    }

    /// More bandwidth strictly decreases the stream time off the diagonal.
    #[test]
    fn stream_time_is_strictly_antitone_in_bandwidth(
        cpu in 1.0e3..4.0e4f64,
        speed in 2.0e4..1.0e5f64,
        bits in 8.0e5..8.0e7f64,
        bw in 2.0e8..9.0e8f64,
        factor in 1.01..4.0f64,
        lat in 0.0..0.1f64,
    ) {
        let stream = DataStream::new(vec![bits], 1.0);
        let r = resource(speed);
        let t0 = microservice_stream_time(&microservice(cpu), &stream, &r, &channel(bw, lat));
        let t1 = microservice_stream_time(&microservice(cpu), &stream, &r, &channel(bw * factor, lat));
        prop_assert!(t1 < t0);
    }

    /// Residual bandwidth is affine in the rate: checked against a per-element
    /// brute-force accumulation.
    #[test]
    fn residual_bandwidth_matches_bruteforce_accumulation(
        sizes in proptest::collection::vec(8.0e5..8.0e7f64, 1..6),
        rate in 0.2..40.0f64,
        bw in 2.0e8..1.0e9f64,
    ) {
        let stream = DataStream::new(sizes.clone(), rate);
        let ch = channel(bw, 0.01);
        let mut brute = bw;
        for s in &sizes {
            brute -= rate * s;
        }
        let fast = residual_bandwidth(&stream, &ch);
        prop_assert!((fast - brute).abs() <= 1e-6 * brute.abs().max(1.0));
        // Affine in rate: doubling the rate doubles the consumed bandwidth.
        let doubled = DataStream::new(sizes, rate * 2.0);
        let consumed = bw - fast;
        prop_assert!(((bw - residual_bandwidth(&doubled, &ch)) - 2.0 * consumed).abs() <= 1e-6 * consumed.abs().max(1.0));
    }

    /// The element time decomposes into its three terms.
    #[test]
    fn element_time_decomposes(
        cpu in 1.0e3..4.0e4f64,
        speed in 2.0e4..1.0e5f64,
        bits in 8.0e5..8.0e7f64,
        bw in 2.0e8..1.0e9f64,
        lat in 0.0..0.1f64,
    ) {
        let t = element_processing_time(&microservice(cpu), bits, &resource(speed), &channel(bw, lat));
        prop_assert!((t - (cpu / speed + bits / bw + lat)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Generated scenarios rank into tables satisfying the sort and mutual
    /// acceptability contracts at every stage, and the game stays stable.
    #[test]
    fn staged_runs_keep_table_invariants_and_stability(seed in 0u64..10_000) {
        let p = GenParams {
            n_microservices: (seed % 18 + 2) as usize,
            n_resources: (seed % 9 + 3) as usize,
            ..Default::default()
        };
        let doc = generate_scenario(seed, &p);
        let s = load_scenario_str(&serde_json::to_string(&doc).unwrap()).unwrap();
        let outcome = staged_coda(&s.application, &s.topology, &s.gateway, &MatchRunConfig::default()).unwrap();
        for stage in &outcome.stages {
            stage.tables.check_invariants().unwrap();
        }
        let report = outcome.verify();
        prop_assert!(report.stable, "{:?}", report);

        // Replaying the merged trace never leaves a resource over capacity
        // after an overflow resolves.
        let caps: BTreeMap<_, _> =
            s.topology.resources().map(|r| (r.id.clone(), r.capacity)).collect();
        replay_capacity_safety(&outcome.matching, &caps).unwrap();

        // Unplaced microservices never hold an assignment.
        for m in &outcome.matching.unplaced {
            prop_assert!(outcome.matching.resource_of(m).is_none());
        }
    }

    /// Byte-identical matchings from identical inputs, in both modes.
    #[test]
    fn matching_is_deterministic(seed in 0u64..10_000) {
        let p = GenParams { n_microservices: (seed % 12 + 2) as usize, n_resources: (seed % 6 + 3) as usize, ..Default::default() };
        let doc = generate_scenario(seed, &p);
        let s = load_scenario_str(&serde_json::to_string(&doc).unwrap()).unwrap();
        for mode in [RankingMode::Staged, RankingMode::Static] {
            let cfg = MatchRunConfig::with_mode(mode);
            let a = staged_coda(&s.application, &s.topology, &s.gateway, &cfg).unwrap();
            let b = staged_coda(&s.application, &s.topology, &s.gateway, &cfg).unwrap();
            prop_assert_eq!(
                serde_json::to_string(&a.matching).unwrap(),
                serde_json::to_string(&b.matching).unwrap()
            );
        }
    }

    /// Scaling every bandwidth by k divides every traffic term by exactly k.
    #[test]
    fn traffic_is_inverse_linear_in_bandwidth(seed in 0u64..5_000, k in 2.0..8.0f64) {
        let p = GenParams { n_microservices: (seed % 6 + 2) as usize, n_resources: (seed % 4 + 3) as usize, ..Default::default() };
        let mut doc = generate_scenario(seed, &p);
        let s1 = load_scenario_str(&serde_json::to_string(&doc).unwrap()).unwrap();
        for ch in doc.channels.iter_mut() {
            ch.bandwidth_mbps *= k;
        }
        let s2 = load_scenario_str(&serde_json::to_string(&doc).unwrap()).unwrap();

        // One fixed placement evaluated under both topologies.
        let mut placement = coda_core::model::Matching::default();
        let resources: Vec<_> = s1.topology.resource_ids().cloned().collect();
        for (i, m) in s1.application.microservice_ids().enumerate() {
            placement.insert_allocation(&resources[i % resources.len()], m.clone(), 0.0);
        }
        let t1 = coda_core::metrics::evaluate(&s1.application, &s1.topology, &placement, &s1.gateway).unwrap();
        let t2 = coda_core::metrics::evaluate(&s2.application, &s2.topology, &placement, &s2.gateway).unwrap();
        for (a, b) in t1.per_edge_traffic.iter().zip(t2.per_edge_traffic.iter()) {
            prop_assert!((a.traffic - k * b.traffic).abs() <= 1e-9 * a.traffic.abs().max(1.0));
        }
    }

    /// On arbitrary mutually-acceptable tables, not just cost-derived ones,
    /// the game terminates stable with capacities respected throughout the
    /// replayed trace.
    #[test]
    fn random_tables_match_stably(
        seed in 0u64..1_000_000,
        n_m in 1usize..7,
        n_r in 1usize..5,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let microservices: Vec<MicroserviceId> =
            (0..n_m).map(|i| MicroserviceId(format!("m{i}"))).collect();
        let resources: Vec<ResourceId> = (0..n_r).map(|i| ResourceId(format!("r{i}"))).collect();

        let mut tables = PreferenceTables::default();
        for m in &microservices {
            tables.rpl.insert(m.clone(), Vec::new());
        }
        for r in &resources {
            tables.mpl.insert(r.clone(), Vec::new());
        }
        for m in &microservices {
            for r in &resources {
                if rng.gen_bool(0.7) {
                    tables.rpl.get_mut(m).unwrap().push((r.clone(), rng.gen_range(0.1..10.0)));
                    tables.mpl.get_mut(r).unwrap().push((m.clone(), rng.gen_range(1.0..1e9)));
                }
            }
        }
        for list in tables.rpl.values_mut() {
            list.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        }
        for list in tables.mpl.values_mut() {
            list.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        }
        tables.check_invariants().unwrap();

        let capacities: BTreeMap<ResourceId, u32> =
            resources.iter().map(|r| (r.clone(), rng.gen_range(1..=3u32))).collect();
        let pairs: usize = tables.rpl.values().map(Vec::len).sum();
        let result = coda_match(&tables, &capacities, &MatchRunConfig::default()).unwrap();

        let report = verify_stability(&result, &tables, &capacities);
        prop_assert!(report.stable, "{:?}", report);
        replay_capacity_safety(&result, &capacities).unwrap();
        // Loose structural bound: every pair yields at most one match, one
        // eviction and one deletion record.
        prop_assert!(result.trace.len() <= 3 * pairs + n_m);
    }

    /// Topological order is a permutation respecting every edge.
    #[test]
    fn topo_order_respects_edges(seed in 0u64..10_000) {
        let p = GenParams { n_microservices: (seed % 19 + 1) as usize, ..Default::default() };
        let doc = generate_scenario(seed, &p);
        let s = load_scenario_str(&serde_json::to_string(&doc).unwrap()).unwrap();
        let order = coda_core::topological_order(&s.application);
        prop_assert_eq!(order.len(), s.application.len());
        let position: BTreeMap<_, _> = order.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        for e in s.application.edges() {
            prop_assert!(position[&e.from] < position[&e.to]);
        }
    }
}
