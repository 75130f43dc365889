//! Seeded random scenario generation.
//!
//! Applications come out as random series-parallel DAGs (single source,
//! single sink); requirements are drawn from the case-study ranges and the
//! infrastructure from the simulated three-tier setup, so generated
//! documents always pass [`super::load_scenario_str`] validation. The same
//! seed and parameters always produce the identical document.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::scenario::{
    ApplicationDoc, ChannelDoc, EdgeDoc, MicroserviceDoc, ResourceDoc, ScenarioDoc, StreamDoc,
};
use crate::model::Tier;

#[derive(Debug, Clone)]
pub struct GenParams {
    pub n_microservices: usize,
    pub n_resources: usize,
    /// Per-tier capacity ranges (inclusive): cloud, fog2, fog1.
    pub capacity_cloud: (u32, u32),
    pub capacity_fog2: (u32, u32),
    pub capacity_fog1: (u32, u32),
    /// Elements per stream (inclusive range).
    pub elements: (usize, usize),
    /// Element sizes in MB (inclusive range).
    pub element_size_mb: (f64, f64),
    /// Ingress rates in 1/s (inclusive range).
    pub rate_per_s: (f64, f64),
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            n_microservices: 7,
            n_resources: 5,
            capacity_cloud: (6, 8),
            capacity_fog2: (2, 5),
            capacity_fog1: (1, 3),
            elements: (1, 3),
            element_size_mb: (0.1, 10.0),
            rate_per_s: (0.2, 40.0),
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    rng.gen_range(range.0..=range.1)
}

/// Recursive series-parallel construction over a node budget. Every produced
/// fragment has a single entry and a single exit node.
fn series_parallel(rng: &mut ChaCha8Rng, n: usize, next_id: &mut usize) -> (Vec<usize>, Vec<(usize, usize)>, usize, usize) {
    assert!(n >= 1);
    if n == 1 {
        let id = *next_id;
        *next_id += 1;
        return (vec![id], vec![], id, id);
    }
    // A parallel composition needs two branch nodes plus dedicated entry and
    // exit, so below four nodes only series composition fits.
    let parallel = n >= 4 && rng.gen_bool(0.5);
    if parallel {
        let inner = n - 2;
        let left = rng.gen_range(1..inner);
        let right = inner - left;
        let entry = *next_id;
        *next_id += 1;
        let (mut nodes_l, mut edges_l, src_l, snk_l) = series_parallel(rng, left, next_id);
        let (mut nodes_r, mut edges_r, src_r, snk_r) = series_parallel(rng, right, next_id);
        let exit = *next_id;
        *next_id += 1;
        let mut nodes = vec![entry];
        nodes.append(&mut nodes_l);
        nodes.append(&mut nodes_r);
        nodes.push(exit);
        let mut edges = vec![(entry, src_l), (entry, src_r), (snk_l, exit), (snk_r, exit)];
        edges.append(&mut edges_l);
        edges.append(&mut edges_r);
        (nodes, edges, entry, exit)
    } else {
        let first = rng.gen_range(1..n);
        let (mut nodes_a, mut edges_a, src_a, snk_a) = series_parallel(rng, first, next_id);
        let (mut nodes_b, mut edges_b, src_b, snk_b) = series_parallel(rng, n - first, next_id);
        let mut nodes = Vec::new();
        nodes.append(&mut nodes_a);
        nodes.append(&mut nodes_b);
        let mut edges = vec![(snk_a, src_b)];
        edges.append(&mut edges_a);
        edges.append(&mut edges_b);
        (nodes, edges, src_a, snk_b)
    }
}

/// Builds a deterministic random scenario document for `seed`.
pub fn generate_scenario(seed: u64, params: &GenParams) -> ScenarioDoc {
    assert!(params.n_microservices >= 1 && params.n_resources >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Resources: cycle the tiers so every tier is present when n >= 3.
    let tiers = [Tier::Fog1, Tier::Fog2, Tier::Cloud];
    let mut resources = Vec::new();
    for i in 0..params.n_resources {
        let tier = tiers[i % tiers.len()];
        let (cpu, mem_mb, stor_gb, cap_range) = match tier {
            Tier::Cloud => (100_000.0, 128_000.0, 1200.0, params.capacity_cloud),
            Tier::Fog2 => {
                if rng.gen_bool(0.5) {
                    (80_000.0, 64_000.0, 250.0, params.capacity_fog2)
                } else {
                    (75_000.0, 32_000.0, 128.0, params.capacity_fog2)
                }
            }
            Tier::Fog1 => {
                if rng.gen_bool(0.5) {
                    (30_000.0, 16_000.0, 64.0, params.capacity_fog1)
                } else {
                    (20_000.0, 8_000.0, 16.0, params.capacity_fog1)
                }
            }
        };
        resources.push(ResourceDoc {
            id: format!("r{i:02}_{tier}"),
            tier,
            cpu_mips: cpu,
            mem_mb,
            stor_gb,
            capacity: rng.gen_range(cap_range.0..=cap_range.1),
        });
    }

    // Full directed mesh; bandwidth follows the destination's access link,
    // latency the tier distance.
    let access_mbps = |tier: Tier, cpu: f64| match tier {
        Tier::Cloud => 200.0,
        Tier::Fog2 => {
            if cpu == 80_000.0 {
                200.0
            } else {
                500.0
            }
        }
        Tier::Fog1 => 1000.0,
    };
    let latency_ms = |a: Tier, b: Tier| match (a, b) {
        (x, y) if x == y => 3.0,
        (Tier::Fog1, Tier::Fog2) | (Tier::Fog2, Tier::Fog1) => 10.0,
        (Tier::Fog2, Tier::Cloud) | (Tier::Cloud, Tier::Fog2) => 50.0,
        _ => 100.0,
    };
    let mut channels = Vec::new();
    for from in &resources {
        for to in &resources {
            if from.id == to.id {
                continue;
            }
            channels.push(ChannelDoc {
                from: from.id.clone(),
                to: to.id.clone(),
                bandwidth_mbps: access_mbps(to.tier, to.cpu_mips),
                latency_ms: latency_ms(from.tier, to.tier),
                symmetric: false,
            });
        }
    }

    // Application DAG plus requirements from the case-study ranges.
    let mut next_id = 0usize;
    let (_, raw_edges, src, snk) = series_parallel(&mut rng, params.n_microservices, &mut next_id);
    let name = |i: usize| format!("m{i:02}");
    let microservices = (0..params.n_microservices)
        .map(|i| MicroserviceDoc {
            id: name(i),
            cpu_mi: uniform(&mut rng, (1_000.0, 40_000.0)),
            mem_mb: uniform(&mut rng, (100.0, 500.0)),
            stor_gb: uniform(&mut rng, (0.5, 5.0)),
        })
        .collect();
    let stream = |rng: &mut ChaCha8Rng| StreamDoc {
        element_sizes_mb: (0..rng.gen_range(params.elements.0..=params.elements.1))
            .map(|_| uniform(rng, params.element_size_mb))
            .collect(),
        rate_per_s: uniform(rng, params.rate_per_s),
    };
    let mut edges: Vec<(usize, usize)> = raw_edges;
    edges.sort();
    let edges = edges
        .into_iter()
        .map(|(f, t)| {
            let s = stream(&mut rng);
            EdgeDoc {
                from: name(f),
                to: name(t),
                element_sizes_mb: s.element_sizes_mb,
                rate_per_s: s.rate_per_s,
            }
        })
        .collect();
    let src_stream = stream(&mut rng);

    let gateway = resources
        .iter()
        .find(|r| r.tier == Tier::Fog1)
        .unwrap_or(&resources[0])
        .id
        .clone();
    ScenarioDoc {
        resources,
        channels,
        application: ApplicationDoc { microservices, edges, src_stream },
        source: name(src),
        sink: name(snk),
        src_gateway: gateway,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::load_scenario_str;

    #[test]
    fn same_seed_same_document() {
        let p = GenParams { n_microservices: 7, n_resources: 7, ..Default::default() };
        let a = serde_json::to_string(&generate_scenario(1, &p)).unwrap();
        let b = serde_json::to_string(&generate_scenario(1, &p)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let p = GenParams::default();
        let a = serde_json::to_string(&generate_scenario(1, &p)).unwrap();
        let b = serde_json::to_string(&generate_scenario(2, &p)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn generated_scenarios_always_validate() {
        for seed in 0..1000 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0da);
            let p = GenParams {
                n_microservices: rng.gen_range(1..=20),
                n_resources: rng.gen_range(1..=12),
                ..Default::default()
            };
            let doc = generate_scenario(seed, &p);
            let json = serde_json::to_string(&doc).unwrap();
            load_scenario_str(&json).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        }
    }
}
