//! The scenario document: JSON schema, unit conversion and validation.
//!
//! Files use operator-friendly units (MB, GB, Mbit/s, ms); loading converts
//! to the canonical internal units and runs full model validation, so a
//! loaded [`Scenario`] is always safe to hand to the engine.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    build_application, DataStream, Edge, Microservice, ModelError, NetworkChannel, ResourceId,
    Resource, StreamApplication, Tier, Topology,
};
use crate::units;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read `{path}`: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(#[from] ModelError),
    #[error("source gateway `{0}` is not a declared resource")]
    UnknownGateway(ResourceId),
}

/// On-disk shape of a scenario. All numeric fields carry the units named in
/// the field suffixes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub resources: Vec<ResourceDoc>,
    pub channels: Vec<ChannelDoc>,
    pub application: ApplicationDoc,
    pub source: String,
    pub sink: String,
    /// Resource where the application's input stream physically enters.
    pub src_gateway: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceDoc {
    pub id: String,
    pub tier: Tier,
    pub cpu_mips: f64,
    pub mem_mb: f64,
    pub stor_gb: f64,
    pub capacity: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDoc {
    pub from: String,
    pub to: String,
    pub bandwidth_mbps: f64,
    pub latency_ms: f64,
    /// When set, the declaration expands to both directed channels.
    #[serde(default)]
    pub symmetric: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplicationDoc {
    pub microservices: Vec<MicroserviceDoc>,
    pub edges: Vec<EdgeDoc>,
    /// The stream entering the source microservice from outside.
    pub src_stream: StreamDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroserviceDoc {
    pub id: String,
    pub cpu_mi: f64,
    pub mem_mb: f64,
    pub stor_gb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub from: String,
    pub to: String,
    pub element_sizes_mb: Vec<f64>,
    pub rate_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamDoc {
    pub element_sizes_mb: Vec<f64>,
    pub rate_per_s: f64,
}

impl StreamDoc {
    fn to_stream(&self) -> DataStream {
        DataStream::new(
            self.element_sizes_mb.iter().map(|mb| units::megabytes_to_bits(*mb)).collect(),
            self.rate_per_s,
        )
    }
}

/// A validated scenario in canonical units.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub application: StreamApplication,
    pub topology: Topology,
    pub gateway: ResourceId,
}

impl ScenarioDoc {
    pub fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        let resources = self
            .resources
            .into_iter()
            .map(|r| Resource {
                id: ResourceId(r.id),
                cpu_speed: r.cpu_mips,
                mem: units::megabytes_to_bytes(r.mem_mb),
                stor: units::gigabytes_to_bytes(r.stor_gb),
                capacity: r.capacity,
                tier: r.tier,
            })
            .collect();
        let mut channels = Vec::new();
        for c in self.channels {
            let bandwidth = units::mbps_to_bits_per_second(c.bandwidth_mbps);
            let latency = units::milliseconds_to_seconds(c.latency_ms);
            channels.push(NetworkChannel {
                from: ResourceId(c.from.clone()),
                to: ResourceId(c.to.clone()),
                bandwidth,
                latency,
            });
            if c.symmetric {
                channels.push(NetworkChannel {
                    from: ResourceId(c.to),
                    to: ResourceId(c.from),
                    bandwidth,
                    latency,
                });
            }
        }
        let topology = Topology::new(resources, channels)?;

        let microservices = self
            .application
            .microservices
            .into_iter()
            .map(|m| Microservice {
                id: m.id.as_str().into(),
                cpu_demand: m.cpu_mi,
                mem_demand: units::megabytes_to_bytes(m.mem_mb),
                stor_demand: units::gigabytes_to_bytes(m.stor_gb),
            })
            .collect();
        let edges = self
            .application
            .edges
            .into_iter()
            .map(|e| Edge {
                from: e.from.as_str().into(),
                to: e.to.as_str().into(),
                stream: DataStream::new(
                    e.element_sizes_mb.iter().map(|mb| units::megabytes_to_bits(*mb)).collect(),
                    e.rate_per_s,
                ),
            })
            .collect();
        let application = build_application(
            microservices,
            edges,
            self.source.as_str().into(),
            self.sink.as_str().into(),
            self.application.src_stream.to_stream(),
        )?;

        let gateway = ResourceId(self.src_gateway);
        let known: BTreeSet<_> = topology.resource_ids().collect();
        if !known.contains(&gateway) {
            return Err(ScenarioError::UnknownGateway(gateway));
        }
        Ok(Scenario { application, topology, gateway })
    }
}

pub fn load_scenario_str(json: &str) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc =
        serde_json::from_str(json).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    doc.into_scenario()
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_scenario_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_doc() -> serde_json::Value {
        serde_json::json!({
            "resources": [
                {"id": "gw", "tier": "fog1", "cpu_mips": 20000.0, "mem_mb": 8000.0, "stor_gb": 16.0, "capacity": 2},
                {"id": "cloud", "tier": "cloud", "cpu_mips": 100000.0, "mem_mb": 128000.0, "stor_gb": 1200.0, "capacity": 8}
            ],
            "channels": [
                {"from": "gw", "to": "cloud", "bandwidth_mbps": 200.0, "latency_ms": 100.0, "symmetric": true}
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
        })
    }

    #[test]
    fn loads_and_converts_units() {
        let s = load_scenario_str(&minimal_doc().to_string()).unwrap();
        let ch = s.topology.channel_between(&"gw".into(), &"cloud".into()).unwrap();
        assert_eq!(ch.bandwidth, 2.0e8);
        assert_eq!(ch.latency, 0.1);
        // symmetric expansion declared the reverse direction too
        assert!(s.topology.channel_between(&"cloud".into(), &"gw".into()).is_ok());
        let a = s.application.microservice(&"a".into()).unwrap();
        assert_eq!(a.mem_demand, 4.0e8);
        assert_eq!(a.stor_demand, 3.0e9);
        assert_eq!(s.application.src_stream().element_sizes, vec![8.0e7]);
    }

    #[test]
    fn negative_bandwidth_is_a_validation_error() {
        let mut doc = minimal_doc();
        doc["channels"][0]["bandwidth_mbps"] = serde_json::json!(-5.0);
        let err = load_scenario_str(&doc.to_string()).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation(_)), "{err}");
    }

    #[test]
    fn missing_gateway_field_is_a_parse_error_naming_the_field() {
        let mut doc = minimal_doc();
        doc.as_object_mut().unwrap().remove("src_gateway");
        let err = load_scenario_str(&doc.to_string()).unwrap_err();
        match err {
            ScenarioError::Parse(msg) => assert!(msg.contains("src_gateway"), "{msg}"),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn undeclared_gateway_is_rejected() {
        let mut doc = minimal_doc();
        doc["src_gateway"] = serde_json::json!("nowhere");
        let err = load_scenario_str(&doc.to_string()).unwrap_err();
        assert!(matches!(err, ScenarioError::UnknownGateway(_)));
    }
}
