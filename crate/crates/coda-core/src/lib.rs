//! Placement of DAG-structured data-stream applications onto heterogeneous
//! cloud-fog resources.
//!
//! A stream application is a DAG of microservices exchanging data streams.
//! Microservices rank resources by the time it takes to receive and process
//! their streams; resources rank microservices by the bandwidth left over on
//! the channel that feeds them. A many-to-one deferred-acceptance game
//! ([`matching::coda_match`]) turns the two preference tables into a stable
//! assignment, which [`metrics`] evaluates against completion time and total
//! streaming traffic. Three reference schedulers ([`baselines`]) share the
//! same cost model for comparison, and [`harness`] loads, generates and
//! sweeps scenarios.

#![forbid(unsafe_code)]

pub mod baselines;
pub mod harness;
pub mod matching;
pub mod metrics;
pub mod model;
pub mod ranking;
pub mod units;

#[cfg(feature = "testkit")]
pub mod testkit;

pub use model::{
    build_application, topological_order, DataStream, Matching, Microservice, MicroserviceId,
    ModelError, NetworkChannel, Resource, ResourceId, StreamApplication, Tier, Topology,
};
