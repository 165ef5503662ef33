//! Range-free localization of sensor nodes drifting through tree-shaped pipe
//! networks.
//!
//! Nodes float from the leaves of the network toward its root and record
//! measurement packages. Whenever a node is in range of a gateway it uploads
//! its buffered packages. The backend splits every node's stream into epochs
//! by the trend of the strongest gateway signal, anchors epoch boundaries at
//! gateways and at the edges of their radio range, and interpolates the
//! packages in between along the known pipe geometry. Encounters between
//! nodes refine the estimates through checkpoints and path rectification.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. File formats,
//! CSV output and the command line live in the `gral` crate.

#![no_std]
// `!(x > 0.0)` deliberately rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod epoch;
pub mod experiment;
pub mod graph;
pub mod localize;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod signal;
pub mod sim;

pub use epoch::{classify, merge_same_gateway, resolve_positions, Epoch, EpochOrigin, EpochSet, EpochType};
pub use graph::{EnvironmentGraph, Gateway, GatewayId, GraphError, GraphPosition, Junction, JunctionId, Link};
pub use model::{
    Checkpoint, GatewayObservation, LocalizedMeasurement, Method, NodeContact, NodeId, Package, Payload,
};
pub use pipeline::{batches_from_streams, run_pipeline, Backend, Batch, PipelineError, PipelineOutput};
pub use signal::{LinearFalloff, SignalModel};
pub use sim::{make_scenario, run_instance, InstanceOutput, NodeInsertion, ScenarioSpec};
