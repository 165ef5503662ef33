//! Packages, observations, checkpoints and localized outputs.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use thiserror::Error;

use crate::graph::{GatewayId, GraphPosition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl core::fmt::Display for NodeId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatewayObservation {
    pub gateway: GatewayId,
    pub strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeContact {
    pub peer: NodeId,
    pub strength: f64,
}

/// Measurement content carried by a package. The localizer never looks
/// inside; it is kept as raw JSON text so it survives a round trip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Payload(pub String);

impl Default for Payload {
    fn default() -> Self {
        Payload(String::from("null"))
    }
}

/// One timestamped record from a node.
#[derive(Debug, Clone, PartialEq)]
pub struct Package {
    pub node: NodeId,
    pub seq: u64,
    pub timestamp: f64,
    /// Sorted strongest first; ties broken by the lower gateway id.
    pub observations: Vec<GatewayObservation>,
    pub contacts: Vec<NodeContact>,
    pub payload: Payload,
}

fn observation_order(a: &GatewayObservation, b: &GatewayObservation) -> Ordering {
    b.strength
        .total_cmp(&a.strength)
        .then_with(|| a.gateway.cmp(&b.gateway))
}

impl Package {
    pub fn new(
        node: NodeId,
        seq: u64,
        timestamp: f64,
        mut observations: Vec<GatewayObservation>,
        contacts: Vec<NodeContact>,
        payload: Payload,
    ) -> Self {
        observations.sort_by(observation_order);
        Package {
            node,
            seq,
            timestamp,
            observations,
            contacts,
            payload,
        }
    }

    /// The strongest gateway signal, if any gateway was heard.
    pub fn strongest(&self) -> Option<(GatewayId, f64)> {
        self.observations
            .iter()
            .min_by(|a, b| observation_order(a, b))
            .map(|o| (o.gateway, o.strength))
    }

    pub fn strongest_gateway(&self) -> Option<GatewayId> {
        self.strongest().map(|(g, _)| g)
    }

    pub fn hears_gateway(&self) -> bool {
        !self.observations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub issuer: NodeId,
    pub target: NodeId,
    pub timestamp: f64,
    pub position: GraphPosition,
}

/// Localization method; also the pipeline variant selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Baseline,
    Gral,
    GralCp,
    GralPr,
    GralCpPr,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Baseline,
        Method::Gral,
        Method::GralCp,
        Method::GralPr,
        Method::GralCpPr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Gral => "gral",
            Method::GralCp => "gral+cp",
            Method::GralPr => "gral+pr",
            Method::GralCpPr => "gral+cp+pr",
        }
    }

    pub fn checkpointing(self) -> bool {
        matches!(self, Method::GralCp | Method::GralCpPr)
    }

    pub fn rectification(self) -> bool {
        matches!(self, Method::GralPr | Method::GralCpPr)
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown method {0:?}")]
pub struct UnknownMethod(pub String);

impl core::str::FromStr for Method {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| UnknownMethod(String::from(s)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizedMeasurement {
    pub node: NodeId,
    pub seq: u64,
    pub timestamp: f64,
    pub position: GraphPosition,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StreamError {
    #[error("seq regression for node {node}: {seq} after {previous}")]
    SeqRegression { node: NodeId, previous: u64, seq: u64 },
    #[error("timestamp regression for node {node}: {timestamp} after {previous}")]
    TimestampRegression {
        node: NodeId,
        previous: f64,
        timestamp: f64,
    },
    #[error("negative strength {0}")]
    NegativeStrength(f64),
    #[error("non-finite value in package")]
    NonFinite,
}

/// Enforces per-node ordering and value constraints on a package stream.
#[derive(Debug, Default, Clone)]
pub struct StreamValidator {
    last: BTreeMap<NodeId, (u64, f64)>,
}

impl StreamValidator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Checks `package` against the stream so far; returns it with
    /// observations in canonical order.
    pub fn push(&mut self, mut package: Package) -> Result<Package, StreamError> {
        if !package.timestamp.is_finite() {
            return Err(StreamError::NonFinite);
        }
        let strengths = package
            .observations
            .iter()
            .map(|o| o.strength)
            .chain(package.contacts.iter().map(|c| c.strength));
        for s in strengths {
            if !s.is_finite() {
                return Err(StreamError::NonFinite);
            }
            if s < 0.0 {
                return Err(StreamError::NegativeStrength(s));
            }
        }
        if let Some(&(seq, t)) = self.last.get(&package.node) {
            if package.seq <= seq {
                return Err(StreamError::SeqRegression {
                    node: package.node,
                    previous: seq,
                    seq: package.seq,
                });
            }
            if package.timestamp < t {
                return Err(StreamError::TimestampRegression {
                    node: package.node,
                    previous: t,
                    timestamp: package.timestamp,
                });
            }
        }
        package.observations.sort_by(observation_order);
        self.last
            .insert(package.node, (package.seq, package.timestamp));
        Ok(package)
    }
}

/// Validates a whole stream.
pub fn validate_stream(packages: Vec<Package>) -> Result<Vec<Package>, StreamError> {
    let mut validator = StreamValidator::new();
    packages.into_iter().map(|p| validator.push(p)).collect()
}
