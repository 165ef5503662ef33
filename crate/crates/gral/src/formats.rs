//! JSON graph and scenario files, NDJSON package streams.

use std::io::{BufRead, Write};

use gral_core::model::{StreamError, StreamValidator};
use gral_core::sim::NodeInsertion;
use gral_core::{
    EnvironmentGraph, Gateway, GatewayId, GatewayObservation, GraphError, GraphPosition, Junction, JunctionId, Link,
    NodeContact, NodeId, Package, Payload, ScenarioSpec,
};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<FormatError>,
    },
    #[error("gateway {0} has no radius and no default radius is given")]
    MissingRadius(u32),
    #[error("invalid graph: {0}")]
    Graph(#[from] GraphError),
    #[error("invalid stream: {0}")]
    Stream(#[from] StreamError),
    #[error("invalid scenario: {0}")]
    Scenario(#[from] gral_core::sim::SimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayRecord {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JunctionRecord {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gateway: Option<GatewayRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkRecord {
    pub u: u32,
    pub v: u32,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub junctions: Vec<JunctionRecord>,
    pub links: Vec<LinkRecord>,
    pub root: u32,
}

impl GraphFile {
    pub fn from_graph(graph: &EnvironmentGraph) -> Self {
        GraphFile {
            junctions: graph
                .junctions()
                .iter()
                .map(|j| JunctionRecord {
                    id: j.id.0,
                    gateway: j.gateway.map(|g| GatewayRecord {
                        id: g.id.0,
                        radius: Some(g.radius),
                    }),
                })
                .collect(),
            links: graph
                .links()
                .iter()
                .map(|l| LinkRecord {
                    u: l.u.0,
                    v: l.v.0,
                    length: l.length,
                })
                .collect(),
            root: graph.root().0,
        }
    }

    pub fn build(&self, default_radius: Option<f64>) -> Result<EnvironmentGraph, FormatError> {
        let mut junctions = Vec::with_capacity(self.junctions.len());
        for j in &self.junctions {
            let gateway = match &j.gateway {
                None => None,
                Some(g) => Some(Gateway {
                    id: GatewayId(g.id),
                    junction: JunctionId(j.id),
                    radius: g.radius.or(default_radius).ok_or(FormatError::MissingRadius(g.id))?,
                }),
            };
            junctions.push(Junction {
                id: JunctionId(j.id),
                gateway,
            });
        }
        let links = self.links.iter().map(|l| Link::new(l.u, l.v, l.length)).collect();
        Ok(EnvironmentGraph::build(junctions, links, JunctionId(self.root))?)
    }
}

pub fn read_graph(text: &str) -> Result<EnvironmentGraph, FormatError> {
    serde_json::from_str::<GraphFile>(text)?.build(None)
}

pub fn write_graph(graph: &EnvironmentGraph) -> String {
    let mut s = serde_json::to_string_pretty(&GraphFile::from_graph(graph)).expect("graph serializes");
    s.push('\n');
    s
}

/// A position in a file: either a junction or a point on a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum PositionRecord {
    Junction { junction: u32 },
    Path { from: u32, to: u32, offset: f64, span: f64 },
}

impl PositionRecord {
    pub fn from_position(p: &GraphPosition) -> Self {
        if p.from == p.to && p.offset == 0.0 {
            PositionRecord::Junction { junction: p.from.0 }
        } else {
            PositionRecord::Path {
                from: p.from.0,
                to: p.to.0,
                offset: p.offset,
                span: p.span,
            }
        }
    }

    pub fn position(&self) -> GraphPosition {
        match *self {
            PositionRecord::Junction { junction } => GraphPosition::at_junction(JunctionId(junction)),
            PositionRecord::Path { from, to, offset, span } => GraphPosition {
                from: JunctionId(from),
                to: JunctionId(to),
                offset,
                span,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsertionRecord {
    pub node: u32,
    pub start: PositionRecord,
    #[serde(default)]
    pub tick: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speeds: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub graph: GraphFile,
    /// Radius of gateways that do not set their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gateway_radius: Option<f64>,
    pub insertions: Vec<InsertionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_persistence: Option<f64>,
    /// Defaults to the largest gateway radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement_interval: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_ticks: Option<u64>,
}

impl ScenarioFile {
    pub fn from_spec(spec: &ScenarioSpec) -> Self {
        ScenarioFile {
            graph: GraphFile::from_graph(&spec.graph),
            gateway_radius: None,
            insertions: spec
                .insertions
                .iter()
                .map(|i| InsertionRecord {
                    node: i.node.0,
                    start: PositionRecord::from_position(&i.start),
                    tick: i.tick,
                    speeds: i.speeds.clone(),
                })
                .collect(),
            base_step: Some(spec.base_step),
            noise_p: Some(spec.noise_p),
            noise_persistence: Some(spec.noise_persistence),
            contact_radius: Some(spec.contact_radius),
            measurement_interval: Some(spec.measurement_interval),
            max_ticks: Some(spec.max_ticks),
        }
    }

    pub fn build(&self) -> Result<ScenarioSpec, FormatError> {
        let graph = self.graph.build(self.gateway_radius)?;
        let insertions = self
            .insertions
            .iter()
            .map(|i| NodeInsertion {
                node: NodeId(i.node),
                start: i.start.position(),
                tick: i.tick,
                speeds: i.speeds.clone(),
            })
            .collect();
        let mut spec = ScenarioSpec::new(graph, insertions);
        if let Some(v) = self.base_step {
            spec.base_step = v;
        }
        if let Some(v) = self.noise_p {
            spec.noise_p = v;
        }
        if let Some(v) = self.noise_persistence {
            spec.noise_persistence = v;
        }
        if let Some(v) = self.contact_radius {
            spec.contact_radius = v;
        }
        if let Some(v) = self.measurement_interval {
            spec.measurement_interval = v;
        }
        if let Some(v) = self.max_ticks {
            spec.max_ticks = v;
        }
        spec.validate()?;
        Ok(spec)
    }
}

pub fn read_scenario(text: &str) -> Result<ScenarioSpec, FormatError> {
    serde_json::from_str::<ScenarioFile>(text)?.build()
}

pub fn write_scenario(spec: &ScenarioSpec) -> String {
    let mut s = serde_json::to_string_pretty(&ScenarioFile::from_spec(spec)).expect("scenario serializes");
    s.push('\n');
    s
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PackageRecord {
    node: u32,
    seq: u64,
    t: f64,
    #[serde(default)]
    obs: Vec<(u32, f64)>,
    #[serde(default)]
    contacts: Vec<(u32, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    payload: Option<Box<RawValue>>,
}

fn package_from_record(r: PackageRecord) -> Package {
    Package::new(
        NodeId(r.node),
        r.seq,
        r.t,
        r.obs
            .into_iter()
            .map(|(g, strength)| GatewayObservation {
                gateway: GatewayId(g),
                strength,
            })
            .collect(),
        r.contacts
            .into_iter()
            .map(|(p, strength)| NodeContact {
                peer: NodeId(p),
                strength,
            })
            .collect(),
        r.payload.map_or_else(Payload::default, |raw| Payload(raw.get().to_owned())),
    )
}

/// Reads one package per line; blank lines are skipped. Ordering is
/// validated per node.
pub fn read_packages<R: BufRead>(reader: R) -> Result<Vec<Package>, FormatError> {
    let mut validator = StreamValidator::new();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let at = |e: FormatError| FormatError::Line {
            line: i + 1,
            source: Box::new(e),
        };
        let line = line.map_err(|e| at(e.into()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PackageRecord = serde_json::from_str(&line).map_err(|e| at(e.into()))?;
        let package = validator.push(package_from_record(record)).map_err(|e| at(e.into()))?;
        out.push(package);
    }
    Ok(out)
}

pub fn write_packages<'a, W: Write>(
    mut w: W,
    packages: impl IntoIterator<Item = &'a Package>,
) -> Result<(), FormatError> {
    for p in packages {
        let payload = if p.payload == Payload::default() {
            None
        } else {
            Some(RawValue::from_string(p.payload.0.clone())?)
        };
        let record = PackageRecord {
            node: p.node.0,
            seq: p.seq,
            t: p.timestamp,
            obs: p.observations.iter().map(|o| (o.gateway.0, o.strength)).collect(),
            contacts: p.contacts.iter().map(|c| (c.peer.0, c.strength)).collect(),
            payload,
        };
        serde_json::to_writer(&mut w, &record)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
