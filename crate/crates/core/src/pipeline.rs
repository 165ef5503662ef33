//! Event-driven backend: integrates uploads as they arrive and re-localizes
//! the uploading node from scratch each time.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use thiserror::Error;

use crate::epoch::{merge_same_gateway, resolve_positions, Epoch, EpochError, EpochSet, ResolveError};
use crate::graph::{EnvironmentGraph, GraphPosition, JunctionId};
use crate::localize::{
    apply_checkpoints, baseline_localize, checkpoints_for_epoch, interpolate_all, rectify_paths, LocalizeError,
    RectificationEvent,
};
use crate::model::{Checkpoint, LocalizedMeasurement, Method, NodeId, Package};
use crate::signal::SignalModel;

/// Packages one node uploaded in a single gateway contact.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub node: NodeId,
    /// Upload time; the timestamp of the package that reached the gateway.
    pub time: f64,
    pub packages: Vec<Package>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("batch for node {node} contains a package of node {found}")]
    ForeignPackage { node: NodeId, found: NodeId },
    #[error(transparent)]
    Epoch(#[from] EpochError),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error(transparent)]
    Localize(#[from] LocalizeError),
}

#[derive(Debug, Clone)]
struct NodeState {
    insertion: Option<GraphPosition>,
    packages: Vec<Package>,
    set: EpochSet,
    epochs: Vec<Epoch>,
    localized: Vec<LocalizedMeasurement>,
    events: Vec<RectificationEvent>,
}

impl NodeState {
    fn new(node: NodeId, insertion: Option<GraphPosition>) -> Self {
        NodeState {
            insertion,
            packages: Vec::new(),
            set: EpochSet::new(node),
            epochs: Vec::new(),
            localized: Vec::new(),
            events: Vec::new(),
        }
    }

    fn latest_localized(&self) -> Option<f64> {
        self.localized.iter().map(|m| m.timestamp).reduce(f64::max)
    }
}

pub struct Backend<'g, S> {
    graph: &'g EnvironmentGraph,
    signal: S,
    method: Method,
    nodes: BTreeMap<NodeId, NodeState>,
    /// Checkpoints by target node.
    checkpoints: BTreeMap<NodeId, Vec<Checkpoint>>,
}

impl<'g, S: SignalModel> Backend<'g, S> {
    pub fn new(graph: &'g EnvironmentGraph, signal: S, method: Method) -> Self {
        Backend {
            graph,
            signal,
            method,
            nodes: BTreeMap::new(),
            checkpoints: BTreeMap::new(),
        }
    }

    /// Declares where a node was released into the network.
    pub fn register(&mut self, node: NodeId, insertion: GraphPosition) {
        self.nodes
            .entry(node)
            .or_insert_with(|| NodeState::new(node, None))
            .insertion = Some(insertion);
    }

    pub fn ingest(&mut self, batch: Batch) -> Result<(), PipelineError> {
        let node = batch.node;
        let state = self
            .nodes
            .entry(node)
            .or_insert_with(|| NodeState::new(node, None));
        for p in batch.packages {
            if p.node != node {
                return Err(PipelineError::ForeignPackage { node, found: p.node });
            }
            state.set.integrate(p.clone())?;
            state.packages.push(p);
        }
        self.relocalize(node)?;
        if self.method.checkpointing() {
            self.issue_checkpoints(node);
        }
        Ok(())
    }

    fn relocalize(&mut self, node: NodeId) -> Result<(), PipelineError> {
        let graph = self.graph;
        let method = self.method;
        let state = &self.nodes[&node];
        if method == Method::Baseline {
            let localized = baseline_localize(graph, &state.packages)?;
            self.nodes.get_mut(&node).expect("known node").localized = localized;
            return Ok(());
        }
        let mut epochs = merge_same_gateway(&state.set).epochs;
        resolve_positions(&mut epochs, graph, &self.signal, state.insertion.as_ref())?;
        if method.checkpointing() {
            let received = self.checkpoints.get(&node).map_or(&[][..], Vec::as_slice);
            epochs = apply_checkpoints(graph, epochs, received)?.0;
        }
        let (epochs, localized, events) = if method.rectification() {
            let nodes = &self.nodes;
            rectify_paths(graph, node, epochs, method, |n, t, exclude| {
                provenance(graph, nodes, n, t, exclude)
            })?
        } else {
            let localized = interpolate_all(graph, &epochs, method)?;
            (epochs, localized, Vec::new())
        };
        let state = self.nodes.get_mut(&node).expect("known node");
        state.epochs = epochs;
        state.localized = localized;
        state.events = events;
        Ok(())
    }

    /// Hands checkpoints from `issuer`'s complete epochs to peers that have
    /// not localized that moment themselves yet.
    fn issue_checkpoints(&mut self, issuer: NodeId) {
        let state = &self.nodes[&issuer];
        let mut issued = Vec::new();
        for epoch in state.epochs.iter().filter(|e| e.is_complete()) {
            for cp in checkpoints_for_epoch(issuer, epoch, &state.localized) {
                let covered = self
                    .nodes
                    .get(&cp.target)
                    .and_then(NodeState::latest_localized)
                    .is_some_and(|t| t >= cp.timestamp);
                if covered {
                    continue;
                }
                let (t0, t1) = (epoch.first_timestamp(), epoch.last_timestamp());
                let duplicate = self
                    .checkpoints
                    .get(&cp.target)
                    .into_iter()
                    .flatten()
                    .chain(issued.iter())
                    .any(|c: &Checkpoint| {
                        c.issuer == issuer && c.target == cp.target && t0 <= c.timestamp && c.timestamp <= t1
                    });
                if !duplicate {
                    issued.push(cp);
                }
            }
        }
        for cp in issued {
            log::trace!("checkpoint {} -> {} at t={}", cp.issuer, cp.target, cp.timestamp);
            self.checkpoints.entry(cp.target).or_default().push(cp);
        }
    }

    pub fn localized(&self, node: NodeId) -> &[LocalizedMeasurement] {
        self.nodes.get(&node).map_or(&[], |s| s.localized.as_slice())
    }

    pub fn epochs(&self, node: NodeId) -> &[Epoch] {
        self.nodes.get(&node).map_or(&[], |s| s.epochs.as_slice())
    }

    pub fn finish(self) -> PipelineOutput {
        let mut out = PipelineOutput::default();
        for (node, state) in self.nodes {
            out.received += state.packages.len();
            out.localized.extend(state.localized);
            out.epochs.insert(node, state.epochs);
            out.rectifications.extend(state.events);
        }
        out.checkpoints = self.checkpoints.into_values().flatten().collect();
        out
    }
}

/// Junction of the strongest gateway in `node`'s latest package at or before
/// `t` that heard a gateway other than the one at `exclude`. Falls back to
/// the insertion junction.
fn provenance(
    graph: &EnvironmentGraph,
    nodes: &BTreeMap<NodeId, NodeState>,
    node: NodeId,
    t: f64,
    exclude: JunctionId,
) -> Option<JunctionId> {
    let state = nodes.get(&node)?;
    state
        .packages
        .iter()
        .rev()
        .filter(|p| p.timestamp <= t)
        .find_map(|p| {
            let (j, _) = graph.gateway_anchor(p.strongest_gateway()?)?;
            let j = graph.junction_id(j);
            (j != exclude).then_some(j)
        })
        .or_else(|| {
            let a = graph.anchor(state.insertion.as_ref()?).ok()?;
            graph.anchor_junction(a)
        })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineOutput {
    /// Ordered by node, then by package sequence.
    pub localized: Vec<LocalizedMeasurement>,
    pub epochs: BTreeMap<NodeId, Vec<Epoch>>,
    pub rectifications: Vec<RectificationEvent>,
    pub checkpoints: Vec<Checkpoint>,
    /// Packages the backend received in total.
    pub received: usize,
}

/// Feeds the batches in order of upload time (ties by node) through a fresh
/// backend.
pub fn run_pipeline<S: SignalModel>(
    graph: &EnvironmentGraph,
    signal: S,
    method: Method,
    insertions: &BTreeMap<NodeId, GraphPosition>,
    batches: &[Batch],
) -> Result<PipelineOutput, PipelineError> {
    let mut backend = Backend::new(graph, signal, method);
    for (&node, pos) in insertions {
        backend.register(node, *pos);
    }
    let mut order: Vec<&Batch> = batches.iter().collect();
    order.sort_by(|a, b| a.time.total_cmp(&b.time).then_with(|| a.node.cmp(&b.node)));
    for batch in order {
        backend.ingest(batch.clone())?;
    }
    let mut out = backend.finish();
    out.localized.sort_by_key(|m| (m.node, m.seq));
    Ok(out)
}

/// Reconstructs uploads from complete per-node streams: a batch ends with
/// every package that heard a gateway. Packages after the last such package
/// form a final batch.
pub fn batches_from_streams(packages: &[Package]) -> Vec<Batch> {
    let mut per_node: BTreeMap<NodeId, Vec<Package>> = BTreeMap::new();
    for p in packages {
        per_node.entry(p.node).or_default().push(p.clone());
    }
    let mut batches = Vec::new();
    for (node, stream) in per_node {
        let mut current = Vec::new();
        for p in stream {
            let heard = p.hears_gateway();
            let time = p.timestamp;
            current.push(p);
            if heard {
                batches.push(Batch {
                    node,
                    time,
                    packages: core::mem::take(&mut current),
                });
            }
        }
        if let Some(last) = current.last() {
            let time = last.timestamp;
            batches.push(Batch {
                node,
                time,
                packages: current,
            });
        }
    }
    batches.sort_by(|a, b| a.time.total_cmp(&b.time).then_with(|| a.node.cmp(&b.node)));
    batches
}
