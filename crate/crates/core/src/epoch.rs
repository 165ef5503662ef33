//! Partitioning of a node's package stream into typed epochs and resolution
//! of the positions at which epochs start and end.
//!
//! Epoch types follow the strongest gateway signal of each package:
//!
//! * `Nu`: no gateway heard in any package;
//! * `Alpha`: one gateway strongest throughout and its strength strictly
//!   rising from package to package;
//! * `Omega`: one gateway strongest throughout and its strength never rising.
//!
//! A single package heard at a gateway is vacuously both rising and falling.
//! It is labelled `Alpha` unless the package before it heard the same
//! gateway at least as strongly, in which case the node is already leaving
//! and it is labelled `Omega`.

use alloc::vec::Vec;

use thiserror::Error;

use crate::graph::{Anchor, EnvironmentGraph, GatewayId, GraphError, GraphPosition, POSITION_EPSILON};
use crate::model::{NodeId, Package};
use crate::signal::SignalModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EpochType {
    Nu,
    Alpha,
    Omega,
}

impl EpochType {
    pub fn as_str(self) -> &'static str {
        match self {
            EpochType::Nu => "nu",
            EpochType::Alpha => "alpha",
            EpochType::Omega => "omega",
        }
    }
}

/// How an epoch came to be. Only `Integrated` epochs are guaranteed to
/// satisfy their type condition package by package.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EpochOrigin {
    Integrated,
    /// A gateway reappeared after epochs without signal.
    Coalesced,
    /// Several epochs at one gateway collapsed into one.
    Merged,
    /// A fragment of a larger epoch cut at a checkpoint or confluence.
    Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub kind: EpochType,
    pub packages: Vec<Package>,
    pub start_pos: Option<GraphPosition>,
    pub final_pos: Option<GraphPosition>,
    pub anchor_gateway: Option<GatewayId>,
    pub origin: EpochOrigin,
}

impl Epoch {
    pub fn new(kind: EpochType, packages: Vec<Package>, origin: EpochOrigin) -> Self {
        let anchor_gateway = match kind {
            EpochType::Nu => None,
            _ => packages.iter().find_map(Package::strongest_gateway),
        };
        Epoch {
            kind,
            packages,
            start_pos: None,
            final_pos: None,
            anchor_gateway,
            origin,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.start_pos.is_some() && self.final_pos.is_some()
    }

    pub fn first_timestamp(&self) -> f64 {
        self.packages.first().map_or(f64::NAN, |p| p.timestamp)
    }

    pub fn last_timestamp(&self) -> f64 {
        self.packages.last().map_or(f64::NAN, |p| p.timestamp)
    }

    /// Whether the package list satisfies the epoch's claimed type.
    pub fn is_sound(&self) -> bool {
        match classify(&self.packages) {
            Some(k) if k == self.kind => true,
            // single packages are vacuously falling as well
            Some(EpochType::Alpha) => self.kind == EpochType::Omega && self.packages.len() == 1,
            _ => false,
        }
    }
}

/// Type of a package sequence, `None` when no single type fits.
pub fn classify(packages: &[Package]) -> Option<EpochType> {
    if packages.is_empty() {
        return None;
    }
    if packages.iter().all(|p| !p.hears_gateway()) {
        return Some(EpochType::Nu);
    }
    let strongest: Option<Vec<(GatewayId, f64)>> = packages.iter().map(Package::strongest).collect();
    let strongest = strongest?;
    let gateway = strongest[0].0;
    if strongest.iter().any(|&(g, _)| g != gateway) {
        return None;
    }
    if strongest.len() == 1 {
        return Some(EpochType::Alpha);
    }
    if strongest.windows(2).all(|w| w[1].1 > w[0].1) {
        Some(EpochType::Alpha)
    } else if strongest.windows(2).all(|w| w[1].1 <= w[0].1) {
        Some(EpochType::Omega)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpochError {
    #[error("package for node {got} offered to epoch set of node {expected}")]
    WrongNode { expected: NodeId, got: NodeId },
    #[error("out-of-order package: timestamp {timestamp} after {last}")]
    OutOfOrder { last: f64, timestamp: f64 },
}

/// All epochs of one node, in stream order.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    pub node: NodeId,
    pub epochs: Vec<Epoch>,
}

impl EpochSet {
    pub fn new(node: NodeId) -> Self {
        EpochSet {
            node,
            epochs: Vec::new(),
        }
    }

    pub fn from_packages<I: IntoIterator<Item = Package>>(node: NodeId, packages: I) -> Result<Self, EpochError> {
        let mut set = EpochSet::new(node);
        for p in packages {
            set.integrate(p)?;
        }
        Ok(set)
    }

    fn last_package(&self) -> Option<&Package> {
        self.epochs.last().and_then(|e| e.packages.last())
    }

    pub fn packages(&self) -> impl Iterator<Item = &Package> + '_ {
        self.epochs.iter().flat_map(|e| e.packages.iter())
    }

    /// Adds the next package of the stream.
    pub fn integrate(&mut self, package: Package) -> Result<(), EpochError> {
        if package.node != self.node {
            return Err(EpochError::WrongNode {
                expected: self.node,
                got: package.node,
            });
        }
        let previous = self.last_package().cloned();
        if let Some(prev) = &previous {
            if package.timestamp < prev.timestamp {
                return Err(EpochError::OutOfOrder {
                    last: prev.timestamp,
                    timestamp: package.timestamp,
                });
            }
        }

        if let Some(last) = self.epochs.last_mut() {
            if last.origin != EpochOrigin::Coalesced {
                last.packages.push(package);
                if let Some(kind) = classify(&last.packages) {
                    last.kind = kind;
                    last.anchor_gateway = match kind {
                        EpochType::Nu => None,
                        _ => last.packages.iter().find_map(Package::strongest_gateway),
                    };
                    return Ok(());
                }
                let package = last.packages.pop().expect("just pushed");
                return self.coalesce_or_append(package, previous.as_ref());
            }
        }
        self.coalesce_or_append(package, previous.as_ref())
    }

    fn coalesce_or_append(&mut self, package: Package, previous: Option<&Package>) -> Result<(), EpochError> {
        let gateway = package.strongest_gateway();
        // last epoch that heard a gateway; everything after it is silent
        let anchor = self.epochs.iter().rposition(|e| e.kind != EpochType::Nu);
        if let (Some(g), Some(i)) = (gateway, anchor) {
            let first_gateway = self.epochs[i].packages.first().and_then(Package::strongest_gateway);
            if i + 1 < self.epochs.len() && first_gateway == Some(g) {
                let kind = self.epochs[i].kind;
                let mut packages: Vec<Package> = self
                    .epochs
                    .drain(i..)
                    .flat_map(|e| e.packages.into_iter())
                    .collect();
                packages.push(package);
                let mut epoch = Epoch::new(kind, packages, EpochOrigin::Coalesced);
                epoch.anchor_gateway = Some(g);
                self.epochs.push(epoch);
                return Ok(());
            }
        }
        let kind = match (gateway, package.strongest(), previous.and_then(Package::strongest)) {
            (None, _, _) => EpochType::Nu,
            (Some(_), Some((g, s)), Some((pg, ps))) if g == pg && s <= ps => EpochType::Omega,
            _ => EpochType::Alpha,
        };
        self.epochs
            .push(Epoch::new(kind, alloc::vec![package], EpochOrigin::Integrated));
        Ok(())
    }
}

/// Collapses repeated epochs at one gateway. In every run of consecutive
/// epochs anchored at the same gateway, a leading `Alpha` epoch is kept and
/// everything after it becomes one `Omega` epoch; a run that does not start
/// rising collapses entirely.
pub fn merge_same_gateway(set: &EpochSet) -> EpochSet {
    let mut out: Vec<Epoch> = Vec::with_capacity(set.epochs.len());
    let mut i = 0;
    let epochs = &set.epochs;
    while i < epochs.len() {
        let Some(g) = epochs[i].anchor_gateway else {
            out.push(epochs[i].clone());
            i += 1;
            continue;
        };
        let mut end = i + 1;
        while end < epochs.len() && epochs[end].anchor_gateway == Some(g) {
            end += 1;
        }
        let mut rest = i;
        if epochs[i].kind == EpochType::Alpha {
            out.push(epochs[i].clone());
            rest += 1;
        }
        match end - rest {
            0 => {}
            1 => out.push(epochs[rest].clone()),
            _ => {
                let packages = epochs[rest..end]
                    .iter()
                    .flat_map(|e| e.packages.iter().cloned())
                    .collect();
                let mut merged = Epoch::new(EpochType::Omega, packages, EpochOrigin::Merged);
                merged.anchor_gateway = Some(g);
                merged.start_pos = epochs[rest].start_pos;
                merged.final_pos = epochs[end - 1].final_pos;
                out.push(merged);
            }
        }
        i = end;
    }
    EpochSet {
        node: set.node,
        epochs: out,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResolveError {
    #[error("package refers to unknown gateway {0}")]
    UnknownGateway(GatewayId),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Fills in every start and final position that can be derived. Positions
/// already set are kept. `insertion` is the node's known starting point.
///
/// Final positions:
/// * a rising epoch ends at its gateway when another epoch follows it, or
///   when its last package reached the maximum strength;
/// * an epoch followed by one at a different gateway ends at that gateway's
///   range boundary, on the link by which the node approaches it;
/// * an epoch at a gateway followed by silence ends at the boundary of that
///   gateway's range on its downstream link.
///
/// Start positions chain from the previous epoch's final position. A first
/// package heard at maximum strength also pins the start at the gateway.
pub fn resolve_positions<S: SignalModel>(
    epochs: &mut [Epoch],
    graph: &EnvironmentGraph,
    signal: &S,
    insertion: Option<&GraphPosition>,
) -> Result<(), ResolveError> {
    let mut last_known: Option<Anchor> = match insertion {
        Some(p) => Some(graph.anchor(p)?),
        None => None,
    };
    for i in 0..epochs.len() {
        if epochs[i].start_pos.is_none() {
            epochs[i].start_pos = if i == 0 {
                insertion.copied()
            } else {
                epochs[i - 1].final_pos
            };
        }
        if epochs[i].start_pos.is_none() {
            epochs[i].start_pos = at_gateway_if_maximal(&epochs[i], epochs[i].packages.first(), graph, signal)?;
        }
        if let Some(s) = &epochs[i].start_pos {
            last_known = Some(graph.anchor(s)?);
        }
        if epochs[i].final_pos.is_none() {
            let anchor = final_anchor(epochs, i, graph, signal, last_known)?;
            epochs[i].final_pos = anchor.map(|a| graph.position(a));
        }
        if let Some(f) = &epochs[i].final_pos {
            last_known = Some(graph.anchor(f)?);
        }
    }
    Ok(())
}

fn gateway_of(graph: &EnvironmentGraph, id: GatewayId) -> Result<(usize, &crate::graph::Gateway), ResolveError> {
    graph.gateway_anchor(id).ok_or(ResolveError::UnknownGateway(id))
}

fn at_gateway_if_maximal<S: SignalModel>(
    epoch: &Epoch,
    package: Option<&Package>,
    graph: &EnvironmentGraph,
    signal: &S,
) -> Result<Option<GraphPosition>, ResolveError> {
    let (Some(g), Some(p)) = (epoch.anchor_gateway, package) else {
        return Ok(None);
    };
    let (junction, gateway) = gateway_of(graph, g)?;
    match p.strongest() {
        Some((pg, s)) if pg == g && s >= signal.max_strength(gateway) - POSITION_EPSILON => {
            Ok(Some(graph.position(Anchor { junction, along: 0.0 })))
        }
        _ => Ok(None),
    }
}

fn final_anchor<S: SignalModel>(
    epochs: &[Epoch],
    i: usize,
    graph: &EnvironmentGraph,
    signal: &S,
    last_known: Option<Anchor>,
) -> Result<Option<Anchor>, ResolveError> {
    let epoch = &epochs[i];
    let next = epochs.get(i + 1);
    if epoch.kind == EpochType::Alpha {
        if let Some(g) = epoch.anchor_gateway {
            let (junction, _) = gateway_of(graph, g)?;
            let at_gateway = Some(Anchor { junction, along: 0.0 });
            if next.is_some() {
                return Ok(at_gateway);
            }
            if at_gateway_if_maximal(epoch, epoch.packages.last(), graph, signal)?.is_some() {
                return Ok(at_gateway);
            }
        }
    }
    let Some(next) = next else {
        return Ok(None);
    };
    match (next.anchor_gateway, epoch.anchor_gateway) {
        (Some(ng), own) => {
            let (junction, gateway) = gateway_of(graph, ng)?;
            if own == Some(ng) {
                return Ok(Some(Anchor { junction, along: 0.0 }));
            }
            Ok(last_known.map(|from| graph.approach_point(from, junction, gateway.radius)))
        }
        (None, Some(own)) => {
            let (junction, gateway) = gateway_of(graph, own)?;
            Ok(Some(graph.downstream_of(junction, gateway.radius)))
        }
        (None, None) => Ok(None),
    }
}
