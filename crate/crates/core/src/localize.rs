//! Position assignment: interpolation inside complete epochs, the baseline
//! interpolation between gateway contacts, and the two encounter-based
//! refinements (checkpoints and path rectification).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use thiserror::Error;

use crate::epoch::{Epoch, EpochOrigin, EpochType, ResolveError};
use crate::graph::{Anchor, EnvironmentGraph, GraphError, GraphPosition, JunctionId, POSITION_EPSILON};
use crate::model::{Checkpoint, LocalizedMeasurement, Method, NodeId, Package};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LocalizeError {
    #[error("epoch is not complete")]
    Incomplete,
    #[error("package refers to unknown gateway {0}")]
    UnknownGateway(crate::graph::GatewayId),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
}

fn measurement(p: &Package, position: GraphPosition, method: Method) -> LocalizedMeasurement {
    LocalizedMeasurement {
        node: p.node,
        seq: p.seq,
        timestamp: p.timestamp,
        position,
        method,
    }
}

/// Spreads the epoch's packages over the route from its start to its final
/// position, proportionally to elapsed time.
pub fn interpolate_epoch(
    graph: &EnvironmentGraph,
    epoch: &Epoch,
    method: Method,
) -> Result<Vec<LocalizedMeasurement>, LocalizeError> {
    let (Some(start), Some(end)) = (&epoch.start_pos, &epoch.final_pos) else {
        return Err(LocalizeError::Incomplete);
    };
    let route = graph.route(start, end)?;
    let (t0, t1) = (epoch.first_timestamp(), epoch.last_timestamp());
    let span = t1 - t0;
    if !(span > 0.0) && route.length() > POSITION_EPSILON {
        log::debug!(
            "epoch at t={t0} has no duration but spans {}; packages placed at its final position",
            route.length()
        );
    }
    Ok(epoch
        .packages
        .iter()
        .map(|p| {
            let s = if span > 0.0 {
                (p.timestamp - t0) / span * route.length()
            } else {
                route.length()
            };
            measurement(p, graph.position(route.point_at(graph, s)), method)
        })
        .collect())
}

/// Interpolates every complete epoch; incomplete ones produce nothing.
pub fn interpolate_all(
    graph: &EnvironmentGraph,
    epochs: &[Epoch],
    method: Method,
) -> Result<Vec<LocalizedMeasurement>, LocalizeError> {
    let mut out = Vec::new();
    for e in epochs.iter().filter(|e| e.is_complete()) {
        out.extend(interpolate_epoch(graph, e, method)?);
    }
    Ok(out)
}

/// Linear interpolation in time between gateway junctions, anchored at the
/// first and last package of every uninterrupted contact with a gateway.
/// Returns nothing when the stream never heard a gateway.
pub fn baseline_localize(
    graph: &EnvironmentGraph,
    packages: &[Package],
) -> Result<Vec<LocalizedMeasurement>, LocalizeError> {
    let mut anchors: Vec<(usize, Anchor)> = Vec::new();
    let mut run: Option<(crate::graph::GatewayId, usize, usize)> = None;
    let close = |run: (crate::graph::GatewayId, usize, usize), anchors: &mut Vec<(usize, Anchor)>| {
        let (g, first, last) = run;
        let (junction, _) = graph
            .gateway_anchor(g)
            .ok_or(LocalizeError::UnknownGateway(g))?;
        let a = Anchor { junction, along: 0.0 };
        anchors.push((first, a));
        if last != first {
            anchors.push((last, a));
        }
        Ok::<(), LocalizeError>(())
    };
    for (k, p) in packages.iter().enumerate() {
        let g = p.strongest_gateway();
        match (run, g) {
            (Some((rg, first, _)), Some(g)) if rg == g => run = Some((rg, first, k)),
            (current, g) => {
                if let Some(r) = current {
                    close(r, &mut anchors)?;
                }
                run = g.map(|g| (g, k, k));
            }
        }
    }
    if let Some(r) = run {
        close(r, &mut anchors)?;
    }
    if anchors.is_empty() {
        if !packages.is_empty() {
            log::debug!("baseline: no gateway contact, {} packages unlocalized", packages.len());
        }
        return Ok(Vec::new());
    }

    let mut out = Vec::with_capacity(packages.len());
    let mut next = 0;
    for (k, p) in packages.iter().enumerate() {
        while next < anchors.len() && anchors[next].0 < k {
            next += 1;
        }
        let anchor = if next == 0 {
            anchors[0].1
        } else if next == anchors.len() {
            anchors[anchors.len() - 1].1
        } else if anchors[next].0 == k {
            anchors[next].1
        } else {
            let (ia, a) = anchors[next - 1];
            let (ib, b) = anchors[next];
            let (ta, tb) = (packages[ia].timestamp, packages[ib].timestamp);
            let route = graph.route_between(a, b);
            let s = if tb > ta {
                (p.timestamp - ta) / (tb - ta) * route.length()
            } else {
                route.length()
            };
            route.point_at(graph, s)
        };
        out.push(measurement(p, graph.position(anchor), Method::Baseline));
    }
    Ok(out)
}

/// One checkpoint per contacted peer: at the package where that peer was
/// heard most strongly (earliest on ties), carrying the issuer's estimate.
pub fn checkpoints_for_epoch(
    issuer: NodeId,
    epoch: &Epoch,
    localized: &[LocalizedMeasurement],
) -> Vec<Checkpoint> {
    let mut best: BTreeMap<NodeId, (f64, &Package)> = BTreeMap::new();
    for p in &epoch.packages {
        for c in &p.contacts {
            if c.peer == issuer {
                continue;
            }
            match best.get(&c.peer) {
                Some(&(s, _)) if s >= c.strength => {}
                _ => {
                    best.insert(c.peer, (c.strength, p));
                }
            }
        }
    }
    best.into_iter()
        .filter_map(|(peer, (_, p))| {
            let est = localized.iter().find(|m| m.node == issuer && m.seq == p.seq)?;
            Some(Checkpoint {
                issuer,
                target: peer,
                timestamp: p.timestamp,
                position: est.position,
            })
        })
        .collect()
}

/// Cuts `epochs[index]` before package `at`; the two halves meet at `position`.
pub fn split_epoch(epochs: &mut Vec<Epoch>, index: usize, at: usize, position: GraphPosition) {
    let original = epochs.remove(index);
    let (head, tail) = original.packages.split_at(at);
    let mut first = Epoch::new(original.kind, head.to_vec(), EpochOrigin::Split);
    first.anchor_gateway = original.anchor_gateway;
    first.start_pos = original.start_pos;
    first.final_pos = Some(position);
    let mut second = Epoch::new(original.kind, tail.to_vec(), EpochOrigin::Split);
    second.anchor_gateway = original.anchor_gateway;
    second.start_pos = Some(position);
    second.final_pos = original.final_pos;
    epochs.insert(index, second);
    epochs.insert(index, first);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointOutcome {
    Applied,
    /// No epoch holds packages on both sides of the checkpoint time.
    NoContainingEpoch,
    /// The containing epoch has no known boundaries yet.
    Deferred,
    /// The checkpoint position is not on the epoch's route.
    OffPath,
}

/// Splits epochs at checkpoints addressed to their node, in time order.
/// The package after the checkpoint time starts a new epoch; both halves
/// meet at the checkpoint position.
pub fn apply_checkpoints(
    graph: &EnvironmentGraph,
    mut epochs: Vec<Epoch>,
    checkpoints: &[Checkpoint],
) -> Result<(Vec<Epoch>, Vec<CheckpointOutcome>), LocalizeError> {
    let mut order: Vec<&Checkpoint> = checkpoints.iter().collect();
    order.sort_by(|a, b| {
        a.timestamp
            .total_cmp(&b.timestamp)
            .then_with(|| a.issuer.cmp(&b.issuer))
    });
    let mut outcomes = Vec::with_capacity(order.len());
    for cp in order {
        let containing = epochs
            .iter()
            .position(|e| e.first_timestamp() <= cp.timestamp && cp.timestamp < e.last_timestamp());
        let Some(index) = containing else {
            outcomes.push(CheckpointOutcome::NoContainingEpoch);
            continue;
        };
        let epoch = &epochs[index];
        let (Some(start), Some(end)) = (&epoch.start_pos, &epoch.final_pos) else {
            outcomes.push(CheckpointOutcome::Deferred);
            continue;
        };
        let route = graph.route(start, end)?;
        if route.locate(graph, graph.anchor(&cp.position)?).is_none() {
            log::debug!(
                "checkpoint from {} at t={} is off the route of node {}; discarded",
                cp.issuer,
                cp.timestamp,
                cp.target
            );
            outcomes.push(CheckpointOutcome::OffPath);
            continue;
        }
        let at = epoch
            .packages
            .iter()
            .position(|p| p.timestamp > cp.timestamp)
            .expect("containing epoch has a later package");
        split_epoch(&mut epochs, index, at, cp.position);
        outcomes.push(CheckpointOutcome::Applied);
    }
    Ok((epochs, outcomes))
}

/// A split introduced because an encounter could not have happened before
/// the point where both nodes' paths join.
#[derive(Debug, Clone, PartialEq)]
pub struct RectificationEvent {
    pub node: NodeId,
    pub peer: NodeId,
    /// The earliest contact package, now placed at the confluence.
    pub seq: u64,
    pub confluence: JunctionId,
    pub destination: JunctionId,
}

/// Epochs after splitting, their interpolation, and the splits made.
pub type Rectified = (Vec<Epoch>, Vec<LocalizedMeasurement>, Vec<RectificationEvent>);

/// Moves encounters estimated upstream of the confluence of both nodes'
/// paths onto it, then re-interpolates.
///
/// `provenance(node, t, exclude)` names the last gateway junction the node
/// passed at or before `t`, ignoring `exclude` (the shared destination).
pub fn rectify_paths<P>(
    graph: &EnvironmentGraph,
    node: NodeId,
    mut epochs: Vec<Epoch>,
    method: Method,
    provenance: P,
) -> Result<Rectified, LocalizeError>
where
    P: Fn(NodeId, f64, JunctionId) -> Option<JunctionId>,
{
    let mut localized = interpolate_all(graph, &epochs, method)?;
    let mut events = Vec::new();
    // every split strictly shortens an epoch, so this terminates
    'restart: loop {
        for e in 0..epochs.len() {
            let epoch = &epochs[e];
            let (Some(start), Some(end)) = (&epoch.start_pos, &epoch.final_pos) else {
                continue;
            };
            let Some(destination) = epochs[e..]
                .iter()
                .find(|x| x.kind == EpochType::Alpha)
                .and_then(|x| x.anchor_gateway)
                .and_then(|g| graph.gateway_anchor(g))
                .map(|(j, _)| graph.junction_id(j))
            else {
                continue;
            };
            let mut peers: Vec<NodeId> = epoch
                .packages
                .iter()
                .flat_map(|p| p.contacts.iter().map(|c| c.peer))
                .filter(|&peer| peer != node)
                .collect();
            peers.sort();
            peers.dedup();
            for peer in peers {
                let contacts: Vec<usize> = epoch
                    .packages
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| p.contacts.iter().any(|c| c.peer == peer))
                    .map(|(k, _)| k)
                    .collect();
                let t_first = epoch.packages[contacts[0]].timestamp;
                let (Some(own), Some(theirs)) = (
                    provenance(node, t_first, destination),
                    provenance(peer, t_first, destination),
                ) else {
                    log::debug!("rectification of node {node} against {peer} skipped: provenance unknown");
                    continue;
                };
                let confluence = graph.confluence_vertex(own, theirs, destination)?;
                let confluence_anchor = graph.junction_anchor(confluence)?;
                let route = graph.route(start, end)?;
                if route.locate(graph, confluence_anchor).is_none() {
                    continue;
                }
                let dest_anchor = graph.junction_anchor(destination)?;
                let limit = graph.anchor_distance(confluence_anchor, dest_anchor);
                let mut flagged = None;
                for &k in &contacts {
                    let seq = epoch.packages[k].seq;
                    let Some(est) = localized.iter().find(|m| m.seq == seq) else {
                        continue;
                    };
                    let d = graph.anchor_distance(graph.anchor(&est.position)?, dest_anchor);
                    if d > limit + POSITION_EPSILON {
                        flagged = Some(k);
                        break;
                    }
                }
                let Some(k) = flagged else {
                    continue;
                };
                if k + 1 >= epoch.packages.len() {
                    continue;
                }
                let seq = epoch.packages[k].seq;
                split_epoch(&mut epochs, e, k + 1, graph.position(confluence_anchor));
                events.push(RectificationEvent {
                    node,
                    peer,
                    seq,
                    confluence,
                    destination,
                });
                localized = interpolate_all(graph, &epochs, method)?;
                continue 'restart;
            }
        }
        break;
    }
    Ok((epochs, localized, events))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GatewayId, Junction, Link};
    use crate::model::{GatewayObservation, NodeContact, Payload};
    use alloc::vec;

    fn pkg(seq: u64, t: f64, gw: Option<(u32, f64)>, contacts: &[(u32, f64)]) -> Package {
        Package::new(
            NodeId(1),
            seq,
            t,
            gw.into_iter()
                .map(|(g, s)| GatewayObservation {
                    gateway: GatewayId(g),
                    strength: s,
                })
                .collect(),
            contacts
                .iter()
                .map(|&(p, s)| NodeContact {
                    peer: NodeId(p),
                    strength: s,
                })
                .collect(),
            Payload::default(),
        )
    }

    fn line(len: f64) -> EnvironmentGraph {
        EnvironmentGraph::build(
            vec![Junction::gated(0, 0, 3.0), Junction::gated(1, 1, 3.0)],
            vec![Link::new(0, 1, len)],
            JunctionId(1),
        )
        .unwrap()
    }

    fn on_line(offset: f64) -> GraphPosition {
        GraphPosition {
            from: JunctionId(0),
            to: JunctionId(1),
            offset,
            span: 100.0,
        }
    }

    fn complete(packages: Vec<Package>, start: GraphPosition, end: GraphPosition) -> Epoch {
        let mut e = Epoch::new(EpochType::Nu, packages, EpochOrigin::Integrated);
        e.start_pos = Some(start);
        e.final_pos = Some(end);
        e
    }

    #[test]
    fn interpolation_examples() {
        let g = line(100.0);
        let e = complete(
            vec![pkg(0, 0.0, None, &[]), pkg(1, 5.0, None, &[]), pkg(2, 10.0, None, &[])],
            GraphPosition::at_junction(JunctionId(0)),
            GraphPosition::at_junction(JunctionId(1)),
        );
        let out = interpolate_epoch(&g, &e, Method::Gral).unwrap();
        assert_eq!(out[0].position, GraphPosition::at_junction(JunctionId(0)));
        assert_eq!(out[1].position, on_line(50.0));
        assert_eq!(out[2].position, GraphPosition::at_junction(JunctionId(1)));

        let same = complete(vec![pkg(0, 0.0, None, &[]), pkg(1, 4.0, None, &[])], on_line(7.0), on_line(7.0));
        for m in interpolate_epoch(&g, &same, Method::Gral).unwrap() {
            assert_eq!(m.position, on_line(7.0));
        }

        let mut open = same.clone();
        open.final_pos = None;
        assert_eq!(interpolate_epoch(&g, &open, Method::Gral), Err(LocalizeError::Incomplete));

        let instant = complete(vec![pkg(0, 3.0, None, &[]), pkg(1, 3.0, None, &[])], on_line(0.0), on_line(9.0));
        for m in interpolate_epoch(&g, &instant, Method::Gral).unwrap() {
            assert_eq!(m.position, on_line(9.0));
        }
    }

    #[test]
    fn baseline_examples() {
        let g = line(100.0);
        let packages = vec![
            pkg(0, 0.0, Some((0, 1.0)), &[]),
            pkg(1, 5.0, None, &[]),
            pkg(2, 10.0, Some((1, 1.0)), &[]),
        ];
        let out = baseline_localize(&g, &packages).unwrap();
        assert_eq!(out[1].position, on_line(50.0));
        assert!(out.iter().all(|m| m.method == Method::Baseline));

        let in_range = vec![pkg(0, 0.0, Some((1, 1.0)), &[]), pkg(1, 1.0, Some((1, 2.0)), &[])];
        for m in baseline_localize(&g, &in_range).unwrap() {
            assert_eq!(m.position, GraphPosition::at_junction(JunctionId(1)));
        }

        let silent = vec![pkg(0, 0.0, None, &[])];
        assert!(baseline_localize(&g, &silent).unwrap().is_empty());
    }

    #[test]
    fn baseline_is_piecewise_across_three_gateways() {
        let g = EnvironmentGraph::build(
            vec![
                Junction::gated(0, 0, 3.0),
                Junction::gated(1, 1, 3.0),
                Junction::gated(2, 2, 3.0),
            ],
            vec![Link::new(0, 1, 50.0), Link::new(1, 2, 50.0)],
            JunctionId(2),
        )
        .unwrap();
        let packages = vec![
            pkg(0, 0.0, Some((0, 3.0)), &[]),
            pkg(1, 10.0, None, &[]),
            pkg(2, 20.0, Some((1, 3.0)), &[]),
            pkg(3, 30.0, Some((1, 2.0)), &[]),
            pkg(4, 35.0, None, &[]),
            pkg(5, 40.0, Some((2, 3.0)), &[]),
        ];
        let out = baseline_localize(&g, &packages).unwrap();
        let at = |from: u32, to: u32, offset: f64| GraphPosition {
            from: JunctionId(from),
            to: JunctionId(to),
            offset,
            span: 50.0,
        };
        // first span: 50 units in 20 ticks
        assert_eq!(out[1].position, at(0, 1, 25.0));
        // both contacts with the middle gateway pin to it
        assert_eq!(out[2].position, GraphPosition::at_junction(JunctionId(1)));
        assert_eq!(out[3].position, GraphPosition::at_junction(JunctionId(1)));
        // second span: 50 units in 10 ticks
        assert_eq!(out[4].position, at(1, 2, 25.0));
    }

    #[test]
    fn checkpoint_per_peer_at_strongest_contact() {
        let e = complete(
            vec![
                pkg(0, 0.0, None, &[(2, 2.0)]),
                pkg(1, 1.0, None, &[(2, 5.0), (3, 1.0)]),
                pkg(2, 2.0, None, &[(2, 3.0)]),
            ],
            on_line(0.0),
            on_line(2.0),
        );
        let g = line(100.0);
        let loc = interpolate_epoch(&g, &e, Method::Gral).unwrap();
        let cps = checkpoints_for_epoch(NodeId(1), &e, &loc);
        assert_eq!(cps.len(), 2);
        assert_eq!((cps[0].target, cps[0].timestamp), (NodeId(2), 1.0));
        assert_eq!(cps[0].position, on_line(1.0));
        assert_eq!(cps[1].target, NodeId(3));

        let quiet = complete(vec![pkg(0, 0.0, None, &[])], on_line(0.0), on_line(0.0));
        assert!(checkpoints_for_epoch(NodeId(1), &quiet, &loc).is_empty());
    }

    fn nu_epoch(n: u64) -> Epoch {
        complete(
            (0..=n).map(|t| pkg(t, t as f64, None, &[])).collect(),
            on_line(0.0),
            on_line(100.0),
        )
    }

    fn cp(t: f64, offset: f64, issuer: u32) -> Checkpoint {
        Checkpoint {
            issuer: NodeId(issuer),
            target: NodeId(1),
            timestamp: t,
            position: on_line(offset),
        }
    }

    #[test]
    fn checkpoint_splits_after_its_timestamp() {
        let g = line(100.0);
        let (epochs, outcome) = apply_checkpoints(&g, vec![nu_epoch(100)], &[cp(40.0, 30.0, 2)]).unwrap();
        assert_eq!(outcome, vec![CheckpointOutcome::Applied]);
        assert_eq!(epochs.len(), 2);
        assert_eq!(epochs[0].last_timestamp(), 40.0);
        assert_eq!(epochs[1].first_timestamp(), 41.0);
        assert_eq!(epochs[0].final_pos, Some(on_line(30.0)));
        assert_eq!(epochs[1].start_pos, Some(on_line(30.0)));

        // between two packages: split at the first later package
        let (epochs, _) = apply_checkpoints(&g, vec![nu_epoch(100)], &[cp(40.5, 30.0, 2)]).unwrap();
        assert_eq!(epochs[1].first_timestamp(), 41.0);

        let (epochs, outcome) = apply_checkpoints(&g, vec![nu_epoch(100)], &[cp(150.0, 30.0, 2)]).unwrap();
        assert_eq!(outcome, vec![CheckpointOutcome::NoContainingEpoch]);
        assert_eq!(epochs.len(), 1);
    }

    #[test]
    fn two_checkpoints_compose_like_sequential_splits() {
        let g = line(100.0);
        let both = [cp(70.0, 60.0, 3), cp(20.0, 15.0, 2)];
        let (together, _) = apply_checkpoints(&g, vec![nu_epoch(100)], &both).unwrap();
        let (first, _) = apply_checkpoints(&g, vec![nu_epoch(100)], &both[1..]).unwrap();
        let (sequential, _) = apply_checkpoints(&g, first, &both[..1]).unwrap();
        assert_eq!(together, sequential);
        assert_eq!(together.len(), 3);
        assert_eq!(together[1].start_pos, Some(on_line(15.0)));
        assert_eq!(together[1].final_pos, Some(on_line(60.0)));
    }

    #[test]
    fn off_route_checkpoint_is_discarded() {
        let g = line(100.0);
        let mut e = nu_epoch(10);
        e.final_pos = Some(on_line(50.0));
        let (epochs, outcome) = apply_checkpoints(&g, vec![e], &[cp(4.0, 70.0, 2)]).unwrap();
        assert_eq!(outcome, vec![CheckpointOutcome::OffPath]);
        assert_eq!(epochs.len(), 1);
    }
}
