//! The pipe network as a weighted, rooted tree.
//!
//! Junctions are connected by links of known length; some junctions carry a
//! gateway. Flow always runs toward the root, so every non-root junction owns
//! exactly one "upstream-to-downstream" link: the one to its parent.
//!
//! Internally a point on the network is an [`Anchor`]: a junction plus a
//! distance travelled along that junction's link toward the root. This form
//! is unique for every point, which keeps equality and distances simple.
//! The public [`GraphPosition`] is the two-junction-plus-offset form used in
//! files and outputs.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

/// Tolerance for position equality and arclength snapping, in length units.
pub const POSITION_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JunctionId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GatewayId(pub u32);

impl core::fmt::Display for JunctionId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl core::fmt::Display for GatewayId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A stationary radio gateway mounted at a junction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gateway {
    pub id: GatewayId,
    pub junction: JunctionId,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Junction {
    pub id: JunctionId,
    pub gateway: Option<Gateway>,
}

impl Junction {
    pub fn plain(id: u32) -> Self {
        Junction {
            id: JunctionId(id),
            gateway: None,
        }
    }

    pub fn gated(id: u32, gateway: u32, radius: f64) -> Self {
        Junction {
            id: JunctionId(id),
            gateway: Some(Gateway {
                id: GatewayId(gateway),
                junction: JunctionId(id),
                radius,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub u: JunctionId,
    pub v: JunctionId,
    pub length: f64,
}

impl Link {
    pub fn new(u: u32, v: u32, length: f64) -> Self {
        Link {
            u: JunctionId(u),
            v: JunctionId(v),
            length,
        }
    }
}

/// A point on the network: `offset` length units along the shortest path from
/// `from` to `to`, whose total length is `span`.
///
/// Positions produced by this crate are canonical: either `from == to` with
/// zero offset (a junction) or `to` is the parent of `from` and
/// `0 < offset < span` (interior of a link). [`EnvironmentGraph::point_at`]
/// keeps the path direction instead and may return `offset == 0` on a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphPosition {
    pub from: JunctionId,
    pub to: JunctionId,
    pub offset: f64,
    pub span: f64,
}

impl GraphPosition {
    pub fn at_junction(id: JunctionId) -> Self {
        GraphPosition {
            from: id,
            to: id,
            offset: 0.0,
            span: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("graph has no junctions")]
    Empty,
    #[error("duplicate junction id {0}")]
    DuplicateJunction(JunctionId),
    #[error("duplicate gateway id {0}")]
    DuplicateGateway(GatewayId),
    #[error("gateway {gateway} declares junction {declared} but is mounted at junction {mounted}")]
    GatewayMismatch {
        gateway: GatewayId,
        declared: JunctionId,
        mounted: JunctionId,
    },
    #[error("gateway {0} has a non-positive radius")]
    NonPositiveRadius(GatewayId),
    #[error("unknown junction {0}")]
    UnknownJunction(JunctionId),
    #[error("link {0}-{1} has a non-positive length")]
    NonPositiveLength(JunctionId, JunctionId),
    #[error("link {0}-{0} is a self loop")]
    SelfLoop(JunctionId),
    #[error("cycle detected")]
    CycleDetected,
    #[error("graph is disconnected")]
    Disconnected,
    #[error("root junction {0} missing")]
    RootMissing(JunctionId),
    #[error("offset {offset} outside path of length {length}")]
    OffsetOutOfRange { offset: f64, length: f64 },
    #[error("junction sequence is not a path in the graph")]
    NotAPath,
    #[error("invalid position {from}->{to} offset {offset} span {span}")]
    InvalidPosition {
        from: JunctionId,
        to: JunctionId,
        offset: f64,
        span: f64,
    },
}

/// Canonical point form: `along` length units from `junction` toward its
/// parent, with `0 <= along < link length` (always 0 at the root).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub(crate) junction: usize,
    pub(crate) along: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    junction: usize,
    from: f64,
    to: f64,
}

impl Segment {
    fn len(&self) -> f64 {
        (self.to - self.from).abs()
    }
}

/// The unique path between two points, as a sequence of pieces of links.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    start: Anchor,
    end: Anchor,
    segments: Vec<Segment>,
    length: f64,
}

impl Route {
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn start(&self) -> Anchor {
        self.start
    }

    pub fn end(&self) -> Anchor {
        self.end
    }

    /// Point `s` length units from the start, clamped to the route.
    pub fn point_at(&self, graph: &EnvironmentGraph, s: f64) -> Anchor {
        if s <= 0.0 || self.segments.is_empty() {
            return self.start;
        }
        if s >= self.length {
            return self.end;
        }
        let mut walked = 0.0;
        for seg in &self.segments {
            let len = seg.len();
            if s <= walked + len {
                let step = s - walked;
                let along = if seg.to >= seg.from {
                    seg.from + step
                } else {
                    seg.from - step
                };
                return graph.normalize(seg.junction, along);
            }
            walked += len;
        }
        self.end
    }

    /// Arclength from the route start to `point`, if the point lies on it.
    pub fn locate(&self, graph: &EnvironmentGraph, point: Anchor) -> Option<f64> {
        if self.segments.is_empty() {
            return (graph.anchor_distance(self.start, point) <= POSITION_EPSILON).then_some(0.0);
        }
        let mut walked = 0.0;
        for seg in &self.segments {
            let along = if point.junction == seg.junction {
                Some(point.along)
            } else if point.along == 0.0 && graph.parent[seg.junction] == Some(point.junction) {
                Some(graph.up_len[seg.junction])
            } else {
                None
            };
            if let Some(along) = along {
                let (lo, hi) = if seg.from <= seg.to {
                    (seg.from, seg.to)
                } else {
                    (seg.to, seg.from)
                };
                if along >= lo - POSITION_EPSILON && along <= hi + POSITION_EPSILON {
                    return Some(walked + (along - seg.from).abs().min(seg.len()));
                }
            }
            walked += seg.len();
        }
        None
    }
}

/// Validated, immutable pipe network.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentGraph {
    junctions: Vec<Junction>,
    links: Vec<Link>,
    root: usize,
    index: BTreeMap<JunctionId, usize>,
    gateways: BTreeMap<GatewayId, usize>,
    parent: Vec<Option<usize>>,
    up_len: Vec<f64>,
    depth: Vec<f64>,
    hops: Vec<usize>,
}

impl EnvironmentGraph {
    /// Validates the topology and orients every link toward `root`.
    pub fn build(
        junctions: Vec<Junction>,
        links: Vec<Link>,
        root: JunctionId,
    ) -> Result<Self, GraphError> {
        if junctions.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut index = BTreeMap::new();
        let mut gateways = BTreeMap::new();
        for (i, j) in junctions.iter().enumerate() {
            if index.insert(j.id, i).is_some() {
                return Err(GraphError::DuplicateJunction(j.id));
            }
            if let Some(gw) = j.gateway {
                if gw.junction != j.id {
                    return Err(GraphError::GatewayMismatch {
                        gateway: gw.id,
                        declared: gw.junction,
                        mounted: j.id,
                    });
                }
                if !(gw.radius > 0.0) || !gw.radius.is_finite() {
                    return Err(GraphError::NonPositiveRadius(gw.id));
                }
                if gateways.insert(gw.id, i).is_some() {
                    return Err(GraphError::DuplicateGateway(gw.id));
                }
            }
        }
        let root_idx = *index.get(&root).ok_or(GraphError::RootMissing(root))?;

        let n = junctions.len();
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut components = DisjointSet::new(n);
        for link in &links {
            let u = *index.get(&link.u).ok_or(GraphError::UnknownJunction(link.u))?;
            let v = *index.get(&link.v).ok_or(GraphError::UnknownJunction(link.v))?;
            if u == v {
                return Err(GraphError::SelfLoop(link.u));
            }
            if !(link.length > 0.0) || !link.length.is_finite() {
                return Err(GraphError::NonPositiveLength(link.u, link.v));
            }
            if !components.union(u, v) {
                return Err(GraphError::CycleDetected);
            }
            adjacency[u].push((v, link.length));
            adjacency[v].push((u, link.length));
        }
        if links.len() + 1 != n {
            return Err(GraphError::Disconnected);
        }

        let mut parent = vec![None; n];
        let mut up_len = vec![0.0; n];
        let mut depth = vec![0.0; n];
        let mut hops = vec![0usize; n];
        let mut seen = vec![false; n];
        let mut stack = vec![root_idx];
        seen[root_idx] = true;
        while let Some(x) = stack.pop() {
            for &(y, len) in &adjacency[x] {
                if !seen[y] {
                    seen[y] = true;
                    parent[y] = Some(x);
                    up_len[y] = len;
                    depth[y] = depth[x] + len;
                    hops[y] = hops[x] + 1;
                    stack.push(y);
                }
            }
        }

        Ok(EnvironmentGraph {
            junctions,
            links,
            root: root_idx,
            index,
            gateways,
            parent,
            up_len,
            depth,
            hops,
        })
    }

    pub fn junctions(&self) -> &[Junction] {
        &self.junctions
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn root(&self) -> JunctionId {
        self.junctions[self.root].id
    }

    pub fn gateways(&self) -> impl Iterator<Item = &Gateway> + '_ {
        self.gateways
            .values()
            .filter_map(move |&i| self.junctions[i].gateway.as_ref())
    }

    pub fn gateway(&self, id: GatewayId) -> Option<&Gateway> {
        self.gateways
            .get(&id)
            .and_then(|&i| self.junctions[i].gateway.as_ref())
    }

    pub fn contains(&self, id: JunctionId) -> bool {
        self.index.contains_key(&id)
    }

    /// The next junction toward the root, `None` for the root itself.
    pub fn parent(&self, id: JunctionId) -> Result<Option<JunctionId>, GraphError> {
        let i = self.idx(id)?;
        Ok(self.parent[i].map(|p| self.junctions[p].id))
    }

    /// Same topology with one gateway switched off.
    pub fn without_gateway(&self, id: GatewayId) -> EnvironmentGraph {
        let mut g = self.clone();
        if let Some(i) = g.gateways.remove(&id) {
            g.junctions[i].gateway = None;
        }
        g
    }

    /// Sum of link lengths of the tree.
    pub fn total_length(&self) -> f64 {
        self.links.iter().map(|l| l.length).sum()
    }

    fn idx(&self, id: JunctionId) -> Result<usize, GraphError> {
        self.index
            .get(&id)
            .copied()
            .ok_or(GraphError::UnknownJunction(id))
    }

    fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.hops[a] > self.hops[b] {
            a = self.parent[a].expect("non-root has parent");
        }
        while self.hops[b] > self.hops[a] {
            b = self.parent[b].expect("non-root has parent");
        }
        while a != b {
            a = self.parent[a].expect("non-root has parent");
            b = self.parent[b].expect("non-root has parent");
        }
        a
    }

    fn link_len(&self, a: usize, b: usize) -> Option<f64> {
        if self.parent[a] == Some(b) {
            Some(self.up_len[a])
        } else if self.parent[b] == Some(a) {
            Some(self.up_len[b])
        } else {
            None
        }
    }

    fn path_indices(&self, u: usize, v: usize) -> Vec<usize> {
        let l = self.lca(u, v);
        let mut path = Vec::new();
        let mut x = u;
        while x != l {
            path.push(x);
            x = self.parent[x].expect("below lca");
        }
        path.push(l);
        let mut tail = Vec::new();
        let mut y = v;
        while y != l {
            tail.push(y);
            y = self.parent[y].expect("below lca");
        }
        path.extend(tail.into_iter().rev());
        path
    }

    /// The unique simple path from `u` to `v`, both inclusive.
    pub fn shortest_path(&self, u: JunctionId, v: JunctionId) -> Result<Vec<JunctionId>, GraphError> {
        let (ui, vi) = (self.idx(u)?, self.idx(v)?);
        Ok(self
            .path_indices(ui, vi)
            .into_iter()
            .map(|i| self.junctions[i].id)
            .collect())
    }

    pub fn path_length(&self, u: JunctionId, v: JunctionId) -> Result<f64, GraphError> {
        let (ui, vi) = (self.idx(u)?, self.idx(v)?);
        Ok(self.junction_distance(ui, vi))
    }

    fn junction_distance(&self, a: usize, b: usize) -> f64 {
        let l = self.lca(a, b);
        (self.depth[a] - self.depth[l]) + (self.depth[b] - self.depth[l])
    }

    /// Position `offset` length units along `path` (a junction sequence).
    pub fn point_at(&self, path: &[JunctionId], offset: f64) -> Result<GraphPosition, GraphError> {
        let idx: Vec<usize> = path.iter().map(|&j| self.idx(j)).collect::<Result<_, _>>()?;
        let first = *idx.first().ok_or(GraphError::NotAPath)?;
        let mut lengths = Vec::with_capacity(idx.len().saturating_sub(1));
        for w in idx.windows(2) {
            lengths.push(self.link_len(w[0], w[1]).ok_or(GraphError::NotAPath)?);
        }
        let total: f64 = lengths.iter().sum();
        if !(offset >= -POSITION_EPSILON && offset <= total + POSITION_EPSILON) {
            return Err(GraphError::OffsetOutOfRange {
                offset,
                length: total,
            });
        }
        let mut walked = 0.0;
        for (k, &len) in lengths.iter().enumerate() {
            let rest = offset - walked;
            if rest < len - POSITION_EPSILON {
                return Ok(GraphPosition {
                    from: path[k],
                    to: path[k + 1],
                    offset: rest.max(0.0),
                    span: len,
                });
            }
            walked += len;
        }
        let last = idx.last().copied().unwrap_or(first);
        Ok(GraphPosition::at_junction(self.junctions[last].id))
    }

    pub(crate) fn normalize(&self, junction: usize, along: f64) -> Anchor {
        match self.parent[junction] {
            None => Anchor { junction, along: 0.0 },
            Some(p) => {
                let len = self.up_len[junction];
                if along >= len - POSITION_EPSILON {
                    Anchor {
                        junction: p,
                        along: 0.0,
                    }
                } else if along <= POSITION_EPSILON {
                    Anchor { junction, along: 0.0 }
                } else {
                    Anchor { junction, along }
                }
            }
        }
    }

    pub(crate) fn junction_anchor(&self, id: JunctionId) -> Result<Anchor, GraphError> {
        Ok(Anchor {
            junction: self.idx(id)?,
            along: 0.0,
        })
    }

    pub(crate) fn anchor_junction(&self, a: Anchor) -> Option<JunctionId> {
        (a.along == 0.0).then(|| self.junctions[a.junction].id)
    }

    /// Converts any valid position (adjacent or path-relative) to canonical form.
    pub(crate) fn anchor(&self, pos: &GraphPosition) -> Result<Anchor, GraphError> {
        let invalid = || GraphError::InvalidPosition {
            from: pos.from,
            to: pos.to,
            offset: pos.offset,
            span: pos.span,
        };
        let (fi, ti) = (self.idx(pos.from)?, self.idx(pos.to)?);
        let span = self.junction_distance(fi, ti);
        let tol = POSITION_EPSILON * span.max(1.0);
        if !pos.offset.is_finite() || !pos.span.is_finite() || (pos.span - span).abs() > tol {
            return Err(invalid());
        }
        if pos.offset < -tol || pos.offset > span + tol {
            return Err(invalid());
        }
        if fi == ti {
            return Ok(Anchor {
                junction: fi,
                along: 0.0,
            });
        }
        if self.parent[fi] == Some(ti) {
            return Ok(self.normalize(fi, pos.offset));
        }
        if self.parent[ti] == Some(fi) {
            return Ok(self.normalize(ti, span - pos.offset));
        }
        let route = self.route_between(
            Anchor {
                junction: fi,
                along: 0.0,
            },
            Anchor {
                junction: ti,
                along: 0.0,
            },
        );
        Ok(route.point_at(self, pos.offset))
    }

    pub(crate) fn position(&self, a: Anchor) -> GraphPosition {
        let a = self.normalize(a.junction, a.along);
        match self.parent[a.junction] {
            Some(p) if a.along > 0.0 => GraphPosition {
                from: self.junctions[a.junction].id,
                to: self.junctions[p].id,
                offset: a.along,
                span: self.up_len[a.junction],
            },
            _ => GraphPosition::at_junction(self.junctions[a.junction].id),
        }
    }

    /// Rewrites a valid position into canonical link-local form.
    pub fn canonical(&self, pos: &GraphPosition) -> Result<GraphPosition, GraphError> {
        Ok(self.position(self.anchor(pos)?))
    }

    /// Distance along the network from `a` to the root.
    pub fn distance_to_root(&self, pos: &GraphPosition) -> Result<f64, GraphError> {
        let a = self.anchor(pos)?;
        Ok(self.depth[a.junction] - a.along)
    }

    pub(crate) fn anchor_distance(&self, a: Anchor, b: Anchor) -> f64 {
        if a.junction == b.junction {
            return (a.along - b.along).abs();
        }
        let l = self.lca(a.junction, b.junction);
        if l == a.junction {
            a.along + (self.depth[b.junction] - b.along - self.depth[l])
        } else if l == b.junction {
            b.along + (self.depth[a.junction] - a.along - self.depth[l])
        } else {
            (self.depth[a.junction] - a.along - self.depth[l])
                + (self.depth[b.junction] - b.along - self.depth[l])
        }
    }

    /// Length of the unique path between two points of the network.
    pub fn geodesic_distance(&self, p1: &GraphPosition, p2: &GraphPosition) -> Result<f64, GraphError> {
        let (a, b) = (self.anchor(p1)?, self.anchor(p2)?);
        Ok(self.anchor_distance(a, b))
    }

    pub fn same_position(&self, p1: &GraphPosition, p2: &GraphPosition) -> Result<bool, GraphError> {
        Ok(self.geodesic_distance(p1, p2)? <= POSITION_EPSILON)
    }

    pub fn route(&self, p1: &GraphPosition, p2: &GraphPosition) -> Result<Route, GraphError> {
        Ok(self.route_between(self.anchor(p1)?, self.anchor(p2)?))
    }

    pub(crate) fn route_between(&self, a: Anchor, b: Anchor) -> Route {
        let mut segments = Vec::new();
        let mut push = |junction: usize, from: f64, to: f64| {
            if (to - from).abs() > POSITION_EPSILON {
                segments.push(Segment { junction, from, to });
            }
        };
        if a.junction == b.junction {
            push(a.junction, a.along, b.along);
        } else {
            let l = self.lca(a.junction, b.junction);
            if a.junction == l {
                push(a.junction, a.along, 0.0);
            } else {
                let mut x = a.junction;
                let mut from = a.along;
                while x != l {
                    push(x, from, self.up_len[x]);
                    x = self.parent[x].expect("below lca");
                    from = 0.0;
                }
            }
            if b.junction == l {
                push(b.junction, 0.0, b.along);
            } else {
                let mut chain = Vec::new();
                let mut y = b.junction;
                while y != l {
                    chain.push(y);
                    y = self.parent[y].expect("below lca");
                }
                for &y in chain.iter().rev() {
                    let to = if y == b.junction { b.along } else { 0.0 };
                    push(y, self.up_len[y], to);
                }
            }
        }
        let length = segments.iter().map(Segment::len).sum();
        Route {
            start: a,
            end: b,
            segments,
            length,
        }
    }

    /// The first vertex on the path from `a` toward `f` that also lies on the
    /// path from `b` toward `f`; no other shared vertex is farther from `f`.
    pub fn confluence_vertex(
        &self,
        a: JunctionId,
        b: JunctionId,
        f: JunctionId,
    ) -> Result<JunctionId, GraphError> {
        let (ai, bi, fi) = (self.idx(a)?, self.idx(b)?, self.idx(f)?);
        let shared: BTreeSet<usize> = self.path_indices(bi, fi).into_iter().collect();
        let vc = self
            .path_indices(ai, fi)
            .into_iter()
            .find(|v| shared.contains(v))
            .unwrap_or(fi);
        Ok(self.junctions[vc].id)
    }

    /// Point `distance` downstream of a junction on its link toward the root.
    /// Clamped to the parent junction when the link is shorter.
    pub(crate) fn downstream_of(&self, junction: usize, distance: f64) -> Anchor {
        match self.parent[junction] {
            None => Anchor { junction, along: 0.0 },
            Some(p) => {
                if distance >= self.up_len[junction] {
                    log::warn!(
                        "boundary distance {distance} exceeds link {}-{}; clamped",
                        self.junctions[junction].id,
                        self.junctions[p].id
                    );
                    Anchor {
                        junction: p,
                        along: 0.0,
                    }
                } else {
                    self.normalize(junction, distance)
                }
            }
        }
    }

    /// Point at `distance` from junction `target`, on the link through which
    /// the path from `reference` arrives at `target`. Clamped to the far end
    /// of that link when it is shorter than `distance`.
    pub(crate) fn approach_point(&self, reference: Anchor, target: usize, distance: f64) -> Anchor {
        let target_anchor = Anchor {
            junction: target,
            along: 0.0,
        };
        let route = self.route_between(reference, target_anchor);
        let Some(last) = route.segments.last() else {
            return target_anchor;
        };
        // Either the last segment climbs from a child into `target`, or it
        // descends along `target`'s own link toward it.
        let (link_owner, far, len) = if last.junction == target {
            let parent = self.parent[target].expect("descending segment has a parent");
            (target, parent, self.up_len[target])
        } else {
            (last.junction, last.junction, self.up_len[last.junction])
        };
        if distance >= len {
            log::warn!(
                "boundary distance {distance} exceeds approach link of junction {}; clamped",
                self.junctions[target].id
            );
            return Anchor {
                junction: far,
                along: 0.0,
            };
        }
        if link_owner == target {
            self.normalize(target, distance)
        } else {
            self.normalize(link_owner, len - distance)
        }
    }

    pub(crate) fn advance_toward_root(&self, a: Anchor, distance: f64) -> Anchor {
        let mut junction = a.junction;
        let mut along = a.along;
        let mut remaining = distance;
        while let Some(p) = self.parent[junction] {
            let room = self.up_len[junction] - along;
            if remaining < room {
                return self.normalize(junction, along + remaining);
            }
            remaining -= room;
            junction = p;
            along = 0.0;
        }
        Anchor { junction, along: 0.0 }
    }

    pub(crate) fn is_root(&self, a: Anchor) -> bool {
        a.junction == self.root && a.along == 0.0
    }

    pub(crate) fn gateway_anchor(&self, id: GatewayId) -> Option<(usize, &Gateway)> {
        let &i = self.gateways.get(&id)?;
        self.junctions[i].gateway.as_ref().map(|g| (i, g))
    }

    pub(crate) fn junction_id(&self, i: usize) -> JunctionId {
        self.junctions[i].id
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}
