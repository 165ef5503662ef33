//! Seeded discrete-time simulation of nodes drifting toward the root.
//!
//! Each tick: nodes due are released, every node records a package on
//! measurement ticks and uploads its buffer while any gateway is in range,
//! nodes that reached the root retire, and the rest move downstream by
//! `base_step` plus one extra `base_step` with probability `noise_p`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Anchor, EnvironmentGraph, GraphError, GraphPosition, Junction, JunctionId, Link};
use crate::model::{GatewayObservation, NodeContact, NodeId, Package, Payload};
use crate::pipeline::Batch;
use crate::signal::{LinearFalloff, SignalModel};

#[derive(Debug, Clone, PartialEq)]
pub struct NodeInsertion {
    pub node: NodeId,
    pub start: GraphPosition,
    pub tick: u64,
    /// Scripted distance per tick since release, replacing the random
    /// motion. The last entry repeats.
    pub speeds: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub graph: EnvironmentGraph,
    pub insertions: Vec<NodeInsertion>,
    pub base_step: f64,
    pub noise_p: f64,
    /// Probability that a node keeps the previous tick's noise value instead
    /// of drawing a fresh one. Zero gives independent draws.
    pub noise_persistence: f64,
    pub contact_radius: f64,
    pub measurement_interval: u64,
    pub max_ticks: u64,
}

pub const DEFAULT_NOISE_P: f64 = 2.0 / 3.0;
pub const DEFAULT_MAX_TICKS: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("base step must be positive, got {0}")]
    BaseStep(f64),
    #[error("probability {name} must lie in [0, 1], got {value}")]
    Probability { name: &'static str, value: f64 },
    #[error("contact radius must be positive, got {0}")]
    ContactRadius(f64),
    #[error("measurement interval must be at least 1")]
    MeasurementInterval,
    #[error("node {0} is inserted twice")]
    DuplicateNode(NodeId),
    #[error("scripted speeds of node {0} are empty or negative")]
    Speeds(NodeId),
    #[error("unknown scenario {0}, expected 1 to 4")]
    UnknownScenario(u32),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl ScenarioSpec {
    pub fn new(graph: EnvironmentGraph, insertions: Vec<NodeInsertion>) -> Self {
        let contact_radius = graph.gateways().map(|g| g.radius).fold(0.0, f64::max);
        ScenarioSpec {
            graph,
            insertions,
            base_step: 1.0,
            noise_p: DEFAULT_NOISE_P,
            noise_persistence: 0.0,
            contact_radius: if contact_radius > 0.0 { contact_radius } else { 1.0 },
            measurement_interval: 1,
            max_ticks: DEFAULT_MAX_TICKS,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.base_step > 0.0) {
            return Err(SimError::BaseStep(self.base_step));
        }
        for (name, value) in [("noise_p", self.noise_p), ("noise_persistence", self.noise_persistence)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SimError::Probability { name, value });
            }
        }
        if !(self.contact_radius > 0.0) {
            return Err(SimError::ContactRadius(self.contact_radius));
        }
        if self.measurement_interval == 0 {
            return Err(SimError::MeasurementInterval);
        }
        let mut seen = Vec::new();
        for ins in &self.insertions {
            if seen.contains(&ins.node) {
                return Err(SimError::DuplicateNode(ins.node));
            }
            seen.push(ins.node);
            self.graph.anchor(&ins.start)?;
            if let Some(s) = &ins.speeds {
                if s.is_empty() || s.iter().any(|v| !(*v >= 0.0)) {
                    return Err(SimError::Speeds(ins.node));
                }
            }
        }
        Ok(())
    }

    pub fn insertion_positions(&self) -> BTreeMap<NodeId, GraphPosition> {
        self.insertions.iter().map(|i| (i.node, i.start)).collect()
    }

    /// Mean distance from the insertion points to the root.
    pub fn route_length(&self) -> Result<f64, GraphError> {
        if self.insertions.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for ins in &self.insertions {
            total += self.graph.distance_to_root(&ins.start)?;
        }
        Ok(total / self.insertions.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRecord {
    pub node: NodeId,
    pub seq: u64,
    pub tick: u64,
    pub position: GraphPosition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceOutput {
    /// In upload order.
    pub batches: Vec<Batch>,
    /// One record per uploaded package.
    pub ground_truth: Vec<GroundTruthRecord>,
    /// Some node had not reached the root by `max_ticks`.
    pub truncated: bool,
}

impl InstanceOutput {
    pub fn packages(&self) -> impl Iterator<Item = &Package> + '_ {
        self.batches.iter().flat_map(|b| b.packages.iter())
    }
}

struct Drifter {
    node: NodeId,
    position: Anchor,
    released: u64,
    seq: u64,
    noise: bool,
    active: bool,
    buffer: Vec<(Package, GraphPosition)>,
    speeds: Option<Vec<f64>>,
}

/// Simulator state between ticks.
pub struct World<'s> {
    spec: &'s ScenarioSpec,
    rng: ChaCha8Rng,
    tick: u64,
    pending: Vec<&'s NodeInsertion>,
    nodes: Vec<Drifter>,
    output: InstanceOutput,
}

impl<'s> World<'s> {
    pub fn new(spec: &'s ScenarioSpec, seed: u64) -> Result<Self, SimError> {
        spec.validate()?;
        let mut pending: Vec<&NodeInsertion> = spec.insertions.iter().collect();
        pending.sort_by_key(|i| (i.tick, i.node));
        Ok(World {
            spec,
            rng: ChaCha8Rng::seed_from_u64(seed),
            tick: 0,
            pending,
            nodes: Vec::new(),
            output: InstanceOutput {
                batches: Vec::new(),
                ground_truth: Vec::new(),
                truncated: false,
            },
        })
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// True position of an active node.
    pub fn position(&self, node: NodeId) -> Option<GraphPosition> {
        self.nodes
            .iter()
            .find(|d| d.node == node && d.active)
            .map(|d| self.spec.graph.position(d.position))
    }

    pub fn finished(&self) -> bool {
        self.pending.is_empty() && self.nodes.iter().all(|d| !d.active)
    }

    fn release(&mut self) {
        let graph = &self.spec.graph;
        while let Some(ins) = self.pending.first() {
            if ins.tick > self.tick {
                break;
            }
            let ins = self.pending.remove(0);
            let position = graph.anchor(&ins.start).expect("validated insertion");
            let at = self.nodes.partition_point(|d| d.node < ins.node);
            self.nodes.insert(
                at,
                Drifter {
                    node: ins.node,
                    position,
                    released: self.tick,
                    seq: 0,
                    noise: false,
                    active: true,
                    buffer: Vec::new(),
                    speeds: ins.speeds.clone(),
                },
            );
        }
    }

    /// Gateway observations and peer contacts of node `index`.
    pub fn observe(&self, index: usize) -> (Vec<GatewayObservation>, Vec<NodeContact>) {
        let graph = &self.spec.graph;
        let here = self.nodes[index].position;
        let signal = LinearFalloff;
        let observations = graph
            .gateways()
            .filter_map(|g| {
                let junction = graph.junction_anchor(g.junction).expect("gateway junction exists");
                let d = graph.anchor_distance(here, junction);
                signal.strength(g.radius, d).map(|strength| GatewayObservation {
                    gateway: g.id,
                    strength,
                })
            })
            .collect();
        let contacts = self
            .nodes
            .iter()
            .enumerate()
            .filter(|&(j, d)| j != index && d.active)
            .filter_map(|(_, d)| {
                let dist = graph.anchor_distance(here, d.position);
                signal
                    .strength(self.spec.contact_radius, dist)
                    .map(|strength| NodeContact { peer: d.node, strength })
            })
            .collect();
        (observations, contacts)
    }

    fn record_and_emit(&mut self) {
        let measuring = self.tick.is_multiple_of(self.spec.measurement_interval);
        if !measuring {
            return;
        }
        let recorded: Vec<_> = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].active)
            .map(|i| (i, self.observe(i)))
            .collect();
        let tick = self.tick;
        for (i, (observations, contacts)) in recorded {
            let graph = &self.spec.graph;
            let d = &mut self.nodes[i];
            let package = Package::new(d.node, d.seq, tick as f64, observations, contacts, Payload::default());
            d.seq += 1;
            let in_range = package.hears_gateway();
            d.buffer.push((package, graph.position(d.position)));
            if in_range {
                let mut packages = Vec::with_capacity(d.buffer.len());
                for (p, truth) in d.buffer.drain(..) {
                    self.output.ground_truth.push(GroundTruthRecord {
                        node: p.node,
                        seq: p.seq,
                        tick,
                        position: truth,
                    });
                    packages.push(p);
                }
                self.output.batches.push(Batch {
                    node: d.node,
                    time: tick as f64,
                    packages,
                });
            }
        }
    }

    fn step_length(&mut self, i: usize) -> f64 {
        let spec = self.spec;
        let tick = self.tick;
        let d = &mut self.nodes[i];
        if let Some(speeds) = &d.speeds {
            let k = (tick - d.released) as usize;
            return speeds[k.min(speeds.len() - 1)];
        }
        let keep = spec.noise_persistence > 0.0 && self.rng.gen_bool(spec.noise_persistence);
        if !keep {
            d.noise = self.rng.gen_bool(spec.noise_p);
        }
        if d.noise {
            2.0 * spec.base_step
        } else {
            spec.base_step
        }
    }

    /// Advances the world by one tick.
    pub fn step(&mut self) {
        self.release();
        self.record_and_emit();
        let graph = &self.spec.graph;
        for d in self.nodes.iter_mut().filter(|d| d.active) {
            if graph.is_root(d.position) {
                d.active = false;
            }
        }
        for i in 0..self.nodes.len() {
            if !self.nodes[i].active {
                continue;
            }
            let step = self.step_length(i);
            let d = &mut self.nodes[i];
            d.position = self.spec.graph.advance_toward_root(d.position, step);
        }
        self.tick += 1;
    }

    pub fn into_output(mut self) -> InstanceOutput {
        self.output.truncated = !self.finished();
        if self.output.truncated {
            log::warn!("instance stopped at tick {} before every node reached the root", self.tick);
        }
        self.output
    }
}

/// Runs one seeded instance until every node retired or `max_ticks`.
pub fn run_instance(spec: &ScenarioSpec, seed: u64) -> Result<InstanceOutput, SimError> {
    let mut world = World::new(spec, seed)?;
    while !world.finished() && world.tick() < spec.max_ticks {
        world.step();
    }
    Ok(world.into_output())
}

/// The built-in scenarios.
///
/// 1. A chain of three gateways joined by two links of 50, one node.
/// 2. The same chain with a second node released 5 ticks later.
/// 3. Two gated sources 50 from an ungated merge junction, which is 50 from
///    the gated root; one node at each source.
/// 4. Five gated sources feeding two ungated merge junctions, a gated
///    collector and the gated root; one node per source.
///
/// Gateway radius is √10 everywhere.
pub fn make_scenario(k: u32) -> Result<ScenarioSpec, SimError> {
    let r = libm::sqrt(10.0);
    let at = |j: u32| GraphPosition::at_junction(JunctionId(j));
    let node = |n: u32, j: u32, tick: u64| NodeInsertion {
        node: NodeId(n),
        start: at(j),
        tick,
        speeds: None,
    };
    let chain = || {
        EnvironmentGraph::build(
            alloc::vec![Junction::gated(0, 0, r), Junction::gated(1, 1, r), Junction::gated(2, 2, r)],
            alloc::vec![Link::new(0, 1, 50.0), Link::new(1, 2, 50.0)],
            JunctionId(2),
        )
    };
    let spec = match k {
        1 => ScenarioSpec::new(chain()?, alloc::vec![node(0, 0, 0)]),
        2 => ScenarioSpec::new(chain()?, alloc::vec![node(0, 0, 0), node(1, 0, 5)]),
        3 => {
            let graph = EnvironmentGraph::build(
                alloc::vec![
                    Junction::gated(0, 0, r),
                    Junction::gated(1, 1, r),
                    Junction::plain(2),
                    Junction::gated(3, 3, r),
                ],
                alloc::vec![Link::new(0, 2, 50.0), Link::new(1, 2, 50.0), Link::new(2, 3, 50.0)],
                JunctionId(3),
            )?;
            ScenarioSpec::new(graph, alloc::vec![node(0, 0, 0), node(1, 1, 0)])
        }
        4 => {
            let mut junctions = alloc::vec![
                Junction::gated(0, 0, r),
                Junction::gated(1, 1, r),
                Junction::plain(2),
                Junction::plain(3),
            ];
            junctions.extend((4..=8).map(|j| Junction::gated(j, j, r)));
            let graph = EnvironmentGraph::build(
                junctions,
                alloc::vec![
                    Link::new(4, 2, 80.0),
                    Link::new(5, 2, 80.0),
                    Link::new(2, 1, 70.0),
                    Link::new(6, 3, 90.0),
                    Link::new(7, 3, 60.0),
                    Link::new(3, 1, 80.0),
                    Link::new(1, 0, 100.0),
                    Link::new(8, 0, 150.0),
                ],
                JunctionId(0),
            )?;
            ScenarioSpec::new(
                graph,
                alloc::vec![node(0, 4, 0), node(1, 5, 0), node(2, 6, 0), node(3, 7, 18), node(4, 8, 0)],
            )
        }
        other => return Err(SimError::UnknownScenario(other)),
    };
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn scenario_shapes() {
        let s1 = make_scenario(1).unwrap();
        assert_eq!(s1.graph.junctions().len(), 3);
        assert_eq!(s1.graph.links().iter().map(|l| l.length).collect::<Vec<_>>(), vec![50.0, 50.0]);
        let r = libm::sqrt(10.0);
        // every gateway covers r on each side along the path
        let covered = 4.0 * r / s1.route_length().unwrap();
        assert!((covered - r / 25.0).abs() < 1e-12);

        let s3 = make_scenario(3).unwrap();
        let covered = 2.0 * r / s3.route_length().unwrap();
        assert!((covered - r / 50.0).abs() < 1e-12);
        assert_eq!(s3.route_length().unwrap(), 100.0);

        let s4 = make_scenario(4).unwrap();
        assert_eq!(s4.insertions.len(), 5);
        assert!(matches!(make_scenario(5), Err(SimError::UnknownScenario(5))));
    }

    #[test]
    fn determinism() {
        let spec = make_scenario(2).unwrap();
        assert_eq!(run_instance(&spec, 3).unwrap(), run_instance(&spec, 3).unwrap());
        assert_ne!(
            run_instance(&spec, 3).unwrap().ground_truth,
            run_instance(&spec, 4).unwrap().ground_truth
        );
    }

    #[test]
    fn noiseless_node_moves_base_step() {
        let mut spec = make_scenario(1).unwrap();
        spec.noise_p = 0.0;
        let out = run_instance(&spec, 0).unwrap();
        assert!(!out.truncated);
        assert_eq!(out.ground_truth.len(), 101);
        for rec in &out.ground_truth {
            let d = spec.graph.distance_to_root(&rec.position).unwrap();
            assert!((d - (100.0 - rec.seq as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn emission_and_conservation() {
        let spec = make_scenario(1).unwrap();
        let out = run_instance(&spec, 11).unwrap();
        let packages: Vec<&Package> = out.packages().collect();
        assert_eq!(packages.len(), out.ground_truth.len());
        for (i, p) in packages.iter().enumerate() {
            assert_eq!(p.seq, i as u64);
        }
        for b in &out.batches {
            // only the last package of an upload heard a gateway, unless
            // the node is still in range and uploads one package per tick
            assert!(b.packages.last().unwrap().hears_gateway());
            assert!(b.packages[..b.packages.len() - 1].iter().all(|p| !p.hears_gateway()));
            assert_eq!(b.time, b.packages.last().unwrap().timestamp);
        }
        let mut last = f64::INFINITY;
        for rec in &out.ground_truth {
            let d = spec.graph.distance_to_root(&rec.position).unwrap();
            assert!(d <= last);
            last = d;
        }
    }

    #[test]
    fn truncation_is_flagged() {
        let mut spec = make_scenario(1).unwrap();
        spec.max_ticks = 10;
        let out = run_instance(&spec, 0).unwrap();
        assert!(out.truncated);
        // the node left range at the start and has not uploaded since
        assert!(out.ground_truth.len() < 10);
    }

    #[test]
    fn scripted_speeds_override_noise() {
        let mut spec = make_scenario(1).unwrap();
        spec.insertions[0].speeds = Some(vec![0.5, 0.5, 2.5]);
        let mut world = World::new(&spec, 0).unwrap();
        for _ in 0..4 {
            world.step();
        }
        let d = spec.graph.distance_to_root(&world.position(NodeId(0)).unwrap()).unwrap();
        assert!((d - (100.0 - 0.5 - 0.5 - 2.5 - 2.5)).abs() < 1e-12);
    }

    #[test]
    fn contact_strength() {
        let mut spec = make_scenario(2).unwrap();
        spec.contact_radius = 3.0;
        spec.insertions[1].tick = 0;
        spec.insertions[0].speeds = Some(vec![1.0]);
        spec.insertions[1].speeds = Some(vec![0.0]);
        let mut world = World::new(&spec, 0).unwrap();
        world.step();
        let (_, contacts) = world.observe(0);
        assert_eq!(
            contacts,
            vec![NodeContact {
                peer: NodeId(1),
                strength: 2.0
            }]
        );
    }

    #[test]
    fn invalid_specs() {
        let mut spec = make_scenario(1).unwrap();
        spec.base_step = 0.0;
        assert!(matches!(spec.validate(), Err(SimError::BaseStep(_))));
        let mut spec = make_scenario(1).unwrap();
        spec.noise_p = 1.5;
        assert!(matches!(spec.validate(), Err(SimError::Probability { .. })));
        let mut spec = make_scenario(1).unwrap();
        spec.insertions.push(spec.insertions[0].clone());
        assert!(matches!(spec.validate(), Err(SimError::DuplicateNode(_))));
    }
}
