//! Genotype representation and the NEAT variation operators.
//!
//! A [`Genome`] is a list of node genes plus a list of connection genes kept
//! sorted by innovation number. Innovation numbers and hidden-node ids are
//! handed out by an [`InnovationRegistry`], which remembers the structural
//! mutations of the current generation so identical mutations in different
//! genomes receive identical markers.
//!
//! Every connection gene records whether it closed a cycle when it was
//! created. Genes flagged `recurrent` carry the previous timestep's activation
//! in the phenotype; the remaining genes always form an acyclic graph.

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::foraging::FitnessRecord;

pub type NodeId = u32;
pub type Innovation = u64;

#[derive(Debug, Error, PartialEq)]
pub enum GenomeError {
    #[error("invalid io spec: {inputs} inputs, {outputs} outputs (both must be non-zero)")]
    InvalidSpec { inputs: usize, outputs: usize },
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("duplicate innovation number {0}")]
    DuplicateInnovation(Innovation),
    #[error("connection {innovation} references missing node {node}")]
    DanglingReference { innovation: Innovation, node: NodeId },
    #[error("more than one connection from {source_id} to {target}")]
    DuplicatePair { source_id: NodeId, target: NodeId },
    #[error("connection {0} targets an input or bias node")]
    InputTarget(Innovation),
    #[error("connections are not sorted by innovation")]
    Unsorted,
    #[error("malformed genome document: {0}")]
    Format(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Input,
    Bias,
    Hidden,
    Output,
}

impl NodeKind {
    /// Input and bias nodes receive values from outside the network.
    pub fn is_sensor(self) -> bool {
        matches!(self, NodeKind::Input | NodeKind::Bias)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeGene {
    pub id: NodeId,
    pub kind: NodeKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectionGene {
    pub innovation: Innovation,
    pub source: NodeId,
    pub target: NodeId,
    pub weight: f64,
    pub enabled: bool,
    pub recurrent: bool,
}

/// Number of network inputs and outputs.
///
/// Node ids `0..inputs` are the input side; the last of them is the bias.
/// Outputs follow at `inputs..inputs + outputs`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IoSpec {
    pub inputs: usize,
    pub outputs: usize,
}

impl IoSpec {
    /// Ten food-distance sensors, pleasure, pain and bias; left, right, forward.
    pub const FORAGING: IoSpec = IoSpec { inputs: 13, outputs: 3 };

    pub fn validate(&self) -> Result<(), GenomeError> {
        if self.inputs == 0 || self.outputs == 0 {
            return Err(GenomeError::InvalidSpec { inputs: self.inputs, outputs: self.outputs });
        }
        Ok(())
    }

    pub fn input_ids(&self) -> std::ops::Range<NodeId> {
        0..self.inputs as NodeId
    }

    pub fn output_ids(&self) -> std::ops::Range<NodeId> {
        self.inputs as NodeId..(self.inputs + self.outputs) as NodeId
    }

    pub fn bias_id(&self) -> NodeId {
        self.inputs as NodeId - 1
    }

    fn first_hidden_id(&self) -> NodeId {
        (self.inputs + self.outputs) as NodeId
    }

    /// Fixed marker for the direct input-to-output connection, shared by all
    /// genomes of a run.
    fn direct_innovation(&self, source: NodeId, target: NodeId) -> Option<Innovation> {
        let out = self.output_ids();
        if (source as usize) < self.inputs && out.contains(&target) {
            Some(source as Innovation * self.outputs as Innovation + (target - out.start) as Innovation)
        } else {
            None
        }
    }
}

/// How the first generation is wired.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Each input-output pair connected independently with probability `p_init`.
    Partial,
    /// A single uniformly chosen input connected to every output.
    FeatureSelect,
}

/// Mutation and initialization rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenomeConfig {
    pub p_init: f64,
    /// Initial and replacement weights are uniform in `[-weight_init_range, weight_init_range]`.
    pub weight_init_range: f64,
    pub perturb_power: f64,
    pub weight_max: f64,
    pub perturb_prob: f64,
    pub replace_prob: f64,
    pub redisable_prob: f64,
    pub add_connection_prob: f64,
    pub add_node_prob: f64,
}

impl Default for GenomeConfig {
    fn default() -> Self {
        Self {
            p_init: 0.5,
            weight_init_range: 1.0,
            perturb_power: 0.5,
            weight_max: 8.0,
            perturb_prob: 0.8,
            replace_prob: 0.1,
            redisable_prob: 0.75,
            add_connection_prob: 0.15,
            add_node_prob: 0.05,
        }
    }
}

/// Weights for the compatibility distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Coefficients {
    pub excess: f64,
    pub disjoint: f64,
    pub weight: f64,
    /// When both genomes have fewer genes than this, the gene-count
    /// normalizer is 1. Zero disables the convention.
    pub small_genome_threshold: usize,
}

impl Default for Coefficients {
    fn default() -> Self {
        Self { excess: 1.0, disjoint: 1.0, weight: 0.4, small_genome_threshold: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct SplitRecord {
    node: NodeId,
    in_innovation: Innovation,
    out_innovation: Innovation,
}

/// Historical markings.
#[derive(Clone, Debug)]
pub struct InnovationRegistry {
    io: IoSpec,
    next_innovation: Innovation,
    next_node: NodeId,
    connections: HashMap<(NodeId, NodeId), Innovation>,
    splits: HashMap<Innovation, SplitRecord>,
}

impl InnovationRegistry {
    pub fn new(io: IoSpec) -> Self {
        Self {
            io,
            next_innovation: (io.inputs * io.outputs) as Innovation,
            next_node: io.first_hidden_id(),
            connections: HashMap::new(),
            splits: HashMap::new(),
        }
    }

    pub fn io(&self) -> IoSpec {
        self.io
    }

    pub fn next_innovation(&self) -> Innovation {
        self.next_innovation
    }

    pub fn next_node_id(&self) -> NodeId {
        self.next_node
    }

    /// Innovation for a new `source -> target` connection.
    pub fn connection(&mut self, source: NodeId, target: NodeId) -> Innovation {
        if let Some(innovation) = self.io.direct_innovation(source, target) {
            return innovation;
        }
        if let Some(&innovation) = self.connections.get(&(source, target)) {
            return innovation;
        }
        let innovation = self.fresh_innovation();
        self.connections.insert((source, target), innovation);
        innovation
    }

    fn split(&mut self, innovation: Innovation) -> SplitRecord {
        if let Some(&record) = self.splits.get(&innovation) {
            return record;
        }
        let record = self.fresh_split();
        self.splits.insert(innovation, record);
        record
    }

    fn fresh_split(&mut self) -> SplitRecord {
        let node = self.next_node;
        self.next_node += 1;
        SplitRecord {
            node,
            in_innovation: self.fresh_innovation(),
            out_innovation: self.fresh_innovation(),
        }
    }

    fn fresh_innovation(&mut self) -> Innovation {
        let innovation = self.next_innovation;
        self.next_innovation += 1;
        innovation
    }

    /// Forgets this generation's mutations; counters keep increasing.
    pub fn clear_generation(&mut self) {
        self.connections.clear();
        self.splits.clear();
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub nodes: Vec<NodeGene>,
    pub connections: Vec<ConnectionGene>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitness: Option<FitnessRecord>,
}

/// Which parent of a crossover is fitter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitterParent {
    First,
    Second,
    Equal,
}

impl FitterParent {
    pub fn compare(a: f64, b: f64) -> Self {
        if a > b {
            FitterParent::First
        } else if b > a {
            FitterParent::Second
        } else {
            FitterParent::Equal
        }
    }
}

impl Genome {
    /// Builds a first-generation genome.
    pub fn new<R: Rng + ?Sized>(
        io: IoSpec,
        mode: InitMode,
        cfg: &GenomeConfig,
        rng: &mut R,
    ) -> Result<Self, GenomeError> {
        io.validate()?;
        let mut nodes: Vec<NodeGene> = io
            .input_ids()
            .map(|id| NodeGene {
                id,
                kind: if id == io.bias_id() { NodeKind::Bias } else { NodeKind::Input },
            })
            .collect();
        nodes.extend(io.output_ids().map(|id| NodeGene { id, kind: NodeKind::Output }));

        let mut connections = Vec::new();
        let connect = |source: NodeId, target: NodeId, rng: &mut R| ConnectionGene {
            innovation: io.direct_innovation(source, target).expect("input to output"),
            source,
            target,
            weight: random_weight(cfg, rng),
            enabled: true,
            recurrent: false,
        };
        match mode {
            InitMode::FeatureSelect => {
                let source = rng.gen_range(io.input_ids());
                for target in io.output_ids() {
                    connections.push(connect(source, target, rng));
                }
            }
            InitMode::Partial => {
                for source in io.input_ids() {
                    for target in io.output_ids() {
                        if rng.gen_bool(cfg.p_init.clamp(0.0, 1.0)) {
                            connections.push(connect(source, target, rng));
                        }
                    }
                }
            }
        }
        Ok(Genome { nodes, connections, fitness: None })
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeGene> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn has_connection(&self, source: NodeId, target: NodeId) -> bool {
        self.connections.iter().any(|c| c.source == source && c.target == target)
    }

    pub fn enabled_connections(&self) -> impl Iterator<Item = &ConnectionGene> {
        self.connections.iter().filter(|c| c.enabled)
    }

    pub fn hidden_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Hidden).count()
    }

    pub fn fitness_value(&self) -> Option<f64> {
        self.fitness.map(|f| f.f)
    }

    /// True when the same nodes and connection genes (weights included) are present.
    pub fn same_structure_and_weights(&self, other: &Genome) -> bool {
        self.nodes == other.nodes && self.connections == other.connections
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<(), GenomeError> {
        let mut kinds = HashMap::new();
        for node in &self.nodes {
            if kinds.insert(node.id, node.kind).is_some() {
                return Err(GenomeError::DuplicateNode(node.id));
            }
        }
        let mut innovations = HashSet::new();
        let mut pairs = HashSet::new();
        let mut last = None;
        for c in &self.connections {
            if !innovations.insert(c.innovation) {
                return Err(GenomeError::DuplicateInnovation(c.innovation));
            }
            if last.is_some_and(|l| l > c.innovation) {
                return Err(GenomeError::Unsorted);
            }
            last = Some(c.innovation);
            for node in [c.source, c.target] {
                if !kinds.contains_key(&node) {
                    return Err(GenomeError::DanglingReference { innovation: c.innovation, node });
                }
            }
            if kinds[&c.target].is_sensor() {
                return Err(GenomeError::InputTarget(c.innovation));
            }
            if !pairs.insert((c.source, c.target)) {
                return Err(GenomeError::DuplicatePair { source_id: c.source, target: c.target });
            }
        }
        Ok(())
    }

    /// True when the directed graph over all connection genes has a cycle.
    pub fn has_cycle(&self) -> bool {
        has_cycle(self.connections.iter().map(|c| (c.source, c.target)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("genome serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("genome serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GenomeError> {
        let genome: Genome = serde_json::from_str(text).map_err(|e| GenomeError::Format(e.to_string()))?;
        genome.validate()?;
        Ok(genome)
    }

    fn insert_connection(&mut self, gene: ConnectionGene) {
        let at = self.connections.partition_point(|c| c.innovation < gene.innovation);
        self.connections.insert(at, gene);
    }

    fn insert_node(&mut self, node: NodeGene) {
        let at = self.nodes.partition_point(|n| n.id < node.id);
        self.nodes.insert(at, node);
    }
}

fn random_weight<R: Rng + ?Sized>(cfg: &GenomeConfig, rng: &mut R) -> f64 {
    let range = cfg.weight_init_range.abs();
    if range == 0.0 {
        0.0
    } else {
        rng.gen_range(-range..=range)
    }
}

/// Nodes reachable from `start` (inclusive) along the given edges.
fn reachable(adjacency: &HashMap<NodeId, Vec<NodeId>>, start: NodeId) -> HashSet<NodeId> {
    let mut seen = HashSet::from([start]);
    let mut stack = vec![start];
    while let Some(n) = stack.pop() {
        if let Some(next) = adjacency.get(&n) {
            for &m in next {
                if seen.insert(m) {
                    stack.push(m);
                }
            }
        }
    }
    seen
}

fn adjacency(edges: impl Iterator<Item = (NodeId, NodeId)>) -> HashMap<NodeId, Vec<NodeId>> {
    let mut adj: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for (s, t) in edges {
        adj.entry(s).or_default().push(t);
    }
    adj
}

/// Whether adding `source -> target` closes a cycle (self-loops included).
pub fn closes_cycle(edges: impl Iterator<Item = (NodeId, NodeId)>, source: NodeId, target: NodeId) -> bool {
    source == target || reachable(&adjacency(edges), target).contains(&source)
}

/// Cycle detection by Kahn's algorithm.
pub fn has_cycle(edges: impl Iterator<Item = (NodeId, NodeId)>) -> bool {
    let edges: Vec<_> = edges.collect();
    let mut indegree: HashMap<NodeId, usize> = HashMap::new();
    for &(s, t) in &edges {
        indegree.entry(s).or_insert(0);
        *indegree.entry(t).or_insert(0) += 1;
    }
    let adj = adjacency(edges.iter().copied());
    let mut ready: Vec<NodeId> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| n).collect();
    let mut visited = 0;
    while let Some(n) = ready.pop() {
        visited += 1;
        for &m in adj.get(&n).map(Vec::as_slice).unwrap_or(&[]) {
            let d = indegree.get_mut(&m).expect("known node");
            *d -= 1;
            if *d == 0 {
                ready.push(m);
            }
        }
    }
    visited != indegree.len()
}

/// Adds one connection between a not-yet-connected pair, chosen uniformly
/// among the legal candidates. Returns the genome unchanged when none exists.
pub fn mutate_add_connection<R: Rng + ?Sized>(
    genome: &Genome,
    allow_recurrent: bool,
    registry: &mut InnovationRegistry,
    cfg: &GenomeConfig,
    rng: &mut R,
) -> Genome {
    let adj = adjacency(genome.connections.iter().map(|c| (c.source, c.target)));
    let existing: HashSet<(NodeId, NodeId)> = genome.connections.iter().map(|c| (c.source, c.target)).collect();

    let mut candidates = Vec::new();
    for target in genome.nodes.iter().filter(|n| !n.kind.is_sensor()) {
        // any source that `target` reaches would close a cycle
        let downstream = reachable(&adj, target.id);
        for source in &genome.nodes {
            if existing.contains(&(source.id, target.id)) {
                continue;
            }
            let cyclic = downstream.contains(&source.id);
            if cyclic && !allow_recurrent {
                continue;
            }
            candidates.push((source.id, target.id, cyclic));
        }
    }

    let mut child = genome.clone();
    if let Some(&(source, target, recurrent)) = candidates.choose(rng) {
        child.insert_connection(ConnectionGene {
            innovation: registry.connection(source, target),
            source,
            target,
            weight: random_weight(cfg, rng),
            enabled: true,
            recurrent,
        });
    }
    child
}

/// Splits a random enabled connection with a new hidden node.
pub fn mutate_add_node<R: Rng + ?Sized>(genome: &Genome, registry: &mut InnovationRegistry, rng: &mut R) -> Genome {
    let enabled: Vec<usize> = (0..genome.connections.len()).filter(|&i| genome.connections[i].enabled).collect();
    let Some(&index) = enabled.choose(rng) else {
        return genome.clone();
    };

    let mut child = genome.clone();
    let old = child.connections[index];
    child.connections[index].enabled = false;

    let mut split = registry.split(old.innovation);
    let reused = child.node(split.node).is_some()
        || child.connections.iter().any(|c| c.innovation == split.in_innovation || c.innovation == split.out_innovation);
    if reused {
        // the same gene was already split in this genome's lineage this generation
        split = registry.fresh_split();
    }

    child.insert_node(NodeGene { id: split.node, kind: NodeKind::Hidden });
    // the new node has no outgoing edge yet, so the in-edge cannot close a cycle
    child.insert_connection(ConnectionGene {
        innovation: split.in_innovation,
        source: old.source,
        target: split.node,
        weight: 1.0,
        enabled: true,
        recurrent: old.source == split.node,
    });
    let out_recurrent = closes_cycle(
        child.connections.iter().map(|c| (c.source, c.target)),
        split.node,
        old.target,
    );
    child.insert_connection(ConnectionGene {
        innovation: split.out_innovation,
        source: split.node,
        target: old.target,
        weight: old.weight,
        enabled: true,
        recurrent: out_recurrent,
    });
    child
}

/// Perturbs or replaces each weight independently, then clamps.
pub fn mutate_weights<R: Rng + ?Sized>(genome: &Genome, cfg: &GenomeConfig, rng: &mut R) -> Genome {
    let mut child = genome.clone();
    let limit = cfg.weight_max.abs();
    for c in &mut child.connections {
        let roll: f64 = rng.gen();
        if roll < cfg.perturb_prob {
            if cfg.perturb_power > 0.0 {
                c.weight += rng.gen_range(-cfg.perturb_power..=cfg.perturb_power);
            }
        } else if roll < cfg.perturb_prob + cfg.replace_prob {
            c.weight = random_weight(cfg, rng);
        }
        c.weight = c.weight.clamp(-limit, limit);
    }
    child
}

/// NEAT crossover aligned on innovation numbers.
///
/// Matching genes come from either parent with equal probability; disjoint
/// and excess genes come from the fitter parent, or from both with a coin
/// flip per gene on equal fitness. Genes are accepted in innovation order and
/// a gene is skipped if its node pair is already present or if, being
/// non-recurrent, it would close a cycle among the accepted non-recurrent
/// genes. Parents without recurrent genes therefore always produce an
/// acyclic child.
pub fn crossover<R: Rng + ?Sized>(
    a: &Genome,
    b: &Genome,
    fitter: FitterParent,
    cfg: &GenomeConfig,
    rng: &mut R,
) -> Genome {
    let by_innovation = |g: &Genome| -> HashMap<Innovation, ConnectionGene> {
        g.connections.iter().map(|c| (c.innovation, *c)).collect()
    };
    let genes_a = by_innovation(a);
    let genes_b = by_innovation(b);
    let innovations: BTreeSet<Innovation> = genes_a.keys().chain(genes_b.keys()).copied().collect();

    let mut chosen = Vec::new();
    for innovation in innovations {
        let gene = match (genes_a.get(&innovation), genes_b.get(&innovation)) {
            (Some(x), Some(y)) => {
                let mut gene = if rng.gen_bool(0.5) { *x } else { *y };
                if !x.enabled || !y.enabled {
                    gene.enabled = !rng.gen_bool(cfg.redisable_prob.clamp(0.0, 1.0));
                }
                Some(gene)
            }
            (Some(x), None) => inherit_unmatched(x, fitter, FitterParent::First, cfg, rng),
            (None, Some(y)) => inherit_unmatched(y, fitter, FitterParent::Second, cfg, rng),
            (None, None) => unreachable!(),
        };
        chosen.extend(gene);
    }

    let mut connections: Vec<ConnectionGene> = Vec::with_capacity(chosen.len());
    let mut pairs = HashSet::new();
    let mut forward_adj: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for gene in chosen {
        if pairs.contains(&(gene.source, gene.target)) {
            continue;
        }
        if !gene.recurrent
            && (gene.source == gene.target || reachable(&forward_adj, gene.target).contains(&gene.source))
        {
            continue;
        }
        pairs.insert((gene.source, gene.target));
        if !gene.recurrent {
            forward_adj.entry(gene.source).or_default().push(gene.target);
        }
        connections.push(gene);
    }

    let primary = if fitter == FitterParent::Second { b } else { a };
    let other = if fitter == FitterParent::Second { a } else { b };
    let mut nodes = primary.nodes.clone();
    let mut ids: HashSet<NodeId> = nodes.iter().map(|n| n.id).collect();
    for c in &connections {
        for id in [c.source, c.target] {
            if ids.insert(id) {
                let node = other.node(id).copied().unwrap_or(NodeGene { id, kind: NodeKind::Hidden });
                nodes.push(node);
            }
        }
    }
    nodes.sort_by_key(|n| n.id);

    Genome { nodes, connections, fitness: None }
}

fn inherit_unmatched<R: Rng + ?Sized>(
    gene: &ConnectionGene,
    fitter: FitterParent,
    owner: FitterParent,
    cfg: &GenomeConfig,
    rng: &mut R,
) -> Option<ConnectionGene> {
    let take = match fitter {
        FitterParent::Equal => rng.gen_bool(0.5),
        f => f == owner,
    };
    if !take {
        return None;
    }
    let mut gene = *gene;
    if !gene.enabled {
        gene.enabled = !rng.gen_bool(cfg.redisable_prob.clamp(0.0, 1.0));
    }
    Some(gene)
}

/// `c1·E/N + c2·D/N + c3·W̄` over innovation-aligned genes.
pub fn compatibility_distance(a: &Genome, b: &Genome, coeffs: &Coefficients) -> f64 {
    let (ga, gb) = (&a.connections, &b.connections);
    let (mut i, mut j) = (0, 0);
    let (mut disjoint, mut matching, mut weight_diff) = (0usize, 0usize, 0.0);
    while i < ga.len() && j < gb.len() {
        let (x, y) = (&ga[i], &gb[j]);
        match x.innovation.cmp(&y.innovation) {
            std::cmp::Ordering::Equal => {
                matching += 1;
                weight_diff += (x.weight - y.weight).abs();
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => {
                disjoint += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                disjoint += 1;
                j += 1;
            }
        }
    }
    let excess = (ga.len() - i) + (gb.len() - j);

    let longest = ga.len().max(gb.len());
    let small = ga.len() < coeffs.small_genome_threshold && gb.len() < coeffs.small_genome_threshold;
    let n = if small || longest == 0 { 1.0 } else { longest as f64 };
    let mean_diff = if matching == 0 { 0.0 } else { weight_diff / matching as f64 };

    coeffs.excess * excess as f64 / n + coeffs.disjoint * disjoint as f64 / n + coeffs.weight * mean_diff
}
