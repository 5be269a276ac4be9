//! Executable phenotypes.
//!
//! [`Phenotype::compile`] flattens the enabled connections of a genome into
//! per-neuron incoming edge lists, ordered topologically over the
//! non-recurrent edges. Recurrent edges (and self-loops) read the activation
//! the source neuron had on the previous call to [`Phenotype::activate`];
//! every other edge reads the value computed earlier in the same pass.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::genome::{Genome, NodeId, NodeKind};

/// Pre-activations are clamped to this magnitude so the sigmoid stays
/// strictly inside (0, 1) in floating point.
pub const NET_INPUT_LIMIT: f64 = 7.0;

/// Steepened sigmoid used on hidden and output neurons.
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-4.9 * x.clamp(-NET_INPUT_LIMIT, NET_INPUT_LIMIT)).exp())
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("connection {innovation} references missing node {node}")]
    DanglingReference { innovation: u64, node: NodeId },
    #[error("non-recurrent connections form a cycle")]
    ForwardCycle,
    #[error("expected {expected} inputs, got {actual}")]
    InputArity { expected: usize, actual: usize },
}

/// Tie-break between neurons that become ready at the same time during the
/// topological sort. Any choice yields the same outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OrderPolicy {
    #[default]
    LowestIdFirst,
    HighestIdFirst,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Edge {
    source: usize,
    weight: f64,
    delayed: bool,
}

#[derive(Clone, Debug)]
pub struct Phenotype {
    inputs: Vec<usize>,
    outputs: Vec<usize>,
    /// Non-sensor neurons in evaluation order.
    order: Vec<usize>,
    /// `edges[edge_start[k]..edge_start[k + 1]]` feed `order[k]`.
    edge_start: Vec<usize>,
    edges: Vec<Edge>,
    recurrent: bool,
    current: Vec<f64>,
    previous: Vec<f64>,
}

impl Phenotype {
    pub fn compile(genome: &Genome) -> Result<Self, NetworkError> {
        Self::compile_with_order(genome, OrderPolicy::default())
    }

    pub fn compile_with_order(genome: &Genome, policy: OrderPolicy) -> Result<Self, NetworkError> {
        let mut nodes = genome.nodes.clone();
        nodes.sort_by_key(|n| n.id);
        let index: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let count = nodes.len();

        let inputs: Vec<usize> = (0..count).filter(|&i| nodes[i].kind.is_sensor()).collect();
        let outputs: Vec<usize> = (0..count).filter(|&i| nodes[i].kind == NodeKind::Output).collect();

        let mut incoming: Vec<Vec<Edge>> = vec![Vec::new(); count];
        let mut forward_out: Vec<Vec<usize>> = vec![Vec::new(); count];
        let mut indegree = vec![0usize; count];
        let mut recurrent = false;
        for c in genome.connections.iter().filter(|c| c.enabled) {
            let lookup = |node| index.get(&node).copied().ok_or(NetworkError::DanglingReference {
                innovation: c.innovation,
                node,
            });
            let (s, t) = (lookup(c.source)?, lookup(c.target)?);
            if nodes[t].kind.is_sensor() {
                // sensors are overwritten by the inputs on every step
                continue;
            }
            let delayed = c.recurrent || s == t;
            recurrent |= delayed;
            incoming[t].push(Edge { source: s, weight: c.weight, delayed });
            if !delayed && !nodes[s].kind.is_sensor() {
                forward_out[s].push(t);
                indegree[t] += 1;
            }
        }

        let mut ready: BTreeSet<usize> =
            (0..count).filter(|&i| !nodes[i].kind.is_sensor() && indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(count - inputs.len());
        while let Some(n) = match policy {
            OrderPolicy::LowestIdFirst => ready.pop_first(),
            OrderPolicy::HighestIdFirst => ready.pop_last(),
        } {
            order.push(n);
            for &m in &forward_out[n] {
                indegree[m] -= 1;
                if indegree[m] == 0 {
                    ready.insert(m);
                }
            }
        }
        if order.len() + inputs.len() != count {
            return Err(NetworkError::ForwardCycle);
        }

        let mut edge_start = Vec::with_capacity(order.len() + 1);
        let mut edges = Vec::new();
        for &n in &order {
            edge_start.push(edges.len());
            edges.extend_from_slice(&incoming[n]);
        }
        edge_start.push(edges.len());

        Ok(Phenotype {
            inputs,
            outputs,
            order,
            edge_start,
            edges,
            recurrent,
            current: vec![0.0; count],
            previous: vec![0.0; count],
        })
    }

    pub fn is_recurrent(&self) -> bool {
        self.recurrent
    }

    pub fn input_count(&self) -> usize {
        self.inputs.len()
    }

    pub fn output_count(&self) -> usize {
        self.outputs.len()
    }

    pub fn neuron_count(&self) -> usize {
        self.current.len()
    }

    /// Activation of every neuron after the last step, indexed by node-id rank.
    pub fn state(&self) -> &[f64] {
        &self.previous
    }

    pub fn reset(&mut self) {
        self.current.fill(0.0);
        self.previous.fill(0.0);
    }

    /// One timestep.
    pub fn activate(&mut self, inputs: &[f64]) -> Result<Vec<f64>, NetworkError> {
        let mut out = vec![0.0; self.outputs.len()];
        self.activate_into(inputs, &mut out)?;
        Ok(out)
    }

    /// One timestep, writing outputs into `out` (length = output count).
    pub fn activate_into(&mut self, inputs: &[f64], out: &mut [f64]) -> Result<(), NetworkError> {
        if inputs.len() != self.inputs.len() {
            return Err(NetworkError::InputArity { expected: self.inputs.len(), actual: inputs.len() });
        }
        for (&neuron, &value) in self.inputs.iter().zip(inputs) {
            self.current[neuron] = value;
        }
        for (k, &neuron) in self.order.iter().enumerate() {
            let mut sum = 0.0;
            for e in &self.edges[self.edge_start[k]..self.edge_start[k + 1]] {
                let a = if e.delayed { self.previous[e.source] } else { self.current[e.source] };
                sum += e.weight * a;
            }
            self.current[neuron] = sigmoid(sum);
        }
        for (slot, &neuron) in out.iter_mut().zip(&self.outputs) {
            *slot = self.current[neuron];
        }
        std::mem::swap(&mut self.current, &mut self.previous);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{ConnectionGene, GenomeConfig, InitMode, IoSpec, NodeGene};
    use crate::seed::rng_from_seed;

    fn small(connections: Vec<ConnectionGene>, hidden: &[NodeId]) -> Genome {
        let mut nodes = vec![
            NodeGene { id: 0, kind: NodeKind::Input },
            NodeGene { id: 1, kind: NodeKind::Bias },
            NodeGene { id: 2, kind: NodeKind::Output },
        ];
        nodes.extend(hidden.iter().map(|&id| NodeGene { id, kind: NodeKind::Hidden }));
        Genome { nodes, connections, fitness: None }
    }

    fn c(innovation: u64, source: NodeId, target: NodeId, weight: f64, recurrent: bool) -> ConnectionGene {
        ConnectionGene { innovation, source, target, weight, enabled: true, recurrent }
    }

    #[test]
    fn zero_weights_give_half() {
        let cfg = GenomeConfig { weight_init_range: 0.0, p_init: 1.0, ..GenomeConfig::default() };
        let g = Genome::new(IoSpec::FORAGING, InitMode::Partial, &cfg, &mut rng_from_seed(0)).unwrap();
        let mut p = Phenotype::compile(&g).unwrap();
        assert!(!p.is_recurrent());
        let out = p.activate(&[0.7; 13]).unwrap();
        assert_eq!(out, vec![0.5; 3]);
    }

    #[test]
    fn direct_input_to_output() {
        let g = small(vec![c(0, 0, 2, 0.5, false), c(1, 1, 2, -0.25, false)], &[]);
        let mut p = Phenotype::compile(&g).unwrap();
        let out = p.activate(&[0.8, 1.0]).unwrap();
        assert!((out[0] - sigmoid(0.5 * 0.8 - 0.25)).abs() < 1e-15);
        assert_eq!(p.activate(&[0.8, 1.0]).unwrap(), out);
    }

    #[test]
    fn self_loop_marks_recurrent_and_remembers() {
        let g = small(vec![c(0, 0, 3, 1.0, false), c(1, 3, 3, 2.0, true), c(2, 3, 2, 1.0, false)], &[3]);
        let mut p = Phenotype::compile(&g).unwrap();
        assert!(p.is_recurrent());
        let first = p.activate(&[0.5, 1.0]).unwrap();
        let second = p.activate(&[0.5, 1.0]).unwrap();
        assert_ne!(first, second);
        // step 1: hidden = σ(0.5), output = σ(hidden)
        assert!((first[0] - sigmoid(sigmoid(0.5))).abs() < 1e-15);
        let h2 = sigmoid(0.5 + 2.0 * sigmoid(0.5));
        assert!((second[0] - sigmoid(h2)).abs() < 1e-15);
    }

    #[test]
    fn disabled_connection_contributes_nothing() {
        let mut g = small(vec![c(0, 0, 2, 3.0, false)], &[]);
        g.connections[0].enabled = false;
        let mut p = Phenotype::compile(&g).unwrap();
        assert_eq!(p.activate(&[1.0, 1.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn dangling_reference_is_structural_error() {
        let g = small(vec![c(0, 0, 9, 1.0, false)], &[]);
        assert_eq!(
            Phenotype::compile(&g).unwrap_err(),
            NetworkError::DanglingReference { innovation: 0, node: 9 }
        );
    }

    #[test]
    fn unflagged_cycle_is_rejected() {
        let g = small(vec![c(0, 3, 4, 1.0, false), c(1, 4, 3, 1.0, false), c(2, 4, 2, 1.0, false)], &[3, 4]);
        assert_eq!(Phenotype::compile(&g).unwrap_err(), NetworkError::ForwardCycle);
    }

    #[test]
    fn wrong_arity_is_contract_error() {
        let g = small(vec![c(0, 0, 2, 1.0, false)], &[]);
        let mut p = Phenotype::compile(&g).unwrap();
        assert_eq!(p.activate(&[1.0]).unwrap_err(), NetworkError::InputArity { expected: 2, actual: 1 });
    }

    #[test]
    fn reset_restores_fresh_state() {
        let g = small(vec![c(0, 0, 3, 1.0, false), c(1, 3, 3, -1.5, true), c(2, 3, 2, 1.0, false)], &[3]);
        let mut p = Phenotype::compile(&g).unwrap();
        let stream: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let run = |p: &mut Phenotype| -> Vec<f64> {
            stream.iter().map(|&x| p.activate(&[x, 1.0]).unwrap()[0]).collect()
        };
        let first = run(&mut p);
        p.reset();
        let second = run(&mut p);
        assert_eq!(first, second);
        let mut fresh = Phenotype::compile(&g).unwrap();
        p.reset();
        assert_eq!(p.activate(&[0.3, 1.0]).unwrap(), fresh.activate(&[0.3, 1.0]).unwrap());
    }

    #[test]
    fn saturated_sum_stays_inside_unit_interval() {
        let g = small(vec![c(0, 0, 2, 8.0, false), c(1, 1, 2, 8.0, false)], &[]);
        let mut p = Phenotype::compile(&g).unwrap();
        let hi = p.activate(&[1.0, 1.0]).unwrap()[0];
        assert!(hi < 1.0 && hi > 0.99);
        let g = small(vec![c(0, 0, 2, -8.0, false), c(1, 1, 2, -8.0, false)], &[]);
        let lo = Phenotype::compile(&g).unwrap().activate(&[1.0, 1.0]).unwrap()[0];
        assert!(lo > 0.0 && lo < 0.01);
    }
}
