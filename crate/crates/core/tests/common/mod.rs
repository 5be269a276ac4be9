//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::HashMap;

use neatlab::evolution::BoxError;
use neatlab::foraging::{channel, run_trial_observed, Edibility, FitnessRecord, ForagingConfig, TrialConfig};
use neatlab::genome::{
    mutate_add_connection, mutate_add_node, ConnectionGene, Genome, GenomeConfig, InitMode, InnovationRegistry, IoSpec,
    NodeGene, NodeKind,
};
use neatlab::network::Phenotype;
use neatlab::seed::rng_from_seed;
use rand::seq::SliceRandom;
use rand::Rng;

pub const INPUTS: u32 = 3;
pub const OUTPUTS: u32 = 2;
pub const MAX_NODES: u32 = 10;

pub fn oracle_sigmoid(x: f64) -> f64 {
    let x = x.clamp(-7.0, 7.0);
    1.0 / (1.0 + f64::exp(-4.9 * x))
}

/// Random genome with at most ten nodes. Hidden and output neurons get a
/// random rank; edges from a higher to a lower rank (and self-loops) are
/// flagged recurrent, so the unflagged edges always form a DAG.
pub fn random_genome(seed: u64, allow_recurrent: bool) -> Genome {
    let mut rng = rng_from_seed(seed);
    let hidden = rng.gen_range(0..=MAX_NODES - INPUTS - OUTPUTS);
    let mut nodes: Vec<NodeGene> = (0..INPUTS)
        .map(|id| NodeGene { id, kind: if id == INPUTS - 1 { NodeKind::Bias } else { NodeKind::Input } })
        .collect();
    nodes.extend((INPUTS..INPUTS + OUTPUTS).map(|id| NodeGene { id, kind: NodeKind::Output }));
    nodes.extend((INPUTS + OUTPUTS..INPUTS + OUTPUTS + hidden).map(|id| NodeGene { id, kind: NodeKind::Hidden }));

    let mut neurons: Vec<u32> = (INPUTS..INPUTS + OUTPUTS + hidden).collect();
    neurons.shuffle(&mut rng);
    let rank: HashMap<u32, usize> = neurons.iter().enumerate().map(|(r, &n)| (n, r)).collect();

    let mut connections = Vec::new();
    let total = INPUTS + OUTPUTS + hidden;
    for source in 0..total {
        for &target in &neurons {
            if !rng.gen_bool(0.35) {
                continue;
            }
            let backward = source >= INPUTS && rank[&source] >= rank[&target];
            if backward && !allow_recurrent {
                continue;
            }
            connections.push(ConnectionGene {
                innovation: connections.len() as u64,
                source,
                target,
                weight: rng.gen_range(-3.0..3.0),
                enabled: rng.gen_bool(0.9),
                recurrent: backward,
            });
        }
    }
    Genome { nodes, connections, fitness: None }
}

/// Value of `node` at step `t`, substituting recursively. Recurrent edges
/// read the value one step earlier, or zero before the first step.
pub fn oracle_value(
    genome: &Genome,
    node: u32,
    t: usize,
    inputs: &[Vec<f64>],
    memo: &mut HashMap<(u32, usize), f64>,
) -> f64 {
    if node < INPUTS {
        return inputs[t][node as usize];
    }
    if let Some(&v) = memo.get(&(node, t)) {
        return v;
    }
    let mut sum = 0.0;
    for c in genome.connections.iter().filter(|c| c.enabled && c.target == node) {
        let a = if c.recurrent {
            if t == 0 {
                0.0
            } else {
                oracle_value(genome, c.source, t - 1, inputs, memo)
            }
        } else {
            oracle_value(genome, c.source, t, inputs, memo)
        };
        sum += c.weight * a;
    }
    let v = oracle_sigmoid(sum);
    memo.insert((node, t), v);
    v
}

pub fn random_inputs(seed: u64, steps: usize) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed ^ 0xabcdef);
    (0..steps)
        .map(|_| {
            let mut v: Vec<f64> = (0..INPUTS - 1).map(|_| rng.gen_range(0.0..1.0)).collect();
            v.push(1.0);
            v
        })
        .collect()
}

/// Structure-only fitness, so long runs stay cheap.
pub fn structural_fitness(g: &Genome, _: usize, _: usize) -> Result<FitnessRecord, BoxError> {
    let e = (g.enabled_connections().count() % 33) as u32;
    Ok(FitnessRecord::from_counts(e, (g.hidden_count() % 7) as u32))
}

/// Bias drives the forward output hard; no turning.
pub fn straight_runner() -> Genome {
    let cfg = GenomeConfig { p_init: 0.0, ..GenomeConfig::default() };
    let mut g = Genome::new(IoSpec::FORAGING, InitMode::Partial, &cfg, &mut rng_from_seed(0)).unwrap();
    g.connections.push(ConnectionGene {
        innovation: 12 * 3 + 2,
        source: channel::BIAS as u32,
        target: 15,
        weight: 7.0,
        enabled: true,
        recurrent: false,
    });
    g
}

/// Foraging genome grown by random structural mutations, recurrency allowed.
pub fn foraging_genome(seed: u64, structural_steps: usize) -> Genome {
    let cfg = GenomeConfig { weight_init_range: 4.0, ..GenomeConfig::default() };
    let mut rng = rng_from_seed(seed);
    let mut reg = InnovationRegistry::new(IoSpec::FORAGING);
    let mut g = Genome::new(IoSpec::FORAGING, InitMode::Partial, &cfg, &mut rng).unwrap();
    for _ in 0..structural_steps {
        g = if rng.gen_bool(0.6) {
            mutate_add_connection(&g, true, &mut reg, &cfg, &mut rng)
        } else {
            mutate_add_node(&g, &mut reg, &mut rng)
        };
    }
    g
}


/// Checks the signal channel against eat events reconstructed from the
/// counters. Returns the number of eat events.
pub fn check_timer_law(net: &mut Phenotype, t: &TrialConfig, cfg: &ForagingConfig) -> usize {
    let mut counts = Vec::new();
    let mut signal = Vec::new();
    let ch = if t.edibility == Edibility::Edible { channel::PLEASURE } else { channel::PAIN };
    let other = if ch == channel::PLEASURE { channel::PAIN } else { channel::PLEASURE };
    run_trial_observed(net, t, cfg, |w, f| {
        counts.push(w.edible_eaten + w.poison_eaten);
        signal.push(f.0[ch]);
        assert_eq!(f.0[other], 0.0);
    })
    .unwrap();
    let events: Vec<usize> = (0..counts.len() - 1).filter(|&s| counts[s + 1] > counts[s]).collect();
    for (step, &v) in signal.iter().enumerate() {
        let on = events.iter().any(|&s| s < step && step <= s + cfg.signal_steps as usize);
        assert_eq!(v, on as u8 as f64, "step {step}, events {events:?}");
    }
    events.len()
}
