//! Phenotype activation against a recursive-substitution oracle.

mod common;

use std::collections::HashMap;

use common::{oracle_value, random_genome, random_inputs, INPUTS, MAX_NODES, OUTPUTS};
use neatlab::genome::{ConnectionGene, NodeGene, NodeKind};
use neatlab::network::{OrderPolicy, Phenotype};
use proptest::prelude::*;

#[test]
fn recurrent_genomes_match_oracle_over_many_steps() {
    let steps = 12;
    for seed in 0..500u64 {
        let genome = random_genome(seed, true);
        assert!(genome.nodes.len() <= MAX_NODES as usize);
        let inputs = random_inputs(seed, steps);
        let mut net = Phenotype::compile(&genome).unwrap();
        let mut memo = HashMap::new();
        for (t, frame) in inputs.iter().enumerate() {
            let got = net.activate(frame).unwrap();
            for (k, out) in (INPUTS..INPUTS + OUTPUTS).enumerate() {
                let want = oracle_value(&genome, out, t, &inputs, &mut memo);
                assert!((got[k] - want).abs() < 1e-9, "seed {seed} step {t} output {k}: {} vs {want}", got[k]);
            }
        }
    }
}

#[test]
fn acyclic_nets_ignore_evaluation_order() {
    for seed in 1000..2000u64 {
        let genome = random_genome(seed, false);
        let inputs = random_inputs(seed, 3);
        let mut low = Phenotype::compile_with_order(&genome, OrderPolicy::LowestIdFirst).unwrap();
        let mut high = Phenotype::compile_with_order(&genome, OrderPolicy::HighestIdFirst).unwrap();
        for frame in &inputs {
            let (a, b) = (low.activate(frame).unwrap(), high.activate(frame).unwrap());
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12, "seed {seed}");
            }
        }
    }
}

#[test]
fn hidden_self_loop_changes_output_between_steps() {
    let mut genome = random_genome(0, false);
    let hidden = INPUTS + OUTPUTS;
    genome.nodes.retain(|n| n.id < hidden);
    genome.nodes.push(NodeGene { id: hidden, kind: NodeKind::Hidden });
    let gene = |innovation, source, target, weight, recurrent| ConnectionGene {
        innovation,
        source,
        target,
        weight,
        enabled: true,
        recurrent,
    };
    genome.connections = vec![
        gene(0, INPUTS - 1, hidden, 0.3, false),
        gene(1, hidden, hidden, 1.5, true),
        gene(2, hidden, INPUTS, 1.0, false),
    ];
    let mut net = Phenotype::compile(&genome).unwrap();
    let frame = [0.2, 0.4, 1.0];
    let first = net.activate(&frame).unwrap();
    let second = net.activate(&frame).unwrap();
    assert_ne!(first[0], second[0]);
}

proptest! {
    #[test]
    fn outputs_stay_inside_unit_interval(seed in any::<u64>(), scale in 1.0f64..1e6) {
        let mut genome = random_genome(seed, true);
        for c in &mut genome.connections {
            c.weight *= scale;
        }
        let mut net = Phenotype::compile(&genome).unwrap();
        for frame in random_inputs(seed, 4) {
            for y in net.activate(&frame).unwrap() {
                prop_assert!(y > 0.0 && y < 1.0, "{}", y);
            }
        }
    }

    #[test]
    fn reset_replays_identically(seed in any::<u64>()) {
        let genome = random_genome(seed, true);
        let inputs = random_inputs(seed, 5);
        let mut net = Phenotype::compile(&genome).unwrap();
        let first: Vec<Vec<f64>> = inputs.iter().map(|f| net.activate(f).unwrap()).collect();
        net.reset();
        let second: Vec<Vec<f64>> = inputs.iter().map(|f| net.activate(f).unwrap()).collect();
        prop_assert_eq!(first, second);
    }
}
