//! The dangerous foraging domain.
//!
//! A robot starts at the centre of a square field holding eight items of a
//! single food type. Within one trial the food is either edible or
//! poisonous; the network has to sample an item and then keep eating or stop.
//! A genome is scored over eight trials (two per type/edibility combination)
//! with `f = 32 + e - p`.
//!
//! Coordinates are field units with the origin at the centre. Headings are
//! radians, counter-clockwise from +x.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::Genome;
use crate::network::{NetworkError, Phenotype};
use crate::seed::{derive_seed, rng_from_seed};

pub const ITEMS_PER_TRIAL: usize = 8;
pub const TRIALS: usize = 8;
pub const SENSOR_COUNT: usize = 13;
/// Offset keeping every fitness non-negative: the most poison a genome can eat.
pub const FITNESS_OFFSET: f64 = 32.0;

/// Sensor channel layout.
pub mod channel {
    pub const FRONT_LEFT: usize = 0;
    pub const FRONT_CENTRE: usize = 1;
    pub const FRONT_RIGHT: usize = 2;
    pub const BACK_LEFT: usize = 3;
    pub const BACK_RIGHT: usize = 4;
    /// Type-B sensors follow the five type-A sensors in the same order.
    pub const TYPE_B_OFFSET: usize = 5;
    pub const PLEASURE: usize = 10;
    pub const PAIN: usize = 11;
    pub const BIAS: usize = 12;
}

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("cannot compile genome: {0}")]
    Compile(#[from] NetworkError),
}

/// World geometry and kinematics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForagingConfig {
    /// Side length of the square field.
    pub field_size: f64,
    pub robot_radius: f64,
    pub food_radius: f64,
    /// Forward distance per step at full output.
    pub max_speed: f64,
    /// Rotation per step at full differential output.
    pub max_turn: f64,
    pub timesteps: usize,
    /// Sensing steps a pain or pleasure signal stays on after eating.
    pub signal_steps: u32,
    /// Draw fresh trial layouts for every genome instead of once per generation.
    pub per_genome_layouts: bool,
}

impl Default for ForagingConfig {
    fn default() -> Self {
        Self {
            field_size: 200.0,
            robot_radius: 5.0,
            food_radius: 5.0,
            max_speed: 2.0,
            max_turn: 0.2618,
            timesteps: 750,
            signal_steps: 20,
            per_genome_layouts: false,
        }
    }
}

impl ForagingConfig {
    pub fn half_extent(&self) -> f64 {
        self.field_size / 2.0
    }

    /// Sensor range: the field diagonal.
    pub fn sensor_range(&self) -> f64 {
        self.field_size * std::f64::consts::SQRT_2
    }

    pub fn eat_distance(&self) -> f64 {
        self.robot_radius + self.food_radius
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FoodType {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edibility {
    Edible,
    Poisonous,
}

/// Setup of one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub food: FoodType,
    pub edibility: Edibility,
    pub placement_seed: u64,
    pub items: [Vec2; ITEMS_PER_TRIAL],
}

impl TrialConfig {
    pub fn new(food: FoodType, edibility: Edibility, placement_seed: u64, cfg: &ForagingConfig) -> Self {
        Self { food, edibility, placement_seed, items: place_food(placement_seed, cfg) }
    }
}

/// The fixed composition of one evaluation.
const COMPOSITION: [(FoodType, Edibility); TRIALS] = [
    (FoodType::A, Edibility::Edible),
    (FoodType::A, Edibility::Edible),
    (FoodType::B, Edibility::Edible),
    (FoodType::B, Edibility::Edible),
    (FoodType::A, Edibility::Poisonous),
    (FoodType::A, Edibility::Poisonous),
    (FoodType::B, Edibility::Poisonous),
    (FoodType::B, Edibility::Poisonous),
];

/// Eight trials: two each of A-edible, B-edible, A-poisonous, B-poisonous,
/// in that order. Only [`build_trial_set`] creates one.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSet {
    seed: u64,
    trials: Vec<TrialConfig>,
}

impl TrialSet {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trials(&self) -> &[TrialConfig] {
        &self.trials
    }
}

pub fn build_trial_set(seed: u64, cfg: &ForagingConfig) -> TrialSet {
    let trials = COMPOSITION
        .iter()
        .enumerate()
        .map(|(i, &(food, edibility))| TrialConfig::new(food, edibility, derive_seed(seed, "placement", i as u64), cfg))
        .collect();
    TrialSet { seed, trials }
}

/// Eight positions uniform over the field. Overlaps are allowed.
pub fn place_food(placement_seed: u64, cfg: &ForagingConfig) -> [Vec2; ITEMS_PER_TRIAL] {
    let mut rng = rng_from_seed(placement_seed);
    let h = cfg.half_extent();
    std::array::from_fn(|_| Vec2::new(rng.gen_range(-h..=h), rng.gen_range(-h..=h)))
}

/// Mutable state of one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub position: Vec2,
    pub heading: f64,
    pub eaten: [bool; ITEMS_PER_TRIAL],
    pub pain: u32,
    pub pleasure: u32,
    pub timestep: usize,
    pub edible_eaten: u32,
    pub poison_eaten: u32,
}

impl WorldState {
    /// Robot at the field centre facing +x.
    pub fn start() -> Self {
        Self {
            position: Vec2::default(),
            heading: 0.0,
            eaten: [false; ITEMS_PER_TRIAL],
            pain: 0,
            pleasure: 0,
            timestep: 0,
            edible_eaten: 0,
            poison_eaten: 0,
        }
    }

    pub fn uneaten(&self) -> usize {
        self.eaten.iter().filter(|&&e| !e).count()
    }

    fn tick_signals(&mut self) {
        self.pain = self.pain.saturating_sub(1);
        self.pleasure = self.pleasure.saturating_sub(1);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorFrame(pub [f64; SENSOR_COUNT]);

impl SensorFrame {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn distance_channels(&self) -> &[f64] {
        &self.0[..2 * channel::TYPE_B_OFFSET]
    }
}

/// tan(30°): the front-centre sector spans ±30° around the heading.
const TAN_30: f64 = 0.577_350_269_189_625_8;

/// Robot-relative sector of a point at local coordinates `(forward, left)`.
///
/// Sectors are half-open on the clockwise side: front-centre (−30°, 30°],
/// front-left (30°, 90°], back-left (90°, 180°], back-right (−180°, −90°],
/// front-right (−90°, −30°]. A point at the robot's centre counts as
/// front-centre.
fn sector(forward: f64, left: f64) -> usize {
    use channel::*;
    if forward > 0.0 {
        if left > forward * TAN_30 {
            FRONT_LEFT
        } else if left > -forward * TAN_30 {
            FRONT_CENTRE
        } else {
            FRONT_RIGHT
        }
    } else if forward == 0.0 {
        if left > 0.0 {
            FRONT_LEFT
        } else if left < 0.0 {
            BACK_RIGHT
        } else {
            FRONT_CENTRE
        }
    } else if left >= 0.0 {
        BACK_LEFT
    } else {
        BACK_RIGHT
    }
}

/// Sensor readings for the current state.
pub fn sense(world: &WorldState, trial: &TrialConfig, cfg: &ForagingConfig) -> SensorFrame {
    let mut nearest = [f64::INFINITY; 5];
    let (sin, cos) = world.heading.sin_cos();
    for (item, _) in trial.items.iter().zip(world.eaten).filter(|(_, eaten)| !eaten) {
        let dx = item.x - world.position.x;
        let dy = item.y - world.position.y;
        let forward = dx * cos + dy * sin;
        let left = dy * cos - dx * sin;
        let s = sector(forward, left);
        let d2 = dx * dx + dy * dy;
        if d2 < nearest[s] {
            nearest[s] = d2;
        }
    }

    let mut frame = [0.0; SENSOR_COUNT];
    let offset = match trial.food {
        FoodType::A => 0,
        FoodType::B => channel::TYPE_B_OFFSET,
    };
    let range = cfg.sensor_range();
    for (s, &d2) in nearest.iter().enumerate() {
        if d2.is_finite() {
            frame[offset + s] = (1.0 - d2.sqrt() / range).max(0.0);
        }
    }
    frame[channel::PLEASURE] = if world.pleasure > 0 { 1.0 } else { 0.0 };
    frame[channel::PAIN] = if world.pain > 0 { 1.0 } else { 0.0 };
    frame[channel::BIAS] = 1.0;
    SensorFrame(frame)
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Applies `[left, right, forward]` network outputs.
pub fn apply_outputs(world: &mut WorldState, outputs: &[f64], cfg: &ForagingConfig) {
    let (left, right, forward) = (outputs[0], outputs[1], outputs[2]);
    world.heading = wrap_angle(world.heading + (left - right) * cfg.max_turn);
    let step = forward * cfg.max_speed;
    if step != 0.0 {
        let h = cfg.half_extent();
        let (sin, cos) = world.heading.sin_cos();
        world.position.x = (world.position.x + cos * step).clamp(-h, h);
        world.position.y = (world.position.y + sin * step).clamp(-h, h);
    }
}

/// Marks every overlapped item as eaten and fires the matching signal.
pub fn resolve_eating(world: &mut WorldState, trial: &TrialConfig, cfg: &ForagingConfig) {
    let reach = cfg.eat_distance();
    for (item, eaten) in trial.items.iter().zip(world.eaten.iter_mut()) {
        if *eaten || item.distance(world.position) > reach {
            continue;
        }
        *eaten = true;
        match trial.edibility {
            Edibility::Edible => {
                world.edible_eaten += 1;
                world.pleasure = cfg.signal_steps;
            }
            Edibility::Poisonous => {
                world.poison_eaten += 1;
                world.pain = cfg.signal_steps;
            }
        }
    }
}

/// Items eaten during one trial.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrialOutcome {
    pub edible: u32,
    pub poisonous: u32,
}

pub fn run_trial(net: &mut Phenotype, trial: &TrialConfig, cfg: &ForagingConfig) -> Result<TrialOutcome, NetworkError> {
    run_trial_observed(net, trial, cfg, |_, _| {})
}

/// [`run_trial`] with a callback seeing the state and the frame about to be
/// fed to the network at each step.
pub fn run_trial_observed<F>(
    net: &mut Phenotype,
    trial: &TrialConfig,
    cfg: &ForagingConfig,
    mut observe: F,
) -> Result<TrialOutcome, NetworkError>
where
    F: FnMut(&WorldState, &SensorFrame),
{
    net.reset();
    let mut world = WorldState::start();
    let mut outputs = [0.0; 3];
    for _ in 0..cfg.timesteps {
        let frame = sense(&world, trial, cfg);
        observe(&world, &frame);
        world.tick_signals();
        net.activate_into(frame.as_slice(), &mut outputs)?;
        apply_outputs(&mut world, &outputs, cfg);
        resolve_eating(&mut world, trial, cfg);
        world.timestep += 1;
    }
    Ok(TrialOutcome { edible: world.edible_eaten, poisonous: world.poison_eaten })
}

/// Edible and poisonous items eaten over all trials, and the resulting fitness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessRecord {
    pub e: u32,
    pub p: u32,
    pub f: f64,
}

impl FitnessRecord {
    pub fn from_counts(e: u32, p: u32) -> Self {
        Self { e, p, f: FITNESS_OFFSET + f64::from(e) - f64::from(p) }
    }
}

/// Compiles `genome` once and runs every trial of `trials` from a reset state.
pub fn evaluate(genome: &Genome, trials: &TrialSet, cfg: &ForagingConfig) -> Result<FitnessRecord, EvaluationError> {
    let mut net = Phenotype::compile(genome)?;
    let (mut e, mut p) = (0, 0);
    for trial in trials.trials() {
        let outcome = run_trial(&mut net, trial, cfg)?;
        e += outcome.edible;
        p += outcome.poisonous;
    }
    Ok(FitnessRecord::from_counts(e, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{ConnectionGene, NodeGene, NodeKind};

    fn cfg() -> ForagingConfig {
        ForagingConfig::default()
    }

    fn trial_with(items: [Vec2; ITEMS_PER_TRIAL], food: FoodType, edibility: Edibility) -> TrialConfig {
        TrialConfig { food, edibility, placement_seed: 0, items }
    }

    fn far_items() -> [Vec2; ITEMS_PER_TRIAL] {
        [Vec2::new(90.0, 90.0); ITEMS_PER_TRIAL]
    }

    /// Network with constant outputs `σ(wl)`, `σ(wr)`, `σ(wf)` driven by the bias.
    fn constant_net(wl: f64, wr: f64, wf: f64) -> Phenotype {
        let mut nodes: Vec<NodeGene> = (0..13)
            .map(|id| NodeGene { id, kind: if id == 12 { NodeKind::Bias } else { NodeKind::Input } })
            .collect();
        nodes.extend((13..16).map(|id| NodeGene { id, kind: NodeKind::Output }));
        let connections = [wl, wr, wf]
            .iter()
            .enumerate()
            .map(|(k, &w)| ConnectionGene {
                innovation: 36 + k as u64,
                source: 12,
                target: 13 + k as u32,
                weight: w,
                enabled: true,
                recurrent: false,
            })
            .collect();
        Phenotype::compile(&Genome { nodes, connections, fitness: None }).unwrap()
    }

    #[test]
    fn trial_set_composition() {
        for seed in 0..100 {
            let set = build_trial_set(seed, &cfg());
            let t = set.trials();
            assert_eq!(t.len(), 8);
            assert_eq!(t.iter().filter(|x| x.edibility == Edibility::Edible).count(), 4);
            assert_eq!(t.iter().filter(|x| x.food == FoodType::A).count(), 4);
        }
        assert_eq!(build_trial_set(3, &cfg()), build_trial_set(3, &cfg()));
        assert_ne!(build_trial_set(3, &cfg()).trials()[0].items, build_trial_set(3, &cfg()).trials()[1].items);
    }

    #[test]
    fn food_inside_field_and_reproducible() {
        for seed in 0..200 {
            let items = place_food(seed, &cfg());
            assert!(items.iter().all(|p| p.x.abs() <= 100.0 && p.y.abs() <= 100.0));
            assert_eq!(items, place_food(seed, &cfg()));
        }
    }

    #[test]
    fn food_mean_near_centre() {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
        for seed in 0..10_000 {
            for p in place_food(seed, &cfg()) {
                sx += p.x;
                sy += p.y;
                n += 1.0;
            }
        }
        // 2% of the field size
        assert!((sx / n).abs() < 4.0 && (sy / n).abs() < 4.0);
    }

    #[test]
    fn item_straight_ahead_at_half_range() {
        let c = cfg();
        let mut items = far_items();
        items[0] = Vec2::new(c.sensor_range() / 2.0, 0.0);
        let mut world = WorldState::start();
        world.eaten = [true; 8];
        world.eaten[0] = false;
        let frame = sense(&world, &trial_with(items, FoodType::A, Edibility::Edible), &c);
        let mut expected = [0.0; 13];
        expected[channel::FRONT_CENTRE] = 0.5;
        expected[channel::BIAS] = 1.0;
        for (got, want) in frame.0.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn absent_type_and_eaten_items_read_zero() {
        let items = place_food(5, &cfg());
        let world = WorldState::start();
        let frame = sense(&world, &trial_with(items, FoodType::A, Edibility::Edible), &cfg());
        assert!(frame.0[5..10].iter().all(|&v| v == 0.0));
        assert!(frame.0[..5].iter().any(|&v| v > 0.0));
        let mut world = WorldState::start();
        world.eaten = [true; 8];
        let frame = sense(&world, &trial_with(items, FoodType::B, Edibility::Edible), &cfg());
        assert!(frame.distance_channels().iter().all(|&v| v == 0.0));
        assert_eq!(frame.0[channel::BIAS], 1.0);
    }

    #[test]
    fn sector_boundaries() {
        use channel::*;
        let deg = |d: f64| {
            let r = d.to_radians();
            sector(r.cos(), r.sin())
        };
        assert_eq!(deg(0.0), FRONT_CENTRE);
        assert_eq!(deg(29.0), FRONT_CENTRE);
        assert_eq!(deg(-29.0), FRONT_CENTRE);
        assert_eq!(deg(31.0), FRONT_LEFT);
        assert_eq!(sector(0.0, 1.0), FRONT_LEFT);
        assert_eq!(deg(91.0), BACK_LEFT);
        assert_eq!(sector(-1.0, 0.0), BACK_LEFT);
        assert_eq!(sector(0.0, -1.0), BACK_RIGHT);
        assert_eq!(sector(0.0, 0.0), FRONT_CENTRE);
        assert_eq!(deg(-89.0), FRONT_RIGHT);
        assert_eq!(deg(-31.0), FRONT_RIGHT);
        assert_eq!(deg(-179.0), BACK_RIGHT);
    }

    #[test]
    fn symmetric_turn_keeps_heading_and_zero_forward_stays() {
        let c = cfg();
        let mut w = WorldState::start();
        w.heading = 0.4;
        apply_outputs(&mut w, &[0.3, 0.3, 0.0], &c);
        assert_eq!(w.heading, 0.4);
        assert_eq!(w.position, Vec2::default());
    }

    #[test]
    fn full_turn_returns_to_start_heading() {
        let c = cfg();
        let mut w = WorldState::start();
        let steps = (2.0 * PI / c.max_turn).ceil() as usize;
        for _ in 0..steps {
            apply_outputs(&mut w, &[1.0, 0.0, 0.0], &c);
        }
        assert!(wrap_angle(w.heading).abs() <= c.max_turn);
    }

    #[test]
    fn position_clamped_at_wall() {
        let c = cfg();
        let mut w = WorldState::start();
        for _ in 0..200 {
            apply_outputs(&mut w, &[0.5, 0.5, 1.0], &c);
        }
        assert_eq!(w.position.x, 100.0);
    }

    #[test]
    fn eating_rules() {
        let c = cfg();
        let mut items = far_items();
        items[0] = Vec2::new(3.0, 0.0);
        items[1] = Vec2::new(-4.0, 4.0);
        let trial = trial_with(items, FoodType::B, Edibility::Poisonous);
        let mut w = WorldState::start();
        resolve_eating(&mut w, &trial, &c);
        assert_eq!((w.poison_eaten, w.edible_eaten, w.pain, w.pleasure), (2, 0, 20, 0));
        resolve_eating(&mut w, &trial, &c);
        assert_eq!(w.poison_eaten, 2);

        let mut far = WorldState::start();
        far.position = Vec2::new(-80.0, -80.0);
        let before = far.clone();
        resolve_eating(&mut far, &trial, &c);
        assert_eq!(far, before);
    }

    #[test]
    fn edible_sets_pleasure() {
        let c = cfg();
        let mut items = far_items();
        items[3] = Vec2::new(0.0, 9.9);
        let mut w = WorldState::start();
        resolve_eating(&mut w, &trial_with(items, FoodType::A, Edibility::Edible), &c);
        assert_eq!((w.edible_eaten, w.pleasure, w.pain), (1, 20, 0));
    }

    #[test]
    fn still_robot_eats_nothing_out_of_reach() {
        // forward weight -7 drives the forward output to ~0 but never exactly 0
        let mut net = constant_net(0.0, 0.0, -7.0);
        let trial = trial_with(far_items(), FoodType::A, Edibility::Edible);
        let outcome = run_trial(&mut net, &trial, &cfg()).unwrap();
        assert_eq!(outcome, TrialOutcome::default());
    }

    #[test]
    fn straight_runner_eats_what_lies_on_its_path() {
        let c = cfg();
        // forward output σ(0) = 0.5, no turning: the robot sweeps the +x ray
        let mut net = constant_net(0.0, 0.0, 0.0);
        let mut items = far_items();
        items[0] = Vec2::new(50.0, 8.0);
        items[1] = Vec2::new(70.0, -20.0);
        items[2] = Vec2::new(-30.0, 0.0);
        let trial = trial_with(items, FoodType::A, Edibility::Edible);
        let outcome = run_trial(&mut net, &trial, &c).unwrap();
        assert_eq!(outcome, TrialOutcome { edible: 1, poisonous: 0 });
        assert_eq!(run_trial(&mut net, &trial, &c).unwrap(), outcome);
    }

    #[test]
    fn fitness_formula() {
        assert_eq!(FitnessRecord::from_counts(32, 4).f, 60.0);
        assert_eq!(FitnessRecord::from_counts(0, 0).f, 32.0);
        assert_eq!(FitnessRecord::from_counts(0, 32).f, 0.0);
    }
}
