//! Particle swarm engine with a standard (global-best) attractor and the
//! quadratic-surrogate attractor.
//!
//! One iteration evaluates every particle, updates personal and global bests
//! (and, for the surrogate variant, the archive), picks the social attractor,
//! then moves the particles:
//!
//! ```text
//! V ← ω·s·V + c₁·r₁∘(pbest − X) + c₂·r₂∘(attractor − X),   clipped to ±v_max
//! X ← clip(X + V)
//! ```
//!
//! where `s` is the stagnation multiplier (τ when a particle's value has
//! barely moved over the last `S` iterations, 1 otherwise). By default `r₁`
//! and `r₂` are one scalar each per particle and iteration; [`DrawMode`]
//! switches to independent draws per dimension.
//!
//! # Random streams
//!
//! Every draw comes from a ChaCha8 generator seeded with the run seed and a
//! stream id derived from the draw's role, so results do not depend on the
//! order particles are processed in:
//!
//! * initialization of particle `i`: stream `i`
//! * velocity update of particle `i` at iteration `k`: stream `((k + 1) << 32) | i`
//!
//! Within a stream, initialization draws all position coordinates then all
//! velocity coordinates; a velocity update draws `r₁, r₂` (scalar mode) or
//! `r₁ⱼ, r₂ⱼ` for `j = 0..n` (per-dimension mode).

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::{Archive, ArchiveEntry};
use crate::objectives::{Bounds, Objective};
use crate::surrogate::{required_points, surrogate_attractor, FallbackReason, SurrogateError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwarmError {
    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("objective has dimension {objective} but the configuration has {config}")]
    DimensionMismatch { config: usize, objective: usize },
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "standard")]
    Standard,
    #[serde(rename = "qs")]
    QuadraticSurrogate,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Standard => "standard",
            Variant::QuadraticSurrogate => "qs",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "standard" | "std" => Ok(Variant::Standard),
            "qs" | "quadratic_surrogate" => Ok(Variant::QuadraticSurrogate),
            other => Err(format!("unknown variant `{other}`; expected `standard` or `qs`")),
        }
    }
}

/// How the random factors `r₁`, `r₂` of the velocity update are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawMode {
    /// One `r₁` and one `r₂` per particle per iteration, shared by all
    /// coordinates.
    #[default]
    Scalar,
    /// Independent `r₁ⱼ`, `r₂ⱼ` for every coordinate.
    PerDimension,
}

impl DrawMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DrawMode::Scalar => "scalar",
            DrawMode::PerDimension => "per_dimension",
        }
    }
}

impl fmt::Display for DrawMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DrawMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "scalar" => Ok(DrawMode::Scalar),
            "per_dimension" | "vector" => Ok(DrawMode::PerDimension),
            other => Err(format!("unknown draw mode `{other}`; expected `scalar` or `per_dimension`")),
        }
    }
}

/// Coefficients of the update rule and the stagnation safeguard. Missing
/// fields deserialize to their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwarmParams {
    pub omega0: f64,
    pub c1_0: f64,
    pub c2_0: f64,
    pub vmax0: f64,
    /// Safeguard lookback `S` in iterations.
    #[serde(rename = "S")]
    pub lookback: usize,
    pub tau: f64,
    /// Floor on the safeguard's denominator `|f(X^{k−S})|`.
    pub gamma_floor: f64,
    /// Keep multiplying a particle's inertia scale by τ on every trigger
    /// instead of applying τ to the triggering iteration only.
    pub compound_inertia: bool,
    pub draws: DrawMode,
}

impl Default for SwarmParams {
    fn default() -> Self {
        Self {
            omega0: 0.72984,
            c1_0: 2.8,
            c2_0: 2.05,
            vmax0: 2.0,
            lookback: 52,
            tau: 1.2,
            gamma_floor: 1e-12,
            compound_inertia: false,
            draws: DrawMode::Scalar,
        }
    }
}

/// Stagnation threshold on the relative change `γ`.
pub const STAGNATION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmConfig {
    pub bounds: Bounds,
    pub particles: usize,
    pub iterations: usize,
    pub params: SwarmParams,
    pub variant: Variant,
    pub seed: u64,
    /// Archive capacity; defaults to the number of points the surrogate needs.
    pub archive_capacity: Option<usize>,
}

impl SwarmConfig {
    pub fn new(bounds: Bounds, particles: usize, iterations: usize, variant: Variant, seed: u64) -> Self {
        Self {
            bounds,
            particles,
            iterations,
            params: SwarmParams::default(),
            variant,
            seed,
            archive_capacity: None,
        }
    }

    pub fn dimension(&self) -> usize {
        self.bounds.dimension()
    }

    pub fn validate(&self) -> Result<(), SwarmError> {
        fn bad(field: &'static str, reason: impl Into<String>) -> Result<(), SwarmError> {
            Err(SwarmError::InvalidConfig {
                field,
                reason: reason.into(),
            })
        }
        let p = &self.params;
        if self.particles == 0 {
            return bad("particles", "must be at least 1");
        }
        if self.iterations == 0 {
            return bad("iterations", "must be at least 1");
        }
        if p.lookback == 0 {
            return bad("S", "must be at least 1");
        }
        if !(p.tau > 0.0 && p.tau.is_finite()) {
            return bad("tau", format!("must be positive and finite, got {}", p.tau));
        }
        if !(p.gamma_floor > 0.0 && p.gamma_floor.is_finite()) {
            return bad("gamma_floor", format!("must be positive and finite, got {}", p.gamma_floor));
        }
        if !(p.vmax0 > 0.0 && p.vmax0.is_finite()) {
            return bad("vmax0", format!("must be positive and finite, got {}", p.vmax0));
        }
        for (field, v) in [("omega0", p.omega0), ("c1_0", p.c1_0), ("c2_0", p.c2_0)] {
            if !v.is_finite() {
                return bad(field, format!("must be finite, got {v}"));
            }
        }
        if self.archive_capacity == Some(0) {
            return bad("archive_capacity", "must be at least 1");
        }
        Ok(())
    }

    fn archive_capacity(&self) -> usize {
        self.archive_capacity
            .unwrap_or_else(|| required_points(self.dimension()).unwrap_or(1))
    }
}

/// Coefficient values in effect at one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleState {
    pub omega: f64,
    pub c1: f64,
    pub c2: f64,
    pub vmax: f64,
}

impl ScheduleState {
    /// Linear ramps for ω, c₁, c₂ and `v_max = v_max,0 · e^(1 − k/K)`.
    pub fn at(k: usize, iterations: usize, params: &SwarmParams) -> Self {
        let frac = k as f64 / iterations as f64;
        Self {
            omega: params.omega0 - frac / 2.0,
            c1: params.c1_0 - frac,
            c2: params.c2_0 + frac,
            vmax: params.vmax0 * (1.0 - frac).exp(),
        }
    }
}

/// Schedule at iteration `k` of a run configured by `config`.
pub fn schedule(k: usize, config: &SwarmConfig) -> ScheduleState {
    ScheduleState::at(k, config.iterations, &config.params)
}

/// Inertia multiplier from the relative change between the current value and
/// the value `S` iterations earlier: τ when `γ < 0.5`, else 1.
pub fn safeguard_multiplier(current: f64, lagged: f64, params: &SwarmParams) -> f64 {
    let gamma = (current - lagged).abs() / lagged.abs().max(params.gamma_floor);
    if gamma < STAGNATION_THRESHOLD {
        params.tau
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_value: f64,
    /// The last `S + 1` objective values, oldest first.
    history: VecDeque<f64>,
    /// Persistent inertia scale; only moves when inertia compounding is on.
    pub omega_scale: f64,
}

impl Particle {
    pub fn new(position: Vec<f64>, velocity: Vec<f64>) -> Self {
        Self {
            best_position: position.clone(),
            position,
            velocity,
            best_value: f64::INFINITY,
            history: VecDeque::new(),
            omega_scale: 1.0,
        }
    }

    fn record(&mut self, value: f64, lookback: usize) {
        if self.history.len() == lookback + 1 {
            self.history.pop_front();
        }
        self.history.push_back(value);
        if value < self.best_value {
            self.best_value = value;
            self.best_position.clone_from(&self.position);
        }
    }

    /// Safeguard multiplier for the current iteration; 1 until `S` past
    /// values exist.
    pub fn safeguard(&self, params: &SwarmParams) -> f64 {
        if self.history.len() < params.lookback + 1 {
            return 1.0;
        }
        let current = *self.history.back().expect("history is non-empty");
        safeguard_multiplier(current, self.history[0], params)
    }

    pub fn history(&self) -> impl Iterator<Item = f64> + '_ {
        self.history.iter().copied()
    }
}

/// Velocity update with explicit random draws, before and after clipping.
pub fn velocity_from_draws(
    particle: &Particle,
    attractor: &[f64],
    sched: &ScheduleState,
    inertia_multiplier: f64,
    r1: &[f64],
    r2: &[f64],
) -> Vec<f64> {
    let omega = sched.omega * inertia_multiplier;
    (0..particle.position.len())
        .map(|j| {
            let x = particle.position[j];
            let v = omega * particle.velocity[j]
                + sched.c1 * r1[j] * (particle.best_position[j] - x)
                + sched.c2 * r2[j] * (attractor[j] - x);
            v.clamp(-sched.vmax, sched.vmax)
        })
        .collect()
}

/// New velocity with `r₁, r₂ ~ U[0, 1)` drawn from `rng` according to `draws`.
pub fn update_velocity<R: Rng + ?Sized>(
    particle: &Particle,
    attractor: &[f64],
    sched: &ScheduleState,
    inertia_multiplier: f64,
    draws: DrawMode,
    rng: &mut R,
) -> Vec<f64> {
    let n = particle.position.len();
    let (r1, r2) = match draws {
        DrawMode::Scalar => {
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            (vec![r1; n], vec![r2; n])
        }
        DrawMode::PerDimension => {
            let mut r1 = Vec::with_capacity(n);
            let mut r2 = Vec::with_capacity(n);
            for _ in 0..n {
                r1.push(rng.random::<f64>());
                r2.push(rng.random::<f64>());
            }
            (r1, r2)
        }
    };
    velocity_from_draws(particle, attractor, sched, inertia_multiplier, &r1, &r2)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn init_stream(seed: u64, particle: usize) -> ChaCha8Rng {
    stream(seed, particle as u64)
}

fn velocity_stream(seed: u64, iteration: usize, particle: usize) -> ChaCha8Rng {
    stream(seed, ((iteration as u64 + 1) << 32) | particle as u64)
}

/// Count of surrogate fallbacks by reason.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallbackCounts(BTreeMap<String, u64>);

impl FallbackCounts {
    pub fn add(&mut self, reason: FallbackReason) {
        *self.0.entry(reason.as_str().to_string()).or_insert(0) += 1;
    }

    pub fn get(&self, reason: FallbackReason) -> u64 {
        self.0.get(reason.as_str()).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn merge(&mut self, other: &FallbackCounts) {
        for (k, v) in &other.0 {
            *self.0.entry(k.clone()).or_insert(0) += v;
        }
    }
}

/// Social attractor chosen for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Attractor {
    pub position: Vec<f64>,
    /// Known objective value at `position`.
    pub value: f64,
    pub fallback: Option<FallbackReason>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub variant: Variant,
    /// Global best value after each iteration.
    pub best_value_trace: Vec<f64>,
    pub final_best: ArchiveEntry,
    /// Objective calls, including surrogate-minimizer evaluations.
    pub evaluations: u64,
    pub fallback_counts: FallbackCounts,
    /// Evaluations that returned NaN or ±∞ (treated as +∞).
    pub nonfinite_evaluations: u64,
    pub wall_time: f64,
}

impl RunRecord {
    pub fn final_value(&self) -> f64 {
        self.final_best.value
    }
}

/// Mutable state of one optimization run.
pub struct Swarm<'a, O: ?Sized> {
    config: SwarmConfig,
    objective: &'a O,
    particles: Vec<Particle>,
    global_best: Option<ArchiveEntry>,
    archive: Option<Archive>,
    iteration: usize,
    trace: Vec<f64>,
    evaluations: u64,
    nonfinite: u64,
    fallback_counts: FallbackCounts,
    attractor: Option<Attractor>,
}

impl<'a, O> Swarm<'a, O>
where
    O: Objective + ?Sized,
{
    /// Positions uniform in the box; velocities uniform in `±v_max(0)`.
    pub fn new(config: SwarmConfig, objective: &'a O) -> Result<Self, SwarmError> {
        config.validate()?;
        let n = config.dimension();
        let vmax = schedule(0, &config).vmax;
        let particles = (0..config.particles)
            .map(|i| {
                let mut rng = init_stream(config.seed, i);
                let position: Vec<f64> = config
                    .bounds
                    .intervals()
                    .iter()
                    .map(|&(lo, hi)| rng.random_range(lo..=hi))
                    .collect();
                let velocity: Vec<f64> = (0..n).map(|_| rng.random_range(-vmax..=vmax)).collect();
                Particle::new(position, velocity)
            })
            .collect();
        Self::with_particles(config, objective, particles)
    }

    /// Start from explicit particle states.
    pub fn with_particles(
        config: SwarmConfig,
        objective: &'a O,
        particles: Vec<Particle>,
    ) -> Result<Self, SwarmError> {
        config.validate()?;
        if objective.dimension() != config.dimension() {
            return Err(SwarmError::DimensionMismatch {
                config: config.dimension(),
                objective: objective.dimension(),
            });
        }
        if particles.len() != config.particles {
            return Err(SwarmError::InvalidConfig {
                field: "particles",
                reason: format!("expected {} particle states, got {}", config.particles, particles.len()),
            });
        }
        if particles
            .iter()
            .any(|p| p.position.len() != config.dimension() || p.velocity.len() != config.dimension())
        {
            return Err(SwarmError::DimensionMismatch {
                config: config.dimension(),
                objective: objective.dimension(),
            });
        }
        let archive = match config.variant {
            Variant::Standard => None,
            Variant::QuadraticSurrogate => Some(
                Archive::new(config.archive_capacity()).map_err(|e| SwarmError::InvalidConfig {
                    field: "archive_capacity",
                    reason: e.to_string(),
                })?,
            ),
        };
        Ok(Self {
            trace: Vec::with_capacity(config.iterations),
            config,
            objective,
            particles,
            global_best: None,
            archive,
            iteration: 0,
            evaluations: 0,
            nonfinite: 0,
            fallback_counts: FallbackCounts::default(),
            attractor: None,
        })
    }

    pub fn config(&self) -> &SwarmConfig {
        &self.config
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn global_best(&self) -> Option<&ArchiveEntry> {
        self.global_best.as_ref()
    }

    pub fn archive(&self) -> Option<&Archive> {
        self.archive.as_ref()
    }

    /// Attractor used by the most recent step.
    pub fn last_attractor(&self) -> Option<&Attractor> {
        self.attractor.as_ref()
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// One full iteration.
    pub fn step(&mut self) -> Result<(), SwarmError> {
        let k = self.iteration;
        let lookback = self.config.params.lookback;

        let values: Vec<f64> = self
            .particles
            .iter()
            .map(|p| self.objective.evaluate(&p.position))
            .collect();
        self.evaluations += values.len() as u64;

        for (particle, &raw) in self.particles.iter_mut().zip(&values) {
            let value = if raw.is_finite() {
                raw
            } else {
                self.nonfinite += 1;
                f64::INFINITY
            };
            particle.record(value, lookback);
            let improves = self.global_best.as_ref().is_none_or(|g| value < g.value);
            if improves {
                self.global_best = Some(ArchiveEntry {
                    value,
                    position: particle.position.clone(),
                });
            }
            if let Some(archive) = self.archive.as_mut() {
                archive.observe(&particle.position, value);
            }
        }

        let global_best = self.global_best.clone().expect("at least one particle");
        let attractor = match self.archive.as_mut() {
            Some(archive) if !archive.is_empty() => {
                let res = surrogate_attractor(archive, self.objective, &self.config.bounds, &global_best)?;
                if res.evaluated {
                    self.evaluations += 1;
                }
                if let Some(reason) = res.fallback {
                    self.fallback_counts.add(reason);
                }
                Attractor {
                    position: res.x_min,
                    value: res.f_min,
                    fallback: res.fallback,
                }
            }
            _ => Attractor {
                position: global_best.position.clone(),
                value: global_best.value,
                fallback: None,
            },
        };

        let sched = schedule(k, &self.config);
        let params = self.config.params;
        for (i, particle) in self.particles.iter_mut().enumerate() {
            let trigger = particle.safeguard(&params);
            let multiplier = if params.compound_inertia {
                particle.omega_scale *= trigger;
                particle.omega_scale
            } else {
                trigger
            };
            let mut rng = velocity_stream(self.config.seed, k, i);
            let velocity = update_velocity(particle, &attractor.position, &sched, multiplier, params.draws, &mut rng);
            for (x, v) in particle.position.iter_mut().zip(&velocity) {
                *x += v;
            }
            self.config.bounds.clip_in_place(&mut particle.position);
            particle.velocity = velocity;
        }

        self.attractor = Some(attractor);
        self.iteration += 1;
        self.trace.push(global_best.value);
        Ok(())
    }

    fn into_record(self, wall_time: f64) -> RunRecord {
        RunRecord {
            seed: self.config.seed,
            variant: self.config.variant,
            final_best: self.global_best.expect("run performed at least one step"),
            best_value_trace: self.trace,
            evaluations: self.evaluations,
            fallback_counts: self.fallback_counts,
            nonfinite_evaluations: self.nonfinite,
            wall_time,
        }
    }
}

/// Execute a full run of `config.iterations` steps.
pub fn run<O>(config: &SwarmConfig, objective: &O) -> Result<RunRecord, SwarmError>
where
    O: Objective + ?Sized,
{
    let start = Instant::now();
    let mut swarm = Swarm::new(config.clone(), objective)?;
    for _ in 0..config.iterations {
        swarm.step()?;
    }
    Ok(swarm.into_record(start.elapsed().as_secs_f64()))
}
