//! Benchmark objective functions and the box-bounded objective interface.
//!
//! The four landscapes used by the benchmark harness are exposed both as free
//! functions (`sphere`, `flower`, `ackley`, `griewank`) and through the
//! [`Benchmark`] type, which pairs a function with its search box and can be
//! looked up by name.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectiveError {
    #[error("bounds must have at least one dimension")]
    EmptyBounds,
    #[error("invalid bounds in dimension {dim}: lo ({lo}) must be finite and strictly below hi ({hi})")]
    InvalidInterval { dim: usize, lo: f64, hi: f64 },
    #[error("unknown objective `{0}`; valid names are: sphere, flower, ackley, griewank")]
    UnknownObjective(String),
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("bounds have {bounds} dimensions but the objective has {dimension}")]
    DimensionMismatch { dimension: usize, bounds: usize },
}

/// Axis-aligned search box, one `(lo, hi)` pair per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Bounds(Vec<(f64, f64)>);

impl Bounds {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self, ObjectiveError> {
        if intervals.is_empty() {
            return Err(ObjectiveError::EmptyBounds);
        }
        for (dim, &(lo, hi)) in intervals.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(ObjectiveError::InvalidInterval { dim, lo, hi });
            }
        }
        Ok(Self(intervals))
    }

    /// The same interval `[lo, hi]` in each of `dimension` coordinates.
    pub fn uniform(dimension: usize, lo: f64, hi: f64) -> Result<Self, ObjectiveError> {
        Self::new(vec![(lo, hi); dimension])
    }

    /// Symmetric box `[-half_width, half_width]^dimension`.
    pub fn symmetric(dimension: usize, half_width: f64) -> Result<Self, ObjectiveError> {
        Self::uniform(dimension, -half_width, half_width)
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.0
    }

    pub fn lower(&self, dim: usize) -> f64 {
        self.0[dim].0
    }

    pub fn upper(&self, dim: usize) -> f64 {
        self.0[dim].1
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.0.len()
            && x.iter()
                .zip(&self.0)
                .all(|(&v, &(lo, hi))| lo <= v && v <= hi)
    }

    /// Saturate every coordinate into its interval, in place.
    pub fn clip_in_place(&self, x: &mut [f64]) {
        for (v, &(lo, hi)) in x.iter_mut().zip(&self.0) {
            *v = v.clamp(lo, hi);
        }
    }

    pub fn clip(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        self.clip_in_place(&mut out);
        out
    }
}

impl TryFrom<Vec<(f64, f64)>> for Bounds {
    type Error = ObjectiveError;

    fn try_from(value: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        Bounds::new(value)
    }
}

impl From<Bounds> for Vec<(f64, f64)> {
    fn from(value: Bounds) -> Self {
        value.0
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, (lo, hi)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "[{lo}, {hi}]")?;
        }
        write!(f, "]")
    }
}

/// Clip `x` into `bounds`. Identity on feasible points.
pub fn clip_to_bounds(x: &[f64], bounds: &Bounds) -> Vec<f64> {
    bounds.clip(x)
}

/// A deterministic scalar function over a box.
pub trait Objective: Sync {
    fn name(&self) -> &str;

    fn bounds(&self) -> &Bounds;

    fn evaluate(&self, x: &[f64]) -> f64;

    fn dimension(&self) -> usize {
        self.bounds().dimension()
    }

    /// Known global minimizer and its value, when available.
    fn known_minimum(&self) -> Option<(Vec<f64>, f64)> {
        None
    }
}

/// `Σ xᵢ²`
pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// `Σ ln(|xᵢ| + 1)`
pub fn flower(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs().ln_1p()).sum()
}

pub const ACKLEY_A: f64 = 20.0;
pub const ACKLEY_B: f64 = 0.2;
pub const ACKLEY_C: f64 = 2.0 * PI;

/// Ackley with the usual constants a = 20, b = 0.2, c = 2π.
pub fn ackley(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sum_sq: f64 = x.iter().map(|v| v * v).sum();
    let sum_cos: f64 = x.iter().map(|v| (ACKLEY_C * v).cos()).sum();
    // Grouped so that both terms cancel exactly at the origin.
    -ACKLEY_A * (-ACKLEY_B * (sum_sq / n).sqrt()).exp_m1() + (E - (sum_cos / n).exp())
}

/// Griewank: `Σ xᵢ²/4000 − Π cos(xᵢ/√i) + 1` with 1-based `i`.
pub fn griewank(x: &[f64]) -> f64 {
    let sum: f64 = x.iter().map(|v| v * v).sum::<f64>() / 4000.0;
    let prod: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
        .product();
    sum - prod + 1.0
}

/// The benchmark landscapes that can be selected by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkKind {
    Sphere,
    Flower,
    Ackley,
    Griewank,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 4] = [
        BenchmarkKind::Sphere,
        BenchmarkKind::Flower,
        BenchmarkKind::Ackley,
        BenchmarkKind::Griewank,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::Sphere => "sphere",
            BenchmarkKind::Flower => "flower",
            BenchmarkKind::Ackley => "ackley",
            BenchmarkKind::Griewank => "griewank",
        }
    }

    /// Half-width of the customary symmetric search box.
    pub fn default_half_width(self) -> f64 {
        match self {
            BenchmarkKind::Sphere => 10.0,
            BenchmarkKind::Flower => 100.0,
            BenchmarkKind::Ackley => 32.768,
            BenchmarkKind::Griewank => 600.0,
        }
    }

    pub fn function(self) -> fn(&[f64]) -> f64 {
        match self {
            BenchmarkKind::Sphere => sphere,
            BenchmarkKind::Flower => flower,
            BenchmarkKind::Ackley => ackley,
            BenchmarkKind::Griewank => griewank,
        }
    }
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkKind {
    type Err = ObjectiveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BenchmarkKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ObjectiveError::UnknownObjective(s.to_string()))
    }
}

/// A registered benchmark function bound to a concrete search box.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    kind: BenchmarkKind,
    bounds: Bounds,
}

impl Benchmark {
    pub fn new(kind: BenchmarkKind, bounds: Bounds) -> Self {
        Self { kind, bounds }
    }

    /// The benchmark in `dimension` dimensions on its customary box.
    pub fn with_default_bounds(kind: BenchmarkKind, dimension: usize) -> Result<Self, ObjectiveError> {
        if dimension == 0 {
            return Err(ObjectiveError::ZeroDimension);
        }
        let bounds = Bounds::symmetric(dimension, kind.default_half_width())?;
        Ok(Self::new(kind, bounds))
    }

    /// Registry lookup by (case-insensitive) name.
    pub fn by_name(name: &str, dimension: usize) -> Result<Self, ObjectiveError> {
        Self::with_default_bounds(name.parse()?, dimension)
    }

    pub fn kind(&self) -> BenchmarkKind {
        self.kind
    }
}

impl Objective for Benchmark {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        (self.kind.function())(x)
    }

    fn known_minimum(&self) -> Option<(Vec<f64>, f64)> {
        let origin = vec![0.0; self.bounds.dimension()];
        self.bounds.contains(&origin).then_some((origin, 0.0))
    }
}

/// Adapts a closure into an [`Objective`].
pub struct FnObjective<F> {
    name: String,
    bounds: Bounds,
    func: F,
}

impl<F> FnObjective<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(name: impl Into<String>, bounds: Bounds, func: F) -> Self {
        Self {
            name: name.into(),
            bounds,
            func,
        }
    }
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        (self.func)(x)
    }
}
