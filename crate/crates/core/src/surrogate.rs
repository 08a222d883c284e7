//! Quadratic surrogate `f̂(x) = c + aᵀx + xᵀBx` fitted by exact interpolation
//! of the archive's best points, and its stationary point `−½B⁻¹a`.
//!
//! Design-matrix columns are ordered: the constant, the linear terms
//! `x₁..xₙ`, then the products `xᵢxⱼ` for `i ≤ j` with `i` as the outer loop.
//! For `n = 2` a point `(x, y)` produces the row `[1, x, y, x², xy, y²]`.

use std::fmt;

use thiserror::Error;

use crate::archive::{Archive, ArchiveEntry, ArchiveError};
use crate::linalg::{LinalgError, Matrix};
use crate::objectives::{Bounds, Objective};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SurrogateError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("expected {expected} interpolation points, got {got}")]
    PointCount { expected: usize, got: usize },
    #[error("point {index} has dimension {got}, expected {expected}")]
    PointDimension {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("interpolation system is singular (degenerate sample geometry): {0}")]
    SingularSystem(LinalgError),
    #[error("quadratic coefficient matrix is singular: {0}")]
    SingularB(LinalgError),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
}

/// Number of coefficients of a quadratic in `n` variables: `(n+1)(n+2)/2`.
pub fn required_points(n: usize) -> Result<usize, SurrogateError> {
    if n == 0 {
        return Err(SurrogateError::ZeroDimension);
    }
    Ok((n + 1) * (n + 2) / 2)
}

/// Inverse of [`required_points`], when `count` is a valid coefficient count.
fn dimension_for(count: usize) -> Option<usize> {
    (1..=count).find(|&n| (n + 1) * (n + 2) / 2 == count)
}

fn design_row(x: &[f64], row: &mut [f64]) {
    let n = x.len();
    row[0] = 1.0;
    row[1..=n].copy_from_slice(x);
    let mut col = n + 1;
    for i in 0..n {
        for j in i..n {
            row[col] = x[i] * x[j];
            col += 1;
        }
    }
}

/// Interpolation matrix for the given points, one row per point.
pub fn build_design_matrix(points: &[Vec<f64>]) -> Result<Matrix, SurrogateError> {
    let n = points.first().map_or(0, Vec::len);
    let expected = required_points(n)?;
    if points.len() != expected {
        return Err(SurrogateError::PointCount {
            expected,
            got: points.len(),
        });
    }
    for (index, p) in points.iter().enumerate() {
        if p.len() != n {
            return Err(SurrogateError::PointDimension {
                index,
                expected: n,
                got: p.len(),
            });
        }
    }
    let mut m = Matrix::zeros(expected);
    let mut row = vec![0.0; expected];
    for (r, p) in points.iter().enumerate() {
        design_row(p, &mut row);
        for (c, v) in row.iter().enumerate() {
            m[(r, c)] = *v;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    pub c: f64,
    pub a: Vec<f64>,
    /// Symmetric; off-diagonal entries carry half of each cross-term coefficient.
    pub b: Matrix,
}

impl QuadraticModel {
    pub fn new(c: f64, a: Vec<f64>, b: Matrix) -> Self {
        assert_eq!(a.len(), b.size(), "linear and quadratic terms disagree on dimension");
        Self { c, a, b }
    }

    pub fn dimension(&self) -> usize {
        self.a.len()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let bx = self.b.mul_vec(x);
        self.c
            + self.a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>()
            + x.iter().zip(&bx).map(|(x, y)| x * y).sum::<f64>()
    }

    /// `a + 2Bx`
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let bx = self.b.mul_vec(x);
        self.a.iter().zip(&bx).map(|(a, y)| a + 2.0 * y).collect()
    }

    /// Coefficients in design-matrix column order.
    pub fn coefficients(&self) -> Vec<f64> {
        let n = self.dimension();
        let mut theta = Vec::with_capacity(required_points(n).unwrap_or(1));
        theta.push(self.c);
        theta.extend_from_slice(&self.a);
        for i in 0..n {
            for j in i..n {
                theta.push(if i == j { self.b[(i, i)] } else { 2.0 * self.b[(i, j)] });
            }
        }
        theta
    }

    fn from_coefficients(n: usize, theta: &[f64]) -> Self {
        let c = theta[0];
        let a = theta[1..=n].to_vec();
        let mut b = Matrix::zeros(n);
        let mut col = n + 1;
        for i in 0..n {
            for j in i..n {
                if i == j {
                    b[(i, i)] = theta[col];
                } else {
                    let half = 0.5 * theta[col];
                    b[(i, j)] = half;
                    b[(j, i)] = half;
                }
                col += 1;
            }
        }
        Self { c, a, b }
    }
}

/// Interpolate a quadratic through exactly `required_points(n)` samples.
pub fn fit(points: &[Vec<f64>], values: &[f64]) -> Result<QuadraticModel, SurrogateError> {
    let m = build_design_matrix(points)?;
    if values.len() != points.len() {
        return Err(SurrogateError::PointCount {
            expected: points.len(),
            got: values.len(),
        });
    }
    let theta = m.solve(values).map_err(SurrogateError::SingularSystem)?;
    let n = dimension_for(theta.len()).expect("design matrix size is a coefficient count");
    Ok(QuadraticModel::from_coefficients(n, &theta))
}

/// Stationary point `−½B⁻¹a`, via a solve of `B·y = a`.
pub fn minimize(model: &QuadraticModel) -> Result<Vec<f64>, SurrogateError> {
    let y = model.b.solve(&model.a).map_err(SurrogateError::SingularB)?;
    Ok(y.into_iter().map(|v| -0.5 * v).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FallbackReason {
    TooFewPoints,
    SingularSystem,
    SingularB,
    NonImproving,
}

impl FallbackReason {
    pub const ALL: [FallbackReason; 4] = [
        FallbackReason::TooFewPoints,
        FallbackReason::SingularSystem,
        FallbackReason::SingularB,
        FallbackReason::NonImproving,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FallbackReason::TooFewPoints => "too_few_points",
            FallbackReason::SingularSystem => "singular_system",
            FallbackReason::SingularB => "singular_b",
            FallbackReason::NonImproving => "non_improving",
        }
    }
}

impl fmt::Display for FallbackReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateResult {
    pub x_min: Vec<f64>,
    /// True objective value at `x_min` (never the surrogate's prediction).
    pub f_min: f64,
    pub fallback: Option<FallbackReason>,
    /// Whether the objective was evaluated at the surrogate minimizer.
    pub evaluated: bool,
}

impl SurrogateResult {
    pub fn used_fallback(&self) -> bool {
        self.fallback.is_some()
    }

    fn fallback(best: &ArchiveEntry, reason: FallbackReason, evaluated: bool) -> Self {
        Self {
            x_min: best.position.clone(),
            f_min: best.value,
            fallback: Some(reason),
            evaluated,
        }
    }
}

/// Attractor for the social term of the velocity update.
///
/// Fits the surrogate to the archive's best points, clips its minimizer into
/// `bounds` and evaluates the real objective there. The minimizer is returned
/// only if it beats `global_best`; every other outcome falls back to the
/// archive's best entry (or to `global_best` if the caller knows a strictly
/// better point). The evaluation, when made, is offered to the archive.
pub fn surrogate_attractor<O>(
    archive: &mut Archive,
    objective: &O,
    bounds: &Bounds,
    global_best: &ArchiveEntry,
) -> Result<SurrogateResult, SurrogateError>
where
    O: Objective + ?Sized,
{
    let best = fallback_point(archive, global_best)?;
    let n = best.position.len();
    let n_q = required_points(n)?;
    if archive.len() < n_q || !archive.is_full() {
        return Ok(SurrogateResult::fallback(&best, FallbackReason::TooFewPoints, false));
    }

    let (mut points, mut values) = archive.sorted_points()?;
    points.truncate(n_q);
    values.truncate(n_q);

    // Interpolate in coordinates centered on the best sample and scaled by
    // the sample spread. The quadratic family is unchanged, but the pivot
    // test then measures the geometry of the samples rather than how far
    // they sit from the origin.
    let frame = LocalFrame::new(&points);
    for p in &mut points {
        frame.to_local(p);
    }
    let model = match fit(&points, &values) {
        Ok(model) => model,
        Err(SurrogateError::SingularSystem(_)) => {
            return Ok(SurrogateResult::fallback(&best, FallbackReason::SingularSystem, false))
        }
        Err(e) => return Err(e),
    };
    let mut x_min = match minimize(&model) {
        Ok(x) => x,
        Err(SurrogateError::SingularB(_)) => {
            return Ok(SurrogateResult::fallback(&best, FallbackReason::SingularB, false))
        }
        Err(e) => return Err(e),
    };
    frame.to_global(&mut x_min);
    bounds.clip_in_place(&mut x_min);
    let f_min = objective.evaluate(&x_min);
    archive.observe(&x_min, f_min);

    if f_min < global_best.value {
        Ok(SurrogateResult {
            x_min,
            f_min,
            fallback: None,
            evaluated: true,
        })
    } else {
        // The observation above may have changed the archive's best.
        let best = fallback_point(archive, global_best)?;
        Ok(SurrogateResult::fallback(&best, FallbackReason::NonImproving, true))
    }
}

/// `u = (x − center) / scale`, per coordinate.
struct LocalFrame {
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl LocalFrame {
    /// Centered on the first point; a coordinate on which all points agree
    /// keeps unit scale.
    fn new(points: &[Vec<f64>]) -> Self {
        let center = points[0].clone();
        let scale = (0..center.len())
            .map(|j| {
                let s = points.iter().fold(0.0f64, |m, p| m.max((p[j] - center[j]).abs()));
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { center, scale }
    }

    fn to_local(&self, x: &mut [f64]) {
        for ((v, c), s) in x.iter_mut().zip(&self.center).zip(&self.scale) {
            *v = (*v - c) / s;
        }
    }

    fn to_global(&self, u: &mut [f64]) {
        for ((v, c), s) in u.iter_mut().zip(&self.center).zip(&self.scale) {
            *v = c + s * *v;
        }
    }
}

/// The archive's best entry, unless the caller's global best is strictly better.
fn fallback_point(archive: &Archive, global_best: &ArchiveEntry) -> Result<ArchiveEntry, ArchiveError> {
    let best = archive.best()?;
    Ok(if global_best.value < best.value {
        global_best.clone()
    } else {
        best.clone()
    })
}
