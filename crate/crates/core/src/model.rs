//! Game parameters, the space-time cylinder, boundary strips and payoffs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::Field;
use crate::reference::ReferenceSolution;

/// Selects the time step of one game round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeScaling {
    /// Step `eps^2`, matching `2(n+p) u_t = D_p u`.
    #[default]
    Standard,
    /// Step `eps^2 / (2(n+p))`, matching `u_t = D_p u`.
    #[serde(rename = "remark24", alias = "unit_coefficient")]
    UnitCoefficient,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameParams {
    pub n: usize,
    pub p: f64,
    pub epsilon: f64,
    /// Probability of a controlled move, `(p-2)/(p+n)`.
    pub alpha: f64,
    /// Probability of a uniform move in the ball, `(n+2)/(p+n)`.
    pub beta: f64,
    pub time_scaling: TimeScaling,
}

impl GameParams {
    pub fn new(n: usize, p: f64, epsilon: f64, time_scaling: TimeScaling) -> Result<Self> {
        if n == 0 {
            return Err(Error::ParameterDomain("dimension n must be at least 1".into()));
        }
        if !p.is_finite() || p <= 2.0 {
            return Err(Error::ParameterDomain(format!("exponent p must satisfy 2 < p < inf, got {p}")));
        }
        if !epsilon.is_finite() || epsilon <= 0.0 || epsilon >= 1.0 {
            return Err(Error::ParameterDomain(format!(
                "step epsilon must satisfy 0 < epsilon < 1, got {epsilon}"
            )));
        }
        let nf = n as f64;
        Ok(Self {
            n,
            p,
            epsilon,
            alpha: (p - 2.0) / (p + nf),
            beta: (nf + 2.0) / (p + nf),
            time_scaling,
        })
    }

    /// Same game with a different step size.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.n, self.p, epsilon, self.time_scaling)
    }

    /// Time consumed by one round of the game.
    pub fn time_step(&self) -> f64 {
        let e2 = self.epsilon * self.epsilon;
        match self.time_scaling {
            TimeScaling::Standard => e2,
            TimeScaling::UnitCoefficient => e2 / (2.0 * (self.n as f64 + self.p)),
        }
    }

    /// Coefficient `c` of the equation `c u_t = D_p u` matched by this scaling.
    pub fn time_coefficient(&self) -> f64 {
        match self.time_scaling {
            TimeScaling::Standard => 2.0 * (self.n as f64 + self.p),
            TimeScaling::UnitCoefficient => 1.0,
        }
    }

    /// Expected squared displacement of one step: `alpha eps^2 + beta eps^2 n/(n+2)`.
    pub fn step_second_moment(&self) -> f64 {
        let nf = self.n as f64;
        self.epsilon * self.epsilon * (self.alpha + self.beta * nf / (nf + 2.0))
    }
}

/// Spatial domain. Both shapes are convex, so they satisfy an exterior
/// sphere condition with any radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Inside,
    OnBoundary,
    Outside,
}

/// Unsigned distance to the lateral boundary plus the side it was measured from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryDistance {
    pub distance: f64,
    pub location: Location,
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Box { lower, .. } => lower.len(),
            Shape::Ball { center, .. } => center.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Shape::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::Geometry("box corners must be non-empty and of equal length".into()));
                }
                if lower.iter().chain(upper).any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("box corner".into()));
                }
                if lower.iter().zip(upper).any(|(l, u)| l >= u) {
                    return Err(Error::Geometry("box lower corner must be below the upper corner".into()));
                }
            }
            Shape::Ball { center, radius } => {
                if center.is_empty() {
                    return Err(Error::Geometry("ball center must be non-empty".into()));
                }
                if center.iter().any(|v| !v.is_finite()) || !radius.is_finite() {
                    return Err(Error::NonFinite("ball center or radius".into()));
                }
                if *radius <= 0.0 {
                    return Err(Error::Geometry("ball radius must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Distance from `x` to the boundary of the shape.
    pub fn dist_to_boundary(&self, x: &[f64]) -> BoundaryDistance {
        let (distance, inside) = match self {
            Shape::Box { lower, upper } => {
                let inside = x.iter().zip(lower.iter().zip(upper)).all(|(v, (l, u))| v > l && v < u);
                if inside {
                    let d = x
                        .iter()
                        .zip(lower.iter().zip(upper))
                        .map(|(v, (l, u))| (v - l).min(u - v))
                        .fold(f64::INFINITY, f64::min);
                    (d, true)
                } else {
                    let d2: f64 = x
                        .iter()
                        .zip(lower.iter().zip(upper))
                        .map(|(v, (l, u))| {
                            let e = (l - v).max(0.0).max(v - u);
                            e * e
                        })
                        .sum();
                    (d2.sqrt(), false)
                }
            }
            Shape::Ball { center, radius } => {
                let r = dist(x, center);
                ((r - radius).abs(), r < *radius)
            }
        };
        let location = if distance == 0.0 {
            Location::OnBoundary
        } else if inside {
            Location::Inside
        } else {
            Location::Outside
        };
        BoundaryDistance { distance, location }
    }

    /// Membership in the open set.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Shape::Box { lower, upper } => x.iter().zip(lower.iter().zip(upper)).all(|(v, (l, u))| v > l && v < u),
            Shape::Ball { center, radius } => dist_sq(x, center) < radius * radius,
        }
    }

    /// Membership in the closure.
    pub fn closure_contains(&self, x: &[f64]) -> bool {
        match self {
            Shape::Box { lower, upper } => x.iter().zip(lower.iter().zip(upper)).all(|(v, (l, u))| v >= l && v <= u),
            Shape::Ball { center, radius } => dist_sq(x, center) <= radius * radius,
        }
    }

    /// Axis-aligned bounding box `(lower, upper)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Shape::Box { lower, upper } => (lower.clone(), upper.clone()),
            Shape::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }
}

/// The parabolic cylinder `Omega x (0, T)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpaceTimeDomain {
    pub shape: Shape,
    pub horizon: f64,
}

impl SpaceTimeDomain {
    pub fn new(shape: Shape, horizon: f64) -> Result<Self> {
        shape.validate()?;
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::Geometry(format!("time horizon must be positive, got {horizon}")));
        }
        Ok(Self { shape, horizon })
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    /// Checks that the parameters fit this domain: matching dimension and
    /// room for at least one game step below the horizon.
    pub fn check_params(&self, params: &GameParams) -> Result<()> {
        if params.n != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: params.n });
        }
        let dt = params.time_step();
        if self.horizon <= dt {
            return Err(Error::ParameterDomain(format!(
                "horizon T = {} must exceed one time step {dt}",
                self.horizon
            )));
        }
        Ok(())
    }

    pub fn dist_to_lateral_boundary(&self, x: &[f64]) -> BoundaryDistance {
        self.shape.dist_to_boundary(x)
    }

    /// `(x, t)` lies in the open cylinder `Omega x (0, T]`.
    pub fn interior_contains(&self, x: &[f64], t: f64) -> bool {
        t > 0.0 && t <= self.horizon && self.shape.contains(x)
    }

    /// Distance from an interior point to the parabolic boundary.
    pub fn dist_to_parabolic_boundary(&self, x: &[f64], t: f64) -> f64 {
        let lateral = self.shape.dist_to_boundary(x);
        match lateral.location {
            Location::Inside => lateral.distance.min(t.max(0.0)),
            _ => 0.0,
        }
    }
}

/// The parabolic boundary strip of a given width: the exterior layer
/// `S_w = {x not in Omega : dist(x, dOmega) <= w}` at every time in
/// `[time_floor, T]`, together with `closure(Omega) x [time_floor, 0]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryStrip {
    pub width: f64,
    pub time_floor: f64,
    pub domain: SpaceTimeDomain,
}

impl BoundaryStrip {
    pub fn new(domain: SpaceTimeDomain, width: f64, time_floor: f64) -> Self {
        Self { width, time_floor, domain }
    }

    /// The strip where the game stops: width `eps`, times down to one step below 0.
    pub fn game(domain: &SpaceTimeDomain, params: &GameParams) -> Self {
        Self::new(domain.clone(), params.epsilon, -params.time_step())
    }

    /// The strip where payoffs are defined: width 1.
    pub fn payoff(domain: &SpaceTimeDomain, params: &GameParams) -> Self {
        Self::new(domain.clone(), 1.0, -params.time_step())
    }

    pub fn contains(&self, x: &[f64], t: f64) -> bool {
        if t < self.time_floor {
            return false;
        }
        let shape = &self.domain.shape;
        if shape.contains(x) {
            return t <= 0.0;
        }
        let d = shape.dist_to_boundary(x);
        if d.distance <= self.width && t <= self.domain.horizon {
            return true;
        }
        t <= 0.0 && shape.closure_contains(x)
    }
}

/// Multilinear interpolation table over space-time, clamped at its edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    /// Lower corner, spatial coordinates then time.
    pub lower: Vec<f64>,
    pub spacing: Vec<f64>,
    /// Nodes per axis; the last axis is time.
    pub shape: Vec<usize>,
    /// Values in row-major order (last axis fastest).
    pub values: Vec<f64>,
}

impl Table {
    pub fn validate(&self) -> Result<()> {
        let k = self.shape.len();
        if k < 2 || self.lower.len() != k || self.spacing.len() != k {
            return Err(Error::Config("table needs matching lower/spacing/shape with at least one space axis".into()));
        }
        if self.shape.iter().any(|&s| s < 2) || self.spacing.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::Config("table axes need at least two nodes and positive spacing".into()));
        }
        let count: usize = self.shape.iter().product();
        if count != self.values.len() {
            return Err(Error::Config(format!("table expects {count} values, got {}", self.values.len())));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("table value".into()));
        }
        Ok(())
    }

    fn eval(&self, x: &[f64], t: f64) -> f64 {
        let k = self.shape.len();
        let mut base = vec![0usize; k];
        let mut frac = vec![0.0; k];
        for axis in 0..k {
            let coord = if axis + 1 == k { t } else { x[axis] };
            let last = (self.shape[axis] - 1) as f64;
            let s = ((coord - self.lower[axis]) / self.spacing[axis]).clamp(0.0, last);
            let i = (s.floor() as usize).min(self.shape[axis] - 2);
            base[axis] = i;
            frac[axis] = s - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << k) {
            let mut w = 1.0;
            let mut flat = 0;
            for axis in 0..k {
                let bit = (corner >> axis) & 1;
                w *= if bit == 1 { frac[axis] } else { 1.0 - frac[axis] };
                flat = flat * self.shape[axis] + base[axis] + bit;
            }
            if w != 0.0 {
                acc += w * self.values[flat];
            }
        }
        acc
    }
}

/// Payoff data `F`, evaluable on the whole width-1 strip (and beyond).
#[derive(Clone, Debug, PartialEq)]
pub enum PayoffField {
    Constant(f64),
    /// `<gradient, x> + offset`.
    Linear { gradient: Vec<f64>, offset: f64 },
    Reference(ReferenceSolution),
    Tabulated(Table),
    Sum(Vec<PayoffField>),
}

impl PayoffField {
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match self {
            PayoffField::Constant(c) => *c,
            PayoffField::Linear { gradient, offset } => {
                gradient.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + offset
            }
            PayoffField::Reference(r) => r.value(x, t),
            PayoffField::Tabulated(table) => table.eval(x, t),
            PayoffField::Sum(parts) => parts.iter().map(|f| f.eval(x, t)).sum(),
        }
    }

    /// `self + c`.
    pub fn shifted(self, c: f64) -> Self {
        match self {
            PayoffField::Constant(v) => PayoffField::Constant(v + c),
            PayoffField::Sum(mut parts) => {
                parts.push(PayoffField::Constant(c));
                PayoffField::Sum(parts)
            }
            other => PayoffField::Sum(vec![other, PayoffField::Constant(c)]),
        }
    }
}

impl Field for PayoffField {
    fn value(&self, x: &[f64], t: f64) -> f64 {
        self.eval(x, t)
    }
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}
