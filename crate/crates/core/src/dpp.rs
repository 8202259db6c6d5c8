//! Grid solver for the dynamic programming principle
//!
//! `u(x, t) = beta * avg_{B_eps(x)} u(., t - dt) + alpha * sup_sigma (u(x + eps sigma, t - dt) + u(x - eps sigma, t - dt)) / 2`
//!
//! with `u = F` on the boundary strip. Nodes sit at `i * h` with `i` integer,
//! so every stencil is a fixed list of `(flat offset, weight)` pairs with
//! nonnegative weights: each update is a convex combination of the previous
//! level, which gives the discrete maximum principle and comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{for_each_indexed, Execution};
use crate::model::{GameParams, PayoffField, SpaceTimeDomain};
use crate::quadrature::{odometer, BallStencil, DirectionSet};

/// How the supremum over directions is discretised.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum DirectionMode {
    /// Primitive lattice vectors `v` with `|v| <= min(radius, eps/h)`, each
    /// evaluated on the two node pairs `x +- k v` that bracket distance `eps`,
    /// mixed so the second moment is exactly `eps^2`. Default radius is 8 in
    /// one and two dimensions and 3 in three.
    Lattice { radius: Option<usize> },
    /// Evenly spread unit vectors, with `u(x +- eps sigma)` read off by
    /// multilinear interpolation.
    Angular { count: usize },
}

impl Default for DirectionMode {
    fn default() -> Self {
        DirectionMode::Lattice { radius: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Node spacing; must be at most `eps / 4`.
    pub h: f64,
    /// Target number of ball-stencil points per radius. The stencil uses
    /// every `stride`-th node with `stride = max(1, floor((eps/h) / ball_units))`.
    #[serde(default)]
    pub ball_units: Option<usize>,
    #[serde(default)]
    pub directions: DirectionMode,
    #[serde(default)]
    pub execution: Execution,
}

impl GridConfig {
    pub fn new(h: f64) -> Self {
        Self { h, ball_units: None, directions: DirectionMode::default(), execution: Execution::default() }
    }

    /// Spacing `eps / ratio`.
    pub fn with_ratio(params: &GameParams, ratio: f64) -> Self {
        Self::new(params.epsilon / ratio)
    }

    pub fn directions(mut self, mode: DirectionMode) -> Self {
        self.directions = mode;
        self
    }

    pub fn execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

/// Compiled update: offsets into the flat node array and their weights.
#[derive(Clone, Debug)]
struct Stencil {
    ball: Vec<(isize, f64)>,
    directions: Vec<Vec<(isize, f64)>>,
}

/// Nodes `lower + i` (in units of `h`) for `0 <= i < dims`, last axis fastest.
#[derive(Clone, Debug, PartialEq)]
struct Lattice {
    h: f64,
    lower: Vec<i64>,
    dims: Vec<usize>,
    strides: Vec<usize>,
}

impl Lattice {
    fn len(&self) -> usize {
        self.dims.iter().product()
    }

    fn flat_offset(&self, k: &[i32]) -> isize {
        k.iter().zip(&self.strides).map(|(&c, &s)| c as isize * s as isize).sum()
    }

    fn coords(&self, mut flat: usize, out: &mut [f64]) {
        for d in (0..self.dims.len()).rev() {
            let i = flat % self.dims[d];
            flat /= self.dims[d];
            out[d] = (self.lower[d] + i as i64) as f64 * self.h;
        }
    }

    fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims.len()];
        for d in (0..self.dims.len()).rev() {
            idx[d] = flat % self.dims[d];
            flat /= self.dims[d];
        }
        idx
    }
}

/// Where the largest DPP residual was found.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualLocation {
    pub node: Vec<usize>,
    pub x: Vec<f64>,
    pub level: i64,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DppResidualReport {
    pub max_abs_residual: f64,
    pub argmax: Option<ResidualLocation>,
    /// Largest residual on each level `j = 1..=J`.
    pub per_level: Vec<f64>,
}

/// Solved field on time levels `t_j = j dt`, `j = -1, 0, ..., J`.
#[derive(Clone, Debug)]
pub struct ValueGrid {
    params: GameParams,
    domain: SpaceTimeDomain,
    config: GridConfig,
    lattice: Lattice,
    interior: Vec<bool>,
    stencil: Stencil,
    direction_set: DirectionSet,
    top_level: i64,
    values: Vec<f64>,
}

/// Lattice offsets with weights for one direction's midpoint term.
type DirectionTerms = Vec<(Vec<i32>, f64)>;
/// Ball offsets, ball weights, per-direction terms and the directions.
type StencilParts = (Vec<Vec<i32>>, Vec<f64>, Vec<DirectionTerms>, DirectionSet);

fn build_stencil(params: &GameParams, config: &GridConfig) -> Result<StencilParts> {
    let n = params.n;
    let ratio = params.epsilon / config.h;
    let units = config.ball_units.unwrap_or(if n <= 2 { 8 } else { 4 });
    if units < 3 {
        return Err(Error::Precondition(format!("ball_units must be at least 3, got {units}")));
    }
    let stride = ((ratio / units as f64 + 1e-9).floor() as i32).max(1);
    let ball = BallStencil::new(n, ratio / stride as f64)?;
    let mut ball_offsets = Vec::with_capacity(ball.len());
    let mut ball_weights = Vec::with_capacity(ball.len());
    for (k, w) in ball.points() {
        ball_offsets.push(k.iter().map(|c| c * stride).collect());
        ball_weights.push(w);
    }

    let mut directions = Vec::new();
    let set = match &config.directions {
        DirectionMode::Lattice { radius } => {
            let cap = radius.unwrap_or(if n <= 2 { 8 } else { 3 });
            let reach = ((ratio + 1e-9).floor() as usize).min(cap).max(1);
            let set = DirectionSet::lattice(n, reach)?;
            for v in set.lattice_vectors().unwrap_or_default() {
                let len = v.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
                let q = ratio / len;
                let k1 = (q + 1e-9).floor();
                let mut terms = Vec::new();
                let mut push = |k: f64, w: f64| {
                    let ki = k as i32;
                    terms.push((v.iter().map(|c| c * ki).collect::<Vec<_>>(), 0.5 * w));
                    terms.push((v.iter().map(|c| -c * ki).collect::<Vec<_>>(), 0.5 * w));
                };
                if (q - k1).abs() <= 1e-9 * q {
                    push(k1, 1.0);
                } else {
                    let k2 = k1 + 1.0;
                    let w2 = (q * q - k1 * k1) / (k2 * k2 - k1 * k1);
                    push(k1, 1.0 - w2);
                    push(k2, w2);
                }
                directions.push(terms);
            }
            set
        }
        DirectionMode::Angular { count } => {
            let set = DirectionSet::angular(n, *count)?;
            for sigma in set.units() {
                let mut terms = Vec::new();
                for sign in [1.0, -1.0] {
                    let pos: Vec<f64> = sigma.iter().map(|s| sign * ratio * s).collect();
                    let mut base = vec![0i32; n];
                    let mut frac = vec![0.0; n];
                    for d in 0..n {
                        let fl = pos[d].floor();
                        let mut f = pos[d] - fl;
                        base[d] = fl as i32;
                        if f < 1e-12 {
                            f = 0.0;
                        } else if f > 1.0 - 1e-12 {
                            f = 0.0;
                            base[d] += 1;
                        }
                        frac[d] = f;
                    }
                    for corner in 0..(1usize << n) {
                        let mut w = 0.5;
                        let mut k = base.clone();
                        for d in 0..n {
                            if (corner >> d) & 1 == 1 {
                                w *= frac[d];
                                k[d] += 1;
                            } else {
                                w *= 1.0 - frac[d];
                            }
                        }
                        if w > 0.0 {
                            terms.push((k, w));
                        }
                    }
                }
                directions.push(terms);
            }
            set
        }
    };
    Ok((ball_offsets, ball_weights, directions, set))
}

impl ValueGrid {
    /// Builds the node layout, fills the data levels and marches upward.
    pub fn solve(domain: &SpaceTimeDomain, payoff: &PayoffField, params: &GameParams, config: &GridConfig) -> Result<Self> {
        let mut grid = Self::layout(domain, params, config)?;
        grid.fill_data(payoff)?;
        grid.march(payoff)?;
        Ok(grid)
    }

    fn layout(domain: &SpaceTimeDomain, params: &GameParams, config: &GridConfig) -> Result<Self> {
        domain.check_params(params)?;
        let h = config.h;
        if !h.is_finite() || h <= 0.0 {
            return Err(Error::Precondition(format!("grid spacing must be positive, got {h}")));
        }
        if h > params.epsilon / 4.0 * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!(
                "grid too coarse: h = {h} exceeds eps/4 = {}",
                params.epsilon / 4.0
            )));
        }
        let n = params.n;
        let (ball_offsets, ball_weights, dir_terms, direction_set) = build_stencil(params, config)?;
        let mut reach = vec![0i32; n];
        for k in ball_offsets.iter().chain(dir_terms.iter().flatten().map(|(k, _)| k)) {
            for d in 0..n {
                reach[d] = reach[d].max(k[d].abs());
            }
        }
        let (lo, hi) = domain.shape.bounding_box();
        let mut lower = Vec::with_capacity(n);
        let mut dims = Vec::with_capacity(n);
        for d in 0..n {
            let a = (lo[d] / h).floor() as i64 - reach[d] as i64 - 1;
            let b = (hi[d] / h).ceil() as i64 + reach[d] as i64 + 1;
            lower.push(a);
            dims.push((b - a + 1) as usize);
        }
        let mut strides = vec![1usize; n];
        for d in (0..n.saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * dims[d + 1];
        }
        let lattice = Lattice { h, lower, dims, strides };
        let count = lattice.len();
        let mut x = vec![0.0; n];
        let interior = (0..count)
            .map(|i| {
                lattice.coords(i, &mut x);
                domain.shape.contains(&x)
            })
            .collect();
        let stencil = Stencil {
            ball: ball_offsets.iter().map(|k| lattice.flat_offset(k)).zip(ball_weights).collect(),
            directions: dir_terms
                .iter()
                .map(|terms| terms.iter().map(|(k, w)| (lattice.flat_offset(k), *w)).collect())
                .collect(),
        };
        let dt = params.time_step();
        let top_level = (domain.horizon / dt - 1e-9).ceil() as i64;
        let levels = (top_level + 2) as usize;
        Ok(Self {
            params: params.clone(),
            domain: domain.clone(),
            config: config.clone(),
            lattice,
            interior,
            stencil,
            direction_set,
            top_level,
            values: vec![0.0; levels * count],
        })
    }

    fn level_slice(&self, j: i64) -> &[f64] {
        let count = self.lattice.len();
        let l = (j + 1) as usize;
        &self.values[l * count..(l + 1) * count]
    }

    fn fill_data(&mut self, payoff: &PayoffField) -> Result<()> {
        let count = self.lattice.len();
        for j in [-1, 0] {
            let t = self.level_time(j);
            let l = (j + 1) as usize;
            let lattice = &self.lattice;
            let n = self.params.n;
            for_each_indexed(self.config.execution, &mut self.values[l * count..(l + 1) * count], |i, out| {
                let mut x = vec![0.0; n];
                lattice.coords(i, &mut x);
                *out = payoff.eval(&x, t);
            });
            self.check_finite(j)?;
        }
        Ok(())
    }

    fn check_finite(&self, j: i64) -> Result<()> {
        if let Some(i) = self.level_slice(j).iter().position(|v| !v.is_finite()) {
            let mut x = vec![0.0; self.params.n];
            self.lattice.coords(i, &mut x);
            return Err(Error::NonFinite(format!("value at x = {x:?}, t = {}", self.level_time(j))));
        }
        Ok(())
    }

    fn march(&mut self, payoff: &PayoffField) -> Result<()> {
        let count = self.lattice.len();
        let (alpha, beta) = (self.params.alpha, self.params.beta);
        for j in 1..=self.top_level {
            let t = self.level_time(j);
            let l = (j + 1) as usize;
            let (below, above) = self.values.split_at_mut(l * count);
            let prev = &below[(l - 1) * count..];
            let cur = &mut above[..count];
            let stencil = &self.stencil;
            let interior = &self.interior;
            let lattice = &self.lattice;
            let n = self.params.n;
            for_each_indexed(self.config.execution, cur, |i, out| {
                *out = if interior[i] {
                    update(stencil, prev, i, alpha, beta)
                } else {
                    let mut x = vec![0.0; n];
                    lattice.coords(i, &mut x);
                    payoff.eval(&x, t)
                };
            });
            self.check_finite(j)?;
        }
        Ok(())
    }

    pub fn params(&self) -> &GameParams {
        &self.params
    }

    pub fn domain(&self) -> &SpaceTimeDomain {
        &self.domain
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    /// The direction set behind the supremum term.
    pub fn directions(&self) -> &DirectionSet {
        &self.direction_set
    }

    pub fn spacing(&self) -> f64 {
        self.lattice.h
    }

    pub fn time_step(&self) -> f64 {
        self.params.time_step()
    }

    /// Index `J` of the top level, the least level with `t_J >= T`.
    pub fn top_level(&self) -> i64 {
        self.top_level
    }

    pub fn level_time(&self, j: i64) -> f64 {
        j as f64 * self.params.time_step()
    }

    pub fn node_count(&self) -> usize {
        self.lattice.len()
    }

    /// Nodes per axis.
    pub fn dims(&self) -> &[usize] {
        &self.lattice.dims
    }

    pub fn node_coords(&self, node: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.params.n];
        self.lattice.coords(node, &mut x);
        x
    }

    pub fn is_interior(&self, node: usize) -> bool {
        self.interior[node]
    }

    pub fn node_value(&self, node: usize, j: i64) -> f64 {
        self.level_slice(j)[node]
    }

    /// Overwrites one stored value. Intended for diagnostics such as
    /// checking that [`dpp_residual`] notices a perturbation.
    pub fn set_node_value(&mut self, node: usize, j: i64, value: f64) {
        let count = self.lattice.len();
        self.values[(j + 1) as usize * count + node] = value;
    }

    /// Flat index of the node nearest to `x`, if it lies on the grid.
    pub fn nearest_node(&self, x: &[f64]) -> Option<usize> {
        let mut flat = 0usize;
        for (d, v) in x.iter().enumerate().take(self.params.n) {
            let i = (v / self.lattice.h).round() as i64 - self.lattice.lower[d];
            if i < 0 || i >= self.lattice.dims[d] as i64 {
                return None;
            }
            flat += i as usize * self.lattice.strides[d];
        }
        Some(flat)
    }

    /// Smallest and largest stored value over all nodes and levels.
    pub fn value_range(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
    }

    /// Smallest and largest payoff over the data nodes: every node on the
    /// levels `t <= 0` and the exterior nodes on all levels.
    pub fn data_range(&self) -> (f64, f64) {
        let mut range = (f64::INFINITY, f64::NEG_INFINITY);
        for j in -1..=self.top_level {
            for (i, &v) in self.level_slice(j).iter().enumerate() {
                if j <= 0 || !self.interior[i] {
                    range = (range.0.min(v), range.1.max(v));
                }
            }
        }
        range
    }

    /// Visits every `(level, t, x, value)` in level-major, node-minor order.
    pub fn for_each_value<G: FnMut(i64, f64, &[f64], f64)>(&self, mut g: G) {
        let mut x = vec![0.0; self.params.n];
        for j in -1..=self.top_level {
            let t = self.level_time(j);
            for (i, &v) in self.level_slice(j).iter().enumerate() {
                self.lattice.coords(i, &mut x);
                g(j, t, &x, v);
            }
        }
    }

    /// Level whose time is nearest to `t`.
    pub fn snap_level(&self, t: f64) -> Result<i64> {
        let dt = self.params.time_step();
        if t > self.domain.horizon * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::OutOfCoverage(format!("t = {t} is above the horizon {}", self.domain.horizon)));
        }
        let j = ((t / dt).round() as i64).clamp(-1, self.top_level);
        if (t - j as f64 * dt).abs() > 0.5 * dt * (1.0 + 1e-9) {
            return Err(Error::OutOfCoverage(format!("t = {t} is more than dt/2 from every level")));
        }
        Ok(j)
    }

    /// Multilinear in space, linear in time between the two levels that
    /// bracket `t`. At a level time the nodal values are used as they are.
    pub fn value_at(&self, x: &[f64], t: f64) -> Result<f64> {
        let n = self.params.n;
        if x.len() != n {
            return Err(Error::Dimension { expected: n, found: x.len() });
        }
        let dt = self.params.time_step();
        if t > self.domain.horizon * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::OutOfCoverage(format!("t = {t} is above the horizon {}", self.domain.horizon)));
        }
        let s = t / dt;
        if s < -1.0 - 1e-9 {
            return Err(Error::OutOfCoverage(format!("t = {t} is below the first level {}", -dt)));
        }
        let nearest = s.round();
        if (s - nearest).abs() <= 1e-9 {
            let j = (nearest as i64).clamp(-1, self.top_level);
            return self.spatial(self.level_slice(j), x);
        }
        let below = (s.floor() as i64).clamp(-1, self.top_level - 1);
        let frac = (s - below as f64).clamp(0.0, 1.0);
        let lower = self.spatial(self.level_slice(below), x)?;
        let upper = self.spatial(self.level_slice(below + 1), x)?;
        Ok((1.0 - frac) * lower + frac * upper)
    }

    fn spatial(&self, level: &[f64], x: &[f64]) -> Result<f64> {
        let n = self.params.n;
        let mut base = 0usize;
        let mut frac = [0.0f64; 3];
        let mut step = [0usize; 3];
        for d in 0..n {
            let s = x[d] / self.lattice.h - self.lattice.lower[d] as f64;
            let last = (self.lattice.dims[d] - 1) as f64;
            if !(s >= -1e-9 && s <= last + 1e-9) {
                return Err(Error::OutOfCoverage(format!("x = {x:?} lies outside the grid")));
            }
            let s = s.clamp(0.0, last);
            let mut i = s.floor();
            if i >= last {
                i = last - 1.0;
            }
            frac[d] = s - i;
            base += i as usize * self.lattice.strides[d];
            step[d] = self.lattice.strides[d];
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = base;
            for d in 0..n {
                if (corner >> d) & 1 == 1 {
                    w *= frac[d];
                    idx += step[d];
                } else {
                    w *= 1.0 - frac[d];
                }
            }
            if w != 0.0 {
                acc += w * level[idx];
            }
        }
        Ok(acc)
    }

    /// Recomputes the right-hand side at every interior node and level.
    pub fn residual(&self) -> DppResidualReport {
        let (alpha, beta) = (self.params.alpha, self.params.beta);
        let mut report = DppResidualReport { max_abs_residual: 0.0, argmax: None, per_level: Vec::new() };
        let mut best: Option<(usize, i64)> = None;
        for j in 1..=self.top_level {
            let prev = self.level_slice(j - 1);
            let cur = self.level_slice(j);
            let mut level_max = 0.0f64;
            for i in (0..cur.len()).filter(|&i| self.interior[i]) {
                let r = (cur[i] - update(&self.stencil, prev, i, alpha, beta)).abs();
                level_max = level_max.max(r);
                if r > report.max_abs_residual || r.is_nan() {
                    report.max_abs_residual = r;
                    best = Some((i, j));
                }
            }
            report.per_level.push(level_max);
        }
        report.argmax = best.map(|(i, j)| ResidualLocation {
            node: self.lattice.multi_index(i),
            x: self.node_coords(i),
            level: j,
            t: self.level_time(j),
        });
        report
    }
}

#[inline]
fn update(stencil: &Stencil, prev: &[f64], i: usize, alpha: f64, beta: f64) -> f64 {
    let at = |d: isize| prev[(i as isize + d) as usize];
    let ball: f64 = stencil.ball.iter().map(|&(d, w)| w * at(d)).sum();
    let mut sup = f64::NEG_INFINITY;
    for terms in &stencil.directions {
        let mid: f64 = terms.iter().map(|&(d, w)| w * at(d)).sum();
        if mid > sup {
            sup = mid;
        }
    }
    beta * ball + alpha * sup
}

/// Solves the DPP with boundary data `payoff`.
pub fn solve_dpp(domain: &SpaceTimeDomain, payoff: &PayoffField, params: &GameParams, config: &GridConfig) -> Result<ValueGrid> {
    ValueGrid::solve(domain, payoff, params, config)
}

pub fn value_at(grid: &ValueGrid, x: &[f64], t: f64) -> Result<f64> {
    grid.value_at(x, t)
}

pub fn dpp_residual(grid: &ValueGrid) -> DppResidualReport {
    grid.residual()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// `u1 >= u2 - 1e-10` at every node and level.
    pub holds: bool,
    /// Largest `u2 - u1`, zero when `u1 >= u2` everywhere.
    pub max_violation: f64,
    pub location: Option<ResidualLocation>,
}

/// Solves with two ordered payoffs and reports whether the solutions stay
/// ordered. `F1 >= F2` is validated on every data node first.
pub fn check_comparison(
    domain: &SpaceTimeDomain,
    upper: &PayoffField,
    lower: &PayoffField,
    params: &GameParams,
    config: &GridConfig,
) -> Result<ComparisonReport> {
    let layout = ValueGrid::layout(domain, params, config)?;
    let mut x = vec![0.0; params.n];
    for j in -1..=layout.top_level {
        let t = layout.level_time(j);
        for i in 0..layout.lattice.len() {
            if j > 0 && layout.interior[i] {
                continue;
            }
            layout.lattice.coords(i, &mut x);
            let (a, b) = (upper.eval(&x, t), lower.eval(&x, t));
            if a < b {
                return Err(Error::Precondition(format!(
                    "payoffs are not ordered on the strip: F1 = {a} < F2 = {b} at x = {x:?}, t = {t}"
                )));
            }
        }
    }
    let u1 = ValueGrid::solve(domain, upper, params, config)?;
    let u2 = ValueGrid::solve(domain, lower, params, config)?;
    let mut worst = 0.0f64;
    let mut at: Option<(usize, i64)> = None;
    for j in -1..=u1.top_level {
        for (i, (a, b)) in u1.level_slice(j).iter().zip(u2.level_slice(j)).enumerate() {
            if b - a > worst {
                worst = b - a;
                at = Some((i, j));
            }
        }
    }
    Ok(ComparisonReport {
        holds: worst <= 1e-10,
        max_violation: worst,
        location: at.map(|(i, j)| ResidualLocation {
            node: u1.lattice.multi_index(i),
            x: u1.node_coords(i),
            level: j,
            t: u1.level_time(j),
        }),
    })
}

/// Visits every point of `[lo, hi]^n` on the integer lattice; used by tests
/// and probes that want a node-aligned sample.
pub fn lattice_points(n: usize, lo: i32, hi: i32) -> Vec<Vec<i32>> {
    let mut out = Vec::new();
    let mut k = vec![lo; n];
    loop {
        out.push(k.clone());
        if !odometer(&mut k, lo, hi) {
            break;
        }
    }
    out
}
