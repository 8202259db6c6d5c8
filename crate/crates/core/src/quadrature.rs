//! Ball-average rules and direction sets shared by the mean value checks
//! and the grid solver.

use crate::error::{Error, Result};

/// Lattice rule for the average over a ball.
///
/// The nodes are the integer points `k` with `|k| <= radius`; scaled by
/// `ball_radius / radius` they cover the target ball. Weights are radial,
/// `w(k) = a + b |k|^2`, with `a, b` fixed by the zeroth and second moments
/// of the uniform distribution. Lattice symmetry then makes the rule exact
/// for every polynomial of degree at most three.
#[derive(Clone, Debug)]
pub struct BallStencil {
    dim: usize,
    radius: f64,
    offsets: Vec<i32>,
    weights: Vec<f64>,
}

impl BallStencil {
    /// Radius is measured in lattice units and must be at least 3.
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 || dim > 3 {
            return Err(Error::Precondition(format!("ball rules are built for dimensions 1..=3, got {dim}")));
        }
        if !(radius >= 3.0) || !radius.is_finite() {
            return Err(Error::Precondition(format!("ball rule radius must be >= 3 lattice units, got {radius}")));
        }
        let reach = radius.floor() as i32;
        let r2 = radius * radius * (1.0 + 1e-12);
        let mut offsets = Vec::new();
        let mut norms = Vec::new();
        let mut k = vec![-reach; dim];
        loop {
            let n2: i64 = k.iter().map(|&c| (c as i64) * (c as i64)).sum();
            if (n2 as f64) <= r2 {
                offsets.extend_from_slice(&k);
                norms.push(n2 as f64);
            }
            if !odometer(&mut k, -reach, reach) {
                break;
            }
        }
        let s0 = norms.len() as f64;
        let s1: f64 = norms.iter().sum();
        let s2: f64 = norms.iter().map(|v| v * v).sum();
        let target = radius * radius * dim as f64 / (dim as f64 + 2.0);
        let det = s0 * s2 - s1 * s1;
        let a = (s2 - s1 * target) / det;
        let b = (s0 * target - s1) / det;
        let weights: Vec<f64> = norms.iter().map(|n2| a + b * n2).collect();
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Precondition(format!(
                "ball rule with radius {radius} in dimension {dim} has non-positive weights"
            )));
        }
        Ok(Self { dim, radius, offsets, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Radius in lattice units.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Lattice offsets and their weights.
    pub fn points(&self) -> impl Iterator<Item = (&[i32], f64)> + '_ {
        self.offsets.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    /// Average of `f` over the ball of radius `ball_radius` centred at `center`.
    pub fn average<F: FnMut(&[f64]) -> f64>(&self, center: &[f64], ball_radius: f64, mut f: F) -> f64 {
        let scale = ball_radius / self.radius;
        let mut y = center.to_vec();
        let mut acc = 0.0;
        for (k, w) in self.points() {
            for d in 0..self.dim {
                y[d] = center[d] + scale * k[d] as f64;
            }
            acc += w * f(&y);
        }
        acc
    }
}

/// Finite set of unit directions used in place of the sphere.
#[derive(Clone, Debug)]
pub struct DirectionSet {
    dim: usize,
    units: Vec<Vec<f64>>,
    lattice: Option<Vec<Vec<i32>>>,
    refine_half_width: f64,
}

impl DirectionSet {
    /// `n = 1`: the single direction `+1`. `n = 2`: `count` equally spaced
    /// angles on `[0, pi)`. `n = 3`: a Fibonacci sphere with `count` points.
    pub fn angular(dim: usize, count: usize) -> Result<Self> {
        let units = match dim {
            1 => vec![vec![1.0]],
            2 => {
                if count == 0 {
                    return Err(Error::Precondition("direction count must be positive".into()));
                }
                (0..count)
                    .map(|k| {
                        let th = std::f64::consts::PI * k as f64 / count as f64;
                        vec![th.cos(), th.sin()]
                    })
                    .collect()
            }
            3 => {
                if count < 2 {
                    return Err(Error::Precondition("Fibonacci sphere needs at least two points".into()));
                }
                fibonacci_sphere(count)
            }
            _ => return Err(Error::Precondition(format!("direction sets exist for dimensions 1..=3, got {dim}"))),
        };
        let refine_half_width = if dim == 2 { std::f64::consts::PI / count as f64 } else { 0.0 };
        Ok(Self { dim, units, lattice: None, refine_half_width })
    }

    /// Primitive integer vectors of length at most `radius`, one per
    /// direction pair `+-v`, shortest first.
    pub fn lattice(dim: usize, radius: usize) -> Result<Self> {
        if dim == 0 || dim > 3 {
            return Err(Error::Precondition(format!("direction sets exist for dimensions 1..=3, got {dim}")));
        }
        if radius == 0 {
            return Err(Error::Precondition("lattice direction radius must be positive".into()));
        }
        let r = radius as i32;
        let mut vs: Vec<Vec<i32>> = Vec::new();
        let mut k = vec![-r; dim];
        loop {
            let n2: i32 = k.iter().map(|c| c * c).sum();
            let first = k.iter().copied().find(|&c| c != 0);
            if n2 > 0 && n2 <= r * r && first.is_some_and(|c| c > 0) && k.iter().fold(0, |g, &c| gcd(g, c.abs())) == 1 {
                vs.push(k.clone());
            }
            if !odometer(&mut k, -r, r) {
                break;
            }
        }
        vs.sort_by(|a, b| {
            let na: i32 = a.iter().map(|c| c * c).sum();
            let nb: i32 = b.iter().map(|c| c * c).sum();
            na.cmp(&nb).then_with(|| b.cmp(a))
        });
        let units = vs
            .iter()
            .map(|v| {
                let len = (v.iter().map(|c| (c * c) as f64).sum::<f64>()).sqrt();
                v.iter().map(|&c| c as f64 / len).collect()
            })
            .collect();
        let mut set = Self { dim, units, lattice: Some(vs), refine_half_width: 0.0 };
        if dim == 2 {
            set.refine_half_width = 2.0 * set.angular_gap();
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn units(&self) -> &[Vec<f64>] {
        &self.units
    }

    /// Integer generators, when the set was built from the lattice.
    pub fn lattice_vectors(&self) -> Option<&[Vec<i32>]> {
        self.lattice.as_deref()
    }

    /// Covering radius of the set on the projective sphere, in radians:
    /// every unit vector is within this angle of some `+-sigma`.
    pub fn angular_gap(&self) -> f64 {
        match self.dim {
            1 => 0.0,
            2 => {
                let pi = std::f64::consts::PI;
                let mut th: Vec<f64> = self.units.iter().map(|u| u[1].atan2(u[0]).rem_euclid(pi)).collect();
                th.sort_by(f64::total_cmp);
                let mut gap = th[0] + pi - th[th.len() - 1];
                for w in th.windows(2) {
                    gap = gap.max(w[1] - w[0]);
                }
                gap / 2.0
            }
            _ => fibonacci_sphere(4096)
                .iter()
                .map(|t| {
                    let best = self
                        .units
                        .iter()
                        .map(|u| (t[0] * u[0] + t[1] * u[1] + t[2] * u[2]).abs())
                        .fold(0.0, f64::max);
                    best.min(1.0).acos()
                })
                .fold(0.0, f64::max),
        }
    }

    /// Maximises `g` over the set, ties going to the lowest index. In two
    /// dimensions `refine_steps > 0` runs a golden-section search on the
    /// angle around the discrete maximiser.
    pub fn maximize<G: FnMut(&[f64]) -> f64>(&self, refine_steps: usize, mut g: G) -> (f64, Vec<f64>) {
        let mut best = f64::NEG_INFINITY;
        let mut best_idx = 0;
        for (i, u) in self.units.iter().enumerate() {
            let v = g(u);
            if v > best {
                best = v;
                best_idx = i;
            }
        }
        let mut arg = self.units[best_idx].clone();
        if self.dim == 2 && refine_steps > 0 && self.refine_half_width > 0.0 {
            let center = arg[1].atan2(arg[0]);
            let mut eval = |th: f64| g(&[th.cos(), th.sin()]);
            let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
            let (mut lo, mut hi) = (center - self.refine_half_width, center + self.refine_half_width);
            let mut c = hi - inv_phi * (hi - lo);
            let mut d = lo + inv_phi * (hi - lo);
            let (mut fc, mut fd) = (eval(c), eval(d));
            for _ in 0..refine_steps {
                if fc > fd {
                    hi = d;
                    d = c;
                    fd = fc;
                    c = hi - inv_phi * (hi - lo);
                    fc = eval(c);
                } else {
                    lo = c;
                    c = d;
                    fc = fd;
                    d = lo + inv_phi * (hi - lo);
                    fd = eval(d);
                }
            }
            let (th, v) = if fc > fd { (c, fc) } else { (d, fd) };
            if v > best {
                best = v;
                arg = vec![th.cos(), th.sin()];
            }
        }
        (best, arg)
    }
}

fn fibonacci_sphere(count: usize) -> Vec<Vec<f64>> {
    let golden_angle = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            vec![r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Advances `k` through `[lo, hi]^n`, last axis fastest; false once wrapped.
pub(crate) fn odometer(k: &mut [i32], lo: i32, hi: i32) -> bool {
    for c in k.iter_mut().rev() {
        if *c < hi {
            *c += 1;
            return true;
        }
        *c = lo;
    }
    false
}

fn gcd(a: i32, b: i32) -> i32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
