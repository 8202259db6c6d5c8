//! Closed-form solutions used as oracles, and the radial barrier used near
//! the lateral boundary.
//!
//! None of the solution families below is taken from the literature; each is
//! checked against the equation by [`pde_residual`] before it is trusted.
//! `QuadraticTime` is special: a quadratic in space that is linear in time
//! satisfies the dynamic programming identity exactly, not just to second
//! order, because the ball average and the symmetric midpoint of a quadratic
//! have no remainder terms.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{dist, GameParams};
use crate::operators::{dominative, Field, MeanValueQuadrature, SmoothField};
use crate::rng::{sample_in_ball, CounterRng};

#[derive(Clone, Debug, PartialEq)]
pub enum ReferenceSolution {
    Constant { dim: usize, value: f64 },
    Linear { gradient: Vec<f64>, offset: f64 },
    /// `|x - center|^2 + rate * t`.
    QuadraticTime { center: Vec<f64>, rate: f64 },
    /// `exp(kappa * t) * cosh(x_1)`.
    CoshExp { dim: usize, kappa: f64 },
}

impl ReferenceSolution {
    pub fn constant(dim: usize, value: f64) -> Self {
        Self::Constant { dim, value }
    }

    pub fn linear(gradient: Vec<f64>, offset: f64) -> Self {
        Self::Linear { gradient, offset }
    }

    /// `D_p |x|^2 = 2(n+p-2)`, so the rate is `2(n+p-2)` divided by the time
    /// coefficient: `(n+p-2)/(n+p)` for the standard scaling.
    pub fn quadratic_time(center: Vec<f64>, params: &GameParams) -> Self {
        let nf = params.n as f64;
        let rate = 2.0 * (nf + params.p - 2.0) / params.time_coefficient();
        Self::QuadraticTime { center, rate }
    }

    /// The Hessian of `cosh(x_1)` has the single nonzero eigenvalue
    /// `cosh(x_1)`, so `D_p u = (p-1) u` and `kappa = (p-1)/(2(n+p))`.
    pub fn cosh_exp(params: &GameParams) -> Self {
        Self::CoshExp { dim: params.n, kappa: (params.p - 1.0) / params.time_coefficient() }
    }

    /// Looks a family up by its configuration id.
    pub fn from_id(id: &str, params: &GameParams, center: Option<Vec<f64>>) -> Result<Self> {
        match id {
            "quadratic_time" => Ok(Self::quadratic_time(center.unwrap_or_else(|| vec![0.0; params.n]), params)),
            "cosh_exp" => Ok(Self::cosh_exp(params)),
            "constant" => Ok(Self::constant(params.n, 1.0)),
            other => Err(Error::Config(format!(
                "unknown reference solution '{other}' (expected quadratic_time, cosh_exp or constant)"
            ))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::Linear { .. } => "linear",
            Self::QuadraticTime { .. } => "quadratic_time",
            Self::CoshExp { .. } => "cosh_exp",
        }
    }
}

impl Field for ReferenceSolution {
    fn value(&self, x: &[f64], t: f64) -> f64 {
        match self {
            Self::Constant { value, .. } => *value,
            Self::Linear { gradient, offset } => gradient.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + offset,
            Self::QuadraticTime { center, rate } => {
                x.iter().zip(center).map(|(v, c)| (v - c) * (v - c)).sum::<f64>() + rate * t
            }
            Self::CoshExp { kappa, .. } => (kappa * t).exp() * x[0].cosh(),
        }
    }
}

impl SmoothField for ReferenceSolution {
    fn dim(&self) -> usize {
        match self {
            Self::Constant { dim, .. } | Self::CoshExp { dim, .. } => *dim,
            Self::Linear { gradient, .. } => gradient.len(),
            Self::QuadraticTime { center, .. } => center.len(),
        }
    }

    fn gradient(&self, x: &[f64], t: f64) -> Vec<f64> {
        let n = self.dim();
        match self {
            Self::Constant { .. } => vec![0.0; n],
            Self::Linear { gradient, .. } => gradient.clone(),
            Self::QuadraticTime { center, .. } => x.iter().zip(center).map(|(v, c)| 2.0 * (v - c)).collect(),
            Self::CoshExp { kappa, .. } => {
                let mut g = vec![0.0; n];
                g[0] = (kappa * t).exp() * x[0].sinh();
                g
            }
        }
    }

    fn hessian(&self, x: &[f64], t: f64) -> DMatrix<f64> {
        let n = self.dim();
        match self {
            Self::Constant { .. } | Self::Linear { .. } => DMatrix::zeros(n, n),
            Self::QuadraticTime { .. } => DMatrix::identity(n, n) * 2.0,
            Self::CoshExp { kappa, .. } => {
                let mut h = DMatrix::zeros(n, n);
                h[(0, 0)] = (kappa * t).exp() * x[0].cosh();
                h
            }
        }
    }

    fn time_derivative(&self, x: &[f64], t: f64) -> f64 {
        match self {
            Self::Constant { .. } | Self::Linear { .. } => 0.0,
            Self::QuadraticTime { rate, .. } => *rate,
            Self::CoshExp { kappa, .. } => kappa * (kappa * t).exp() * x[0].cosh(),
        }
    }
}

/// `c u_t - D_p u` with the time coefficient `c` of the chosen scaling.
pub fn pde_residual<S: SmoothField + ?Sized>(sol: &S, x: &[f64], t: f64, params: &GameParams) -> Result<f64> {
    let dp = dominative(&sol.hessian(x, t), params)?;
    Ok(params.time_coefficient() * sol.time_derivative(x, t) - dp)
}

/// Radial barrier `w(x) = -a|x-z|^2 - b|x-z|^(-xi) + c` on the annulus
/// `delta < |x - z| < R`, with `xi = n + p - 4`, `a = 2(n+p)/(n+p-2)`,
/// `b = (2a/xi) R^(xi+2)` and `c = a delta^2 + b delta^(-xi)`.
///
/// It vanishes on the inner sphere, has zero radial derivative on the
/// outer sphere, and `D_p w = -2a(n+p-2)` throughout.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarrierFunction {
    pub z: Vec<f64>,
    pub delta: f64,
    pub outer_radius: f64,
    pub xi: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl BarrierFunction {
    pub fn new(z: Vec<f64>, delta: f64, outer_radius: f64, params: &GameParams) -> Result<Self> {
        let nf = params.n as f64;
        if params.n < 2 {
            return Err(Error::ParameterDomain("the barrier needs n >= 2".into()));
        }
        if z.len() != params.n {
            return Err(Error::Dimension { expected: params.n, found: z.len() });
        }
        let xi = nf + params.p - 4.0;
        if xi <= 0.0 {
            return Err(Error::ParameterDomain(format!("barrier exponent xi = n + p - 4 = {xi} must be positive")));
        }
        if !(delta > 0.0) || !(outer_radius > delta) {
            return Err(Error::Geometry(format!("need 0 < delta < R, got delta = {delta}, R = {outer_radius}")));
        }
        let a = 2.0 * (nf + params.p) / (nf + params.p - 2.0);
        let b = (2.0 * a / xi) * outer_radius.powf(xi + 2.0);
        let c = a * delta * delta + b * delta.powf(-xi);
        Ok(Self { z, delta, outer_radius, xi, a, b, c })
    }

    /// The same barrier with the singular term dropped (`b = 0`), a pure
    /// concave quadratic useful as a sanity mode for drift estimates.
    pub fn quadratic_only(&self) -> Self {
        Self { b: 0.0, c: self.a * self.delta * self.delta, ..self.clone() }
    }

    pub fn radial_value(&self, r: f64) -> f64 {
        -self.a * r * r - self.b * r.powf(-self.xi) + self.c
    }

    pub fn radial_derivative(&self, r: f64) -> f64 {
        -2.0 * self.a * r + self.b * self.xi * r.powf(-self.xi - 1.0)
    }

    fn radial_second_derivative(&self, r: f64) -> f64 {
        -2.0 * self.a - self.b * self.xi * (self.xi + 1.0) * r.powf(-self.xi - 2.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.radial_value(dist(x, &self.z))
    }

    /// `f'(r) (x - z) / r`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = dist(x, &self.z);
        let scale = self.radial_derivative(r) / r;
        x.iter().zip(&self.z).map(|(v, c)| scale * (v - c)).collect()
    }

    /// Analytic Hessian `f'' rr^T + (f'/r)(I - rr^T)`.
    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.z.len();
        let r = dist(x, &self.z);
        let dir: Vec<f64> = x.iter().zip(&self.z).map(|(v, c)| (v - c) / r).collect();
        let tangential = self.radial_derivative(r) / r;
        let normal = self.radial_second_derivative(r);
        DMatrix::from_fn(n, n, |i, j| {
            let outer = dir[i] * dir[j];
            normal * outer + tangential * (if i == j { 1.0 } else { 0.0 } - outer)
        })
    }

    /// Extended annulus `delta - eps < |x - z| < R + eps` where the formula is used.
    pub fn in_extended_annulus(&self, x: &[f64], epsilon: f64) -> bool {
        let r = dist(x, &self.z);
        r > self.delta - epsilon && r < self.outer_radius + epsilon
    }
}

impl Field for BarrierFunction {
    fn value(&self, x: &[f64], _t: f64) -> f64 {
        self.eval(x)
    }
}

/// `D_p w` from the analytic Hessian.
pub fn barrier_dominative(w: &BarrierFunction, x: &[f64], params: &GameParams) -> Result<f64> {
    if x.len() != w.z.len() {
        return Err(Error::Dimension { expected: w.z.len(), found: x.len() });
    }
    if !w.in_extended_annulus(x, params.epsilon) {
        return Err(Error::OutOfCoverage(format!(
            "|x - z| = {} outside the extended annulus ({}, {})",
            dist(x, &w.z),
            w.delta - params.epsilon,
            w.outer_radius + params.epsilon
        )));
    }
    dominative(&w.hessian(x), params)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarrierProbe {
    pub x: Vec<f64>,
    pub radius: f64,
    /// Midpoint increment in the worst direction.
    pub worst_midpoint_increment: f64,
    /// `alpha * worst midpoint + beta * ball average`, both deterministic.
    pub increment_quadrature: f64,
    /// Same with the ball term estimated from one-step samples. The linear
    /// part `grad w(x) . (y - x)` has mean zero over the ball and is
    /// subtracted from every sample, which removes the first-order noise.
    pub increment_monte_carlo: f64,
    pub std_error: f64,
    pub confidence_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarrierDriftReport {
    /// `-eps^2`: the drift the barrier must beat.
    pub threshold: f64,
    pub samples_per_probe: usize,
    pub probes: Vec<BarrierProbe>,
}

impl BarrierDriftReport {
    /// Every Monte Carlo increment sits below the threshold up to its CI.
    pub fn all_pass(&self) -> bool {
        self.probes.iter().all(|p| p.increment_monte_carlo <= self.threshold + p.confidence_radius)
    }
}

/// Expected one-step change of the barrier under the worst controlled move.
/// Probes must stay more than `eps` away from both spheres of the annulus.
pub fn barrier_drift_check(
    w: &BarrierFunction,
    params: &GameParams,
    probes: &[Vec<f64>],
    samples: usize,
    seed: u64,
    quad: &MeanValueQuadrature,
) -> Result<BarrierDriftReport> {
    let eps = params.epsilon;
    if eps > w.delta / 2.0 {
        return Err(Error::Precondition(format!("epsilon {eps} exceeds delta/2 = {}", w.delta / 2.0)));
    }
    if samples < 2 {
        return Err(Error::Precondition("need at least two samples per probe".into()));
    }
    let mut out = Vec::with_capacity(probes.len());
    for (i, x) in probes.iter().enumerate() {
        if x.len() != params.n {
            return Err(Error::Dimension { expected: params.n, found: x.len() });
        }
        let r = dist(x, &w.z);
        if r - w.delta <= eps || w.outer_radius - r <= eps {
            return Err(Error::Precondition(format!(
                "probe at |x - z| = {r} is within epsilon of the annulus edges [{}, {}]",
                w.delta, w.outer_radius
            )));
        }
        let w0 = w.eval(x);
        let mut plus = x.clone();
        let mut minus = x.clone();
        let (worst, _) = quad.directions.maximize(quad.refine_steps, |sigma| {
            for d in 0..x.len() {
                plus[d] = x[d] + eps * sigma[d];
                minus[d] = x[d] - eps * sigma[d];
            }
            0.5 * (w.eval(&plus) + w.eval(&minus)) - w0
        });
        let ball = quad.ball.average(x, eps, |y| w.eval(y) - w0);

        let grad = w.gradient(x);
        let mut rng = CounterRng::at(seed, i as u64, 0);
        let mut y = vec![0.0; x.len()];
        let (mut mean, mut m2) = (0.0, 0.0);
        for k in 0..samples {
            sample_in_ball(&mut rng, x, eps, &mut y);
            let linear: f64 = grad.iter().zip(y.iter().zip(x)).map(|(g, (a, b))| g * (a - b)).sum();
            let d = w.eval(&y) - w0 - linear;
            let delta = d - mean;
            mean += delta / (k + 1) as f64;
            m2 += delta * (d - mean);
        }
        let sd = (m2 / (samples - 1) as f64).sqrt();
        let std_error = params.beta * sd / (samples as f64).sqrt();
        out.push(BarrierProbe {
            x: x.clone(),
            radius: r,
            worst_midpoint_increment: worst,
            increment_quadrature: params.alpha * worst + params.beta * ball,
            increment_monte_carlo: params.alpha * worst + params.beta * mean,
            std_error,
            confidence_radius: 1.96 * std_error,
        });
    }
    Ok(BarrierDriftReport { threshold: -eps * eps, samples_per_probe: samples, probes: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TimeScaling;
    use crate::operators::{mean_value_lhs, FiniteDifference};

    fn params(scaling: TimeScaling) -> GameParams {
        GameParams::new(2, 4.0, 0.1, scaling).unwrap()
    }

    #[test]
    fn residual_examples() {
        let g = params(TimeScaling::Standard);
        let q = ReferenceSolution::quadratic_time(vec![0.0, 0.0], &g);
        // u_t = 2/3, D_p u = 8, 12 * 2/3 - 8 = 0
        assert!((q.time_derivative(&[0.0, 0.0], 0.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!(pde_residual(&q, &[0.3, 0.1], 0.2, &g).unwrap().abs() < 1e-12);
        assert_eq!(pde_residual(&ReferenceSolution::constant(2, 3.0), &[0.3, 0.1], 0.2, &g).unwrap(), 0.0);
        let ce = ReferenceSolution::cosh_exp(&g);
        assert_eq!(ce, ReferenceSolution::CoshExp { dim: 2, kappa: 0.25 });
        assert!(pde_residual(&ce, &[0.7, -0.4], 0.3, &g).unwrap().abs() < 1e-12);
    }

    #[test]
    fn residual_vanishes_on_random_probes() {
        use rand::Rng;
        let mut rng = CounterRng::at(11, 0, 0);
        for scaling in [TimeScaling::Standard, TimeScaling::UnitCoefficient] {
            for n in 1..=3 {
                let g = GameParams::new(n, 3.5, 0.1, scaling).unwrap();
                let sols = [
                    ReferenceSolution::constant(n, 2.0),
                    ReferenceSolution::linear(vec![0.5; n], 1.0),
                    ReferenceSolution::quadratic_time(vec![0.1; n], &g),
                    ReferenceSolution::cosh_exp(&g),
                ];
                for _ in 0..100 {
                    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
                    let t = rng.random_range(0.0..1.0);
                    for s in &sols {
                        let r = pde_residual(s, &x, t, &g).unwrap();
                        assert!(r.abs() <= 1e-10 * (1.0 + s.value(&x, t).abs()), "{} {r}", s.id());
                    }
                }
            }
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let g = params(TimeScaling::Standard);
        let ce = ReferenceSolution::cosh_exp(&g);
        let fd = FiniteDifference::new(&ce, 2, 1e-3);
        let (x, t) = ([0.4, -0.2], 0.3);
        let diff = (fd.hessian(&x, t) - ce.hessian(&x, t)).abs().max();
        // central differences: O(h^2) with fourth derivatives of size ~1
        assert!(diff < 10.0 * 1e-6, "{diff}");
        assert!((fd.time_derivative(&x, t) - ce.time_derivative(&x, t)).abs() < 1e-8);
    }

    #[test]
    fn quadratic_time_is_an_exact_dpp_solution() {
        for scaling in [TimeScaling::Standard, TimeScaling::UnitCoefficient] {
            let g = params(scaling);
            let quad = MeanValueQuadrature::standard(2).unwrap();
            let q = ReferenceSolution::quadratic_time(vec![0.2, -0.1], &g);
            for (x, t) in [([0.0, 0.0], 0.5), ([0.5, -0.3], 0.1), ([-0.7, 0.6], 0.9)] {
                let lhs = mean_value_lhs(&q, &x, t, &g, &quad).unwrap();
                assert!((lhs - q.value(&x, t)).abs() < 1e-12, "{scaling:?}: {lhs} vs {}", q.value(&x, t));
            }
        }
    }

    #[test]
    fn unknown_reference_id_is_a_config_error() {
        let g = params(TimeScaling::Standard);
        assert!(matches!(ReferenceSolution::from_id("bessel", &g, None), Err(Error::Config(_))));
    }

    #[test]
    fn barrier_constants_for_n2_p4() {
        let g = params(TimeScaling::Standard);
        let w = BarrierFunction::new(vec![1.5, 0.0], 0.5, 2.5, &g).unwrap();
        assert!((w.a - 3.0).abs() < 1e-15);
        assert!((w.xi - 2.0).abs() < 1e-15);
        assert!((w.b - 3.0 * 2.5f64.powi(4)).abs() < 1e-10);
        for r in [0.45, 0.5, 0.8, 1.7, 2.5, 2.55] {
            let x = [1.5 + r, 0.0];
            let v = barrier_dominative(&w, &x, &g).unwrap();
            assert!((v + 24.0).abs() <= 1e-9 * 24.0, "r = {r}: {v}");
        }
        assert!(w.radial_value(0.5).abs() < 1e-10);
        assert!(w.radial_derivative(2.5).abs() < 1e-8);
        assert!(matches!(barrier_dominative(&w, &[1.5, 0.3], &g), Err(Error::OutOfCoverage(_))));
    }

    #[test]
    fn barrier_for_p_close_to_two() {
        let g = GameParams::new(2, 2.5, 0.1, TimeScaling::Standard).unwrap();
        let w = BarrierFunction::new(vec![0.0, 0.0], 0.4, 2.0, &g).unwrap();
        assert!((w.xi - 0.5).abs() < 1e-15);
        let a = 2.0 * 4.5 / 2.5;
        let v = barrier_dominative(&w, &[0.0, 1.0], &g).unwrap();
        assert!((v + 2.0 * a * 2.5).abs() <= 1e-9 * 2.0 * a * 2.5);
        assert!(BarrierFunction::new(vec![0.0], 0.4, 2.0, &GameParams::new(1, 2.5, 0.1, TimeScaling::Standard).unwrap()).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = params(TimeScaling::Standard);
        let w = BarrierFunction::new(vec![0.2, -0.1], 0.5, 2.5, &g).unwrap();
        let x = [1.1, 0.4];
        let grad = w.gradient(&x);
        let h = 1e-6;
        for d in 0..2 {
            let (mut a, mut b) = (x, x);
            a[d] += h;
            b[d] -= h;
            assert!(((w.eval(&a) - w.eval(&b)) / (2.0 * h) - grad[d]).abs() < 1e-6);
        }
    }

    #[test]
    fn barrier_is_radially_nondecreasing() {
        let g = params(TimeScaling::Standard);
        let w = BarrierFunction::new(vec![0.0, 0.0], 0.3, 3.0, &g).unwrap();
        let mut prev = w.radial_value(0.3);
        for i in 1..=1000 {
            let r = 0.3 + 2.7 * i as f64 / 1000.0;
            let v = w.radial_value(r);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn quadratic_only_drift_is_exact() {
        let g = GameParams::new(2, 4.0, 0.01, TimeScaling::Standard).unwrap();
        let w = BarrierFunction::new(vec![0.0, 0.0], 0.5, 2.5, &g).unwrap().quadratic_only();
        let quad = MeanValueQuadrature::standard(2).unwrap();
        let probes = vec![vec![0.75, 0.0], vec![0.0, 1.5]];
        let report = barrier_drift_check(&w, &g, &probes, 20_000, 3, &quad).unwrap();
        let exact = -w.a * g.step_second_moment();
        for p in &report.probes {
            assert!((p.increment_quadrature - exact).abs() < 1e-12 * w.a, "{} vs {exact}", p.increment_quadrature);
            assert!((p.increment_monte_carlo - exact).abs() < 4.0 * p.std_error + 1e-15);
        }
    }

    #[test]
    fn drift_check_preconditions() {
        let quad = MeanValueQuadrature::standard(2).unwrap();
        let g = GameParams::new(2, 4.0, 0.3, TimeScaling::Standard).unwrap();
        let w = BarrierFunction::new(vec![0.0, 0.0], 0.5, 2.5, &g).unwrap();
        assert!(matches!(barrier_drift_check(&w, &g, &[vec![1.0, 0.0]], 100, 0, &quad), Err(Error::Precondition(_))));
        let g = GameParams::new(2, 4.0, 0.01, TimeScaling::Standard).unwrap();
        assert!(matches!(barrier_drift_check(&w, &g, &[vec![0.505, 0.0]], 100, 0, &quad), Err(Error::Precondition(_))));
    }
}
