//! The dominative operator `D_p u = Delta u + (p - 2) lambda_max(D^2 u)` and
//! the asymptotic mean value formula it comes with.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::GameParams;
use crate::quadrature::{BallStencil, DirectionSet};

/// Scalar field on space-time.
pub trait Field {
    fn value(&self, x: &[f64], t: f64) -> f64;
}

impl<F: Field + ?Sized> Field for &F {
    fn value(&self, x: &[f64], t: f64) -> f64 {
        (**self).value(x, t)
    }
}

/// Adapter turning a closure into a [`Field`].
pub struct FnField<F>(pub F);

impl<F: Fn(&[f64], f64) -> f64> Field for FnField<F> {
    fn value(&self, x: &[f64], t: f64) -> f64 {
        (self.0)(x, t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    FiniteDifference { step: f64 },
}

/// A field with spatial derivatives up to order two and a time derivative.
pub trait SmoothField: Field {
    fn dim(&self) -> usize;
    fn gradient(&self, x: &[f64], t: f64) -> Vec<f64>;
    fn hessian(&self, x: &[f64], t: f64) -> DMatrix<f64>;
    fn time_derivative(&self, x: &[f64], t: f64) -> f64;

    fn provenance(&self) -> Provenance {
        Provenance::Analytic
    }
}

/// Central-difference derivatives of a plain field.
pub struct FiniteDifference<F> {
    pub field: F,
    pub dim: usize,
    pub step: f64,
}

impl<F: Field> FiniteDifference<F> {
    pub fn new(field: F, dim: usize, step: f64) -> Self {
        Self { field, dim, step }
    }

    /// Step `eps / 8`, small enough that the truncation error sits well
    /// below the `eps^2` terms being measured.
    pub fn for_epsilon(field: F, dim: usize, epsilon: f64) -> Self {
        Self::new(field, dim, epsilon / 8.0)
    }

    fn shifted(&self, x: &[f64], t: f64, moves: &[(usize, f64)]) -> f64 {
        let mut y = x.to_vec();
        for &(i, s) in moves {
            y[i] += s * self.step;
        }
        self.field.value(&y, t)
    }
}

impl<F: Field> Field for FiniteDifference<F> {
    fn value(&self, x: &[f64], t: f64) -> f64 {
        self.field.value(x, t)
    }
}

impl<F: Field> SmoothField for FiniteDifference<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn gradient(&self, x: &[f64], t: f64) -> Vec<f64> {
        let h = self.step;
        (0..self.dim)
            .map(|i| (self.shifted(x, t, &[(i, 1.0)]) - self.shifted(x, t, &[(i, -1.0)])) / (2.0 * h))
            .collect()
    }

    fn hessian(&self, x: &[f64], t: f64) -> DMatrix<f64> {
        let h2 = self.step * self.step;
        let f0 = self.field.value(x, t);
        let mut hess = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            hess[(i, i)] = (self.shifted(x, t, &[(i, 1.0)]) - 2.0 * f0 + self.shifted(x, t, &[(i, -1.0)])) / h2;
            for j in 0..i {
                let v = (self.shifted(x, t, &[(i, 1.0), (j, 1.0)]) - self.shifted(x, t, &[(i, 1.0), (j, -1.0)])
                    - self.shifted(x, t, &[(i, -1.0), (j, 1.0)])
                    + self.shifted(x, t, &[(i, -1.0), (j, -1.0)]))
                    / (4.0 * h2);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        hess
    }

    fn time_derivative(&self, x: &[f64], t: f64) -> f64 {
        let h = self.step;
        (self.field.value(x, t + h) - self.field.value(x, t - h)) / (2.0 * h)
    }

    fn provenance(&self) -> Provenance {
        Provenance::FiniteDifference { step: self.step }
    }
}

fn check_matrix(h: &DMatrix<f64>) -> Result<()> {
    if h.nrows() != h.ncols() || h.nrows() == 0 {
        return Err(Error::Dimension { expected: h.nrows(), found: h.ncols() });
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix entry".into()));
    }
    Ok(())
}

/// Largest eigenvalue of the symmetric part of `h`, by cyclic Jacobi rotations.
pub fn lambda_max(h: &DMatrix<f64>) -> Result<f64> {
    check_matrix(h)?;
    let n = h.nrows();
    let mut a = (h + h.transpose()) * 0.5;
    if n == 1 {
        return Ok(a[(0, 0)]);
    }
    let frob = a.norm();
    if frob == 0.0 {
        return Ok(0.0);
    }
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-12 * frob {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                a[(p, p)] -= t * apq;
                a[(q, q)] += t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[(r, p)];
                    let arq = a[(r, q)];
                    a[(r, p)] = c * arp - s * arq;
                    a[(p, r)] = a[(r, p)];
                    a[(r, q)] = s * arp + c * arq;
                    a[(q, r)] = a[(r, q)];
                }
            }
        }
    }
    Ok((0..n).map(|i| a[(i, i)]).fold(f64::NEG_INFINITY, f64::max))
}

/// `trace(H) + (p - 2) lambda_max(H)`.
pub fn dominative(h: &DMatrix<f64>, params: &GameParams) -> Result<f64> {
    let lam = lambda_max(h)?;
    Ok(h.trace() + (params.p - 2.0) * lam)
}

/// Discretisation of the ball average and the supremum over directions.
#[derive(Clone, Debug)]
pub struct MeanValueQuadrature {
    pub ball: BallStencil,
    pub directions: DirectionSet,
    pub refine_steps: usize,
}

impl MeanValueQuadrature {
    /// 21 lattice points across the ball diameter; 64 angles refined by 20
    /// golden-section steps in 2-D; a 256-point Fibonacci sphere in 3-D.
    pub fn standard(dim: usize) -> Result<Self> {
        let count = match dim {
            2 => 64,
            3 => 256,
            _ => 1,
        };
        Ok(Self {
            ball: BallStencil::new(dim, 10.0)?,
            directions: DirectionSet::angular(dim, count)?,
            refine_steps: if dim == 2 { 20 } else { 0 },
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanValueReport {
    pub epsilon: f64,
    pub lhs: f64,
    pub predicted: f64,
    pub residual: f64,
}

/// `beta * (ball average of v(., t - dt)) + alpha * sup_sigma midpoint`.
pub fn mean_value_lhs<V: Field + ?Sized>(
    v: &V,
    x: &[f64],
    t: f64,
    params: &GameParams,
    quad: &MeanValueQuadrature,
) -> Result<f64> {
    if x.len() != params.n || quad.ball.dim() != params.n || quad.directions.dim() != params.n {
        return Err(Error::Dimension { expected: params.n, found: x.len() });
    }
    let eps = params.epsilon;
    let s = t - params.time_step();
    let ball = quad.ball.average(x, eps, |y| v.value(y, s));
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    let (sup, _) = quad.directions.maximize(quad.refine_steps, |sigma| {
        for d in 0..x.len() {
            plus[d] = x[d] + eps * sigma[d];
            minus[d] = x[d] - eps * sigma[d];
        }
        0.5 * (v.value(&plus, s) + v.value(&minus, s))
    });
    let lhs = params.beta * ball + params.alpha * sup;
    if !lhs.is_finite() {
        return Err(Error::NonFinite(format!("mean value expression at {x:?}, t = {t}")));
    }
    Ok(lhs)
}

/// Compares the mean value expression with its second-order expansion
/// `v + eps^2/(2(n+p)) D_p v - dt v_t`.
pub fn mean_value_residual<V: SmoothField + ?Sized>(
    v: &V,
    x: &[f64],
    t: f64,
    params: &GameParams,
    quad: &MeanValueQuadrature,
) -> Result<MeanValueReport> {
    let lhs = mean_value_lhs(v, x, t, params, quad)?;
    let eps = params.epsilon;
    let nf = params.n as f64;
    let dp = dominative(&v.hessian(x, t), params)?;
    let predicted = v.value(x, t) + eps * eps / (2.0 * (nf + params.p)) * dp - params.time_step() * v.time_derivative(x, t);
    Ok(MeanValueReport { epsilon: eps, lhs, predicted, residual: lhs - predicted })
}
