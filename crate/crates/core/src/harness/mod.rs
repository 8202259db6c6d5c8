//! Experiment drivers shared by the command-line tool and the acceptance
//! suite. Each `run_*` function reads its section of a [`Config`] and
//! returns a report that knows whether its checks passed and how to render
//! itself as CSV.

pub mod config;
pub mod output;

use std::time::Instant;

use serde::Serialize;

use crate::dpp::{solve_dpp, DppResidualReport, GridConfig, ValueGrid};
use crate::error::{Error, Result};
use crate::game::{estimate_value, sample_steps, step_moments, Game, GreedyStrategy, StepMoments, StepSample, Strategy, ValueEstimate};
use crate::model::{GameParams, PayoffField, SpaceTimeDomain};
use crate::operators::{mean_value_residual, Field, MeanValueQuadrature, SmoothField};
use crate::reference::{barrier_dominative, barrier_drift_check, pde_residual, BarrierDriftReport, BarrierFunction, ReferenceSolution};
use crate::rng::{mix64, sample_unit_vector, CounterRng};

pub use config::{Config, StrategyConfig};
pub use output::{fmt_e12, json_text, Cell, Csv, RunManifest};

/// Errors at or below this level count as exact reproduction.
pub const EXACT_FLOOR: f64 = 1e-12;

/// Allowed growth between consecutive levels of a study.
pub const NOISE_FACTOR: f64 = 1.2;

fn split_probe(probe: &[f64], n: usize) -> Result<(&[f64], f64)> {
    if probe.len() != n + 1 {
        return Err(Error::Dimension { expected: n + 1, found: probe.len() });
    }
    Ok((&probe[..n], probe[n]))
}

fn axis_header(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|d| format!("{prefix}{d}")).collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() || ys.iter().any(|&y| !(y > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `ys[i+1] <= factor * ys[i]`, treating values below the exact floor as equal.
pub fn decreasing_within(ys: &[f64], factor: f64) -> bool {
    ys.windows(2).all(|w| w[1] <= factor * w[0] || w[1] <= EXACT_FLOOR)
}

// ---------------------------------------------------------------- solve

#[derive(Clone, Debug, Serialize)]
pub struct SolveSummary {
    pub params: GameParams,
    pub grid: GridConfig,
    pub nodes: usize,
    pub levels: i64,
    pub residual: DppResidualReport,
    pub value_range: (f64, f64),
    pub data_range: (f64, f64),
}

impl SolveSummary {
    /// Self-consistency to `1e-10` and the discrete maximum principle.
    pub fn passed(&self) -> bool {
        self.residual.max_abs_residual <= 1e-10
            && self.value_range.0 >= self.data_range.0 - 1e-10
            && self.value_range.1 <= self.data_range.1 + 1e-10
    }
}

pub fn run_solve(config: &Config) -> Result<(ValueGrid, SolveSummary)> {
    let params = config.game_params()?;
    let domain = config.space_time()?;
    let payoff = config.payoff_field(&params)?;
    let grid_config = config.grid.build(&params);
    let grid = solve_dpp(&domain, &payoff, &params, &grid_config)?;
    let summary = SolveSummary {
        params,
        grid: grid_config,
        nodes: grid.node_count(),
        levels: grid.top_level() + 2,
        residual: grid.residual(),
        value_range: grid.value_range(),
        data_range: grid.data_range(),
    };
    Ok((grid, summary))
}

// ---------------------------------------------------------------- simulate

#[derive(Clone, Debug, Serialize)]
pub struct SimulationSummary {
    pub strategy: String,
    pub start: Vec<f64>,
    pub estimate: ValueEstimate,
    pub max_tau: usize,
    pub stopping_bound: f64,
    pub tau_violations: usize,
}

impl SimulationSummary {
    pub fn passed(&self) -> bool {
        self.tau_violations == 0
    }
}

fn default_start(domain: &SpaceTimeDomain) -> Vec<f64> {
    let (lo, hi) = domain.shape.bounding_box();
    let mut start: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    start.push(domain.horizon);
    start
}

/// Plays `simulate.samples` games from `simulate.start` and returns the
/// summary together with the per-trace CSV.
pub fn run_simulate(config: &Config) -> Result<(SimulationSummary, String)> {
    let params = config.game_params()?;
    let domain = config.space_time()?;
    let payoff = config.payoff_field(&params)?;
    let section = config.section(&config.simulate, "simulate")?;
    let start = section.start.clone().unwrap_or_else(|| default_start(&domain));
    let (x0, t0) = split_probe(&start, params.n)?;
    let game = Game::new(params.clone(), domain.clone())?;
    let grid;
    let simple = section.strategy.build_simple(params.n)?;
    let strategy: &dyn Strategy = match &simple {
        Some(s) => s.as_ref(),
        None => {
            grid = solve_dpp(&domain, &payoff, &params, &config.grid.build(&params))?;
            &GreedyStrategy::new(&grid)
        }
    };
    let (estimate, traces) =
        estimate_value(&game, x0, t0, strategy, &payoff, section.samples, config.seed, config.grid.execution)?;
    let bound = game.stopping_bound();
    let summary = SimulationSummary {
        strategy: strategy.name(),
        start: start.clone(),
        estimate,
        max_tau: traces.iter().map(|t| t.tau).max().unwrap_or(0),
        stopping_bound: bound,
        tau_violations: traces.iter().filter(|t| t.tau as f64 > bound + 1e-9).count(),
    };
    Ok((summary, output::traces_csv(&traces)))
}

#[derive(Clone, Debug, Serialize)]
pub struct StepMomentsReport {
    pub moments: StepMoments,
    pub expected_random_fraction: f64,
    pub expected_square: f64,
    /// Mean displacement and squared displacement within 4 standard errors.
    pub mean_ok: bool,
    pub square_ok: bool,
}

impl StepMomentsReport {
    pub fn passed(&self) -> bool {
        self.mean_ok && self.square_ok
    }
}

/// One-round statistics from the simulate start with direction `e_1`.
pub fn run_step_moments(config: &Config) -> Result<(StepMomentsReport, Vec<StepSample>)> {
    let params = config.game_params()?;
    let domain = config.space_time()?;
    let section = config.section(&config.simulate, "simulate")?;
    let start = section.start.clone().unwrap_or_else(|| default_start(&domain));
    let (x0, t0) = split_probe(&start, params.n)?;
    let mut sigma = vec![0.0; params.n];
    sigma[0] = 1.0;
    let samples = sample_steps(x0, t0, &sigma, &params, section.samples, config.seed, config.grid.execution)?;
    let moments = step_moments(&samples)?;
    let expected_square = params.step_second_moment();
    let mean_ok = moments.mean_displacement.iter().zip(&moments.mean_std_error).all(|(m, se)| m.abs() <= 4.0 * se);
    let square_ok = (moments.mean_square - expected_square).abs() <= 4.0 * moments.square_std_error;
    Ok((StepMomentsReport { moments, expected_random_fraction: params.beta, expected_square, mean_ok, square_ok }, samples))
}

// ---------------------------------------------------------------- convergence

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceLevel {
    pub epsilon: f64,
    pub h: f64,
    pub sup_error: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceStudy {
    pub reference: String,
    pub probes: Vec<Vec<f64>>,
    pub levels: Vec<ConvergenceLevel>,
    /// Largest PDE residual of the reference over the probes.
    pub reference_residual: f64,
    /// Empirical order in `eps`; absent when every error is below the exact floor.
    pub rate: Option<f64>,
    pub exact: bool,
    pub monotone: bool,
}

impl ConvergenceStudy {
    pub fn passed(&self) -> bool {
        self.exact || (self.monotone && self.rate.is_some_and(|r| r > 0.0))
    }

    pub fn errors(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.sup_error).collect()
    }

    /// `epsilon,h,sup_error,seconds`.
    pub fn csv(&self) -> String {
        let mut csv = Csv::new(&["epsilon", "h", "sup_error", "seconds"]);
        for l in &self.levels {
            csv.row(&[Cell::Num(l.epsilon), Cell::Num(l.h), Cell::Num(l.sup_error), Cell::Num(l.seconds)]);
        }
        csv.finish()
    }
}

/// Solves with the reference as boundary data for each `eps` and records
/// the sup error over the probes.
pub fn run_convergence(config: &Config) -> Result<ConvergenceStudy> {
    let base = config.game_params()?;
    let domain = config.space_time()?;
    let section = config.section(&config.convergence, "convergence")?;
    let eps = &section.epsilons;
    if eps.len() < 2 || eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config("convergence epsilons must be strictly decreasing, at least two".into()));
    }
    let reference = ReferenceSolution::from_id(&section.reference, &base, section.center.clone())?;
    let max_eps = eps[0];
    let mut reference_residual = 0.0f64;
    for probe in &section.probes {
        let (x, t) = split_probe(probe, base.n)?;
        if !(domain.interior_contains(x, t) && domain.dist_to_parabolic_boundary(x, t) > max_eps) {
            return Err(Error::Precondition(format!(
                "probe {probe:?} is within {max_eps} of the parabolic boundary"
            )));
        }
        reference_residual = reference_residual.max(pde_residual(&reference, x, t, &base)?.abs());
    }
    if !(reference_residual <= 1e-10) {
        return Err(Error::Precondition(format!(
            "reference '{}' fails the PDE check (residual {reference_residual:e})",
            section.reference
        )));
    }
    let payoff = PayoffField::Reference(reference.clone());
    let mut levels = Vec::with_capacity(eps.len());
    for &e in eps {
        let params = base.with_epsilon(e)?;
        let grid_config = config.grid.build(&params);
        let start = Instant::now();
        let grid = solve_dpp(&domain, &payoff, &params, &grid_config)?;
        let mut sup_error = 0.0f64;
        for probe in &section.probes {
            let (x, t) = split_probe(probe, base.n)?;
            sup_error = sup_error.max((grid.value_at(x, t)? - reference.value(x, t)).abs());
        }
        levels.push(ConvergenceLevel { epsilon: e, h: grid_config.h, sup_error, seconds: start.elapsed().as_secs_f64() });
    }
    let errors: Vec<f64> = levels.iter().map(|l| l.sup_error).collect();
    let exact = errors.iter().all(|&v| v <= EXACT_FLOOR);
    let rate = if exact { None } else { log_log_slope(eps, &errors) };
    Ok(ConvergenceStudy {
        reference: section.reference.clone(),
        probes: section.probes.clone(),
        monotone: decreasing_within(&errors, NOISE_FACTOR),
        levels,
        reference_residual,
        rate,
        exact,
    })
}


// ---------------------------------------------------------------- game vs dpp

#[derive(Clone, Debug, Serialize)]
pub struct AlternativeCheck {
    pub strategy: String,
    pub mean: f64,
    pub std_error: f64,
    pub confidence_radius: f64,
    /// `mean <= grid_value + confidence_radius`.
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeComparison {
    pub x: Vec<f64>,
    pub t: f64,
    pub grid_value: f64,
    pub greedy: ValueEstimate,
    pub discrepancy: f64,
    /// `confidence_radius + tolerance`.
    pub bound: f64,
    pub pass: bool,
    pub max_tau: usize,
    pub alternative: Option<AlternativeCheck>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GameVsDppReport {
    pub samples: usize,
    pub tolerance: f64,
    pub stopping_bound: f64,
    pub tau_violations: usize,
    pub max_tau: usize,
    /// Largest `|mean - grid| / std_error` (zero when both agree exactly).
    pub max_standardized: f64,
    pub probes: Vec<ProbeComparison>,
}

impl GameVsDppReport {
    pub fn greedy_passed(&self) -> bool {
        self.probes.iter().all(|p| p.pass)
    }

    pub fn alternative_passed(&self) -> bool {
        self.probes.iter().all(|p| p.alternative.as_ref().is_none_or(|a| a.pass))
    }

    pub fn passed(&self) -> bool {
        self.greedy_passed() && self.alternative_passed() && self.tau_violations == 0
    }

    pub fn csv(&self) -> String {
        let n = self.probes.first().map_or(0, |p| p.x.len());
        let names = axis_header("x", n);
        let mut header = vec!["probe"];
        header.extend(names.iter().map(String::as_str));
        header.extend([
            "t",
            "grid_value",
            "mean",
            "std_error",
            "confidence_radius",
            "discrepancy",
            "bound",
            "pass",
            "alt_mean",
            "alt_std_error",
            "alt_pass",
        ]);
        let mut csv = Csv::new(&header);
        for (i, p) in self.probes.iter().enumerate() {
            let mut cells = vec![Cell::Int(i as i64)];
            cells.extend(p.x.iter().map(|&v| Cell::Num(v)));
            cells.extend([
                Cell::Num(p.t),
                Cell::Num(p.grid_value),
                Cell::Num(p.greedy.mean),
                Cell::Num(p.greedy.std_error),
                Cell::Num(p.greedy.confidence_radius),
                Cell::Num(p.discrepancy),
                Cell::Num(p.bound),
                Cell::Int(p.pass as i64),
            ]);
            match &p.alternative {
                Some(a) => cells.extend([Cell::Num(a.mean), Cell::Num(a.std_error), Cell::Int(a.pass as i64)]),
                None => cells.extend([Cell::Text(""), Cell::Text(""), Cell::Text("")]),
            }
            csv.row(&cells);
        }
        csv.finish()
    }
}

/// Greedy play against the solved grid at each probe, plus an optional
/// one-sided check of a non-greedy strategy.
pub fn run_game_vs_dpp(config: &Config) -> Result<GameVsDppReport> {
    let params = config.game_params()?;
    let domain = config.space_time()?;
    let payoff = config.payoff_field(&params)?;
    let section = config.section(&config.compare, "compare")?;
    if section.samples < 100 {
        return Err(Error::Precondition(format!("need at least 100 samples, got {}", section.samples)));
    }
    let grid_config = config.grid.build(&params);
    let grid = solve_dpp(&domain, &payoff, &params, &grid_config)?;
    let game = Game::new(params.clone(), domain)?;
    let greedy = GreedyStrategy::new(&grid);
    let alternative = match &section.alternative {
        Some(StrategyConfig::Greedy) => {
            return Err(Error::Config("the alternative strategy must not be greedy".into()));
        }
        Some(s) => s.build_simple(params.n)?,
        None => None,
    };
    let tolerance = section.tolerance.unwrap_or(5.0 * grid_config.h * grid_config.h);
    let bound = game.stopping_bound();
    let exec = config.grid.execution;
    let mut report = GameVsDppReport {
        samples: section.samples,
        tolerance,
        stopping_bound: bound,
        tau_violations: 0,
        max_tau: 0,
        max_standardized: 0.0,
        probes: Vec::with_capacity(section.probes.len()),
    };
    for (i, probe) in section.probes.iter().enumerate() {
        let (x, t) = split_probe(probe, params.n)?;
        let seed = mix64(config.seed ^ mix64(i as u64 + 1));
        let grid_value = grid.value_at(x, t)?;
        let roundoff = EXACT_FLOOR * (1.0 + grid_value.abs());
        let (est, traces) = estimate_value(&game, x, t, &greedy, &payoff, section.samples, seed, exec)?;
        let discrepancy = (est.mean - grid_value).abs();
        let max_tau = traces.iter().map(|tr| tr.tau).max().unwrap_or(0);
        report.tau_violations += traces.iter().filter(|tr| tr.tau as f64 > bound + 1e-9).count();
        let alt = match &alternative {
            Some(s) => {
                let (a, tr) = estimate_value(&game, x, t, s.as_ref(), &payoff, section.samples, seed, exec)?;
                report.tau_violations += tr.iter().filter(|tr| tr.tau as f64 > bound + 1e-9).count();
                report.max_tau = report.max_tau.max(tr.iter().map(|tr| tr.tau).max().unwrap_or(0));
                Some(AlternativeCheck {
                    strategy: s.name(),
                    mean: a.mean,
                    std_error: a.std_error,
                    confidence_radius: a.confidence_radius,
                    pass: a.mean <= grid_value + a.confidence_radius + roundoff,
                })
            }
            None => None,
        };
        let standardized = if est.std_error > 0.0 {
            discrepancy / est.std_error
        } else if discrepancy > roundoff {
            f64::INFINITY
        } else {
            0.0
        };
        report.max_standardized = report.max_standardized.max(standardized);
        report.max_tau = report.max_tau.max(max_tau);
        report.probes.push(ProbeComparison {
            x: x.to_vec(),
            t,
            grid_value,
            bound: est.confidence_radius + tolerance,
            pass: discrepancy <= est.confidence_radius + tolerance + roundoff,
            greedy: est,
            discrepancy,
            max_tau,
            alternative: alt,
        });
    }
    Ok(report)
}

// ---------------------------------------------------------------- amvf

#[derive(Clone, Debug, Serialize)]
pub struct AmvfRow {
    pub epsilon: f64,
    pub point: usize,
    pub x: Vec<f64>,
    pub t: f64,
    pub value: f64,
    pub lhs: f64,
    pub predicted: f64,
    pub residual: f64,
    /// `|residual| / eps^2`.
    pub scaled: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AmvfReport {
    pub function: String,
    pub rows: Vec<AmvfRow>,
    /// Largest scaled residual per `eps`, in the configured order.
    pub scaled_by_epsilon: Vec<(f64, f64)>,
    pub decreasing: bool,
}

impl AmvfReport {
    pub fn passed(&self) -> bool {
        self.decreasing
    }

    pub fn csv(&self) -> String {
        let n = self.rows.first().map_or(0, |r| r.x.len());
        let names = axis_header("x", n);
        let mut header = vec!["epsilon", "point"];
        header.extend(names.iter().map(String::as_str));
        header.extend(["t", "value", "lhs", "predicted", "residual", "scaled_residual"]);
        let mut csv = Csv::new(&header);
        for r in &self.rows {
            let mut cells = vec![Cell::Num(r.epsilon), Cell::Int(r.point as i64)];
            cells.extend(r.x.iter().map(|&v| Cell::Num(v)));
            cells.extend([
                Cell::Num(r.t),
                Cell::Num(r.value),
                Cell::Num(r.lhs),
                Cell::Num(r.predicted),
                Cell::Num(r.residual),
                Cell::Num(r.scaled),
            ]);
            csv.row(&cells);
        }
        csv.finish()
    }
}

/// Evaluates the mean value expression against its expansion for each
/// `eps` and point.
pub fn run_amvf(config: &Config) -> Result<AmvfReport> {
    let base = config.game_params()?;
    let section = config.section(&config.amvf, "amvf")?;
    let function = match section.function.as_str() {
        "square" => ReferenceSolution::QuadraticTime { center: vec![0.0; base.n], rate: 0.0 },
        id => ReferenceSolution::from_id(id, &base, None)?,
    };
    if section.epsilons.is_empty() {
        return Err(Error::Config("amvf needs at least one epsilon".into()));
    }
    let quad = MeanValueQuadrature::standard(base.n)?;
    let mut rows = Vec::new();
    let mut scaled_by_epsilon = Vec::new();
    for &e in &section.epsilons {
        let params = base.with_epsilon(e)?;
        let mut worst = 0.0f64;
        for (i, point) in section.points.iter().enumerate() {
            let (x, t) = split_probe(point, base.n)?;
            let r = mean_value_residual(&function, x, t, &params, &quad)?;
            let scaled = r.residual.abs() / (e * e);
            worst = worst.max(scaled);
            rows.push(AmvfRow {
                epsilon: e,
                point: i,
                x: x.to_vec(),
                t,
                value: function.value(x, t),
                lhs: r.lhs,
                predicted: r.predicted,
                residual: r.residual,
                scaled,
            });
        }
        scaled_by_epsilon.push((e, worst));
    }
    let scaled: Vec<f64> = scaled_by_epsilon.iter().map(|p| p.1).collect();
    Ok(AmvfReport {
        function: section.function.clone(),
        rows,
        decreasing: decreasing_within(&scaled, NOISE_FACTOR),
        scaled_by_epsilon,
    })
}

// ---------------------------------------------------------------- barrier

#[derive(Clone, Debug, Serialize)]
pub struct BarrierReport {
    pub barrier: BarrierFunction,
    pub expected_dominative: f64,
    pub identity_probes: usize,
    pub max_relative_dominative_error: f64,
    pub inner_value: f64,
    pub outer_derivative: f64,
    pub drift: BarrierDriftReport,
}

impl BarrierReport {
    pub fn identities_hold(&self) -> bool {
        self.max_relative_dominative_error <= 1e-9 && self.inner_value.abs() <= 1e-8 && self.outer_derivative.abs() <= 1e-8
    }

    pub fn passed(&self) -> bool {
        self.identities_hold() && self.drift.all_pass()
    }

    pub fn csv(&self) -> String {
        let n = self.barrier.z.len();
        let names = axis_header("x", n);
        let mut header = vec!["probe"];
        header.extend(names.iter().map(String::as_str));
        header.extend([
            "radius",
            "worst_midpoint_increment",
            "increment_quadrature",
            "increment_monte_carlo",
            "confidence_radius",
            "threshold",
            "pass",
        ]);
        let mut csv = Csv::new(&header);
        for (i, p) in self.drift.probes.iter().enumerate() {
            let mut cells = vec![Cell::Int(i as i64)];
            cells.extend(p.x.iter().map(|&v| Cell::Num(v)));
            cells.extend([
                Cell::Num(p.radius),
                Cell::Num(p.worst_midpoint_increment),
                Cell::Num(p.increment_quadrature),
                Cell::Num(p.increment_monte_carlo),
                Cell::Num(p.confidence_radius),
                Cell::Num(self.drift.threshold),
                Cell::Int((p.increment_monte_carlo <= self.drift.threshold + p.confidence_radius) as i64),
            ]);
            csv.row(&cells);
        }
        csv.finish()
    }
}

/// Barrier identities at random annulus points and the one-step drift at
/// the configured probes.
pub fn run_barrier(config: &Config) -> Result<BarrierReport> {
    let params = config.game_params()?;
    let section = config.section(&config.barrier, "barrier")?;
    let w = BarrierFunction::new(section.z.clone(), section.delta, section.outer_radius, &params)?;
    let nf = params.n as f64;
    let expected = -2.0 * w.a * (nf + params.p - 2.0);
    let mut max_rel = 0.0f64;
    let mut dir = vec![0.0; params.n];
    for i in 0..section.identity_probes {
        let mut rng = CounterRng::at(mix64(config.seed ^ 0xb5ad_4ece_da1c_e2a9), i as u64, 0);
        sample_unit_vector(&mut rng, &mut dir);
        let r = w.delta + (w.outer_radius - w.delta) * rng.next_unit();
        let x: Vec<f64> = w.z.iter().zip(&dir).map(|(c, d)| c + r * d).collect();
        let v = barrier_dominative(&w, &x, &params)?;
        max_rel = max_rel.max(((v - expected) / expected).abs());
    }
    let probes = match &section.probes {
        Some(p) => p.clone(),
        None => [1.5 * w.delta, 0.5 * (w.delta + w.outer_radius)]
            .iter()
            .map(|&r| {
                let mut x = w.z.clone();
                x[0] += r;
                x
            })
            .collect(),
    };
    let quad = MeanValueQuadrature::standard(params.n)?;
    let drift = barrier_drift_check(&w, &params, &probes, section.samples, config.seed, &quad)?;
    Ok(BarrierReport {
        expected_dominative: expected,
        identity_probes: section.identity_probes,
        max_relative_dominative_error: max_rel,
        inner_value: w.radial_value(w.delta),
        outer_derivative: w.radial_derivative(w.outer_radius),
        barrier: w,
        drift,
    })
}

/// Runs a smooth reference through the PDE check at the given probes.
pub fn max_pde_residual<S: SmoothField + ?Sized>(sol: &S, probes: &[Vec<f64>], params: &GameParams) -> Result<f64> {
    let mut worst = 0.0f64;
    for probe in probes {
        let (x, t) = split_probe(probe, params.n)?;
        worst = worst.max(pde_residual(sol, x, t, params)?.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(extra: &str) -> Config {
        Config::from_json(&format!(
            r#"{{
                "n": 2, "p": 4.0, "epsilon": 0.2,
                "domain": {{ "shape": "ball", "center": [0.0, 0.0], "radius": 0.8 }},
                "T": 0.4,
                "payoff": {{ "kind": "from_reference", "id": "cosh_exp" }},
                "grid": {{ "ratio": 4.0 }},
                "seed": 3
                {extra}
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn slope_of_a_power_law() {
        let xs = [0.2, 0.1, 0.05];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        assert!((log_log_slope(&xs, &ys).unwrap() - 1.5).abs() < 1e-12);
        assert!(log_log_slope(&xs, &[1.0, 0.0, 1.0]).is_none());
        assert!(decreasing_within(&[1.0, 1.1, 0.5], 1.2));
        assert!(!decreasing_within(&[1.0, 1.3], 1.2));
    }

    #[test]
    fn solve_summary_passes() {
        let (_, summary) = run_solve(&config("")).unwrap();
        assert!(summary.passed());
    }

    #[test]
    fn constant_reference_is_exact() {
        let cfg = config(
            r#", "convergence": { "reference": "constant", "epsilons": [0.2, 0.1, 0.05], "probes": [[0.0, 0.0, 0.3]] }"#,
        );
        let study = run_convergence(&cfg).unwrap();
        assert!(study.exact && study.rate.is_none() && study.passed());
        assert_eq!(study.csv().lines().count(), 4);
    }

    #[test]
    fn convergence_rejects_boundary_probes() {
        let cfg = config(
            r#", "convergence": { "reference": "cosh_exp", "epsilons": [0.2, 0.1], "probes": [[0.7, 0.0, 0.3]] }"#,
        );
        assert!(matches!(run_convergence(&cfg), Err(Error::Precondition(_))));
        let cfg = config(
            r#", "convergence": { "reference": "square", "epsilons": [0.2, 0.1], "probes": [[0.0, 0.0, 0.3]] }"#,
        );
        assert!(matches!(run_convergence(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn amvf_square_matches_the_increment() {
        let cfg = config(r#", "amvf": { "function": "square", "epsilons": [0.1], "points": [[0.0, 0.0, 0.2]] }"#);
        let report = run_amvf(&cfg).unwrap();
        let row = &report.rows[0];
        assert!((row.lhs - row.value - 0.01 * 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn constant_payoff_game_matches_exactly() {
        let mut cfg = config(r#", "compare": { "probes": [[0.1, 0.0, 0.4]], "samples": 200, "alternative": { "kind": "random" } }"#);
        cfg.payoff = Some(config::PayoffConfig::Constant { value: 2.0 });
        let report = run_game_vs_dpp(&cfg).unwrap();
        assert!(report.passed());
        assert!(report.probes[0].discrepancy <= 1e-12);
        assert_eq!(report.max_standardized, 0.0);
    }
}
