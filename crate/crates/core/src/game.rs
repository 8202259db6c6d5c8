//! Monte Carlo simulation of the controller's game.
//!
//! Each round a biased coin is tossed. With probability `beta` the token
//! moves to a uniform point of `B_eps(x)`. With probability `alpha/2` each
//! it moves to `x + eps sigma` or `x - eps sigma`, where `sigma` is the
//! controller's direction. Time drops by one step per round, and the game
//! stops on the first visit to the boundary strip, paying `F` there.

use serde::Serialize;

use crate::dpp::ValueGrid;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::model::{BoundaryStrip, GameParams, PayoffField, SpaceTimeDomain};
use crate::rng::{mix64, sample_in_ball, sample_unit_vector, CounterRng};

/// Keeps strategy randomness off the stream that drives the coin and the
/// ball moves, so different strategies see the same noise.
const STRATEGY_SALT: u64 = 0x5bd1_e995_9e37_79b9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    RandomMove,
    ControlledPlus,
    ControlledMinus,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::RandomMove => "random_move",
            Outcome::ControlledPlus => "controlled_plus",
            Outcome::ControlledMinus => "controlled_minus",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameState {
    pub x: Vec<f64>,
    pub t: f64,
}

/// One round from `(x, t)` with direction `sigma`.
pub fn step(x: &[f64], t: f64, sigma: &[f64], params: &GameParams, rng: &mut CounterRng) -> Result<(Vec<f64>, f64, Outcome)> {
    if sigma.len() != x.len() {
        return Err(Error::Dimension { expected: x.len(), found: sigma.len() });
    }
    let norm = sigma.iter().map(|s| s * s).sum::<f64>().sqrt();
    if !((norm - 1.0).abs() <= 1e-12) {
        return Err(Error::Precondition(format!("direction must be a unit vector, |sigma| = {norm}")));
    }
    let eps = params.epsilon;
    let coin = rng.next_unit();
    let mut next = x.to_vec();
    let outcome = if coin < params.beta {
        sample_in_ball(rng, x, eps, &mut next);
        Outcome::RandomMove
    } else if coin < params.beta + 0.5 * params.alpha {
        next.iter_mut().zip(sigma).for_each(|(v, s)| *v += eps * s);
        Outcome::ControlledPlus
    } else {
        next.iter_mut().zip(sigma).for_each(|(v, s)| *v -= eps * s);
        Outcome::ControlledMinus
    };
    Ok((next, t - params.time_step(), outcome))
}

/// Rule choosing the controller's direction from the history of states.
/// Built-in strategies only look at the last state.
pub trait Strategy: Sync {
    fn direction(&self, history: &[GameState], rng: &mut CounterRng) -> Result<Vec<f64>>;

    fn name(&self) -> String;

    /// Worst-case shortfall of the chosen midpoint against the true supremum,
    /// when the strategy is meant to be optimal.
    fn direction_gap(&self) -> Option<f64> {
        None
    }
}

#[derive(Clone, Debug)]
pub struct FixedDirection(Vec<f64>);

impl FixedDirection {
    pub fn new(direction: Vec<f64>) -> Result<Self> {
        let norm = direction.iter().map(|s| s * s).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Precondition("fixed direction must be a nonzero vector".into()));
        }
        Ok(Self(direction.into_iter().map(|s| s / norm).collect()))
    }
}

impl Strategy for FixedDirection {
    fn direction(&self, _history: &[GameState], _rng: &mut CounterRng) -> Result<Vec<f64>> {
        Ok(self.0.clone())
    }

    fn name(&self) -> String {
        "fixed".into()
    }
}

/// Fresh uniform direction every round.
#[derive(Clone, Copy, Debug)]
pub struct RandomDirection {
    pub dim: usize,
}

impl Strategy for RandomDirection {
    fn direction(&self, _history: &[GameState], rng: &mut CounterRng) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        sample_unit_vector(rng, &mut out);
        Ok(out)
    }

    fn name(&self) -> String {
        "random".into()
    }
}

/// Picks the direction of the solver's set with the best interpolated
/// midpoint one level down; ties go to the lowest index.
#[derive(Clone, Copy, Debug)]
pub struct GreedyStrategy<'a> {
    grid: &'a ValueGrid,
}

impl<'a> GreedyStrategy<'a> {
    pub fn new(grid: &'a ValueGrid) -> Self {
        Self { grid }
    }

    /// Index and unit vector of the chosen direction at `(x, t)`.
    pub fn choose(&self, x: &[f64], t: f64) -> Result<(usize, Vec<f64>)> {
        let eps = self.grid.params().epsilon;
        let s = t - self.grid.time_step();
        let mut plus = x.to_vec();
        let mut minus = x.to_vec();
        let mut best = f64::NEG_INFINITY;
        let mut best_idx = 0;
        for (i, sigma) in self.grid.directions().units().iter().enumerate() {
            for d in 0..x.len() {
                plus[d] = x[d] + eps * sigma[d];
                minus[d] = x[d] - eps * sigma[d];
            }
            let mid = 0.5 * (self.grid.value_at(&plus, s)? + self.grid.value_at(&minus, s)?);
            if i == 0 || mid > best + 1e-12 * (1.0 + best.abs()) {
                best = mid;
                best_idx = i;
            }
        }
        Ok((best_idx, self.grid.directions().units()[best_idx].clone()))
    }
}

impl Strategy for GreedyStrategy<'_> {
    fn direction(&self, history: &[GameState], _rng: &mut CounterRng) -> Result<Vec<f64>> {
        let state = history.last().ok_or_else(|| Error::Precondition("empty history".into()))?;
        Ok(self.choose(&state.x, state.t)?.1)
    }

    fn name(&self) -> String {
        "greedy".into()
    }

    fn direction_gap(&self) -> Option<f64> {
        Some(self.grid.directions().angular_gap())
    }
}

/// Wraps a closure of the current state.
pub struct FnStrategy<F> {
    name: String,
    rule: F,
}

impl<F: Fn(&[f64], f64) -> Vec<f64> + Sync> FnStrategy<F> {
    pub fn new(name: impl Into<String>, rule: F) -> Self {
        Self { name: name.into(), rule }
    }
}

impl<F: Fn(&[f64], f64) -> Vec<f64> + Sync> Strategy for FnStrategy<F> {
    fn direction(&self, history: &[GameState], _rng: &mut CounterRng) -> Result<Vec<f64>> {
        let state = history.last().ok_or_else(|| Error::Precondition("empty history".into()))?;
        Ok((self.rule)(&state.x, state.t))
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

/// A game instance: parameters, cylinder and stopping strip.
#[derive(Clone, Debug)]
pub struct Game {
    pub params: GameParams,
    pub domain: SpaceTimeDomain,
    pub strip: BoundaryStrip,
}

impl Game {
    pub fn new(params: GameParams, domain: SpaceTimeDomain) -> Result<Self> {
        domain.check_params(&params)?;
        let strip = BoundaryStrip::game(&domain, &params);
        Ok(Self { params, domain, strip })
    }

    /// `T / dt + 1`.
    pub fn stopping_bound(&self) -> f64 {
        self.domain.horizon / self.params.time_step() + 1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameTrace {
    pub states: Vec<GameState>,
    pub outcomes: Vec<Outcome>,
    pub directions: Vec<Vec<f64>>,
    pub tau: usize,
    pub exit: GameState,
    pub payoff: f64,
}

/// Plays one game. Trace `trace` of seed `seed` uses the streams
/// `(seed, trace, k)` for round `k`.
pub fn play(
    game: &Game,
    x0: &[f64],
    t0: f64,
    strategy: &dyn Strategy,
    payoff: &PayoffField,
    seed: u64,
    trace: u64,
) -> Result<GameTrace> {
    if x0.len() != game.params.n {
        return Err(Error::Dimension { expected: game.params.n, found: x0.len() });
    }
    if !game.domain.interior_contains(x0, t0) {
        return Err(Error::Precondition(format!("start ({x0:?}, {t0}) is not inside the cylinder")));
    }
    let dt = game.params.time_step();
    let strategy_seed = mix64(seed ^ STRATEGY_SALT);
    let mut states = vec![GameState { x: x0.to_vec(), t: t0 }];
    let mut outcomes = Vec::new();
    let mut directions = Vec::new();
    loop {
        let k = states.len() - 1;
        let current = &states[k];
        if game.strip.contains(&current.x, current.t) {
            break;
        }
        let mut srng = CounterRng::at(strategy_seed, trace, k as u64);
        let sigma = strategy.direction(&states, &mut srng)?;
        let mut rng = CounterRng::at(seed, trace, k as u64);
        let (x, _, outcome) = step(&current.x, current.t, &sigma, &game.params, &mut rng)?;
        let mut t = t0 - (k + 1) as f64 * dt;
        if t.abs() < 1e-9 * dt {
            t = 0.0;
        }
        states.push(GameState { x, t });
        outcomes.push(outcome);
        directions.push(sigma);
    }
    let tau = states.len() - 1;
    let exit = states[tau].clone();
    let payoff = payoff.eval(&exit.x, exit.t);
    Ok(GameTrace { states, outcomes, directions, tau, exit, payoff })
}

/// Plays traces `0..count` in parallel; the result is ordered by trace index.
pub fn run_traces(
    game: &Game,
    x0: &[f64],
    t0: f64,
    strategy: &dyn Strategy,
    payoff: &PayoffField,
    count: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<GameTrace>> {
    map_indexed(exec, count, |i| play(game, x0, t0, strategy, payoff, seed, i as u64)).into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub num_samples: usize,
    /// `1.96 * std_error`.
    pub confidence_radius: f64,
    pub direction_gap: Option<f64>,
}

impl ValueEstimate {
    /// Sample mean and standard error, accumulated in index order.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Precondition("need at least two samples".into()));
        }
        let (mut mean, mut m2) = (0.0, 0.0);
        for (k, &v) in samples.iter().enumerate() {
            let delta = v - mean;
            mean += delta / (k + 1) as f64;
            m2 += delta * (v - mean);
        }
        let n = samples.len() as f64;
        let std_error = (m2 / (n - 1.0)).max(0.0).sqrt() / n.sqrt();
        Ok(Self { mean, std_error, num_samples: samples.len(), confidence_radius: 1.96 * std_error, direction_gap: None })
    }
}

/// Monte Carlo estimate of the expected payoff under `strategy`, together
/// with the traces it was computed from.
pub fn estimate_value(
    game: &Game,
    x0: &[f64],
    t0: f64,
    strategy: &dyn Strategy,
    payoff: &PayoffField,
    num_samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<(ValueEstimate, Vec<GameTrace>)> {
    if num_samples < 100 {
        return Err(Error::Precondition(format!("need at least 100 samples, got {num_samples}")));
    }
    let traces = run_traces(game, x0, t0, strategy, payoff, num_samples, seed, exec)?;
    let payoffs: Vec<f64> = traces.iter().map(|t| t.payoff).collect();
    let mut estimate = ValueEstimate::from_samples(&payoffs)?;
    estimate.direction_gap = strategy.direction_gap();
    Ok((estimate, traces))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateDrift {
    pub x: Vec<f64>,
    pub t: f64,
    pub drift: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftReport {
    pub samples_per_state: usize,
    pub states: Vec<StateDrift>,
    pub max_drift: f64,
    pub min_drift: f64,
    /// Largest standard error over the tested states.
    pub max_std_error: f64,
}

impl DriftReport {
    /// Every drift is at most `tolerance + z * std_error`.
    pub fn is_supermartingale(&self, tolerance: f64, z: f64) -> bool {
        self.states.iter().all(|s| s.drift <= tolerance + z * s.std_error)
    }

    /// Every drift is at least `-tolerance - z * std_error`.
    pub fn is_submartingale(&self, tolerance: f64, z: f64) -> bool {
        self.states.iter().all(|s| s.drift >= -tolerance - z * s.std_error)
    }
}

/// Estimates `E[M(x_{k+1}, t_{k+1}) | x_k, t_k] - M(x_k, t_k)` at the states
/// visited by `traces` games, with `samples_per_state` one-step resamples
/// at each. The direction is the strategy's choice at that state.
#[allow(clippy::too_many_arguments)]
pub fn supermartingale_check<M: Fn(&[f64], f64) -> Result<f64> + Sync>(
    process: M,
    game: &Game,
    strategy: &dyn Strategy,
    x0: &[f64],
    t0: f64,
    traces: usize,
    samples_per_state: usize,
    seed: u64,
    exec: Execution,
) -> Result<DriftReport> {
    if samples_per_state < 2 {
        return Err(Error::Precondition("need at least two samples per state".into()));
    }
    let dummy = PayoffField::Constant(0.0);
    let played = run_traces(game, x0, t0, strategy, &dummy, traces, seed, exec)?;
    let mut visited = Vec::new();
    for (i, tr) in played.iter().enumerate() {
        for k in 0..tr.tau {
            visited.push((i, k));
        }
    }
    let resample_seed = mix64(seed ^ 0xd6e8_feb8_6659_fd93);
    let drifts: Vec<Result<StateDrift>> = map_indexed(exec, visited.len(), |v| {
        let (i, k) = visited[v];
        let tr = &played[i];
        let state = &tr.states[k];
        let sigma = &tr.directions[k];
        let base = process(&state.x, state.t)?;
        let mut samples = Vec::with_capacity(samples_per_state);
        for m in 0..samples_per_state {
            let mut rng = CounterRng::at(resample_seed, v as u64, m as u64);
            let (x, t, _) = step(&state.x, state.t, sigma, &game.params, &mut rng)?;
            samples.push(process(&x, t)? - base);
        }
        let est = ValueEstimate::from_samples(&samples)?;
        Ok(StateDrift { x: state.x.clone(), t: state.t, drift: est.mean, std_error: est.std_error })
    });
    let states = drifts.into_iter().collect::<Result<Vec<_>>>()?;
    let max_drift = states.iter().map(|s| s.drift).fold(f64::NEG_INFINITY, f64::max);
    let min_drift = states.iter().map(|s| s.drift).fold(f64::INFINITY, f64::min);
    let max_std_error = states.iter().map(|s| s.std_error).fold(0.0, f64::max);
    Ok(DriftReport { samples_per_state, states, max_drift, min_drift, max_std_error })
}

/// One-step displacement statistics from a fixed state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepMoments {
    pub samples: usize,
    pub random_fraction: f64,
    pub plus_fraction: f64,
    pub minus_fraction: f64,
    /// Mean displacement per coordinate and its standard errors.
    pub mean_displacement: Vec<f64>,
    pub mean_std_error: Vec<f64>,
    pub mean_square: f64,
    pub square_std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepSample {
    pub outcome: Outcome,
    pub displacement: Vec<f64>,
}

/// Draws `samples` single rounds from `x` with direction `sigma`; sample `i`
/// uses the stream `(seed, i, 0)`.
pub fn sample_steps(
    x: &[f64],
    t: f64,
    sigma: &[f64],
    params: &GameParams,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<StepSample>> {
    map_indexed(exec, samples, |i| {
        let mut rng = CounterRng::at(seed, i as u64, 0);
        let (y, _, outcome) = step(x, t, sigma, params, &mut rng)?;
        Ok(StepSample { outcome, displacement: y.iter().zip(x).map(|(a, b)| a - b).collect() })
    })
    .into_iter()
    .collect()
}

pub fn step_moments(samples: &[StepSample]) -> Result<StepMoments> {
    let count = samples.len();
    if count < 2 {
        return Err(Error::Precondition("need at least two step samples".into()));
    }
    let n = samples[0].displacement.len();
    let frac = |o: Outcome| samples.iter().filter(|s| s.outcome == o).count() as f64 / count as f64;
    let mut mean_displacement = Vec::with_capacity(n);
    let mut mean_std_error = Vec::with_capacity(n);
    for d in 0..n {
        let col: Vec<f64> = samples.iter().map(|s| s.displacement[d]).collect();
        let est = ValueEstimate::from_samples(&col)?;
        mean_displacement.push(est.mean);
        mean_std_error.push(est.std_error);
    }
    let sq: Vec<f64> = samples.iter().map(|s| s.displacement.iter().map(|v| v * v).sum()).collect();
    let est = ValueEstimate::from_samples(&sq)?;
    Ok(StepMoments {
        samples: count,
        random_fraction: frac(Outcome::RandomMove),
        plus_fraction: frac(Outcome::ControlledPlus),
        minus_fraction: frac(Outcome::ControlledMinus),
        mean_displacement,
        mean_std_error,
        mean_square: est.mean,
        square_std_error: est.std_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpp::{solve_dpp, GridConfig};
    use crate::model::{Shape, TimeScaling};
    use crate::reference::ReferenceSolution;

    fn disc_game(eps: f64, horizon: f64) -> Game {
        let params = GameParams::new(2, 4.0, eps, TimeScaling::Standard).unwrap();
        let domain = SpaceTimeDomain::new(Shape::Ball { center: vec![0.0, 0.0], radius: 1.0 }, horizon).unwrap();
        Game::new(params, domain).unwrap()
    }

    #[test]
    fn step_frequencies_and_moments() {
        let game = disc_game(0.1, 0.5);
        let samples = sample_steps(&[0.0, 0.0], 0.3, &[1.0, 0.0], &game.params, 100_000, 5, Execution::Parallel).unwrap();
        let m = step_moments(&samples).unwrap();
        let binom = |p: f64| 3.0 * (p * (1.0 - p) / 1e5).sqrt();
        assert!((m.random_fraction - 2.0 / 3.0).abs() < binom(2.0 / 3.0));
        assert!((m.plus_fraction - 1.0 / 6.0).abs() < binom(1.0 / 6.0));
        assert!((m.minus_fraction - 1.0 / 6.0).abs() < binom(1.0 / 6.0));
        for (v, se) in m.mean_displacement.iter().zip(&m.mean_std_error) {
            assert!(v.abs() <= 4.0 * se);
        }
        let exact = game.params.step_second_moment();
        assert!((m.mean_square - exact).abs() <= 4.0 * m.square_std_error);
    }

    #[test]
    fn step_rejects_non_unit_direction() {
        let game = disc_game(0.1, 0.5);
        let mut rng = CounterRng::at(0, 0, 0);
        assert!(matches!(step(&[0.0, 0.0], 0.3, &[1.0, 1.0], &game.params, &mut rng), Err(Error::Precondition(_))));
    }

    #[test]
    fn short_horizon_forces_one_round() {
        let params = GameParams::new(2, 4.0, 0.5, TimeScaling::Standard).unwrap();
        let domain = SpaceTimeDomain::new(Shape::Ball { center: vec![0.0, 0.0], radius: 1.0 }, 0.3).unwrap();
        let game = Game::new(params, domain).unwrap();
        let s = RandomDirection { dim: 2 };
        for i in 0..200 {
            let tr = play(&game, &[0.0, 0.0], 0.2, &s, &PayoffField::Constant(1.0), 9, i).unwrap();
            assert_eq!(tr.tau, 1);
            assert_eq!(tr.payoff, 1.0);
            assert!((tr.exit.t + 0.05).abs() < 1e-15);
        }
    }

    #[test]
    fn outward_push_can_exit_immediately() {
        let game = disc_game(0.1, 0.5);
        let s = FixedDirection::new(vec![1.0, 0.0]).unwrap();
        let runs = 4000;
        let exits = (0..runs)
            .filter(|&i| play(&game, &[0.95, 0.0], 0.4, &s, &PayoffField::Constant(0.0), 1, i).unwrap().tau == 1)
            .count();
        let p = exits as f64 / runs as f64;
        let half_alpha = game.params.alpha / 2.0;
        assert!(p >= half_alpha - 3.0 * (half_alpha * (1.0 - half_alpha) / runs as f64).sqrt());
    }

    #[test]
    fn trace_invariants() {
        let game = disc_game(0.1, 0.5);
        let s = RandomDirection { dim: 2 };
        let traces = run_traces(&game, &[0.3, -0.2], 0.5, &s, &PayoffField::Constant(0.0), 300, 4, Execution::Parallel).unwrap();
        let dt = game.params.time_step();
        for tr in &traces {
            assert!(tr.tau as f64 <= game.stopping_bound());
            for (k, st) in tr.states.iter().enumerate() {
                assert!((st.t - (0.5 - k as f64 * dt)).abs() < 1e-12);
                if k < tr.tau {
                    assert!(!game.strip.contains(&st.x, st.t));
                }
                if k > 0 {
                    let prev = &tr.states[k - 1].x;
                    let d = st.x.iter().zip(prev).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    assert!(d <= game.params.epsilon * (1.0 + 1e-12));
                }
            }
            assert!(game.strip.contains(&tr.exit.x, tr.exit.t));
        }
    }

    #[test]
    fn estimates_are_deterministic_and_exact_for_constants() {
        let game = disc_game(0.1, 0.5);
        let s = RandomDirection { dim: 2 };
        let (a, ta) = estimate_value(&game, &[0.1, 0.1], 0.3, &s, &PayoffField::Constant(2.5), 200, 7, Execution::Parallel).unwrap();
        let (b, tb) = estimate_value(&game, &[0.1, 0.1], 0.3, &s, &PayoffField::Constant(2.5), 200, 7, Execution::Sequential).unwrap();
        assert_eq!(a.mean, 2.5);
        assert_eq!(a.std_error, 0.0);
        assert_eq!(ta, tb);
        assert_eq!(a, b);
        assert!(estimate_value(&game, &[0.1, 0.1], 0.3, &s, &PayoffField::Constant(2.5), 50, 7, Execution::Parallel).is_err());
    }

    #[test]
    fn linear_payoff_is_a_martingale() {
        let game = disc_game(0.1, 0.5);
        let s = FixedDirection::new(vec![0.6, 0.8]).unwrap();
        let f = PayoffField::Linear { gradient: vec![1.0, 0.0], offset: 0.0 };
        let (est, _) = estimate_value(&game, &[0.2, 0.0], 0.5, &s, &f, 4000, 3, Execution::Parallel).unwrap();
        assert!((est.mean - 0.2).abs() <= est.confidence_radius + game.params.epsilon);
    }

    #[test]
    fn shared_noise_keeps_payoffs_ordered() {
        let game = disc_game(0.1, 0.3);
        let s = RandomDirection { dim: 2 };
        let f2 = PayoffField::Reference(ReferenceSolution::cosh_exp(&game.params));
        let f1 = f2.clone().shifted(0.1);
        let a = run_traces(&game, &[0.2, 0.2], 0.3, &s, &f1, 200, 8, Execution::Parallel).unwrap();
        let b = run_traces(&game, &[0.2, 0.2], 0.3, &s, &f2, 200, 8, Execution::Parallel).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.states, y.states);
            assert!(x.payoff >= y.payoff);
        }
    }

    #[test]
    fn greedy_on_linear_data_takes_the_first_direction() {
        let game = disc_game(0.2, 0.4);
        let f = PayoffField::Linear { gradient: vec![1.0, 0.5], offset: 0.0 };
        let grid = solve_dpp(&game.domain, &f, &game.params, &GridConfig::with_ratio(&game.params, 4.0)).unwrap();
        let greedy = GreedyStrategy::new(&grid);
        assert_eq!(greedy.choose(&[0.13, -0.21], 0.4).unwrap().0, 0);
        assert!(greedy.direction_gap().unwrap() > 0.0);
    }

    #[test]
    fn greedy_points_at_a_bump() {
        let game = disc_game(0.2, 0.4);
        let mut grid = solve_dpp(&game.domain, &PayoffField::Constant(0.0), &game.params, &GridConfig::with_ratio(&game.params, 4.0)).unwrap();
        let j = grid.snap_level(0.4 - game.params.time_step()).unwrap();
        let node = grid.nearest_node(&[0.15, 0.15]).unwrap();
        grid.set_node_value(node, j, 1.0);
        let (_, sigma) = GreedyStrategy::new(&grid).choose(&[0.0, 0.0], 0.4).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((sigma[0] * s + sigma[1] * s).abs() > 0.99, "{sigma:?}");
    }

    #[test]
    fn drift_of_displacement_process_vanishes() {
        let game = disc_game(0.1, 0.5);
        let s = RandomDirection { dim: 2 };
        let x0 = [0.1, 0.0];
        let dt = game.params.time_step();
        let c1 = game.params.step_second_moment();
        let process = |x: &[f64], t: f64| {
            let k = ((0.5 - t) / dt).round();
            Ok((x[0] - x0[0]).powi(2) + (x[1] - x0[1]).powi(2) - c1 * k)
        };
        let report = supermartingale_check(process, &game, &s, &x0, 0.5, 2, 2000, 6, Execution::Parallel).unwrap();
        assert!(report.is_supermartingale(0.0, 4.0));
        assert!(report.is_submartingale(0.0, 4.0));
    }

    #[test]
    fn solved_value_is_a_supermartingale() {
        let game = disc_game(0.2, 0.4);
        let f = PayoffField::Reference(ReferenceSolution::cosh_exp(&game.params));
        let grid = solve_dpp(&game.domain, &f, &game.params, &GridConfig::with_ratio(&game.params, 8.0)).unwrap();
        let h = grid.spacing();
        let s = FixedDirection::new(vec![0.0, 1.0]).unwrap();
        let report = supermartingale_check(|x: &[f64], t: f64| grid.value_at(x, t), &game, &s, &[0.0, 0.0], 0.4, 2, 2000, 2, Execution::Parallel).unwrap();
        assert!(report.is_supermartingale(5.0 * h * h, 4.0), "{}", report.max_drift);
        let greedy = GreedyStrategy::new(&grid);
        let report = supermartingale_check(|x: &[f64], t: f64| grid.value_at(x, t), &game, &greedy, &[0.0, 0.0], 0.4, 2, 2000, 2, Execution::Parallel).unwrap();
        assert!(report.is_submartingale(5.0 * h * h + greedy.direction_gap().unwrap(), 4.0), "{}", report.min_drift);
    }
}
