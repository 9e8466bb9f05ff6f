//! Iterative warm starts: optimise, measure, keep the best strings, repeat.
//!
//! Each iteration optimises the circuit angles from the current initial
//! state, samples the optimised state, ranks the measured strings by their
//! classical cost and superposes the best ones (with square-root empirical
//! weights) into the next initial state. The loop stops when consecutive
//! initial states are closer than `epsilon` or the iteration cap is reached.

use std::cmp::Ordering;
use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{
    apply_qaoa, build_dgmvp_cost, build_maxcut_cost, build_nn_mixer, maxbias_state, Mixer,
    QaoaParams,
};
use crate::error::{invalid, Error, Result};
use crate::graphs::{brute_force_maxcut, Graph};
use crate::metrics::{alpha_mean, alpha_min_and_pmin, ratio_r, relative_change};
use crate::optimizer::{dual_annealing, estimate_expectation, AnnealingConfig};
use crate::portfolio::{Extrema, PortfolioInstance};
use crate::seed::{derive_seed, rng_from_seed};
use crate::statevector::{format_bitstring, DiagonalCost, MeasurementDistribution, StateVector};

const STREAM_THETA: u64 = 1;
const STREAM_ANNEAL: u64 = 2;
const STREAM_OBJECTIVE: u64 = 3;
const STREAM_MEASURE: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    /// `Less` when `a` is the better cost.
    fn compare(self, a: f64, b: f64) -> Ordering {
        match self {
            Direction::Maximize => b.total_cmp(&a),
            Direction::Minimize => a.total_cmp(&b),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MaxCutProblem {
    graph: Graph,
    cost: DiagonalCost,
    c_max: usize,
}

impl MaxCutProblem {
    pub fn new(graph: Graph) -> Result<Self> {
        let cost = build_maxcut_cost(&graph)?;
        let c_max = brute_force_maxcut(&graph)?.c_max;
        if c_max == 0 {
            return Err(Error::Degenerate("graph has no edges to cut".into()));
        }
        Ok(Self { graph, cost, c_max })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn cost(&self) -> &DiagonalCost {
        &self.cost
    }

    pub fn c_max(&self) -> usize {
        self.c_max
    }
}

#[derive(Debug, Clone)]
pub struct PortfolioProblem {
    instance: PortfolioInstance,
    cost: DiagonalCost,
    classical: Vec<f64>,
    extrema: Extrema,
    mixer: Mixer,
    initial_asset: usize,
}

impl PortfolioProblem {
    pub fn new(instance: PortfolioInstance, initial_asset: usize) -> Result<Self> {
        instance.maxbias_index(initial_asset)?;
        let cost = build_dgmvp_cost(&instance)?;
        let classical = (0..1usize << instance.n_qubits())
            .map(|z| instance.classical_cost_of_index(z))
            .collect();
        let extrema = instance.brute_force_extrema();
        if !(extrema.f_max > extrema.f_min) {
            return Err(Error::Degenerate(
                "every feasible allocation has the same cost".into(),
            ));
        }
        let mixer = Mixer::NearestNeighbour(build_nn_mixer(&instance)?);
        Ok(Self {
            instance,
            cost,
            classical,
            extrema,
            mixer,
            initial_asset,
        })
    }

    pub fn instance(&self) -> &PortfolioInstance {
        &self.instance
    }

    pub fn extrema(&self) -> &Extrema {
        &self.extrema
    }

    /// Offset-free diagonal cost used inside the circuit.
    pub fn cost(&self) -> &DiagonalCost {
        &self.cost
    }

    pub fn mixer(&self) -> &Mixer {
        &self.mixer
    }
}

#[derive(Debug, Clone)]
pub enum Problem {
    MaxCut(MaxCutProblem),
    Portfolio(PortfolioProblem),
}

impl Problem {
    pub fn n_qubits(&self) -> usize {
        match self {
            Problem::MaxCut(p) => p.graph.n_vertices(),
            Problem::Portfolio(p) => p.instance.n_qubits(),
        }
    }

    pub fn direction(&self) -> Direction {
        match self {
            Problem::MaxCut(_) => Direction::Maximize,
            Problem::Portfolio(_) => Direction::Minimize,
        }
    }

    /// Cut size or portfolio variance of a basis string.
    pub fn classical_cost(&self, z: usize) -> f64 {
        match self {
            Problem::MaxCut(p) => p.cost.value(z),
            Problem::Portfolio(p) => p.classical[z],
        }
    }

    pub fn is_feasible(&self, z: usize) -> bool {
        match self {
            Problem::MaxCut(_) => true,
            Problem::Portfolio(p) => p.instance.is_feasible_index(z),
        }
    }

    /// Uniform superposition for MaxCut, the single-asset state for portfolios.
    pub fn default_initial_state(&self) -> Result<StateVector> {
        match self {
            Problem::MaxCut(p) => StateVector::uniform(p.graph.n_vertices()),
            Problem::Portfolio(p) => maxbias_state(&p.instance, p.initial_asset),
        }
    }

    fn circuit(&self) -> (&DiagonalCost, &Mixer) {
        static TRANSVERSE: Mixer = Mixer::Transverse;
        match self {
            Problem::MaxCut(p) => (&p.cost, &TRANSVERSE),
            Problem::Portfolio(p) => (&p.cost, &p.mixer),
        }
    }

    /// Normalised quality of a mean classical cost; lower is better for both problems.
    pub fn quality(&self, mean_cost: f64) -> Result<f64> {
        match self {
            Problem::MaxCut(p) => ratio_r(mean_cost, p.c_max as f64),
            Problem::Portfolio(p) => alpha_mean(mean_cost, p.extrema.f_min, p.extrema.f_max),
        }
    }

    /// Exact classical-cost expectation over a state.
    pub fn expected_cost(&self, state: &StateVector) -> f64 {
        state
            .probabilities()
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(z, p)| p * self.classical_cost(z))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedOutcome {
    pub index: usize,
    pub count: u64,
    pub cost: f64,
}

/// Distinct measured strings, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedOutcomes {
    n_qubits: usize,
    direction: Direction,
    outcomes: Vec<RankedOutcome>,
}

impl RankedOutcomes {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn outcomes(&self) -> &[RankedOutcome] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }
}

/// Orders outcomes by cost in `direction`, then by count (descending), then by
/// bitstring. Strings rejected by `keep` are dropped first.
pub fn rank_outcomes(
    dist: &MeasurementDistribution,
    cost: impl Fn(usize) -> f64,
    direction: Direction,
    keep: impl Fn(usize) -> bool,
) -> Result<RankedOutcomes> {
    if dist.is_empty() {
        return Err(invalid("empty measurement distribution"));
    }
    let n = dist.n_qubits();
    let mut outcomes: Vec<(RankedOutcome, String)> = dist
        .iter()
        .filter(|&(z, _)| keep(z))
        .map(|(index, count)| {
            (
                RankedOutcome {
                    index,
                    count,
                    cost: cost(index),
                },
                format_bitstring(n, index),
            )
        })
        .collect();
    if outcomes.is_empty() {
        return Err(Error::Degenerate(
            "every measured string is infeasible".into(),
        ));
    }
    outcomes.sort_by(|(a, sa), (b, sb)| {
        direction
            .compare(a.cost, b.cost)
            .then(b.count.cmp(&a.count))
            .then(sa.cmp(sb))
    });
    Ok(RankedOutcomes {
        n_qubits: n,
        direction,
        outcomes: outcomes.into_iter().map(|o| o.0).collect(),
    })
}

fn superpose(ranked: &RankedOutcomes, selected: &[RankedOutcome]) -> Result<StateVector> {
    let weights: Vec<(usize, f64)> = selected.iter().map(|o| (o.index, o.count as f64)).collect();
    StateVector::superposition(ranked.n_qubits, &weights)
}

/// The best `min(t, len)` outcomes.
pub fn select_order_statistic(ranked: &RankedOutcomes, t: usize) -> Result<&[RankedOutcome]> {
    if t == 0 {
        return Err(invalid("order t must be at least 1"));
    }
    if ranked.is_empty() {
        return Err(invalid("no outcomes to select from"));
    }
    Ok(&ranked.outcomes[..t.min(ranked.len())])
}

/// Superposition of the best `t` strings with amplitudes `sqrt(count / selected total)`.
pub fn build_order_statistic_state(ranked: &RankedOutcomes, t: usize) -> Result<StateVector> {
    superpose(ranked, select_order_statistic(ranked, t)?)
}

/// Longest best-first prefix whose share of the total `count * cost` mass is
/// at most `t`, never fewer than one string. Falls back to count shares when
/// the total mass vanishes.
pub fn select_percentile(ranked: &RankedOutcomes, t: f64) -> Result<&[RankedOutcome]> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(invalid(format!("percentile must lie in (0, 1], got {t}")));
    }
    if ranked.is_empty() {
        return Err(invalid("no outcomes to select from"));
    }
    let mass = |o: &RankedOutcome| o.count as f64 * o.cost;
    let total: f64 = ranked.outcomes.iter().map(mass).sum();
    let use_counts = total.abs() < f64::MIN_POSITIVE;
    let denom = if use_counts {
        ranked.outcomes.iter().map(|o| o.count as f64).sum()
    } else {
        total
    };
    if t >= 1.0 {
        return Ok(&ranked.outcomes);
    }
    let mut cumulative = 0.0;
    let mut k = 0;
    for o in &ranked.outcomes {
        cumulative += if use_counts { o.count as f64 } else { mass(o) };
        if cumulative / denom <= t {
            k += 1;
        } else {
            break;
        }
    }
    Ok(&ranked.outcomes[..k.max(1)])
}

pub fn build_percentile_state(ranked: &RankedOutcomes, t: f64) -> Result<StateVector> {
    superpose(ranked, select_percentile(ranked, t)?)
}

/// `sqrt(2 (1 - |<a|b>|^2))`: Frobenius distance of the two pure-state projectors.
pub fn state_distance(a: &StateVector, b: &StateVector) -> Result<f64> {
    let overlap = a.overlap(b)?.norm_sqr().min(1.0);
    Ok((2.0 * (1.0 - overlap)).max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Keep the best `t` distinct strings.
    Order(usize),
    /// Keep strings up to a cumulative mass fraction.
    Percentile(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaInit {
    Zeros,
    Random,
    /// Start from the previous iteration's optimum (zeros at iteration 0).
    CarryOver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStartConfig {
    pub selection: Selection,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub theta_init: ThetaInit,
    /// Shots per objective evaluation; 0 means exact expectations.
    pub shots_optimize: u64,
    /// Shots of the final measurement each iteration.
    pub shots_final: u64,
    /// Objective evaluations per optimisation.
    pub budget: usize,
    pub local_search: bool,
}

impl Default for WarmStartConfig {
    fn default() -> Self {
        Self {
            selection: Selection::Order(20),
            epsilon: 1e-3,
            max_iterations: 4,
            theta_init: ThetaInit::Zeros,
            shots_optimize: 8000,
            shots_final: 8000,
            budget: 5000,
            local_search: true,
        }
    }
}

impl WarmStartConfig {
    pub fn validate(&self) -> Result<()> {
        match self.selection {
            Selection::Order(0) => return Err(invalid("order t must be at least 1")),
            Selection::Percentile(t) if !(t > 0.0 && t <= 1.0) => {
                return Err(invalid(format!("percentile must lie in (0, 1], got {t}")))
            }
            _ => {}
        }
        if !(self.epsilon > 0.0) {
            return Err(invalid("epsilon must be positive"));
        }
        if self.shots_final == 0 {
            return Err(invalid("final shot count must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub layers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedString {
    pub x: String,
    pub count: u64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
}

/// One pass of the loop. `r_init` and `r_post` hold `r` for MaxCut and
/// `alpha_mean` for portfolios; lower is better in both cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub theta: Vec<f64>,
    pub r_init: f64,
    pub r_post: f64,
    pub selected: Vec<SelectedString>,
    /// Distance to the previous initial state; absent at iteration 0.
    pub distance: Option<f64>,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopReason>,
    pub overlap: Option<f64>,
    pub expected_cost_init: f64,
    pub expected_cost_post: f64,
    /// Change of the measured mean cost against the previous iteration
    /// (against the initial state at iteration 0).
    pub delta_cost: f64,
    pub relative_change: Option<f64>,
    pub alpha_mean: Option<f64>,
    pub alpha_min: Option<f64>,
    pub p_min: Option<f64>,
    pub p_gm: Option<f64>,
    pub evaluations: usize,
}

/// Error of [`run_iterative`] together with the records finished before it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Vec<IterationRecord>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} (after {} iterations)",
            self.error,
            self.partial.len()
        )
    }
}

impl std::error::Error for RunFailure {}

fn initial_theta(
    config: &WarmStartConfig,
    layers: usize,
    previous: Option<&[f64]>,
    seed: u64,
    iter: usize,
) -> Vec<f64> {
    match (config.theta_init, previous) {
        (ThetaInit::Random, _) => {
            let mut rng = rng_from_seed(derive_seed(seed, STREAM_THETA, iter as u64));
            (0..2 * layers)
                .map(|_| rng.random_range(0.0..TAU))
                .collect()
        }
        (ThetaInit::CarryOver, Some(prev)) => prev.to_vec(),
        _ => vec![0.0; 2 * layers],
    }
}

/// Runs the warm-start loop from the problem's default initial state.
pub fn run_iterative(
    problem: &Problem,
    ansatz: &AnsatzSpec,
    config: &WarmStartConfig,
    seed: u64,
) -> std::result::Result<Vec<IterationRecord>, RunFailure> {
    let mut records = Vec::new();
    let fail = |error: Error, partial: &Vec<IterationRecord>| RunFailure {
        error,
        partial: partial.clone(),
    };
    if ansatz.layers == 0 {
        return Err(fail(invalid("ansatz needs at least one layer"), &records));
    }
    config.validate().map_err(|e| fail(e, &records))?;

    let (cost, mixer) = problem.circuit();
    let direction = problem.direction();
    let sign = match direction {
        Direction::Maximize => -1.0,
        Direction::Minimize => 1.0,
    };
    let bounds = vec![(0.0, TAU); 2 * ansatz.layers];

    let mut state = problem
        .default_initial_state()
        .map_err(|e| fail(e, &records))?;
    let mut previous_state: Option<StateVector> = None;
    let mut previous_theta: Option<Vec<f64>> = None;
    let mut previous_post: Option<f64> = None;

    for iter in 0..=config.max_iterations {
        let step = || -> Result<(IterationRecord, StateVector)> {
            let idx = iter as u64;
            let x0 = initial_theta(config, ansatz.layers, previous_theta.as_deref(), seed, iter);
            let mut objective_rng = rng_from_seed(derive_seed(seed, STREAM_OBJECTIVE, idx));
            let objective = |theta: &[f64]| {
                let params = QaoaParams::from_flat(theta).expect("even-length angle vector");
                let out = apply_qaoa(&state, cost, mixer, &params).expect("consistent circuit");
                sign * estimate_expectation(&out, cost, config.shots_optimize, &mut objective_rng)
                    .expect("consistent circuit")
            };
            let annealing = AnnealingConfig {
                max_evals: config.budget,
                seed: derive_seed(seed, STREAM_ANNEAL, idx),
                local_search: config.local_search,
                ..Default::default()
            };
            let opt = dual_annealing(objective, &bounds, Some(&x0), &annealing)?;
            let params = QaoaParams::from_flat(&opt.x)?;
            let output = apply_qaoa(&state, cost, mixer, &params)?;
            let dist = output.sample(config.shots_final, derive_seed(seed, STREAM_MEASURE, idx))?;

            let expected_init = problem.expected_cost(&state);
            let expected_post = dist.mean_cost(|z| problem.classical_cost(z));
            let r_init = problem.quality(expected_init)?;
            let r_post = problem.quality(expected_post)?;

            let ranked = rank_outcomes(
                &dist,
                |z| problem.classical_cost(z),
                direction,
                |z| problem.is_feasible(z),
            )?;
            let selected = match config.selection {
                Selection::Order(t) => select_order_statistic(&ranked, t)?,
                Selection::Percentile(t) => select_percentile(&ranked, t)?,
            };
            let next = superpose(&ranked, selected)?;
            let selected = selected
                .iter()
                .map(|o| SelectedString {
                    x: format_bitstring(problem.n_qubits(), o.index),
                    count: o.count,
                    amplitude: next.amplitude(o.index).re,
                })
                .collect();

            let (distance, overlap) = match &previous_state {
                Some(prev) => (
                    Some(state_distance(&state, prev)?),
                    Some(state.overlap(prev)?.norm()),
                ),
                None => (None, None),
            };
            let portfolio_stats = match problem {
                Problem::Portfolio(p) => Some(alpha_min_and_pmin(
                    &dist,
                    |z| p.classical[z],
                    p.extrema.f_min,
                    p.extrema.f_max,
                )?),
                Problem::MaxCut(_) => None,
            };
            let record = IterationRecord {
                iter,
                theta: opt.x,
                r_init,
                r_post,
                selected,
                distance,
                converged: false,
                stop: None,
                overlap,
                expected_cost_init: expected_init,
                expected_cost_post: expected_post,
                delta_cost: expected_post - previous_post.unwrap_or(expected_init),
                relative_change: relative_change(r_init, r_post).ok(),
                alpha_mean: portfolio_stats.map(|_| r_post),
                alpha_min: portfolio_stats.map(|s| s.alpha_min),
                p_min: portfolio_stats.map(|s| s.p_min),
                p_gm: portfolio_stats.map(|s| s.p_gm),
                evaluations: opt.evaluations,
            };
            Ok((record, next))
        };
        let (mut record, next) = step().map_err(|e| fail(e, &records))?;

        let converged = record.distance.is_some_and(|d| d < config.epsilon);
        record.converged = converged;
        if converged {
            record.stop = Some(StopReason::Converged);
        } else if iter == config.max_iterations {
            record.stop = Some(StopReason::MaxIterations);
        }
        previous_theta = Some(record.theta.clone());
        previous_post = Some(record.expected_cost_post);
        records.push(record);
        if converged {
            break;
        }
        previous_state = Some(std::mem::replace(&mut state, next));
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{complete_graph, cycle_graph, gen_random_cubic};
    use crate::portfolio::gen_instance;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::Rng;

    fn triangle_dist(counts: &[(&str, u64)]) -> MeasurementDistribution {
        MeasurementDistribution::from_bitstring_counts(3, counts.iter().copied()).unwrap()
    }

    fn strings(r: &RankedOutcomes) -> Vec<String> {
        r.outcomes()
            .iter()
            .map(|o| format_bitstring(r.n_qubits(), o.index))
            .collect()
    }

    fn quick_config() -> WarmStartConfig {
        WarmStartConfig {
            selection: Selection::Order(4),
            max_iterations: 2,
            shots_optimize: 200,
            shots_final: 500,
            budget: 120,
            ..Default::default()
        }
    }

    #[test]
    fn ranking_examples() {
        let tri = cycle_graph(3);
        let cost = build_maxcut_cost(&tri).unwrap();
        let d = triangle_dist(&[("010", 5), ("000", 3)]);
        let r = rank_outcomes(&d, |z| cost.value(z), Direction::Maximize, |_| true).unwrap();
        assert_eq!(strings(&r), vec!["010", "000"]);

        let tie = triangle_dist(&[("100", 2), ("010", 7), ("001", 7)]);
        let r = rank_outcomes(&tie, |z| cost.value(z), Direction::Maximize, |_| true).unwrap();
        assert_eq!(strings(&r), vec!["001", "010", "100"]);

        let r = rank_outcomes(&tie, |z| cost.value(z), Direction::Minimize, |z| z != 4).unwrap();
        assert_eq!(strings(&r), vec!["010", "100"]);
        assert!(matches!(
            rank_outcomes(&tie, |z| cost.value(z), Direction::Minimize, |_| false),
            Err(Error::Degenerate(_))
        ));
        let empty = MeasurementDistribution::from_counts(3, []).unwrap();
        assert!(rank_outcomes(&empty, |_| 0.0, Direction::Maximize, |_| true).is_err());
    }

    #[test]
    fn order_statistic_examples() {
        let tri = cycle_graph(3);
        let cost = build_maxcut_cost(&tri).unwrap();
        let d = triangle_dist(&[("100", 3), ("110", 1), ("000", 9)]);
        let r = rank_outcomes(&d, |z| cost.value(z), Direction::Maximize, |_| true).unwrap();
        assert_eq!(
            build_order_statistic_state(&r, 1).unwrap(),
            StateVector::basis(3, "100").unwrap()
        );
        let top2 = build_order_statistic_state(&r, 2).unwrap();
        let idx = |s| crate::statevector::parse_bitstring(3, s).unwrap();
        assert!((top2.amplitude(idx("100")).re - 0.75f64.sqrt()).abs() < 1e-15);
        assert!((top2.amplitude(idx("110")).re - 0.25f64.sqrt()).abs() < 1e-15);
        let all = build_order_statistic_state(&r, 50).unwrap();
        assert_eq!(all.support(0.0).len(), 3);
        assert!(build_order_statistic_state(&r, 0).is_err());
    }

    #[test]
    fn percentile_examples() {
        let costs = [2.0, 2.0, 1.0, 0.0];
        let d = MeasurementDistribution::from_counts(2, [(0, 1), (1, 1)]).unwrap();
        let r = rank_outcomes(&d, |z| costs[z], Direction::Maximize, |_| true).unwrap();
        let best = r.outcomes()[0].index;
        assert_eq!(
            build_percentile_state(&r, 0.5).unwrap(),
            StateVector::basis_index(2, best).unwrap()
        );
        assert_eq!(select_percentile(&r, 1.0).unwrap().len(), 2);

        let single = MeasurementDistribution::from_counts(2, [(2, 40)]).unwrap();
        let r = rank_outcomes(&single, |z| costs[z], Direction::Maximize, |_| true).unwrap();
        for t in [0.01, 0.5, 1.0] {
            assert_eq!(
                build_percentile_state(&r, t).unwrap(),
                StateVector::basis_index(2, 2).unwrap()
            );
        }
        // zero total mass falls back to counts
        let zeros = MeasurementDistribution::from_counts(2, [(3, 1), (0, 1)]).unwrap();
        let r = rank_outcomes(&zeros, |_| 0.0, Direction::Maximize, |_| true).unwrap();
        assert_eq!(select_percentile(&r, 0.5).unwrap().len(), 1);
        assert!(select_percentile(&r, 0.0).is_err());
        assert!(select_percentile(&r, 1.5).is_err());
    }

    #[test]
    fn distance_examples() {
        let a = StateVector::basis(2, "01").unwrap();
        let b = StateVector::basis(2, "10").unwrap();
        assert_eq!(state_distance(&a, &a).unwrap(), 0.0);
        assert!((state_distance(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let u = StateVector::uniform(2).unwrap();
        let phase = Complex64::from_polar(1.0, 0.7);
        let shifted =
            StateVector::from_amplitudes(u.amplitudes().iter().map(|x| x * phase).collect())
                .unwrap();
        assert!(state_distance(&u, &shifted).unwrap() < 1e-7);
        assert!(state_distance(&u, &StateVector::uniform(3).unwrap()).is_err());
    }

    #[test]
    fn infinite_epsilon_stops_after_one_warm_iteration() {
        let problem = Problem::MaxCut(MaxCutProblem::new(complete_graph(4)).unwrap());
        let config = WarmStartConfig {
            epsilon: f64::INFINITY,
            ..quick_config()
        };
        let recs = run_iterative(&problem, &AnsatzSpec { layers: 1 }, &config, 3).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].distance, None);
        assert!(recs[1].converged);
        assert_eq!(recs[1].stop, Some(StopReason::Converged));
    }

    #[test]
    fn iteration_cap_and_determinism() {
        let problem = Problem::MaxCut(MaxCutProblem::new(gen_random_cubic(8, 2).unwrap()).unwrap());
        let config = WarmStartConfig {
            epsilon: 1e-12,
            ..quick_config()
        };
        let a = run_iterative(&problem, &AnsatzSpec { layers: 1 }, &config, 5).unwrap();
        let b = run_iterative(&problem, &AnsatzSpec { layers: 1 }, &config, 5).unwrap();
        assert_eq!(a, b);
        let last = a.last().unwrap();
        if last.converged {
            assert_eq!(last.stop, Some(StopReason::Converged));
        } else {
            assert_eq!(a.len(), 3);
            assert_eq!(last.stop, Some(StopReason::MaxIterations));
        }
        for r in &a {
            assert!((0.0..=1.0).contains(&r.r_init) && (0.0..=1.0).contains(&r.r_post));
            assert!(r.evaluations <= config.budget);
        }
        let c = run_iterative(&problem, &AnsatzSpec { layers: 1 }, &config, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn k4_warm_state_dominates_previous_output() {
        let problem = Problem::MaxCut(MaxCutProblem::new(complete_graph(4)).unwrap());
        let config = WarmStartConfig {
            selection: Selection::Order(4),
            epsilon: 1e-12,
            ..quick_config()
        };
        let recs = run_iterative(&problem, &AnsatzSpec { layers: 1 }, &config, 1).unwrap();
        for pair in recs.windows(2) {
            assert!(pair[1].expected_cost_init >= pair[0].expected_cost_post - 1e-12);
            assert!(pair[1].r_init <= pair[0].r_post + 1e-12);
        }
    }

    #[test]
    fn portfolio_run_stays_feasible() {
        let inst = gen_instance(3, 2, 9).unwrap();
        let problem = Problem::Portfolio(PortfolioProblem::new(inst.clone(), 0).unwrap());
        let config = WarmStartConfig {
            selection: Selection::Order(5),
            theta_init: ThetaInit::Random,
            shots_optimize: 16,
            shots_final: 2000,
            budget: 200,
            max_iterations: 2,
            epsilon: 1e-12,
            ..Default::default()
        };
        let recs = run_iterative(&problem, &AnsatzSpec { layers: 1 }, &config, 4).unwrap();
        for r in &recs {
            assert!(r.selected.iter().all(|s| {
                inst.is_feasible_index(crate::statevector::parse_bitstring(6, &s.x).unwrap())
            }));
            let (am, amin) = (r.alpha_mean.unwrap(), r.alpha_min.unwrap());
            assert!(amin <= am + 1e-12 && (0.0..=1.0).contains(&am));
            assert!(r.p_gm.unwrap() == 0.0 || r.p_gm == r.p_min);
        }
        let maxbias_alpha = (inst.sigma()[0][0] - problem_extrema(&problem).f_min)
            / (problem_extrema(&problem).f_max - problem_extrema(&problem).f_min);
        assert!((recs[0].r_init - maxbias_alpha).abs() < 1e-12);
    }

    fn problem_extrema(p: &Problem) -> &Extrema {
        match p {
            Problem::Portfolio(p) => p.extrema(),
            Problem::MaxCut(_) => unreachable!(),
        }
    }

    #[test]
    fn records_serialize_to_schema() {
        let problem = Problem::MaxCut(MaxCutProblem::new(complete_graph(4)).unwrap());
        let config = WarmStartConfig {
            max_iterations: 1,
            ..quick_config()
        };
        let recs = run_iterative(&problem, &AnsatzSpec { layers: 1 }, &config, 0).unwrap();
        let line = serde_json::to_string(&recs[0]).unwrap();
        for key in [
            "\"iter\":0",
            "\"theta\":[",
            "\"r_init\":",
            "\"r_post\":",
            "\"selected\":[{\"x\":",
            "\"distance\":null",
            "\"converged\":false",
        ] {
            assert!(line.contains(key), "{key} missing from {line}");
        }
        let back: IterationRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, recs[0]);
    }

    #[test]
    fn config_validation() {
        let problem = Problem::MaxCut(MaxCutProblem::new(complete_graph(4)).unwrap());
        let bad = [
            WarmStartConfig {
                selection: Selection::Order(0),
                ..quick_config()
            },
            WarmStartConfig {
                selection: Selection::Percentile(0.0),
                ..quick_config()
            },
            WarmStartConfig {
                epsilon: 0.0,
                ..quick_config()
            },
            WarmStartConfig {
                budget: 1,
                ..quick_config()
            },
        ];
        for config in bad {
            let err = run_iterative(&problem, &AnsatzSpec { layers: 1 }, &config, 0).unwrap_err();
            assert!(err.partial.is_empty());
        }
        assert!(run_iterative(&problem, &AnsatzSpec { layers: 0 }, &quick_config(), 0).is_err());
    }

    fn random_dist(seed: u64, n: usize) -> MeasurementDistribution {
        let mut rng = rng_from_seed(seed);
        let k = rng.random_range(1..30);
        MeasurementDistribution::from_counts(
            n,
            (0..k).map(|_| {
                (
                    rng.random_range(0..1usize << n),
                    rng.random_range(1..200u64),
                )
            }),
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn selection_dominance(seed in 0u64..100_000, t in 1usize..25) {
            let g = gen_random_cubic(8, seed % 50).unwrap();
            let cost = build_maxcut_cost(&g).unwrap();
            let d = random_dist(seed, 8);
            let r = rank_outcomes(&d, |z| cost.value(z), Direction::Maximize, |_| true).unwrap();
            let sel = select_order_statistic(&r, t).unwrap();
            // exact comparison of sum(c n)/sum(n) over the selection and over everything
            let (sc, sn) = sel.iter().fold((0u128, 0u128), |(c, n), o| (c + o.cost as u128 * o.count as u128, n + o.count as u128));
            let (ac, an) = r.outcomes().iter().fold((0u128, 0u128), |(c, n), o| (c + o.cost as u128 * o.count as u128, n + o.count as u128));
            prop_assert!(sc * an >= ac * sn);
        }

        #[test]
        fn distance_metric_axioms(s1 in 0u64..1000, s2 in 0u64..1000, s3 in 0u64..1000) {
            let mk = |s: u64| {
                let mut rng = rng_from_seed(s);
                let w: Vec<(usize, f64)> = (0..8).map(|z| (z, rng.random::<f64>())).collect();
                StateVector::superposition(3, &w).unwrap()
            };
            let (a, b, c) = (mk(s1), mk(s2), mk(s3));
            let ab = state_distance(&a, &b).unwrap();
            prop_assert!((ab - state_distance(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!(ab <= state_distance(&a, &c).unwrap() + state_distance(&c, &b).unwrap() + 1e-12);
        }
    }
}
