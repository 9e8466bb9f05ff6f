//! Budgeted derivative-free minimisation by generalized simulated annealing
//! (dual annealing), plus shot-noise expectation estimates.
//!
//! The annealer follows the classic dual-annealing scheme: a Tsallis visiting
//! distribution, a generalized Metropolis acceptance rule, temperature restarts
//! and an optional local search. The local search here is a derivative-free
//! coordinate-wise quadratic line search. Every objective call, including
//! those made during local search, counts against the hard budget.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};
use crate::seed::rng_from_seed;
use crate::statevector::{DiagonalCost, StateVector};

const TAIL_LIMIT: f64 = 1e8;
const MIN_VISIT_BOUND: f64 = 1e-10;
const MAX_REINIT_COUNT: usize = 1000;
const LS_MIN_EVALS: usize = 100;
const LS_EVALS_PER_DIM: usize = 6;

/// Mean cost over `shots` samples of `state`; `shots == 0` returns the exact expectation.
pub fn estimate_expectation<R: Rng + ?Sized>(
    state: &StateVector,
    cost: &DiagonalCost,
    shots: u64,
    rng: &mut R,
) -> Result<f64> {
    if shots == 0 {
        return state.expectation(cost);
    }
    if cost.n_qubits() != state.n_qubits() {
        return Err(invalid(format!(
            "cost acts on {} qubits, state has {}",
            cost.n_qubits(),
            state.n_qubits()
        )));
    }
    let values = cost.values();
    let mut total = 0.0;
    state.sample_each(shots, rng, |z| total += values[z]);
    Ok(total / shots as f64)
}

/// Seeded variant of [`estimate_expectation`].
pub fn estimate_expectation_seeded(
    state: &StateVector,
    cost: &DiagonalCost,
    shots: u64,
    seed: u64,
) -> Result<f64> {
    estimate_expectation(state, cost, shots, &mut rng_from_seed(seed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealingConfig {
    /// Hard cap on objective evaluations.
    pub max_evals: usize,
    pub seed: u64,
    pub visiting_param: f64,
    pub acceptance_param: f64,
    pub initial_temp: f64,
    pub restart_temp_ratio: f64,
    pub max_iter: usize,
    pub local_search: bool,
}

impl Default for AnnealingConfig {
    fn default() -> Self {
        Self {
            max_evals: 5000,
            seed: 0,
            visiting_param: 2.62,
            acceptance_param: -5.0,
            initial_temp: 5230.0,
            restart_temp_ratio: 2e-5,
            max_iter: 1000,
            local_search: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// `(evaluation index, value)` for every objective call.
    pub trace: Vec<(usize, f64)>,
}

struct Evaluator<F> {
    f: F,
    max_evals: usize,
    trace: Vec<(usize, f64)>,
    best: Option<(Vec<f64>, f64)>,
}

impl<F: FnMut(&[f64]) -> f64> Evaluator<F> {
    fn exhausted(&self) -> bool {
        self.trace.len() >= self.max_evals
    }

    /// `None` once the budget is spent.
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.exhausted() {
            return None;
        }
        let raw = (self.f)(x);
        let value = if raw.is_nan() { f64::INFINITY } else { raw };
        self.trace.push((self.trace.len(), value));
        if self.best.as_ref().is_none_or(|(_, b)| value < *b) {
            self.best = Some((x.to_vec(), value));
        }
        Some(value)
    }
}

struct Visiting {
    lower: Vec<f64>,
    range: Vec<f64>,
    qv: f64,
    factor4_p: f64,
    factor6: f64,
}

impl Visiting {
    fn new(bounds: &[(f64, f64)], qv: f64) -> Self {
        let factor2 = ((4.0 - qv) * (qv - 1.0).ln()).exp();
        let factor3 = ((2.0 - qv) * 2f64.ln() / (qv - 1.0)).exp();
        let factor4_p = std::f64::consts::PI.sqrt() * factor2 / (factor3 * (3.0 - qv));
        let factor5 = 1.0 / (qv - 1.0) - 0.5;
        let d1 = 2.0 - factor5;
        let pi = std::f64::consts::PI;
        let factor6 = pi * (1.0 - factor5) / (pi * (1.0 - factor5)).sin() / ln_gamma(d1).exp();
        Self {
            lower: bounds.iter().map(|b| b.0).collect(),
            range: bounds.iter().map(|b| b.1 - b.0).collect(),
            qv,
            factor4_p,
            factor6,
        }
    }

    fn step(&self, temperature: f64, rng: &mut ChaCha8Rng) -> f64 {
        let x: f64 = rng.sample(StandardNormal);
        let y: f64 = rng.sample(StandardNormal);
        let qv = self.qv;
        let factor1 = (temperature.ln() / (qv - 1.0)).exp();
        let factor4 = self.factor4_p * factor1;
        let x = x * (-(qv - 1.0) * (self.factor6 / factor4).ln() / (3.0 - qv)).exp();
        let den = ((qv - 1.0) * y.abs().ln() / (3.0 - qv)).exp();
        x / den
    }

    fn wrap(&self, i: usize, value: f64) -> f64 {
        let a = value - self.lower[i];
        let b = a % self.range[i] + self.range[i];
        let mut x = b % self.range[i] + self.lower[i];
        if (x - self.lower[i]).abs() < MIN_VISIT_BOUND {
            x += MIN_VISIT_BOUND;
        }
        x
    }

    /// First `dim` steps move every coordinate, the next `dim` move one each.
    fn visit(&self, x: &[f64], step: usize, temperature: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let dim = x.len();
        if step < dim {
            let mut visits: Vec<f64> = (0..dim).map(|_| self.step(temperature, rng)).collect();
            let upper_sample: f64 = rng.random();
            let lower_sample: f64 = rng.random();
            for v in &mut visits {
                if *v > TAIL_LIMIT {
                    *v = TAIL_LIMIT * upper_sample;
                } else if *v < -TAIL_LIMIT {
                    *v = -TAIL_LIMIT * lower_sample;
                }
            }
            (0..dim).map(|i| self.wrap(i, x[i] + visits[i])).collect()
        } else {
            let mut visit = self.step(temperature, rng);
            if visit > TAIL_LIMIT {
                visit = TAIL_LIMIT * rng.random::<f64>();
            } else if visit < -TAIL_LIMIT {
                visit = -TAIL_LIMIT * rng.random::<f64>();
            }
            let i = step - dim;
            let mut out = x.to_vec();
            out[i] = self.wrap(i, x[i] + visit);
            out
        }
    }
}

/// Coordinate-wise quadratic line search from `(x, fx)` inside the box.
/// Returns the best point seen; stops early when the local or global budget runs out.
fn coordinate_search<F: FnMut(&[f64]) -> f64>(
    ev: &mut Evaluator<F>,
    bounds: &[(f64, f64)],
    x: &[f64],
    fx: f64,
    max_evals: usize,
) -> (Vec<f64>, f64) {
    let dim = x.len();
    let start = ev.trace.len();
    let mut best_x = x.to_vec();
    let mut best_f = fx;
    let mut steps: Vec<f64> = bounds.iter().map(|b| 0.05 * (b.1 - b.0)).collect();
    let min_steps: Vec<f64> = bounds.iter().map(|b| 1e-7 * (b.1 - b.0)).collect();
    let clip = |i: usize, v: f64| v.clamp(bounds[i].0, bounds[i].1);

    'sweeps: while steps.iter().zip(&min_steps).any(|(h, m)| h > m) {
        for i in 0..dim {
            if steps[i] <= min_steps[i] {
                continue;
            }
            let h = steps[i];
            let probe = |v: f64, ev: &mut Evaluator<F>| {
                let mut y = best_x.clone();
                y[i] = clip(i, v);
                if ev.trace.len() - start >= max_evals {
                    return None;
                }
                ev.eval(&y).map(|fy| (y, fy))
            };
            let centre = best_x[i];
            let Some((xp, fp)) = probe(centre + h, ev) else {
                break 'sweeps;
            };
            let Some((xm, fm)) = probe(centre - h, ev) else {
                break 'sweeps;
            };
            let mut candidates = vec![(xp, fp), (xm, fm)];
            let curvature = fp + fm - 2.0 * best_f;
            if curvature > 0.0 {
                let shift = (h * (fm - fp) / (2.0 * curvature)).clamp(-2.0 * h, 2.0 * h);
                if shift.abs() > 1e-3 * h {
                    let Some(c) = probe(centre + shift, ev) else {
                        break 'sweeps;
                    };
                    candidates.push(c);
                }
            }
            let (cx, cf) = candidates
                .into_iter()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("at least two candidates");
            if cf < best_f {
                best_x = cx;
                best_f = cf;
            } else {
                steps[i] *= 0.5;
            }
        }
    }
    (best_x, best_f)
}

struct Annealer<'a, F> {
    ev: Evaluator<F>,
    rng: ChaCha8Rng,
    visiting: Visiting,
    bounds: &'a [(f64, f64)],
    acceptance_param: f64,
    ls_budget: usize,
    current: (Vec<f64>, f64),
    best: (Vec<f64>, f64),
    minimum: (Vec<f64>, f64),
    improved: bool,
    not_improved_idx: usize,
    not_improved_max_idx: usize,
    temperature_step: f64,
}

impl<F: FnMut(&[f64]) -> f64> Annealer<'_, F> {
    fn random_point(&mut self) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|&(lo, hi)| lo + (hi - lo) * self.rng.random::<f64>())
            .collect()
    }

    /// Resets the walker; `None` when the budget is exhausted.
    fn reset(&mut self, x0: Option<Vec<f64>>) -> Option<()> {
        let mut x = match x0 {
            Some(x) => x,
            None => self.random_point(),
        };
        for _ in 0..MAX_REINIT_COUNT {
            let e = self.ev.eval(&x)?;
            if e.is_finite() {
                self.current = (x, e);
                return Some(());
            }
            x = self.random_point();
        }
        self.current = (x, f64::INFINITY);
        Some(())
    }

    fn accept_reject(&mut self, j: usize, e: f64, x: Vec<f64>) {
        let r: f64 = self.rng.random();
        let qa = self.acceptance_param;
        let pqv_temp = 1.0 - (1.0 - qa) * (e - self.current.1) / self.temperature_step;
        let pqv = if pqv_temp <= 0.0 {
            0.0
        } else {
            (pqv_temp.ln() / (1.0 - qa)).exp()
        };
        if r <= pqv {
            self.current = (x, e);
            self.minimum.0 = self.current.0.clone();
        }
        if self.not_improved_idx >= self.not_improved_max_idx
            && (j == 0 || self.current.1 < self.minimum.1)
        {
            self.minimum = self.current.clone();
        }
    }

    /// One Markov chain of `2 * dim` visits; `None` when the budget is exhausted.
    fn chain(&mut self, step: usize, temperature: f64) -> Option<()> {
        self.temperature_step = temperature / (step as f64 + 1.0);
        self.not_improved_idx += 1;
        let dim = self.current.0.len();
        for j in 0..2 * dim {
            if j == 0 {
                self.improved = step == 0;
            }
            let x = self
                .visiting
                .visit(&self.current.0, j, temperature, &mut self.rng);
            let e = self.ev.eval(&x)?;
            if e < self.current.1 {
                self.current = (x.clone(), e);
                if e < self.best.1 {
                    self.best = (x, e);
                    self.improved = true;
                    self.not_improved_idx = 0;
                }
            } else {
                self.accept_reject(j, e, x);
            }
        }
        if self.ev.exhausted() {
            return None;
        }
        Some(())
    }

    fn local_search(&mut self) -> Option<()> {
        if self.improved {
            let (x, e) = coordinate_search(
                &mut self.ev,
                self.bounds,
                &self.best.0,
                self.best.1,
                self.ls_budget,
            );
            if e < self.best.1 {
                self.not_improved_idx = 0;
                self.best = (x.clone(), e);
                self.current = (x, e);
            }
            if self.ev.exhausted() {
                return None;
            }
        }
        if self.not_improved_idx >= self.not_improved_max_idx {
            let (x, e) = coordinate_search(
                &mut self.ev,
                self.bounds,
                &self.minimum.0,
                self.minimum.1,
                self.ls_budget,
            );
            self.minimum = (x.clone(), e);
            self.not_improved_idx = 0;
            self.not_improved_max_idx = self.current.0.len();
            if e < self.best.1 {
                self.best = (x.clone(), e);
                self.current = (x, e);
            }
            if self.ev.exhausted() {
                return None;
            }
        }
        Some(())
    }
}

/// Minimises `f` over the box `bounds` within `config.max_evals` calls.
pub fn dual_annealing<F: FnMut(&[f64]) -> f64>(
    f: F,
    bounds: &[(f64, f64)],
    x0: Option<&[f64]>,
    config: &AnnealingConfig,
) -> Result<OptimizationResult> {
    let dim = bounds.len();
    if dim == 0 {
        return Err(invalid("need at least one coordinate"));
    }
    if bounds
        .iter()
        .any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi))
    {
        return Err(invalid("bounds must be finite with lower < upper"));
    }
    if config.max_evals < dim + 1 {
        return Err(invalid(format!(
            "budget {} is below dimension + 1 = {}",
            config.max_evals,
            dim + 1
        )));
    }
    if !(1.0 < config.visiting_param && config.visiting_param < 3.0) {
        return Err(invalid("visiting parameter must lie in (1, 3)"));
    }
    if config.initial_temp <= 0.0 || config.max_iter == 0 {
        return Err(invalid(
            "initial temperature and iteration cap must be positive",
        ));
    }
    if let Some(x0) = x0 {
        if x0.len() != dim {
            return Err(invalid(format!(
                "x0 has {} entries, expected {dim}",
                x0.len()
            )));
        }
        if x0.iter().zip(bounds).any(|(v, b)| *v < b.0 || *v > b.1) {
            return Err(invalid("x0 lies outside the bounds"));
        }
    }

    let mut annealer = Annealer {
        ev: Evaluator {
            f,
            max_evals: config.max_evals,
            trace: Vec::with_capacity(config.max_evals),
            best: None,
        },
        rng: rng_from_seed(config.seed),
        visiting: Visiting::new(bounds, config.visiting_param),
        bounds,
        acceptance_param: config.acceptance_param,
        ls_budget: LS_MIN_EVALS.max(LS_EVALS_PER_DIM * dim),
        current: (Vec::new(), f64::INFINITY),
        best: (Vec::new(), f64::INFINITY),
        minimum: (Vec::new(), f64::INFINITY),
        improved: false,
        not_improved_idx: 0,
        not_improved_max_idx: 1000,
        temperature_step: 0.0,
    };

    let qv = config.visiting_param;
    let t1 = ((qv - 1.0) * 2f64.ln()).exp() - 1.0;
    let restart_temp = config.initial_temp * config.restart_temp_ratio;
    if annealer.reset(x0.map(<[f64]>::to_vec)).is_some() {
        annealer.best = annealer.current.clone();
        annealer.minimum = annealer.current.clone();
        let mut iteration = 0;
        'outer: loop {
            for i in 0..config.max_iter {
                let t2 = ((qv - 1.0) * (i as f64 + 2.0).ln()).exp() - 1.0;
                let temperature = config.initial_temp * t1 / t2;
                if iteration >= config.max_iter {
                    break 'outer;
                }
                if temperature < restart_temp {
                    if annealer.reset(None).is_none() {
                        break 'outer;
                    }
                    break;
                }
                if annealer.chain(i, temperature).is_none() {
                    break 'outer;
                }
                if config.local_search && annealer.local_search().is_none() {
                    break 'outer;
                }
                iteration += 1;
            }
        }
    }

    let ev = annealer.ev;
    let (x, value) = ev.best.expect("budget admits at least one evaluation");
    Ok(OptimizationResult {
        x,
        value,
        evaluations: ev.trace.len(),
        trace: ev.trace,
    })
}
