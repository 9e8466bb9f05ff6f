//! Evaluation quantities for single runs and ensembles, plus power-law fits.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::portfolio::cost_tolerance;
use crate::statevector::MeasurementDistribution;
use crate::warmstart::IterationRecord;

/// Best classical guarantee for cubic MaxCut, as a cut fraction.
pub const CLASSICAL_CUBIC_RATIO: f64 = 0.9326;

/// `r = 1 - <C> / c_max`; zero means every sample is a maximum cut.
pub fn ratio_r(expected_cut: f64, c_max: f64) -> Result<f64> {
    if !(c_max > 0.0) {
        return Err(invalid(format!("c_max must be positive, got {c_max}")));
    }
    Ok(1.0 - expected_cut / c_max)
}

pub fn ratio_r_of(
    dist: &MeasurementDistribution,
    cut: impl Fn(usize) -> f64,
    c_max: f64,
) -> Result<f64> {
    ratio_r(dist.mean_cost(cut), c_max)
}

/// `R = (r_init - r_post) / r_init`.
pub fn relative_change(r_init: f64, r_post: f64) -> Result<f64> {
    if r_init == 0.0 {
        return Err(Error::UndefinedMetric(
            "initial state is already optimal (r_init = 0)".into(),
        ));
    }
    Ok((r_init - r_post) / r_init)
}

/// `P = (N_total - N_static) / N_total`.
pub fn convergence_p(n_static: usize, n_total: usize) -> Result<f64> {
    if n_total == 0 || n_static > n_total {
        return Err(invalid(format!(
            "need 0 <= n_static <= n_total and n_total > 0, got {n_static}/{n_total}"
        )));
    }
    Ok((n_total - n_static) as f64 / n_total as f64)
}

/// `(<c> - f_min) / (f_max - f_min)`.
pub fn alpha_mean(mean_cost: f64, f_min: f64, f_max: f64) -> Result<f64> {
    if !(f_max > f_min) {
        return Err(Error::Degenerate(format!(
            "cost range is empty (f_min = {f_min}, f_max = {f_max})"
        )));
    }
    Ok((mean_cost - f_min) / (f_max - f_min))
}

pub fn alpha_mean_of(
    dist: &MeasurementDistribution,
    cost: impl Fn(usize) -> f64,
    f_min: f64,
    f_max: f64,
) -> Result<f64> {
    alpha_mean(dist.mean_cost(cost), f_min, f_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimumStats {
    pub best_cost: f64,
    pub alpha_min: f64,
    /// Fraction of shots landing on the best measured cost.
    pub p_min: f64,
    /// Fraction of shots landing on a global minimiser.
    pub p_gm: f64,
}

/// Statistics of the lowest-cost measured strings.
///
/// Strings within [`cost_tolerance`] of each other count as the same value.
pub fn alpha_min_and_pmin(
    dist: &MeasurementDistribution,
    cost: impl Fn(usize) -> f64,
    f_min: f64,
    f_max: f64,
) -> Result<MinimumStats> {
    if dist.is_empty() {
        return Err(invalid("empty measurement distribution"));
    }
    let scored: Vec<(f64, u64)> = dist.iter().map(|(z, n)| (cost(z), n)).collect();
    let best = scored.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let total = dist.total_shots() as f64;
    let mass_at = |value: f64| {
        let tol = cost_tolerance(value);
        scored
            .iter()
            .filter(|(c, _)| (c - value).abs() <= tol)
            .map(|s| s.1)
            .sum::<u64>() as f64
            / total
    };
    let p_min = mass_at(best);
    let p_gm = if best <= f_min + cost_tolerance(f_min) {
        p_min
    } else {
        0.0
    };
    Ok(MinimumStats {
        best_cost: best,
        alpha_min: alpha_mean(best, f_min, f_max)?,
        p_min,
        p_gm,
    })
}

/// Nearest-rank percentile of sorted data, `q` in `(0, 100]`.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q / 100.0) * n as f64).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean: f64,
    pub stderr: f64,
    pub p10: f64,
    pub p30: f64,
    pub p50: f64,
    pub p70: f64,
    pub p90: f64,
}

/// Mean, standard error and nearest-rank percentiles; `None` for no data.
pub fn aggregate(values: &[f64]) -> Option<Aggregate> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(Aggregate {
        count: n,
        mean,
        stderr,
        p10: nearest_rank(&sorted, 10.0),
        p30: nearest_rank(&sorted, 30.0),
        p50: nearest_rank(&sorted, 50.0),
        p70: nearest_rank(&sorted, 70.0),
        p90: nearest_rank(&sorted, 90.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iter: usize,
    pub r_init: Option<Aggregate>,
    pub r_post: Option<Aggregate>,
    pub relative_change: Option<Aggregate>,
    /// Instances left out of the `R` aggregate because `r_init = 0`.
    pub relative_change_excluded: usize,
    pub alpha_mean: Option<Aggregate>,
    pub alpha_min: Option<Aggregate>,
    pub p_min: Option<Aggregate>,
    pub p_gm: Option<Aggregate>,
    pub n_static: usize,
    pub n_total: usize,
    pub convergence_p: f64,
}

/// Per-iteration statistics over an ensemble of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub iterations: Vec<IterationSummary>,
}

/// Record of `run` at iteration `iter`, carrying the last one forward when
/// the run stopped early.
pub fn record_at(run: &[IterationRecord], iter: usize) -> Option<&IterationRecord> {
    run.iter()
        .find(|r| r.iter == iter)
        .or_else(|| run.last().filter(|r| r.iter < iter))
}

/// Summarises `runs` (one record list per instance) for iterations `0..=max_iter`.
pub fn summarize_ensemble(
    runs: &[Vec<IterationRecord>],
    max_iter: usize,
) -> Result<EnsembleSummary> {
    let runs: Vec<&Vec<IterationRecord>> = runs.iter().filter(|r| !r.is_empty()).collect();
    if runs.is_empty() {
        return Err(invalid("no records to summarise"));
    }
    let mut iterations = Vec::with_capacity(max_iter + 1);
    for iter in 0..=max_iter {
        let recs: Vec<&IterationRecord> = runs.iter().filter_map(|r| record_at(r, iter)).collect();
        let collect = |f: &dyn Fn(&IterationRecord) -> Option<f64>| {
            aggregate(&recs.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
        };
        let mut excluded = 0;
        let mut changes = Vec::new();
        for r in &recs {
            match relative_change(r.r_init, r.r_post) {
                Ok(v) => changes.push(v),
                Err(_) => excluded += 1,
            }
        }
        let n_static = runs
            .iter()
            .filter(|run| {
                run.iter().any(|r| {
                    r.iter <= iter && r.stop == Some(crate::warmstart::StopReason::Converged)
                })
            })
            .count();
        iterations.push(IterationSummary {
            iter,
            r_init: collect(&|r| Some(r.r_init)),
            r_post: collect(&|r| Some(r.r_post)),
            relative_change: aggregate(&changes),
            relative_change_excluded: excluded,
            alpha_mean: collect(&|r| r.alpha_mean),
            alpha_min: collect(&|r| r.alpha_min),
            p_min: collect(&|r| r.p_min),
            p_gm: collect(&|r| r.p_gm),
            n_static,
            n_total: runs.len(),
            convergence_p: convergence_p(n_static, runs.len())?,
        });
    }
    Ok(EnsembleSummary { iterations })
}

/// `y = a x^b` fitted by least squares on `(ln x, ln y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    pub a_stderr: f64,
    pub b_stderr: f64,
    /// `ln y - ln(a x^b)` at each point used.
    pub residuals: Vec<f64>,
    /// Input positions dropped because `y <= 0`.
    pub excluded: Vec<usize>,
}

impl PowerLawFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.a * x.powf(self.b)
    }
}

pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() != ys.len() {
        return Err(invalid("xs and ys differ in length"));
    }
    if xs.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(invalid("power-law fit needs strictly positive x values"));
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(invalid("power-law fit needs finite y values"));
    }
    let excluded: Vec<usize> = (0..ys.len()).filter(|&i| ys[i] <= 0.0).collect();
    let points: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = points.len();
    if n < 3 {
        return Err(invalid(format!(
            "power-law fit needs at least 3 positive points, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(invalid(
            "power-law fit needs at least two distinct x values",
        ));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    let ln_a = my - b * mx;
    let residuals: Vec<f64> = points.iter().map(|p| p.1 - (ln_a + b * p.0)).collect();
    let s2 = residuals.iter().map(|r| r * r).sum::<f64>() / (nf - 2.0);
    let b_stderr = (s2 / sxx).sqrt();
    let ln_a_stderr = (s2 * (1.0 / nf + mx * mx / sxx)).sqrt();
    let a = ln_a.exp();
    Ok(PowerLawFit {
        a,
        b,
        a_stderr: a * ln_a_stderr,
        b_stderr,
        residuals,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn dist(n: usize, counts: &[(usize, u64)]) -> MeasurementDistribution {
        let map: BTreeMap<usize, u64> = counts.iter().copied().collect();
        MeasurementDistribution::from_counts(n, map).unwrap()
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(ratio_r(4.0, 4.0).unwrap(), 0.0);
        assert_eq!(ratio_r(3.0, 4.0).unwrap(), 0.25);
        assert!((ratio_r(0.9326, 1.0).unwrap() - 0.0674).abs() < 1e-12);
        assert!(ratio_r(1.0, 0.0).is_err());
        // uniform distribution over K4 cuts averages to 3 of 4
        let cuts = [
            0.0, 3.0, 3.0, 4.0, 3.0, 4.0, 4.0, 3.0, 3.0, 4.0, 4.0, 3.0, 4.0, 3.0, 3.0, 0.0,
        ];
        let uniform = dist(4, &(0..16).map(|z| (z, 1)).collect::<Vec<_>>());
        assert_eq!(ratio_r_of(&uniform, |z| cuts[z], 4.0).unwrap(), 0.25);
    }

    #[test]
    fn relative_change_examples() {
        assert_eq!(relative_change(0.3, 0.3).unwrap(), 0.0);
        assert!((relative_change(0.2, 0.1).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            relative_change(0.0, 0.1),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn convergence_examples() {
        assert_eq!(convergence_p(100, 100).unwrap(), 0.0);
        assert_eq!(convergence_p(0, 100).unwrap(), 1.0);
        assert_eq!(convergence_p(20, 100).unwrap(), 0.8);
        assert!(convergence_p(0, 0).is_err());
        assert!(convergence_p(3, 2).is_err());
    }

    #[test]
    fn alpha_examples() {
        let costs = [1.0, 2.0, 3.0, 4.0];
        let min_only = dist(2, &[(0, 10)]);
        let max_only = dist(2, &[(3, 10)]);
        let half = dist(2, &[(0, 5), (3, 5)]);
        assert_eq!(
            alpha_mean_of(&min_only, |z| costs[z], 1.0, 4.0).unwrap(),
            0.0
        );
        assert_eq!(
            alpha_mean_of(&max_only, |z| costs[z], 1.0, 4.0).unwrap(),
            1.0
        );
        assert_eq!(alpha_mean_of(&half, |z| costs[z], 1.0, 4.0).unwrap(), 0.5);
        assert!(matches!(
            alpha_mean(1.0, 2.0, 2.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn minimum_stats_examples() {
        let costs = [1.0, 1.0, 3.0, 4.0];
        let with_min = dist(2, &[(0, 10), (2, 90)]);
        let s = alpha_min_and_pmin(&with_min, |z| costs[z], 1.0, 4.0).unwrap();
        assert_eq!(s.alpha_min, 0.0);
        assert!(s.p_gm >= 0.1);
        let worst = dist(2, &[(3, 7)]);
        let s = alpha_min_and_pmin(&worst, |z| costs[z], 1.0, 4.0).unwrap();
        assert_eq!((s.alpha_min, s.p_min, s.p_gm), (1.0, 1.0, 0.0));
        let two = dist(2, &[(0, 3), (1, 2), (3, 95)]);
        let s = alpha_min_and_pmin(&two, |z| costs[z], 1.0, 4.0).unwrap();
        assert!((s.p_gm - 0.05).abs() < 1e-15);
    }

    #[test]
    fn aggregate_percentiles() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        let a = aggregate(&v).unwrap();
        assert_eq!(
            (a.p10, a.p30, a.p50, a.p70, a.p90),
            (1.0, 3.0, 5.0, 7.0, 9.0)
        );
        assert_eq!(a.mean, 5.5);
        let sd = (v.iter().map(|x| (x - 5.5).powi(2)).sum::<f64>() / 9.0).sqrt();
        assert!((a.stderr - sd / 10f64.sqrt()).abs() < 1e-12);
        assert!(aggregate(&[]).is_none());
        assert_eq!(aggregate(&[2.0]).unwrap().stderr, 0.0);
    }

    #[test]
    fn power_law_recovery() {
        let xs: Vec<f64> = vec![0.5, 0.1, 0.01, 1e-3, 1e-4];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x.powf(-0.5)).collect();
        let fit = fit_power_law(&xs, &ys).unwrap();
        assert!((fit.a - 2.0).abs() < 1e-6 && (fit.b + 0.5).abs() < 1e-6);
        for (x, y) in xs.iter().zip(&ys) {
            assert!((fit.predict(*x) - y).abs() < 1e-9 * y);
        }
        assert!(fit_power_law(&xs[..2], &ys[..2]).is_err());
        assert!(fit_power_law(&[1.0, -1.0, 2.0], &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn power_law_drops_zero_points() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [
            3.0,
            0.0,
            3.0 * 3f64.powf(1.5),
            3.0 * 8.0,
            3.0 * 5f64.powf(1.5),
        ];
        let fit = fit_power_law(&xs, &ys).unwrap();
        assert_eq!(fit.excluded, vec![1]);
        assert!((fit.b - 1.5).abs() < 1e-9);
        assert!(fit_power_law(&xs, &[0.0, 0.0, 1.0, 0.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn noiseless_fit_six_decimals(a in 0.01f64..100.0, b in -3.0f64..3.0, scale in 1.5f64..10.0) {
            let xs: Vec<f64> = (0..6).map(|i| scale.powi(-i)).collect();
            let ys: Vec<f64> = xs.iter().map(|x| a * x.powf(b)).collect();
            let fit = fit_power_law(&xs, &ys).unwrap();
            prop_assert!((fit.a - a).abs() < 1e-6 * a.max(1.0));
            prop_assert!((fit.b - b).abs() < 1e-6);
        }

        #[test]
        fn alpha_min_never_exceeds_alpha_mean(
            counts in proptest::collection::btree_map(0usize..16, 1u64..50, 1..10),
            seed in 0u64..1000,
        ) {
            let costs: Vec<f64> = (0..16).map(|z| ((z as u64 * 7919 + seed) % 97) as f64).collect();
            let (lo, hi) = (costs.iter().cloned().fold(f64::INFINITY, f64::min),
                            costs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            let d = MeasurementDistribution::from_counts(4, counts).unwrap();
            let mean = alpha_mean_of(&d, |z| costs[z], lo, hi).unwrap();
            let s = alpha_min_and_pmin(&d, |z| costs[z], lo, hi).unwrap();
            prop_assert!(s.alpha_min <= mean + 1e-12);
            prop_assert!((0.0..=1.0).contains(&mean) && (0.0..=1.0).contains(&s.alpha_min));
            prop_assert!(s.p_gm == s.p_min || s.p_gm == 0.0);
            prop_assert_eq!(s.p_gm == s.p_min, s.best_cost == lo);
        }
    }
}
