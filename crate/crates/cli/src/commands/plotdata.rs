use std::path::{Path, PathBuf};
use std::str::FromStr;

use wsqaoa::metrics::{record_at, summarize_ensemble};

use super::{compute_fit, opt, write_csv};
use crate::config::ProblemKind;
use crate::store::Results;
use crate::CliError;

pub const PLOT_DIR: &str = "plots";

/// Plot-ready series, named after the figures they reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Mean `r` against graph size per iteration.
    Fig2a,
    /// Mean relative change `R` against graph size.
    Fig2b,
    /// Convergence fraction `P` against graph size.
    Fig2c,
    /// Worst and best `r` against graph size.
    Fig3,
    /// DGMVP `alpha_mean`, `alpha_min` and `p_min` per `(n, l)` point.
    Fig7,
    /// Mean `p_gm` against the uniform-sampler probability, with the fit.
    Fig9a,
}

impl Figure {
    pub const ALL: [Figure; 6] = [
        Self::Fig2a,
        Self::Fig2b,
        Self::Fig2c,
        Self::Fig3,
        Self::Fig7,
        Self::Fig9a,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Self::Fig2a => "fig2a",
            Self::Fig2b => "fig2b",
            Self::Fig2c => "fig2c",
            Self::Fig3 => "fig3",
            Self::Fig7 => "fig7",
            Self::Fig9a => "fig9a",
        }
    }

    fn problem(self) -> ProblemKind {
        match self {
            Self::Fig7 | Self::Fig9a => ProblemKind::Dgmvp,
            _ => ProblemKind::Maxcut,
        }
    }

    pub fn header(self) -> &'static [&'static str] {
        match self {
            Self::Fig2a => &["N", "iter", "mean_r", "stderr"],
            Self::Fig2b => &["N", "iter", "mean_R", "stderr", "excluded"],
            Self::Fig2c => &["N", "iter", "P"],
            Self::Fig3 => &["N", "iter", "worst_r", "best_r", "zero_r"],
            Self::Fig7 => &[
                "n",
                "l",
                "iter",
                "mean_alpha_mean",
                "stderr",
                "alpha_min_p10",
                "alpha_min_p50",
                "alpha_min_p90",
                "p_min_p30",
                "p_min_p50",
                "p_min_p70",
            ],
            Self::Fig9a => &["iter", "P_c", "mean_Pgm", "fit_a", "fit_b"],
        }
    }
}

impl FromStr for Figure {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Self::ALL.into_iter().find(|f| f.id() == s).ok_or_else(|| {
            let known: Vec<&str> = Self::ALL.iter().map(|f| f.id()).collect();
            CliError::Usage(format!("unknown figure {s:?}; known: {}", known.join(", ")))
        })
    }
}

fn rows_for(figure: Figure, results: &Results) -> Result<Vec<Vec<String>>, CliError> {
    let max_iter = results.max_iter();
    let mut rows = Vec::new();
    if figure == Figure::Fig9a {
        for fit in compute_fit(results)? {
            for (pc, mean) in &fit.points {
                rows.push(vec![
                    fit.iter.to_string(),
                    pc.to_string(),
                    mean.to_string(),
                    opt(fit.a),
                    opt(fit.b),
                ]);
            }
        }
        return Ok(rows);
    }
    for (point, runs) in results.by_point() {
        if figure == Figure::Fig3 {
            for iter in 0..=max_iter {
                let r: Vec<f64> = runs
                    .iter()
                    .filter_map(|run| record_at(run, iter))
                    .map(|x| x.r_post)
                    .collect();
                let worst = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let best = r.iter().cloned().fold(f64::INFINITY, f64::min);
                let zeros = r.iter().filter(|&&v| v == 0.0).count();
                rows.push(vec![
                    point.n.to_string(),
                    iter.to_string(),
                    worst.to_string(),
                    best.to_string(),
                    zeros.to_string(),
                ]);
            }
            continue;
        }
        let summary = summarize_ensemble(&runs, max_iter)?;
        for s in &summary.iterations {
            let iter = s.iter.to_string();
            let n = point.n.to_string();
            rows.push(match figure {
                Figure::Fig2a => vec![
                    n,
                    iter,
                    opt(s.r_post.map(|a| a.mean)),
                    opt(s.r_post.map(|a| a.stderr)),
                ],
                Figure::Fig2b => vec![
                    n,
                    iter,
                    opt(s.relative_change.map(|a| a.mean)),
                    opt(s.relative_change.map(|a| a.stderr)),
                    s.relative_change_excluded.to_string(),
                ],
                Figure::Fig2c => vec![n, iter, s.convergence_p.to_string()],
                Figure::Fig7 => vec![
                    n,
                    point.l.map(|l| l.to_string()).unwrap_or_default(),
                    iter,
                    opt(s.alpha_mean.map(|a| a.mean)),
                    opt(s.alpha_mean.map(|a| a.stderr)),
                    opt(s.alpha_min.map(|a| a.p10)),
                    opt(s.alpha_min.map(|a| a.p50)),
                    opt(s.alpha_min.map(|a| a.p90)),
                    opt(s.p_min.map(|a| a.p30)),
                    opt(s.p_min.map(|a| a.p50)),
                    opt(s.p_min.map(|a| a.p70)),
                ],
                Figure::Fig3 | Figure::Fig9a => unreachable!(),
            });
        }
    }
    Ok(rows)
}

/// Writes `<root>/plots/<figure>.csv` and returns its path.
pub fn cmd_plotdata(root: &Path, figure: Figure) -> Result<PathBuf, CliError> {
    let results = Results::load(root)?;
    if results.manifest.config.problem != figure.problem() {
        return Err(CliError::Usage(format!(
            "{} needs {:?} results, {} holds {:?}",
            figure.id(),
            figure.problem(),
            root.display(),
            results.manifest.config.problem
        )));
    }
    let rows = if results.runs.is_empty() {
        log::warn!(
            "no completed runs in {}; writing an empty series",
            root.display()
        );
        Vec::new()
    } else {
        rows_for(figure, &results)?
    };
    let path = root.join(PLOT_DIR).join(format!("{}.csv", figure.id()));
    write_csv(&path, figure.header(), &rows)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ExperimentConfig, Scale};
    use crate::store::Manifest;

    #[test]
    fn unknown_figure_is_a_usage_error() {
        assert!(matches!("fig99".parse::<Figure>(), Err(CliError::Usage(_))));
        assert_eq!("fig2a".parse::<Figure>().unwrap(), Figure::Fig2a);
    }

    #[test]
    fn empty_results_give_header_only() {
        let dir = tempfile::tempdir().unwrap();
        Manifest::new(&ExperimentConfig::preset(ProblemKind::Maxcut, Scale::Desk))
            .save(dir.path())
            .unwrap();
        let path = cmd_plotdata(dir.path(), Figure::Fig2a).unwrap();
        assert_eq!(
            std::fs::read_to_string(path).unwrap(),
            "N,iter,mean_r,stderr\n"
        );
    }

    #[test]
    fn figure_must_match_problem() {
        let dir = tempfile::tempdir().unwrap();
        Manifest::new(&ExperimentConfig::preset(ProblemKind::Maxcut, Scale::Desk))
            .save(dir.path())
            .unwrap();
        assert!(matches!(
            cmd_plotdata(dir.path(), Figure::Fig9a),
            Err(CliError::Usage(_))
        ));
    }
}
