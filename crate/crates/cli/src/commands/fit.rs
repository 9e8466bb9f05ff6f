use std::path::Path;

use wsqaoa::metrics::{aggregate, fit_power_law, record_at};
use wsqaoa::portfolio::classical_sampler_prob;

use super::write_csv;
use crate::config::ProblemKind;
use crate::store::Results;
use crate::CliError;

pub const FIT_FILE: &str = "fit.csv";

/// Power-law fit of mean `p_gm` against the uniform-sampler probability at
/// one iteration index, or the reason there is none.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub iter: usize,
    /// `(P_c, mean p_gm)` for every `(n, l)` point, including zero means.
    pub points: Vec<(f64, f64)>,
    pub a: Option<f64>,
    pub a_stderr: Option<f64>,
    pub b: Option<f64>,
    pub b_stderr: Option<f64>,
    /// Points left out of the fit because their mean is zero.
    pub excluded: usize,
    pub note: String,
}

pub fn compute_fit(results: &Results) -> Result<Vec<FitRow>, CliError> {
    if results.manifest.config.problem != ProblemKind::Dgmvp {
        return Err(CliError::Usage("fit needs dgmvp results".into()));
    }
    let groups = results.by_point();
    if groups.len() < 3 {
        return Err(CliError::Runtime(format!(
            "a power-law fit needs at least 3 (n, l) points, results hold {}",
            groups.len()
        )));
    }
    let mut xs = Vec::with_capacity(groups.len());
    for (point, _) in &groups {
        let l = point
            .l
            .ok_or_else(|| CliError::Runtime(format!("point {point} has no bit count")))?;
        xs.push(classical_sampler_prob(point.n, l)?);
    }
    let mut rows = Vec::new();
    for iter in 0..=results.max_iter() {
        let means: Vec<f64> = groups
            .iter()
            .map(|(_, runs)| {
                let v: Vec<f64> = runs
                    .iter()
                    .filter_map(|r| record_at(r, iter).and_then(|x| x.p_gm))
                    .collect();
                aggregate(&v).map_or(0.0, |a| a.mean)
            })
            .collect();
        let excluded = means.iter().filter(|&&m| m <= 0.0).count();
        let mut row = FitRow {
            iter,
            points: xs.iter().copied().zip(means.iter().copied()).collect(),
            a: None,
            a_stderr: None,
            b: None,
            b_stderr: None,
            excluded,
            note: String::new(),
        };
        if excluded > 0 {
            log::warn!(
                "iteration {iter}: {excluded} points with zero mean p_gm left out of the fit"
            );
        }
        match fit_power_law(&xs, &means) {
            Ok(f) => {
                row.a = Some(f.a);
                row.a_stderr = Some(f.a_stderr);
                row.b = Some(f.b);
                row.b_stderr = Some(f.b_stderr);
            }
            Err(e) => row.note = format!("no fit: {e}"),
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Fits every iteration and writes `fit.csv` next to the results.
pub fn cmd_fit(root: &Path) -> Result<Vec<FitRow>, CliError> {
    let rows = compute_fit(&Results::load(root)?)?;
    let header = [
        "iter", "points", "excluded", "a", "a_stderr", "b", "b_stderr", "note",
    ];
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.iter.to_string(),
                r.points.len().to_string(),
                r.excluded.to_string(),
                super::opt(r.a),
                super::opt(r.a_stderr),
                super::opt(r.b),
                super::opt(r.b_stderr),
                r.note.clone(),
            ]
        })
        .collect();
    write_csv(&root.join(FIT_FILE), &header, &table)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ExperimentConfig, Scale};
    use crate::store::{
        plan_instances, write_records, EntryStatus, Manifest, ManifestEntry, RecordLine,
    };
    use wsqaoa::warmstart::IterationRecord;

    fn record(iter: usize, p_gm: f64) -> IterationRecord {
        IterationRecord {
            iter,
            theta: vec![0.0, 0.0],
            r_init: 0.5,
            r_post: 0.4,
            selected: Vec::new(),
            distance: None,
            converged: false,
            stop: None,
            overlap: None,
            expected_cost_init: 0.0,
            expected_cost_post: 0.0,
            delta_cost: 0.0,
            relative_change: Some(0.2),
            alpha_mean: Some(0.4),
            alpha_min: Some(0.0),
            p_min: Some(p_gm),
            p_gm: Some(p_gm),
            evaluations: 10,
        }
    }

    /// Writes a results directory whose `p_gm` at each point is `f(P_c, iter)`.
    fn inject(root: &Path, iterations: usize, f: impl Fn(f64, usize) -> f64) {
        let mut cfg = ExperimentConfig::preset(ProblemKind::Dgmvp, Scale::Desk);
        cfg.grid = vec![(4, 1), (4, 2), (4, 3), (3, 3)];
        cfg.instances = 2;
        let mut manifest = Manifest::new(&cfg);
        let mut lines = Vec::new();
        for spec in plan_instances(&cfg) {
            let pc = classical_sampler_prob(spec.point.n, spec.point.l.unwrap()).unwrap();
            for iter in 0..=iterations {
                lines.push(RecordLine {
                    instance_id: spec.id.clone(),
                    seed: 0,
                    record: record(iter, f(pc, iter)),
                });
            }
            manifest.upsert(ManifestEntry {
                id: spec.id.clone(),
                file: spec.file_name(),
                seed: spec.seed,
                point: spec.point,
                status: EntryStatus::Completed,
                records: iterations + 1,
                error: None,
            });
        }
        manifest.save(root).unwrap();
        write_records(root, &lines).unwrap();
    }

    #[test]
    fn synthetic_exponent_is_recovered_for_every_iteration() {
        let dir = tempfile::tempdir().unwrap();
        inject(dir.path(), 4, |pc, iter| {
            0.8 * pc.powf(1.3 - 0.25 * iter as f64)
        });
        let rows = cmd_fit(dir.path()).unwrap();
        assert_eq!(rows.len(), 5);
        assert!((rows[0].b.unwrap() - 1.3).abs() < 1e-9);
        assert!((rows[4].b.unwrap() - 0.3).abs() < 1e-9);
        assert!((rows[4].a.unwrap() - 0.8).abs() < 1e-9);
        let text = std::fs::read_to_string(dir.path().join(FIT_FILE)).unwrap();
        assert!(text.starts_with("iter,points,excluded,a,a_stderr,b,b_stderr,note"));
    }

    #[test]
    fn all_zero_column_gives_a_no_fit_row() {
        let dir = tempfile::tempdir().unwrap();
        inject(dir.path(), 1, |pc, iter| if iter == 0 { 0.0 } else { pc });
        let rows = cmd_fit(dir.path()).unwrap();
        assert!(rows[0].b.is_none());
        assert!(rows[0].note.starts_with("no fit"));
        assert_eq!(rows[0].excluded, 4);
        assert!((rows[1].b.unwrap() - 1.0).abs() < 1e-9);
    }
}
