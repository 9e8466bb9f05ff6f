use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::mpsc;

use rayon::prelude::*;
use serde::Serialize;
use wsqaoa::metrics::summarize_ensemble;
use wsqaoa::warmstart::{run_iterative, AnsatzSpec, IterationRecord};

use super::{opt, write_csv};
use crate::config::ExperimentConfig;
use crate::store::{
    plan_instances, read_json, read_records, write_json, write_records, EntryStatus, InstanceFile,
    InstanceSpec, Manifest, ManifestEntry, Point, RecordAppender, RecordLine, Results, ENSEMBLE,
    SUMMARY,
};
use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
    /// Stop after this many pending instances (the rest stay pending).
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub completed: usize,
    pub skipped: usize,
    pub failed: Vec<(String, String)>,
    pub pending: usize,
}

type Outcome = Result<Vec<IterationRecord>, String>;

fn run_one(cfg: &ExperimentConfig, root: &Path, spec: &InstanceSpec) -> Outcome {
    let file: InstanceFile = read_json(&root.join(spec.file_name())).map_err(|e| e.to_string())?;
    let problem = file.problem(cfg.initial_asset).map_err(|e| e.to_string())?;
    run_iterative(
        &problem,
        &AnsatzSpec { layers: cfg.layers },
        &cfg.warm_start,
        spec.run_seed(),
    )
    .map_err(|e| e.to_string())
}

/// Runs every instance of `cfg` not yet completed under `root`.
///
/// Workers run instances in parallel; this thread is the only writer and
/// commits results in plan order, appending records before marking the
/// instance complete in the manifest.
pub fn cmd_run(
    cfg: &ExperimentConfig,
    root: &Path,
    opts: &RunOptions,
) -> Result<RunReport, CliError> {
    std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
    let specs = plan_instances(cfg);
    let mut generated = 0;
    for spec in &specs {
        let path = root.join(spec.file_name());
        if !path.exists() {
            write_json(&path, &InstanceFile::generate(spec)?)?;
            generated += 1;
        }
    }
    if generated > 0 {
        log::info!("generated {generated} missing instance files");
    }

    let mut manifest = match Manifest::load(root)? {
        Some(m) if m.config_hash != cfg.hash() => return Err(CliError::Usage(format!(
            "{} holds results of a different configuration (hash {}); use another output directory",
            root.display(),
            m.config_hash
        ))),
        Some(m) => m,
        None => Manifest::new(cfg),
    };

    // drop records of instances that never reached the manifest
    let order: HashMap<&str, usize> = specs
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    let mut kept: Vec<RecordLine> = read_records(root)?
        .into_iter()
        .filter(|l| manifest.is_completed(&l.instance_id))
        .collect();
    kept.sort_by_key(|l| {
        (
            order
                .get(l.instance_id.as_str())
                .copied()
                .unwrap_or(usize::MAX),
            l.record.iter,
        )
    });
    write_records(root, &kept)?;
    manifest.save(root)?;

    let mut report = RunReport::default();
    let mut pending: Vec<&InstanceSpec> = Vec::new();
    for spec in &specs {
        if manifest.is_completed(&spec.id) {
            report.skipped += 1;
        } else {
            pending.push(spec);
        }
    }
    if report.skipped > 0 {
        log::info!("resuming: {} instances already complete", report.skipped);
    }
    let take = opts.limit.unwrap_or(pending.len()).min(pending.len());
    report.pending = pending.len() - take;
    let batch = &pending[..take];

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut appender = RecordAppender::open(root)?;
    let (tx, rx) = mpsc::channel::<(usize, Outcome)>();
    let write_result: Result<(), CliError> = std::thread::scope(|scope| {
        scope.spawn(move || {
            pool.install(|| {
                batch
                    .par_iter()
                    .enumerate()
                    .for_each_with(tx, |tx, (k, spec)| {
                        let _ = tx.send((k, run_one(cfg, root, spec)));
                    })
            })
        });
        let mut buffer = BTreeMap::new();
        let mut next = 0;
        for (k, outcome) in rx {
            buffer.insert(k, outcome);
            while let Some(outcome) = buffer.remove(&next) {
                let spec = batch[next];
                next += 1;
                let mut entry = ManifestEntry {
                    id: spec.id.clone(),
                    file: spec.file_name(),
                    seed: spec.seed,
                    point: spec.point,
                    status: EntryStatus::Completed,
                    records: 0,
                    error: None,
                };
                match outcome {
                    Ok(records) => {
                        let lines: Vec<RecordLine> = records
                            .into_iter()
                            .map(|record| RecordLine {
                                instance_id: spec.id.clone(),
                                seed: spec.run_seed(),
                                record,
                            })
                            .collect();
                        appender.append(&lines)?;
                        entry.records = lines.len();
                        report.completed += 1;
                        log::info!("{} done ({} iterations)", spec.id, lines.len());
                    }
                    Err(e) => {
                        log::warn!("{} failed: {e}", spec.id);
                        entry.status = EntryStatus::Failed;
                        entry.error = Some(e.clone());
                        report.failed.push((spec.id.clone(), e));
                    }
                }
                manifest.upsert(entry);
                manifest.save(root)?;
            }
        }
        Ok(())
    });
    write_result?;
    finalize(root, &specs)?;
    Ok(report)
}

/// Rewrites records in plan order and regenerates the summary tables.
fn finalize(root: &Path, specs: &[InstanceSpec]) -> Result<(), CliError> {
    let mut manifest =
        Manifest::load(root)?.ok_or_else(|| CliError::Runtime("manifest vanished".into()))?;
    let order: HashMap<&str, usize> = specs
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    manifest
        .instances
        .sort_by_key(|e| order.get(e.id.as_str()).copied().unwrap_or(usize::MAX));
    manifest.save(root)?;
    let mut lines: Vec<RecordLine> = read_records(root)?
        .into_iter()
        .filter(|l| manifest.is_completed(&l.instance_id))
        .collect();
    lines.sort_by_key(|l| {
        (
            order
                .get(l.instance_id.as_str())
                .copied()
                .unwrap_or(usize::MAX),
            l.record.iter,
        )
    });
    write_records(root, &lines)?;
    write_summary(root, &lines)?;
    write_ensemble(root)
}

fn write_summary(root: &Path, lines: &[RecordLine]) -> Result<(), CliError> {
    let header = [
        "instance_id",
        "iter",
        "r_init",
        "r_post",
        "R",
        "alpha_mean",
        "alpha_min",
        "p_min",
        "p_gm",
        "converged",
        "seed",
    ];
    let rows: Vec<Vec<String>> = lines
        .iter()
        .map(|l| {
            let r = &l.record;
            vec![
                l.instance_id.clone(),
                r.iter.to_string(),
                r.r_init.to_string(),
                r.r_post.to_string(),
                opt(r.relative_change),
                opt(r.alpha_mean),
                opt(r.alpha_min),
                opt(r.p_min),
                opt(r.p_gm),
                r.converged.to_string(),
                l.seed.to_string(),
            ]
        })
        .collect();
    write_csv(&root.join(SUMMARY), &header, &rows)
}

#[derive(Serialize)]
struct PointSummary {
    point: Point,
    summary: wsqaoa::metrics::EnsembleSummary,
}

fn write_ensemble(root: &Path) -> Result<(), CliError> {
    let results = Results::load(root)?;
    let max_iter = results.max_iter();
    let summaries: Vec<PointSummary> = results
        .by_point()
        .into_iter()
        .filter_map(|(point, runs)| {
            summarize_ensemble(&runs, max_iter)
                .ok()
                .map(|summary| PointSummary { point, summary })
        })
        .collect();
    write_json(
        &root.join(ENSEMBLE),
        &serde_json::json!({
            "master_seed": results.manifest.master_seed,
            "points": summaries,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ProblemKind, Scale};
    use crate::store::RECORDS;

    fn k4_like() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset(ProblemKind::Maxcut, Scale::Desk);
        cfg.sizes = vec![4];
        cfg.instances = 5;
        cfg.warm_start.max_iterations = 2;
        cfg.warm_start.epsilon = 1e-300;
        cfg.warm_start.budget = 60;
        cfg.warm_start.shots_optimize = 0;
        cfg.warm_start.shots_final = 500;
        cfg
    }

    #[test]
    fn five_k4_instances_give_fifteen_records() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = k4_like();
        let report = cmd_run(&cfg, dir.path(), &RunOptions::default()).unwrap();
        assert_eq!(report.completed, 5);
        let lines = read_records(dir.path()).unwrap();
        assert_eq!(lines.len(), 15);
        let manifest = Manifest::load(dir.path()).unwrap().unwrap();
        for l in &lines {
            assert!(manifest.is_completed(&l.instance_id));
        }
        for e in &manifest.instances {
            assert!(dir.path().join(&e.file).exists());
        }
        let csv = std::fs::read_to_string(dir.path().join(SUMMARY)).unwrap();
        assert!(csv.starts_with(
            "instance_id,iter,r_init,r_post,R,alpha_mean,alpha_min,p_min,p_gm,converged"
        ));
        assert_eq!(csv.lines().count(), 16);
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let cfg = k4_like();
        let full = tempfile::tempdir().unwrap();
        cmd_run(
            &cfg,
            full.path(),
            &RunOptions {
                workers: Some(2),
                limit: None,
            },
        )
        .unwrap();
        let part = tempfile::tempdir().unwrap();
        let first = cmd_run(
            &cfg,
            part.path(),
            &RunOptions {
                workers: Some(2),
                limit: Some(2),
            },
        )
        .unwrap();
        assert_eq!((first.completed, first.pending), (2, 3));
        // a crash mid-instance leaves stray lines behind
        let mut stray = std::fs::read(part.path().join(RECORDS)).unwrap();
        stray.extend(b"{\"instance_id\":\"maxcut-N04-004\",\"seed\":1,\"iter\":0,\"the\n");
        std::fs::write(part.path().join(RECORDS), stray).unwrap();
        let second = cmd_run(&cfg, part.path(), &RunOptions::default()).unwrap();
        assert_eq!((second.completed, second.skipped), (3, 2));
        let a = std::fs::read(full.path().join(RECORDS)).unwrap();
        let b = std::fs::read(part.path().join(RECORDS)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn other_configuration_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = k4_like();
        cfg.instances = 1;
        cmd_run(&cfg, dir.path(), &RunOptions::default()).unwrap();
        cfg.master_seed += 1;
        assert!(matches!(
            cmd_run(&cfg, dir.path(), &RunOptions::default()),
            Err(CliError::Usage(_))
        ));
    }
}
