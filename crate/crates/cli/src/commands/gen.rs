use std::path::Path;

use crate::config::ExperimentConfig;
use crate::store::{plan_instances, write_json, InstanceFile, InstanceSpec};
use crate::CliError;

/// Writes every planned instance of `cfg` under `root`, returning the plan.
/// Files are fully determined by the master seed, so rewriting is harmless.
pub fn cmd_gen(cfg: &ExperimentConfig, root: &Path) -> Result<Vec<InstanceSpec>, CliError> {
    let specs = plan_instances(cfg);
    for spec in &specs {
        write_json(&root.join(spec.file_name()), &InstanceFile::generate(spec)?)?;
    }
    log::info!(
        "wrote {} instance files under {}",
        specs.len(),
        root.display()
    );
    Ok(specs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ProblemKind, Scale};

    #[test]
    fn maxcut_files_are_cubic_and_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::preset(ProblemKind::Maxcut, Scale::Desk);
        cfg.sizes = vec![8];
        cfg.instances = 5;
        let specs = cmd_gen(&cfg, dir.path()).unwrap();
        assert_eq!(specs.len(), 5);
        let first: Vec<Vec<u8>> = specs
            .iter()
            .map(|s| std::fs::read(dir.path().join(s.file_name())).unwrap())
            .collect();
        for s in &specs {
            let f: InstanceFile = crate::store::read_json(&dir.path().join(s.file_name())).unwrap();
            assert!(f.graph.unwrap().is_cubic());
        }
        cmd_gen(&cfg, dir.path()).unwrap();
        let second: Vec<Vec<u8>> = specs
            .iter()
            .map(|s| std::fs::read(dir.path().join(s.file_name())).unwrap())
            .collect();
        assert_eq!(first, second);
    }

    #[test]
    fn dgmvp_files_hold_valid_instances() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::preset(ProblemKind::Dgmvp, Scale::Desk);
        cfg.grid = vec![(4, 3)];
        cfg.instances = 2;
        for s in cmd_gen(&cfg, dir.path()).unwrap() {
            let f: InstanceFile = crate::store::read_json(&dir.path().join(s.file_name())).unwrap();
            let inst = f.portfolio.unwrap();
            assert_eq!((inst.n_assets(), inst.bits_per_asset()), (4, 3));
        }
    }
}
