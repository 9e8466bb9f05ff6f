//! Experiment configuration: scale presets, file loading and flag overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wsqaoa::warmstart::{Selection, ThetaInit, WarmStartConfig};

use crate::CliError;

/// Environment variable naming the default output root.
pub const OUTPUT_ENV: &str = "WSQAOA_OUTPUT";
pub const DEFAULT_OUTPUT: &str = "results";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Maxcut,
    Dgmvp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Paper,
}

/// Everything that determines the content of a run. The output directory is
/// kept outside so moving results does not change the configuration hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    /// Graph sizes for MaxCut.
    pub sizes: Vec<usize>,
    /// `(assets, bits per asset)` points for DGMVP.
    pub grid: Vec<(usize, usize)>,
    pub instances: usize,
    pub layers: usize,
    pub warm_start: WarmStartConfig,
    /// Asset holding the whole budget in the DGMVP starting state.
    pub initial_asset: usize,
    pub master_seed: u64,
}

pub const DEFAULT_SEED: u64 = 2024;

impl ExperimentConfig {
    pub fn preset(problem: ProblemKind, scale: Scale) -> Self {
        let paper = scale == Scale::Paper;
        match problem {
            ProblemKind::Maxcut => Self {
                problem,
                sizes: if paper {
                    vec![8, 10, 12, 14, 16]
                } else {
                    vec![8, 10, 12]
                },
                grid: Vec::new(),
                instances: if paper { 100 } else { 20 },
                layers: 1,
                warm_start: WarmStartConfig::default(),
                initial_asset: 0,
                master_seed: DEFAULT_SEED,
            },
            ProblemKind::Dgmvp => Self {
                problem,
                sizes: Vec::new(),
                grid: if paper {
                    vec![(4, 1), (4, 2), (4, 3), (4, 4), (2, 3), (3, 3), (5, 3)]
                } else {
                    vec![(4, 1), (4, 2), (4, 3)]
                },
                instances: if paper { 100 } else { 20 },
                layers: 1,
                warm_start: WarmStartConfig {
                    selection: Selection::Order(5),
                    theta_init: ThetaInit::Random,
                    shots_optimize: 16,
                    shots_final: 1 << 18,
                    budget: 2000,
                    ..WarmStartConfig::default()
                },
                initial_asset: 0,
                master_seed: DEFAULT_SEED,
            },
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.instances == 0 {
            return usage("instance count must be positive".into());
        }
        if self.layers == 0 {
            return usage("layer count must be positive".into());
        }
        match self.problem {
            ProblemKind::Maxcut => {
                if self.sizes.is_empty() {
                    return usage("maxcut needs at least one graph size".into());
                }
                if let Some(n) = self.sizes.iter().find(|&&n| n < 4 || n % 2 == 1) {
                    return usage(format!(
                        "cubic graphs need an even size of at least 4, got {n}"
                    ));
                }
            }
            ProblemKind::Dgmvp => {
                if self.grid.is_empty() {
                    return usage("dgmvp needs at least one (n, l) point".into());
                }
                if let Some((n, l)) = self.grid.iter().find(|(n, l)| *n < 2 || *l == 0) {
                    return usage(format!(
                        "dgmvp points need n >= 2 and l >= 1, got ({n}, {l})"
                    ));
                }
                if let Some((n, _)) = self.grid.iter().find(|(n, _)| self.initial_asset >= *n) {
                    return usage(format!(
                        "initial asset {} out of range for n = {n}",
                        self.initial_asset
                    ));
                }
            }
        }
        self.warm_start
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serialises");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A configuration file or set of flags where every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub problem: Option<ProblemKind>,
    pub sizes: Option<Vec<usize>>,
    pub grid: Option<Vec<(usize, usize)>>,
    pub instances: Option<usize>,
    pub layers: Option<usize>,
    /// Order statistic `t`.
    pub order: Option<usize>,
    /// Percentile threshold in (0, 1].
    pub percentile: Option<f64>,
    pub epsilon: Option<f64>,
    pub max_iterations: Option<usize>,
    pub theta_init: Option<ThetaInit>,
    pub shots_optimize: Option<u64>,
    pub shots_final: Option<u64>,
    pub budget: Option<usize>,
    pub local_search: Option<bool>,
    pub initial_asset: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub paper_scale: Option<bool>,
}

impl ConfigOverrides {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let parsed = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| e.to_string()),
            _ => toml::from_str(&text).map_err(|e| e.to_string()),
        };
        parsed.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Fields set in `other` win.
    pub fn layered(self, other: Self) -> Self {
        macro_rules! pick {
            ($($f:ident),*) => { Self { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            problem,
            sizes,
            grid,
            instances,
            layers,
            order,
            percentile,
            epsilon,
            max_iterations,
            theta_init,
            shots_optimize,
            shots_final,
            budget,
            local_search,
            initial_asset,
            seed,
            output,
            paper_scale
        )
    }

    /// Resolves against the preset for the chosen problem and scale.
    pub fn resolve(self) -> Result<(ExperimentConfig, PathBuf), CliError> {
        let problem = self.problem.unwrap_or(ProblemKind::Maxcut);
        let scale = if self.paper_scale.unwrap_or(false) {
            Scale::Paper
        } else {
            Scale::Desk
        };
        let mut cfg = ExperimentConfig::preset(problem, scale);
        if self.order.is_some() && self.percentile.is_some() {
            return Err(CliError::Usage(
                "order and percentile are mutually exclusive".into(),
            ));
        }
        if let Some(v) = self.sizes {
            cfg.sizes = v;
        }
        if let Some(v) = self.grid {
            cfg.grid = v;
        }
        let ws = &mut cfg.warm_start;
        if let Some(t) = self.order {
            ws.selection = Selection::Order(t);
        }
        if let Some(t) = self.percentile {
            ws.selection = Selection::Percentile(t);
        }
        ws.epsilon = self.epsilon.unwrap_or(ws.epsilon);
        ws.max_iterations = self.max_iterations.unwrap_or(ws.max_iterations);
        ws.theta_init = self.theta_init.unwrap_or(ws.theta_init);
        ws.shots_optimize = self.shots_optimize.unwrap_or(ws.shots_optimize);
        ws.shots_final = self.shots_final.unwrap_or(ws.shots_final);
        ws.budget = self.budget.unwrap_or(ws.budget);
        ws.local_search = self.local_search.unwrap_or(ws.local_search);
        cfg.instances = self.instances.unwrap_or(cfg.instances);
        cfg.layers = self.layers.unwrap_or(cfg.layers);
        cfg.initial_asset = self.initial_asset.unwrap_or(cfg.initial_asset);
        cfg.master_seed = self.seed.unwrap_or(cfg.master_seed);
        cfg.validate()?;
        Ok((cfg, output_root(self.output)))
    }
}

pub fn output_root(explicit: Option<PathBuf>) -> PathBuf {
    explicit
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
}

/// Parses `4x3` or `4,3` into `(4, 3)`.
pub fn parse_point(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', ','])
        .ok_or_else(|| format!("expected NxL, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_scales() {
        let desk = ExperimentConfig::preset(ProblemKind::Maxcut, Scale::Desk);
        assert_eq!(desk.instances, 20);
        assert!(desk.sizes.iter().all(|&n| n <= 14));
        let paper = ExperimentConfig::preset(ProblemKind::Maxcut, Scale::Paper);
        assert_eq!(paper.instances, 100);
        let dg = ExperimentConfig::preset(ProblemKind::Dgmvp, Scale::Desk);
        assert!(dg.grid.iter().all(|(n, l)| n * l <= 16));
        assert_eq!(dg.warm_start.shots_final, 1 << 18);
        assert_eq!(dg.warm_start.budget, 2000);
    }

    #[test]
    fn later_layers_win() {
        let file = ConfigOverrides {
            instances: Some(5),
            budget: Some(100),
            ..Default::default()
        };
        let flags = ConfigOverrides {
            instances: Some(7),
            ..Default::default()
        };
        let (cfg, _) = file.layered(flags).resolve().unwrap();
        assert_eq!(cfg.instances, 7);
        assert_eq!(cfg.warm_start.budget, 100);
    }

    #[test]
    fn toml_and_json_files_load() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("c.toml");
        std::fs::write(&t, "problem = \"dgmvp\"\ngrid = [[3, 2]]\ninstances = 2\n").unwrap();
        let (cfg, _) = ConfigOverrides::load(&t).unwrap().resolve().unwrap();
        assert_eq!(cfg.grid, vec![(3, 2)]);
        let j = dir.path().join("c.json");
        std::fs::write(&j, r#"{"problem": "maxcut", "sizes": [6], "order": 3}"#).unwrap();
        let (cfg, _) = ConfigOverrides::load(&j).unwrap().resolve().unwrap();
        assert_eq!(cfg.warm_start.selection, Selection::Order(3));
        std::fs::write(&j, r#"{"unknown": 1}"#).unwrap();
        assert!(matches!(ConfigOverrides::load(&j), Err(CliError::Usage(_))));
    }

    #[test]
    fn invalid_counts_are_usage_errors() {
        let bad = ConfigOverrides {
            instances: Some(0),
            ..Default::default()
        };
        assert!(matches!(bad.resolve(), Err(CliError::Usage(_))));
        let odd = ConfigOverrides {
            sizes: Some(vec![7]),
            ..Default::default()
        };
        assert!(matches!(odd.resolve(), Err(CliError::Usage(_))));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::preset(ProblemKind::Maxcut, Scale::Desk);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.master_seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn points_parse() {
        assert_eq!(parse_point("4x3"), Ok((4, 3)));
        assert_eq!(parse_point("2,1"), Ok((2, 1)));
        assert!(parse_point("4").is_err());
    }
}
