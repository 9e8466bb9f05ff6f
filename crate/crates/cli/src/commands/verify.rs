use std::f64::consts::TAU;

use rand::Rng;
use wsqaoa::ansatz::{alpha_g6_landscape, build_dgmvp_cost, build_maxcut_cost, build_nn_mixer};
use wsqaoa::graphs::{brute_force_maxcut, complete_graph, petersen_graph};
use wsqaoa::portfolio::{classical_sampler_prob, feasible_count, gen_instance, PortfolioInstance};
use wsqaoa::seed::{derive_seed, rng_from_seed};
use wsqaoa::statevector::StateVector;

use crate::CliError;

const G6_VALUE: f64 = 0.6924;
const G6_TOL: f64 = 5e-4;
const G6_GAMMA_DEG: f64 = 17.8;
const G6_BETA_DEG: f64 = 22.5;
const ANGLE_TOL_DEG: f64 = 0.5;
const ORACLE_TOL: f64 = 1e-10;
const VERIFY_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum VerifyTarget {
    G6,
    Oracles,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        pass,
        detail,
    }
}

fn g6_checks() -> Result<Vec<Check>, CliError> {
    let best = alpha_g6_landscape(512)?;
    let gamma = best.gamma.to_degrees();
    let beta = best.beta.to_degrees();
    Ok(vec![
        check(
            "g6 maximum",
            (best.value - G6_VALUE).abs() <= G6_TOL,
            format!("{:.6} (expected {G6_VALUE} +- {G6_TOL})", best.value),
        ),
        check(
            "g6 argmax",
            (gamma - G6_GAMMA_DEG).abs() <= ANGLE_TOL_DEG
                && (beta.abs() - G6_BETA_DEG).abs() <= ANGLE_TOL_DEG,
            format!("gamma {gamma:.3} deg, beta {beta:.3} deg"),
        ),
    ])
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect()
}

fn oracle_checks() -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();

    let mut worst: f64 = 0.0;
    for (k, (n, l)) in [(2, 2), (3, 2), (2, 3)].into_iter().enumerate() {
        let inst = gen_instance(n, l, derive_seed(VERIFY_SEED, 1, k as u64))?;
        let cost = build_dgmvp_cost(&inst)?;
        let dim = 1usize << inst.n_qubits();
        let base = cost.value(0) - inst.classical_cost_of_index(0);
        for z in 0..dim {
            worst = worst.max((cost.value(z) - inst.classical_cost_of_index(z) - base).abs());
        }
    }
    checks.push(check(
        "dgmvp diagonal vs classical cost",
        worst <= ORACLE_TOL,
        format!("max deviation {worst:.2e} over (2,2), (3,2), (2,3)"),
    ));

    let mut mismatched = Vec::new();
    for (name, g) in [("K4", complete_graph(4)), ("Petersen", petersen_graph())] {
        let cost = build_maxcut_cost(&g)?;
        let best = brute_force_maxcut(&g)?;
        let diag_ok = (0..1usize << g.n_vertices()).all(|z| cost.value(z) == g.cut_value(z) as f64);
        if !diag_ok || cost.max() != best.c_max as f64 {
            mismatched.push(name);
        }
    }
    checks.push(check(
        "maxcut diagonal vs cut counting",
        mismatched.is_empty(),
        if mismatched.is_empty() {
            "K4 and Petersen agree".into()
        } else {
            format!("mismatch on {mismatched:?}")
        },
    ));

    let mut leak: f64 = 0.0;
    for trial in 0..20 {
        let mut rng = rng_from_seed(derive_seed(VERIFY_SEED, 2, trial));
        let inst = gen_instance(3, 2, rng.random())?;
        let mixer = build_nn_mixer(&inst)?;
        let feasible = inst.feasible_indices();
        let weights: Vec<(usize, f64)> = feasible
            .iter()
            .map(|&z| (z, rng.random::<f64>() + 1e-3))
            .collect();
        let mut state = StateVector::superposition(inst.n_qubits(), &weights)?;
        mixer.apply(&mut state, rng.random_range(-TAU..TAU))?;
        let outside: f64 = (0..state.dim())
            .filter(|&z| !inst.is_feasible_index(z))
            .map(|z| state.probability(z))
            .sum();
        leak = leak.max(outside);
    }
    checks.push(check(
        "nearest-neighbour mixer keeps the budget",
        leak < ORACLE_TOL,
        format!("max probability outside the budget {leak:.2e}"),
    ));

    let mut bad = Vec::new();
    for n in 1..=5 {
        for l in 1..=3 {
            let counted = PortfolioInstance::new(n, l, identity(n))?
                .enumerate_feasible()
                .len();
            if feasible_count(n, l)?.to_string() != counted.to_string() {
                bad.push((n, l));
            }
        }
    }
    let pc = classical_sampler_prob(4, 3)?;
    checks.push(check(
        "feasible-count formula",
        bad.is_empty() && pc == 1.0 / 120.0,
        format!("n <= 5, l <= 3 enumerated; P_c(4,3) = {pc}; mismatches {bad:?}"),
    ));
    Ok(checks)
}

pub fn cmd_verify(target: VerifyTarget) -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();
    if matches!(target, VerifyTarget::G6 | VerifyTarget::All) {
        out.extend(g6_checks()?);
    }
    if matches!(target, VerifyTarget::Oracles | VerifyTarget::All) {
        out.extend(oracle_checks()?);
    }
    Ok(out)
}
