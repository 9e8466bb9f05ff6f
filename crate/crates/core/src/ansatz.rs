//! QAOA circuits: cost operators, mixers and p=1 landscape analytics.
//!
//! The MaxCut ansatz uses the transverse-field mixer `exp(-i beta sum X)` from
//! the uniform superposition. The portfolio ansatz uses a ring of
//! budget-preserving two-level rotations from a single-asset basis state.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graphs::Graph;
use crate::portfolio::PortfolioInstance;
use crate::statevector::{DiagonalCost, StateVector, TwoLevelRotation, MAX_QUBITS};

/// Angles of a depth-`p` circuit; layer `j` applies `gammas[j]` then `betas[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaParams {
    gammas: Vec<f64>,
    betas: Vec<f64>,
}

impl QaoaParams {
    pub fn new(gammas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() || gammas.len() != betas.len() {
            return Err(invalid(format!(
                "need p >= 1 equal-length angle lists, got {} gammas and {} betas",
                gammas.len(),
                betas.len()
            )));
        }
        if gammas.iter().chain(&betas).any(|v| !v.is_finite()) {
            return Err(invalid("angles must be finite"));
        }
        Ok(Self { gammas, betas })
    }

    pub fn zeros(p: usize) -> Result<Self> {
        Self::new(vec![0.0; p], vec![0.0; p])
    }

    /// Interleaved `(gamma_1, beta_1, ..., gamma_p, beta_p)`.
    pub fn from_flat(theta: &[f64]) -> Result<Self> {
        if theta.len() % 2 != 0 {
            return Err(invalid("flat angle vector must have even length"));
        }
        let gammas = theta.iter().step_by(2).copied().collect();
        let betas = theta.iter().skip(1).step_by(2).copied().collect();
        Self::new(gammas, betas)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.gammas
            .iter()
            .zip(&self.betas)
            .flat_map(|(g, b)| [*g, *b])
            .collect()
    }

    pub fn depth(&self) -> usize {
        self.gammas.len()
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }
}

/// `sum_(u,v) (1 - Z_u Z_v) / 2`, evaluated term by term on every basis state.
pub fn build_maxcut_cost(graph: &Graph) -> Result<DiagonalCost> {
    let n = graph.n_vertices();
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Resource(format!(
            "{n} vertices outside 1..={MAX_QUBITS}"
        )));
    }
    let mut values = vec![0.0; 1 << n];
    for &(u, v) in graph.edges() {
        for (z, val) in values.iter_mut().enumerate() {
            let zu = 1.0 - 2.0 * ((z >> u) & 1) as f64;
            let zv = 1.0 - 2.0 * ((z >> v) & 1) as f64;
            *val += (1.0 - zu * zv) / 2.0;
        }
    }
    DiagonalCost::new(values)
}

/// Ising form of the portfolio variance: `offset + sum h_q Z_q + sum J_qr Z_q Z_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingExpansion {
    pub offset: f64,
    /// Coefficient of `Z_q`, indexed by qubit.
    pub linear: Vec<f64>,
    /// `(q, r, J_qr)` with `q < r`.
    pub couplings: Vec<(usize, usize, f64)>,
}

impl IsingExpansion {
    fn evaluate(&self, z: usize, with_offset: bool) -> f64 {
        let spin = |q: usize| 1.0 - 2.0 * ((z >> q) & 1) as f64;
        let lin: f64 = self
            .linear
            .iter()
            .enumerate()
            .map(|(q, h)| h * spin(q))
            .sum();
        let quad: f64 = self
            .couplings
            .iter()
            .map(|&(q, r, j)| j * spin(q) * spin(r))
            .sum();
        lin + quad + if with_offset { self.offset } else { 0.0 }
    }
}

/// Expands `w^T Sigma w` with `w_t = sum_k 2^(k-1) a x_(t,k)` and `x = (1 - Z)/2`.
pub fn dgmvp_expansion(instance: &PortfolioInstance) -> IsingExpansion {
    let l = instance.bits_per_asset();
    let nq = instance.n_qubits();
    let a = instance.lot();
    let sigma = instance.sigma();
    let asset = |q: usize| q / l;
    let weight = |q: usize| a * f64::from(1u32 << (q % l));
    // x^T Q x with Q_qr = sigma_(t(q) t(r)) b_q b_r
    let q_mat = |q: usize, r: usize| sigma[asset(q)][asset(r)] * weight(q) * weight(r);

    let mut offset = 0.0;
    let mut linear = vec![0.0; nq];
    let mut couplings = Vec::new();
    for q in 0..nq {
        offset += q_mat(q, q) / 2.0;
        linear[q] -= q_mat(q, q) / 2.0;
        for r in 0..nq {
            if r == q {
                continue;
            }
            let v = q_mat(q, r);
            offset += v / 4.0;
            linear[q] -= v / 4.0;
            linear[r] -= v / 4.0;
        }
        for r in q + 1..nq {
            couplings.push((q, r, (q_mat(q, r) + q_mat(r, q)) / 4.0));
        }
    }
    IsingExpansion {
        offset,
        linear,
        couplings,
    }
}

/// Diagonal portfolio cost with the constant offset dropped.
pub fn build_dgmvp_cost(instance: &PortfolioInstance) -> Result<DiagonalCost> {
    let expansion = dgmvp_expansion(instance);
    let values = (0..1usize << instance.n_qubits())
        .map(|z| expansion.evaluate(z, false))
        .collect();
    DiagonalCost::new(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Moves one unit of bit `k` between neighbouring assets.
    Swap,
    /// Trades bit `k` of both assets for bit `k+1` of the first.
    Promote,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixerGenerator {
    pub kind: GeneratorKind,
    /// `(t, t')` with `t = t' + 1 mod n`.
    pub pair: (usize, usize),
    /// 1-based bit index.
    pub bit: usize,
    pub rotation: TwoLevelRotation,
}

/// Ordered budget-preserving rotations making up one application of the ring mixer.
#[derive(Debug, Clone, PartialEq)]
pub struct MixerSchedule {
    n_qubits: usize,
    generators: Vec<MixerGenerator>,
}

impl MixerSchedule {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn generators(&self) -> &[MixerGenerator] {
        &self.generators
    }

    /// Human-readable ordering, stored with results.
    pub fn describe(&self) -> String {
        self.generators
            .iter()
            .map(|g| {
                let tag = match g.kind {
                    GeneratorKind::Swap => "S",
                    GeneratorKind::Promote => "P",
                };
                format!("{tag}{}({},{})", g.bit, g.pair.0, g.pair.1)
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn apply(&self, state: &mut StateVector, beta: f64) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(invalid(format!(
                "mixer acts on {} qubits, state has {}",
                self.n_qubits,
                state.n_qubits()
            )));
        }
        for g in &self.generators {
            state.apply_two_level_rotation(&g.rotation.with_angle(beta))?;
        }
        Ok(())
    }
}

/// Ring mixer over asset pairs `(t'+1 mod n, t')` for `t' = 0..n`.
///
/// With two assets the ring has a single edge, so only the pair `(1, 0)` is
/// used; adding `(0, 1)` would undo the swap rotations.
///
/// Each pair contributes, in application order, the swap block over all bits,
/// the promote block over odd `k`, the promote block over even `k`, and the
/// swap block again. Promotions only run for `k < l`: wrapping `k = l` onto
/// bit 1 would not conserve the lot count.
pub fn build_nn_mixer(instance: &PortfolioInstance) -> Result<MixerSchedule> {
    let n = instance.n_assets();
    let l = instance.bits_per_asset();
    if n < 2 {
        return Err(invalid("the ring mixer needs at least two assets"));
    }
    let bit = |t: usize, k: usize| 1usize << instance.qubit(t, k);
    let units = |z: usize| instance.units_of_index(z).units.iter().sum::<u32>();

    let mut generators = Vec::new();
    let mut push =
        |kind, pair: (usize, usize), k: usize, source: usize, target: usize| -> Result<()> {
            // both patterns must carry the same number of lots
            if units(source) != units(target) {
                return Err(Error::Degenerate(format!(
                    "generator {kind:?} k={k} on {pair:?} does not conserve the budget"
                )));
            }
            generators.push(MixerGenerator {
                kind,
                pair,
                bit: k,
                rotation: TwoLevelRotation::new(source, target, 0.0)?,
            });
            Ok(())
        };

    let ring_len = if n == 2 { 1 } else { n };
    for tp in 0..ring_len {
        let t = (tp + 1) % n;
        let pair = (t, tp);
        let swaps = |push: &mut dyn FnMut(
            GeneratorKind,
            (usize, usize),
            usize,
            usize,
            usize,
        ) -> Result<()>| {
            (1..=l).try_for_each(|k| push(GeneratorKind::Swap, pair, k, bit(t, k), bit(tp, k)))
        };
        let promotes = |push: &mut dyn FnMut(
            GeneratorKind,
            (usize, usize),
            usize,
            usize,
            usize,
        ) -> Result<()>,
                        parity: usize| {
            (1..l).filter(|k| k % 2 == parity).try_for_each(|k| {
                push(
                    GeneratorKind::Promote,
                    pair,
                    k,
                    bit(t, k + 1),
                    bit(t, k) | bit(tp, k),
                )
            })
        };
        swaps(&mut push)?;
        promotes(&mut push, 1)?;
        promotes(&mut push, 0)?;
        swaps(&mut push)?;
    }
    Ok(MixerSchedule {
        n_qubits: instance.n_qubits(),
        generators,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mixer {
    /// `exp(-i beta sum_q X_q)`.
    Transverse,
    NearestNeighbour(MixerSchedule),
}

impl Mixer {
    pub fn apply(&self, state: &mut StateVector, beta: f64) -> Result<()> {
        match self {
            Mixer::Transverse => {
                state.apply_x_mixer(beta);
                Ok(())
            }
            Mixer::NearestNeighbour(schedule) => schedule.apply(state, beta),
        }
    }
}

pub fn apply_qaoa(
    initial: &StateVector,
    cost: &DiagonalCost,
    mixer: &Mixer,
    params: &QaoaParams,
) -> Result<StateVector> {
    let mut state = initial.clone();
    for (&gamma, &beta) in params.gammas.iter().zip(&params.betas) {
        state.apply_diagonal_phase(cost, gamma)?;
        mixer.apply(&mut state, beta)?;
    }
    Ok(state)
}

/// All of the budget on `asset`.
pub fn maxbias_state(instance: &PortfolioInstance, asset: usize) -> Result<StateVector> {
    StateVector::basis_index(instance.n_qubits(), instance.maxbias_index(asset)?)
}

/// Maximum of a two-angle function found by grid scan plus local polish.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeMaximum {
    pub value: f64,
    pub gamma: f64,
    pub beta: f64,
    pub resolution: usize,
    /// Row-major grid values, `grid[i * resolution + j]` at `(gamma_i, beta_j)`.
    pub grid: Vec<f64>,
}

/// Scans `[0, gamma_period) x [0, beta_period)` on a square grid, then refines
/// the best cell by compass search.
pub fn maximize_landscape(
    f: impl Fn(f64, f64) -> f64 + Sync,
    gamma_period: f64,
    beta_period: f64,
    resolution: usize,
) -> Result<LandscapeMaximum> {
    use rayon::prelude::*;
    if resolution < 2 {
        return Err(invalid("grid resolution must be at least 2"));
    }
    let dg = gamma_period / resolution as f64;
    let db = beta_period / resolution as f64;
    let grid: Vec<f64> = (0..resolution * resolution)
        .into_par_iter()
        .map(|idx| {
            f(
                (idx / resolution) as f64 * dg,
                (idx % resolution) as f64 * db,
            )
        })
        .collect();
    let (best_idx, _) =
        grid.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
    let mut gamma = (best_idx / resolution) as f64 * dg;
    let mut beta = (best_idx % resolution) as f64 * db;
    let mut value = grid[best_idx];
    let (mut sg, mut sb) = (dg, db);
    while sg > 1e-12 || sb > 1e-12 {
        let mut moved = false;
        for (g, b) in [
            (gamma + sg, beta),
            (gamma - sg, beta),
            (gamma, beta + sb),
            (gamma, beta - sb),
        ] {
            let v = f(g, b);
            if v > value {
                value = v;
                gamma = g;
                beta = b;
                moved = true;
            }
        }
        if !moved {
            sg *= 0.5;
            sb *= 0.5;
        }
    }
    Ok(LandscapeMaximum {
        value,
        gamma: gamma.rem_euclid(gamma_period),
        beta: beta.rem_euclid(beta_period),
        resolution,
        grid,
    })
}

/// Expected cut of an edge whose radius-1 neighbourhood is a tree (both
/// endpoints have two further distinct neighbours), at p = 1.
///
/// Qubits 2 and 3 are the edge endpoints; 0, 1 hang off 2 and 4, 5 off 3.
pub fn g6_edge_cut(gamma: f64, beta: f64) -> f64 {
    const EDGES: [(usize, usize); 5] = [(0, 2), (1, 2), (2, 3), (3, 4), (3, 5)];
    let mut state = StateVector::uniform(6).expect("six qubits");
    let mut phases = [0.0; 64];
    for (z, ph) in phases.iter_mut().enumerate() {
        *ph = EDGES
            .iter()
            .map(|&(u, v)| {
                if ((z >> u) ^ (z >> v)) & 1 == 1 {
                    -1.0
                } else {
                    1.0
                }
            })
            .sum();
    }
    let cost = DiagonalCost::new(phases.to_vec()).expect("64 values");
    state
        .apply_diagonal_phase(&cost, gamma)
        .expect("matching size");
    state.apply_rx_half(2, beta).expect("qubit in range");
    state.apply_rx_half(3, beta).expect("qubit in range");
    state
        .probabilities()
        .iter()
        .enumerate()
        .filter(|(z, _)| ((z >> 2) ^ (z >> 3)) & 1 == 1)
        .map(|(_, p)| p)
        .sum()
}

/// p = 1 landscape of [`g6_edge_cut`] over one period in each angle.
///
/// The landscape has period `pi` in gamma and `pi/2` in beta and is symmetric
/// under `(gamma, beta) -> (-gamma, -beta)`. Among the equivalent peaks the
/// reported argmax is the one with the smallest `|gamma|`, then `|beta|`, with
/// `gamma >= 0` and `beta` in `(-pi/4, pi/4]`.
pub fn alpha_g6_landscape(resolution: usize) -> Result<LandscapeMaximum> {
    if resolution < 256 {
        return Err(invalid("g6 landscape needs at least 256 points per axis"));
    }
    let mut best = maximize_landscape(g6_edge_cut, PI, FRAC_PI_2, resolution)?;
    let fold = |x: f64, period: f64| {
        let r = x.rem_euclid(period);
        if r > period / 2.0 {
            r - period
        } else {
            r
        }
    };
    let mut images = Vec::new();
    for sg in [1.0, -1.0] {
        for sb in [1.0, -1.0] {
            for k in 0..4 {
                let g = fold(sg * best.gamma + k as f64 * FRAC_PI_4, PI);
                let b = fold(sb * best.beta, FRAC_PI_2);
                if g >= 0.0 && (g6_edge_cut(g, b) - best.value).abs() < 1e-12 {
                    images.push((g, b));
                }
            }
        }
    }
    if let Some(&(g, b)) = images.iter().min_by(|x, y| {
        (x.0, x.1.abs())
            .partial_cmp(&(y.0, y.1.abs()))
            .expect("finite angles")
    }) {
        best.gamma = g;
        best.beta = b;
    }
    Ok(best)
}

/// Exact p = 1 optimum of the MaxCut expectation from the uniform state.
pub fn maxcut_p1_optimum(graph: &Graph, resolution: usize) -> Result<LandscapeMaximum> {
    let cost = build_maxcut_cost(graph)?;
    let start = StateVector::uniform(graph.n_vertices())?;
    let eval = |gamma: f64, beta: f64| {
        let params = QaoaParams::new(vec![gamma], vec![beta]).expect("one layer");
        apply_qaoa(&start, &cost, &Mixer::Transverse, &params)
            .and_then(|s| s.expectation(&cost))
            .expect("consistent sizes")
    };
    maximize_landscape(eval, TAU, PI, resolution)
}
