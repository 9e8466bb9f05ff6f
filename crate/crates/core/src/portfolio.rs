//! Discrete global minimum-variance portfolio (DGMVP) instances.
//!
//! Each of `n` assets holds an `l`-bit unsigned integer `u_t` of lots; the
//! weight is `w_t = a * u_t` with lot size `a = 1 / (2^l - 1)`, so the budget
//! constraint `sum w_t = 1` reads `sum u_t = 2^l - 1` in exact integers.
//! Asset `t`, bit `k` (1-based) lives on qubit `t * l + (k - 1)`.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed::rng_from_seed;
use crate::statevector::MAX_QUBITS;

const SYMMETRY_TOLERANCE: f64 = 1e-12;
const PSD_TOLERANCE: f64 = 1e-10;

/// Parameters of the covariance generator, kept alongside the instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceLaw {
    pub factor_rank: usize,
    pub diag_low: f64,
    pub diag_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceJson", into = "InstanceJson")]
pub struct PortfolioInstance {
    n_assets: usize,
    bits_per_asset: usize,
    sigma: Vec<Vec<f64>>,
    seed: Option<u64>,
    law: Option<CovarianceLaw>,
}

#[derive(Serialize, Deserialize)]
struct InstanceJson {
    n: usize,
    l: usize,
    sigma: Vec<Vec<f64>>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    law: Option<CovarianceLaw>,
}

impl TryFrom<InstanceJson> for PortfolioInstance {
    type Error = Error;

    fn try_from(raw: InstanceJson) -> Result<Self> {
        let mut inst = PortfolioInstance::new(raw.n, raw.l, raw.sigma)?;
        inst.seed = raw.seed;
        inst.law = raw.law;
        Ok(inst)
    }
}

impl From<PortfolioInstance> for InstanceJson {
    fn from(inst: PortfolioInstance) -> Self {
        InstanceJson {
            n: inst.n_assets,
            l: inst.bits_per_asset,
            sigma: inst.sigma,
            seed: inst.seed,
            law: inst.law,
        }
    }
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(matrix: &[Vec<f64>]) -> Vec<f64> {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = (t * t + 1.0).sqrt().recip();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

impl PortfolioInstance {
    pub fn new(n_assets: usize, bits_per_asset: usize, sigma: Vec<Vec<f64>>) -> Result<Self> {
        if n_assets == 0 || bits_per_asset == 0 {
            return Err(invalid("need at least one asset and one bit per asset"));
        }
        if n_assets * bits_per_asset > MAX_QUBITS {
            return Err(Error::Resource(format!(
                "n*l = {} exceeds the {MAX_QUBITS}-qubit limit",
                n_assets * bits_per_asset
            )));
        }
        if sigma.len() != n_assets || sigma.iter().any(|row| row.len() != n_assets) {
            return Err(invalid(format!("covariance must be {n_assets}x{n_assets}")));
        }
        if sigma.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("covariance has non-finite entries"));
        }
        for i in 0..n_assets {
            for j in 0..i {
                if (sigma[i][j] - sigma[j][i]).abs() > SYMMETRY_TOLERANCE {
                    return Err(invalid(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        let min_eig = symmetric_eigenvalues(&sigma)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOLERANCE {
            return Err(invalid(format!(
                "covariance is not positive semidefinite (min eigenvalue {min_eig})"
            )));
        }
        Ok(Self {
            n_assets,
            bits_per_asset,
            sigma,
            seed: None,
            law: None,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn bits_per_asset(&self) -> usize {
        self.bits_per_asset
    }

    pub fn n_qubits(&self) -> usize {
        self.n_assets * self.bits_per_asset
    }

    pub fn sigma(&self) -> &[Vec<f64>] {
        &self.sigma
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn law(&self) -> Option<CovarianceLaw> {
        self.law
    }

    /// Total budget in lots, `2^l - 1`.
    pub fn budget_units(&self) -> u32 {
        (1u32 << self.bits_per_asset) - 1
    }

    /// Lot size `a = 1 / (2^l - 1)`.
    pub fn lot(&self) -> f64 {
        1.0 / f64::from(self.budget_units())
    }

    /// Qubit carrying bit `k` (1-based) of asset `t`.
    pub fn qubit(&self, asset: usize, bit: usize) -> usize {
        debug_assert!(bit >= 1 && bit <= self.bits_per_asset);
        asset * self.bits_per_asset + bit - 1
    }

    /// Lot counts encoded by a basis index.
    pub fn units_of_index(&self, index: usize) -> WeightVector {
        let l = self.bits_per_asset;
        let mask = (1usize << l) - 1;
        WeightVector {
            units: (0..self.n_assets)
                .map(|t| ((index >> (t * l)) & mask) as u32)
                .collect(),
        }
    }

    pub fn index_of_units(&self, w: &WeightVector) -> Result<usize> {
        self.check_weights(w)?;
        Ok(w.units.iter().enumerate().fold(0usize, |acc, (t, &u)| {
            acc | (u as usize) << (t * self.bits_per_asset)
        }))
    }

    fn check_weights(&self, w: &WeightVector) -> Result<()> {
        if w.units.len() != self.n_assets {
            return Err(invalid(format!(
                "weight vector has {} entries, expected {}",
                w.units.len(),
                self.n_assets
            )));
        }
        if let Some(u) = w.units.iter().find(|&&u| u > self.budget_units()) {
            return Err(invalid(format!(
                "{u} lots do not fit in {} bits",
                self.bits_per_asset
            )));
        }
        Ok(())
    }

    pub fn is_feasible(&self, w: &WeightVector) -> bool {
        w.units.iter().sum::<u32>() == self.budget_units()
    }

    pub fn is_feasible_index(&self, index: usize) -> bool {
        self.is_feasible(&self.units_of_index(index))
    }

    /// `w^T Sigma w` with `w_t = a u_t`.
    pub fn classical_cost(&self, w: &WeightVector) -> Result<f64> {
        self.check_weights(w)?;
        Ok(self.cost_unchecked(&w.units))
    }

    pub fn classical_cost_of_index(&self, index: usize) -> f64 {
        self.cost_unchecked(&self.units_of_index(index).units)
    }

    fn cost_unchecked(&self, units: &[u32]) -> f64 {
        let a = self.lot();
        let w: Vec<f64> = units.iter().map(|&u| a * f64::from(u)).collect();
        self.sigma
            .iter()
            .zip(&w)
            .map(|(row, wi)| wi * row.iter().zip(&w).map(|(s, wj)| s * wj).sum::<f64>())
            .sum()
    }

    /// All budget-feasible allocations, in lexicographic order of lot counts.
    pub fn enumerate_feasible(&self) -> Vec<WeightVector> {
        fn fill(rest: u32, slots: usize, prefix: &mut Vec<u32>, out: &mut Vec<WeightVector>) {
            if slots == 1 {
                prefix.push(rest);
                out.push(WeightVector {
                    units: prefix.clone(),
                });
                prefix.pop();
                return;
            }
            for u in 0..=rest {
                prefix.push(u);
                fill(rest - u, slots - 1, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        fill(
            self.budget_units(),
            self.n_assets,
            &mut Vec::new(),
            &mut out,
        );
        out
    }

    pub fn feasible_indices(&self) -> Vec<usize> {
        self.enumerate_feasible()
            .iter()
            .map(|w| {
                self.index_of_units(w)
                    .expect("enumerated weights are in range")
            })
            .collect()
    }

    /// Exact extrema of the cost over the feasible set.
    pub fn brute_force_extrema(&self) -> Extrema {
        let mut f_min = f64::INFINITY;
        let mut f_max = f64::NEG_INFINITY;
        let scored: Vec<(usize, f64)> = self
            .feasible_indices()
            .into_iter()
            .map(|z| (z, self.classical_cost_of_index(z)))
            .collect();
        for &(_, c) in &scored {
            f_min = f_min.min(c);
            f_max = f_max.max(c);
        }
        let tol = cost_tolerance(f_min);
        let minimizers = scored
            .iter()
            .filter(|(_, c)| *c <= f_min + tol)
            .map(|&(z, _)| z)
            .collect();
        Extrema {
            f_min,
            f_max,
            minimizers,
        }
    }

    /// Basis state with all `l` bits of `asset` set and every other qubit clear.
    pub fn maxbias_index(&self, asset: usize) -> Result<usize> {
        if asset >= self.n_assets {
            return Err(invalid(format!(
                "asset {asset} out of range for {} assets",
                self.n_assets
            )));
        }
        Ok((self.budget_units() as usize) << (asset * self.bits_per_asset))
    }
}

/// Absolute slack used when deciding whether a cost equals the optimum.
pub fn cost_tolerance(reference: f64) -> f64 {
    1e-12 * reference.abs().max(1.0)
}

/// Lot counts per asset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WeightVector {
    pub units: Vec<u32>,
}

impl WeightVector {
    pub fn new(units: Vec<u32>) -> Self {
        Self { units }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extrema {
    pub f_min: f64,
    pub f_max: f64,
    /// Basis indices of global minimisers.
    pub minimizers: Vec<usize>,
}

/// Random instance with `Sigma = F F^T + diag(d)`, `F` an `n x r` standard
/// normal matrix with `r = max(1, n/2)` and `d_i ~ U(0.1, 0.5)`.
pub fn gen_instance(
    n_assets: usize,
    bits_per_asset: usize,
    seed: u64,
) -> Result<PortfolioInstance> {
    if n_assets < 2 || bits_per_asset < 1 {
        return Err(invalid("random instances need n >= 2 and l >= 1"));
    }
    if n_assets * bits_per_asset > MAX_QUBITS {
        return Err(Error::Resource(format!(
            "n*l = {} exceeds the {MAX_QUBITS}-qubit limit",
            n_assets * bits_per_asset
        )));
    }
    let law = CovarianceLaw {
        factor_rank: (n_assets / 2).max(1),
        diag_low: 0.1,
        diag_high: 0.5,
    };
    let mut rng = rng_from_seed(seed);
    let factors: Vec<Vec<f64>> = (0..n_assets)
        .map(|_| {
            (0..law.factor_rank)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let diag: Vec<f64> = (0..n_assets)
        .map(|_| rng.random_range(law.diag_low..law.diag_high))
        .collect();
    let mut sigma = vec![vec![0.0; n_assets]; n_assets];
    for i in 0..n_assets {
        for j in 0..=i {
            let v: f64 = factors[i].iter().zip(&factors[j]).map(|(x, y)| x * y).sum();
            sigma[i][j] = v;
            sigma[j][i] = v;
        }
        sigma[i][i] += diag[i];
    }
    let mut inst = PortfolioInstance::new(n_assets, bits_per_asset, sigma)?;
    inst.seed = Some(seed);
    inst.law = Some(law);
    Ok(inst)
}

/// `B(n, l) = C(2^l + n - 2, n - 1)`, the number of feasible allocations.
pub fn feasible_count(n_assets: usize, bits_per_asset: usize) -> Result<BigUint> {
    if n_assets == 0 || bits_per_asset == 0 {
        return Err(invalid("need n >= 1 and l >= 1"));
    }
    if bits_per_asset >= 64 {
        return Err(Error::Resource(format!("2^{bits_per_asset} lots overflow")));
    }
    let top = BigUint::from((1u64 << bits_per_asset) + n_assets as u64 - 2);
    let k = n_assets as u64 - 1;
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (&top - BigUint::from(i)) / BigUint::from(i + 1);
    }
    Ok(acc)
}

/// Probability that a uniform sampler over the feasible set hits a given optimum.
pub fn classical_sampler_prob(n_assets: usize, bits_per_asset: usize) -> Result<f64> {
    let count = feasible_count(n_assets, bits_per_asset)?;
    let denom = count
        .to_f64()
        .filter(|d| d.is_finite())
        .ok_or_else(|| Error::Resource("feasible count overflows f64".into()))?;
    Ok(1.0 / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    /// Counts feasible allocations by scanning every basis state.
    fn exhaustive_feasible_count(n: usize, l: usize) -> usize {
        let inst = PortfolioInstance::new(n, l, identity(n)).unwrap();
        (0..1usize << (n * l))
            .filter(|&z| inst.is_feasible_index(z))
            .count()
    }

    #[test]
    fn generated_instances_are_psd_and_deterministic() {
        for seed in 0..10 {
            let inst = gen_instance(5, 2, seed).unwrap();
            let min = symmetric_eigenvalues(inst.sigma())
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            assert!(min > 0.0, "min eigenvalue {min}");
        }
        assert_eq!(
            gen_instance(4, 3, 8).unwrap(),
            gen_instance(4, 3, 8).unwrap()
        );
        let small = gen_instance(2, 1, 1).unwrap();
        assert_eq!(small.sigma().len(), 2);
        assert_eq!(small.lot(), 1.0);
        assert!(gen_instance(1, 2, 0).is_err());
        assert!(matches!(gen_instance(5, 5, 0), Err(Error::Resource(_))));
    }

    #[test]
    fn eigenvalues_of_known_matrix() {
        let m = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let mut e = symmetric_eigenvalues(&m);
        e.sort_by(f64::total_cmp);
        assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12);
        let not_psd = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(PortfolioInstance::new(2, 1, not_psd).is_err());
        let asym = vec![vec![1.0, 0.1], vec![0.0, 1.0]];
        assert!(PortfolioInstance::new(2, 1, asym).is_err());
    }

    #[test]
    fn classical_cost_examples() {
        let inst = gen_instance(3, 2, 4).unwrap();
        for t in 0..3 {
            let mut units = vec![0; 3];
            units[t] = 3;
            let c = inst.classical_cost(&WeightVector::new(units)).unwrap();
            assert!((c - inst.sigma()[t][t]).abs() < 1e-12);
        }
        let id = PortfolioInstance::new(2, 1, identity(2)).unwrap();
        assert_eq!(
            id.classical_cost(&WeightVector::new(vec![1, 0])).unwrap(),
            1.0
        );
        assert!(id.classical_cost(&WeightVector::new(vec![1])).is_err());
        assert!(id.classical_cost(&WeightVector::new(vec![2, 0])).is_err());
    }

    #[test]
    fn classical_cost_matches_triple_loop() {
        let inst = gen_instance(4, 3, 12).unwrap();
        let mut rng = rng_from_seed(99);
        for _ in 0..50 {
            let units: Vec<u32> = (0..4).map(|_| rng.random_range(0..8)).collect();
            let a = inst.lot();
            let mut naive = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    naive += a * f64::from(units[i]) * inst.sigma()[i][j] * a * f64::from(units[j]);
                }
            }
            let c = inst.classical_cost(&WeightVector::new(units)).unwrap();
            assert!((c - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn feasible_enumeration() {
        let inst = gen_instance(4, 3, 0).unwrap();
        let all = inst.enumerate_feasible();
        assert_eq!(all.len(), 120);
        assert!(all.iter().all(|w| w.units.iter().sum::<u32>() == 7));
        let two = PortfolioInstance::new(2, 1, identity(2))
            .unwrap()
            .enumerate_feasible();
        assert_eq!(
            two,
            vec![WeightVector::new(vec![0, 1]), WeightVector::new(vec![1, 0])]
        );
        for l in 1..4 {
            let one = PortfolioInstance::new(1, l, identity(1))
                .unwrap()
                .enumerate_feasible();
            assert_eq!(one, vec![WeightVector::new(vec![(1 << l) - 1])]);
        }
    }

    #[test]
    fn feasible_count_formula_matches_exhaustive_scan() {
        for n in 1..=5 {
            for l in 1..=3 {
                if n * l > 15 {
                    continue;
                }
                let formula = feasible_count(n, l).unwrap().to_usize().unwrap();
                assert_eq!(formula, exhaustive_feasible_count(n, l), "n={n} l={l}");
            }
        }
        assert_eq!(feasible_count(4, 3).unwrap(), BigUint::from(120u32));
    }

    #[test]
    fn sampler_probability() {
        assert_eq!(classical_sampler_prob(4, 3).unwrap(), 1.0 / 120.0);
        assert_eq!(classical_sampler_prob(2, 1).unwrap(), 0.5);
        assert_eq!(classical_sampler_prob(1, 5).unwrap(), 1.0);
        // far beyond u64, still exact as a big integer
        assert!(classical_sampler_prob(30, 20).unwrap() > 0.0);
        assert!(matches!(
            classical_sampler_prob(30, 40),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn extrema_identity_case() {
        let inst = PortfolioInstance::new(2, 2, identity(2)).unwrap();
        let ex = inst.brute_force_extrema();
        assert!((ex.f_min - 5.0 / 9.0).abs() < 1e-15);
        assert!((ex.f_max - 1.0).abs() < 1e-15);
        let mut mins: Vec<_> = ex
            .minimizers
            .iter()
            .map(|&z| inst.units_of_index(z).units)
            .collect();
        mins.sort();
        assert_eq!(mins, vec![vec![1, 2], vec![2, 1]]);
        let random = gen_instance(3, 2, 5).unwrap().brute_force_extrema();
        assert!(random.f_min <= random.f_max && !random.minimizers.is_empty());
    }

    #[test]
    fn maxbias_layout() {
        let inst = PortfolioInstance::new(2, 2, identity(2)).unwrap();
        let z = inst.maxbias_index(0).unwrap();
        assert_eq!(crate::statevector::format_bitstring(4, z), "1100");
        assert!(inst.is_feasible_index(z));
        assert!(inst.maxbias_index(2).is_err());
    }

    #[test]
    fn instance_json_schema() {
        let inst = gen_instance(2, 1, 3).unwrap();
        let text = serde_json::to_string(&inst).unwrap();
        assert!(text.starts_with(r#"{"n":2,"l":1,"sigma":[["#));
        assert!(text.contains(r#""seed":3"#));
        let back: PortfolioInstance = serde_json::from_str(&text).unwrap();
        assert_eq!(back, inst);
    }
}
