//! Dense statevector simulation.
//!
//! Basis index bit `k` (little-endian, bit 0 least significant) is qubit `k`.
//! Bitstrings are written qubit 0 first: `"100"` on three qubits is index 1.
//! Global phase is never normalised away; compare states with
//! [`StateVector::overlap`] magnitudes.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::seed::rng_from_seed;

/// Largest register the simulator will allocate.
pub const MAX_QUBITS: usize = 24;

const NORM_TOLERANCE: f64 = 1e-10;

/// Parses a bitstring (qubit 0 first) into a basis index.
pub fn parse_bitstring(n_qubits: usize, bits: &str) -> Result<usize> {
    if bits.len() != n_qubits {
        return Err(invalid(format!(
            "bitstring {bits:?} has {} bits, expected {n_qubits}",
            bits.len()
        )));
    }
    let mut index = 0usize;
    for (k, ch) in bits.chars().enumerate() {
        match ch {
            '0' => {}
            '1' => index |= 1 << k,
            other => return Err(invalid(format!("bitstring contains {other:?}"))),
        }
    }
    Ok(index)
}

/// Formats a basis index as a bitstring, qubit 0 first.
pub fn format_bitstring(n_qubits: usize, index: usize) -> String {
    (0..n_qubits)
        .map(|k| if index >> k & 1 == 1 { '1' } else { '0' })
        .collect()
}

fn check_qubits(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 {
        return Err(invalid("register needs at least one qubit"));
    }
    if n_qubits > MAX_QUBITS {
        return Err(Error::Resource(format!(
            "{n_qubits} qubits exceeds the {MAX_QUBITS}-qubit limit"
        )));
    }
    Ok(())
}

/// One real cost per computational basis state.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalCost {
    values: Vec<f64>,
    n_qubits: usize,
    // Inclusive integer range when every value is an integer; lets the phase
    // kernel use a lookup table instead of one sin/cos per amplitude.
    integer_range: Option<(i64, i64)>,
}

impl DiagonalCost {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || !values.len().is_power_of_two() {
            return Err(invalid(format!(
                "diagonal length {} is not 2^n with n >= 1",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite cost value {bad}")));
        }
        let n_qubits = values.len().trailing_zeros() as usize;
        check_qubits(n_qubits)?;
        let integer_range = if values.iter().all(|v| v.fract() == 0.0 && v.abs() < 1e6) {
            let lo = values.iter().fold(f64::INFINITY, |a, &b| a.min(b)) as i64;
            let hi = values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) as i64;
            (hi - lo <= 1 << 16).then_some((lo, hi))
        } else {
            None
        };
        Ok(Self {
            values,
            n_qubits,
            integer_range,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Real rotation `exp(angle * G)` with `G = |source><target| - |target><source|`.
///
/// Only the qubits on which `source` and `target` differ take part; every other
/// qubit is a spectator, so the rotation acts on each two-dimensional subspace
/// `{z, z ^ mask}` whose active bits match `source`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelRotation {
    pub source: usize,
    pub target: usize,
    pub angle: f64,
}

impl TwoLevelRotation {
    pub fn new(source: usize, target: usize, angle: f64) -> Result<Self> {
        if source == target {
            return Err(invalid(
                "two-level rotation needs distinct source and target",
            ));
        }
        Ok(Self {
            source,
            target,
            angle,
        })
    }

    pub fn mask(&self) -> usize {
        self.source ^ self.target
    }

    pub fn with_angle(self, angle: f64) -> Self {
        Self { angle, ..self }
    }
}

/// Measured bitstrings and how often each was seen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementDistribution {
    n_qubits: usize,
    counts: BTreeMap<usize, u64>,
    total_shots: u64,
}

impl MeasurementDistribution {
    /// Builds a distribution from basis-index counts. Zero counts are dropped.
    pub fn from_counts(
        n_qubits: usize,
        counts: impl IntoIterator<Item = (usize, u64)>,
    ) -> Result<Self> {
        check_qubits(n_qubits)?;
        let mut map = BTreeMap::new();
        let mut total = 0u64;
        for (index, count) in counts {
            if index >> n_qubits != 0 {
                return Err(invalid(format!(
                    "basis index {index} out of range for {n_qubits} qubits"
                )));
            }
            if count == 0 {
                continue;
            }
            *map.entry(index).or_insert(0) += count;
            total += count;
        }
        Ok(Self {
            n_qubits,
            counts: map,
            total_shots: total,
        })
    }

    /// Same as [`from_counts`](Self::from_counts) but keyed by bitstrings.
    pub fn from_bitstring_counts<'a>(
        n_qubits: usize,
        counts: impl IntoIterator<Item = (&'a str, u64)>,
    ) -> Result<Self> {
        let parsed = counts
            .into_iter()
            .map(|(bits, c)| parse_bitstring(n_qubits, bits).map(|i| (i, c)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_counts(n_qubits, parsed)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn total_shots(&self) -> u64 {
        self.total_shots
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Number of distinct outcomes.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts.get(&index).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(&i, &c)| (i, c))
    }

    pub fn to_bitstring_counts(&self) -> BTreeMap<String, u64> {
        self.iter()
            .map(|(i, c)| (format_bitstring(self.n_qubits, i), c))
            .collect()
    }

    /// Count-weighted mean of `cost` over the measured outcomes.
    pub fn mean_cost(&self, cost: impl Fn(usize) -> f64) -> f64 {
        if self.total_shots == 0 {
            return f64::NAN;
        }
        let sum: f64 = self.iter().map(|(i, c)| c as f64 * cost(i)).sum();
        sum / self.total_shots as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Computational basis state given as a bitstring.
    pub fn basis(n_qubits: usize, bits: &str) -> Result<Self> {
        check_qubits(n_qubits)?;
        let index = parse_bitstring(n_qubits, bits)?;
        Self::basis_index(n_qubits, index)
    }

    pub fn basis_index(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        if index >> n_qubits != 0 {
            return Err(invalid(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// `H^n |0...0>`: every amplitude equals `2^{-n/2}`.
    pub fn uniform(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        let amp = Complex64::new((dim as f64).sqrt().recip(), 0.0);
        Ok(Self {
            n_qubits,
            amplitudes: vec![amp; dim],
        })
    }

    /// Superposition with amplitude `sqrt(w_j / sum w)` on basis index `j`.
    pub fn superposition(n_qubits: usize, weighted: &[(usize, f64)]) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        let mut seen = vec![false; dim];
        let mut total = 0.0;
        for &(index, weight) in weighted {
            if index >= dim {
                return Err(invalid(format!(
                    "basis index {index} out of range for {n_qubits} qubits"
                )));
            }
            if !(weight >= 0.0 && weight.is_finite()) {
                return Err(invalid(format!(
                    "weight {weight} is not a finite nonnegative number"
                )));
            }
            if std::mem::replace(&mut seen[index], true) {
                return Err(invalid(format!(
                    "duplicate string {}",
                    format_bitstring(n_qubits, index)
                )));
            }
            total += weight;
        }
        if total <= 0.0 {
            return Err(invalid("superposition needs a strictly positive weight"));
        }
        for &(index, weight) in weighted {
            amplitudes[index] = Complex64::new((weight / total).sqrt(), 0.0);
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Bitstring-keyed form of [`superposition`](Self::superposition).
    pub fn superposition_from_strings(n_qubits: usize, weighted: &[(&str, f64)]) -> Result<Self> {
        let parsed = weighted
            .iter()
            .map(|&(bits, w)| parse_bitstring(n_qubits, bits).map(|i| (i, w)))
            .collect::<Result<Vec<_>>>()?;
        Self::superposition(n_qubits, &parsed)
    }

    /// Wraps raw amplitudes; they must already be normalised.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 || !amplitudes.len().is_power_of_two() {
            return Err(invalid("amplitude count must be 2^n with n >= 1"));
        }
        let n_qubits = amplitudes.len().trailing_zeros() as usize;
        check_qubits(n_qubits)?;
        let state = Self {
            n_qubits,
            amplitudes,
        };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(invalid(format!("state has squared norm {norm}")));
        }
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes[index]
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.amplitudes[index].norm_sqr()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Basis indices carrying non-negligible probability.
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| self.probability(i) > threshold)
            .collect()
    }

    fn check_dim(&self, other_qubits: usize) -> Result<()> {
        if self.n_qubits != other_qubits {
            return Err(invalid(format!(
                "dimension mismatch: state has {} qubits, operand has {other_qubits}",
                self.n_qubits
            )));
        }
        Ok(())
    }

    /// `amp_z <- amp_z * exp(-i gamma cost_z)`.
    pub fn apply_diagonal_phase(&mut self, cost: &DiagonalCost, gamma: f64) -> Result<()> {
        self.check_dim(cost.n_qubits())?;
        if gamma == 0.0 {
            return Ok(());
        }
        match cost.integer_range {
            Some((lo, hi)) => {
                let table: Vec<Complex64> = (lo..=hi)
                    .map(|k| Complex64::from_polar(1.0, -gamma * k as f64))
                    .collect();
                for (amp, &c) in self.amplitudes.iter_mut().zip(&cost.values) {
                    *amp *= table[(c as i64 - lo) as usize];
                }
            }
            None => {
                for (amp, &c) in self.amplitudes.iter_mut().zip(&cost.values) {
                    *amp *= Complex64::from_polar(1.0, -gamma * c);
                }
            }
        }
        Ok(())
    }

    /// `exp(-i beta X)` on every qubit.
    pub fn apply_x_mixer(&mut self, beta: f64) {
        if beta == 0.0 {
            return;
        }
        let (s, c) = beta.sin_cos();
        let mis = Complex64::new(0.0, -s);
        for q in 0..self.n_qubits {
            let stride = 1usize << q;
            for block in (0..self.dim()).step_by(stride << 1) {
                for i in block..block + stride {
                    let a = self.amplitudes[i];
                    let b = self.amplitudes[i + stride];
                    self.amplitudes[i] = a * c + b * mis;
                    self.amplitudes[i + stride] = a * mis + b * c;
                }
            }
        }
    }

    /// `exp(-i beta X_q)` on a single qubit.
    pub fn apply_rx_half(&mut self, qubit: usize, beta: f64) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(invalid(format!("qubit {qubit} out of range")));
        }
        let (s, c) = beta.sin_cos();
        let mis = Complex64::new(0.0, -s);
        let stride = 1usize << qubit;
        for block in (0..self.dim()).step_by(stride << 1) {
            for i in block..block + stride {
                let a = self.amplitudes[i];
                let b = self.amplitudes[i + stride];
                self.amplitudes[i] = a * c + b * mis;
                self.amplitudes[i + stride] = a * mis + b * c;
            }
        }
        Ok(())
    }

    /// Applies `exp(angle * (|source><target| - |target><source|))` on the
    /// qubits where `source` and `target` differ.
    pub fn apply_two_level_rotation(&mut self, rot: &TwoLevelRotation) -> Result<()> {
        let dim = self.dim();
        if rot.source >= dim || rot.target >= dim {
            return Err(invalid(format!(
                "rotation indices ({}, {}) out of range for {} qubits",
                rot.source, rot.target, self.n_qubits
            )));
        }
        if rot.source == rot.target {
            return Err(invalid(
                "two-level rotation needs distinct source and target",
            ));
        }
        if rot.angle == 0.0 {
            return Ok(());
        }
        let mask = rot.mask();
        let pattern = rot.source & mask;
        let (s, c) = rot.angle.sin_cos();
        for z in 0..dim {
            if z & mask != pattern {
                continue;
            }
            let partner = z ^ mask;
            let a = self.amplitudes[z];
            let b = self.amplitudes[partner];
            self.amplitudes[z] = a * c + b * s;
            self.amplitudes[partner] = b * c - a * s;
        }
        Ok(())
    }

    /// Exact `sum_z |amp_z|^2 cost_z`.
    pub fn expectation(&self, cost: &DiagonalCost) -> Result<f64> {
        self.check_dim(cost.n_qubits())?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&cost.values)
            .map(|(a, &c)| a.norm_sqr() * c)
            .sum())
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &StateVector) -> Result<Complex64> {
        self.check_dim(other.n_qubits)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.amplitudes
            .iter()
            .map(|a| {
                acc += a.norm_sqr();
                acc
            })
            .collect()
    }

    /// Draws `shots` basis indices by inverse CDF and hands each to `sink`.
    pub fn sample_each<R: Rng + ?Sized>(
        &self,
        shots: u64,
        rng: &mut R,
        mut sink: impl FnMut(usize),
    ) {
        let cdf = self.cumulative();
        let total = *cdf.last().expect("state has at least two amplitudes");
        let last = cdf.len() - 1;
        for _ in 0..shots {
            let u = rng.random::<f64>() * total;
            let idx = cdf.partition_point(|&c| c <= u).min(last);
            sink(idx);
        }
    }

    pub fn sample_with_rng<R: Rng + ?Sized>(
        &self,
        shots: u64,
        rng: &mut R,
    ) -> MeasurementDistribution {
        let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
        self.sample_each(shots, rng, |i| *counts.entry(i).or_insert(0) += 1);
        MeasurementDistribution {
            n_qubits: self.n_qubits,
            counts,
            total_shots: shots,
        }
    }

    /// Multinomial measurement in the computational basis, deterministic per seed.
    pub fn sample(&self, shots: u64, seed: u64) -> Result<MeasurementDistribution> {
        if shots == 0 {
            return Err(invalid("shots must be positive"));
        }
        let mut rng = rng_from_seed(seed);
        Ok(self.sample_with_rng(shots, &mut rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    fn random_state(n: usize, seed: u64) -> StateVector {
        let mut rng = rng_from_seed(seed);
        let raw: Vec<Complex64> = (0..1 << n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        StateVector::from_amplitudes(raw.into_iter().map(|a| a / norm).collect()).unwrap()
    }

    #[test]
    fn basis_state_layout() {
        let s = StateVector::basis(2, "00").unwrap();
        assert_eq!(s.probabilities(), vec![1.0, 0.0, 0.0, 0.0]);
        let s = StateVector::basis(3, "101").unwrap();
        assert_eq!(s.probability(0b101), 1.0);
        assert_eq!(format_bitstring(3, 0b001), "100");
        assert!(matches!(
            StateVector::basis(1, "0110"),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn uniform_amplitudes() {
        let s = StateVector::uniform(1).unwrap();
        assert!(close(s.amplitude(0), Complex64::new(FRAC_1_SQRT_2, 0.0)));
        assert!(close(s.amplitude(1), Complex64::new(FRAC_1_SQRT_2, 0.0)));
        let s = StateVector::uniform(2).unwrap();
        assert!(s
            .amplitudes()
            .iter()
            .all(|a| close(*a, Complex64::new(0.5, 0.0))));
        assert!((StateVector::uniform(10).unwrap().norm_sqr() - 1.0).abs() < 1e-12);
        assert!(StateVector::uniform(0).is_err());
    }

    #[test]
    fn superposition_weights() {
        let s = StateVector::superposition_from_strings(2, &[("01", 1.0)]).unwrap();
        assert_eq!(s, StateVector::basis(2, "01").unwrap());
        let s = StateVector::superposition_from_strings(2, &[("00", 3.0), ("11", 1.0)]).unwrap();
        assert!((s.amplitude(0).re - 0.75f64.sqrt()).abs() < 1e-15);
        assert!((s.amplitude(3).re - 0.25f64.sqrt()).abs() < 1e-15);
        assert!(StateVector::superposition_from_strings(2, &[("00", 1.0), ("00", 1.0)]).is_err());
        assert!(StateVector::superposition_from_strings(2, &[("00", 0.0)]).is_err());
    }

    #[test]
    fn diagonal_phase_cases() {
        let cost = DiagonalCost::new(vec![0.0, 1.0]).unwrap();
        let mut s = StateVector::uniform(1).unwrap();
        s.apply_diagonal_phase(&cost, PI).unwrap();
        assert!(close(s.amplitude(0), Complex64::new(FRAC_1_SQRT_2, 0.0)));
        assert!(close(s.amplitude(1), Complex64::new(-FRAC_1_SQRT_2, 0.0)));

        let before = random_state(3, 1);
        let mut after = before.clone();
        after
            .apply_diagonal_phase(&DiagonalCost::new(vec![0.3; 8]).unwrap(), 0.0)
            .unwrap();
        assert_eq!(after, before);

        // constant cost is a global phase
        let c0 = 2.5;
        let mut after = before.clone();
        after
            .apply_diagonal_phase(&DiagonalCost::new(vec![c0; 8]).unwrap(), 0.7)
            .unwrap();
        let phase = Complex64::from_polar(1.0, -0.7 * c0);
        for (a, b) in after.amplitudes().iter().zip(before.amplitudes()) {
            assert!(close(*a, b * phase));
        }
        let wrong = DiagonalCost::new(vec![0.0; 4]).unwrap();
        assert!(after.apply_diagonal_phase(&wrong, 1.0).is_err());
    }

    #[test]
    fn x_mixer_cases() {
        let mut s = StateVector::basis(1, "0").unwrap();
        s.apply_x_mixer(FRAC_PI_4);
        assert!(close(s.amplitude(0), Complex64::new(FRAC_PI_4.cos(), 0.0)));
        assert!(close(s.amplitude(1), Complex64::new(0.0, -FRAC_PI_4.sin())));

        let mut s = StateVector::basis(4, "0000").unwrap();
        s.apply_x_mixer(FRAC_PI_2);
        assert!((s.probability(0b1111) - 1.0).abs() < 1e-12);

        let before = random_state(3, 2);
        let mut after = before.clone();
        after.apply_x_mixer(0.0);
        assert_eq!(after, before);
    }

    #[test]
    fn two_level_rotation_cases() {
        // source "10", target "01" on two qubits
        let rot = TwoLevelRotation::new(0b01, 0b10, FRAC_PI_2).unwrap();
        let mut s = StateVector::basis_index(2, 0b01).unwrap();
        s.apply_two_level_rotation(&rot).unwrap();
        assert!((s.probability(0b10) - 1.0).abs() < 1e-15);
        assert!(close(s.amplitude(0b10), Complex64::new(-1.0, 0.0)));

        let mut s = StateVector::basis_index(2, 0b01).unwrap();
        s.apply_two_level_rotation(&rot.with_angle(FRAC_PI_4))
            .unwrap();
        assert!((s.amplitude(0b01).norm() - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((s.amplitude(0b10).norm() - FRAC_1_SQRT_2).abs() < 1e-15);

        let before = random_state(3, 3);
        let mut after = before.clone();
        after
            .apply_two_level_rotation(&rot.with_angle(0.0))
            .unwrap();
        assert_eq!(after, before);

        let out_of_range = TwoLevelRotation::new(0, 8, 0.1).unwrap();
        assert!(after.apply_two_level_rotation(&out_of_range).is_err());
        assert!(TwoLevelRotation::new(3, 3, 0.1).is_err());
    }

    #[test]
    fn two_level_rotation_spectators_untouched() {
        // rotation on qubits 0,1 leaves subspaces with other patterns alone
        let rot = TwoLevelRotation::new(0b001, 0b010, 0.9).unwrap();
        let mut s = StateVector::basis_index(3, 0b111).unwrap();
        s.apply_two_level_rotation(&rot).unwrap();
        assert_eq!(s.probability(0b111), 1.0);
        let mut s = StateVector::basis_index(3, 0b101).unwrap();
        s.apply_two_level_rotation(&rot).unwrap();
        assert!((s.probability(0b110) - 0.9f64.sin().powi(2)).abs() < 1e-14);
    }

    #[test]
    fn expectation_cases() {
        let cost = DiagonalCost::new(vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let s = StateVector::basis(2, "10").unwrap();
        assert_eq!(s.expectation(&cost).unwrap(), 1.0);
        let s = StateVector::uniform(2).unwrap();
        assert!((s.expectation(&cost).unwrap() - 0.5).abs() < 1e-15);
        let s = random_state(4, 4);
        let seven = DiagonalCost::new(vec![7.0; 16]).unwrap();
        assert!((s.expectation(&seven).unwrap() - 7.0).abs() < 1e-12);
        assert!(s.expectation(&cost).is_err());
    }

    #[test]
    fn sampling_contract() {
        let s = StateVector::basis(3, "011").unwrap();
        let d = s.sample(500, 9).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.count(parse_bitstring(3, "011").unwrap()), 500);

        let u = StateVector::uniform(1).unwrap();
        let d = u.sample(1_000_000, 11).unwrap();
        assert_eq!(d.total_shots(), 1_000_000);
        let frac = d.count(0) as f64 / 1e6;
        assert!((frac - 0.5).abs() < 0.002, "fraction {frac}");
        assert_eq!(u.sample(1000, 5).unwrap(), u.sample(1000, 5).unwrap());
        assert!(u.sample(0, 5).is_err());
    }

    #[test]
    fn distribution_validation() {
        let d = MeasurementDistribution::from_bitstring_counts(2, [("01", 3), ("11", 2)]).unwrap();
        assert_eq!(d.total_shots(), 5);
        assert_eq!(d.to_bitstring_counts()["01"], 3);
        assert!(MeasurementDistribution::from_bitstring_counts(2, [("011", 3)]).is_err());
    }

    proptest! {
        #[test]
        fn kernels_preserve_norm(seed in any::<u64>(), n in 1usize..6, gamma in -7.0f64..7.0, beta in -7.0f64..7.0, src in 0usize..32, tgt in 0usize..32) {
            let mut s = random_state(n, seed);
            let dim = 1usize << n;
            let mut rng = rng_from_seed(seed ^ 1);
            let cost = DiagonalCost::new((0..dim).map(|_| rng.random::<f64>() * 5.0).collect()).unwrap();
            s.apply_diagonal_phase(&cost, gamma).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
            s.apply_x_mixer(beta);
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
            let (src, tgt) = (src % dim, tgt % dim);
            if src != tgt {
                s.apply_two_level_rotation(&TwoLevelRotation::new(src, tgt, beta).unwrap()).unwrap();
                prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
            }
        }

        #[test]
        fn phases_compose_additively(seed in any::<u64>(), g1 in -4.0f64..4.0, g2 in -4.0f64..4.0) {
            let base = random_state(3, seed);
            let mut rng = rng_from_seed(seed ^ 2);
            let cost = DiagonalCost::new((0..8).map(|_| rng.random::<f64>() * 3.0 - 1.0).collect()).unwrap();
            let mut two = base.clone();
            two.apply_diagonal_phase(&cost, g1).unwrap();
            two.apply_diagonal_phase(&cost, g2).unwrap();
            let mut one = base.clone();
            one.apply_diagonal_phase(&cost, g1 + g2).unwrap();
            for (a, b) in one.amplitudes().iter().zip(two.amplitudes()) {
                prop_assert!((a - b).norm() < 1e-10);
            }
        }

        #[test]
        fn rotation_inverse_is_identity(seed in any::<u64>(), theta in -7.0f64..7.0, src in 0usize..16, tgt in 0usize..16) {
            prop_assume!(src != tgt);
            let base = random_state(4, seed);
            let mut s = base.clone();
            let rot = TwoLevelRotation::new(src, tgt, theta).unwrap();
            s.apply_two_level_rotation(&rot).unwrap();
            s.apply_two_level_rotation(&rot.with_angle(-theta)).unwrap();
            for (a, b) in s.amplitudes().iter().zip(base.amplitudes()) {
                prop_assert!((a - b).norm() < 1e-10);
            }
        }
    }
}
