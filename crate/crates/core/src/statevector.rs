//! Dense pure-state simulation.
//!
//! Basis index `i` is the decimal value of the bitstring `x_0 x_1 ... x_{n-1}`,
//! so qubit `0` is the most significant bit of the index.

use std::fmt;
use std::fs;
use std::path::Path;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::io::{Reader, Writer};
use crate::stats;
use crate::{Error, Result};

/// Default cap on simulated register size.
pub const DEFAULT_MAX_QUBITS: usize = 16;

pub const NORM_TOLERANCE: f64 = 1e-9;

const STATE_MAGIC: &[u8; 4] = b"QDS1";

#[derive(Clone, PartialEq)]
pub struct PureState {
    num_qubits: usize,
    amps: Vec<C64>,
}

impl fmt::Debug for PureState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PureState")
            .field("num_qubits", &self.num_qubits)
            .field("dim", &self.amps.len())
            .finish()
    }
}

impl PureState {
    /// Validates dimension and normalization; never renormalizes.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let d = amps.len();
        if d < 2 || !d.is_power_of_two() {
            return Err(Error::arg(format!("dimension {d} is not 2^n with n >= 1")));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::arg(format!("amplitudes have squared norm {norm}, expected 1")));
        }
        Ok(PureState { num_qubits: d.trailing_zeros() as usize, amps })
    }

    /// Scales arbitrary nonzero amplitudes to unit norm. This is the only
    /// place renormalization happens.
    pub fn normalized(mut amps: Vec<C64>) -> Result<Self> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::arg("cannot normalize a zero or non-finite vector"));
        }
        for a in amps.iter_mut() {
            *a /= norm;
        }
        Self::from_amplitudes(amps)
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        check_qubits(num_qubits, DEFAULT_MAX_QUBITS)?;
        let d = 1usize << num_qubits;
        if index >= d {
            return Err(Error::arg(format!("basis index {index} out of range for d = {d}")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); d];
        amps[index] = C64::new(1.0, 0.0);
        Ok(PureState { num_qubits, amps })
    }

    pub fn zero(num_qubits: usize) -> Result<Self> {
        Self::basis(num_qubits, 0)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Born-rule probabilities `|α_i|²`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.num_qubits {
            return Err(Error::arg(format!(
                "qubit index {q} out of range for {} qubits",
                self.num_qubits
            )));
        }
        Ok(())
    }

    /// In-place single-qubit unitary on qubit `q`.
    pub(crate) fn apply_1q(&mut self, q: usize, m: &[[C64; 2]; 2]) {
        let stride = 1usize << (self.num_qubits - 1 - q);
        let d = self.amps.len();
        let mut base = 0;
        while base < d {
            for i in base..base + stride {
                let a0 = self.amps[i];
                let a1 = self.amps[i + stride];
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i + stride] = m[1][0] * a0 + m[1][1] * a1;
            }
            base += 2 * stride;
        }
    }

    pub(crate) fn apply_h(&mut self, q: usize) {
        let stride = 1usize << (self.num_qubits - 1 - q);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let d = self.amps.len();
        let mut base = 0;
        while base < d {
            for i in base..base + stride {
                let a0 = self.amps[i];
                let a1 = self.amps[i + stride];
                self.amps[i] = (a0 + a1) * s;
                self.amps[i + stride] = (a0 - a1) * s;
            }
            base += 2 * stride;
        }
    }

    /// Multiplies the `|1⟩` component of qubit `q` by `phase`.
    pub(crate) fn apply_phase(&mut self, q: usize, phase: C64) {
        let bit = 1usize << (self.num_qubits - 1 - q);
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & bit != 0 {
                *a *= phase;
            }
        }
    }

    pub(crate) fn apply_cnot(&mut self, control: usize, target: usize) {
        let cbit = 1usize << (self.num_qubits - 1 - control);
        let tbit = 1usize << (self.num_qubits - 1 - target);
        for i in 0..self.amps.len() {
            if i & cbit != 0 && i & tbit == 0 {
                self.amps.swap(i, i | tbit);
            }
        }
    }

    /// Applies `gate` in place.
    pub fn apply_mut(&mut self, gate: &Gate) -> Result<()> {
        for q in gate.qubits() {
            self.check_qubit(q)?;
        }
        match *gate {
            Gate::H(q) => self.apply_h(q),
            Gate::S(q) => self.apply_phase(q, C64::new(0.0, 1.0)),
            Gate::Sdg(q) => self.apply_phase(q, C64::new(0.0, -1.0)),
            Gate::Z(q) => self.apply_phase(q, C64::new(-1.0, 0.0)),
            Gate::X(q) | Gate::Y(q) | Gate::Unitary(q, _) => self.apply_1q(q, &gate.matrix_1q()),
            Gate::Cnot { control, target } => {
                if control == target {
                    return Err(Error::arg("CNOT control and target must differ"));
                }
                self.apply_cnot(control, target)
            }
        }
        debug_assert!(
            (self.norm_sqr() - 1.0).abs() < NORM_TOLERANCE,
            "gate {gate:?} broke normalization"
        );
        Ok(())
    }

    /// Serializes as `QDS1`, version byte, `u8 n`, then `2^n` `(re, im)` f64 pairs.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_magic(STATE_MAGIC);
        w.u8(self.num_qubits as u8);
        for a in &self.amps {
            w.f64(a.re).f64(a.im);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::with_magic(bytes, STATE_MAGIC)?;
        let n = r.u8()? as usize;
        if n == 0 || n > 30 {
            return Err(Error::Format(format!("bad qubit count {n}")));
        }
        let d = 1usize << n;
        let mut amps = Vec::with_capacity(d);
        for _ in 0..d {
            let re = r.f64()?;
            let im = r.f64()?;
            amps.push(C64::new(re, im));
        }
        r.finish()?;
        Self::from_amplitudes(amps).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn check_qubits(n: usize, cap: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::arg("need at least one qubit"));
    }
    if n > cap {
        return Err(Error::Resource(format!("{n} qubits exceeds the simulator cap of {cap}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    H(usize),
    S(usize),
    Sdg(usize),
    X(usize),
    Y(usize),
    Z(usize),
    /// Generic single-qubit unitary, row-major.
    Unitary(usize, [[C64; 2]; 2]),
    Cnot { control: usize, target: usize },
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::S(q) | Gate::Sdg(q) | Gate::X(q) | Gate::Y(q) | Gate::Z(q) => vec![q],
            Gate::Unitary(q, _) => vec![q],
            Gate::Cnot { control, target } => vec![control, target],
        }
    }

    /// 2x2 matrix for single-qubit gates (identity for CNOT).
    pub fn matrix_1q(&self) -> [[C64; 2]; 2] {
        let z = C64::new(0.0, 0.0);
        let o = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        match *self {
            Gate::H(_) => [[h, h], [h, -h]],
            Gate::S(_) => [[o, z], [z, i]],
            Gate::Sdg(_) => [[o, z], [z, -i]],
            Gate::X(_) => [[z, o], [o, z]],
            Gate::Y(_) => [[z, -i], [i, z]],
            Gate::Z(_) => [[o, z], [z, -o]],
            Gate::Unitary(_, m) => m,
            Gate::Cnot { .. } => [[o, z], [z, o]],
        }
    }

    /// Checks `U†U = I` within `tol` for a generic unitary.
    pub fn is_unitary(&self, tol: f64) -> bool {
        let m = self.matrix_1q();
        for r in 0..2 {
            for c in 0..2 {
                let v: C64 = (0..2).map(|k| m[k][r].conj() * m[k][c]).sum();
                let expect = if r == c { 1.0 } else { 0.0 };
                if (v - C64::new(expect, 0.0)).norm() > tol {
                    return false;
                }
            }
        }
        true
    }
}

/// Returns `gate` applied to `state`.
pub fn apply_gate(state: &PureState, gate: &Gate) -> Result<PureState> {
    if let Gate::Unitary(_, _) = gate {
        if !gate.is_unitary(1e-12) {
            return Err(Error::arg("generic gate matrix is not unitary"));
        }
    }
    let mut out = state.clone();
    out.apply_mut(gate)?;
    Ok(out)
}

fn check_same_dim(a: &PureState, b: &PureState) -> Result<()> {
    if a.num_qubits != b.num_qubits {
        return Err(Error::arg(format!(
            "dimension mismatch: {} vs {} qubits",
            a.num_qubits, b.num_qubits
        )));
    }
    Ok(())
}

/// `⟨a|b⟩ = Σ conj(a_i) b_i`.
pub fn inner_product(a: &PureState, b: &PureState) -> Result<C64> {
    check_same_dim(a, b)?;
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

/// Pure-state trace distance `√(1 − |⟨a|b⟩|²)`, clamped to `[0, 1]`.
pub fn trace_distance(a: &PureState, b: &PureState) -> Result<f64> {
    let f = inner_product(a, b)?.norm_sqr();
    Ok((1.0 - f).clamp(0.0, 1.0).sqrt())
}

/// Haar-random state from normalized i.i.d. complex Gaussians, using the
/// default qubit cap.
pub fn random_haar_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PureState> {
    random_haar_state_capped(n, DEFAULT_MAX_QUBITS, rng)
}

pub fn random_haar_state_capped<R: Rng + ?Sized>(
    n: usize,
    cap: usize,
    rng: &mut R,
) -> Result<PureState> {
    check_qubits(n, cap)?;
    let amps = (0..1usize << n)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    PureState::normalized(amps)
}

/// Born-rule outcome counts over `[d]` from `shots` computational-basis
/// measurements.
pub fn measure_computational<R: Rng + ?Sized>(
    state: &PureState,
    shots: u64,
    rng: &mut R,
) -> Result<Vec<u64>> {
    if shots == 0 {
        return Err(Error::arg("shots must be >= 1"));
    }
    let cdf = stats::cumulative(&state.probabilities());
    let mut counts = vec![0u64; state.dim()];
    for _ in 0..shots {
        counts[stats::sample_cumulative(rng, &cdf)] += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn hadamard_on_zero() {
        let s = apply_gate(&PureState::zero(1).unwrap(), &Gate::H(0)).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(s.amplitudes()[0].re, h, 1e-15));
        assert!(close(s.amplitudes()[1].re, h, 1e-15));
    }

    #[test]
    fn phase_on_one() {
        let s = apply_gate(&PureState::basis(1, 1).unwrap(), &Gate::S(0)).unwrap();
        assert_eq!(s.amplitudes()[1], c(0.0, 1.0));
        assert_eq!(s.amplitudes()[0], c(0.0, 0.0));
    }

    #[test]
    fn bit_flip() {
        let s = apply_gate(&PureState::zero(1).unwrap(), &Gate::X(0)).unwrap();
        assert_eq!(s.amplitudes()[1], c(1.0, 0.0));
    }

    #[test]
    fn qubit_zero_is_most_significant() {
        let s = apply_gate(&PureState::zero(3).unwrap(), &Gate::X(0)).unwrap();
        assert_eq!(s.amplitudes()[4], c(1.0, 0.0));
        let s = apply_gate(&s, &Gate::Cnot { control: 0, target: 2 }).unwrap();
        assert_eq!(s.amplitudes()[5], c(1.0, 0.0));
    }

    #[test]
    fn out_of_range_qubit_is_argument_error() {
        let s = PureState::zero(2).unwrap();
        assert!(matches!(apply_gate(&s, &Gate::H(2)), Err(Error::Argument(_))));
        assert!(matches!(
            apply_gate(&s, &Gate::Cnot { control: 0, target: 5 }),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn non_unitary_generic_gate_rejected() {
        let s = PureState::zero(1).unwrap();
        let m = [[c(1.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        assert!(apply_gate(&s, &Gate::Unitary(0, m)).is_err());
    }

    #[test]
    fn builtin_gates_are_unitary() {
        for g in [Gate::H(0), Gate::S(0), Gate::Sdg(0), Gate::X(0), Gate::Y(0), Gate::Z(0)] {
            assert!(g.is_unitary(1e-12), "{g:?}");
        }
    }

    #[test]
    fn inner_products() {
        let mut rng = rng_from_seed(3);
        let phi = random_haar_state(4, &mut rng).unwrap();
        assert!(close(inner_product(&phi, &phi).unwrap().re, 1.0, 1e-12));
        let z = PureState::basis(1, 0).unwrap();
        let o = PureState::basis(1, 1).unwrap();
        assert_eq!(inner_product(&z, &o).unwrap(), c(0.0, 0.0));
        assert!(inner_product(&z, &phi).is_err());
    }

    /// First d/2 coordinates vs middle d/2 coordinates, each 1/√(d/2).
    fn half_support_pair(d: usize) -> (PureState, PureState) {
        let v = (2.0 / d as f64).sqrt();
        let phi: Vec<C64> = (0..d).map(|i| if i < d / 2 { c(v, 0.0) } else { c(0.0, 0.0) }).collect();
        let psi: Vec<C64> = (0..d)
            .map(|i| if i >= d / 4 && i < 3 * d / 4 { c(v, 0.0) } else { c(0.0, 0.0) })
            .collect();
        (PureState::from_amplitudes(phi).unwrap(), PureState::from_amplitudes(psi).unwrap())
    }

    #[test]
    fn half_support_pair_overlap_and_distance() {
        let (phi, psi) = half_support_pair(16);
        assert!(close(inner_product(&phi, &psi).unwrap().re, 0.5, 1e-12));
        assert!(close(trace_distance(&phi, &psi).unwrap(), (0.75f64).sqrt(), 1e-12));
    }

    #[test]
    fn trace_distance_basics() {
        let z = PureState::basis(1, 0).unwrap();
        let o = PureState::basis(1, 1).unwrap();
        assert_eq!(trace_distance(&z, &o).unwrap(), 1.0);
        assert_eq!(trace_distance(&z, &z).unwrap(), 0.0);
    }

    #[test]
    fn haar_first_moment() {
        let mut rng = rng_from_seed(11);
        let mut acc = 0.0;
        for _ in 0..10_000 {
            let s = random_haar_state(3, &mut rng).unwrap();
            assert!(close(s.norm_sqr(), 1.0, 1e-9));
            acc += s.amplitudes()[0].norm_sqr();
        }
        assert!(close(acc / 10_000.0, 0.125, 0.01));
    }

    #[test]
    fn haar_is_deterministic_and_capped() {
        let a = random_haar_state(5, &mut rng_from_seed(4)).unwrap();
        let b = random_haar_state(5, &mut rng_from_seed(4)).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert!(matches!(random_haar_state(17, &mut rng_from_seed(4)), Err(Error::Resource(_))));
        assert!(random_haar_state_capped(17, 18, &mut rng_from_seed(4)).is_ok());
    }

    #[test]
    fn computational_measurement() {
        let mut rng = rng_from_seed(5);
        let counts = measure_computational(&PureState::zero(3).unwrap(), 500, &mut rng).unwrap();
        assert_eq!(counts[0], 500);
        let plus = apply_gate(&PureState::zero(1).unwrap(), &Gate::H(0)).unwrap();
        let counts = measure_computational(&plus, 100_000, &mut rng).unwrap();
        assert!(close(counts[0] as f64 / 1e5, 0.5, 0.01));
        assert!(measure_computational(&plus, 0, &mut rng).is_err());
    }

    #[test]
    fn empirical_distribution_converges() {
        let mut rng = rng_from_seed(6);
        let s = random_haar_state(3, &mut rng).unwrap();
        let p = s.probabilities();
        let l1 = |shots: u64, rng: &mut crate::rng::SimRng| {
            let c = measure_computational(&s, shots, rng).unwrap();
            c.iter().zip(&p).map(|(&c, p)| (c as f64 / shots as f64 - p).abs()).sum::<f64>()
        };
        let coarse = l1(100, &mut rng);
        let fine = l1(200_000, &mut rng);
        assert!(fine < 0.02, "{fine}");
        assert!(fine < coarse);
    }

    #[test]
    fn file_roundtrip() {
        let s = random_haar_state(3, &mut rng_from_seed(9)).unwrap();
        let bytes = s.to_bytes();
        assert_eq!(&bytes[..4], b"QDS1");
        assert_eq!(bytes.len(), 4 + 1 + 1 + 8 * 16);
        assert_eq!(PureState::from_bytes(&bytes).unwrap(), s);
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(PureState::from_bytes(&bad).is_err());
    }

    fn arb_gate(n: usize) -> impl Strategy<Value = Gate> {
        (0..7usize, 0..n, 0..n, -3.0f64..3.0).prop_map(move |(kind, a, b, theta)| match kind {
            0 => Gate::H(a),
            1 => Gate::S(a),
            2 => Gate::Sdg(a),
            3 => Gate::Y(a),
            4 => Gate::Unitary(
                a,
                [
                    [c(theta.cos(), 0.0), c(0.0, -theta.sin())],
                    [c(0.0, -theta.sin()), c(theta.cos(), 0.0)],
                ],
            ),
            _ if a != b => Gate::Cnot { control: a, target: b },
            _ => Gate::X(a),
        })
    }

    proptest! {
        #[test]
        fn gates_preserve_norm_and_overlap(seed in 0u64..1000, gates in proptest::collection::vec(arb_gate(4), 1..20)) {
            let mut rng = rng_from_seed(seed);
            let a = random_haar_state(4, &mut rng).unwrap();
            let b = random_haar_state(4, &mut rng).unwrap();
            let before = inner_product(&a, &b).unwrap().norm();
            let (mut a2, mut b2) = (a.clone(), b.clone());
            for g in &gates {
                a2 = apply_gate(&a2, g).unwrap();
                b2 = apply_gate(&b2, g).unwrap();
            }
            prop_assert!((a2.norm_sqr() - 1.0).abs() < 1e-9);
            prop_assert!((inner_product(&a2, &b2).unwrap().norm() - before).abs() < 1e-9);
        }

        #[test]
        fn triangle_inequality(seed in 0u64..10_000) {
            let mut rng = rng_from_seed(seed);
            let a = random_haar_state(3, &mut rng).unwrap();
            let b = random_haar_state(3, &mut rng).unwrap();
            let c = random_haar_state(3, &mut rng).unwrap();
            let ab = trace_distance(&a, &b).unwrap();
            let bc = trace_distance(&b, &c).unwrap();
            let ac = trace_distance(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert!((ab - trace_distance(&b, &a).unwrap()).abs() < 1e-15);
        }
    }
}
