//! k-outcome sketching measurements.
//!
//! Two realizations share one interface. Clifford mode applies a uniformly
//! sampled Clifford circuit and bins the computational outcome by its leading
//! `log2 k` qubits. PGM mode holds an explicit Haar basis grouped into `k`
//! projectors and is limited to small dimensions.

mod clifford;
mod moments;
mod pgm;

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use clifford::{sample_clifford, CliffordCircuit, CliffordGate};
pub use moments::{compare_design_moments, validate_design_moments, DesignComparison, MomentStats};
pub use pgm::{build_pgm, haar_basis, PgmBasis, PGM_MAX_DIM};

use crate::io::{Reader, Writer};
use crate::rng::SeedTree;
use crate::statevector::{PureState, DEFAULT_MAX_QUBITS};
use crate::stats::{cumulative, multinomial, sample_cumulative};
use crate::{Error, Result, C64};

const PGM_MAGIC: &[u8; 4] = b"QPG1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementMode {
    Clifford,
    Pgm,
}

impl MeasurementMode {
    pub(crate) fn code(self) -> u8 {
        match self {
            MeasurementMode::Clifford => 0,
            MeasurementMode::Pgm => 1,
        }
    }

    pub(crate) fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(MeasurementMode::Clifford),
            1 => Ok(MeasurementMode::Pgm),
            _ => Err(Error::Format(format!("unknown measurement mode byte {c}"))),
        }
    }
}

impl std::str::FromStr for MeasurementMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clifford" => Ok(MeasurementMode::Clifford),
            "pgm" | "haar" => Ok(MeasurementMode::Pgm),
            _ => Err(Error::arg(format!("unknown measurement mode '{s}' (expected clifford or pgm)"))),
        }
    }
}

/// Everything needed to rebuild a measurement bit-for-bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasurementId {
    pub mode: MeasurementMode,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
}

impl MeasurementId {
    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        w.u8(self.mode.code()).u16(self.n as u16).u32(self.k as u32).u64(self.seed);
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self> {
        let mode = MeasurementMode::from_code(r.u8()?)?;
        let n = r.u16()? as usize;
        let k = r.u32()? as usize;
        let seed = r.u64()?;
        Ok(MeasurementId { mode, n, k, seed })
    }
}

#[derive(Clone, Debug)]
enum Realization {
    Clifford { circuit: CliffordCircuit, shift: usize },
    Pgm { basis: PgmBasis, bin_of: Vec<usize> },
}

/// Immutable k-outcome measurement on `n` qubits.
#[derive(Clone, Debug)]
pub struct SketchMeasurement {
    id: MeasurementId,
    real: Realization,
}

fn log2_exact(k: usize) -> Option<usize> {
    k.is_power_of_two().then(|| k.trailing_zeros() as usize)
}

impl SketchMeasurement {
    pub fn new(id: MeasurementId) -> Result<Self> {
        match id.mode {
            MeasurementMode::Clifford => Self::clifford(id.n, id.k, id.seed),
            MeasurementMode::Pgm => Self::pgm(id.n, id.k, id.seed),
        }
    }

    pub fn clifford(n: usize, k: usize, seed: u64) -> Result<Self> {
        check_width(n)?;
        let b = log2_exact(k).ok_or_else(|| {
            Error::arg(format!(
                "k = {k} is not a power of two; Clifford binning needs equal-size bins (try k = {})",
                k.next_power_of_two()
            ))
        })?;
        if b > n {
            return Err(Error::arg(format!("k = {k} exceeds the dimension 2^{n}")));
        }
        let mut rng = SeedTree(seed).named("clifford").rng();
        let circuit = sample_clifford(n, &mut rng);
        Ok(Self::from_circuit(circuit, k, seed))
    }

    /// Clifford-mode measurement with an explicit circuit. `k` must be a power of two.
    pub fn from_circuit(circuit: CliffordCircuit, k: usize, seed: u64) -> Self {
        let b = log2_exact(k).expect("k must be a power of two");
        assert!(b <= circuit.n, "k exceeds the dimension");
        let id = MeasurementId { mode: MeasurementMode::Clifford, n: circuit.n, k, seed };
        let shift = circuit.n - b;
        SketchMeasurement { id, real: Realization::Clifford { circuit, shift } }
    }

    pub fn pgm(n: usize, k: usize, seed: u64) -> Result<Self> {
        check_width(n)?;
        let d = 1usize << n;
        let mut rng = SeedTree(seed).named("pgm").rng();
        let basis = build_pgm(d, k, &mut rng)?;
        Ok(Self::from_pgm(basis, n, seed))
    }

    fn from_pgm(basis: PgmBasis, n: usize, seed: u64) -> Self {
        let mut bin_of = vec![0; basis.dim()];
        for (j, g) in basis.groups.iter().enumerate() {
            for &t in g {
                bin_of[t] = j;
            }
        }
        let id = MeasurementId { mode: MeasurementMode::Pgm, n, k: basis.groups.len(), seed };
        SketchMeasurement { id, real: Realization::Pgm { basis, bin_of } }
    }

    pub fn id(&self) -> MeasurementId {
        self.id
    }

    pub fn mode(&self) -> MeasurementMode {
        self.id.mode
    }

    pub fn num_qubits(&self) -> usize {
        self.id.n
    }

    pub fn k(&self) -> usize {
        self.id.k
    }

    pub fn dim(&self) -> usize {
        self.id.dim()
    }

    pub fn circuit(&self) -> Option<&CliffordCircuit> {
        match &self.real {
            Realization::Clifford { circuit, .. } => Some(circuit),
            Realization::Pgm { .. } => None,
        }
    }

    pub fn pgm_basis(&self) -> Option<&PgmBasis> {
        match &self.real {
            Realization::Pgm { basis, .. } => Some(basis),
            Realization::Clifford { .. } => None,
        }
    }

    /// Bin of a raw outcome: a computational basis index in Clifford mode,
    /// a basis vector index in PGM mode.
    pub fn bin(&self, outcome: usize) -> usize {
        match &self.real {
            Realization::Clifford { shift, .. } => (outcome >> shift) % self.id.k,
            Realization::Pgm { bin_of, .. } => bin_of[outcome],
        }
    }

    fn check_state(&self, state: &PureState) -> Result<()> {
        if state.num_qubits() != self.id.n {
            return Err(Error::arg(format!(
                "state has {} qubits, measurement expects {}",
                state.num_qubits(),
                self.id.n
            )));
        }
        Ok(())
    }

    /// Exact probabilities `tr(Π_j |φ⟩⟨φ|)` for each of the `k` outcomes.
    pub fn exact_outcome_distribution(&self, state: &PureState) -> Result<Vec<f64>> {
        self.check_state(state)?;
        let k = self.id.k;
        let probs = match &self.real {
            Realization::Clifford { circuit, shift } => {
                let mut evolved = state.clone();
                circuit.apply_mut(&mut evolved)?;
                let mut p = vec![0.0; k];
                for (idx, a) in evolved.amplitudes().iter().enumerate() {
                    p[(idx >> shift) % k] += a.norm_sqr();
                }
                p
            }
            Realization::Pgm { basis, .. } => basis.outcome_distribution(state.amplitudes()),
        };
        let total: f64 = probs.iter().sum();
        Ok(probs.into_iter().map(|p| p / total).collect())
    }

    /// One Born-rule sample of the measurement.
    pub fn sketch_measure<R: Rng + ?Sized>(&self, state: &PureState, rng: &mut R) -> Result<usize> {
        let p = self.exact_outcome_distribution(state)?;
        Ok(sample_cumulative(rng, &cumulative(&p)))
    }

    /// Outcome counts of `shots` independent copies measured with this measurement.
    pub fn sample_counts<R: Rng + ?Sized>(
        &self,
        state: &PureState,
        shots: u64,
        rng: &mut R,
    ) -> Result<Vec<u64>> {
        let p = self.exact_outcome_distribution(state)?;
        Ok(multinomial(rng, shots, &p))
    }

    /// Writes the JSON cache file; PGM bases go to a binary sidecar `<path>.basis`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = match &self.real {
            Realization::Clifford { circuit, .. } => MeasurementFile {
                header: self.id,
                gates: Some(circuit.gates.clone()),
                basis_file: None,
            },
            Realization::Pgm { basis, .. } => {
                let side = sidecar(path);
                let mut w = Writer::with_magic(PGM_MAGIC);
                w.u64(basis.dim() as u64).u32(basis.groups.len() as u32);
                for v in basis.basis.iter() {
                    w.f64(v.re).f64(v.im);
                }
                for g in &basis.groups {
                    for &t in g {
                        w.u32(t as u32);
                    }
                }
                fs::write(&side, w.finish())?;
                MeasurementFile {
                    header: self.id,
                    gates: None,
                    basis_file: side.file_name().map(|s| s.to_string_lossy().into_owned()),
                }
            }
        };
        fs::write(path, serde_json::to_vec_pretty(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: MeasurementFile = serde_json::from_slice(&fs::read(path)?)?;
        let id = file.header;
        match id.mode {
            MeasurementMode::Clifford => {
                let gates = file.gates.ok_or_else(|| Error::Format("Clifford measurement without gates".into()))?;
                if log2_exact(id.k).is_none_or(|b| b > id.n) {
                    return Err(Error::Format(format!("invalid k = {} for n = {}", id.k, id.n)));
                }
                for g in &gates {
                    let ok = match *g {
                        CliffordGate::H(q) | CliffordGate::S(q) => q < id.n,
                        CliffordGate::Cnot(c, t) => c < id.n && t < id.n && c != t,
                    };
                    if !ok {
                        return Err(Error::Format(format!("gate {g:?} out of range for n = {}", id.n)));
                    }
                }
                Ok(Self::from_circuit(CliffordCircuit { n: id.n, gates }, id.k, id.seed))
            }
            MeasurementMode::Pgm => {
                let bytes = fs::read(sidecar(path))?;
                let mut r = Reader::with_magic(&bytes, PGM_MAGIC)?;
                let d = r.u64()? as usize;
                let k = r.u32()? as usize;
                if d != id.dim() || k != id.k || k == 0 || !d.is_multiple_of(k) {
                    return Err(Error::Format("PGM basis header does not match measurement id".into()));
                }
                let mut vals = Vec::with_capacity(d * d);
                for _ in 0..d * d {
                    let re = r.f64()?;
                    let im = r.f64()?;
                    vals.push(C64::new(re, im));
                }
                let mut seen = vec![false; d];
                let mut groups = Vec::with_capacity(k);
                for _ in 0..k {
                    let mut g = Vec::with_capacity(d / k);
                    for _ in 0..d / k {
                        let t = r.u32()? as usize;
                        if t >= d || std::mem::replace(&mut seen[t], true) {
                            return Err(Error::Format("PGM grouping is not a partition".into()));
                        }
                        g.push(t);
                    }
                    groups.push(g);
                }
                r.finish()?;
                let basis = PgmBasis { basis: nalgebra::DMatrix::from_vec(d, d, vals), groups };
                Ok(Self::from_pgm(basis, id.n, id.seed))
            }
        }
    }
}

fn check_width(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::arg("measurements need at least one qubit"));
    }
    if n > DEFAULT_MAX_QUBITS {
        return Err(Error::Resource(format!(
            "{n} qubits exceeds the simulator cap of {DEFAULT_MAX_QUBITS}"
        )));
    }
    Ok(())
}

fn sidecar(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".basis");
    s.into()
}

#[derive(Serialize, Deserialize)]
struct MeasurementFile {
    #[serde(flatten)]
    header: MeasurementId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gates: Option<Vec<CliffordGate>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    basis_file: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::statevector::random_haar_state;

    #[test]
    fn identity_circuit_on_zero_state_hits_bin_zero() {
        let m = SketchMeasurement::from_circuit(CliffordCircuit::identity(3), 4, 0);
        let z = PureState::zero(3).unwrap();
        assert_eq!(m.exact_outcome_distribution(&z).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        let mut rng = rng_from_seed(1);
        for _ in 0..50 {
            assert_eq!(m.sketch_measure(&z, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn single_outcome_is_certain() {
        let mut rng = rng_from_seed(2);
        let s = random_haar_state(4, &mut rng).unwrap();
        for m in [SketchMeasurement::clifford(4, 1, 3).unwrap(), SketchMeasurement::pgm(4, 1, 3).unwrap()] {
            let p = m.exact_outcome_distribution(&s).unwrap();
            assert_eq!(p.len(), 1);
            assert!((p[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bins_have_equal_preimages() {
        let m = SketchMeasurement::clifford(6, 8, 0).unwrap();
        let mut count = [0; 8];
        for x in 0..64 {
            count[m.bin(x)] += 1;
        }
        assert!(count.iter().all(|&c| c == 8));
        // leading qubits decide the bin
        assert_eq!(m.bin(0b101_000), 5);
        assert_eq!(m.bin(0b000_111), 0);
    }

    #[test]
    fn non_power_of_two_k_rejected() {
        assert!(matches!(SketchMeasurement::clifford(4, 3, 0), Err(Error::Argument(_))));
        assert!(matches!(SketchMeasurement::clifford(2, 8, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = SketchMeasurement::clifford(3, 2, 0).unwrap();
        let s = PureState::zero(4).unwrap();
        assert!(matches!(m.exact_outcome_distribution(&s), Err(Error::Argument(_))));
    }

    #[test]
    fn distributions_sum_to_one() {
        let mut rng = rng_from_seed(5);
        let s = random_haar_state(5, &mut rng).unwrap();
        for m in [SketchMeasurement::clifford(5, 8, 9).unwrap(), SketchMeasurement::pgm(5, 8, 9).unwrap()] {
            let p = m.exact_outcome_distribution(&s).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn samples_match_exact_distribution() {
        let mut rng = rng_from_seed(6);
        let s = random_haar_state(4, &mut rng).unwrap();
        let m = SketchMeasurement::clifford(4, 4, 11).unwrap();
        let p = m.exact_outcome_distribution(&s).unwrap();
        let shots = 1_000_000u64;
        let counts = m.sample_counts(&s, shots, &mut rng).unwrap();
        let l1: f64 = p.iter().zip(&counts).map(|(p, &c)| (p - c as f64 / shots as f64).abs()).sum();
        assert!(l1 < 0.01, "l1 = {l1}");

        // per-shot sampling agrees too
        let mut freq = [0u64; 4];
        for _ in 0..20_000 {
            freq[m.sketch_measure(&s, &mut rng).unwrap()] += 1;
        }
        let l1: f64 = p.iter().zip(&freq).map(|(p, &c)| (p - c as f64 / 20_000.0).abs()).sum();
        assert!(l1 < 0.05, "l1 = {l1}");
    }

    #[test]
    fn reproducible_from_id() {
        let a = SketchMeasurement::clifford(5, 4, 42).unwrap();
        let b = SketchMeasurement::new(a.id()).unwrap();
        assert_eq!(a.circuit(), b.circuit());
        let mut r1 = rng_from_seed(1);
        let mut r2 = rng_from_seed(1);
        let s = random_haar_state(5, &mut rng_from_seed(0)).unwrap();
        let x: Vec<usize> = (0..20).map(|_| a.sketch_measure(&s, &mut r1).unwrap()).collect();
        let y: Vec<usize> = (0..20).map(|_| b.sketch_measure(&s, &mut r2).unwrap()).collect();
        assert_eq!(x, y);
    }

    #[test]
    fn pgm_average_outcome_is_uniform() {
        let s = PureState::zero(3).unwrap();
        let trials = 300;
        let mut acc = vec![0.0; 4];
        for seed in 0..trials {
            let m = SketchMeasurement::pgm(3, 4, seed).unwrap();
            for (a, p) in acc.iter_mut().zip(m.exact_outcome_distribution(&s).unwrap()) {
                *a += p / trials as f64;
            }
        }
        for a in acc {
            assert!((a - 0.25).abs() < 0.03, "{a}");
        }
    }

    #[test]
    fn file_roundtrip_both_modes() {
        let dir = tempfile::tempdir().unwrap();
        let s = random_haar_state(4, &mut rng_from_seed(8)).unwrap();
        for m in [SketchMeasurement::clifford(4, 4, 1).unwrap(), SketchMeasurement::pgm(4, 4, 1).unwrap()] {
            let path = dir.path().join(format!("{:?}.json", m.mode()));
            m.save(&path).unwrap();
            let back = SketchMeasurement::load(&path).unwrap();
            assert_eq!(back.id(), m.id());
            let p = m.exact_outcome_distribution(&s).unwrap();
            let q = back.exact_outcome_distribution(&s).unwrap();
            for (a, b) in p.iter().zip(&q) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }
}
