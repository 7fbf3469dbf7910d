//! Vector sketches: length-k outcome distributions of a shared sketching
//! measurement, and trace-distance estimates derived from their ℓ1/ℓ2 gaps.

use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{Reader, Writer};
use crate::measurement::{MeasurementId, SketchMeasurement};
use crate::rng::SeedTree;
use crate::statevector::{random_haar_state, trace_distance, PureState};
use crate::stats::{mean, variance};
use crate::{Error, Result};

pub const SKETCH_MAGIC: &[u8; 4] = b"QSK1";

/// Gaussian-limit value `√π/2` of the ℓ1 normalization constant.
pub const DEFAULT_C_TAU: f64 = 0.886_226_925_452_758;

/// Upper clamp applied to distance estimates (trace distance never exceeds 1;
/// the slack absorbs embedding distortion).
pub const ESTIMATE_CEILING: f64 = 1.5;

const C_TAU_BAND: (f64, f64) = (0.4, 2.5);
const MIN_PAIR_DISTANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    L1,
    L2,
}

impl Flavor {
    fn code(self) -> u8 {
        match self {
            Flavor::L1 => 1,
            Flavor::L2 => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            1 => Ok(Flavor::L1),
            2 => Ok(Flavor::L2),
            _ => Err(Error::Format(format!("unknown sketch flavor byte {c}"))),
        }
    }

    /// Raw ℓ1 or ℓ2 distance between two vectors.
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Flavor::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Flavor::L2 => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        }
    }

    /// Factor turning a sketch-space distance into a trace-distance estimate.
    pub fn scale(self, d: usize, k: usize, c_tau: f64) -> f64 {
        match self {
            Flavor::L1 => (d as f64 / k as f64).sqrt() * c_tau,
            Flavor::L2 => (d as f64 / 2.0).sqrt(),
        }
    }
}

impl std::str::FromStr for Flavor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Flavor::L1),
            "l2" => Ok(Flavor::L2),
            _ => Err(Error::arg(format!("unknown flavor '{s}' (expected l1 or l2)"))),
        }
    }
}

/// Exact outcome probabilities or `s` simulated copies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    Exact,
    Shots(u64),
}

impl SampleMode {
    pub fn shots(self) -> u64 {
        match self {
            SampleMode::Exact => 0,
            SampleMode::Shots(s) => s,
        }
    }
}

/// Which copy-count rule sizes empirical sketches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleRule {
    /// `c_s·d/ε̂²`
    Plain,
    /// `c_s·d·ln(1/δ)/ε̂²`
    WithConfidence,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SketchParams {
    pub iota: f64,
    pub delta: f64,
    pub c_design: f64,
    pub eps_hat: f64,
    pub c_s: f64,
    pub sample_rule: SampleRule,
    pub exact: bool,
}

impl Default for SketchParams {
    fn default() -> Self {
        SketchParams {
            iota: 0.01,
            delta: 0.01,
            c_design: 1.0,
            eps_hat: 0.01,
            c_s: 4.0,
            sample_rule: SampleRule::WithConfidence,
            exact: false,
        }
    }
}

impl SketchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.iota > 0.0) || !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::arg("need iota > 0 and delta in (0, 1)"));
        }
        if !(self.c_design > 0.0) || !(self.c_s > 0.0) || !(self.eps_hat > 0.0) {
            return Err(Error::arg("c_design, c_s and eps_hat must be positive"));
        }
        Ok(())
    }

    /// `⌈c·ln(1/δ)/ι²⌉` rounded up to a power of two, at least 2 and at most `d`.
    pub fn derived_k(&self, d: usize) -> usize {
        let raw = (self.c_design * (1.0 / self.delta).ln() / (self.iota * self.iota)).ceil();
        let k = if raw >= d as f64 { d } else { (raw.max(2.0) as usize).next_power_of_two() };
        k.clamp(2.min(d), d)
    }

    /// Copies per empirical sketch under the configured rule.
    pub fn sample_count(&self, d: usize) -> u64 {
        let conf = match self.sample_rule {
            SampleRule::Plain => 1.0,
            SampleRule::WithConfidence => (1.0 / self.delta).ln().max(1.0),
        };
        (self.c_s * d as f64 * conf / (self.eps_hat * self.eps_hat)).ceil() as u64
    }

    pub fn sample_mode(&self, d: usize) -> SampleMode {
        if self.exact {
            SampleMode::Exact
        } else {
            SampleMode::Shots(self.sample_count(d))
        }
    }

    /// Smallest β for which the equality test's promise gap is resolvable.
    pub fn min_beta(&self, eps: f64) -> f64 {
        1.0 + self.iota + self.eps_hat / eps
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SketchVector {
    pub flavor: Flavor,
    pub d: usize,
    pub k: usize,
    /// Number of copies used; 0 for exact sketches.
    pub samples: u64,
    pub measurement_id: MeasurementId,
    pub probs: Vec<f64>,
}

impl SketchVector {
    pub fn with_flavor(mut self, flavor: Flavor) -> Self {
        self.flavor = flavor;
        self
    }

    pub fn is_exact(&self) -> bool {
        self.samples == 0
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_magic(SKETCH_MAGIC);
        w.u8(self.flavor.code()).u32(self.k as u32).u64(self.d as u64).u64(self.samples);
        self.measurement_id.write(&mut w);
        for &p in &self.probs {
            w.f64(p);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::with_magic(bytes, SKETCH_MAGIC)?;
        let flavor = Flavor::from_code(r.u8()?)?;
        let k = r.u32()? as usize;
        let d = r.u64()? as usize;
        let samples = r.u64()?;
        let measurement_id = MeasurementId::read(&mut r)?;
        if measurement_id.k != k || measurement_id.dim() != d {
            return Err(Error::Format("sketch dimensions disagree with its measurement".into()));
        }
        let probs = (0..k).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Format("sketch probabilities are not a distribution".into()));
        }
        Ok(SketchVector { flavor, d, k, samples, measurement_id, probs })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Sketch of `state` under `m`, exact or from `s` simulated copies.
pub fn build_sketch<R: Rng + ?Sized>(
    state: &PureState,
    m: &SketchMeasurement,
    mode: SampleMode,
    flavor: Flavor,
    rng: &mut R,
) -> Result<SketchVector> {
    let (probs, samples) = match mode {
        SampleMode::Exact => (m.exact_outcome_distribution(state)?, 0),
        SampleMode::Shots(0) => {
            return Err(Error::arg("empirical sketches need s > 0 copies (or exact mode)"));
        }
        SampleMode::Shots(s) => {
            let counts = m.sample_counts(state, s, rng)?;
            (counts.iter().map(|&c| c as f64 / s as f64).collect(), s)
        }
    };
    Ok(SketchVector { flavor, d: m.dim(), k: m.k(), samples, measurement_id: m.id(), probs })
}

/// Sketches a batch in parallel; state `i` uses the child stream `i` of `seed`.
pub fn build_sketches(
    states: &[PureState],
    m: &SketchMeasurement,
    mode: SampleMode,
    flavor: Flavor,
    seed: u64,
) -> Result<Vec<SketchVector>> {
    let tree = SeedTree(seed).named("sketch");
    states
        .par_iter()
        .enumerate()
        .map(|(i, s)| build_sketch(s, m, mode, flavor, &mut tree.child(i as u64).rng()))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CTauCalibration {
    pub d: usize,
    pub k: usize,
    pub c_tau: f64,
    /// 0 for the uncalibrated default.
    pub trials: usize,
    /// 95% confidence half-width of `c_tau`; 0 when uncalibrated.
    pub ci_halfwidth: f64,
}

impl CTauCalibration {
    /// The Gaussian-limit constant, not calibrated for `(d, k)`.
    pub fn default_for(d: usize, k: usize) -> Self {
        CTauCalibration { d, k, c_tau: DEFAULT_C_TAU, trials: 0, ci_halfwidth: 0.0 }
    }

    pub fn mean_ratio(&self) -> f64 {
        1.0 / self.c_tau
    }
}

/// Calibrates `c_tau = 1/E[√(d/k)·ℓ1/D]` on Haar pairs under Clifford measurements.
pub fn calibrate_c_tau(n: usize, k: usize, trials: usize, seed: u64) -> Result<CTauCalibration> {
    let ratios = l1_ratio_samples(n, k, trials, seed)?;
    let m = mean(&ratios);
    let c_tau = 1.0 / m;
    if !(c_tau > C_TAU_BAND.0 && c_tau < C_TAU_BAND.1) {
        return Err(Error::Internal(format!("calibrated c_tau = {c_tau} is outside the sanity band")));
    }
    let hw_ratio = 1.96 * (variance(&ratios) / trials as f64).sqrt();
    Ok(CTauCalibration { d: 1 << n, k, c_tau, trials, ci_halfwidth: c_tau * hw_ratio / m })
}

/// Uncalibrated ratios `√(d/k)·ℓ1/D` over `trials` independent (measurement, Haar pair) draws.
pub fn l1_ratio_samples(n: usize, k: usize, trials: usize, seed: u64) -> Result<Vec<f64>> {
    if trials < 100 {
        return Err(Error::arg("calibration needs at least 100 trials"));
    }
    let d = 1usize << n;
    let tree = SeedTree(seed).named("c-tau");
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let node = tree.child(t as u64);
            let mut rng = node.named("pair").rng();
            let (a, b, dist) = loop {
                let a = random_haar_state(n, &mut rng)?;
                let b = random_haar_state(n, &mut rng)?;
                let dist = trace_distance(&a, &b)?;
                if dist >= MIN_PAIR_DISTANCE {
                    break (a, b, dist);
                }
            };
            let m = SketchMeasurement::clifford(n, k, node.named("measurement").0)?;
            let pa = m.exact_outcome_distribution(&a)?;
            let pb = m.exact_outcome_distribution(&b)?;
            Ok(Flavor::L1.distance(&pa, &pb) * (d as f64 / k as f64).sqrt() / dist)
        })
        .collect()
}

fn check_comparable(a: &SketchVector, b: &SketchVector, flavor: Flavor) -> Result<()> {
    if a.measurement_id != b.measurement_id {
        return Err(Error::arg(format!(
            "sketches come from different measurements ({:?} vs {:?}) and are incomparable",
            a.measurement_id, b.measurement_id
        )));
    }
    if a.flavor != flavor || b.flavor != flavor {
        return Err(Error::arg(format!("expected {flavor:?} sketches, got {:?} and {:?}", a.flavor, b.flavor)));
    }
    if a.probs.len() != b.probs.len() {
        return Err(Error::arg("sketch lengths differ"));
    }
    Ok(())
}

/// Unclamped `√(d/k)·c_τ·‖a − b‖₁`.
pub fn estimate_d_l1_raw(a: &SketchVector, b: &SketchVector, cal: &CTauCalibration) -> Result<f64> {
    check_comparable(a, b, Flavor::L1)?;
    if cal.d != a.d || cal.k != a.k {
        return Err(Error::arg(format!(
            "calibration is for (d, k) = ({}, {}), sketches are ({}, {})",
            cal.d, cal.k, a.d, a.k
        )));
    }
    Ok(Flavor::L1.scale(a.d, a.k, cal.c_tau) * Flavor::L1.distance(&a.probs, &b.probs))
}

pub fn estimate_d_l1(a: &SketchVector, b: &SketchVector, cal: &CTauCalibration) -> Result<f64> {
    Ok(estimate_d_l1_raw(a, b, cal)?.clamp(0.0, ESTIMATE_CEILING))
}

/// Unclamped `√(d/2)·‖a − b‖₂`.
pub fn estimate_d_l2_raw(a: &SketchVector, b: &SketchVector) -> Result<f64> {
    check_comparable(a, b, Flavor::L2)?;
    Ok(Flavor::L2.scale(a.d, a.k, 0.0) * Flavor::L2.distance(&a.probs, &b.probs))
}

pub fn estimate_d_l2(a: &SketchVector, b: &SketchVector) -> Result<f64> {
    Ok(estimate_d_l2_raw(a, b)?.clamp(0.0, ESTIMATE_CEILING))
}

/// Clamped estimate using the flavor carried by the sketches.
pub fn estimate_distance(a: &SketchVector, b: &SketchVector, cal: Option<&CTauCalibration>) -> Result<f64> {
    match a.flavor {
        Flavor::L1 => {
            let cal = cal.ok_or_else(|| Error::arg("L1 estimates need a c_tau calibration"))?;
            estimate_d_l1(a, b, cal)
        }
        Flavor::L2 => estimate_d_l2(a, b),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EqualityDecision {
    Equal,
    NotEqual,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqualityOutcome {
    pub decision: EqualityDecision,
    pub estimate: f64,
    pub threshold: f64,
}

/// `(ε, β)` equality test: equal iff the estimate is at most `(1+β)ε/2`.
pub fn equality_test(
    a: &SketchVector,
    b: &SketchVector,
    eps: f64,
    beta: f64,
    params: &SketchParams,
    cal: Option<&CTauCalibration>,
) -> Result<EqualityOutcome> {
    if !(eps > 0.0) {
        return Err(Error::arg("eps must be positive"));
    }
    let min_beta = params.min_beta(eps);
    if !(beta > min_beta) {
        return Err(Error::arg(format!(
            "beta = {beta} is infeasible; need beta > 1 + iota + eps_hat/eps = {min_beta:.6}"
        )));
    }
    let estimate = estimate_distance(a, b, cal)?;
    let threshold = (1.0 + beta) * eps / 2.0;
    let decision = if estimate <= threshold { EqualityDecision::Equal } else { EqualityDecision::NotEqual };
    Ok(EqualityOutcome { decision, estimate, threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::CliffordCircuit;
    use crate::rng::rng_from_seed;
    use crate::statevector::random_haar_state;
    use proptest::prelude::*;

    fn exact(s: &PureState, m: &SketchMeasurement, f: Flavor) -> SketchVector {
        build_sketch(s, m, SampleMode::Exact, f, &mut rng_from_seed(0)).unwrap()
    }

    #[test]
    fn exact_sketch_of_zero_state() {
        let m = SketchMeasurement::from_circuit(CliffordCircuit::identity(3), 4, 0);
        let s = exact(&PureState::zero(3).unwrap(), &m, Flavor::L1);
        assert_eq!(s.probs, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.samples, 0);
    }

    #[test]
    fn zero_shots_rejected() {
        let m = SketchMeasurement::clifford(3, 4, 0).unwrap();
        let s = PureState::zero(3).unwrap();
        let r = build_sketch(&s, &m, SampleMode::Shots(0), Flavor::L1, &mut rng_from_seed(0));
        assert!(matches!(r, Err(Error::Argument(_))));
    }

    #[test]
    fn empirical_sketch_is_close_to_exact() {
        let mut rng = rng_from_seed(4);
        let s = random_haar_state(6, &mut rng).unwrap();
        let m = SketchMeasurement::clifford(6, 16, 2).unwrap();
        let e = exact(&s, &m, Flavor::L1);
        let emp = build_sketch(&s, &m, SampleMode::Shots(100_000), Flavor::L1, &mut rng).unwrap();
        assert_eq!(emp.samples, 100_000);
        assert!(Flavor::L1.distance(&e.probs, &emp.probs) <= 0.02);
        // probabilities are exactly counts / s
        for p in &emp.probs {
            let c = p * 100_000.0;
            assert!((c - c.round()).abs() < 1e-6);
        }
    }

    #[test]
    fn empirical_gap_shrinks_with_copies() {
        let mut rng = rng_from_seed(5);
        let a = random_haar_state(6, &mut rng).unwrap();
        let b = random_haar_state(6, &mut rng).unwrap();
        let m = SketchMeasurement::clifford(6, 16, 3).unwrap();
        let exact_gap = Flavor::L1.distance(&exact(&a, &m, Flavor::L1).probs, &exact(&b, &m, Flavor::L1).probs);
        let mut last = f64::INFINITY;
        for s in [1_000u64, 100_000, 10_000_000] {
            let ea = build_sketch(&a, &m, SampleMode::Shots(s), Flavor::L1, &mut rng).unwrap();
            let eb = build_sketch(&b, &m, SampleMode::Shots(s), Flavor::L1, &mut rng).unwrap();
            let gap = (Flavor::L1.distance(&ea.probs, &eb.probs) - exact_gap).abs();
            // two multinomial deviations, each at most sqrt(k/s) in expectation
            assert!(gap <= 2.0 * 3.0 * (16.0 / s as f64).sqrt(), "s = {s}, gap = {gap}");
            last = last.min(gap);
        }
        assert!(last < 0.01);
    }

    #[test]
    fn deterministic_and_symmetric() {
        let mut rng = rng_from_seed(6);
        let a = random_haar_state(5, &mut rng).unwrap();
        let b = random_haar_state(5, &mut rng).unwrap();
        let m = SketchMeasurement::clifford(5, 8, 1).unwrap();
        assert_eq!(exact(&a, &m, Flavor::L2), exact(&a, &m, Flavor::L2));
        let cal = CTauCalibration::default_for(32, 8);
        let (xa, xb) = (exact(&a, &m, Flavor::L1), exact(&b, &m, Flavor::L1));
        assert_eq!(estimate_d_l1(&xa, &xa, &cal).unwrap(), 0.0);
        assert_eq!(estimate_d_l1(&xa, &xb, &cal).unwrap(), estimate_d_l1(&xb, &xa, &cal).unwrap());
        let (ya, yb) = (exact(&a, &m, Flavor::L2), exact(&b, &m, Flavor::L2));
        assert_eq!(estimate_d_l2(&ya, &ya).unwrap(), 0.0);
        assert_eq!(estimate_d_l2(&ya, &yb).unwrap(), estimate_d_l2(&yb, &ya).unwrap());
    }

    #[test]
    fn mismatched_measurements_rejected() {
        let s = PureState::zero(4).unwrap();
        let m1 = SketchMeasurement::clifford(4, 4, 1).unwrap();
        let m2 = SketchMeasurement::clifford(4, 4, 2).unwrap();
        let a = exact(&s, &m1, Flavor::L2);
        let b = exact(&s, &m2, Flavor::L2);
        assert!(matches!(estimate_d_l2(&a, &b), Err(Error::Argument(_))));
        let cal = CTauCalibration::default_for(16, 4);
        let a1 = a.clone().with_flavor(Flavor::L1);
        assert!(matches!(estimate_d_l1(&a1, &a, &cal), Err(Error::Argument(_))));
    }

    #[test]
    fn calibration_matches_gaussian_limit() {
        let cal = calibrate_c_tau(10, 64, 300, 17).unwrap();
        assert!((cal.c_tau - 0.886).abs() < 0.02, "{cal:?}");
        let m = cal.mean_ratio();
        assert!((0.48..=std::f64::consts::SQRT_2).contains(&m));
    }

    #[test]
    fn calibration_batches_agree() {
        let a = calibrate_c_tau(8, 16, 200, 1).unwrap();
        let b = calibrate_c_tau(8, 16, 200, 2).unwrap();
        assert!((a.c_tau - b.c_tau).abs() <= a.ci_halfwidth + b.ci_halfwidth, "{a:?} {b:?}");
    }

    #[test]
    fn calibration_needs_trials() {
        assert!(matches!(calibrate_c_tau(4, 4, 10, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn orthogonal_basis_pair_under_pgm_l2() {
        // |0> and |1> through Haar bases: distortion band at k = 64
        let a = PureState::basis(8, 0).unwrap();
        let b = PureState::basis(8, 1).unwrap();
        let draws = 60;
        let ratios: Vec<f64> = (0..draws)
            .into_par_iter()
            .map(|i| {
                let m = SketchMeasurement::pgm(8, 64, 1000 + i).unwrap();
                estimate_d_l2_raw(&exact(&a, &m, Flavor::L2), &exact(&b, &m, Flavor::L2)).unwrap()
            })
            .collect();
        let inside = ratios.iter().filter(|&&r| (r - 1.0).abs() <= 0.35).count();
        assert!(inside as f64 >= 0.9 * draws as f64, "{inside}/{draws}");
    }

    #[test]
    fn l2_ratio_mean_near_one() {
        let tree = SeedTree(3);
        let ratios: Vec<f64> = (0..500u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = tree.child(i).rng();
                let a = random_haar_state(8, &mut rng).unwrap();
                let b = random_haar_state(8, &mut rng).unwrap();
                let m = SketchMeasurement::clifford(8, 32, i).unwrap();
                let est = estimate_d_l2_raw(&exact(&a, &m, Flavor::L2), &exact(&b, &m, Flavor::L2)).unwrap();
                est / trace_distance(&a, &b).unwrap()
            })
            .collect();
        let mu = mean(&ratios);
        assert!((0.95..=1.05).contains(&mu), "{mu}");
    }

    #[test]
    fn equality_decisions() {
        let params = SketchParams { iota: 0.35, eps_hat: 0.01, ..Default::default() };
        let mut rng = rng_from_seed(9);
        let m = SketchMeasurement::clifford(10, 64, 4).unwrap();
        let phi = random_haar_state(10, &mut rng).unwrap();
        let psi = crate::oracle::planted_partner(&phi, 1.0, &mut rng).unwrap();
        let cal = CTauCalibration::default_for(1024, 64);
        let a = exact(&phi, &m, Flavor::L1);
        let b = exact(&psi, &m, Flavor::L1);
        let same = equality_test(&a, &a, 0.1, 4.0, &params, Some(&cal)).unwrap();
        assert_eq!(same.decision, EqualityDecision::Equal);
        let far = equality_test(&a, &b, 0.1, 4.0, &params, Some(&cal)).unwrap();
        assert_eq!(far.decision, EqualityDecision::NotEqual);
        assert_eq!(far.threshold, 0.25);
        let swapped = equality_test(&b, &a, 0.1, 4.0, &params, Some(&cal)).unwrap();
        assert_eq!(far.decision, swapped.decision);
        let err = equality_test(&a, &b, 0.1, 1.2, &params, Some(&cal)).unwrap_err();
        assert!(err.to_string().contains("1.45"), "{err}");
    }

    #[test]
    fn derived_parameters() {
        let p = SketchParams { iota: 0.35, delta: 0.1, c_design: 1.0, ..Default::default() };
        assert_eq!(p.derived_k(1024), 32);
        assert_eq!(p.derived_k(16), 16);
        let q = SketchParams { eps_hat: 0.1, delta: 0.5, sample_rule: SampleRule::Plain, ..Default::default() };
        assert_eq!(q.sample_count(16), 6400);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = SketchMeasurement::clifford(4, 4, 7).unwrap();
        let s = exact(&random_haar_state(4, &mut rng_from_seed(1)).unwrap(), &m, Flavor::L2);
        let path = dir.path().join("s.qsk");
        s.save(&path).unwrap();
        assert_eq!(SketchVector::load(&path).unwrap(), s);
        let mut bytes = s.to_bytes();
        bytes[0] = b'X';
        assert!(matches!(SketchVector::from_bytes(&bytes), Err(Error::Format(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn sketches_are_distributions(seed in 0u64..10_000, shots in 1u64..5000) {
            let mut rng = rng_from_seed(seed);
            let s = random_haar_state(5, &mut rng).unwrap();
            let m = SketchMeasurement::clifford(5, 8, seed).unwrap();
            for mode in [SampleMode::Exact, SampleMode::Shots(shots)] {
                let v = build_sketch(&s, &m, mode, Flavor::L1, &mut rng).unwrap();
                prop_assert!((v.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(v.probs.iter().all(|&p| p >= 0.0));
            }
        }
    }
}
