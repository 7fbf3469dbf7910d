//! Exact brute-force references: linear-scan search, vector distortion
//! tables, density-matrix vectorization, a full-basis sketch check, and
//! planted-pair constructors for benchmarks.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::measurement::haar_basis;
use crate::rng::SeedTree;
use crate::statevector::{inner_product, random_haar_state, trace_distance, PureState};
use crate::{Error, Result, C64};

const FULL_BASIS_MAX_DIM: usize = 64;

/// Ids whose exact trace distance to `q` is at most `eps`.
pub fn linear_scan_search<'a, I>(states: I, q: &PureState, eps: f64) -> Result<Vec<u64>>
where
    I: IntoIterator<Item = (u64, &'a PureState)>,
{
    let mut out = Vec::new();
    for (id, s) in states {
        if trace_distance(s, q)? <= eps {
            out.push(id);
        }
    }
    Ok(out)
}

/// Trace distance next to amplitude-vector and probability-vector distances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub d: f64,
    pub l1: f64,
    pub l2: f64,
    pub l1_prime: f64,
    pub l2_prime: f64,
}

impl DistortionReport {
    pub fn as_array(&self) -> [f64; 5] {
        [self.d, self.l1, self.l2, self.l1_prime, self.l2_prime]
    }
}

pub fn distortion_table(a: &PureState, b: &PureState) -> Result<DistortionReport> {
    let d = trace_distance(a, b)?;
    let (mut l1, mut l2, mut p1, mut p2) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
        let diff = (x - y).norm();
        l1 += diff;
        l2 += diff * diff;
        let pd = (x.norm_sqr() - y.norm_sqr()).abs();
        p1 += pd;
        p2 += pd * pd;
    }
    Ok(DistortionReport { d, l1, l2: l2.sqrt(), l1_prime: p1, l2_prime: p2.sqrt() })
}

/// Worst-case ratio distortion of a distance relative to `D` across two pairs:
/// `max{(D/x)_a / (D/x)_b, (x/D)_a / (x/D)_b}`.
pub fn pairwise_distortion(d_a: f64, x_a: f64, d_b: f64, x_b: f64) -> f64 {
    let ra = x_a / d_a;
    let rb = x_b / d_b;
    (ra / rb).max(rb / ra)
}

/// Half-overlapping pair: uniform on the first half versus the middle half
/// of the basis. Overlap 1/2, so `D = √(3/4)`.
pub fn half_overlap_pair(n: usize) -> Result<(PureState, PureState)> {
    if n < 2 {
        return Err(Error::arg("the half-overlap pair needs d >= 4"));
    }
    let d = 1usize << n;
    let amp = C64::new((2.0 / d as f64).sqrt(), 0.0);
    let mut a = vec![C64::new(0.0, 0.0); d];
    let mut b = a.clone();
    a[..d / 2].fill(amp);
    b[d / 4..3 * d / 4].fill(amp);
    Ok((PureState::from_amplitudes(a)?, PureState::from_amplitudes(b)?))
}

/// Real and imaginary parts of `φφ†`, row-major, length `2d²`.
pub fn density_vectorize(state: &PureState) -> Vec<f64> {
    let a = state.amplitudes();
    let d = a.len();
    let mut out = Vec::with_capacity(2 * d * d);
    let mut im = Vec::with_capacity(d * d);
    for x in a {
        for y in a {
            let v = x * y.conj();
            out.push(v.re);
            im.push(v.im);
        }
    }
    out.extend(im);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullBasisReport {
    pub d: usize,
    pub trials: usize,
    /// Worst-case `ℓ1/D` (the empirical lower constant).
    pub min_l1_over_d: f64,
    pub max_l1_over_d: f64,
    /// Worst-case total variation `ℓ1/2` over `D`.
    pub max_tv_over_d: f64,
    /// Trials whose total variation exceeded `D` (beyond 1e-12).
    pub tv_violations: usize,
}

/// Full `d`-outcome Haar-basis distributions of Haar pairs: reports the
/// empirical constants relating their ℓ1 distance to `D`.
pub fn full_basis_check(n: usize, trials: usize, seed: u64) -> Result<FullBasisReport> {
    let d = 1usize << n;
    if d > FULL_BASIS_MAX_DIM {
        return Err(Error::Resource(format!("full-basis check is limited to d <= {FULL_BASIS_MAX_DIM}")));
    }
    if trials == 0 {
        return Err(Error::arg("need at least one trial"));
    }
    let tree = SeedTree(seed).named("full-basis");
    let rows: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree.child(t as u64).rng();
            let a = random_haar_state(n, &mut rng)?;
            let b = random_haar_state(n, &mut rng)?;
            let basis = haar_basis(d, &mut rng)?;
            let dist = trace_distance(&a, &b)?;
            let mut l1 = 0.0;
            for col in basis.column_iter() {
                let pa: C64 = col.iter().zip(a.amplitudes()).map(|(g, x)| g.conj() * x).sum();
                let pb: C64 = col.iter().zip(b.amplitudes()).map(|(g, x)| g.conj() * x).sum();
                l1 += (pa.norm_sqr() - pb.norm_sqr()).abs();
            }
            Ok((l1, dist))
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = rows.iter().map(|(l1, dist)| l1 / dist).collect();
    Ok(FullBasisReport {
        d,
        trials,
        min_l1_over_d: ratios.iter().cloned().fold(f64::INFINITY, f64::min),
        max_l1_over_d: ratios.iter().cloned().fold(0.0, f64::max),
        max_tv_over_d: ratios.iter().cloned().fold(0.0, f64::max) / 2.0,
        tv_violations: rows.iter().filter(|(l1, dist)| l1 / 2.0 > dist + 1e-12).count(),
    })
}

/// Haar-random unit vector orthogonal to `phi`.
pub fn random_orthogonal<R: Rng + ?Sized>(phi: &PureState, rng: &mut R) -> Result<PureState> {
    loop {
        let r = random_haar_state(phi.num_qubits(), rng)?;
        let ov = inner_product(phi, &r)?;
        let amps: Vec<C64> = r.amplitudes().iter().zip(phi.amplitudes()).map(|(x, p)| x - p * ov).collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return PureState::normalized(amps);
        }
    }
}

/// State at trace distance exactly `dist` from `phi`: `cos θ·φ + sin θ·φ⊥`
/// with `sin θ = dist`.
pub fn planted_partner<R: Rng + ?Sized>(phi: &PureState, dist: f64, rng: &mut R) -> Result<PureState> {
    if !(0.0..=1.0).contains(&dist) {
        return Err(Error::arg(format!("trace distance {dist} outside [0, 1]")));
    }
    let perp = random_orthogonal(phi, rng)?;
    let c = (1.0 - dist * dist).sqrt();
    let amps = phi.amplitudes().iter().zip(perp.amplitudes()).map(|(p, q)| p * c + q * dist).collect();
    PureState::normalized(amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn table_values_at_d16() {
        let (a, b) = half_overlap_pair(4).unwrap();
        let r = distortion_table(&a, &b).unwrap();
        assert!(close(r.d, 0.75f64.sqrt()));
        assert!(close(r.l1, 8f64.sqrt()));
        assert!(close(r.l2, 1.0));
        assert!(close(r.l1_prime, 1.0));
        assert!(close(r.l2_prime, (1.0f64 / 8.0).sqrt()));

        let z = PureState::basis(4, 0).unwrap();
        let o = PureState::basis(4, 1).unwrap();
        let s = distortion_table(&z, &o).unwrap();
        assert!(close(s.d, 1.0) && close(s.l1, 2.0) && close(s.l2, 2f64.sqrt()));
        assert!(close(s.l1_prime, 2.0) && close(s.l2_prime, 2f64.sqrt()));

        // distortion column
        assert!(close(pairwise_distortion(r.d, r.l1, s.d, s.l1), (16.0f64 / 6.0).sqrt()));
        assert!(close(pairwise_distortion(r.d, r.l2, s.d, s.l2), 1.5f64.sqrt()));
        assert!(close(pairwise_distortion(r.d, r.l1_prime, s.d, s.l1_prime), 3f64.sqrt()));
        assert!(close(pairwise_distortion(r.d, r.l2_prime, s.d, s.l2_prime), 12f64.sqrt()));
    }

    #[test]
    fn probability_l2_shrinks_with_dimension() {
        let mut prev = None;
        for n in [4, 6, 8] {
            let (a, b) = half_overlap_pair(n).unwrap();
            let r = distortion_table(&a, &b).unwrap();
            let scaled = r.l2_prime / r.d * ((1usize << n) as f64).sqrt();
            if let Some(p) = prev {
                assert!(close(scaled, p));
            }
            prev = Some(scaled);
        }
    }

    #[test]
    fn identical_pair_is_all_zero() {
        let s = random_haar_state(3, &mut rng_from_seed(1)).unwrap();
        assert_eq!(distortion_table(&s, &s).unwrap().as_array(), [0.0; 5]);
    }

    #[test]
    fn density_vectors_follow_frobenius_identity() {
        let mut rng = rng_from_seed(2);
        for _ in 0..100 {
            let a = random_haar_state(3, &mut rng).unwrap();
            let b = random_haar_state(3, &mut rng).unwrap();
            let (va, vb) = (density_vectorize(&a), density_vectorize(&b));
            assert_eq!(va.len(), 2 * 64);
            let l2: f64 = va.iter().zip(&vb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            let dist = trace_distance(&a, &b).unwrap();
            assert!((l2 - 2f64.sqrt() * dist).abs() < 1e-10);
            let norm: f64 = va.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn density_vector_ignores_global_phase() {
        let s = random_haar_state(3, &mut rng_from_seed(3)).unwrap();
        let phase = C64::from_polar(1.0, 0.7);
        let t = PureState::from_amplitudes(s.amplitudes().iter().map(|a| a * phase).collect()).unwrap();
        for (x, y) in density_vectorize(&s).iter().zip(density_vectorize(&t)) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_scan_finds_members_and_duplicates() {
        let mut rng = rng_from_seed(4);
        let states: Vec<PureState> = (0..10).map(|_| random_haar_state(4, &mut rng).unwrap()).collect();
        let q = states[3].clone();
        let hits = linear_scan_search(states.iter().enumerate().map(|(i, s)| (i as u64, s)), &q, 0.0).unwrap();
        assert_eq!(hits, vec![3]);
    }

    #[test]
    fn planted_partner_has_requested_distance() {
        let mut rng = rng_from_seed(5);
        let phi = random_haar_state(5, &mut rng).unwrap();
        for dist in [0.0, 0.05, 0.4, 1.0] {
            let psi = planted_partner(&phi, dist, &mut rng).unwrap();
            assert!((trace_distance(&phi, &psi).unwrap() - dist).abs() < 1e-9);
        }
    }

    #[test]
    fn full_basis_check_reports_constants() {
        let r = full_basis_check(4, 500, 6).unwrap();
        assert_eq!(r.tv_violations, 0, "{r:?}");
        assert!(r.min_l1_over_d > 0.0);
        let s = random_haar_state(3, &mut rng_from_seed(1)).unwrap();
        assert_eq!(distortion_table(&s, &s).unwrap().l1_prime, 0.0);
        assert!(matches!(full_basis_check(7, 1, 0), Err(Error::Resource(_))));
    }
}
