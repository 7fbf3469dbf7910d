//! Classical shadows from randomized single-qubit Pauli measurements.
//!
//! Each row of a [`SeedMatrix`] records, per qubit, the rotation applied
//! before a computational-basis measurement (`u`: 0 = I, 1 = H, 2 = H·S†,
//! i.e. Z, X and Y bases) and the observed bit `b`. The snapshot vector of an
//! entry is `v = U_u†|b⟩`, one of `|0⟩, |1⟩, |±⟩, |±i⟩`.
//!
//! Both estimators work on the histogram of row configurations restricted to
//! the observable's support and sum contributions in configuration order, so
//! results are exactly invariant under permuting rows.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{Reader, Writer};
use crate::observable::{LocalObservable, K_MAX};
use crate::rng::SeedTree;
use crate::statevector::PureState;
use crate::stats::{bootstrap_stderr, cumulative, sample_cumulative};
use crate::{Error, Result, C64};

pub const SHADOW_MAGIC: &[u8; 4] = b"QSH1";
pub const BOOTSTRAP_RESAMPLES: usize = 200;

const ROW_CHUNK: usize = 512;
const SETTING_CACHE_LIMIT: usize = 1 << 22;
const BOOTSTRAP_SEED: u64 = 0x5eed_b007;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShadowMode {
    Cst,
    Qcqc,
}

impl ShadowMode {
    pub fn base(self) -> f64 {
        match self {
            ShadowMode::Cst => 4.0,
            ShadowMode::Qcqc => 9.0,
        }
    }
}

impl std::str::FromStr for ShadowMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cst" => Ok(ShadowMode::Cst),
            "qcqc" => Ok(ShadowMode::Qcqc),
            _ => Err(Error::arg(format!("unknown shadow mode '{s}' (expected cst or qcqc)"))),
        }
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Rotation applied before measuring: I, H, H·S†.
pub fn rotation(u: u8) -> [[C64; 2]; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match u {
        0 => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
        1 => [[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]],
        2 => [[c(s, 0.0), c(0.0, -s)], [c(s, 0.0), c(0.0, s)]],
        _ => panic!("rotation index {u} out of range"),
    }
}

/// Snapshot vector `U_u†|b⟩`.
pub fn snapshot_vector(u: u8, b: u8) -> [C64; 2] {
    let r = rotation(u);
    let b = b as usize;
    [r[b][0].conj(), r[b][1].conj()]
}

/// Single-qubit snapshot `3vv† − I`, written out so its trace is exactly 1.
pub fn snapshot_1q(u: u8, b: u8) -> [[C64; 2]; 2] {
    let z = c(0.0, 0.0);
    match (u, b) {
        (0, 0) => [[c(2.0, 0.0), z], [z, c(-1.0, 0.0)]],
        (0, _) => [[c(-1.0, 0.0), z], [z, c(2.0, 0.0)]],
        (1, 0) => [[c(0.5, 0.0), c(1.5, 0.0)], [c(1.5, 0.0), c(0.5, 0.0)]],
        (1, _) => [[c(0.5, 0.0), c(-1.5, 0.0)], [c(-1.5, 0.0), c(0.5, 0.0)]],
        (2, 0) => [[c(0.5, 0.0), c(0.0, -1.5)], [c(0.0, 1.5), c(0.5, 0.0)]],
        (2, _) => [[c(0.5, 0.0), c(0.0, 1.5)], [c(0.0, -1.5), c(0.5, 0.0)]],
        _ => panic!("rotation index {u} out of range"),
    }
}

/// `Γ₀⁻¹(ρ) = 3ρ − tr(ρ)·I` for a 2×2 Hermitian `ρ`.
pub fn gamma0_inverse(rho: [[C64; 2]; 2]) -> Result<[[C64; 2]; 2]> {
    let herm = (rho[0][1] - rho[1][0].conj()).norm() < 1e-12
        && rho[0][0].im.abs() < 1e-12
        && rho[1][1].im.abs() < 1e-12;
    if !herm {
        return Err(Error::arg("gamma0_inverse needs a Hermitian input"));
    }
    let tr = rho[0][0] + rho[1][1];
    Ok([[rho[0][0] * 3.0 - tr, rho[0][1] * 3.0], [rho[1][0] * 3.0, rho[1][1] * 3.0 - tr]])
}

/// `⌈base^k·‖M‖∞²·ln(1/δ)/ε²⌉`, base 4 for CST and 9 for QCQC.
pub fn required_samples(k: usize, inf_norm: f64, eps: f64, delta: f64, mode: ShadowMode) -> Result<u64> {
    if !(eps > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::arg("required_samples needs eps > 0 and delta in (0, 1)"));
    }
    let n = mode.base().powi(k as i32) * inf_norm * inf_norm * (1.0 / delta).ln() / (eps * eps);
    // guard against 4794.000000001-style rounding
    Ok((n - 1e-9 * n.max(1.0)).ceil().max(0.0) as u64)
}

/// `N × n` matrix of `(b, u)` entries packed at 3 bits each (`code = 2u + b`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedMatrix {
    rows: usize,
    n: usize,
    packed: Vec<u8>,
}

impl SeedMatrix {
    fn empty(rows: usize, n: usize) -> Self {
        SeedMatrix { rows, n, packed: vec![0; (3 * rows * n).div_ceil(8)] }
    }

    /// Builds from `(b, u)` entries, row-major.
    pub fn from_entries(n: usize, entries: &[(u8, u8)]) -> Result<Self> {
        if n == 0 || !entries.len().is_multiple_of(n) {
            return Err(Error::arg("entry count must be a multiple of n"));
        }
        let mut m = Self::empty(entries.len() / n, n);
        for (e, &(b, u)) in entries.iter().enumerate() {
            if b > 1 || u > 2 {
                return Err(Error::arg(format!("invalid seed entry (b = {b}, u = {u})")));
            }
            m.set_code(e, 2 * u + b);
        }
        Ok(m)
    }

    fn set_code(&mut self, e: usize, code: u8) {
        let bit = 3 * e;
        let word = u16::from(self.packed[bit / 8]) | self.packed.get(bit / 8 + 1).map_or(0, |&x| u16::from(x)) << 8;
        let shift = bit % 8;
        let word = (word & !(0b111 << shift)) | (u16::from(code) << shift);
        self.packed[bit / 8] = word as u8;
        if let Some(x) = self.packed.get_mut(bit / 8 + 1) {
            *x = (word >> 8) as u8;
        }
    }

    fn code(&self, e: usize) -> u8 {
        let bit = 3 * e;
        let word = u16::from(self.packed[bit / 8]) | self.packed.get(bit / 8 + 1).map_or(0, |&x| u16::from(x)) << 8;
        ((word >> (bit % 8)) & 0b111) as u8
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// `(b, u)` of row `i`, qubit `j`.
    pub fn entry(&self, i: usize, j: usize) -> (u8, u8) {
        let code = self.code(i * self.n + j);
        (code & 1, code >> 1)
    }

    pub fn entries(&self) -> Vec<(u8, u8)> {
        (0..self.rows * self.n).map(|e| { let c = self.code(e); (c & 1, c >> 1) }).collect()
    }

    /// Snapshot `⊗_{j∈qubits}(3vv† − I)` of row `i`.
    pub fn snapshot(&self, i: usize, qubits: &[usize]) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(1, 1, c(1.0, 0.0));
        for &j in qubits {
            let (b, u) = self.entry(i, j);
            let s = snapshot_1q(u, b);
            m = m.kronecker(&DMatrix::from_fn(2, 2, |r, cc| s[r][cc]));
        }
        m
    }

    /// Rows reordered by `perm` (`perm[i]` is the source row of row `i`).
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        let mut out = Self::empty(perm.len(), self.n);
        for (i, &src) in perm.iter().enumerate() {
            for j in 0..self.n {
                out.set_code(i * self.n + j, self.code(src * self.n + j));
            }
        }
        out
    }

    /// Sorted configuration codes restricted to `qubits` and their counts.
    fn histogram(&self, qubits: &[usize]) -> Vec<(u64, u64)> {
        let mut codes: Vec<u64> = (0..self.rows)
            .map(|i| qubits.iter().fold(0u64, |acc, &j| acc * 6 + u64::from(self.code(i * self.n + j))))
            .collect();
        codes.sort_unstable();
        let mut hist: Vec<(u64, u64)> = Vec::new();
        for code in codes {
            match hist.last_mut() {
                Some((c, n)) if *c == code => *n += 1,
                _ => hist.push((code, 1)),
            }
        }
        hist
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_magic(SHADOW_MAGIC);
        w.u32(self.rows as u32).u16(self.n as u16).bytes(&self.packed);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::with_magic(bytes, SHADOW_MAGIC)?;
        let rows = r.u32()? as usize;
        let n = r.u16()? as usize;
        let packed = r.bytes((3 * rows * n).div_ceil(8))?.to_vec();
        r.finish()?;
        let m = SeedMatrix { rows, n, packed };
        if (0..rows * n).any(|e| m.code(e) > 5) {
            return Err(Error::Format("seed entry with rotation index > 2".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn rotate(state: &PureState, settings: &[u8]) -> PureState {
    let mut s = state.clone();
    for (q, &u) in settings.iter().enumerate() {
        if u != 0 {
            s.apply_1q(q, &rotation(u));
        }
    }
    s
}

/// `rows` randomized Pauli measurements of independent copies of `state`.
pub fn build_seed_matrix(state: &PureState, rows: usize, seed: u64) -> Result<SeedMatrix> {
    if rows == 0 {
        return Err(Error::arg("a seed matrix needs at least one row"));
    }
    let n = state.num_qubits();
    let d = state.dim();
    let tree = SeedTree(seed).named("shadow");
    let settings_count = 3usize.checked_pow(n as u32).unwrap_or(usize::MAX);
    let cached = settings_count.saturating_mul(d) <= SETTING_CACHE_LIMIT && settings_count <= rows;
    let digits = |mut s: usize| -> Vec<u8> {
        let mut u = vec![0u8; n];
        for q in (0..n).rev() {
            u[q] = (s % 3) as u8;
            s /= 3;
        }
        u
    };
    let cdfs: Vec<Vec<f64>> = if cached {
        (0..settings_count).into_par_iter().map(|s| cumulative(&rotate(state, &digits(s)).probabilities())).collect()
    } else {
        Vec::new()
    };
    let chunks: Vec<Vec<u8>> = (0..rows.div_ceil(ROW_CHUNK))
        .into_par_iter()
        .map(|ch| {
            let mut rng = tree.child(ch as u64).rng();
            let count = ROW_CHUNK.min(rows - ch * ROW_CHUNK);
            let mut codes = Vec::with_capacity(count * n);
            for _ in 0..count {
                let (u, outcome) = if cached {
                    let s = rng.random_range(0..settings_count);
                    (digits(s), sample_cumulative(&mut rng, &cdfs[s]))
                } else {
                    let u: Vec<u8> = (0..n).map(|_| rng.random_range(0..3u8)).collect();
                    let rotated = rotate(state, &u);
                    let mut r: f64 = rng.random();
                    let mut outcome = d - 1;
                    for (i, a) in rotated.amplitudes().iter().enumerate() {
                        r -= a.norm_sqr();
                        if r < 0.0 {
                            outcome = i;
                            break;
                        }
                    }
                    (u, outcome)
                };
                for (q, &uq) in u.iter().enumerate() {
                    let b = (outcome >> (n - 1 - q)) & 1;
                    codes.push(2 * uq + b as u8);
                }
            }
            codes
        })
        .collect();
    let mut m = SeedMatrix::empty(rows, n);
    for (e, code) in chunks.into_iter().flatten().enumerate() {
        m.set_code(e, code);
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowEstimate {
    pub value: f64,
    pub n_used: usize,
    pub mode: ShadowMode,
    /// Bootstrap standard error of `value`.
    pub stderr: f64,
    /// Largest `|S_i|` seen (QCQC only).
    pub max_abs_sample: Option<f64>,
}

fn decode_config(mut code: u64, k: usize) -> Vec<(u8, u8)> {
    let mut out = vec![(0, 0); k];
    for slot in out.iter_mut().rev() {
        let e = (code % 6) as u8;
        *slot = (e & 1, e >> 1);
        code /= 6;
    }
    out
}

/// `tr(M · ⊗_j σ_j)` by contracting one tensor factor at a time.
fn trace_against_product(m: &DMatrix<C64>, factors: &[[[C64; 2]; 2]]) -> C64 {
    let k = factors.len();
    let dim = 1usize << k;
    // t[a * dim + b] = M[a, b]
    let mut t: Vec<C64> = (0..dim * dim).map(|i| m[(i / dim, i % dim)]).collect();
    let mut cur = dim;
    for s in factors {
        let half = cur / 2;
        let mut next = vec![c(0.0, 0.0); half * half];
        for a in 0..half {
            for b in 0..half {
                let mut acc = c(0.0, 0.0);
                for a1 in 0..2 {
                    for b1 in 0..2 {
                        acc += s[b1][a1] * t[(a1 * half + a) * cur + b1 * half + b];
                    }
                }
                next[a * half + b] = acc;
            }
        }
        t = next;
        cur = half;
    }
    t[0]
}

fn check_fit(seed: &SeedMatrix, m: &LocalObservable) -> Result<()> {
    if m.locality() > K_MAX {
        return Err(Error::Resource(format!("observable locality {} exceeds {K_MAX}", m.locality())));
    }
    m.check_width(seed.num_qubits())
}

fn bootstrap(values: &[f64], counts: &[u64]) -> f64 {
    let mut rng = SeedTree(BOOTSTRAP_SEED).rng();
    bootstrap_stderr(&mut rng, values, counts, BOOTSTRAP_RESAMPLES)
}

/// Classical-shadow estimate `T = (1/N) Σ_i tr(M ρ̂_i)`.
pub fn estimate_cst(seed: &SeedMatrix, m: &LocalObservable) -> Result<ShadowEstimate> {
    check_fit(seed, m)?;
    let q = m.support();
    let hist = seed.histogram(q);
    let values: Vec<f64> = hist
        .par_iter()
        .map(|&(code, _)| {
            let factors: Vec<[[C64; 2]; 2]> =
                decode_config(code, q.len()).into_iter().map(|(b, u)| snapshot_1q(u, b)).collect();
            trace_against_product(m.dense(), &factors).re
        })
        .collect();
    let counts: Vec<u64> = hist.iter().map(|h| h.1).collect();
    let total: f64 = values.iter().zip(&counts).map(|(v, &n)| v * n as f64).sum();
    Ok(ShadowEstimate {
        value: total / seed.rows() as f64,
        n_used: seed.rows(),
        mode: ShadowMode::Cst,
        stderr: bootstrap(&values, &counts),
        max_abs_sample: None,
    })
}

/// Product state `⊗_j v(u_j, c_j)` on the support.
fn product_state(config: &[(u8, u8)], flips: u32) -> Vec<C64> {
    let k = config.len();
    let mut v = vec![c(1.0, 0.0)];
    for (j, &(b, u)) in config.iter().enumerate() {
        let cbit = if flips >> (k - 1 - j) & 1 == 1 { 1 - b } else { b };
        let s = snapshot_vector(u, cbit);
        v = v.iter().flat_map(|x| [x * s[0], x * s[1]]).collect();
    }
    v
}

/// Estimate from simulated single measurements of `M` on flipped snapshot
/// product states: `S_i = 3^k · x_i · Π_j w_{i,j}`.
pub fn estimate_qcqc(seed: &SeedMatrix, m: &LocalObservable, rng_seed: u64) -> Result<ShadowEstimate> {
    check_fit(seed, m)?;
    let q = m.support();
    let k = q.len();
    let eig = m.eig_decompose();
    let bound = 3f64.powi(k as i32) * m.inf_norm();
    let hist = seed.histogram(q);
    let tree = SeedTree(rng_seed).named("qcqc");
    let per_config: Vec<Vec<f64>> = hist
        .par_iter()
        .map(|&(code, count)| {
            let config = decode_config(code, k);
            let mut rng = tree.child(code).rng();
            let mut cache: HashMap<u32, Vec<f64>> = HashMap::new();
            (0..count)
                .map(|_| {
                    // each factor keeps its bit (w = +1) w.p. 2/3, else flips (w = −1)
                    let mut flips = 0u32;
                    for _ in 0..k {
                        flips = flips << 1 | u32::from(rng.random_range(0..3u8) == 0);
                    }
                    let cdf = cache.entry(flips).or_insert_with(|| {
                        let psi = product_state(&config, flips);
                        let probs: Vec<f64> = eig
                            .vectors
                            .column_iter()
                            .map(|col| col.iter().zip(&psi).map(|(e, p)| e.conj() * p).sum::<C64>().norm_sqr())
                            .collect();
                        cumulative(&probs)
                    });
                    let x = eig.values[sample_cumulative(&mut rng, cdf)];
                    let sign = if flips.count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                    3f64.powi(k as i32) * x * sign
                })
                .collect()
        })
        .collect();
    let samples: Vec<f64> = per_config.into_iter().flatten().collect();
    let max_abs = samples.iter().fold(0.0f64, |a, s| a.max(s.abs()));
    assert!(
        max_abs <= bound * (1.0 + 1e-9) + 1e-12,
        "QCQC sample magnitude {max_abs} exceeds 3^k·‖M‖∞ = {bound}"
    );
    let value = samples.iter().sum::<f64>() / seed.rows() as f64;
    let mut sorted = samples;
    sorted.sort_by(f64::total_cmp);
    let mut values: Vec<f64> = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    for s in sorted {
        if values.last() == Some(&s) {
            *counts.last_mut().unwrap() += 1;
        } else {
            values.push(s);
            counts.push(1);
        }
    }
    Ok(ShadowEstimate {
        value,
        n_used: seed.rows(),
        mode: ShadowMode::Qcqc,
        stderr: bootstrap(&values, &counts),
        max_abs_sample: Some(max_abs),
    })
}

pub fn estimate(seed: &SeedMatrix, m: &LocalObservable, mode: ShadowMode, rng_seed: u64) -> Result<ShadowEstimate> {
    match mode {
        ShadowMode::Cst => estimate_cst(seed, m),
        ShadowMode::Qcqc => estimate_qcqc(seed, m, rng_seed),
    }
}
