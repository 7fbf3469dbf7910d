//! Monte Carlo checks of the 2-design moment identities for sampled Clifford
//! columns, and a Clifford-vs-PGM comparison of outcome moments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sample_clifford, SketchMeasurement};
use crate::rng::SeedTree;
use crate::statevector::{random_haar_state, PureState};
use crate::stats::{mean, variance, welch_p_value};
use crate::{Error, Result};

const CHUNK: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentStats {
    pub n: usize,
    pub trials: usize,
    /// `E|U₁₁|²`, target `1/d`.
    pub est_second: f64,
    /// `E|U₁₁|⁴`, target `2/(d(d+1))`.
    pub est_fourth: f64,
    /// `E[|U₁₁|²|U₂₁|²]`, target `1/(d(d+1))`.
    pub est_cross: f64,
    /// `Var[W]` with `W = d(|U₁₁|² − |U₂₁|²)`, target `2d/(d+1)`.
    pub est_var_w: f64,
    pub target_second: f64,
    pub target_fourth: f64,
    pub target_cross: f64,
    pub target_var_w: f64,
}

impl MomentStats {
    fn rel(est: f64, target: f64) -> f64 {
        (est - target).abs() / target
    }

    /// Largest relative error across the four moments.
    pub fn max_relative_error(&self) -> f64 {
        [
            Self::rel(self.est_second, self.target_second),
            Self::rel(self.est_fourth, self.target_fourth),
            Self::rel(self.est_cross, self.target_cross),
            Self::rel(self.est_var_w, self.target_var_w),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Moments of the first column of uniformly sampled Clifford unitaries.
pub fn validate_design_moments(n: usize, trials: usize, seed: u64) -> Result<MomentStats> {
    if n == 0 || trials == 0 {
        return Err(Error::arg("need n >= 1 and trials >= 1"));
    }
    let d = 1usize << n;
    let df = d as f64;
    let tree = SeedTree(seed).named("moments");
    let chunks = trials.div_ceil(CHUNK);
    // (|U11|², |U21|²) per trial
    let pairs: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = tree.child(c as u64).rng();
            let count = CHUNK.min(trials - c * CHUNK);
            (0..count)
                .map(|_| {
                    let circuit = sample_clifford(n, &mut rng);
                    let mut col = PureState::zero(n).expect("width checked");
                    circuit.apply_mut(&mut col).expect("width matches");
                    let a = col.amplitudes();
                    (a[0].norm_sqr(), if d > 1 { a[1].norm_sqr() } else { 0.0 })
                })
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect();
    let t = trials as f64;
    let est_second = pairs.iter().map(|p| p.0).sum::<f64>() / t;
    let est_fourth = pairs.iter().map(|p| p.0 * p.0).sum::<f64>() / t;
    let est_cross = pairs.iter().map(|p| p.0 * p.1).sum::<f64>() / t;
    let w: Vec<f64> = pairs.iter().map(|p| df * (p.0 - p.1)).collect();
    let est_var_w = variance(&w);
    Ok(MomentStats {
        n,
        trials,
        est_second,
        est_fourth,
        est_cross,
        est_var_w,
        target_second: 1.0 / df,
        target_fourth: 2.0 / (df * (df + 1.0)),
        target_cross: 1.0 / (df * (df + 1.0)),
        target_var_w: 2.0 * df / (df + 1.0),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignComparison {
    pub measurements: usize,
    /// Mean collision probability `Σ_j p_j²` under Clifford measurements.
    pub clifford_mean: f64,
    pub pgm_mean: f64,
    /// Two-sided Welch p-value for equal means.
    pub p_value: f64,
}

/// Compares the collision probability `Σ_j p_j²` of one fixed Haar state
/// under independent Clifford and PGM measurements at matched `(d, k)`.
pub fn compare_design_moments(n: usize, k: usize, measurements: usize, seed: u64) -> Result<DesignComparison> {
    if measurements < 2 {
        return Err(Error::arg("need at least two measurements per mode"));
    }
    let tree = SeedTree(seed).named("design-compare");
    let state = random_haar_state(n, &mut tree.named("state").rng())?;
    let collect = |pgm: bool| -> Result<Vec<f64>> {
        (0..measurements)
            .into_par_iter()
            .map(|i| {
                let s = tree.named(if pgm { "pgm" } else { "clifford" }).child(i as u64).0;
                let m = if pgm {
                    SketchMeasurement::pgm(n, k, s)?
                } else {
                    SketchMeasurement::clifford(n, k, s)?
                };
                let p = m.exact_outcome_distribution(&state)?;
                Ok(p.iter().map(|x| x * x).sum())
            })
            .collect()
    };
    let cl = collect(false)?;
    let pg = collect(true)?;
    Ok(DesignComparison {
        measurements,
        clifford_mean: mean(&cl),
        pgm_mean: mean(&pg),
        p_value: welch_p_value(&cl, &pg),
    })
}
