//! Small statistical helpers shared by the sketch, shadow and bench code.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

/// Multinomial draw of `trials` outcomes over `probs` via conditional
/// binomials. Cost is `O(probs.len())` regardless of `trials`.
pub fn multinomial<R: Rng + ?Sized>(rng: &mut R, trials: u64, probs: &[f64]) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = trials;
    let mut mass_left: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() {
            counts[i] = remaining;
            break;
        }
        let p = p.max(0.0);
        let q = if mass_left > 0.0 { (p / mass_left).clamp(0.0, 1.0) } else { 0.0 };
        let c = if q <= 0.0 {
            0
        } else if q >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, q).expect("valid binomial").sample(rng)
        };
        counts[i] = c;
        remaining -= c;
        mass_left -= p;
    }
    counts
}

/// Running cumulative sums normalized so the last entry is exactly 1.
pub fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = probs
        .iter()
        .map(|p| {
            acc += p.max(0.0);
            acc
        })
        .collect();
    if acc > 0.0 {
        for c in out.iter_mut() {
            *c /= acc;
        }
    }
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// Index drawn from a cumulative table produced by [`cumulative`].
#[inline]
pub fn sample_cumulative<R: Rng + ?Sized>(rng: &mut R, cdf: &[f64]) -> usize {
    let u: f64 = rng.random();
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Linear-interpolated quantile, `q` in `[0, 1]`.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    v[lo] * (1.0 - frac) + v[hi] * frac
}

/// Standard error of the mean of weighted distinct values (`counts[i]` copies
/// of `values[i]`) by multinomial bootstrap.
pub fn bootstrap_stderr<R: Rng + ?Sized>(
    rng: &mut R,
    values: &[f64],
    counts: &[u64],
    resamples: usize,
) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 || resamples < 2 {
        return 0.0;
    }
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let means: Vec<f64> = (0..resamples)
        .map(|_| {
            let draw = multinomial(rng, total, &probs);
            draw.iter().zip(values).map(|(&c, &v)| c as f64 * v).sum::<f64>() / total as f64
        })
        .collect();
    variance(&means).sqrt()
}

/// Two-sided Welch t-test p-value, normal approximation to the t
/// distribution (adequate for the hundreds of samples used here).
pub fn welch_p_value(a: &[f64], b: &[f64]) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let se = (variance(a) / a.len() as f64 + variance(b) / b.len() as f64).sqrt();
    if se == 0.0 {
        return if mean(a) == mean(b) { 1.0 } else { 0.0 };
    }
    let t = (mean(a) - mean(b)).abs() / se;
    let n = Normal::standard();
    2.0 * (1.0 - n.cdf(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn multinomial_conserves_trials() {
        let mut rng = rng_from_seed(1);
        let probs = [0.1, 0.0, 0.6, 0.3];
        let c = multinomial(&mut rng, 1_000_000_007, &probs);
        assert_eq!(c.iter().sum::<u64>(), 1_000_000_007);
        assert_eq!(c[1], 0);
        let f = c[2] as f64 / 1_000_000_007.0;
        assert!((f - 0.6).abs() < 1e-3);
    }

    #[test]
    fn cumulative_sampling_matches_weights() {
        let mut rng = rng_from_seed(2);
        let cdf = cumulative(&[0.25, 0.0, 0.75]);
        let mut hits = [0usize; 3];
        for _ in 0..40_000 {
            hits[sample_cumulative(&mut rng, &cdf)] += 1;
        }
        assert_eq!(hits[1], 0);
        assert!((hits[0] as f64 / 40_000.0 - 0.25).abs() < 0.01);
    }

    #[test]
    fn quantile_endpoints() {
        let xs = [3.0, 1.0, 2.0];
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 3.0);
        assert_eq!(quantile(&xs, 0.5), 2.0);
    }
}
