//! Wilcoxon signed-rank test for paired samples.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest number of non-zero differences for which the exact null
/// distribution is used.
pub const EXACT_MAX_N: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult<F> {
    /// `min(W+, W−)`.
    pub statistic: F,
    /// Two-sided p-value.
    pub p_value: F,
    /// Number of non-zero differences.
    pub n: usize,
    pub exact: bool,
}

/// Two-sided signed-rank test of `x − y`.
///
/// Zero differences are dropped and tied magnitudes share the average
/// rank. Up to [`EXACT_MAX_N`] differences the p-value comes from the exact
/// permutation distribution (ties included); above it from the normal
/// approximation with tie and continuity corrections.
pub fn wilcoxon_signed_rank<F: Real>(x: &[F], y: &[F]) -> Result<WilcoxonResult<F>> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InvalidSpec(format!(
            "paired samples need equal non-zero lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let mut d: Vec<F> = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| a - b)
        .filter(|v| *v != F::zero())
        .collect();
    if d.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidSpec("paired samples contain NaN".into()));
    }
    let n = d.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: F::zero(),
            p_value: F::one(),
            n: 0,
            exact: true,
        });
    }
    d.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).expect("NaN filtered above"));
    // Ranks doubled so averaged ties stay integral.
    let mut ranks2 = vec![0u64; n];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && d[j + 1].abs() == d[i].abs() {
            j += 1;
        }
        // Ranks i+1..=j+1 averaged, doubled: (i+1 + j+1).
        for r in &mut ranks2[i..=j] {
            *r = (i + j + 2) as u64;
        }
        tie_sizes.push(j - i + 1);
        i = j + 1;
    }
    let total2: u64 = ranks2.iter().sum();
    let w_plus2: u64 = d
        .iter()
        .zip(&ranks2)
        .filter(|(v, _)| **v > F::zero())
        .map(|(_, r)| r)
        .sum();
    let stat2 = w_plus2.min(total2 - w_plus2);
    let statistic = F::from_f64_lossy(stat2 as f64 / 2.0);

    if n <= EXACT_MAX_N {
        // counts[s] = number of sign patterns with doubled W+ equal to s.
        let mut counts = vec![0f64; total2 as usize + 1];
        counts[0] = 1.0;
        let mut reach = 0usize;
        for &r in &ranks2 {
            let r = r as usize;
            for s in (0..=reach).rev() {
                if counts[s] != 0.0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let lower: f64 = counts[..=stat2 as usize].iter().sum();
        let p = (2.0 * lower / 2f64.powi(n as i32)).min(1.0);
        return Ok(WilcoxonResult {
            statistic,
            p_value: F::from_f64_lossy(p),
            n,
            exact: true,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let ties: f64 = tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
    let z = ((stat2 as f64 / 2.0 - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::standard();
    let p = (2.0 * (1.0 - normal.cdf(z))).min(1.0);
    Ok(WilcoxonResult {
        statistic,
        p_value: F::from_f64_lossy(p),
        n,
        exact: false,
    })
}
