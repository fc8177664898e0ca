use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("samples must be finite".into()));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Earth mover's distance between two empirical distributions on the line:
/// the integral of `|Qa(u) - Qb(u)|` over `u` in `[0, 1]`.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    if a.len() == b.len() {
        return Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64);
    }
    // Walk the merged quantile breakpoints i/na and j/nb.
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0.0;
    let mut total = 0.0;
    while i < na && j < nb {
        let ua = (i + 1) as f64 / na as f64;
        let ub = (j + 1) as f64 / nb as f64;
        let next = ua.min(ub);
        total += (next - u) * (a[i] - b[j]).abs();
        u = next;
        if ua <= next {
            i += 1;
        }
        if ub <= next {
            j += 1;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCoverage {
    pub modes: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub outliers: f64,
}

/// Fraction of samples whose nearest mode lies within `radius`; the rest are
/// outliers.
pub fn mode_coverage(samples: &[f64], modes: &[f64], radius: f64) -> Result<ModeCoverage> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if modes.is_empty() || !(radius >= 0.0) {
        return Err(Error::Parameter("need at least one mode and radius >= 0".into()));
    }
    let mut counts = vec![0usize; modes.len()];
    let mut outliers = 0usize;
    for &x in samples {
        let nearest = modes
            .iter()
            .enumerate()
            .map(|(k, &m)| (k, (x - m).abs()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("non-empty modes");
        if nearest.1 <= radius {
            counts[nearest.0] += 1;
        } else {
            outliers += 1;
        }
    }
    let n = samples.len() as f64;
    Ok(ModeCoverage {
        modes: modes.to_vec(),
        frequencies: counts.iter().map(|&c| c as f64 / n).collect(),
        outliers: outliers as f64 / n,
    })
}
