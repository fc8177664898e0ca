use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::scalar::mean_std;
use crate::{Error, Result, Scalar};

/// Finest analysis scale in phone steps; scale `j` is `FINEST_SCALE * 2^j`.
pub const FINEST_SCALE: f64 = 0.5;

/// Default number of dyadic scales.
pub const DEFAULT_SCALES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContourKind {
    Pitch,
    Energy,
    Duration,
}

/// One value per phone: normalized log-Hz pitch, normalized log-power energy,
/// or log-frame duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour<T> {
    pub kind: ContourKind,
    pub values: Vec<T>,
}

impl<T: Scalar> Contour<T> {
    pub fn new(kind: ContourKind, values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Parameter("contour must have at least one value".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("contour values must be finite".into()));
        }
        Ok(Self { kind, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `n_scales x len` wavelet coefficients (row-major, fine to coarse) plus the
/// normalization removed before analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwtMatrix<T> {
    pub kind: ContourKind,
    pub scales: Vec<T>,
    pub len: usize,
    pub coefficients: Vec<T>,
    pub mean: T,
    pub std: T,
}

impl<T: Scalar> CwtMatrix<T> {
    pub fn n_scales(&self) -> usize {
        self.scales.len()
    }

    pub fn row(&self, j: usize) -> &[T] {
        &self.coefficients[j * self.len..(j + 1) * self.len]
    }
}

pub fn dyadic_scales<T: Scalar>(n_scales: usize) -> Vec<T> {
    (0..n_scales).map(|j| T::of(FINEST_SCALE * 2f64.powi(j as i32))).collect()
}

/// Mexican-hat mother wavelet with unit L2 norm.
pub fn mexican_hat(t: f64) -> f64 {
    let norm = 2.0 / (3f64.sqrt() * std::f64::consts::PI.powf(0.25));
    norm * (1.0 - t * t) * (-t * t / 2.0).exp()
}

/// Taps of the scale-`s` kernel `psi(t / s) / sqrt(s)` for `|t| <= 6s`.
fn kernel(scale: f64) -> Vec<(i64, f64)> {
    let half = (6.0 * scale).ceil() as i64;
    (-half..=half)
        .map(|t| (t, mexican_hat(t as f64 / scale) / scale.sqrt()))
        .collect()
}

/// Wavelet response of one scale on the symmetric extension of `signal`,
/// which is periodic with period `2 * len`.
fn analyze_scale(signal: &[f64], scale: f64) -> Vec<f64> {
    let n = signal.len();
    let period = 2 * n;
    let mut folded = vec![0.0; period];
    for (t, k) in kernel(scale) {
        folded[t.rem_euclid(period as i64) as usize] += k;
    }
    let taps: Vec<(usize, f64)> = folded.into_iter().enumerate().filter(|&(_, k)| k != 0.0).collect();
    let ext = |i: usize| if i < n { signal[i] } else { signal[period - 1 - i] };
    (0..n)
        .map(|tau| taps.iter().map(|&(t, k)| k * ext((tau + period - t) % period)).sum())
        .collect()
}

/// Un-normalized transform; rows fine to coarse. Linear in `signal`.
pub fn cwt_raw<T: Scalar>(signal: &[T], n_scales: usize) -> Vec<Vec<T>> {
    let x: Vec<f64> = signal.iter().map(|v| v.to_f64_lossy()).collect();
    dyadic_scales::<f64>(n_scales)
        .iter()
        .map(|&s| analyze_scale(&x, s).into_iter().map(T::of).collect())
        .collect()
}

/// Gain that makes `sum_j W_j / sqrt(s_j)` an inverse: least-squares fit of the
/// summed discrete filter response to 1 over the analyzed band.
pub fn reconstruction_gain(n_scales: usize) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<usize, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&g) = cache.lock().expect("gain cache").get(&n_scales) {
        return g;
    }
    let g = compute_gain(n_scales);
    cache.lock().expect("gain cache").insert(n_scales, g);
    g
}

fn compute_gain(n_scales: usize) -> f64 {
    let scales = dyadic_scales::<f64>(n_scales);
    let kernels: Vec<Vec<(i64, f64)>> = scales.iter().map(|&s| kernel(s)).collect();
    let top = scales.last().copied().unwrap_or(1.0);
    let lo = (2.0 * std::f64::consts::PI / (2.0 * top)).ln();
    let hi = (2.0 * std::f64::consts::PI / 4.0).ln();
    let points = 512;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..points {
        let w = (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp();
        let r: f64 = kernels
            .iter()
            .zip(&scales)
            .map(|(k, &s)| k.iter().map(|&(t, v)| v * (w * t as f64).cos()).sum::<f64>() / s.sqrt())
            .sum();
        num += r;
        den += r * r;
    }
    num / den
}

/// z-normalizes the contour and analyzes it at `n_scales` dyadic scales. A
/// constant contour is analyzed as the zero signal with `std` recorded as 1.
pub fn cwt_forward<T: Scalar>(contour: &Contour<T>, n_scales: usize) -> Result<CwtMatrix<T>> {
    if n_scales == 0 {
        return Err(Error::Parameter("n_scales must be positive".into()));
    }
    if contour.is_empty() {
        return Err(Error::Parameter("empty contour".into()));
    }
    let (mean, std) = mean_std(&contour.values);
    let std = if std > T::zero() { std } else { T::one() };
    let z: Vec<T> = contour.values.iter().map(|&v| (v - mean) / std).collect();
    let rows = cwt_raw(&z, n_scales);
    Ok(CwtMatrix {
        kind: contour.kind,
        scales: dyadic_scales(n_scales),
        len: contour.len(),
        coefficients: rows.into_iter().flatten().collect(),
        mean,
        std,
    })
}

/// Scale-weighted sum of coefficient rows, then de-normalization.
pub fn cwt_inverse<T: Scalar>(matrix: &CwtMatrix<T>) -> Result<Contour<T>> {
    let expected = matrix.scales.len() * matrix.len;
    if matrix.coefficients.len() != expected {
        return Err(Error::Shape { expected, got: matrix.coefficients.len() });
    }
    if matrix.len == 0 {
        return Err(Error::Parameter("matrix has zero time length".into()));
    }
    let gain = T::of(reconstruction_gain(matrix.n_scales()));
    let weights: Vec<T> = matrix.scales.iter().map(|&s| gain / s.sqrt()).collect();
    let values = (0..matrix.len)
        .map(|t| {
            let z: T = (0..matrix.n_scales()).map(|j| weights[j] * matrix.row(j)[t]).sum();
            matrix.mean + matrix.std * z
        })
        .collect();
    Ok(Contour { kind: matrix.kind, values })
}
