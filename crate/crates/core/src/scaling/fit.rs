use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// One observed `(dataset size, error-rate ratio)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint<T> {
    #[serde(rename = "D")]
    pub dataset_size: T,
    pub werr: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl<T: Scalar> ScalingPoint<T> {
    pub fn new(dataset_size: T, werr: T) -> Result<Self> {
        let p = Self { dataset_size, werr, label: None };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dataset_size > T::zero()) || !self.dataset_size.is_finite() {
            return Err(Error::Parameter(format!("dataset size must be positive, got {}", self.dataset_size)));
        }
        if !(self.werr >= T::zero()) || !self.werr.is_finite() {
            return Err(Error::Parameter(format!("werr must be finite and >= 0, got {}", self.werr)));
        }
        Ok(())
    }
}

/// `S(D) = A * D^-alpha + B * D^-gamma` with `alpha >= gamma >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit<T> {
    #[serde(rename = "A")]
    pub a: T,
    #[serde(rename = "B")]
    pub b: T,
    pub alpha: T,
    pub gamma: T,
    pub rmse_log: T,
    pub n_points: usize,
    /// Per point `ln S(D_i) - ln werr_i`, in input order.
    #[serde(default)]
    pub residuals: Vec<T>,
    #[serde(default)]
    pub unit: String,
    /// Set when every observed werr was identical.
    #[serde(default)]
    pub degenerate: bool,
}

impl<T: Scalar> ScalingFit<T> {
    /// Closed-form parameters with no fit diagnostics.
    pub fn from_params(a: T, alpha: T, b: T, gamma: T) -> Self {
        Self {
            a,
            b,
            alpha,
            gamma,
            rmse_log: T::zero(),
            n_points: 0,
            residuals: Vec::new(),
            unit: String::new(),
            degenerate: false,
        }
    }

    /// `S` as `D` grows without bound.
    pub fn asymptote(&self) -> T {
        let term = |c: T, e: T| if e > T::zero() { T::zero() } else { c };
        term(self.a, self.alpha) + term(self.b, self.gamma)
    }
}

pub fn predict<T: Scalar>(fit: &ScalingFit<T>, d: T) -> Result<T> {
    if !(d > T::zero()) {
        return Err(Error::Parameter(format!("D must be positive, got {d}")));
    }
    Ok(fit.a * d.powf(-fit.alpha) + fit.b * d.powf(-fit.gamma))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub seed: u64,
    pub n_starts: usize,
    /// Box the exponent starts are drawn from, log-uniformly.
    pub exponent_range: (f64, f64),
    pub max_iter: usize,
    pub unit: String,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { seed: 0, n_starts: 32, exponent_range: (1e-3, 6.0), max_iter: 400, unit: "hours".into() }
    }
}

/// Internal coordinates `[ln A', ln B', ln gamma, ln(alpha - gamma)]`, where
/// `A'` and `B'` are scaled to a geometric-mean-centred `D`. Centring makes
/// every iterate independent of the unit of `D`.
type Theta = [f64; 4];

const LOG_FLOOR: f64 = -700.0;
const EXP_CEIL: f64 = 4.0;

struct Problem {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Problem {
    fn unpack(t: &Theta) -> (f64, f64, f64, f64) {
        let gamma = t[2].exp();
        (t[0], t[1], gamma, gamma + t[3].exp())
    }

    /// Residuals and Jacobian rows.
    fn eval(&self, t: &Theta, jac: Option<&mut Vec<[f64; 4]>>) -> Vec<f64> {
        let (la, lb, gamma, alpha) = Self::unpack(t);
        let delta = alpha - gamma;
        let mut rows = Vec::with_capacity(self.x.len());
        let r = self
            .x
            .iter()
            .zip(&self.y)
            .map(|(&x, &y)| {
                let p = la - alpha * x;
                let q = lb - gamma * x;
                let m = p.max(q);
                let s = m + ((p - m).exp() + (q - m).exp()).ln();
                let (wp, wq) = ((p - s).exp(), (q - s).exp());
                rows.push([wp, wq, -x * gamma * (wp + wq), -x * delta * wp]);
                s - y
            })
            .collect();
        if let Some(j) = jac {
            *j = rows;
        }
        r
    }

    fn cost(&self, t: &Theta) -> f64 {
        self.eval(t, None).iter().map(|r| r * r).sum()
    }

    fn clamp(t: &mut Theta) {
        t[0] = t[0].clamp(LOG_FLOOR, 700.0);
        t[1] = t[1].clamp(LOG_FLOOR, 700.0);
        t[2] = t[2].clamp(-40.0, EXP_CEIL);
        t[3] = t[3].clamp(-40.0, EXP_CEIL);
    }

    /// Non-negative least squares for the two amplitudes at fixed exponents,
    /// on the linear scale.
    fn amplitudes(&self, alpha: f64, gamma: f64) -> (f64, f64) {
        let (mut spp, mut sqq, mut spq, mut spy, mut sqy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in self.x.iter().zip(&self.y) {
            let (p, q, w) = ((-alpha * x).exp(), (-gamma * x).exp(), y.exp());
            spp += p * p;
            sqq += q * q;
            spq += p * q;
            spy += p * w;
            sqy += q * w;
        }
        let det = spp * sqq - spq * spq;
        let both = (det.abs() > 1e-300 * spp * sqq).then(|| ((sqq * spy - spq * sqy) / det, (spp * sqy - spq * spy) / det));
        match both {
            Some((a, b)) if a > 0.0 && b > 0.0 => (a, b),
            _ => {
                let a_only = (spy / spp).max(0.0);
                let b_only = (sqy / sqq).max(0.0);
                let err_a = self.sse_linear(alpha, gamma, a_only, 0.0);
                let err_b = self.sse_linear(alpha, gamma, 0.0, b_only);
                if err_a < err_b {
                    (a_only, 0.0)
                } else {
                    (0.0, b_only)
                }
            }
        }
    }

    fn sse_linear(&self, alpha: f64, gamma: f64, a: f64, b: f64) -> f64 {
        self.x
            .iter()
            .zip(&self.y)
            .map(|(&x, &y)| (a * (-alpha * x).exp() + b * (-gamma * x).exp() - y.exp()).powi(2))
            .sum()
    }

    fn levenberg_marquardt(&self, mut t: Theta, max_iter: usize) -> (Theta, f64) {
        Self::clamp(&mut t);
        let mut jac = Vec::new();
        let mut r = self.eval(&t, Some(&mut jac));
        let mut cost: f64 = r.iter().map(|v| v * v).sum();
        let mut lambda = 1e-3;
        for _ in 0..max_iter {
            let mut jtj = [[0.0; 4]; 4];
            let mut jtr = [0.0; 4];
            for (row, &ri) in jac.iter().zip(&r) {
                for i in 0..4 {
                    jtr[i] += row[i] * ri;
                    for k in 0..4 {
                        jtj[i][k] += row[i] * row[k];
                    }
                }
            }
            if jtr.iter().all(|g| g.abs() < 1e-15) {
                break;
            }
            let mut improved = false;
            while lambda < 1e12 {
                let mut m = jtj;
                for (i, row) in m.iter_mut().enumerate() {
                    row[i] += lambda * (jtj[i][i] + 1e-12);
                }
                let Some(step) = solve4(m, jtr.map(|g| -g)) else {
                    lambda *= 10.0;
                    continue;
                };
                let mut cand = t;
                for i in 0..4 {
                    cand[i] += step[i];
                }
                Self::clamp(&mut cand);
                let c = self.cost(&cand);
                if c.is_finite() && c < cost {
                    let rel = (cost - c) / cost.max(1e-300);
                    t = cand;
                    cost = c;
                    r = self.eval(&t, Some(&mut jac));
                    lambda = (lambda / 10.0).max(1e-15);
                    improved = rel > 1e-16 || cost > 1e-28;
                    break;
                }
                lambda *= 10.0;
            }
            if !improved {
                break;
            }
        }
        (t, cost)
    }
}

/// Gaussian elimination with partial pivoting.
fn solve4(mut m: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|k| m[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Least-squares fit of `ln S(D)` to `ln werr` from seeded multi-start
/// Levenberg-Marquardt runs in log-parameter space.
pub fn fit_power_law<T: Scalar>(points: &[ScalingPoint<T>], options: &FitOptions) -> Result<ScalingFit<T>> {
    for p in points {
        p.validate()?;
    }
    let mut sizes: Vec<f64> = points.iter().map(|p| p.dataset_size.to_f64_lossy()).collect();
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();
    if sizes.len() < 4 {
        return Err(Error::InsufficientData { needed: 4, got: sizes.len() });
    }
    if points.iter().any(|p| p.werr <= T::zero()) {
        return Err(Error::Parameter("log-space fit needs werr > 0".into()));
    }
    let (lo, hi) = options.exponent_range;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::Parameter("exponent range must satisfy 0 < lo <= hi".into()));
    }
    let logs: Vec<f64> = points.iter().map(|p| p.dataset_size.to_f64_lossy().ln()).collect();
    let centre = logs.iter().sum::<f64>() / logs.len() as f64;
    let problem = Problem {
        x: logs.iter().map(|l| l - centre).collect(),
        y: points.iter().map(|p| p.werr.to_f64_lossy().ln()).collect(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut candidates: Vec<(f64, f64, Theta)> = Vec::with_capacity(options.n_starts.max(1));
    for _ in 0..options.n_starts.max(1) {
        let mut e1 = (rng.random_range(lo.ln()..=hi.ln())).exp();
        let mut e2 = (rng.random_range(lo.ln()..=hi.ln())).exp();
        if e1 < e2 {
            std::mem::swap(&mut e1, &mut e2);
        }
        if e1 - e2 < 1e-6 {
            e1 = e2 + 1e-3;
        }
        let (a, b) = problem.amplitudes(e1, e2);
        let start = [a.max(1e-300).ln(), b.max(1e-300).ln(), e2.ln(), (e1 - e2).ln()];
        let (theta, cost) = problem.levenberg_marquardt(start, options.max_iter);
        let (_, _, gamma, alpha) = Problem::unpack(&theta);
        candidates.push(((cost / problem.x.len() as f64).sqrt(), alpha - gamma, theta));
    }
    let best_rmse = candidates.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let (rmse, _, theta) = candidates
        .into_iter()
        .filter(|c| c.0 <= best_rmse + 1e-6)
        .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.total_cmp(&y.0)))
        .expect("at least one start");

    let (la, lb, gamma, alpha) = Problem::unpack(&theta);
    let residuals = problem.eval(&theta, None);
    let first = points[0].werr;
    Ok(ScalingFit {
        a: T::of((la + alpha * centre).exp()),
        b: T::of((lb + gamma * centre).exp()),
        alpha: T::of(alpha),
        gamma: T::of(gamma),
        rmse_log: T::of(rmse),
        n_points: points.len(),
        residuals: residuals.into_iter().map(T::of).collect(),
        unit: options.unit.clone(),
        degenerate: points.iter().all(|p| p.werr == first),
    })
}

/// Dataset size at which the fitted curve reaches `target`, by bisection on
/// `ln D` to a relative tolerance of 1e-9.
pub fn extrapolate_to_target<T: Scalar>(fit: &ScalingFit<T>, target: T) -> Result<T> {
    let asymptote = fit.asymptote();
    let unreachable = || Error::Unreachable { target: target.to_f64_lossy(), asymptote: asymptote.to_f64_lossy() };
    let (a, b) = (fit.a.to_f64_lossy(), fit.b.to_f64_lossy());
    let (alpha, gamma) = (fit.alpha.to_f64_lossy(), fit.gamma.to_f64_lossy());
    let t = target.to_f64_lossy();
    if !(t > asymptote.to_f64_lossy()) || !t.is_finite() || a + b <= 0.0 || alpha < gamma || gamma < 0.0 {
        return Err(unreachable());
    }
    // S in log space as a function of ln D, to stay finite far out.
    let log_s = |u: f64| {
        let p = if a > 0.0 { a.ln() - alpha * u } else { f64::NEG_INFINITY };
        let q = if b > 0.0 { b.ln() - gamma * u } else { f64::NEG_INFINITY };
        let m = p.max(q);
        m + ((p - m).exp() + (q - m).exp()).ln()
    };
    let lt = t.ln();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut guard = 0;
    while log_s(lo) < lt {
        lo -= (hi - lo).max(1.0);
        guard += 1;
        if guard > 200 {
            return Err(unreachable());
        }
    }
    guard = 0;
    while log_s(hi) > lt {
        hi += (hi - lo).max(1.0);
        guard += 1;
        if guard > 200 || hi > 1e6 {
            // a vanishing exponent decays too slowly to matter; report where the curve got to
            return Err(Error::Unreachable { target: t, asymptote: log_s(hi).exp() });
        }
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if log_s(mid) > lt {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(T::of((0.5 * (lo + hi)).exp()))
}
