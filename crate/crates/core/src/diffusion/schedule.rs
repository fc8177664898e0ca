use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleShape {
    #[default]
    Linear,
    Cosine,
}

/// Variance schedule over timesteps `1..=N`.
///
/// Per-step sequences are stored zero-based: index `n - 1` holds timestep `n`.
/// Timestep `0` is the clean data, with `alpha_bar(0) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule<T> {
    betas: Vec<T>,
    alphas: Vec<T>,
    alpha_bars: Vec<T>,
    sqrt_alpha_bars: Vec<T>,
    shape: ScheduleShape,
    beta_start: T,
    beta_end: T,
    zero_terminal: bool,
}

/// JSON form of a schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub n_steps: usize,
    pub shape: ScheduleShape,
    pub beta_start: f64,
    pub beta_end: f64,
    pub zero_terminal: bool,
    pub betas: Vec<f64>,
}

impl<T: Scalar> NoiseSchedule<T> {
    /// Builds a schedule of `n_steps` betas between `beta_start` and `beta_end`.
    ///
    /// The cosine shape follows the squared-cosine `alpha_bar` curve with betas
    /// capped at 0.999; the bounds are validated but only the linear shape uses them.
    pub fn build(n_steps: usize, beta_start: T, beta_end: T, shape: ScheduleShape) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::Parameter("n_steps must be at least 1".into()));
        }
        if !beta_start.is_finite() || !beta_end.is_finite() {
            return Err(Error::Parameter("beta bounds must be finite".into()));
        }
        if !(beta_start > T::zero() && beta_start <= beta_end && beta_end < T::one()) {
            return Err(Error::Parameter(format!(
                "need 0 < beta_start <= beta_end < 1, got {beta_start} and {beta_end}"
            )));
        }
        let betas: Vec<T> = match shape {
            ScheduleShape::Linear => {
                if n_steps == 1 {
                    vec![beta_start]
                } else {
                    let span = beta_end - beta_start;
                    let last = T::of((n_steps - 1) as f64);
                    (0..n_steps)
                        .map(|i| beta_start + span * T::of(i as f64) / last)
                        .collect()
                }
            }
            ScheduleShape::Cosine => {
                let s = 0.008;
                let f = |t: f64| (((t + s) / (1.0 + s)) * std::f64::consts::FRAC_PI_2).cos().powi(2);
                (1..=n_steps)
                    .map(|n| {
                        let t1 = (n - 1) as f64 / n_steps as f64;
                        let t2 = n as f64 / n_steps as f64;
                        T::of((1.0 - f(t2) / f(t1)).clamp(1e-12, 0.999))
                    })
                    .collect()
            }
        };
        let mut schedule = Self::from_betas(&betas)?;
        schedule.shape = shape;
        schedule.beta_start = beta_start;
        schedule.beta_end = beta_end;
        Ok(schedule)
    }

    /// Schedule from an explicit beta sequence. Every beta must lie in `(0, 1)`,
    /// except that a final beta of exactly 1 marks a zero-terminal-SNR schedule.
    pub fn from_betas(betas: &[T]) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::Parameter("empty beta sequence".into()));
        }
        let last = betas.len() - 1;
        for (i, &b) in betas.iter().enumerate() {
            let terminal_one = i == last && b == T::one();
            if !b.is_finite() || !(b > T::zero() && (b < T::one() || terminal_one)) {
                return Err(Error::Parameter(format!("beta[{}] = {b} outside (0, 1)", i + 1)));
            }
        }
        let alphas: Vec<T> = betas.iter().map(|&b| T::one() - b).collect();
        let mut alpha_bars = Vec::with_capacity(betas.len());
        let mut running = T::one();
        for &a in &alphas {
            running *= a;
            alpha_bars.push(running);
        }
        let sqrt_alpha_bars = alpha_bars.iter().map(|a| a.sqrt()).collect();
        let zero_terminal = betas[last] == T::one();
        let schedule = Self {
            betas: betas.to_vec(),
            alphas,
            alpha_bars,
            sqrt_alpha_bars,
            shape: ScheduleShape::Linear,
            beta_start: betas[0],
            beta_end: betas[last],
            zero_terminal,
        };
        schedule.check_monotone()?;
        Ok(schedule)
    }

    /// Schedule from `sqrt(alpha_bar_n)`, n = 1..=N. The given values are kept bit-exact.
    fn from_sqrt_alpha_bars(sqrt_alpha_bars: Vec<T>, template: &Self) -> Result<Self> {
        let alpha_bars: Vec<T> = sqrt_alpha_bars.iter().map(|&s| s * s).collect();
        let mut alphas = Vec::with_capacity(alpha_bars.len());
        let mut prev = T::one();
        for &ab in &alpha_bars {
            alphas.push(ab / prev);
            prev = ab;
        }
        let betas = alphas.iter().map(|&a| T::one() - a).collect();
        let schedule = Self {
            betas,
            alphas,
            alpha_bars,
            sqrt_alpha_bars,
            shape: template.shape,
            beta_start: template.beta_start,
            beta_end: template.beta_end,
            zero_terminal: false,
        };
        schedule.check_monotone()?;
        Ok(schedule)
    }

    fn check_monotone(&self) -> Result<()> {
        let mut prev = T::one();
        for (i, &ab) in self.alpha_bars.iter().enumerate() {
            if !(ab < prev) {
                return Err(Error::Schedule(format!(
                    "alpha_bar not strictly decreasing at timestep {}",
                    i + 1
                )));
            }
            prev = ab;
        }
        Ok(())
    }

    /// Shifts and scales `sqrt(alpha_bar)` so the last timestep has zero SNR while
    /// the first timestep keeps its value.
    pub fn rescale_zero_terminal_snr(&self) -> Result<Self> {
        if self.zero_terminal {
            return Err(Error::Schedule("schedule already has zero terminal SNR".into()));
        }
        let first = self.sqrt_alpha_bars[0];
        let last = *self.sqrt_alpha_bars.last().expect("non-empty schedule");
        if last == T::zero() {
            return Err(Error::Schedule("sqrt(alpha_bar_N) is already 0".into()));
        }
        if first == last {
            return Err(Error::Schedule("degenerate schedule: constant sqrt(alpha_bar)".into()));
        }
        let scale = first / (first - last);
        let n = self.sqrt_alpha_bars.len();
        let shifted: Vec<T> = self
            .sqrt_alpha_bars
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                if i == 0 {
                    first
                } else if i == n - 1 {
                    T::zero()
                } else {
                    (s - last) * scale
                }
            })
            .collect();
        let mut out = Self::from_sqrt_alpha_bars(shifted, self)?;
        out.zero_terminal = true;
        Ok(out)
    }

    pub fn n_steps(&self) -> usize {
        self.betas.len()
    }

    pub fn shape(&self) -> ScheduleShape {
        self.shape
    }

    pub fn zero_terminal(&self) -> bool {
        self.zero_terminal
    }

    pub fn betas(&self) -> &[T] {
        &self.betas
    }

    pub fn alphas(&self) -> &[T] {
        &self.alphas
    }

    pub fn alpha_bars(&self) -> &[T] {
        &self.alpha_bars
    }

    pub fn sqrt_alpha_bars(&self) -> &[T] {
        &self.sqrt_alpha_bars
    }

    fn check_timestep(&self, n: usize, allow_zero: bool) -> Result<()> {
        let lo = if allow_zero { 0 } else { 1 };
        if n < lo || n > self.n_steps() {
            return Err(Error::Parameter(format!(
                "timestep {n} outside {lo}..={}",
                self.n_steps()
            )));
        }
        Ok(())
    }

    /// `beta_n` for `1 <= n <= N`.
    pub fn beta(&self, n: usize) -> Result<T> {
        self.check_timestep(n, false)?;
        Ok(self.betas[n - 1])
    }

    /// `alpha_bar_n` for `0 <= n <= N`.
    pub fn alpha_bar(&self, n: usize) -> Result<T> {
        self.check_timestep(n, true)?;
        Ok(if n == 0 { T::one() } else { self.alpha_bars[n - 1] })
    }

    /// `sqrt(alpha_bar_n)` for `0 <= n <= N`, returning the stored value so that
    /// a zero-terminal schedule yields exactly 0 at `N`.
    pub fn sqrt_alpha_bar(&self, n: usize) -> Result<T> {
        self.check_timestep(n, true)?;
        Ok(if n == 0 { T::one() } else { self.sqrt_alpha_bars[n - 1] })
    }

    /// Signal-to-noise ratio `alpha_bar / (1 - alpha_bar)`; infinite at `n = 0`.
    pub fn snr(&self, n: usize) -> Result<T> {
        let ab = self.alpha_bar(n)?;
        Ok(ab / (T::one() - ab))
    }

    pub fn to_file(&self) -> ScheduleFile {
        ScheduleFile {
            n_steps: self.n_steps(),
            shape: self.shape,
            beta_start: self.beta_start.to_f64_lossy(),
            beta_end: self.beta_end.to_f64_lossy(),
            zero_terminal: self.zero_terminal,
            betas: self.betas.iter().map(|b| b.to_f64_lossy()).collect(),
        }
    }

    pub fn from_file(file: &ScheduleFile) -> Result<Self> {
        if file.betas.len() != file.n_steps {
            return Err(Error::Shape { expected: file.n_steps, got: file.betas.len() });
        }
        let betas: Vec<T> = file.betas.iter().map(|&b| T::of(b)).collect();
        let mut schedule = Self::from_betas(&betas)?;
        if schedule.zero_terminal != file.zero_terminal {
            return Err(Error::Schedule(
                "zero_terminal flag disagrees with the final beta".into(),
            ));
        }
        schedule.shape = file.shape;
        schedule.beta_start = T::of(file.beta_start);
        schedule.beta_end = T::of(file.beta_end);
        Ok(schedule)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(text)?)
    }
}
