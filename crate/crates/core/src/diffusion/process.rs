//! Forward noising and single reverse steps.
//!
//! The network predicts `v = sqrt(ab) * eps - sqrt(1 - ab) * x0`, which stays
//! defined at a zero-SNR terminal step where the epsilon view does not. Both
//! views are accepted here; the epsilon view errors where it is undefined.

use serde::{Deserialize, Serialize};

use super::NoiseSchedule;
use crate::error::check_len;
use crate::{Error, Result, Scalar};

/// What the denoiser outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Parameterization {
    Epsilon,
    #[default]
    V,
}

/// One draw from `q(x_n | x_{n-1})` with an explicit variance `beta`.
pub fn diffuse_once<T: Scalar>(x_prev: &[T], beta: T, noise: &[T]) -> Result<Vec<T>> {
    check_len(x_prev.len(), noise.len())?;
    let keep = (T::one() - beta).sqrt();
    let add = beta.sqrt();
    Ok(x_prev.iter().zip(noise).map(|(&x, &z)| keep * x + add * z).collect())
}

/// Epsilon-form ancestral update from explicit coefficients:
/// `(x - beta / sqrt(1 - ab) * eps) / sqrt(1 - beta) + sigma * noise` with
/// `sigma^2 = beta * (1 - ab_prev) / (1 - ab)`.
pub fn ancestral_update<T: Scalar>(
    x_n: &[T],
    eps_hat: &[T],
    beta: T,
    alpha_bar: T,
    alpha_bar_prev: T,
    noise: &[T],
) -> Result<Vec<T>> {
    check_len(x_n.len(), eps_hat.len())?;
    check_len(x_n.len(), noise.len())?;
    let inv_sqrt_alpha = T::one() / (T::one() - beta).sqrt();
    let eps_coef = beta / (T::one() - alpha_bar).sqrt();
    let sigma = (beta * (T::one() - alpha_bar_prev) / (T::one() - alpha_bar)).sqrt();
    Ok(x_n
        .iter()
        .zip(eps_hat)
        .zip(noise)
        .map(|((&x, &e), &z)| inv_sqrt_alpha * (x - eps_coef * e) + sigma * z)
        .collect())
}

impl<T: Scalar> NoiseSchedule<T> {
    /// One step of the forward chain at timestep `n`.
    pub fn forward_step(&self, x_prev: &[T], n: usize, noise: &[T]) -> Result<Vec<T>> {
        diffuse_once(x_prev, self.beta(n)?, noise)
    }

    /// Closed-form marginal `sqrt(ab_n) * x0 + sqrt(1 - ab_n) * noise`, `0 <= n <= N`.
    pub fn q_sample(&self, x0: &[T], n: usize, noise: &[T]) -> Result<Vec<T>> {
        check_len(x0.len(), noise.len())?;
        let a = self.sqrt_alpha_bar(n)?;
        let b = (T::one() - self.alpha_bar(n)?).sqrt();
        Ok(x0.iter().zip(noise).map(|(&x, &z)| a * x + b * z).collect())
    }

    /// Coefficients `(mean, std)` of the composed forward chain relative to `x0`,
    /// computed by running the per-step recursion rather than the closed form.
    pub fn composed_forward_coefficients(&self, n: usize) -> Result<(T, T)> {
        if n > self.n_steps() {
            return Err(Error::Parameter(format!("timestep {n} > {}", self.n_steps())));
        }
        let mut mean = T::one();
        let mut var = T::zero();
        for &beta in &self.betas()[..n] {
            let alpha = T::one() - beta;
            mean = alpha.sqrt() * mean;
            var = alpha * var + beta;
        }
        Ok((mean, var.sqrt()))
    }

    /// `v` target for a noised pair.
    pub fn v_target(&self, x0: &[T], noise: &[T], n: usize) -> Result<Vec<T>> {
        check_len(x0.len(), noise.len())?;
        let a = self.sqrt_alpha_bar(n)?;
        let b = (T::one() - self.alpha_bar(n)?).sqrt();
        Ok(x0.iter().zip(noise).map(|(&x, &z)| a * z - b * x).collect())
    }

    /// Converts a model output at timestep `n` to `(x0_hat, eps_hat)`.
    pub fn split_prediction(
        &self,
        x_n: &[T],
        prediction: &[T],
        kind: Parameterization,
        n: usize,
    ) -> Result<(Vec<T>, Vec<T>)> {
        check_len(x_n.len(), prediction.len())?;
        let a = self.sqrt_alpha_bar(n)?;
        let b = (T::one() - self.alpha_bar(n)?).sqrt();
        match kind {
            Parameterization::Epsilon => {
                if a == T::zero() {
                    return Err(Error::Parameterization { timestep: n });
                }
                let x0 = x_n.iter().zip(prediction).map(|(&x, &e)| (x - b * e) / a).collect();
                Ok((x0, prediction.to_vec()))
            }
            Parameterization::V => {
                let x0 = x_n.iter().zip(prediction).map(|(&x, &v)| a * x - b * v).collect();
                let eps = x_n.iter().zip(prediction).map(|(&x, &v)| a * v + b * x).collect();
                Ok((x0, eps))
            }
        }
    }

    /// Fixed reverse-process variance `beta_tilde_n = beta_n (1 - ab_{n-1}) / (1 - ab_n)`.
    pub fn posterior_variance(&self, n: usize) -> Result<T> {
        self.skip_posterior_variance(n, n.saturating_sub(1))
    }

    /// Variance of `q(x_prev | x_n, x0)` for arbitrary `n > prev`.
    pub fn skip_posterior_variance(&self, n: usize, prev: usize) -> Result<T> {
        self.check_pair(n, prev)?;
        let ab = self.alpha_bar(n)?;
        let ab_prev = self.alpha_bar(prev)?;
        Ok((T::one() - ab_prev) / (T::one() - ab) * (T::one() - ab / ab_prev))
    }

    fn check_pair(&self, n: usize, prev: usize) -> Result<()> {
        if !(n > prev && n >= 1 && n <= self.n_steps()) {
            return Err(Error::Parameter(format!(
                "need N >= n > n_prev >= 0, got n = {n}, n_prev = {prev}"
            )));
        }
        Ok(())
    }

    /// Ancestral reverse step from an epsilon estimate, `1 <= n <= N`.
    pub fn ancestral_step(&self, x_n: &[T], eps_hat: &[T], n: usize, noise: &[T]) -> Result<Vec<T>> {
        let ab = self.alpha_bar(n)?;
        if n == 0 {
            return Err(Error::Parameter("ancestral step needs n >= 1".into()));
        }
        if ab == T::zero() {
            return Err(Error::Parameterization { timestep: n });
        }
        ancestral_update(x_n, eps_hat, self.beta(n)?, ab, self.alpha_bar(n - 1)?, noise)
    }

    /// Ancestral step between arbitrary `n > prev` given a clean-data estimate,
    /// sampling from `q(x_prev | x_n, x0_hat)`. Defined at zero SNR.
    pub fn posterior_step(
        &self,
        x_n: &[T],
        x0_hat: &[T],
        n: usize,
        prev: usize,
        noise: &[T],
    ) -> Result<Vec<T>> {
        self.check_pair(n, prev)?;
        check_len(x_n.len(), x0_hat.len())?;
        check_len(x_n.len(), noise.len())?;
        let ab = self.alpha_bar(n)?;
        let ab_prev = self.alpha_bar(prev)?;
        let one = T::one();
        let step_alpha = ab / ab_prev;
        let x0_coef = self.sqrt_alpha_bar(prev)? * (one - step_alpha) / (one - ab);
        let xn_coef = step_alpha.sqrt() * (one - ab_prev) / (one - ab);
        let sigma = self.skip_posterior_variance(n, prev)?.sqrt();
        Ok(x_n
            .iter()
            .zip(x0_hat)
            .zip(noise)
            .map(|((&x, &x0), &z)| x0_coef * x0 + xn_coef * x + sigma * z)
            .collect())
    }

    /// DDIM noise scale for a jump `n -> prev`.
    pub fn ddim_sigma(&self, n: usize, prev: usize, eta: T) -> Result<T> {
        Ok(eta * self.skip_posterior_variance(n, prev)?.sqrt())
    }

    /// DDIM step from an epsilon estimate.
    #[allow(clippy::too_many_arguments)]
    pub fn ddim_step(
        &self,
        x_n: &[T],
        eps_hat: &[T],
        n: usize,
        prev: usize,
        eta: T,
        noise: &[T],
    ) -> Result<Vec<T>> {
        self.check_pair(n, prev)?;
        let (x0, eps) = self.split_prediction(x_n, eps_hat, Parameterization::Epsilon, n)?;
        self.ddim_combine(&x0, &eps, n, prev, eta, noise)
    }

    /// DDIM step from a v estimate; defined at every timestep.
    pub fn ddim_step_v(
        &self,
        x_n: &[T],
        v_hat: &[T],
        n: usize,
        prev: usize,
        eta: T,
        noise: &[T],
    ) -> Result<Vec<T>> {
        self.check_pair(n, prev)?;
        let (x0, eps) = self.split_prediction(x_n, v_hat, Parameterization::V, n)?;
        self.ddim_combine(&x0, &eps, n, prev, eta, noise)
    }

    /// `sqrt(ab_prev) x0 + sqrt(1 - ab_prev - sigma^2) eps + sigma z`.
    pub fn ddim_combine(
        &self,
        x0_hat: &[T],
        eps_hat: &[T],
        n: usize,
        prev: usize,
        eta: T,
        noise: &[T],
    ) -> Result<Vec<T>> {
        check_len(x0_hat.len(), eps_hat.len())?;
        check_len(x0_hat.len(), noise.len())?;
        if eta < T::zero() {
            return Err(Error::Parameter(format!("eta must be >= 0, got {eta}")));
        }
        let sigma = self.ddim_sigma(n, prev, eta)?;
        let a_prev = self.sqrt_alpha_bar(prev)?;
        let dir = (T::one() - self.alpha_bar(prev)? - sigma * sigma).max(T::zero()).sqrt();
        Ok(x0_hat
            .iter()
            .zip(eps_hat)
            .zip(noise)
            .map(|((&x0, &e), &z)| a_prev * x0 + dir * e + sigma * z)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::super::ScheduleShape;
    use super::*;

    fn linear(n: usize) -> NoiseSchedule<f64> {
        NoiseSchedule::build(n, 1e-4, 0.02, ScheduleShape::Linear).unwrap()
    }

    #[test]
    fn diffuse_once_edge_betas() {
        let x = [1.5, -2.0];
        let z = [0.3, 0.7];
        assert_eq!(diffuse_once(&x, 0.0, &z).unwrap(), x.to_vec());
        assert_eq!(diffuse_once(&x, 1.0, &z).unwrap(), z.to_vec());
    }

    #[test]
    fn forward_step_hand_arithmetic() {
        let s = NoiseSchedule::from_betas(&[0.19f64]).unwrap();
        let out = s.forward_step(&[2.0, 0.0], 1, &[1.0, 1.0]).unwrap();
        let r = 0.19f64.sqrt();
        assert!((out[0] - (1.8 + r)).abs() < 1e-15);
        assert!((out[1] - r).abs() < 1e-15);
        assert!((out[0] - 2.235_889_894_354_067).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let s = linear(10);
        assert!(matches!(s.forward_step(&[1.0], 1, &[1.0, 2.0]), Err(Error::Shape { .. })));
        assert!(s.q_sample(&[1.0, 2.0], 3, &[0.0]).is_err());
        assert!(s.forward_step(&[1.0], 0, &[1.0]).is_err());
        assert!(s.forward_step(&[1.0], 11, &[1.0]).is_err());
    }

    #[test]
    fn q_sample_cases() {
        let s = linear(10);
        assert_eq!(s.q_sample(&[0.4, -1.0], 0, &[9.0, 9.0]).unwrap(), vec![0.4, -1.0]);
        let zt = s.rescale_zero_terminal_snr().unwrap();
        assert_eq!(zt.q_sample(&[0.4, -1.0], 10, &[0.25, 3.0]).unwrap(), vec![0.25, 3.0]);
        // alpha_bar = 0.25 as a single-step schedule with beta 0.75
        let q = NoiseSchedule::from_betas(&[0.75f64]).unwrap();
        assert_eq!(q.q_sample(&[1.0, 1.0], 1, &[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn ancestral_single_step_recovers_x0() {
        let s = NoiseSchedule::from_betas(&[0.3f64]).unwrap();
        let x0 = [0.7, -1.2, 2.0];
        let eps = [0.1, 0.5, -0.9];
        let x1 = s.q_sample(&x0, 1, &eps).unwrap();
        let back = s.ancestral_step(&x1, &eps, 1, &[5.0, 5.0, 5.0]).unwrap();
        for (a, b) in back.iter().zip(&x0) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn ancestral_zero_beta_is_noop() {
        let x = [0.3f64, -0.4];
        let out = ancestral_update(&x, &[1.0, 2.0], 0.0, 0.5, 0.5, &[3.0, 3.0]).unwrap();
        assert_eq!(out, x.to_vec());
    }

    #[test]
    fn epsilon_rejected_at_zero_snr() {
        let s = linear(10).rescale_zero_terminal_snr().unwrap();
        let err = s.ancestral_step(&[0.0], &[0.0], 10, &[0.0]).unwrap_err();
        assert!(matches!(err, Error::Parameterization { timestep: 10 }));
        assert!(s.ddim_step(&[0.0], &[0.0], 10, 5, 0.0, &[0.0]).is_err());
        assert!(s.ddim_step_v(&[0.3], &[0.1], 10, 5, 0.0, &[0.0]).is_ok());
    }

    #[test]
    fn ddim_deterministic_exact_recovery() {
        let s = linear(100);
        let x0 = [0.7, -1.2];
        let eps = [0.4, 1.1];
        let n = 63;
        let xn = s.q_sample(&x0, n, &eps).unwrap();
        let out = s.ddim_step(&xn, &eps, n, 0, 0.0, &[0.0, 0.0]).unwrap();
        for (a, b) in out.iter().zip(&x0) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ddim_zero_eps_scales_input() {
        let s = linear(100);
        let x = [0.9, -0.3];
        let out = s.ddim_step(&x, &[0.0, 0.0], 40, 20, 0.0, &[0.0, 0.0]).unwrap();
        let k = s.sqrt_alpha_bar(20).unwrap() / s.sqrt_alpha_bar(40).unwrap();
        for (a, b) in out.iter().zip(&x) {
            assert!((a - k * b).abs() < 1e-14);
        }
    }

    #[test]
    fn v_and_eps_views_agree() {
        let s = linear(100);
        let x0 = [0.5, -0.25];
        let eps = [1.0, -2.0];
        let n = 37;
        let xn = s.q_sample(&x0, n, &eps).unwrap();
        let v = s.v_target(&x0, &eps, n).unwrap();
        let (x0v, epsv) = s.split_prediction(&xn, &v, Parameterization::V, n).unwrap();
        for i in 0..2 {
            assert!((x0v[i] - x0[i]).abs() < 1e-12);
            assert!((epsv[i] - eps[i]).abs() < 1e-12);
        }
        let a = s.ancestral_step(&xn, &eps, n, &[0.3, 0.2]).unwrap();
        let b = s.posterior_step(&xn, &x0v, n, n - 1, &[0.3, 0.2]).unwrap();
        for i in 0..2 {
            assert!((a[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn first_step_posterior_is_deterministic() {
        let s = linear(100);
        assert_eq!(s.posterior_variance(1).unwrap(), 0.0);
    }
}
