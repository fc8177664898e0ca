use crate::error::check_len;
use crate::scalar::mean_std;
use crate::{Result, Scalar};

/// Classifier-free guidance `uncond + w * (cond - uncond)`, evaluated as
/// `w * cond + (1 - w) * uncond` so that `w = 1` returns `cond` bit-exactly.
pub fn apply_cfg<T: Scalar>(eps_cond: &[T], eps_uncond: &[T], w: T) -> Result<Vec<T>> {
    check_len(eps_cond.len(), eps_uncond.len())?;
    Ok(eps_cond
        .iter()
        .zip(eps_uncond)
        .map(|(&c, &u)| w * c + (T::one() - w) * u)
        .collect())
}

/// Rescales the guided prediction toward the standard deviation of the
/// conditional one, blended by `phi`. A guided vector with zero spread is
/// returned unchanged.
pub fn rescale_guidance<T: Scalar>(eps_guided: &[T], eps_cond: &[T], phi: T) -> Result<Vec<T>> {
    check_len(eps_guided.len(), eps_cond.len())?;
    let (_, std_guided) = mean_std(eps_guided);
    if std_guided == T::zero() || phi == T::zero() {
        return Ok(eps_guided.to_vec());
    }
    let (_, std_cond) = mean_std(eps_cond);
    let ratio = std_cond / std_guided;
    Ok(eps_guided
        .iter()
        .map(|&g| phi * (ratio * g) + (T::one() - phi) * g)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cfg_endpoints_and_large_weight() {
        let c = [0.3, -1.0, 2.5];
        let u = [1.0, 0.5, -0.5];
        assert_eq!(apply_cfg(&c, &u, 1.0).unwrap(), c.to_vec());
        assert_eq!(apply_cfg(&c, &u, 0.0).unwrap(), u.to_vec());
        assert_eq!(apply_cfg(&[1.0], &[0.0], 7.5).unwrap(), vec![7.5]);
        assert!(apply_cfg(&[1.0], &[0.0, 1.0], 7.5).is_err());
    }

    #[test]
    fn rescale_cases() {
        let g = [2.0f64, -2.0, 2.0, -2.0];
        let c = [1.0, -1.0, 1.0, -1.0];
        assert_eq!(rescale_guidance(&g, &c, 0.0).unwrap(), g.to_vec());
        assert_eq!(rescale_guidance(&c, &c, 1.0).unwrap(), c.to_vec());
        let out = rescale_guidance(&g, &c, 1.0).unwrap();
        let (_, s) = mean_std(&out);
        assert!((s - 1.0).abs() < 1e-15);
        let flat = [0.4, 0.4];
        assert_eq!(rescale_guidance(&flat, &[1.0, -1.0], 0.7).unwrap(), flat.to_vec());
    }
}
