use serde::{Deserialize, Serialize};

use super::cwt::{cwt_forward, Contour, CwtMatrix};
use crate::{Error, Result, Scalar};

/// Dense row-major matrix, channels by time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }
}

/// Pitch, energy and duration transforms stacked along the channel axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProsodyTarget<T> {
    pub blocks: [CwtMatrix<T>; 3],
}

impl<T: Scalar> ProsodyTarget<T> {
    pub fn channels(&self) -> usize {
        self.blocks.iter().map(|b| b.n_scales()).sum()
    }

    pub fn phones(&self) -> usize {
        self.blocks[0].len
    }

    /// `3 * n_scales x phones`, blocks in pitch, energy, duration order.
    pub fn stacked(&self) -> Matrix<T> {
        let data = self.blocks.iter().flat_map(|b| b.coefficients.iter().copied()).collect();
        Matrix { rows: self.channels(), cols: self.phones(), data }
    }
}

pub fn build_prosody_target<T: Scalar>(
    pitch: &Contour<T>,
    energy: &Contour<T>,
    duration: &Contour<T>,
    n_scales: usize,
) -> Result<ProsodyTarget<T>> {
    if pitch.len() != energy.len() || pitch.len() != duration.len() {
        return Err(Error::Parameter(format!(
            "contour lengths differ: pitch {}, energy {}, duration {}",
            pitch.len(),
            energy.len(),
            duration.len()
        )));
    }
    Ok(ProsodyTarget {
        blocks: [
            cwt_forward(pitch, n_scales)?,
            cwt_forward(energy, n_scales)?,
            cwt_forward(duration, n_scales)?,
        ],
    })
}

/// Repeats column `i` of a phone-level matrix `durations[i]` times. Zero
/// durations drop the phone.
pub fn expand_prosody<T: Scalar>(phone_level: &Matrix<T>, durations: &[i64]) -> Result<Matrix<T>> {
    if durations.len() != phone_level.cols {
        return Err(Error::Shape { expected: phone_level.cols, got: durations.len() });
    }
    if let Some(i) = durations.iter().position(|&d| d < 0) {
        return Err(Error::Parameter(format!("negative duration {} at phone {i}", durations[i])));
    }
    let frames: Vec<usize> = durations
        .iter()
        .enumerate()
        .flat_map(|(i, &d)| std::iter::repeat_n(i, d as usize))
        .collect();
    let mut out = Matrix::zeros(phone_level.rows, frames.len());
    for r in 0..phone_level.rows {
        for (f, &phone) in frames.iter().enumerate() {
            out.data[r * out.cols + f] = phone_level.get(r, phone);
        }
    }
    Ok(out)
}

/// Integer frame counts from a log-frame contour: `max(1, round(exp(v)))`.
pub fn durations_from_contour<T: Scalar>(contour: &Contour<T>) -> Vec<i64> {
    contour
        .values
        .iter()
        .map(|v| (v.to_f64_lossy().exp().round() as i64).max(1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::ContourKind;
    use super::*;

    fn m(rows: usize, cols: usize) -> Matrix<f64> {
        Matrix { rows, cols, data: (0..rows * cols).map(|v| v as f64).collect() }
    }

    #[test]
    fn unit_durations_identity() {
        let p = m(3, 4);
        assert_eq!(expand_prosody(&p, &[1, 1, 1, 1]).unwrap(), p);
    }

    #[test]
    fn counts_frames() {
        let p = m(2, 2);
        let e = expand_prosody(&p, &[2, 3]).unwrap();
        assert_eq!(e.cols, 5);
        assert_eq!(e.column(0), e.column(1));
        assert_eq!(e.column(2), p.column(1));
        assert_eq!(e.column(4), p.column(1));
    }

    #[test]
    fn zero_total_is_empty_and_negative_errors() {
        let p = m(2, 3);
        let e = expand_prosody(&p, &[0, 0, 0]).unwrap();
        assert_eq!((e.rows, e.cols), (2, 0));
        assert!(expand_prosody(&p, &[1, -1, 2]).is_err());
        assert!(expand_prosody(&p, &[1, 2]).is_err());
        let dropped = expand_prosody(&p, &[1, 0, 1]).unwrap();
        assert_eq!(dropped.column(1), p.column(2));
    }

    #[test]
    fn decode_durations() {
        let c = Contour::new(ContourKind::Duration, vec![0.0f64, 4f64.ln(), 0.2f64.ln()]).unwrap();
        assert_eq!(durations_from_contour(&c), vec![1, 4, 1]);
    }

    #[test]
    fn stacked_blocks() {
        let flat = Contour::new(ContourKind::Pitch, vec![1.0f64; 12]).unwrap();
        let e = Contour { kind: ContourKind::Energy, ..flat.clone() };
        let d = Contour { kind: ContourKind::Duration, ..flat.clone() };
        let t = build_prosody_target(&flat, &e, &d, 5).unwrap();
        assert_eq!(t.channels(), 15);
        assert!(t.stacked().data.iter().all(|&v| v == 0.0));
        let wavy = Contour::new(ContourKind::Pitch, (0..12).map(|i| (i as f64).sin()).collect()).unwrap();
        let t = build_prosody_target(&wavy, &e, &d, 5).unwrap();
        let s = t.stacked();
        assert_eq!(&s.data[..5 * 12], cwt_forward(&wavy, 5).unwrap().coefficients.as_slice());
        let short = Contour::new(ContourKind::Energy, vec![1.0f64; 3]).unwrap();
        assert!(build_prosody_target(&wavy, &short, &d, 5).is_err());
    }
}
