//! Wavelet analysis of phone-level prosody contours and duration expansion.

mod cwt;
mod expand;
mod io;

pub use cwt::{
    cwt_forward, cwt_inverse, cwt_raw, dyadic_scales, mexican_hat, reconstruction_gain, Contour,
    ContourKind, CwtMatrix, DEFAULT_SCALES, FINEST_SCALE,
};
pub use expand::{build_prosody_target, durations_from_contour, expand_prosody, Matrix, ProsodyTarget};
pub use io::{read_contour_csv, read_matrix, write_contour_csv, write_matrix, MatrixHeader};
