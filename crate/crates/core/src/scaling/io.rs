use std::io::Read;

use super::fit::ScalingPoint;
use crate::Result;

/// Reads `D,werr[,label]` rows.
pub fn read_points_csv<R: Read>(input: R) -> Result<Vec<ScalingPoint<f64>>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let mut points = Vec::new();
    for row in reader.deserialize() {
        let p: ScalingPoint<f64> = row?;
        p.validate()?;
        points.push(p);
    }
    Ok(points)
}
