use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WerStats {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_len: usize,
    pub wer: f64,
}

impl WerStats {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

/// Whitespace split with case folding.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// Unit-cost Levenshtein alignment. Among optimal alignments the backtrace
/// prefers substitutions over deletion plus insertion pairs.
pub fn word_error_rate<S: PartialEq>(reference: &[S], hypothesis: &[S]) -> Result<WerStats> {
    if reference.is_empty() {
        return Err(Error::UndefinedWer);
    }
    let (n, m) = (reference.len(), hypothesis.len());
    let w = m + 1;
    let mut cost = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        cost[i * w] = i;
    }
    for j in 0..=m {
        cost[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = cost[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let del = cost[(i - 1) * w + j] + 1;
            let ins = cost[i * w + j - 1] + 1;
            cost[i * w + j] = diag.min(del).min(ins);
        }
    }
    let (mut i, mut j) = (n, m);
    let (mut subs, mut dels, mut ins) = (0, 0, 0);
    while i > 0 || j > 0 {
        let here = cost[i * w + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hypothesis[j - 1];
            if cost[(i - 1) * w + j - 1] + usize::from(!same) == here {
                subs += usize::from(!same);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && cost[(i - 1) * w + j] + 1 == here {
            dels += 1;
            i -= 1;
        } else {
            ins += 1;
            j -= 1;
        }
    }
    Ok(WerStats {
        substitutions: subs,
        deletions: dels,
        insertions: ins,
        ref_len: n,
        wer: (subs + dels + ins) as f64 / n as f64,
    })
}

/// Synthetic-trained error rate over real-trained error rate.
pub fn werr(wer_synth: f64, wer_real: f64) -> Result<f64> {
    if !(wer_real > 0.0) || !wer_real.is_finite() {
        return Err(Error::Parameter(format!("real-data error rate must be positive, got {wer_real}")));
    }
    if !(wer_synth >= 0.0) {
        return Err(Error::Parameter(format!("synthetic error rate must be >= 0, got {wer_synth}")));
    }
    Ok(wer_synth / wer_real)
}
