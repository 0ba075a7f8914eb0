//! Local-maximum detection with topographic prominence.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    pub height: f64,
    pub prominence: f64,
}

/// Find strict local maxima and keep those with prominence ≥ `min_prominence`.
///
/// Prominence of a peak is its height above the higher of the two lowest
/// valleys separating it from higher terrain (or the signal edge), the usual
/// topographic definition.
pub fn find_peaks(values: &[f64], min_prominence: f64) -> Vec<Peak> {
    let n = values.len();
    if n < 3 {
        return vec![];
    }
    let mut peaks = Vec::new();
    for i in 1..n - 1 {
        if !(values[i] > values[i - 1] && values[i] >= values[i + 1]) {
            continue;
        }
        let h = values[i];
        // walk left to higher ground, tracking the lowest valley
        let mut left_min = h;
        let mut j = i;
        while j > 0 {
            j -= 1;
            if values[j] > h {
                break;
            }
            left_min = left_min.min(values[j]);
        }
        let mut right_min = h;
        let mut j = i;
        while j < n - 1 {
            j += 1;
            if values[j] > h {
                break;
            }
            right_min = right_min.min(values[j]);
        }
        let prominence = h - left_min.max(right_min);
        if prominence >= min_prominence {
            peaks.push(Peak {
                index: i,
                height: h,
                prominence,
            });
        }
    }
    peaks
}
