//! Local maxima and their topographic prominence in sampled profiles.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub index: usize,
    pub height: f64,
    /// Height above the higher of the two lowest points separating this peak
    /// from higher terrain (or from the ends of the data).
    pub prominence: f64,
}

/// All local maxima, including maxima sitting on either end of the samples.
///
/// Plateaus report their first sample. An end sample is a peak when it is
/// strictly above its only neighbour; its prominence is measured on the inner
/// side alone.
pub fn find_peaks(values: &[f64]) -> Vec<Peak> {
    let n = values.len();
    if n < 2 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        // extent of the plateau starting at i
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        let left_lower = i == 0 || values[i - 1] < values[i];
        let right_lower = j + 1 == n || values[j + 1] < values[i];
        let isolated = i == 0 && j + 1 == n;
        if left_lower && right_lower && !isolated {
            out.push(Peak {
                index: i,
                height: values[i],
                prominence: prominence(values, i, j),
            });
        }
        i = j + 1;
    }
    out
}

fn prominence(values: &[f64], first: usize, last: usize) -> f64 {
    let h = values[first];
    let side_min = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut low = f64::INFINITY;
        let mut any = false;
        for k in range {
            if values[k] > h {
                return Some(low);
            }
            low = low.min(values[k]);
            any = true;
        }
        // reached the end of the data without meeting higher ground
        if any {
            Some(low)
        } else {
            None
        }
    };
    let left = side_min(&mut (0..first).rev());
    let right = side_min(&mut (last + 1..values.len()));
    let base = match (left, right) {
        (Some(a), Some(b)) => a.max(b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => h,
    };
    h - base
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_and_end_peaks() {
        let v = [3.0, 1.0, 2.0, 0.5, 4.0];
        let p = find_peaks(&v);
        let idx: Vec<usize> = p.iter().map(|p| p.index).collect();
        assert_eq!(idx, vec![0, 2, 4]);
        assert_eq!(p[0].prominence, 2.5); // down to 0.5 before meeting 4.0
        assert_eq!(p[1].prominence, 1.0); // max(1.0, 0.5) base
        assert_eq!(p[2].prominence, 3.5);
    }

    #[test]
    fn monotone_data_has_one_end_peak() {
        let v: Vec<f64> = (0..10).map(|i| -(i as f64)).collect();
        let p = find_peaks(&v);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].index, 0);
        assert_eq!(p[0].prominence, 9.0);
    }

    #[test]
    fn flat_data_has_no_peaks() {
        assert!(find_peaks(&[1.0; 5]).is_empty());
        assert!(find_peaks(&[1.0]).is_empty());
    }
}
