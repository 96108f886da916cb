//! Box-plot summary with the 1.5 IQR outlier rule.

use serde::Serialize;

use crate::error::{Error, Result};

pub const WHISKER_IQR: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxStats {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// Smallest sample at or above `q1 - 1.5 IQR`, but at most `q1`.
    pub lower_whisker: f64,
    /// Largest sample at or below `q3 + 1.5 IQR`, but at least `q3`.
    pub upper_whisker: f64,
    /// Samples outside the whiskers, ascending.
    pub outliers: Vec<f64>,
}

impl BoxStats {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("sample set"));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q1 = quantile(&sorted, 0.25);
        let median = quantile(&sorted, 0.5);
        let q3 = quantile(&sorted, 0.75);
        let iqr = q3 - q1;
        let lo_fence = q1 - WHISKER_IQR * iqr;
        let hi_fence = q3 + WHISKER_IQR * iqr;
        let inside = || {
            sorted
                .iter()
                .copied()
                .filter(|&x| x >= lo_fence && x <= hi_fence)
        };
        // clamped to the box, as when no sample lies between fence and quartile
        let lower_whisker = inside().next().map_or(q1, |x| x.min(q1));
        let upper_whisker = inside().next_back().map_or(q3, |x| x.max(q3));
        let outliers = sorted
            .iter()
            .copied()
            .filter(|&x| x < lo_fence || x > hi_fence)
            .collect();
        Ok(Self {
            count: sorted.len(),
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            q1,
            median,
            q3,
            lower_whisker,
            upper_whisker,
            outliers,
        })
    }

    pub fn outliers_below(&self) -> usize {
        self.outliers
            .iter()
            .filter(|&&x| x < self.lower_whisker)
            .count()
    }
}

/// Linear interpolation between closest ranks on sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matches_linear_quartiles() {
        // numpy.percentile(..., [25, 50, 75]) on 1..=10 and 100
        let mut xs: Vec<f64> = (1..=10).map(f64::from).collect();
        xs.push(100.0);
        let s = BoxStats::from_samples(&xs).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (3.5, 6.0, 8.5));
        assert_eq!(s.upper_whisker, 10.0);
        assert_eq!(s.lower_whisker, 1.0);
        assert_eq!(s.outliers, vec![100.0]);
        assert_eq!(s.outliers_below(), 0);
    }

    #[test]
    fn single_sample() {
        let s = BoxStats::from_samples(&[2.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3, s.mean), (2.0, 2.0, 2.0, 2.0));
        assert!(s.outliers.is_empty());
        assert!(BoxStats::from_samples(&[]).is_err());
    }

    proptest! {
        #[test]
        fn ordering_invariants(xs in prop::collection::vec(-1e3f64..1e3, 1..200)) {
            let s = BoxStats::from_samples(&xs).unwrap();
            prop_assert!(s.lower_whisker <= s.q1);
            prop_assert!(s.q1 <= s.median && s.median <= s.q3);
            prop_assert!(s.q3 <= s.upper_whisker);
            for &o in &s.outliers {
                prop_assert!(o < s.lower_whisker || o > s.upper_whisker);
            }
            let kept = xs.iter().filter(|&&x| x >= s.lower_whisker && x <= s.upper_whisker).count();
            prop_assert_eq!(kept + s.outliers.len(), xs.len());
        }
    }
}
