use serde::Serialize;

use super::BenchError;

/// Summary of a sample of durations in milliseconds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single value.
    pub stdev: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Percentile of sorted data, interpolating linearly between the two
/// closest ranks at position `(n − 1)·p`.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(durations: &[f64]) -> Result<Stats, BenchError> {
    if durations.is_empty() {
        return Err(BenchError::EmptyInput);
    }
    if let Some(bad) = durations.iter().find(|d| !d.is_finite()) {
        return Err(BenchError::InvalidArgument(format!("non-finite duration {bad}")));
    }
    let mut sorted = durations.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // Clamped so rounding cannot push the mean outside [min, max].
    let mean = (sorted.iter().sum::<f64>() / n as f64).clamp(sorted[0], sorted[n - 1]);
    let stdev = if n > 1 {
        (sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Stats {
        n,
        mean,
        median: percentile(&sorted, 0.5),
        min: sorted[0],
        max: sorted[n - 1],
        stdev,
        q1: percentile(&sorted, 0.25),
        q3: percentile(&sorted, 0.75),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn four_values() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.n, 4);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.5);
        assert_eq!((s.q1, s.q3), (1.75, 3.25));
        assert!((s.stdev - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_and_constant() {
        assert_eq!(summarize(&[5.0]).unwrap().stdev, 0.0);
        let s = summarize(&[0.7; 9]).unwrap();
        assert_eq!((s.q1, s.q3, s.mean, s.stdev), (0.7, 0.7, 0.7, 0.0));
        assert!(matches!(summarize(&[]), Err(BenchError::EmptyInput)));
        assert!(summarize(&[1.0, f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn order_invariant(v in prop::collection::vec(-1e6f64..1e6, 1..60)) {
            let s = summarize(&v).unwrap();
            prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
            prop_assert!(s.min <= s.mean && s.mean <= s.max);
            prop_assert!(s.stdev >= 0.0);
        }
    }
}
