use serde::{Deserialize, Serialize};

/// Reference values kept for calibration; larger samples are thinned evenly after sorting.
pub const MAX_REFERENCE_VALUES: usize = 4_000_000;

/// Empirical CDF over strictly positive raw scores.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    /// Non-positive and non-finite values are dropped.
    pub fn new(mut values: Vec<f64>) -> Self {
        values.retain(|v| v.is_finite() && *v > 0.0);
        values.sort_by(f64::total_cmp);
        if values.len() > MAX_REFERENCE_VALUES {
            let stride = values.len() as f64 / MAX_REFERENCE_VALUES as f64;
            // keep the maximum so it still maps to 1
            let last = *values.last().unwrap();
            let mut thinned: Vec<f64> = (0..MAX_REFERENCE_VALUES)
                .map(|i| values[((i as f64 + 1.0) * stride) as usize - 1])
                .collect();
            *thinned.last_mut().unwrap() = last;
            values = thinned;
        }
        Ecdf { sorted: values }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of reference values `≤ s`; zero for `s ≤ 0`.
    pub fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 || self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&v| v <= s) as f64 / self.sorted.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        let e = Ecdf::new(vec![4.0, 1.0, 2.0, 0.0]);
        assert_eq!(e.len(), 3);
        assert!((e.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(e.eval(4.0), 1.0);
        assert_eq!(e.eval(100.0), 1.0);
        assert_eq!(e.eval(0.0), 0.0);
        assert_eq!(e.eval(0.5), 0.0);
    }

    #[test]
    fn monotone() {
        let e = Ecdf::new((1..50).map(|i| (i % 7) as f64 + 0.5).collect());
        let mut prev = 0.0;
        for k in 0..100 {
            let v = e.eval(k as f64 * 0.1);
            assert!(v >= prev);
            prev = v;
        }
    }
}
