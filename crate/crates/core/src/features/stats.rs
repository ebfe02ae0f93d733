/// Summary of a distribution-valued feature.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub median: f64,
    /// 90th percentile with linear interpolation between order statistics.
    pub p90: f64,
}

impl Moments {
    /// All zeros for an empty sample.
    pub fn of(values: &mut [f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        values.sort_by(f64::total_cmp);
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            median: quantile_sorted(values, 0.5),
            p90: quantile_sorted(values, 0.9),
        }
    }

    pub fn named(&self, prefix: &str) -> [(String, f64); 4] {
        [
            (format!("{prefix}_mean"), self.mean),
            (format!("{prefix}_std"), self.std),
            (format!("{prefix}_median"), self.median),
            (format!("{prefix}_p90"), self.p90),
        ]
    }
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_zero() {
        assert_eq!(Moments::of(&mut []), Moments::default());
    }

    #[test]
    fn known_sample() {
        let m = Moments::of(&mut [4.0, 1.0, 3.0, 2.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.std - 1.25f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.median, 2.5);
        // position 0.9 * 3 = 2.7 between 3 and 4
        assert!((m.p90 - 3.7).abs() < 1e-12);
    }

    #[test]
    fn single_value() {
        let m = Moments::of(&mut [7.0]);
        assert_eq!((m.mean, m.std, m.median, m.p90), (7.0, 0.0, 7.0, 7.0));
    }
}
