use serde::{Deserialize, Serialize};

use super::DistanceError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

/// Two-sample Kolmogorov–Smirnov test.
///
/// The statistic is the exact supremum of the ECDF difference (ties handled
/// by stepping both samples past equal values). The p-value is the
/// asymptotic two-sided value `Q_KS(sqrt(n_e) * D)` with
/// `n_e = n1 * n2 / (n1 + n2)`.
pub fn ks_two_sample(sample1: &[f64], sample2: &[f64]) -> Result<KsResult, DistanceError> {
    if sample1.is_empty() || sample2.is_empty() {
        return Err(DistanceError::EmptySample);
    }
    if sample1.iter().chain(sample2).any(|x| x.is_nan()) {
        return Err(DistanceError::NanSample);
    }
    let mut a = sample1.to_vec();
    let mut b = sample2.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n1, n2) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let x = a[i].min(b[j]);
        while i < n1 && a[i] <= x {
            i += 1;
        }
        while j < n2 && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(ne.sqrt() * d),
        n1,
        n2,
    })
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.18 {
        // small-lambda form of the CDF converges quickly here
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        for k in 1..=20 {
            let m = (2 * k - 1) as f64;
            cdf += (c * m * m).exp();
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * cdf
    } else {
        let mut sum = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        2.0 * sum
    };
    q.clamp(0.0, 1.0)
}
