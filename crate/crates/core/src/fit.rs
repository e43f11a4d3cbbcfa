//! Log-linear decay fits `y_n ~ A c^n`.

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    /// Fitted rate `c`.
    pub rate: f64,
    /// Coefficient of determination of the log-linear fit.
    pub r2: f64,
    pub points: usize,
}

impl DecayFit {
    pub fn decays(&self, min_r2: f64) -> bool {
        self.points >= 3 && self.rate < 1.0 && self.r2 >= min_r2
    }
}

/// Least-squares fit of `ln y` against `n` over the entries with `y > 0`.
pub fn fit_decay(ns: &[usize], ys: &[f64]) -> DecayFit {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0 && y.is_finite())
        .map(|(&n, &y)| (n as f64, y.ln()))
        .collect();
    let m = pts.len();
    if m < 2 {
        return DecayFit {
            rate: if ys.iter().all(|&y| y == 0.0) { 0.0 } else { f64::NAN },
            r2: if m == 0 { 1.0 } else { f64::NAN },
            points: m,
        };
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    DecayFit {
        rate: slope.exp(),
        r2,
        points: m,
    }
}

/// Fit over the levels `lo..=hi` of a per-level series.
pub fn fit_range(series: &[f64], lo: usize, hi: usize) -> DecayFit {
    let hi = hi.min(series.len().saturating_sub(1));
    if lo > hi {
        return fit_decay(&[], &[]);
    }
    let ns: Vec<usize> = (lo..=hi).collect();
    fit_decay(&ns, &series[lo..=hi])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_geometric_series() {
        let ys: Vec<f64> = (0..10).map(|n| 3.0 * 0.5f64.powi(n)).collect();
        let f = fit_range(&ys, 0, 9);
        assert!((f.rate - 0.5).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
    }
}
