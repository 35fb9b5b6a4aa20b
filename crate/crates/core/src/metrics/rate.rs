use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of a rate curve: mean excess risk and its confidence interval at sample size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCurvePoint {
    pub n: usize,
    pub mean_excess: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub n_reps: usize,
}

/// Composite-smoothness rate `max_i N^{-2 b_i / (2 b_i + t_i)}` with
/// `b_i = beta_i * prod_{l > i} min(beta_l, 1)`.
pub fn phi_rate(betas: &[f64], ts: &[f64], n: f64) -> Result<f64> {
    if betas.is_empty() || betas.len() != ts.len() {
        return Err(Error::DimensionMismatch {
            expected: betas.len(),
            got: ts.len(),
        });
    }
    if betas.iter().chain(ts).any(|&v| !(v > 0.0)) || !(n > 0.0) {
        return Err(Error::InvalidArgument(
            "smoothness, dimensions and N must be positive".into(),
        ));
    }
    let q = betas.len();
    let rate = (0..q)
        .map(|i| {
            let eff = betas[i] * betas[i + 1..].iter().map(|b| b.min(1.0)).product::<f64>();
            n.powf(-2.0 * eff / (2.0 * eff + ts[i]))
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Points used in the regression.
    pub used: usize,
    /// Points in the window skipped because their mean excess was not positive.
    pub excluded: usize,
}

/// Least-squares slope of `log2(mean_excess)` against `log2(N)` over
/// `points[window]`, skipping nonpositive excess values.
pub fn fit_rate(points: &[RateCurvePoint], window: std::ops::Range<usize>) -> Result<RateFit> {
    let window = window.start.min(points.len())..window.end.min(points.len());
    let selected = &points[window];
    let usable: Vec<(f64, f64)> = selected
        .iter()
        .filter(|p| p.mean_excess > 0.0)
        .map(|p| ((p.n as f64).log2(), p.mean_excess.log2()))
        .collect();
    let excluded = selected.len() - usable.len();
    if excluded > 0 {
        log::warn!("rate fit: {excluded} nonpositive excess values excluded");
    }
    if usable.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs two positive points, found {}",
            usable.len()
        )));
    }
    let k = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / k;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate fit needs distinct N values".into()));
    }
    let slope = sxy / sxx;
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        used: usable.len(),
        excluded,
    })
}

/// Reference curve `c N^{-1/2} (log N)^a`, scaled to pass through the first
/// point with positive excess. Returns `(N, value)` pairs.
pub fn anchored_reference(points: &[RateCurvePoint], log_power: f64) -> Vec<(usize, f64)> {
    let shape = |n: usize| (n as f64).powf(-0.5) * (n as f64).ln().powf(log_power);
    let Some(anchor) = points.iter().find(|p| p.mean_excess > 0.0) else {
        return Vec::new();
    };
    let c = anchor.mean_excess / shape(anchor.n);
    points.iter().map(|p| (p.n, c * shape(p.n))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(f: impl Fn(f64) -> f64, ns: &[usize]) -> Vec<RateCurvePoint> {
        ns.iter()
            .map(|&n| {
                let v = f(n as f64);
                RateCurvePoint {
                    n,
                    mean_excess: v,
                    ci_lower: v,
                    ci_upper: v,
                    n_reps: 1,
                }
            })
            .collect()
    }

    #[test]
    fn phi_examples() {
        assert!((phi_rate(&[1.0], &[1.0], 8.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((phi_rate(&[2.0], &[1.0], 32.0).unwrap() - 0.0625).abs() < 1e-15);
        let two = phi_rate(&[1.0, 1.0], &[1.0, 1.0], 27.0).unwrap();
        assert!((two - 27f64.powf(-2.0 / 3.0)).abs() < 1e-15);
        assert!(phi_rate(&[1.0, 2.0], &[1.0], 8.0).is_err());
    }

    #[test]
    fn exact_power_law() {
        let ns: Vec<usize> = (5..=12).map(|e| 1 << e).collect();
        let p = pts(|n| 3.0 * n.powf(-0.5), &ns);
        let fit = fit_rate(&p, 0..p.len()).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-9);
        let two = fit_rate(&p, 2..4).unwrap();
        let expect = (p[3].mean_excess.log2() - p[2].mean_excess.log2()) / 1.0;
        assert!((two.slope - expect).abs() < 1e-12);
    }

    #[test]
    fn excludes_nonpositive() {
        let mut p = pts(|n| n.powf(-1.0), &[8, 16, 32]);
        p[1].mean_excess = -0.01;
        let fit = fit_rate(&p, 0..3).unwrap();
        assert_eq!((fit.used, fit.excluded), (2, 1));
        p[2].mean_excess = 0.0;
        assert!(fit_rate(&p, 0..3).is_err());
    }
}
