//! Student-t quantiles via the regularized incomplete beta function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Gamma(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let series = LANCZOS
        .iter()
        .enumerate()
        .skip(1)
        .fold(LANCZOS[0], |acc, (i, c)| acc + c / (x + i as f64));
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + series.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=300 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let step = d * c;
        h *= step;
        if (step - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_fraction(b, a, 1.0 - x) / b
    }
}

/// CDF of Student's t with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Quantile of Student's t by bisection on the CDF, to an interval width of 1e-10.
pub fn student_t_quantile(p: f64, df: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("probability {p} outside (0, 1)")));
    }
    if !(df > 0.0) {
        return Err(Error::InvalidArgument("degrees of freedom must be positive".into()));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let target = p.max(1.0 - p);
    let mut lo = 0.0;
    let mut hi = 1.0;
    while student_t_cdf(hi, df) < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            break;
        }
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = 0.5 * (lo + hi);
    Ok(if p > 0.5 { q } else { -q })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    /// `t_{1 - alpha/2}^{(n-1)} * s / sqrt(n)`.
    pub half_width: f64,
    pub n: usize,
}

/// Student-t interval `mean +/- t * s / sqrt(n)` with `s` the unbiased sample
/// standard deviation.
pub fn confidence_interval(values: &[f64], level: f64) -> Result<ConfidenceInterval> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "confidence interval needs at least 2 values, got {n}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level {level} outside (0, 1)")));
    }
    // shifted by the first value so constant samples give an exact mean and zero width
    let x0 = values[0];
    let shift = values.iter().map(|v| v - x0).sum::<f64>() / n as f64;
    let mean = x0 + shift;
    let var = values.iter().map(|v| (v - x0 - shift).powi(2)).sum::<f64>() / (n - 1) as f64;
    let tau = (var / n as f64).sqrt();
    let t = student_t_quantile(0.5 + 0.5 * level, (n - 1) as f64)?;
    let half_width = t * tau;
    Ok(ConfidenceInterval {
        mean,
        lower: mean - half_width,
        upper: mean + half_width,
        half_width,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-13);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x; I_x(a, 1) = x^a
        assert!((regularized_incomplete_beta(1.0, 1.0, 0.3) - 0.3).abs() < 1e-13);
        assert!((regularized_incomplete_beta(2.5, 1.0, 0.4) - 0.4f64.powf(2.5)).abs() < 1e-13);
        // symmetry I_x(a, b) = 1 - I_{1-x}(b, a)
        let l = regularized_incomplete_beta(3.0, 7.0, 0.2);
        let r = 1.0 - regularized_incomplete_beta(7.0, 3.0, 0.8);
        assert!((l - r).abs() < 1e-13);
    }

    #[test]
    fn t_quantile_49() {
        let q = student_t_quantile(0.975, 49.0).unwrap();
        assert!((q - 2.0096).abs() < 1e-3, "{q}");
        // Cauchy: df = 1 has quantile tan(pi (p - 1/2))
        let c = student_t_quantile(0.9, 1.0).unwrap();
        assert!((c - (std::f64::consts::PI * 0.4).tan()).abs() < 1e-8);
        assert!((student_t_quantile(0.025, 49.0).unwrap() + q).abs() < 1e-9);
    }

    #[test]
    fn interval_cases() {
        let ci = confidence_interval(&[0.3; 10], 0.95).unwrap();
        assert_eq!((ci.mean, ci.lower, ci.upper), (0.3, 0.3, 0.3));

        let alt: Vec<f64> = (0..50).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let ci = confidence_interval(&alt, 0.95).unwrap();
        assert_eq!(ci.mean, 0.0);
        let tau = (1.0 / 50f64.sqrt()) * (50.0f64 / 49.0).sqrt();
        assert!((tau - 0.1428).abs() < 1e-4);
        let t = student_t_quantile(0.975, 49.0).unwrap();
        assert!((ci.half_width - t * tau).abs() < 1e-12);
        assert!((ci.half_width - 0.2870).abs() < 1e-3);

        assert!(confidence_interval(&[1.0], 0.95).is_err());
    }
}
