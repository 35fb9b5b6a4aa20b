//! Student-t intervals over repetitions and the composite smoothness rate.

use driftclass::metrics::{student_t_quantile, RateCurvePoint};
use driftclass::prelude::*;

fn main() -> Result<()> {
    for df in [1.0, 4.0, 19.0, 49.0, 99.0] {
        println!("t_0.975 with {df:>3} df: {:.4}", student_t_quantile(0.975, df)?);
    }

    // Bayes error of one model over 20 independent test sets.
    let spec = ModelSpec::cosine_squared(2.5)?;
    let oracle = bayes_oracle(&spec)?;
    let risks = (0..20u64)
        .map(|r| {
            let test = generate_dataset(&spec, ClassSizes::Multinomial(500), 100, 1.0, SeedKey::new(r))?;
            Ok(misclassification_risk(&oracle, &test)?.error_rate)
        })
        .collect::<Result<Vec<f64>>>()?;
    let ci = confidence_interval(&risks, 0.95)?;
    println!(
        "Bayes error over {} test sets: {:.4} [{:.4}, {:.4}]",
        ci.n, ci.mean, ci.lower, ci.upper
    );

    let betas = [1.0, 2.0];
    let ts = [1.0, 1.0];
    let points: Vec<RateCurvePoint> = (6..14)
        .map(|e| {
            let n = 1usize << e;
            let v = phi_rate(&betas, &ts, n as f64).unwrap();
            RateCurvePoint {
                n,
                mean_excess: v,
                ci_lower: v,
                ci_upper: v,
                n_reps: 1,
            }
        })
        .collect();
    let fit = fit_rate(&points, 4..8)?;
    println!("phi_N for beta = {betas:?}, t = {ts:?}: log-log slope {:.3}", fit.slope);
    Ok(())
}
