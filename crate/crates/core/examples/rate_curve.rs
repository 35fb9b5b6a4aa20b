//! Excess risk against training size for the double-layer model, with the
//! fitted log-log slope and the `N^{-1/2} (log N)^a` reference curves.
//!
//! cargo run --release --example rate_curve -- [dim] [repetitions] [max_log2_n]

use driftclass::harness::{run_experiment, ExperimentConfig, Method};
use driftclass::metrics::anchored_reference;

fn main() -> driftclass::Result<()> {
    let mut args = std::env::args().skip(1);
    let dim: usize = args.next().map_or(1, |s| s.parse().expect("dim"));
    let reps: usize = args.next().map_or(3, |s| s.parse().expect("repetitions"));
    let top: u32 = args.next().map_or(10, |s| s.parse().expect("max log2 N"));

    let mut cfg = ExperimentConfig::example1(vec![dim]);
    cfg.repetitions = reps;
    cfg.train_sizes = (5..=top).map(|e| 1usize << e).collect();
    cfg.bayes_reference = driftclass::harness::BayesReference::Dedicated { paths: 10_000 };
    cfg.validate()?;
    let report = run_experiment(&cfg)?;

    let label = &report.scenarios[0];
    let curve: Vec<_> = report.curve(label, Method::PlugIn).iter().map(|r| r.point).collect();
    let a15 = anchored_reference(&curve, 1.5);
    println!("{:>6} {:>10} {:>22} {:>12}", "N", "excess", "95% CI", "ref a=1.5");
    for (p, r) in curve.iter().zip(&a15) {
        println!(
            "{:>6} {:>10.4} [{:>9.4}, {:>9.4}] {:>12.4}",
            p.n, p.mean_excess, p.ci_lower, p.ci_upper, r.1
        );
    }
    if let Some(slope) = report.fit(label, Method::PlugIn).and_then(|f| f.slope) {
        println!("log2-log2 slope over the largest {} sizes: {slope:.3}", cfg.fit_window);
    }
    Ok(())
}
