//! Risk table for the cosine-squared family over the four signal strengths.
//!
//! cargo run --release --example table1 -- [repetitions] [out_dir]

use driftclass::harness::{run_experiment, ExperimentConfig, Method};

fn main() -> driftclass::Result<()> {
    let reps: usize = std::env::args().nth(1).map_or(5, |s| s.parse().expect("repetitions"));
    let mut cfg = ExperimentConfig::example2(vec![0.5, 1.5, 2.5, 4.0]);
    cfg.repetitions = reps;
    cfg.out_dir = std::env::args().nth(2).map(Into::into);
    cfg.validate()?;
    let report = run_experiment(&cfg)?;

    println!("{:<10} {:>6} {:>18} {:>18}", "scenario", "N", "plug-in", "Bayes");
    for sc in &report.scenarios {
        for &n in &cfg.train_sizes {
            let cell = |m| {
                report.row(sc, n, m).map_or(String::from("-"), |r| {
                    format!("{:.3} [{:.3}, {:.3}]", r.risk.mean, r.risk.ci_lower, r.risk.ci_upper)
                })
            };
            println!(
                "{sc:<10} {n:>6} {:>18} {:>18}",
                cell(Method::PlugIn),
                cell(Method::Bayes)
            );
        }
    }
    println!(
        "{} repetitions, {:.0}s",
        report.n_ok,
        report.wall_time_s.unwrap_or(f64::NAN)
    );
    Ok(())
}
