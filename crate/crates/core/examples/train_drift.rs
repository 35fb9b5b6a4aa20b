//! Fits one sparse network per drift coordinate and compares it with the truth.
//!
//! cargo run --release --example train_drift -- [paths_per_class]

use driftclass::prelude::*;

fn main() -> Result<()> {
    let n: usize = std::env::args().nth(1).map_or(256, |s| s.parse().expect("paths"));
    let spec = ModelSpec::double_layer(1, 5.0)?;
    let key = SeedKey::new(3);
    let train = generate_dataset(&spec, ClassSizes::PerClass(n), 100, 1.0, key.child(tag::TRAIN))?;
    let test = generate_dataset(&spec, ClassSizes::PerClass(200), 100, 1.0, key.child(tag::TEST))?;

    for k in 0..spec.num_classes() {
        let cfg = TrainConfig {
            seed: key.path(&[tag::INIT, k as u64]).raw(),
            ..TrainConfig::default()
        };
        let est = train_drift_estimator(train.class(k), k, &DriftArchitecture::default(), &cfg)?;
        let meta = &est.meta[0];
        let fitted = DriftEvaluator::estimated(est.clone());
        let err = estimation_error(&fitted, &DriftEvaluator::truth(&spec, k)?, &test, Condition::Class(k))?;
        println!(
            "class {k}: stopped at epoch {}, refit {} epochs, {} of {} weights nonzero, error {err:.4}",
            meta.stop_epoch,
            meta.refit_epochs,
            est.nets[0].nonzero_count(),
            est.nets[0].params().len()
        );
        let grid: Vec<String> = [-2.0, -1.0, 0.0, 1.0, 2.0]
            .iter()
            .map(|&x| {
                Ok(format!(
                    "{x:+}: {:+.2}/{:+.2}",
                    fitted.eval(&[x])?[0],
                    spec.eval_drift(k, &[x])?[0]
                ))
            })
            .collect::<Result<_>>()?;
        println!("  estimate/truth  {}", grid.join("  "));
    }
    Ok(())
}
