//! Plug-in classifier against the Bayes oracle on one test set.
//!
//! cargo run --release --example plug_in_vs_bayes -- [theta] [train_size]

use driftclass::prelude::*;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let theta: f64 = args.next().map_or(4.0, |s| s.parse().expect("theta"));
    let n: usize = args.next().map_or(1000, |s| s.parse().expect("train size"));
    let spec = ModelSpec::cosine_squared(theta)?;
    let key = SeedKey::new(11);
    let train = generate_dataset(&spec, ClassSizes::Multinomial(n), 100, 1.0, key.child(tag::TRAIN))?;
    let test = generate_dataset(&spec, ClassSizes::Multinomial(2000), 100, 1.0, key.child(tag::TEST))?;

    let estimators = (0..spec.num_classes())
        .map(|k| {
            let cfg = TrainConfig {
                seed: key.path(&[tag::INIT, k as u64]).raw(),
                ..TrainConfig::default()
            };
            train_drift_estimator(train.class(k), k, &DriftArchitecture::default(), &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let plug_in = PlugInClassifier::from_estimators(&spec, estimators, train.empirical_priors())?;
    let oracle = bayes_oracle(&spec)?;

    let ours = misclassification_risk(&plug_in, &test)?;
    let best = misclassification_risk(&oracle, &test)?;
    println!(
        "theta {theta}, N = {n}: plug-in {:.4}, Bayes {:.4}, excess {:+.4}",
        ours.error_rate,
        best.error_rate,
        excess_risk(&ours, &best)
    );
    println!("confusion (rows true, columns predicted):");
    for row in &ours.confusion {
        println!("  {row:?}");
    }

    let path = &test.class(0)[0];
    println!(
        "first class-0 test path: plug-in posteriors {:.3?}, oracle {:.3?}",
        plug_in.posteriors(path)?.0,
        oracle.posteriors(path)?.0
    );
    Ok(())
}
