//! Pathwise network classifier that ignores the diffusion structure, next to
//! the plug-in rule on the same data.
//!
//! cargo run --release --example direct_baseline -- [paths_per_class]

use driftclass::prelude::*;

fn main() -> Result<()> {
    let n: usize = std::env::args().nth(1).map_or(256, |s| s.parse().expect("paths"));
    let spec = ModelSpec::double_layer(1, 5.0)?;
    let key = SeedKey::new(5);
    let train = generate_dataset(&spec, ClassSizes::PerClass(n), 100, 1.0, key.child(tag::TRAIN))?;
    let test = generate_dataset(&spec, ClassSizes::PerClass(500), 100, 1.0, key.child(tag::TEST))?;

    let direct = train_direct_classifier(
        &train,
        &DirectConfig {
            seed: key.child(tag::DIRECT).raw(),
            ..DirectConfig::default()
        },
    )?;
    for t in &direct.trials {
        println!(
            "trial {:?}: validation accuracy {:.3} at epoch {}",
            t.hyper, t.best_val_accuracy, t.best_epoch
        );
    }
    println!("selected {:?}", direct.selected.hyper);

    let estimators = (0..spec.num_classes())
        .map(|k| {
            let cfg = TrainConfig {
                seed: key.path(&[tag::INIT, k as u64]).raw(),
                ..TrainConfig::default()
            };
            train_drift_estimator(train.class(k), k, &DriftArchitecture::default(), &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let plug_in = PlugInClassifier::from_estimators(&spec, estimators, spec.priors().to_vec())?;

    let d = misclassification_risk(&direct, &test)?.error_rate;
    let p = misclassification_risk(&plug_in, &test)?.error_rate;
    let b = misclassification_risk(&bayes_oracle(&spec)?, &test)?.error_rate;
    println!("test error: direct {d:.4}, plug-in {p:.4}, Bayes {b:.4}");
    Ok(())
}
