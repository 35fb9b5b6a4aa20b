//! Euler-Maruyama paths for the cosine-squared model and a saved dataset.
//!
//! cargo run --release --example simulate_paths -- [theta] [out_dir]

use driftclass::prelude::*;
use driftclass::sde::write_dataset;

fn main() -> Result<()> {
    let theta: f64 = std::env::args().nth(1).map_or(2.5, |s| s.parse().expect("theta"));
    let spec = ModelSpec::cosine_squared(theta)?;
    let data = generate_dataset(&spec, ClassSizes::Multinomial(600), 100, 1.0, SeedKey::new(1))?;
    println!(
        "theta = {theta}: {} paths, class counts {:?}",
        data.len(),
        data.counts()
    );

    for k in 0..data.num_classes() {
        let ends: Vec<f64> = data.class(k).iter().map(|p| p.state(p.steps())[0]).collect();
        let mean = ends.iter().sum::<f64>() / ends.len() as f64;
        let var = ends.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (ends.len() - 1) as f64;
        println!("class {k}: X_1 mean {mean:+.3}, variance {var:.3}");
    }

    let first = &data.class(0)[0];
    let shown: Vec<String> = first.rows().step_by(20).map(|x| format!("{:+.3}", x[0])).collect();
    println!("a class-0 path every 20 steps: {}", shown.join(" "));

    if let Some(dir) = std::env::args().nth(2) {
        std::fs::create_dir_all(&dir).expect("create output directory");
        let (csv, json) = write_dataset(&data, &std::path::Path::new(&dir).join("paths"), None)?;
        println!("wrote {} and {}", csv.display(), json.display());
    }
    Ok(())
}
