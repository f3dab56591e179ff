//! Random cavity clouds: gas fraction, interaction parameter and skewness.
//!
//! Writes the first cloud to `cloud.csv` in the working directory.

use ofmlmc::models::{generate_cloud, CloudParams};
use ofmlmc::rng::SampleStream;

fn main() -> ofmlmc::Result<()> {
    let params = CloudParams::default();
    let mut fractions = Vec::new();
    for seed in 0..20 {
        let cloud = generate_cloud(&SampleStream::for_sample(seed, 0, 0), &params)?;
        if seed == 0 {
            std::fs::write("cloud.csv", cloud.to_csv()).expect("write cloud.csv");
        }
        println!(
            "seed {seed:>2}  cavities {}  gas fraction {:.4}  beta {:>7.2}  skewness {:+.3?}  violations {}",
            cloud.len(),
            cloud.gas_fraction,
            cloud.beta,
            cloud.skewness,
            cloud.violations(params.r_min, params.r_max).len()
        );
        fractions.push(cloud.gas_fraction);
    }
    let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
    println!("mean gas fraction {mean:.4}");
    Ok(())
}
