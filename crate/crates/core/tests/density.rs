use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use ofmlmc::statistics::{kde_1d, linspace};

fn max_error(n: usize, seed: u64) -> f64 {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let grid = linspace(-3.0, 3.0, 121);
    let est = kde_1d(&x, None, &grid).unwrap();
    grid.iter()
        .zip(&est.density)
        .map(|(g, d)| (d - (-0.5 * g * g).exp() / (2.0 * std::f64::consts::PI).sqrt()).abs())
        .fold(0.0, f64::max)
}

#[test]
fn max_error_halves_when_samples_quadruple() {
    let seeds = 0..20u64;
    let coarse: f64 = seeds.clone().map(|s| max_error(2_000, s)).sum::<f64>() / 20.0;
    let fine: f64 = seeds.map(|s| max_error(8_000, s + 100)).sum::<f64>() / 20.0;
    let ratio = fine / coarse;
    assert!((ratio - 0.5).abs() <= 0.15, "ratio {ratio}");
}

#[test]
fn estimates_integrate_to_one() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(9);
    let x: Vec<f64> = (0..500)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            3.0 + 0.2 * z
        })
        .collect();
    let est = kde_1d(&x, None, &linspace(1.5, 4.5, 200)).unwrap();
    assert!((est.integral() - 1.0).abs() <= 1e-3);
}
