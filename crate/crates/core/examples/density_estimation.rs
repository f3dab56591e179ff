//! Post-processing estimators on synthetic data: solve-the-equation KDE,
//! multi-level density, joint density, correlations, smoothing and bands.

use ofmlmc::statistics::{
    confidence_bands, correlation_matrix, density_grid, gaussian_smooth, kde_1d, kde_2d, linspace, multilevel_density,
    DensityTerm, LevelSeries,
};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal, StandardNormal};

fn main() -> ofmlmc::Result<()> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(1);
    let x: Vec<f64> = (0..20_000).map(|_| StandardNormal.sample(&mut rng)).collect();

    let grid = linspace(-4.0, 4.0, 161);
    let kde = kde_1d(&x, None, &grid)?;
    let sup = grid
        .iter()
        .zip(&kde.density)
        .map(|(g, d)| (d - (-0.5 * g * g).exp() / (2.0 * std::f64::consts::PI).sqrt()).abs())
        .fold(0.0, f64::max);
    println!(
        "kde: bandwidth {:.4} ({:?}), sup error {sup:.4}, integral {:.6}",
        kde.bandwidth[0],
        kde.method,
        kde.integral()
    );

    // two-level density of q_1 = X + 0.1 Z with q_0 = X as coarse partner
    let coarse: Vec<f64> = x[..2_000].to_vec();
    let fine: Vec<f64> = coarse
        .iter()
        .map(|v| v + 0.1 * Normal::new(0.0, 1.0).unwrap().sample(&mut rng))
        .collect();
    let terms = vec![
        DensityTerm {
            fine: x.clone(),
            coarse: vec![],
        },
        DensityTerm {
            fine: fine.clone(),
            coarse,
        },
    ];
    let ml = multilevel_density(&terms, &[1.0, 1.0], &density_grid(&x, 0.2, 161))?;
    println!(
        "multi-level: clamped fraction {:.4}, integral {:.6}",
        ml.clamped_fraction,
        ml.integral()
    );

    let y: Vec<f64> = x
        .iter()
        .map(|v| 2.0 * v + Normal::new(0.0, 0.5).unwrap().sample(&mut rng))
        .collect();
    let joint = kde_2d(
        &x[..5_000],
        &y[..5_000],
        &linspace(-4.0, 4.0, 64),
        &linspace(-9.0, 9.0, 64),
    )?;
    println!(
        "joint: bandwidths {:.3?}, integral {:.6}",
        joint.bandwidth,
        joint.integral()
    );

    let c = correlation_matrix(&[
        ("x".into(), x.clone()),
        ("y".into(), y),
        ("z".into(), x.iter().map(|v| -v).collect()),
    ])?;
    print!("correlations\n{}", c.to_csv());

    let noisy: Vec<f64> = (0..256).map(|k| (k as f64 / 20.0).sin() + 0.3 * x[k]).collect();
    let smooth = gaussian_smooth(&noisy, 4.0);
    println!(
        "smoothing: raw [{:.3}, {:.3}] smoothed [{:.3}, {:.3}]",
        noisy[10], noisy[11], smooth[10], smooth[11]
    );

    let traces: Vec<Vec<f64>> = x.chunks(4).take(1000).map(|c| c.to_vec()).collect();
    let bands = confidence_bands(
        &[LevelSeries {
            fine: traces,
            coarse: vec![],
        }],
        &[1.0],
        &[0.0, 1.0, 2.0, 3.0],
    )?;
    println!(
        "bands at t=0: 90% [{:.3}, {:.3}], median {:.3}",
        bands.lower90[0], bands.upper90[0], bands.median[0]
    );
    Ok(())
}
