//! Optimal control-variate coefficients against standard MLMC on exact
//! synthetic moments.

use ofmlmc::estimator::{allocate_for_tolerance, optimal_coefficients, variance_cost, weighted_variances};
use ofmlmc::models::SyntheticModel;

fn main() -> ofmlmc::Result<()> {
    for decay in [2.0, 1.0, 0.25] {
        let model = SyntheticModel::new(decay, 1.0);
        let ind = model.analytic_indicators(4);
        let of = optimal_coefficients(&ind);
        let unit = vec![1.0; 4];
        println!("decay {decay}");
        for l in 1..4 {
            println!("  corr(q_{l}, q_{}) = {:.3}", l - 1, model.correlation(l));
        }
        println!(
            "  alpha            {:?}",
            of.alpha.iter().map(|a| format!("{a:.4}")).collect::<Vec<_>>()
        );
        println!(
            "  variance x cost  OF {:.4e}  MLMC {:.4e}",
            variance_cost(&ind, &of.alpha),
            variance_cost(&ind, &unit)
        );

        let tol = 0.01;
        let a = allocate_for_tolerance(&weighted_variances(&ind, &of.alpha)?.values, &ind.work, tol)?;
        let b = allocate_for_tolerance(&weighted_variances(&ind, &unit)?.values, &ind.work, tol)?;
        println!("  tolerance {tol}: OF {:?} cost {:.4e}", a.samples, a.cost);
        println!("  tolerance {tol}: MLMC {:?} cost {:.4e}", b.samples, b.cost);
    }
    Ok(())
}
