//! Warm-up counts and optimal allocations for a tolerance or a budget.

use ofmlmc::estimator::{allocate_for_budget, allocate_for_tolerance, reoptimize_with_floor, Objective};
use ofmlmc::levels::{warmup_allocation, LevelHierarchy};

fn main() -> ofmlmc::Result<()> {
    let hierarchy = LevelHierarchy::geometric(4, 1.0, 4.0)?;
    println!("work per level   {:?}", hierarchy.work());
    println!("warm-up          {:?}", warmup_allocation(&hierarchy));

    let variances = [1.0, 0.2, 0.05, 0.0125];
    let work = hierarchy.term_costs();
    let tol = allocate_for_tolerance(&variances, &work, 0.01)?;
    println!(
        "tolerance 0.01   {:?} cost {:.4e} error {:.4e}",
        tol.samples, tol.cost, tol.error
    );
    let bud = allocate_for_budget(&variances, &work, 1e5)?;
    println!(
        "budget 1e5       {:?} cost {:.4e} error {:.4e}",
        bud.samples, bud.cost, bud.error
    );

    let done = [20_000, 10, 10, 10];
    let floored = reoptimize_with_floor(&done, &variances, &work, Objective::Tolerance(0.01))?;
    println!("floored at {done:?}: {:?} cost {:.4e}", floored.samples, floored.cost);
    Ok(())
}
