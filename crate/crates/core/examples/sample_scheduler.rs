//! Executing a batch plan on a worker pool with per-sample sandboxes.

use ofmlmc::levels::LevelHierarchy;
use ofmlmc::models::{FaultyModel, SyntheticModel};
use ofmlmc::scheduler::{BatchPlan, CampaignStore, Executor, Ledger, SampleKey};

fn main() -> ofmlmc::Result<()> {
    let root = tempfile::tempdir().expect("temporary store");
    let store = CampaignStore::create(root.path(), "scheduler-demo", "")?;
    let model = FaultyModel::new(SyntheticModel::new(1.0, 1.0), 0.1)?;
    let hierarchy = LevelHierarchy::geometric(3, 1.0, 4.0)?;

    let keys = (0..3).flat_map(|l| (0..8).map(move |i| SampleKey::new(l, i)));
    let plan = BatchPlan::batched(keys, 4);
    let mut ledger = Ledger::new();
    let mut executor = Executor::new(&model, &hierarchy, 9).with_workers(4).with_store(&store);
    let summary = executor.execute_plan(&plan, &mut ledger)?;
    println!("{summary:?}");
    for l in 0..3 {
        println!(
            "level {l}: done {} failed {}",
            ledger.done_count(l),
            ledger.failed_count(l)
        );
    }

    let again = executor.execute_plan(&plan, &mut ledger)?;
    println!("second pass skipped {} recorded samples", again.skipped);
    let (reloaded, _) = store.load_ledger()?;
    println!("ledger on disk holds {} entries", reloaded.len());
    println!(
        "sandbox of (1, 3): {}",
        store.sandbox_dir(&SampleKey::new(1, 3)).display()
    );
    Ok(())
}
