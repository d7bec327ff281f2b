//! Trains the pretrained-precondition model and reports how often it
//! accepts raw failure states.

use rechain::baselines::{PpModel, PP_DATASET_SIZES};
use rechain::discovery::discover_failures;
use rechain::sim::{TaskConfig, TaskKind};

fn main() -> rechain::Result<()> {
    let cfg = TaskConfig::new(TaskKind::PickPlace2D);
    let failures = discover_failures(&cfg, 5000, 0, Some(200))?;
    for n in PP_DATASET_SIZES {
        let model = PpModel::train(&cfg, n, 11)?;
        let accepted = failures
            .records
            .iter()
            .filter(|r| model.accepts(&r.observation.features(cfg.task)))
            .count();
        println!(
            "n = {n}: accepts {accepted} of {} raw failures",
            failures.len()
        );
    }
    Ok(())
}
