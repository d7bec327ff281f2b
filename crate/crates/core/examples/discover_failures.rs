//! Collects nominal failures on each task and replays the first one.

use rechain::discovery::{discover_failures, reset_to_failure};
use rechain::sim::{TaskConfig, TaskKind};

fn main() -> rechain::Result<()> {
    for task in TaskKind::ALL {
        let cfg = TaskConfig::new(task);
        let ds = discover_failures(&cfg, 2000, 0, Some(20))?;
        let first = &ds.records[0];
        let (state, _) = reset_to_failure(&cfg, first)?;
        println!(
            "{task}: {} failures in {} episodes (nominal {:.3}); first at seed {} in controller {} ({:?}), hand at ({:.3}, {:.3})",
            ds.len(),
            ds.header.episodes_run,
            ds.nominal_rate(),
            first.seed,
            first.plan_skill_index,
            first.failure_kind,
            state.ee_pose.center.a,
            state.ee_pose.center.b,
        );
    }
    Ok(())
}
