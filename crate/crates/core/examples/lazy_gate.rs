//! Feeds option outcomes to a lazy gate until it starts skipping rollouts.
//! States are failure states with the hand moved by a random offset, so
//! some options succeed from them.

use std::sync::Arc;

use rand::Rng;
use rechain::discovery::discover_failures;
use rechain::geometry::Vec2;
use rechain::lazy::{GateDecision, LazyGate, RETRAIN_EVERY};
use rechain::rc_mdp::mc_precondition;
use rechain::seeding;
use rechain::sim::{self, TaskConfig, TaskKind};
use rechain::skills;

fn main() -> rechain::Result<()> {
    let cfg = TaskConfig::new(TaskKind::PickPlace2D);
    let records = Arc::new(discover_failures(&cfg, 3000, 0, Some(100))?.records);
    let options = skills::plan(cfg.task).len();
    let mut gate = LazyGate::new(options, 3);
    let mut rollouts = 0;
    let mut lazy = 0;
    let mut rng = seeding::stream(3, "example-offsets");
    for update in 1..=40 {
        for (j, r) in records.iter().enumerate() {
            let i = 1 + (j + update) % options;
            let d = Vec2::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
            let state =
                sim::displace(&cfg, &r.world_state, d).unwrap_or_else(|| r.world_state.clone());
            let f = sim::observe(&cfg, &state).features(cfg.task);
            match gate.gate(i, &f) {
                GateDecision::LazyPositive => lazy += 1,
                GateDecision::DoRollout { confident } => {
                    rollouts += 1;
                    let ok = mc_precondition(&cfg, &state, i)? == 1;
                    gate.record(i, f, ok, confident)?;
                }
            }
        }
        gate.on_policy_update(update);
        if update % RETRAIN_EVERY == 0 {
            let enabled: Vec<bool> = gate.classifiers.iter().map(|c| c.enabled).collect();
            println!("update {update}: enabled {enabled:?}, rollouts {rollouts}, lazy {lazy}");
        }
    }
    println!(
        "audit {:?} precision {:?}",
        gate.audit,
        gate.audit.precision()
    );
    Ok(())
}
