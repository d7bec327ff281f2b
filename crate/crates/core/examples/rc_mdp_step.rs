//! Steps the recovery MDP by hand: a few primitives, then each option.

use std::sync::Arc;

use rechain::discovery::discover_failures;
use rechain::rc_mdp::{RcAction, RcEnv, Variant};
use rechain::sim::{Primitive, TaskConfig, TaskKind};
use rechain::skills;

fn main() -> rechain::Result<()> {
    let cfg = TaskConfig::new(TaskKind::PickPlace2D);
    let ds = discover_failures(&cfg, 500, 0, Some(10))?;
    let mut env = RcEnv::new(cfg, Arc::new(ds.records), Variant::Rc, 7)?;
    println!("actions: {:?}", env.actions());

    let (k, obs) = env.rc_reset()?;
    println!(
        "record {k}: hand {:?}, object {:?}",
        obs.ee_position, obs.observed_object_position
    );
    for p in [
        Primitive::TranslateMinusB,
        Primitive::TranslatePlusB,
        Primitive::RotatePlus,
    ] {
        let r = env.rc_step(RcAction::Primitive(p))?;
        println!(
            "{p:?}: reward {} done {} {:?}",
            r.reward, r.done, r.terminal_kind
        );
        if r.done {
            break;
        }
    }

    for i in 1..=skills::plan(TaskKind::PickPlace2D).len() {
        env.reset_to(k)?;
        let r = env.rc_step(RcAction::NominalOption(i))?;
        println!(
            "option {i} ({}): reward {} after {} simulated steps",
            skills::plan(TaskKind::PickPlace2D)[i - 1].name(),
            r.reward,
            r.info.rollout_steps_used
        );
    }
    Ok(())
}
