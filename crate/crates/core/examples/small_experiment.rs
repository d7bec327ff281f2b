//! A short end-to-end comparison on pick-place: every method, one seed,
//! 6000 timesteps. Writes the full output directory and checks it.
//!
//! Usage: `cargo run --release --example small_experiment -- [out_dir]`

use std::path::PathBuf;

use rechain::harness::{self, criteria, ExperimentConfig, Method};
use rechain::sim::{TaskConfig, TaskKind};

fn main() -> rechain::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "small_out".into()),
    );
    let mut exp = ExperimentConfig {
        seeds: vec![0],
        ..ExperimentConfig::default()
    };
    exp.ppo.total_timesteps = 6000;
    exp.curve_every = 10;
    let data = harness::load_tasks(&[TaskConfig::new(TaskKind::PickPlace2D)], &exp, None)?;
    let out = harness::run_all(
        &dir,
        &data,
        &Method::ALL,
        &exp,
        false,
        harness::default_threads(),
    )?;
    for row in &out.rows {
        println!(
            "{:<8} {:<11} success {:>5.1}%  recovery {:.3}  rollout steps {:.0}",
            row.label,
            row.task.name(),
            row.mean_success,
            row.mean_recovery,
            row.mean_sim_steps
        );
    }
    // Short runs are not expected to pass; this shows the report format.
    for check in criteria::check_outputs(&dir)? {
        println!("{check}");
    }
    Ok(())
}
