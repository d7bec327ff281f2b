//! Exports the initiation set of the first controller and the nominal
//! failure scatter, then renders both as SVG.
//!
//! Usage: `cargo run --release --example initiation_set -- [out_dir]`

use std::path::PathBuf;

use rechain::harness::{self, export, initiation};
use rechain::sim::{TaskConfig, TaskKind};

fn main() -> rechain::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "initiation_out".into()),
    );
    let cfg = TaskConfig::new(TaskKind::PickPlace2D);
    harness::write_task_exports(&dir, &cfg)?;
    let points: Vec<initiation::FailurePoint> =
        export::read_csv(&export::failure_scatter_path(&dir, cfg.task))?;
    println!(
        "{} failures, {:.1}% within {} of the top or bottom wall",
        points.len(),
        100.0 * initiation::near_wall_share(&points),
        initiation::FINGER_WIDTH
    );
    for p in export::render_plots(&dir)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
