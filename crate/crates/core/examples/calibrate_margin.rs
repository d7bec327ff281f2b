//! Sweeps the pick-place wall margin and prints nominal success per margin.

use rechain::harness::calibrate::{self, CALIBRATION_EPISODES, TARGET_RATE, TOLERANCE};
use rechain::sim::{TaskConfig, TaskKind};

fn main() -> rechain::Result<()> {
    let base = TaskConfig::new(TaskKind::PickPlace2D);
    let margins = calibrate::margin_grid(0.06, 6);
    let report = calibrate::calibrate(
        &base,
        &margins,
        CALIBRATION_EPISODES,
        TARGET_RATE,
        TOLERANCE,
    )?;
    for r in &report.sweep {
        println!("margin {:.3}  success {:.3}", r.wall_margin, r.success_rate);
    }
    match report.selected {
        Some(r) => println!(
            "selected margin {:.3} ({:.3})",
            r.wall_margin, r.success_rate
        ),
        None => println!("no margin within {TOLERANCE} of {TARGET_RATE}"),
    }
    Ok(())
}
