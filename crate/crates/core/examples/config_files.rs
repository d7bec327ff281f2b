//! Round-trips task and experiment configs through TOML and prints them.

use rechain::harness::ExperimentConfig;
use rechain::sim::{TaskConfig, TaskKind};

fn main() -> rechain::Result<()> {
    for task in TaskKind::ALL {
        let cfg = TaskConfig::new(task);
        let text = cfg.to_toml();
        assert_eq!(TaskConfig::from_toml(&text)?, cfg);
        println!("# {task} (hash {})\n{text}", cfg.hash());
    }
    let exp = ExperimentConfig::default().paper_scale();
    println!("{}", exp.to_toml()?);
    Ok(())
}
