use rechain::baselines::{collect_pp_dataset, PpModel};
use rechain::discovery::{discover_failures, HELD_OUT_SEED_BASE};
use rechain::ppo::PolicyNetwork;
use rechain::rc_mdp::{recover, Execution};
use rechain::seeding;
use rechain::sim::{TaskConfig, TaskKind};

#[test]
fn pp_rejects_raw_pick_place_failures() {
    let cfg = TaskConfig::new(TaskKind::PickPlace2D);
    let failures = discover_failures(&cfg, 5000, HELD_OUT_SEED_BASE, Some(200)).unwrap();
    for seed in 0..3 {
        let model = PpModel::train(&cfg, 400, seeding::derive_seed(seed, "pp-model")).unwrap();
        let rejected = failures
            .records
            .iter()
            .filter(|r| !model.accepts(&r.observation.features(cfg.task)))
            .count();
        assert!(
            rejected as f64 >= 0.9 * failures.len() as f64,
            "seed {seed}: rejected {rejected} of {}",
            failures.len()
        );
    }
}

#[test]
fn pp_dataset_has_both_labels_for_every_controller() {
    for task in TaskKind::ALL {
        let cfg = TaskConfig::new(task);
        let d = collect_pp_dataset(&cfg, 60, 4).unwrap();
        for i in 1..=rechain::skills::plan(task).len() {
            let labels: Vec<bool> = d
                .iter()
                .filter(|s| s.skill_index == i)
                .map(|s| s.success)
                .collect();
            assert!(
                labels.iter().any(|&y| y),
                "{task} controller {i}: no positives"
            );
            assert!(
                labels.iter().any(|&y| !y),
                "{task} controller {i}: no negatives"
            );
        }
    }
}

#[test]
fn pretrained_execution_runs_the_accepted_suffix() {
    // A zero network is uniform; argmax picks the first primitive, so every
    // attempt either reaches an accepted state or runs out the horizon.
    let cfg = TaskConfig::new(TaskKind::PickPlace2D);
    let failures = discover_failures(&cfg, 500, 0, Some(10)).unwrap();
    let model = PpModel::train(&cfg, 50, 1).unwrap();
    let net = {
        let mut n = PolicyNetwork::new(9, 6, &[4], &mut seeding::stream(0, "zero"));
        let zeros = vec![0.0; n.param_count()];
        n.set_params(&zeros);
        n
    };
    for r in &failures.records {
        let a = recover(&cfg, &net, r, Execution::Pretrained(&model)).unwrap();
        let b = recover(&cfg, &net, r, Execution::Pretrained(&model)).unwrap();
        assert_eq!(a, b);
        if let Some(i) = a.option {
            assert!((1..=4).contains(&i));
        }
    }
}
