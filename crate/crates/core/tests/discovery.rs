use proptest::prelude::*;
use rechain::discovery::{discover_failures, reset_to_failure, FailureDataset, HELD_OUT_SEED_BASE};
use rechain::sim::{self, Primitive, TaskConfig, TaskKind, Terminal};
use rechain::skills::{self, Outcome};

#[test]
fn failures_replay_from_their_seed() {
    for task in TaskKind::ALL {
        let cfg = TaskConfig::new(task);
        let ds = discover_failures(&cfg, 400, 0, Some(15)).unwrap();
        assert_eq!(ds.len(), 15);
        assert!(ds.header.nominal_successes + ds.len() as u64 <= ds.header.episodes_run);
        for r in &ds.records {
            let (state, _) = sim::reset(&cfg, r.seed).unwrap();
            let trace = skills::execute_suffix(&cfg, &state, 1).unwrap();
            assert_eq!(trace.outcome, Outcome::Failure);
            assert_eq!(trace.failure_record.as_ref(), Some(r));
            let (s, o) = reset_to_failure(&cfg, r).unwrap();
            assert_eq!(s, r.world_state);
            assert_eq!(o, r.observation);
        }
    }
}

#[test]
fn datasets_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    for task in TaskKind::ALL {
        let cfg = TaskConfig::new(task);
        let ds = discover_failures(&cfg, 400, 0, Some(25)).unwrap();
        let path = dir.path().join(format!("{task}.jsonl"));
        ds.save(&path).unwrap();
        let back = FailureDataset::load(&path, &cfg).unwrap();
        assert_eq!(back, ds);
        for (a, b) in back.records.iter().zip(&ds.records) {
            let fa: Vec<u64> = a
                .observation
                .features(task)
                .iter()
                .map(|x| x.to_bits())
                .collect();
            let fb: Vec<u64> = b
                .observation
                .features(task)
                .iter()
                .map(|x| x.to_bits())
                .collect();
            assert_eq!(fa, fb);
            reset_to_failure(&cfg, a).unwrap();
        }
    }
}

#[test]
fn held_out_seeds_are_disjoint_from_training() {
    let cfg = TaskConfig::new(TaskKind::PickPlace2D);
    let train = discover_failures(&cfg, 5000, 0, Some(100)).unwrap();
    let held = discover_failures(&cfg, 5000, HELD_OUT_SEED_BASE, Some(200)).unwrap();
    assert_eq!(held.len(), 200);
    assert!(train.records.iter().all(|r| r.seed < HELD_OUT_SEED_BASE));
    assert!(held.records.iter().all(|r| r.seed >= HELD_OUT_SEED_BASE));
}

#[test]
fn pick_place_objects_start_inside_the_sampling_range() {
    let cfg = TaskConfig::new(TaskKind::PickPlace2D);
    let (lo, hi) = cfg.pick_place.sampling_range();
    for seed in 0..500 {
        let (s, _) = sim::reset(&cfg, seed).unwrap();
        let c = s.object_pose.center;
        assert!(
            lo.a <= c.a && c.a <= hi.a && lo.b <= c.b && c.b <= hi.b,
            "seed {seed}: {c:?}"
        );
        assert_eq!(s, sim::reset(&cfg, seed).unwrap().0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn random_primitives_keep_the_state_well_formed(
        task in prop::sample::select(TaskKind::ALL.to_vec()),
        seed in 0u64..10_000,
        moves in prop::collection::vec(0usize..6, 1..60),
    ) {
        let cfg = TaskConfig::new(task);
        let (mut s, _) = sim::reset(&cfg, seed).unwrap();
        let prims: &[Primitive] = task.primitives();
        for m in moves {
            let p = prims[m % prims.len()];
            let out = sim::step(&cfg, &s, p).unwrap();
            prop_assert_eq!(&out, &sim::step(&cfg, &s, p).unwrap());
            prop_assert_eq!(out.failure_kind.is_some(), out.terminal == Terminal::Failure);
            prop_assert_eq!(out.next.step_count, s.step_count + 1);
            prop_assert_eq!(&out.observation, &sim::observe(&cfg, &out.next));
            if out.terminal != Terminal::None {
                break;
            }
            prop_assert!(out.next.is_well_formed(&cfg));
            s = out.next;
        }
    }
}
