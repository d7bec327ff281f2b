//! Side-view shelf placement, with optional clutter on the shelf.
//!
//! The hand passes through the box while ungrasped (the open fingers
//! straddle it). Releasing the box levels it and drops it straight down onto
//! the highest support under its footprint.

use rand::Rng;

use super::{
    FailureKind, Obstacle, Scene, ShelfLayout, SimAction, TaskConfig, TaskKind, WorldState,
};
use crate::geometry::{normalize_angle, Rect, Vec2, CONTACT_EPS};
use crate::seeding;

pub(super) fn reset(cfg: &TaskConfig, seed: u64, noise: Vec2) -> WorldState {
    let g = &cfg.shelf;
    let c = &cfg.clutter;
    let cluttered = cfg.task == TaskKind::ClutteredShelf2D;
    let mut rng = seeding::stream(seed, "shelf-geometry");
    let mut draw = |r: (f64, f64)| rng.random_range(r.0..=r.1);
    let front = draw(g.shelf_front);
    let floor = draw(g.shelf_floor);
    let depth = draw(if cluttered {
        c.shelf_depth
    } else {
        g.shelf_depth
    });
    let clearance = draw(g.opening_clearance);
    let w = draw(g.box_width);
    let h = draw(g.box_height);
    let box_a = draw(g.box_position);
    let opening = h + clearance;
    let target = Vec2::new(front + 0.5 * depth, floor + 0.5 * h);

    let t = g.board_thickness;
    let back = front + depth;
    let walls = vec![
        Rect::from_bounds(g.table_extent.0, -0.05, g.table_extent.1, 0.0),
        Rect::from_bounds(front, 0.0, back + t, floor),
        Rect::from_bounds(front, floor + opening, back + t, floor + opening + t),
        Rect::from_bounds(back, floor, back + t, floor + opening),
    ];

    let mut obstacles = Vec::new();
    if cluttered {
        let (bh, bg) = (draw(c.back_height), draw(c.back_gap));
        let (fh, fg) = (draw(c.front_height), draw(c.front_gap));
        let back_a = target.a + 0.5 * w + bg;
        let front_a = target.a - 0.5 * w - fg;
        obstacles.push(Obstacle::new(Rect::from_bounds(
            back_a,
            floor,
            back_a + c.back_width,
            floor + bh,
        )));
        obstacles.push(Obstacle::new(Rect::from_bounds(
            front_a - c.front_width,
            floor,
            front_a,
            floor + fh,
        )));
    }

    WorldState {
        ee_pose: Rect::new(g.hand_home, g.hand_half_extents),
        ee_yaw: 0,
        object_pose: Rect::new(Vec2::new(box_a, 0.5 * h), Vec2::new(0.5 * w, 0.5 * h)),
        grasped: false,
        grasp_offset: Vec2::ZERO,
        object_angle_in_hand: 0.0,
        obstacles,
        step_count: 0,
        episode_seed: seed,
        observation_noise: noise,
        scene: Scene {
            walls,
            shelf: Some(ShelfLayout {
                front,
                floor,
                depth,
                opening,
                box_size: Vec2::new(w, h),
                target,
            }),
        },
    }
}

pub(super) fn layout(s: &WorldState) -> &ShelfLayout {
    s.scene.shelf.as_ref().expect("shelf scene has a layout")
}

fn in_workspace(cfg: &TaskConfig, p: Vec2) -> bool {
    let g = &cfg.shelf;
    p.a >= g.workspace_min.a
        && p.a <= g.workspace_max.a
        && p.b >= g.workspace_min.b
        && p.b <= g.workspace_max.b
}

/// Hand, plus the box when it is carried.
fn moving_bodies(s: &WorldState) -> Vec<Rect> {
    let mut v = vec![s.ee_pose];
    if s.grasped {
        v.push(s.object_pose);
    }
    v
}

fn hits_wall(s: &WorldState, r: &Rect) -> bool {
    s.scene.walls.iter().any(|w| w.overlaps(r))
}

fn hits_obstacle(s: &WorldState, r: &Rect) -> bool {
    s.obstacles.iter().any(|o| o.pose.overlaps(r))
}

pub(super) fn is_clear(s: &WorldState) -> bool {
    !moving_bodies(s)
        .iter()
        .any(|r| hits_wall(s, r) || hits_obstacle(s, r))
}

pub(super) fn transition(
    cfg: &TaskConfig,
    s: &WorldState,
    action: SimAction,
) -> (WorldState, Option<FailureKind>) {
    match action {
        SimAction::Primitive(p) => {
            let (axis, sign) = p.translation().expect("shelf primitives are translations");
            translate(cfg, s, Vec2::unit(axis, sign * cfg.step_size))
        }
        SimAction::GripperClose => grasp(cfg, s),
        SimAction::GripperOpen => release(s),
    }
}

fn translate(cfg: &TaskConfig, s: &WorldState, d: Vec2) -> (WorldState, Option<FailureKind>) {
    if !in_workspace(cfg, s.ee_pose.center + d) {
        return (s.clone(), None);
    }
    let mut next = s.clone();
    next.ee_pose = s.ee_pose.translated(d);
    if s.grasped {
        next.object_pose = s.object_pose.translated(d);
    }
    let bodies = moving_bodies(&next);
    if bodies.iter().any(|r| hits_wall(s, r)) {
        if s.grasped && s.grasp_offset.b.abs() > cfg.shelf.slip_threshold {
            return slip(cfg, s, d);
        }
        return (s.clone(), Some(FailureKind::Collision));
    }
    for i in 0..next.obstacles.len() {
        let pose = next.obstacles[i].pose;
        if !bodies.iter().any(|r| r.overlaps(&pose)) {
            continue;
        }
        // Pressing down on an item, or pushing it out of tolerance.
        let pushed = if d.a == 0.0 {
            None
        } else {
            push(cfg, &next, i, &bodies, d.a.signum())
        };
        match pushed {
            Some(p) => next.obstacles[i].pose = p,
            None => return (s.clone(), Some(FailureKind::ObstacleDisturbed)),
        }
    }
    (next, None)
}

/// Quasi-static push of obstacle `i` along `a`. Contact entirely above the
/// item's centroid also tips it about its far bottom corner. Returns `None` when the
/// push exceeds the disturbance thresholds or drives the item into a wall.
fn push(cfg: &TaskConfig, s: &WorldState, i: usize, bodies: &[Rect], sign: f64) -> Option<Rect> {
    let ob = &s.obstacles[i];
    let oa = ob.pose.aabb();
    let mut depth: f64 = 0.0;
    let mut contact_low = f64::NEG_INFINITY;
    for r in bodies.iter().filter(|r| r.overlaps(&ob.pose)) {
        let ra = r.aabb();
        let pen = if sign > 0.0 {
            ra.max.a - oa.min.a
        } else {
            oa.max.a - ra.min.a
        };
        depth = depth.max(pen);
        contact_low = contact_low.max(ra.min.b.max(oa.min.b));
    }
    let mut pose = ob.pose.translated(Vec2::new(sign * depth, 0.0));
    if contact_low > ob.pose.center.b {
        let height = oa.max.b - oa.min.b;
        let tilt = -sign * depth / height;
        let pb = pose.aabb();
        let pivot = Vec2::new(if sign > 0.0 { pb.max.a } else { pb.min.a }, pb.min.b);
        pose = Rect::rotated(
            pivot + (pose.center - pivot).rotate(tilt),
            pose.half_extents,
            pose.angle + tilt,
        );
    }
    let moved = Obstacle {
        pose,
        initial: ob.initial,
    };
    let c = &cfg.clutter;
    if moved.displacement() > c.max_displacement || moved.rotation() > c.max_rotation {
        return None;
    }
    let others = s.obstacles.iter().enumerate().filter(|(j, _)| *j != i);
    if hits_wall(s, &pose) || others.into_iter().any(|(_, o)| o.pose.overlaps(&pose)) {
        return None;
    }
    Some(pose)
}

/// The box rotates in the fingers; hand and box then back off along the
/// blocked motion until the tilted box is clear.
fn slip(cfg: &TaskConfig, s: &WorldState, d: Vec2) -> (WorldState, Option<FailureKind>) {
    let angle = s.grasp_offset.b.signum() * cfg.shelf.slip_angle;
    let mut next = s.clone();
    next.object_angle_in_hand = angle;
    next.object_pose = Rect::rotated(s.object_pose.center, s.object_pose.half_extents, angle);
    let back = d * -0.25;
    for _ in 0..40 {
        let blocked = moving_bodies(&next)
            .iter()
            .any(|r| hits_wall(&next, r) || hits_obstacle(&next, r));
        if !blocked {
            break;
        }
        next.ee_pose = next.ee_pose.translated(back);
        next.object_pose = next.object_pose.translated(back);
    }
    (next, Some(FailureKind::Slip))
}

fn grasp(cfg: &TaskConfig, s: &WorldState) -> (WorldState, Option<FailureKind>) {
    if s.grasped {
        return (s.clone(), None);
    }
    let half = s.object_pose.half_extents;
    let off = s.object_pose.center - s.ee_pose.center;
    if off.a.abs() <= half.a + cfg.shelf.grasp_slack + CONTACT_EPS
        && off.b.abs() <= half.b + CONTACT_EPS
    {
        let mut next = s.clone();
        next.grasped = true;
        next.grasp_offset = off;
        next.object_angle_in_hand = 0.0;
        (next, None)
    } else {
        (s.clone(), Some(FailureKind::Collision))
    }
}

fn release(s: &WorldState) -> (WorldState, Option<FailureKind>) {
    if !s.grasped {
        return (s.clone(), None);
    }
    let level = Rect::new(s.object_pose.center, s.object_pose.half_extents);
    if hits_wall(s, &level) || hits_obstacle(s, &level) {
        return (s.clone(), Some(FailureKind::Collision));
    }
    let bb = level.aabb();
    let bottom = bb.min.b;
    let support = s
        .scene
        .walls
        .iter()
        .chain(s.obstacles.iter().map(|o| &o.pose))
        .map(Rect::aabb)
        .filter(|w| {
            w.overlap_on(&bb, crate::geometry::Axis::A) > CONTACT_EPS
                && w.max.b <= bottom + CONTACT_EPS
        })
        .map(|w| w.max.b)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut next = s.clone();
    if support.is_finite() {
        next.object_pose = level.translated(Vec2::new(0.0, support - bottom));
    } else {
        next.object_pose = level;
    }
    next.grasped = false;
    next.grasp_offset = Vec2::ZERO;
    next.object_angle_in_hand = 0.0;
    (next, None)
}

pub(super) fn goal(cfg: &TaskConfig, s: &WorldState) -> bool {
    let g = &cfg.shelf;
    let lay = layout(s);
    let placed = (s.object_pose.center - lay.target).norm() <= g.goal_tolerance + 1e-12
        && normalize_angle(s.object_pose.angle).abs() <= g.goal_max_angle;
    let undisturbed = s.obstacles.iter().all(|o| {
        o.displacement() <= cfg.clutter.max_displacement && o.rotation() <= cfg.clutter.max_rotation
    });
    placed && undisturbed
}

#[cfg(test)]
mod tests {
    use super::super::{apply, reset as sim_reset, step, Primitive, Terminal};
    use super::*;

    fn holding(task: TaskKind, seed: u64, hand: Vec2, off: Vec2) -> (TaskConfig, WorldState) {
        let cfg = TaskConfig::new(task);
        let (mut s, _) = sim_reset(&cfg, seed).unwrap();
        s.ee_pose.center = hand;
        s.object_pose.center = hand + off;
        s.grasped = true;
        s.grasp_offset = off;
        (cfg, s)
    }

    #[test]
    fn reset_is_deterministic_and_in_ranges() {
        let cfg = TaskConfig::new(TaskKind::ClutteredShelf2D);
        for seed in 0..50 {
            let (a, _) = sim_reset(&cfg, seed).unwrap();
            let (b, _) = sim_reset(&cfg, seed).unwrap();
            assert_eq!(a, b);
            let lay = layout(&a);
            assert!(lay.front >= 0.20 && lay.front <= 0.26);
            assert_eq!(a.obstacles.len(), 2);
            for o in &a.obstacles {
                assert!(!a.scene.walls.iter().any(|w| w.overlaps(&o.pose)));
                let target_box = Rect::new(lay.target, lay.box_size * 0.5);
                assert!(!o.pose.overlaps(&target_box));
            }
        }
    }

    #[test]
    fn lip_collision_with_large_offset_slips() {
        let cfg = TaskConfig::new(TaskKind::Shelf2D);
        let (s, _) = sim_reset(&cfg, 3).unwrap();
        let lay = *layout(&s);
        let h = lay.box_size.b;
        // Box bottom 0.005 below the shelf floor, right face 0.01 before the front.
        let off = Vec2::new(0.0, -0.03);
        let center = Vec2::new(
            lay.front - 0.01 - 0.5 * lay.box_size.a,
            lay.floor - 0.005 + 0.5 * h,
        );
        let (_, s) = holding(TaskKind::Shelf2D, 3, center - off, off);
        let out = step(&cfg, &s, Primitive::TranslatePlusA).unwrap();
        assert_eq!(out.failure_kind, Some(FailureKind::Slip));
        assert!((out.next.object_angle_in_hand + 0.5).abs() < 1e-12);
        assert!(!out
            .next
            .scene
            .walls
            .iter()
            .any(|w| w.overlaps(&out.next.object_pose)));

        let off = Vec2::new(0.0, -0.01);
        let (_, s) = holding(TaskKind::Shelf2D, 3, center - off, off);
        let out = step(&cfg, &s, Primitive::TranslatePlusA).unwrap();
        assert_eq!(out.failure_kind, Some(FailureKind::Collision));
        assert_eq!(out.next.object_pose, s.object_pose);
    }

    #[test]
    fn release_over_target_drops_onto_floor() {
        let cfg = TaskConfig::new(TaskKind::Shelf2D);
        let (s, _) = sim_reset(&cfg, 5).unwrap();
        let lay = *layout(&s);
        let above = lay.target + Vec2::new(0.005, 0.03);
        let (_, mut s) = holding(TaskKind::Shelf2D, 5, above, Vec2::ZERO);
        s.object_angle_in_hand = 0.5;
        s.object_pose.angle = 0.5;
        let out = apply(&cfg, &s, SimAction::GripperOpen).unwrap();
        assert_eq!(out.terminal, Terminal::Goal);
        assert!((out.next.object_pose.center.b - lay.target.b).abs() < 1e-12);
    }

    #[test]
    fn sweeping_over_obstacle_disturbs_it() {
        let cfg = TaskConfig::new(TaskKind::ClutteredShelf2D);
        let (s, _) = sim_reset(&cfg, 11).unwrap();
        let lay = *layout(&s);
        let ob = s.obstacles[1].pose.aabb();
        let half = lay.box_size * 0.5;
        // Box bottom below the low item's top, right face 0.015 past its left face.
        let center = Vec2::new(ob.min.a + 0.015 - 0.02 - half.a, ob.max.b - 0.002 + half.b);
        let (_, s) = holding(TaskKind::ClutteredShelf2D, 11, center, Vec2::ZERO);
        let out = step(&cfg, &s, Primitive::TranslatePlusA).unwrap();
        assert_eq!(out.failure_kind, Some(FailureKind::ObstacleDisturbed));
        assert_eq!(out.next.obstacles, s.obstacles);
    }

    #[test]
    fn small_push_is_tolerated() {
        let cfg = TaskConfig::new(TaskKind::ClutteredShelf2D);
        let (s, _) = sim_reset(&cfg, 11).unwrap();
        let lay = *layout(&s);
        let ob = s.obstacles[1].pose.aabb();
        let half = lay.box_size * 0.5;
        // Moving 0.02 leaves a 0.005 push; contact below the item's top half.
        let center = Vec2::new(ob.min.a + 0.005 - 0.02 - half.a, ob.min.b + 0.0001 + half.b);
        let (_, s) = holding(TaskKind::ClutteredShelf2D, 11, center, Vec2::ZERO);
        let out = step(&cfg, &s, Primitive::TranslatePlusA).unwrap();
        assert_eq!(out.failure_kind, None);
        assert!((out.next.obstacles[1].displacement() - 0.005).abs() < 1e-9);
    }

    #[test]
    fn grasp_needs_fingers_on_box() {
        let cfg = TaskConfig::new(TaskKind::Shelf2D);
        let (mut s, _) = sim_reset(&cfg, 2).unwrap();
        s.ee_pose.center = s.object_pose.center + Vec2::new(0.0, 0.02);
        let out = apply(&cfg, &s, SimAction::GripperClose).unwrap();
        assert!(out.next.grasped);
        assert!((out.next.grasp_offset.b + 0.02).abs() < 1e-12);
        s.ee_pose.center = s.object_pose.center + Vec2::new(0.0, 0.2);
        let out = apply(&cfg, &s, SimAction::GripperClose).unwrap();
        assert_eq!(out.failure_kind, Some(FailureKind::Collision));
    }
}
