//! Top-view pick-place. The open gripper is lowered into the bins, so its
//! finger pads collide with walls and push the object. A grasped object is
//! carried lifted, clear of all walls.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;

use super::{FailureKind, Scene, SimAction, TaskConfig, WorldState};
use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Aabb, Axis, Rect, Vec2, CONTACT_EPS};
use crate::seeding;

use super::PickPlaceGeometry;

pub(super) fn bin_walls(g: &PickPlaceGeometry, origin: Vec2) -> [Rect; 4] {
    let (l, t) = (g.bin_size, g.wall_thickness);
    let (x, y) = (origin.a, origin.b);
    [
        Rect::from_bounds(x - t, y - t, x, y + l + t),
        Rect::from_bounds(x + l, y - t, x + l + t, y + l + t),
        Rect::from_bounds(x, y - t, x + l, y),
        Rect::from_bounds(x, y + l, x + l, y + l + t),
    ]
}

pub(super) fn target_interior(g: &PickPlaceGeometry) -> Aabb {
    Aabb {
        min: g.target_origin,
        max: g.target_origin + Vec2::new(g.bin_size, g.bin_size),
    }
}

/// Pads at an arbitrary yaw angle, for sweeping a rotation.
fn pads_at_angle(g: &PickPlaceGeometry, center: Vec2, angle: f64) -> [Rect; 2] {
    let reach = 0.5 * g.finger_span - 0.5 * g.pad_length;
    let half = Vec2::new(0.5 * g.finger_thickness, 0.5 * g.pad_length);
    [-1.0, 1.0].map(|s| {
        Rect::rotated(
            center + Vec2::new(0.0, s * reach).rotate(angle),
            half,
            angle,
        )
    })
}

/// Gripper envelope at `center`, yaw in quarter turns. In the hand frame the
/// fingers span the `b` axis.
pub fn envelope(g: &PickPlaceGeometry, center: Vec2, yaw: u8) -> Rect {
    Rect::rotated(
        center,
        Vec2::new(0.5 * g.finger_thickness, 0.5 * g.finger_span),
        f64::from(yaw) * FRAC_PI_2,
    )
}

/// The two finger pads as axis-aligned rectangles.
pub fn pads(g: &PickPlaceGeometry, center: Vec2, yaw: u8) -> [Rect; 2] {
    let reach = 0.5 * g.finger_span - 0.5 * g.pad_length;
    let half =
        Vec2::new(0.5 * g.finger_thickness, 0.5 * g.pad_length).rotate_quarter(i32::from(yaw));
    let half = Vec2::new(half.a.abs(), half.b.abs());
    [-1.0, 1.0].map(|s| {
        Rect::new(
            center + Vec2::new(0.0, s * reach).rotate_quarter(i32::from(yaw)),
            half,
        )
    })
}

fn object_rect(g: &PickPlaceGeometry, center: Vec2, angle: f64) -> Rect {
    let h = g.object_half();
    Rect::rotated(center, Vec2::new(h, h), angle)
}

pub(super) fn reset(cfg: &TaskConfig, seed: u64, noise: Vec2) -> Result<WorldState> {
    let g = &cfg.pick_place;
    let (lo, hi) = g.sampling_range();
    let mut rng = seeding::stream(seed, "pick-place-geometry");
    let home_pads = pads(g, g.home, 0);
    let mut walls = bin_walls(g, g.source_origin).to_vec();
    walls.extend(bin_walls(g, g.target_origin));
    for _ in 0..1000 {
        let c = Vec2::new(rng.random_range(lo.a..=hi.a), rng.random_range(lo.b..=hi.b));
        let object = object_rect(g, c, 0.0);
        if home_pads.iter().any(|p| p.overlaps(&object)) {
            continue;
        }
        return Ok(WorldState {
            ee_pose: envelope(g, g.home, 0),
            ee_yaw: 0,
            object_pose: object,
            grasped: false,
            grasp_offset: Vec2::ZERO,
            object_angle_in_hand: 0.0,
            obstacles: Vec::new(),
            step_count: 0,
            episode_seed: seed,
            observation_noise: noise,
            scene: Scene { walls, shelf: None },
        });
    }
    Err(Error::Config(
        "no object placement clear of the gripper home pose".into(),
    ))
}

fn in_workspace(g: &PickPlaceGeometry, p: Vec2) -> bool {
    p.a >= g.workspace_min.a
        && p.a <= g.workspace_max.a
        && p.b >= g.workspace_min.b
        && p.b <= g.workspace_max.b
}

fn hits_wall(scene: &Scene, r: &Rect) -> bool {
    scene.walls.iter().any(|w| w.overlaps(r))
}

/// Returns the successor state and the failure it triggered, if any. Failed
/// motions leave the state untouched.
pub(super) fn transition(
    cfg: &TaskConfig,
    s: &WorldState,
    action: SimAction,
) -> (WorldState, Option<FailureKind>) {
    let g = &cfg.pick_place;
    let unchanged = |kind| (s.clone(), kind);
    match action {
        SimAction::Primitive(p) => match p.translation() {
            Some((axis, sign)) => {
                let d = Vec2::unit(axis, sign * cfg.step_size);
                let ee = s.ee_pose.center + d;
                if !in_workspace(g, ee) {
                    return unchanged(None);
                }
                let mut next = s.clone();
                next.ee_pose = envelope(g, ee, s.ee_yaw);
                if s.grasped {
                    next.object_pose = s.object_pose.translated(d);
                    return (next, None);
                }
                let moved = pads(g, ee, s.ee_yaw);
                if moved.iter().any(|p| hits_wall(&s.scene, p)) {
                    return unchanged(Some(FailureKind::Collision));
                }
                let obj = s.object_pose.aabb();
                let push = moved
                    .iter()
                    .map(|p| push_depth(&p.aabb(), &obj, axis, sign))
                    .fold(0.0, f64::max);
                if push > CONTACT_EPS {
                    let pushed = s.object_pose.translated(Vec2::unit(axis, sign * push));
                    if hits_wall(&s.scene, &pushed) {
                        // Object jammed against a wall under the finger.
                        return unchanged(Some(FailureKind::Collision));
                    }
                    next.object_pose = pushed;
                }
                (next, None)
            }
            None => {
                let turn: i32 = if p == super::Primitive::RotatePlus {
                    1
                } else {
                    -1
                };
                let yaw = (i32::from(s.ee_yaw) + turn).rem_euclid(4) as u8;
                let mut next = s.clone();
                next.ee_yaw = yaw;
                next.ee_pose = envelope(g, s.ee_pose.center, yaw);
                if s.grasped {
                    let c = s.ee_pose.center + s.grasp_offset.rotate_quarter(i32::from(yaw));
                    next.object_pose = object_rect(
                        g,
                        c,
                        normalize_angle(s.object_pose.angle + f64::from(turn) * FRAC_PI_2),
                    );
                    return (next, None);
                }
                let start = f64::from(s.ee_yaw) * FRAC_PI_2;
                let swept = (1..=4).flat_map(|k| {
                    pads_at_angle(
                        g,
                        s.ee_pose.center,
                        start + f64::from(turn) * FRAC_PI_2 * f64::from(k) / 4.0,
                    )
                });
                let mut swept = swept.chain(pads(g, s.ee_pose.center, yaw));
                let lands_on_object = pads(g, s.ee_pose.center, yaw)
                    .iter()
                    .any(|p| p.overlaps(&s.object_pose));
                if lands_on_object || swept.any(|p| hits_wall(&s.scene, &p)) {
                    return unchanged(Some(FailureKind::Collision));
                }
                (next, None)
            }
        },
        SimAction::GripperClose => {
            if s.grasped {
                return (s.clone(), None);
            }
            let off =
                (s.object_pose.center - s.ee_pose.center).rotate_quarter(-i32::from(s.ee_yaw));
            let inner = 0.5 * g.finger_span - g.pad_length - g.object_half();
            let clear = !pads(g, s.ee_pose.center, s.ee_yaw)
                .iter()
                .any(|p| hits_wall(&s.scene, p));
            if off.a.abs() <= g.grasp_tolerance + CONTACT_EPS
                && off.b.abs() <= inner + CONTACT_EPS
                && clear
            {
                let mut next = s.clone();
                next.grasped = true;
                next.grasp_offset = off;
                (next, None)
            } else {
                unchanged(Some(FailureKind::Collision))
            }
        }
        SimAction::GripperOpen => {
            if !s.grasped {
                return (s.clone(), None);
            }
            // Lowering the open gripper and dropping the object: both must
            // land clear of the walls.
            let lowered = pads(g, s.ee_pose.center, s.ee_yaw);
            if lowered
                .iter()
                .any(|p| hits_wall(&s.scene, p) || p.overlaps(&s.object_pose))
                || hits_wall(&s.scene, &s.object_pose)
            {
                return unchanged(Some(FailureKind::Collision));
            }
            let mut next = s.clone();
            next.grasped = false;
            next.grasp_offset = Vec2::ZERO;
            (next, None)
        }
    }
}

/// The lowered pads touch neither walls nor the object; a lifted hand is
/// always clear.
pub(super) fn is_clear(cfg: &TaskConfig, s: &WorldState) -> bool {
    s.grasped
        || !pads(&cfg.pick_place, s.ee_pose.center, s.ee_yaw)
            .iter()
            .any(|p| hits_wall(&s.scene, p) || p.overlaps(&s.object_pose))
}

/// Depth by which a pad moving along `axis` in direction `sign` penetrates
/// the object; this is how far the object is pushed.
fn push_depth(pad: &Aabb, obj: &Aabb, axis: Axis, sign: f64) -> f64 {
    if !pad.overlaps(obj) {
        return 0.0;
    }
    if sign > 0.0 {
        pad.max.axis(axis) - obj.min.axis(axis)
    } else {
        obj.max.axis(axis) - pad.min.axis(axis)
    }
}

pub(super) fn goal(cfg: &TaskConfig, s: &WorldState) -> bool {
    !s.grasped && target_interior(&cfg.pick_place).contains(s.object_pose.center)
}
