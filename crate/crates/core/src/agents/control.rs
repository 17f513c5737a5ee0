//! Low-level controllers shared by the built-in agents and NPC vehicles.

use crate::geometry::{cumulative_arcs, point_at_arc, project_on_polyline};
use crate::geometry::{obb_corners, wrap_angle, Pose, Vec2};
use crate::scenario::Route;
use crate::sim::ActorState;

pub const MIN_LOOKAHEAD: f64 = 4.0;
pub const LOOKAHEAD_GAIN: f64 = 1.0;

pub fn lookahead_distance(speed: f64) -> f64 {
    MIN_LOOKAHEAD.max(LOOKAHEAD_GAIN * speed)
}

/// Pure-pursuit steering toward the point `lookahead` metres along
/// `path` (measured from its first vertex). Past the end the last segment is
/// extrapolated. Fewer than two vertices gives zero steer.
pub fn pure_pursuit(pose: Pose, path: &[Vec2], lookahead: f64, wheelbase: f64, max_steer: f64) -> f64 {
    if path.len() < 2 {
        return 0.0;
    }
    let arcs = cumulative_arcs(path);
    let total = arcs[arcs.len() - 1];
    let target = if lookahead <= total {
        point_at_arc(path, &arcs, lookahead).0
    } else {
        let n = path.len();
        let dir = (path[n - 1] - path[n - 2]).normalized();
        path[n - 1] + dir * (lookahead - total)
    };
    let to = target - pose.position();
    if to.norm() < 1e-9 {
        return 0.0;
    }
    let alpha = wrap_angle(to.y.atan2(to.x) - pose.heading);
    (2.0 * wheelbase * alpha.sin() / lookahead)
        .atan()
        .clamp(-max_steer, max_steer)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmParams {
    /// Desired speed.
    pub v0: f64,
    pub time_headway: f64,
    pub min_gap: f64,
    pub a_max: f64,
    /// Comfortable deceleration.
    pub b: f64,
}

impl IdmParams {
    pub fn with_desired_speed(v0: f64) -> Self {
        Self {
            v0,
            time_headway: 1.5,
            min_gap: 2.0,
            a_max: 2.0,
            b: 3.0,
        }
    }
}

/// Intelligent Driver Model acceleration, clamped to `[-max_decel, a_max]`.
/// `gap` is bumper to bumper; pass `f64::INFINITY` for free road. A gap at or
/// below zero gives full braking.
pub fn idm_acceleration(v: f64, v_lead: f64, gap: f64, p: &IdmParams, max_decel: f64) -> f64 {
    if gap <= 0.0 {
        return -max_decel;
    }
    let v0 = p.v0.max(0.01);
    let dynamic = v * p.time_headway + v * (v - v_lead) / (2.0 * (p.a_max * p.b).sqrt());
    let s_star = p.min_gap + dynamic.max(0.0);
    let interaction = if gap.is_finite() { (s_star / gap).powi(2) } else { 0.0 };
    let a = p.a_max * (1.0 - (v / v0).powi(4) - interaction);
    a.clamp(-max_decel, p.a_max)
}

/// Highest speed from which every waypoint target ahead (and a stop at the
/// route end) is reachable with deceleration `decel`. Only points within
/// `horizon` metres are considered.
pub fn route_speed_cap(remaining: &Route, decel: f64, horizon: f64) -> f64 {
    let wps = &remaining.waypoints;
    let mut cap = f64::INFINITY;
    let mut d = 0.0;
    for (i, w) in wps.iter().enumerate() {
        if i > 0 {
            d += wps[i - 1].position().dist(w.position());
        }
        if d > horizon {
            return cap;
        }
        cap = cap.min((w.target_speed * w.target_speed + 2.0 * decel * d).sqrt());
    }
    cap.min((2.0 * decel * d).sqrt())
}

/// Like [`route_speed_cap`], but waypoints where the route bends sharper
/// than `max_curvature` (1/m) get `turn_speed` as their target. Keeps the
/// lookahead short through tight turns so pursuit cuts less of the corner.
pub fn curve_speed_cap(remaining: &Route, decel: f64, horizon: f64, max_curvature: f64, turn_speed: f64) -> f64 {
    let pts = remaining.points();
    let mut cap = f64::INFINITY;
    let mut d = 0.0;
    for i in 1..pts.len().saturating_sub(1) {
        d += pts[i - 1].dist(pts[i]);
        if d > horizon {
            break;
        }
        let (a, b) = (pts[i] - pts[i - 1], pts[i + 1] - pts[i]);
        let span = 0.5 * (a.norm() + b.norm());
        if span <= 0.0 {
            continue;
        }
        let turn = a.cross(b).atan2(a.dot(b)).abs();
        if turn / span > max_curvature {
            cap = cap.min((turn_speed * turn_speed + 2.0 * decel * d).sqrt());
        }
    }
    cap
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lead {
    pub id: String,
    /// Distance from the own front bumper to the nearest point of the lead.
    pub gap: f64,
    /// Lead velocity projected onto the route direction.
    pub speed: f64,
}

/// Nearest actor whose footprint enters the corridor of half-width
/// `half_width` around `remaining` ahead of the ego, within `horizon` metres.
pub fn find_lead(
    own: &ActorState,
    remaining: &Route,
    actors: &[ActorState],
    half_width: f64,
    horizon: f64,
) -> Option<Lead> {
    let mut path = Vec::new();
    let mut d = 0.0;
    for w in &remaining.waypoints {
        let p = w.position();
        if let Some(&prev) = path.last() {
            d += p.dist(prev);
        }
        path.push(p);
        if d > horizon {
            break;
        }
    }
    if path.len() < 2 {
        return None;
    }
    let arcs = cumulative_arcs(&path);
    let half_len = own.extent.length / 2.0;
    let mut best: Option<Lead> = None;
    for a in actors {
        if !a.collidable() || a.id == own.id {
            continue;
        }
        let c = obb_corners(a.pose(), a.extent);
        let probes = [
            Vec2::new(a.x, a.y),
            c[0],
            c[1],
            c[2],
            c[3],
            (c[0] + c[1]) * 0.5,
            (c[1] + c[2]) * 0.5,
            (c[2] + c[3]) * 0.5,
            (c[3] + c[0]) * 0.5,
        ];
        let mut nearest: Option<(f64, usize)> = None;
        for p in probes {
            let pr = project_on_polyline(&path, &arcs, p);
            if pr.arc <= 0.0 || pr.lateral.abs() > half_width {
                continue;
            }
            if nearest.is_none_or(|(s, _)| pr.arc < s) {
                nearest = Some((pr.arc, pr.segment));
            }
        }
        let Some((arc, seg)) = nearest else { continue };
        let tangent = (path[seg + 1] - path[seg]).normalized();
        let speed = a.speed * Vec2::from_angle(a.heading).dot(tangent);
        let gap = arc - half_len;
        let closer = match &best {
            None => true,
            Some(b) => gap < b.gap || (gap == b.gap && a.id < b.id),
        };
        if closer {
            best = Some(Lead {
                id: a.id.clone(),
                gap,
                speed,
            });
        }
    }
    best
}
