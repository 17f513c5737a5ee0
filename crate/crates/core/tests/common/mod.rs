//! Independent reference computations shared by the integration tests.
//! Nothing here calls into the crate's geometry code.

#![allow(dead_code)]

use std::path::PathBuf;

use roadfuzz::scenario::{parse_scenario, Scenario};
use roadfuzz::sim::{ActorKind, Trace};

pub type P = (f64, f64);

pub fn fixture(name: &str) -> Scenario {
    let path = fixture_path(&format!("{name}.json"));
    parse_scenario(&std::fs::read_to_string(&path).expect("fixture readable")).expect("fixture parses")
}

pub fn fixture_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data/fixtures")
        .join(file)
}

/// Rectangle corners from center, heading, length and width.
pub fn corners(x: f64, y: f64, heading: f64, length: f64, width: f64) -> [P; 4] {
    let (s, c) = heading.sin_cos();
    let (hl, hw) = (length / 2.0, width / 2.0);
    [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(a, b)| (x + a * c - b * s, y + a * s + b * c))
}

fn sub(a: P, b: P) -> P {
    (a.0 - b.0, a.1 - b.1)
}

fn cross(a: P, b: P) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

fn dot(a: P, b: P) -> f64 {
    a.0 * b.0 + a.1 * b.1
}

pub fn dist(a: P, b: P) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

pub fn point_segment_distance(p: P, a: P, b: P) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    dist(p, (a.0 + t * ab.0, a.1 + t * ab.1))
}

fn segments_cross(a: P, b: P, c: P, d: P) -> bool {
    let d1 = cross(sub(b, a), sub(c, a));
    let d2 = cross(sub(b, a), sub(d, a));
    let d3 = cross(sub(d, c), sub(a, c));
    let d4 = cross(sub(d, c), sub(b, c));
    if d1 == 0.0 && d2 == 0.0 {
        // Collinear: they touch only if the spans along the line overlap.
        let dir = sub(b, a);
        let t = |p: P| dot(sub(p, a), dir);
        let (lo, hi) = (t(c).min(t(d)), t(c).max(t(d)));
        return hi >= 0.0 && lo <= dot(dir, dir);
    }
    (d1 * d2 <= 0.0) && (d3 * d4 <= 0.0)
}

pub fn segment_distance(a: P, b: P, c: P, d: P) -> f64 {
    if segments_cross(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Inside-or-on test for a convex polygon given counterclockwise.
pub fn in_convex(p: P, poly: &[P; 4]) -> bool {
    (0..4).all(|i| cross(sub(poly[(i + 1) % 4], poly[i]), sub(p, poly[i])) >= -1e-12)
}

/// Exact test: some edge pair crosses, or one rectangle holds the other.
pub fn rects_intersect(a: &[P; 4], b: &[P; 4]) -> bool {
    for i in 0..4 {
        for j in 0..4 {
            if segments_cross(a[i], a[(i + 1) % 4], b[j], b[(j + 1) % 4]) {
                return true;
            }
        }
    }
    in_convex(a[0], b) || in_convex(b[0], a)
}

/// Brute-force footprint distance: 0 when overlapping, otherwise the
/// smallest distance between any pair of edges.
pub fn edge_pair_distance(a: &[P; 4], b: &[P; 4]) -> f64 {
    if rects_intersect(a, b) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for i in 0..4 {
        for j in 0..4 {
            best = best.min(segment_distance(a[i], a[(i + 1) % 4], b[j], b[(j + 1) % 4]));
        }
    }
    best
}

/// Overlap by sampling a grid of points over rectangle `a` (edges included)
/// and checking containment in `b`, then the reverse.
pub fn sampled_intersects(a: &[P; 4], b: &[P; 4], n: usize) -> bool {
    let sample = |r: &[P; 4], other: &[P; 4]| {
        for i in 0..=n {
            for j in 0..=n {
                let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
                let e1 = sub(r[1], r[0]);
                let e2 = sub(r[3], r[0]);
                let p = (r[0].0 + u * e1.0 + v * e2.0, r[0].1 + u * e1.1 + v * e2.1);
                if in_convex(p, other) {
                    return true;
                }
            }
        }
        false
    };
    sample(a, b) || sample(b, a)
}

fn actor_corners(a: &roadfuzz::sim::ActorState) -> [P; 4] {
    corners(a.x, a.y, a.heading, a.extent.length, a.extent.width)
}

/// Minimum ego-to-other footprint distance over the trace, capped at the
/// sensing radius; the cap also stands for failed runs.
pub fn brute_fitness(trace: &Trace) -> f64 {
    let cap = trace.header.sensing_radius;
    if trace.termination() == roadfuzz::sim::Termination::AgentFailure {
        return cap;
    }
    let mut best = cap;
    for o in &trace.observations {
        let all: Vec<_> = o
            .egos
            .iter()
            .chain(&o.other_actors)
            .filter(|a| a.kind != ActorKind::TrafficLight)
            .collect();
        for e in &o.egos {
            for other in all.iter().filter(|a| a.id != e.id) {
                best = best.min(edge_pair_distance(&actor_corners(e), &actor_corners(other)));
            }
        }
    }
    best
}

/// Does any recorded ego footprint overlap another actor's?
pub fn brute_collision(trace: &Trace) -> bool {
    trace.observations.iter().any(|o| {
        o.egos.iter().any(|e| {
            o.egos
                .iter()
                .chain(&o.other_actors)
                .filter(|a| a.kind != ActorKind::TrafficLight && a.id != e.id)
                .any(|a| rects_intersect(&actor_corners(e), &actor_corners(a)))
        })
    })
}

pub fn polyline_length(pts: &[P]) -> f64 {
    pts.windows(2).map(|w| dist(w[0], w[1])).sum()
}

pub fn polyline_distance(p: P, pts: &[P]) -> f64 {
    pts.windows(2)
        .map(|w| point_segment_distance(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

pub fn route_points(s: &Scenario, ego: usize) -> Vec<P> {
    s.ego_vehicles[ego].route.waypoints.iter().map(|w| (w.x, w.y)).collect()
}
