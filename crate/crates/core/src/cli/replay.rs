use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{read_file, write_file, CliError};
use crate::engine::{oracle_collision, oracle_completion, oracle_stuck, OracleVerdict, TesterConfig};
use crate::geometry::obb_corners;
use crate::network::{bundled_network, RoadNetwork};
use crate::sim::{parse_trace, ActorKind, ActorState, LightColor, SceneObs, Trace};

const PX_PER_M: f64 = 2.0;
const PAD: f64 = 20.0;

/// Indices of the observations drawn as frames: the first one, every
/// observation at least `stride` steps after the previously drawn one, and
/// the last one.
pub fn select_frames(trace: &Trace, stride: u64) -> Vec<usize> {
    let obs = &trace.observations;
    if obs.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0];
    let mut last_step = obs[0].step;
    for (i, o) in obs.iter().enumerate().skip(1) {
        if o.step >= last_step + stride {
            out.push(i);
            last_step = o.step;
        }
    }
    if *out.last().expect("non-empty") != obs.len() - 1 {
        out.push(obs.len() - 1);
    }
    out
}

struct View {
    min_x: f64,
    max_y: f64,
    width: f64,
    height: f64,
}

impl View {
    fn fit(net: Option<&RoadNetwork>, trace: &Trace) -> Self {
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut add = |x: f64, y: f64| {
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        };
        if let Some(net) = net {
            for lane in net.lanes.values() {
                for p in &lane.centerline {
                    add(p.x, p.y);
                }
            }
        }
        for o in &trace.observations {
            for a in o.egos.iter().chain(&o.other_actors) {
                add(a.x, a.y);
            }
        }
        if !lo.0.is_finite() {
            lo = (0.0, 0.0);
            hi = (1.0, 1.0);
        }
        Self {
            min_x: lo.0 - 5.0,
            max_y: hi.1 + 5.0,
            width: (hi.0 - lo.0 + 10.0) * PX_PER_M + 2.0 * PAD,
            height: (hi.1 - lo.1 + 10.0) * PX_PER_M + 2.0 * PAD + 20.0,
        }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.min_x) * PX_PER_M + PAD,
            (self.max_y - y) * PX_PER_M + PAD + 20.0,
        )
    }

    fn points(&self, pts: impl IntoIterator<Item = (f64, f64)>) -> String {
        pts.into_iter()
            .map(|(x, y)| {
                let (a, b) = self.px(x, y);
                format!("{a:.2},{b:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn open(&self, title: &str) -> String {
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">\n",
            self.width, self.height, self.width, self.height
        );
        let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>");
        let _ = writeln!(
            s,
            "<text x=\"{PAD}\" y=\"16\" font-family=\"monospace\" font-size=\"12\">{}</text>",
            xml_escape(title)
        );
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn kind_color(kind: ActorKind) -> &'static str {
    match kind {
        ActorKind::Ego => "#1f5fbf",
        ActorKind::NpcVehicle => "#e07b00",
        ActorKind::Walker => "#2a9d3a",
        ActorKind::Obstacle => "#7a6a58",
        ActorKind::TrafficLight => "#000000",
    }
}

fn light_color(c: Option<LightColor>) -> &'static str {
    match c {
        Some(LightColor::Green) => "#22bb33",
        Some(LightColor::Yellow) => "#f0c000",
        Some(LightColor::Red) => "#dd2222",
        None => "#888888",
    }
}

fn draw_map(s: &mut String, v: &View, net: Option<&RoadNetwork>) {
    let Some(net) = net else { return };
    for j in &net.junctions {
        let r = j.radius;
        let pts = [(-r, -r), (r, -r), (r, r), (-r, r)].map(|(dx, dy)| (j.center.x + dx, j.center.y + dy));
        let _ = writeln!(
            s,
            "<polygon points=\"{}\" fill=\"#eeeeee\" stroke=\"none\"/>",
            v.points(pts)
        );
    }
    for lane in net.lanes.values() {
        let kind = if net.junction_of(&lane.lane_id).is_some() {
            "#cccccc"
        } else {
            "#999999"
        };
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{kind}\" stroke-width=\"1\"/>",
            v.points(lane.centerline.iter().map(|p| (p.x, p.y)))
        );
    }
}

fn draw_actor(s: &mut String, v: &View, a: &ActorState) {
    if a.kind == ActorKind::TrafficLight {
        let (x, y) = v.px(a.x, a.y);
        let _ = writeln!(
            s,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{}\" stroke=\"#333333\" stroke-width=\"0.5\"><title>{}</title></circle>",
            light_color(a.phase),
            xml_escape(&a.id)
        );
        return;
    }
    let corners = obb_corners(a.pose(), a.extent).map(|c| (c.x, c.y));
    let opacity = if a.active { "0.85" } else { "0.3" };
    let _ = writeln!(
        s,
        "<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"{opacity}\" stroke=\"#000000\" stroke-width=\"0.5\"><title>{}</title></polygon>",
        v.points(corners),
        kind_color(a.kind),
        xml_escape(&a.id)
    );
    let (x, y) = v.px(a.x, a.y);
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"7\">{}</text>",
        x + 6.0,
        y - 6.0,
        xml_escape(&a.id)
    );
}

/// One SVG frame: lanes, actor rectangles colored by kind, light phases.
pub fn render_frame(trace: &Trace, obs: &SceneObs, net: Option<&RoadNetwork>) -> String {
    let v = View::fit(net, trace);
    let title = format!("{} step {} t={:.2}s", trace.scenario_id(), obs.step, obs.timestamp);
    let mut s = v.open(&title);
    draw_map(&mut s, &v, net);
    for a in obs.other_actors.iter().chain(&obs.egos) {
        draw_actor(&mut s, &v, a);
    }
    s.push_str("</svg>\n");
    s
}

fn verdicts(trace: &Trace) -> Vec<OracleVerdict> {
    let d = TesterConfig::default();
    vec![
        oracle_collision(trace),
        oracle_stuck(trace, d.stuck_speed, d.stuck_time),
        oracle_completion(trace),
    ]
}

/// Ego paths, final scene and a marker at every violation location.
pub fn render_summary(trace: &Trace, net: Option<&RoadNetwork>) -> String {
    let v = View::fit(net, trace);
    let found = verdicts(trace);
    let names: Vec<String> = found
        .iter()
        .filter(|x| x.violated)
        .map(|x| format!("{:?}", x.oracle).to_lowercase())
        .collect();
    let title = format!(
        "{} summary: {} | violations: {}",
        trace.scenario_id(),
        trace.termination().as_str(),
        if names.is_empty() {
            "none".to_string()
        } else {
            names.join(", ")
        }
    );
    let mut s = v.open(&title);
    draw_map(&mut s, &v, net);
    for goal in &trace.header.goals {
        let path: Vec<(f64, f64)> = trace
            .observations
            .iter()
            .filter_map(|o| o.ego(&goal.id).map(|e| (e.x, e.y)))
            .collect();
        if path.len() > 1 {
            let _ = writeln!(
                s,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f5fbf\" stroke-dasharray=\"3,2\" stroke-width=\"1\"/>",
                v.points(path)
            );
        }
        let (gx, gy) = v.px(goal.x, goal.y);
        let _ = writeln!(
            s,
            "<circle cx=\"{gx:.2}\" cy=\"{gy:.2}\" r=\"4\" fill=\"none\" stroke=\"#1f5fbf\"/>"
        );
    }
    let last = trace.last();
    for a in last.other_actors.iter().chain(&last.egos) {
        draw_actor(&mut s, &v, a);
    }
    for x in found.iter().filter(|x| x.violated) {
        let Some(d) = &x.detail else { continue };
        let (cx, cy) = v.px(d.x, d.y);
        let _ = writeln!(
            s,
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"10\" fill=\"none\" stroke=\"#dd0000\" stroke-width=\"2\"><title>{:?} {}</title></circle>",
            x.oracle,
            xml_escape(&d.actors.join(" "))
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"#dd0000\" font-family=\"monospace\" font-size=\"9\">{:?} @ step {}</text>",
            cx + 12.0,
            cy + 3.0,
            x.oracle,
            d.step
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Write `frame_<step>.svg` files and `summary.svg` for the trace at
/// `trace_path`. Returns the frame paths, summary last.
pub fn cmd_replay(trace_path: &Path, out_dir: &Path, stride: u64) -> Result<Vec<PathBuf>, CliError> {
    if stride == 0 {
        return Err(CliError::Input("stride must be >= 1".into()));
    }
    let trace = parse_trace(&read_file(trace_path)?).map_err(|e| CliError::Input(e.to_string()))?;
    let net = bundled_network(&trace.header.town).ok();
    if net.is_none() {
        eprintln!(
            "warning: no bundled map for town {:?}; drawing actors only",
            trace.header.town
        );
    }
    let mut out = Vec::new();
    for i in select_frames(&trace, stride) {
        let obs = &trace.observations[i];
        let path = out_dir.join(format!("frame_{:06}.svg", obs.step));
        write_file(&path, &render_frame(&trace, obs, net.as_ref()))?;
        out.push(path);
    }
    let path = out_dir.join("summary.svg");
    write_file(&path, &render_summary(&trace, net.as_ref()))?;
    out.push(path);
    Ok(out)
}
