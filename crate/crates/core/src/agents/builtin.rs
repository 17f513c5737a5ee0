use serde_json::json;

use super::control::{
    curve_speed_cap, find_lead, idm_acceleration, lookahead_distance, pure_pursuit, route_speed_cap, IdmParams,
    LOOKAHEAD_GAIN, MIN_LOOKAHEAD,
};
use super::{Agent, AgentAction, AgentContext, AgentError, AgentLog, Observation};
use crate::geometry::Vec2;
use crate::sim::LightColor;

/// Bends tighter than this (1/m) count as turns for the safe follower.
const SHARP_CURVATURE: f64 = 0.04;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinKind {
    /// Tracks the route speed profile and ignores everything else.
    NaiveFollower,
    /// IDM car following plus stopping for red and yellow lights.
    SafeFollower,
    /// Safe follower that also waits at junctions for conflicting vehicles.
    YieldingAgent,
}

impl BuiltinKind {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "naive_follower" => Some(Self::NaiveFollower),
            "safe_follower" => Some(Self::SafeFollower),
            "yielding_agent" => Some(Self::YieldingAgent),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::NaiveFollower => "naive_follower",
            Self::SafeFollower => "safe_follower",
            Self::YieldingAgent => "yielding_agent",
        }
    }
}

/// Tunables, settable through the query part of a `builtin:` reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuiltinParams {
    pub v_des: f64,
    /// Proportional speed gain.
    pub kp: f64,
    pub time_headway: f64,
    pub min_gap: f64,
    pub a_max: f64,
    pub b: f64,
    /// Deceleration used to plan for slower route sections.
    pub comfort_decel: f64,
    /// Full width of the lead-detection corridor.
    pub corridor: f64,
    /// Front-bumper distance to a stop line below which lights are obeyed.
    pub light_zone: f64,
    pub yield_zone: f64,
}

impl Default for BuiltinParams {
    fn default() -> Self {
        Self {
            v_des: 10.0,
            kp: 1.0,
            time_headway: 1.5,
            min_gap: 2.0,
            a_max: 2.0,
            b: 3.0,
            comfort_decel: 2.0,
            corridor: 3.0,
            light_zone: 15.0,
            yield_zone: 20.0,
        }
    }
}

impl BuiltinParams {
    pub fn parse(_kind: BuiltinKind, query: &str) -> Result<Self, AgentError> {
        let mut p = Self::default();
        for pair in query.split('&').filter(|s| !s.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| AgentError::BadConfig(format!("expected key=value, got {pair:?}")))?;
            let v: f64 = value
                .parse()
                .map_err(|_| AgentError::BadConfig(format!("{key}: not a number: {value:?}")))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(AgentError::BadConfig(format!("{key} must be positive")));
            }
            let slot = match key {
                "v_des" => &mut p.v_des,
                "kp" => &mut p.kp,
                "T" | "time_headway" => &mut p.time_headway,
                "s0" | "min_gap" => &mut p.min_gap,
                "a_max" => &mut p.a_max,
                "b" => &mut p.b,
                "comfort_decel" => &mut p.comfort_decel,
                "corridor" => &mut p.corridor,
                "light_zone" => &mut p.light_zone,
                "yield_zone" => &mut p.yield_zone,
                _ => return Err(AgentError::BadConfig(format!("unknown parameter {key:?}"))),
            };
            *slot = v;
        }
        Ok(p)
    }

    fn idm(&self, v0: f64) -> IdmParams {
        IdmParams {
            v0,
            time_headway: self.time_headway,
            min_gap: self.min_gap,
            a_max: self.a_max,
            b: self.b,
        }
    }
}

/// In-process agent. Stateless between steps apart from its context, so a
/// run is a pure function of the observations.
#[derive(Debug, Clone)]
pub struct BuiltinAgent {
    kind: BuiltinKind,
    params: BuiltinParams,
    ctx: AgentContext,
}

impl BuiltinAgent {
    pub fn new(kind: BuiltinKind, params: BuiltinParams, ctx: AgentContext) -> Self {
        Self { kind, params, ctx }
    }

    pub fn kind(&self) -> BuiltinKind {
        self.kind
    }

    fn steer(&self, obs: &Observation) -> f64 {
        let lim = &self.ctx.vehicle_limits;
        let me = &obs.self_state;
        pure_pursuit(
            me.pose(),
            &obs.remaining_route.points(),
            lookahead_distance(me.speed),
            lim.wheelbase,
            lim.max_steer,
        )
    }

    fn target_speed(&self, obs: &Observation) -> f64 {
        let cap = route_speed_cap(&obs.remaining_route, self.params.comfort_decel, self.ctx.sensing_radius);
        self.params.v_des.min(cap)
    }

    /// Safe mode also slows for tight bends, down to the speed where the
    /// pursuit lookahead bottoms out.
    fn safe_target_speed(&self, obs: &Observation) -> f64 {
        let turn = curve_speed_cap(
            &obs.remaining_route,
            self.params.comfort_decel,
            self.ctx.sensing_radius,
            SHARP_CURVATURE,
            MIN_LOOKAHEAD / LOOKAHEAD_GAIN,
        );
        self.target_speed(obs).min(turn)
    }

    fn naive(&self, obs: &Observation) -> (f64, AgentLog) {
        let lim = &self.ctx.vehicle_limits;
        let target = self.target_speed(obs);
        let accel = (self.params.kp * (target - obs.self_state.speed)).clamp(-lim.max_decel, lim.max_accel);
        (accel, log([("mode", json!("cruise")), ("target_speed", json!(target))]))
    }

    fn safe(&self, obs: &Observation) -> (f64, AgentLog) {
        let lim = &self.ctx.vehicle_limits;
        let me = &obs.self_state;
        let v = me.speed;
        let idm = self.params.idm(self.safe_target_speed(obs));
        let mut accel = idm_acceleration(v, 0.0, f64::INFINITY, &idm, lim.max_decel);
        let mut mode = "cruise";
        let mut lead_id = serde_json::Value::Null;

        if let Some(lead) = find_lead(
            me,
            &obs.remaining_route,
            &obs.nearby_actors,
            self.params.corridor / 2.0,
            self.ctx.sensing_radius,
        ) {
            let a = idm_acceleration(v, lead.speed, lead.gap, &idm, lim.max_decel);
            if a < accel {
                accel = a;
                mode = "follow";
            }
            lead_id = json!(lead.id);
        }

        if let Some(light) = &obs.visible_light {
            let to_line = light.distance - me.extent.length / 2.0;
            let can_stop = v * v / (2.0 * lim.max_decel) <= to_line;
            if light.phase != LightColor::Green && to_line > 0.0 && to_line <= self.params.light_zone && can_stop {
                let a = idm_acceleration(v, 0.0, to_line, &idm, lim.max_decel);
                if a < accel {
                    accel = a;
                    mode = "stop_light";
                }
            }
        }
        (accel, log([("mode", json!(mode)), ("lead", lead_id)]))
    }

    /// True when a conflicting vehicle is in or heading into the junction
    /// ahead while this ego has not yet entered it.
    fn must_yield(&self, obs: &Observation) -> Option<String> {
        let j = obs.junction_ahead.as_ref()?;
        let me = &obs.self_state;
        let center = Vec2::new(j.x, j.y);
        let my_pos = Vec2::new(me.x, me.y);
        if j.distance_to_entry <= 0.0 || my_pos.dist(center) > self.params.yield_zone {
            return None;
        }
        let my_dir = Vec2::from_angle(me.heading);
        for a in &obs.nearby_actors {
            if !a.kind.is_vehicle() {
                continue;
            }
            let pos = Vec2::new(a.x, a.y);
            let to_center = center - pos;
            let d = to_center.norm();
            if d > self.params.yield_zone {
                continue;
            }
            let dir = Vec2::from_angle(a.heading);
            // Traffic queued behind us in the same direction is not a conflict.
            if dir.dot(my_dir) > 0.866 && (pos - my_pos).dot(my_dir) < 0.0 {
                continue;
            }
            let inside = d <= j.radius;
            let approaching = d > 1e-9 && dir.dot(to_center) / d > 0.5;
            if inside || approaching {
                return Some(a.id.clone());
            }
        }
        None
    }
}

fn log<const N: usize>(entries: [(&str, serde_json::Value); N]) -> AgentLog {
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

impl Agent for BuiltinAgent {
    fn run_step(&mut self, obs: &Observation) -> Result<(AgentAction, AgentLog), AgentError> {
        let lim = &self.ctx.vehicle_limits;
        let (accel, log) = match self.kind {
            BuiltinKind::NaiveFollower => self.naive(obs),
            BuiltinKind::SafeFollower => self.safe(obs),
            BuiltinKind::YieldingAgent => match self.must_yield(obs) {
                Some(other) => (-lim.max_decel, log([("mode", json!("yield")), ("lead", json!(other))])),
                None => self.safe(obs),
            },
        };
        let action = AgentAction {
            accel,
            steer: self.steer(obs),
        }
        .clamped(lim);
        Ok((action, log))
    }
}
