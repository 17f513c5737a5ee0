use serde::{Deserialize, Serialize};

use crate::scenario::TrafficLightSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightColor {
    Green,
    Yellow,
    Red,
}

impl LightColor {
    pub fn permits_entry(self) -> bool {
        self == LightColor::Green
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LightPhase {
    pub junction_id: String,
    pub group0: LightColor,
    pub group1: LightColor,
}

/// Phase of both signal groups at time `t`.
///
/// Group 0 runs green, yellow, red over the period `g + y + r`, starting
/// green at `t = 0`. Group 1 is red while group 0 is green or yellow, then
/// green for `r - y` and yellow for the last `y` of group 0's red.
pub fn traffic_light_phase(t: f64, spec: &TrafficLightSpec) -> (LightColor, LightColor) {
    let (g, y, r) = (spec.green_time, spec.yellow_time, spec.red_time);
    let period = g + y + r;
    let tau = t.max(0.0).rem_euclid(period);
    if tau < g {
        (LightColor::Green, LightColor::Red)
    } else if tau < g + y {
        (LightColor::Yellow, LightColor::Red)
    } else {
        let group1_yellow = y.min(r);
        let into_red = tau - g - y;
        let group1 = if into_red < r - group1_yellow {
            LightColor::Green
        } else {
            LightColor::Yellow
        };
        (LightColor::Red, group1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use LightColor::*;

    const SPEC: TrafficLightSpec = TrafficLightSpec {
        green_time: 10.0,
        yellow_time: 3.0,
        red_time: 7.0,
    };

    #[test]
    fn cycle_points() {
        assert_eq!(traffic_light_phase(0.0, &SPEC).0, Green);
        assert_eq!(traffic_light_phase(10.0, &SPEC).0, Yellow);
        assert_eq!(traffic_light_phase(13.0, &SPEC).0, Red);
        assert_eq!(traffic_light_phase(20.0, &SPEC).0, Green);
        assert_eq!(traffic_light_phase(13.0, &SPEC).1, Green);
        assert_eq!(traffic_light_phase(17.0, &SPEC).1, Yellow);
    }

    #[test]
    fn never_both_moving() {
        // Scan three periods at simulator resolution.
        let dt = 0.05;
        let mut counts = [0usize; 2];
        for k in 0..=(60.0 / dt) as usize {
            let (a, b) = traffic_light_phase(k as f64 * dt, &SPEC);
            assert!(a == Red || b == Red, "t={}", k as f64 * dt);
            counts[0] += (a == Green) as usize;
            counts[1] += (b == Green) as usize;
        }
        assert!(counts[0] > 0 && counts[1] > 0);
    }

    #[test]
    fn short_red() {
        let spec = TrafficLightSpec {
            green_time: 5.0,
            yellow_time: 3.0,
            red_time: 2.0,
        };
        for k in 0..400 {
            let (a, b) = traffic_light_phase(k as f64 * 0.05, &spec);
            assert!(a == Red || b == Red);
        }
    }
}
