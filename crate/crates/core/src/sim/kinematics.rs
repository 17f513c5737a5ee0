use crate::geometry::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KinematicState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

impl KinematicState {
    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.heading)
    }
}

/// One forward-Euler step of the kinematic bicycle model. Speed is updated
/// first and the post-update speed drives both the heading and the position.
pub fn kinematic_bicycle_step(
    state: KinematicState,
    accel: f64,
    steer: f64,
    wheelbase: f64,
    max_speed: f64,
    dt: f64,
) -> KinematicState {
    let speed = (state.speed + accel * dt).clamp(0.0, max_speed);
    let heading = state.heading + speed / wheelbase * steer.tan() * dt;
    KinematicState {
        x: state.x + speed * heading.cos() * dt,
        y: state.y + speed * heading.sin() * dt,
        heading,
        speed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_rest() {
        let s = kinematic_bicycle_step(KinematicState::default(), 1.0, 0.0, 2.8, 15.0, 0.05);
        assert!((s.speed - 0.05).abs() < 1e-15);
        assert!((s.x - 0.0025).abs() < 1e-15);
        assert_eq!(s.y, 0.0);
        assert_eq!(s.heading, 0.0);
    }

    #[test]
    fn straight_line() {
        let mut s = KinematicState {
            speed: 5.0,
            heading: 0.7,
            ..Default::default()
        };
        for _ in 0..100 {
            s = kinematic_bicycle_step(s, 0.0, 0.0, 2.8, 15.0, 0.05);
        }
        assert_eq!(s.heading, 0.7);
        assert!((s.x.hypot(s.y) - 25.0).abs() < 1e-9);
        assert!((s.y.atan2(s.x) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn speed_never_negative() {
        let s = KinematicState {
            speed: 1.0,
            ..Default::default()
        };
        let s = kinematic_bicycle_step(s, -100.0, 0.0, 2.8, 15.0, 0.05);
        assert_eq!(s.speed, 0.0);
        let s = kinematic_bicycle_step(s, 1e6, 0.0, 2.8, 15.0, 0.05);
        assert_eq!(s.speed, 15.0);
    }

    #[test]
    fn circular_arc() {
        // tan(steer) = wheelbase / R gives heading rate v / R.
        let (wb, r, v, dt): (f64, f64, f64, f64) = (2.8, 20.0, 5.0, 0.05);
        let steer = (wb / r).atan();
        let mut s = KinematicState {
            speed: v,
            ..Default::default()
        };
        let mut max_radius_err: f64 = 0.0;
        for k in 1..=200 {
            s = kinematic_bicycle_step(s, 0.0, steer, wb, 15.0, dt);
            let expected = v * (k as f64 * dt) / r;
            assert!((s.heading - expected).abs() <= 0.01 * expected);
            // Circle centre at (0, R) for a left turn starting at the origin.
            let radius = s.x.hypot(s.y - r);
            max_radius_err = max_radius_err.max((radius - r).abs() / r);
        }
        assert!(max_radius_err < 0.01, "{max_radius_err}");
    }
}
