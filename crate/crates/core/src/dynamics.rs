//! Planar differential-drive kinematics.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Two driven rear wheels and a front caster. A locked caster only rolls
    /// fore and aft.
    TwoWheelCaster { locked: bool },
    /// Skid-steer with two motors per side.
    FourWheel,
}

impl Layout {
    pub fn motors_per_side(self) -> u32 {
        match self {
            Layout::TwoWheelCaster { .. } => 1,
            Layout::FourWheel => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChassisConfig {
    pub wheel_radius: f64,
    pub track_width: f64,
    /// Collision radius of the body.
    pub body_radius: f64,
    pub layout: Layout,
    pub weight_front_fraction: f64,
    /// Yaw noise scale of a free caster, rad/s.
    pub caster_sigma: f64,
}

impl Default for ChassisConfig {
    fn default() -> Self {
        Self {
            wheel_radius: 0.033,
            track_width: 0.14,
            body_radius: DEFAULT_BODY_RADIUS,
            layout: Layout::TwoWheelCaster { locked: true },
            weight_front_fraction: 0.5,
            caster_sigma: 0.15,
        }
    }
}

pub const DEFAULT_BODY_RADIUS: f64 = 0.09;

impl ChassisConfig {
    /// Names of fields that break the config's invariants.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [
            ("wheel_radius", self.wheel_radius),
            ("track_width", self.track_width),
            ("body_radius", self.body_radius),
        ] {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("chassis.{name} must be > 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.weight_front_fraction) {
            out.push("chassis.weight_front_fraction must be in [0, 1]".into());
        }
        if !(self.caster_sigma.is_finite() && self.caster_sigma >= 0.0) {
            out.push("chassis.caster_sigma must be >= 0".into());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Heading, CCW from +x, in (-pi, pi].
    pub theta: f64,
    pub t: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
            t: 0.0,
        }
    }
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Forward speed and yaw rate from wheel speeds. Right faster turns left.
pub fn body_twist(omega_left: f64, omega_right: f64, c: &ChassisConfig) -> (f64, f64) {
    let v = c.wheel_radius * (omega_left + omega_right) / 2.0;
    let omega = c.wheel_radius * (omega_right - omega_left) / c.track_width;
    (v, omega)
}

/// Std-dev of the caster's yaw disturbance; zero when the caster can't swivel.
pub fn caster_noise_scale(c: &ChassisConfig) -> f64 {
    match c.layout {
        Layout::FourWheel | Layout::TwoWheelCaster { locked: true } => 0.0,
        Layout::TwoWheelCaster { locked: false } => {
            c.caster_sigma * (1.0 + 2.0 * (c.weight_front_fraction - 0.5).abs())
        }
    }
}

/// Yaw-rate disturbance for one step. Always takes one draw from `rng`.
pub fn caster_disturbance<R: Rng + ?Sized>(c: &ChassisConfig, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    let scale = caster_noise_scale(c);
    if scale == 0.0 {
        0.0
    } else {
        scale * z
    }
}

/// Integrates constant (v, omega) exactly over `dt` seconds.
pub fn pose_step(p: &Pose, v: f64, omega: f64, dt: f64) -> Pose {
    let (x, y) = if omega.abs() < 1e-9 {
        (p.x + v * p.theta.cos() * dt, p.y + v * p.theta.sin() * dt)
    } else {
        // Chord of the arc: same as (v/omega)(sin(th1) - sin(th0)) etc., but
        // without the cancellation when omega is tiny.
        let half = omega * dt / 2.0;
        let chord = v * dt * half.sin() / half;
        let mid = p.theta + half;
        (p.x + chord * mid.cos(), p.y + chord * mid.sin())
    };
    Pose {
        x,
        y,
        theta: normalize_angle(p.theta + omega * dt),
        t: p.t + dt,
    }
}
