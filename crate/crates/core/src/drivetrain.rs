//! Electrical model from H-bridge pins to wheel speed.
//!
//! Battery sag, a supply current limit and surface load are what make the
//! car slow on rough ground, drain fast with four motors and fail to turn on
//! a weak pack.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::firmware::{HBridgeState, PinLevel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Reverse,
    Coast,
    Brake,
}

impl Direction {
    pub fn is_driven(self) -> bool {
        matches!(self, Direction::Forward | Direction::Reverse)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotorChannelCommand {
    pub direction: Direction,
    pub duty: u8,
}

impl MotorChannelCommand {
    /// Duty that actually reaches the motor.
    pub fn effective_duty(&self) -> u8 {
        if self.direction.is_driven() {
            self.duty
        } else {
            0
        }
    }
}

/// Motor and driver constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotorParams {
    /// Wheel speed per volt at full duty, rad/s/V.
    pub k_v: f64,
    pub tau_driven: f64,
    pub tau_coast: f64,
    pub tau_brake: f64,
    pub omega_max: f64,
    /// Current drawn by one motor at full duty, A.
    pub i_run: f64,
}

impl Default for MotorParams {
    fn default() -> Self {
        Self {
            k_v: 3.3,
            tau_driven: 0.15,
            tau_coast: 0.1,
            tau_brake: 0.05,
            omega_max: 30.0,
            i_run: 1.2,
        }
    }
}

/// Signed wheel speed, rad/s. Positive rolls the car forward.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotorState {
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatteryKind {
    AaAlkaline,
    LiIon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub kind: BatteryKind,
    pub v_nominal: f64,
    /// Remaining charge, mAh.
    pub charge: f64,
    pub charge_full: f64,
    pub r_internal: f64,
    /// Largest current the pack can deliver, A.
    pub i_max: f64,
}

impl BatteryState {
    /// Fresh pack of four AA alkaline cells.
    pub fn aa() -> Self {
        Self {
            kind: BatteryKind::AaAlkaline,
            v_nominal: 6.0,
            charge: 2000.0,
            charge_full: 2000.0,
            r_internal: 0.5,
            i_max: 2.5,
        }
    }

    /// Small 2S lithium-ion pack with a protection circuit limiting current.
    pub fn li_ion() -> Self {
        Self {
            kind: BatteryKind::LiIon,
            v_nominal: 7.4,
            charge: 1000.0,
            charge_full: 1000.0,
            r_internal: 0.3,
            i_max: 0.4,
        }
    }

    pub fn preset(kind: BatteryKind) -> Self {
        match kind {
            BatteryKind::AaAlkaline => Self::aa(),
            BatteryKind::LiIon => Self::li_ion(),
        }
    }

    pub fn state_of_charge(&self) -> f64 {
        if self.charge_full > 0.0 {
            self.charge / self.charge_full
        } else {
            0.0
        }
    }

    pub fn terminal_voltage(&self, i_total: f64) -> f64 {
        battery_terminal_voltage(self, i_total)
    }
}

pub fn battery_terminal_voltage(b: &BatteryState, i_total: f64) -> f64 {
    let open_circuit = b.v_nominal * (0.8 + 0.2 * b.state_of_charge());
    (open_circuit - i_total * b.r_internal).max(0.0)
}

/// Draws `i_total` amps for `dt` seconds.
pub fn battery_step(b: &BatteryState, i_total: f64, dt: f64) -> BatteryState {
    let used_mah = i_total.max(0.0) * 1000.0 * dt / 3600.0;
    BatteryState {
        charge: (b.charge - used_mah).max(0.0),
        ..*b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceModel {
    pub name: String,
    pub mu_roll: f64,
    /// Std-dev of the per-step multiplicative speed noise on each wheel.
    pub roughness_sigma: f64,
}

impl SurfaceModel {
    pub fn smooth() -> Self {
        Self {
            name: "smooth".into(),
            mu_roll: 0.0,
            roughness_sigma: 0.0,
        }
    }

    pub fn rough() -> Self {
        Self {
            name: "rough".into(),
            mu_roll: 0.25,
            roughness_sigma: 0.05,
        }
    }
}

fn channel(hi: PinLevel, lo: PinLevel, duty: u8) -> MotorChannelCommand {
    use PinLevel::{High, Low};
    let direction = match (hi, lo) {
        (High, Low) => Direction::Forward,
        (Low, High) => Direction::Reverse,
        (Low, Low) => Direction::Coast,
        (High, High) => Direction::Brake,
    };
    MotorChannelCommand { direction, duty }
}

/// Splits the bridge into (left, right) channel commands.
pub fn hbridge_decode(pins: &HBridgeState) -> (MotorChannelCommand, MotorChannelCommand) {
    (
        channel(pins.in1, pins.in2, pins.en_a),
        channel(pins.in3, pins.in4, pins.en_b),
    )
}

/// Current drawn by one motor running `cmd`.
pub fn channel_current(cmd: &MotorChannelCommand, params: &MotorParams) -> f64 {
    params.i_run * f64::from(cmd.effective_duty()) / 255.0
}

/// Total current for a side pair, with `motors_per_side` motors on each side.
pub fn demand_current(
    left: &MotorChannelCommand,
    right: &MotorChannelCommand,
    params: &MotorParams,
    motors_per_side: u32,
) -> f64 {
    f64::from(motors_per_side) * (channel_current(left, params) + channel_current(right, params))
}

/// Scales both duties down when the pack cannot supply the demand.
pub fn clamp_drive(
    left: MotorChannelCommand,
    right: MotorChannelCommand,
    battery: &BatteryState,
    params: &MotorParams,
    motors_per_side: u32,
) -> (MotorChannelCommand, MotorChannelCommand) {
    let demand = demand_current(&left, &right, params, motors_per_side);
    if demand <= battery.i_max || demand <= 0.0 {
        return (left, right);
    }
    let scale = battery.i_max / demand;
    let shrink = |c: MotorChannelCommand| {
        if c.direction.is_driven() {
            MotorChannelCommand {
                duty: (f64::from(c.duty) * scale) as u8,
                ..c
            }
        } else {
            c
        }
    };
    (shrink(left), shrink(right))
}

/// Steady-state wheel speed for a driven channel before noise.
pub fn steady_state_omega(
    cmd: &MotorChannelCommand,
    v_term: f64,
    surface: &SurfaceModel,
    params: &MotorParams,
) -> f64 {
    let sign = match cmd.direction {
        Direction::Forward => 1.0,
        Direction::Reverse => -1.0,
        Direction::Coast | Direction::Brake => return 0.0,
    };
    sign * params.k_v * v_term * (f64::from(cmd.duty) / 255.0) / (1.0 + surface.mu_roll)
}

/// Advances one motor by `dt` seconds with an exact first-order response.
///
/// Exactly one standard-normal draw is taken from `rng` per call, whatever
/// the command, so the random stream does not depend on what the car does.
pub fn motor_step<R: Rng + ?Sized>(
    m: MotorState,
    cmd: &MotorChannelCommand,
    v_term: f64,
    surface: &SurfaceModel,
    params: &MotorParams,
    dt: f64,
    rng: &mut R,
) -> MotorState {
    let z: f64 = rng.sample(StandardNormal);
    let (target, tau) = match cmd.direction {
        Direction::Forward | Direction::Reverse => {
            let ss = steady_state_omega(cmd, v_term, surface, params);
            (ss * (1.0 + surface.roughness_sigma * z), params.tau_driven)
        }
        Direction::Coast => (0.0, params.tau_coast),
        Direction::Brake => (0.0, params.tau_brake),
    };
    let omega = target + (m.omega - target) * (-dt / tau).exp();
    MotorState {
        omega: omega.clamp(-params.omega_max, params.omega_max),
    }
}
