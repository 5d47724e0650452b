//! Emulator of the car's Arduino sketch.
//!
//! The sketch reads serial bytes into a `check` intent variable, then runs an
//! execution table that sets the H-bridge direction pins and PWM enables.
//! Forward and back start with a blocking 500 ms full-duty burst before
//! settling to the sustain duty; no serial input is processed during it.
//!
//! The action block runs only when the intent changes, so holding a key or
//! resending the same byte produces a single acknowledgement line.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::protocol::{decode_command, Command, TelemetryEvent};

/// Hardware serial receive ring size.
pub const RX_CAPACITY: usize = 64;
/// Length of the start-up burst, ms.
pub const BOOST_MS: u32 = 500;
/// Duty applied during the burst.
pub const BOOST_DUTY: u8 = 255;
/// Largest step the emulator accepts, ms.
pub const MAX_STEP_MS: u32 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum PinLevel {
    High,
    #[default]
    Low,
}

use PinLevel::{High, Low};

/// Direction inputs and enable duties of the dual H-bridge.
///
/// Channel A (`in1`, `in2`, `en_a`) drives the left side, channel B
/// (`in3`, `in4`, `en_b`) the right side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct HBridgeState {
    pub in1: PinLevel,
    pub in2: PinLevel,
    pub in3: PinLevel,
    pub in4: PinLevel,
    pub en_a: u8,
    pub en_b: u8,
}

impl HBridgeState {
    pub fn pins(&self) -> [PinLevel; 4] {
        [self.in1, self.in2, self.in3, self.in4]
    }

    pub fn duties(&self) -> (u8, u8) {
        (self.en_a, self.en_b)
    }
}

/// The sketch's `check` variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum MotionIntent {
    #[default]
    None,
    Forward,
    Left,
    Back,
    Right,
    Stop,
}

impl From<Command> for MotionIntent {
    fn from(cmd: Command) -> Self {
        match cmd {
            Command::Forward => MotionIntent::Forward,
            Command::Left => MotionIntent::Left,
            Command::Back => MotionIntent::Back,
            Command::Right => MotionIntent::Right,
            Command::Stop => MotionIntent::Stop,
        }
    }
}

impl MotionIntent {
    pub fn command(self) -> Option<Command> {
        match self {
            MotionIntent::None => None,
            MotionIntent::Forward => Some(Command::Forward),
            MotionIntent::Left => Some(Command::Left),
            MotionIntent::Back => Some(Command::Back),
            MotionIntent::Right => Some(Command::Right),
            MotionIntent::Stop => Some(Command::Stop),
        }
    }
}

/// Sustain duties per intent. Turns spin the outer side faster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DutyTable {
    pub straight: u8,
    pub turn_fast: u8,
    pub turn_slow: u8,
}

impl Default for DutyTable {
    fn default() -> Self {
        Self {
            straight: 100,
            turn_fast: 200,
            turn_slow: 60,
        }
    }
}

/// One row of the execution table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Action {
    /// Pins with the sustain duties already applied.
    pub sustain: HBridgeState,
    pub boost: bool,
}

/// Row of the execution table for `intent`, or `None` for [`MotionIntent::None`].
pub fn execution_table(intent: MotionIntent, duties: &DutyTable) -> Option<Action> {
    let fwd = |en_a, en_b| HBridgeState {
        in1: High,
        in2: Low,
        in3: High,
        in4: Low,
        en_a,
        en_b,
    };
    let action = match intent {
        MotionIntent::None => return None,
        MotionIntent::Forward => Action {
            sustain: fwd(duties.straight, duties.straight),
            boost: true,
        },
        MotionIntent::Back => Action {
            sustain: HBridgeState {
                in1: Low,
                in2: High,
                in3: Low,
                in4: High,
                en_a: duties.straight,
                en_b: duties.straight,
            },
            boost: true,
        },
        MotionIntent::Left => Action {
            sustain: fwd(duties.turn_slow, duties.turn_fast),
            boost: false,
        },
        MotionIntent::Right => Action {
            sustain: fwd(duties.turn_fast, duties.turn_slow),
            boost: false,
        },
        MotionIntent::Stop => Action {
            sustain: HBridgeState::default(),
            boost: false,
        },
    };
    Some(action)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FirmwareState {
    pub check: MotionIntent,
    pub hbridge: HBridgeState,
    /// Remaining burst time, ms.
    pub boost_remaining: u32,
    rx: VecDeque<u8>,
    tx: Vec<u8>,
    duties: DutyTable,
    // Sustain duties to fall back to when the burst ends.
    sustain: (u8, u8),
}

impl FirmwareState {
    pub fn new(duties: DutyTable) -> Self {
        Self {
            duties,
            ..Self::default()
        }
    }

    pub fn rx_buffer(&self) -> impl ExactSizeIterator<Item = &u8> + '_ {
        self.rx.iter()
    }

    pub fn rx_len(&self) -> usize {
        self.rx.len()
    }

    pub fn tx_pending(&self) -> &[u8] {
        &self.tx
    }

    pub fn duty_table(&self) -> &DutyTable {
        &self.duties
    }

    /// Appends a received byte; dropped when the ring is full.
    pub fn ingest_byte(&mut self, b: u8) {
        if self.rx.len() < RX_CAPACITY {
            self.rx.push_back(b);
        }
    }

    pub fn ingest(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.ingest_byte(b);
        }
    }

    /// Advances the sketch by `dt_ms` (1..=50).
    pub fn step(&mut self, dt_ms: u32) {
        assert!(
            (1..=MAX_STEP_MS).contains(&dt_ms),
            "firmware step must be 1..={MAX_STEP_MS} ms, got {dt_ms}"
        );
        if self.boost_remaining > 0 {
            // delay() blocks the loop; bytes stay in the ring.
            self.boost_remaining = self.boost_remaining.saturating_sub(dt_ms);
            if self.boost_remaining == 0 {
                self.hbridge.en_a = self.sustain.0;
                self.hbridge.en_b = self.sustain.1;
            }
            return;
        }

        let before = self.check;
        while let Some(b) = self.rx.pop_front() {
            if let Some(cmd) = decode_command(b) {
                self.check = cmd.into();
            }
        }
        if self.check == before {
            return;
        }
        let Some(action) = execution_table(self.check, &self.duties) else {
            return;
        };
        self.hbridge = action.sustain;
        self.sustain = action.sustain.duties();
        if action.boost {
            self.hbridge.en_a = BOOST_DUTY;
            self.hbridge.en_b = BOOST_DUTY;
            self.boost_remaining = BOOST_MS - dt_ms;
        }
        if let Some(cmd) = self.check.command() {
            self.tx
                .extend_from_slice(TelemetryEvent::for_command(cmd).line().as_bytes());
            self.tx.extend_from_slice(b"\r\n");
        }
    }

    /// Takes everything the sketch has printed so far.
    pub fn drain_tx(&mut self) -> Vec<u8> {
        std::mem::take(&mut self.tx)
    }

    /// Power-on state. The duty table is configuration and survives.
    pub fn reset(&mut self) {
        *self = Self::new(self.duties);
    }
}
