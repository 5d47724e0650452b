//! Wire codec between the host and the car.
//!
//! Host to car: one byte per drive command. Car to host: ASCII lines
//! terminated by `\r\n` (a bare `\n` is accepted too).

use std::fmt;

use serde::{Deserialize, Serialize};

/// Longest telemetry line kept before the accumulator gives up on it.
pub const MAX_LINE: usize = 256;

/// One of the five drive commands understood by the firmware.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Forward,
    Left,
    Back,
    Right,
    Stop,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::Forward,
        Command::Left,
        Command::Back,
        Command::Right,
        Command::Stop,
    ];

    /// The key character sent on the wire.
    pub fn key(self) -> char {
        encode_command(self) as char
    }

    /// Parses a key string such as `"w"`.
    pub fn from_key(key: &str) -> Option<Command> {
        match key.as_bytes() {
            [b] => decode_command(*b),
            _ => None,
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Command::Forward => "forward",
            Command::Left => "left",
            Command::Back => "back",
            Command::Right => "right",
            Command::Stop => "stop",
        };
        f.write_str(name)
    }
}

pub fn encode_command(cmd: Command) -> u8 {
    match cmd {
        Command::Forward => b'w',
        Command::Left => b'a',
        Command::Back => b's',
        Command::Right => b'd',
        Command::Stop => b'h',
    }
}

/// Any byte outside the five-letter alphabet is silently not a command.
pub fn decode_command(b: u8) -> Option<Command> {
    match b {
        b'w' => Some(Command::Forward),
        b'a' => Some(Command::Left),
        b's' => Some(Command::Back),
        b'd' => Some(Command::Right),
        b'h' => Some(Command::Stop),
        _ => None,
    }
}

/// A line printed back by the firmware after it executes an intent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TelemetryEvent {
    MovedStraight,
    MovedBack,
    TurnedLeft,
    TurnedRight,
    Stopped,
    Unknown(String),
}

impl TelemetryEvent {
    pub fn parse_line(line: &str) -> TelemetryEvent {
        match line {
            "Straight" => TelemetryEvent::MovedStraight,
            "Back" => TelemetryEvent::MovedBack,
            "Left" => TelemetryEvent::TurnedLeft,
            "Right" => TelemetryEvent::TurnedRight,
            "Stop" => TelemetryEvent::Stopped,
            other => TelemetryEvent::Unknown(other.to_string()),
        }
    }

    /// The line text, without terminator.
    pub fn line(&self) -> &str {
        match self {
            TelemetryEvent::MovedStraight => "Straight",
            TelemetryEvent::MovedBack => "Back",
            TelemetryEvent::TurnedLeft => "Left",
            TelemetryEvent::TurnedRight => "Right",
            TelemetryEvent::Stopped => "Stop",
            TelemetryEvent::Unknown(raw) => raw,
        }
    }

    /// Acknowledgement line for an executed command.
    pub fn for_command(cmd: Command) -> TelemetryEvent {
        match cmd {
            Command::Forward => TelemetryEvent::MovedStraight,
            Command::Back => TelemetryEvent::MovedBack,
            Command::Left => TelemetryEvent::TurnedLeft,
            Command::Right => TelemetryEvent::TurnedRight,
            Command::Stop => TelemetryEvent::Stopped,
        }
    }
}

impl Serialize for TelemetryEvent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.line())
    }
}

impl<'de> Deserialize<'de> for TelemetryEvent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let line = String::deserialize(d)?;
        Ok(TelemetryEvent::parse_line(&line))
    }
}

/// Reassembles telemetry lines from arbitrarily chunked bytes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LineAccumulator {
    pending: Vec<u8>,
    // Set after a '\r' terminated a line so that a following '\n' is swallowed,
    // even when it arrives in the next chunk.
    after_cr: bool,
}

impl LineAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pending(&self) -> &[u8] {
        &self.pending
    }

    /// Feeds bytes and returns every line completed by them, in order.
    pub fn push(&mut self, bytes: &[u8]) -> Vec<TelemetryEvent> {
        let mut events = Vec::new();
        for &b in bytes {
            let after_cr = std::mem::replace(&mut self.after_cr, false);
            match b {
                b'\n' if after_cr => {}
                b'\n' => events.push(self.take_line()),
                b'\r' => {
                    events.push(self.take_line());
                    self.after_cr = true;
                }
                _ => {
                    if self.pending.len() == MAX_LINE {
                        events.push(TelemetryEvent::Unknown(lossy(&self.pending)));
                        self.pending.clear();
                    }
                    self.pending.push(b);
                }
            }
        }
        events
    }

    fn take_line(&mut self) -> TelemetryEvent {
        let line = lossy(&self.pending);
        self.pending.clear();
        TelemetryEvent::parse_line(&line)
    }
}

fn lossy(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

/// Value-style wrapper over [`LineAccumulator::push`].
pub fn accumulate_telemetry(
    mut acc: LineAccumulator,
    bytes: &[u8],
) -> (LineAccumulator, Vec<TelemetryEvent>) {
    let events = acc.push(bytes);
    (acc, events)
}
