//! Protocol vectors run against a car over a byte link.
//!
//! The same vectors drive a physical board on a serial port and the
//! in-process emulator, so the emulator can be checked against hardware.

use std::time::{Duration, Instant};

use crate::firmware::{DutyTable, FirmwareState};
use crate::protocol::{encode_command, Command, LineAccumulator, TelemetryEvent};
use crate::transport::{make_loopback_pair, Endpoint, LinkError, LoopbackEndpoint, SerialEndpoint};

/// Something that accepts command bytes and answers with telemetry.
pub trait Target {
    fn send(&mut self, byte: u8) -> Result<(), LinkError>;
    /// Lets `ms` milliseconds pass and returns the bytes received meanwhile.
    fn wait(&mut self, ms: u32) -> Result<Vec<u8>, LinkError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vector {
    pub command: Command,
    pub expect: TelemetryEventKind,
    /// Time to let the car settle afterwards (covers the 500 ms burst).
    pub settle_ms: u32,
}

/// Expected acknowledgement line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TelemetryEventKind {
    Straight,
    Back,
    Left,
    Right,
    Stop,
}

impl TelemetryEventKind {
    pub fn line(self) -> &'static str {
        match self {
            TelemetryEventKind::Straight => "Straight",
            TelemetryEventKind::Back => "Back",
            TelemetryEventKind::Left => "Left",
            TelemetryEventKind::Right => "Right",
            TelemetryEventKind::Stop => "Stop",
        }
    }
}

pub const VECTORS: [Vector; 6] = [
    Vector {
        command: Command::Forward,
        expect: TelemetryEventKind::Straight,
        settle_ms: 600,
    },
    Vector {
        command: Command::Stop,
        expect: TelemetryEventKind::Stop,
        settle_ms: 100,
    },
    Vector {
        command: Command::Left,
        expect: TelemetryEventKind::Left,
        settle_ms: 100,
    },
    Vector {
        command: Command::Right,
        expect: TelemetryEventKind::Right,
        settle_ms: 100,
    },
    Vector {
        command: Command::Back,
        expect: TelemetryEventKind::Back,
        settle_ms: 600,
    },
    Vector {
        command: Command::Stop,
        expect: TelemetryEventKind::Stop,
        settle_ms: 100,
    },
];

#[derive(Debug, Clone, PartialEq)]
pub struct VectorResult {
    pub vector: Vector,
    pub lines: Vec<TelemetryEvent>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConformanceReport {
    pub results: Vec<VectorResult>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }
}

/// Sends every vector and waits up to `timeout_ms` for its line.
pub fn run_conformance<T: Target>(
    target: &mut T,
    timeout_ms: u32,
) -> Result<ConformanceReport, LinkError> {
    const SLICE_MS: u32 = 10;
    let mut acc = LineAccumulator::new();
    let mut results = Vec::new();
    for vector in VECTORS {
        target.send(encode_command(vector.command))?;
        let mut lines = Vec::new();
        let mut waited = 0;
        let mut pass = false;
        while waited < timeout_ms && !pass {
            lines.extend(acc.push(&target.wait(SLICE_MS)?));
            waited += SLICE_MS;
            pass = lines.iter().any(|l| l.line() == vector.expect.line());
        }
        let mut settle = vector.settle_ms;
        while settle > 0 {
            let step = settle.min(SLICE_MS);
            acc.push(&target.wait(step)?);
            settle -= step;
        }
        results.push(VectorResult {
            vector,
            lines,
            pass,
        });
    }
    Ok(ConformanceReport { results })
}

/// The firmware emulator behind a loopback link, on virtual time.
pub struct EmulatedTarget {
    firmware: FirmwareState,
    host: LoopbackEndpoint,
    car: LoopbackEndpoint,
    now_ms: u64,
}

impl EmulatedTarget {
    pub fn new(duties: DutyTable) -> Self {
        let (host, car) = make_loopback_pair();
        Self {
            firmware: FirmwareState::new(duties),
            host,
            car,
            now_ms: 0,
        }
    }
}

impl Default for EmulatedTarget {
    fn default() -> Self {
        Self::new(DutyTable::default())
    }
}

impl Target for EmulatedTarget {
    fn send(&mut self, byte: u8) -> Result<(), LinkError> {
        self.host.send(&[byte], self.now_ms as f64)
    }

    fn wait(&mut self, ms: u32) -> Result<Vec<u8>, LinkError> {
        let mut out = Vec::new();
        let mut left = ms;
        while left > 0 {
            let dt = left.min(10);
            self.now_ms += u64::from(dt);
            let now = self.now_ms as f64;
            let rx = self.car.poll(now)?;
            self.firmware.ingest(&rx);
            self.firmware.step(dt);
            let tx = self.firmware.drain_tx();
            self.car.send(&tx, now)?;
            out.extend(self.host.poll(now)?);
            left -= dt;
        }
        Ok(out)
    }
}

/// A real board on a serial port, on wall-clock time.
pub struct HardwareTarget {
    port: SerialEndpoint,
}

impl HardwareTarget {
    pub fn new(port: SerialEndpoint) -> Self {
        Self { port }
    }
}

impl Target for HardwareTarget {
    fn send(&mut self, byte: u8) -> Result<(), LinkError> {
        self.port.send(&[byte], 0.0)
    }

    fn wait(&mut self, ms: u32) -> Result<Vec<u8>, LinkError> {
        let deadline = Instant::now() + Duration::from_millis(u64::from(ms));
        let mut out = Vec::new();
        loop {
            out.extend(self.port.poll(0.0)?);
            let now = Instant::now();
            if now >= deadline {
                break;
            }
            std::thread::sleep((deadline - now).min(Duration::from_millis(2)));
        }
        Ok(out)
    }
}
