//! Byte links between the host and the car.
//!
//! Time is virtual: callers pass `now` in milliseconds and endpoints own no
//! clock. An in-memory loopback pair carries per-byte delivery times so a
//! [`LossyEndpoint`] can add latency, jitter, serialization time and drops
//! on the sending side while keeping each direction in order.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default serial rate, bits per second.
pub const DEFAULT_BAUD: u32 = 9600;

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("cannot open serial device {path}: {source}")]
    Open {
        path: String,
        #[source]
        source: serialport::Error,
    },
    #[error("link down: {0}")]
    Down(#[from] std::io::Error),
}

/// One side of a bidirectional byte link.
pub trait Endpoint: Send {
    /// Queues `bytes` sent at `now` (ms).
    fn send(&mut self, bytes: &[u8], now: f64) -> Result<(), LinkError>;
    /// Everything delivered by `now` (ms), in send order.
    fn poll(&mut self, now: f64) -> Result<Vec<u8>, LinkError>;
}

/// An endpoint that can be told when a byte should arrive at the peer.
pub trait ScheduledSend: Endpoint {
    fn send_at(&mut self, byte: u8, deliver_at: f64);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkConfig {
    /// ms
    pub latency: f64,
    /// Upper bound of the uniform extra delay, ms.
    pub jitter: f64,
    pub drop_prob: f64,
    pub seed: u64,
    pub bytes_per_second: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            latency: 0.0,
            jitter: 0.0,
            drop_prob: 0.0,
            seed: 0,
            bytes_per_second: f64::from(DEFAULT_BAUD) / 10.0,
        }
    }
}

impl LinkConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.latency.is_finite() && self.latency >= 0.0) {
            out.push("link.latency must be >= 0".to_string());
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            out.push("link.jitter must be >= 0".to_string());
        }
        if !(0.0..=1.0).contains(&self.drop_prob) {
            out.push("link.drop_prob must be in [0, 1]".to_string());
        }
        if !(self.bytes_per_second.is_finite() && self.bytes_per_second > 0.0) {
            out.push("link.bytes_per_second must be > 0".to_string());
        }
        out
    }

    /// Time on the wire for one byte, ms.
    pub fn byte_time_ms(&self) -> f64 {
        1000.0 / self.bytes_per_second
    }
}

type Queue = Arc<Mutex<VecDeque<(f64, u8)>>>;

/// In-memory endpoint created by [`make_loopback_pair`].
#[derive(Debug)]
pub struct LoopbackEndpoint {
    outbound: Queue,
    inbound: Queue,
}

/// Two connected endpoints: lossless, zero delay, in order both ways.
pub fn make_loopback_pair() -> (LoopbackEndpoint, LoopbackEndpoint) {
    let a_to_b: Queue = Arc::default();
    let b_to_a: Queue = Arc::default();
    (
        LoopbackEndpoint {
            outbound: a_to_b.clone(),
            inbound: b_to_a.clone(),
        },
        LoopbackEndpoint {
            outbound: b_to_a,
            inbound: a_to_b,
        },
    )
}

impl Endpoint for LoopbackEndpoint {
    fn send(&mut self, bytes: &[u8], now: f64) -> Result<(), LinkError> {
        let mut q = self.outbound.lock().expect("loopback queue poisoned");
        q.extend(bytes.iter().map(|&b| (now, b)));
        Ok(())
    }

    fn poll(&mut self, now: f64) -> Result<Vec<u8>, LinkError> {
        let mut q = self.inbound.lock().expect("loopback queue poisoned");
        let mut out = Vec::new();
        while let Some(&(at, b)) = q.front() {
            if at > now {
                break;
            }
            q.pop_front();
            out.push(b);
        }
        Ok(out)
    }
}

impl ScheduledSend for LoopbackEndpoint {
    fn send_at(&mut self, byte: u8, deliver_at: f64) {
        self.outbound
            .lock()
            .expect("loopback queue poisoned")
            .push_back((deliver_at, byte));
    }
}

/// Delays and drops bytes sent through the wrapped endpoint.
#[derive(Debug)]
pub struct LossyEndpoint<E> {
    inner: E,
    cfg: LinkConfig,
    rng: ChaCha8Rng,
    last_delivery: f64,
}

pub fn wrap_lossy<E: ScheduledSend>(inner: E, cfg: LinkConfig) -> LossyEndpoint<E> {
    LossyEndpoint {
        inner,
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        last_delivery: f64::NEG_INFINITY,
    }
}

impl<E> LossyEndpoint<E> {
    pub fn config(&self) -> &LinkConfig {
        &self.cfg
    }

    pub fn into_inner(self) -> E {
        self.inner
    }
}

impl<E: ScheduledSend> Endpoint for LossyEndpoint<E> {
    fn send(&mut self, bytes: &[u8], now: f64) -> Result<(), LinkError> {
        for &b in bytes {
            // Both draws happen for every byte so the schedule of later bytes
            // does not depend on which earlier ones were dropped.
            let dropped = self.rng.random::<f64>() < self.cfg.drop_prob;
            let jitter = self.rng.random::<f64>() * self.cfg.jitter;
            if dropped {
                continue;
            }
            let at = now + self.cfg.latency + jitter + self.cfg.byte_time_ms();
            let at = at.max(self.last_delivery);
            self.last_delivery = at;
            self.inner.send_at(b, at);
        }
        Ok(())
    }

    fn poll(&mut self, now: f64) -> Result<Vec<u8>, LinkError> {
        self.inner.poll(now)
    }
}

/// Endpoint bridging an OS serial device (8N1). `now` is ignored: the wire
/// runs in real time.
pub struct SerialEndpoint {
    port: Box<dyn serialport::SerialPort>,
}

impl std::fmt::Debug for SerialEndpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SerialEndpoint")
            .field("name", &self.port.name())
            .finish()
    }
}

pub fn open_serial(path: &str, baud: u32) -> Result<SerialEndpoint, LinkError> {
    let port = serialport::new(path, baud)
        .data_bits(serialport::DataBits::Eight)
        .parity(serialport::Parity::None)
        .stop_bits(serialport::StopBits::One)
        .flow_control(serialport::FlowControl::None)
        .timeout(Duration::from_millis(1))
        .open()
        .map_err(|source| LinkError::Open {
            path: path.to_string(),
            source,
        })?;
    Ok(SerialEndpoint { port })
}

impl Endpoint for SerialEndpoint {
    fn send(&mut self, bytes: &[u8], _now: f64) -> Result<(), LinkError> {
        self.port.write_all(bytes)?;
        self.port.flush()?;
        Ok(())
    }

    fn poll(&mut self, _now: f64) -> Result<Vec<u8>, LinkError> {
        let available = self.port.bytes_to_read().map_err(std::io::Error::from)? as usize;
        let mut buf = vec![0u8; available];
        if available > 0 {
            let n = match self.port.read(&mut buf) {
                Ok(n) => n,
                Err(e) if e.kind() == std::io::ErrorKind::TimedOut => 0,
                Err(e) => return Err(e.into()),
            };
            buf.truncate(n);
        }
        Ok(buf)
    }
}
