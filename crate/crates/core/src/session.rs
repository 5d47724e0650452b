//! Fixed-timestep simulation of one car on one course.
//!
//! A [`Session`] owns the whole pipeline on a virtual clock:
//! host link, firmware, drivetrain, kinematics and course scoring. Given the
//! same [`SessionConfig`] and the same client byte schedule it produces the
//! same event stream, bit for bit, which is what record and replay rely on.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::course::{self, check_collision, Course, EpisodeCounter};
use crate::drivetrain::{
    battery_step, clamp_drive, demand_current, hbridge_decode, motor_step, BatteryState,
    MotorParams, MotorState, SurfaceModel,
};
use crate::dynamics::{body_twist, caster_disturbance, pose_step, ChassisConfig, Pose};
use crate::firmware::{DutyTable, FirmwareState, MAX_STEP_MS};
use crate::protocol::{encode_command, Command, LineAccumulator, TelemetryEvent};
use crate::transport::{
    make_loopback_pair, wrap_lossy, Endpoint, LinkConfig, LoopbackEndpoint, LossyEndpoint,
};

pub const RUNLOG_FORMAT: &str = "cargame-runlog";
pub const RUNLOG_VERSION: u32 = 1;

/// Fraction of nominal voltage (unloaded) below which `BatteryLow` fires.
pub const BATTERY_LOW_FRACTION: f64 = 0.85;

// Independent random streams derived from the session seed.
const MOTOR_STREAM: u64 = 1;
const CASTER_STREAM: u64 = 2;
const UPLINK_SALT: u64 = 0x6361_7267_616d_6531;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Step length, ms (1..=50).
    pub tick: u32,
    #[serde(default)]
    pub chassis: ChassisConfig,
    pub battery: BatteryState,
    pub surface: SurfaceModel,
    #[serde(default)]
    pub link: LinkConfig,
    pub course: Course,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub motor: MotorParams,
    #[serde(default)]
    pub duties: DutyTable,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            tick: 10,
            chassis: ChassisConfig::default(),
            battery: BatteryState::aa(),
            surface: SurfaceModel::smooth(),
            link: LinkConfig::default(),
            course: Course::default(),
            seed: 0,
            motor: MotorParams::default(),
            duties: DutyTable::default(),
        }
    }
}

#[derive(Debug, Error)]
#[error("invalid session config: {}", .0.join("; "))]
pub struct ConfigError(pub Vec<String>);

impl SessionConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(1..=MAX_STEP_MS).contains(&self.tick) {
            out.push(format!(
                "tick must be 1..={MAX_STEP_MS} ms, got {}",
                self.tick
            ));
        }
        out.extend(self.chassis.problems());
        out.extend(self.link.problems());
        let b = &self.battery;
        if !(b.v_nominal > 0.0 && b.charge_full > 0.0 && b.r_internal >= 0.0 && b.i_max >= 0.0)
            || !(0.0..=b.charge_full).contains(&b.charge)
        {
            out.push("battery parameters out of range".into());
        }
        let s = &self.surface;
        if !(s.mu_roll >= 0.0 && s.roughness_sigma >= 0.0) {
            out.push("surface coefficients must be >= 0".into());
        }
        let m = &self.motor;
        if !(m.k_v >= 0.0
            && m.tau_driven > 0.0
            && m.tau_coast > 0.0
            && m.tau_brake > 0.0
            && m.omega_max > 0.0
            && m.i_run >= 0.0)
        {
            out.push("motor parameters out of range".into());
        }
        out.extend(
            course::validate(&self.course)
                .into_iter()
                .map(|v| format!("course: {v}")),
        );
        out
    }
}

/// Car state reported once per tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub omega_left: f64,
    pub omega_right: f64,
    pub battery_volts: f64,
}

impl PoseSample {
    pub fn pose(&self) -> Pose {
        Pose {
            x: self.x,
            y: self.y,
            theta: self.theta,
            t: self.t,
        }
    }

    fn bits(&self) -> [u64; 7] {
        [
            self.t.to_bits(),
            self.x.to_bits(),
            self.y.to_bits(),
            self.theta.to_bits(),
            self.omega_left.to_bits(),
            self.omega_right.to_bits(),
            self.battery_volts.to_bits(),
        ]
    }

    pub fn bitwise_eq(&self, other: &PoseSample) -> bool {
        self.bits() == other.bits()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum SessionEvent {
    CommandAccepted { t: f64, command: Command },
    Telemetry { t: f64, line: TelemetryEvent },
    PoseUpdate(PoseSample),
    Collision { t: f64, obstacle_id: u32 },
    GoalReached { t: f64 },
    BatteryLow { t: f64, volts: f64 },
}

impl SessionEvent {
    pub fn t(&self) -> f64 {
        match self {
            SessionEvent::CommandAccepted { t, .. }
            | SessionEvent::Telemetry { t, .. }
            | SessionEvent::Collision { t, .. }
            | SessionEvent::GoalReached { t }
            | SessionEvent::BatteryLow { t, .. } => *t,
            SessionEvent::PoseUpdate(p) => p.t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    /// Session time the bytes were sent, ms.
    pub t_ms: u64,
    pub bytes: Vec<u8>,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub format: String,
    pub v: u32,
    pub config: SessionConfig,
    pub entries: Vec<LogEntry>,
    /// Number of ticks simulated.
    pub ticks: u64,
    pub trace_hash: String,
    #[serde(default)]
    pub trace: Vec<PoseSample>,
}

impl RunLog {
    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("run log always serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<RunLog, ReplayError> {
        serde_json::from_slice(bytes).map_err(|e| ReplayError::Malformed(e.to_string()))
    }
}

/// SHA-256 over the bit patterns of every sample, hex encoded.
pub fn trace_hash(trace: &[PoseSample]) -> String {
    let mut h = Sha256::new();
    for s in trace {
        for word in s.bits() {
            h.update(word.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("malformed run log: {0}")]
    Malformed(String),
    #[error("unsupported run log {format:?} version {v}")]
    Version { format: String, v: u32 },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub trace: Vec<PoseSample>,
    pub trace_hash: String,
    /// Index of the first tick whose sample differs from the recorded trace.
    pub first_divergence: Option<u64>,
}

impl ReplayReport {
    pub fn verified(&self, log: &RunLog) -> bool {
        self.trace_hash == log.trace_hash && self.first_divergence.is_none()
    }
}

#[derive(Debug, Default)]
struct Recorder {
    entries: Vec<LogEntry>,
    trace: Vec<PoseSample>,
}

pub struct Session {
    cfg: SessionConfig,
    now_ms: u64,
    ticks: u64,
    host: LossyEndpoint<LoopbackEndpoint>,
    car: LossyEndpoint<LoopbackEndpoint>,
    firmware: FirmwareState,
    telemetry: LineAccumulator,
    left: MotorState,
    right: MotorState,
    battery: BatteryState,
    pose: Pose,
    volts: f64,
    motor_rng: ChaCha8Rng,
    caster_rng: ChaCha8Rng,
    episodes: EpisodeCounter,
    goal_reached: bool,
    battery_low: bool,
    pending: Vec<SessionEvent>,
    recorder: Option<Recorder>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl Session {
    pub fn new(cfg: SessionConfig) -> Result<Session, ConfigError> {
        let problems = cfg.problems();
        if !problems.is_empty() {
            return Err(ConfigError(problems));
        }
        let (host, car) = make_loopback_pair();
        let downlink = cfg.link;
        let uplink = LinkConfig {
            seed: cfg.link.seed ^ UPLINK_SALT,
            ..cfg.link
        };
        Ok(Session {
            now_ms: 0,
            ticks: 0,
            host: wrap_lossy(host, downlink),
            car: wrap_lossy(car, uplink),
            firmware: FirmwareState::new(cfg.duties),
            telemetry: LineAccumulator::new(),
            left: MotorState::default(),
            right: MotorState::default(),
            battery: cfg.battery,
            pose: cfg.course.start,
            volts: cfg.battery.terminal_voltage(0.0),
            motor_rng: stream(cfg.seed, MOTOR_STREAM),
            caster_rng: stream(cfg.seed, CASTER_STREAM),
            episodes: EpisodeCounter::default(),
            goal_reached: false,
            battery_low: false,
            pending: Vec::new(),
            recorder: None,
            cfg,
        })
    }

    /// Restarts from power-on on `course` (or the current one). Recording,
    /// if enabled, restarts too.
    pub fn reset(&mut self, course: Option<Course>) -> Result<(), ConfigError> {
        let mut cfg = self.cfg.clone();
        if let Some(c) = course {
            cfg.course = c;
        }
        let recording = self.recorder.is_some();
        *self = Session::new(cfg)?;
        if recording {
            self.start_recording();
        }
        Ok(())
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn wheel_speeds(&self) -> (f64, f64) {
        (self.left.omega, self.right.omega)
    }

    pub fn battery(&self) -> &BatteryState {
        &self.battery
    }

    pub fn firmware(&self) -> &FirmwareState {
        &self.firmware
    }

    pub fn collision_count(&self) -> u32 {
        self.episodes.count
    }

    pub fn goal_reached(&self) -> bool {
        self.goal_reached
    }

    pub fn start_recording(&mut self) {
        self.recorder = Some(Recorder::default());
    }

    /// Raw bytes from a client down the host-to-car link.
    pub fn send_bytes(&mut self, bytes: &[u8]) {
        let now = self.now_ms as f64;
        self.host
            .send(bytes, now)
            .expect("in-memory link cannot fail");
        if let Some(rec) = &mut self.recorder {
            rec.entries.push(LogEntry {
                t_ms: self.now_ms,
                bytes: bytes.to_vec(),
            });
        }
    }

    /// Sends one command; a `CommandAccepted` event leads the next tick's output.
    pub fn send_command(&mut self, cmd: Command) {
        self.send_bytes(&[encode_command(cmd)]);
        self.pending.push(SessionEvent::CommandAccepted {
            t: self.now_ms as f64 / 1000.0,
            command: cmd,
        });
    }

    /// Advances one tick.
    pub fn tick(&mut self) -> Vec<SessionEvent> {
        let mut events = std::mem::take(&mut self.pending);
        let cfg = &self.cfg;
        let dt = f64::from(cfg.tick) / 1000.0;
        self.now_ms += u64::from(cfg.tick);
        self.ticks += 1;
        let now = self.now_ms as f64;
        let t = now / 1000.0;

        let rx = self.car.poll(now).expect("in-memory link cannot fail");
        self.firmware.ingest(&rx);
        self.firmware.step(cfg.tick);
        let tx = self.firmware.drain_tx();
        self.car.send(&tx, now).expect("in-memory link cannot fail");
        let up = self.host.poll(now).expect("in-memory link cannot fail");
        events.extend(
            self.telemetry
                .push(&up)
                .into_iter()
                .map(|line| SessionEvent::Telemetry { t, line }),
        );

        let per_side = cfg.chassis.layout.motors_per_side();
        let (l, r) = hbridge_decode(&self.firmware.hbridge);
        let (l, r) = clamp_drive(l, r, &self.battery, &cfg.motor, per_side);
        let current = demand_current(&l, &r, &cfg.motor, per_side);
        let volts = self.battery.terminal_voltage(current);
        self.left = motor_step(
            self.left,
            &l,
            volts,
            &cfg.surface,
            &cfg.motor,
            dt,
            &mut self.motor_rng,
        );
        self.right = motor_step(
            self.right,
            &r,
            volts,
            &cfg.surface,
            &cfg.motor,
            dt,
            &mut self.motor_rng,
        );
        self.battery = battery_step(&self.battery, current, dt);
        self.volts = volts;

        let (v, yaw) = body_twist(self.left.omega, self.right.omega, &cfg.chassis);
        let yaw = yaw + caster_disturbance(&cfg.chassis, &mut self.caster_rng);
        let mut pose = pose_step(&self.pose, v, yaw, dt);
        pose.t = t;
        self.pose = pose;

        let sample = PoseSample {
            t,
            x: pose.x,
            y: pose.y,
            theta: pose.theta,
            omega_left: self.left.omega,
            omega_right: self.right.omega,
            battery_volts: volts,
        };
        events.push(SessionEvent::PoseUpdate(sample));
        if let Some(rec) = &mut self.recorder {
            rec.trace.push(sample);
        }

        let hit = check_collision(&pose, cfg.chassis.body_radius, &cfg.course);
        if self.episodes.observe(hit.is_some()) {
            events.push(SessionEvent::Collision {
                t,
                obstacle_id: hit.expect("episode starts on contact"),
            });
        }
        if !self.goal_reached && cfg.course.goal.contains(pose.x, pose.y) {
            self.goal_reached = true;
            events.push(SessionEvent::GoalReached { t });
        }
        let idle = self.battery.terminal_voltage(0.0);
        if !self.battery_low && idle < BATTERY_LOW_FRACTION * self.battery.v_nominal {
            self.battery_low = true;
            events.push(SessionEvent::BatteryLow { t, volts: idle });
        }
        events
    }

    /// Runs `n` ticks and returns all their events.
    pub fn run_ticks(&mut self, n: u64) -> Vec<SessionEvent> {
        let mut out = Vec::new();
        for _ in 0..n {
            out.extend(self.tick());
        }
        out
    }

    /// Snapshot of the recording so far. Empty entries and trace if
    /// recording was never started.
    pub fn record(&self) -> RunLog {
        let (entries, trace) = match &self.recorder {
            Some(r) => (r.entries.clone(), r.trace.clone()),
            None => (Vec::new(), Vec::new()),
        };
        RunLog {
            format: RUNLOG_FORMAT.to_string(),
            v: RUNLOG_VERSION,
            config: self.cfg.clone(),
            entries,
            ticks: self.ticks,
            trace_hash: trace_hash(&trace),
            trace,
        }
    }
}

/// Re-runs a recorded session and compares its trace with the recording.
pub fn replay(log: &RunLog) -> Result<ReplayReport, ReplayError> {
    if log.format != RUNLOG_FORMAT || log.v != RUNLOG_VERSION {
        return Err(ReplayError::Version {
            format: log.format.clone(),
            v: log.v,
        });
    }
    let mut session = Session::new(log.config.clone())?;
    let mut entries = log.entries.iter().peekable();
    let mut trace = Vec::with_capacity(log.ticks.min(1 << 16) as usize);
    for _ in 0..log.ticks {
        while let Some(e) = entries.next_if(|e| e.t_ms <= session.now_ms()) {
            session.send_bytes(&e.bytes);
        }
        for ev in session.tick() {
            if let SessionEvent::PoseUpdate(s) = ev {
                trace.push(s);
            }
        }
    }
    let first_divergence = trace
        .iter()
        .zip(&log.trace)
        .position(|(a, b)| !a.bitwise_eq(b))
        .or_else(|| {
            (!log.trace.is_empty() && log.trace.len() != trace.len())
                .then(|| trace.len().min(log.trace.len()))
        })
        .map(|i| i as u64);
    Ok(ReplayReport {
        trace_hash: trace_hash(&trace),
        trace,
        first_divergence,
    })
}

/// Final score of a recorded trace against its course.
pub fn score_trace(trace: &[PoseSample], cfg: &SessionConfig) -> course::RunResult {
    let points: Vec<_> = trace
        .iter()
        .map(|s| {
            let pose = s.pose();
            course::TracePoint {
                pose,
                collision: check_collision(&pose, cfg.chassis.body_radius, &cfg.course),
            }
        })
        .collect();
    course::score(&points, &cfg.course)
}
