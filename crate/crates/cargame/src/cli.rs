//! `cargame` command line.
//!
//! Exit codes: 0 success, 1 validation or verification failure, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use cargame_core::conformance::{self, EmulatedTarget, HardwareTarget};
use cargame_core::course::{self, Course};
use cargame_core::drivetrain::{BatteryState, SurfaceModel};
use cargame_core::dynamics::{ChassisConfig, Layout};
use cargame_core::session::{self, RunLog};
use cargame_core::transport::{self, LinkConfig, DEFAULT_BAUD};
use cargame_core::wire::ServerMessage;
use cargame_core::{Command, Session, SessionConfig, SessionEvent};
use clap::{Parser, Subcommand, ValueEnum};

use crate::service::{self, ServiceOptions, DEFAULT_ADDR};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "cargame",
    version,
    about = "Simulate, serve and verify the Arduino car"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run a simulation, headless or as a WebSocket service.
    Sim(SimArgs),
    /// Re-run a recorded log.
    Replay {
        #[arg(long)]
        log: PathBuf,
        /// Fail unless the replayed trace matches the recording bit for bit.
        #[arg(long)]
        verify: bool,
    },
    /// Check a course file.
    Validate {
        #[arg(long)]
        course: PathBuf,
    },
    /// Run the protocol vectors against a board on a serial port.
    Conformance {
        #[arg(
            long,
            required_unless_present = "emulated",
            conflicts_with = "emulated"
        )]
        port: Option<String>,
        #[arg(long, default_value_t = DEFAULT_BAUD)]
        baud: u32,
        /// Use the built-in firmware emulator instead of hardware.
        #[arg(long)]
        emulated: bool,
        /// How long to wait for each acknowledgement, ms.
        #[arg(long, default_value_t = 1500)]
        timeout: u32,
        /// Wait after opening the port for the board to reboot, ms.
        #[arg(long, default_value_t = 2000)]
        boot_wait: u32,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SurfaceArg {
    Smooth,
    Rough,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BatteryArg {
    Aa,
    Liion,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LayoutArg {
    Caster,
    CasterLocked,
    #[value(name = "4wd")]
    FourWheel,
}

#[derive(Debug, clap::Args)]
struct SimArgs {
    #[arg(long)]
    course: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "smooth")]
    surface: SurfaceArg,
    #[arg(long, value_enum, default_value = "aa")]
    battery: BatteryArg,
    #[arg(long, value_enum, default_value = "caster-locked")]
    layout: LayoutArg,
    #[arg(long, default_value_t = 0.0)]
    link_latency: f64,
    #[arg(long, default_value_t = 0.0)]
    link_jitter: f64,
    #[arg(long, default_value_t = 0.0)]
    drop: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tick length, ms.
    #[arg(long, default_value_t = 10)]
    tick: u32,
    /// Listen address for the WebSocket service (default from CARGAME_ADDR or 127.0.0.1:7707).
    #[arg(long, value_name = "ADDR", num_args = 0..=1, conflicts_with = "headless")]
    serve: Option<Option<String>>,
    /// Run as fast as possible without a service.
    #[arg(long)]
    headless: bool,
    /// Write a run log here when the run ends.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Simulated seconds (headless, default 10) or wall seconds (serve, default forever).
    #[arg(long)]
    duration: Option<f64>,
    /// Timed keys for headless runs, e.g. "0:w,2000:a,3500:h" (ms:key).
    #[arg(long, requires = "headless")]
    script: Option<String>,
    /// Course library used by course_save / course_load.
    #[arg(long, default_value = "courses")]
    courses: PathBuf,
}

/// Parses `ms:key` pairs.
pub fn parse_script(script: &str) -> Result<Vec<(u64, Command)>, String> {
    let mut out = Vec::new();
    for item in script.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (t, key) = item
            .split_once(':')
            .ok_or_else(|| format!("script item {item:?} is not ms:key"))?;
        let t: u64 = t
            .trim()
            .parse()
            .map_err(|_| format!("bad time in script item {item:?}"))?;
        let cmd =
            Command::from_key(key.trim()).ok_or_else(|| format!("unknown key in {item:?}"))?;
        out.push((t, cmd));
    }
    out.sort_by_key(|(t, _)| *t);
    Ok(out)
}

/// Runs the CLI with `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Cmd::Sim(args) => sim(args),
        Cmd::Replay { log, verify } => replay(&log, verify),
        Cmd::Validate { course } => validate(&course),
        Cmd::Conformance {
            port,
            baud,
            emulated,
            timeout,
            boot_wait,
        } => conformance_cmd(port, baud, emulated, timeout, boot_wait),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FAILED
        }
    }
}

fn usage(msg: impl std::fmt::Display) -> anyhow::Result<i32> {
    eprintln!("error: {msg}");
    Ok(EXIT_USAGE)
}

fn build_config(args: &SimArgs) -> anyhow::Result<SessionConfig> {
    let course = match &args.course {
        Some(path) => {
            let bytes =
                std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            course::load(&bytes).with_context(|| format!("loading {}", path.display()))?
        }
        None => Course::default(),
    };
    let layout = match args.layout {
        LayoutArg::Caster => Layout::TwoWheelCaster { locked: false },
        LayoutArg::CasterLocked => Layout::TwoWheelCaster { locked: true },
        LayoutArg::FourWheel => Layout::FourWheel,
    };
    Ok(SessionConfig {
        tick: args.tick,
        chassis: ChassisConfig {
            layout,
            ..ChassisConfig::default()
        },
        battery: match args.battery {
            BatteryArg::Aa => BatteryState::aa(),
            BatteryArg::Liion => BatteryState::li_ion(),
        },
        surface: match args.surface {
            SurfaceArg::Smooth => SurfaceModel::smooth(),
            SurfaceArg::Rough => SurfaceModel::rough(),
        },
        link: LinkConfig {
            latency: args.link_latency,
            jitter: args.link_jitter,
            drop_prob: args.drop,
            seed: args.seed,
            ..LinkConfig::default()
        },
        course,
        seed: args.seed,
        ..SessionConfig::default()
    })
}

fn write_log(path: &PathBuf, session: &Session) -> anyhow::Result<()> {
    std::fs::write(path, session.record().to_json())
        .with_context(|| format!("writing {}", path.display()))
}

fn sim(args: SimArgs) -> anyhow::Result<i32> {
    let cfg = build_config(&args)?;
    let mut session = match Session::new(cfg) {
        Ok(s) => s,
        Err(e) => return usage(e),
    };
    if args.record.is_some() {
        session.start_recording();
    }
    if let Some(d) = args.duration {
        if !(d.is_finite() && d >= 0.0) {
            return usage("--duration must be a non-negative number of seconds");
        }
    }

    if !args.headless {
        let addr = args
            .serve
            .clone()
            .flatten()
            .or_else(|| std::env::var("CARGAME_ADDR").ok())
            .unwrap_or_else(|| DEFAULT_ADDR.to_string());
        let rt = tokio::runtime::Runtime::new()?;
        let session = rt.block_on(async {
            let listener = tokio::net::TcpListener::bind(&addr)
                .await
                .with_context(|| format!("binding {addr}"))?;
            eprintln!("serving on ws://{}/ws", listener.local_addr()?);
            let duration = args.duration;
            let shutdown = async move {
                match duration {
                    Some(d) => {
                        tokio::select! {
                            _ = tokio::time::sleep(std::time::Duration::from_secs_f64(d)) => {}
                            _ = tokio::signal::ctrl_c() => {}
                        }
                    }
                    None => {
                        let _ = tokio::signal::ctrl_c().await;
                    }
                }
            };
            let opts = ServiceOptions {
                course_dir: args.courses.clone(),
            };
            service::serve(listener, session, opts, shutdown).await
        })?;
        if let Some(path) = &args.record {
            write_log(path, &session)?;
        }
        return Ok(EXIT_OK);
    }

    let script = match args.script.as_deref().map(parse_script).transpose() {
        Ok(s) => s.unwrap_or_default(),
        Err(e) => return usage(e),
    };
    let duration = args.duration.unwrap_or(10.0);
    let ticks = (duration * 1000.0 / f64::from(args.tick)).round() as u64;
    let mut script = script.into_iter().peekable();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for _ in 0..ticks {
        while let Some((_, cmd)) = script.next_if(|(t, _)| *t <= session.now_ms()) {
            session.send_command(cmd);
        }
        for e in session.tick() {
            if !matches!(e, SessionEvent::PoseUpdate(_)) {
                writeln!(out, "{}", ServerMessage::from(e).to_json())?;
            }
        }
    }
    let log = session.record();
    let p = session.pose();
    let summary = serde_json::json!({
        "type": "summary",
        "t": session.now_ms() as f64 / 1000.0,
        "x": p.x,
        "y": p.y,
        "theta": p.theta,
        "collisions": session.collision_count(),
        "reached_goal": session.goal_reached(),
        "battery_mah": session.battery().charge,
        "trace_hash": log.trace_hash,
    });
    writeln!(out, "{summary}")?;
    if let Some(path) = &args.record {
        write_log(path, &session)?;
    }
    Ok(EXIT_OK)
}

fn replay(path: &PathBuf, verify: bool) -> anyhow::Result<i32> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let log = match RunLog::from_json(&bytes) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(EXIT_FAILED);
        }
    };
    let report = match session::replay(&log) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("replay refused: {e}");
            return Ok(EXIT_FAILED);
        }
    };
    let result = session::score_trace(&report.trace, &log.config);
    println!(
        "{}",
        serde_json::json!({
            "ticks": report.trace.len(),
            "trace_hash": report.trace_hash,
            "recorded_hash": log.trace_hash,
            "first_divergence": report.first_divergence,
            "collisions": result.collision_count,
            "reached_goal": result.reached_goal,
            "elapsed": result.elapsed,
        })
    );
    if verify && !report.verified(&log) {
        match report.first_divergence {
            Some(tick) => eprintln!("replay diverged at tick {tick}"),
            None => eprintln!("replay trace hash does not match the recording"),
        }
        return Ok(EXIT_FAILED);
    }
    Ok(EXIT_OK)
}

fn validate(path: &PathBuf) -> anyhow::Result<i32> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    match course::load(&bytes) {
        Ok(c) => {
            println!("{}: ok ({} obstacles)", c.name, c.obstacles.len());
            Ok(EXIT_OK)
        }
        Err(course::CourseError::Invalid(violations)) => {
            for v in violations {
                println!("{}: {v}", path.display());
            }
            Ok(EXIT_FAILED)
        }
        Err(e) => {
            println!("{}: {e}", path.display());
            Ok(EXIT_FAILED)
        }
    }
}

fn conformance_cmd(
    port: Option<String>,
    baud: u32,
    emulated: bool,
    timeout: u32,
    boot_wait: u32,
) -> anyhow::Result<i32> {
    let report = if emulated {
        conformance::run_conformance(&mut EmulatedTarget::default(), timeout)?
    } else {
        let path = port.expect("clap requires --port without --emulated");
        let ep = transport::open_serial(&path, baud)?;
        // Opening the port resets most boards.
        std::thread::sleep(std::time::Duration::from_millis(u64::from(boot_wait)));
        conformance::run_conformance(&mut HardwareTarget::new(ep), timeout)?
    };
    for r in &report.results {
        let got: Vec<_> = r.lines.iter().map(|l| l.line().to_string()).collect();
        println!(
            "{} send {:?} expect {:?} got {:?}",
            if r.pass { "PASS" } else { "FAIL" },
            r.vector.command.key(),
            r.vector.expect.line(),
            got
        );
    }
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_FAILED
    })
}
