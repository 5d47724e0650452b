//! WebSocket front end for a running [`Session`].
//!
//! One task owns the session and ticks it in real time. Client messages reach
//! it through a single ordered queue; events fan out through a broadcast
//! channel whose bounded buffer drops the oldest entries for a client that
//! falls behind, so a slow or dead client never stalls the simulation.

use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use cargame_core::course;
use cargame_core::wire::{self, ClientMessage, MessageError, Notice, ServerMessage};
use cargame_core::Session;
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc};
use tokio::time::MissedTickBehavior;

/// Per-client outbound queue length.
pub const CLIENT_QUEUE: usize = 1024;

pub const DEFAULT_ADDR: &str = "127.0.0.1:7707";

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    /// Where `course_save` writes and `course_load` reads `<name>.json`.
    pub course_dir: PathBuf,
}

enum Inbound {
    Hello {
        reply: mpsc::UnboundedSender<String>,
    },
    Message {
        msg: ClientMessage,
        reply: mpsc::UnboundedSender<String>,
    },
}

#[derive(Clone)]
struct AppState {
    inbox: mpsc::UnboundedSender<Inbound>,
    events: broadcast::Sender<Arc<str>>,
}

/// Serves `session` on `listener` until `shutdown` resolves, then hands the
/// session back (for recording).
pub async fn serve<F>(
    listener: TcpListener,
    session: Session,
    opts: ServiceOptions,
    shutdown: F,
) -> anyhow::Result<Session>
where
    F: Future<Output = ()> + Send + 'static,
{
    let (inbox, inbox_rx) = mpsc::unbounded_channel();
    let (events, _) = broadcast::channel(CLIENT_QUEUE);
    let state = AppState {
        inbox,
        events: events.clone(),
    };
    let app = Router::new()
        .route(
            "/",
            get(|| async { "cargame session service; connect a WebSocket to /ws\n" }),
        )
        .route("/ws", get(ws_handler))
        .with_state(state);

    let (stop_tx, stop_rx) = tokio::sync::watch::channel(false);
    let sim = tokio::spawn(run_loop(session, opts, inbox_rx, events, stop_rx));
    let server = axum::serve(listener, app).with_graceful_shutdown({
        let mut stop = stop_tx.subscribe();
        async move {
            let _ = stop.wait_for(|s| *s).await;
        }
    });
    let server = tokio::spawn(async move { server.await });
    shutdown.await;
    let _ = stop_tx.send(true);
    let session = sim.await?;
    // Open sockets keep graceful shutdown waiting; don't hold the caller on them.
    let _ = tokio::time::timeout(Duration::from_secs(1), server).await;
    Ok(session)
}

async fn run_loop(
    mut session: Session,
    opts: ServiceOptions,
    mut inbox: mpsc::UnboundedReceiver<Inbound>,
    events: broadcast::Sender<Arc<str>>,
    mut stop: tokio::sync::watch::Receiver<bool>,
) -> Session {
    let mut ticker = tokio::time::interval(Duration::from_millis(u64::from(session.config().tick)));
    ticker.set_missed_tick_behavior(MissedTickBehavior::Burst);
    let publish = |m: ServerMessage| {
        // No subscribers is fine.
        let _ = events.send(Arc::from(m.to_json()));
    };
    loop {
        tokio::select! {
            biased;
            _ = stop.wait_for(|s| *s) => break,
            Some(inbound) = inbox.recv() => match inbound {
                Inbound::Hello { reply } => {
                    let hello = ServerMessage::from(Notice::Course { course: session.config().course.clone() });
                    let _ = reply.send(hello.to_json());
                }
                Inbound::Message { msg, reply } => {
                    if let Err(e) = apply(&mut session, &opts, msg, &publish) {
                        let _ = reply.send(ServerMessage::from(Notice::error(&e)).to_json());
                    }
                }
            },
            _ = ticker.tick() => {
                for e in session.tick() {
                    publish(e.into());
                }
            }
        }
    }
    session
}

fn apply(
    session: &mut Session,
    opts: &ServiceOptions,
    msg: ClientMessage,
    publish: &impl Fn(ServerMessage),
) -> Result<(), MessageError> {
    match msg {
        ClientMessage::Cmd(cmd) => session.send_command(cmd),
        ClientMessage::CourseSave(c) => {
            let bytes = course::save(&c)?;
            let path = opts.course_dir.join(format!("{}.json", c.name));
            std::fs::create_dir_all(&opts.course_dir)
                .and_then(|_| std::fs::write(&path, bytes))
                .map_err(|e| {
                    MessageError::Malformed(format!("cannot write {}: {e}", path.display()))
                })?;
            activate(session, c, publish)?;
        }
        ClientMessage::CourseLoad { name } => {
            let path = opts.course_dir.join(format!("{name}.json"));
            let bytes = std::fs::read(&path).map_err(|e| {
                MessageError::Malformed(format!("cannot read course {name:?}: {e}"))
            })?;
            activate(session, course::load(&bytes)?, publish)?;
        }
        ClientMessage::Reset => {
            reset(session, None)?;
            publish(Notice::Reset.into());
        }
    }
    Ok(())
}

fn activate(
    session: &mut Session,
    c: course::Course,
    publish: &impl Fn(ServerMessage),
) -> Result<(), MessageError> {
    reset(session, Some(c.clone()))?;
    publish(Notice::Course { course: c }.into());
    Ok(())
}

fn reset(session: &mut Session, c: Option<course::Course>) -> Result<(), MessageError> {
    session
        .reset(c)
        .map_err(|e| MessageError::Malformed(e.to_string()))
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, state))
}

async fn client(socket: WebSocket, state: AppState) {
    let (mut sink, mut stream) = socket.split();
    let (reply_tx, mut reply_rx) = mpsc::unbounded_channel::<String>();
    let mut events = state.events.subscribe();
    if state
        .inbox
        .send(Inbound::Hello {
            reply: reply_tx.clone(),
        })
        .is_err()
    {
        return;
    }

    let writer = tokio::spawn(async move {
        loop {
            let text: String = tokio::select! {
                Some(r) = reply_rx.recv() => r,
                ev = events.recv() => match ev {
                    Ok(e) => e.to_string(),
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        tracing::debug!(dropped = n, "slow client, dropped oldest events");
                        continue;
                    }
                    Err(broadcast::error::RecvError::Closed) => break,
                },
                else => break,
            };
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });

    while let Some(Ok(frame)) = stream.next().await {
        let text = match frame {
            Message::Text(t) => t.to_string(),
            Message::Binary(b) => String::from_utf8_lossy(&b).into_owned(),
            Message::Close(_) => break,
            _ => continue,
        };
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            match wire::parse_client_message(line) {
                Ok(msg) => {
                    let inbound = Inbound::Message {
                        msg,
                        reply: reply_tx.clone(),
                    };
                    if state.inbox.send(inbound).is_err() {
                        break;
                    }
                }
                Err(e) => {
                    let _ = reply_tx.send(ServerMessage::from(Notice::error(&e)).to_json());
                }
            }
        }
    }
    drop(reply_tx);
    writer.abort();
}
