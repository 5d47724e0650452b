use std::time::Duration;

use cargame::service::{serve, ServiceOptions};
use cargame_core::course::{self, Course};
use cargame_core::{Session, SessionConfig};
use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::oneshot;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

struct Service {
    url: String,
    stop: Option<oneshot::Sender<()>>,
    handle: tokio::task::JoinHandle<anyhow::Result<Session>>,
    _dir: tempfile::TempDir,
}

impl Service {
    async fn start() -> Service {
        let dir = tempfile::tempdir().unwrap();
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let url = format!("ws://{}/ws", listener.local_addr().unwrap());
        let session = Session::new(SessionConfig::default()).unwrap();
        let opts = ServiceOptions {
            course_dir: dir.path().to_path_buf(),
        };
        let (tx, rx) = oneshot::channel();
        let handle = tokio::spawn(serve(listener, session, opts, async {
            let _ = rx.await;
        }));
        Service {
            url,
            stop: Some(tx),
            handle,
            _dir: dir,
        }
    }

    async fn connect(&self) -> Ws {
        let (ws, _) = tokio_tungstenite::connect_async(&self.url).await.unwrap();
        ws
    }

    async fn stop(mut self) -> Session {
        let _ = self.stop.take().unwrap().send(());
        self.handle.await.unwrap().unwrap()
    }
}

async fn send(ws: &mut Ws, v: Value) {
    ws.send(Message::text(v.to_string())).await.unwrap();
}

/// Next message whose "type" satisfies `want`, within two seconds.
async fn next_of(ws: &mut Ws, want: impl Fn(&str) -> bool) -> Value {
    tokio::time::timeout(Duration::from_secs(2), async {
        loop {
            let msg = ws.next().await.expect("socket open").expect("frame");
            if let Message::Text(t) = msg {
                let v: Value = serde_json::from_str(&t).unwrap();
                if want(v["type"].as_str().unwrap_or_default()) {
                    return v;
                }
            }
        }
    })
    .await
    .expect("message arrived in time")
}

#[tokio::test]
async fn hello_then_command_flow() {
    let svc = Service::start().await;
    let mut ws = svc.connect().await;
    let hello = next_of(&mut ws, |t| t == "course").await;
    assert_eq!(hello["course"]["name"], "yard");

    send(&mut ws, json!({"type": "cmd", "key": "w"})).await;
    let accepted = next_of(&mut ws, |t| t == "CommandAccepted").await;
    assert_eq!(accepted["command"], "forward");
    let tele = next_of(&mut ws, |t| t == "Telemetry").await;
    assert_eq!(tele["line"], "Straight");
    assert!(tele["t"].as_f64().unwrap() >= accepted["t"].as_f64().unwrap());

    let pose = next_of(&mut ws, |t| t == "PoseUpdate").await;
    for key in [
        "t",
        "x",
        "y",
        "theta",
        "omega_left",
        "omega_right",
        "battery_volts",
    ] {
        assert!(pose[key].is_number(), "PoseUpdate.{key}");
    }
    let session = svc.stop().await;
    assert!(session.pose().x > 0.5);
}

#[tokio::test]
async fn bad_messages_get_errors() {
    let svc = Service::start().await;
    let mut ws = svc.connect().await;
    next_of(&mut ws, |t| t == "course").await;

    send(&mut ws, json!({"type": "cmd", "key": "q"})).await;
    let err = next_of(&mut ws, |t| t == "error").await;
    assert!(err["reason"].as_str().unwrap().contains("\"q\""));

    ws.send(Message::text("not json")).await.unwrap();
    next_of(&mut ws, |t| t == "error").await;

    let mut bad = course::to_value(&Course::default());
    bad["obstacles"] = json!([{"id": 3, "kind": "stone", "x": 9.0, "y": 1.0, "radius": 0.2}]);
    send(&mut ws, json!({"type": "course_save", "course": bad})).await;
    let err = next_of(&mut ws, |t| t == "error").await;
    assert_eq!(err["violations"], json!(["obstacle 3 outside bounds"]));

    send(&mut ws, json!({"type": "course_load", "name": "missing"})).await;
    next_of(&mut ws, |t| t == "error").await;
    svc.stop().await;
}

#[tokio::test]
async fn course_save_load_and_reset() {
    let svc = Service::start().await;
    let mut ws = svc.connect().await;
    next_of(&mut ws, |t| t == "course").await;

    let (mut c, id) = course::author_add(
        &Course::default(),
        course::ObstacleKind::Tree,
        1.2,
        1.5,
        0.2,
    )
    .unwrap();
    c.name = "row".into();
    assert_eq!(id, 0);
    send(
        &mut ws,
        json!({"type": "course_save", "course": course::to_value(&c)}),
    )
    .await;
    let active = next_of(&mut ws, |t| t == "course").await;
    assert_eq!(course::from_value(active["course"].clone()).unwrap(), c);

    send(&mut ws, json!({"type": "course_load", "name": "row"})).await;
    let loaded = next_of(&mut ws, |t| t == "course").await;
    assert_eq!(course::from_value(loaded["course"].clone()).unwrap(), c);

    send(&mut ws, json!({"type": "cmd", "key": "w"})).await;
    let hit = next_of(&mut ws, |t| t == "Collision").await;
    assert_eq!(hit["obstacle_id"], 0);

    send(&mut ws, json!({"type": "reset"})).await;
    next_of(&mut ws, |t| t == "reset").await;
    let pose = next_of(&mut ws, |t| t == "PoseUpdate").await;
    assert!(pose["x"].as_f64().unwrap() < 0.6);
    svc.stop().await;
}

#[tokio::test]
async fn clients_share_one_event_stream() {
    let svc = Service::start().await;
    let mut a = svc.connect().await;
    let mut b = svc.connect().await;
    next_of(&mut a, |t| t == "course").await;
    next_of(&mut b, |t| t == "course").await;
    send(&mut a, json!({"type": "cmd", "key": "d"})).await;

    // Both clients see a's command and the same pose samples.
    let ca = next_of(&mut a, |t| t == "CommandAccepted").await;
    let cb = next_of(&mut b, |t| t == "CommandAccepted").await;
    assert_eq!(ca, cb);
    for _ in 0..5 {
        let pa = next_of(&mut a, |t| t == "PoseUpdate").await;
        let pb = next_of(&mut b, |t| t == "PoseUpdate").await;
        assert_eq!(pa, pb);
    }
    svc.stop().await;
}

#[tokio::test]
async fn silent_client_does_not_stall_the_sim() {
    let svc = Service::start().await;
    // Connect and never read.
    let _idle = svc.connect().await;
    let mut active = svc.connect().await;
    next_of(&mut active, |t| t == "course").await;
    tokio::time::sleep(Duration::from_millis(1500)).await;
    loop {
        let p = next_of(&mut active, |t| t == "PoseUpdate").await;
        if p["t"].as_f64().unwrap() > 1.0 {
            break;
        }
    }
    let session = svc.stop().await;
    // Real-time pacing at 10 ms ticks: well over a second simulated.
    assert!(session.ticks() >= 100, "only {} ticks", session.ticks());
}
