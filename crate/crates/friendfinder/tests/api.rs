use std::collections::HashMap;
use std::time::Duration;

use futures::StreamExt;
use pgc_core::frame::split_frames;
use pgc_core::protocol::{Hooks, Tamper, TamperTarget};
use pgc_friendfinder::{router, AppState, ServiceConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use reqwest::StatusCode;
use serde_json::{json, Value};

fn config() -> ServiceConfig {
    ServiceConfig {
        circuits: 5,
        timeout: Duration::from_secs(30),
        dealer_ot: true,
        ..Default::default()
    }
}

async fn serve(cfg: ServiceConfig) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(AppState::new(cfg))).await.unwrap() });
    format!("127.0.0.1:{}", addr.port())
}

struct Client {
    http: reqwest::Client,
    base: String,
}

impl Client {
    fn new(addr: &str) -> Self {
        Self {
            http: reqwest::Client::new(),
            base: format!("http://{addr}"),
        }
    }

    async fn start(&self, body: Value) -> (StatusCode, Value) {
        let r = self
            .http
            .post(format!("{}/session", self.base))
            .json(&body)
            .send()
            .await
            .unwrap();
        (r.status(), r.json().await.unwrap())
    }

    async fn set(&self, id: &str, user: u32, cell: usize) -> (StatusCode, Value) {
        let r = self
            .http
            .post(format!("{}/session/{id}/set", self.base))
            .json(&json!({ "user": user, "cell": cell }))
            .send()
            .await
            .unwrap();
        (r.status(), r.json().await.unwrap())
    }

    async fn get(&self, id: &str, cell: usize) -> (StatusCode, Value) {
        let r = self
            .http
            .get(format!("{}/session/{id}/cell/{cell}", self.base))
            .send()
            .await
            .unwrap();
        let status = r.status();
        (status, r.json().await.unwrap_or(Value::Null))
    }
}

async fn new_map(c: &Client, cells: usize) -> String {
    let (s, v) = c.start(json!({ "cells": cells })).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    v["session"].as_str().unwrap().to_string()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn map_endpoints() {
    let addr = serve(config()).await;
    let c = Client::new(&addr);
    let id = new_map(&c, 64).await;

    assert_eq!(c.get(&id, 3).await.1["value"], 0);
    assert_eq!(c.set(&id, 5, 3).await.1["result"], "moved");
    let r = c
        .http
        .post(format!("{}/session/{id}/set", c.base))
        .json(&json!({ "user": 5, "cell": 3, "name": "ada" }))
        .send()
        .await
        .unwrap();
    assert_eq!(r.json::<Value>().await.unwrap()["result"], "moved");
    let (s, v) = c.set(&id, 7, 3).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["result"], "occupied");
    assert_eq!(v["occupied_by"], 5);
    assert_eq!(v["occupied_by_name"], "ada");
    assert_eq!(c.get(&id, 3).await.1["value"], 5);

    assert_eq!(c.set(&id, 5, 63).await.1["result"], "moved");
    assert_eq!(c.get(&id, 3).await.1["value"], 0);
    assert_eq!(c.get(&id, 63).await.1["value"], 5);

    assert_eq!(c.get(&id, 64).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(c.set(&id, 0, 1).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(c.set(&id, 256, 1).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(c.set(&id, 9, 64).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(c.get("nope", 0).await.0, StatusCode::NOT_FOUND);
    assert_eq!(c.start(json!({ "cells": 0 })).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(
        c.start(json!({ "cells": 4, "session": "../x" })).await.0,
        StatusCode::BAD_REQUEST
    );

    assert_eq!(
        c.start(json!({ "cells": 4, "session": "shared" })).await.0,
        StatusCode::CREATED
    );
    let (s, v) = c.start(json!({ "cells": 4, "session": "shared" })).await;
    assert_eq!(s, StatusCode::CONFLICT, "{v}");
}

#[derive(Debug)]
enum Op {
    Set(u8, usize),
    Get(usize),
}

/// Plaintext reference for the map and each user's position.
#[derive(Default)]
struct Shadow {
    cells: Vec<u8>,
    positions: HashMap<u8, usize>,
}

impl Shadow {
    fn new(n: usize) -> Self {
        Self {
            cells: vec![0; n],
            ..Default::default()
        }
    }

    fn apply(&mut self, op: &Op) -> Value {
        match *op {
            Op::Get(cell) => json!({ "value": self.cells[cell] }),
            Op::Set(user, cell) => {
                let cur = self.cells[cell];
                if cur != 0 && cur != user {
                    return json!({ "result": "occupied", "occupied_by": cur });
                }
                self.cells[cell] = user;
                if let Some(prev) = self.positions.insert(user, cell) {
                    if prev != cell {
                        self.cells[prev] = 0;
                    }
                }
                json!({ "result": "moved" })
            }
        }
    }
}

fn strip(v: &Value) -> Value {
    let mut v = v.clone();
    let o = v.as_object_mut().unwrap();
    o.remove("seq");
    o.remove("occupied_by_name");
    v
}

fn random_ops(rng: &mut ChaCha20Rng, users: &[u8], cells: usize, n: usize) -> Vec<Op> {
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.6) {
                Op::Set(users[rng.gen_range(0..users.len())], rng.gen_range(0..cells))
            } else {
                Op::Get(rng.gen_range(0..cells))
            }
        })
        .collect()
}

async fn perform(c: &Client, id: &str, op: &Op) -> Value {
    let (s, v) = match *op {
        Op::Set(u, cell) => c.set(id, u as u32, cell).await,
        Op::Get(cell) => c.get(id, cell).await,
    };
    assert_eq!(s, StatusCode::OK, "{op:?}: {v}");
    v
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn sequential_requests_match_shadow_map() {
    let addr = serve(config()).await;
    let c = Client::new(&addr);
    let cells = 6;
    let id = new_map(&c, cells).await;
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let mut shadow = Shadow::new(cells);
    for op in random_ops(&mut rng, &[3, 9, 200], cells, 30) {
        let got = perform(&c, &id, &op).await;
        assert_eq!(strip(&got), shadow.apply(&op), "{op:?}");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_interleavings_linearize() {
    let addr = serve(config()).await;
    let cells = 5;
    for seed in 0..3u64 {
        let id = new_map(&Client::new(&addr), cells).await;
        let mut tasks = Vec::new();
        for (k, user) in [4u8, 17, 255].into_iter().enumerate() {
            let (addr, id) = (addr.clone(), id.clone());
            tasks.push(tokio::spawn(async move {
                let c = Client::new(&addr);
                let mut rng = ChaCha20Rng::seed_from_u64(100 * seed + k as u64);
                let mut done = Vec::new();
                for op in random_ops(&mut rng, &[user], cells, 8) {
                    let v = perform(&c, &id, &op).await;
                    done.push((v["seq"].as_u64().unwrap(), op, v));
                }
                done
            }));
        }
        let mut all = Vec::new();
        for t in tasks {
            all.extend(t.await.unwrap());
        }
        all.sort_by_key(|(seq, _, _)| *seq);
        assert_eq!(
            all.iter().map(|x| x.0).collect::<Vec<_>>(),
            (2..2 + all.len() as u64).collect::<Vec<_>>()
        );
        let mut shadow = Shadow::new(cells);
        for (seq, op, got) in &all {
            assert_eq!(strip(got), shadow.apply(op), "seed {seed} seq {seq} {op:?}");
        }
    }
}

async fn ws_events(addr: &str, id: &str) -> impl futures::Stream<Item = Value> {
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/session/{id}/events"))
        .await
        .unwrap();
    ws.filter_map(|m| async move {
        match m.ok()? {
            tokio_tungstenite::tungstenite::Message::Text(t) => serde_json::from_str(t.as_str()).ok(),
            _ => None,
        }
    })
}

async fn next_events(stream: &mut (impl futures::Stream<Item = Value> + Unpin), n: usize) -> Vec<Value> {
    let mut out = Vec::new();
    for _ in 0..n {
        let ev = tokio::time::timeout(Duration::from_secs(30), stream.next())
            .await
            .unwrap()
            .unwrap();
        out.push(ev);
    }
    out
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn websocket_reports_each_execution() {
    let addr = serve(config()).await;
    let c = Client::new(&addr);
    let id = new_map(&c, 8).await;
    let mut events = Box::pin(ws_events(&addr, &id).await);

    c.get(&id, 2).await;
    let ev = next_events(&mut events, 2).await;
    assert_eq!(ev[0], json!({ "type": "started", "op": "get" }));
    assert_eq!(ev[1]["type"], "completed");

    // First placement: check and write.
    c.set(&id, 8, 2).await;
    let ev = next_events(&mut events, 4).await;
    let ops: Vec<_> = ev
        .iter()
        .map(|e| format!("{}:{}", e["type"].as_str().unwrap(), e["op"].as_str().unwrap()))
        .collect();
    assert_eq!(ops, ["started:get", "completed:get", "started:set", "completed:set"]);

    // A move costs three executions: check, write, clear.
    c.set(&id, 8, 5).await;
    let ev = next_events(&mut events, 6).await;
    assert_eq!(ev.iter().filter(|e| e["type"] == "started").count(), 3);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn engine_abort_is_a_bad_gateway() {
    let mut cfg = config();
    cfg.hooks = Hooks::with_tamper(Tamper::PartialGate(TamperTarget::AllCheck));
    let addr = serve(cfg).await;
    let c = Client::new(&addr);
    let id = new_map(&c, 4).await;
    let mut events = Box::pin(ws_events(&addr, &id).await);
    let (s, v) = c.get(&id, 1).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    assert_eq!(v["phase"], 4);
    assert_eq!(v["cause"], "check_circuit_failed");
    let ev = next_events(&mut events, 2).await;
    assert_eq!(ev[1]["type"], "aborted");
    assert_eq!(ev[1]["phase"], 4);
    // The chain is abandoned after detected cheating.
    let (s, v) = c.get(&id, 1).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    assert_eq!(v["cause"], "chain_poisoned");
}

/// Frame shapes (phase, type, length) of every link of the last execution.
type Shapes = Vec<(String, Vec<(u8, u8, usize)>)>;

fn shapes(dir: &std::path::Path) -> Shapes {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            let frames = split_frames(&bytes, usize::MAX)
                .into_iter()
                .map(|f| f.unwrap())
                .map(|(m, n)| (m.phase, m.msg_type, n))
                .collect();
            (p.file_name().unwrap().to_string_lossy().into_owned(), frames)
        })
        .collect();
    out.sort();
    out
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn transcripts_do_not_depend_on_cell_values() {
    let tmp = tempfile::tempdir().unwrap();
    let tmp = tmp.path();
    let mut cfg = config();
    cfg.record_dir = Some(tmp.to_path_buf());
    let addr = serve(cfg).await;
    let c = Client::new(&addr);
    let mut seen = Vec::new();
    for (k, (user, cell)) in [(1u32, 0usize), (254, 3)].into_iter().enumerate() {
        let id = format!("shape{k}");
        assert_eq!(
            c.start(json!({ "cells": 4, "session": id })).await.0,
            StatusCode::CREATED
        );
        c.set(&id, user, cell).await;
        assert_eq!(c.get(&id, cell).await.1["value"], user);
        seen.push(shapes(&tmp.join(&id)));
    }
    assert_eq!(seen[0], seen[1]);
    assert_eq!(seen[0].len(), 6);
}
