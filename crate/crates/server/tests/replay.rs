mod common;

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use relevance_server::wire::StreamItem;
use relevance_server::{replay_stream, ReplayConfig, ReplayError, Server, ServerConfig, Sink};
use serde_json::{json, Value};

fn items(n: usize) -> Vec<StreamItem> {
    (0..n)
        .map(|i| StreamItem {
            id: i.to_string(),
            text: format!("tweet {i}"),
        })
        .collect()
}

fn collector() -> (Arc<Mutex<Vec<String>>>, Sink) {
    let got = Arc::new(Mutex::new(Vec::new()));
    let sink = {
        let got = got.clone();
        Sink::callback(move |item| {
            got.lock().unwrap().push(item.id.clone());
            Ok(())
        })
    };
    (got, sink)
}

fn config(rate: f64) -> ReplayConfig {
    ReplayConfig {
        rate,
        ..ReplayConfig::default()
    }
}

#[test]
fn ten_per_second_takes_ten_seconds() {
    let (got, sink) = collector();
    let started = Instant::now();
    let stats = replay_stream(items(100), config(10.0), sink).unwrap().join().unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    assert_eq!(stats.sent, 100);
    assert_eq!(got.lock().unwrap().len(), 100);
    // Item k is due at k/10 s, so the last one lands at 9.9 s.
    assert!((9.8..10.8).contains(&elapsed), "{elapsed}");
}

#[test]
fn pause_and_resume_lose_nothing() {
    let (got, sink) = collector();
    let handle = replay_stream(items(60), config(200.0), sink).unwrap();
    std::thread::sleep(Duration::from_millis(80));
    handle.pause();
    std::thread::sleep(Duration::from_millis(20));
    let frozen = got.lock().unwrap().len();
    std::thread::sleep(Duration::from_millis(150));
    assert_eq!(got.lock().unwrap().len(), frozen, "items emitted while paused");
    assert!(frozen > 0 && frozen < 60, "{frozen}");
    handle.resume();
    let stats = handle.join().unwrap();
    assert_eq!(stats.sent, 60);
    let expected: Vec<String> = (0..60).map(|i| i.to_string()).collect();
    assert_eq!(*got.lock().unwrap(), expected);
}

#[test]
fn stop_ends_early() {
    let (got, sink) = collector();
    let handle = replay_stream(items(1000), config(100.0), sink).unwrap();
    std::thread::sleep(Duration::from_millis(50));
    handle.stop();
    let stats = handle.join().unwrap();
    assert!(stats.sent < 1000);
    assert_eq!(got.lock().unwrap().len(), stats.sent);
}

#[test]
fn transient_failures_are_retried() {
    let mut failures = 2;
    let got = Arc::new(Mutex::new(Vec::new()));
    let sink = {
        let got = got.clone();
        Sink::callback(move |item| {
            if item.id == "3" && failures > 0 {
                failures -= 1;
                return Err("busy".into());
            }
            got.lock().unwrap().push(item.id.clone());
            Ok(())
        })
    };
    let cfg = ReplayConfig {
        rate: 1000.0,
        max_retries: 3,
        initial_backoff: Duration::from_millis(1),
    };
    let stats = replay_stream(items(5), cfg, sink).unwrap().join().unwrap();
    assert_eq!((stats.sent, stats.retries), (5, 2));
    assert_eq!(got.lock().unwrap().len(), 5);
}

#[test]
fn unreachable_sink_surfaces_after_retries() {
    let cfg = ReplayConfig {
        rate: 1000.0,
        max_retries: 2,
        initial_backoff: Duration::from_millis(1),
    };
    let err = replay_stream(items(3), cfg, Sink::callback(|_| Err("down".into())))
        .unwrap()
        .join()
        .unwrap_err();
    assert_eq!(
        err,
        ReplayError::Sink {
            id: "0".into(),
            attempts: 3,
            message: "down".into()
        }
    );
    // Nothing listens on port 9 of the loopback address.
    let err = replay_stream(items(1), cfg, Sink::server("http://127.0.0.1:9")).unwrap().join();
    assert!(matches!(err, Err(ReplayError::Sink { attempts: 3, .. })), "{err:?}");
}

#[test]
fn rejects_bad_rates() {
    for rate in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(matches!(
            replay_stream(items(1), config(rate), Sink::callback(|_| Ok(()))),
            Err(ReplayError::InvalidRate(_))
        ));
    }
}

fn http(addr: SocketAddr, method: &str, path: &str, body: Option<&Value>) -> Value {
    use std::io::{Read, Write};
    let body = body.map(Value::to_string).unwrap_or_default();
    let mut s = std::net::TcpStream::connect(addr).unwrap();
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut out = String::new();
    s.read_to_string(&mut out).unwrap();
    serde_json::from_str(out.split_once("\r\n\r\n").unwrap().1).unwrap()
}

#[test]
fn replays_into_a_live_server_and_flushes_on_shutdown() {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cfg = ServerConfig::new("127.0.0.1:0".parse().unwrap(), dir.path());
    let server = rt.block_on(Server::bind(cfg, common::table())).unwrap();
    let addr = server.local_addr().unwrap();
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let running = rt.spawn(server.run(async {
        let _ = stop_rx.await;
    }));

    assert_eq!(http(addr, "GET", "/healthz", None), json!({"status": "ok"}));
    let stats = replay_stream(items(25), config(500.0), Sink::server(&format!("http://{addr}")))
        .unwrap()
        .join()
        .unwrap();
    assert_eq!(stats.sent, 25);
    let page = http(addr, "GET", "/stream/?after=0&limit=100", None);
    let ids: Vec<&str> = page["items"].as_array().unwrap().iter().map(|i| i["id"].as_str().unwrap()).collect();
    assert_eq!(ids, (0..25).map(|i| i.to_string()).collect::<Vec<_>>());

    let init = http(addr, "POST", "/init/", Some(&common::key("u", "c")));
    assert_eq!(init["created"], true);
    let path = dir.path().join("u/c.rlv");
    std::fs::remove_file(&path).unwrap();
    stop_tx.send(()).unwrap();
    rt.block_on(running).unwrap().unwrap();
    assert!(path.exists(), "shutdown rewrites loaded models");
}
