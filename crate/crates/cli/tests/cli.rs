mod common;

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Stdio};
use std::time::Duration;

use common::*;

fn simulate_args(fx: &Fixture, out: &std::path::Path) -> Vec<String> {
    vec![
        "simulate".into(),
        "--dataset".into(),
        fx.dataset.display().to_string(),
        "--embeddings".into(),
        fx.embeddings.display().to_string(),
        "--max-len".into(),
        "16".into(),
        "--max-iterations".into(),
        "4".into(),
        "--out".into(),
        out.display().to_string(),
    ]
}

#[test]
fn missing_embeddings_exits_2_naming_the_file() {
    let fx = fixture(60);
    let missing = fx.path("nope.bin");
    let o = run(bin().args(["simulate", "--dataset"]).arg(&fx.dataset).arg("--embeddings").arg(&missing));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains(&missing.display().to_string()), "{}", stderr(&o));
}

#[test]
fn bad_rows_name_the_line() {
    let fx = fixture(60);
    let bad = fx.path("bad.csv");
    write_figure_eight(&bad, [("1", "flood here", "Relevant"), ("2", "w1 w2", "Maybe")].into_iter());
    let o = run(bin().args(["simulate", "--dataset"]).arg(&bad).arg("--embeddings").arg(&fx.embeddings));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("bad.csv:3:") && err.contains("Maybe"), "{err}");
}

#[test]
fn usage_and_config_errors_exit_1() {
    let fx = fixture(60);
    assert_eq!(run(bin().args(["simulate", "--bogus"])).status.code(), Some(1));
    assert_eq!(run(bin().arg("--help")).status.code(), Some(0));
    // No dataset anywhere.
    assert_eq!(run(bin().arg("simulate").arg("--embeddings").arg(&fx.embeddings)).status.code(), Some(1));
    let o = run(bin()
        .args(["simulate", "--split", "60/30/30", "--dataset"])
        .arg(&fx.dataset)
        .arg("--embeddings")
        .arg(&fx.embeddings));
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let o = run(bin()
        .args(["simulate", "--kernel", "99", "--max-len", "8", "--dataset"])
        .arg(&fx.dataset)
        .arg("--embeddings")
        .arg(&fx.embeddings));
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let cfg = fx.path("bad.toml");
    fs::write(&cfg, "not-a-key = 1\n").unwrap();
    let o = run(bin().arg("--config").arg(&cfg).arg("simulate"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.toml"));
}

#[test]
fn same_seed_gives_identical_reports() {
    let fx = fixture(200);
    let (a, b) = (fx.path("a.csv"), fx.path("b.csv"));
    for out in [&a, &b] {
        let o = run(bin().args(simulate_args(&fx, out)).args(["--seed", "7"]));
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stderr(&o).contains("average P"));
    }
    let (ra, rb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ra, rb);
    let text = String::from_utf8(ra).unwrap();
    assert!(text.starts_with("iteration,n_tweets,precision,recall,f1,cpu_seconds\n"));
    assert_eq!(text.lines().filter(|l| l.chars().next().is_some_and(|c| c.is_ascii_digit())).count(), 4);

    let c = fx.path("c.csv");
    assert!(run(bin().args(simulate_args(&fx, &c)).args(["--seed", "8"])).status.success());
    assert_ne!(fs::read(&c).unwrap(), rb);
}

#[test]
fn precedence_is_flag_then_env_then_file() {
    let fx = fixture(200);
    let cfg = fx.path("run.toml");
    fs::write(
        &cfg,
        format!(
            "dataset = {:?}\nembeddings = {:?}\nmax-len = 16\nmax-iterations = 2\nreport-format = \"markdown\"\n",
            fx.dataset.display().to_string(),
            fx.embeddings.display().to_string()
        ),
    )
    .unwrap();
    // File only.
    let o = run(bin().arg("--config").arg(&cfg).arg("simulate"));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("| Iteration |"), "{}", stdout(&o));
    let file_only = stdout(&o);

    // Environment beats the file; an empty corpus path makes the difference visible.
    let o = run(bin()
        .env("RELEVANCE_DATASET", fx.path("absent.csv"))
        .arg("--config")
        .arg(&cfg)
        .arg("simulate"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.csv"));

    // A flag beats both.
    let o = run(bin()
        .env("RELEVANCE_DATASET", fx.path("absent.csv"))
        .env("RELEVANCE_CONFIG", &cfg)
        .args(["simulate", "--report-format", "csv", "--dataset"])
        .arg(&fx.dataset));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("iteration,"));

    // Seed from env changes the split and thus the report.
    let o = run(bin().env("RELEVANCE_SEED", "5").arg("--config").arg(&cfg).arg("simulate"));
    assert!(o.status.success());
    assert_ne!(stdout(&o), file_only);
}

#[test]
fn several_datasets_write_one_report_each() {
    let fx = fixture(200);
    let second = fx.path("other.csv");
    fs::copy(&fx.dataset, &second).unwrap();
    let out = fx.path("reports");
    let o = run(bin()
        .args(["simulate", "--jobs", "2", "--max-len", "16", "--max-iterations", "2", "--dataset"])
        .arg(&fx.dataset)
        .arg("--dataset")
        .arg(&second)
        .arg("--embeddings")
        .arg(&fx.embeddings)
        .arg("--out")
        .arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(out.join("events.csv")).unwrap(), fs::read(out.join("other.csv")).unwrap());

    let summary = run(bin()
        .arg("eval-report")
        .arg("--report")
        .arg(out.join("events.csv"))
        .arg("--report")
        .arg(out.join("other.csv")));
    assert!(summary.status.success(), "{}", stderr(&summary));
    let text = stdout(&summary);
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().last().unwrap().starts_with("mean,"));
}

const TUNED_SPACE: &str = r#"
[[config]]
model_type = "CNN"
[[config]]
model_type = "CNN"
learning_rate = 0.01
batch_size = 50
epochs = 2
optimizer = "Adagrad"
[[config]]
model_type = "CNN"
learning_rate = 0.0063
epochs = 3
[[config]]
model_type = "LSTM"
[[config]]
model_type = "LSTM"
batch_size = 20
epochs = 8
dropout = 0.2
recurrent_dropout = 0.6
[[config]]
model_type = "LSTM"
learning_rate = 0.0006
batch_size = 100
epochs = 12
dropout = 0.6
recurrent_dropout = 0.6
[[config]]
model_type = "RNN"
[[config]]
model_type = "RNN"
batch_size = 20
epochs = 5
recurrent_dropout = 0.0
[[config]]
model_type = "RNN"
batch_size = 100
epochs = 12
"#;

#[test]
fn tune_ranks_every_configuration() {
    let fx = fixture(300);
    let space = fx.path("space.toml");
    fs::write(&space, TUNED_SPACE).unwrap();
    let out = fx.path("ranking.csv");
    let args = |out: &std::path::Path| {
        let mut c = bin();
        c.args(["tune", "--max-iterations", "3", "--jobs", "3", "--seed", "7", "--dataset"])
            .arg(&fx.dataset)
            .arg("--embeddings")
            .arg(&fx.embeddings)
            .arg("--space")
            .arg(&space)
            .arg("--out")
            .arg(out);
        c
    };
    let o = run(&mut args(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 9, "{text}");
    let ranks: Vec<usize> = rows.iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ranks, (1..=9).collect::<Vec<_>>());
    let f1: Vec<f64> = rows.iter().map(|r| r.split(',').nth(12).unwrap().parse().unwrap()).collect();
    assert!(f1.windows(2).all(|w| w[0] >= w[1]), "{f1:?}");

    let again = fx.path("again.csv");
    assert!(run(&mut args(&again)).status.success());
    assert_eq!(fs::read(&again).unwrap(), text.into_bytes());
}

#[test]
fn sampled_ranking_is_reproducible() {
    let fx = fixture(200);
    let run_once = || {
        let o = run(bin()
            .args(["tune", "--n-samples", "3", "--seed", "1", "--max-iterations", "2", "--report-format", "markdown", "--dataset"])
            .arg(&fx.dataset)
            .arg("--embeddings")
            .arg(&fx.embeddings));
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o)
    };
    let first = run_once();
    assert_eq!(first.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| rank")).count(), 3, "{first}");
    assert_eq!(first, run_once());
}

#[test]
fn empty_search_space_exits_1() {
    let fx = fixture(60);
    let space = fx.path("empty.toml");
    fs::write(&space, "").unwrap();
    let o = run(bin()
        .arg("tune")
        .arg("--dataset")
        .arg(&fx.dataset)
        .arg("--embeddings")
        .arg(&fx.embeddings)
        .arg("--space")
        .arg(&space));
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("no configurations"));
}

struct Served {
    child: Child,
    addr: String,
}

impl Drop for Served {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn serve(fx: &Fixture) -> Served {
    let mut child = bin()
        .args(["serve", "--listen", "127.0.0.1:0", "--data-dir"])
        .arg(fx.path("models"))
        .arg("--embeddings")
        .arg(&fx.embeddings)
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").expect("address line").to_string();
    Served { child, addr }
}

fn http(addr: &str, method: &str, path: &str, body: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(30))).unwrap();
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    let status = resp.split(' ').nth(1).unwrap().parse().unwrap();
    let body = resp.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default();
    (status, body)
}

#[cfg(unix)]
fn interrupt(child: &Child) {
    let ok = std::process::Command::new("kill")
        .args(["-INT", &child.id().to_string()])
        .status()
        .unwrap();
    assert!(ok.success());
}

#[cfg(unix)]
#[test]
fn serve_flushes_on_interrupt_and_exits_0() {
    let fx = fixture(60);
    let mut served = serve(&fx);
    let (status, body) = http(&served.addr, "GET", "/healthz", "");
    assert_eq!(status, 200, "{body}");
    let (status, body) = http(&served.addr, "POST", "/init/", r#"{"user_id":"u","classifier_id":"c"}"#);
    assert_eq!(status, 200, "{body}");
    let checkpoint = fx.path("models").join("u").join("c.rlv");
    fs::remove_file(&checkpoint).unwrap();

    interrupt(&served.child);
    let status = served.child.wait().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(checkpoint.exists(), "shutdown flush rewrites the checkpoint");
}

#[cfg(unix)]
#[test]
fn replay_delivers_every_item() {
    let fx = fixture(60);
    let served = serve(&fx);
    let o = run(bin()
        .args(["replay", "--rate", "50", "--limit", "12", "--dataset"])
        .arg(&fx.dataset)
        .arg("--target")
        .arg(format!("http://{}", served.addr)));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("sent 12 items"));
    let (status, body) = http(&served.addr, "GET", "/stream/?after=0&limit=100", "");
    assert_eq!(status, 200);
    let page: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(page["items"].as_array().unwrap().len(), 12);
    assert_eq!(page["next"], 12);

    // Nothing listening: the failure surfaces as a data error.
    let o = run(bin()
        .args(["replay", "--retries", "1", "--limit", "1", "--dataset"])
        .arg(&fx.dataset)
        .args(["--target", "http://127.0.0.1:9"]));
    assert_eq!(o.status.code(), Some(2));
}
