use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crate::wire::{StreamItem, StreamPost};

type Callback = Box<dyn FnMut(&StreamItem) -> Result<(), String> + Send>;

/// Where replayed items go.
pub enum Sink {
    Callback(Callback),
    /// POSTs `{"items": [item]}` to this URL for every item.
    Http { url: String },
}

impl Sink {
    pub fn callback(f: impl FnMut(&StreamItem) -> Result<(), String> + Send + 'static) -> Self {
        Sink::Callback(Box::new(f))
    }

    /// The `/stream/` endpoint of a server at `base` (e.g. `http://127.0.0.1:8080`).
    pub fn server(base: &str) -> Self {
        Sink::Http {
            url: format!("{}/stream/", base.trim_end_matches('/')),
        }
    }
}

impl std::fmt::Debug for Sink {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sink::Callback(_) => f.write_str("Sink::Callback"),
            Sink::Http { url } => write!(f, "Sink::Http({url})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayConfig {
    /// Items per second.
    pub rate: f64,
    /// Delivery attempts per item beyond the first.
    pub max_retries: u32,
    /// Doubled after each failed attempt.
    pub initial_backoff: Duration,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            rate: 10.0,
            max_retries: 5,
            initial_backoff: Duration::from_millis(100),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReplayStats {
    pub sent: usize,
    pub retries: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error("replay rate must be a positive number, got {0}")]
    InvalidRate(f64),
    #[error("sink rejected item {id:?} after {attempts} attempts: {message}")]
    Sink { id: String, attempts: u32, message: String },
    #[error("replay thread panicked")]
    Panicked,
}

#[derive(Debug, Default)]
struct Flags {
    paused: bool,
    stopped: bool,
}

#[derive(Debug, Default)]
struct Control {
    flags: Mutex<Flags>,
    changed: Condvar,
}

impl Control {
    fn lock(&self) -> MutexGuard<'_, Flags> {
        self.flags.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn update(&self, f: impl FnOnce(&mut Flags)) {
        f(&mut self.lock());
        self.changed.notify_all();
    }
}

/// Running replay; dropping it without [`ReplayHandle::join`] stops it.
#[derive(Debug)]
pub struct ReplayHandle {
    control: Arc<Control>,
    thread: Option<JoinHandle<Result<ReplayStats, ReplayError>>>,
}

impl ReplayHandle {
    pub fn pause(&self) {
        self.control.update(|f| f.paused = true);
    }

    pub fn resume(&self) {
        self.control.update(|f| f.paused = false);
    }

    pub fn is_paused(&self) -> bool {
        self.control.lock().paused
    }

    /// Stops before the next item; already delivered items stay delivered.
    pub fn stop(&self) {
        self.control.update(|f| f.stopped = true);
    }

    pub fn is_finished(&self) -> bool {
        self.thread.as_ref().is_none_or(|t| t.is_finished())
    }

    pub fn join(mut self) -> Result<ReplayStats, ReplayError> {
        match self.thread.take() {
            Some(t) => t.join().map_err(|_| ReplayError::Panicked)?,
            None => Ok(ReplayStats::default()),
        }
    }
}

impl Drop for ReplayHandle {
    fn drop(&mut self) {
        if let Some(t) = self.thread.take() {
            self.control.update(|f| f.stopped = true);
            let _ = t.join();
        }
    }
}

/// Emits `items` in order on a background thread, item `k` at `k / rate`
/// seconds after the start (time spent paused does not count). Failed
/// deliveries are retried with exponential backoff; when retries run out
/// the replay stops and [`ReplayHandle::join`] returns the error.
pub fn replay_stream(items: Vec<StreamItem>, config: ReplayConfig, sink: Sink) -> Result<ReplayHandle, ReplayError> {
    if !(config.rate.is_finite() && config.rate > 0.0) {
        return Err(ReplayError::InvalidRate(config.rate));
    }
    let control = Arc::new(Control::default());
    let thread = std::thread::Builder::new()
        .name("replay".into())
        .spawn({
            let control = control.clone();
            move || run(items, config, sink, &control)
        })
        .expect("spawn replay thread");
    Ok(ReplayHandle {
        control,
        thread: Some(thread),
    })
}

fn deliver(sink: &mut Sink, agent: &Option<ureq::Agent>, item: &StreamItem) -> Result<(), String> {
    match sink {
        Sink::Callback(f) => f(item),
        Sink::Http { url } => {
            let body = StreamPost { items: vec![item.clone()] };
            agent
                .as_ref()
                .expect("http sink has an agent")
                .post(url.as_str())
                .send_json(&body)
                .map(|_| ())
                .map_err(|e| e.to_string())
        }
    }
}

fn run(items: Vec<StreamItem>, config: ReplayConfig, mut sink: Sink, control: &Control) -> Result<ReplayStats, ReplayError> {
    let agent = matches!(sink, Sink::Http { .. }).then(|| {
        ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(10)))
            .build()
            .new_agent()
    });
    let start = Instant::now();
    let mut paused_total = Duration::ZERO;
    let mut paused_since: Option<Instant> = None;
    let mut stats = ReplayStats::default();

    for (k, item) in items.iter().enumerate() {
        let due = Duration::from_secs_f64(k as f64 / config.rate);
        let mut flags = control.lock();
        loop {
            if flags.stopped {
                stats.elapsed = start.elapsed();
                return Ok(stats);
            }
            if flags.paused {
                paused_since.get_or_insert_with(Instant::now);
                flags = control.changed.wait(flags).unwrap_or_else(|e| e.into_inner());
                continue;
            }
            if let Some(since) = paused_since.take() {
                paused_total += since.elapsed();
            }
            let now = start.elapsed();
            let deadline = due + paused_total;
            if now >= deadline {
                break;
            }
            flags = control
                .changed
                .wait_timeout(flags, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
        drop(flags);

        let mut backoff = config.initial_backoff;
        let mut attempt = 0;
        loop {
            attempt += 1;
            match deliver(&mut sink, &agent, item) {
                Ok(()) => break,
                Err(message) if attempt > config.max_retries => {
                    return Err(ReplayError::Sink {
                        id: item.id.clone(),
                        attempts: attempt,
                        message,
                    })
                }
                Err(message) => {
                    log::warn!("replay of {:?} failed (attempt {attempt}): {message}", item.id);
                    stats.retries += 1;
                    std::thread::sleep(backoff);
                    backoff *= 2;
                }
            }
        }
        stats.sent += 1;
    }
    stats.elapsed = start.elapsed();
    Ok(stats)
}
