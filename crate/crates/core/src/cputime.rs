//! CPU-time clock for the calling thread.
//!
//! Simulations run sequentially on one thread, so thread CPU time equals the
//! CPU time the run consumed even when several runs share the process.

use std::time::Duration;

pub fn thread_cpu_time() -> Duration {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return Duration::ZERO;
    }
    Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32)
}

/// Measures thread CPU seconds spent in `f`.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = thread_cpu_time();
    let out = f();
    let spent = thread_cpu_time().saturating_sub(start);
    (out, spent.as_secs_f64())
}
