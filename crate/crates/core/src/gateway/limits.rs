use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

/// Time source for backoff and rate limiting; swapped for a manual clock in
/// tests.
pub trait Clock: Send + Sync {
    /// Time elapsed since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock {
            origin: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// A clock that only moves when slept on. Sleeps are recorded.
#[derive(Debug, Default)]
pub struct ManualClock {
    state: Mutex<(Duration, Vec<Duration>)>,
}

impl ManualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, d: Duration) {
        self.state.lock().unwrap().0 += d;
    }

    pub fn sleeps(&self) -> Vec<Duration> {
        self.state.lock().unwrap().1.clone()
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        self.state.lock().unwrap().0
    }

    fn sleep(&self, d: Duration) {
        let mut s = self.state.lock().unwrap();
        s.0 += d;
        s.1.push(d);
    }
}

/// Exponential backoff: `base · 2^attempt`, stretched by up to `jitter`.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            jitter: 0.25,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt + 1`. `salt` picks the jitter so
    /// that concurrent callers spread out without a shared RNG.
    pub fn backoff(&self, attempt: u32, salt: u64) -> Duration {
        let base = self.base_delay.as_secs_f64() * 2f64.powi(attempt as i32);
        let unit = (crate::seed::mix(salt ^ attempt as u64) >> 11) as f64 / (1u64 << 53) as f64;
        Duration::from_secs_f64(base * (1.0 + self.jitter * unit))
    }
}

/// Caps concurrent requests and requests started in any 60 s window.
pub struct RateLimiter {
    max_in_flight: usize,
    per_minute: Option<usize>,
    state: Mutex<LimiterState>,
    slot_freed: Condvar,
}

#[derive(Default)]
struct LimiterState {
    in_flight: usize,
    peak_in_flight: usize,
    started: VecDeque<Duration>,
}

const WINDOW: Duration = Duration::from_secs(60);

pub struct Permit<'a> {
    limiter: &'a RateLimiter,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut s = self.limiter.state.lock().unwrap();
        s.in_flight -= 1;
        self.limiter.slot_freed.notify_one();
    }
}

impl RateLimiter {
    pub fn new(max_in_flight: usize, per_minute: Option<usize>) -> Self {
        RateLimiter {
            max_in_flight: max_in_flight.max(1),
            per_minute: per_minute.filter(|&n| n > 0),
            state: Mutex::new(LimiterState::default()),
            slot_freed: Condvar::new(),
        }
    }

    pub fn unlimited() -> Self {
        Self::new(usize::MAX, None)
    }

    pub fn acquire<'a>(&'a self, clock: &dyn Clock) -> Permit<'a> {
        let mut s = self.state.lock().unwrap();
        while s.in_flight >= self.max_in_flight {
            s = self.slot_freed.wait(s).unwrap();
        }
        s.in_flight += 1;
        s.peak_in_flight = s.peak_in_flight.max(s.in_flight);
        if let Some(limit) = self.per_minute {
            loop {
                let now = clock.now();
                while s.started.front().is_some_and(|&t| now >= t + WINDOW) {
                    s.started.pop_front();
                }
                if s.started.len() < limit {
                    s.started.push_back(now);
                    break;
                }
                let wait = *s.started.front().expect("window is full") + WINDOW - now;
                drop(s);
                clock.sleep(wait);
                s = self.state.lock().unwrap();
            }
        }
        Permit { limiter: self }
    }

    pub fn peak_in_flight(&self) -> usize {
        self.state.lock().unwrap().peak_in_flight
    }
}

/// Hard ceiling on backend calls. Cache hits are free.
#[derive(Debug, Default)]
pub struct Budget {
    max_calls: Option<u64>,
    used: AtomicU64,
}

impl Budget {
    pub fn new(max_calls: Option<u64>) -> Self {
        Budget {
            max_calls,
            used: AtomicU64::new(0),
        }
    }

    /// Reserves one call, or returns false when the ceiling is reached.
    pub fn try_consume(&self) -> bool {
        match self.max_calls {
            None => {
                self.used.fetch_add(1, Ordering::SeqCst);
                true
            }
            Some(max) => self
                .used
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |u| (u < max).then_some(u + 1))
                .is_ok(),
        }
    }

    pub fn used(&self) -> u64 {
        self.used.load(Ordering::SeqCst)
    }

    pub fn max_calls(&self) -> Option<u64> {
        self.max_calls
    }
}
