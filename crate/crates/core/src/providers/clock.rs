//! Time sources and the per-provider sliding-window rate limiter.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use chrono::{DateTime, TimeDelta, Utc};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
    fn sleep(&self, d: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Time that only moves when someone sleeps on it.
#[derive(Debug)]
pub struct VirtualClock {
    now: Mutex<DateTime<Utc>>,
}

impl VirtualClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        VirtualClock {
            now: Mutex::new(start),
        }
    }

    pub fn advance(&self, d: Duration) {
        let mut now = self.now.lock().unwrap();
        *now += to_delta(d);
    }
}

impl Default for VirtualClock {
    fn default() -> Self {
        VirtualClock::new(DateTime::UNIX_EPOCH)
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        self.advance(d);
    }
}

/// A clock stuck at one instant; sleeping returns immediately.
#[derive(Debug, Clone, Copy)]
pub struct FrozenClock(pub DateTime<Utc>);

impl Default for FrozenClock {
    fn default() -> Self {
        FrozenClock(DateTime::UNIX_EPOCH)
    }
}

impl Clock for FrozenClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }

    fn sleep(&self, _d: Duration) {}
}

fn to_delta(d: Duration) -> TimeDelta {
    TimeDelta::from_std(d).unwrap_or(TimeDelta::MAX)
}

/// Admits at most `per_second` dispatches in any one-second window.
/// Zero means unlimited. Holding the lock while waiting serializes callers.
#[derive(Debug)]
pub struct RateLimiter {
    per_second: u32,
    sent: Mutex<VecDeque<DateTime<Utc>>>,
}

impl RateLimiter {
    pub fn new(per_second: u32) -> Self {
        RateLimiter {
            per_second,
            sent: Mutex::new(VecDeque::new()),
        }
    }

    pub fn acquire(&self, clock: &dyn Clock) {
        if self.per_second == 0 {
            return;
        }
        let window = TimeDelta::seconds(1);
        let mut sent = self.sent.lock().unwrap();
        loop {
            let now = clock.now();
            while sent.front().is_some_and(|t| *t + window <= now) {
                sent.pop_front();
            }
            if sent.len() < self.per_second as usize {
                sent.push_back(now);
                return;
            }
            let wait = (sent[0] + window - now).to_std().unwrap_or(Duration::from_millis(1));
            clock.sleep(wait.max(Duration::from_micros(1)));
            if clock.now() <= now {
                // a clock that does not move cannot pace anything
                sent.pop_front();
            }
        }
    }
}
