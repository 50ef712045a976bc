//! In-flight cap and per-minute rate limiting shared by all callers of a gateway.

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

#[derive(Debug)]
pub struct Throttle {
    max_in_flight: usize,
    per_minute: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
    starts: Mutex<VecDeque<Instant>>,
}

pub struct Permit<'a> {
    throttle: &'a Throttle,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.throttle.in_flight.lock().expect("throttle lock");
        *n -= 1;
        self.throttle.freed.notify_one();
    }
}

impl Throttle {
    /// `0` disables the corresponding limit.
    pub fn new(max_in_flight: usize, per_minute: usize) -> Self {
        Throttle {
            max_in_flight,
            per_minute,
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
            starts: Mutex::new(VecDeque::new()),
        }
    }

    pub fn unlimited() -> Self {
        Self::new(0, 0)
    }

    /// Blocks until a request may start.
    pub fn acquire(&self) -> Permit<'_> {
        self.wait_rate();
        let mut n = self.in_flight.lock().expect("throttle lock");
        while self.max_in_flight > 0 && *n >= self.max_in_flight {
            n = self.freed.wait(n).expect("throttle lock");
        }
        *n += 1;
        Permit { throttle: self }
    }

    pub fn in_flight(&self) -> usize {
        *self.in_flight.lock().expect("throttle lock")
    }

    fn wait_rate(&self) {
        if self.per_minute == 0 {
            return;
        }
        let window = Duration::from_secs(60);
        loop {
            let mut starts = self.starts.lock().expect("throttle lock");
            let now = Instant::now();
            while starts.front().is_some_and(|t| now.duration_since(*t) >= window) {
                starts.pop_front();
            }
            if starts.len() < self.per_minute {
                starts.push_back(now);
                return;
            }
            let wait = window - now.duration_since(*starts.front().expect("non-empty window"));
            drop(starts);
            std::thread::sleep(wait);
        }
    }
}
