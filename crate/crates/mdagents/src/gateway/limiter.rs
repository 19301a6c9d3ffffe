//! Sliding-window dispatch limiter on the tokio clock, so tests can drive it
//! with a paused (virtual) clock.

use std::collections::VecDeque;
use std::time::Duration;

use tokio::sync::Mutex;
use tokio::time::Instant;

const WINDOW: Duration = Duration::from_secs(1);

/// Admits at most `limit` dispatches in any one-second window.
pub struct RateLimiter {
    limit: usize,
    recent: Mutex<VecDeque<Instant>>,
}

impl RateLimiter {
    pub fn new(limit: u32) -> Self {
        Self {
            limit: limit.max(1) as usize,
            recent: Mutex::new(VecDeque::new()),
        }
    }

    pub async fn acquire(&self) {
        loop {
            let wait_until = {
                let mut recent = self.recent.lock().await;
                let now = Instant::now();
                while recent.front().is_some_and(|&t| now - t >= WINDOW) {
                    recent.pop_front();
                }
                if recent.len() < self.limit {
                    recent.push_back(now);
                    return;
                }
                *recent.front().expect("window is full") + WINDOW
            };
            tokio::time::sleep_until(wait_until).await;
        }
    }
}
