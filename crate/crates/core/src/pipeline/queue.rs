use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::thread;
use std::time::Duration;

use crossbeam::queue::ArrayQueue;
use crossbeam::utils::Backoff;
use serde::{Deserialize, Serialize};

/// What a producer does when the queue is full.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropPolicy {
    /// Wait for the consumer (replay).
    #[default]
    Block,
    /// Evict the oldest item (live capture).
    DropOldest,
}

/// Bounded lock-free queue between two pipeline stages.
///
/// `push` blocks or evicts according to the policy; `pop` blocks until an
/// item arrives or the queue is closed and drained.
#[derive(Debug)]
pub struct BoundedQueue<T> {
    inner: ArrayQueue<T>,
    policy: DropPolicy,
    closed: AtomicBool,
    high_water: AtomicUsize,
    dropped: AtomicUsize,
}

fn wait(backoff: &Backoff) {
    if backoff.is_completed() {
        thread::sleep(Duration::from_micros(50));
    } else {
        backoff.snooze();
    }
}

impl<T> BoundedQueue<T> {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize, policy: DropPolicy) -> Self {
        Self {
            inner: ArrayQueue::new(capacity),
            policy,
            closed: AtomicBool::new(false),
            high_water: AtomicUsize::new(0),
            dropped: AtomicUsize::new(0),
        }
    }

    pub fn capacity(&self) -> usize {
        self.inner.capacity()
    }

    pub fn len(&self) -> usize {
        self.inner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    /// Largest length observed right after a push.
    pub fn high_water(&self) -> usize {
        self.high_water.load(Ordering::Relaxed)
    }

    /// Items evicted under [`DropPolicy::DropOldest`].
    pub fn dropped(&self) -> usize {
        self.dropped.load(Ordering::Relaxed)
    }

    /// Hands `item` back if the queue was closed.
    pub fn push(&self, item: T) -> Result<(), T> {
        let mut item = item;
        let backoff = Backoff::new();
        loop {
            if self.closed.load(Ordering::Acquire) {
                return Err(item);
            }
            match self.policy {
                DropPolicy::DropOldest => {
                    if self.inner.force_push(item).is_some() {
                        self.dropped.fetch_add(1, Ordering::Relaxed);
                    }
                    break;
                }
                DropPolicy::Block => match self.inner.push(item) {
                    Ok(()) => break,
                    Err(back) => {
                        item = back;
                        wait(&backoff);
                    }
                },
            }
        }
        self.high_water
            .fetch_max(self.inner.len(), Ordering::Relaxed);
        Ok(())
    }

    /// `None` once the queue is closed and empty.
    pub fn pop(&self) -> Option<T> {
        let backoff = Backoff::new();
        loop {
            if let Some(v) = self.inner.pop() {
                return Some(v);
            }
            if self.closed.load(Ordering::Acquire) {
                return self.inner.pop();
            }
            wait(&backoff);
        }
    }

    /// Idempotent. Pending items can still be popped.
    pub fn close(&self) {
        self.closed.store(true, Ordering::Release);
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::Acquire)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocking_queue_loses_nothing() {
        let q = BoundedQueue::new(2, DropPolicy::Block);
        let got = thread::scope(|s| {
            s.spawn(|| {
                for i in 0..500 {
                    q.push(i).unwrap();
                }
                q.close();
            });
            let mut got = Vec::new();
            while let Some(v) = q.pop() {
                got.push(v);
            }
            got
        });
        assert_eq!(got, (0..500).collect::<Vec<_>>());
        assert!(q.high_water() <= 2);
        assert_eq!(q.dropped(), 0);
    }

    #[test]
    fn drop_oldest_keeps_newest() {
        let q = BoundedQueue::new(3, DropPolicy::DropOldest);
        for i in 0..10 {
            q.push(i).unwrap();
        }
        q.close();
        q.close();
        assert_eq!(q.dropped(), 7);
        let rest: Vec<_> = std::iter::from_fn(|| q.pop()).collect();
        assert_eq!(rest, vec![7, 8, 9]);
        assert_eq!(q.push(1), Err(1));
    }
}
