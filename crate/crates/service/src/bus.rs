//! Fan-out of session events to any number of subscribers.
//!
//! Publishing never waits on a subscriber: each has a bounded queue, and
//! when it is full the oldest event is dropped. The subscriber then sees a
//! `gap` event with the number of events it missed before the next
//! delivered event.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex, Weak};
use std::time::Duration;

use crate::wire::{Event, GapReason};

pub const DEFAULT_QUEUE_CAPACITY: usize = 256;

#[derive(Default)]
struct QueueState {
    events: VecDeque<Event>,
    dropped: u64,
    last_delivered_tick: u32,
    closed: bool,
}

struct Queue {
    state: Mutex<QueueState>,
    ready: Condvar,
    capacity: usize,
}

impl Queue {
    fn push(&self, event: Event) {
        let mut s = self.state.lock().expect("queue lock");
        if s.events.len() == self.capacity {
            s.events.pop_front();
            s.dropped += 1;
        }
        s.events.push_back(event);
        self.ready.notify_one();
    }

    fn close(&self) {
        self.state.lock().expect("queue lock").closed = true;
        self.ready.notify_all();
    }
}

#[derive(Clone)]
pub struct EventBus {
    subscribers: Arc<Mutex<Vec<Weak<Queue>>>>,
    capacity: usize,
}

impl Default for EventBus {
    fn default() -> Self {
        Self::new(DEFAULT_QUEUE_CAPACITY)
    }
}

impl EventBus {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "queue capacity must be positive");
        Self {
            subscribers: Arc::new(Mutex::new(Vec::new())),
            capacity,
        }
    }

    pub fn subscribe(&self) -> Subscription {
        let q = Arc::new(Queue {
            state: Mutex::new(QueueState::default()),
            ready: Condvar::new(),
            capacity: self.capacity,
        });
        self.subscribers.lock().expect("bus lock").push(Arc::downgrade(&q));
        Subscription { queue: q }
    }

    pub fn publish(&self, event: &Event) {
        let mut subs = self.subscribers.lock().expect("bus lock");
        subs.retain(|w| match w.upgrade() {
            Some(q) => {
                q.push(event.clone());
                true
            }
            None => false,
        });
    }

    pub fn subscriber_count(&self) -> usize {
        let mut subs = self.subscribers.lock().expect("bus lock");
        subs.retain(|w| w.strong_count() > 0);
        subs.len()
    }

    /// Wake every subscriber; they drain what is queued and then report
    /// [`Recv::Closed`].
    pub fn close(&self) {
        for w in self.subscribers.lock().expect("bus lock").iter() {
            if let Some(q) = w.upgrade() {
                q.close();
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Recv {
    Event(Event),
    Timeout,
    Closed,
}

pub struct Subscription {
    queue: Arc<Queue>,
}

impl Subscription {
    fn take(s: &mut QueueState) -> Option<Event> {
        if s.dropped > 0 {
            let missing = std::mem::take(&mut s.dropped);
            return Some(Event::gap(s.last_delivered_tick, GapReason::Dropped, missing));
        }
        let e = s.events.pop_front()?;
        if let Some(t) = e.tick_number() {
            s.last_delivered_tick = t;
        }
        Some(e)
    }

    pub fn try_recv(&self) -> Option<Event> {
        Self::take(&mut self.queue.state.lock().expect("queue lock"))
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Recv {
        let mut s = self.queue.state.lock().expect("queue lock");
        let deadline = std::time::Instant::now() + timeout;
        loop {
            if let Some(e) = Self::take(&mut s) {
                return Recv::Event(e);
            }
            if s.closed {
                return Recv::Closed;
            }
            let now = std::time::Instant::now();
            if now >= deadline {
                return Recv::Timeout;
            }
            s = self.queue.ready.wait_timeout(s, deadline - now).expect("queue lock").0;
        }
    }

    pub fn pending(&self) -> usize {
        self.queue.state.lock().expect("queue lock").events.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cogload::FeatureVector;

    fn tick(n: u32) -> Event {
        Event::tick(n, 1, "Rest", None, 0, &FeatureVector::from_array([0.0; 9]), None, None)
    }

    #[test]
    fn every_subscriber_gets_every_event_in_order() {
        let bus = EventBus::new(16);
        let a = bus.subscribe();
        let b = bus.subscribe();
        for n in 1..=10 {
            bus.publish(&tick(n));
        }
        for sub in [&a, &b] {
            let got: Vec<u32> = std::iter::from_fn(|| sub.try_recv()).filter_map(|e| e.tick_number()).collect();
            assert_eq!(got, (1..=10).collect::<Vec<_>>());
        }
    }

    #[test]
    fn slow_subscriber_drops_oldest_and_sees_a_gap() {
        let bus = EventBus::new(4);
        let slow = bus.subscribe();
        bus.publish(&tick(1));
        assert_eq!(slow.try_recv().unwrap().tick_number(), Some(1));
        for n in 2..=11 {
            bus.publish(&tick(n));
        }
        let got: Vec<Event> = std::iter::from_fn(|| slow.try_recv()).collect();
        assert_eq!(got[0], Event::gap(1, GapReason::Dropped, 6));
        let ticks: Vec<u32> = got[1..].iter().filter_map(Event::tick_number).collect();
        assert_eq!(ticks, vec![8, 9, 10, 11]);
    }

    #[test]
    fn dropped_subscription_is_pruned() {
        let bus = EventBus::new(4);
        let a = bus.subscribe();
        drop(bus.subscribe());
        bus.publish(&tick(1));
        assert_eq!(bus.subscriber_count(), 1);
        assert_eq!(a.pending(), 1);
    }

    #[test]
    fn close_wakes_waiters() {
        let bus = EventBus::new(4);
        let sub = bus.subscribe();
        let h = std::thread::spawn(move || sub.recv_timeout(Duration::from_secs(10)));
        std::thread::sleep(Duration::from_millis(20));
        bus.close();
        assert_eq!(h.join().unwrap(), Recv::Closed);
    }

    #[test]
    fn timeout_when_idle() {
        let bus = EventBus::new(4);
        let sub = bus.subscribe();
        assert_eq!(sub.recv_timeout(Duration::from_millis(10)), Recv::Timeout);
    }
}
