use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::message::{BridgeMessage, Op};

pub type ClientId = u64;

pub const DEFAULT_QUEUE_CAPACITY: usize = 1024;

/// FIFO that drops its oldest entry when full.
#[derive(Debug)]
pub struct BoundedQueue<T> {
    buf: VecDeque<T>,
    capacity: usize,
    dropped: u64,
}

impl<T> BoundedQueue<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "queue capacity must be positive");
        Self {
            buf: VecDeque::new(),
            capacity,
            dropped: 0,
        }
    }

    pub fn push(&mut self, item: T) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
            self.dropped += 1;
        }
        self.buf.push_back(item);
    }

    pub fn pop(&mut self) -> Option<T> {
        self.buf.pop_front()
    }

    pub fn drain(&mut self) -> std::collections::vec_deque::Drain<'_, T> {
        self.buf.drain(..)
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

/// Topic table. Routing decisions are made by a single owner; the returned
/// recipient list is ordered by client id.
#[derive(Debug, Default)]
pub struct Router {
    subscribers: BTreeMap<String, BTreeSet<ClientId>>,
    advertised: BTreeMap<String, (String, BTreeSet<ClientId>)>,
}

impl Router {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies a control op, or returns the recipients of a publish.
    pub fn handle(&mut self, from: ClientId, msg: &BridgeMessage) -> Vec<ClientId> {
        let topic = msg.topic().to_string();
        match msg.op() {
            Op::Subscribe => {
                self.subscribers.entry(topic).or_default().insert(from);
                Vec::new()
            }
            Op::Unsubscribe => {
                if let Some(s) = self.subscribers.get_mut(&topic) {
                    s.remove(&from);
                    if s.is_empty() {
                        self.subscribers.remove(&topic);
                    }
                }
                Vec::new()
            }
            Op::Advertise => {
                let ty = msg.msg_type().unwrap_or_default().to_string();
                self.advertised
                    .entry(topic)
                    .or_insert_with(|| (ty, BTreeSet::new()))
                    .1
                    .insert(from);
                Vec::new()
            }
            Op::Unadvertise => {
                if let Some((_, pubs)) = self.advertised.get_mut(&topic) {
                    pubs.remove(&from);
                    if pubs.is_empty() {
                        self.advertised.remove(&topic);
                    }
                }
                Vec::new()
            }
            Op::Publish => self
                .subscribers
                .get(&topic)
                .map(|s| s.iter().copied().collect())
                .unwrap_or_default(),
        }
    }

    pub fn remove_client(&mut self, id: ClientId) {
        self.subscribers.retain(|_, s| {
            s.remove(&id);
            !s.is_empty()
        });
        self.advertised.retain(|_, (_, p)| {
            p.remove(&id);
            !p.is_empty()
        });
    }

    pub fn subscriber_count(&self, topic: &str) -> usize {
        self.subscribers.get(topic).map_or(0, BTreeSet::len)
    }

    /// Topics with at least one subscriber.
    pub fn topics(&self) -> Vec<String> {
        self.subscribers.keys().cloned().collect()
    }

    pub fn advertised_type(&self, topic: &str) -> Option<&str> {
        self.advertised.get(topic).map(|(t, _)| t.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn queue_drops_oldest() {
        let mut q = BoundedQueue::new(2);
        q.push(1);
        q.push(2);
        q.push(3);
        assert_eq!(q.dropped(), 1);
        assert_eq!(q.pop(), Some(2));
        assert_eq!(q.pop(), Some(3));
        assert_eq!(q.pop(), None);
    }

    #[test]
    fn double_subscribe_delivers_once() {
        let mut r = Router::new();
        let sub = BridgeMessage::subscribe("/a", "std_msgs/Bool").unwrap();
        r.handle(7, &sub);
        r.handle(7, &sub);
        r.handle(3, &sub);
        let p = BridgeMessage::publish("/a", json!({"data": true})).unwrap();
        assert_eq!(r.handle(1, &p), vec![3, 7]);
        r.remove_client(7);
        assert_eq!(r.handle(1, &p), vec![3]);
        r.handle(3, &BridgeMessage::unsubscribe("/a").unwrap());
        assert!(r.handle(1, &p).is_empty());
        assert_eq!(r.subscriber_count("/a"), 0);
    }
}
