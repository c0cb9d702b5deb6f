//! In-process transport with lock-step delivery.
//!
//! Every operation a client sends (including subscribes) is queued with a
//! global sequence number; nothing takes effect until [`LoopbackBus::pump`],
//! which processes the queue in sequence order. Messages pass through the
//! JSON codec on the way, exactly as they would over a socket.

use std::collections::{BTreeMap, VecDeque};
use std::sync::{Arc, Mutex, MutexGuard};

use super::message::BridgeMessage;
use super::router::{BoundedQueue, ClientId, Router, DEFAULT_QUEUE_CAPACITY};
use super::{BridgeError, BusClient, BusStats};

#[derive(Debug)]
struct Inner {
    router: Router,
    pending: VecDeque<(u64, ClientId, String)>,
    next_seq: u64,
    next_client: ClientId,
    inboxes: BTreeMap<ClientId, BoundedQueue<String>>,
    capacity: usize,
    delivered: u64,
}

/// Handle to a loopback bus; cheap to clone.
#[derive(Debug, Clone)]
pub struct LoopbackBus {
    inner: Arc<Mutex<Inner>>,
}

impl Default for LoopbackBus {
    fn default() -> Self {
        Self::new()
    }
}

impl LoopbackBus {
    pub fn new() -> Self {
        Self::with_capacity(DEFAULT_QUEUE_CAPACITY)
    }

    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            inner: Arc::new(Mutex::new(Inner {
                router: Router::new(),
                pending: VecDeque::new(),
                next_seq: 0,
                next_client: 1,
                inboxes: BTreeMap::new(),
                capacity,
                delivered: 0,
            })),
        }
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().expect("loopback bus mutex poisoned")
    }

    pub fn client(&self) -> LoopbackClient {
        let mut inner = self.lock();
        let id = inner.next_client;
        inner.next_client += 1;
        let cap = inner.capacity;
        inner.inboxes.insert(id, BoundedQueue::new(cap));
        LoopbackClient { bus: self.clone(), id }
    }

    /// Delivers everything queued so far, in enqueue order. Returns the
    /// number of publish deliveries made.
    pub fn pump(&self) -> usize {
        let mut inner = self.lock();
        let mut count = 0;
        while let Some((_seq, from, text)) = inner.pending.pop_front() {
            let msg =
                BridgeMessage::decode(text.as_bytes()).expect("loopback only queues messages produced by the encoder");
            let recipients = inner.router.handle(from, &msg);
            for r in recipients {
                if let Some(q) = inner.inboxes.get_mut(&r) {
                    q.push(text.clone());
                    count += 1;
                }
            }
        }
        inner.delivered += count as u64;
        count
    }

    pub fn pending(&self) -> usize {
        self.lock().pending.len()
    }

    pub fn stats(&self) -> BusStats {
        let inner = self.lock();
        BusStats {
            clients: inner.inboxes.len(),
            delivered: inner.delivered,
            dropped: inner.inboxes.values().map(BoundedQueue::dropped).sum(),
        }
    }

    pub fn subscriber_count(&self, topic: &str) -> usize {
        self.lock().router.subscriber_count(topic)
    }
}

#[derive(Debug)]
pub struct LoopbackClient {
    bus: LoopbackBus,
    id: ClientId,
}

impl LoopbackClient {
    pub fn id(&self) -> ClientId {
        self.id
    }
}

impl BusClient for LoopbackClient {
    fn send(&mut self, msg: BridgeMessage) -> Result<(), BridgeError> {
        let text = msg.encode();
        let mut inner = self.bus.lock();
        let seq = inner.next_seq;
        inner.next_seq += 1;
        inner.pending.push_back((seq, self.id, text));
        Ok(())
    }

    fn try_recv(&mut self) -> Result<Option<BridgeMessage>, BridgeError> {
        let text = {
            let mut inner = self.bus.lock();
            match inner.inboxes.get_mut(&self.id) {
                Some(q) => q.pop(),
                None => return Err(BridgeError::Disconnected),
            }
        };
        text.map(|t| BridgeMessage::decode(t.as_bytes())).transpose()
    }
}

impl Drop for LoopbackClient {
    fn drop(&mut self) {
        if let Ok(mut inner) = self.bus.inner.lock() {
            inner.inboxes.remove(&self.id);
            inner.router.remove_client(self.id);
        }
    }
}
