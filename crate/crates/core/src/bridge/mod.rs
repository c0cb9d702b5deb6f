//! rosbridge-v2 compatible message bus.
//!
//! Two transports share one codec and one routing table: an in-process
//! loopback bus with deterministic lock-step delivery, and a WebSocket
//! server/client pair.

mod loopback;
mod message;
pub mod msgs;
mod router;
mod ws;

pub use loopback::{LoopbackBus, LoopbackClient};
pub use message::{BridgeMessage, Op};
pub use msgs::{BoolMsg, ClockMsg, JointStateMsg, Payload, Stamp, TransformStampedMsg};
pub use router::{BoundedQueue, ClientId, Router, DEFAULT_QUEUE_CAPACITY};
pub use ws::{serve, serve_with_capacity, BusServer, WsClient, DEFAULT_PORT};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BridgeError {
    #[error("invalid topic {0:?}: must start with '/'")]
    InvalidTopic(String),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("unsupported op {0:?}")]
    UnsupportedOp(String),
    #[error("malformed JSON: {0}")]
    Decode(String),
    #[error("schema violation in `{field}`: {reason}")]
    Schema { field: String, reason: String },
    #[error("cannot bind: {0}")]
    Bind(String),
    #[error("cannot connect: {0}")]
    Connect(String),
    #[error("peer disconnected")]
    Disconnected,
    #[error("timed out: {0}")]
    Timeout(String),
}

/// Counters shared by both transports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BusStats {
    pub clients: usize,
    /// Publish deliveries enqueued to subscribers.
    pub delivered: u64,
    /// Messages discarded by full subscriber queues.
    pub dropped: u64,
}

/// A connection to the bus.
pub trait BusClient {
    fn send(&mut self, msg: BridgeMessage) -> Result<(), BridgeError>;

    /// Next delivered message, if any. Never blocks.
    fn try_recv(&mut self) -> Result<Option<BridgeMessage>, BridgeError>;

    fn subscribe(&mut self, topic: &str, msg_type: &str) -> Result<(), BridgeError> {
        self.send(BridgeMessage::subscribe(topic, msg_type)?)
    }

    fn advertise(&mut self, topic: &str, msg_type: &str) -> Result<(), BridgeError> {
        self.send(BridgeMessage::advertise(topic, msg_type)?)
    }

    fn publish_payload<P: Payload>(&mut self, topic: &str, payload: &P) -> Result<(), BridgeError>
    where
        Self: Sized,
    {
        payload.check()?;
        self.send(BridgeMessage::publish(topic, payload.to_value())?)
    }
}

impl<T: BusClient + ?Sized> BusClient for Box<T> {
    fn send(&mut self, msg: BridgeMessage) -> Result<(), BridgeError> {
        (**self).send(msg)
    }

    fn try_recv(&mut self) -> Result<Option<BridgeMessage>, BridgeError> {
        (**self).try_recv()
    }
}
