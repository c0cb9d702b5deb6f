//! WebSocket transport: a rosbridge-compatible server and a blocking client.
//!
//! One text frame carries one JSON envelope. The server runs its own tokio
//! runtime on a background thread; a single router task owns the topic table
//! so routing decisions are serialized, while each connection has its own
//! writer task draining a bounded per-subscriber queue.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc as std_mpsc, Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use tokio::sync::{mpsc, oneshot, Notify};
use tokio_tungstenite::tungstenite::Message;

use super::message::BridgeMessage;
use super::router::{BoundedQueue, ClientId, Router, DEFAULT_QUEUE_CAPACITY};
use super::{BridgeError, BusClient, BusStats};

/// rosbridge's conventional port.
pub const DEFAULT_PORT: u16 = 9090;

struct Outbox {
    queue: Mutex<BoundedQueue<String>>,
    notify: Notify,
    closed: AtomicBool,
}

impl Outbox {
    fn new(capacity: usize) -> Self {
        Self {
            queue: Mutex::new(BoundedQueue::new(capacity)),
            notify: Notify::new(),
            closed: AtomicBool::new(false),
        }
    }

    fn push(&self, text: String) {
        self.queue.lock().expect("outbox poisoned").push(text);
        self.notify.notify_one();
    }

    fn close(&self) {
        self.closed.store(true, Ordering::SeqCst);
        self.notify.notify_one();
    }
}

enum Event {
    Connected(ClientId, Arc<Outbox>),
    Message(ClientId, BridgeMessage),
    Disconnected(ClientId),
}

#[derive(Default)]
struct Shared {
    subscribers: BTreeMap<String, usize>,
    clients: usize,
    delivered: u64,
    outboxes: BTreeMap<ClientId, Arc<Outbox>>,
    dropped_closed: u64,
}

/// Running bridge server. Dropping it shuts the server down.
pub struct BusServer {
    local_addr: SocketAddr,
    shared: Arc<Mutex<Shared>>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl BusServer {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn url(&self) -> String {
        format!("ws://{}", self.local_addr)
    }

    pub fn subscriber_count(&self, topic: &str) -> usize {
        let s = self.shared.lock().expect("stats poisoned");
        s.subscribers.get(topic).copied().unwrap_or(0)
    }

    pub fn stats(&self) -> BusStats {
        let s = self.shared.lock().expect("stats poisoned");
        let dropped = s.dropped_closed
            + s.outboxes
                .values()
                .map(|o| o.queue.lock().expect("outbox poisoned").dropped())
                .sum::<u64>();
        BusStats {
            clients: s.clients,
            delivered: s.delivered,
            dropped,
        }
    }

    /// Blocks until `topic` has at least `n` subscribers or the timeout passes.
    pub fn wait_for_subscribers(&self, topic: &str, n: usize, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        while Instant::now() < deadline {
            if self.subscriber_count(topic) >= n {
                return true;
            }
            std::thread::sleep(Duration::from_millis(2));
        }
        self.subscriber_count(topic) >= n
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for BusServer {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Binds `endpoint` (e.g. `127.0.0.1:9090`, port 0 for any) and starts serving.
pub fn serve(endpoint: &str) -> Result<BusServer, BridgeError> {
    serve_with_capacity(endpoint, DEFAULT_QUEUE_CAPACITY)
}

pub fn serve_with_capacity(endpoint: &str, capacity: usize) -> Result<BusServer, BridgeError> {
    let endpoint = endpoint.trim_start_matches("ws://");
    let listener = std::net::TcpListener::bind(endpoint).map_err(|e| BridgeError::Bind(format!("{endpoint}: {e}")))?;
    listener
        .set_nonblocking(true)
        .map_err(|e| BridgeError::Bind(e.to_string()))?;
    let local_addr = listener.local_addr().map_err(|e| BridgeError::Bind(e.to_string()))?;
    let shared = Arc::new(Mutex::new(Shared::default()));
    let (shutdown_tx, shutdown_rx) = oneshot::channel();
    let thread_shared = shared.clone();
    let thread = std::thread::Builder::new()
        .name("twinlink-bridge".into())
        .spawn(move || {
            let rt = tokio::runtime::Builder::new_current_thread()
                .enable_all()
                .build()
                .expect("tokio runtime");
            rt.block_on(server_main(listener, thread_shared, capacity, shutdown_rx));
        })
        .map_err(|e| BridgeError::Bind(e.to_string()))?;
    Ok(BusServer {
        local_addr,
        shared,
        shutdown: Some(shutdown_tx),
        thread: Some(thread),
    })
}

async fn server_main(
    listener: std::net::TcpListener,
    shared: Arc<Mutex<Shared>>,
    capacity: usize,
    mut shutdown: oneshot::Receiver<()>,
) {
    let listener = match tokio::net::TcpListener::from_std(listener) {
        Ok(l) => l,
        Err(e) => {
            log::error!("bridge listener: {e}");
            return;
        }
    };
    let (events_tx, events_rx) = mpsc::unbounded_channel();
    let router = tokio::spawn(router_task(events_rx, shared));
    let mut next_id: ClientId = 1;
    loop {
        tokio::select! {
            _ = &mut shutdown => break,
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    let _ = stream.set_nodelay(true);
                    let id = next_id;
                    next_id += 1;
                    log::debug!("bridge client {id} connected from {peer}");
                    tokio::spawn(connection_task(stream, id, events_tx.clone(), capacity));
                }
                Err(e) => log::warn!("accept failed: {e}"),
            }
        }
    }
    router.abort();
}

async fn router_task(mut events: mpsc::UnboundedReceiver<Event>, shared: Arc<Mutex<Shared>>) {
    let mut router = Router::new();
    let mut outboxes: BTreeMap<ClientId, Arc<Outbox>> = BTreeMap::new();
    while let Some(ev) = events.recv().await {
        let mut delivered = 0u64;
        match ev {
            Event::Connected(id, outbox) => {
                outboxes.insert(id, outbox.clone());
                shared.lock().expect("stats poisoned").outboxes.insert(id, outbox);
            }
            Event::Message(from, msg) => {
                let recipients = router.handle(from, &msg);
                if !recipients.is_empty() {
                    let text = msg.encode();
                    for r in recipients {
                        if let Some(o) = outboxes.get(&r) {
                            o.push(text.clone());
                            delivered += 1;
                        }
                    }
                }
            }
            Event::Disconnected(id) => {
                router.remove_client(id);
                if let Some(o) = outboxes.remove(&id) {
                    o.close();
                    let mut s = shared.lock().expect("stats poisoned");
                    s.outboxes.remove(&id);
                    s.dropped_closed += o.queue.lock().expect("outbox poisoned").dropped();
                }
            }
        }
        let mut s = shared.lock().expect("stats poisoned");
        s.delivered += delivered;
        s.clients = outboxes.len();
        s.subscribers.clear();
        // cheap: the table only holds the handful of pipeline topics
        for topic in subscribed_topics(&router) {
            let n = router.subscriber_count(&topic);
            s.subscribers.insert(topic, n);
        }
    }
}

fn subscribed_topics(router: &Router) -> Vec<String> {
    router.topics()
}

async fn connection_task(
    stream: tokio::net::TcpStream,
    id: ClientId,
    events: mpsc::UnboundedSender<Event>,
    capacity: usize,
) {
    let ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            log::warn!("websocket handshake with client {id} failed: {e}");
            return;
        }
    };
    let (mut sink, mut source) = ws.split();
    let outbox = Arc::new(Outbox::new(capacity));
    if events.send(Event::Connected(id, outbox.clone())).is_err() {
        return;
    }
    let writer_box = outbox.clone();
    let writer = tokio::spawn(async move {
        loop {
            let batch: Vec<String> = writer_box.queue.lock().expect("outbox poisoned").drain().collect();
            if batch.is_empty() {
                if writer_box.closed.load(Ordering::SeqCst) {
                    break;
                }
                writer_box.notify.notified().await;
                continue;
            }
            for text in batch {
                if sink.send(Message::text(text)).await.is_err() {
                    return;
                }
            }
        }
        let _ = sink.close().await;
    });
    while let Some(frame) = source.next().await {
        match frame {
            Ok(Message::Text(text)) => match BridgeMessage::decode(text.as_bytes()) {
                Ok(msg) => {
                    if events.send(Event::Message(id, msg)).is_err() {
                        break;
                    }
                }
                Err(e) => log::warn!("client {id} sent an invalid envelope: {e}"),
            },
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => {}
        }
    }
    let _ = events.send(Event::Disconnected(id));
    outbox.close();
    let _ = writer.await;
}

/// Blocking WebSocket client backed by a background runtime thread.
pub struct WsClient {
    out_tx: Option<mpsc::UnboundedSender<String>>,
    in_rx: std_mpsc::Receiver<BridgeMessage>,
    thread: Option<JoinHandle<()>>,
}

impl WsClient {
    /// Connects to `ws://host:port` (the scheme may be omitted).
    pub fn connect(endpoint: &str) -> Result<Self, BridgeError> {
        let url = if endpoint.starts_with("ws://") {
            endpoint.to_string()
        } else {
            format!("ws://{endpoint}")
        };
        let (ready_tx, ready_rx) = std_mpsc::sync_channel::<Result<(), BridgeError>>(1);
        let (out_tx, mut out_rx) = mpsc::unbounded_channel::<String>();
        let (in_tx, in_rx) = std_mpsc::channel();
        let thread = std::thread::Builder::new()
            .name("twinlink-ws-client".into())
            .spawn(move || {
                let rt = tokio::runtime::Builder::new_current_thread()
                    .enable_all()
                    .build()
                    .expect("tokio runtime");
                rt.block_on(async move {
                    let ws = match tokio_tungstenite::connect_async(url.as_str()).await {
                        Ok((ws, _)) => {
                            let _ = ready_tx.send(Ok(()));
                            ws
                        }
                        Err(e) => {
                            let _ = ready_tx.send(Err(BridgeError::Connect(format!("{url}: {e}"))));
                            return;
                        }
                    };
                    let (mut sink, mut source) = ws.split();
                    let writer = async move {
                        while let Some(text) = out_rx.recv().await {
                            if sink.send(Message::text(text)).await.is_err() {
                                return;
                            }
                        }
                        let _ = sink.close().await;
                    };
                    let reader = async move {
                        while let Some(frame) = source.next().await {
                            match frame {
                                Ok(Message::Text(text)) => match BridgeMessage::decode(text.as_bytes()) {
                                    Ok(m) => {
                                        if in_tx.send(m).is_err() {
                                            break;
                                        }
                                    }
                                    Err(e) => log::warn!("server sent an invalid envelope: {e}"),
                                },
                                Ok(Message::Close(_)) | Err(_) => break,
                                Ok(_) => {}
                            }
                        }
                    };
                    tokio::join!(writer, reader);
                });
            })
            .map_err(|e| BridgeError::Connect(e.to_string()))?;
        match ready_rx.recv() {
            Ok(Ok(())) => Ok(Self {
                out_tx: Some(out_tx),
                in_rx,
                thread: Some(thread),
            }),
            Ok(Err(e)) => {
                let _ = thread.join();
                Err(e)
            }
            Err(_) => Err(BridgeError::Connect("client thread exited".into())),
        }
    }

    /// Waits up to `timeout` for the next message.
    pub fn recv_timeout(&mut self, timeout: Duration) -> Result<Option<BridgeMessage>, BridgeError> {
        match self.in_rx.recv_timeout(timeout) {
            Ok(m) => Ok(Some(m)),
            Err(std_mpsc::RecvTimeoutError::Timeout) => Ok(None),
            Err(std_mpsc::RecvTimeoutError::Disconnected) => Err(BridgeError::Disconnected),
        }
    }

    /// Flushes queued frames, closes the connection and waits (bounded) for
    /// the background thread.
    pub fn close(mut self) {
        self.out_tx.take();
        if let Some(t) = self.thread.take() {
            let deadline = Instant::now() + Duration::from_secs(5);
            while !t.is_finished() && Instant::now() < deadline {
                std::thread::sleep(Duration::from_millis(2));
            }
            if t.is_finished() {
                let _ = t.join();
            }
        }
    }
}

impl BusClient for WsClient {
    fn send(&mut self, msg: BridgeMessage) -> Result<(), BridgeError> {
        self.out_tx
            .as_ref()
            .ok_or(BridgeError::Disconnected)?
            .send(msg.encode())
            .map_err(|_| BridgeError::Disconnected)
    }

    fn try_recv(&mut self) -> Result<Option<BridgeMessage>, BridgeError> {
        match self.in_rx.try_recv() {
            Ok(m) => Ok(Some(m)),
            Err(std_mpsc::TryRecvError::Empty) => Ok(None),
            Err(std_mpsc::TryRecvError::Disconnected) => Err(BridgeError::Disconnected),
        }
    }
}
