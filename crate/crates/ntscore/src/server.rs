//! WebSocket control endpoint. The calling thread becomes the engine
//! thread; each client gets a reader thread that forwards commands and
//! relays per-unit snapshots.

use std::io::ErrorKind;
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, unbounded, Receiver, RecvTimeoutError, Sender};
use log::{debug, info, warn};
use ntscore_core::score::Tu;
use ntscore_core::Event;
use serde::{Deserialize, Serialize};
use tungstenite::{Message, WebSocket};

use crate::formats::SnapshotDoc;
use crate::session::{Session, SessionError, SessionState, TraceRecord};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("address in use")]
    AddressInUse,
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error(transparent)]
    Session(#[from] SessionError),
}

pub fn bind(addr: impl ToSocketAddrs + std::fmt::Display) -> Result<TcpListener, ServeError> {
    TcpListener::bind(&addr).map_err(|e| match e.kind() {
        ErrorKind::AddrInUse => ServeError::AddressInUse,
        _ => ServeError::Bind { addr: addr.to_string(), source: e },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    Start,
    Pause,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub enum ClientMessage {
    Trigger(String),
    Set { var: String, value: i64 },
    Transport(Transport),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AckBody {
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AckMessage {
    pub ack: AckBody,
}

fn ack(ok: bool, detail: impl Into<String>) -> String {
    serde_json::to_string(&AckMessage { ack: AckBody { ok, detail: detail.into() } }).expect("ack serializes")
}

struct Command {
    msg: ClientMessage,
    reply: Sender<String>,
}

#[derive(Default)]
struct Hub {
    clients: Vec<Sender<String>>,
    latest: String,
}

impl Hub {
    fn publish(&mut self, text: String) {
        self.clients.retain(|c| c.send(text.clone()).is_ok());
        self.latest = text;
    }
}

#[derive(Clone, Debug)]
pub struct ServeOptions {
    /// Start ticking without waiting for a `transport: start`.
    pub autostart: bool,
    pub script: Vec<(Tu, Event)>,
}

fn snapshot_json(session: &Session) -> String {
    serde_json::to_string(&SnapshotDoc::from(&session.snapshot())).expect("snapshot serializes")
}

/// Runs `session` under the wall clock while serving clients on
/// `listener`. Returns the finished session.
pub fn serve(
    listener: TcpListener,
    mut session: Session,
    opts: ServeOptions,
    mut observe: impl FnMut(&TraceRecord),
) -> Result<Session, ServeError> {
    let hub = Arc::new(Mutex::new(Hub { clients: Vec::new(), latest: snapshot_json(&session) }));
    let (cmd_tx, cmd_rx) = unbounded::<Command>();
    let stop = Arc::new(AtomicBool::new(false));
    listener.set_nonblocking(true).map_err(|source| ServeError::Bind { addr: "listener".into(), source })?;
    if let Ok(a) = listener.local_addr() {
        info!("serving on ws://{a}");
    }
    let acceptor = {
        let (hub, stop, cmd_tx) = (hub.clone(), stop.clone(), cmd_tx.clone());
        thread::spawn(move || accept_loop(listener, hub, cmd_tx, stop))
    };
    drop(cmd_tx);

    let result = engine_loop(&mut session, &opts, &hub, &cmd_rx, &mut observe);
    stop.store(true, Ordering::SeqCst);
    hub.lock().expect("hub lock").clients.clear();
    let _ = acceptor.join();
    result.map(|_| session)
}

fn engine_loop(
    session: &mut Session,
    opts: &ServeOptions,
    hub: &Mutex<Hub>,
    cmd_rx: &Receiver<Command>,
    observe: &mut impl FnMut(&TraceRecord),
) -> Result<(), ServeError> {
    let period = session.config().tu_period;
    session.start()?;
    let mut running = opts.autostart;
    let mut deadline = Instant::now();
    while session.state() == SessionState::Running {
        let timeout = if running { deadline.saturating_duration_since(Instant::now()) } else { Duration::from_millis(100) };
        match cmd_rx.recv_timeout(timeout) {
            Ok(cmd) => {
                let reply = match cmd.msg {
                    ClientMessage::Transport(Transport::Start) => {
                        if !running {
                            running = true;
                            deadline = Instant::now();
                        }
                        ack(true, "started")
                    }
                    ClientMessage::Transport(Transport::Pause) => {
                        running = false;
                        ack(true, "paused")
                    }
                    ClientMessage::Trigger(point) => {
                        let event = session.compiled().points.iter().find(|p| p.id == point).map(|p| p.event.clone());
                        match event {
                            None => ack(false, format!("unknown point `{point}`")),
                            Some(ev) => offer(session, Event::Signal(ev)),
                        }
                    }
                    ClientMessage::Set { var, value } => offer(session, Event::Assign(var, value)),
                };
                let _ = cmd.reply.send(reply);
                continue;
            }
            Err(RecvTimeoutError::Disconnected) => thread::sleep(timeout),
            Err(RecvTimeoutError::Timeout) => {}
        }
        if !running || Instant::now() < deadline {
            continue;
        }
        let t = session.tu();
        for (_, ev) in opts.script.iter().filter(|(u, _)| *u == t) {
            session.schedule(ev.clone())?;
        }
        let rec = session.tick()?.clone();
        observe(&rec);
        hub.lock().expect("hub lock").publish(snapshot_json(session));
        deadline += period;
    }
    Ok(())
}

fn offer(session: &mut Session, ev: Event) -> String {
    match session.inject(ev) {
        Ok(a) => ack(a == ntscore_core::engine::Ack::Queued, a.to_string()),
        Err(e) => ack(false, e.to_string()),
    }
}

fn accept_loop(listener: TcpListener, hub: Arc<Mutex<Hub>>, cmd_tx: Sender<Command>, stop: Arc<AtomicBool>) {
    let mut clients = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                debug!("client {peer}");
                let (hub, cmd_tx) = (hub.clone(), cmd_tx.clone());
                clients.push(thread::spawn(move || {
                    if let Err(e) = client(stream, hub, cmd_tx) {
                        debug!("client {peer} closed: {e}");
                    }
                }));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(10)),
            Err(e) => {
                warn!("accept failed: {e}");
                thread::sleep(Duration::from_millis(10));
            }
        }
    }
    drop(cmd_tx);
    for c in clients {
        let _ = c.join();
    }
}

fn client(stream: TcpStream, hub: Arc<Mutex<Hub>>, cmd_tx: Sender<Command>) -> Result<(), String> {
    stream.set_nonblocking(false).map_err(|e| e.to_string())?;
    let mut ws: WebSocket<TcpStream> = tungstenite::accept(stream).map_err(|e| e.to_string())?;
    ws.get_ref().set_read_timeout(Some(Duration::from_millis(10))).map_err(|e| e.to_string())?;
    let (out_tx, out_rx) = unbounded::<String>();
    {
        let mut h = hub.lock().expect("hub lock");
        let _ = out_tx.send(h.latest.clone());
        h.clients.push(out_tx);
    }
    loop {
        loop {
            match out_rx.try_recv() {
                Ok(text) => ws.send(Message::text(text)).map_err(|e| e.to_string())?,
                Err(crossbeam_channel::TryRecvError::Empty) => break,
                Err(crossbeam_channel::TryRecvError::Disconnected) => {
                    let _ = ws.close(None);
                    let _ = ws.flush();
                    return Ok(());
                }
            }
        }
        match ws.read() {
            Ok(Message::Text(text)) => {
                let reply = match serde_json::from_str::<ClientMessage>(text.as_str()) {
                    Err(e) => ack(false, format!("malformed message: {e}")),
                    Ok(msg) => {
                        let (reply_tx, reply_rx) = bounded(1);
                        if cmd_tx.send(Command { msg, reply: reply_tx }).is_err() {
                            return Ok(());
                        }
                        match reply_rx.recv_timeout(Duration::from_secs(5)) {
                            Ok(r) => r,
                            Err(_) => ack(false, "session finished"),
                        }
                    }
                };
                ws.send(Message::text(reply)).map_err(|e| e.to_string())?;
            }
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(e) => return Err(e.to_string()),
        }
    }
}
