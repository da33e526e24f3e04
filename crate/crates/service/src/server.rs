//! WebSocket front end: one live session at a time, any number of clients.
//!
//! Each text message from a client holds one or more command lines; each
//! event goes out as one text message holding one JSON line. Command
//! acknowledgements go only to the client that sent the command; all
//! other events are broadcast.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc::{channel, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use tungstenite::{Message, WebSocket};

use cogload::ingest::SessionLogWriter;
use cogload::synth::{ClassProfiles, SyntheticCohort};
use cogload::{ForestModel, SampleRecord, SessionPlan};

use crate::bus::{EventBus, DEFAULT_QUEUE_CAPACITY};
use crate::runner::{run_session, Control, RunOptions};
use crate::session::Session;
use crate::source::{self, TickSource};
use crate::wire::{parse_command, validate_tlx, Command, Event, WIRE_VERSION};

const CLIENT_POLL: Duration = Duration::from_millis(20);
const MARK_REPLY_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Clone)]
pub enum SourceKind {
    /// A fresh synthetic participant per session, seeded `seed + session
    /// number`.
    Synthetic {
        profiles: ClassProfiles,
        seed: u64,
        pace: Option<Duration>,
    },
    Replay {
        records: Vec<SampleRecord>,
        pace: Option<Duration>,
    },
    /// A character device or capture file of framed bytes.
    Device { path: PathBuf },
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub plan: SessionPlan,
    pub model: Option<Arc<ForestModel>>,
    pub source: SourceKind,
    /// Session logs and TLX submissions go here when set.
    pub log_dir: Option<PathBuf>,
    pub queue_capacity: usize,
    pub run: RunOptions,
}

impl ServerConfig {
    pub fn new(plan: SessionPlan, model: Option<Arc<ForestModel>>, source: SourceKind) -> Self {
        Self {
            plan,
            model,
            source,
            log_dir: None,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            run: RunOptions::default(),
        }
    }
}

struct Active {
    participant: String,
    control: Sender<Control>,
    handle: JoinHandle<()>,
}

struct Hub {
    config: ServerConfig,
    bus: EventBus,
    active: Mutex<Option<Active>>,
    sessions: AtomicUsize,
    shutdown: AtomicBool,
}

impl Hub {
    fn open_source(&self, n: usize) -> std::io::Result<TickSource> {
        Ok(match &self.config.source {
            SourceKind::Synthetic { profiles, seed, pace } => {
                let cohort = SyntheticCohort {
                    plan: self.config.plan.clone(),
                    ..SyntheticCohort::new(1, seed.wrapping_add(n as u64))
                };
                source::synthetic(cohort, profiles.clone(), *pace)
            }
            SourceKind::Replay { records, pace } => source::replay(records.clone(), *pace),
            SourceKind::Device { path } => source::device(File::open(path)?),
        })
    }

    fn start(&self, participant: Option<String>) -> Result<(), String> {
        let mut active = self.active.lock().expect("hub lock");
        if active.as_ref().is_some_and(|a| !a.handle.is_finished()) {
            return Err("a session is already running".into());
        }
        let n = self.sessions.fetch_add(1, Ordering::SeqCst) + 1;
        let participant = participant.unwrap_or_else(|| format!("S{n:03}"));
        let session =
            Session::new(participant.clone(), self.config.plan.clone(), self.config.model.clone()).map_err(|e| e.to_string())?;
        let src = self.open_source(n).map_err(|e| format!("source: {e}"))?;
        let mut log = match &self.config.log_dir {
            Some(dir) => {
                let file = File::create(dir.join(format!("{participant}.csv"))).map_err(|e| format!("log: {e}"))?;
                Some(SessionLogWriter::new(BufWriter::new(file)).map_err(|e| format!("log: {e}"))?)
            }
            None => None,
        };
        let (control, control_rx) = channel();
        let bus = self.bus.clone();
        let options = self.config.run;
        let handle = std::thread::Builder::new()
            .name(format!("session-{participant}"))
            .spawn(move || {
                if let Err(e) = run_session(session, &src.ticks, &control_rx, &bus, log.as_mut(), options) {
                    eprintln!("session failed: {e}");
                }
            })
            .map_err(|e| e.to_string())?;
        *active = Some(Active {
            participant,
            control,
            handle,
        });
        Ok(())
    }

    fn control(&self, msg: Control) -> Result<(), String> {
        let active = self.active.lock().expect("hub lock");
        match active.as_ref() {
            Some(a) if !a.handle.is_finished() => a.control.send(msg).map_err(|_| "session has ended".to_string()),
            _ => Err("no active session".into()),
        }
    }

    fn mark_phase(&self, phase: String) -> Result<(), String> {
        let (reply, rx) = channel();
        self.control(Control::MarkPhase {
            phase,
            reply: Some(reply),
        })?;
        match rx.recv_timeout(MARK_REPLY_TIMEOUT) {
            Ok(r) => r.map_err(|e| e.to_string()),
            Err(_) => Err("session did not answer".into()),
        }
    }

    fn tlx(&self, participant: String, phase: String, scores: &[u8]) -> Result<(), String> {
        let (scores, composite) = validate_tlx(scores).map_err(|e| e.to_string())?;
        let event = Event::Tlx {
            v: WIRE_VERSION,
            participant,
            phase,
            scores,
            composite,
        };
        if let Some(dir) = &self.config.log_dir {
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(dir.join("tlx.ndjson"))
                .map_err(|e| format!("tlx log: {e}"))?;
            writeln!(f, "{}", event.to_line()).map_err(|e| format!("tlx log: {e}"))?;
        }
        self.bus.publish(&event);
        Ok(())
    }

    fn handle(&self, cmd: Command) -> Event {
        let name = cmd.name();
        let result = match cmd {
            Command::Start { participant, .. } => self.start(participant),
            Command::Stop { .. } => self.control(Control::Stop),
            Command::MarkPhase { phase, .. } => self.mark_phase(phase),
            Command::TlxSubmit {
                participant,
                phase,
                scores,
                ..
            } => self.tlx(participant, phase, &scores),
        };
        Event::ack(name, result)
    }

    fn current_participant(&self) -> Option<String> {
        let active = self.active.lock().expect("hub lock");
        active
            .as_ref()
            .filter(|a| !a.handle.is_finished())
            .map(|a| a.participant.clone())
    }
}

fn send(ws: &mut WebSocket<TcpStream>, event: &Event) -> tungstenite::Result<()> {
    ws.send(Message::text(event.to_line()))
}

fn serve_client(hub: &Hub, stream: TcpStream) -> tungstenite::Result<()> {
    stream.set_nodelay(true).ok();
    let mut ws = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::ConnectionClosed,
    })?;
    ws.get_mut().set_read_timeout(Some(CLIENT_POLL))?;
    let sub = hub.bus.subscribe();
    // a client joining mid-session learns who is being recorded
    if let Some(participant) = hub.current_participant() {
        send(
            &mut ws,
            &Event::Session {
                v: WIRE_VERSION,
                state: crate::wire::SessionState::Started,
                participant,
            },
        )?;
    }
    while !hub.shutdown.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(Message::Text(text)) => {
                for line in text.lines().filter(|l| !l.trim().is_empty()) {
                    let reply = match parse_command(line) {
                        Ok(cmd) => hub.handle(cmd),
                        Err(e) => Event::ack("unknown", Err(e.to_string())),
                    };
                    send(&mut ws, &reply)?;
                }
            }
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(e) => return Err(e),
        }
        while let Some(event) = sub.try_recv() {
            send(&mut ws, &event)?;
        }
    }
    ws.close(None).ok();
    ws.flush().ok();
    Ok(())
}

pub struct Server {
    listener: TcpListener,
    hub: Arc<Hub>,
}

/// A server running on a background thread.
pub struct ServerHandle {
    addr: SocketAddr,
    hub: Arc<Hub>,
    accept: JoinHandle<()>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn bus(&self) -> &EventBus {
        &self.hub.bus
    }

    /// Stop the active session, disconnect clients and join the accept loop.
    pub fn shutdown(self) {
        let _ = self.hub.control(Control::Stop);
        self.hub.shutdown.store(true, Ordering::SeqCst);
        let _ = self.accept.join();
        if let Some(a) = self.hub.active.lock().expect("hub lock").take() {
            let _ = a.handle.join();
        }
        self.hub.bus.close();
    }
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, config: ServerConfig) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let hub = Arc::new(Hub {
            bus: EventBus::new(config.queue_capacity),
            config,
            active: Mutex::new(None),
            sessions: AtomicUsize::new(0),
            shutdown: AtomicBool::new(false),
        });
        Ok(Self { listener, hub })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accept clients until shutdown, one thread per client.
    pub fn run(self) -> std::io::Result<()> {
        self.listener.set_nonblocking(true)?;
        let mut clients = Vec::new();
        while !self.hub.shutdown.load(Ordering::SeqCst) {
            match self.listener.accept() {
                Ok((stream, _)) => {
                    stream.set_nonblocking(false)?;
                    let hub = Arc::clone(&self.hub);
                    clients.push(std::thread::spawn(move || {
                        if let Err(e) = serve_client(&hub, stream) {
                            if !matches!(e, tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) {
                                eprintln!("client error: {e}");
                            }
                        }
                    }));
                    clients.retain(|h: &JoinHandle<()>| !h.is_finished());
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(CLIENT_POLL),
                Err(e) => return Err(e),
            }
        }
        for h in clients {
            let _ = h.join();
        }
        Ok(())
    }

    pub fn spawn(self) -> std::io::Result<ServerHandle> {
        let addr = self.local_addr()?;
        let hub = Arc::clone(&self.hub);
        let accept = std::thread::Builder::new().name("accept".into()).spawn(move || {
            if let Err(e) = self.run() {
                eprintln!("accept loop failed: {e}");
            }
        })?;
        Ok(ServerHandle { addr, hub, accept })
    }
}
