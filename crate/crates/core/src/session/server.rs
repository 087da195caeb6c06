//! Newline-delimited JSON over TCP. One thread owns each session; a reader
//! thread feeds it client lines.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use super::{Message, Session, SessionMessage};
use crate::sim::{
    Layout, Mode1Options, Mode2Options, RobotPolicy, ScriptedHuman, SimError, Strategy,
};
use crate::world::Scenario;

/// What every new connection gets.
#[derive(Debug, Clone)]
pub enum SessionSpec {
    Mode1 {
        scenario: Scenario,
        strategy: Strategy,
        options: Mode1Options,
    },
    Mode2 {
        layout: Layout,
        /// `None`: the client drives the human.
        human: Option<ScriptedHuman>,
        policy: RobotPolicy,
        options: Mode2Options,
    },
}

impl SessionSpec {
    pub fn start(&self, id: u64) -> Result<(Session, Vec<SessionMessage>), SimError> {
        match self {
            SessionSpec::Mode1 {
                scenario,
                strategy,
                options,
            } => Session::mode1(id, scenario, *strategy, options.clone()),
            SessionSpec::Mode2 {
                layout,
                human,
                policy,
                options,
            } => Session::mode2(id, layout, human.as_ref(), *policy, options),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub spec: SessionSpec,
    /// Mode-2 tick rate, Hz.
    pub tick_hz: f64,
    /// Where per-session message logs go, if anywhere.
    pub log_dir: Option<PathBuf>,
}

impl ServerConfig {
    pub fn new(spec: SessionSpec) -> Self {
        ServerConfig {
            spec,
            tick_hz: 10.0,
            log_dir: None,
        }
    }
}

/// Accepts connections forever, one session each.
pub fn serve(listener: TcpListener, config: ServerConfig) -> io::Result<()> {
    let config = Arc::new(config);
    let ids = AtomicU64::new(1);
    for stream in listener.incoming() {
        let stream = stream?;
        let id = ids.fetch_add(1, Ordering::Relaxed);
        let config = Arc::clone(&config);
        thread::spawn(move || {
            if let Err(e) = run_connection(stream, id, &config) {
                eprintln!("session {id}: {e}");
            }
        });
    }
    Ok(())
}

/// Serves one connection until the client hangs up.
pub fn run_connection(stream: TcpStream, id: u64, config: &ServerConfig) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut log = match &config.log_dir {
        Some(dir) => Some(BufWriter::new(File::create(
            dir.join(format!("session-{id}.jsonl")),
        )?)),
        None => None,
    };

    let (session, opening) = config
        .spec
        .start(id)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
    let mut session = session;
    send(&mut writer, log.as_mut(), &opening)?;

    let (tx, rx) = mpsc::channel::<String>();
    thread::spawn(move || {
        for line in reader.lines() {
            let Ok(line) = line else { break };
            if tx.send(line).is_err() {
                break;
            }
        }
    });

    let period = Duration::from_secs_f64(1.0 / config.tick_hz.max(0.1));
    let mut next_tick = Instant::now() + period;
    loop {
        let wait = next_tick.saturating_duration_since(Instant::now());
        match rx.recv_timeout(wait) {
            Ok(line) => {
                if line.trim().is_empty() {
                    continue;
                }
                if let Some(log) = log.as_mut() {
                    writeln!(log, "{}", line.trim())?;
                }
                let out = match SessionMessage::decode(&line) {
                    Ok(msg) => session.handle_message(&msg),
                    Err(e) => vec![SessionMessage::unsequenced(Message::Error {
                        message: format!("malformed message: {e}"),
                        in_reply_to: None,
                    })],
                };
                send(&mut writer, log.as_mut(), &out)?;
            }
            Err(RecvTimeoutError::Timeout) => {
                next_tick += period;
                let out = session.tick();
                send(&mut writer, log.as_mut(), &out)?;
            }
            Err(RecvTimeoutError::Disconnected) => break,
        }
    }
    if let Some(log) = log.as_mut() {
        log.flush()?;
    }
    Ok(())
}

fn send(
    writer: &mut impl Write,
    mut log: Option<&mut BufWriter<File>>,
    out: &[SessionMessage],
) -> io::Result<()> {
    if out.is_empty() {
        return Ok(());
    }
    for msg in out {
        let line = msg.encode();
        writeln!(writer, "{line}")?;
        if let Some(log) = log.as_deref_mut() {
            writeln!(log, "{line}")?;
        }
    }
    writer.flush()
}
