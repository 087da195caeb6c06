//! Starts a session server on a free port and plays the client side: first a
//! mode-1 session answering traversability queries, then a mode-2 session
//! walking the human to each task.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;

use jointplan::session::server::{serve, ServerConfig, SessionSpec};
use jointplan::session::{Message, SessionMessage};
use jointplan::sim::{bundled_layout, Mode1Options, Mode2Options, RobotPolicy, Strategy};
use jointplan::world::Point;

fn start(spec: SessionSpec) -> std::io::Result<TcpStream> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    thread::spawn(move || serve(listener, ServerConfig::new(spec)));
    TcpStream::connect(addr)
}

fn send(stream: &mut TcpStream, msg: SessionMessage) -> std::io::Result<()> {
    println!("  > {}", msg.encode());
    writeln!(stream, "{}", msg.encode())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("mode 1, worked example:");
    let scenario = jointplan::sim::worked_example();
    let truth = scenario.ground_truth.clone().unwrap_or_default();
    let mut stream = start(SessionSpec::Mode1 {
        scenario,
        strategy: Strategy::Optimal,
        options: Mode1Options::default(),
    })?;
    let mut lines = BufReader::new(stream.try_clone()?).lines();
    let mut seq = 0;
    while let Some(line) = lines.next() {
        let msg = SessionMessage::decode(&line?)?;
        match &msg.body {
            Message::ScenarioLoaded { .. } => println!("  < scenario_loaded"),
            Message::QueryTraversability { objects } => {
                println!("  < {}", msg.encode());
                seq += 1;
                let answers = objects.iter().map(|o| (o.clone(), truth[o])).collect();
                let reply = Message::AnswerTraversability {
                    in_reply_to: msg.seq.expect("server seq"),
                    answers,
                };
                send(&mut stream, SessionMessage::new(seq, reply))?;
            }
            Message::EpisodeEnd { .. } => {
                println!("  < {}", msg.encode());
                break;
            }
            _ => println!("  < {}", msg.encode()),
        }
    }

    println!("\nmode 2, fork layout, human walks A then C then B:");
    let layout = bundled_layout("fork").expect("bundled");
    let route: Vec<Point> = ["A", "C", "B"]
        .iter()
        .map(|id| {
            layout
                .tasks
                .iter()
                .find(|t| t.id == *id)
                .expect("task")
                .position
        })
        .collect();
    let mut stream = start(SessionSpec::Mode2 {
        layout: layout.clone(),
        human: None,
        policy: RobotPolicy::Intent,
        options: Mode2Options::default(),
    })?;
    let mut lines = BufReader::new(stream.try_clone()?).lines();
    let mut human = layout.human_start;
    let mut leg = 0;
    let mut last_mode = None;
    let mut done = 0;
    while let Some(line) = lines.next() {
        let msg = SessionMessage::decode(&line?)?;
        match msg.body {
            Message::StateUpdate { t, completed, .. } => {
                if leg < route.len() && human.distance(route[leg]) < 0.05 {
                    leg += 1;
                }
                if let Some(goal) = route.get(leg) {
                    human = human.step_toward(*goal, 0.1);
                    let pos = Message::HumanMove { pos: human };
                    writeln!(stream, "{}", SessionMessage::unsequenced(pos).encode())?;
                }
                if completed.len() > done {
                    done = completed.len();
                    println!("  t={t:.1} completed {completed:?}");
                }
            }
            Message::RobotDecision { target, mode, .. } => {
                if last_mode != Some((target.clone(), mode)) {
                    println!("  robot -> {target} [{mode:?}]");
                    last_mode = Some((target, mode));
                }
            }
            Message::EpisodeEnd { status, t, .. } => {
                println!("  episode_end {status:?} at t={t:.1}");
                break;
            }
            _ => {}
        }
    }
    Ok(())
}
