//! Command-line front end: `plan`, `collab`, `bench`, `oracle`, `serve`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::brute_force::{brute_force_value, random_instance};
use crate::policy::{solve_policy, CostParams};
use crate::session::server::{serve, ServerConfig, SessionSpec};
use crate::sim::{
    bundled_layout, compute_metrics, drive_mode1, run_mode2_episode, run_suite, Layout,
    Mode1Options, Mode1Run, Mode2Options, RobotPolicy, ScriptedHuman, Strategy, SuiteSpec,
};
use crate::world::{load_ground_truth, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "jointplan", version, about = "Human-robot joint planning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan one mode-1 scenario, answering queries from ground truth.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "optimal")]
        policy: Strategy,
        /// `{object: passable}` file; defaults to the scenario's own.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        /// Write the route's decision tree as JSON.
        #[arg(long)]
        dump_tree: Option<PathBuf>,
        /// Write the route's query policy as JSON.
        #[arg(long)]
        dump_policy: Option<PathBuf>,
        /// Print the full report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run one mode-2 episode with a scripted human.
    Collab {
        /// Bundled layout name or layout file.
        #[arg(long)]
        layout: String,
        /// rational, ambiguous, or a scripted-human file.
        #[arg(long, default_value = "rational")]
        human: String,
        /// Which of the layout's plans the scripted human follows.
        #[arg(long, default_value_t = 0)]
        plan: usize,
        #[arg(long, default_value = "intent")]
        policy: RobotPolicy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the per-tick log as JSON lines.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Run a benchmark suite.
    Bench {
        /// bundled, mode1, mode2, or a suite file.
        #[arg(long, default_value = "bundled")]
        suite: String,
        /// Write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check the policy solver against brute force.
    Oracle {
        #[arg(long, default_value_t = 3)]
        max_n: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Host live sessions over newline-delimited JSON on TCP.
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Mode-1 scenario file; without it sessions run a mode-2 layout.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = "optimal")]
        strategy: Strategy,
        #[arg(long, default_value = "room")]
        layout: String,
        /// live (client-driven), rational, ambiguous, or a scripted-human file.
        #[arg(long, default_value = "live")]
        human: String,
        #[arg(long, default_value = "intent")]
        policy: RobotPolicy,
        #[arg(long, default_value_t = 10.0)]
        tick_hz: f64,
        /// Directory for per-session message logs.
        #[arg(long)]
        log_dir: Option<PathBuf>,
    },
}

/// A failure with its exit code.
struct Exit(i32, String);

fn usage(msg: impl Into<String>) -> Exit {
    Exit(EXIT_USAGE, msg.into())
}

fn failure(msg: impl Into<String>) -> Exit {
    Exit(EXIT_FAILURE, msg.into())
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if e.use_stderr() {
                eprint!("{e}");
            } else {
                let _ = write!(out, "{e}");
            }
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(Exit(code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<(), Exit> {
    match command {
        Command::Plan {
            scenario,
            policy,
            ground_truth,
            dump_tree,
            dump_policy,
            json,
        } => plan(
            &scenario,
            policy,
            ground_truth.as_deref(),
            dump_tree,
            dump_policy,
            json,
            out,
        ),
        Command::Collab {
            layout,
            human,
            plan,
            policy,
            seed,
            log,
        } => collab(&layout, &human, plan, policy, seed, log, out),
        Command::Bench { suite, out: path } => bench(&suite, path, out),
        Command::Oracle {
            max_n,
            trials,
            seed,
        } => oracle(max_n, trials, seed, out),
        Command::Serve {
            port,
            host,
            scenario,
            strategy,
            layout,
            human,
            policy,
            tick_hz,
            log_dir,
        } => {
            let spec = match scenario {
                Some(path) => SessionSpec::Mode1 {
                    scenario: Scenario::load(&path)
                        .map_err(|e| usage(format!("--scenario: {e}")))?,
                    strategy,
                    options: Mode1Options::default(),
                },
                None => {
                    let layout = load_layout(&layout)?;
                    let human = match human.as_str() {
                        "live" => None,
                        other => Some(load_human(other, &layout, 0)?),
                    };
                    SessionSpec::Mode2 {
                        layout,
                        human,
                        policy,
                        options: Mode2Options::default(),
                    }
                }
            };
            if !(tick_hz > 0.0) {
                return Err(usage("--tick-hz must be positive"));
            }
            let listener = TcpListener::bind((host.as_str(), port))
                .map_err(|e| failure(format!("bind: {e}")))?;
            let addr = listener.local_addr().map_err(|e| failure(e.to_string()))?;
            writeln!(out, "listening on {addr}").map_err(io_failure)?;
            out.flush().map_err(io_failure)?;
            serve(
                listener,
                ServerConfig {
                    spec,
                    tick_hz,
                    log_dir,
                },
            )
            .map_err(|e| failure(e.to_string()))
        }
    }
}

fn io_failure(e: std::io::Error) -> Exit {
    failure(e.to_string())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Exit> {
    let file = File::create(path).map_err(|e| failure(format!("{}: {e}", path.display())))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value).map_err(|e| failure(e.to_string()))
}

fn plan(
    scenario_path: &Path,
    strategy: Strategy,
    truth_path: Option<&Path>,
    dump_tree: Option<PathBuf>,
    dump_policy: Option<PathBuf>,
    json: bool,
    out: &mut dyn Write,
) -> Result<(), Exit> {
    let scenario = Scenario::load(scenario_path).map_err(|e| usage(format!("--scenario: {e}")))?;
    let truth: BTreeMap<String, bool> = match truth_path {
        Some(p) => load_ground_truth(p).map_err(|e| usage(format!("--ground-truth: {e}")))?,
        None => scenario
            .ground_truth
            .clone()
            .ok_or_else(|| usage("--ground-truth is required when the scenario has none"))?,
    };
    let mut run = Mode1Run::new(&scenario, strategy, Mode1Options::default())
        .map_err(|e| failure(e.to_string()))?;
    let report = drive_mode1(&mut run, &scenario, &truth).map_err(|e| failure(e.to_string()))?;

    if let Some(path) = dump_tree {
        let trees: Vec<_> = run.policies().iter().map(|p| &p.tree).collect();
        write_json(&path, &trees)?;
    }
    if let Some(path) = dump_policy {
        let policies: Vec<_> = run.policies().iter().map(|p| p.to_json()).collect();
        write_json(&path, &policies)?;
    }

    let r = &report.result;
    if json {
        let text = serde_json::to_string_pretty(&report).map_err(|e| failure(e.to_string()))?;
        writeln!(out, "{text}").map_err(io_failure)?;
    } else {
        let mut lines = vec![format!("policy: {strategy}")];
        for (description, object) in &r.grounded {
            lines.push(format!("target \"{description}\" -> {object}"));
        }
        for (i, q) in r.transcript.iter().enumerate() {
            let answers: Vec<String> = q
                .answers
                .iter()
                .map(|(id, ok)| format!("{id}={}", if *ok { "passable" } else { "blocked" }))
                .collect();
            lines.push(format!("query {}: {}", i + 1, answers.join(", ")));
        }
        lines.push(format!(
            "{} target question(s), {} query event(s), {} object(s) verified, cost {}",
            r.target_queries, r.query_events, r.objects_verified, r.query_cost
        ));
        lines.push(format!("path length: {:.2} m", r.path_length_m));
        let waypoints = serde_json::to_string(&r.waypoints).map_err(|e| failure(e.to_string()))?;
        lines.push(format!("waypoints: {waypoints}"));
        match &report.failure {
            None => lines.push("success".into()),
            Some(why) => lines.push(format!("failed: {why}")),
        }
        writeln!(out, "{}", lines.join("\n")).map_err(io_failure)?;
    }
    match report.failure {
        None => Ok(()),
        Some(why) => Err(failure(why)),
    }
}

fn load_layout(name: &str) -> Result<Layout, Exit> {
    match bundled_layout(name) {
        Some(l) => Ok(l),
        None => Layout::load(name).map_err(|e| usage(format!("--layout: {e}"))),
    }
}

fn load_human(name: &str, layout: &Layout, plan: usize) -> Result<ScriptedHuman, Exit> {
    let plan_of = || {
        layout
            .plans
            .get(plan)
            .cloned()
            .ok_or_else(|| usage(format!("--plan: layout has {} plan(s)", layout.plans.len())))
    };
    match name {
        "rational" => Ok(ScriptedHuman::rational(plan_of()?)),
        "ambiguous" => Ok(ScriptedHuman::ambiguous(plan_of()?)),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("--human: {path}: {e}")))?;
            ScriptedHuman::from_json(&text).map_err(|e| usage(format!("--human: {e}")))
        }
    }
}

fn collab(
    layout: &str,
    human: &str,
    plan: usize,
    policy: RobotPolicy,
    seed: u64,
    log_path: Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<(), Exit> {
    let layout = load_layout(layout)?;
    let human = load_human(human, &layout, plan)?;
    let options = Mode2Options {
        seed,
        ..Mode2Options::default()
    };
    let log =
        run_mode2_episode(&layout, &human, policy, &options).map_err(|e| failure(e.to_string()))?;
    if let Some(path) = log_path {
        let file = File::create(&path).map_err(|e| failure(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        log.write_jsonl(&mut w)
            .and_then(|_| w.flush())
            .map_err(io_failure)?;
    }
    let m = compute_metrics(&log);
    let order: Vec<&str> = log
        .ticks
        .iter()
        .flat_map(|t| &t.completed)
        .map(String::as_str)
        .collect();
    writeln!(
        out,
        "layout {} | human {} | policy {policy} | seed {seed}\n\
         completion order: {}\n\
         time {:.2} s, total distance {:.2} m, human {:.2} m, robot {:.2} m\n\
         avg true-target probability {:.3}, top-1 accuracy {:.3}",
        log.layout,
        format!("{:?}", log.behavior).to_lowercase(),
        order.join(" "),
        m.time,
        m.total_dist,
        m.human_dist,
        m.robot_dist,
        m.avg_true_target_prob,
        m.top1_accuracy,
    )
    .map_err(io_failure)?;
    if m.finished {
        Ok(())
    } else {
        Err(failure(format!(
            "not all tasks completed in {} ticks",
            log.ticks.len()
        )))
    }
}

fn bench(suite: &str, path: Option<PathBuf>, out: &mut dyn Write) -> Result<(), Exit> {
    let spec = SuiteSpec::resolve(suite).map_err(|e| usage(format!("--suite: {e}")))?;
    let report = run_suite(&spec).map_err(|e| failure(e.to_string()))?;
    write!(out, "{}", report.to_text()).map_err(io_failure)?;
    if let Some(path) = path {
        std::fs::write(&path, report.to_json())
            .map_err(|e| failure(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn oracle(max_n: usize, trials: usize, seed: u64, out: &mut dyn Write) -> Result<(), Exit> {
    if !(1..=4).contains(&max_n) {
        return Err(usage("--max-n must be between 1 and 4"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let costs = CostParams::default();
    let mut matches = 0;
    for trial in 0..trials {
        let n = 1 + trial % max_n;
        let (tree, priors) = random_instance(&mut rng, n);
        let dp = solve_policy(&tree, &priors, costs).map_err(|e| failure(e.to_string()))?;
        let brute = brute_force_value(&tree, &priors, costs).map_err(|e| failure(e.to_string()))?;
        let scale = dp.root_value().abs().max(brute.abs()).max(1.0);
        if (dp.root_value() - brute).abs() <= 1e-12 * scale {
            matches += 1;
        } else {
            writeln!(
                out,
                "trial {trial}: dp {} vs brute force {brute}",
                dp.root_value()
            )
            .map_err(io_failure)?;
        }
    }
    writeln!(out, "{matches}/{trials} match").map_err(io_failure)?;
    if matches == trials {
        Ok(())
    } else {
        Err(failure(format!("{} mismatch(es)", trials - matches)))
    }
}
