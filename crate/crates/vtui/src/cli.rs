//! `vtui` subcommands. Exit codes: 0 ok, 1 runtime error, 2 bad input.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use vtui_core::msgbus::{BagFile, Bus};
use vtui_core::runtime::{
    prepare, replay_bag, RecordSpec, ReplaySpec, RunConfig, RunError, RunMode, RunReport,
};
use vtui_core::scene::{validate, SceneSpec};

use crate::gateway::Gateway;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8765";

#[derive(Debug, Parser)]
#[command(
    name = "vtui",
    version,
    about = "Simulate, record and replay virtual tangible interfaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run a scene headless (add --listen to attach the gateway)
    Run(RunArgs),
    /// Check a scene file; exit 2 if it has problems
    Validate { scene: PathBuf },
    /// Run a scene and record bus traffic to a bag
    Record(RunArgs),
    /// Replay a bag, alone or driving the devices of a scene
    Replay(ReplayArgs),
    /// Inspect bag files
    Bag {
        #[command(subcommand)]
        command: BagCmd,
    },
    /// Run a scene in real time behind the WebSocket gateway
    Serve(RunArgs),
}

#[derive(Debug, Subcommand)]
pub enum BagCmd {
    /// Topic table, record counts and duration
    Info { bag: PathBuf },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Virtual seconds; unbounded if omitted
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Topic pattern to record, e.g. `/tui/**`; repeatable
    #[arg(long = "record", value_name = "PATTERN")]
    pub record: Vec<String>,
    /// Bag output path
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Bag whose device streams replace the simulated devices
    #[arg(long)]
    pub replay: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    /// Topic rename for replay, `from=to`; repeatable
    #[arg(long, value_name = "FROM=TO")]
    pub remap: Vec<String>,
    /// Attach the WebSocket gateway, e.g. 127.0.0.1:8765
    #[arg(long)]
    pub listen: Option<String>,
    #[arg(long, default_value_t = 60.0)]
    pub snapshot_rate: f64,
    /// Pace virtual time at FACTOR × wall time
    #[arg(long, value_name = "FACTOR")]
    pub realtime: Option<f64>,
    /// App node to start instead of the scene's defaults; repeatable
    #[arg(long = "app")]
    pub apps: Vec<String>,
    /// Print the report as JSON
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub bag: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    /// Drive this scene's devices from the bag instead of replaying alone
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, value_name = "FROM=TO")]
    pub remap: Vec<String>,
    #[arg(long)]
    pub json: bool,
}

fn parse_remap(items: &[String]) -> Result<BTreeMap<String, String>, RunError> {
    items
        .iter()
        .map(|s| {
            s.split_once('=')
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .ok_or_else(|| RunError::Config(format!("remap `{s}` is not FROM=TO")))
        })
        .collect()
}

impl RunArgs {
    pub fn to_config(&self, serve: bool, record: bool) -> Result<RunConfig, RunError> {
        let mut cfg = RunConfig::new(&self.scene);
        cfg.duration = self.duration;
        cfg.dt = self.dt;
        cfg.seed = self.seed;
        cfg.snapshot_rate = self.snapshot_rate;
        cfg.mode = match (self.realtime, serve) {
            (Some(f), _) => RunMode::Realtime(f),
            (None, true) => RunMode::Realtime(1.0),
            (None, false) => RunMode::Stepped,
        };
        cfg.listen = match (&self.listen, serve) {
            (Some(l), _) => Some(l.clone()),
            (None, true) => Some(DEFAULT_LISTEN.to_string()),
            (None, false) => None,
        };
        match (&self.out, self.record.is_empty()) {
            (Some(out), _) => {
                let patterns = if self.record.is_empty() {
                    vec!["/**".to_string()]
                } else {
                    self.record.clone()
                };
                cfg.record = Some(RecordSpec {
                    patterns,
                    out: out.clone(),
                });
            }
            (None, false) => return Err(RunError::Config("--record needs --out <path>".into())),
            (None, true) if record => {
                return Err(RunError::Config("record needs --out <path>".into()))
            }
            (None, true) => {}
        }
        if let Some(bag) = &self.replay {
            cfg.replay = Some(ReplaySpec {
                bag: bag.clone(),
                remap: parse_remap(&self.remap)?,
                speed: self.speed,
            });
        }
        if !self.apps.is_empty() {
            cfg.apps = Some(self.apps.clone());
        }
        Ok(cfg)
    }
}

/// Runs `config`, with the gateway if it has a listen address, stopping
/// early on Ctrl-C.
pub fn execute(config: &RunConfig, stop: Arc<AtomicBool>) -> Result<RunReport, RunError> {
    let prepared = prepare(config, Bus::new())?;
    match &config.listen {
        None => prepared.run(config, &stop),
        Some(addr) => {
            let gateway = Gateway::start(addr, prepared.sim.commands())?;
            eprintln!("gateway: ws://{}/ws", gateway.local_addr());
            let mut tap = gateway.tap(&prepared.sim);
            let report = prepared.run_with(config, &stop, |sim| tap.pump(sim));
            drop(gateway);
            report
        }
    }
}

fn print_report(r: &RunReport, json: bool) {
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(r).expect("report serializes")
        );
        return;
    }
    println!("steps: {}", r.steps);
    println!("virtual_time: {:.6} s", r.virtual_time);
    println!("wall_time: {:.3} s", r.wall_time);
    println!("messages: {}", r.messages);
    if let Some(p) = &r.bag_path {
        println!("bag: {} ({} records)", p.display(), r.records.unwrap_or(0));
    }
    if let Some(p) = &r.pacing {
        println!(
            "pacing: mean lag {:.3} ms, max lag {:.3} ms",
            p.mean_lag_ms, p.max_lag_ms
        );
    }
}

fn fail(e: &RunError) -> i32 {
    eprintln!("error: {e}");
    if let RunError::Divergence { last_good_step, .. } = e {
        eprintln!("last good step: {last_good_step}");
    }
    e.exit_code()
}

fn stop_flag() -> Arc<AtomicBool> {
    let stop = Arc::new(AtomicBool::new(false));
    let s = stop.clone();
    if let Err(e) = ctrlc::set_handler(move || s.store(true, Ordering::Relaxed)) {
        log::warn!("no Ctrl-C handler: {e}");
    }
    stop
}

fn run_cmd(args: &RunArgs, serve: bool, record: bool) -> i32 {
    let result = args
        .to_config(serve, record)
        .and_then(|cfg| execute(&cfg, stop_flag()));
    match result {
        Ok(r) => {
            print_report(&r, args.json);
            0
        }
        Err(e) => fail(&e),
    }
}

fn validate_cmd(scene: &PathBuf) -> i32 {
    let spec = match SceneSpec::load(scene) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", scene.display());
            return 2;
        }
    };
    let diags = validate(&spec);
    if diags.is_empty() {
        println!(
            "{}: ok ({} models, {} instances)",
            scene.display(),
            spec.models.len(),
            spec.spawns.len()
        );
        0
    } else {
        for d in &diags {
            eprintln!("{}: {d}", scene.display());
        }
        2
    }
}

fn replay_cmd(args: &ReplayArgs) -> i32 {
    let result = (|| -> Result<(), RunError> {
        let remap = parse_remap(&args.remap)?;
        let bag = BagFile::read_file(&args.bag)?;
        match &args.scene {
            None => {
                let r = replay_bag(&bag, args.speed, &remap)?;
                if args.json {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&r).expect("report serializes")
                    );
                } else {
                    println!("messages: {}", r.messages);
                    println!("recorded_duration: {:.6} s", r.recorded_duration);
                    println!("speed: {}", r.speed);
                    println!("virtual_duration: {:.6} s", r.virtual_duration);
                }
            }
            Some(scene) => {
                let mut cfg = RunConfig::new(scene);
                cfg.duration =
                    Some(bag.duration as f64 * 1e-9 / args.speed.max(f64::MIN_POSITIVE) + 0.1);
                cfg.replay = Some(ReplaySpec {
                    bag: args.bag.clone(),
                    remap,
                    speed: args.speed,
                });
                let r = execute(&cfg, stop_flag())?;
                print_report(&r, args.json);
            }
        }
        Ok(())
    })();
    match result {
        Ok(()) => 0,
        Err(e) => fail(&e),
    }
}

fn bag_info(path: &PathBuf) -> i32 {
    match BagFile::read_file(path) {
        Ok(bag) => {
            use std::io::Write;
            // a closed pipe (`| head`) is not an error here
            let _ = write!(std::io::stdout().lock(), "{}", bag.info());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn dispatch(cli: Cli) -> i32 {
    match &cli.command {
        Cmd::Run(a) => run_cmd(a, false, false),
        Cmd::Record(a) => run_cmd(a, false, true),
        Cmd::Serve(a) => run_cmd(a, true, false),
        Cmd::Validate { scene } => validate_cmd(scene),
        Cmd::Replay(a) => replay_cmd(a),
        Cmd::Bag {
            command: BagCmd::Info { bag },
        } => bag_info(bag),
    }
}
