//! The `tm` command line. Documents go to standard output, prose to
//! standard error. Exit codes: 0 success, 1 domain failure, 2 usage or I/O
//! failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dot::to_dot;
use crate::dsl::{parse, Document, SourceUnit};
use crate::dynamics::{coverage, BehavioralModel};
use crate::railcar::{self, ExploreConfig, Mutation, WorldParams};
use crate::sim::{check_trace, simulate, ChoicePolicy, ChoiceScript, SimConfig, Stimulus, Trace};
use crate::table::{check_equivalence, parse_table, table_to_tm};
use crate::validate::validate_static;

#[derive(Parser, Debug)]
#[command(name = "tm", version, about = "Thinging-machine modeling tools")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Check a model file and list findings.
    Validate { model: PathBuf },
    /// Report which elements the regions cover.
    Coverage { model: PathBuf },
    /// Run stimuli through a model and print the trace.
    Simulate {
        model: PathBuf,
        stimuli: PathBuf,
        #[arg(long)]
        behavior: Option<String>,
        #[command(flatten)]
        run: RunOpts,
    },
    /// Check a trace against a behavior.
    Check {
        model: PathBuf,
        trace: PathBuf,
        #[arg(long)]
        behavior: Option<String>,
    },
    /// Import a CSV state table and check its translation.
    Table {
        csv: PathBuf,
        #[arg(long)]
        initial: Option<String>,
        #[arg(long, default_value_t = 6)]
        max_len: usize,
        /// Also write the translated model here.
        #[arg(long)]
        emit_tm: Option<PathBuf>,
    },
    /// The railcar terminal demo.
    Railcar {
        #[command(subcommand)]
        cmd: RailcarCmd,
    },
    /// Print a model as DOT or JSON.
    Export {
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Dot)]
        format: Format,
        /// Color elements by event region.
        #[arg(long)]
        regions: bool,
    },
}

#[derive(Subcommand, Debug)]
enum RailcarCmd {
    /// Simulate the ring of terminals and print the trace.
    Run {
        #[command(flatten)]
        world: WorldOpts,
        #[command(flatten)]
        run: RunOpts,
    },
    /// Explore every interleaving up to a depth and print the report.
    Explore {
        #[command(flatten)]
        world: WorldOpts,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        depth: Option<u64>,
        #[arg(long)]
        state_cap: Option<usize>,
        /// Expand the frontier on one thread.
        #[arg(long)]
        serial: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Dot,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Policy {
    Priority,
    Random,
}

#[derive(Args, Debug)]
struct RunOpts {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ticks: Option<u64>,
    #[arg(long, value_enum)]
    policy: Option<Policy>,
    /// point=outcome,outcome; repeatable.
    #[arg(long)]
    script: Vec<String>,
    /// key=value file; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct WorldOpts {
    #[arg(long)]
    terminals: Option<usize>,
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long)]
    spots: Option<usize>,
    #[arg(long)]
    cars: Option<usize>,
    /// Comma-separated starting area per car.
    #[arg(long)]
    positions: Option<String>,
    #[arg(long)]
    mutation: Option<String>,
}

enum Fail {
    Usage(String),
    Domain(String),
}

type Res = Result<(), Fail>;

fn usage(e: impl std::fmt::Display) -> Fail {
    Fail::Usage(e.to_string())
}

fn read(path: &Path) -> Result<String, Fail> {
    std::fs::read_to_string(path).map_err(|e| Fail::Usage(format!("{}: {e}", path.display())))
}

fn load_doc(path: &Path) -> Result<Document, Fail> {
    let text = read(path)?;
    parse(&SourceUnit::new(&text, &path.display().to_string())).map_err(|diags| {
        let lines: Vec<String> = diags.iter().map(|d| format!("{}:{d}", path.display())).collect();
        Fail::Usage(lines.join("\n"))
    })
}

fn behavior_of(doc: &Document, name: Option<&str>) -> Result<BehavioralModel, Fail> {
    let name = match name {
        Some(n) => n.to_string(),
        None => doc
            .sole_behavior()
            .ok_or_else(|| usage("the model declares several behaviors or none; pick one with --behavior"))?
            .to_string(),
    };
    doc.behavior(&name).map_err(|e| Fail::Domain(format!("{}: {e}", e.code())))
}

/// Flat key=value settings; blank lines and `#` comments are skipped.
struct Settings(BTreeMap<String, String>);

const KEYS: [&str; 14] = [
    "seed",
    "ticks",
    "policy",
    "script",
    "terminals",
    "segments",
    "spots",
    "cars",
    "positions",
    "mutation",
    "depth",
    "state_cap",
    "serial",
    "behavior",
];

impl Settings {
    fn load(path: Option<&Path>) -> Result<Settings, Fail> {
        let mut map = BTreeMap::new();
        let Some(path) = path else { return Ok(Settings(map)) };
        for (n, line) in read(path)?.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
            let k = k.trim().replace('-', "_");
            if !KEYS.contains(&k.as_str()) {
                return Err(usage(format!("{}:{}: unknown key '{k}'", path.display(), n + 1)));
            }
            map.insert(k, v.trim().to_string());
        }
        Ok(Settings(map))
    }

    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, Fail>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.0.get(key) {
            Some(v) => v.parse().map(Some).map_err(|e| usage(format!("config {key}: {e}"))),
            None => Ok(None),
        }
    }
}

fn sim_config(
    opts: &RunOpts,
    set: &Settings,
    choices: &BTreeMap<String, crate::model::ChoicePoint>,
) -> Result<SimConfig, Fail> {
    let mut cfg = SimConfig::default();
    if let Some(s) = set.get(opts.seed, "seed")? {
        cfg.seed = s;
    }
    if let Some(t) = set.get(opts.ticks, "ticks")? {
        cfg.max_ticks = t;
    }
    let policy = match opts.policy {
        Some(p) => Some(p),
        None => match set.0.get("policy") {
            Some(v) => Some(Policy::from_str(v, true).map_err(|_| usage(format!("config policy: '{v}'")))?),
            None => None,
        },
    };
    cfg.policy = match policy {
        Some(Policy::Random) => ChoicePolicy::SeededRandom,
        _ => ChoicePolicy::ByPriority,
    };
    let mut entries: Vec<String> = opts.script.clone();
    if entries.is_empty() {
        if let Some(v) = set.0.get("script") {
            entries = v.split(';').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        }
    }
    let mut script = ChoiceScript::new();
    for e in &entries {
        script.parse_entry(choices, e).map_err(usage)?;
    }
    cfg.script = script;
    cfg.check().map_err(usage)?;
    Ok(cfg)
}

fn world_params(w: &WorldOpts, set: &Settings) -> Result<WorldParams, Fail> {
    let mut p = WorldParams::default();
    if let Some(v) = set.get(w.terminals, "terminals")? {
        p.terminals = v;
    }
    if let Some(v) = set.get(w.segments, "segments")? {
        p.segments = v;
    }
    if let Some(v) = set.get(w.spots, "spots")? {
        p.spots = v;
    }
    if let Some(v) = set.get(w.cars, "cars")? {
        p.cars = v;
    }
    if let Some(v) = set.get(w.positions.clone(), "positions")? {
        let ids: Vec<String> = v.split(',').map(|s| s.trim().to_string()).collect();
        if w.cars.is_none() && !set.0.contains_key("cars") {
            p.cars = ids.len();
        }
        p.positions = Some(ids);
    }
    if let Some(v) = set.get(w.mutation.clone(), "mutation")? {
        p.mutation = Some(v.parse::<Mutation>().map_err(usage)?);
    }
    Ok(p)
}

fn json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Io<'_> {
    fn out(&mut self, s: &str) -> Res {
        self.out.write_all(s.as_bytes()).map_err(usage)
    }

    fn note(&mut self, s: &str) {
        let _ = writeln!(self.err, "{s}");
    }
}

fn dispatch(verb: Verb, io: &mut Io) -> Res {
    match verb {
        Verb::Validate { model } => {
            let doc = load_doc(&model)?;
            let report = validate_static(&doc.model);
            for f in &report.findings {
                io.out(&format!("{f}\n"))?;
            }
            if report.has_fatal() {
                return Err(Fail::Domain(format!("{} has fatal findings", model.display())));
            }
            io.note(&format!("{}: {} findings, none fatal", model.display(), report.findings.len()));
            Ok(())
        }
        Verb::Coverage { model } => {
            let doc = load_doc(&model)?;
            let report =
                coverage(&doc.model, &doc.region_specs()).map_err(|e| Fail::Domain(format!("{}: {e}", e.code())))?;
            io.out(&json(&report))?;
            if !report.uncovered.is_empty() {
                return Err(Fail::Domain(format!("{} elements uncovered", report.uncovered.len())));
            }
            Ok(())
        }
        Verb::Simulate { model, stimuli, behavior, run } => {
            let set = Settings::load(run.config.as_deref())?;
            let doc = load_doc(&model)?;
            let behavior = set.get(behavior, "behavior")?;
            let beh = behavior_of(&doc, behavior.as_deref())?;
            let cfg = sim_config(&run, &set, &doc.model.choices)?;
            let stim: Vec<Stimulus> =
                serde_json::from_str(&read(&stimuli)?).map_err(|e| usage(format!("{}: {e}", stimuli.display())))?;
            let trace = simulate(&doc.model, &beh, &cfg, &stim).map_err(|e| Fail::Domain(e.to_string()))?;
            io.out(&trace.to_json())
        }
        Verb::Check { model, trace, behavior } => {
            let doc = load_doc(&model)?;
            let beh = behavior_of(&doc, behavior.as_deref())?;
            let t = Trace::from_json(&read(&trace)?).map_err(|e| usage(format!("{}: {e}", trace.display())))?;
            let verdict = check_trace(&t, &beh);
            io.out(&json(&verdict))?;
            if !verdict.conforms {
                return Err(Fail::Domain(format!("{} violations", verdict.violations.len())));
            }
            Ok(())
        }
        Verb::Table { csv, initial, max_len, emit_tm } => {
            let table = parse_table(&read(&csv)?, initial.as_deref()).map_err(|e| usage(e.to_string()))?;
            let bundle = table_to_tm(&table);
            if let Some(path) = emit_tm {
                std::fs::write(&path, crate::dsl::serialize(&bundle.doc))
                    .map_err(|e| usage(format!("{}: {e}", path.display())))?;
            }
            let verdict = check_equivalence(&table, &bundle, max_len).map_err(|e| usage(e.to_string()))?;
            io.out(&verdict.to_json())?;
            if !verdict.equivalent {
                return Err(Fail::Domain(verdict.detail.unwrap_or_else(|| "not equivalent".into())));
            }
            io.note(&format!("equivalent on {} sequences", verdict.checked));
            Ok(())
        }
        Verb::Railcar { cmd } => railcar_cmd(cmd, io),
        Verb::Export { model, format, regions } => {
            let doc = load_doc(&model)?;
            let report = validate_static(&doc.model);
            if report.has_fatal() {
                return Err(Fail::Domain(format!("{}: {}", model.display(), report.findings[0])));
            }
            match format {
                Format::Dot => io.out(&to_dot(&doc.model, regions.then_some(&doc.regions))),
                Format::Json => io.out(&json(&doc)),
            }
        }
    }
}

fn railcar_cmd(cmd: RailcarCmd, io: &mut Io) -> Res {
    match cmd {
        RailcarCmd::Run { world, run } => {
            let set = Settings::load(run.config.as_deref())?;
            let params = world_params(&world, &set)?;
            let cfg = sim_config(&run, &set, &railcar::choice_points())?;
            let trace = railcar::run_world(&params, &cfg).map_err(|e| match e {
                railcar::RailcarError::Sim(s) => Fail::Domain(s.to_string()),
                other => usage(format!("{}: {other}", other.code())),
            })?;
            io.out(&trace.to_json())?;
            let bad = railcar::check_safety(&trace, &params).map_err(usage)?;
            for v in &bad {
                io.note(&format!("{} at tick {}: {}", v.kind, v.at, v.message));
            }
            if !bad.is_empty() {
                return Err(Fail::Domain(format!("{} safety violations", bad.len())));
            }
            Ok(())
        }
        RailcarCmd::Explore { world, depth, state_cap, serial, config } => {
            let set = Settings::load(config.as_deref())?;
            let params = world_params(&world, &set)?;
            let depth = set.get(depth, "depth")?.unwrap_or(60);
            let mut cfg = ExploreConfig::new(params, depth as usize);
            if let Some(c) = set.get(state_cap, "state_cap")? {
                cfg.state_cap = c;
            }
            cfg.parallel = !(serial || set.get(None, "serial")?.unwrap_or(false));
            let report = railcar::explore(&cfg).map_err(|e| match e {
                railcar::RailcarError::StateBudgetExceeded { .. } => Fail::Domain(format!("{}: {e}", e.code())),
                other => usage(format!("{}: {other}", other.code())),
            })?;
            io.out(&json(&report))?;
            io.note(&format!(
                "{} states, {} transitions, depth {}",
                report.states, report.transitions, report.depth_reached
            ));
            for f in &report.findings {
                io.note(&format!("{} after {} steps", f.kind, f.depth));
            }
            if !report.is_safe() {
                return Err(Fail::Domain(format!("{} kinds of violation found", report.findings.len())));
            }
            Ok(())
        }
    }
}

/// Runs the command line and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut io = Io { out, err };
    match dispatch(cli.verb, &mut io) {
        Ok(()) => 0,
        Err(Fail::Domain(m)) => {
            io.note(&m);
            1
        }
        Err(Fail::Usage(m)) => {
            io.note(&m);
            2
        }
    }
}
