//! End-to-end acceptance checks. Runs as a plain binary and prints one line
//! per criterion; exits non-zero if any fails.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tm_core::cli;
use tm_core::dsl::{parse_str, serialize, Document};
use tm_core::dynamics::{coverage, DelayBounds, EdgeSpec};
use tm_core::railcar::{
    build_terminal_model, check_safety, choice_points, explore, layout, mirror, mirror_isomorphism, mirror_layout,
    run_world, terminal_behavior, ExploreConfig, Mutation, TerminalShape, WorldParams, DWELL,
};
use tm_core::sim::{
    check_trace, simulate, Cause, ChoicePolicy, ChoiceScript, Occurrence, SimConfig, Stimulus, Trace, ViolationKind,
};
use tm_core::table::{check_equivalence, parse_table, table_to_tm};

const VENDING: &str = include_str!("../fixtures/vending.tm");
const RAILCAR: &str = include_str!("../fixtures/railcar_terminal.tm");
const TABLE: &str = include_str!("../fixtures/vending_table.csv");

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn vending_equivalence() -> Outcome {
    let table = parse_table(TABLE, None).map_err(|e| e.to_string())?;
    let bundle = table_to_tm(&table);
    let t0 = Instant::now();
    let v = check_equivalence(&table, &bundle, 6).map_err(|e| e.to_string())?;
    let took = t0.elapsed();
    let signals = table.signals().len() as u32;
    ensure(signals == 6, format!("{signals} signals"))?;
    let expected: usize = (1..=6).map(|k| 6usize.pow(k)).sum();
    ensure(v.equivalent, format!("counterexample {:?}", v.counterexample))?;
    ensure(v.checked == expected, format!("checked {} sequences, want {expected}", v.checked))?;
    ensure(took < Duration::from_secs(60), format!("took {took:?}"))?;
    Ok(format!("{} sequences in {:.2?}", v.checked, took))
}

fn region_coverage() -> Outcome {
    let mut parts = Vec::new();
    for (name, src, regions) in [("vending", VENDING, 9), ("railcar", RAILCAR, 15)] {
        let doc = parse_str(src).map_err(|d| format!("{d:?}"))?;
        ensure(doc.regions.len() == regions, format!("{name}: {} regions", doc.regions.len()))?;
        let cov = coverage(&doc.model, &doc.region_specs()).map_err(|e| e.to_string())?;
        ensure(cov.uncovered.is_empty(), format!("{name}: uncovered {:?}", cov.uncovered))?;
        parts.push(format!("{name} {regions} regions, 0 uncovered"));
    }
    Ok(parts.join("; "))
}

fn vending_run(doc: &Document, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let mut doc = doc.clone();
    let coins = doc
        .model
        .machine_mut(&"Vending.Coins".parse().unwrap())
        .and_then(|m| m.storage.as_mut())
        .ok_or("no coin storage")?;
    coins.level = rng.gen_range(0..6);
    let behavior = doc.behavior("vending").map_err(|e| e.to_string())?;
    let mut script = ChoiceScript::new();
    let outs: Vec<&str> = (0..rng.gen_range(0..6)).map(|_| *["pass", "fail"].choose(rng).unwrap()).collect();
    script.script_choice(&doc.model.choices, "verify", &outs).map_err(|e| e.to_string())?;
    let mut at = 0;
    let stimuli: Vec<Stimulus> = (0..rng.gen_range(0..12))
        .map(|_| {
            at += rng.gen_range(0..20);
            if rng.gen_bool(0.2) {
                Stimulus::new(at, "Refill.transfer").with("count", &rng.gen_range(1..5).to_string())
            } else {
                Stimulus::new(at, "Money.transfer")
            }
        })
        .collect();
    let config = SimConfig { seed: rng.gen(), policy: ChoicePolicy::SeededRandom, script, ..SimConfig::default() };
    let trace = simulate(&doc.model, &behavior, &config, &stimuli).map_err(|e| e.to_string())?;
    let v = check_trace(&trace, &behavior);
    ensure(v.conforms, format!("vending seed {}: {:?}", config.seed, v.violations))
}

fn railcar_run(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let mut params = WorldParams { terminals: rng.gen_range(1..4), spots: rng.gen_range(0..3), ..Default::default() };
    // starting places: A, the C areas and the spots of every terminal
    let room = params.terminals * (params.segments - 1 + params.spots);
    params.cars = rng.gen_range(1..=room.min(4));
    let mut script = ChoiceScript::new();
    let points = choice_points();
    for (point, outs) in [("park-or-continue", ["park", "continue"]), ("release", ["release", "hold"])] {
        let seq: Vec<&str> = (0..rng.gen_range(0..5)).map(|_| *outs.choose(rng).unwrap()).collect();
        script.script_choice(&points, point, &seq).map_err(|e| e.to_string())?;
    }
    let config = SimConfig {
        seed: rng.gen(),
        max_ticks: rng.gen_range(50..600),
        policy: ChoicePolicy::SeededRandom,
        script,
        ..SimConfig::default()
    };
    let trace = run_world(&params, &config).map_err(|e| e.to_string())?;
    let behavior = terminal_behavior(&params).map_err(|e| e.to_string())?;
    let v = check_trace(&trace, &behavior);
    ensure(v.conforms, format!("railcar {params:?} seed {}: {:?}", config.seed, v.violations))?;
    let unsafe_ = check_safety(&trace, &params).map_err(|e| e.to_string())?;
    ensure(unsafe_.is_empty(), format!("railcar seed {}: {:?}", config.seed, unsafe_))
}

fn behavioral_closure() -> Outcome {
    let doc = parse_str(VENDING).map_err(|d| format!("{d:?}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..1000 {
        vending_run(&doc, &mut rng)?;
    }
    for _ in 0..1000 {
        railcar_run(&mut rng)?;
    }
    Ok("1000 vending runs and 1000 railcar runs conform".into())
}

fn time_rule() -> Outcome {
    let mut doc = parse_str(VENDING).map_err(|d| format!("{d:?}"))?;
    let spec = doc.behaviors.get_mut("vending").ok_or("no vending behavior")?;
    spec.edges.retain(|e| !(e.from == "E_B" && e.to == "E_D"));
    let mut edge = EdgeSpec::new("E_B", "E_D");
    edge.delay = DelayBounds { min: 0, max: Some(60) };
    spec.edges.insert(edge);
    let behavior = doc.behavior("vending").map_err(|e| e.to_string())?;

    let trace = |gap: u64| Trace {
        seed: 0,
        occurrences: vec![
            Occurrence::new("E_A", 0, Cause::Stimulus(0)),
            Occurrence::new("E_B", 3, Cause::Occurrence(0)),
            Occurrence::new("E_D", 3 + gap, Cause::Occurrence(1)),
        ],
        flags: Default::default(),
    };
    // February 2000 to January 2021, in seconds
    let years = 662_688_000;
    let late = check_trace(&trace(years), &behavior);
    ensure(!late.conforms && late.has(ViolationKind::DelayExceeded), format!("{:?}", late.violations))?;
    for gap in [0, 30, 60] {
        let v = check_trace(&trace(gap), &behavior);
        ensure(v.conforms, format!("gap {gap}: {:?}", v.violations))?;
    }
    let v = check_trace(&trace(61), &behavior);
    ensure(v.has(ViolationKind::DelayExceeded), "gap 61 accepted")?;
    Ok(format!("gap {years} rejected with DELAY_EXCEEDED, gaps 0..=60 conform"))
}

fn railcar_safety() -> Outcome {
    let params = WorldParams { terminals: 1, cars: 2, ..Default::default() };
    let t0 = Instant::now();
    let mut cfg = ExploreConfig::new(params.clone(), 60);
    cfg.state_cap = 1_000_000;
    let report = explore(&cfg).map_err(|e| e.to_string())?;
    let took = t0.elapsed();
    ensure(report.findings.is_empty(), format!("{:?}", report.findings.iter().map(|f| f.kind).collect::<Vec<_>>()))?;
    ensure(took < Duration::from_secs(300), format!("took {took:?}"))?;
    let mut caught = Vec::new();
    for m in Mutation::ALL {
        let mut cfg = ExploreConfig::new(WorldParams { mutation: Some(m), ..params.clone() }, 60);
        cfg.state_cap = 1_000_000;
        let r = explore(&cfg).map_err(|e| e.to_string())?;
        let f = r.findings.first().ok_or(format!("{} not caught", m.as_str()))?;
        let replay = check_safety(&f.witness, &cfg.params).map_err(|e| e.to_string())?;
        ensure(replay.iter().any(|v| v.kind == f.kind), format!("{} witness does not show {}", m.as_str(), f.kind))?;
        caught.push(format!("{}:{}", m.as_str(), f.kind));
    }
    Ok(format!(
        "{} states, exhausted {}, {took:.2?}, no violations; {}",
        report.states,
        report.exhausted,
        caught.join(" ")
    ))
}

fn dwell_exactness() -> Outcome {
    let params = WorldParams { cars: 1, ..Default::default() };
    let mut samples = 0;
    for seed in 0..50 {
        let config = SimConfig { seed, max_ticks: 2000, policy: ChoicePolicy::SeededRandom, ..SimConfig::default() };
        let trace = run_world(&params, &config).map_err(|e| e.to_string())?;
        let mine: Vec<&Occurrence> = trace.occurrences.iter().filter(|o| o.car.is_some()).collect();
        for (i, o) in mine.iter().enumerate() {
            if o.event != "E7" && o.event != "E15" {
                continue;
            }
            let Some(out) = mine[i + 1..].iter().find(|x| x.event == "E10" || x.event == "E14") else { continue };
            let dwell = out.at - o.at;
            ensure(dwell == 90, format!("seed {seed}: dwell {dwell} from tick {}", o.at))?;
            samples += 1;
        }
    }
    ensure(DWELL == 90 && samples > 0, "no dwell observed")?;
    Ok(format!("{samples} stops, all exactly 90 ticks"))
}

fn determinism() -> Outcome {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let model = fixtures.join("vending.tm").display().to_string();
    let stimuli = fixtures.join("dollar.json").display().to_string();
    let args = ["tm", "simulate", &model, &stimuli, "--seed", "1234", "--policy", "random"];
    let mut first: Option<Vec<u8>> = None;
    for i in 0..10 {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = cli::run(args, &mut out, &mut err);
        ensure(code == 0, format!("exit {code}: {}", String::from_utf8_lossy(&err)))?;
        match &first {
            None => first = Some(out),
            Some(f) => ensure(*f == out, format!("run {i} differs"))?,
        }
    }
    Ok(format!("10 runs, {} identical bytes", first.unwrap().len()))
}

fn round_trip() -> Outcome {
    for seed in 0..500u64 {
        let doc = common::random_document(seed ^ 0xa11ce);
        let text = serialize(&doc);
        let back = parse_str(&text).map_err(|d| format!("seed {seed}: {d:?}"))?;
        ensure(back == doc, format!("seed {seed}: document changed"))?;
    }
    for (name, src) in [("vending", VENDING), ("railcar", RAILCAR)] {
        let doc = parse_str(src).map_err(|d| format!("{d:?}"))?;
        let back = parse_str(&serialize(&doc)).map_err(|d| format!("{d:?}"))?;
        ensure(back == doc, format!("{name} changed"))?;
    }
    let built = build_terminal_model(TerminalShape::default()).map_err(|e| e.to_string())?;
    ensure(parse_str(RAILCAR).ok() == Some(built), "railcar fixture differs from the builder")?;
    Ok("500 generated documents and both fixtures".into())
}

fn mirror_symmetry() -> Outcome {
    let doc = build_terminal_model(TerminalShape::default()).map_err(|e| e.to_string())?;
    let lay = layout(&doc.model);
    let m = mirror(&doc.model);
    let phi = mirror_isomorphism(&doc.model, &lay, &m, &mirror_layout(&lay)).ok_or("no isomorphism")?;
    let machines = doc.model.machines_with_paths().len();
    ensure(phi.len() == machines, format!("maps {} of {machines} machines", phi.len()))?;
    ensure(mirror_isomorphism(&doc.model, &lay, &m, &lay).is_none(), "isomorphic without reversing direction")?;
    Ok(format!("{machines} machines mapped under reversal"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("vending table equivalence", vending_equivalence),
        ("region coverage", region_coverage),
        ("behavioral closure", behavioral_closure),
        ("time rule", time_rule),
        ("railcar safety", railcar_safety),
        ("dwell exactness", dwell_exactness),
        ("determinism", determinism),
        ("round trip", round_trip),
        ("mirror symmetry", mirror_symmetry),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        match check() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail}) [{:.2?}]", i + 1, t0.elapsed()),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
