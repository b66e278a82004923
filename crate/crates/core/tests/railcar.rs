use tm_core::dynamics::coverage;
use tm_core::railcar::*;
use tm_core::sim::{check_trace, ChoiceScript, SimConfig, Trace};
use tm_core::validate::validate_static;

fn one_terminal(cars: usize) -> WorldParams {
    WorldParams { terminals: 1, cars, ..Default::default() }
}

fn config(ticks: u64, script: &[&str]) -> SimConfig {
    let mut s = ChoiceScript::new();
    for e in script {
        s.parse_entry(&choice_points(), e).unwrap();
    }
    SimConfig { max_ticks: ticks, script: s, ..Default::default() }
}

fn car_events(t: &Trace, car: &str) -> Vec<String> {
    t.occurrences.iter().filter(|o| o.car.as_deref() == Some(car)).map(|o| o.event.clone()).collect()
}

fn at_of(t: &Trace, car: &str, ev: &str) -> Vec<u64> {
    t.occurrences.iter().filter(|o| o.car.as_deref() == Some(car) && o.event == ev).map(|o| o.at).collect()
}

#[test]
fn terminal_model_is_valid_and_partitioned() {
    let doc = build_terminal_model(TerminalShape::default()).unwrap();
    let report = validate_static(&doc.model);
    assert!(!report.has_fatal(), "{report:?}");
    assert_eq!(doc.events.len(), 15);
    let cov = coverage(&doc.model, &doc.region_specs()).unwrap();
    assert!(cov.uncovered.is_empty(), "{:?}", cov.uncovered);
    let behavior = doc.behavior(BEHAVIOR).unwrap();
    assert_eq!(behavior.events.len(), 15);
    assert!(behavior.reachable().len() == 15);
}

#[test]
fn no_parking_drops_the_parking_events() {
    let doc = build_terminal_model(TerminalShape { segments: 3, spots: 0 }).unwrap();
    assert_eq!(doc.events.len(), 12);
    assert!(!doc.events.contains_key("E14"));
    let cov = coverage(&doc.model, &doc.region_specs()).unwrap();
    assert!(cov.uncovered.is_empty());
    assert!(!validate_static(&doc.model).has_fatal());
}

#[test]
fn two_segments_have_no_c() {
    let doc = build_terminal_model(TerminalShape { segments: 2, spots: 2 }).unwrap();
    assert!(!doc.model.machines.contains_key("C"));
    assert_eq!(doc.events.len(), 13);
    let e = build_terminal_model(TerminalShape { segments: 1, spots: 2 }).unwrap_err();
    assert_eq!(e.code(), "BAD_PARAMS");
}

#[test]
fn single_car_goes_round() {
    let t = run_world(&one_terminal(1), &config(200, &["park-or-continue=continue"])).unwrap();
    let evs = car_events(&t, "car1");
    assert_eq!(evs[..10], ["E1", "E2", "E3", "E4", "E6", "E7", "E8", "E10", "E12", "E13"]);
    // the flags are set before the car needs them
    let first_car = t.occurrences.iter().position(|o| o.car.is_some()).unwrap();
    let flags: Vec<&str> = t.occurrences[..first_car].iter().map(|o| o.event.as_str()).collect();
    assert_eq!(flags, ["E5", "E9"]);
    let e7 = at_of(&t, "car1", "E7");
    let e10 = at_of(&t, "car1", "E10");
    assert_eq!(e10[0] - e7[0], DWELL);
    let behavior = terminal_behavior(&one_terminal(1)).unwrap();
    let v = check_trace(&t, &behavior);
    assert!(v.conforms, "{:?}", v.violations);
    assert!(check_safety(&t, &one_terminal(1)).unwrap().is_empty());
}

#[test]
fn parking_and_release() {
    let t = run_world(&one_terminal(1), &config(200, &["park-or-continue=park"])).unwrap();
    let evs = car_events(&t, "car1");
    let i = evs.iter().position(|e| e == "E8").unwrap();
    assert_eq!(evs[i..i + 3], ["E8", "E14", "E15"]);
    let park = t.occurrences.iter().find(|o| o.event == "E14").unwrap();
    assert_eq!(park.area.as_deref(), Some("P1.1"));
    let back = at_of(&t, "car1", "E15")[0];
    assert_eq!(at_of(&t, "car1", "E8")[1], back + DWELL);
    let v = check_trace(&t, &terminal_behavior(&one_terminal(1)).unwrap());
    assert!(v.conforms, "{:?}", v.violations);
}

#[test]
fn approaching_car_blocks_parking() {
    let p = one_terminal(2);
    let t = run_world(&p, &config(400, &[])).unwrap();
    // car1 enters B at tick 0, so car2 stays parked until car1 is through T
    assert_eq!(at_of(&t, "car1", "E1")[0], 0);
    assert_eq!(at_of(&t, "car1", "E7")[0], 1);
    let leave = at_of(&t, "car2", "E15")[0];
    assert_eq!(leave, 1 + DWELL);
    assert!(check_safety(&t, &p).unwrap().is_empty());
    let v = check_trace(&t, &terminal_behavior(&p).unwrap());
    assert!(v.conforms, "{:?}", v.violations);
}

#[test]
fn many_random_runs_stay_safe() {
    for seed in 0..40 {
        let p = WorldParams { terminals: 2, cars: 4, ..Default::default() };
        let cfg =
            SimConfig { seed, max_ticks: 1500, policy: tm_core::sim::ChoicePolicy::SeededRandom, ..Default::default() };
        let t = run_world(&p, &cfg).unwrap();
        assert!(check_safety(&t, &p).unwrap().is_empty(), "seed {seed}");
        let v = check_trace(&t, &terminal_behavior(&p).unwrap());
        assert!(v.conforms, "seed {seed}: {:?}", &v.violations[..1]);
        assert_eq!(run_world(&p, &cfg).unwrap().to_json(), t.to_json());
    }
}

#[test]
fn two_segment_ring_runs() {
    let p = WorldParams { terminals: 2, segments: 2, cars: 2, ..Default::default() };
    let t = run_world(&p, &config(600, &[])).unwrap();
    assert!(!t.occurrences.iter().any(|o| o.event == "E13" || o.event == "E11"));
    assert!(check_trace(&t, &terminal_behavior(&p).unwrap()).conforms);
    assert!(check_safety(&t, &p).unwrap().is_empty());
}

#[test]
fn bad_params() {
    let mut p = one_terminal(9);
    assert_eq!(run_world(&p, &config(10, &[])).unwrap_err().code(), "BAD_PARAMS");
    p.cars = 1;
    p.positions = Some(vec!["T1".into()]);
    assert_eq!(run_world(&p, &config(10, &[])).unwrap_err().code(), "BAD_PARAMS");
    p.positions = Some(vec!["Z9".into()]);
    assert_eq!(run_world(&p, &config(10, &[])).unwrap_err().code(), "BAD_PARAMS");
    p.positions = None;
    p.terminals = 0;
    assert_eq!(run_world(&p, &config(10, &[])).unwrap_err().code(), "BAD_PARAMS");
}

#[test]
fn forged_double_occupancy() {
    let p = WorldParams {
        terminals: 1,
        cars: 2,
        positions: Some(vec!["P1.1".into(), "P1.2".into()]),
        ..Default::default()
    };
    let json = r#"{"seed":0,"occurrences":[
        {"event":"E15","at":5,"cause":"init","car":"car1","area":"T1"},
        {"event":"E15","at":5,"cause":"init","car":"car2","area":"T1"}],"flags":{}}"#;
    let t = Trace::from_json(json).unwrap();
    let kinds: Vec<SafetyKind> = check_safety(&t, &p).unwrap().into_iter().map(|v| v.kind).collect();
    assert_eq!(kinds, [SafetyKind::DoubleOccupancy]);
}

#[test]
fn exploration_of_the_protocol_is_safe() {
    let r = explore(&ExploreConfig::new(one_terminal(2), 60)).unwrap();
    assert!(r.is_safe(), "{:?}", r.findings.iter().map(|f| f.kind).collect::<Vec<_>>());
    assert!(r.states > 10);
    let serial = explore(&ExploreConfig { parallel: false, ..ExploreConfig::new(one_terminal(2), 60) }).unwrap();
    assert_eq!((serial.states, serial.transitions), (r.states, r.transitions));
}

#[test]
fn every_mutation_is_caught() {
    for m in Mutation::ALL {
        let p = WorldParams { mutation: Some(m), ..one_terminal(2) };
        let r = explore(&ExploreConfig::new(p.clone(), 60)).unwrap();
        assert!(!r.is_safe(), "{m} went unnoticed");
        for f in &r.findings {
            // the witness replays to the same breach
            let found: Vec<SafetyKind> = check_safety(&f.witness, &p).unwrap().into_iter().map(|v| v.kind).collect();
            assert!(found.contains(&f.kind), "{m}: {} not in {found:?}", f.kind);
        }
    }
    let p = WorldParams { mutation: Some(Mutation::NoReservation), ..one_terminal(2) };
    let r = explore(&ExploreConfig::new(p, 60)).unwrap();
    let d = r.findings.iter().find(|f| f.kind == SafetyKind::DoubleOccupancy).unwrap();
    assert_eq!(d.depth, 4);
}

#[test]
fn explore_limits() {
    assert_eq!(explore(&ExploreConfig::new(one_terminal(2), 0)).unwrap_err().code(), "BAD_DEPTH");
    let cfg = ExploreConfig { state_cap: 5, ..ExploreConfig::new(one_terminal(2), 60) };
    assert_eq!(explore(&cfg).unwrap_err().code(), "STATE_BUDGET_EXCEEDED");
}

#[test]
fn mirror_is_isomorphic_under_reversal() {
    let doc = build_terminal_model(TerminalShape::default()).unwrap();
    let lay = layout(&doc.model);
    let m = mirror(&doc.model);
    assert!(!validate_static(&m).has_fatal());
    let phi = mirror_isomorphism(&doc.model, &lay, &m, &mirror_layout(&lay)).expect("isomorphic");
    assert_eq!(phi.len(), doc.model.machines_with_paths().len());
    // without reversing the track the positions no longer line up
    let same: std::collections::BTreeMap<String, i64> = lay.iter().map(|(k, v)| (mirror_name(k), *v)).collect();
    assert!(mirror_isomorphism(&doc.model, &lay, &m, &same).is_none());
    // nor does a structurally different half
    let mut broken = m.clone();
    let t = broken.triggers.iter().next().unwrap().clone();
    broken.triggers.remove(&t);
    assert!(mirror_isomorphism(&doc.model, &lay, &broken, &mirror_layout(&lay)).is_none());
}
