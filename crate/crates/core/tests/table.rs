use std::collections::BTreeSet;

use tm_core::dsl;
use tm_core::dynamics::coverage;
use tm_core::table::{check_equivalence, parse_table, run_table, table_to_tm, Row, StateTable};
use tm_core::validate::validate_static;

const FIG: &str = include_str!("../fixtures/vending_table.csv");

fn vending() -> StateTable {
    parse_table(FIG, None).unwrap()
}

#[test]
fn six_rows_four_states() {
    let t = vending();
    assert_eq!(t.rows.len(), 6);
    assert_eq!(t.initial, "Wait For Dollar");
    let states: BTreeSet<&str> = t.states().into_iter().collect();
    let want: BTreeSet<&str> = ["Wait For Dollar", "Verify Dollar", "Dispensing Coins", "Out Of Money"].into();
    assert_eq!(states, want);
    assert_eq!(t.signals().len(), 6);
}

#[test]
fn header_is_case_insensitive_and_reorderable() {
    let t = parse_table("next state,Action,event,State\n B , go , x , A \n", None).unwrap();
    assert_eq!(t.rows, [Row::new("A", "x", "go", "B")]);
    let t = parse_table("STATE,EVENT,ACTION,NEXT STATE\nA,x,go,B\nB,y,back,A\n", Some("B")).unwrap();
    assert_eq!(t.initial, "B");
}

#[test]
fn table_errors() {
    let e = parse_table("STATE,EVENT,NEXT STATE\nA,x,B\n", None).unwrap_err();
    assert_eq!(e.code(), "MISSING_COLUMN");
    assert!(e.to_string().contains("ACTION"));
    let dup = format!("{FIG}Verify Dollar,Verification Failed,Reject Bill,Out Of Money\n");
    assert_eq!(parse_table(&dup, None).unwrap_err().code(), "NONDETERMINISTIC_TABLE");
    assert_eq!(parse_table("STATE,EVENT,ACTION,NEXT STATE\n", None).unwrap_err().code(), "EMPTY_TABLE");
    assert_eq!(parse_table(FIG, Some("Nowhere")).unwrap_err().code(), "UNKNOWN_INITIAL");
}

#[test]
fn quoted_cells() {
    let t = parse_table("STATE,EVENT,ACTION,NEXT STATE\n\"A, waiting\",x,\"say \"\"hi\"\"\",B\n", None).unwrap();
    assert_eq!(t.rows[0].state, "A, waiting");
    assert_eq!(t.rows[0].action, "say \"hi\"");
}

#[test]
fn running_the_table() {
    let t = vending();
    assert_eq!(run_table(&t, &["Bill Detected"]).unwrap(), [("Load Bill".to_string(), "Verify Dollar".to_string())]);
    let out = run_table(&t, &["Bill Detected", "Verification Passed", "Sufficient Funds Remain"]).unwrap();
    assert_eq!(out.last().unwrap().1, "Wait For Dollar");
    let e = run_table(&t, &["Verification Passed"]).unwrap_err();
    assert_eq!(e.code(), "UNHANDLED_EVENT");
}

#[test]
fn run_table_prefix_property() {
    let t = vending();
    let seq = ["Bill Detected", "Verification Passed", "Insufficient Funds Remain", "Money Refill", "Bill Detected"];
    let full = run_table(&t, &seq).unwrap();
    for k in 0..seq.len() {
        assert_eq!(run_table(&t, &seq[..k]).unwrap(), full[..k]);
    }
}

#[test]
fn translation_matches_region_inventory() {
    let b = table_to_tm(&vending());
    assert!(validate_static(&b.doc.model).findings.is_empty(), "{:?}", validate_static(&b.doc.model).findings);
    assert_eq!(b.doc.regions.len(), 9);
    assert_eq!(b.doc.events.len(), 9);
    let cov = coverage(&b.doc.model, &b.doc.region_specs()).unwrap();
    assert!(cov.uncovered.is_empty(), "{:?}", cov.uncovered);
    let beh = b.behavior_model().unwrap();
    assert_eq!(beh.events.len(), 9);
}

#[test]
fn translation_prints_and_reparses() {
    let b = table_to_tm(&vending());
    let text = dsl::serialize(&b.doc);
    let back = dsl::parse_str(&text).unwrap();
    assert_eq!(back, b.doc);
}

#[test]
fn vending_table_is_equivalent() {
    let t = vending();
    let v = check_equivalence(&t, &table_to_tm(&t), 4).unwrap();
    assert!(v.equivalent, "{:?}", v);
    assert_eq!(v.checked, 6 + 36 + 216 + 1296);
}

#[test]
fn dropping_the_reject_row_diverges_early() {
    let t = vending();
    let b = table_to_tm(&t);
    let reject = t.rows.iter().position(|r| r.action == "Reject Bill").unwrap();
    let mutant = b.without_trigger(&b.row_trigger(reject).unwrap());
    let v = check_equivalence(&t, &mutant, 3).unwrap();
    assert!(!v.equivalent);
    assert_eq!(v.counterexample.unwrap(), ["Bill Detected", "Verification Failed"]);
    assert_eq!(
        serde_json::to_string(&check_equivalence(&t, &b, 1).unwrap()).unwrap(),
        r#"{"equivalent":true,"counterexample":null}"#
    );
}

#[test]
fn zero_length_is_rejected() {
    let t = vending();
    assert_eq!(check_equivalence(&t, &table_to_tm(&t), 0).unwrap_err().code(), "BAD_LENGTH");
}

#[test]
fn one_state_no_rows() {
    let t = StateTable::new(vec![], "Idle").unwrap();
    let b = table_to_tm(&t);
    assert_eq!(b.doc.model.machines.len(), 1);
    assert!(b.doc.model.flows.is_empty() && b.doc.model.triggers.is_empty());
    assert!(b.doc.behaviors.is_empty());
    assert!(validate_static(&b.doc.model).findings.is_empty());
}

#[test]
fn self_loop_row_loops_in_behavior() {
    let t = StateTable::new(vec![Row::new("S", "tick", "count", "S")], "S").unwrap();
    let b = table_to_tm(&t);
    let beh = b.behavior_model().unwrap();
    let ev = b.row_events[0].as_deref().unwrap();
    assert!(beh.edge(ev, ev).is_some());
    assert!(check_equivalence(&t, &b, 5).unwrap().equivalent);
}

#[test]
fn shared_next_states_still_equivalent() {
    let rows = vec![
        Row::new("A", "go", "step", "C"),
        Row::new("B", "go", "step", "C"),
        Row::new("A", "skip", "jump", "B"),
        Row::new("C", "reset", "Turn On Lamp", "A"),
    ];
    let t = StateTable::new(rows, "A").unwrap();
    let b = table_to_tm(&t);
    assert!(validate_static(&b.doc.model).findings.is_empty());
    let v = check_equivalence(&t, &b, 5).unwrap();
    assert!(v.equivalent, "{v:?}");
}
