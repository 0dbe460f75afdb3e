use proptest::prelude::*;

use agvq_core::plant::{load_scenario, validate_scenario, NodeId, Violation, LOOP_PLANT};

fn fixture() -> agvq_core::plant::Scenario {
    load_scenario(LOOP_PLANT).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Corrupted documents fail to parse or validate, never panic.
    #[test]
    fn mangled_documents_do_not_panic(cut in 0usize..LOOP_PLANT.len(), junk in "[ -~]{0,12}") {
        let mut text = LOOP_PLANT.to_string();
        if text.is_char_boundary(cut) {
            text.replace_range(cut..(cut + junk.len()).min(text.len()), &junk);
        }
        if let Ok(s) = load_scenario(&text) {
            let _ = validate_scenario(&s);
        }
    }

    #[test]
    fn lattice_survives_any_single_edge_removal(k in 0usize..48) {
        let mut s = fixture();
        s.graph.edges.remove(k);
        let v = validate_scenario(&s);
        // The lattice has no bridges, so one removal keeps it connected.
        let split = v.iter().any(|x| matches!(x, Violation::Disconnected { .. }));
        prop_assert!(!split, "{:?}", v);
    }

    #[test]
    fn unknown_start_is_reported(i in 0usize..10, id in "[a-z]{3,8}") {
        let mut s = fixture();
        s.agvs[i].node = NodeId(id.clone());
        let v = validate_scenario(&s);
        let agv = s.agvs[i].id.clone();
        let expected = Violation::UnknownNode { agv, node: NodeId(id) };
        prop_assert!(v.contains(&expected), "{:?}", v);
    }

    #[test]
    fn shared_start_is_reported(i in 0usize..10, j in 0usize..10) {
        prop_assume!(i != j);
        let mut s = fixture();
        s.agvs[j].node = s.agvs[i].node.clone();
        let v = validate_scenario(&s);
        let found = v.iter().any(|x| matches!(x, Violation::DuplicateStart { .. }));
        prop_assert!(found, "{:?}", v);
    }

    #[test]
    fn nonpositive_speed_is_reported(i in 0usize..10, speed in -5.0f64..=0.0) {
        let mut s = fixture();
        s.agvs[i].speed = speed;
        let v = validate_scenario(&s);
        let found = v.iter().any(|x| matches!(x, Violation::NonPositiveSpeed { .. }));
        prop_assert!(found, "{:?}", v);
    }
}

#[test]
fn isolating_a_corner_disconnects() {
    let mut s = fixture();
    // Node 1 is the top-left corner with two perimeter edges.
    s.graph
        .edges
        .retain(|e| e.a != NodeId::from("1") && e.b != NodeId::from("1"));
    let v = validate_scenario(&s);
    assert!(
        v.contains(&Violation::Disconnected { components: 2 }),
        "{v:?}"
    );
}
