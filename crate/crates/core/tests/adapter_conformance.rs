//! The same contract checks, run against every shipped embodiment.

mod common;

use std::collections::BTreeMap;
use std::fmt::Debug;

use agentic_control::config::ActionInterface;
use agentic_control::sim::{
    min_steps_oracle, scenario_from_str, AckStatus, DiscreteWorld, GridWorld, LimbWorld, RobotAdapter, TankWorld,
};
use proptest::prelude::*;

fn table(name: &str) -> toml::Table {
    common::scenario(name).parse().unwrap()
}

fn conformance<W>(world: W, interface: &ActionInterface, script: &[usize])
where
    W: DiscreteWorld + Debug,
    W::State: Debug,
{
    let params = BTreeMap::new();
    let mut w = world.clone();
    w.check_interface(interface).unwrap();

    // Reset is idempotent and returns to the start state.
    w.reset(3);
    let start = w.state();
    w.reset(3);
    assert_eq!(w.state(), start);

    for &i in script {
        let action = &interface.actions[i % interface.actions.len()];
        let before = w.state();
        let ack = w.dispatch(action, &params).expect("validated dispatch never faults");
        if ack.status != AckStatus::Ok {
            assert_eq!(w.state(), before, "{} refused but state changed", action.name);
        }

        // One frame per enabled camera, tagged in camera order.
        let frames = w.sense(7);
        let ids: Vec<String> = frames.iter().map(|f| f.camera_id.clone()).collect();
        assert_eq!(ids, w.enabled_cameras());
        assert!(frames.iter().all(|f| f.timestamp == 7));

        // Success depends on state alone, not on how the state was reached.
        let mut fresh = world.clone();
        fresh.reset(99);
        fresh.set_state(&w.state());
        assert_eq!(fresh.success(), w.success());
        assert_eq!(fresh.sense(7), frames);
        assert_eq!(fresh.proprio(), w.proprio());
    }
    w.reset(3);
    assert_eq!(w.state(), start);
}

fn worlds() -> (GridWorld, LimbWorld, TankWorld) {
    (
        GridWorld::from_table(&table("dingo")).unwrap(),
        LimbWorld::from_table(&table("limb")).unwrap(),
        TankWorld::from_table(&table("rov")).unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn all_embodiments_satisfy_the_adapter_contract(script in prop::collection::vec(0usize..64, 0..40)) {
        let (g, l, t) = worlds();
        conformance(g, &common::config("dingo").interface, &script);
        conformance(l, &common::config("limb").interface, &script);
        conformance(t, &common::config("rov").interface, &script);
    }
}

#[test]
fn frames_match_enabled_cameras_of_shipped_scenarios() {
    let expected = [("dingo", 3), ("limb", 4), ("rov", 1)];
    for (name, n) in expected {
        let adapter = scenario_from_str(&common::scenario(name)).unwrap();
        assert_eq!(adapter.sense(0).len(), n, "{name}");
        let robot_cams: Vec<String> = common::config(name).robot.camera_ids().map(String::from).collect();
        for cam in adapter.enabled_cameras() {
            assert!(robot_cams.contains(&cam), "{name}: camera {cam} missing from robot description");
        }
    }
}

#[test]
fn disabled_side_cameras_never_see_the_target() {
    let mut limb = LimbWorld::from_table(&table("limb")).unwrap();
    // Rotating to -1 would show the screwdriver to the disabled left camera.
    limb.set_joints([0, 0, -1, 0]);
    assert!(!limb.success());
    assert!(limb.sense(0).iter().all(|f| f.camera_id != "left_side"));
    limb.set_camera_enabled("left_side", true);
    assert!(limb.success());
}

#[test]
fn shipped_oracles_are_reachable() {
    let (g, l, t) = worlds();
    assert_eq!(min_steps_oracle(&g, &common::config("dingo").interface).unwrap(), 16);
    assert_eq!(min_steps_oracle(&l, &common::config("limb").interface).unwrap(), 3);
    assert_eq!(min_steps_oracle(&t, &common::config("rov").interface).unwrap(), 5);
}

#[test]
fn unsupported_actions_are_rejected_by_interface_check() {
    let (g, _, _) = worlds();
    let limb_iface = common::config("limb").interface;
    assert!(g.check_interface(&limb_iface).is_err());
}
