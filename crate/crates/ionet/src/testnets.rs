//! Shared example nets for unit tests.

use crate::net::{IONet, PlaceId};

/// Threshold protocol: p1 -p1-> p2, p2 -p2-> p3, p1 -p3-> p3, p2 -p3-> p3.
/// From a marking with n tokens in p1, all tokens reach p3 iff n >= 3.
pub fn threshold_net() -> IONet {
    let mut net = IONet::new(vec!["p1".into(), "p2".into(), "p3".into()]).unwrap();
    net.add_transition("t1", PlaceId(0), PlaceId(1), Some(PlaceId(0)))
        .unwrap();
    net.add_transition("t2", PlaceId(1), PlaceId(2), Some(PlaceId(1)))
        .unwrap();
    net.add_transition("t3", PlaceId(0), PlaceId(2), Some(PlaceId(2)))
        .unwrap();
    net.add_transition("t4", PlaceId(1), PlaceId(2), Some(PlaceId(2)))
        .unwrap();
    net
}

/// Enzyme production net over PE, E, R, P1, P2:
/// produce PE->E, use R->P1 obs E, avoid R->P2.
pub fn enzyme_net() -> IONet {
    let mut net = IONet::new(["PE", "E", "R", "P1", "P2"].map(String::from).to_vec()).unwrap();
    net.add_transition("produce", PlaceId(0), PlaceId(1), None)
        .unwrap();
    net.add_transition("use", PlaceId(2), PlaceId(3), Some(PlaceId(1)))
        .unwrap();
    net.add_transition("avoid", PlaceId(2), PlaceId(4), None)
        .unwrap();
    net
}

/// Shared-state proposal net over I, P, R before the non-forgetting closure:
/// I -I-> P, I -P-> R, I -P-> P, P -R-> R.
pub fn proposal_net_base() -> IONet {
    let mut net = IONet::new(vec!["I".into(), "P".into(), "R".into()]).unwrap();
    net.add_transition("t1", PlaceId(0), PlaceId(1), Some(PlaceId(0)))
        .unwrap();
    net.add_transition("t2", PlaceId(0), PlaceId(2), Some(PlaceId(1)))
        .unwrap();
    net.add_transition("t3", PlaceId(0), PlaceId(1), Some(PlaceId(1)))
        .unwrap();
    net.add_transition("t4", PlaceId(1), PlaceId(2), Some(PlaceId(2)))
        .unwrap();
    net
}

/// Non-forgetting closure of [`proposal_net_base`]; the closure adds
/// I -R-> P and I -R-> R so moves stay enabled once R is marked.
pub fn proposal_net() -> IONet {
    let net = proposal_net_base().non_forgetting_closure();
    assert!(net.is_non_forgetting().is_ok());
    net
}
