//! Benchmark-only crate; see `benches/`.

use ionet::{IONet, Marking, PlaceId};

/// The enzymatic reaction net with `scale` tokens of substrate per 100.
pub fn enzyme_instance(scale: u64) -> (IONet, Marking, Marking) {
    let mut net = IONet::new(
        ["PE", "E", "R", "P1", "P2"].map(String::from).to_vec(),
    )
    .unwrap();
    net.add_transition("produce", PlaceId(0), PlaceId(1), None)
        .unwrap();
    net.add_transition("use", PlaceId(2), PlaceId(3), Some(PlaceId(1)))
        .unwrap();
    net.add_transition("avoid", PlaceId(2), PlaceId(4), None)
        .unwrap();
    let m = Marking::new(vec![2 * scale, 0, 4 * scale, 0, 0]);
    let m2 = Marking::new(vec![0, 2 * scale, 0, 4 * scale, 0]);
    (net, m, m2)
}
