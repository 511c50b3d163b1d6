//! Acceptance suite: one criterion per test, each printing a single
//! PASS/FAIL line (visible with `--nocapture`). Tolerances are pinned in
//! the constants below.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ionet::history::replay;
use ionet::nearmiss::{
    analyze, decide_reachability, is_near_miss, restriction_flow_graph, solution_flow,
    SolutionFlow, Verdict,
};
use ionet::nonforgetting::{find_certificate, sat_to_net, verify_certificate, Operand, SearchError};
use ionet::oracle::{
    bfs_reach, exhaustive_near_miss, naive_max_flow, naive_min_cut, truth_table_sat, ReachOutcome,
};
use ionet::{
    AcceleratedSequence, Capacity, FlowGraph, IONet, Marking, PhaseCertificate, PlaceId,
    SatCircuit, Triple,
};

const GOLDEN_TIME_LIMIT: Duration = Duration::from_secs(1);
const DIFFERENTIAL_CASES: usize = 250;
const SEARCH_BUDGET: usize = 100_000;
const ORACLE_BUDGET: usize = 300_000;
const FLOW_GRAPH_CASES: usize = 100;
const WITNESS_CASES: usize = 10_000;
const SCALING_FACTOR: u64 = 10_000;
const SCALING_SLOWDOWN_LIMIT: f64 = 2.0;

fn criterion(number: usize, name: &str, run: impl FnOnce() -> Result<(), String>) {
    match run() {
        Ok(()) => println!("criterion {number} ({name}): PASS"),
        Err(reason) => {
            println!("criterion {number} ({name}): FAIL ({reason})");
            panic!("criterion {number} ({name}) failed: {reason}");
        }
    }
}

fn enzyme() -> (IONet, Marking, Marking) {
    let mut net = IONet::new(["PE", "E", "R", "P1", "P2"].map(String::from).to_vec()).unwrap();
    net.add_transition("produce", PlaceId(0), PlaceId(1), None).unwrap();
    net.add_transition("use", PlaceId(2), PlaceId(3), Some(PlaceId(1))).unwrap();
    net.add_transition("avoid", PlaceId(2), PlaceId(4), None).unwrap();
    (
        net,
        Marking::new(vec![200, 0, 400, 0, 0]),
        Marking::new(vec![0, 200, 0, 400, 0]),
    )
}

fn threshold() -> IONet {
    let mut net = IONet::new(vec!["p1".into(), "p2".into(), "p3".into()]).unwrap();
    net.add_transition("t1", PlaceId(0), PlaceId(1), Some(PlaceId(0))).unwrap();
    net.add_transition("t2", PlaceId(1), PlaceId(2), Some(PlaceId(1))).unwrap();
    net.add_transition("t3", PlaceId(0), PlaceId(2), Some(PlaceId(2))).unwrap();
    net.add_transition("t4", PlaceId(1), PlaceId(2), Some(PlaceId(2))).unwrap();
    net
}

fn proposal() -> IONet {
    let mut net = IONet::new(vec!["I".into(), "P".into(), "R".into()]).unwrap();
    net.add_transition("t1", PlaceId(0), PlaceId(1), Some(PlaceId(0))).unwrap();
    net.add_transition("t2", PlaceId(0), PlaceId(2), Some(PlaceId(1))).unwrap();
    net.add_transition("t3", PlaceId(0), PlaceId(1), Some(PlaceId(1))).unwrap();
    net.add_transition("t4", PlaceId(1), PlaceId(2), Some(PlaceId(2))).unwrap();
    let net = net.non_forgetting_closure();
    assert!(net.is_non_forgetting().is_ok());
    net
}

#[test]
fn criterion_1_enzyme_golden() {
    criterion(1, "enzyme golden values", || {
        let start = Instant::now();
        let (net, m, m2) = enzyme();
        let a = analyze(&net, &m, &m2);
        let seq = match &a.verdict {
            Verdict::Reachable(seq) => seq,
            other => return Err(format!("expected reachable, got {other:?}")),
        };
        let stable = a.stable.as_ref().ok_or("missing stable restriction set")?;
        let expected = vec![
            Triple::new(0, 0, 1),
            Triple::new(0, 1, 1),
            Triple::new(2, 2, 3),
            Triple::new(2, 3, 3),
        ];
        if stable.allowed_triples() != expected {
            return Err(format!("allowed triples {:?}", stable.allowed_triples()));
        }
        let flow = match solution_flow(&net, &m, &m2, stable) {
            SolutionFlow::Flow(flow) => flow,
            SolutionFlow::NearMiss(w) => return Err(format!("unexpected near miss {w:?}")),
        };
        let g = restriction_flow_graph(&net, &m, &m2, stable).unwrap();
        if flow.on(&g, 1, 7) != 200 || flow.on(&g, 3, 9) != 400 {
            return Err(format!(
                "pair flows PE->E {} R->P1 {}",
                flow.on(&g, 1, 7),
                flow.on(&g, 3, 9)
            ));
        }
        let end = replay(&net, &m, seq).map_err(|e| e.to_string())?;
        if end != m2 {
            return Err("sequence does not land on the target".into());
        }
        let elapsed = start.elapsed();
        if elapsed > GOLDEN_TIME_LIMIT {
            return Err(format!("took {elapsed:?}, limit {GOLDEN_TIME_LIMIT:?}"));
        }
        Ok(())
    });
}

#[test]
fn criterion_2_threshold_oracle() {
    criterion(2, "threshold net oracle", || {
        let start = Instant::now();
        let net = threshold();
        for n in 2u64..=6 {
            let from = Marking::new(vec![n, 0, 0]);
            let to = Marking::new(vec![0, 0, n]);
            let outcome = bfs_reach(&net, &from, &to, ORACLE_BUDGET);
            match (n, outcome) {
                (2, ReachOutcome::Unreachable) => {}
                (2, other) => return Err(format!("n=2 gave {other:?}")),
                (_, ReachOutcome::Reachable(seq)) => {
                    let end = replay(&net, &from, &seq).map_err(|e| e.to_string())?;
                    if end != to {
                        return Err(format!("n={n} sequence misses the target"));
                    }
                }
                (_, other) => return Err(format!("n={n} gave {other:?}")),
            }
        }
        let elapsed = start.elapsed();
        if elapsed > GOLDEN_TIME_LIMIT {
            return Err(format!("took {elapsed:?}, limit {GOLDEN_TIME_LIMIT:?}"));
        }
        Ok(())
    });
}

#[test]
fn criterion_3_proposal_certificate() {
    criterion(3, "proposal net certificate", || {
        let net = proposal();
        let cert = PhaseCertificate {
            markings: vec![
                Marking::new(vec![4, 1, 0]),
                Marking::new(vec![3, 1, 1]),
                Marking::new(vec![1, 0, 4]),
            ],
        };
        let seq = verify_certificate(&net, &cert).map_err(|e| e.to_string())?;
        let end = replay(&net, &cert.markings[0], &seq).map_err(|e| e.to_string())?;
        if end != cert.markings[2] {
            return Err("reconstructed sequence misses the target".into());
        }
        let found = find_certificate(
            &net,
            &cert.markings[0],
            &cert.markings[2],
            10_000,
        )
        .map_err(|e| e.to_string())?
        .ok_or("search found no certificate")?;
        verify_certificate(&net, &found).map_err(|e| format!("found cert rejected: {e}"))?;
        Ok(())
    });
}

/// A random net with up to 5 places and 8 transitions, plus two random
/// markings of equal token count up to 6.
fn random_instance(rng: &mut ChaCha8Rng) -> (IONet, Marking, Marking) {
    let places = rng.gen_range(1..=5usize);
    let names: Vec<String> = (0..places).map(|p| format!("q{p}")).collect();
    let mut net = IONet::new(names).unwrap();
    for i in 0..rng.gen_range(1..=8usize) {
        let src = PlaceId(rng.gen_range(0..places));
        let dst = PlaceId(rng.gen_range(0..places));
        let obs = if rng.gen_bool(0.75) {
            Some(PlaceId(rng.gen_range(0..places)))
        } else {
            None
        };
        net.add_transition(format!("t{i}"), src, dst, obs).unwrap();
    }
    let tokens = rng.gen_range(0..=6u64);
    let scatter = |rng: &mut ChaCha8Rng| {
        let mut m = Marking::zero(places);
        for _ in 0..tokens {
            let p = PlaceId(rng.gen_range(0..places));
            m.set(p, m.get(p) + 1);
        }
        m
    };
    let from = scatter(rng);
    let to = scatter(rng);
    (net, from, to)
}

#[test]
fn criterion_4_differential_suite() {
    criterion(4, "differential suite vs oracle", || {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let mut compared = 0usize;
        for case in 0..DIFFERENTIAL_CASES {
            let (net, from, to) = random_instance(&mut rng);
            let closed = net.non_forgetting_closure();
            let truth = match bfs_reach(&closed, &from, &to, ORACLE_BUDGET) {
                ReachOutcome::Reachable(_) => true,
                ReachOutcome::Unreachable => false,
                ReachOutcome::BudgetExceeded => continue,
            };
            match find_certificate(&closed, &from, &to, SEARCH_BUDGET) {
                Ok(Some(cert)) => {
                    if !truth {
                        return Err(format!("case {case}: certificate for unreachable pair"));
                    }
                    verify_certificate(&closed, &cert)
                        .map_err(|e| format!("case {case}: own certificate rejected: {e}"))?;
                }
                Ok(None) => {
                    if truth {
                        return Err(format!("case {case}: search missed a reachable pair"));
                    }
                }
                Err(SearchError::BudgetExceeded { .. }) => {}
                Err(e) => return Err(format!("case {case}: {e}")),
            }
            match decide_reachability(&closed, &from, &to) {
                Verdict::Reachable(seq) => {
                    if !truth {
                        return Err(format!("case {case}: analyzer claims reachable"));
                    }
                    let end = replay(&closed, &from, &seq).map_err(|e| e.to_string())?;
                    if end != to {
                        return Err(format!("case {case}: analyzer sequence is wrong"));
                    }
                }
                Verdict::Unreachable(..) => {
                    if truth {
                        return Err(format!("case {case}: analyzer claims unreachable"));
                    }
                }
                Verdict::NearMiss(w) => {
                    if !w.is_valid(&from, &to) {
                        return Err(format!("case {case}: invalid near-miss witness"));
                    }
                }
            }
            compared += 1;
        }
        if compared < 200 {
            return Err(format!("only {compared} cases fit the oracle budget"));
        }
        Ok(())
    });
}

fn random_flow_graph(rng: &mut ChaCha8Rng) -> FlowGraph {
    let n = rng.gen_range(2..=12usize);
    let mut g = FlowGraph::new(n, 0, n - 1);
    for u in 0..n - 1 {
        for v in 1..n {
            if u != v && rng.gen_bool(0.4) {
                g.add_arc(u, v, Capacity::Finite(rng.gen_range(0..=20)))
                    .unwrap();
            }
        }
    }
    g
}

#[test]
fn criterion_5_flow_engine_differential() {
    criterion(5, "flow engine vs naive oracle", || {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for case in 0..FLOW_GRAPH_CASES {
            let g = random_flow_graph(&mut rng);
            let flow = g.max_flow().map_err(|e| format!("case {case}: {e}"))?;
            if !flow.is_feasible(&g) {
                return Err(format!("case {case}: infeasible flow"));
            }
            let naive = naive_max_flow(&g).map_err(|e| format!("case {case}: {e}"))?;
            if flow.value != naive {
                return Err(format!("case {case}: dinitz {} vs naive {naive}", flow.value));
            }
            let cut = g.min_cut().map_err(|e| format!("case {case}: {e}"))?;
            if cut.capacity != Capacity::Finite(flow.value) {
                return Err(format!(
                    "case {case}: cut {} vs flow {}",
                    cut.capacity, flow.value
                ));
            }
            let best = naive_min_cut(&g).map_err(|e| format!("case {case}: {e}"))?;
            if best != cut.capacity {
                return Err(format!("case {case}: naive cut {best} vs {}", cut.capacity));
            }
        }
        Ok(())
    });
}

/// Every NAND circuit with the given number of inputs and gates, output
/// fixed to the last gate.
fn all_circuits(inputs: usize, gates: usize) -> Vec<SatCircuit> {
    let mut circuits = vec![Vec::new()];
    for j in 0..gates {
        let operands: Vec<Operand> = (0..inputs)
            .map(Operand::Input)
            .chain((0..j).map(Operand::Gate))
            .collect();
        let mut extended = Vec::new();
        for prefix in &circuits {
            for &a in &operands {
                for &b in &operands {
                    let mut next: Vec<(Operand, Operand)> = prefix.clone();
                    next.push((a, b));
                    extended.push(next);
                }
            }
        }
        circuits = extended;
    }
    circuits
        .into_iter()
        .map(|gate_list| SatCircuit {
            inputs,
            gates: gate_list,
            output: gates - 1,
        })
        .collect()
}

#[test]
fn criterion_6_sat_reduction_exhaustive() {
    criterion(6, "NAND reduction vs truth table", || {
        for inputs in 1..=2usize {
            for gates in 1..=3usize {
                for c in all_circuits(inputs, gates) {
                    let satisfiable = truth_table_sat(&c)
                        .map_err(|e| e.to_string())?
                        .is_some();
                    let (net, initial, target) = sat_to_net(&c).map_err(|e| e.to_string())?;
                    net.is_non_forgetting()
                        .map_err(|w| format!("reduction is forgetting: {w:?}"))?;
                    let found = find_certificate(&net, &initial, &target, 1_000_000)
                        .map_err(|e| format!("{c:?}: {e}"))?;
                    if found.is_some() != satisfiable {
                        return Err(format!(
                            "{c:?}: reduction says {}, truth table says {satisfiable}",
                            found.is_some()
                        ));
                    }
                }
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_7_witness_validity() {
    criterion(7, "near-miss witness validity", || {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut checked = 0usize;
        while checked < WITNESS_CASES {
            let n = rng.gen_range(1..=8usize);
            let limit: u64 = if rng.gen_bool(0.5) { 10 } else { 5_000 };
            let m = Marking::new((0..n).map(|_| rng.gen_range(0..=limit)).collect());
            let m2 = Marking::new((0..n).map(|_| rng.gen_range(0..=limit)).collect());
            let fast = is_near_miss(&m, &m2);
            if let Some(w) = &fast {
                if !w.is_valid(&m, &m2) {
                    return Err(format!("invalid witness {w:?} for {m:?} {m2:?}"));
                }
            }
            let slow = exhaustive_near_miss(&m, &m2).map_err(|e| e.to_string())?;
            if fast.is_some() != slow.is_some() {
                return Err(format!("fast {fast:?} vs exhaustive {slow:?} on {m:?} {m2:?}"));
            }
            checked += 1;
        }
        Ok(())
    });
}

#[test]
fn criterion_8_scaling_smoke() {
    criterion(8, "token-count scaling", || {
        let measure = |scale: u64| {
            let (net, _, _) = enzyme();
            let m = Marking::new(vec![200 * scale, 0, 400 * scale, 0, 0]);
            let m2 = Marking::new(vec![0, 200 * scale, 0, 400 * scale, 0]);
            (0..15)
                .map(|_| {
                    let start = Instant::now();
                    let verdict = decide_reachability(&net, &m, &m2);
                    assert!(matches!(verdict, Verdict::Reachable(_)));
                    start.elapsed()
                })
                .min()
                .unwrap()
        };
        let base = measure(1);
        let scaled = measure(SCALING_FACTOR);
        let ratio = scaled.as_secs_f64() / base.as_secs_f64().max(1e-9);
        if ratio > SCALING_SLOWDOWN_LIMIT {
            return Err(format!(
                "x{SCALING_FACTOR} tokens slowed the analysis {ratio:.2}x \
                 (base {base:?}, scaled {scaled:?}), limit {SCALING_SLOWDOWN_LIMIT}x"
            ));
        }
        Ok(())
    });
}

/// Replay conservation: accelerated sequences preserve the token count on
/// random nets. Counts toward the randomized validity budget of criterion 7
/// but kept separate so a failure points at the firing rule.
#[test]
fn random_firing_preserves_token_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(7_001);
    for _ in 0..2_000 {
        let (net, from, _) = random_instance(&mut rng);
        let mut m = from.clone();
        let mut seq = AcceleratedSequence::empty();
        for _ in 0..20 {
            let enabled: Vec<usize> = (0..net.transitions().len())
                .filter(|&t| net.is_enabled(&m, ionet::TransitionId(t)))
                .collect();
            if enabled.is_empty() {
                break;
            }
            let t = ionet::TransitionId(enabled[rng.gen_range(0..enabled.len())]);
            m = net.fire(&m, t).unwrap();
            seq.push(t, 1);
            assert_eq!(m.size(), from.size(), "firing changed the token count");
        }
        assert_eq!(replay(&net, &from, &seq).unwrap(), m);
    }
}
