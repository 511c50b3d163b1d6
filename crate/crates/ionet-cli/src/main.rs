//! Command line front end for the ionet reachability analyzer.
//!
//! Reports are deterministic `key: value` lines. Artifact sections start
//! with a `# --- name ---` marker so they can be cut out and fed back into
//! the matching validate or verify subcommand. `--json` switches the whole
//! report to a single JSON object with stable field names.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::exit;

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use ionet::format::{
    parse_certificate, parse_circuit, parse_history, parse_net_file, parse_sequence,
    print_certificate, print_history, print_net_file, print_sequence, NetFile,
};
use ionet::history::{check_history_realizable, replay};
use ionet::nearmiss::{analyze, is_near_miss, restriction_flow_graph, stabilize, StabilizeOutcome};
use ionet::nonforgetting::{find_certificate, sat_to_net, verify_certificate, SearchError};
use ionet::oracle::{bfs_reach, ReachOutcome, DEFAULT_BUDGET};
use ionet::{
    AcceleratedSequence, Capacity, Cut, History, IONet, Marking, NearMissWitness, RestrictionSet,
};

#[derive(Parser)]
#[command(name = "ionet", about = "Reachability analysis for immediate observation nets")]
struct Cli {
    /// Print machine-readable JSON instead of the line report.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide reachability between two named markings of a net file.
    ///
    /// Exit code 0: reachable, 1: unreachable, 2: near-miss pair.
    Check {
        net: PathBuf,
        from: String,
        to: String,
        /// Append the firing sequence as an artifact section.
        #[arg(long)]
        emit_sequence: bool,
        /// Append the token history as an artifact section.
        #[arg(long)]
        emit_history: bool,
        /// Append the near-miss witness or cut as an artifact section.
        #[arg(long)]
        emit_witness: bool,
    },
    /// Verify a phase certificate against a non-forgetting net.
    ///
    /// Exit code 0: accepted, 1: rejected.
    VerifyCert { net: PathBuf, cert: PathBuf },
    /// Search for a phase certificate between two named markings.
    ///
    /// Exit code 0: found, 1: none exists, 3: budget exhausted.
    FindCert {
        net: PathBuf,
        from: String,
        to: String,
        #[arg(long, default_value_t = 100_000)]
        budget: usize,
    },
    /// Translate a NAND circuit into a net whose `target` marking is
    /// reachable from `initial` iff the circuit is satisfiable.
    GenSat { circuit: PathBuf },
    /// Explicit-state breadth-first search, for cross-checking.
    ///
    /// Exit code 0: reachable, 1: unreachable, 3: budget exhausted.
    Oracle {
        net: PathBuf,
        from: String,
        to: String,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Print the non-forgetting closure of a net, markings included.
    Closure { net: PathBuf },
    /// Replay a firing sequence and compare the end against a marking.
    ///
    /// Exit code 0: valid, 1: invalid.
    ValidateSequence {
        net: PathBuf,
        from: String,
        to: String,
        sequence: PathBuf,
    },
    /// Check a token history for realizability and endpoints.
    ///
    /// Exit code 0: valid, 1: invalid.
    ValidateHistory {
        net: PathBuf,
        from: String,
        to: String,
        history: PathBuf,
    },
    /// Look for a near-miss witness between two named markings.
    ///
    /// Exit code 0: witness found, 1: none.
    NearMiss {
        net: PathBuf,
        from: String,
        to: String,
    },
    /// Print the place-copy flow graph between two markings in DOT format.
    Dot {
        net: PathBuf,
        from: String,
        to: String,
        /// Use the stabilized restriction set instead of the empty one.
        #[arg(long)]
        stable: bool,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => exit(code),
        Err(message) => {
            eprintln!("error: {message}");
            exit(64);
        }
    }
}

fn run(cli: &Cli) -> Result<i32, String> {
    match &cli.command {
        Command::Check {
            net,
            from,
            to,
            emit_sequence,
            emit_history,
            emit_witness,
        } => check(
            cli.json,
            net,
            from,
            to,
            *emit_sequence,
            *emit_history,
            *emit_witness,
        ),
        Command::VerifyCert { net, cert } => verify_cert(cli.json, net, cert),
        Command::FindCert {
            net,
            from,
            to,
            budget,
        } => find_cert(cli.json, net, from, to, *budget),
        Command::GenSat { circuit } => gen_sat(cli.json, circuit),
        Command::Oracle {
            net,
            from,
            to,
            budget,
        } => oracle(cli.json, net, from, to, *budget),
        Command::Closure { net } => closure(cli.json, net),
        Command::ValidateSequence {
            net,
            from,
            to,
            sequence,
        } => validate_sequence(cli.json, net, from, to, sequence),
        Command::ValidateHistory {
            net,
            from,
            to,
            history,
        } => validate_history(cli.json, net, from, to, history),
        Command::NearMiss { net, from, to } => near_miss(cli.json, net, from, to),
        Command::Dot {
            net,
            from,
            to,
            stable,
        } => dot(cli.json, net, from, to, *stable),
    }
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_net(path: &Path) -> Result<NetFile, String> {
    let text = read(path)?;
    parse_net_file(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn named_marking(file: &NetFile, path: &Path, name: &str) -> Result<Marking, String> {
    file.marking(name)
        .cloned()
        .ok_or_else(|| format!("{}: no marking named `{name}`", path.display()))
}

fn place_names(net: &IONet, places: &[ionet::PlaceId]) -> Vec<Value> {
    places
        .iter()
        .map(|&p| Value::String(net.place_name(p).to_string()))
        .collect()
}

fn sequence_json(net: &IONet, seq: &AcceleratedSequence) -> Value {
    let steps: Vec<Value> = seq
        .steps
        .iter()
        .map(|&(t, k)| json!({ "transition": net.transition(t).name, "count": k }))
        .collect();
    json!({ "steps": steps, "firings": seq.firing_count() })
}

fn marking_json(net: &IONet, m: &Marking) -> Value {
    let mut map = Map::new();
    for p in net.places() {
        if m.get(p) != 0 {
            map.insert(net.place_name(p).to_string(), json!(m.get(p)));
        }
    }
    Value::Object(map)
}

fn witness_json(net: &IONet, w: &NearMissWitness) -> Value {
    json!({
        "x": place_names(net, &w.x),
        "y": place_names(net, &w.y),
        "delta": w.delta.to_string(),
    })
}

fn history_json(net: &IONet, h: &History) -> Value {
    let trajectories: Vec<Value> = h
        .trajectories()
        .iter()
        .map(|(traj, mult)| json!({ "places": place_names(net, traj), "multiplicity": mult }))
        .collect();
    Value::Array(trajectories)
}

fn triples_json(net: &IONet, r: &RestrictionSet) -> Value {
    let triples: Vec<Value> = r
        .allowed_triples()
        .iter()
        .map(|t| {
            json!([
                net.place_name(t.p),
                net.place_name(t.r),
                net.place_name(t.q)
            ])
        })
        .collect();
    Value::Array(triples)
}

/// Vertex label in the place-copy flow graph: inlet, initial and final
/// copies of each place, outlet.
fn copy_label(net: &IONet, v: usize) -> String {
    let n = net.place_count();
    match v {
        0 => "i".into(),
        v if v <= n => format!("{}_i", net.place_name(ionet::PlaceId(v - 1))),
        v if v <= 2 * n => format!("{}_f", net.place_name(ionet::PlaceId(v - 1 - n))),
        _ => "o".into(),
    }
}

fn cut_json(net: &IONet, cut: &Cut) -> Value {
    let side = |vs: &std::collections::BTreeSet<usize>| -> Vec<Value> {
        vs.iter()
            .map(|&v| Value::String(copy_label(net, v)))
            .collect()
    };
    json!({
        "v_in": side(&cut.v_in),
        "v_out": side(&cut.v_out),
        "capacity": cut.capacity.to_string(),
    })
}

fn triples_line(net: &IONet, r: &RestrictionSet) -> String {
    let rendered: Vec<String> = r
        .allowed_triples()
        .iter()
        .map(|t| {
            format!(
                "({},{},{})",
                net.place_name(t.p),
                net.place_name(t.r),
                net.place_name(t.q)
            )
        })
        .collect();
    rendered.join(" ")
}

fn names_line(net: &IONet, places: &[ionet::PlaceId]) -> String {
    let rendered: Vec<&str> = places.iter().map(|&p| net.place_name(p)).collect();
    rendered.join(" ")
}

fn cut_side_line(net: &IONet, side: &std::collections::BTreeSet<usize>) -> String {
    let rendered: Vec<String> = side.iter().map(|&v| copy_label(net, v)).collect();
    rendered.join(" ")
}

fn emit_json(value: Value) {
    println!("{}", serde_json::to_string_pretty(&value).expect("json"));
}

#[allow(clippy::too_many_arguments)]
fn check(
    json_mode: bool,
    net_path: &Path,
    from: &str,
    to: &str,
    emit_sequence: bool,
    emit_history: bool,
    emit_witness: bool,
) -> Result<i32, String> {
    let file = load_net(net_path)?;
    let m = named_marking(&file, net_path, from)?;
    let m2 = named_marking(&file, net_path, to)?;
    let net = &file.net;
    let a = analyze(net, &m, &m2);
    let stable = match (&a.stable, &a.verdict) {
        (Some(r), _) => Some(r.clone()),
        (None, ionet::Verdict::Unreachable(r, _)) => Some(r.clone()),
        _ => None,
    };
    if json_mode {
        let mut obj = Map::new();
        if let Some(r) = &stable {
            obj.insert("allowed_triples".into(), triples_json(net, r));
        }
        match &a.verdict {
            ionet::Verdict::Reachable(seq) => {
                obj.insert("verdict".into(), json!("reachable"));
                obj.insert("sequence".into(), sequence_json(net, seq));
                if let Some(h) = &a.history {
                    obj.insert("history".into(), history_json(net, h));
                }
            }
            ionet::Verdict::Unreachable(_, cut) => {
                obj.insert("verdict".into(), json!("unreachable"));
                obj.insert("cut".into(), cut_json(net, cut));
            }
            ionet::Verdict::NearMiss(w) => {
                obj.insert("verdict".into(), json!("near-miss"));
                obj.insert("witness".into(), witness_json(net, w));
            }
        }
        emit_json(Value::Object(obj));
    } else {
        match &a.verdict {
            ionet::Verdict::Reachable(seq) => {
                println!("verdict: reachable");
                if let Some(r) = &stable {
                    println!("allowed-triples: {}", triples_line(net, r));
                }
                println!("sequence-firings: {}", seq.firing_count());
                if emit_sequence {
                    println!("# --- sequence ---");
                    print!("{}", print_sequence(net, seq));
                }
                if emit_history {
                    if let Some(h) = &a.history {
                        println!("# --- history ---");
                        print!("{}", print_history(net, h));
                    }
                }
            }
            ionet::Verdict::Unreachable(_, cut) => {
                println!("verdict: unreachable");
                if let Some(r) = &stable {
                    println!("allowed-triples: {}", triples_line(net, r));
                }
                println!("cut-capacity: {}", cut.capacity);
                if emit_witness {
                    println!("# --- cut ---");
                    println!("# v-in: {}", cut_side_line(net, &cut.v_in));
                    println!("# v-out: {}", cut_side_line(net, &cut.v_out));
                }
            }
            ionet::Verdict::NearMiss(w) => {
                println!("verdict: near-miss");
                if let Some(r) = &stable {
                    println!("allowed-triples: {}", triples_line(net, r));
                }
                println!("witness-x: {}", names_line(net, &w.x));
                println!("witness-y: {}", names_line(net, &w.y));
                println!("witness-delta: {}", w.delta);
                if emit_witness {
                    println!("# --- witness ---");
                    println!("# x: {}", names_line(net, &w.x));
                    println!("# y: {}", names_line(net, &w.y));
                    println!("# delta: {}", w.delta);
                }
            }
        }
    }
    Ok(match a.verdict {
        ionet::Verdict::Reachable(_) => 0,
        ionet::Verdict::Unreachable(..) => 1,
        ionet::Verdict::NearMiss(_) => 2,
    })
}

fn verify_cert(json_mode: bool, net_path: &Path, cert_path: &Path) -> Result<i32, String> {
    let file = load_net(net_path)?;
    let text = read(cert_path)?;
    let cert =
        parse_certificate(&file.net, &text).map_err(|e| format!("{}: {e}", cert_path.display()))?;
    match verify_certificate(&file.net, &cert) {
        Ok(seq) => {
            if json_mode {
                emit_json(json!({
                    "result": "accepted",
                    "sequence": sequence_json(&file.net, &seq),
                }));
            } else {
                println!("result: accepted");
                println!("sequence-firings: {}", seq.firing_count());
                println!("# --- sequence ---");
                print!("{}", print_sequence(&file.net, &seq));
            }
            Ok(0)
        }
        Err(e) => {
            if json_mode {
                emit_json(json!({ "result": "rejected", "reason": e.to_string() }));
            } else {
                println!("result: rejected");
                println!("reason: {e}");
            }
            Ok(1)
        }
    }
}

fn find_cert(
    json_mode: bool,
    net_path: &Path,
    from: &str,
    to: &str,
    budget: usize,
) -> Result<i32, String> {
    let file = load_net(net_path)?;
    let m = named_marking(&file, net_path, from)?;
    let m2 = named_marking(&file, net_path, to)?;
    match find_certificate(&file.net, &m, &m2, budget) {
        Ok(Some(cert)) => {
            if json_mode {
                let markings: Vec<Value> = cert
                    .markings
                    .iter()
                    .map(|m| marking_json(&file.net, m))
                    .collect();
                emit_json(json!({ "result": "found", "certificate": markings }));
            } else {
                println!("result: found");
                println!("phases: {}", cert.markings.len().saturating_sub(1));
                println!("# --- certificate ---");
                print!("{}", print_certificate(&file.net, &cert));
            }
            Ok(0)
        }
        Ok(None) => {
            if json_mode {
                emit_json(json!({ "result": "none" }));
            } else {
                println!("result: none");
            }
            Ok(1)
        }
        Err(SearchError::BudgetExceeded { explored }) => {
            if json_mode {
                emit_json(json!({ "result": "budget-exceeded", "explored": explored }));
            } else {
                println!("result: budget-exceeded");
                println!("explored: {explored}");
            }
            Ok(3)
        }
        Err(e) => Err(format!("{}: {e}", net_path.display())),
    }
}

fn gen_sat(json_mode: bool, circuit_path: &Path) -> Result<i32, String> {
    let text = read(circuit_path)?;
    let circuit = parse_circuit(&text).map_err(|e| format!("{}: {e}", circuit_path.display()))?;
    let (net, initial, target) =
        sat_to_net(&circuit).map_err(|e| format!("{}: {e}", circuit_path.display()))?;
    let file = NetFile {
        net,
        markings: vec![("initial".into(), initial), ("target".into(), target)],
    };
    if json_mode {
        emit_json(json!({
            "places": file.net.place_count(),
            "transitions": file.net.transitions().len(),
            "net": print_net_file(&file),
        }));
    } else {
        print!("{}", print_net_file(&file));
    }
    Ok(0)
}

fn oracle(
    json_mode: bool,
    net_path: &Path,
    from: &str,
    to: &str,
    budget: usize,
) -> Result<i32, String> {
    let file = load_net(net_path)?;
    let m = named_marking(&file, net_path, from)?;
    let m2 = named_marking(&file, net_path, to)?;
    match bfs_reach(&file.net, &m, &m2, budget) {
        ReachOutcome::Reachable(seq) => {
            if json_mode {
                emit_json(json!({
                    "result": "reachable",
                    "sequence": sequence_json(&file.net, &seq),
                }));
            } else {
                println!("result: reachable");
                println!("sequence-firings: {}", seq.firing_count());
                println!("# --- sequence ---");
                print!("{}", print_sequence(&file.net, &seq));
            }
            Ok(0)
        }
        ReachOutcome::Unreachable => {
            if json_mode {
                emit_json(json!({ "result": "unreachable" }));
            } else {
                println!("result: unreachable");
            }
            Ok(1)
        }
        ReachOutcome::BudgetExceeded => {
            if json_mode {
                emit_json(json!({ "result": "budget-exceeded" }));
            } else {
                println!("result: budget-exceeded");
            }
            Ok(3)
        }
    }
}

fn closure(json_mode: bool, net_path: &Path) -> Result<i32, String> {
    let file = load_net(net_path)?;
    let before = file.net.transitions().len();
    let closed = NetFile {
        net: file.net.non_forgetting_closure(),
        markings: file.markings,
    };
    let added = closed.net.transitions().len() - before;
    if json_mode {
        emit_json(json!({
            "added_transitions": added,
            "net": print_net_file(&closed),
        }));
    } else {
        println!("# non-forgetting closure, {added} transitions added");
        print!("{}", print_net_file(&closed));
    }
    Ok(0)
}

fn validate_sequence(
    json_mode: bool,
    net_path: &Path,
    from: &str,
    to: &str,
    seq_path: &Path,
) -> Result<i32, String> {
    let file = load_net(net_path)?;
    let m = named_marking(&file, net_path, from)?;
    let m2 = named_marking(&file, net_path, to)?;
    let text = read(seq_path)?;
    let seq =
        parse_sequence(&file.net, &text).map_err(|e| format!("{}: {e}", seq_path.display()))?;
    let reason = match replay(&file.net, &m, &seq) {
        Err(e) => Some(e.to_string()),
        Ok(end) if end != m2 => Some("end marking differs from the target".into()),
        Ok(_) => None,
    };
    report_validation(json_mode, reason, seq.firing_count())
}

fn validate_history(
    json_mode: bool,
    net_path: &Path,
    from: &str,
    to: &str,
    hist_path: &Path,
) -> Result<i32, String> {
    let file = load_net(net_path)?;
    let m = named_marking(&file, net_path, from)?;
    let m2 = named_marking(&file, net_path, to)?;
    let text = read(hist_path)?;
    let history =
        parse_history(&file.net, &text).map_err(|e| format!("{}: {e}", hist_path.display()))?;
    let n = file.net.place_count();
    let (reason, firings) = match check_history_realizable(&file.net, &history) {
        Err(e) => (Some(e.to_string()), 0),
        Ok(_) if history.initial_marking(n) != m => {
            (Some("history starts off the source marking".into()), 0)
        }
        Ok(_) if history.final_marking(n) != m2 => {
            (Some("history ends off the target marking".into()), 0)
        }
        Ok(seq) => (None, seq.firing_count()),
    };
    report_validation(json_mode, reason, firings)
}

fn report_validation(
    json_mode: bool,
    reason: Option<String>,
    firings: u64,
) -> Result<i32, String> {
    match reason {
        None => {
            if json_mode {
                emit_json(json!({ "result": "valid", "firings": firings }));
            } else {
                println!("result: valid");
                println!("firings: {firings}");
            }
            Ok(0)
        }
        Some(reason) => {
            if json_mode {
                emit_json(json!({ "result": "invalid", "reason": reason }));
            } else {
                println!("result: invalid");
                println!("reason: {reason}");
            }
            Ok(1)
        }
    }
}

fn near_miss(json_mode: bool, net_path: &Path, from: &str, to: &str) -> Result<i32, String> {
    let file = load_net(net_path)?;
    let m = named_marking(&file, net_path, from)?;
    let m2 = named_marking(&file, net_path, to)?;
    if m.len() != m2.len() {
        return Err(format!("{}: markings differ in place count", net_path.display()));
    }
    match is_near_miss(&m, &m2) {
        Some(w) => {
            if json_mode {
                emit_json(json!({
                    "result": "near-miss",
                    "witness": witness_json(&file.net, &w),
                }));
            } else {
                println!("result: near-miss");
                println!("witness-x: {}", names_line(&file.net, &w.x));
                println!("witness-y: {}", names_line(&file.net, &w.y));
                println!("witness-delta: {}", w.delta);
            }
            Ok(0)
        }
        None => {
            if json_mode {
                emit_json(json!({ "result": "none" }));
            } else {
                println!("result: none");
            }
            Ok(1)
        }
    }
}

fn dot(
    json_mode: bool,
    net_path: &Path,
    from: &str,
    to: &str,
    stable: bool,
) -> Result<i32, String> {
    let file = load_net(net_path)?;
    let m = named_marking(&file, net_path, from)?;
    let m2 = named_marking(&file, net_path, to)?;
    let net = &file.net;
    let r = if stable {
        if m.size() != m2.size() {
            return Err(format!(
                "{}: markings differ in size, nothing to stabilize",
                net_path.display()
            ));
        }
        match stabilize(net, &m, &m2) {
            StabilizeOutcome::Stable(r) | StabilizeOutcome::Unreachable(r, _) => r,
        }
    } else {
        RestrictionSet::none_forbidden(net.place_count())
    };
    let g = restriction_flow_graph(net, &m, &m2, &r)
        .map_err(|e| format!("{}: {e}", net_path.display()))?;
    let mut out = String::from("digraph flow {\n  rankdir=LR;\n");
    for v in 0..g.vertex_count() {
        out.push_str(&format!("  {v} [label=\"{}\"];\n", g.label(v)));
    }
    for arc in g.arcs() {
        let cap = match arc.capacity {
            Capacity::Finite(c) => c.to_string(),
            Capacity::Infinite => "inf".into(),
        };
        out.push_str(&format!("  {} -> {} [label=\"{cap}\"];\n", arc.from, arc.to));
    }
    out.push_str("}\n");
    if json_mode {
        emit_json(json!({ "dot": out }));
    } else {
        print!("{out}");
    }
    Ok(0)
}
