//! Line-oriented text formats for nets, markings, certificates, firing
//! sequences, histories and NAND circuits. '#' starts a comment; every
//! printer's output re-parses to an equal value.

use std::fmt::Write as _;

use thiserror::Error;

use crate::history::{AcceleratedSequence, History};
use crate::net::{IONet, Marking, PlaceId};
use crate::nonforgetting::{Operand, PhaseCertificate, SatCircuit};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown place `{name}`")]
    UnknownPlace { line: usize, name: String },
    #[error("line {line}: duplicate name `{name}`")]
    DuplicateName { line: usize, name: String },
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        message: message.into(),
    }
}

/// A parsed net file: the net plus its named markings, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetFile {
    pub net: IONet,
    pub markings: Vec<(String, Marking)>,
}

impl NetFile {
    pub fn marking(&self, name: &str) -> Option<&Marking> {
        self.markings
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
    }
}

/// Non-comment, non-blank lines with their 1-based line numbers.
fn meaningful_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn check_name(line: usize, name: &str) -> Result<(), ParseError> {
    let ok = !name.is_empty()
        && name != "-"
        && name != "->"
        && !name.contains([':', '=', '#']);
    if ok {
        Ok(())
    } else {
        Err(syntax(line, format!("invalid name `{name}`")))
    }
}

fn place(net: &IONet, line: usize, name: &str) -> Result<PlaceId, ParseError> {
    net.place_id(name).ok_or_else(|| ParseError::UnknownPlace {
        line,
        name: name.to_string(),
    })
}

/// Parses `p=3 q=1` pairs into a marking; omitted places count 0.
fn parse_counts(net: &IONet, line: usize, body: &str) -> Result<Marking, ParseError> {
    let mut m = Marking::zero(net.place_count());
    for token in body.split_whitespace() {
        let (name, count) = token
            .split_once('=')
            .ok_or_else(|| syntax(line, format!("expected `place=count`, found `{token}`")))?;
        let p = place(net, line, name)?;
        let count: u64 = count
            .parse()
            .map_err(|_| syntax(line, format!("invalid count `{count}`")))?;
        if m.get(p) != 0 {
            return Err(syntax(line, format!("place `{name}` listed twice")));
        }
        m.set(p, count);
    }
    Ok(m)
}

/// Parses the net format: a `places:` line, then `transition` and `marking`
/// lines in any order.
pub fn parse_net_file(text: &str) -> Result<NetFile, ParseError> {
    let mut net: Option<IONet> = None;
    let mut markings: Vec<(String, Marking)> = Vec::new();
    for (lineno, line) in meaningful_lines(text) {
        let (head, body) = line
            .split_once(':')
            .ok_or_else(|| syntax(lineno, "expected `keyword ...:`"))?;
        let head: Vec<&str> = head.split_whitespace().collect();
        match head.as_slice() {
            ["places"] => {
                if net.is_some() {
                    return Err(syntax(lineno, "duplicate `places:` line"));
                }
                let names: Vec<String> = body.split_whitespace().map(String::from).collect();
                if names.is_empty() {
                    return Err(syntax(lineno, "a net needs at least one place"));
                }
                for name in &names {
                    check_name(lineno, name)?;
                }
                net = Some(IONet::new(names).map_err(|e| ParseError::DuplicateName {
                    line: lineno,
                    name: e.to_string(),
                })?);
            }
            ["transition", name] => {
                check_name(lineno, name)?;
                let net = net
                    .as_mut()
                    .ok_or_else(|| syntax(lineno, "`places:` must come first"))?;
                let tokens: Vec<&str> = body.split_whitespace().collect();
                let (src, dst, obs) = match tokens.as_slice() {
                    [src, "->", dst, "obs", obs] => (*src, *dst, *obs),
                    _ => {
                        return Err(syntax(
                            lineno,
                            "expected `<src> -> <dst> obs <place-or-dash>`",
                        ))
                    }
                };
                let src = place(net, lineno, src)?;
                let dst = place(net, lineno, dst)?;
                let obs = match obs {
                    "-" => None,
                    name => Some(place(net, lineno, name)?),
                };
                net.add_transition(name.to_string(), src, dst, obs)
                    .map_err(|_| ParseError::DuplicateName {
                        line: lineno,
                        name: name.to_string(),
                    })?;
            }
            ["marking", name] => {
                check_name(lineno, name)?;
                let net = net
                    .as_ref()
                    .ok_or_else(|| syntax(lineno, "`places:` must come first"))?;
                if markings.iter().any(|(n, _)| n == name) {
                    return Err(ParseError::DuplicateName {
                        line: lineno,
                        name: name.to_string(),
                    });
                }
                markings.push((name.to_string(), parse_counts(net, lineno, body)?));
            }
            _ => return Err(syntax(lineno, format!("unrecognized line `{line}`"))),
        }
    }
    let net = net.ok_or_else(|| syntax(0, "missing `places:` line"))?;
    Ok(NetFile { net, markings })
}

pub fn print_net_file(file: &NetFile) -> String {
    let mut out = String::new();
    writeln!(out, "places: {}", file.net.place_names().join(" ")).unwrap();
    for t in file.net.transitions() {
        writeln!(
            out,
            "transition {}: {} -> {} obs {}",
            t.name,
            file.net.place_name(t.source),
            file.net.place_name(t.destination),
            t.observed
                .map(|o| file.net.place_name(o))
                .unwrap_or("-"),
        )
        .unwrap();
    }
    for (name, m) in &file.markings {
        writeln!(out, "marking {}: {}", name, print_counts(&file.net, m)).unwrap();
    }
    out
}

/// Prints the nonzero counts of a marking as `p=3 q=1`.
pub fn print_counts(net: &IONet, m: &Marking) -> String {
    net.places()
        .filter(|&p| m.get(p) != 0)
        .map(|p| format!("{}={}", net.place_name(p), m.get(p)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Certificate format: one marking per line, `p=4 q=1` style.
pub fn parse_certificate(net: &IONet, text: &str) -> Result<PhaseCertificate, ParseError> {
    let mut markings = Vec::new();
    for (lineno, line) in meaningful_lines(text) {
        markings.push(parse_counts(net, lineno, line)?);
    }
    if markings.is_empty() {
        return Err(syntax(0, "a certificate needs at least one marking"));
    }
    Ok(PhaseCertificate { markings })
}

pub fn print_certificate(net: &IONet, cert: &PhaseCertificate) -> String {
    let mut out = String::new();
    for m in &cert.markings {
        writeln!(out, "{}", print_counts(net, m)).unwrap();
    }
    out
}

/// Sequence format: `fire <transition> x<count>` per step.
pub fn parse_sequence(net: &IONet, text: &str) -> Result<AcceleratedSequence, ParseError> {
    let mut steps = Vec::new();
    for (lineno, line) in meaningful_lines(text) {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let (name, count) = match tokens.as_slice() {
            ["fire", name] => (*name, 1),
            ["fire", name, count] => {
                let digits = count
                    .strip_prefix('x')
                    .ok_or_else(|| syntax(lineno, format!("expected `x<count>`, found `{count}`")))?;
                let count = digits
                    .parse()
                    .map_err(|_| syntax(lineno, format!("invalid count `{digits}`")))?;
                (*name, count)
            }
            _ => return Err(syntax(lineno, "expected `fire <transition> x<count>`")),
        };
        let t = net
            .transition_id(name)
            .ok_or_else(|| syntax(lineno, format!("unknown transition `{name}`")))?;
        steps.push((t, count));
    }
    Ok(AcceleratedSequence { steps })
}

pub fn print_sequence(net: &IONet, seq: &AcceleratedSequence) -> String {
    let mut out = String::new();
    for &(t, k) in &seq.steps {
        writeln!(out, "fire {} x{}", net.transition(t).name, k).unwrap();
    }
    out
}

/// History format: `trajectory x<multiplicity>: p1 p2 ...` per trajectory.
pub fn parse_history(net: &IONet, text: &str) -> Result<History, ParseError> {
    let mut trajectories = Vec::new();
    let mut first_line = 0;
    for (lineno, line) in meaningful_lines(text) {
        if first_line == 0 {
            first_line = lineno;
        }
        let (head, body) = line
            .split_once(':')
            .ok_or_else(|| syntax(lineno, "expected `trajectory x<mult>: places...`"))?;
        let mult = head
            .split_whitespace()
            .collect::<Vec<_>>()
            .as_slice()
            .try_into()
            .ok()
            .and_then(|[kw, m]: [&str; 2]| (kw == "trajectory").then_some(m))
            .and_then(|m| m.strip_prefix('x'))
            .and_then(|m| m.parse::<u64>().ok())
            .ok_or_else(|| syntax(lineno, "expected `trajectory x<mult>: places...`"))?;
        let path = body
            .split_whitespace()
            .map(|name| place(net, lineno, name))
            .collect::<Result<Vec<_>, _>>()?;
        trajectories.push((path, mult));
    }
    History::new(trajectories).map_err(|e| syntax(first_line, e.to_string()))
}

pub fn print_history(net: &IONet, h: &History) -> String {
    let mut out = String::new();
    for (path, mult) in h.trajectories() {
        let places: Vec<&str> = path.iter().map(|&p| net.place_name(p)).collect();
        writeln!(out, "trajectory x{}: {}", mult, places.join(" ")).unwrap();
    }
    out
}

/// Circuit format: `inputs: n`, then `gate g<j> = NAND(a, b)` in index
/// order with operands `x<i>` or earlier `g<j>` (1-based), then
/// `output: g<k>`.
pub fn parse_circuit(text: &str) -> Result<SatCircuit, ParseError> {
    let mut inputs: Option<usize> = None;
    let mut gates: Vec<(Operand, Operand)> = Vec::new();
    let mut output: Option<usize> = None;
    let operand = |lineno: usize, token: &str, inputs: usize, gates: usize| {
        let err = || syntax(lineno, format!("invalid operand `{token}`"));
        if let Some(digits) = token.strip_prefix('x') {
            let index: usize = digits.parse().map_err(|_| err())?;
            if (1..=inputs).contains(&index) {
                return Ok(Operand::Input(index - 1));
            }
        } else if let Some(digits) = token.strip_prefix('g') {
            let index: usize = digits.parse().map_err(|_| err())?;
            if (1..=gates).contains(&index) {
                return Ok(Operand::Gate(index - 1));
            }
        }
        Err(err())
    };
    for (lineno, line) in meaningful_lines(text) {
        let (head, body) = line
            .split_once(':')
            .map(|(h, b)| (h.trim(), b.trim()))
            .unwrap_or((line, ""))
            .to_owned();
        match head {
            "inputs" => {
                inputs = Some(
                    body.parse()
                        .map_err(|_| syntax(lineno, format!("invalid input count `{body}`")))?,
                );
            }
            "output" => {
                let token = body;
                let digits = token.strip_prefix('g').unwrap_or("");
                let index: usize = digits
                    .parse()
                    .map_err(|_| syntax(lineno, format!("invalid output gate `{token}`")))?;
                if !(1..=gates.len()).contains(&index) {
                    return Err(syntax(lineno, format!("output gate `{token}` not defined")));
                }
                output = Some(index - 1);
            }
            _ => {
                let tokens: Vec<&str> = line
                    .split(|c: char| c.is_whitespace() || "=(),".contains(c))
                    .filter(|t| !t.is_empty())
                    .collect();
                let (name, a, b) = match tokens.as_slice() {
                    ["gate", name, "NAND", a, b] => (*name, *a, *b),
                    _ => return Err(syntax(lineno, format!("unrecognized line `{line}`"))),
                };
                let n = inputs.ok_or_else(|| syntax(lineno, "`inputs:` must come first"))?;
                if name != format!("g{}", gates.len() + 1) {
                    return Err(syntax(
                        lineno,
                        format!("gates must be named in order; expected `g{}`", gates.len() + 1),
                    ));
                }
                let a = operand(lineno, a, n, gates.len())?;
                let b = operand(lineno, b, n, gates.len())?;
                gates.push((a, b));
            }
        }
    }
    let c = SatCircuit {
        inputs: inputs.ok_or_else(|| syntax(0, "missing `inputs:` line"))?,
        gates,
        output: output.ok_or_else(|| syntax(0, "missing `output:` line"))?,
    };
    c.validate().map_err(|e| syntax(0, e.to_string()))?;
    Ok(c)
}

pub fn print_circuit(c: &SatCircuit) -> String {
    let mut out = String::new();
    writeln!(out, "inputs: {}", c.inputs).unwrap();
    let name = |op: Operand| match op {
        Operand::Input(i) => format!("x{}", i + 1),
        Operand::Gate(j) => format!("g{}", j + 1),
    };
    for (j, &(a, b)) in c.gates.iter().enumerate() {
        writeln!(out, "gate g{} = NAND({}, {})", j + 1, name(a), name(b)).unwrap();
    }
    writeln!(out, "output: g{}", c.output + 1).unwrap();
    out
}
