//! Accelerated firing sequences and token-trajectory histories.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::net::{IONet, Marking, PlaceId, TransitionId};

/// A firing sequence compressed to (transition, repetition count) steps.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AcceleratedSequence {
    pub steps: Vec<(TransitionId, u64)>,
}

impl AcceleratedSequence {
    pub fn empty() -> Self {
        AcceleratedSequence { steps: Vec::new() }
    }

    /// Appends a step, merging it with the last step if it repeats the same
    /// transition.
    pub fn push(&mut self, t: TransitionId, count: u64) {
        if count == 0 {
            return;
        }
        if let Some(last) = self.steps.last_mut() {
            if last.0 == t {
                last.1 += count;
                return;
            }
        }
        self.steps.push((t, count));
    }

    pub fn extend(&mut self, other: &AcceleratedSequence) {
        for &(t, k) in &other.steps {
            self.push(t, k);
        }
    }

    /// Total number of individual firings.
    pub fn firing_count(&self) -> u64 {
        self.steps.iter().map(|&(_, k)| k).sum()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("replay failed at step {step}, firing {firing}")]
    Failed { step: usize, firing: u64 },
}

/// Replays an accelerated sequence from `start`. A step (t, k) succeeds iff
/// firing t sequentially k times succeeds; the check is closed-form so the
/// cost per step does not depend on k.
pub fn replay(
    net: &IONet,
    start: &Marking,
    seq: &AcceleratedSequence,
) -> Result<Marking, ReplayError> {
    let mut m = start.clone();
    for (step, &(t, k)) in seq.steps.iter().enumerate() {
        if k == 0 {
            continue;
        }
        if let Some(firing) = first_failing_firing(net, &m, t, k) {
            return Err(ReplayError::Failed { step, firing });
        }
        let tr = net.transition(t);
        if tr.source != tr.destination {
            let mut counts = m.counts().to_vec();
            counts[tr.source.0] -= k;
            counts[tr.destination.0] += k;
            m = Marking::new(counts);
        }
    }
    Ok(m)
}

/// 1-based index of the first firing of `t` that is not enabled when firing
/// k times sequentially from `m`, or None when all k firings succeed. Case
/// analysis over coincidences among source, destination and observed place.
fn first_failing_firing(net: &IONet, m: &Marking, t: TransitionId, k: u64) -> Option<u64> {
    let tr = net.transition(t);
    let s = m.get(tr.source);
    if tr.source == tr.destination {
        // The marking never changes, so only the first firing can fail.
        let enabled = match tr.observed {
            None => s >= 1,
            Some(o) if o == tr.source => s >= 2,
            Some(o) => s >= 1 && m.get(o) >= 1,
        };
        return if enabled { None } else { Some(1) };
    }
    match tr.observed {
        None => (s < k).then(|| s + 1),
        Some(o) if o == tr.source => {
            // Firing i needs s - (i - 1) >= 2 tokens in the source.
            if s > k {
                None
            } else {
                Some(s.max(1))
            }
        }
        Some(o) if o == tr.destination => {
            if m.get(o) == 0 {
                Some(1)
            } else {
                (s < k).then(|| s + 1)
            }
        }
        Some(o) => {
            if m.get(o) == 0 {
                Some(1)
            } else {
                (s < k).then(|| s + 1)
            }
        }
    }
}

/// A multiset of equal-length place trajectories, stored with
/// multiplicities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct History {
    trajectories: Vec<(Vec<PlaceId>, u64)>,
    length: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HistoryError {
    #[error("history must contain at least one trajectory")]
    Empty,
    #[error("trajectory {0} has length {1}, expected {2}")]
    LengthMismatch(usize, usize, usize),
    #[error("trajectory multiplicities must be positive")]
    ZeroMultiplicity,
}

impl History {
    pub fn new(trajectories: Vec<(Vec<PlaceId>, u64)>) -> Result<Self, HistoryError> {
        let length = trajectories.first().ok_or(HistoryError::Empty)?.0.len();
        if length == 0 {
            return Err(HistoryError::Empty);
        }
        for (i, (traj, mult)) in trajectories.iter().enumerate() {
            if traj.len() != length {
                return Err(HistoryError::LengthMismatch(i, traj.len(), length));
            }
            if *mult == 0 {
                return Err(HistoryError::ZeroMultiplicity);
            }
        }
        Ok(History {
            trajectories,
            length,
        })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn trajectories(&self) -> &[(Vec<PlaceId>, u64)] {
        &self.trajectories
    }

    /// The i-th marking of the history (1-based, 1 <= i <= length).
    pub fn marking_at(&self, i: usize, places: usize) -> Marking {
        let mut m = Marking::zero(places);
        for (traj, mult) in &self.trajectories {
            let p = traj[i - 1];
            m.set(p, m.get(p) + mult);
        }
        m
    }

    pub fn initial_marking(&self, places: usize) -> Marking {
        self.marking_at(1, places)
    }

    pub fn final_marking(&self, places: usize) -> Marking {
        self.marking_at(self.length, places)
    }
}

/// Why a history step cannot be realized by a single transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RealizabilityDefect {
    /// Two trajectories take different non-horizontal moves at this step.
    MixedMoves,
    /// No transition of the net has the step's (source, destination) pair.
    NoRealizingTransition,
    /// Transitions exist, but none has a resting token in its observed place.
    ObserverMissing,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RealizeError {
    #[error("history step {step} is not realizable ({defect:?})")]
    NotRealizable {
        step: usize,
        defect: RealizabilityDefect,
    },
}

/// Checks that each step of the history is realized by a single transition
/// fired once per moving trajectory, with a resting observer token where the
/// transition observes a place. Returns the realizing accelerated sequence.
pub fn check_history_realizable(
    net: &IONet,
    history: &History,
) -> Result<AcceleratedSequence, RealizeError> {
    let mut seq = AcceleratedSequence::empty();
    for step in 1..history.length() {
        // Resting places: places hosting a horizontal trajectory this step.
        let mut resting: BTreeMap<PlaceId, u64> = BTreeMap::new();
        let mut mv: Option<(PlaceId, PlaceId)> = None;
        let mut moving = 0u64;
        for (traj, mult) in history.trajectories() {
            let (a, b) = (traj[step - 1], traj[step]);
            if a == b {
                *resting.entry(a).or_insert(0) += mult;
            } else {
                match mv {
                    None => mv = Some((a, b)),
                    Some(pair) if pair == (a, b) => {}
                    Some(_) => {
                        return Err(RealizeError::NotRealizable {
                            step,
                            defect: RealizabilityDefect::MixedMoves,
                        })
                    }
                }
                moving += mult;
            }
        }
        let (src, dst) = match mv {
            None => continue, // all horizontal, k_i = 0
            Some(pair) => pair,
        };
        let mut candidates = net
            .transitions()
            .iter()
            .enumerate()
            .filter(|(_, t)| t.source == src && t.destination == dst)
            .peekable();
        if candidates.peek().is_none() {
            return Err(RealizeError::NotRealizable {
                step,
                defect: RealizabilityDefect::NoRealizingTransition,
            });
        }
        let realizer = candidates.find(|(_, t)| match t.observed {
            None => true,
            Some(o) => resting.get(&o).copied().unwrap_or(0) >= 1,
        });
        match realizer {
            Some((i, _)) => seq.push(TransitionId(i), moving),
            None => {
                return Err(RealizeError::NotRealizable {
                    step,
                    defect: RealizabilityDefect::ObserverMissing,
                })
            }
        }
    }
    Ok(seq)
}
