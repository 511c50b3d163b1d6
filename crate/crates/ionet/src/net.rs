//! IO net data model and single-step firing semantics.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Index of a place in the net's dense place list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlaceId(pub usize);

/// Index of a transition in the net's transition list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransitionId(pub usize);

impl fmt::Display for PlaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// An immediate observation transition: one token moves from `source` to
/// `destination` while a token in `observed` (if any) is read but not moved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IOTransition {
    pub name: String,
    pub source: PlaceId,
    pub destination: PlaceId,
    pub observed: Option<PlaceId>,
}

/// An ordered pair of places (source, destination) of some transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenMove {
    pub from: PlaceId,
    pub to: PlaceId,
}

/// A Petri net whose transitions are all IO transitions by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IONet {
    place_names: Vec<String>,
    transitions: Vec<IOTransition>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetError {
    #[error("duplicate place name `{0}`")]
    DuplicatePlace(String),
    #[error("duplicate transition name `{0}`")]
    DuplicateTransition(String),
    #[error("place index {0} out of range (net has {1} places)")]
    UnknownPlace(usize, usize),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FireError {
    #[error("transition {transition} is not enabled at marking {marking:?}")]
    NotEnabled {
        transition: String,
        marking: Vec<u64>,
    },
}

impl IONet {
    pub fn new(place_names: Vec<String>) -> Result<Self, NetError> {
        let mut seen = BTreeSet::new();
        for name in &place_names {
            if !seen.insert(name.clone()) {
                return Err(NetError::DuplicatePlace(name.clone()));
            }
        }
        Ok(IONet {
            place_names,
            transitions: Vec::new(),
        })
    }

    pub fn add_transition(
        &mut self,
        name: impl Into<String>,
        source: PlaceId,
        destination: PlaceId,
        observed: Option<PlaceId>,
    ) -> Result<TransitionId, NetError> {
        let name = name.into();
        if self.transitions.iter().any(|t| t.name == name) {
            return Err(NetError::DuplicateTransition(name));
        }
        for p in [Some(source), Some(destination), observed].into_iter().flatten() {
            if p.0 >= self.place_names.len() {
                return Err(NetError::UnknownPlace(p.0, self.place_names.len()));
            }
        }
        self.transitions.push(IOTransition {
            name,
            source,
            destination,
            observed,
        });
        Ok(TransitionId(self.transitions.len() - 1))
    }

    pub fn place_count(&self) -> usize {
        self.place_names.len()
    }

    pub fn place_name(&self, p: PlaceId) -> &str {
        &self.place_names[p.0]
    }

    pub fn place_names(&self) -> &[String] {
        &self.place_names
    }

    pub fn place_id(&self, name: &str) -> Option<PlaceId> {
        self.place_names.iter().position(|n| n == name).map(PlaceId)
    }

    pub fn places(&self) -> impl Iterator<Item = PlaceId> {
        (0..self.place_names.len()).map(PlaceId)
    }

    pub fn transitions(&self) -> &[IOTransition] {
        &self.transitions
    }

    pub fn transition(&self, t: TransitionId) -> &IOTransition {
        &self.transitions[t.0]
    }

    pub fn transition_id(&self, name: &str) -> Option<TransitionId> {
        self.transitions
            .iter()
            .position(|t| t.name == name)
            .map(TransitionId)
    }

    /// Rewrites the net so every transition formally observes some place:
    /// unobserved transitions get a fresh always-marked auxiliary place.
    /// Use [`IONet::lift_marking`] to carry markings over.
    pub fn desugar_unobserved(&self) -> IONet {
        let mut names = self.place_names.clone();
        let aux = PlaceId(names.len());
        names.push("_aux".to_string());
        let mut net = IONet::new(names).expect("place names stay unique");
        for t in &self.transitions {
            net.add_transition(
                t.name.clone(),
                t.source,
                t.destination,
                Some(t.observed.unwrap_or(aux)),
            )
            .expect("transition names stay unique");
        }
        net
    }

    /// Extends a marking of this net to the desugared net: one token in the
    /// auxiliary place.
    pub fn lift_marking(&self, m: &Marking) -> Marking {
        let mut counts = m.counts().to_vec();
        counts.push(1);
        Marking::new(counts)
    }

    /// Fires transition `t` once. The preset is the multiset
    /// {source, observed}: when source and observed coincide the place needs
    /// two tokens.
    pub fn fire(&self, m: &Marking, t: TransitionId) -> Result<Marking, FireError> {
        let tr = &self.transitions[t.0];
        if !self.is_enabled(m, t) {
            return Err(FireError::NotEnabled {
                transition: tr.name.clone(),
                marking: m.counts().to_vec(),
            });
        }
        let mut counts = m.counts().to_vec();
        counts[tr.source.0] -= 1;
        counts[tr.destination.0] += 1;
        Ok(Marking::new(counts))
    }

    pub fn is_enabled(&self, m: &Marking, t: TransitionId) -> bool {
        let tr = &self.transitions[t.0];
        let mut need_source = 1;
        if let Some(o) = tr.observed {
            if o == tr.source {
                need_source = 2;
            } else if m.get(o) < 1 {
                return false;
            }
        }
        m.get(tr.source) >= need_source
    }

    /// Token moves enabled at `m`: all (source, destination) pairs of
    /// transitions whose observed place is marked, or which are unobserved.
    /// Note that the source place need not be marked.
    pub fn enabled_token_moves(&self, m: &Marking) -> BTreeSet<TokenMove> {
        let mut moves = BTreeSet::new();
        for t in &self.transitions {
            let open = match t.observed {
                None => true,
                Some(o) => m.get(o) >= 1,
            };
            if open {
                moves.insert(TokenMove {
                    from: t.source,
                    to: t.destination,
                });
            }
        }
        moves
    }

    /// Checks the non-forgetting property: for transitions p -r-> q and
    /// r -s-> r' there must be a transition p -r'-> q. An unobserved p -> q
    /// transition discharges every obligation for the pair (p, q) since its
    /// move is enabled at every marking.
    pub fn is_non_forgetting(&self) -> Result<(), ForgettingWitness> {
        for (i, t) in self.transitions.iter().enumerate() {
            let r = match t.observed {
                Some(r) => r,
                None => continue,
            };
            if self.has_unobserved_move(t.source, t.destination) {
                continue;
            }
            for (j, mover) in self.transitions.iter().enumerate() {
                if mover.source != r {
                    continue;
                }
                let replacement = mover.destination;
                if !self.has_transition_observing(t.source, t.destination, replacement) {
                    return Err(ForgettingWitness {
                        observing: TransitionId(i),
                        mover: TransitionId(j),
                        missing: (t.source, replacement, t.destination),
                    });
                }
            }
        }
        Ok(())
    }

    fn has_unobserved_move(&self, from: PlaceId, to: PlaceId) -> bool {
        self.transitions
            .iter()
            .any(|t| t.source == from && t.destination == to && t.observed.is_none())
    }

    fn has_transition_observing(&self, from: PlaceId, to: PlaceId, obs: PlaceId) -> bool {
        self.transitions
            .iter()
            .any(|t| t.source == from && t.destination == to && t.observed == Some(obs))
    }

    /// Minimal superset of this net's transitions satisfying
    /// [`IONet::is_non_forgetting`]. Added transitions observe the place the
    /// observed token moved to.
    pub fn non_forgetting_closure(&self) -> IONet {
        let mut net = self.clone();
        let mut fresh = 0usize;
        while let Err(w) = net.is_non_forgetting() {
            let (from, obs, to) = w.missing;
            let name = loop {
                let candidate = format!("nf{fresh}");
                fresh += 1;
                if net.transition_id(&candidate).is_none() {
                    break candidate;
                }
            };
            net.add_transition(name, from, to, Some(obs))
                .expect("closure only adds in-range places");
        }
        net
    }
}

/// Violation of the non-forgetting property: firing `mover` moves the token
/// observed by `observing` and no transition `missing` replaces the move.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForgettingWitness {
    pub observing: TransitionId,
    pub mover: TransitionId,
    /// (source, observed, destination) of the missing transition.
    pub missing: (PlaceId, PlaceId, PlaceId),
}

/// A multiset of tokens over the places of a net.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Marking(Vec<u64>);

impl Marking {
    pub fn new(counts: Vec<u64>) -> Self {
        Marking(counts)
    }

    pub fn zero(places: usize) -> Self {
        Marking(vec![0; places])
    }

    pub fn get(&self, p: PlaceId) -> u64 {
        self.0[p.0]
    }

    pub fn set(&mut self, p: PlaceId, count: u64) {
        self.0[p.0] = count;
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total token count |M|.
    pub fn size(&self) -> u64 {
        self.0.iter().sum()
    }

    /// Sum of counts over a set of places, M(X).
    pub fn sum_over<'a>(&self, places: impl IntoIterator<Item = &'a PlaceId>) -> u64 {
        places.into_iter().map(|p| self.get(*p)).sum()
    }
}

impl From<Vec<u64>> for Marking {
    fn from(counts: Vec<u64>) -> Self {
        Marking(counts)
    }
}
