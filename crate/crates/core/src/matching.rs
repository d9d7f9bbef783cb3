//! Brute-force certification of allocations.
//!
//! Independently of the protocol, enumerate every bijection from agents to
//! the unchosen pieces that gives each agent at least its proportional
//! share. Two enumerators are provided: plain permutation search, and a
//! search that prunes with maximum bipartite matching on the acceptability
//! graph. They must agree.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::measures::eval_measure;
use crate::allocation::Valuations;
use crate::oracle::GuestId;
use crate::protocol::{PieceIndex, PieceList};
use crate::rational::Rational;

/// Largest agent count the enumerators accept.
pub const MAX_AGENTS: usize = 10;
/// Agent counts up to this use exhaustive search by default.
pub const EXHAUSTIVE_MAX: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchingError {
    #[error("{agents} agents exceeds the enumeration limit of {MAX_AGENTS}")]
    TooLarge { agents: usize },
    #[error("need {needed} pieces besides the chosen one, have {have}")]
    PieceCount { needed: usize, have: usize },
    #[error("chosen piece {0} does not exist")]
    BadChoice(PieceIndex),
}

pub type Bijection = BTreeMap<GuestId, PieceIndex>;

/// Which agent may take which piece: edge iff mass >= mu_i(cake) / denom.
#[derive(Debug, Clone)]
pub struct AcceptabilityGraph {
    agents: Vec<GuestId>,
    pieces: Vec<PieceIndex>,
    /// `edges[a][p]` for agent slot `a` and piece slot `p`.
    edges: Vec<Vec<bool>>,
}

impl AcceptabilityGraph {
    pub fn new(
        pieces: &PieceList,
        valuations: &Valuations,
        denom: usize,
        chosen: PieceIndex,
    ) -> Result<Self, MatchingError> {
        let agents: Vec<GuestId> = valuations.keys().copied().collect();
        if agents.len() > MAX_AGENTS {
            return Err(MatchingError::TooLarge { agents: agents.len() });
        }
        if !pieces.contains_index(chosen) {
            return Err(MatchingError::BadChoice(chosen));
        }
        let free: Vec<PieceIndex> = pieces.indices().filter(|&p| p != chosen).collect();
        if free.len() != agents.len() {
            return Err(MatchingError::PieceCount {
                needed: agents.len(),
                have: free.len(),
            });
        }
        let cake = pieces.cake();
        let d = Rational::from_integer(denom as i64);
        let edges = valuations
            .values()
            .map(|v| {
                let threshold = eval_measure(v, &cake) / &d;
                free.iter()
                    .map(|&p| eval_measure(v, pieces.get(p).expect("index from list")) >= threshold)
                    .collect()
            })
            .collect();
        Ok(AcceptabilityGraph {
            agents,
            pieces: free,
            edges,
        })
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    fn to_bijection(&self, slots: &[usize]) -> Bijection {
        slots
            .iter()
            .enumerate()
            .map(|(a, &p)| (self.agents[a], self.pieces[p]))
            .collect()
    }

    /// Every permutation, filtered. Deliberately unpruned.
    pub fn exhaustive(&self) -> Vec<Bijection> {
        let n = self.agents.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut out = Vec::new();
        permute(&mut perm, 0, &mut |p| {
            if p.iter().enumerate().all(|(a, &s)| self.edges[a][s]) {
                out.push(self.to_bijection(p));
            }
        });
        out.sort();
        out
    }

    /// Branch on agent 0, 1, ... and keep a branch alive only while the
    /// remaining agents still admit a perfect matching on the remaining pieces.
    pub fn via_matching(&self) -> Vec<Bijection> {
        let n = self.agents.len();
        let mut taken = vec![false; n];
        let mut slots = Vec::with_capacity(n);
        let mut out = Vec::new();
        self.extend(&mut slots, &mut taken, &mut out);
        out.sort();
        out
    }

    fn extend(&self, slots: &mut Vec<usize>, taken: &mut [bool], out: &mut Vec<Bijection>) {
        let a = slots.len();
        if a == self.agents.len() {
            out.push(self.to_bijection(slots));
            return;
        }
        for p in 0..self.pieces.len() {
            if taken[p] || !self.edges[a][p] {
                continue;
            }
            taken[p] = true;
            if self.perfect_matching_exists(a + 1, taken) {
                slots.push(p);
                self.extend(slots, taken, out);
                slots.pop();
            }
            taken[p] = false;
        }
    }

    /// Kuhn's augmenting-path matching of agents `from..` onto untaken pieces.
    fn perfect_matching_exists(&self, from: usize, taken: &[bool]) -> bool {
        let mut owner: Vec<Option<usize>> = vec![None; self.pieces.len()];
        for a in from..self.agents.len() {
            let mut seen = vec![false; self.pieces.len()];
            if !self.augment(a, taken, &mut seen, &mut owner) {
                return false;
            }
        }
        true
    }

    fn augment(&self, a: usize, taken: &[bool], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for p in 0..self.pieces.len() {
            if taken[p] || seen[p] || !self.edges[a][p] {
                continue;
            }
            seen[p] = true;
            if owner[p].is_none_or(|b| self.augment(b, taken, seen, owner)) {
                owner[p] = Some(a);
                return true;
            }
        }
        false
    }
}

fn permute(v: &mut [usize], k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        visit(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, visit);
        v.swap(k, i);
    }
}

/// All acceptable bijections for secret choice `chosen`, sorted. Uses
/// exhaustive search up to [`EXHAUSTIVE_MAX`] agents and matching-pruned
/// search above that.
pub fn enumerate_acceptable_matchings(
    pieces: &PieceList,
    valuations: &Valuations,
    denom: usize,
    chosen: PieceIndex,
) -> Result<Vec<Bijection>, MatchingError> {
    let g = AcceptabilityGraph::new(pieces, valuations, denom, chosen)?;
    Ok(if g.agent_count() <= EXHAUSTIVE_MAX {
        g.exhaustive()
    } else {
        g.via_matching()
    })
}
