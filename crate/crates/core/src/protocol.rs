//! Divide-and-conquer partition protocols.
//!
//! [`dc_secret`] splits a cake into `n + 1` intervals using queries to the
//! `n` guests only. [`even_paz_classic`] is the ordinary `n`-agent
//! divide-and-conquer protocol and serves as a baseline: it has no seat for a
//! non-participating agent and queries everyone.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::measures::Interval;
use crate::oracle::{GuestId, Mediator, OracleError, Query};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("protocol needs at least one agent")]
    NoAgents,
    #[error("agent {0} listed twice")]
    DuplicateAgent(GuestId),
    #[error("agent count must be at least 1")]
    ZeroCount,
    #[error("cut {cut} by agent {agent} lies outside the subcake {cake}")]
    CutOutsideCake {
        agent: GuestId,
        cut: Rational,
        cake: Interval,
    },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// 1-based position of a piece in left-to-right order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
#[serde(transparent)]
pub struct PieceIndex(usize);

impl PieceIndex {
    /// `None` for zero.
    pub fn new(i: usize) -> Option<Self> {
        (i >= 1).then_some(PieceIndex(i))
    }

    pub fn get(self) -> usize {
        self.0
    }

    fn slot(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for PieceIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Contiguous intervals tiling a cake, left to right.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
#[serde(transparent)]
pub struct PieceList(Vec<Interval>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PieceListError {
    #[error("piece list is empty")]
    Empty,
    #[error("piece {index} starts at {lo} but the previous piece ends at {prev_hi}")]
    Gap {
        index: usize,
        lo: Rational,
        prev_hi: Rational,
    },
}

impl PieceList {
    pub fn new(pieces: Vec<Interval>) -> Result<Self, PieceListError> {
        if pieces.is_empty() {
            return Err(PieceListError::Empty);
        }
        for (i, w) in pieces.windows(2).enumerate() {
            if w[0].hi() != w[1].lo() {
                return Err(PieceListError::Gap {
                    index: i + 2,
                    lo: w[1].lo().clone(),
                    prev_hi: w[0].hi().clone(),
                });
            }
        }
        Ok(PieceList(pieces))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: PieceIndex) -> Option<&Interval> {
        self.0.get(index.slot())
    }

    pub fn contains_index(&self, index: PieceIndex) -> bool {
        index.0 <= self.0.len()
    }

    pub fn indices(&self) -> impl Iterator<Item = PieceIndex> {
        (1..=self.0.len()).map(PieceIndex)
    }

    pub fn iter(&self) -> impl Iterator<Item = (PieceIndex, &Interval)> {
        self.0.iter().enumerate().map(|(i, p)| (PieceIndex(i + 1), p))
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.0
    }

    /// The interval covered by all pieces.
    pub fn cake(&self) -> Interval {
        Interval::new(self.0[0].lo().clone(), self.0[self.0.len() - 1].hi().clone())
            .expect("pieces tile an interval")
    }
}

impl<'de> serde::Deserialize<'de> for PieceList {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<Interval>::deserialize(d)?;
        PieceList::new(v).map_err(serde::de::Error::custom)
    }
}

/// Recursion trace of [`dc_secret`].
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionTree {
    /// One agent halves the subcake by its own measure.
    Leaf {
        cake: Interval,
        agent: GuestId,
        cut: Rational,
    },
    /// Even agent count: the leftmost cutter fixes `left_piece`, the rest
    /// recurse on the remainder.
    Even {
        cake: Interval,
        cutter: GuestId,
        left_piece: Interval,
        child: Box<PartitionTree>,
    },
    /// Odd agent count (at least three): split at the median half-value cut.
    Odd {
        cake: Interval,
        median_agent: GuestId,
        median_cut: Rational,
        left: Box<PartitionTree>,
        right: Box<PartitionTree>,
    },
}

impl PartitionTree {
    pub fn cake(&self) -> &Interval {
        match self {
            PartitionTree::Leaf { cake, .. }
            | PartitionTree::Even { cake, .. }
            | PartitionTree::Odd { cake, .. } => cake,
        }
    }

    /// The agent this node asked to cut (leaf agent, cutter, or median agent).
    pub fn owner(&self) -> GuestId {
        match self {
            PartitionTree::Leaf { agent, .. } => *agent,
            PartitionTree::Even { cutter, .. } => *cutter,
            PartitionTree::Odd { median_agent, .. } => *median_agent,
        }
    }

    pub fn agent_count(&self) -> usize {
        match self {
            PartitionTree::Leaf { .. } => 1,
            PartitionTree::Even { child, .. } => 1 + child.agent_count(),
            PartitionTree::Odd { left, right, .. } => 1 + left.agent_count() + right.agent_count(),
        }
    }

    pub fn piece_count(&self) -> usize {
        self.agent_count() + 1
    }

    /// Every agent in the tree, in node pre-order.
    pub fn agents(&self) -> Vec<GuestId> {
        let mut out = Vec::new();
        self.collect_agents(&mut out);
        out
    }

    fn collect_agents(&self, out: &mut Vec<GuestId>) {
        out.push(self.owner());
        match self {
            PartitionTree::Leaf { .. } => {}
            PartitionTree::Even { child, .. } => child.collect_agents(out),
            PartitionTree::Odd { left, right, .. } => {
                left.collect_agents(out);
                right.collect_agents(out);
            }
        }
    }

    /// Node levels on the longest root-to-leaf path; a lone leaf has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            PartitionTree::Leaf { .. } => 1,
            PartitionTree::Even { child, .. } => 1 + child.depth(),
            PartitionTree::Odd { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }
}

fn check_agents(agents: &[GuestId]) -> Result<(), ProtocolError> {
    if agents.is_empty() {
        return Err(ProtocolError::NoAgents);
    }
    let mut seen = HashSet::new();
    for &a in agents {
        if !seen.insert(a) {
            return Err(ProtocolError::DuplicateAgent(a));
        }
    }
    Ok(())
}

fn ask_cut(
    m: &mut dyn Mediator,
    agent: GuestId,
    cake: &Interval,
    share: &Rational,
) -> Result<Rational, ProtocolError> {
    let cut = m.ask(Query::cut_share(agent, cake, share.clone()))?;
    if !cake.contains_point(&cut) {
        return Err(ProtocolError::CutOutsideCake {
            agent,
            cut,
            cake: cake.clone(),
        });
    }
    Ok(cut)
}

/// Ask every agent to cut `cake` at `share` of its own value; results are
/// sorted by (cut, agent id).
fn round_of_cuts(
    m: &mut dyn Mediator,
    cake: &Interval,
    agents: &[GuestId],
    share: &Rational,
) -> Result<Vec<(Rational, GuestId)>, ProtocolError> {
    let mut cuts = agents
        .iter()
        .map(|&a| ask_cut(m, a, cake, share).map(|c| (c, a)))
        .collect::<Result<Vec<_>, _>>()?;
    cuts.sort();
    Ok(cuts)
}

/// Partition `cake` into `agents.len() + 1` intervals, querying only `agents`.
pub fn dc_secret(
    cake: &Interval,
    agents: &[GuestId],
    m: &mut dyn Mediator,
) -> Result<PartitionTree, ProtocolError> {
    check_agents(agents)?;
    dc_secret_node(cake, agents, m)
}

fn dc_secret_node(
    cake: &Interval,
    agents: &[GuestId],
    m: &mut dyn Mediator,
) -> Result<PartitionTree, ProtocolError> {
    let n = agents.len();
    if n == 1 {
        let agent = agents[0];
        let cut = ask_cut(m, agent, cake, &Rational::new(1, 2))?;
        return Ok(PartitionTree::Leaf {
            cake: cake.clone(),
            agent,
            cut,
        });
    }
    if n % 2 == 1 {
        let cuts = round_of_cuts(m, cake, agents, &Rational::new(1, 2))?;
        let mid = n.div_ceil(2) - 1;
        let (median_cut, median_agent) = cuts[mid].clone();
        let left_agents: Vec<GuestId> = cuts[..mid].iter().map(|(_, a)| *a).collect();
        let right_agents: Vec<GuestId> = cuts[mid + 1..].iter().map(|(_, a)| *a).collect();
        let (left_cake, right_cake) = cake.split_at(&median_cut);
        let left = dc_secret_node(&left_cake, &left_agents, m)?;
        let right = dc_secret_node(&right_cake, &right_agents, m)?;
        Ok(PartitionTree::Odd {
            cake: cake.clone(),
            median_agent,
            median_cut,
            left: Box::new(left),
            right: Box::new(right),
        })
    } else {
        let share = Rational::new(1, n as i64 + 1);
        let cuts = round_of_cuts(m, cake, agents, &share)?;
        let (min_cut, cutter) = cuts[0].clone();
        let rest: Vec<GuestId> = agents.iter().copied().filter(|&a| a != cutter).collect();
        let (left_piece, remainder) = cake.split_at(&min_cut);
        let child = dc_secret_node(&remainder, &rest, m)?;
        Ok(PartitionTree::Even {
            cake: cake.clone(),
            cutter,
            left_piece,
            child: Box::new(child),
        })
    }
}

/// In-order flattening of a partition tree.
pub fn pieces_of(t: &PartitionTree) -> PieceList {
    let mut out = Vec::with_capacity(t.piece_count());
    flatten(t, &mut out);
    PieceList::new(out).expect("partition trees tile their cake")
}

fn flatten(t: &PartitionTree, out: &mut Vec<Interval>) {
    match t {
        PartitionTree::Leaf { cake, cut, .. } => {
            let (l, r) = cake.split_at(cut);
            out.push(l);
            out.push(r);
        }
        PartitionTree::Even {
            left_piece, child, ..
        } => {
            out.push(left_piece.clone());
            flatten(child, out);
        }
        PartitionTree::Odd { left, right, .. } => {
            flatten(left, out);
            flatten(right, out);
        }
    }
}

/// Result of the classic protocol: `n` pieces and who gets which.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EvenPazOutcome {
    pub pieces: PieceList,
    pub assignment: BTreeMap<GuestId, PieceIndex>,
}

/// Classic divide and conquer for `n` agents and `n` pieces, no secret seat.
/// Two agents run cut-and-choose (the chooser evaluates both halves); larger
/// groups each cut at ⌊n/2⌋/n of their value and split at the ⌊n/2⌋-th cut.
pub fn even_paz_classic(
    cake: &Interval,
    agents: &[GuestId],
    m: &mut dyn Mediator,
) -> Result<EvenPazOutcome, ProtocolError> {
    check_agents(agents)?;
    let mut shares = Vec::with_capacity(agents.len());
    even_paz_node(cake, agents, m, &mut shares)?;
    let mut assignment = BTreeMap::new();
    let mut pieces = Vec::with_capacity(shares.len());
    for (i, (piece, agent)) in shares.into_iter().enumerate() {
        assignment.insert(agent, PieceIndex(i + 1));
        pieces.push(piece);
    }
    Ok(EvenPazOutcome {
        pieces: PieceList::new(pieces).expect("contiguous by construction"),
        assignment,
    })
}

fn even_paz_node(
    cake: &Interval,
    agents: &[GuestId],
    m: &mut dyn Mediator,
    out: &mut Vec<(Interval, GuestId)>,
) -> Result<(), ProtocolError> {
    match agents.len() {
        1 => out.push((cake.clone(), agents[0])),
        2 => {
            let (cutter, chooser) = (agents[0], agents[1]);
            let cut = ask_cut(m, cutter, cake, &Rational::new(1, 2))?;
            let (l, r) = cake.split_at(&cut);
            let left_value = m.ask(Query::eval(chooser, l.clone()))?;
            let right_value = m.ask(Query::eval(chooser, r.clone()))?;
            if left_value >= right_value {
                out.push((l, chooser));
                out.push((r, cutter));
            } else {
                out.push((l, cutter));
                out.push((r, chooser));
            }
        }
        n => {
            let k = n / 2;
            let share = Rational::new(k as i64, n as i64);
            let cuts = round_of_cuts(m, cake, agents, &share)?;
            let split = cuts[k - 1].0.clone();
            let left: Vec<GuestId> = cuts[..k].iter().map(|(_, a)| *a).collect();
            let right: Vec<GuestId> = cuts[k..].iter().map(|(_, a)| *a).collect();
            let (lc, rc) = cake.split_at(&split);
            even_paz_node(&lc, &left, m, out)?;
            even_paz_node(&rc, &right, m, out)?;
        }
    }
    Ok(())
}

/// Exact number of cut queries [`dc_secret`] issues for `n` agents:
/// `C(1) = 1`, `C(n) = n + C(n - 1)` for even `n`, `C(n) = n + 2 C((n - 1) / 2)`
/// for odd `n > 1`.
pub fn predicted_cut_count(n: u64) -> Result<u64, ProtocolError> {
    if n == 0 {
        return Err(ProtocolError::ZeroCount);
    }
    fn c(n: u64) -> u64 {
        match n {
            1 => 1,
            n if n % 2 == 0 => n + c(n - 1),
            n => n + 2 * c((n - 1) / 2),
        }
    }
    Ok(c(n))
}
