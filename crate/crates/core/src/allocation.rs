//! Assigning pieces once the secret agent has picked one.
//!
//! The assignment walks the partition tree. Whenever the chosen piece falls
//! in one part of a node, the node's owner takes over the secret agent's role
//! for the other part: it evaluates the pieces there, takes an own-measure
//! maximal one, and that part recurses as if its secret agent had chosen it.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{eval_measure, Interval, Valuation};
use crate::oracle::{GuestId, Mediator, OracleError, Query, Roster, RosterError};
use crate::protocol::{pieces_of, PartitionTree, PieceIndex, PieceList};
use crate::rational::{ParseRationalError, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AllocationError {
    #[error("piece {chosen} does not exist; pieces are 1..={pieces}")]
    ChoiceOutOfRange { chosen: usize, pieces: usize },
    #[error("allocation is not a bijection onto the unchosen pieces: {0}")]
    NotBijection(String),
    #[error("no valuation for agent {0}")]
    MissingValuation(GuestId),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Who receives which piece, given the secret agent took `secret_choice`.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct Allocation {
    pub secret_choice: PieceIndex,
    pub assignment: BTreeMap<GuestId, PieceIndex>,
}

impl Allocation {
    /// Checks that the assignment covers every piece except the chosen one
    /// exactly once.
    pub fn check_bijection(&self, pieces: usize) -> Result<(), AllocationError> {
        if !(1..=pieces).contains(&self.secret_choice.get()) {
            return Err(AllocationError::ChoiceOutOfRange {
                chosen: self.secret_choice.get(),
                pieces,
            });
        }
        if self.assignment.len() + 1 != pieces {
            return Err(AllocationError::NotBijection(format!(
                "{} agents for {} remaining pieces",
                self.assignment.len(),
                pieces - 1
            )));
        }
        let mut seen = BTreeSet::new();
        for (agent, &p) in &self.assignment {
            if p == self.secret_choice {
                return Err(AllocationError::NotBijection(format!(
                    "agent {agent} was given the secret agent's piece {p}"
                )));
            }
            if p.get() > pieces {
                return Err(AllocationError::NotBijection(format!(
                    "agent {agent} was given nonexistent piece {p}"
                )));
            }
            if !seen.insert(p) {
                return Err(AllocationError::NotBijection(format!("piece {p} assigned twice")));
            }
        }
        Ok(())
    }
}

type EvalCache = HashMap<(GuestId, PieceIndex), Rational>;

struct Assigner<'a> {
    pieces: &'a PieceList,
    mediator: &'a mut dyn Mediator,
    cache: Option<&'a mut EvalCache>,
    out: BTreeMap<GuestId, PieceIndex>,
}

impl Assigner<'_> {
    fn value_of(&mut self, agent: GuestId, piece: PieceIndex) -> Result<Rational, OracleError> {
        if let Some(cache) = self.cache.as_deref() {
            if let Some(v) = cache.get(&(agent, piece)) {
                return Ok(v.clone());
            }
        }
        let interval = self.pieces.get(piece).expect("index within tree").clone();
        let v = self.mediator.ask(Query::eval(agent, interval))?;
        if let Some(cache) = self.cache.as_deref_mut() {
            cache.insert((agent, piece), v.clone());
        }
        Ok(v)
    }

    /// Lowest-index maximizer of `agent`'s value over pieces `first..first+count`.
    fn best_piece(&mut self, agent: GuestId, first: usize, count: usize) -> Result<PieceIndex, OracleError> {
        let mut best: Option<(PieceIndex, Rational)> = None;
        for i in first..first + count {
            let p = PieceIndex::new(i).expect("1-based");
            let v = self.value_of(agent, p)?;
            if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
                best = Some((p, v));
            }
        }
        Ok(best.expect("non-empty range").0)
    }

    /// `first` is the index of the node's leftmost piece.
    fn assign(&mut self, node: &PartitionTree, first: usize, chosen: PieceIndex) -> Result<(), OracleError> {
        match node {
            PartitionTree::Leaf { agent, .. } => {
                let other = if chosen.get() == first { first + 1 } else { first };
                self.out.insert(*agent, PieceIndex::new(other).expect("1-based"));
            }
            PartitionTree::Even { cutter, child, .. } => {
                let child_first = first + 1;
                if chosen.get() == first {
                    let pick = self.best_piece(*cutter, child_first, child.piece_count())?;
                    self.out.insert(*cutter, pick);
                    self.assign(child, child_first, pick)?;
                } else {
                    self.out.insert(*cutter, PieceIndex::new(first).expect("1-based"));
                    self.assign(child, child_first, chosen)?;
                }
            }
            PartitionTree::Odd {
                median_agent,
                left,
                right,
                ..
            } => {
                let right_first = first + left.piece_count();
                if chosen.get() < right_first {
                    let pick = self.best_piece(*median_agent, right_first, right.piece_count())?;
                    self.out.insert(*median_agent, pick);
                    self.assign(left, first, chosen)?;
                    self.assign(right, right_first, pick)?;
                } else {
                    let pick = self.best_piece(*median_agent, first, left.piece_count())?;
                    self.out.insert(*median_agent, pick);
                    self.assign(left, first, pick)?;
                    self.assign(right, right_first, chosen)?;
                }
            }
        }
        Ok(())
    }
}

fn check_choice(tree: &PartitionTree, chosen: PieceIndex) -> Result<(), AllocationError> {
    let pieces = tree.piece_count();
    if chosen.get() > pieces {
        return Err(AllocationError::ChoiceOutOfRange {
            chosen: chosen.get(),
            pieces,
        });
    }
    Ok(())
}

/// The proportional bijection for a secret choice of `chosen`. Pseudo-secret
/// picks are made with Eval queries issued through `m`.
pub fn assign_given_choice(
    tree: &PartitionTree,
    chosen: PieceIndex,
    m: &mut dyn Mediator,
) -> Result<Allocation, AllocationError> {
    check_choice(tree, chosen)?;
    let pieces = pieces_of(tree);
    let mut a = Assigner {
        pieces: &pieces,
        mediator: m,
        cache: None,
        out: BTreeMap::new(),
    };
    a.assign(tree, 1, chosen)?;
    Ok(Allocation {
        secret_choice: chosen,
        assignment: a.out,
    })
}

/// Allocations for every possible secret choice, keyed by that choice.
pub type AllocationTable = BTreeMap<PieceIndex, Allocation>;

/// [`assign_given_choice`] for every `j`. Each `(agent, piece)` value is
/// queried at most once across the whole table.
pub fn allocation_table(tree: &PartitionTree, m: &mut dyn Mediator) -> Result<AllocationTable, AllocationError> {
    let pieces = pieces_of(tree);
    let mut cache = EvalCache::new();
    let mut table = AllocationTable::new();
    for chosen in pieces.indices() {
        let mut a = Assigner {
            pieces: &pieces,
            mediator: &mut *m,
            cache: Some(&mut cache),
            out: BTreeMap::new(),
        };
        a.assign(tree, 1, chosen)?;
        table.insert(
            chosen,
            Allocation {
                secret_choice: chosen,
                assignment: a.out,
            },
        );
    }
    Ok(table)
}

/// Per-agent outcome of a proportionality check.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct AgentShare {
    pub agent: GuestId,
    pub piece: PieceIndex,
    pub mass: Rational,
    pub threshold: Rational,
    pub ok: bool,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct ProportionalityReport {
    pub secret_choice: PieceIndex,
    pub shares: Vec<AgentShare>,
    pub verdict: bool,
}

impl ProportionalityReport {
    pub fn failing_agents(&self) -> Vec<GuestId> {
        self.shares.iter().filter(|s| !s.ok).map(|s| s.agent).collect()
    }
}

/// Valuations of the guests, keyed by id.
pub type Valuations = BTreeMap<GuestId, Valuation>;

pub fn valuations_for(roster: &Roster, vals: &[Valuation]) -> Valuations {
    roster.guests().zip(vals.iter().cloned()).collect()
}

/// Exact check that every agent's piece is worth at least `mu_i(cake) / denom`.
pub fn verify_proportional(
    pieces: &PieceList,
    alloc: &Allocation,
    valuations: &Valuations,
    denom: usize,
) -> Result<ProportionalityReport, AllocationError> {
    alloc.check_bijection(pieces.len())?;
    let cake = pieces.cake();
    let d = Rational::from_integer(denom as i64);
    let mut shares = Vec::with_capacity(alloc.assignment.len());
    for (&agent, &piece) in &alloc.assignment {
        let v = valuations.get(&agent).ok_or(AllocationError::MissingValuation(agent))?;
        let mass = eval_measure(v, pieces.get(piece).expect("checked"));
        let threshold = eval_measure(v, &cake) / &d;
        let ok = mass >= threshold;
        shares.push(AgentShare {
            agent,
            piece,
            mass,
            threshold,
            ok,
        });
    }
    let verdict = shares.iter().all(|s| s.ok);
    Ok(ProportionalityReport {
        secret_choice: alloc.secret_choice,
        shares,
        verdict,
    })
}

/// The secret agent's own best piece, lowest index on ties, with its mass.
pub fn secret_best_piece(pieces: &PieceList, secret: &Valuation) -> (PieceIndex, Rational) {
    let mut best: Option<(PieceIndex, Rational)> = None;
    for (i, p) in pieces.iter() {
        let v = eval_measure(secret, p);
        if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
            best = Some((i, v));
        }
    }
    best.expect("piece lists are non-empty")
}

/// One line of the `choice,agent,piece,mass,threshold,ok` report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    pub choice: usize,
    pub agent: u32,
    pub piece: usize,
    pub mass: Rational,
    pub threshold: Rational,
    pub ok: bool,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {source}")]
    Agent { row: usize, source: RosterError },
    #[error("row {row}: piece index 0")]
    ZeroIndex { row: usize },
    #[error("row {row}: agent {agent} appears twice for choice {choice}")]
    Duplicate { row: usize, agent: u32, choice: usize },
    #[error(transparent)]
    Rational(#[from] ParseRationalError),
}

pub fn report_rows(reports: &[ProportionalityReport]) -> Vec<ReportRow> {
    reports
        .iter()
        .flat_map(|r| {
            r.shares.iter().map(move |s| ReportRow {
                choice: r.secret_choice.get(),
                agent: s.agent.get(),
                piece: s.piece.get(),
                mass: s.mass.clone(),
                threshold: s.threshold.clone(),
                ok: s.ok,
            })
        })
        .collect()
}

pub fn write_report_csv<W: std::io::Write>(w: W, reports: &[ProportionalityReport]) -> Result<(), ReportError> {
    let mut wr = csv::Writer::from_writer(w);
    for row in report_rows(reports) {
        wr.serialize(row)?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads allocations back from report CSV; the mass columns are ignored so a
/// verifier recomputes them from valuations.
pub fn read_allocations_csv<R: std::io::Read>(r: R, roster: &Roster) -> Result<Vec<Allocation>, ReportError> {
    let mut rd = csv::Reader::from_reader(r);
    let mut by_choice: BTreeMap<usize, BTreeMap<GuestId, PieceIndex>> = BTreeMap::new();
    for (i, row) in rd.deserialize::<ReportRow>().enumerate() {
        let row = row?;
        let line = i + 2;
        let agent = roster.guest(row.agent).map_err(|source| ReportError::Agent { row: line, source })?;
        let piece = PieceIndex::new(row.piece).ok_or(ReportError::ZeroIndex { row: line })?;
        PieceIndex::new(row.choice).ok_or(ReportError::ZeroIndex { row: line })?;
        let slot = by_choice.entry(row.choice).or_default();
        if slot.insert(agent, piece).is_some() {
            return Err(ReportError::Duplicate {
                row: line,
                agent: row.agent,
                choice: row.choice,
            });
        }
    }
    Ok(by_choice
        .into_iter()
        .map(|(c, assignment)| Allocation {
            secret_choice: PieceIndex::new(c).expect("checked"),
            assignment,
        })
        .collect())
}

/// Convenience: the piece interval an agent received.
pub fn received<'a>(pieces: &'a PieceList, alloc: &Allocation, agent: GuestId) -> Option<&'a Interval> {
    alloc.assignment.get(&agent).and_then(|&p| pieces.get(p))
}
