//! The Robertson–Webb interaction layer.
//!
//! A mediator talks to agents only through two kinds of [`Query`]: evaluate
//! an interval, or cut from a start point. The recipient of a query is a
//! [`GuestId`], and guest ids are minted only by a [`Roster`], which never
//! mints one for the secret seat. A query to the secret agent cannot be
//! written down.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::measures::{cut_point, cut_share_point, eval_measure, Interval, Valuation};
use crate::rational::Rational;

/// Identifier of one of the `n` queried agents, numbered `1..=n`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct GuestId(u32);

impl GuestId {
    pub fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for GuestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for GuestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "agent {}", self.0)
    }
}

/// The participants of one run: guests `1..=n` and the secret seat `n + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Roster {
    guests: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RosterError {
    #[error("a run needs at least one guest")]
    NoGuests,
    #[error("id {id} is the secret seat and cannot be queried")]
    SecretSeat { id: u32 },
    #[error("id {id} is not a participant (guests are 1..={guests})")]
    Unknown { id: u32, guests: u32 },
}

impl Roster {
    pub fn new(guests: usize) -> Result<Self, RosterError> {
        if guests == 0 {
            return Err(RosterError::NoGuests);
        }
        Ok(Roster {
            guests: guests as u32,
        })
    }

    pub fn len(&self) -> usize {
        self.guests as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn guests(&self) -> impl Iterator<Item = GuestId> {
        (1..=self.guests).map(GuestId)
    }

    pub fn guest(&self, id: u32) -> Result<GuestId, RosterError> {
        if id >= 1 && id <= self.guests {
            Ok(GuestId(id))
        } else if id == self.secret_id() {
            Err(RosterError::SecretSeat { id })
        } else {
            Err(RosterError::Unknown {
                id,
                guests: self.guests,
            })
        }
    }

    /// The secret agent's seat number, `n + 1`. It is a plain number, not a
    /// [`GuestId`].
    pub fn secret_id(&self) -> u32 {
        self.guests + 1
    }
}

/// What a cut query asks for.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum CutTarget {
    /// A fixed mass: solve `mu([start, y]) = mass`.
    Mass(Rational),
    /// A share of the agent's own value of `[start, end]`:
    /// solve `mu([start, y]) = share * mu([start, end])`.
    Share { share: Rational, end: Rational },
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum QueryKind {
    Eval(Interval),
    Cut { start: Rational, target: CutTarget },
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Query {
    agent: GuestId,
    kind: QueryKind,
}

impl Query {
    pub fn eval(agent: GuestId, interval: Interval) -> Self {
        Query {
            agent,
            kind: QueryKind::Eval(interval),
        }
    }

    pub fn cut(agent: GuestId, start: Rational, mass: Rational) -> Self {
        Query {
            agent,
            kind: QueryKind::Cut {
                start,
                target: CutTarget::Mass(mass),
            },
        }
    }

    /// Cut `cake` from its left end at `share` of the agent's value of `cake`.
    pub fn cut_share(agent: GuestId, cake: &Interval, share: Rational) -> Self {
        Query {
            agent,
            kind: QueryKind::Cut {
                start: cake.lo().clone(),
                target: CutTarget::Share {
                    share,
                    end: cake.hi().clone(),
                },
            },
        }
    }

    pub fn agent(&self) -> GuestId {
        self.agent
    }

    pub fn kind(&self) -> &QueryKind {
        &self.kind
    }

    pub fn is_cut(&self) -> bool {
        matches!(self.kind, QueryKind::Cut { .. })
    }

    /// Closed range of admissible answers.
    pub fn answer_bounds(&self) -> (Rational, Rational) {
        match &self.kind {
            QueryKind::Eval(_) => (Rational::zero(), Rational::one()),
            QueryKind::Cut {
                start,
                target: CutTarget::Mass(_),
            } => (start.clone(), Rational::one()),
            QueryKind::Cut {
                start,
                target: CutTarget::Share { end, .. },
            } => (start.clone(), end.clone()),
        }
    }

    /// The `args=` field of the transcript line format.
    pub fn args_text(&self) -> String {
        match &self.kind {
            QueryKind::Eval(iv) => iv.to_string(),
            QueryKind::Cut {
                start,
                target: CutTarget::Mass(m),
            } => format!("start={start},mass={m}"),
            QueryKind::Cut {
                start,
                target: CutTarget::Share { share, end },
            } => format!("start={start},share={share},end={end}"),
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = if self.is_cut() { "cut" } else { "eval" };
        write!(f, "agent={} kind={kind} args={}", self.agent, self.args_text())
    }
}

impl Serialize for Query {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match &self.kind {
            QueryKind::Eval(iv) => {
                let mut s = serializer.serialize_struct("Query", 4)?;
                s.serialize_field("agent", &self.agent)?;
                s.serialize_field("kind", "eval")?;
                s.serialize_field("lo", iv.lo())?;
                s.serialize_field("hi", iv.hi())?;
                s.end()
            }
            QueryKind::Cut { start, target } => {
                let mut s = serializer.serialize_struct("Query", 5)?;
                s.serialize_field("agent", &self.agent)?;
                s.serialize_field("kind", "cut")?;
                s.serialize_field("start", start)?;
                match target {
                    CutTarget::Mass(m) => s.serialize_field("mass", m)?,
                    CutTarget::Share { share, end } => {
                        s.serialize_field("share", share)?;
                        s.serialize_field("end", end)?;
                    }
                }
                s.end()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("no endpoint registered for agent {0}")]
    UnknownAgent(GuestId),
    #[error("agent {agent} violated the protocol: {reason}")]
    Violation { agent: GuestId, reason: String },
    /// Raised by suspending mediators: the run cannot continue until this
    /// query is answered.
    #[error("awaiting answer to `{0}`")]
    Pending(Query),
}

/// A query together with the value the agent returned.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct Answer {
    query: Query,
    value: Rational,
}

impl Answer {
    /// Rejects values outside [`Query::answer_bounds`].
    pub fn new(query: Query, value: Rational) -> Result<Self, OracleError> {
        let (lo, hi) = query.answer_bounds();
        if value < lo || value > hi {
            return Err(OracleError::Violation {
                agent: query.agent,
                reason: format!("answer {value} outside [{lo}, {hi}] for `{query}`"),
            });
        }
        Ok(Answer { query, value })
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    pub fn value(&self) -> &Rational {
        &self.value
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} answer={}", self.query, self.value)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct KindCounts {
    pub eval: usize,
    pub cut: usize,
}

impl KindCounts {
    pub fn total(&self) -> usize {
        self.eval + self.cut
    }
}

/// Append-only record of every answered query in a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    entries: Vec<Answer>,
    counts: BTreeMap<GuestId, KindCounts>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, answer: Answer) {
        let c = self.counts.entry(answer.query.agent).or_default();
        if answer.query.is_cut() {
            c.cut += 1;
        } else {
            c.eval += 1;
        }
        self.entries.push(answer);
    }

    pub fn entries(&self) -> &[Answer] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn counts(&self) -> &BTreeMap<GuestId, KindCounts> {
        &self.counts
    }

    pub fn cut_count(&self) -> usize {
        self.counts.values().map(|c| c.cut).sum()
    }

    pub fn eval_count(&self) -> usize {
        self.counts.values().map(|c| c.eval).sum()
    }

    /// True when the maintained counters agree with a recount of the entries.
    pub fn counters_consistent(&self) -> bool {
        let mut fresh = Transcript::new();
        for e in &self.entries {
            fresh.record(e.clone());
        }
        fresh.counts == self.counts
    }

    /// One `agent=<id> kind=<eval|cut> args=<...> answer=<p/q>` line per entry.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }
}

/// Number of transcript entries addressed to seat `agent`. Takes a raw seat
/// number so the secret seat can be counted too (it is always zero).
pub fn queries_to(t: &Transcript, agent: u32) -> usize {
    t.entries.iter().filter(|e| e.query.agent.0 == agent).count()
}

/// Counts agent ids appearing in `agent=` fields of an exported transcript.
pub fn count_text_queries_to(text: &str, agent: u32) -> usize {
    let needle = format!("agent={agent}");
    text.lines()
        .filter(|l| l.split_whitespace().next() == Some(needle.as_str()))
        .count()
}

/// Something that answers queries on behalf of one agent.
pub trait AgentEndpoint: Send + Sync {
    fn answer(&self, query: &Query) -> Result<Rational, String>;
}

/// An agent whose answers are computed exactly from a [`Valuation`].
#[derive(Debug, Clone)]
pub struct SimulatedAgent {
    valuation: Valuation,
}

impl SimulatedAgent {
    pub fn new(valuation: Valuation) -> Self {
        SimulatedAgent { valuation }
    }

    pub fn valuation(&self) -> &Valuation {
        &self.valuation
    }
}

impl AgentEndpoint for SimulatedAgent {
    fn answer(&self, query: &Query) -> Result<Rational, String> {
        let v = &self.valuation;
        match &query.kind {
            QueryKind::Eval(iv) => Ok(eval_measure(v, iv)),
            QueryKind::Cut {
                start,
                target: CutTarget::Mass(m),
            } => cut_point(v, start, m).map_err(|e| e.to_string()),
            QueryKind::Cut {
                start,
                target: CutTarget::Share { share, end },
            } => {
                let span = Interval::new(start.clone(), end.clone()).map_err(|e| e.to_string())?;
                cut_share_point(v, &span, share).map_err(|e| e.to_string())
            }
        }
    }
}

/// The routing table from guest ids to endpoints.
#[derive(Clone, Default)]
pub struct Endpoints {
    map: BTreeMap<GuestId, Arc<dyn AgentEndpoint>>,
}

impl Endpoints {
    pub fn new() -> Self {
        Self::default()
    }

    /// One simulated endpoint per valuation, guest `i` answering with `valuations[i - 1]`.
    pub fn simulated(roster: &Roster, valuations: &[Valuation]) -> Self {
        assert_eq!(roster.len(), valuations.len(), "one valuation per guest");
        let mut e = Endpoints::new();
        for (g, v) in roster.guests().zip(valuations) {
            e.insert(g, Arc::new(SimulatedAgent::new(v.clone())));
        }
        e
    }

    pub fn insert(&mut self, agent: GuestId, endpoint: Arc<dyn AgentEndpoint>) {
        self.map.insert(agent, endpoint);
    }

    pub fn get(&self, agent: GuestId) -> Option<&Arc<dyn AgentEndpoint>> {
        self.map.get(&agent)
    }
}

/// Routes `q` to its endpoint, checks the answer, and records it.
pub fn dispatch(q: Query, endpoints: &Endpoints, t: &mut Transcript) -> Result<Answer, OracleError> {
    let endpoint = endpoints.get(q.agent).ok_or(OracleError::UnknownAgent(q.agent))?;
    let value = endpoint.answer(&q).map_err(|reason| OracleError::Violation {
        agent: q.agent,
        reason,
    })?;
    let answer = Answer::new(q, value)?;
    t.record(answer.clone());
    Ok(answer)
}

/// The protocol side of the query model. Protocol code asks questions only
/// through this trait, so the same code runs against simulated agents, a
/// replay journal, or live participants.
pub trait Mediator {
    fn ask(&mut self, query: Query) -> Result<Rational, OracleError>;
}

/// Mediator that answers immediately from an endpoint table.
pub struct Dispatcher<'a> {
    endpoints: &'a Endpoints,
    transcript: &'a mut Transcript,
}

impl<'a> Dispatcher<'a> {
    pub fn new(endpoints: &'a Endpoints, transcript: &'a mut Transcript) -> Self {
        Dispatcher {
            endpoints,
            transcript,
        }
    }
}

impl Mediator for Dispatcher<'_> {
    fn ask(&mut self, query: Query) -> Result<Rational, OracleError> {
        dispatch(query, self.endpoints, self.transcript).map(|a| a.value)
    }
}
