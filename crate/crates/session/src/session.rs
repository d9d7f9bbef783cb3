//! One live run: guests answer queries, the secret participant picks a
//! piece, and the guests' pieces are resolved.
//!
//! A [`Session`] is a pure state machine. Every accepted mutation is also
//! recorded as an [`Event`], and [`Session::replay`] rebuilds the same state
//! from the event log.

use std::fmt;

use cakecut::allocation::{valuations_for, verify_proportional, Allocation, ProportionalityReport};
use cakecut::oracle::{AgentEndpoint, Answer, GuestId, Query, Roster, SimulatedAgent, Transcript};
use cakecut::protocol::{pieces_of, PartitionTree, PieceIndex, PieceList};
use cakecut::sim::{DcSecretRun, Instance};
use cakecut::stepper::{Outcome, Protocol, StepError, Stepper};
use cakecut::{Interval, Rational, Valuation};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    CollectingAnswers,
    AwaitingSecretChoice,
    /// Guests answer the evaluations that resolve the chosen piece.
    Assigning,
    Complete,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::CollectingAnswers => "collecting-answers",
            Phase::AwaitingSecretChoice => "awaiting-secret-choice",
            Phase::Assigning => "assigning",
            Phase::Complete => "complete",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("{0}")]
    Validation(String),
    #[error("answer {value} out of range [{lo}, {hi}]")]
    OutOfRange { value: Rational, lo: Rational, hi: Rational },
    #[error("{0}")]
    Conflict(String),
    #[error("session {0} not found")]
    NotFound(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub guests: Vec<String>,
    #[serde(default = "default_secret_name")]
    pub secret: String,
    /// Declared measures, one per guest. When present, assignment-phase
    /// evaluations are answered from them and partition answers must agree
    /// with them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valuations: Option<Vec<Valuation>>,
}

fn default_secret_name() -> String {
    "secret".to_string()
}

impl SessionConfig {
    pub fn live(guests: Vec<String>) -> Self {
        SessionConfig {
            guests,
            secret: default_secret_name(),
            valuations: None,
        }
    }

    pub fn scripted(guests: Vec<String>, valuations: Vec<Valuation>) -> Self {
        SessionConfig {
            guests,
            secret: default_secret_name(),
            valuations: Some(valuations),
        }
    }
}

/// The append-only log entries a session is rebuilt from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created { config: SessionConfig },
    Answered { agent: u32, value: Rational },
    Chosen { piece: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SessionResult {
    pub pieces: PieceList,
    pub tree: PartitionTree,
    pub secret_choice: PieceIndex,
    pub allocation: Allocation,
    /// Exact check against declared valuations; absent for live guests.
    pub report: Option<ProportionalityReport>,
    /// Reports for every possible choice, when valuations are declared.
    pub table: Option<Vec<ProportionalityReport>>,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    config: SessionConfig,
    roster: Roster,
    phase: Phase,
    partition: Stepper,
    assignment: Option<Stepper>,
    result: Option<SessionResult>,
    events: Vec<Event>,
}

/// Who is polling or submitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Participant {
    Guest(GuestId),
    Secret,
}

impl Session {
    pub fn create(id: impl Into<String>, config: SessionConfig) -> Result<Self, SessionError> {
        let roster = Roster::new(config.guests.len())
            .map_err(|_| SessionError::Validation("a session needs at least one guest".into()))?;
        if let Some(vals) = &config.valuations {
            if vals.len() != config.guests.len() {
                return Err(SessionError::Validation(format!(
                    "{} valuations for {} guests",
                    vals.len(),
                    config.guests.len()
                )));
            }
        }
        let partition = Stepper::new(Protocol::DcSecret {
            cake: Interval::unit(),
            agents: roster.guests().collect(),
        })
        .map_err(|e| SessionError::Validation(e.to_string()))?;
        Ok(Session {
            id: id.into(),
            events: vec![Event::Created {
                config: config.clone(),
            }],
            config,
            roster,
            phase: Phase::CollectingAnswers,
            partition,
            assignment: None,
            result: None,
        })
    }

    /// Rebuilds a session from its event log.
    pub fn replay(id: impl Into<String>, events: &[Event]) -> Result<Self, SessionError> {
        let (first, rest) = events
            .split_first()
            .ok_or_else(|| SessionError::Validation("empty event log".into()))?;
        let Event::Created { config } = first else {
            return Err(SessionError::Validation("event log must start with `created`".into()));
        };
        let mut s = Session::create(id, config.clone())?;
        for e in rest {
            match e {
                Event::Created { .. } => {
                    return Err(SessionError::Validation("duplicate `created` event".into()));
                }
                Event::Answered { agent, value } => {
                    s.submit_answer(*agent, value.clone())?;
                }
                Event::Chosen { piece } => {
                    s.submit_choice(*piece)?;
                }
            }
        }
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn result(&self) -> Option<&SessionResult> {
        self.result.as_ref()
    }

    /// Resolve a seat number; the secret seat maps to [`Participant::Secret`].
    pub fn participant(&self, id: u32) -> Result<Participant, SessionError> {
        if id == self.roster.secret_id() {
            return Ok(Participant::Secret);
        }
        self.roster
            .guest(id)
            .map(Participant::Guest)
            .map_err(|e| SessionError::Validation(e.to_string()))
    }

    fn active_stepper(&self) -> Option<&Stepper> {
        match self.phase {
            Phase::CollectingAnswers => Some(&self.partition),
            Phase::Assigning => self.assignment.as_ref(),
            Phase::AwaitingSecretChoice | Phase::Complete => None,
        }
    }

    /// The outstanding query, whoever it is addressed to.
    pub fn outstanding(&self) -> Option<&Query> {
        self.active_stepper().and_then(Stepper::outstanding)
    }

    /// The outstanding query if it is addressed to `who`.
    pub fn next_query(&self, who: Participant) -> Option<&Query> {
        match who {
            Participant::Secret => None,
            Participant::Guest(g) => self.outstanding().filter(|q| q.agent() == g),
        }
    }

    pub fn transcript(&self) -> Transcript {
        let mut t = self.partition.transcript();
        if let Some(a) = &self.assignment {
            for e in a.journal() {
                t.record(e.clone());
            }
        }
        t
    }

    /// Pieces once the partition is finished.
    pub fn pieces(&self) -> Option<PieceList> {
        self.tree().map(pieces_of)
    }

    fn tree(&self) -> Option<&PartitionTree> {
        match self.partition.outcome() {
            Some(Outcome::Partition(t)) => Some(t),
            _ => None,
        }
    }

    fn declared_answer(&self, q: &Query) -> Option<Rational> {
        let vals = self.config.valuations.as_ref()?;
        let v = &vals[q.agent().get() as usize - 1];
        SimulatedAgent::new(v.clone()).answer(q).ok()
    }

    pub fn submit_answer(&mut self, agent: u32, value: Rational) -> Result<usize, SessionError> {
        if !matches!(self.phase, Phase::CollectingAnswers | Phase::Assigning) {
            return Err(SessionError::Conflict(format!("no queries are open in phase {}", self.phase)));
        }
        let who = self.participant(agent)?;
        let q = self.outstanding().cloned().expect("open phases have an outstanding query");
        match who {
            Participant::Secret => {
                return Err(SessionError::Conflict("the secret participant is never queried".into()));
            }
            Participant::Guest(g) if g != q.agent() => {
                return Err(SessionError::Conflict(format!(
                    "the outstanding query is for agent {}, not agent {g}",
                    q.agent()
                )));
            }
            Participant::Guest(_) => {}
        }
        let answer = Answer::new(q.clone(), value.clone()).map_err(|_| {
            let (lo, hi) = q.answer_bounds();
            SessionError::OutOfRange {
                value: value.clone(),
                lo,
                hi,
            }
        })?;
        if let Some(expected) = self.declared_answer(&q) {
            if expected != value {
                return Err(SessionError::Validation(format!(
                    "answer {value} disagrees with agent {}'s declared valuation",
                    q.agent()
                )));
            }
        }
        let stepper = match self.phase {
            Phase::CollectingAnswers => &mut self.partition,
            _ => self.assignment.as_mut().expect("assigning has a stepper"),
        };
        stepper.step(Some(answer)).map_err(step_error)?;
        self.events.push(Event::Answered { agent, value });
        self.after_step()?;
        Ok(self.transcript().len())
    }

    /// Records the secret participant's piece. Returns the new phase, which is
    /// `Complete` unless guests still have evaluation queries to answer.
    pub fn submit_choice(&mut self, piece: usize) -> Result<Phase, SessionError> {
        if self.phase != Phase::AwaitingSecretChoice {
            return Err(SessionError::Conflict(format!(
                "a piece can only be chosen in phase awaiting-secret-choice, not {}",
                self.phase
            )));
        }
        let pieces = self.roster.len() + 1;
        let chosen = PieceIndex::new(piece)
            .filter(|p| p.get() <= pieces)
            .ok_or_else(|| SessionError::Validation(format!("piece must be in 1..={pieces}, got {piece}")))?;
        let tree = self.tree().expect("partition finished").clone();
        let mut stepper = Stepper::new(Protocol::Assign { tree, chosen }).map_err(step_error)?;
        if self.config.valuations.is_some() {
            while let Some(q) = stepper.outstanding().cloned() {
                let v = self.declared_answer(&q).expect("declared valuations answer every query");
                stepper.answer(v).map_err(step_error)?;
            }
        }
        self.events.push(Event::Chosen { piece });
        self.assignment = Some(stepper);
        self.phase = Phase::Assigning;
        self.after_step()?;
        Ok(self.phase)
    }

    fn after_step(&mut self) -> Result<(), SessionError> {
        match self.phase {
            Phase::CollectingAnswers if self.partition.is_finished() => {
                self.phase = Phase::AwaitingSecretChoice;
            }
            Phase::Assigning if self.assignment.as_ref().is_some_and(Stepper::is_finished) => {
                self.complete()?;
            }
            _ => {}
        }
        Ok(())
    }

    fn complete(&mut self) -> Result<(), SessionError> {
        let tree = self.tree().expect("partition finished").clone();
        let pieces = pieces_of(&tree);
        let allocation = match self.assignment.as_ref().and_then(Stepper::outcome) {
            Some(Outcome::Allocation(a)) => a.clone(),
            _ => unreachable!("assignment stepper yields an allocation"),
        };
        allocation
            .check_bijection(pieces.len())
            .map_err(|e| SessionError::Conflict(e.to_string()))?;
        let n = self.roster.len();
        let (report, table) = match &self.config.valuations {
            Some(vals) => {
                let vm = valuations_for(&self.roster, vals);
                let report = verify_proportional(&pieces, &allocation, &vm, n + 1)
                    .map_err(|e| SessionError::Conflict(e.to_string()))?;
                let inst = Instance::new(vals.clone()).expect("non-empty roster");
                let run = DcSecretRun {
                    tree: tree.clone(),
                    pieces: pieces.clone(),
                    transcript: Transcript::new(),
                };
                let mut scratch = Transcript::new();
                let table = inst
                    .table(&run, &mut scratch)
                    .map_err(|e| SessionError::Conflict(e.to_string()))?;
                let reports = table
                    .values()
                    .map(|a| inst.verify(&run, a))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| SessionError::Conflict(e.to_string()))?;
                (Some(report), Some(reports))
            }
            None => (None, None),
        };
        self.result = Some(SessionResult {
            secret_choice: allocation.secret_choice,
            pieces,
            tree,
            allocation,
            report,
            table,
        });
        self.phase = Phase::Complete;
        Ok(())
    }
}

fn step_error(e: StepError) -> SessionError {
    match e {
        StepError::AlreadyFinished | StepError::Mismatch { .. } | StepError::MissingAnswer(_) => {
            SessionError::Conflict(e.to_string())
        }
        other => SessionError::Validation(other.to_string()),
    }
}
