//! Resumable protocol runs.
//!
//! A [`Stepper`] keeps a journal of answers. Each step replays the protocol
//! from the start against that journal; the first query with no recorded
//! answer suspends the run and becomes the outstanding query. Protocol code
//! is deterministic in its answers, so a replay always retraces the same
//! queries, and a stepper-driven run is the direct run with pauses.

use thiserror::Error;

use crate::allocation::{allocation_table, assign_given_choice, Allocation, AllocationError, AllocationTable};
use crate::measures::Interval;
use crate::oracle::{Answer, GuestId, Mediator, OracleError, Query, Transcript};
use crate::protocol::{dc_secret, even_paz_classic, EvenPazOutcome, PartitionTree, PieceIndex, ProtocolError};
use crate::rational::Rational;

/// A protocol invocation the stepper can drive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Protocol {
    DcSecret { cake: Interval, agents: Vec<GuestId> },
    EvenPaz { cake: Interval, agents: Vec<GuestId> },
    Assign { tree: PartitionTree, chosen: PieceIndex },
    AllocationTable { tree: PartitionTree },
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum Outcome {
    Partition(PartitionTree),
    EvenPaz(EvenPazOutcome),
    Allocation(Allocation),
    Table(AllocationTable),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
}

impl RunError {
    fn pending(&self) -> Option<&Query> {
        match self {
            RunError::Protocol(ProtocolError::Oracle(OracleError::Pending(q)))
            | RunError::Allocation(AllocationError::Oracle(OracleError::Pending(q))) => Some(q),
            _ => None,
        }
    }
}

impl Protocol {
    /// Runs to completion against `m`.
    pub fn run(&self, m: &mut dyn Mediator) -> Result<Outcome, RunError> {
        Ok(match self {
            Protocol::DcSecret { cake, agents } => Outcome::Partition(dc_secret(cake, agents, m)?),
            Protocol::EvenPaz { cake, agents } => Outcome::EvenPaz(even_paz_classic(cake, agents, m)?),
            Protocol::Assign { tree, chosen } => Outcome::Allocation(assign_given_choice(tree, *chosen, m)?),
            Protocol::AllocationTable { tree } => Outcome::Table(allocation_table(tree, m)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepStatus {
    AwaitingAnswer(Query),
    Finished(Outcome),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("the run is finished and accepts no answers")]
    AlreadyFinished,
    #[error("an answer to `{0}` is required")]
    MissingAnswer(Query),
    #[error("answer is for `{got}` but the outstanding query is `{expected}`")]
    Mismatch { expected: Query, got: Query },
    #[error(transparent)]
    Invalid(OracleError),
    #[error("protocol failed: {0}")]
    Failed(RunError),
    #[error("replay diverged at entry {0}")]
    Diverged(usize),
}

struct Replay<'a> {
    journal: &'a [Answer],
    next: usize,
    diverged: Option<usize>,
}

impl Mediator for Replay<'_> {
    fn ask(&mut self, query: Query) -> Result<Rational, OracleError> {
        match self.journal.get(self.next) {
            Some(a) if a.query() == &query => {
                self.next += 1;
                Ok(a.value().clone())
            }
            Some(_) => {
                self.diverged = Some(self.next);
                Err(OracleError::Pending(query))
            }
            None => Err(OracleError::Pending(query)),
        }
    }
}

/// A suspended protocol run with exactly one outstanding query, or a
/// finished one.
#[derive(Clone, Debug)]
pub struct Stepper {
    protocol: Protocol,
    journal: Vec<Answer>,
    status: StepStatus,
}

impl Stepper {
    /// Starts the run and advances it to its first query (or to completion).
    pub fn new(protocol: Protocol) -> Result<Self, StepError> {
        let status = Self::advance(&protocol, &[])?;
        Ok(Stepper {
            protocol,
            journal: Vec::new(),
            status,
        })
    }

    fn advance(protocol: &Protocol, journal: &[Answer]) -> Result<StepStatus, StepError> {
        let mut replay = Replay {
            journal,
            next: 0,
            diverged: None,
        };
        let result = protocol.run(&mut replay);
        if let Some(at) = replay.diverged {
            return Err(StepError::Diverged(at));
        }
        match result {
            Ok(outcome) => Ok(StepStatus::Finished(outcome)),
            Err(e) => match e.pending() {
                Some(q) if replay.next == journal.len() => Ok(StepStatus::AwaitingAnswer(q.clone())),
                Some(_) => Err(StepError::Diverged(replay.next)),
                None => Err(StepError::Failed(e)),
            },
        }
    }

    pub fn status(&self) -> &StepStatus {
        &self.status
    }

    pub fn protocol(&self) -> &Protocol {
        &self.protocol
    }

    pub fn outstanding(&self) -> Option<&Query> {
        match &self.status {
            StepStatus::AwaitingAnswer(q) => Some(q),
            StepStatus::Finished(_) => None,
        }
    }

    pub fn outcome(&self) -> Option<&Outcome> {
        match &self.status {
            StepStatus::Finished(o) => Some(o),
            StepStatus::AwaitingAnswer(_) => None,
        }
    }

    pub fn is_finished(&self) -> bool {
        matches!(self.status, StepStatus::Finished(_))
    }

    /// Feeds the answer to the outstanding query. On any error the stepper
    /// is left unchanged.
    pub fn step(&mut self, answer: Option<Answer>) -> Result<&StepStatus, StepError> {
        let expected = match &self.status {
            StepStatus::Finished(_) => return Err(StepError::AlreadyFinished),
            StepStatus::AwaitingAnswer(q) => q.clone(),
        };
        let answer = answer.ok_or_else(|| StepError::MissingAnswer(expected.clone()))?;
        if answer.query() != &expected {
            return Err(StepError::Mismatch {
                expected,
                got: answer.query().clone(),
            });
        }
        self.journal.push(answer);
        match Self::advance(&self.protocol, &self.journal) {
            Ok(status) => {
                self.status = status;
                Ok(&self.status)
            }
            Err(e) => {
                self.journal.pop();
                Err(e)
            }
        }
    }

    /// Answers the outstanding query with `value`, validating its range.
    pub fn answer(&mut self, value: Rational) -> Result<&StepStatus, StepError> {
        let q = match &self.status {
            StepStatus::Finished(_) => return Err(StepError::AlreadyFinished),
            StepStatus::AwaitingAnswer(q) => q.clone(),
        };
        let a = Answer::new(q, value).map_err(StepError::Invalid)?;
        self.step(Some(a))
    }

    pub fn journal(&self) -> &[Answer] {
        &self.journal
    }

    pub fn transcript(&self) -> Transcript {
        let mut t = Transcript::new();
        for a in &self.journal {
            t.record(a.clone());
        }
        t
    }

    /// Drives the run to completion, answering each query with `answer_fn`.
    pub fn drive<F>(&mut self, mut answer_fn: F) -> Result<&Outcome, StepError>
    where
        F: FnMut(&Query) -> Result<Answer, OracleError>,
    {
        while let StepStatus::AwaitingAnswer(q) = &self.status {
            let a = answer_fn(q).map_err(StepError::Invalid)?;
            self.step(Some(a))?;
        }
        Ok(self.outcome().expect("finished"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Valuation;
    use crate::oracle::{dispatch, Endpoints, Roster};
    use crate::rational::q;

    #[test]
    fn single_agent_suspends_once_then_finishes() {
        let r = Roster::new(1).unwrap();
        let g = r.guest(1).unwrap();
        let mut s = Stepper::new(Protocol::DcSecret {
            cake: Interval::unit(),
            agents: vec![g],
        })
        .unwrap();
        let q0 = s.outstanding().unwrap().clone();
        assert_eq!(q0, Query::cut_share(g, &Interval::unit(), q(1, 2)));
        s.answer(q(1, 2)).unwrap();
        assert!(s.is_finished());
        assert_eq!(s.journal().len(), 1);
        let before = s.status().clone();
        assert_eq!(s.answer(q(1, 2)).unwrap_err(), StepError::AlreadyFinished);
        assert_eq!(s.status(), &before);
    }

    #[test]
    fn rejected_answers_leave_state_unchanged() {
        let r = Roster::new(2).unwrap();
        let agents: Vec<_> = r.guests().collect();
        let mut s = Stepper::new(Protocol::DcSecret {
            cake: Interval::unit(),
            agents: agents.clone(),
        })
        .unwrap();
        let before = s.status().clone();
        assert!(matches!(s.step(None), Err(StepError::MissingAnswer(_))));
        let wrong = Answer::new(Query::eval(agents[1], Interval::unit()), q(1, 1)).unwrap();
        assert!(matches!(s.step(Some(wrong)), Err(StepError::Mismatch { .. })));
        assert!(matches!(s.answer(q(3, 2)), Err(StepError::Invalid(_))));
        assert_eq!(s.status(), &before);
        assert!(s.journal().is_empty());
    }

    #[test]
    fn driving_with_endpoints_matches_direct_run() {
        let r = Roster::new(3).unwrap();
        let vals = vec![Valuation::uniform(); 3];
        let e = Endpoints::simulated(&r, &vals);
        let protocol = Protocol::DcSecret {
            cake: Interval::unit(),
            agents: r.guests().collect(),
        };
        let mut direct_t = Transcript::new();
        let direct = protocol
            .run(&mut crate::oracle::Dispatcher::new(&e, &mut direct_t))
            .unwrap();
        let mut s = Stepper::new(protocol).unwrap();
        let mut scratch = Transcript::new();
        let out = s.drive(|q| dispatch(q.clone(), &e, &mut scratch)).unwrap().clone();
        assert_eq!(out, direct);
        assert_eq!(s.transcript(), direct_t);
    }

    #[test]
    fn domain_errors_surface_at_start() {
        assert!(matches!(
            Stepper::new(Protocol::DcSecret {
                cake: Interval::unit(),
                agents: vec![]
            }),
            Err(StepError::Failed(RunError::Protocol(ProtocolError::NoAgents)))
        ));
    }
}
