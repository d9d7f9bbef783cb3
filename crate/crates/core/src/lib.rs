//! Proportional cake cutting when one participant is secret.
//!
//! `n` guests and one secret agent share the cake `[0, 1]`. The guests alone
//! answer Robertson–Webb queries, and [`protocol::dc_secret`] cuts the cake
//! into `n + 1` intervals. The secret agent then takes any piece, and
//! [`allocation::assign_given_choice`] hands the remaining pieces to the
//! guests so each gets at least `1 / (n + 1)` of the cake by its own measure.
//!
//! ```
//! use cakecut::{Instance, PieceIndex};
//!
//! let inst = Instance::random(7, 4, 3).unwrap();
//! let run = inst.dc_secret().unwrap();
//! assert_eq!(run.pieces.len(), 5);
//! let mut t = cakecut::Transcript::new();
//! let alloc = inst.assign(&run, PieceIndex::new(3).unwrap(), &mut t).unwrap();
//! assert!(inst.verify(&run, &alloc).unwrap().verdict);
//! ```

pub mod allocation;
pub mod bench;
pub mod matching;
pub mod measures;
pub mod oracle;
pub mod protocol;
pub mod rational;
pub mod sim;
pub mod stepper;

pub use allocation::{
    allocation_table, assign_given_choice, secret_best_piece, verify_proportional, Allocation, AllocationError,
    AllocationTable, ProportionalityReport, Valuations,
};
pub use matching::{enumerate_acceptable_matchings, AcceptabilityGraph, MatchingError};
pub use measures::{cut_point, cut_share_point, eval_measure, random_valuation, validate_valuation, Interval, MeasureError, Valuation};
pub use oracle::{
    dispatch, queries_to, Answer, Dispatcher, Endpoints, GuestId, Mediator, OracleError, Query, QueryKind, Roster,
    Transcript,
};
pub use protocol::{dc_secret, even_paz_classic, pieces_of, predicted_cut_count, PartitionTree, PieceIndex, PieceList};
pub use rational::Rational;
pub use sim::{DcSecretRun, Instance};
pub use stepper::{Outcome, Protocol, StepError, StepStatus, Stepper};
