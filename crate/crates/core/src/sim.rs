//! Simulated instances: a roster of guests with known valuations.

use crate::allocation::{
    allocation_table, assign_given_choice, valuations_for, verify_proportional, Allocation, AllocationError,
    AllocationTable, ProportionalityReport, Valuations,
};
use crate::measures::{random_valuation, Interval, MeasureError, Valuation};
use crate::oracle::{Dispatcher, Endpoints, GuestId, Roster, RosterError, Transcript};
use crate::protocol::{dc_secret, even_paz_classic, pieces_of, EvenPazOutcome, PartitionTree, PieceIndex, PieceList, ProtocolError};

#[derive(Clone)]
pub struct Instance {
    roster: Roster,
    valuations: Vec<Valuation>,
    endpoints: Endpoints,
}

/// Seed for guest `i` of an instance drawn from `seed`.
pub fn guest_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64 + 1)
}

impl Instance {
    pub fn new(valuations: Vec<Valuation>) -> Result<Self, RosterError> {
        let roster = Roster::new(valuations.len())?;
        let endpoints = Endpoints::simulated(&roster, &valuations);
        Ok(Instance {
            roster,
            valuations,
            endpoints,
        })
    }

    pub fn uniform(n: usize) -> Result<Self, RosterError> {
        Self::new(vec![Valuation::uniform(); n])
    }

    /// `n` guests with independent random valuations of `segments` pieces each.
    pub fn random(seed: u64, n: usize, segments: usize) -> Result<Self, MeasureError> {
        let vals = (0..n)
            .map(|i| random_valuation(guest_seed(seed, i), segments))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(vals).map_err(|_| MeasureError::NoSegments)
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn guests(&self) -> Vec<GuestId> {
        self.roster.guests().collect()
    }

    pub fn valuations(&self) -> &[Valuation] {
        &self.valuations
    }

    pub fn valuation_map(&self) -> Valuations {
        valuations_for(&self.roster, &self.valuations)
    }

    pub fn endpoints(&self) -> &Endpoints {
        &self.endpoints
    }

    pub fn n(&self) -> usize {
        self.roster.len()
    }

    pub fn dc_secret(&self) -> Result<DcSecretRun, ProtocolError> {
        let mut transcript = Transcript::new();
        let tree = dc_secret(
            &Interval::unit(),
            &self.guests(),
            &mut Dispatcher::new(&self.endpoints, &mut transcript),
        )?;
        Ok(DcSecretRun {
            pieces: pieces_of(&tree),
            tree,
            transcript,
        })
    }

    pub fn even_paz(&self) -> Result<(EvenPazOutcome, Transcript), ProtocolError> {
        let mut t = Transcript::new();
        let out = even_paz_classic(&Interval::unit(), &self.guests(), &mut Dispatcher::new(&self.endpoints, &mut t))?;
        Ok((out, t))
    }

    /// Allocation for `chosen`, with queries appended to `t`.
    pub fn assign(&self, run: &DcSecretRun, chosen: PieceIndex, t: &mut Transcript) -> Result<Allocation, AllocationError> {
        assign_given_choice(&run.tree, chosen, &mut Dispatcher::new(&self.endpoints, t))
    }

    pub fn table(&self, run: &DcSecretRun, t: &mut Transcript) -> Result<AllocationTable, AllocationError> {
        allocation_table(&run.tree, &mut Dispatcher::new(&self.endpoints, t))
    }

    pub fn verify(&self, run: &DcSecretRun, alloc: &Allocation) -> Result<ProportionalityReport, AllocationError> {
        verify_proportional(&run.pieces, alloc, &self.valuation_map(), self.n() + 1)
    }
}

/// Output of one partition run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DcSecretRun {
    pub tree: PartitionTree,
    pub pieces: PieceList,
    pub transcript: Transcript,
}
