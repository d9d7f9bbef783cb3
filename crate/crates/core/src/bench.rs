//! Query-count sweeps.

use rayon::prelude::*;
use serde::Serialize;

use crate::allocation::secret_best_piece;
use crate::measures::random_valuation;
use crate::oracle::Transcript;
use crate::protocol::predicted_cut_count;
use crate::sim::{guest_seed, Instance};

/// Segments per random valuation in sweeps.
pub const BENCH_SEGMENTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueryCountRow {
    pub n: usize,
    pub trial: usize,
    pub cuts: usize,
    pub predicted_cuts: u64,
    /// Assignment-phase evals for the secret agent's best piece.
    pub evals: usize,
    pub total: usize,
    pub bound: u64,
}

impl QueryCountRow {
    pub fn within_bound(&self) -> bool {
        self.total as u64 <= self.bound
    }

    pub fn cuts_match(&self) -> bool {
        self.cuts as u64 == self.predicted_cuts
    }
}

/// `4 n ceil(log2(n + 2)) + 4`.
pub fn total_query_bound(n: usize) -> u64 {
    let n = n as u64;
    let ceil_log2 = 64 - (n + 1).leading_zeros() as u64;
    4 * n * ceil_log2 + 4
}

fn trial_seed(seed: u64, n: usize, trial: usize) -> u64 {
    guest_seed(guest_seed(seed, n), trial)
}

/// One partition plus one assignment on a random instance.
pub fn measure(n: usize, trial: usize, seed: u64) -> QueryCountRow {
    let s = trial_seed(seed, n, trial);
    let inst = Instance::random(s, n, BENCH_SEGMENTS).expect("valid parameters");
    let run = inst.dc_secret().expect("simulated agents answer every query");
    let secret = random_valuation(s ^ 0x5EC2E7, BENCH_SEGMENTS).expect("segments > 0");
    let (chosen, _) = secret_best_piece(&run.pieces, &secret);
    let mut t = Transcript::new();
    inst.assign(&run, chosen, &mut t).expect("choice in range");
    let cuts = run.transcript.cut_count();
    let evals = t.eval_count();
    QueryCountRow {
        n,
        trial,
        cuts,
        predicted_cuts: predicted_cut_count(n as u64).expect("n >= 1"),
        evals,
        total: run.transcript.len() + t.len(),
        bound: total_query_bound(n),
    }
}

/// Rows for every `n` in `1..=n_max` and every trial, ordered by `n` then trial.
pub fn query_count_sweep(n_max: usize, trials: usize, seed: u64) -> Vec<QueryCountRow> {
    let jobs: Vec<(usize, usize)> = (1..=n_max)
        .flat_map(|n| (0..trials).map(move |t| (n, t)))
        .collect();
    jobs.par_iter().map(|&(n, t)| measure(n, t, seed)).collect()
}
