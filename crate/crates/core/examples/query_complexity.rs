//! Measured cut and evaluation counts against the recurrence and the
//! `4 n ceil(log2(n + 2)) + 4` bound.

use cakecut::bench::query_count_sweep;

fn main() {
    let n_max = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    println!("{:>5} {:>7} {:>9} {:>6} {:>7} {:>7}", "n", "cuts", "predicted", "evals", "total", "bound");
    for r in query_count_sweep(n_max, 1, 1).iter().filter(|r| r.n.is_power_of_two() || r.n == n_max) {
        println!(
            "{:>5} {:>7} {:>9} {:>6} {:>7} {:>7}",
            r.n, r.cuts, r.predicted_cuts, r.evals, r.total, r.bound
        );
        assert!(r.cuts_match() && r.within_bound());
    }
}
