//! Five friends cut a cake for themselves and for a sixth guest who has not
//! arrived yet. The latecomer picks any piece and everyone still gets a fair
//! share.

use cakecut::{random_valuation, secret_best_piece, Instance, Transcript};

fn main() {
    let inst = Instance::random(2024, 5, 4).unwrap();
    let run = inst.dc_secret().unwrap();
    println!("{} queries, all to the five who are present", run.transcript.len());
    for (i, p) in run.pieces.iter() {
        println!("  piece {}: {p}", i.get());
    }

    // Every choice the latecomer could make is resolved up front.
    let mut t = Transcript::new();
    let table = inst.table(&run, &mut t).unwrap();
    println!("allocation table cost {} evaluations", t.eval_count());

    let latecomer = random_valuation(99, 6).unwrap();
    let (j, worth) = secret_best_piece(&run.pieces, &latecomer);
    println!("latecomer takes piece {} worth {worth} to them", j.get());
    let report = inst.verify(&run, &table[&j]).unwrap();
    for s in &report.shares {
        println!(
            "  friend {} gets piece {} worth {} (needs {})",
            s.agent,
            s.piece.get(),
            s.mass,
            s.threshold
        );
    }
    assert!(report.verdict);
}
