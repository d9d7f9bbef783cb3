//! One guest and one secret participant: the guest halves the cake by its own
//! measure and the secret participant takes either half.

use cakecut::rational::q;
use cakecut::{validate_valuation, Instance, PieceIndex, Transcript};

fn main() {
    let guest = validate_valuation(vec![q(0, 1), q(1, 4), q(1, 1)], vec![q(3, 1), q(1, 3)]).unwrap();
    let inst = Instance::new(vec![guest]).unwrap();
    let run = inst.dc_secret().unwrap();
    print!("{}", run.transcript.to_text());
    for j in run.pieces.indices() {
        let mut t = Transcript::new();
        let alloc = inst.assign(&run, j, &mut t).unwrap();
        let report = inst.verify(&run, &alloc).unwrap();
        let share = &report.shares[0];
        println!(
            "secret takes {} {}; guest gets {} worth {}",
            j.get(),
            run.pieces.get(j).unwrap(),
            run.pieces.get(share.piece).unwrap(),
            share.mass
        );
    }
    assert!(run.pieces.contains_index(PieceIndex::new(2).unwrap()));
}
