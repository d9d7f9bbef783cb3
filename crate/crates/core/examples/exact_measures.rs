//! Piecewise-constant measures with exact answers to both query kinds.

use cakecut::rational::q;
use cakecut::{cut_point, eval_measure, validate_valuation, Interval, Valuation};

fn main() {
    // All of the value sits in the first half, at density 2.
    let front = validate_valuation(vec![q(0, 1), q(1, 2), q(1, 1)], vec![q(2, 1), q(0, 1)]).unwrap();
    let uniform = Valuation::uniform();

    let sixth = Interval::new(q(0, 1), q(1, 6)).unwrap();
    println!("front-loaded value of {sixth}: {}", eval_measure(&front, &sixth));
    println!("uniform value of {sixth}: {}", eval_measure(&uniform, &sixth));

    // The leftmost cut is reported even when the density is zero past it.
    let cut = cut_point(&front, &q(0, 1), &q(1, 1)).unwrap();
    println!("front-loaded cut holding everything from 0: {cut}");

    // Bad documents report every violation at once.
    let err = validate_valuation(vec![q(0, 1), q(3, 4), q(1, 2)], vec![q(-1, 1), q(2, 1)]).unwrap_err();
    println!("rejected: {err}");

    let doc = serde_json::to_string(&front).unwrap();
    println!("file form: {doc}");
}
