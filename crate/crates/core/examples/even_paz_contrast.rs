//! Classic divide and conquer against the secret-seat variant on the same
//! four agents.

use cakecut::Instance;

fn main() {
    let inst = Instance::random(7, 4, 3).unwrap();

    let (ep, ep_t) = inst.even_paz().unwrap();
    println!("even-paz: {} pieces, {} queries", ep.pieces.len(), ep_t.len());
    for (g, c) in ep_t.counts() {
        println!("  agent {g}: {} cuts, {} evals", c.cut, c.eval);
    }

    let run = inst.dc_secret().unwrap();
    println!("dc-secret: {} pieces, {} queries", run.pieces.len(), run.transcript.len());
    for (g, c) in run.transcript.counts() {
        println!("  agent {g}: {} cuts, {} evals", c.cut, c.eval);
    }
    println!("seat {} was never asked anything", inst.roster().secret_id());
}
