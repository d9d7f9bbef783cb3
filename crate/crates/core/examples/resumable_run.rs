//! Drive the partition one answer at a time, the way a server waiting on
//! people would.

use cakecut::oracle::{AgentEndpoint, SimulatedAgent};
use cakecut::{Instance, Interval, Outcome, Protocol, Stepper};

fn main() {
    let inst = Instance::random(5, 3, 2).unwrap();
    let mut stepper = Stepper::new(Protocol::DcSecret {
        cake: Interval::unit(),
        agents: inst.guests(),
    })
    .unwrap();

    while let Some(q) = stepper.outstanding().cloned() {
        let who = q.agent().get() as usize - 1;
        let value = SimulatedAgent::new(inst.valuations()[who].clone()).answer(&q).unwrap();
        println!("{q} -> {value}");
        // A rejected answer leaves the stepper exactly where it was.
        if let Err(e) = stepper.answer(cakecut::Rational::new(-1, 1)) {
            assert_eq!(stepper.outstanding(), Some(&q));
            if stepper.journal().is_empty() {
                println!("  (rejected a bogus answer: {e})");
            }
        }
        stepper.answer(value).unwrap();
    }

    let Some(Outcome::Partition(tree)) = stepper.outcome() else {
        unreachable!()
    };
    assert_eq!(tree, &inst.dc_secret().unwrap().tree);
    println!("same tree as the direct run:\n{}", tree.to_json());
}
