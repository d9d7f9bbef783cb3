//! Cross-check the protocol's assignment against every acceptable perfect
//! matching of guests to the pieces the secret participant left.

use cakecut::{enumerate_acceptable_matchings, AcceptabilityGraph, Instance, Transcript};

fn main() {
    let inst = Instance::random(31, 5, 3).unwrap();
    let run = inst.dc_secret().unwrap();
    let vals = inst.valuation_map();
    let n = inst.n();
    for j in run.pieces.indices() {
        let mut t = Transcript::new();
        let alloc = inst.assign(&run, j, &mut t).unwrap();
        let all = enumerate_acceptable_matchings(&run.pieces, &vals, n + 1, j).unwrap();
        let graph = AcceptabilityGraph::new(&run.pieces, &vals, n + 1, j).unwrap();
        assert_eq!(graph.exhaustive(), graph.via_matching());
        let picked: Vec<String> = alloc
            .assignment
            .iter()
            .map(|(g, p)| format!("{g}->{}", p.get()))
            .collect();
        println!(
            "secret takes {}: {} acceptable matchings, protocol picked [{}] (member: {})",
            j.get(),
            all.len(),
            picked.join(" "),
            all.contains(&alloc.assignment)
        );
    }
}
