//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use cakecut::bench::query_count_sweep;
use cakecut::oracle::count_text_queries_to;
use cakecut::protocol::PartitionTree;
use cakecut::sim::guest_seed;
use cakecut::{
    assign_given_choice, dispatch, enumerate_acceptable_matchings, queries_to, random_valuation, secret_best_piece,
    AcceptabilityGraph, DcSecretRun, Dispatcher, Instance, Interval, Outcome, PieceIndex, Protocol, Rational,
    Stepper, Transcript,
};
use rayon::prelude::*;

const BASE_SEED: u64 = 0xC0FFEE;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn segments_for(seed: u64) -> usize {
    1 + (seed % 5) as usize
}

fn instance(n: usize, trial: usize) -> Instance {
    let seed = guest_seed(BASE_SEED, n * 10_000 + trial);
    Instance::random(seed, n, segments_for(seed)).expect("valid parameters")
}

fn choices(run: &DcSecretRun) -> impl Iterator<Item = PieceIndex> + '_ {
    run.pieces.indices()
}

struct SecrecyTally {
    transcripts: usize,
    queries: usize,
}

/// The secret seat cannot be named by the roster, no tree node belongs to
/// it, and neither the structured nor the exported transcript addresses it.
fn check_secrecy(inst: &Instance, tree: &PartitionTree, t: &Transcript) -> Result<(), String> {
    let secret = inst.roster().secret_id();
    if inst.roster().guest(secret).is_ok() {
        return Err("roster minted an id for the secret seat".into());
    }
    if tree.agents().iter().any(|a| a.get() == secret) {
        return Err("partition tree contains the secret seat".into());
    }
    if !t.counters_consistent() {
        return Err("transcript counters disagree with entries".into());
    }
    let structured = queries_to(t, secret);
    let text = count_text_queries_to(&t.to_text(), secret);
    let lines = t.to_text().lines().count();
    if structured != 0 || text != 0 || lines != t.len() {
        return Err(format!(
            "secret seat {secret}: {structured} recorded, {text} in text export ({lines} lines for {} entries)",
            t.len()
        ));
    }
    Ok(())
}

fn proportionality_and_secrecy() -> (Check, Check) {
    let jobs: Vec<(usize, usize)> = (1..=12).flat_map(|n| (0..100).map(move |t| (n, t))).collect();
    let results: Vec<Result<(usize, SecrecyTally), (String, String)>> = jobs
        .par_iter()
        .map(|&(n, trial)| {
            let inst = instance(n, trial);
            let tag = format!("n={n} trial={trial}");
            let run = inst.dc_secret().map_err(|e| (format!("{tag}: {e}"), String::new()))?;
            let mut t = run.transcript.clone();
            let table = inst.table(&run, &mut t).map_err(|e| (format!("{tag}: {e}"), String::new()))?;
            let secrecy = check_secrecy(&inst, &run.tree, &t).map_err(|e| (String::new(), format!("{tag}: {e}")));
            if table.len() != n + 1 {
                return Err((format!("{tag}: table has {} entries", table.len()), String::new()));
            }
            let mut checks = 0;
            for (j, alloc) in &table {
                let report = inst.verify(&run, alloc).map_err(|e| (format!("{tag}: {e}"), String::new()))?;
                if !report.verdict {
                    return Err((
                        format!("{tag} j={}: agents {:?} below 1/{}", j.get(), report.failing_agents(), n + 1),
                        String::new(),
                    ));
                }
                checks += report.shares.len();
            }
            secrecy?;
            Ok((
                checks,
                SecrecyTally {
                    transcripts: 1,
                    queries: t.len(),
                },
            ))
        })
        .collect();

    let mut inequalities = 0;
    let mut tally = SecrecyTally {
        transcripts: 0,
        queries: 0,
    };
    let mut thm_err = None;
    let mut sec_err = None;
    for r in results {
        match r {
            Ok((c, s)) => {
                inequalities += c;
                tally.transcripts += s.transcripts;
                tally.queries += s.queries;
            }
            Err((t, s)) => {
                if !t.is_empty() && thm_err.is_none() {
                    thm_err = Some(t);
                }
                if !s.is_empty() && sec_err.is_none() {
                    sec_err = Some(s);
                }
            }
        }
    }
    let thm = match thm_err {
        Some(e) => Err(e),
        None => Ok(format!("1200 runs, {inequalities} exact inequalities over every choice")),
    };
    let sec = match (sec_err, &thm) {
        (Some(e), _) => Err(e),
        (None, Err(_)) => Err("not every run completed".into()),
        (None, Ok(_)) => Ok(format!(
            "{} transcripts, {} queries, none to the secret seat",
            tally.transcripts, tally.queries
        )),
    };
    (thm, sec)
}

fn complexity() -> Check {
    let rows = query_count_sweep(1024, 1, BASE_SEED);
    if let Some(r) = rows.iter().find(|r| !r.cuts_match()) {
        return Err(format!("n={}: {} cuts, predicted {}", r.n, r.cuts, r.predicted_cuts));
    }
    if let Some(r) = rows.iter().find(|r| !r.within_bound()) {
        return Err(format!("n={}: {} queries exceeds bound {}", r.n, r.total, r.bound));
    }
    let worst = rows
        .iter()
        .map(|r| (r.total as f64 / r.bound as f64, r.n))
        .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a });
    Ok(format!(
        "n=1..=1024, cuts exact, worst total/bound {:.3} at n={}",
        worst.0, worst.1
    ))
}

fn oracle() -> Check {
    let jobs: Vec<(usize, usize)> = (1..=8).flat_map(|n| (0..25).map(move |t| (n, t))).collect();
    let counts: Result<Vec<usize>, String> = jobs
        .par_iter()
        .map(|&(n, trial)| {
            let inst = instance(n, trial);
            let run = inst.dc_secret().map_err(|e| e.to_string())?;
            let vals = inst.valuation_map();
            let mut members = 0;
            for j in choices(&run) {
                let mut t = Transcript::new();
                let alloc = inst.assign(&run, j, &mut t).map_err(|e| e.to_string())?;
                let graph = AcceptabilityGraph::new(&run.pieces, &vals, n + 1, j).map_err(|e| e.to_string())?;
                let exhaustive = graph.exhaustive();
                let matched = graph.via_matching();
                if exhaustive != matched {
                    return Err(format!(
                        "n={n} trial={trial} j={}: exhaustive found {}, matching found {}",
                        j.get(),
                        exhaustive.len(),
                        matched.len()
                    ));
                }
                let listed = enumerate_acceptable_matchings(&run.pieces, &vals, n + 1, j).map_err(|e| e.to_string())?;
                if listed != exhaustive || !listed.contains(&alloc.assignment) {
                    return Err(format!("n={n} trial={trial} j={}: assignment not acceptable", j.get()));
                }
                members += 1;
            }
            Ok(members)
        })
        .collect();
    counts.map(|c| format!("{} instances, {} choices checked", jobs.len(), c.iter().sum::<usize>()))
}

fn uniform_closed_form() -> Check {
    for n in 1..=64 {
        let inst = Instance::uniform(n).expect("n >= 1");
        let run = inst.dc_secret().map_err(|e| e.to_string())?;
        let want = Rational::new(1, n as i64 + 1);
        if run.pieces.len() != n + 1 {
            return Err(format!("n={n}: {} pieces", run.pieces.len()));
        }
        let wrong = run.pieces.iter().find(|(_, p)| p.length() != want).map(|(i, p)| (i, p.clone()));
        if let Some((i, p)) = wrong {
            return Err(format!("n={n}: piece {} is {p}", i.get()));
        }
    }
    Ok("n=1..=64, every piece exactly 1/(n+1)".into())
}

fn pigeonhole() -> Check {
    let results: Result<Vec<()>, String> = (0..1000usize)
        .into_par_iter()
        .map(|k| {
            let n = 1 + k % 12;
            let inst = instance(n, 500 + k);
            let run = inst.dc_secret().map_err(|e| e.to_string())?;
            let seed = guest_seed(BASE_SEED ^ 0x5EC2E7, k);
            let secret = random_valuation(seed, segments_for(seed)).map_err(|e| e.to_string())?;
            let (j, mass) = secret_best_piece(&run.pieces, &secret);
            if mass < Rational::new(1, n as i64 + 1) {
                return Err(format!("secret {k}, n={n}: piece {} has mass {mass}", j.get()));
            }
            Ok(())
        })
        .collect();
    results.map(|_| "1000 secrets, best piece always >= 1/(n+1)".into())
}

fn baseline_contrast() -> Check {
    let inst = instance(4, 0);
    let (ep, ep_t) = inst.even_paz().map_err(|e| e.to_string())?;
    if ep.pieces.len() != 4 {
        return Err(format!("even-paz produced {} pieces", ep.pieces.len()));
    }
    let ep_agents: Vec<u32> = ep_t.counts().keys().map(|g| g.get()).collect();
    if ep_agents != [1, 2, 3, 4] {
        return Err(format!("even-paz queried {ep_agents:?}"));
    }
    let run = inst.dc_secret().map_err(|e| e.to_string())?;
    let dc_agents: Vec<u32> = run.transcript.counts().keys().map(|g| g.get()).collect();
    if dc_agents != [1, 2, 3, 4] || run.pieces.len() != 5 {
        return Err(format!("dc-secret queried {dc_agents:?} and produced {} pieces", run.pieces.len()));
    }
    Ok(format!(
        "even-paz: 4 agents queried, 4 pieces; dc-secret: agents 1-4 queried, 5 pieces, {} queries",
        run.transcript.len()
    ))
}

fn drive(inst: &Instance, protocol: Protocol) -> Result<(Outcome, Transcript), String> {
    let mut stepper = Stepper::new(protocol).map_err(|e| e.to_string())?;
    let mut scratch = Transcript::new();
    let outcome = stepper
        .drive(|q| dispatch(q.clone(), inst.endpoints(), &mut scratch))
        .map_err(|e| e.to_string())?
        .clone();
    let t = stepper.transcript();
    if t != scratch {
        return Err("stepper journal differs from dispatched answers".into());
    }
    Ok((outcome, t))
}

fn stepper_equivalence() -> Check {
    let mut compared = 0;
    for seed in 0..20usize {
        let n = 1 + seed % 9;
        let inst = instance(n, 900 + seed);
        let direct = inst.dc_secret().map_err(|e| e.to_string())?;
        let cake = Interval::unit();
        let (outcome, t) = drive(
            &inst,
            Protocol::DcSecret {
                cake,
                agents: inst.guests(),
            },
        )?;
        let Outcome::Partition(tree) = outcome else {
            return Err("partition stepper returned another outcome".into());
        };
        if tree != direct.tree || cakecut::pieces_of(&tree) != direct.pieces || t != direct.transcript {
            return Err(format!("seed {seed}: partition differs"));
        }
        for j in choices(&direct) {
            let mut dt = Transcript::new();
            let mut d = Dispatcher::new(inst.endpoints(), &mut dt);
            let alloc = assign_given_choice(&direct.tree, j, &mut d).map_err(|e| e.to_string())?;
            let (outcome, st) = drive(
                &inst,
                Protocol::Assign {
                    tree: direct.tree.clone(),
                    chosen: j,
                },
            )?;
            if outcome != Outcome::Allocation(alloc) || st != dt {
                return Err(format!("seed {seed} j={}: assignment differs", j.get()));
            }
        }
        let mut dt = Transcript::new();
        let table = inst.table(&direct, &mut dt).map_err(|e| e.to_string())?;
        let (outcome, st) = drive(
            &inst,
            Protocol::AllocationTable {
                tree: direct.tree.clone(),
            },
        )?;
        if outcome != Outcome::Table(table) || st != dt {
            return Err(format!("seed {seed}: allocation table differs"));
        }
        compared += 1;
    }
    Ok(format!("{compared} instances: pieces, allocations, tables and transcripts identical"))
}

fn table_eval_budget() -> Check {
    for n in 1..=64 {
        for trial in 0..5 {
            let inst = instance(n, 2000 + trial);
            let run = inst.dc_secret().map_err(|e| e.to_string())?;
            let mut t = Transcript::new();
            inst.table(&run, &mut t).map_err(|e| e.to_string())?;
            let budget = (n + 1) * run.tree.depth();
            if t.cut_count() != 0 || t.eval_count() > budget {
                return Err(format!("n={n}: {} evals, budget {budget}", t.eval_count()));
            }
        }
    }
    Ok("n=1..=64, allocation table evals <= (n+1)*depth".into())
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |name: &str, started: Instant, r: Check| {
        let secs = started.elapsed().as_secs_f64();
        match r {
            Ok(msg) => println!("PASS  {name:<28} {msg} [{secs:.1}s]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name:<28} {msg} [{secs:.1}s]");
            }
        }
    };

    let t0 = Instant::now();
    let (thm, sec) = proportionality_and_secrecy();
    report("proportionality (n<=12)", t0, thm);
    report("secrecy", t0, sec);

    let checks: [Criterion; 7] = [
        ("query complexity (n<=1024)", complexity),
        ("matching oracle (n<=8)", oracle),
        ("uniform closed form (n<=64)", uniform_closed_form),
        ("pigeonhole", pigeonhole),
        ("baseline contrast", baseline_contrast),
        ("stepper equivalence", stepper_equivalence),
        ("allocation table eval budget", table_eval_budget),
    ];
    for (name, f) in checks {
        let t = Instant::now();
        report(name, t, f());
    }

    if failed == 0 {
        println!("all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
