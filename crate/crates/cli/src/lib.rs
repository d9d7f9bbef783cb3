//! Subcommands behind the `cakecut` binary.
//!
//! Every command returns [`Failure`] on error; the binary maps
//! `Failure::Violation` to exit status 1 and `Failure::Input` to 2.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cakecut::allocation::{read_allocations_csv, valuations_for, write_report_csv};
use cakecut::bench::query_count_sweep;
use cakecut::measures::ValuationDoc;
use cakecut::{
    eval_measure, verify_proportional, Instance, Interval, PieceIndex, PieceList,
    ProportionalityReport, Rational, Transcript, Valuation,
};

#[derive(Debug)]
pub enum Failure {
    /// A fairness property does not hold.
    Violation(String),
    /// Unreadable, malformed or inconsistent input.
    Input(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Violation(_) => 1,
            Failure::Input(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Violation(m) | Failure::Input(m) => m,
        }
    }
}

fn input(e: impl std::fmt::Display) -> Failure {
    Failure::Input(e.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Parses a JSON array of valuation documents, listing every violation of
/// every entry on failure.
pub fn parse_valuations(text: &str) -> Result<Vec<Valuation>, Failure> {
    let docs: Vec<ValuationDoc> =
        serde_json::from_str(text).map_err(|e| Failure::Input(format!("valuations: {e}")))?;
    if docs.is_empty() {
        return Err(Failure::Input("valuations: need at least one agent".into()));
    }
    let mut out = Vec::with_capacity(docs.len());
    let mut problems = String::new();
    for (i, doc) in docs.into_iter().enumerate() {
        match Valuation::try_from(doc) {
            Ok(v) => out.push(v),
            Err(errs) => {
                for v in errs.0 {
                    let _ = writeln!(problems, "  valuation {}: {v}", i + 1);
                }
            }
        }
    }
    if problems.is_empty() {
        Ok(out)
    } else {
        Err(Failure::Input(format!("invalid valuations:\n{}", problems.trim_end())))
    }
}

pub fn load_valuations(path: &Path) -> Result<Vec<Valuation>, Failure> {
    parse_valuations(&read(path)?).map_err(|e| match e {
        Failure::Input(m) => Failure::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn random_valuations(seed: u64, n: usize, segments: usize) -> Result<Vec<Valuation>, Failure> {
    let inst = Instance::random(seed, n, segments).map_err(input)?;
    Ok(inst.valuations().to_vec())
}

pub fn valuations_json(vals: &[Valuation]) -> String {
    serde_json::to_string_pretty(vals).expect("valuations serialize") + "\n"
}

fn show(x: &Rational, decimal: Option<usize>) -> String {
    match decimal {
        Some(k) => x.to_decimal(k),
        None => x.to_string(),
    }
}

fn show_interval(iv: &Interval, decimal: Option<usize>) -> String {
    format!("[{}, {}]", show(iv.lo(), decimal), show(iv.hi(), decimal))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    DcSecret,
    EvenPaz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    All,
    One(usize),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub valuations: Vec<Valuation>,
    pub choice: Choice,
    pub out_dir: Option<PathBuf>,
    pub transcript: Option<PathBuf>,
    pub decimal: Option<usize>,
}

/// Runs a protocol and writes its artifacts. Returns the text summary.
pub fn run(cfg: &RunConfig) -> Result<String, Failure> {
    match cfg.mode {
        Mode::DcSecret => run_dc_secret(cfg),
        Mode::EvenPaz => run_even_paz(cfg),
    }
}

fn out_path(cfg: &RunConfig, name: &str) -> Result<Option<PathBuf>, Failure> {
    let Some(dir) = &cfg.out_dir else {
        return Ok(None);
    };
    fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
    Ok(Some(dir.join(name)))
}

fn write_common(cfg: &RunConfig, pieces: &PieceList, t: &Transcript) -> Result<(), Failure> {
    if let Some(p) = out_path(cfg, "valuations.json")? {
        write(&p, valuations_json(&cfg.valuations))?;
    }
    if let Some(p) = out_path(cfg, "pieces.json")? {
        write(&p, serde_json::to_string_pretty(pieces).expect("pieces serialize") + "\n")?;
    }
    if let Some(p) = out_path(cfg, "transcript.txt")? {
        write(&p, t.to_text())?;
    }
    if let Some(p) = &cfg.transcript {
        write(p, t.to_text())?;
    }
    Ok(())
}

fn run_dc_secret(cfg: &RunConfig) -> Result<String, Failure> {
    let inst = Instance::new(cfg.valuations.clone()).map_err(input)?;
    let n = inst.n();
    let run = inst.dc_secret().map_err(input)?;
    let mut t = run.transcript.clone();
    let allocations = match cfg.choice {
        Choice::All => inst.table(&run, &mut t).map_err(input)?.into_values().collect(),
        Choice::One(j) => {
            let chosen = PieceIndex::new(j)
                .filter(|p| run.pieces.contains_index(*p))
                .ok_or_else(|| Failure::Input(format!("--choice must be in 1..={}, got {j}", n + 1)))?;
            vec![inst.assign(&run, chosen, &mut t).map_err(input)?]
        }
    };
    let reports = allocations
        .iter()
        .map(|a| inst.verify(&run, a))
        .collect::<Result<Vec<_>, _>>()
        .map_err(input)?;

    write_common(cfg, &run.pieces, &t)?;
    if let Some(p) = out_path(cfg, "tree.json")? {
        write(&p, run.tree.to_json() + "\n")?;
    }
    if let Some(p) = out_path(cfg, "allocations.csv")? {
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &reports).map_err(input)?;
        write(&p, buf)?;
    }

    let mut out = String::new();
    let _ = writeln!(out, "dc-secret: {n} guests, {} pieces, {} queries", run.pieces.len(), t.len());
    for (i, p) in run.pieces.iter() {
        let _ = writeln!(out, "  piece {}: {}", i.get(), show_interval(p, cfg.decimal));
    }
    let _ = writeln!(out, "{} allocations", reports.len());
    for r in &reports {
        let picks: Vec<String> = r
            .shares
            .iter()
            .map(|s| format!("{}->{}", s.agent, s.piece.get()))
            .collect();
        let _ = writeln!(
            out,
            "  secret takes {}: {} {}",
            r.secret_choice.get(),
            picks.join(" "),
            if r.verdict { "ok" } else { "VIOLATION" }
        );
    }
    match failing(&reports) {
        Some(msg) => Err(Failure::Violation(format!("{out}{msg}"))),
        None => Ok(out),
    }
}

fn run_even_paz(cfg: &RunConfig) -> Result<String, Failure> {
    if cfg.choice != Choice::All {
        return Err(Failure::Input("--choice applies to dc-secret only".into()));
    }
    let inst = Instance::new(cfg.valuations.clone()).map_err(input)?;
    let n = inst.n();
    let (outcome, t) = inst.even_paz().map_err(input)?;
    write_common(cfg, &outcome.pieces, &t)?;

    let d = Rational::from_integer(n as i64);
    let mut csv = String::from("agent,piece,mass,threshold,ok\n");
    let mut out = String::new();
    let _ = writeln!(out, "even-paz: {n} agents, {} pieces, {} queries", outcome.pieces.len(), t.len());
    let mut bad = Vec::new();
    for (g, piece) in &outcome.assignment {
        let v = &inst.valuations()[g.get() as usize - 1];
        let iv = outcome.pieces.get(*piece).expect("assigned piece exists");
        let mass = eval_measure(v, iv);
        let threshold = eval_measure(v, &outcome.pieces.cake()) / &d;
        let ok = mass >= threshold;
        if !ok {
            bad.push(g.get());
        }
        let _ = writeln!(csv, "{g},{},{mass},{threshold},{ok}", piece.get());
        let _ = writeln!(
            out,
            "  agent {g}: piece {} {} worth {}",
            piece.get(),
            show_interval(iv, cfg.decimal),
            show(&mass, cfg.decimal)
        );
    }
    let queried: Vec<String> = t.counts().keys().map(ToString::to_string).collect();
    let _ = writeln!(out, "queried agents: {}", queried.join(" "));
    if let Some(p) = out_path(cfg, "assignment.csv")? {
        write(&p, csv)?;
    }
    if bad.is_empty() {
        Ok(out)
    } else {
        Err(Failure::Violation(format!("{out}agents below 1/{n}: {bad:?}")))
    }
}

fn failing(reports: &[ProportionalityReport]) -> Option<String> {
    let mut msg = String::new();
    for r in reports {
        for s in r.shares.iter().filter(|s| !s.ok) {
            let _ = writeln!(
                msg,
                "choice {}: agent {} receives piece {} worth {}, below {}",
                r.secret_choice.get(),
                s.agent,
                s.piece.get(),
                s.mass,
                s.threshold
            );
        }
    }
    (!msg.is_empty()).then_some(msg)
}

/// Re-verifies exported artifacts using only the files.
pub fn verify(pieces: &Path, allocations: &Path, valuations: &Path) -> Result<String, Failure> {
    let vals = load_valuations(valuations)?;
    let pieces: PieceList = serde_json::from_str(&read(pieces)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", pieces.display())))?;
    let inst = Instance::new(vals.clone()).map_err(input)?;
    let n = inst.n();
    if pieces.len() != n + 1 {
        return Err(Failure::Input(format!(
            "{} pieces for {n} guests; expected {}",
            pieces.len(),
            n + 1
        )));
    }
    if pieces.cake() != Interval::unit() {
        return Err(Failure::Input(format!("pieces cover {}, not [0,1]", pieces.cake())));
    }
    let text = read(allocations)?;
    let allocs = read_allocations_csv(text.as_bytes(), inst.roster())
        .map_err(|e| Failure::Input(format!("{}: {e}", allocations.display())))?;
    if allocs.is_empty() {
        return Err(Failure::Input(format!("{}: no allocations", allocations.display())));
    }
    let vm = valuations_for(inst.roster(), &vals);
    let mut reports = Vec::with_capacity(allocs.len());
    for a in &allocs {
        match verify_proportional(&pieces, a, &vm, n + 1) {
            Ok(r) => reports.push(r),
            Err(e) => {
                return Err(Failure::Violation(format!(
                    "choice {}: {e}",
                    a.secret_choice.get()
                )))
            }
        }
    }
    if let Some(msg) = failing(&reports) {
        return Err(Failure::Violation(msg));
    }
    Ok(format!(
        "verified {} allocations for {n} guests: every guest receives at least 1/{} of the cake\n",
        reports.len(),
        n + 1
    ))
}

/// Query-count table for `1..=n_max`, plus whether every row held.
pub fn bench(n_max: usize, trials: usize, seed: u64) -> Result<String, Failure> {
    if n_max == 0 || trials == 0 {
        return Err(Failure::Input("--n-max and --trials must be at least 1".into()));
    }
    let rows = query_count_sweep(n_max, trials, seed);
    let mut out = format!(
        "{:>6} {:>5} {:>8} {:>9} {:>6} {:>8} {:>8}\n",
        "n", "trial", "cuts", "predicted", "evals", "total", "bound"
    );
    let mut flagged = 0;
    for r in &rows {
        let flag = if r.cuts_match() && r.within_bound() {
            ""
        } else {
            flagged += 1;
            "  EXCEEDED"
        };
        let _ = writeln!(
            out,
            "{:>6} {:>5} {:>8} {:>9} {:>6} {:>8} {:>8}{flag}",
            r.n, r.trial, r.cuts, r.predicted_cuts, r.evals, r.total, r.bound
        );
    }
    if flagged > 0 {
        Err(Failure::Violation(format!("{out}{flagged} rows exceeded the bound or the predicted cut count")))
    } else {
        Ok(out)
    }
}

/// A random valuation set as JSON.
pub fn generate(seed: u64, n: usize, segments: usize) -> Result<String, Failure> {
    if n == 0 {
        return Err(Failure::Input("--n must be at least 1".into()));
    }
    if segments == 0 {
        return Err(Failure::Input("--segments must be at least 1".into()));
    }
    Ok(valuations_json(&random_valuations(seed, n, segments)?))
}

