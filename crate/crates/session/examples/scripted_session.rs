//! A session whose two guests answer as uniform measures. The secret
//! participant picks the middle third.

use cakecut::oracle::{AgentEndpoint, SimulatedAgent};
use cakecut::Valuation;
use cakecut_session::{SessionConfig, SessionStore};

fn main() {
    let store = SessionStore::in_memory();
    let config = SessionConfig::scripted(
        vec!["ann".into(), "bo".into()],
        vec![Valuation::uniform(), Valuation::uniform()],
    );
    let id = store.create(config).unwrap().id.clone();

    loop {
        let snap = store.snapshot(&id).unwrap();
        let Some(q) = snap.outstanding.clone() else { break };
        assert_eq!(store.next_query(&id, snap.secret.id).unwrap(), None);
        let value = SimulatedAgent::new(Valuation::uniform()).answer(&q).unwrap();
        println!("{q} answer={value}");
        store.submit_answer(&id, q.agent().get(), value).unwrap();
    }

    let snap = store.submit_choice(&id, 2).unwrap();
    println!("phase: {}", snap.phase);
    let result = store.result(&id).unwrap();
    println!("{}", serde_json::to_string_pretty(&result.allocation).unwrap());
    println!("{}", serde_json::to_string_pretty(&*store.snapshot(&id).unwrap()).unwrap());
}
