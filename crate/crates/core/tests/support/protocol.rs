//! Synthetic workbenches, a randomized action driver and invariant checks
//! for the session protocol.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use chrono::{TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taxonomist_core::embedding::EmbeddingMatrix;
use taxonomist_core::index::VpTree;
use taxonomist_core::ingest::CleanCorpus;
use taxonomist_core::session::{
    CandidateList, FixedClock, OutputData, Session, SessionError, TaxonomyExport, Workbench,
};

use super::oracles::brute_force_knn;

pub const MODELS: [&str; 2] = ["m1", "m2"];
/// Two outputs over `m1` and one over `m2`.
pub const OUTPUTS: [(&str, &str); 3] = [("o1a", "m1"), ("o1b", "m1"), ("o2", "m2")];

pub struct Fixture {
    pub workbench: Workbench,
    pub matrices: HashMap<String, Arc<EmbeddingMatrix>>,
}

/// Corpus of `n` items with random unit embeddings under two models and
/// uniform random coordinates in [0, 10)² for each output.
pub fn synthetic_workbench(n: usize, dim: usize, seed: u64) -> Fixture {
    let texts: Vec<String> = (0..n).map(|i| format!("descriptor {i:05}")).collect();
    let corpus = Arc::new(CleanCorpus::from_texts(&texts));
    let ids = corpus.ids();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrices = HashMap::new();
    let mut trees = Vec::new();
    for model in MODELS {
        let random = super::oracles::random_unit_matrix(n, dim, rng.random());
        let m = Arc::new(
            EmbeddingMatrix::new(model, ids.clone(), dim, random.as_slice().to_vec()).unwrap(),
        );
        trees.push(Arc::new(VpTree::build(m.clone(), 0).unwrap()));
        matrices.insert(model.to_string(), m);
    }
    let outputs = OUTPUTS
        .iter()
        .map(|(o, m)| OutputData {
            output_id: o.to_string(),
            model_id: m.to_string(),
            coords: (0..n).map(|_| [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)]).collect(),
        })
        .collect();
    let clock = Arc::new(FixedClock(Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()));
    let workbench = Workbench::new(corpus, outputs, trees, clock).unwrap();
    Fixture { workbench, matrices }
}

/// Candidate list recomputed from scratch: per-member brute-force kNN over
/// free items, merged by minimum distance.
pub fn oracle_candidates(fx: &Fixture, session: &Session) -> Vec<(String, f64)> {
    let wb = &fx.workbench;
    let model = &wb.output(&session.active_output_id).unwrap().model_id;
    let matrix = &fx.matrices[model];
    let assigned = wb.taxonomy().assignment;
    let ids = matrix.item_ids();
    let excluded = |i: usize| {
        let id = &ids[i];
        session.members.contains(id) || session.ignored.contains(id) || assigned.contains_key(id)
    };
    let mut best: HashMap<String, f64> = HashMap::new();
    for member in &session.members {
        let row = matrix.row(ids.iter().position(|x| x == member).unwrap());
        for (id, d) in brute_force_knn(matrix, row, session.k_per_member, excluded) {
            let e = best.entry(id).or_insert(d);
            *e = e.min(d);
        }
    }
    let mut out: Vec<(String, f64)> = best.into_iter().collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    out
}

#[derive(Debug, Clone)]
pub enum Action {
    Seed(usize),
    Compute,
    Accept(Vec<usize>),
    Reject(Vec<usize>),
    Unignore(Vec<usize>),
    Polygon { output: usize, corners: [[f64; 2]; 2] },
    Switch(usize),
    Commit(usize),
}

/// An action for one of `sessions` sessions. Item picks are raw selectors,
/// resolved against current state so most actions are valid but some are not.
pub fn random_action(rng: &mut impl Rng, sessions: usize) -> (usize, Action) {
    let picks = |rng: &mut dyn rand::RngCore| {
        let k = rng.random_range(1..=3);
        (0..k).map(|_| rng.random::<u32>() as usize).collect::<Vec<_>>()
    };
    let s = rng.random_range(0..sessions);
    let a = match rng.random_range(0..16) {
        0..=1 => Action::Seed(rng.random::<u32>() as usize),
        2..=4 => Action::Compute,
        5..=7 => Action::Accept(picks(rng)),
        8..=9 => Action::Reject(picks(rng)),
        10 => Action::Unignore(picks(rng)),
        11..=12 => {
            let a = [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)];
            let b = [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)];
            Action::Polygon { output: rng.random_range(0..OUTPUTS.len()), corners: [a, b] }
        }
        13 => Action::Switch(rng.random_range(0..OUTPUTS.len())),
        _ => Action::Commit(rng.random_range(0..6)),
    };
    (s, a)
}

/// Tracks per-session history needed by the temporal invariants.
pub struct Checker {
    /// Items ignored and not since unignored, per session.
    never_unignored: Vec<BTreeSet<String>>,
    previous: Vec<Session>,
    classes_seen: usize,
}

impl Checker {
    pub fn new(sessions: &[Session]) -> Self {
        Self {
            never_unignored: vec![BTreeSet::new(); sessions.len()],
            previous: sessions.to_vec(),
            classes_seen: 0,
        }
    }
}

fn resolve(selectors: &[usize], pool: &[String], all: &[String]) -> Vec<String> {
    selectors
        .iter()
        .map(|&s| {
            // one pick in eight is an arbitrary corpus item, usually invalid
            if s % 8 == 0 || pool.is_empty() {
                all[s % all.len()].clone()
            } else {
                pool[s % pool.len()].clone()
            }
        })
        .collect()
}

/// Applies one action; errors are expected for some actions and returned.
pub fn apply(fx: &Fixture, sids: &[String], (s, action): &(usize, Action)) -> Result<(), SessionError> {
    let wb = &fx.workbench;
    let sid = &sids[*s];
    let all = wb.corpus().ids();
    let state = wb.session(sid)?;
    match action {
        Action::Seed(i) => {
            wb.seed_item(sid, &all[i % all.len()])?;
        }
        Action::Compute => {
            let list = wb.compute_candidates(sid)?;
            check_candidates_match_oracle(fx, &state, &list);
        }
        Action::Accept(p) => {
            let pool: Vec<String> = state
                .candidates
                .ids()
                .into_iter()
                .map(String::from)
                .chain(state.polygon_candidates.iter().cloned())
                .collect();
            wb.accept_candidates(sid, &resolve(p, &pool, &all))?;
        }
        Action::Reject(p) => {
            let pool: Vec<String> = state
                .candidates
                .ids()
                .into_iter()
                .map(String::from)
                .chain(state.polygon_candidates.iter().cloned())
                .chain(state.members.iter().cloned())
                .collect();
            wb.reject_candidates(sid, &resolve(p, &pool, &all))?;
        }
        Action::Unignore(p) => {
            let pool: Vec<String> = state.ignored.iter().cloned().collect();
            wb.unignore(sid, &resolve(p, &pool, &all))?;
        }
        Action::Polygon { output, corners: [a, b] } => {
            let rect = [[a[0], a[1]], [b[0], a[1]], [b[0], b[1]], [a[0], b[1]]];
            wb.polygon_select(sid, OUTPUTS[*output].0, &rect)?;
        }
        Action::Switch(o) => {
            wb.switch_output(sid, OUTPUTS[*o].0)?;
        }
        Action::Commit(l) => {
            wb.commit_class(sid, &format!("class-{l}"))?;
        }
    }
    Ok(())
}

fn check_candidates_match_oracle(fx: &Fixture, before: &Session, list: &CandidateList) {
    let expected = oracle_candidates(fx, before);
    let got: Vec<(&str, f64)> = list.entries.iter().map(|e| (e.item_id.as_str(), e.score)).collect();
    assert_eq!(got.len(), expected.len(), "candidate count");
    for ((gid, gs), (eid, es)) in got.iter().zip(&expected) {
        assert_eq!(gid, eid);
        assert!((gs - es).abs() <= 1e-12, "score of {gid}: {gs} vs {es}");
    }
}

/// Checks every state invariant after a step. `action` is the step just
/// applied to session `acted` and whether it succeeded.
pub fn check_invariants(
    fx: &Fixture,
    sids: &[String],
    checker: &mut Checker,
    step: &(usize, Action),
    outcome: &Result<(), SessionError>,
    acted_before: &Session,
) {
    let wb = &fx.workbench;
    let n = wb.corpus().len();
    let taxonomy = wb.taxonomy();

    // commit conservation: classes disjoint, sizes bounded, assignment a function
    let mut seen = HashSet::new();
    let mut total = 0;
    for class in &taxonomy.classes {
        assert!(!class.member_ids.is_empty());
        for id in &class.member_ids {
            assert!(seen.insert(id.clone()), "{id} in two classes");
            assert_eq!(taxonomy.assignment.get(id), Some(&class.class_id));
        }
        total += class.member_ids.len();
    }
    assert!(total <= n);
    assert_eq!(taxonomy.assignment.len(), total);
    let labels: HashSet<_> = taxonomy.classes.iter().map(|c| &c.label).collect();
    assert_eq!(labels.len(), taxonomy.classes.len());
    assert!(taxonomy.classes.len() >= checker.classes_seen, "a committed class vanished");
    checker.classes_seen = taxonomy.classes.len();

    for (k, sid) in sids.iter().enumerate() {
        let s = wb.session(sid).unwrap();
        let members: HashSet<&String> = s.members.iter().collect();
        let polygon: HashSet<&String> = s.polygon_candidates.iter().collect();
        let ignored: HashSet<&String> = s.ignored.iter().collect();
        let assigned: HashSet<&String> = taxonomy.assignment.keys().collect();
        let sets = [&members, &polygon, &ignored, &assigned];
        for a in 0..sets.len() {
            for b in a + 1..sets.len() {
                assert!(sets[a].is_disjoint(sets[b]), "sets {a} and {b} overlap in {sid}");
            }
        }
        let cands: Vec<&str> = s.candidates.ids();
        let cand_set: HashSet<&str> = cands.iter().copied().collect();
        assert_eq!(cand_set.len(), cands.len(), "duplicate candidates");
        for c in &cands {
            let c = c.to_string();
            assert!(!members.contains(&c) && !ignored.contains(&c) && !assigned.contains(&c));
        }
        for w in s.candidates.entries.windows(2) {
            assert!((w[0].score, &w[0].item_id) < (w[1].score, &w[1].item_id));
        }
        if let Some(seed) = &s.seed {
            assert!(members.contains(seed));
        }

        // monotone ignore
        let prev = &checker.previous[k];
        let unignored: HashSet<String> = match (step, outcome) {
            ((a, Action::Unignore(_)), Ok(())) if *a == k => {
                acted_before.ignored.difference(&s.ignored).cloned().collect()
            }
            _ => HashSet::new(),
        };
        for id in prev.ignored.difference(&s.ignored) {
            assert!(
                unignored.contains(id) || taxonomy.assignment.contains_key(id),
                "{id} left the ignore list of {sid} without unignore"
            );
        }
        let history = &mut checker.never_unignored[k];
        for id in &unignored {
            history.remove(id);
        }
        history.extend(s.ignored.iter().cloned());
        for id in history.iter() {
            assert!(!cand_set.contains(id.as_str()) && !polygon.contains(id), "ignored {id} suggested");
        }

        // a failed action leaves its session untouched
        if outcome.is_err() && step.0 == k {
            assert_eq!(&s, acted_before, "failed {:?} changed {sid}", step.1);
        }
        checker.previous[k] = s;
    }
}

/// Runs `steps` random actions over `sessions` sessions, checking invariants
/// after each. Returns the number of successful actions.
pub fn run_random_sequence(fx: &Fixture, sessions: usize, steps: usize, seed: u64) -> usize {
    let wb = &fx.workbench;
    let outputs = wb.output_ids();
    let sids: Vec<String> = (0..sessions)
        .map(|i| wb.create_session(&outputs[i % outputs.len()], Some(4)).unwrap().session_id)
        .collect();
    let initial: Vec<Session> = sids.iter().map(|s| wb.session(s).unwrap()).collect();
    let mut checker = Checker::new(&initial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = 0;
    for _ in 0..steps {
        let step = random_action(&mut rng, sessions);
        let before = wb.session(&sids[step.0]).unwrap();
        let outcome = apply(fx, &sids, &step);
        if outcome.is_ok() {
            ok += 1;
        }
        check_invariants(fx, &sids, &mut checker, &step, &outcome, &before);
    }
    let export = wb.export_taxonomy();
    let classified: usize = export.classes.iter().map(|c| c.member_ids.len()).sum();
    assert_eq!(classified + export.unassigned.len(), wb.corpus().len());
    ok
}

/// The session operations, as seen by a client. Errors carry the machine code.
pub trait SessionApi {
    fn create_session(&self, output_id: &str) -> Result<Session, String>;
    fn seed(&self, sid: &str, item: &str) -> Result<Session, String>;
    fn candidates(&self, sid: &str) -> Result<CandidateList, String>;
    fn accept(&self, sid: &str, items: &[String]) -> Result<Session, String>;
    fn reject(&self, sid: &str, items: &[String]) -> Result<Session, String>;
    fn unignore(&self, sid: &str, items: &[String]) -> Result<Session, String>;
    fn polygon(&self, sid: &str, output_id: &str, polygon: &[[f64; 2]]) -> Result<Session, String>;
    fn switch_output(&self, sid: &str, output_id: &str) -> Result<Session, String>;
    fn commit(&self, sid: &str, label: &str) -> Result<serde_json::Value, String>;
    fn session(&self, sid: &str) -> Result<Session, String>;
    fn export(&self) -> Result<TaxonomyExport, String>;
}

impl SessionApi for Workbench {
    fn create_session(&self, output_id: &str) -> Result<Session, String> {
        Workbench::create_session(self, output_id, None).map_err(|e| e.code().into())
    }
    fn seed(&self, sid: &str, item: &str) -> Result<Session, String> {
        self.seed_item(sid, item).map_err(|e| e.code().into())
    }
    fn candidates(&self, sid: &str) -> Result<CandidateList, String> {
        self.compute_candidates(sid).map_err(|e| e.code().into())
    }
    fn accept(&self, sid: &str, items: &[String]) -> Result<Session, String> {
        self.accept_candidates(sid, items).map_err(|e| e.code().into())
    }
    fn reject(&self, sid: &str, items: &[String]) -> Result<Session, String> {
        self.reject_candidates(sid, items).map_err(|e| e.code().into())
    }
    fn unignore(&self, sid: &str, items: &[String]) -> Result<Session, String> {
        Workbench::unignore(self, sid, items).map_err(|e| e.code().into())
    }
    fn polygon(&self, sid: &str, output_id: &str, polygon: &[[f64; 2]]) -> Result<Session, String> {
        self.polygon_select(sid, output_id, polygon).map_err(|e| e.code().into())
    }
    fn switch_output(&self, sid: &str, output_id: &str) -> Result<Session, String> {
        Workbench::switch_output(self, sid, output_id).map_err(|e| e.code().into())
    }
    fn commit(&self, sid: &str, label: &str) -> Result<serde_json::Value, String> {
        self.commit_class(sid, label)
            .map(|c| serde_json::to_value(c).unwrap())
            .map_err(|e| e.code().into())
    }
    fn session(&self, sid: &str) -> Result<Session, String> {
        Workbench::session(self, sid).map_err(|e| e.code().into())
    }
    fn export(&self) -> Result<TaxonomyExport, String> {
        Ok(self.export_taxonomy())
    }
}

/// Applies `action` through any transport. Picks resolve against the
/// session state as the client sees it; `outputs` and `items` name the
/// store's outputs and corpus ids.
pub fn apply_via(
    api: &dyn SessionApi,
    sid: &str,
    action: &Action,
    outputs: &[String],
    items: &[String],
) -> Result<(), String> {
    let state = api.session(sid)?;
    let listed: Vec<String> = state
        .candidates
        .ids()
        .into_iter()
        .map(String::from)
        .chain(state.polygon_candidates.iter().cloned())
        .collect();
    match action {
        Action::Seed(i) => api.seed(sid, &items[i % items.len()]).map(drop),
        Action::Compute => api.candidates(sid).map(drop),
        Action::Accept(p) => api.accept(sid, &resolve(p, &listed, items)).map(drop),
        Action::Reject(p) => {
            let pool: Vec<String> = listed.into_iter().chain(state.members.iter().cloned()).collect();
            api.reject(sid, &resolve(p, &pool, items)).map(drop)
        }
        Action::Unignore(p) => {
            let pool: Vec<String> = state.ignored.iter().cloned().collect();
            api.unignore(sid, &resolve(p, &pool, items)).map(drop)
        }
        Action::Polygon { output, corners: [a, b] } => {
            let rect = [[a[0], a[1]], [b[0], a[1]], [b[0], b[1]], [a[0], b[1]]];
            api.polygon(sid, &outputs[output % outputs.len()], &rect).map(drop)
        }
        Action::Switch(o) => api.switch_output(sid, &outputs[o % outputs.len()]).map(drop),
        Action::Commit(l) => api.commit(sid, &format!("class-{l}")).map(drop),
    }
}

/// Everything observable at the end of the scripted flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowOutcome {
    pub candidates: CandidateList,
    pub after_accept: Session,
    pub after_reject: Session,
    pub after_switch: Session,
    pub class: serde_json::Value,
    pub final_session: Session,
    pub export: TaxonomyExport,
}

/// seed -> candidates -> accept -> reject -> switch_output -> commit -> export,
/// on the first two outputs of `outputs` (which must back different models).
pub fn scripted_flow(api: &dyn SessionApi, outputs: [&str; 2], seed_item: &str) -> Result<FlowOutcome, String> {
    let sid = api.create_session(outputs[0])?.session_id;
    api.seed(&sid, seed_item)?;
    let candidates = api.candidates(&sid)?;
    let ids: Vec<String> = candidates.ids().into_iter().map(String::from).collect();
    if ids.len() < 4 {
        return Err(format!("expected at least 4 candidates, got {}", ids.len()));
    }
    let after_accept = api.accept(&sid, &ids[..3])?;
    let after_reject = api.reject(&sid, &ids[3..4])?;
    let after_switch = api.switch_output(&sid, outputs[1])?;
    let class = api.commit(&sid, "scripted")?;
    Ok(FlowOutcome {
        candidates,
        after_accept,
        after_reject,
        after_switch,
        class,
        final_session: api.session(&sid)?,
        export: api.export()?,
    })
}

/// The contract-level expectations of [`scripted_flow`], independent of transport.
pub fn check_flow(outcome: &FlowOutcome, seed_item: &str, outputs: [&str; 2]) {
    let ids = outcome.candidates.ids();
    assert!(!ids.contains(&seed_item));
    let mut expected_members = vec![seed_item.to_string()];
    expected_members.extend(ids[..3].iter().map(|s| s.to_string()));
    let members: Vec<String> = outcome.after_accept.members.iter().cloned().collect();
    assert_eq!(members, expected_members);
    assert!(outcome.after_reject.ignored.contains(ids[3]));
    assert_eq!(outcome.after_switch.members, outcome.after_reject.members);
    assert_eq!(outcome.after_switch.active_output_id, outputs[1]);
    assert!(outcome.after_switch.polygon_candidates.is_empty());
    let class_members: Vec<String> =
        serde_json::from_value(outcome.class["member_ids"].clone()).unwrap();
    assert_eq!(class_members, expected_members);
    assert_eq!(outcome.class["source_output_id"], outputs[1]);
    assert!(outcome.final_session.members.is_empty());
    assert!(outcome.final_session.seed.is_none());
    assert_eq!(outcome.export.classes.len(), 1);
    assert_eq!(outcome.export.ignored_at_export, vec![ids[3].to_string()]);
}
