use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::RwLock;

use super::polygon::point_in_polygon;
use super::taxonomy::{ClassRecord, Taxonomy, TaxonomyExport};
use super::{
    timestamp, CandidateEntry, CandidateList, Clock, Session, SessionError, DEFAULT_K_PER_MEMBER,
    SNAPSHOT_VERSION,
};
use crate::index::{Query, VpTree};
use crate::ingest::CleanCorpus;

/// One grid output's coordinates, in corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputData {
    pub output_id: String,
    pub model_id: String,
    pub coords: Vec<[f64; 2]>,
}

/// Shared state over one corpus: grid outputs, per-model indexes, the
/// taxonomy and all sessions. Mutations of a session are serialized by its
/// own lock; commits additionally serialize on the taxonomy.
pub struct Workbench {
    corpus: Arc<CleanCorpus>,
    positions: HashMap<String, usize>,
    outputs: BTreeMap<String, Arc<OutputData>>,
    trees: HashMap<String, Arc<VpTree>>,
    taxonomy: RwLock<Taxonomy>,
    sessions: RwLock<BTreeMap<String, Arc<RwLock<Session>>>>,
    next_session: AtomicU64,
    clock: Arc<dyn Clock>,
}

fn invalid(msg: String) -> SessionError {
    SessionError::InvalidRequest(msg)
}

impl Workbench {
    pub fn new(
        corpus: Arc<CleanCorpus>,
        outputs: Vec<OutputData>,
        trees: Vec<Arc<VpTree>>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, SessionError> {
        let ids = corpus.ids();
        let mut tree_map = HashMap::new();
        for tree in trees {
            if tree.matrix().item_ids() != ids.as_slice() {
                return Err(invalid(format!(
                    "index for model {} is not aligned to the corpus",
                    tree.matrix().model_id()
                )));
            }
            tree_map.insert(tree.matrix().model_id().to_string(), tree);
        }
        let mut output_map = BTreeMap::new();
        for out in outputs {
            if out.coords.len() != corpus.len() {
                return Err(invalid(format!(
                    "output {} has {} points for {} items",
                    out.output_id,
                    out.coords.len(),
                    corpus.len()
                )));
            }
            if !tree_map.contains_key(&out.model_id) {
                return Err(invalid(format!("no index for model {}", out.model_id)));
            }
            output_map.insert(out.output_id.clone(), Arc::new(out));
        }
        let positions = ids.into_iter().enumerate().map(|(i, id)| (id, i)).collect();
        Ok(Self {
            corpus,
            positions,
            outputs: output_map,
            trees: tree_map,
            taxonomy: RwLock::new(Taxonomy::default()),
            sessions: RwLock::new(BTreeMap::new()),
            next_session: AtomicU64::new(1),
            clock,
        })
    }

    pub fn corpus(&self) -> &Arc<CleanCorpus> {
        &self.corpus
    }

    pub fn output(&self, output_id: &str) -> Result<&Arc<OutputData>, SessionError> {
        self.outputs
            .get(output_id)
            .ok_or_else(|| SessionError::UnknownOutput(output_id.into()))
    }

    pub fn output_ids(&self) -> Vec<String> {
        self.outputs.keys().cloned().collect()
    }

    pub fn tree(&self, model_id: &str) -> Option<&Arc<VpTree>> {
        self.trees.get(model_id)
    }

    pub fn taxonomy(&self) -> Taxonomy {
        self.taxonomy.read().clone()
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions.read().keys().cloned().collect()
    }

    fn require_item(&self, id: &str) -> Result<usize, SessionError> {
        self.positions
            .get(id)
            .copied()
            .ok_or_else(|| SessionError::UnknownItem(id.into()))
    }

    fn handle(&self, session_id: &str) -> Result<Arc<RwLock<Session>>, SessionError> {
        self.sessions
            .read()
            .get(session_id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(session_id.into()))
    }

    /// Runs `f` on a reconciled draft of the session; the draft replaces the
    /// stored state only if `f` succeeds.
    fn mutate<R>(
        &self,
        session_id: &str,
        f: impl FnOnce(&mut Session, &Taxonomy) -> Result<R, SessionError>,
    ) -> Result<R, SessionError> {
        let handle = self.handle(session_id)?;
        let mut session = handle.write();
        let taxonomy = self.taxonomy.read();
        session.reconcile(&taxonomy);
        let mut draft = session.clone();
        let out = f(&mut draft, &taxonomy)?;
        *session = draft;
        Ok(out)
    }

    fn non_empty(ids: &[String]) -> Result<(), SessionError> {
        if ids.is_empty() {
            return Err(invalid("no item ids given".into()));
        }
        Ok(())
    }

    pub fn create_session(&self, output_id: &str, k_per_member: Option<usize>) -> Result<Session, SessionError> {
        self.output(output_id)?;
        let k = k_per_member.unwrap_or(DEFAULT_K_PER_MEMBER);
        if k == 0 {
            return Err(invalid("k_per_member must be at least 1".into()));
        }
        let n = self.next_session.fetch_add(1, Ordering::SeqCst);
        let session = Session::new(format!("s{n:06}"), output_id.into(), k);
        self.sessions
            .write()
            .insert(session.session_id.clone(), Arc::new(RwLock::new(session.clone())));
        Ok(session)
    }

    /// Consistent snapshot, with items committed elsewhere already dropped.
    pub fn session(&self, session_id: &str) -> Result<Session, SessionError> {
        let handle = self.handle(session_id)?;
        let mut copy = handle.read().clone();
        copy.reconcile(&self.taxonomy.read());
        Ok(copy)
    }

    pub fn restore_session(&self, snapshot: Session) -> Result<(), SessionError> {
        if snapshot.version != SNAPSHOT_VERSION {
            return Err(invalid(format!("unsupported snapshot version {}", snapshot.version)));
        }
        self.output(&snapshot.active_output_id)?;
        let listed = snapshot
            .members
            .iter()
            .chain(&snapshot.polygon_candidates)
            .chain(&snapshot.ignored)
            .chain(snapshot.candidates.entries.iter().map(|e| &e.item_id));
        for id in listed {
            self.require_item(id)?;
        }
        if let Some(n) = snapshot.session_id.strip_prefix('s').and_then(|s| s.parse::<u64>().ok()) {
            self.next_session.fetch_max(n + 1, Ordering::SeqCst);
        }
        self.sessions
            .write()
            .insert(snapshot.session_id.clone(), Arc::new(RwLock::new(snapshot)));
        Ok(())
    }

    pub fn seed_item(&self, session_id: &str, item_id: &str) -> Result<Session, SessionError> {
        self.require_item(item_id)?;
        self.mutate(session_id, |s, taxonomy| {
            if s.ignored.contains(item_id) {
                return Err(SessionError::ItemIgnored(item_id.into()));
            }
            if let Some(class_id) = taxonomy.assignment.get(item_id) {
                return Err(SessionError::ItemAssigned {
                    item: item_id.into(),
                    class_id: class_id.clone(),
                });
            }
            s.polygon_candidates.shift_remove(item_id);
            s.candidates.remove(item_id);
            s.members.insert(item_id.into());
            s.seed = Some(item_id.into());
            Ok(s.clone())
        })
    }

    /// kNN of every member on the active model's index, merged by minimum distance.
    pub fn compute_candidates(&self, session_id: &str) -> Result<CandidateList, SessionError> {
        self.mutate(session_id, |s, taxonomy| {
            if s.members.is_empty() {
                return Err(SessionError::NoMembers);
            }
            let output = self.output(&s.active_output_id)?;
            let tree = &self.trees[&output.model_id];
            let mut excluded = vec![false; self.corpus.len()];
            for id in s.members.iter().chain(&s.ignored).chain(taxonomy.assignment.keys()) {
                excluded[self.positions[id]] = true;
            }
            let mut best: HashMap<usize, (f64, &String)> = HashMap::new();
            for member in &s.members {
                let found = tree
                    .knn_filtered(Query::Id(member), s.k_per_member, |i| excluded[i])
                    .map_err(|e| SessionError::Index(e.to_string()))?;
                for nb in found {
                    let entry = best.entry(nb.index).or_insert((nb.distance, member));
                    if (nb.distance, member) < (entry.0, entry.1) {
                        *entry = (nb.distance, member);
                    }
                }
            }
            let ids = self.corpus.items.as_slice();
            let mut entries: Vec<CandidateEntry> = best
                .into_iter()
                .map(|(i, (score, via))| CandidateEntry {
                    item_id: ids[i].id.clone(),
                    score,
                    via_member: via.clone(),
                })
                .collect();
            entries.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.item_id.cmp(&b.item_id)));
            s.candidates = CandidateList { entries };
            Ok(s.candidates.clone())
        })
    }

    pub fn accept_candidates(&self, session_id: &str, item_ids: &[String]) -> Result<Session, SessionError> {
        Self::non_empty(item_ids)?;
        for id in item_ids {
            self.require_item(id)?;
        }
        self.mutate(session_id, |s, _| {
            for id in item_ids {
                if !s.candidates.contains(id) && !s.polygon_candidates.contains(id) {
                    return Err(SessionError::NotSuggested(id.clone()));
                }
            }
            for id in item_ids {
                s.candidates.remove(id);
                s.polygon_candidates.shift_remove(id);
                s.members.insert(id.clone());
            }
            Ok(s.clone())
        })
    }

    pub fn reject_candidates(&self, session_id: &str, item_ids: &[String]) -> Result<Session, SessionError> {
        Self::non_empty(item_ids)?;
        for id in item_ids {
            self.require_item(id)?;
        }
        self.mutate(session_id, |s, _| {
            for id in item_ids {
                let listed =
                    s.members.contains(id) || s.candidates.contains(id) || s.polygon_candidates.contains(id);
                if !listed {
                    return Err(SessionError::NotListed(id.clone()));
                }
            }
            for id in item_ids {
                s.forget(id);
                s.ignored.insert(id.clone());
            }
            Ok(s.clone())
        })
    }

    pub fn unignore(&self, session_id: &str, item_ids: &[String]) -> Result<Session, SessionError> {
        Self::non_empty(item_ids)?;
        for id in item_ids {
            self.require_item(id)?;
        }
        self.mutate(session_id, |s, _| {
            for id in item_ids {
                if !s.ignored.contains(id) {
                    return Err(SessionError::NotIgnored(id.clone()));
                }
            }
            for id in item_ids {
                s.ignored.remove(id);
            }
            Ok(s.clone())
        })
    }

    /// Replaces the polygon candidate list with the free items inside `polygon`.
    pub fn polygon_select(
        &self,
        session_id: &str,
        output_id: &str,
        polygon: &[[f64; 2]],
    ) -> Result<Session, SessionError> {
        let output = self.output(output_id)?.clone();
        if polygon.len() < 3 {
            return Err(SessionError::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                polygon.len()
            )));
        }
        if polygon.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(SessionError::InvalidPolygon("vertices must be finite".into()));
        }
        self.mutate(session_id, |s, taxonomy| {
            s.polygon_candidates = self
                .corpus
                .items
                .iter()
                .zip(&output.coords)
                .filter(|(item, &p)| {
                    !s.members.contains(&item.id)
                        && !s.ignored.contains(&item.id)
                        && !taxonomy.assignment.contains_key(&item.id)
                        && point_in_polygon(p, polygon)
                })
                .map(|(item, _)| item.id.clone())
                .collect();
            Ok(s.clone())
        })
    }

    /// Members and ignore list persist; polygon candidates are cleared, and
    /// kNN candidates too when the backing model changes.
    pub fn switch_output(&self, session_id: &str, output_id: &str) -> Result<Session, SessionError> {
        let target = self.output(output_id)?.clone();
        self.mutate(session_id, |s, _| {
            let current = self.output(&s.active_output_id)?;
            if current.model_id != target.model_id {
                s.candidates = CandidateList::default();
            }
            s.active_output_id = output_id.into();
            s.polygon_candidates.clear();
            Ok(s.clone())
        })
    }

    pub fn commit_class(&self, session_id: &str, label: &str) -> Result<ClassRecord, SessionError> {
        let label = label.trim();
        if label.is_empty() {
            return Err(SessionError::EmptyLabel);
        }
        let handle = self.handle(session_id)?;
        let mut session = handle.write();
        let mut taxonomy = self.taxonomy.write();
        session.reconcile(&taxonomy);
        if session.members.is_empty() {
            return Err(SessionError::NoMembers);
        }
        if taxonomy.has_label(label) {
            return Err(SessionError::DuplicateLabel(label.into()));
        }
        let class = ClassRecord {
            class_id: taxonomy.next_class_id(),
            label: label.into(),
            member_ids: session.members.iter().cloned().collect(),
            source_output_id: session.active_output_id.clone(),
            committed_at: timestamp(self.clock.as_ref()),
        };
        taxonomy.insert(class.clone());
        session.reset_working();
        Ok(class)
    }

    /// Union of every session's ignore list, sorted.
    pub fn ignored_anywhere(&self) -> Vec<String> {
        let handles: Vec<_> = self.sessions.read().values().cloned().collect();
        let mut ignored = BTreeSet::new();
        for h in handles {
            ignored.extend(h.read().ignored.iter().cloned());
        }
        let taxonomy = self.taxonomy.read();
        ignored.retain(|id| !taxonomy.assignment.contains_key(id));
        ignored.into_iter().collect()
    }

    pub fn export_taxonomy(&self) -> TaxonomyExport {
        let ignored = self.ignored_anywhere();
        self.taxonomy.read().export(&self.corpus, ignored)
    }

    /// Replaces the taxonomy with the classes of an exported document.
    pub fn import_taxonomy(&self, doc: &TaxonomyExport) -> Result<(), SessionError> {
        let taxonomy = Taxonomy::from_classes(doc.classes.clone(), &self.corpus)?;
        *self.taxonomy.write() = taxonomy;
        Ok(())
    }
}
