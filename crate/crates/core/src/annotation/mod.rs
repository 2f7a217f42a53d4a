//! Annotation sessions: event-sourced span editing with optimistic
//! per-sentence versions, plus the HTTP service in [`http`].
//!
//! Every accepted edit is an [`Event`]. A session's state is exactly the
//! fold of its journal, and the journal is appended to `<id>.jsonl` when
//! the store has a directory.

pub mod http;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::checkpoint::CheckpointError;
use crate::corpus::{self, examples_to_triples, parse_spantag, CorpusError, ExampleError, BEGIN_TAG};
use crate::training::{SpanPrediction, TrainError};
use crate::{AbsaExample, AspectSpan, Corpus, EncodingKind};

#[derive(Debug, thiserror::Error)]
pub enum EditError {
    #[error("no session `{0}`")]
    SessionNotFound(String),
    #[error("sentence {index} is out of range (session has {len})")]
    SentenceOutOfRange { index: usize, len: usize },
    #[error("sentence {sentence} is at version {current}, edit was based on version {given}")]
    VersionConflict { sentence: usize, current: u64, given: u64 },
    #[error("invalid span: {0}")]
    InvalidSpan(#[from] ExampleError),
    #[error("span {start}..={end} overlaps an existing span")]
    Overlap { start: usize, end: usize },
    #[error("sentence {sentence} has no confirmed span {start}..={end}")]
    NoSuchSpan { sentence: usize, start: usize, end: usize },
    #[error("sentence {sentence} has no proposal {index}")]
    NoSuchProposal { sentence: usize, index: usize },
    #[error("invalid upload: {0}")]
    Upload(String),
    #[error("journal: {0}")]
    Journal(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Predictor(#[from] TrainError),
}

/// A span suggested by a predictor, not yet confirmed by an annotator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub span: AspectSpan,
    pub confidence: f64,
    /// Digest of the checkpoint that proposed it.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceState {
    pub tokens: Vec<String>,
    pub confirmed: Vec<AspectSpan>,
    pub proposals: Vec<Proposal>,
    pub version: u64,
}

impl SentenceState {
    fn occupied(&self) -> impl Iterator<Item = &AspectSpan> {
        self.confirmed.iter().chain(self.proposals.iter().map(|p| &p.span))
    }

    pub fn example(&self, include_proposals: bool) -> AbsaExample {
        let mut spans = self.confirmed.clone();
        if include_proposals {
            spans.extend(self.proposals.iter().map(|p| p.span));
        }
        AbsaExample::new(self.tokens.clone(), spans).expect("session spans are always disjoint and in bounds")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSentence {
    pub tokens: Vec<String>,
    pub spans: Vec<AspectSpan>,
}

/// One journal entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Event {
    Created { session_id: String, sentences: Vec<InitialSentence> },
    SpanSet { sentence: usize, span: AspectSpan },
    SpanDeleted { sentence: usize, start: usize, end: usize },
    Proposed { source: String, proposals: Vec<(usize, Vec<Proposal>)> },
    ProposalAccepted { sentence: usize, index: usize },
    ProposalRejected { sentence: usize, index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Session {
    pub id: String,
    sentences: Vec<SentenceState>,
    sources: BTreeSet<String>,
    #[serde(skip)]
    journal: Vec<Event>,
}

/// Split an upload into sentences. Lines holding `[B-ASP]` anywhere make
/// the whole file span-tag encoded; blank lines are skipped.
pub fn parse_upload(bytes: &[u8]) -> Result<Vec<AbsaExample>, EditError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| EditError::Upload(format!("invalid UTF-8 at byte {}", e.valid_up_to())))?;
    let tagged = text.contains(BEGIN_TAG);
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let example = if tagged {
            parse_spantag(line.trim_end_matches('\r')).map_err(|e| EditError::Corpus(e.at_line(i + 1)))?
        } else {
            AbsaExample::from_text(line).map_err(|e| EditError::Upload(format!("line {}: {e}", i + 1)))?
        };
        out.push(example);
    }
    if out.is_empty() {
        return Err(EditError::Upload("no sentences".into()));
    }
    Ok(out)
}

impl Session {
    pub fn new(id: impl Into<String>, sentences: &[AbsaExample]) -> Session {
        let event = Event::Created {
            session_id: id.into(),
            sentences: sentences
                .iter()
                .map(|e| InitialSentence { tokens: e.tokens().to_vec(), spans: e.spans().to_vec() })
                .collect(),
        };
        Session::replay([event]).expect("created from valid examples")
    }

    /// Rebuild a session from its journal.
    pub fn replay(events: impl IntoIterator<Item = Event>) -> Result<Session, EditError> {
        let mut events = events.into_iter();
        let Some(Event::Created { session_id, sentences }) = events.next() else {
            return Err(EditError::Journal("journal does not start with a created event".into()));
        };
        let mut states = Vec::with_capacity(sentences.len());
        for s in &sentences {
            let example = AbsaExample::new(s.tokens.clone(), s.spans.clone())?;
            states.push(SentenceState {
                tokens: example.tokens().to_vec(),
                confirmed: example.spans().to_vec(),
                proposals: Vec::new(),
                version: 0,
            });
        }
        let mut session = Session {
            id: session_id.clone(),
            sentences: states,
            sources: BTreeSet::new(),
            journal: vec![Event::Created { session_id, sentences }],
        };
        for event in events {
            session.commit(event)?;
        }
        Ok(session)
    }

    pub fn journal(&self) -> &[Event] {
        &self.journal
    }

    pub fn sentences(&self) -> &[SentenceState] {
        &self.sentences
    }

    pub fn sentence(&self, n: usize) -> Result<&SentenceState, EditError> {
        self.sentences.get(n).ok_or(EditError::SentenceOutOfRange { index: n, len: self.sentences.len() })
    }

    fn check_version(&self, n: usize, given: u64) -> Result<(), EditError> {
        let current = self.sentence(n)?.version;
        if current != given {
            return Err(EditError::VersionConflict { sentence: n, current, given });
        }
        Ok(())
    }

    /// Add a confirmed span, or change the polarity of the span with the
    /// same bounds. Proposals under the new span are dropped.
    pub fn set_span(&mut self, n: usize, span: AspectSpan, version: u64) -> Result<u64, EditError> {
        self.check_version(n, version)?;
        self.commit(Event::SpanSet { sentence: n, span })?;
        Ok(self.sentences[n].version)
    }

    pub fn delete_span(&mut self, n: usize, start: usize, end: usize, version: u64) -> Result<u64, EditError> {
        self.check_version(n, version)?;
        self.commit(Event::SpanDeleted { sentence: n, start, end })?;
        Ok(self.sentences[n].version)
    }

    pub fn accept(&mut self, n: usize, index: usize, version: u64) -> Result<u64, EditError> {
        self.check_version(n, version)?;
        self.commit(Event::ProposalAccepted { sentence: n, index })?;
        Ok(self.sentences[n].version)
    }

    pub fn reject(&mut self, n: usize, index: usize, version: u64) -> Result<u64, EditError> {
        self.check_version(n, version)?;
        self.commit(Event::ProposalRejected { sentence: n, index })?;
        Ok(self.sentences[n].version)
    }

    /// Sentences an autolabel run should look at: those without confirmed
    /// spans.
    pub fn unconfirmed(&self) -> Vec<(usize, AbsaExample)> {
        self.sentences
            .iter()
            .enumerate()
            .filter(|(_, s)| s.confirmed.is_empty())
            .map(|(i, s)| (i, s.example(false)))
            .collect()
    }

    pub fn has_source(&self, digest: &str) -> bool {
        self.sources.contains(digest)
    }

    /// Store predictions as proposals and return how many were added.
    /// A source that already ran adds nothing; sentences that gained
    /// confirmed spans meanwhile are skipped, as are predictions that
    /// overlap a span already present.
    pub fn propose(&mut self, source: &str, predictions: Vec<(usize, Vec<SpanPrediction>)>) -> Result<usize, EditError> {
        if self.has_source(source) {
            return Ok(0);
        }
        let mut proposals = Vec::new();
        for (n, preds) in predictions {
            let state = self.sentence(n)?;
            if !state.confirmed.is_empty() {
                continue;
            }
            let mut kept: Vec<Proposal> = Vec::new();
            for p in preds {
                let span = AspectSpan::new(p.start, p.end, p.polarity);
                if span.end >= state.tokens.len()
                    || state.occupied().chain(kept.iter().map(|k| &k.span)).any(|o| o.overlaps(&span))
                {
                    continue;
                }
                kept.push(Proposal { span, confidence: p.confidence, source: source.to_string() });
            }
            if !kept.is_empty() {
                proposals.push((n, kept));
            }
        }
        let count = proposals.iter().map(|(_, p)| p.len()).sum();
        self.commit(Event::Proposed { source: source.to_string(), proposals })?;
        Ok(count)
    }

    /// Validate `event` against the current state, apply it and append it
    /// to the journal. Nothing changes when it is rejected.
    fn commit(&mut self, event: Event) -> Result<(), EditError> {
        let len = self.sentences.len();
        let get = |n: usize| EditError::SentenceOutOfRange { index: n, len };
        match &event {
            Event::Created { .. } => return Err(EditError::Journal("duplicate created event".into())),
            Event::SpanSet { sentence, span } => {
                let s = self.sentences.get_mut(*sentence).ok_or_else(|| get(*sentence))?;
                AbsaExample::new(s.tokens.clone(), vec![*span])?;
                let same = s.confirmed.iter().position(|c| c.start == span.start && c.end == span.end);
                match same {
                    Some(i) => s.confirmed[i].polarity = span.polarity,
                    None => {
                        if s.confirmed.iter().any(|c| c.overlaps(span)) {
                            return Err(EditError::Overlap { start: span.start, end: span.end });
                        }
                        s.confirmed.push(*span);
                        s.confirmed.sort();
                    }
                }
                s.proposals.retain(|p| !p.span.overlaps(span));
                s.version += 1;
            }
            Event::SpanDeleted { sentence, start, end } => {
                let s = self.sentences.get_mut(*sentence).ok_or_else(|| get(*sentence))?;
                let i = s
                    .confirmed
                    .iter()
                    .position(|c| c.start == *start && c.end == *end)
                    .ok_or(EditError::NoSuchSpan { sentence: *sentence, start: *start, end: *end })?;
                s.confirmed.remove(i);
                s.version += 1;
            }
            Event::Proposed { source, proposals } => {
                for (n, props) in proposals {
                    let s = self.sentences.get(*n).ok_or_else(|| get(*n))?;
                    let mut spans: Vec<AspectSpan> = s.occupied().copied().collect();
                    spans.extend(props.iter().map(|p| p.span));
                    AbsaExample::new(s.tokens.clone(), spans)?;
                }
                for (n, props) in proposals {
                    let s = &mut self.sentences[*n];
                    s.proposals.extend(props.iter().cloned());
                    s.proposals.sort_by_key(|p| p.span);
                    s.version += 1;
                }
                self.sources.insert(source.clone());
            }
            Event::ProposalAccepted { sentence, index } | Event::ProposalRejected { sentence, index } => {
                let s = self.sentences.get_mut(*sentence).ok_or_else(|| get(*sentence))?;
                if *index >= s.proposals.len() {
                    return Err(EditError::NoSuchProposal { sentence: *sentence, index: *index });
                }
                let p = s.proposals.remove(*index);
                if matches!(event, Event::ProposalAccepted { .. }) {
                    s.confirmed.push(p.span);
                    s.confirmed.sort();
                }
                s.version += 1;
            }
        }
        self.journal.push(event);
        Ok(())
    }

    /// Serialize confirmed spans, plus proposals when asked, in `kind`.
    pub fn export(&self, kind: EncodingKind, include_proposals: bool) -> Result<String, CorpusError> {
        let examples: Vec<AbsaExample> = self.sentences.iter().map(|s| s.example(include_proposals)).collect();
        let corpus = match kind {
            EncodingKind::AscTriples => Corpus::Triples(examples_to_triples(&examples)),
            _ => Corpus::Examples(examples),
        };
        corpus::serialize(&corpus, kind)
    }
}

/// All sessions of a running service. With a directory, each session's
/// journal lives in `<dir>/<id>.jsonl` and is replayed on open.
#[derive(Debug, Default)]
pub struct SessionStore {
    dir: Option<PathBuf>,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Session>>>>,
}

fn journal_line(event: &Event) -> String {
    let mut line = serde_json::to_string(event).expect("events serialize");
    line.push('\n');
    line
}

/// Parse a JSON-lines journal.
pub fn read_journal(text: &str) -> Result<Vec<Event>, EditError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| EditError::Journal(format!("line {}: {e}", i + 1))))
        .collect()
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Open a journal directory, replaying every `*.jsonl` in it.
    pub fn open(dir: &Path) -> Result<Self, EditError> {
        let io = |e: std::io::Error| EditError::Journal(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        let mut sessions = BTreeMap::new();
        for path in paths {
            let text = fs::read_to_string(&path).map_err(io)?;
            let session = Session::replay(read_journal(&text)?)
                .map_err(|e| EditError::Journal(format!("{}: {e}", path.display())))?;
            sessions.insert(session.id.clone(), Arc::new(Mutex::new(session)));
        }
        Ok(SessionStore { dir: Some(dir.to_path_buf()), sessions: RwLock::new(sessions) })
    }

    fn journal_path(&self, id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    fn append(&self, id: &str, events: &[Event]) -> Result<(), EditError> {
        let Some(path) = self.journal_path(id) else { return Ok(()) };
        let text: String = events.iter().map(journal_line).collect();
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .and_then(|mut f| f.write_all(text.as_bytes()).and_then(|_| f.sync_data()))
            .map_err(|e| EditError::Journal(format!("{}: {e}", path.display())))
    }

    pub fn create(&self, sentences: &[AbsaExample]) -> Result<String, EditError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::new(id.clone(), sentences);
        self.append(&id, session.journal())?;
        self.sessions.write().insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.sessions.read().keys().cloned().collect()
    }

    pub fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, EditError> {
        self.sessions.read().get(id).cloned().ok_or_else(|| EditError::SessionNotFound(id.to_string()))
    }

    /// Run `f` on a session under its lock and persist whatever it
    /// journaled. Appends are therefore serialized per session.
    pub fn edit<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> Result<T, EditError>) -> Result<T, EditError> {
        let session = self.get(id)?;
        let mut s = session.lock();
        let before = s.journal.len();
        let out = f(&mut s)?;
        self.append(id, &s.journal[before..])?;
        Ok(out)
    }

    /// Write `<id>.snapshot.json` next to each journal.
    pub fn snapshot_all(&self) -> Result<usize, EditError> {
        let Some(dir) = &self.dir else { return Ok(0) };
        let sessions = self.sessions.read();
        for (id, s) in sessions.iter() {
            let path = dir.join(format!("{id}.snapshot.json"));
            let text = serde_json::to_string_pretty(&*s.lock()).expect("sessions serialize");
            crate::hub::write_atomic(&path, text.as_bytes())
                .map_err(|e| EditError::Journal(format!("{}: {e}", path.display())))?;
        }
        Ok(sessions.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Polarity;

    fn staff() -> Session {
        Session::new("s", &parse_upload(b"But the staff was so nice to us .\nThe [B-ASP]food[E-ASP]$LABEL$Positive was ok\n").unwrap())
    }

    #[test]
    fn uploads() {
        assert_eq!(parse_upload(b"a b\n\nc\nd e f\n").unwrap().len(), 3);
        assert!(matches!(parse_upload(b""), Err(EditError::Upload(_))));
        assert!(matches!(parse_upload(b" \n\n"), Err(EditError::Upload(_))));
        assert!(matches!(parse_upload(b"\xff\xfe"), Err(EditError::Upload(_))));
        let s = staff();
        assert_eq!(s.sentence(1).unwrap().confirmed, vec![AspectSpan::new(1, 1, Polarity::Positive)]);
    }

    #[test]
    fn versions_conflicts_and_overlap() {
        let mut s = staff();
        assert_eq!(s.set_span(0, AspectSpan::new(2, 2, Polarity::Positive), 0).unwrap(), 1);
        assert!(matches!(
            s.set_span(0, AspectSpan::new(2, 3, Polarity::Positive), 0),
            Err(EditError::VersionConflict { current: 1, given: 0, .. })
        ));
        assert!(matches!(s.set_span(0, AspectSpan::new(2, 3, Polarity::Positive), 1), Err(EditError::Overlap { .. })));
        assert!(matches!(s.set_span(0, AspectSpan::new(5, 40, Polarity::Positive), 1), Err(EditError::InvalidSpan(_))));
        assert_eq!(s.set_span(0, AspectSpan::new(2, 2, Polarity::Negative), 1).unwrap(), 2);
        assert_eq!(s.sentence(0).unwrap().confirmed, vec![AspectSpan::new(2, 2, Polarity::Negative)]);
        assert_eq!(s.journal().len(), 3);
        assert_eq!(Session::replay(s.journal().to_vec()).unwrap(), s);
    }

    #[test]
    fn proposals_are_idempotent_and_skip_confirmed() {
        let mut s = staff();
        let pred = |start, end| SpanPrediction { start, end, polarity: Polarity::Positive, confidence: 0.75 };
        let n = s.propose("abc", vec![(0, vec![pred(2, 2)]), (1, vec![pred(3, 3)])]).unwrap();
        assert_eq!(n, 1);
        assert_eq!(s.propose("abc", vec![(0, vec![pred(4, 4)])]).unwrap(), 0);
        assert_eq!(s.sentence(0).unwrap().version, 1);
        assert_eq!(s.sentence(1).unwrap().version, 0);
        assert_eq!(s.export(EncodingKind::AtescColumns, false).unwrap().matches("B-ASP").count(), 1);
        assert_eq!(s.export(EncodingKind::AtescColumns, true).unwrap().matches("B-ASP").count(), 2);
        s.accept(0, 0, 1).unwrap();
        assert_eq!(s.sentence(0).unwrap().confirmed, vec![AspectSpan::new(2, 2, Polarity::Positive)]);
        assert!(matches!(s.reject(0, 0, 2), Err(EditError::NoSuchProposal { .. })));
        let back = Session::replay(read_journal(&s.journal().iter().map(journal_line).collect::<String>()).unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(back.has_source("abc"));
    }

    #[test]
    fn store_persists_and_reopens() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let id = store.create(&parse_upload(b"one two three\n").unwrap()).unwrap();
        store.edit(&id, |s| s.set_span(0, AspectSpan::new(1, 2, Polarity::Neutral), 0)).unwrap();
        assert!(store.edit(&id, |s| s.set_span(0, AspectSpan::new(0, 0, Polarity::Neutral), 0)).is_err());
        assert_eq!(store.snapshot_all().unwrap(), 1);
        let reopened = SessionStore::open(dir.path()).unwrap();
        assert_eq!(*reopened.get(&id).unwrap().lock(), *store.get(&id).unwrap().lock());
        assert!(matches!(reopened.get("nope"), Err(EditError::SessionNotFound(_))));
    }
}
