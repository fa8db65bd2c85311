use std::collections::{BTreeMap, HashSet};
use std::io::BufReader;
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc;
use std::thread;

use super::wire::{decode_payload, read_frame, Message, ResultMsg};
use super::NetError;
use crate::correlations::CoincidenceTable;
use crate::ensemble::{CoincidenceCounts, Estimate, Wing};
use crate::qlinalg::Sign;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CollectorConfig {
    /// Pairs the source was asked to emit, if known; enables the missing count.
    pub expected_pairs: Option<u64>,
    /// Unmatched results held at once before the oldest is dropped as an orphan.
    pub capacity: usize,
    /// Join wing A's pair `i` with wing B's pair `i + 1`.
    pub mismatch: bool,
}

impl Default for CollectorConfig {
    fn default() -> Self {
        CollectorConfig { expected_pairs: None, capacity: 1 << 20, mismatch: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollectorReport {
    pub received_a: u64,
    pub received_b: u64,
    pub n_matched: u64,
    pub n_orphaned: u64,
    /// Results repeating a pair id already seen on the same wing.
    pub n_duplicates: u64,
    pub n_malformed: u64,
    /// Result messages never received, when the expected pair count is known.
    pub n_missing: Option<u64>,
    pub counts: CoincidenceCounts,
    pub table: CoincidenceTable,
    /// `None` with fewer than two matched pairs.
    pub estimate: Option<Estimate>,
    pub stream_errors: Vec<String>,
}

impl CollectorReport {
    /// Every decoded result is matched (two per pair), orphaned, or a duplicate.
    pub fn reconciles(&self) -> bool {
        self.received_a + self.received_b == 2 * self.n_matched + self.n_orphaned + self.n_duplicates
    }
}

fn idx(w: Wing) -> usize {
    match w {
        Wing::A => 0,
        Wing::B => 1,
    }
}

/// Pair-id join over results from both wings, in any interleaving.
#[derive(Debug)]
pub struct JoinEngine {
    cfg: CollectorConfig,
    pending: [BTreeMap<u64, Sign>; 2],
    seen: [HashSet<u64>; 2],
    received: [u64; 2],
    matched: u64,
    orphaned: u64,
    duplicates: u64,
    malformed: u64,
    counts: CoincidenceCounts,
}

impl JoinEngine {
    pub fn new(cfg: CollectorConfig) -> Self {
        JoinEngine {
            cfg,
            pending: [BTreeMap::new(), BTreeMap::new()],
            seen: [HashSet::new(), HashSet::new()],
            received: [0; 2],
            matched: 0,
            orphaned: 0,
            duplicates: 0,
            malformed: 0,
            counts: CoincidenceCounts::default(),
        }
    }

    fn key(&self, wing: Wing, pair_id: u64) -> Option<u64> {
        match (wing, self.cfg.mismatch) {
            (Wing::A, true) => pair_id.checked_add(1),
            _ => Some(pair_id),
        }
    }

    pub fn push(&mut self, wing: Wing, r: &ResultMsg) {
        let w = idx(wing);
        self.received[w] += 1;
        if !self.seen[w].insert(r.pair_id) {
            log::warn!("duplicate pair id {} on wing {wing:?}", r.pair_id);
            self.duplicates += 1;
            return;
        }
        let Some(key) = self.key(wing, r.pair_id) else {
            self.orphaned += 1;
            return;
        };
        match self.pending[1 - w].remove(&key) {
            Some(other) => {
                let (a, b) = if wing == Wing::A { (r.outcome, other) } else { (other, r.outcome) };
                self.counts.record(a, b);
                self.matched += 1;
            }
            None => {
                self.pending[w].insert(key, r.outcome);
                self.evict();
            }
        }
    }

    fn evict(&mut self) {
        while self.pending[0].len() + self.pending[1].len() > self.cfg.capacity {
            let oldest = |m: &BTreeMap<u64, Sign>| m.keys().next().copied().unwrap_or(u64::MAX);
            let w = if oldest(&self.pending[0]) <= oldest(&self.pending[1]) { 0 } else { 1 };
            self.pending[w].pop_first();
            self.orphaned += 1;
        }
    }

    pub fn note_malformed(&mut self) {
        self.malformed += 1;
    }

    pub fn finish(self) -> CollectorReport {
        let leftover = (self.pending[0].len() + self.pending[1].len()) as u64;
        let received = self.received[0] + self.received[1];
        CollectorReport {
            received_a: self.received[0],
            received_b: self.received[1],
            n_matched: self.matched,
            n_orphaned: self.orphaned + leftover,
            n_duplicates: self.duplicates,
            n_malformed: self.malformed,
            n_missing: self.cfg.expected_pairs.map(|n| (2 * n).saturating_sub(received)),
            counts: self.counts,
            table: self.counts.table(),
            estimate: self.counts.correlation().ok(),
            stream_errors: Vec::new(),
        }
    }
}

enum Event {
    Result(Wing, ResultMsg),
    Malformed,
    Failed(Wing, String),
}

fn read_hello(r: &mut BufReader<TcpStream>) -> Result<Wing, NetError> {
    let payload = read_frame(r)?.ok_or_else(|| NetError::Handshake("connection closed before hello".into()))?;
    match decode_payload(&payload) {
        Ok(Message::Hello(w)) => Ok(w),
        Ok(other) => Err(NetError::Handshake(format!("expected hello, got {other:?}"))),
        Err(e) => Err(NetError::Handshake(e.to_string())),
    }
}

fn pump(wing: Wing, mut r: BufReader<TcpStream>, tx: mpsc::SyncSender<Event>) {
    loop {
        let ev = match read_frame(&mut r) {
            Ok(None) => return,
            Ok(Some(p)) => match decode_payload(&p) {
                Ok(Message::Result(m)) => Event::Result(wing, m),
                Ok(other) => {
                    log::warn!("wing {wing:?}: unexpected {other:?}");
                    Event::Malformed
                }
                Err(e) => {
                    log::warn!("wing {wing:?}: malformed frame: {e}");
                    Event::Malformed
                }
            },
            Err(e) => {
                let _ = tx.send(Event::Failed(wing, e.to_string()));
                return;
            }
        };
        if tx.send(ev).is_err() {
            return;
        }
    }
}

/// Accepts one connection per wing and joins their results until both close.
pub fn run_collector(listener: &TcpListener, cfg: CollectorConfig) -> Result<CollectorReport, NetError> {
    let (tx, rx) = mpsc::sync_channel(1 << 14);
    let mut wings = Vec::new();
    let mut handles = Vec::new();
    for _ in 0..2 {
        let (stream, peer) = listener.accept()?;
        let mut r = BufReader::new(stream);
        let wing = read_hello(&mut r)?;
        if wings.contains(&wing) {
            return Err(NetError::Handshake(format!("second connection for wing {wing:?}")));
        }
        log::info!("collector: wing {wing:?} connected from {peer}");
        wings.push(wing);
        let tx = tx.clone();
        handles.push(thread::spawn(move || pump(wing, r, tx)));
    }
    drop(tx);
    let mut engine = JoinEngine::new(cfg);
    let mut errors = Vec::new();
    for ev in rx {
        match ev {
            Event::Result(w, m) => engine.push(w, &m),
            Event::Malformed => engine.note_malformed(),
            Event::Failed(w, e) => errors.push(format!("wing {w:?}: {e}")),
        }
    }
    for h in handles {
        h.join().map_err(|_| NetError::Handshake("reader thread panicked".into()))?;
    }
    let mut rep = engine.finish();
    rep.stream_errors = errors;
    Ok(rep)
}
