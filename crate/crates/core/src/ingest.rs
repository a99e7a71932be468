//! Streaming ingestion of canonical CDR CSV into a per-subscriber store.
//!
//! Input is read in blocks of lines. Each block is parsed in parallel and
//! then folded, in file order, into a [`StoreBuilder`]. [`StoreBuilder::finish`]
//! canonicalizes the result (subscribers and towers sorted, events sorted by
//! time, exact duplicates collapsed), so the final [`TrajectoryStore`] does not
//! depend on how the input was chunked or on the thread count.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coords::CoordSystem;
use crate::window::ObservationWindow;

pub const CSV_HEADER: &str = "subscriber_id,timestamp,tower_id,x,y";

/// Error samples kept verbatim in the summary.
const MAX_ERROR_SAMPLES: usize = 10;
const DEFAULT_BLOCK_BYTES: usize = 4 << 20;

/// Opaque subscriber identifier.
///
/// Plain decimal tokens that fit in a `u64` (and carry no leading zero) are
/// stored numerically and sort numerically; everything else is a string token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SubscriberId {
    Numeric(u64),
    Token(Box<str>),
}

impl SubscriberId {
    pub fn parse(s: &str) -> Option<Self> {
        if s.is_empty() {
            return None;
        }
        let canonical_number = s.bytes().all(|b| b.is_ascii_digit()) && (s == "0" || !s.starts_with('0'));
        if canonical_number {
            if let Ok(n) = s.parse::<u64>() {
                return Some(SubscriberId::Numeric(n));
            }
        }
        Some(SubscriberId::Token(s.into()))
    }
}

impl fmt::Display for SubscriberId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubscriberId::Numeric(n) => write!(f, "{n}"),
            SubscriberId::Token(t) => f.write_str(t),
        }
    }
}

impl From<u64> for SubscriberId {
    fn from(n: u64) -> Self {
        SubscriberId::Numeric(n)
    }
}

impl Serialize for SubscriberId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SubscriberId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        SubscriberId::parse(&s).ok_or_else(|| serde::de::Error::custom("empty subscriber id"))
    }
}

/// One subscriber activity.
#[derive(Debug, Clone, PartialEq)]
pub struct CdrRecord {
    pub subscriber: SubscriberId,
    /// Epoch seconds.
    pub timestamp: i64,
    pub tower_id: String,
    pub x: f64,
    pub y: f64,
}

impl CdrRecord {
    /// Canonical CSV row, without the trailing newline.
    pub fn to_csv_line(&self) -> String {
        format!("{},{},{},{},{}", self.subscriber, self.timestamp, self.tower_id, self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("expected 5 fields, found {0}")]
    FieldCount(usize),
    #[error("empty subscriber id")]
    EmptySubscriber,
    #[error("unparseable timestamp {0:?}")]
    BadTimestamp(String),
    #[error("empty tower id")]
    EmptyTower,
    #[error("unparseable {column} coordinate {value:?}")]
    BadCoordinate { column: &'static str, value: String },
    #[error("coordinate ({x}, {y}) is not finite or out of range")]
    InvalidPosition { x: f64, y: f64 },
    #[error("line is not valid UTF-8")]
    InvalidUtf8,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct LineError {
    pub line: u64,
    pub kind: ParseErrorKind,
}

/// Borrowed view of a parsed row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordRef<'a> {
    pub subscriber: &'a str,
    pub timestamp: i64,
    pub tower_id: &'a str,
    pub x: f64,
    pub y: f64,
}

impl RecordRef<'_> {
    pub fn to_owned_record(&self) -> CdrRecord {
        CdrRecord {
            subscriber: SubscriberId::parse(self.subscriber).expect("validated non-empty"),
            timestamp: self.timestamp,
            tower_id: self.tower_id.to_owned(),
            x: self.x,
            y: self.y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParsedLine<'a> {
    Record(RecordRef<'a>),
    Skip,
}

/// Parses one canonical CSV row. Blank lines and the header yield `Skip`.
pub fn parse_line(line_no: u64, line: &str, coords: CoordSystem) -> Result<ParsedLine<'_>, LineError> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let line = line.strip_prefix('\u{feff}').unwrap_or(line);
    if line.trim().is_empty() || line == CSV_HEADER {
        return Ok(ParsedLine::Skip);
    }
    let err = |kind| LineError { line: line_no, kind };
    let mut fields = line.split(',');
    let mut next = || fields.next().map(str::trim);
    let (Some(sub), Some(ts), Some(tower), Some(xs), Some(ys)) = (next(), next(), next(), next(), next()) else {
        return Err(err(ParseErrorKind::FieldCount(line.split(',').count())));
    };
    if next().is_some() {
        return Err(err(ParseErrorKind::FieldCount(line.split(',').count())));
    }
    if sub.is_empty() {
        return Err(err(ParseErrorKind::EmptySubscriber));
    }
    let timestamp = ts
        .parse::<i64>()
        .map_err(|_| err(ParseErrorKind::BadTimestamp(ts.to_owned())))?;
    if tower.is_empty() {
        return Err(err(ParseErrorKind::EmptyTower));
    }
    let coord = |column, value: &str| {
        value.parse::<f64>().map_err(|_| err(ParseErrorKind::BadCoordinate { column, value: value.to_owned() }))
    };
    let x = coord("x", xs)?;
    let y = coord("y", ys)?;
    if !coords.validate(x, y) {
        return Err(err(ParseErrorKind::InvalidPosition { x, y }));
    }
    Ok(ParsedLine::Record(RecordRef { subscriber: sub, timestamp, tower_id: tower, x, y }))
}

/// Owned convenience wrapper over [`parse_line`]: `Ok(None)` means skip.
pub fn parse_cdr_line(line_no: u64, line: &str, coords: CoordSystem) -> Result<Option<CdrRecord>, LineError> {
    Ok(match parse_line(line_no, line, coords)? {
        ParsedLine::Record(r) => Some(r.to_owned_record()),
        ParsedLine::Skip => None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ErrorPolicy {
    #[default]
    Abort,
    /// Count malformed lines and continue, failing once more than
    /// `max_errors` have been seen.
    Skip { max_errors: Option<u64> },
}

#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub window: ObservationWindow,
    pub coords: CoordSystem,
    pub on_error: ErrorPolicy,
    /// Approximate bytes per parallel parse block.
    pub block_bytes: usize,
}

impl IngestConfig {
    pub fn new(window: ObservationWindow) -> Self {
        Self { window, coords: CoordSystem::Planar, on_error: ErrorPolicy::Abort, block_bytes: DEFAULT_BLOCK_BYTES }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("reading input: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing header: expected {CSV_HEADER:?}, found {0:?}")]
    MissingHeader(String),
    #[error(transparent)]
    Line(#[from] LineError),
    #[error("{errors} malformed lines exceed the error budget of {budget}")]
    ErrorBudgetExceeded { errors: u64, budget: u64 },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    /// Data lines seen, header excluded.
    pub total_lines: u64,
    pub accepted: u64,
    pub skipped: u64,
    pub out_of_window: u64,
    pub errors: u64,
    /// Accepted records collapsed as exact duplicates.
    pub duplicates_removed: u64,
    pub subscribers: u64,
    /// Stored events after duplicate removal.
    pub events: u64,
    pub error_samples: Vec<String>,
}

/// One stored activity. Indices refer to the owning store's tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: i64,
    pub x: f64,
    pub y: f64,
    pub subscriber: u32,
    pub tower: u32,
}

/// Accumulates records; mergeable so input can be split into chunks.
#[derive(Debug, Clone)]
pub struct StoreBuilder {
    window: ObservationWindow,
    coords: CoordSystem,
    policy: ErrorPolicy,
    sub_index: HashMap<SubscriberId, u32>,
    subscribers: Vec<SubscriberId>,
    tower_index: HashMap<Box<str>, u32>,
    towers: Vec<Box<str>>,
    events: Vec<Event>,
    summary: IngestSummary,
    error_samples: Vec<(u64, String)>,
}

impl StoreBuilder {
    pub fn new(config: &IngestConfig) -> Self {
        Self {
            window: config.window.clone(),
            coords: config.coords,
            policy: config.on_error,
            sub_index: HashMap::new(),
            subscribers: Vec::new(),
            tower_index: HashMap::new(),
            towers: Vec::new(),
            events: Vec::new(),
            summary: IngestSummary::default(),
            error_samples: Vec::new(),
        }
    }

    /// Parses and folds one line.
    pub fn push_line(&mut self, line_no: u64, line: &str) -> Result<(), IngestError> {
        let parsed = parse_line(line_no, line, self.coords);
        self.consume(parsed)
    }

    /// Folds an already-built record, counted as one input line.
    pub fn push_record(&mut self, record: &CdrRecord) -> Result<(), IngestError> {
        self.summary.total_lines += 1;
        if !self.coords.validate(record.x, record.y) {
            let e = LineError {
                line: self.summary.total_lines,
                kind: ParseErrorKind::InvalidPosition { x: record.x, y: record.y },
            };
            return self.record_error(e);
        }
        if !self.window.contains(record.timestamp) {
            self.summary.out_of_window += 1;
            return Ok(());
        }
        let sub = self.intern_subscriber_owned(&record.subscriber);
        self.accept(sub, record.timestamp, &record.tower_id, record.x, record.y);
        Ok(())
    }

    /// Parses a block of newline-separated lines in parallel, then folds them
    /// in order. `first_line_no` is the 1-based number of the block's first line.
    pub fn push_block(&mut self, first_line_no: u64, block: &[u8]) -> Result<(), IngestError> {
        let block = block.strip_suffix(b"\n").unwrap_or(block);
        if block.is_empty() {
            return self.consume(Ok(ParsedLine::Skip));
        }
        let lines: Vec<&[u8]> = block.split(|&b| b == b'\n').collect();
        let coords = self.coords;
        let parsed: Vec<Result<ParsedLine<'_>, LineError>> = lines
            .par_iter()
            .with_min_len(2048)
            .enumerate()
            .map(|(i, bytes)| {
                let line_no = first_line_no + i as u64;
                match std::str::from_utf8(bytes) {
                    Ok(s) => parse_line(line_no, s, coords),
                    Err(_) => Err(LineError { line: line_no, kind: ParseErrorKind::InvalidUtf8 }),
                }
            })
            .collect();
        for p in parsed {
            self.consume(p)?;
        }
        Ok(())
    }

    fn consume(&mut self, parsed: Result<ParsedLine<'_>, LineError>) -> Result<(), IngestError> {
        self.summary.total_lines += 1;
        match parsed {
            Ok(ParsedLine::Skip) => self.summary.skipped += 1,
            Ok(ParsedLine::Record(r)) => {
                if self.window.contains(r.timestamp) {
                    let sub = self.intern_subscriber(r.subscriber);
                    self.accept(sub, r.timestamp, r.tower_id, r.x, r.y);
                } else {
                    self.summary.out_of_window += 1;
                }
            }
            Err(e) => self.record_error(e)?,
        }
        Ok(())
    }

    fn accept(&mut self, subscriber: u32, t: i64, tower: &str, x: f64, y: f64) {
        let tower = self.intern_tower(tower);
        self.events.push(Event { t, x, y, subscriber, tower });
        self.summary.accepted += 1;
    }

    fn record_error(&mut self, e: LineError) -> Result<(), IngestError> {
        self.summary.errors += 1;
        match self.policy {
            ErrorPolicy::Abort => Err(IngestError::Line(e)),
            ErrorPolicy::Skip { max_errors } => {
                if self.error_samples.len() < MAX_ERROR_SAMPLES {
                    self.error_samples.push((e.line, e.to_string()));
                }
                self.check_budget(max_errors)
            }
        }
    }

    fn check_budget(&self, max_errors: Option<u64>) -> Result<(), IngestError> {
        match max_errors {
            Some(budget) if self.summary.errors > budget => {
                Err(IngestError::ErrorBudgetExceeded { errors: self.summary.errors, budget })
            }
            _ => Ok(()),
        }
    }

    fn intern_subscriber(&mut self, raw: &str) -> u32 {
        let id = SubscriberId::parse(raw).expect("validated non-empty");
        self.intern_subscriber_owned(&id)
    }

    fn intern_subscriber_owned(&mut self, id: &SubscriberId) -> u32 {
        if let Some(&i) = self.sub_index.get(id) {
            return i;
        }
        let i = self.subscribers.len() as u32;
        self.subscribers.push(id.clone());
        self.sub_index.insert(id.clone(), i);
        i
    }

    fn intern_tower(&mut self, name: &str) -> u32 {
        if let Some(&i) = self.tower_index.get(name) {
            return i;
        }
        let i = self.towers.len() as u32;
        self.towers.push(name.into());
        self.tower_index.insert(name.into(), i);
        i
    }

    /// Absorbs another builder (e.g. one that processed a separate chunk).
    pub fn merge(&mut self, other: StoreBuilder) -> Result<(), IngestError> {
        let sub_map: Vec<u32> = other.subscribers.iter().map(|s| self.intern_subscriber_owned(s)).collect();
        let tower_map: Vec<u32> = other.towers.iter().map(|t| self.intern_tower(t)).collect();
        self.events.extend(other.events.into_iter().map(|mut e| {
            e.subscriber = sub_map[e.subscriber as usize];
            e.tower = tower_map[e.tower as usize];
            e
        }));
        let s = &mut self.summary;
        s.total_lines += other.summary.total_lines;
        s.accepted += other.summary.accepted;
        s.skipped += other.summary.skipped;
        s.out_of_window += other.summary.out_of_window;
        s.errors += other.summary.errors;
        self.error_samples.extend(other.error_samples);
        self.error_samples.sort();
        self.error_samples.truncate(MAX_ERROR_SAMPLES);
        match self.policy {
            ErrorPolicy::Skip { max_errors } => self.check_budget(max_errors),
            ErrorPolicy::Abort => Ok(()),
        }
    }

    /// Canonicalizes into an immutable store.
    pub fn finish(self) -> (TrajectoryStore, IngestSummary) {
        let StoreBuilder { window, coords, subscribers, towers, mut events, mut summary, error_samples, .. } = self;

        let (subscribers, sub_rank) = sorted_with_ranks(subscribers);
        let (towers, tower_rank) = sorted_with_ranks(towers);
        for e in &mut events {
            e.subscriber = sub_rank[e.subscriber as usize];
            e.tower = tower_rank[e.tower as usize];
        }
        events.par_sort_unstable_by(|a, b| {
            (a.subscriber, a.t, a.tower)
                .cmp(&(b.subscriber, b.t, b.tower))
                .then(a.x.total_cmp(&b.x))
                .then(a.y.total_cmp(&b.y))
        });
        let before = events.len();
        events.dedup_by(|b, a| a.subscriber == b.subscriber && a.t == b.t && a.tower == b.tower);
        events.shrink_to_fit();

        let mut offsets = vec![0usize; subscribers.len() + 1];
        for e in &events {
            offsets[e.subscriber as usize + 1] += 1;
        }
        for i in 1..offsets.len() {
            offsets[i] += offsets[i - 1];
        }

        summary.duplicates_removed = (before - events.len()) as u64;
        summary.subscribers = subscribers.len() as u64;
        summary.events = events.len() as u64;
        summary.error_samples = error_samples.into_iter().map(|(_, m)| m).collect();
        (TrajectoryStore { window, coords, subscribers, offsets, events, towers }, summary)
    }
}

fn sorted_with_ranks<T: Ord>(items: Vec<T>) -> (Vec<T>, Vec<u32>) {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| items[a].cmp(&items[b]));
    let mut rank = vec![0u32; items.len()];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new as u32;
    }
    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    let sorted = order.iter().map(|&i| slots[i].take().expect("each index once")).collect();
    (sorted, rank)
}

/// Canonical, deduplicated per-subscriber event store.
///
/// Subscribers are sorted by id, towers by name, and each subscriber's events
/// by `(timestamp, tower)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStore {
    window: ObservationWindow,
    coords: CoordSystem,
    subscribers: Vec<SubscriberId>,
    offsets: Vec<usize>,
    events: Vec<Event>,
    towers: Vec<Box<str>>,
}

impl TrajectoryStore {
    pub fn window(&self) -> &ObservationWindow {
        &self.window
    }

    pub fn coords(&self) -> CoordSystem {
        self.coords
    }

    pub fn subscriber_count(&self) -> usize {
        self.subscribers.len()
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    pub fn subscriber(&self, idx: u32) -> &SubscriberId {
        &self.subscribers[idx as usize]
    }

    pub fn subscribers(&self) -> &[SubscriberId] {
        &self.subscribers
    }

    pub fn tower_name(&self, idx: u32) -> &str {
        &self.towers[idx as usize]
    }

    /// Events of subscriber `idx`, sorted by time.
    pub fn events_of(&self, idx: u32) -> &[Event] {
        let i = idx as usize;
        &self.events[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// `(subscriber index, events)` in subscriber order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &[Event])> + '_ {
        (0..self.subscribers.len() as u32).map(move |i| (i, self.events_of(i)))
    }

    pub fn to_record(&self, e: &Event) -> CdrRecord {
        CdrRecord {
            subscriber: self.subscriber(e.subscriber).clone(),
            timestamp: e.t,
            tower_id: self.tower_name(e.tower).to_owned(),
            x: e.x,
            y: e.y,
        }
    }

    /// Writes the store as canonical CSV, grouped by subscriber.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for e in &self.events {
            writeln!(w, "{},{},{},{},{}", self.subscriber(e.subscriber), e.t, self.tower_name(e.tower), e.x, e.y)?;
        }
        w.flush()
    }
}

/// Collapses exact duplicates (same subscriber, timestamp and tower) in the
/// records of one subscriber. Simultaneous events on distinct towers are kept,
/// ordered by tower id.
pub fn dedupe(mut records: Vec<CdrRecord>) -> Vec<CdrRecord> {
    records.sort_by(|a, b| (a.timestamp, &a.tower_id).cmp(&(b.timestamp, &b.tower_id)));
    records.dedup_by(|b, a| a.subscriber == b.subscriber && a.timestamp == b.timestamp && a.tower_id == b.tower_id);
    records
}

/// Ingests a canonical CSV stream. The first line must be the header.
pub fn ingest_stream<R: Read>(source: R, config: &IngestConfig) -> Result<(TrajectoryStore, IngestSummary), IngestError> {
    let mut reader = BufReader::with_capacity(1 << 20, source);
    let mut builder = StoreBuilder::new(config);

    let mut header = Vec::new();
    reader.read_until(b'\n', &mut header)?;
    let header = String::from_utf8_lossy(&header);
    let header = header.trim_end_matches(['\n', '\r']).trim_start_matches('\u{feff}');
    if header != CSV_HEADER {
        return Err(IngestError::MissingHeader(header.to_owned()));
    }

    let mut next_line = 2u64;
    let mut block = Vec::with_capacity(config.block_bytes + 4096);
    loop {
        block.clear();
        let mut lines = 0u64;
        while block.len() < config.block_bytes {
            let n = reader.read_until(b'\n', &mut block)?;
            if n == 0 {
                break;
            }
            lines += 1;
        }
        if lines == 0 {
            break;
        }
        builder.push_block(next_line, &block)?;
        next_line += lines;
    }
    Ok(builder.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> IngestConfig {
        IngestConfig::new(ObservationWindow::default())
    }

    fn ingest(text: &str, config: &IngestConfig) -> Result<(TrajectoryStore, IngestSummary), IngestError> {
        ingest_stream(text.as_bytes(), config)
    }

    #[test]
    fn parses_canonical_row() {
        let r = parse_cdr_line(1, "42,1215129600,T7,1200.0,3400.0", CoordSystem::Planar).unwrap().unwrap();
        assert_eq!(
            r,
            CdrRecord { subscriber: 42.into(), timestamp: 1_215_129_600, tower_id: "T7".into(), x: 1200.0, y: 3400.0 }
        );
    }

    #[test]
    fn blank_and_header_skip() {
        assert_eq!(parse_cdr_line(1, "", CoordSystem::Planar).unwrap(), None);
        assert_eq!(parse_cdr_line(1, "  \r", CoordSystem::Planar).unwrap(), None);
        assert_eq!(parse_cdr_line(1, CSV_HEADER, CoordSystem::Planar).unwrap(), None);
    }

    #[test]
    fn malformed_rows_carry_line_numbers() {
        let e = parse_cdr_line(7, "42,notatime,T7,1,2", CoordSystem::Planar).unwrap_err();
        assert_eq!(e.line, 7);
        assert!(matches!(e.kind, ParseErrorKind::BadTimestamp(_)));

        let e = parse_cdr_line(3, "42,1,T7,1", CoordSystem::Planar).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::FieldCount(4));
        let e = parse_cdr_line(3, "42,1,T7,1,2,3", CoordSystem::Planar).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::FieldCount(6));
        let e = parse_cdr_line(3, "42,1,T7,NaN,2", CoordSystem::Planar).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::InvalidPosition { .. }));
        let e = parse_cdr_line(3, "42,1,T7,inf,2", CoordSystem::Planar).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::InvalidPosition { .. }));
        let e = parse_cdr_line(3, "42,1,T7,abc,2", CoordSystem::Planar).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::BadCoordinate { column: "x", .. }));
        let e = parse_cdr_line(3, ",1,T7,1,2", CoordSystem::Planar).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::EmptySubscriber);
        let e = parse_cdr_line(3, "1,1,,1,2", CoordSystem::Planar).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::EmptyTower);
        let e = parse_cdr_line(3, "1,1,T,200,2", CoordSystem::Geo).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::InvalidPosition { .. }));
    }

    #[test]
    fn subscriber_ids() {
        assert_eq!(SubscriberId::parse("42"), Some(SubscriberId::Numeric(42)));
        assert_eq!(SubscriberId::parse("042"), Some(SubscriberId::Token("042".into())));
        assert_eq!(SubscriberId::parse("0"), Some(SubscriberId::Numeric(0)));
        assert_eq!(SubscriberId::parse("abc").unwrap().to_string(), "abc");
        assert_eq!(SubscriberId::parse(""), None);
        assert!(SubscriberId::Numeric(10) > SubscriberId::Numeric(9));
    }

    #[test]
    fn counting_contract() {
        let text = format!("{CSV_HEADER}\n1,1215129600,T1,0,0\n\n2,1215129601,T1,0,0\n3,1215129602,T1,0,0\n");
        let (_, s) = ingest(&text, &cfg()).unwrap();
        assert_eq!((s.total_lines, s.accepted, s.skipped, s.errors, s.out_of_window), (4, 3, 1, 0, 0));
    }

    #[test]
    fn out_of_window_is_counted_not_stored() {
        let text = format!("{CSV_HEADER}\n1,1215129599,T1,0,0\n1,1215129600,T1,0,0\n");
        let (store, s) = ingest(&text, &cfg()).unwrap();
        assert_eq!(s.out_of_window, 1);
        assert_eq!(store.event_count(), 1);
    }

    #[test]
    fn missing_header_is_rejected() {
        let err = ingest("1,1215129600,T1,0,0\n", &cfg()).unwrap_err();
        assert!(matches!(err, IngestError::MissingHeader(_)));
    }

    #[test]
    fn abort_vs_skip_policy() {
        let text = format!("{CSV_HEADER}\n1,1215129600,T1,0,0\n1,bad,T1,0,0\n1,1215129700,T1,0,0\n");
        match ingest(&text, &cfg()).unwrap_err() {
            IngestError::Line(e) => assert_eq!(e.line, 3),
            other => panic!("unexpected {other:?}"),
        }

        let mut c = cfg();
        c.on_error = ErrorPolicy::Skip { max_errors: None };
        let (store, s) = ingest(&text, &c).unwrap();
        assert_eq!((s.accepted, s.errors), (2, 1));
        assert_eq!(store.event_count(), 2);
        assert_eq!(s.error_samples.len(), 1);
        assert!(s.error_samples[0].starts_with("line 3"));

        c.on_error = ErrorPolicy::Skip { max_errors: Some(0) };
        assert!(matches!(ingest(&text, &c).unwrap_err(), IngestError::ErrorBudgetExceeded { errors: 1, budget: 0 }));
    }

    #[test]
    fn dedupe_rules() {
        let r = |t, tower: &str| CdrRecord { subscriber: 1.into(), timestamp: t, tower_id: tower.into(), x: 0.0, y: 0.0 };
        assert_eq!(dedupe(vec![r(5, "T1"), r(5, "T1")]), vec![r(5, "T1")]);
        assert_eq!(dedupe(vec![r(5, "T2"), r(5, "T1")]), vec![r(5, "T1"), r(5, "T2")]);
        assert_eq!(dedupe(vec![r(5, "T1"), r(6, "T1")]), vec![r(5, "T1"), r(6, "T1")]);
    }

    #[test]
    fn store_collapses_duplicates_and_sorts() {
        let text = format!(
            "{CSV_HEADER}\n7,1215129700,T2,1,1\n7,1215129600,T1,0,0\n7,1215129600,T1,0,0\nabc,1215129600,T9,5,5\n3,1215129650,T1,0,0\n"
        );
        let (store, s) = ingest(&text, &cfg()).unwrap();
        assert_eq!(s.duplicates_removed, 1);
        assert_eq!(s.subscribers, 3);
        assert_eq!(store.subscribers(), &[3.into(), 7.into(), SubscriberId::Token("abc".into())]);
        let ev: Vec<i64> = store.events_of(1).iter().map(|e| e.t).collect();
        assert_eq!(ev, vec![1_215_129_600, 1_215_129_700]);
    }

    #[test]
    fn small_blocks_match_single_block() {
        let mut text = String::from(CSV_HEADER);
        text.push('\n');
        for i in 0..500u64 {
            text.push_str(&format!("{},{},T{},{},{}\n", i % 37, 1_215_129_600 + (i * 7919) % 86_400, i % 5, i, i * 2));
        }
        let big = cfg();
        let mut small = cfg();
        small.block_bytes = 64;
        assert_eq!(ingest(&text, &big).unwrap(), ingest(&text, &small).unwrap());
    }

    #[test]
    fn csv_round_trip_is_a_fixed_point() {
        let text = format!("{CSV_HEADER}\n2,1215129700,T2,1.5,-2.25\n1,1215129600,T1,0,0\n");
        let (store, _) = ingest(&text, &cfg()).unwrap();
        let mut out = Vec::new();
        store.write_csv(&mut out).unwrap();
        let (again, _) = ingest_stream(out.as_slice(), &cfg()).unwrap();
        assert_eq!(store, again);
    }
}
