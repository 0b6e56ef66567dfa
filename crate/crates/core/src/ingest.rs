//! Parsing and cleaning of timestamped, role-labelled interaction logs.
//!
//! Three tab-separated text inputs are understood:
//!
//! * events: `sender_key \t recipient_key \t unix_seconds`
//! * roles: `key \t user|developer` (case-insensitive)
//! * aliases: `alias_key \t canonical_key`
//!
//! Blank lines and lines starting with `#` are skipped in all of them.
//! Cleaning drops self-addressed events, orders the stream by time and
//! assigns dense vertex ids in order of first appearance.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense vertex identifier assigned at ingest.
pub type VertexId = u32;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no role entry for vertex `{key}`")]
    MissingRole { key: String },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

fn parse_error(line: usize, message: impl Into<String>) -> IngestError {
    IngestError::Parse {
        line,
        message: message.into(),
    }
}

/// One interaction as read from the events file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEvent {
    pub sender: String,
    pub recipient: String,
    pub timestamp: u64,
}

impl RawEvent {
    pub fn new(sender: impl Into<String>, recipient: impl Into<String>, timestamp: u64) -> Self {
        RawEvent {
            sender: sender.into(),
            recipient: recipient.into(),
            timestamp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Developer,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::User => "user",
            Role::Developer => "developer",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "user" => Ok(Role::User),
            "developer" => Ok(Role::Developer),
            other => Err(format!("unknown role `{other}` (expected user or developer)")),
        }
    }
}

/// Field layout of a line-oriented event source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventFormat {
    pub delimiter: char,
    pub comment_prefix: char,
}

impl Default for EventFormat {
    fn default() -> Self {
        EventFormat {
            delimiter: '\t',
            comment_prefix: '#',
        }
    }
}

/// Yields `(line_number, fields)` for every non-blank, non-comment line.
fn records<'a, R: BufRead + 'a>(
    source: R,
    format: &'a EventFormat,
) -> impl Iterator<Item = Result<(usize, Vec<String>), IngestError>> + 'a {
    source.lines().enumerate().filter_map(move |(i, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(IngestError::Io(e))),
        };
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with(format.comment_prefix) {
            return None;
        }
        let fields = line.split(format.delimiter).map(|f| f.trim().to_string()).collect();
        Some(Ok((i + 1, fields)))
    })
}

fn expect_fields(line: usize, fields: &[String], n: usize) -> Result<(), IngestError> {
    if fields.len() != n {
        return Err(parse_error(
            line,
            format!("expected {n} fields, found {}", fields.len()),
        ));
    }
    if let Some(pos) = fields.iter().position(|f| f.is_empty()) {
        return Err(parse_error(line, format!("field {} is empty", pos + 1)));
    }
    Ok(())
}

/// Reads one event per line, in file order. The parser does not filter;
/// self-addressed events are removed by [`clean_and_index`].
pub fn parse_events<R: BufRead>(source: R, format: &EventFormat) -> Result<Vec<RawEvent>, IngestError> {
    let mut events = Vec::new();
    for record in records(source, format) {
        let (line, fields) = record?;
        expect_fields(line, &fields, 3)?;
        let timestamp = fields[2]
            .parse::<u64>()
            .map_err(|_| parse_error(line, format!("timestamp `{}` is not a non-negative integer", fields[2])))?;
        events.push(RawEvent {
            sender: fields[0].clone(),
            recipient: fields[1].clone(),
            timestamp,
        });
    }
    Ok(events)
}

pub fn parse_roles<R: BufRead>(source: R) -> Result<HashMap<String, Role>, IngestError> {
    let mut roles = HashMap::new();
    for record in records(source, &EventFormat::default()) {
        let (line, fields) = record?;
        expect_fields(line, &fields, 2)?;
        let role = fields[1].parse::<Role>().map_err(|m| parse_error(line, m))?;
        roles.insert(fields[0].clone(), role);
    }
    Ok(roles)
}

pub fn parse_aliases<R: BufRead>(source: R) -> Result<HashMap<String, String>, IngestError> {
    let mut aliases = HashMap::new();
    for record in records(source, &EventFormat::default()) {
        let (line, fields) = record?;
        expect_fields(line, &fields, 2)?;
        aliases.insert(fields[0].clone(), fields[1].clone());
    }
    Ok(aliases)
}

/// Replaces every sender and recipient key by its canonical key. Keys
/// without an entry are left untouched; substitution is not transitive.
pub fn apply_alias_map(events: Vec<RawEvent>, aliases: &HashMap<String, String>) -> Vec<RawEvent> {
    if aliases.is_empty() {
        return events;
    }
    let canonical = |key: String| aliases.get(&key).cloned().unwrap_or(key);
    events
        .into_iter()
        .map(|e| RawEvent {
            sender: canonical(e.sender),
            recipient: canonical(e.recipient),
            timestamp: e.timestamp,
        })
        .collect()
}

/// A directed interaction between two dense vertex ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub src: VertexId,
    pub dst: VertexId,
    pub timestamp: u64,
}

impl Event {
    /// The unordered vertex pair, smaller id first.
    pub fn pair(&self) -> (VertexId, VertexId) {
        if self.src <= self.dst {
            (self.src, self.dst)
        } else {
            (self.dst, self.src)
        }
    }
}

/// Time-ordered events over a dense vertex dictionary.
///
/// The dictionary may contain vertices that no event touches: subsets
/// produced by [`TemporalEdgeList::with_events`] share the dictionary of
/// their parent so ids stay comparable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalEdgeList {
    events: Vec<Event>,
    keys: Vec<String>,
    ids: HashMap<String, VertexId>,
}

impl TemporalEdgeList {
    /// Builds an edge list from already-indexed events and a key dictionary.
    /// Events are stably sorted by timestamp.
    pub fn from_parts(mut events: Vec<Event>, keys: Vec<String>) -> Self {
        events.sort_by_key(|e| e.timestamp);
        let ids = keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i as VertexId))
            .collect();
        TemporalEdgeList { events, keys, ids }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Size of the vertex dictionary.
    pub fn vertex_count(&self) -> usize {
        self.keys.len()
    }

    pub fn key(&self, id: VertexId) -> &str {
        &self.keys[id as usize]
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn id(&self, key: &str) -> Option<VertexId> {
        self.ids.get(key).copied()
    }

    /// First and last timestamp, if any event exists.
    pub fn span(&self) -> Option<(u64, u64)> {
        Some((self.events.first()?.timestamp, self.events.last()?.timestamp))
    }

    /// A new list over the same dictionary containing only `events`.
    pub fn with_events(&self, events: Vec<Event>) -> Self {
        let mut events = events;
        events.sort_by_key(|e| e.timestamp);
        TemporalEdgeList {
            events,
            keys: self.keys.clone(),
            ids: self.ids.clone(),
        }
    }

    /// Distinct unordered vertex pairs in order of first occurrence.
    pub fn distinct_pairs(&self) -> Vec<(VertexId, VertexId)> {
        let mut seen = std::collections::HashSet::new();
        self.events
            .iter()
            .map(Event::pair)
            .filter(|p| seen.insert(*p))
            .collect()
    }

    /// Writes the events back out in the events-file format, using keys.
    pub fn write_events<W: Write>(&self, mut sink: W) -> io::Result<()> {
        for e in &self.events {
            writeln!(sink, "{}\t{}\t{}", self.key(e.src), self.key(e.dst), e.timestamp)?;
        }
        Ok(())
    }

    /// Converts back to raw keyed events.
    pub fn to_raw(&self) -> Vec<RawEvent> {
        self.events
            .iter()
            .map(|e| RawEvent::new(self.key(e.src), self.key(e.dst), e.timestamp))
            .collect()
    }
}

/// Role lookup keyed by dense vertex id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleTable {
    roles: Vec<Role>,
}

impl RoleTable {
    pub fn new(roles: Vec<Role>) -> Self {
        RoleTable { roles }
    }

    pub fn get(&self, id: VertexId) -> Option<Role> {
        self.roles.get(id as usize).copied()
    }

    /// Panics if `id` has no entry; every id produced by ingest has one.
    pub fn role(&self, id: VertexId) -> Role {
        self.roles[id as usize]
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn as_slice(&self) -> &[Role] {
        &self.roles
    }

    /// Writes `key \t role` lines for every vertex in `edges`' dictionary.
    pub fn write_roles<W: Write>(&self, edges: &TemporalEdgeList, mut sink: W) -> io::Result<()> {
        for (id, key) in edges.keys().iter().enumerate() {
            writeln!(sink, "{}\t{}", key, self.roles[id])?;
        }
        Ok(())
    }
}

/// Drops self-addressed events, sorts by timestamp (stable) and assigns
/// dense ids in first-appearance order over the sorted stream, sender
/// before recipient.
pub fn clean_and_index(
    events: Vec<RawEvent>,
    roles: &HashMap<String, Role>,
) -> Result<(TemporalEdgeList, RoleTable), IngestError> {
    let mut kept: Vec<RawEvent> = events.into_iter().filter(|e| e.sender != e.recipient).collect();
    kept.sort_by_key(|e| e.timestamp);

    let mut ids: HashMap<String, VertexId> = HashMap::new();
    let mut keys: Vec<String> = Vec::new();
    let mut role_list: Vec<Role> = Vec::new();
    let mut intern = |key: &str| -> Result<VertexId, IngestError> {
        if let Some(&id) = ids.get(key) {
            return Ok(id);
        }
        let role = *roles
            .get(key)
            .ok_or_else(|| IngestError::MissingRole { key: key.to_string() })?;
        let id = keys.len() as VertexId;
        ids.insert(key.to_string(), id);
        keys.push(key.to_string());
        role_list.push(role);
        Ok(id)
    };

    let mut indexed = Vec::with_capacity(kept.len());
    for e in &kept {
        let src = intern(&e.sender)?;
        let dst = intern(&e.recipient)?;
        indexed.push(Event {
            src,
            dst,
            timestamp: e.timestamp,
        });
    }

    Ok((
        TemporalEdgeList {
            events: indexed,
            keys,
            ids,
        },
        RoleTable::new(role_list),
    ))
}
