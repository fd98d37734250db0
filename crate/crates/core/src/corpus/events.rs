//! Trigger-event windows and post tagging.

use super::{CleanPost, CorpusError};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// Offline event whose date window is used to sample high-salience discourse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Sexist,
    Political,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TriggerEvent {
    pub name: String,
    pub kind: EventKind,
    /// Inclusive window, whole days in UTC.
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub description: String,
    /// Lower value wins when windows overlap. Required on both events of any
    /// overlapping pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<u32>,
}

impl TriggerEvent {
    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    fn overlaps(&self, other: &TriggerEvent) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

#[derive(Debug, Deserialize)]
struct EventsFile {
    #[serde(default)]
    event: Vec<TriggerEvent>,
}

/// Load event definitions from a TOML file with `[[event]]` tables. Dates are
/// quoted `"YYYY-MM-DD"` strings.
pub fn load_events(path: &Path) -> Result<Vec<TriggerEvent>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|e| CorpusError::EventsFile {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let parsed: EventsFile = toml::from_str(&text).map_err(|e| CorpusError::EventsFile {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    for event in &parsed.event {
        if event.start > event.end {
            return Err(CorpusError::InvertedWindow {
                name: event.name.clone(),
                start: event.start,
                end: event.end,
            });
        }
    }
    Ok(parsed.event)
}

/// Tag each post whose creation date falls in an event window. Overlapping
/// windows require declared priorities; the lowest priority value wins.
pub fn tag_events(
    mut posts: Vec<CleanPost>,
    events: &[TriggerEvent],
) -> Result<Vec<CleanPost>, CorpusError> {
    for (i, a) in events.iter().enumerate() {
        if a.start > a.end {
            return Err(CorpusError::InvertedWindow {
                name: a.name.clone(),
                start: a.start,
                end: a.end,
            });
        }
        for b in events.iter().skip(i + 1) {
            if a.overlaps(b) && (a.priority.is_none() || b.priority.is_none()) {
                return Err(CorpusError::OverlappingWindows {
                    a: a.name.clone(),
                    b: b.name.clone(),
                });
            }
        }
    }
    for post in &mut posts {
        let date = post.created_at.date_naive();
        post.event = events
            .iter()
            .filter(|e| e.contains(date))
            .min_by_key(|e| e.priority.unwrap_or(u32::MAX))
            .map(|e| e.name.clone());
    }
    Ok(posts)
}
