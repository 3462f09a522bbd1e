//! Grid drum tablature: parsing, validation, canonical serialization and
//! seeded random generation.
//!
//! ```text
//! # groove
//! tempo: 120
//! div: 2
//! HH|x-x-|x-x-|
//! SN|--x-|--x-|
//! ```
//!
//! Every `x` is one strike at `offset + cell * 60 / (tempo * div)` seconds.
//! `|` is purely visual. Repeated track lines for a drum continue where the
//! previous line for that drum stopped.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::DrumKit;

pub const DEFAULT_TEMPO_BPM: f64 = 120.0;
pub const DEFAULT_DIV: u32 = 2;

/// Symbolic drum name, e.g. `SN`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DrumId(String);

impl DrumId {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DrumId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DrumId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatEvent {
    pub time_s: f64,
    /// Grid cell the strike sits on; `time_s` is derived from it.
    pub cell: u32,
    pub drum_id: DrumId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrumTab {
    pub tempo_bpm: f64,
    pub div: u32,
    pub offset_s: f64,
    pub events: Vec<BeatEvent>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TabError {
    #[error("line {line}, column {column}: malformed header: {message}")]
    MalformedHeader {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: unknown cell character {found:?}")]
    UnknownCell {
        line: usize,
        column: usize,
        found: char,
    },
    #[error("line {line}, column {column}: malformed line: {message}")]
    MalformedLine {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("tab contains no strikes")]
    Empty,
    #[error("unknown drum {0:?}")]
    UnknownDrum(DrumId),
    #[error("drum {drum} struck twice at {time_s} s")]
    DuplicateStrike { drum: DrumId, time_s: f64 },
}

impl DrumTab {
    pub fn cell_duration(&self) -> f64 {
        cell_duration(self.tempo_bpm, self.div)
    }

    pub fn time_of_cell(&self, cell: u32) -> f64 {
        self.offset_s + f64::from(cell) * self.cell_duration()
    }

    /// Drum ids in order of first appearance.
    pub fn drums(&self) -> Vec<DrumId> {
        let mut out: Vec<DrumId> = Vec::new();
        for e in &self.events {
            if !out.contains(&e.drum_id) {
                out.push(e.drum_id.clone());
            }
        }
        out
    }

    pub fn last_time(&self) -> Option<f64> {
        self.events.iter().map(|e| e.time_s).reduce(f64::max)
    }

    /// Canonical text form; `parse_tab(serialize())` reproduces `self`.
    pub fn serialize(&self) -> String {
        let mut out = format!(
            "tempo: {}\ndiv: {}\noffset: {}\n",
            self.tempo_bpm, self.div, self.offset_s
        );
        let mut tracks: BTreeMap<&DrumId, Vec<u32>> = BTreeMap::new();
        for e in &self.events {
            tracks.entry(&e.drum_id).or_default().push(e.cell);
        }
        let div = self.div.max(1) as usize;
        for (drum, cells) in tracks {
            let len = cells.iter().copied().max().map_or(0, |c| c as usize + 1);
            let mut row = vec!['-'; len];
            for c in cells {
                row[c as usize] = 'x';
            }
            out.push_str(drum.as_str());
            out.push('|');
            for (i, ch) in row.iter().enumerate() {
                out.push(*ch);
                if (i + 1) % (div * 4) == 0 && i + 1 != len {
                    out.push('|');
                }
            }
            out.push_str("|\n");
        }
        out
    }
}

pub fn cell_duration(tempo_bpm: f64, div: u32) -> f64 {
    60.0 / (tempo_bpm * f64::from(div))
}

fn sort_events(events: &mut [BeatEvent]) {
    events.sort_by(|a, b| {
        a.time_s
            .total_cmp(&b.time_s)
            .then_with(|| a.drum_id.cmp(&b.drum_id))
    });
}

fn header_error(line: usize, column: usize, message: impl Into<String>) -> TabError {
    TabError::MalformedHeader {
        line,
        column,
        message: message.into(),
    }
}

pub fn parse_tab(text: &str) -> Result<DrumTab, TabError> {
    let mut tempo = DEFAULT_TEMPO_BPM;
    let mut div = DEFAULT_DIV;
    let mut offset = 0.0;
    // (drum, cell) in source order; times are resolved once all headers are known.
    let mut strikes: Vec<(DrumId, u32, usize)> = Vec::new();
    let mut cursors: BTreeMap<DrumId, u32> = BTreeMap::new();

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let lead = line.len() - line.trim_start().len();
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }

        if let Some(bar) = trimmed.find('|') {
            let name = trimmed[..bar].trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(TabError::MalformedLine {
                    line: line_no,
                    column: lead + 1,
                    message: format!("bad drum name {name:?}"),
                });
            }
            let drum = DrumId::new(name);
            let cursor = cursors.entry(drum.clone()).or_insert(0);
            let body_start = lead + bar + 1;
            for (off, ch) in trimmed[bar + 1..].char_indices() {
                let column = line[..body_start + off].chars().count() + 1;
                match ch {
                    '|' => {}
                    '-' => *cursor += 1,
                    'x' => {
                        strikes.push((drum.clone(), *cursor, line_no));
                        *cursor += 1;
                    }
                    other => {
                        return Err(TabError::UnknownCell {
                            line: line_no,
                            column,
                            found: other,
                        })
                    }
                }
            }
            continue;
        }

        let Some(colon) = trimmed.find(':') else {
            return Err(TabError::MalformedLine {
                line: line_no,
                column: lead + 1,
                message: "expected a header, a comment or a track line".into(),
            });
        };
        let key = trimmed[..colon].trim();
        let value = trimmed[colon + 1..].trim();
        let value_col = lead + colon + 2 + (trimmed[colon + 1..].len() - trimmed[colon + 1..].trim_start().len());
        match key {
            "tempo" => {
                tempo = value
                    .parse::<f64>()
                    .ok()
                    .filter(|t| t.is_finite() && *t > 0.0)
                    .ok_or_else(|| header_error(line_no, value_col, format!("tempo must be a positive number, got {value:?}")))?;
            }
            "div" => {
                div = value
                    .parse::<u32>()
                    .ok()
                    .filter(|d| *d > 0)
                    .ok_or_else(|| header_error(line_no, value_col, format!("div must be a positive integer, got {value:?}")))?;
            }
            "offset" => {
                offset = value
                    .parse::<f64>()
                    .ok()
                    .filter(|o| o.is_finite() && *o >= 0.0)
                    .ok_or_else(|| header_error(line_no, value_col, format!("offset must be a non-negative number, got {value:?}")))?;
            }
            other => {
                return Err(header_error(line_no, lead + 1, format!("unknown header {other:?}")));
            }
        }
    }

    if strikes.is_empty() {
        return Err(TabError::Empty);
    }
    let cell = cell_duration(tempo, div);
    let mut events: Vec<BeatEvent> = strikes
        .into_iter()
        .map(|(drum_id, c, _)| BeatEvent {
            time_s: offset + f64::from(c) * cell,
            cell: c,
            drum_id,
        })
        .collect();
    sort_events(&mut events);
    Ok(DrumTab {
        tempo_bpm: tempo,
        div,
        offset_s: offset,
        events,
    })
}

/// Checks drum ids against the kit and the ordering invariants. The event
/// list comes back sorted by `(time, drum)`.
pub fn validate_tab(mut tab: DrumTab, kit: &DrumKit) -> Result<DrumTab, TabError> {
    if tab.events.is_empty() {
        return Err(TabError::Empty);
    }
    for e in &tab.events {
        if kit.pad_index(&e.drum_id).is_none() {
            return Err(TabError::UnknownDrum(e.drum_id.clone()));
        }
    }
    sort_events(&mut tab.events);
    for pair in tab.events.windows(2) {
        if pair[0].drum_id == pair[1].drum_id && pair[0].time_s == pair[1].time_s {
            return Err(TabError::DuplicateStrike {
                drum: pair[0].drum_id.clone(),
                time_s: pair[0].time_s,
            });
        }
    }
    Ok(tab)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomTabParams {
    pub duration_s: f64,
    pub tempo_bpm: f64,
    pub div: u32,
    pub density: f64,
    /// Time of the first grid cell; leaves room for the arms to leave rest.
    pub offset_s: f64,
}

/// Draws a random tab: every `(cell, drum)` pair is struck independently
/// with probability `density`. A cell column that makes the partial tab
/// infeasible according to `feasible` is redrawn (up to 32 times, then left
/// empty).
pub fn gen_random_tab(
    seed: u64,
    params: &RandomTabParams,
    drums: &[DrumId],
    mut feasible: impl FnMut(&DrumTab) -> bool,
) -> DrumTab {
    const MAX_REDRAWS: usize = 32;
    let cell = cell_duration(params.tempo_bpm, params.div);
    let n_cells = (params.duration_s / cell + 1e-9).floor().max(0.0) as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tab = DrumTab {
        tempo_bpm: params.tempo_bpm,
        div: params.div,
        offset_s: params.offset_s,
        events: Vec::new(),
    };

    for c in 0..n_cells {
        let time_s = params.offset_s + f64::from(c) * cell;
        for attempt in 0..=MAX_REDRAWS {
            let before = tab.events.len();
            for drum in drums {
                if rng.random::<f64>() < params.density {
                    tab.events.push(BeatEvent {
                        time_s,
                        cell: c,
                        drum_id: drum.clone(),
                    });
                }
            }
            if tab.events.len() == before || feasible(&tab) {
                break;
            }
            tab.events.truncate(before);
            if attempt == MAX_REDRAWS {
                break;
            }
        }
    }
    sort_events(&mut tab.events);
    tab
}
