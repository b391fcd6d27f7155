//! Score tables, the JSON Lines score file format, and score oracles.
//!
//! A score file holds one JSON object per line, `{"id": "<string>", "score": <number>}`.
//! Ids must be unique and scores finite and non-negative. Blank lines are ignored.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores keyed by sample id, kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    ids: Vec<String>,
    scores: Vec<f64>,
    index: HashMap<String, usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoreLine {
    id: String,
    score: f64,
}

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a table from `(id, score)` pairs, validating every entry.
    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut table = Self::new();
        for (id, score) in entries {
            table.insert(id.into(), score)?;
        }
        Ok(table)
    }

    /// Appends an entry. Rejects duplicate ids and scores that are negative or non-finite.
    pub fn insert(&mut self, id: String, score: f64) -> Result<()> {
        if !score.is_finite() || score < 0.0 {
            return Err(Error::InvalidScore { id, value: score });
        }
        if self.index.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.scores.push(score);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.index.get(id).map(|&i| self.scores[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.scores.iter().copied())
    }

    /// Sub-table over `ids`, in the order given.
    pub fn restrict(&self, ids: &[String]) -> Result<ScoreTable> {
        let mut out = ScoreTable::new();
        for id in ids {
            let score = self
                .get(id)
                .ok_or_else(|| Error::MissingScore(id.clone()))?;
            out.insert(id.clone(), score)?;
        }
        Ok(out)
    }

    /// Parses a score file from any reader. `origin` names the source in errors.
    pub fn read_jsonl<R: BufRead>(reader: R, origin: &str) -> Result<Self> {
        let mut table = ScoreTable::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: origin.to_string(),
                line: n + 1,
                message,
            };
            let entry: ScoreLine =
                serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            table
                .insert(entry.id, entry.score)
                .map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(BufReader::new(file), &path.display().to_string())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (id, score) in self.iter() {
            let line = ScoreLine {
                id: id.to_string(),
                score,
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_jsonl(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

/// Something that can answer "what is the score of this sample" on demand.
///
/// Verification only asks the oracle about the sampled members of each region,
/// so an expensive oracle (a large model) is queried a bounded number of times.
pub trait ScoreOracle {
    fn score(&self, id: &str) -> Result<f64>;
}

impl<F> ScoreOracle for F
where
    F: Fn(&str) -> Result<f64>,
{
    fn score(&self, id: &str) -> Result<f64> {
        self(id)
    }
}

/// Oracle backed by a loaded score table.
#[derive(Debug, Clone, Copy)]
pub struct FileOracle<'a> {
    table: &'a ScoreTable,
}

pub fn file_oracle(table: &ScoreTable) -> FileOracle<'_> {
    FileOracle { table }
}

impl ScoreOracle for FileOracle<'_> {
    fn score(&self, id: &str) -> Result<f64> {
        self.table
            .get(id)
            .ok_or_else(|| Error::MissingScore(id.to_string()))
    }
}

/// Wraps an oracle and records every id it is asked about, in query order.
pub struct CountingOracle<O> {
    inner: O,
    queried: RefCell<Vec<String>>,
}

impl<O: ScoreOracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            queried: RefCell::new(Vec::new()),
        }
    }

    pub fn queries(&self) -> usize {
        self.queried.borrow().len()
    }

    pub fn queried_ids(&self) -> Vec<String> {
        self.queried.borrow().clone()
    }
}

impl<O: ScoreOracle> ScoreOracle for CountingOracle<O> {
    fn score(&self, id: &str) -> Result<f64> {
        self.queried.borrow_mut().push(id.to_string());
        self.inner.score(id)
    }
}
