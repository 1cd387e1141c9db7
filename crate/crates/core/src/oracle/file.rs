//! Precomputed score table. Text format, one record per line:
//! `instance_id<TAB>concept_index<TAB>confidence`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Oracle, PromptRecord};
use crate::error::{Error, OracleError, Result};
use crate::io_util::{atomic_write, read};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreTable {
    scores: BTreeMap<(u64, usize), f64>,
}

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one score. Duplicate keys and values outside `[0, 1]` are errors.
    pub fn insert(&mut self, instance_id: u64, concept: usize, confidence: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Domain(format!("confidence {confidence} outside [0, 1]")));
        }
        if self.scores.insert((instance_id, concept), confidence).is_some() {
            return Err(Error::Domain(format!("duplicate score for ({instance_id}, {concept})")));
        }
        Ok(())
    }

    pub fn from_records(records: &[PromptRecord]) -> Result<Self> {
        let mut t = Self::new();
        for r in records {
            t.insert(r.query_image_id, r.concept, r.answer_confidence)?;
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn get(&self, instance_id: u64, concept: usize) -> Option<f64> {
        self.scores.get(&(instance_id, concept)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, usize, f64)> + '_ {
        self.scores.iter().map(|(&(i, c), &v)| (i, c, v))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read(path)?;
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::parse(e.valid_up_to(), "score file is not UTF-8"))?;
        parse_score_file(text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, write_score_file(self).as_bytes())
    }
}

impl Oracle for ScoreTable {
    fn query(&self, _instance: &[f64], instance_id: u64, concept: usize) -> Result<f64, OracleError> {
        self.get(instance_id, concept).ok_or(OracleError::Lookup { instance_id, concept })
    }

    fn kind(&self) -> &str {
        "file"
    }
}

pub fn parse_score_file(text: &str) -> Result<ScoreTable> {
    let mut table = ScoreTable::new();
    let mut offset = 0;
    for (lineno, line) in text.split_inclusive('\n').enumerate() {
        let at = offset;
        offset += line.len();
        let body = line.trim_end_matches(['\n', '\r']);
        if body.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split('\t').collect();
        let bad = |msg: String| Error::parse(at, format!("line {}: {msg}", lineno + 1));
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        let id: u64 = fields[0].trim().parse().map_err(|_| bad(format!("bad instance id {:?}", fields[0])))?;
        let concept: usize = fields[1].trim().parse().map_err(|_| bad(format!("bad concept index {:?}", fields[1])))?;
        let conf: f64 = fields[2].trim().parse().map_err(|_| bad(format!("bad confidence {:?}", fields[2])))?;
        table.insert(id, concept, conf).map_err(|e| bad(e.to_string()))?;
    }
    Ok(table)
}

pub fn write_score_file(table: &ScoreTable) -> String {
    let mut out = String::new();
    for (id, c, v) in table.iter() {
        // `{:?}` on f64 prints the shortest string that round-trips.
        let _ = writeln!(out, "{id}\t{c}\t{v:?}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_returns_stored_score() {
        let t = parse_score_file("7\t3\t0.42\n").unwrap();
        assert_eq!(t.query(&[], 7, 3).unwrap(), 0.42);
    }

    #[test]
    fn empty_table_is_valid_but_errors_on_query() {
        let t = parse_score_file("").unwrap();
        assert!(t.is_empty());
        assert_eq!(t.query(&[], 0, 0), Err(OracleError::Lookup { instance_id: 0, concept: 0 }));
    }

    #[test]
    fn round_trip() {
        let mut t = ScoreTable::new();
        t.insert(1, 0, 0.1 + 0.2).unwrap();
        t.insert(1, 1, 1.0 / 3.0).unwrap();
        t.insert(9, 4, 0.0).unwrap();
        assert_eq!(parse_score_file(&write_score_file(&t)).unwrap(), t);
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(matches!(parse_score_file("1\t0\t0.5\n2\t0\t1.2\n"), Err(Error::Parse { offset: 8, .. })));
    }

    #[test]
    fn duplicate_rejected() {
        let err = parse_score_file("1\t0\t0.5\n1\t0\t0.6\n").unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");
    }
}
