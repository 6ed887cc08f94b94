use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::hypergraph::InteractionSet;

/// Raw interaction log layouts accepted by ingestion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordFormat {
    /// `user<TAB>item[<TAB>...]`
    Tsv,
    /// `user::item::rating::timestamp`
    MovieLens,
}

impl FromStr for RecordFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(Self::Tsv),
            "movielens" => Ok(Self::MovieLens),
            other => Err(invalid(format!("unknown format {other:?} (expected tsv or movielens)"))),
        }
    }
}

/// `(user, item)` ids from every non-blank line; any rating is ignored.
/// Lines starting with `#` are comments.
pub fn parse_records<R: BufRead>(
    input: R,
    format: RecordFormat,
    path: &Path,
) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields: Box<dyn Iterator<Item = &str>> = match format {
            RecordFormat::Tsv => Box::new(line.split('\t')),
            RecordFormat::MovieLens => Box::new(line.split("::")),
        };
        let (user, item) = match (fields.next(), fields.next()) {
            (Some(u), Some(i)) if !u.trim().is_empty() && !i.trim().is_empty() => (u.trim(), i.trim()),
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    msg: format!("expected user and item fields, got {line:?}"),
                })
            }
        };
        out.push((user.to_string(), item.to_string()));
    }
    Ok(out)
}

pub fn read_records(path: &Path, format: RecordFormat) -> Result<Vec<(String, String)>> {
    parse_records(BufReader::new(File::open(path)?), format, path)
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.contains(['\t', '\n', '\r']) {
        return Err(invalid(format!("id {id:?} cannot be written to a line-based file")));
    }
    Ok(())
}

/// Canonical form: one `user<TAB>item` line per pair in index order, which
/// is sorted order because indices follow sorted ids.
pub fn write_interactions<W: Write>(mut out: W, set: &InteractionSet) -> Result<()> {
    for &(u, i) in set.pairs() {
        let (user, item) = (&set.user_ids()[u], &set.item_ids()[i]);
        check_id(user)?;
        check_id(item)?;
        writeln!(out, "{user}\t{item}")?;
    }
    out.flush()?;
    Ok(())
}

/// One id per line, in index order.
pub fn write_ids<W: Write>(mut out: W, ids: &[String]) -> Result<()> {
    for id in ids {
        check_id(id)?;
        writeln!(out, "{id}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_ids(path: &Path) -> Result<Vec<String>> {
    let reader = BufReader::new(File::open(path)?);
    reader.lines().map(|l| Ok(l?)).collect()
}

/// Reads a canonical interaction file against fixed id maps.
pub fn read_interactions(
    path: &Path,
    user_ids: &[String],
    item_ids: &[String],
) -> Result<InteractionSet> {
    let users: HashMap<&str, usize> =
        user_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let items: HashMap<&str, usize> =
        item_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let records = read_records(path, RecordFormat::Tsv)?;
    let mut pairs = Vec::with_capacity(records.len());
    for (line, (u, i)) in records.iter().enumerate() {
        match (users.get(u.as_str()), items.get(i.as_str())) {
            (Some(&u), Some(&i)) => pairs.push((u, i)),
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line + 1,
                    msg: format!("pair ({u}, {i}) uses an id missing from the id maps"),
                })
            }
        }
    }
    InteractionSet::with_ids(pairs, user_ids.to_vec(), item_ids.to_vec())
}
