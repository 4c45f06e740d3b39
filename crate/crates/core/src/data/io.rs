use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{Dataset, Engagement, GameRecord, IntegrityReport, UserId};
use crate::error::{Error, Result};

/// Locations of the three tab-separated input tables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetPaths {
    pub engagements: PathBuf,
    pub social: PathBuf,
    pub catalog: PathBuf,
}

impl DatasetPaths {
    /// `engagements.tsv`, `social.tsv` and `catalog.tsv` inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        DatasetPaths {
            engagements: dir.join("engagements.tsv"),
            social: dir.join("social.tsv"),
            catalog: dir.join("catalog.tsv"),
        }
    }
}

fn for_each_row(path: &Path, mut f: impl FnMut(usize, Vec<&str>) -> Result<()>) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        f(n + 1, line.split('\t').collect())?;
    }
    Ok(())
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_id(path: &Path, line: usize, field: &str, raw: &str) -> Result<u64> {
    raw.parse::<u64>()
        .map_err(|_| parse_err(path, line, format!("{field}: expected unsigned integer, got {raw:?}")))
}

fn expect_arity(path: &Path, line: usize, fields: &[&str], arity: usize) -> Result<()> {
    if fields.len() != arity {
        return Err(parse_err(
            path,
            line,
            format!("expected {arity} tab-separated fields, got {}", fields.len()),
        ));
    }
    Ok(())
}

/// Loads the three tables. Malformed rows are hard errors carrying the line
/// number; integrity violations (unknown games, dangling social edges) are
/// dropped and counted in the returned report.
pub fn load_dataset(paths: &DatasetPaths) -> Result<(Dataset, IntegrityReport)> {
    let mut catalog = Vec::new();
    let mut seen = BTreeSet::new();
    let path = &paths.catalog;
    for_each_row(path, |line, fields| {
        expect_arity(path, line, &fields, 4)?;
        let game_id = parse_id(path, line, "game_id", fields[0])?;
        if !seen.insert(game_id) {
            return Err(parse_err(path, line, format!("duplicate game_id {game_id}")));
        }
        let genres: BTreeSet<String> = fields[1]
            .split(',')
            .map(str::trim)
            .filter(|g| !g.is_empty())
            .map(str::to_string)
            .collect();
        if genres.is_empty() {
            return Err(parse_err(path, line, "genre list is empty"));
        }
        catalog.push(GameRecord {
            game_id,
            genres,
            developer: fields[2].to_string(),
            publisher: fields[3].to_string(),
        });
        Ok(())
    })?;

    let mut engagements = Vec::new();
    let path = &paths.engagements;
    for_each_row(path, |line, fields| {
        expect_arity(path, line, &fields, 3)?;
        let user_id = parse_id(path, line, "user_id", fields[0])?;
        let game_id = parse_id(path, line, "game_id", fields[1])?;
        let minutes: f64 = fields[2].parse().map_err(|_| {
            parse_err(
                path,
                line,
                format!("dwelling_minutes: expected number, got {:?}", fields[2]),
            )
        })?;
        if !minutes.is_finite() || minutes < 0.0 {
            return Err(parse_err(
                path,
                line,
                format!("dwelling_minutes must be finite and non-negative, got {minutes}"),
            ));
        }
        engagements.push(Engagement {
            user_id,
            game_id,
            dwelling_minutes: minutes,
        });
        Ok(())
    })?;

    let mut social: Vec<(UserId, UserId)> = Vec::new();
    let path = &paths.social;
    for_each_row(path, |line, fields| {
        expect_arity(path, line, &fields, 2)?;
        let a = parse_id(path, line, "user_a", fields[0])?;
        let b = parse_id(path, line, "user_b", fields[1])?;
        social.push((a, b));
        Ok(())
    })?;

    Ok(Dataset::new(engagements, social, catalog))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Writes engagement rows in the input TSV layout.
pub fn write_engagements<'a>(path: &Path, rows: impl IntoIterator<Item = &'a Engagement>) -> Result<()> {
    let mut w = create(path)?;
    for e in rows {
        writeln!(w, "{}\t{}\t{}", e.user_id, e.game_id, e.dwelling_minutes).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the dataset in the same layout `load_dataset` reads.
pub fn save_dataset(dataset: &Dataset, paths: &DatasetPaths) -> Result<()> {
    write_engagements(&paths.engagements, dataset.engagements())?;

    let path = &paths.social;
    let mut w = create(path)?;
    for s in dataset.social() {
        writeln!(w, "{}\t{}", s.user_a, s.user_b).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let path = &paths.catalog;
    let mut w = create(path)?;
    for g in dataset.catalog().values() {
        let genres: Vec<&str> = g.genres.iter().map(String::as_str).collect();
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            g.game_id,
            genres.join(","),
            g.developer,
            g.publisher
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
