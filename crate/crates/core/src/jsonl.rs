//! JSON-lines readers and writers shared by the pipeline stages.

use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

/// Read every line strictly; the first malformed line fails the whole read.
pub fn read_all<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let mut items = Vec::new();
    for (line_no, line) in lines(path)? {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| JsonlError::Parse {
            path: path.display().to_string(),
            line: line_no,
            message: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

/// Malformed lines as (line number, parse error message).
pub type BadLines = Vec<(usize, String)>;

/// Read leniently: malformed lines are returned as [`BadLines`] instead of
/// aborting the batch.
pub fn read_lossy<T: DeserializeOwned>(path: &Path) -> Result<(Vec<T>, BadLines), JsonlError> {
    let mut items = Vec::new();
    let mut bad = Vec::new();
    for (line_no, line) in lines(path)? {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(item) => items.push(item),
            Err(e) => bad.push((line_no, e.to_string())),
        }
    }
    Ok((items, bad))
}

pub fn write_all<T: Serialize>(path: &Path, items: &[T]) -> Result<(), JsonlError> {
    let file = File::create(path).map_err(|e| JsonlError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut out = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("serializable item");
        writeln!(out, "{line}").map_err(|e| JsonlError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
    }
    out.flush().map_err(|e| JsonlError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn lines(path: &Path) -> Result<impl Iterator<Item = (usize, String)>, JsonlError> {
    let file = File::open(path).map_err(|e| JsonlError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let reader = BufReader::new(file);
    Ok(reader
        .lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.unwrap_or_default())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    struct Row {
        id: String,
        n: u32,
    }

    #[test]
    fn roundtrip_and_lossy() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.jsonl");
        let rows = vec![
            Row {
                id: "a".into(),
                n: 1,
            },
            Row {
                id: "b".into(),
                n: 2,
            },
        ];
        write_all(&path, &rows).unwrap();
        let back: Vec<Row> = read_all(&path).unwrap();
        assert_eq!(back, rows);

        std::fs::write(&path, "{\"id\":\"a\",\"n\":1}\nnot json\n").unwrap();
        let (ok, bad): (Vec<Row>, _) = read_lossy(&path).unwrap();
        assert_eq!(ok.len(), 1);
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].0, 2);
    }
}
