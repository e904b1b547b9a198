//! Comma-separated 0/1 line format, one instance per line, no header.

use super::Dataset;
use crate::matrix::BinaryMatrix;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: expected {expected} columns, found {found}")]
    Ragged {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}:{line}: token {token:?} is not 0 or 1")]
    NonBinary {
        path: PathBuf,
        line: usize,
        token: String,
    },
    #[error("{path}: no rows")]
    Empty { path: PathBuf },
    #[error("splits disagree on column count: {0:?}")]
    ColumnMismatch([usize; 3]),
}

pub const SPLITS: [&str; 3] = ["train", "valid", "test"];

fn split_path(dir: &Path, name: &str, split: &str) -> PathBuf {
    dir.join(format!("{name}.{split}.data"))
}

/// Reads `<name>.{train,valid,test}.data` from `root`, or from `root/<name>/`
/// when the flat layout is absent.
pub fn load_dataset(root: impl AsRef<Path>, name: &str) -> Result<Dataset, DataError> {
    let root = root.as_ref();
    let nested = root.join(name);
    let dir = if !split_path(root, name, "train").exists()
        && split_path(&nested, name, "train").exists()
    {
        nested
    } else {
        root.to_path_buf()
    };
    let [train, valid, test] = SPLITS.map(|split| read_matrix(split_path(&dir, name, split)));
    let (train, valid, test) = (train?, valid?, test?);
    let cols = [train.cols(), valid.cols(), test.cols()];
    if cols[0] != cols[1] || cols[0] != cols[2] {
        return Err(DataError::ColumnMismatch(cols));
    }
    Ok(Dataset {
        name: name.to_string(),
        train,
        valid,
        test,
    })
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<BinaryMatrix, DataError> {
    let path = path.as_ref();
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let before = data.len();
        for token in line.split(',') {
            match token.trim() {
                "0" => data.push(0u8),
                "1" => data.push(1u8),
                other => {
                    return Err(DataError::NonBinary {
                        path: path.to_path_buf(),
                        line: lineno,
                        token: other.to_string(),
                    })
                }
            }
        }
        let found = data.len() - before;
        let expected = *cols.get_or_insert(found);
        if found != expected {
            return Err(DataError::Ragged {
                path: path.to_path_buf(),
                line: lineno,
                expected,
                found,
            });
        }
        rows += 1;
    }
    match cols {
        Some(cols) => Ok(BinaryMatrix::from_vec(rows, cols, data)),
        None => Err(DataError::Empty {
            path: path.to_path_buf(),
        }),
    }
}

pub fn write_matrix(path: impl AsRef<Path>, matrix: &BinaryMatrix) -> Result<(), DataError> {
    let path = path.as_ref();
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    let mut line = String::with_capacity(matrix.cols() * 2);
    for row in matrix.iter_rows() {
        line.clear();
        for (j, &b) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push(if b == 0 { '0' } else { '1' });
        }
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Writes the three split files into `dir` (which must exist).
pub fn write_dataset(dir: impl AsRef<Path>, dataset: &Dataset) -> Result<(), DataError> {
    let dir = dir.as_ref();
    for (split, matrix) in SPLITS
        .iter()
        .zip([&dataset.train, &dataset.valid, &dataset.test])
    {
        write_matrix(split_path(dir, &dataset.name, split), matrix)?;
    }
    Ok(())
}
