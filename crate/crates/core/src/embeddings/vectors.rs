//! Aligned word vectors in the fastText/MUSE `.vec` text format.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use super::{EmbeddingError, TokenEncoder};

/// Read-only word → vector table, stored as `f32`.
#[derive(Debug, Clone, Default)]
pub struct WordVectors {
    dim: usize,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl WordVectors {
    /// Loads one `.vec` file, or every `*.vec` file of a directory in name
    /// order (one aligned space split per language). The first occurrence
    /// of a word wins.
    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        let files: Vec<PathBuf> = if path.is_dir() {
            let mut v: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| EmbeddingError::io(path, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "vec"))
                .collect();
            v.sort();
            v
        } else {
            vec![path.to_path_buf()]
        };
        if files.is_empty() {
            return Err(EmbeddingError::Parse { path: path.into(), message: "no .vec files found".into() });
        }
        let mut out = WordVectors::default();
        for f in files {
            out.read_file(&f)?;
        }
        Ok(out)
    }

    fn read_file(&mut self, path: &Path) -> Result<(), EmbeddingError> {
        let file = fs::File::open(path).map_err(|e| EmbeddingError::io(path, e))?;
        let parse_err = |line: usize, message: String| EmbeddingError::Parse {
            path: path.into(),
            message: format!("line {line}: {message}"),
        };
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| EmbeddingError::io(path, e))?;
            let mut fields = line.split(' ').filter(|f| !f.is_empty());
            let Some(word) = fields.next() else { continue };
            let rest: Vec<&str> = fields.collect();
            // "<count> <dim>" header
            if i == 0 && rest.len() == 1 && word.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok() {
                continue;
            }
            if self.dim == 0 {
                self.dim = rest.len();
                if self.dim == 0 {
                    return Err(parse_err(i + 1, "vector has no components".into()));
                }
            } else if rest.len() != self.dim {
                return Err(parse_err(i + 1, format!("expected {} components, found {}", self.dim, rest.len())));
            }
            if self.index.contains_key(word) {
                continue;
            }
            let start = self.data.len();
            for f in rest {
                let x: f32 = f.parse().map_err(|_| parse_err(i + 1, format!("bad number {f:?}")))?;
                self.data.push(x);
            }
            self.index.insert(word.to_owned(), start / self.dim);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }
}

impl TokenEncoder for WordVectors {
    fn dim(&self) -> usize {
        self.dim
    }

    fn lookup(&self, token: &str) -> Option<Vec<f64>> {
        let row = *self.index.get(token)?;
        Some(self.data[row * self.dim..(row + 1) * self.dim].iter().map(|&x| x as f64).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.vec"), "2 3\ncat 0.5 -1 2\ndog 1 1 1\n").unwrap();
        fs::write(dir.path().join("b.vec"), "cat 9 9 9\nhund 0 0 1\n").unwrap();
        let v = WordVectors::load(dir.path()).unwrap();
        assert_eq!(v.dim(), 3);
        assert_eq!(v.len(), 3);
        assert_eq!(v.lookup("cat").unwrap(), vec![0.5, -1.0, 2.0]);
        assert_eq!(v.lookup("hund").unwrap(), vec![0.0, 0.0, 1.0]);
        assert!(v.lookup("zzz").is_none());
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.vec");
        fs::write(&p, "cat 1 2\ndog 1\n").unwrap();
        assert!(matches!(WordVectors::load(&p), Err(EmbeddingError::Parse { .. })));
    }
}
