use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("embedding file has no vectors")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Static word vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub words: Vec<String>,
    /// `words.len() * dim` values, row per word.
    pub vectors: Vec<f64>,
    index: HashMap<String, usize>,
}

/// Splits text into lowercase word pieces on non-alphanumeric characters
/// and lower-to-upper camel-case boundaries.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut prev_lower = false;
    for c in text.chars() {
        if !c.is_alphanumeric() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            prev_lower = false;
            continue;
        }
        if c.is_uppercase() && prev_lower && !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
        prev_lower = c.is_lowercase() || c.is_ascii_digit();
        cur.extend(c.to_lowercase());
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

impl EmbeddingTable {
    pub fn new(dim: usize, words: Vec<String>, vectors: Vec<f64>) -> Self {
        assert_eq!(words.len() * dim, vectors.len(), "vector count does not match vocabulary");
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            index.entry(w.clone()).or_insert(i);
        }
        EmbeddingTable { dim, words, vectors, index }
    }

    /// Reads the common text format: one word per line followed by its
    /// space-separated components. With `keep`, other words are skipped.
    pub fn read<R: BufRead>(reader: R, keep: Option<&HashSet<String>>) -> Result<Self, EmbeddingError> {
        let mut dim = None;
        let mut words = Vec::new();
        let mut vectors = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let values: Vec<f64> = parts
                .map(|p| p.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| EmbeddingError::Format { line: i + 1, message: e.to_string() })?;
            // word2vec-style header: "<count> <dim>"
            if i == 0 && values.len() == 1 && word.parse::<usize>().is_ok() {
                continue;
            }
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(EmbeddingError::Format {
                        line: i + 1,
                        message: format!("expected {d} components, found {}", values.len()),
                    })
                }
                _ => {}
            }
            if keep.is_some_and(|k| !k.contains(word)) {
                continue;
            }
            words.push(word.to_string());
            vectors.extend(values);
        }
        let dim = dim.filter(|&d| d > 0).ok_or(EmbeddingError::Empty)?;
        Ok(EmbeddingTable::new(dim, words, vectors))
    }

    /// Seeded random unit-scale vectors for the given words.
    pub fn random(words: Vec<String>, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (dim as f64).sqrt();
        let vectors = (0..words.len() * dim).map(|_| rng.gen_range(-1.0..1.0) * scale * 3f64.sqrt()).collect();
        EmbeddingTable::new(dim, words, vectors)
    }

    /// Writes the text format read by [`read`](Self::read).
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, w) in self.words.iter().enumerate() {
            write!(out, "{w}")?;
            for v in &self.vectors[i * self.dim..(i + 1) * self.dim] {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn lookup(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizes_schema_names() {
        assert_eq!(tokenize("wine.wine.percentage_alcohol"), ["wine", "wine", "percentage", "alcohol"]);
        assert_eq!(tokenize("people.person.dateOfBirth_inv"), ["people", "person", "date", "of", "birth", "inv"]);
        assert_eq!(tokenize("What's the ABV?"), ["what", "s", "the", "abv"]);
    }

    #[test]
    fn write_then_read_is_exact() {
        let t = EmbeddingTable::random(vec!["a".into(), "b".into()], 3, 1);
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        assert_eq!(EmbeddingTable::read(&buf[..], None).unwrap(), t);
    }

    #[test]
    fn reads_text_format() {
        let text = "3 2\nwine 0.5 -1\nred 1 2\nblue 3 4\n";
        let keep: HashSet<String> = ["wine", "blue"].iter().map(|s| s.to_string()).collect();
        let t = EmbeddingTable::read(text.as_bytes(), Some(&keep)).unwrap();
        assert_eq!(t.dim, 2);
        assert_eq!(t.words, ["wine", "blue"]);
        assert_eq!(t.lookup("blue"), Some(&[3.0, 4.0][..]));
        assert!(t.lookup("red").is_none());
        let bad = EmbeddingTable::read("a 1 2\nb 1\n".as_bytes(), None).unwrap_err();
        assert!(matches!(bad, EmbeddingError::Format { line: 2, .. }));
    }
}
