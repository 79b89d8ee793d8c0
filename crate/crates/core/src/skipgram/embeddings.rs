use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::SkipGramError;

/// Read-only word vectors keyed by token.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    words: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    data: Vec<f32>,
    norms: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    /// "V d" header, then `token x1 ... xd` per line.
    Text,
    /// "V d" header line, then per row the token, a space, d little-endian
    /// f32 values and a newline.
    Binary,
}

impl EmbeddingFormat {
    /// `.bin` selects the binary format; anything else is text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => EmbeddingFormat::Binary,
            _ => EmbeddingFormat::Text,
        }
    }
}

impl Embeddings {
    pub fn new(words: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self, SkipGramError> {
        if dim == 0 {
            return Err(SkipGramError::Config("embedding dimension is zero".into()));
        }
        if data.len() != words.len() * dim {
            return Err(SkipGramError::Config(format!(
                "{} values for {} words of dimension {dim}",
                data.len(),
                words.len()
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(SkipGramError::Config(format!("duplicate token `{w}`")));
            }
        }
        let norms = data
            .chunks_exact(dim)
            .map(|row| row.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt())
            .collect();
        Ok(Embeddings {
            words,
            index,
            dim,
            data,
            norms,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.index(word).map(|i| self.row(i))
    }

    pub fn row(&self, idx: usize) -> &[f32] {
        &self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    /// Euclidean norm of row `idx`.
    pub fn norm(&self, idx: usize) -> f64 {
        self.norms[idx]
    }

    pub fn save(&self, path: &Path) -> Result<(), SkipGramError> {
        self.save_as(path, EmbeddingFormat::from_path(path))
    }

    pub fn save_as(&self, path: &Path, format: EmbeddingFormat) -> Result<(), SkipGramError> {
        let io = |e| SkipGramError::io(path, e);
        let mut out = BufWriter::new(fs::File::create(path).map_err(io)?);
        writeln!(out, "{} {}", self.len(), self.dim).map_err(io)?;
        for (i, word) in self.words.iter().enumerate() {
            match format {
                EmbeddingFormat::Text => {
                    out.write_all(word.as_bytes()).map_err(io)?;
                    for x in self.row(i) {
                        // Shortest representation that parses back to the same f32.
                        write!(out, " {x}").map_err(io)?;
                    }
                    out.write_all(b"\n").map_err(io)?;
                }
                EmbeddingFormat::Binary => {
                    out.write_all(word.as_bytes()).map_err(io)?;
                    out.write_all(b" ").map_err(io)?;
                    for x in self.row(i) {
                        out.write_all(&x.to_le_bytes()).map_err(io)?;
                    }
                    out.write_all(b"\n").map_err(io)?;
                }
            }
        }
        out.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, SkipGramError> {
        Self::load_as(path, EmbeddingFormat::from_path(path))
    }

    pub fn load_as(path: &Path, format: EmbeddingFormat) -> Result<Self, SkipGramError> {
        let file = fs::File::open(path).map_err(|e| SkipGramError::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut header = String::new();
        reader
            .read_line(&mut header)
            .map_err(|e| SkipGramError::io(path, e))?;
        let (n_words, dim) = parse_header(path, &header)?;
        match format {
            EmbeddingFormat::Text => read_text(path, reader, n_words, dim),
            EmbeddingFormat::Binary => read_binary(path, reader, n_words, dim),
        }
    }
}

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> SkipGramError {
    SkipGramError::Parse {
        path: PathBuf::from(path),
        line,
        reason: reason.into(),
    }
}

fn parse_header(path: &Path, header: &str) -> Result<(usize, usize), SkipGramError> {
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [v, d] = fields[..] else {
        return Err(parse_err(path, 1, "header must be \"<vocab size> <dim>\""));
    };
    let v = v
        .parse()
        .map_err(|_| parse_err(path, 1, format!("bad vocabulary size `{v}`")))?;
    let d: usize = d
        .parse()
        .map_err(|_| parse_err(path, 1, format!("bad dimension `{d}`")))?;
    if d == 0 {
        return Err(parse_err(path, 1, "dimension is zero"));
    }
    Ok((v, d))
}

fn finish(path: &Path, words: Vec<String>, dim: usize, data: Vec<f32>, last_line: usize) -> Result<Embeddings, SkipGramError> {
    Embeddings::new(words, dim, data).map_err(|e| parse_err(path, last_line, e.to_string()))
}

fn read_text<R: BufRead>(path: &Path, reader: R, n_words: usize, dim: usize) -> Result<Embeddings, SkipGramError> {
    let mut words = Vec::with_capacity(n_words);
    let mut data = Vec::with_capacity(n_words * dim);
    let mut line_no = 1;
    for line in reader.lines() {
        line_no += 1;
        let line = line.map_err(|e| SkipGramError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if words.len() == n_words {
            return Err(parse_err(
                path,
                line_no,
                format!("more vectors than the {n_words} declared in the header"),
            ));
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().expect("line is not blank");
        let before = data.len();
        for part in parts {
            let x: f32 = part
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("`{part}` is not a number")))?;
            data.push(x);
        }
        if data.len() - before != dim {
            return Err(parse_err(
                path,
                line_no,
                format!("expected {dim} components, found {}", data.len() - before),
            ));
        }
        words.push(word.to_owned());
    }
    if words.len() != n_words {
        return Err(parse_err(
            path,
            line_no,
            format!("header declares {n_words} vectors, found {}", words.len()),
        ));
    }
    finish(path, words, dim, data, line_no)
}

fn read_binary<R: BufRead>(path: &Path, mut reader: R, n_words: usize, dim: usize) -> Result<Embeddings, SkipGramError> {
    let mut words = Vec::with_capacity(n_words);
    let mut data = Vec::with_capacity(n_words * dim);
    let mut buf = vec![0u8; 4 * dim];
    for record in 0..n_words {
        let line = record + 2;
        let mut token = Vec::new();
        reader
            .read_until(b' ', &mut token)
            .map_err(|e| SkipGramError::io(path, e))?;
        if token.pop() != Some(b' ') {
            return Err(parse_err(
                path,
                line,
                format!("header declares {n_words} vectors, found {record}"),
            ));
        }
        let word = String::from_utf8(token)
            .map_err(|_| parse_err(path, line, "token is not UTF-8"))?;
        reader
            .read_exact(&mut buf)
            .map_err(|_| parse_err(path, line, "truncated vector"))?;
        data.extend(
            buf.chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
        );
        let mut newline = [0u8; 1];
        match reader.read(&mut newline) {
            Ok(1) if newline[0] == b'\n' => {}
            Ok(0) if record + 1 == n_words => {}
            _ => return Err(parse_err(path, line, "missing record terminator")),
        }
        words.push(word);
    }
    let mut rest = Vec::new();
    reader
        .read_to_end(&mut rest)
        .map_err(|e| SkipGramError::io(path, e))?;
    if !rest.is_empty() {
        return Err(parse_err(
            path,
            n_words + 2,
            format!("more vectors than the {n_words} declared in the header"),
        ));
    }
    finish(path, words, dim, data, n_words + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Embeddings {
        Embeddings::new(
            vec!["forest".into(), "land_tenure".into()],
            3,
            vec![0.1, -2.5e-7, 3.0, f32::MIN_POSITIVE, 1.0 / 3.0, -0.0],
        )
        .unwrap()
    }

    #[test]
    fn text_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        sample().save(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("2 3\nforest 0.1 "));
        let loaded = Embeddings::load(&path).unwrap();
        assert_eq!(loaded, sample());
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.bin");
        sample().save(&path).unwrap();
        let loaded = Embeddings::load(&path).unwrap();
        let bits = |e: &Embeddings| e.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&loaded), bits(&sample()));
        assert_eq!(loaded.words(), sample().words());
    }

    #[test]
    fn header_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        fs::write(&path, "2 2\na 1 2\nb 3 4\nc 5 6\n").unwrap();
        match Embeddings::load(&path) {
            Err(SkipGramError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&path, "3 2\na 1 2\n").unwrap();
        assert!(matches!(Embeddings::load(&path), Err(SkipGramError::Parse { .. })));
    }

    #[test]
    fn non_numeric_entry_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        fs::write(&path, "2 2\na 1 2\nb 3 x4\n").unwrap();
        match Embeddings::load(&path) {
            Err(SkipGramError::Parse { line, reason, .. }) => {
                assert_eq!(line, 3);
                assert!(reason.contains("x4"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_width_and_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        fs::write(&path, "1 3\na 1 2\n").unwrap();
        assert!(matches!(Embeddings::load(&path), Err(SkipGramError::Parse { line: 2, .. })));
        fs::write(&path, "one 3\n").unwrap();
        assert!(matches!(Embeddings::load(&path), Err(SkipGramError::Parse { line: 1, .. })));
    }

    #[test]
    fn truncated_binary_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.bin");
        sample().save(&path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(Embeddings::load(&path), Err(SkipGramError::Parse { .. })));
    }

    proptest! {
        #[test]
        fn both_formats_round_trip(values in prop::collection::vec(any::<f32>().prop_filter("finite", |x| x.is_finite()), 8)) {
            let e = Embeddings::new(vec!["a".into(), "b".into()], 4, values).unwrap();
            let dir = tempfile::tempdir().unwrap();
            for name in ["e.txt", "e.bin"] {
                let path = dir.path().join(name);
                e.save(&path).unwrap();
                let loaded = Embeddings::load(&path).unwrap();
                let bits = |e: &Embeddings| e.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
                prop_assert_eq!(bits(&loaded), bits(&e));
            }
        }
    }
}
