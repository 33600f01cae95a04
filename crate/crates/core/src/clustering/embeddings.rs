use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ClusteringError;

/// Row-major `n × dim` matrix of embeddings keyed by article id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    article_ids: Vec<String>,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingSet {
    pub fn new(article_ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, ClusteringError> {
        if article_ids.len() != rows.len() {
            return Err(ClusteringError::InvalidEmbeddings(format!(
                "{} ids for {} rows",
                article_ids.len(),
                rows.len()
            )));
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (id, row) in article_ids.iter().zip(&rows) {
            if row.len() != dim {
                return Err(ClusteringError::InvalidEmbeddings(format!(
                    "row {id} has dimension {} instead of {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(ClusteringError::InvalidEmbeddings(format!(
                    "row {id} contains a non-finite value"
                )));
            }
            data.extend_from_slice(row);
        }
        let mut seen = HashSet::new();
        if let Some(dup) = article_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(ClusteringError::InvalidEmbeddings(format!(
                "duplicate article id {dup}"
            )));
        }
        Ok(Self {
            article_ids,
            dim,
            data,
        })
    }

    /// Anonymous points, ids `"0"`, `"1"`, …
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, ClusteringError> {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(ids, rows)
    }

    pub fn len(&self) -> usize {
        self.article_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.article_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn article_ids(&self) -> &[String] {
        &self.article_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.len()).map(move |i| self.row(i))
    }

    /// Keep only rows whose id satisfies `keep`, preserving order.
    pub fn filter(&self, mut keep: impl FnMut(&str) -> bool) -> Self {
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for (i, id) in self.article_ids.iter().enumerate() {
            if keep(id) {
                ids.push(id.clone());
                data.extend_from_slice(self.row(i));
            }
        }
        Self {
            article_ids: ids,
            dim: self.dim,
            data,
        }
    }
}

#[derive(Deserialize)]
struct EmbeddingLine {
    article_id: String,
    vector: Vec<f64>,
}

/// Parse `embeddings.jsonl`: one `{article_id, vector}` object per line.
pub fn load_embeddings_jsonl<R: BufRead>(reader: R) -> Result<EmbeddingSet, ClusteringError> {
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddingLine =
            serde_json::from_str(&line).map_err(|e| ClusteringError::Record {
                line: i + 1,
                message: e.to_string(),
            })?;
        ids.push(rec.article_id);
        rows.push(rec.vector);
    }
    EmbeddingSet::new(ids, rows)
}

#[derive(Debug, Deserialize)]
struct BinaryManifest {
    dim: usize,
    count: usize,
    id_file: String,
}

/// Binary variant: a JSON manifest `{dim, count, id_file}` next to a `.bin`
/// file of little-endian `f32` (same stem as the manifest), and an id file
/// with one article id per line. Paths in the manifest are relative to it.
pub fn load_embeddings_binary(manifest_path: impl AsRef<Path>) -> Result<EmbeddingSet, ClusteringError> {
    let manifest_path = manifest_path.as_ref();
    let manifest: BinaryManifest = serde_json::from_reader(File::open(manifest_path)?)
        .map_err(|e| ClusteringError::Record {
            line: 0,
            message: format!("manifest: {e}"),
        })?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let ids: Vec<String> = BufReader::new(File::open(dir.join(&manifest.id_file))?)
        .lines()
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|l| !l.trim().is_empty())
        .collect();
    let bin_path = manifest_path.with_extension("bin");
    let mut bytes = Vec::new();
    File::open(&bin_path)?.read_to_end(&mut bytes)?;
    let expected = manifest.dim * manifest.count * 4;
    if bytes.len() != expected || ids.len() != manifest.count {
        return Err(ClusteringError::InvalidEmbeddings(format!(
            "binary payload has {} bytes and {} ids; manifest expects {expected} bytes and {} ids",
            bytes.len(),
            ids.len(),
            manifest.count
        )));
    }
    let rows = bytes
        .chunks_exact(manifest.dim.max(1) * 4)
        .map(|row| {
            row.chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect()
        })
        .collect();
    EmbeddingSet::new(ids, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_parses_and_validates() {
        let input = "{\"article_id\":\"a\",\"vector\":[1,2]}\n{\"article_id\":\"b\",\"vector\":[3,4]}\n";
        let e = load_embeddings_jsonl(input.as_bytes()).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e.row(1), &[3.0, 4.0]);

        let ragged = "{\"article_id\":\"a\",\"vector\":[1,2]}\n{\"article_id\":\"b\",\"vector\":[3]}\n";
        assert!(load_embeddings_jsonl(ragged.as_bytes()).is_err());
    }

    #[test]
    fn binary_variant_matches_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let values: [f32; 4] = [0.5, -1.0, 2.25, 3.0];
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(dir.path().join("emb.bin"), bytes).unwrap();
        std::fs::write(dir.path().join("ids.txt"), "x\ny\n").unwrap();
        std::fs::write(
            dir.path().join("emb.json"),
            r#"{"dim": 2, "count": 2, "id_file": "ids.txt"}"#,
        )
        .unwrap();
        let e = load_embeddings_binary(dir.path().join("emb.json")).unwrap();
        assert_eq!(e.article_ids(), &["x".to_string(), "y".to_string()]);
        assert_eq!(e.row(0), &[0.5, -1.0]);
        assert_eq!(e.row(1), &[2.25, 3.0]);
    }

    #[test]
    fn non_finite_rows_are_rejected() {
        assert!(EmbeddingSet::from_rows(vec![vec![f64::NAN]]).is_err());
    }
}
