use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::corpus::Corpus;

use super::{FeatureError, Granularity};

/// Named trait columns over sentence or post ids.
#[derive(Debug, Clone, PartialEq)]
pub struct TraitTable {
    granularity: Granularity,
    columns: Vec<String>,
    ids: Vec<String>,
    rows: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl TraitTable {
    pub fn new(
        granularity: Granularity,
        columns: Vec<String>,
        rows: Vec<(String, Vec<f64>)>,
    ) -> Result<Self, FeatureError> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(FeatureError::DuplicateColumn(c.clone()));
            }
        }
        let mut ids = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(rows.len());
        let mut index = HashMap::with_capacity(rows.len());
        for (id, row) in rows {
            if row.len() != columns.len() {
                return Err(FeatureError::LengthMismatch { left: columns.len(), right: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(FeatureError::NonFinite(format!("row {id}")));
            }
            if index.insert(id.clone(), ids.len()).is_some() {
                return Err(FeatureError::MalformedTable {
                    path: String::new(),
                    row: ids.len() + 1,
                    column: "id".into(),
                    message: format!("duplicate id {id:?}"),
                });
            }
            ids.push(id);
            values.push(row);
        }
        Ok(TraitTable { granularity, columns, ids, rows: values, index })
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id).map(|&i| self.rows[i].as_slice())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.ids.iter().map(String::as_str).zip(self.rows.iter().map(Vec::as_slice))
    }

    /// Ids that do not name a sentence/post (per granularity) in `corpus`.
    pub fn unknown_ids(&self, corpus: &Corpus) -> Vec<String> {
        let known: HashSet<&str> = match self.granularity {
            Granularity::Post => corpus.posts().map(|p| p.post_id.as_str()).collect(),
            Granularity::Sentence => corpus.sentences().map(|(_, _, s)| s.sentence_id.as_str()).collect(),
        };
        self.ids.iter().filter(|id| !known.contains(id.as_str())).cloned().collect()
    }

    pub fn check_ids(&self, corpus: &Corpus) -> Result<(), FeatureError> {
        let unknown = self.unknown_ids(corpus);
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(FeatureError::UnknownId(unknown))
        }
    }
}

/// Parse CSV text with header `id,<trait...>`.
pub fn parse_trait_table(text: &str, granularity: Granularity, origin: &str) -> Result<TraitTable, FeatureError> {
    let malformed = |row: usize, column: &str, message: String| FeatureError::MalformedTable {
        path: origin.to_string(),
        row,
        column: column.to_string(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| malformed(1, "", e.to_string()))?.clone();
    if header.get(0) != Some("id") {
        return Err(malformed(1, header.get(0).unwrap_or(""), "first column must be `id`".into()));
    }
    let columns: Vec<String> = header.iter().skip(1).map(String::from).collect();
    if columns.is_empty() {
        return Err(malformed(1, "", "no trait columns".into()));
    }
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in reader.records().enumerate() {
        // header is line 1
        let line = i + 2;
        let record = record.map_err(|e| malformed(line, "", e.to_string()))?;
        let id = record.get(0).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(malformed(line, "id", "blank id".into()));
        }
        if !seen.insert(id.clone()) {
            return Err(malformed(line, "id", format!("duplicate id {id:?}")));
        }
        let mut values = Vec::with_capacity(columns.len());
        for (j, col) in columns.iter().enumerate() {
            let cell = record.get(j + 1).unwrap_or("");
            if cell.is_empty() {
                return Err(malformed(line, col, "missing value".into()));
            }
            let v: f64 = cell.parse().map_err(|_| malformed(line, col, format!("not a number: {cell:?}")))?;
            if !v.is_finite() {
                return Err(malformed(line, col, format!("non-finite value {cell:?}")));
            }
            values.push(v);
        }
        rows.push((id, values));
    }
    TraitTable::new(granularity, columns, rows)
}

pub fn load_trait_table(path: impl AsRef<Path>, granularity: Granularity) -> Result<TraitTable, FeatureError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| FeatureError::Io { path: path.into(), source })?;
    parse_trait_table(&text, granularity, &path.display().to_string())
}

/// Write `id,<columns>` CSV. Floats use the shortest round-trip representation.
pub fn write_trait_table(table: &TraitTable, path: impl AsRef<Path>) -> Result<(), FeatureError> {
    let path = path.as_ref();
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let io_err = |e: csv::Error| FeatureError::Io { path: path.into(), source: e.into() };
    let mut header = vec!["id".to_string()];
    header.extend(table.columns.iter().cloned());
    w.write_record(&header).map_err(io_err)?;
    for (id, row) in table.rows() {
        let mut rec = vec![id.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(io_err)?;
    }
    let bytes = w.into_inner().map_err(|e| FeatureError::Io { path: path.into(), source: e.into_error() })?;
    fs::write(path, bytes).map_err(|source| FeatureError::Io { path: path.into(), source })
}

/// Word-count-weighted mean `Σ sᵢwᵢ / Σ wᵢ`.
pub fn aggregate_post(scores: &[f64], word_counts: &[usize]) -> Result<f64, FeatureError> {
    if scores.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    if scores.len() != word_counts.len() {
        return Err(FeatureError::LengthMismatch { left: scores.len(), right: word_counts.len() });
    }
    let total: usize = word_counts.iter().sum();
    if total == 0 {
        return Err(FeatureError::EmptyInput);
    }
    let weighted: f64 = scores.iter().zip(word_counts).map(|(s, w)| s * *w as f64).sum();
    let mean = weighted / total as f64;
    // Rounding can push the mean a hair outside the observed range.
    let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(mean.clamp(lo, hi))
}

/// Roll a sentence-level table up to posts, one row per corpus post that has
/// sentences, in corpus order. Every sentence of those posts must be covered.
pub fn aggregate_to_posts(table: &TraitTable, corpus: &Corpus) -> Result<TraitTable, FeatureError> {
    if table.granularity != Granularity::Sentence {
        return Err(FeatureError::IllegalGranularity(format!("aggregating a {}-level table", table.granularity.as_str())));
    }
    let mut missing = Vec::new();
    let mut rows = Vec::new();
    for post in corpus.posts() {
        if post.sentences.is_empty() {
            continue;
        }
        let counts: Vec<usize> = post.sentences.iter().map(|s| s.word_count).collect();
        let mut per_sentence = Vec::with_capacity(post.sentences.len());
        for s in &post.sentences {
            match table.get(&s.sentence_id) {
                Some(r) => per_sentence.push(r),
                None => missing.push(s.sentence_id.clone()),
            }
        }
        if per_sentence.len() != post.sentences.len() {
            continue;
        }
        let row = (0..table.columns.len())
            .map(|j| {
                let col: Vec<f64> = per_sentence.iter().map(|r| r[j]).collect();
                aggregate_post(&col, &counts)
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((post.post_id.clone(), row));
    }
    if !missing.is_empty() {
        return Err(FeatureError::CoverageGap {
            source_name: "sentence table".into(),
            granularity: Granularity::Sentence,
            missing,
        });
    }
    TraitTable::new(Granularity::Post, table.columns.clone(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_hand_cases() {
        assert_eq!(aggregate_post(&[3.5], &[7]).unwrap(), 3.5);
        assert_eq!(aggregate_post(&[1.0, 3.0], &[1, 1]).unwrap(), 2.0);
        // (2·1 + 4·2 + 6·3) / 6
        assert!((aggregate_post(&[2.0, 4.0, 6.0], &[1, 2, 3]).unwrap() - 28.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn aggregate_errors() {
        assert!(matches!(aggregate_post(&[], &[]), Err(FeatureError::EmptyInput)));
        assert!(matches!(aggregate_post(&[1.0], &[1, 2]), Err(FeatureError::LengthMismatch { .. })));
    }

    #[test]
    fn parse_two_rows_three_traits() {
        let t = parse_trait_table("id,a,b,c\nx,1,2,3\ny,4.5,-1e-3,0\n", Granularity::Post, "mem").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.columns(), ["a", "b", "c"]);
        assert_eq!(t.get("y").unwrap(), &[4.5, -0.001, 0.0]);
    }

    #[test]
    fn blank_cell_located() {
        match parse_trait_table("id,a,b\nx,1,2\ny,,3\n", Granularity::Post, "mem") {
            Err(FeatureError::MalformedTable { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "a");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_non_finite_and_bad_header() {
        assert!(matches!(
            parse_trait_table("id,a\nx,NaN\n", Granularity::Post, "mem"),
            Err(FeatureError::MalformedTable { .. })
        ));
        assert!(matches!(
            parse_trait_table("key,a\nx,1\n", Granularity::Post, "mem"),
            Err(FeatureError::MalformedTable { .. })
        ));
        assert!(matches!(
            parse_trait_table("id,a\nx,1\nx,2\n", Granularity::Post, "mem"),
            Err(FeatureError::MalformedTable { row: 3, .. })
        ));
    }

    #[test]
    fn unknown_ids_against_corpus() {
        use crate::corpus::{Post, Timeline};
        let corpus = Corpus {
            timelines: vec![Timeline { user_id: "u".into(), posts: vec![Post::from_text("p1", 0, "Hi there.")] }],
        };
        let t = parse_trait_table("id,a\np1,1\np9,2\n", Granularity::Post, "mem").unwrap();
        assert!(matches!(t.check_ids(&corpus), Err(FeatureError::UnknownId(ids)) if ids == vec!["p9"]));
    }
}
