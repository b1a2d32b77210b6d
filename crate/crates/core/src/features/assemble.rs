use std::collections::{BTreeMap, HashSet};

use nalgebra::DMatrix;

use crate::corpus::Corpus;

use super::{aggregate_to_posts, FeatureError, Granularity, TraitTable};

pub const S8D_SOURCE: &str = "s8d";
/// Base sources that make up the person-level trait set.
pub const PLT_SOURCES: [&str; 4] = ["motives", "mental_health", "resilience", "distortion"];
pub const MOTIVE_COLUMNS: [&str; 3] = ["achievement", "affiliation", "power"];
pub const MENTAL_HEALTH_COLUMNS: [&str; 6] = [
    "valence",
    "harmony_in_life",
    "satisfaction_with_life",
    "anxiety",
    "depression_phq9",
    "depression_cesd",
];
pub const DISTORTION_COLUMNS: [&str; 1] = ["cognitive_distortion"];

/// Dense feature matrix with named rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub row_ids: Vec<String>,
    pub column_names: Vec<String>,
    pub values: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// Rows at `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            row_ids: indices.iter().map(|&i| self.row_ids[i].clone()).collect(),
            column_names: self.column_names.clone(),
            values: self.values.select_rows(indices),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_names.iter().position(|c| c == name)?;
        Some(self.values.column(j).iter().copied().collect())
    }
}

/// Named trait tables keyed by (source name, granularity).
#[derive(Debug, Clone, Default)]
pub struct FeatureSources {
    tables: BTreeMap<(String, Granularity), TraitTable>,
}

impl FeatureSources {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a table under `name` at the table's own granularity, replacing
    /// any previous one.
    pub fn insert(&mut self, name: impl Into<String>, table: TraitTable) {
        self.tables.insert((name.into(), table.granularity()), table);
    }

    pub fn get(&self, name: &str, granularity: Granularity) -> Option<&TraitTable> {
        self.tables.get(&(name.to_string(), granularity))
    }

    pub fn names(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.tables.keys().map(|(n, _)| n.as_str()).collect();
        v.dedup();
        v
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &TraitTable)> {
        self.tables.iter().map(|((n, _), t)| (n.as_str(), t))
    }
}

/// Split a selection string such as `"situa+plt"` into set names.
pub fn parse_selection(spec: &str) -> Vec<String> {
    spec.split(['+', ','])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Expand set names and aliases into base source names, keeping first
/// occurrence order. `plt` expands to its four subdomains.
pub fn expand_selection(selection: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut push = |s: &str| {
        if !out.iter().any(|o| o == s) {
            out.push(s.to_string());
        }
    };
    for name in selection {
        match name.as_str() {
            "plt" => PLT_SOURCES.iter().for_each(|s| push(s)),
            "situa" | "s8d" => push(S8D_SOURCE),
            "disto" | "distortion" => push("distortion"),
            "resili" | "resilience" => push("resilience"),
            "motive" | "motives" => push("motives"),
            "mh" | "mental_health" => push("mental_health"),
            other => push(other),
        }
    }
    out
}

fn row_ids(corpus: &Corpus, granularity: Granularity) -> Vec<String> {
    match granularity {
        Granularity::Post => corpus.posts().map(|p| p.post_id.clone()).collect(),
        Granularity::Sentence => corpus.sentences().map(|(_, _, s)| s.sentence_id.clone()).collect(),
    }
}

/// Concatenate the selected sources column-wise over corpus rows.
///
/// Columns are named `<source>.<column>` and appear in selection order; rows
/// follow corpus order. A post-level request for a source that only exists
/// at sentence level is served by word-count-weighted aggregation.
pub fn assemble_features(
    corpus: &Corpus,
    sources: &FeatureSources,
    selection: &[String],
    granularity: Granularity,
) -> Result<FeatureMatrix, FeatureError> {
    let rows = row_ids(corpus, granularity);
    let mut column_names = Vec::new();
    let mut blocks: Vec<(TraitTable, usize)> = Vec::new();
    let mut seen = HashSet::new();

    for name in expand_selection(selection) {
        if name == S8D_SOURCE && granularity == Granularity::Sentence {
            return Err(FeatureError::IllegalGranularity(name));
        }
        let table = match sources.get(&name, granularity) {
            Some(t) => t.clone(),
            None => match (granularity, sources.get(&name, Granularity::Sentence)) {
                (Granularity::Post, Some(sentence_level)) => aggregate_to_posts(sentence_level, corpus)
                    .map_err(|e| match e {
                        FeatureError::CoverageGap { missing, .. } => FeatureError::CoverageGap {
                            source_name: name.clone(),
                            granularity: Granularity::Sentence,
                            missing,
                        },
                        other => other,
                    })?,
                _ if sources.get(&name, Granularity::Post).is_some() => {
                    return Err(FeatureError::IllegalGranularity(name));
                }
                _ => return Err(FeatureError::UnknownSource(name)),
            },
        };
        let missing: Vec<String> = rows.iter().filter(|id| table.get(id).is_none()).cloned().collect();
        if !missing.is_empty() {
            return Err(FeatureError::CoverageGap { source_name: name, granularity, missing });
        }
        for c in table.columns() {
            let full = format!("{name}.{c}");
            if !seen.insert(full.clone()) {
                return Err(FeatureError::DuplicateColumn(full));
            }
            column_names.push(full);
        }
        let width = table.columns().len();
        blocks.push((table, width));
    }

    let ncols = column_names.len();
    let mut values = DMatrix::zeros(rows.len(), ncols);
    let mut offset = 0;
    for (table, width) in &blocks {
        for (i, id) in rows.iter().enumerate() {
            let r = table.get(id).expect("coverage checked");
            for (j, v) in r.iter().enumerate() {
                values[(i, offset + j)] = *v;
            }
        }
        offset += width;
    }
    Ok(FeatureMatrix { row_ids: rows, column_names, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Post, Timeline};

    fn corpus() -> Corpus {
        Corpus {
            timelines: vec![Timeline {
                user_id: "u".into(),
                posts: vec![Post::from_text("p1", 0, "One two. Three."), Post::from_text("p2", 1, "Four five six.")],
            }],
        }
    }

    fn table(g: Granularity, cols: &[&str], rows: &[(&str, Vec<f64>)]) -> TraitTable {
        TraitTable::new(
            g,
            cols.iter().map(|c| c.to_string()).collect(),
            rows.iter().map(|(id, v)| (id.to_string(), v.clone())).collect(),
        )
        .unwrap()
    }

    #[test]
    fn selection_parsing_and_expansion() {
        assert_eq!(parse_selection("situa + PLT"), vec!["situa", "plt"]);
        assert_eq!(
            expand_selection(&parse_selection("situa+plt+resili")),
            vec!["s8d", "motives", "mental_health", "resilience", "distortion"]
        );
    }

    #[test]
    fn s8d_at_sentence_level_is_illegal() {
        let mut src = FeatureSources::new();
        src.insert("s8d", table(Granularity::Post, &["duty"], &[("p1", vec![1.0]), ("p2", vec![2.0])]));
        let err = assemble_features(&corpus(), &src, &["s8d".into()], Granularity::Sentence).unwrap_err();
        assert!(matches!(err, FeatureError::IllegalGranularity(_)));
    }

    #[test]
    fn sentence_tables_aggregate_to_posts() {
        let mut src = FeatureSources::new();
        src.insert(
            "distortion",
            table(
                Granularity::Sentence,
                &["cognitive_distortion"],
                &[("p1.s0", vec![1.0]), ("p1.s1", vec![4.0]), ("p2.s0", vec![2.0])],
            ),
        );
        let m = assemble_features(&corpus(), &src, &["disto".into()], Granularity::Post).unwrap();
        assert_eq!(m.column_names, vec!["distortion.cognitive_distortion"]);
        // weights 2 and 1
        assert!((m.values[(0, 0)] - 2.0).abs() < 1e-15);
        assert_eq!(m.values[(1, 0)], 2.0);
    }

    #[test]
    fn coverage_gap_lists_missing_rows() {
        let mut src = FeatureSources::new();
        src.insert("s8d", table(Granularity::Post, &["duty"], &[("p1", vec![1.0])]));
        match assemble_features(&corpus(), &src, &["s8d".into()], Granularity::Post) {
            Err(FeatureError::CoverageGap { missing, .. }) => assert_eq!(missing, vec!["p2"]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            assemble_features(&corpus(), &src, &["hart".into()], Granularity::Post),
            Err(FeatureError::UnknownSource(_))
        ));
    }
}
