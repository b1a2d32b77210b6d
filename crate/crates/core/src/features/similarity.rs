use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureError, Granularity, TraitTable};

/// Canonical resilience facet columns, in output order.
pub const RESILIENCE_FACETS: [&str; 9] = [
    "optimism",
    "flexibility_mindset",
    "sense_of_social_support",
    "continued_activities_of_daily_living",
    "cognitive_reappraisal",
    "emotional_maturity",
    "uncertainty_tolerance",
    "belief_in_higher_power",
    "coping_toolkit",
];

pub const PROTOTYPES_PER_FACET: usize = 4;

fn canonical_facet(name: &str) -> Option<&'static str> {
    let norm: String = name
        .trim()
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { '_' })
        .collect();
    let alias = match norm.as_str() {
        "sos" => "sense_of_social_support",
        "cadl" => "continued_activities_of_daily_living",
        "belief_in_a_higher_power" | "higher_power" => "belief_in_higher_power",
        other => other,
    };
    RESILIENCE_FACETS.iter().copied().find(|f| *f == alias)
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, FeatureError> {
    if a.len() != b.len() {
        return Err(FeatureError::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(FeatureError::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Mean cosine similarity between a text vector and a facet's prototypes.
pub fn facet_score(vector: &[f64], prototypes: &[Vec<f64>]) -> Result<f64, FeatureError> {
    if prototypes.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    let mut total = 0.0;
    for p in prototypes {
        total += cosine_similarity(vector, p)?;
    }
    Ok(total / prototypes.len() as f64)
}

/// Id-keyed vectors of one shared dimension. Insertion order is kept for output.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    dimension: usize,
    ids: Vec<String>,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Self {
        EmbeddingTable { dimension, ids: Vec::new(), vectors: HashMap::new() }
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<(), FeatureError> {
        let id = id.into();
        if vector.len() != self.dimension {
            return Err(FeatureError::DimensionMismatch { expected: self.dimension, found: vector.len() });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(format!("embedding {id}")));
        }
        if self.vectors.insert(id.clone(), vector).is_none() {
            self.ids.push(id);
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct EmbeddingLine {
    id: String,
    vector: Vec<f64>,
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable, FeatureError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| FeatureError::Io { path: path.into(), source })?;
    let malformed = |line: usize, message: String| FeatureError::MalformedFile {
        kind: "embedding",
        path: path.display().to_string(),
        message: format!("line {line}: {message}"),
    };
    let mut table: Option<EmbeddingTable> = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddingLine = serde_json::from_str(line).map_err(|e| malformed(i + 1, e.to_string()))?;
        let t = table.get_or_insert_with(|| EmbeddingTable::new(rec.vector.len()));
        if t.get(&rec.id).is_some() {
            return Err(malformed(i + 1, format!("duplicate id {:?}", rec.id)));
        }
        t.insert(rec.id, rec.vector)?;
    }
    let table = table.unwrap_or_default();
    if !table.is_empty() && table.dimension == 0 {
        return Err(malformed(1, "zero-dimensional vectors".into()));
    }
    Ok(table)
}

pub fn write_embeddings(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<(), FeatureError> {
    let path = path.as_ref();
    let mut out = String::new();
    for id in &table.ids {
        let line = EmbeddingLine { id: id.clone(), vector: table.vectors[id].clone() };
        out.push_str(&serde_json::to_string(&line).expect("embedding serialization cannot fail"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| FeatureError::Io { path: path.into(), source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    pub name: String,
    pub prototypes: Vec<Vec<f64>>,
}

/// Nine facets with four prototype vectors each, in canonical facet order.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    facets: Vec<Facet>,
}

impl PrototypeSet {
    /// Validates shape and reorders facets canonically. Facet names accept
    /// the usual short forms (`SoS`, `CADL`).
    pub fn new(facets: Vec<Facet>) -> Result<Self, FeatureError> {
        let invalid = |m: String| Err(FeatureError::InvalidPrototypes(m));
        if facets.len() != RESILIENCE_FACETS.len() {
            return invalid(format!("expected {} facets, found {}", RESILIENCE_FACETS.len(), facets.len()));
        }
        let mut slots: Vec<Option<Facet>> = vec![None; RESILIENCE_FACETS.len()];
        let mut dim = None;
        for f in facets {
            let Some(canon) = canonical_facet(&f.name) else {
                return invalid(format!("unknown facet {:?}", f.name));
            };
            if f.prototypes.len() != PROTOTYPES_PER_FACET {
                return invalid(format!("facet {canon} has {} prototypes", f.prototypes.len()));
            }
            for p in &f.prototypes {
                let d = *dim.get_or_insert(p.len());
                if p.len() != d || d == 0 {
                    return invalid(format!("facet {canon} prototype dimension {} (expected {d})", p.len()));
                }
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(FeatureError::NonFinite(format!("prototype of {canon}")));
                }
            }
            let idx = RESILIENCE_FACETS.iter().position(|n| *n == canon).expect("canonical");
            if slots[idx].is_some() {
                return invalid(format!("facet {canon} given twice"));
            }
            slots[idx] = Some(Facet { name: canon.to_string(), prototypes: f.prototypes });
        }
        Ok(PrototypeSet { facets: slots.into_iter().map(|f| f.expect("all nine present")).collect() })
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn dimension(&self) -> usize {
        self.facets[0].prototypes[0].len()
    }
}

#[derive(Serialize, Deserialize)]
struct PrototypeFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding_file: Option<String>,
    facets: Vec<PrototypeFileFacet>,
}

#[derive(Serialize, Deserialize)]
struct PrototypeFileFacet {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prototypes: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    texts: Option<Vec<String>>,
}

/// Load a prototype set. Each facet carries either `prototypes` (vectors) or
/// `texts`, which are looked up by id in `embedding_file` (resolved relative
/// to the prototype file).
pub fn load_prototypes(path: impl AsRef<Path>) -> Result<PrototypeSet, FeatureError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| FeatureError::Io { path: path.into(), source })?;
    let malformed = |message: String| FeatureError::MalformedFile {
        kind: "prototype",
        path: path.display().to_string(),
        message,
    };
    let file: PrototypeFile = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
    let embeddings = match &file.embedding_file {
        Some(rel) => Some(load_embeddings(path.parent().unwrap_or(Path::new(".")).join(rel))?),
        None => None,
    };
    let mut facets = Vec::with_capacity(file.facets.len());
    for f in file.facets {
        let prototypes = match (f.prototypes, f.texts) {
            (Some(v), None) => v,
            (None, Some(texts)) => {
                let Some(table) = &embeddings else {
                    return Err(malformed(format!("facet {:?} lists texts but no embedding_file is given", f.name)));
                };
                let missing: Vec<String> = texts.iter().filter(|t| table.get(t).is_none()).cloned().collect();
                if !missing.is_empty() {
                    return Err(FeatureError::MissingEmbedding(missing));
                }
                texts.iter().map(|t| table.get(t).expect("checked").to_vec()).collect()
            }
            _ => return Err(malformed(format!("facet {:?} needs exactly one of prototypes or texts", f.name))),
        };
        facets.push(Facet { name: f.name, prototypes });
    }
    PrototypeSet::new(facets)
}

pub fn write_prototypes(set: &PrototypeSet, path: impl AsRef<Path>) -> Result<(), FeatureError> {
    let path = path.as_ref();
    let file = PrototypeFile {
        embedding_file: None,
        facets: set
            .facets
            .iter()
            .map(|f| PrototypeFileFacet { name: f.name.clone(), prototypes: Some(f.prototypes.clone()), texts: None })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("prototype serialization cannot fail");
    s.push('\n');
    fs::write(path, s).map_err(|source| FeatureError::Io { path: path.into(), source })
}

/// Nine facet scores per id, columns in [`RESILIENCE_FACETS`] order.
pub fn score_resilience(
    embeddings: &EmbeddingTable,
    prototypes: &PrototypeSet,
    ids: &[String],
    granularity: Granularity,
) -> Result<TraitTable, FeatureError> {
    let missing: Vec<String> = ids.iter().filter(|id| embeddings.get(id).is_none()).cloned().collect();
    if !missing.is_empty() {
        return Err(FeatureError::MissingEmbedding(missing));
    }
    if !ids.is_empty() && embeddings.dimension() != prototypes.dimension() {
        return Err(FeatureError::DimensionMismatch {
            expected: embeddings.dimension(),
            found: prototypes.dimension(),
        });
    }
    let mut rows = Vec::with_capacity(ids.len());
    for id in ids {
        let v = embeddings.get(id).expect("checked above");
        let row = prototypes
            .facets()
            .iter()
            .map(|f| facet_score(v, &f.prototypes))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((id.clone(), row));
    }
    TraitTable::new(granularity, RESILIENCE_FACETS.iter().map(|s| s.to_string()).collect(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_hand_cases() {
        assert!((cosine_similarity(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let expected = 11.0 / (5.0f64.sqrt() * 25.0f64.sqrt());
        assert!((cosine_similarity(&[1.0, 2.0], &[3.0, 4.0]).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.98386991).abs() < 1e-8);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]), Err(FeatureError::ZeroVector)));
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 1.0]),
            Err(FeatureError::DimensionMismatch { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn facet_score_extremes() {
        let v = vec![0.3, -1.0, 2.0];
        assert!((facet_score(&v, &vec![v.clone(); 4]).unwrap() - 1.0).abs() < 1e-12);
        let e1 = vec![1.0, 0.0, 0.0, 0.0];
        let ortho = vec![
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0, 2.0, -1.0, 0.0],
        ];
        assert_eq!(facet_score(&e1, &ortho).unwrap(), 0.0);
    }

    fn uniform_set(v: &[f64]) -> PrototypeSet {
        PrototypeSet::new(
            RESILIENCE_FACETS
                .iter()
                .rev()
                .map(|n| Facet { name: n.to_string(), prototypes: vec![v.to_vec(); 4] })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn self_prototypes_score_one_in_canonical_order() {
        let v = vec![1.0, 2.0, -0.5];
        let mut emb = EmbeddingTable::new(3);
        emb.insert("a", v.clone()).unwrap();
        let set = uniform_set(&v);
        assert_eq!(set.facets()[0].name, "optimism");
        let t = score_resilience(&emb, &set, &["a".to_string()], Granularity::Sentence).unwrap();
        assert_eq!(t.columns(), RESILIENCE_FACETS.map(String::from).as_slice());
        for x in t.get("a").unwrap() {
            assert!((x - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_embeddings_listed() {
        let emb = EmbeddingTable::new(2);
        let set = uniform_set(&[1.0, 0.0]);
        match score_resilience(&emb, &set, &["x".into(), "y".into()], Granularity::Post) {
            Err(FeatureError::MissingEmbedding(ids)) => assert_eq!(ids, vec!["x", "y"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn prototype_aliases_and_validation() {
        let mut facets: Vec<Facet> = RESILIENCE_FACETS
            .iter()
            .map(|n| Facet { name: n.to_string(), prototypes: vec![vec![1.0]; 4] })
            .collect();
        facets[2].name = "SoS".into();
        facets[3].name = "CADL".into();
        assert!(PrototypeSet::new(facets.clone()).is_ok());
        facets[0].prototypes.pop();
        assert!(matches!(PrototypeSet::new(facets), Err(FeatureError::InvalidPrototypes(_))));
    }

    #[test]
    fn embedding_and_prototype_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut emb = EmbeddingTable::new(2);
        emb.insert("b", vec![0.1, 0.25]).unwrap();
        emb.insert("a", vec![-3.0, 1e-7]).unwrap();
        let p = dir.path().join("e.jsonl");
        write_embeddings(&emb, &p).unwrap();
        assert_eq!(load_embeddings(&p).unwrap(), emb);

        let set = uniform_set(&[0.5, 0.5]);
        let pp = dir.path().join("p.json");
        write_prototypes(&set, &pp).unwrap();
        assert_eq!(load_prototypes(&pp).unwrap(), set);
    }

    #[test]
    fn prototype_texts_resolve_through_embedding_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut emb = EmbeddingTable::new(2);
        let mut facets = Vec::new();
        for (i, name) in RESILIENCE_FACETS.iter().enumerate() {
            let texts: Vec<String> = (0..4).map(|k| format!("{name} statement {k}")).collect();
            for (k, t) in texts.iter().enumerate() {
                emb.insert(t.clone(), vec![i as f64 + 1.0, k as f64]).unwrap();
            }
            facets.push(serde_json::json!({"name": name, "texts": texts}));
        }
        write_embeddings(&emb, dir.path().join("protos.jsonl")).unwrap();
        let doc = serde_json::json!({"embedding_file": "protos.jsonl", "facets": facets});
        std::fs::write(dir.path().join("set.json"), doc.to_string()).unwrap();
        let set = load_prototypes(dir.path().join("set.json")).unwrap();
        assert_eq!(set.facets()[1].prototypes[3], vec![2.0, 3.0]);
    }
}
