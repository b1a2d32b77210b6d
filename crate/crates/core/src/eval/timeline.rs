use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;

use super::EvalError;

/// Gold-score band, `min` inclusive and `max` exclusive; open ends are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: String,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl Band {
    pub fn contains(&self, score: f64) -> bool {
        self.min.is_none_or(|m| score >= m) && self.max.is_none_or(|m| score < m)
    }
}

/// Impairment bands for the 1–10 scale: below 5 serious, 5 up to 7 impaired,
/// 7 and above minimal. These are project defaults, not published cut points.
pub fn default_bands() -> Vec<Band> {
    vec![
        Band { name: "minimal".into(), min: Some(7.0), max: None },
        Band { name: "impaired".into(), min: Some(5.0), max: Some(7.0) },
        Band { name: "serious".into(), min: None, max: Some(5.0) },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineMse {
    pub overall: Option<f64>,
    /// One entry per requested band; `None` when no post fell in the band.
    pub per_band: Vec<(String, Option<f64>)>,
}

/// MSE per timeline, then averaged over timelines with equal weight. Posts
/// without a gold score are ignored; band values only use timelines that have
/// at least one post in the band.
pub fn timeline_mse(
    corpus: &Corpus,
    predictions: &HashMap<String, f64>,
    bands: &[Band],
) -> Result<TimelineMse, EvalError> {
    let mut per_timeline: Vec<Vec<(f64, f64)>> = Vec::new();
    for timeline in &corpus.timelines {
        let mut pairs = Vec::new();
        for post in &timeline.posts {
            if let Some(gold) = post.wellbeing {
                let pred = predictions
                    .get(&post.post_id)
                    .ok_or_else(|| EvalError::MissingPrediction(post.post_id.clone()))?;
                pairs.push((gold, *pred));
            }
        }
        per_timeline.push(pairs);
    }
    let averaged = |keep: &dyn Fn(f64) -> bool| {
        let means: Vec<f64> = per_timeline
            .iter()
            .filter_map(|pairs| {
                let sel: Vec<f64> = pairs.iter().filter(|(g, _)| keep(*g)).map(|(g, p)| (g - p).powi(2)).collect();
                (!sel.is_empty()).then(|| sel.iter().sum::<f64>() / sel.len() as f64)
            })
            .collect();
        (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64)
    };
    Ok(TimelineMse {
        overall: averaged(&|_| true),
        per_band: bands.iter().map(|b| (b.name.clone(), averaged(&|g| b.contains(g)))).collect(),
    })
}
