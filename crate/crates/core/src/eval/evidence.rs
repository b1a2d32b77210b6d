use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{EvidenceSpan, Post, SelfState};

use super::EvalError;

pub const DEFAULT_OVERLAP_MIN: f64 = 0.5;

/// Per-state probability cut-offs for selecting evidence sentences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub adaptive: f64,
    pub maladaptive: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig { adaptive: 0.45, maladaptive: 0.4 }
    }
}

impl ThresholdConfig {
    pub fn new(adaptive: f64, maladaptive: f64) -> Result<Self, EvalError> {
        let cfg = ThresholdConfig { adaptive, maladaptive };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        for t in [self.adaptive, self.maladaptive] {
            if !(t > 0.0 && t < 1.0) {
                return Err(EvalError::InvalidThreshold(t));
            }
        }
        Ok(())
    }

    pub fn for_state(&self, state: SelfState) -> f64 {
        match state {
            SelfState::Adaptive => self.adaptive,
            SelfState::Maladaptive => self.maladaptive,
        }
    }
}

/// Select sentences whose probability reaches the state's threshold and merge
/// adjacent selections into spans.
pub fn extract_evidence(
    post: &Post,
    sentence_probs: &HashMap<String, f64>,
    state: SelfState,
    thresholds: &ThresholdConfig,
) -> Result<Vec<EvidenceSpan>, EvalError> {
    thresholds.validate()?;
    let cut = thresholds.for_state(state);
    let mut spans: Vec<EvidenceSpan> = Vec::new();
    let mut open = false;
    for sentence in &post.sentences {
        let p = *sentence_probs
            .get(&sentence.sentence_id)
            .ok_or_else(|| EvalError::MissingProbability(sentence.sentence_id.clone()))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(EvalError::OutOfRange { value: p, low: 0.0, high: 1.0 });
        }
        if p >= cut {
            match spans.last_mut() {
                Some(last) if open => last.char_end = sentence.char_end,
                _ => spans.push(EvidenceSpan {
                    post_id: post.post_id.clone(),
                    char_start: sentence.char_start,
                    char_end: sentence.char_end,
                    state,
                }),
            }
            open = true;
        } else {
            open = false;
        }
    }
    Ok(spans)
}

/// Span-level recall per state and pooled. `None` where no gold span exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanRecall {
    pub recall_overall: Option<f64>,
    pub recall_adaptive: Option<f64>,
    pub recall_maladaptive: Option<f64>,
    pub weighted_recall_overall: Option<f64>,
    pub weighted_recall_adaptive: Option<f64>,
    pub weighted_recall_maladaptive: Option<f64>,
}

fn overlap(a: &EvidenceSpan, b: &EvidenceSpan) -> usize {
    a.char_end.min(b.char_end).saturating_sub(a.char_start.max(b.char_start))
}

/// A gold span counts as recalled when some predicted span of the same state
/// and post covers at least `overlap_min` of it. The weighted variant credits
/// the best covered fraction instead of a hit.
pub fn span_recall(gold: &[EvidenceSpan], predicted: &[EvidenceSpan], overlap_min: f64) -> SpanRecall {
    // (hits, weighted sum, count) per state
    let mut acc: HashMap<SelfState, (f64, f64, usize)> = HashMap::new();
    for g in gold {
        let best = predicted
            .iter()
            .filter(|p| p.state == g.state && p.post_id == g.post_id)
            .map(|p| if g.is_empty() { 0.0 } else { overlap(g, p) as f64 / g.len() as f64 })
            .fold(0.0, f64::max);
        let e = acc.entry(g.state).or_insert((0.0, 0.0, 0));
        if best >= overlap_min && best > 0.0 {
            e.0 += 1.0;
        }
        e.1 += best;
        e.2 += 1;
    }
    let ratio = |num: f64, n: usize| (n > 0).then(|| num / n as f64);
    let state = |s: SelfState| acc.get(&s).copied().unwrap_or((0.0, 0.0, 0));
    let (ah, aw, an) = state(SelfState::Adaptive);
    let (mh, mw, mn) = state(SelfState::Maladaptive);
    SpanRecall {
        recall_overall: ratio(ah + mh, an + mn),
        recall_adaptive: ratio(ah, an),
        recall_maladaptive: ratio(mh, mn),
        weighted_recall_overall: ratio(aw + mw, an + mn),
        weighted_recall_adaptive: ratio(aw, an),
        weighted_recall_maladaptive: ratio(mw, mn),
    }
}
