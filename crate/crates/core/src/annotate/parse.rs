use serde_json::{Map, Value};

use super::{Dimension, DimensionScore, ParseError};

/// Byte ranges of balanced `{...}` candidates, in order of their opening
/// brace. String literals are respected so braces inside them do not count.
fn balanced_objects(raw: &str) -> Vec<(usize, usize)> {
    let bytes = raw.as_bytes();
    let mut found = Vec::new();
    for start in (0..bytes.len()).filter(|&i| bytes[i] == b'{') {
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        for (i, &b) in bytes.iter().enumerate().skip(start) {
            if in_string {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_string = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_string = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        found.push((start, i + 1));
                        break;
                    }
                }
                _ => {}
            }
        }
    }
    found
}

fn normalize_key(k: &str) -> String {
    k.trim().to_lowercase().replace(['_', '-'], " ")
}

fn lookup<'a>(obj: &'a Map<String, Value>, keys: &[&str]) -> Option<&'a Value> {
    keys.iter().find_map(|want| obj.iter().find(|(k, _)| normalize_key(k) == *want).map(|(_, v)| v))
}

fn coerce_rating(v: &Value) -> Result<i64, ParseError> {
    let invalid = || ParseError::InvalidRating(v.to_string());
    let number = match v {
        Value::Number(n) => n.as_f64().ok_or_else(invalid)?,
        Value::String(s) => s.trim().parse::<f64>().map_err(|_| invalid())?,
        _ => return Err(invalid()),
    };
    if !number.is_finite() || number.fract() != 0.0 || number.abs() > i64::MAX as f64 {
        return Err(invalid());
    }
    Ok(number as i64)
}

/// Extract a rating from a model completion.
///
/// The first balanced JSON object carrying a rating (under `rating`, the
/// dimension key, or `score`, case-insensitively) is used; surrounding text is
/// ignored. Supporting spans not found verbatim in `source_text` are moved to
/// `dropped_spans` and logged.
pub fn parse_response(raw: &str, source_text: &str, dimension: Dimension) -> Result<DimensionScore, ParseError> {
    let rating_keys = ["rating", dimension.key(), "score"];
    let mut parsed_any = false;
    for (a, b) in balanced_objects(raw) {
        let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(&raw[a..b]) else {
            continue;
        };
        parsed_any = true;
        let Some(rating_value) = lookup(&obj, &rating_keys) else {
            continue;
        };
        let rating = coerce_rating(rating_value)?;
        if !(1..=9).contains(&rating) {
            return Err(ParseError::RatingOutOfRange(rating));
        }
        let reasoning = match lookup(&obj, &["reasoning"]) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Null) | None => String::new(),
            Some(other) => other.to_string(),
        };
        let spans: Vec<String> = match lookup(&obj, &["supporting spans", "spans", "span extraction"]) {
            Some(Value::Array(items)) => items.iter().filter_map(|v| v.as_str().map(str::to_string)).collect(),
            Some(Value::String(s)) => vec![s.clone()],
            _ => Vec::new(),
        };
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        for span in spans {
            let trimmed = span.trim();
            if trimmed.is_empty() {
                continue;
            }
            if source_text.contains(trimmed) {
                kept.push(trimmed.to_string());
            } else {
                log::warn!("{dimension}: dropping span not found in text: {trimmed:?}");
                dropped.push(span);
            }
        }
        return Ok(DimensionScore {
            dimension,
            rating: rating as u8,
            reasoning,
            supporting_spans: kept,
            dropped_spans: dropped,
        });
    }
    Err(if parsed_any { ParseError::RatingMissing } else { ParseError::NoJsonFound })
}
