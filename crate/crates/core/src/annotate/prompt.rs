use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{AnnotateError, Dimension};

/// Few-shot prompt template. `{Dimension}` and `{dimension}` take the
/// capitalized and lower-case dimension name; `{items}`, `{examples}` and
/// `{text}` take the rendered blocks and the target text.
pub const PROMPT_TEMPLATE: &str = "Instruction: You are an expert in situational perception and psychological analysis. \
Your task is to evaluate a given block of text for the {Dimension} dimension from the Situational 8 DIAMONDS taxonomy. \
Individuals who score higher in the {Dimension} dimension relate to the following situations:

{items}

Your task is to provide the following in a structured JSON format: Rating: Assign a numerical rating for the {dimension} \
dimension on a scale of 1 to 9 (where 1 = Not at all present and 9 = Highly present).

Reasoning: Provide a justification for the rating based on the text. Span Extraction: Identify specific phrases in the \
text that support your rating.

Below are two examples with respective input texts and corresponding outputs to illustrate the task:

{examples}

Now, evaluate the following input text:

{text}";

const BUILTIN_SPECS: &str = include_str!("../../data/s8d_specs.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExemplarAnnotation {
    pub text: String,
    pub rating: u8,
    pub reasoning: String,
    #[serde(default)]
    pub supporting_spans: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionSpec {
    pub dimension: Dimension,
    pub items: Vec<String>,
    pub exemplars: Vec<ExemplarAnnotation>,
}

impl DimensionSpec {
    pub fn validate(&self) -> Result<(), AnnotateError> {
        let bad = |m: String| Err(AnnotateError::IncompleteSpec(format!("{}: {m}", self.dimension)));
        if self.items.is_empty() || self.items.iter().any(|i| i.trim().is_empty()) {
            return bad("item descriptions must be present and non-empty".into());
        }
        if self.exemplars.len() != 2 {
            return bad(format!("expected 2 exemplars, found {}", self.exemplars.len()));
        }
        for e in &self.exemplars {
            if e.text.trim().is_empty() {
                return bad("exemplar text is empty".into());
            }
            if !(1..=9).contains(&e.rating) {
                return bad(format!("exemplar rating {} outside 1..=9", e.rating));
            }
        }
        Ok(())
    }
}

/// A complete set of eight dimension specs in dimension order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecSet {
    pub dimensions: Vec<DimensionSpec>,
}

impl SpecSet {
    /// Validate and reorder into dimension order.
    pub fn new(mut dimensions: Vec<DimensionSpec>) -> Result<Self, AnnotateError> {
        for d in &dimensions {
            d.validate()?;
        }
        dimensions.sort_by_key(|d| d.dimension);
        let present: Vec<Dimension> = dimensions.iter().map(|d| d.dimension).collect();
        if present != Dimension::ALL {
            return Err(AnnotateError::IncompleteSpec(format!(
                "need each of the eight dimensions exactly once, found {present:?}"
            )));
        }
        Ok(SpecSet { dimensions })
    }

    /// The specs shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_SPECS, "<builtin>").expect("shipped spec file is valid")
    }

    pub fn parse(json: &str, origin: &str) -> Result<Self, AnnotateError> {
        let set: SpecSet = serde_json::from_str(json)
            .map_err(|e| AnnotateError::MalformedSpecFile { path: origin.to_string(), message: e.to_string() })?;
        Self::new(set.dimensions)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AnnotateError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| AnnotateError::Io { path: path.into(), source })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn get(&self, dimension: Dimension) -> &DimensionSpec {
        &self.dimensions[dimension.index()]
    }
}

/// Item descriptions as a dash list, one per line.
pub fn render_items(spec: &DimensionSpec) -> String {
    spec.items.iter().map(|i| format!("- {i}")).collect::<Vec<_>>().join("\n")
}

/// Both exemplars with their expected JSON outputs.
pub fn render_exemplars(spec: &DimensionSpec) -> String {
    spec.exemplars
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut out = Map::new();
            out.insert(spec.dimension.key().to_string(), Value::from(e.rating));
            out.insert("reasoning".into(), Value::from(e.reasoning.clone()));
            out.insert("supporting spans".into(), Value::from(e.supporting_spans.clone()));
            let json = serde_json::to_string(&Value::Object(out)).expect("exemplar output serializes");
            format!("Example {}: \"{}\"\n\n**Output:** {json}", i + 1, e.text)
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Instantiate the template for one dimension and target text.
pub fn build_prompt(spec: &DimensionSpec, target_text: &str) -> Result<String, AnnotateError> {
    spec.validate()?;
    if target_text.trim().is_empty() {
        return Err(AnnotateError::EmptyText);
    }
    let items = render_items(spec);
    let examples = render_exemplars(spec);
    let slots: [(&str, &str); 5] = [
        ("{Dimension}", spec.dimension.title()),
        ("{dimension}", spec.dimension.key()),
        ("{items}", &items),
        ("{examples}", &examples),
        ("{text}", target_text),
    ];
    // Single pass, so braces inside inserted text are never read as placeholders.
    let mut out = String::with_capacity(PROMPT_TEMPLATE.len() + items.len() + examples.len() + target_text.len());
    let mut rest = PROMPT_TEMPLATE;
    while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        match slots.iter().find(|(name, _)| rest.starts_with(name)) {
            Some((name, value)) => {
                out.push_str(value);
                rest = &rest[name.len()..];
            }
            None => {
                out.push('{');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}
