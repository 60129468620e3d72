//! Pizza recommender model and its explainer: a decision tree trained on a
//! small recipe table, explained with a local linear surrogate.

pub mod lime;
pub mod tree;

use std::sync::LazyLock;

pub use lime::{lime_attribute, Attribution, LimeConfig, Sampling};
pub use tree::{train_tree, DecisionTree, Example, Node};

use crate::error::{ExplainError, LimeError};
use crate::framework::{ComponentExplainer, ExplainerOutput};
use crate::model::{ContextVector, Query};
use crate::reasoner::TextReasoner;
use crate::trace::{Event, EventKind, Source};

pub const INGREDIENTS: [&str; 10] = [
    "tomato",
    "mozzarella",
    "basil",
    "pepperoni",
    "mushroom",
    "onion",
    "pineapple",
    "ham",
    "olive",
    "anchovy",
];

pub const RECIPES_CSV: &str = include_str!("../../data/pizza_recipes.csv");

/// Parsed recipe table: feature names, class names in order of first
/// appearance, and examples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<String>,
    pub classes: Vec<String>,
    pub examples: Vec<Example>,
}

/// Parses a recipe CSV: one 0/1 column per ingredient, then `label`.
pub fn parse_dataset(text: &str) -> Result<Dataset, LimeError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| LimeError::Parse(e.to_string()))?
        .clone();
    let (label, features) = headers
        .iter()
        .collect::<Vec<_>>()
        .split_last()
        .map(|(l, f)| (l.to_string(), f.iter().map(|s| s.to_string()).collect::<Vec<_>>()))
        .ok_or_else(|| LimeError::Parse("empty header".into()))?;
    if label != "label" {
        return Err(LimeError::Parse("last column must be `label`".into()));
    }
    let mut classes: Vec<String> = Vec::new();
    let mut examples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| LimeError::Parse(e.to_string()))?;
        let row = i + 2;
        if record.len() != features.len() + 1 {
            return Err(LimeError::Parse(format!("row {row}: wrong column count")));
        }
        let x = record
            .iter()
            .take(features.len())
            .map(|v| match v.trim() {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(LimeError::Parse(format!("row {row}: non-binary value `{other}`"))),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        let name = record[features.len()].trim().to_owned();
        let y = match classes.iter().position(|c| *c == name) {
            Some(y) => y,
            None => {
                classes.push(name);
                classes.len() - 1
            }
        };
        examples.push((x, y));
    }
    if examples.is_empty() {
        return Err(LimeError::EmptyDataset);
    }
    Ok(Dataset {
        features,
        classes,
        examples,
    })
}

pub fn fixture_dataset() -> Dataset {
    parse_dataset(RECIPES_CSV).expect("shipped recipe table parses")
}

static FIXTURE_TREE: LazyLock<DecisionTree> = LazyLock::new(|| {
    let d = fixture_dataset();
    train_tree(&d.features, &d.classes, &d.examples).expect("shipped recipe table trains")
});

/// The recommender's tree, trained once on the shipped recipes.
pub fn fixture_tree() -> &'static DecisionTree {
    &FIXTURE_TREE
}

/// Ingredient vector from `ingredients.<name>` parameters; unlisted
/// ingredients count as unavailable.
pub fn ingredient_vector(events: &[&Event]) -> Option<Vec<u8>> {
    let mut x = vec![0u8; INGREDIENTS.len()];
    let mut seen = false;
    for e in events.iter().filter(|e| e.kind == EventKind::Param) {
        for (i, name) in INGREDIENTS.iter().enumerate() {
            if let Some(v) = e.num_field(&format!("ingredients.{name}")) {
                x[i] = (v > 0.5) as u8;
                seen = true;
            }
        }
    }
    seen.then_some(x)
}

pub const NOT_RECOMMENDED_TEXT: &str = "I did not recommend any pizza during this task.";

pub fn explain_pizza(
    context: &ContextVector,
    events: &[&Event],
    tree: &DecisionTree,
    cfg: &LimeConfig,
) -> Result<ExplainerOutput, ExplainError> {
    let mine: Vec<&Event> = events
        .iter()
        .copied()
        .filter(|e| e.source == Source::PizzaRecommender && context.contains(e.ts))
        .collect();
    if mine.is_empty() {
        return Ok(ExplainerOutput::new(NOT_RECOMMENDED_TEXT));
    }
    let pizza = mine
        .iter()
        .rev()
        .filter(|e| e.kind == EventKind::Dialogue)
        .find_map(|e| e.str_field("recommendation"))
        .ok_or_else(|| ExplainError::MissingEvent("pizza recommendation".into()))?;
    let x = ingredient_vector(&mine)
        .ok_or_else(|| ExplainError::MissingEvent("available ingredients".into()))?;
    if x.iter().all(|&v| v == 0) {
        return Ok(ExplainerOutput::new(format!(
            "No ingredients were available, so I recommended a {pizza} pizza, my default choice."
        )));
    }
    let attribution = lime_attribute(tree, &x, pizza, cfg)?;
    let ranking = attribution.ranking(&x);
    let top = INGREDIENTS[ranking[0]];
    let listed = ranking
        .iter()
        .map(|&i| format!("{} ({:+.2})", INGREDIENTS[i], attribution.weights[i]))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(ExplainerOutput::new(format!(
        "I recommended a {pizza} pizza mainly because {top} was available. Ranking of the available ingredients: {listed}."
    )))
}

pub struct PizzaExplainer {
    pub tree: DecisionTree,
    pub config: LimeConfig,
}

impl Default for PizzaExplainer {
    fn default() -> Self {
        PizzaExplainer {
            tree: fixture_tree().clone(),
            config: LimeConfig::for_features(INGREDIENTS.len()),
        }
    }
}

impl ComponentExplainer for PizzaExplainer {
    fn id(&self) -> &str {
        "pizza_recommender"
    }

    fn subscriptions(&self) -> &[Source] {
        &[Source::PizzaRecommender]
    }

    fn summary(&self) -> &str {
        "explains which pizza the robot recommended and which available ingredients led to it"
    }

    fn explain(
        &self,
        _query: &Query,
        context: &ContextVector,
        events: &[&Event],
        _reasoner: &dyn TextReasoner,
    ) -> Result<ExplainerOutput, ExplainError> {
        explain_pizza(context, events, &self.tree, &self.config)
    }
}
