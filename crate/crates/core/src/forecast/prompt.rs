use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::llm::ChatMessage;
use crate::demand::Archetype;

/// Semantic definitions of the five demand levels.
pub const LEVEL_RULES: &str = "Level 0: very low usage, the building is essentially idle.\n\
Level 1: low usage, only a few occupants or background appliances.\n\
Level 2: moderate usage, routine everyday activity.\n\
Level 3: high usage, most occupants are active or a busy period is under way.\n\
Level 4: very high usage, peak crowding, special events or unusually heavy consumption.";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("event text is empty")]
    EmptyEvent,
    #[error("forecast window must be 2, 4 or 6, got {0}")]
    BadWindow(usize),
    #[error("prediction prompt needs at least one in-context example")]
    NoExamples,
    #[error("level must be in 0..=4, got {0}")]
    BadLevel(u8),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    /// (event description, level) pairs in presentation order.
    pub icl_examples: Vec<(String, u8)>,
    pub query: String,
    pub expected_format: String,
}

impl PromptBundle {
    /// System message, then one user/assistant pair per example, then the query.
    pub fn to_messages(&self) -> Vec<ChatMessage> {
        let mut out = vec![ChatMessage::system(&self.system)];
        for (text, level) in &self.icl_examples {
            out.push(ChatMessage::user(&format!("Description: {text}")));
            out.push(ChatMessage::assistant(&format!("Level: {level}")));
        }
        out.push(ChatMessage::user(&self.query));
        out
    }

    /// Single-string rendering, used for golden files.
    pub fn render(&self) -> String {
        let mut s = format!("[system]\n{}\n", self.system);
        for (text, level) in &self.icl_examples {
            s.push_str(&format!("[example]\nDescription: {text}\nLevel: {level}\n"));
        }
        s.push_str(&format!("[query]\n{}\n[format]\n{}\n", self.query, self.expected_format));
        s
    }
}

fn level_schema(window: usize) -> String {
    let slots = vec!["<0-4>"; window].join(",");
    format!("{{\"levels\":[{slots}]}}")
}

pub fn build_prediction_prompt(
    event_text: &str,
    building: Archetype,
    icl_examples: &[(String, u8)],
    window: usize,
    level_rules: &str,
) -> Result<PromptBundle, PromptError> {
    if event_text.trim().is_empty() {
        return Err(PromptError::EmptyEvent);
    }
    if !matches!(window, 2 | 4 | 6) {
        return Err(PromptError::BadWindow(window));
    }
    if icl_examples.is_empty() {
        return Err(PromptError::NoExamples);
    }
    let category = building.building_type();
    let system = format!(
        "You are a water distribution expert who infers hourly water demand levels of community buildings \
from descriptions of what is happening there.\nBuilding category: {category}.\n\
Demand levels are defined as follows:\n{level_rules}\n\
The examples below are historical descriptions for this category with their observed levels."
    );
    let schema = level_schema(window);
    let query = format!(
        "Building category: {category}.\nUpcoming events:\n{event_text}\n\n\
Predict the water demand level for each of the next {window} hours. \
Briefly justify the demand by comparing it with historical examples, \
then output exactly one JSON object of the form {schema} with {window} integers from 0 to 4, one per hour in order."
    );
    Ok(PromptBundle {
        system,
        icl_examples: icl_examples.to_vec(),
        query,
        expected_format: schema,
    })
}

pub fn build_generation_prompt(
    building: Archetype,
    date_info: &str,
    level: u8,
    level_rules: &str,
) -> Result<PromptBundle, PromptError> {
    if level > 4 {
        return Err(PromptError::BadLevel(level));
    }
    let category = building.building_type();
    let guidance = match level {
        0 => "The building should be essentially idle, with almost nobody using water.",
        1 => "Only light use is plausible, a few occupants or background appliances.",
        2 => "Describe routine everyday activity with ordinary water use.",
        3 => "Describe a busy period with most occupants active and high water use.",
        _ => "Describe a peak with crowds or a special event driving very high water use.",
    };
    let system = format!(
        "You are a water distribution expert who writes realistic community event descriptions.\n\
Demand levels are defined as follows:\n{level_rules}"
    );
    let query = format!(
        "Building category: {category}.\nDate: {date_info}.\nTarget demand level: {level}.\n{guidance}\n\
Write one or two concise sentences describing what is happening at this building at that time, \
consistent with the target level. You may introduce plausible community activities such as special events, \
social gatherings, dining promotions, sports events or seasonal factors. Do not state the level or any number."
    );
    Ok(PromptBundle {
        system,
        icl_examples: Vec::new(),
        query,
        expected_format: "plain text, one or two sentences".to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn examples() -> Vec<(String, u8)> {
        vec![("Lunch rush at the hall.".into(), 3), ("Closed for the night.".into(), 0)]
    }

    #[test]
    fn schema_has_window_slots() {
        let p = build_prediction_prompt("A banquet.", Archetype::Dining, &examples(), 6, LEVEL_RULES).unwrap();
        assert!(p.query.contains(r#"{"levels":[<0-4>,<0-4>,<0-4>,<0-4>,<0-4>,<0-4>]}"#));
        assert!(p.query.contains("next 6 hours"));
        assert!(p.query.to_lowercase().contains("briefly justify the demand by comparing it with historical examples"));
        assert!(p.system.contains(LEVEL_RULES));
        assert_eq!(p.to_messages().len(), 1 + 2 * 2 + 1);
    }

    #[test]
    fn errors() {
        assert_eq!(
            build_prediction_prompt("  ", Archetype::Dining, &examples(), 2, LEVEL_RULES),
            Err(PromptError::EmptyEvent)
        );
        assert_eq!(
            build_prediction_prompt("x", Archetype::Dining, &examples(), 3, LEVEL_RULES),
            Err(PromptError::BadWindow(3))
        );
        assert_eq!(build_prediction_prompt("x", Archetype::Dining, &[], 2, LEVEL_RULES), Err(PromptError::NoExamples));
    }

    #[test]
    fn deterministic() {
        let a = build_prediction_prompt("x", Archetype::Residential, &examples(), 4, LEVEL_RULES).unwrap();
        let b = build_prediction_prompt("x", Archetype::Residential, &examples(), 4, LEVEL_RULES).unwrap();
        assert_eq!(a.render(), b.render());
    }

    #[test]
    fn generation_prompt() {
        let p = build_generation_prompt(Archetype::Dining, "Friday, 18:00", 4, LEVEL_RULES).unwrap();
        assert!(p.query.contains(Archetype::Dining.building_type()));
        assert!(p.query.contains("very high water use"));
        let levels: std::collections::BTreeSet<String> = (0..5)
            .map(|l| build_generation_prompt(Archetype::Dining, "Friday, 18:00", l, LEVEL_RULES).unwrap().render())
            .collect();
        assert_eq!(levels.len(), 5);
        assert_eq!(build_generation_prompt(Archetype::Dining, "x", 5, LEVEL_RULES), Err(PromptError::BadLevel(5)));
    }
}
