use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LevelParseError {
    #[error("no JSON object in response")]
    NoJson,
    #[error("JSON object has no \"levels\" array")]
    MissingLevels,
    #[error("expected {expected} levels, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("level at index {index} is not an integer in 0..=4: {value}")]
    OutOfRange { index: usize, value: String },
}

/// Extracts the first JSON object in `raw` and reads its `"levels"` array.
/// Surrounding prose is ignored.
pub fn parse_level_response(raw: &str, window: usize) -> Result<Vec<u8>, LevelParseError> {
    let object = first_json_object(raw).ok_or(LevelParseError::NoJson)?;
    let levels = object.get("levels").and_then(Value::as_array).ok_or(LevelParseError::MissingLevels)?;
    if levels.len() != window {
        return Err(LevelParseError::WrongLength { expected: window, got: levels.len() });
    }
    levels
        .iter()
        .enumerate()
        .map(|(index, v)| match v.as_u64() {
            Some(l) if l <= 4 => Ok(l as u8),
            _ => Err(LevelParseError::OutOfRange { index, value: v.to_string() }),
        })
        .collect()
}

fn first_json_object(raw: &str) -> Option<serde_json::Map<String, Value>> {
    raw.char_indices().filter(|&(_, c)| c == '{').find_map(|(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&raw[i..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(map))) => Some(map),
            _ => None,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_object() {
        assert_eq!(parse_level_response(r#"{"levels":[2,3,3,4,4,3]}"#, 6).unwrap(), vec![2, 3, 3, 4, 4, 3]);
    }

    #[test]
    fn prose_before_object() {
        let raw = r#"Because of the banquet... {"levels":[4,4]}"#;
        assert_eq!(parse_level_response(raw, 2).unwrap(), vec![4, 4]);
    }

    #[test]
    fn object_inside_code_fence_with_trailing_reasoning() {
        let raw = "```json\n{\"levels\": [1, 0]}\n```\nThe hall is closed, like example 3 {not json}.";
        assert_eq!(parse_level_response(raw, 2).unwrap(), vec![1, 0]);
    }

    #[test]
    fn errors_are_distinct() {
        assert_eq!(parse_level_response("no json here", 2), Err(LevelParseError::NoJson));
        assert_eq!(parse_level_response("{broken", 2), Err(LevelParseError::NoJson));
        assert_eq!(
            parse_level_response(r#"{"levels":[1,2,3]}"#, 2),
            Err(LevelParseError::WrongLength { expected: 2, got: 3 })
        );
        assert_eq!(
            parse_level_response(r#"{"levels":[5,1]}"#, 2),
            Err(LevelParseError::OutOfRange { index: 0, value: "5".into() })
        );
        assert!(matches!(
            parse_level_response(r#"{"levels":[1,2.5]}"#, 2),
            Err(LevelParseError::OutOfRange { index: 1, .. })
        ));
        assert_eq!(parse_level_response(r#"{"lvls":[1]}"#, 1), Err(LevelParseError::MissingLevels));
    }
}
