//! Optional JSON config file merged under command-line flags.
//!
//! The file is a JSON object whose keys are flag names in snake_case
//! (`min_gap`, not `min-gap`). Top-level keys apply to every subcommand; an
//! object stored under a subcommand's name (`"sweep": {...}`) overrides them
//! for that subcommand only. Flags given on the command line win over both.
//! Keys a subcommand does not know are ignored.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

pub fn load(path: &Path) -> CliResult<Map<String, Value>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Validation(format!(
            "{}: config must be a JSON object",
            path.display()
        ))),
        Err(e) => Err(CliError::Validation(format!("{}: {e}", path.display()))),
    }
}

/// Layers `flags` over the config's top-level keys and its `section` object.
pub fn merge<T: Serialize + DeserializeOwned>(
    flags: &T,
    config: Option<&Map<String, Value>>,
    section: &str,
) -> CliResult<T> {
    let Some(config) = config else {
        return Ok(
            serde_json::from_value(serde_json::to_value(flags).expect("args serialize"))
                .expect("args round-trip"),
        );
    };
    let mut merged: Map<String, Value> = config
        .iter()
        .filter(|(_, v)| !v.is_object())
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    match config.get(section) {
        Some(Value::Object(own)) => merged.extend(own.clone()),
        Some(_) => {
            return Err(CliError::Validation(format!(
                "config key {section:?} must be an object"
            )))
        }
        None => {}
    }
    let Value::Object(given) = serde_json::to_value(flags).expect("args serialize") else {
        unreachable!("argument structs serialize to objects");
    };
    merged.extend(given.into_iter().filter(|(_, v)| !v.is_null()));
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Validation(format!("config for {section}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;
    use serde_json::json;

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    struct Args {
        seed: Option<u64>,
        delta: Option<f64>,
        days: Option<usize>,
    }

    fn object(v: Value) -> Map<String, Value> {
        match v {
            Value::Object(m) => m,
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_win_over_section_over_top_level() {
        let config = object(json!({"seed": 1, "delta": 0.8, "days": 5, "sweep": {"delta": 0.7}}));
        let flags = Args {
            seed: Some(9),
            ..Args::default()
        };
        let merged = merge(&flags, Some(&config), "sweep").unwrap();
        assert_eq!(
            merged,
            Args {
                seed: Some(9),
                delta: Some(0.7),
                days: Some(5)
            }
        );
        let other = merge(&Args::default(), Some(&config), "detect").unwrap();
        assert_eq!(other.delta, Some(0.8));
    }

    #[test]
    fn no_config_keeps_flags() {
        let flags = Args {
            days: Some(3),
            ..Args::default()
        };
        assert_eq!(merge(&flags, None, "sweep").unwrap(), flags);
    }

    #[test]
    fn wrong_types_are_validation_errors() {
        let config = object(json!({"seed": "seven"}));
        assert!(matches!(
            merge(&Args::default(), Some(&config), "x"),
            Err(CliError::Validation(_))
        ));
        let config = object(json!({"x": 3}));
        assert!(matches!(
            merge(&Args::default(), Some(&config), "x"),
            Err(CliError::Validation(_))
        ));
    }
}
