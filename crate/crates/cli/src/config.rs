//! Command configuration: built-in defaults overlaid with the `--config`
//! JSON file.

use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::{CliError, CliResult, Context};

/// Parsed `--config` file, or an empty object.
pub fn user_config(ctx: &Context) -> CliResult<Value> {
    match &ctx.global.config {
        Some(path) => {
            let v: Value = weldsense::io::read_json(path)?;
            if !v.is_object() {
                return Err(CliError::Usage(format!("{}: config must be a JSON object", path.display())));
            }
            Ok(v)
        }
        None => Ok(Value::Object(Default::default())),
    }
}

/// Recursive object merge. A `surface` object replaces the default
/// wholesale since its fields depend on its `kind`.
pub fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if k != "surface" && slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

pub fn parse<T: DeserializeOwned>(what: &str, v: Value) -> CliResult<T> {
    serde_json::from_value(v).map_err(|e| CliError::Usage(format!("config {what}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn merge_replaces_surface_and_recurses_elsewhere() {
        let mut base = json!({"scene": {"surface": {"kind": "flat", "z": 0.0}, "laser": {"lines": 5, "samples": 31}}});
        merge(&mut base, &json!({"scene": {"surface": {"kind": "spherical_cap", "depth": 1.0}, "laser": {"lines": 3}}}));
        assert_eq!(base["scene"]["surface"], json!({"kind": "spherical_cap", "depth": 1.0}));
        assert_eq!(base["scene"]["laser"], json!({"lines": 3, "samples": 31}));
    }
}
