//! Re-runs the config embedded in a result document and compares the
//! regenerated document value by value.

use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::error::RunError;
use crate::experiment::{run, RESULT_FORMAT};
use reflex_core::Executor;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub identical: bool,
    /// JSON pointers at which the stored and regenerated documents differ.
    pub divergences: Vec<String>,
}

/// Extracts the embedded config from a stored document.
pub fn embedded_config(stored: &Value) -> Result<ExperimentConfig, RunError> {
    if stored.get("format").and_then(Value::as_str) != Some(RESULT_FORMAT) {
        return Err(RunError::Document(format!("missing or wrong `format` (expected \"{RESULT_FORMAT}\")")));
    }
    let cfg = stored.get("config").ok_or_else(|| RunError::Document("no embedded `config`".into()))?;
    serde_json::from_value(cfg.clone()).map_err(|e| RunError::Document(format!("embedded config: {e}")))
}

pub fn replay_value(stored: &Value, exec: &impl Executor) -> Result<ReplayReport, RunError> {
    let cfg = embedded_config(stored)?;
    let fresh = serde_json::to_value(run(&cfg, exec)?).expect("result documents serialize to JSON");
    let mut divergences = Vec::new();
    diff(stored, &fresh, &mut String::new(), &mut divergences);
    Ok(ReplayReport { identical: divergences.is_empty(), divergences })
}

pub fn replay_text(text: &str, exec: &impl Executor) -> Result<ReplayReport, RunError> {
    let stored: Value = serde_json::from_str(text).map_err(|e| RunError::Document(e.to_string()))?;
    replay_value(&stored, exec)
}

fn escape(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

fn diff(a: &Value, b: &Value, at: &mut String, out: &mut Vec<String>) {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            for (k, va) in x {
                let len = at.len();
                at.push('/');
                at.push_str(&escape(k));
                match y.get(k) {
                    Some(vb) => diff(va, vb, at, out),
                    None => out.push(at.clone()),
                }
                at.truncate(len);
            }
            for k in y.keys().filter(|k| !x.contains_key(*k)) {
                out.push(format!("{at}/{}", escape(k)));
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            for (i, (va, vb)) in x.iter().zip(y).enumerate() {
                let len = at.len();
                at.push_str(&format!("/{i}"));
                diff(va, vb, at, out);
                at.truncate(len);
            }
        }
        _ if a == b => {}
        _ => out.push(if at.is_empty() { "/".into() } else { at.clone() }),
    }
}
