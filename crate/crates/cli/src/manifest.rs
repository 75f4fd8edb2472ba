use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "pjmp";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything that determines a run's numbers. Output paths and the thread
/// count are deliberately left out so they do not change the hash.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub model_path: String,
    pub model_sha256: String,
    pub parameters: Map<String, Value>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl RunManifest {
    pub fn new(command: &str, model_path: &str, model_text: &str) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            model_path: model_path.to_string(),
            model_sha256: sha256_hex(model_text.as_bytes()),
            parameters: Map::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.parameters.insert(key.to_string(), v);
    }

    /// Hash of the compact JSON form; `serde_json` maps keep keys sorted.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).unwrap_or_default();
        sha256_hex(text.as_bytes())
    }

    pub fn to_value(&self) -> Value {
        let mut v = serde_json::to_value(self).unwrap_or(Value::Null);
        if let Value::Object(map) = &mut v {
            map.insert("hash".into(), Value::String(self.hash()));
        }
        v
    }
}
