//! Report documents: a run manifest plus a result body, serialized as
//! pretty-printed JSON with stable field order.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Every parameter that influences the result. Worker count and output
    /// paths are excluded: they do not change the numbers.
    pub parameters: BTreeMap<String, Value>,
    pub seed: Option<u64>,
    pub versions: BTreeMap<String, String>,
    /// Only populated from `SOURCE_DATE_EPOCH`, so reruns stay byte-identical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("homsum".to_string(), env!("CARGO_PKG_VERSION").to_string());
        Self {
            command: command.into(),
            parameters: BTreeMap::new(),
            seed: None,
            versions,
            timestamp: std::env::var("SOURCE_DATE_EPOCH").ok(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.parameters.insert(key.to_string(), serde_json::to_value(value).expect("serializable parameter"));
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub manifest: RunManifest,
    pub result: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(manifest: RunManifest, result: T) -> Self {
        Self { manifest, result }
    }

    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
