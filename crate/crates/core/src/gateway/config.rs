use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Duration;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderMode {
    #[default]
    Mock,
    Live,
}

impl std::str::FromStr for ProviderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "mock" => Ok(ProviderMode::Mock),
            "live" => Ok(ProviderMode::Live),
            other => Err(format!("unknown provider mode {other:?} (expected mock or live)")),
        }
    }
}

/// Endpoint and credential source for one live provider.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiveEndpoint {
    /// Name of the environment variable holding the credential.
    #[serde(default)]
    pub credential_env: String,
    pub endpoint: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    /// Per-role live settings, keyed by role name (e.g. `frame_analyzer`).
    pub live: BTreeMap<String, LiveEndpoint>,
    pub mode: ProviderMode,
    pub seed: u64,
    pub timeout_secs: f64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self { live: BTreeMap::new(), mode: ProviderMode::Mock, seed: 42, timeout_secs: DEFAULT_TIMEOUT.as_secs_f64() }
    }
}

impl GatewayConfig {
    pub fn timeout(&self) -> Duration {
        if self.timeout_secs.is_finite() && self.timeout_secs > 0.0 {
            Duration::from_secs_f64(self.timeout_secs)
        } else {
            DEFAULT_TIMEOUT
        }
    }
}
