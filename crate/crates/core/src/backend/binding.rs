use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use super::Decoding;
use crate::protocol::AgentRole;

pub const DEFAULT_TEXT_MODEL: &str = "gpt-4-turbo-1106";
pub const DEFAULT_VISION_MODEL: &str = "gpt-4-vision-preview";
pub const DEFAULT_VIDEO_MODEL: &str = "gemini-1.5-pro-vision";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    Scripted,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleBinding {
    pub kind: BackendKind,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the credential.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub script: Option<String>,
    #[serde(default)]
    pub cassette: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingDefaults {
    #[serde(default)]
    pub temperature: f32,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_max_tokens() -> u32 {
    1024
}

impl Default for DecodingDefaults {
    fn default() -> Self {
        DecodingDefaults {
            temperature: 0.0,
            max_tokens: default_max_tokens(),
        }
    }
}

impl From<DecodingDefaults> for Decoding {
    fn from(d: DecodingDefaults) -> Self {
        Decoding {
            temperature: d.temperature,
            max_tokens: d.max_tokens,
        }
    }
}

/// Backend configuration document. With neither `default` nor `roles`
/// present every role gets its stock remote model; otherwise only the roles
/// listed (or covered by `default`) are bound.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    #[serde(default)]
    pub decoding: DecodingDefaults,
    #[serde(default)]
    pub default: Option<RoleBinding>,
    #[serde(default)]
    pub roles: BTreeMap<String, RoleBinding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedBinding {
    pub kind: BackendKind,
    pub model: String,
    pub endpoint: Option<String>,
    pub api_key_env: Option<String>,
    pub script: Option<String>,
    pub cassette: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("no backend bound for role {0}")]
    RoleUnbound(AgentRole),
    #[error("unknown role `{0}` in backend config")]
    UnknownRole(String),
    #[error("{0}")]
    Invalid(String),
}

pub fn default_model(role: AgentRole) -> &'static str {
    match role {
        AgentRole::Planner | AgentRole::Librarian | AgentRole::Programmer => DEFAULT_TEXT_MODEL,
        AgentRole::Viewer | AgentRole::Mentor => DEFAULT_VISION_MODEL,
        AgentRole::VideoAnalyst => DEFAULT_VIDEO_MODEL,
    }
}

fn default_key_env(role: AgentRole) -> &'static str {
    match role {
        AgentRole::VideoAnalyst => "GEMINI_API_KEY",
        _ => "OPENAI_API_KEY",
    }
}

fn resolve(role: AgentRole, b: &RoleBinding) -> ResolvedBinding {
    ResolvedBinding {
        kind: b.kind,
        model: b.model.clone().unwrap_or_else(|| default_model(role).to_string()),
        endpoint: b.endpoint.clone(),
        api_key_env: match b.kind {
            BackendKind::Remote => Some(
                b.api_key_env
                    .clone()
                    .unwrap_or_else(|| default_key_env(role).to_string()),
            ),
            _ => b.api_key_env.clone(),
        },
        script: b.script.clone(),
        cassette: b.cassette.clone(),
    }
}

/// Resolves one backend per role. Every role in `required` must end up
/// bound.
pub fn bind_roles(
    config: &BackendConfig,
    required: &[AgentRole],
) -> Result<BTreeMap<AgentRole, ResolvedBinding>, ConfigError> {
    let mut explicit = BTreeMap::new();
    for (name, b) in &config.roles {
        let role: AgentRole = name
            .parse()
            .map_err(|_| ConfigError::UnknownRole(name.clone()))?;
        explicit.insert(role, b);
    }
    let stock = RoleBinding {
        kind: BackendKind::Remote,
        model: None,
        endpoint: None,
        api_key_env: None,
        script: None,
        cassette: None,
    };
    let fallback = match (&config.default, explicit.is_empty()) {
        (Some(d), _) => Some(d),
        (None, true) => Some(&stock),
        (None, false) => None,
    };
    let mut out = BTreeMap::new();
    for role in AgentRole::ALL {
        if let Some(b) = explicit.get(&role).copied().or(fallback) {
            out.insert(role, resolve(role, b));
        }
    }
    for role in required {
        if !out.contains_key(role) {
            return Err(ConfigError::RoleUnbound(*role));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scripted() -> RoleBinding {
        RoleBinding {
            kind: BackendKind::Scripted,
            model: None,
            endpoint: None,
            api_key_env: None,
            script: Some("s.json".into()),
            cassette: None,
        }
    }

    #[test]
    fn empty_config_gives_stock_models() {
        let b = bind_roles(&BackendConfig::default(), &AgentRole::ALL).unwrap();
        assert_eq!(b[&AgentRole::Planner].model, "gpt-4-turbo-1106");
        assert_eq!(b[&AgentRole::Librarian].model, "gpt-4-turbo-1106");
        assert_eq!(b[&AgentRole::Programmer].model, "gpt-4-turbo-1106");
        assert_eq!(b[&AgentRole::Viewer].model, "gpt-4-vision-preview");
        assert_eq!(b[&AgentRole::Mentor].model, "gpt-4-vision-preview");
        assert_eq!(b[&AgentRole::VideoAnalyst].model, "gemini-1.5-pro-vision");
        assert!(b.values().all(|r| r.kind == BackendKind::Remote));
    }

    #[test]
    fn default_binding_covers_all_roles() {
        let cfg = BackendConfig {
            default: Some(scripted()),
            ..Default::default()
        };
        let b = bind_roles(&cfg, &AgentRole::ALL).unwrap();
        assert!(b.values().all(|r| r.kind == BackendKind::Scripted));
    }

    #[test]
    fn missing_role_is_config_error_when_required() {
        let mut cfg = BackendConfig::default();
        for role in AgentRole::ALL {
            if role != AgentRole::VideoAnalyst {
                cfg.roles.insert(role.as_str().into(), scripted());
            }
        }
        let without_video: alloc::vec::Vec<_> = AgentRole::ALL
            .into_iter()
            .filter(|r| *r != AgentRole::VideoAnalyst)
            .collect();
        assert!(bind_roles(&cfg, &without_video).is_ok());
        assert_eq!(
            bind_roles(&cfg, &AgentRole::ALL),
            Err(ConfigError::RoleUnbound(AgentRole::VideoAnalyst))
        );
    }

    #[test]
    fn override_model() {
        let mut cfg = BackendConfig::default();
        let mut b = scripted();
        b.kind = BackendKind::Remote;
        b.model = Some("local-llm".into());
        cfg.roles.insert("planner".into(), b);
        cfg.default = Some(scripted());
        let r = bind_roles(&cfg, &[]).unwrap();
        assert_eq!(r[&AgentRole::Planner].model, "local-llm");
        assert_eq!(r[&AgentRole::Planner].api_key_env.as_deref(), Some("OPENAI_API_KEY"));
    }

    #[test]
    fn unknown_role_rejected() {
        let mut cfg = BackendConfig::default();
        cfg.roles.insert("oracle".into(), scripted());
        assert_eq!(bind_roles(&cfg, &[]), Err(ConfigError::UnknownRole("oracle".into())));
    }
}
