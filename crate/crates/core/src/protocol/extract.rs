use alloc::string::String;

use serde_json::{Map, Value};

use super::{validate_message, AgentMessage, AgentRole, Body, KeyPolicy, ProtocolError};

/// Returns the first well-formed JSON object embedded in `raw`.
///
/// Prose before or after the object, markdown fences and stray braces that do
/// not start a valid object are skipped.
pub fn extract_object(raw: &str) -> Option<Map<String, Value>> {
    for (start, _) in raw.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&raw[start..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Some(map);
        }
    }
    None
}

fn decode(raw: &str, sender: AgentRole, policy: &KeyPolicy) -> Result<AgentMessage, ProtocolError> {
    let map = extract_object(raw).ok_or(ProtocolError::ParseError)?;
    let body: Body = map.into_iter().collect();
    let msg = AgentMessage::new(sender, 0, body);
    validate_message(&msg, policy)?;
    Ok(msg)
}

/// Decodes a completion into a policy-valid message.
///
/// On failure `repair` is called once with the error; it should re-prompt the
/// same backend and return the new completion text (or `None` if the backend
/// could not answer). A second failure is returned to the caller.
pub fn parse_model_output<F>(
    raw: &str,
    sender: AgentRole,
    policy: &KeyPolicy,
    repair: F,
) -> Result<AgentMessage, ProtocolError>
where
    F: FnOnce(&ProtocolError) -> Option<String>,
{
    match decode(raw, sender, policy) {
        Ok(msg) => Ok(msg),
        Err(first) => match repair(&first) {
            Some(second) => decode(&second, sender, policy),
            None => Err(first),
        },
    }
}
