use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde_json::{json, Value};

use crate::backend::{AttachmentKind, CompletionBackend, CompletionRequest, Decoding};
use crate::protocol::{value_text, AgentMessage, AgentRole, KeyPolicy};
use crate::simenv::{frame_events, VideoClip, VideoEvent};

use super::{consult_message, AgentError, PromptSet};

fn decode_events(v: Option<&Value>) -> Result<Vec<VideoEvent>, String> {
    let items = v
        .and_then(Value::as_array)
        .ok_or("`events` missing or not a list")?;
    let mut out = Vec::new();
    for item in items {
        let t = item
            .get("t")
            .and_then(|t| t.as_u64().or_else(|| t.as_f64().filter(|f| *f >= 0.0).map(|f| f as u64)))
            .ok_or("event without a numeric `t`")?;
        let description = item.get("description").map(value_text).unwrap_or_default();
        out.push(VideoEvent { t, description });
    }
    Ok(out)
}

/// Summarizes a clip into timestamped events. Events whose timestamp is not
/// a frame of the clip are discarded.
pub fn video_analyst_summarize(
    clip: &VideoClip,
    query: &str,
    backend: &mut dyn CompletionBackend,
    prompts: &PromptSet,
    policy: &KeyPolicy,
    decoding: Decoding,
) -> Result<(Vec<VideoEvent>, AgentMessage), AgentError> {
    if clip.is_empty() {
        return Err(AgentError::EmptyClip);
    }
    let candidates = frame_events(clip);
    let listed = if candidates.is_empty() {
        String::from("(no visible changes)")
    } else {
        candidates
            .iter()
            .map(|e| format!("t={}: {}", e.t, e.description))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let clip_json = serde_json::to_string(clip.frames()).unwrap_or_default();
    let prompt = prompts.render("video_analyst", &[("query", query), ("candidates", &listed)]);
    let mut req = CompletionRequest::new(AgentRole::VideoAnalyst, prompt).attach(AttachmentKind::Video, clip_json);
    req.decoding = decoding;
    let (mut message, mut events) = consult_message(backend, &req, policy, |m| {
        let ev = decode_events(m.get("events"))?;
        Ok((m, ev))
    })?;
    events.retain(|e| clip.has_timestamp(e.t));
    events.sort_by_key(|e| e.t);
    let listed: Vec<Value> = events
        .iter()
        .map(|e| json!({"t": e.t, "description": e.description.to_string()}))
        .collect();
    message.body.insert("events".into(), Value::Array(listed));
    Ok((events, message))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Script, ScriptedBackend};
    use crate::simenv::{Frame, Screenshot};

    fn shot(id: &str) -> Screenshot {
        Screenshot {
            screen_id: id.into(),
            title: id.into(),
            elements: Vec::new(),
            focused: None,
        }
    }

    #[test]
    fn events_restricted_to_clip_timestamps() {
        let clip = VideoClip::new(alloc::vec![
            Frame { t: 0, shot: shot("a") },
            Frame { t: 500, shot: shot("b") },
        ])
        .unwrap();
        let mut b = ScriptedBackend::new(Script::new().with(
            AgentRole::VideoAnalyst,
            json!({"events": [{"t": 500, "description": "moved to b"}, {"t": 250, "description": "invented"}]}),
        ));
        let (events, msg) = video_analyst_summarize(&clip, "what happened?", &mut b, &PromptSet::builtin(), &KeyPolicy::canonical(), Decoding::default()).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].t, 500);
        assert_eq!(msg.get("events").and_then(Value::as_array).map(Vec::len), Some(1));
    }

    #[test]
    fn empty_clip_rejected() {
        let clip = VideoClip::new(Vec::new()).unwrap();
        let mut b = ScriptedBackend::new(Script::new());
        let r = video_analyst_summarize(&clip, "q", &mut b, &PromptSet::builtin(), &KeyPolicy::canonical(), Decoding::default());
        assert_eq!(r.unwrap_err(), AgentError::EmptyClip);
    }
}
