use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::state::Screenshot;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub t: u64,
    pub shot: Screenshot,
}

/// Ordered frames with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VideoClip {
    frames: Vec<Frame>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("frame timestamps must increase strictly (at index {index})")]
pub struct NonMonotonicFrames {
    pub index: usize,
}

impl VideoClip {
    pub fn new(frames: Vec<Frame>) -> Result<Self, NonMonotonicFrames> {
        for (i, w) in frames.windows(2).enumerate() {
            if w[1].t <= w[0].t {
                return Err(NonMonotonicFrames { index: i + 1 });
            }
        }
        Ok(VideoClip { frames })
    }

    /// Appends a frame; returns false (and drops it) if `t` does not advance.
    pub fn push(&mut self, t: u64, shot: Screenshot) -> bool {
        if self.frames.last().is_some_and(|f| f.t >= t) {
            return false;
        }
        self.frames.push(Frame { t, shot });
        true
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn has_timestamp(&self, t: u64) -> bool {
        self.frames.iter().any(|f| f.t == t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoEvent {
    pub t: u64,
    pub description: String,
}

/// Visible changes between consecutive frames, attributed to the later one.
pub fn frame_events(clip: &VideoClip) -> Vec<VideoEvent> {
    let mut out = Vec::new();
    for w in clip.frames.windows(2) {
        let (a, b) = (&w[0].shot, &w[1].shot);
        let t = w[1].t;
        if a.screen_id != b.screen_id {
            let name = if b.title.is_empty() { &b.screen_id } else { &b.title };
            out.push(VideoEvent {
                t,
                description: format!("screen changed to {name}"),
            });
        }
        for e in &b.elements {
            match a.element(&e.id) {
                None => out.push(VideoEvent {
                    t,
                    description: format!("{} {} appeared", e.label, kind_word(e.kind)),
                }),
                Some(old) => {
                    if old.content != e.content {
                        out.push(VideoEvent {
                            t,
                            description: format!("{} now shows \"{}\"", e.label, e.content),
                        });
                    }
                    if old.enabled != e.enabled {
                        let state = if e.enabled { "enabled" } else { "disabled" };
                        out.push(VideoEvent {
                            t,
                            description: format!("{} became {state}", e.label),
                        });
                    }
                }
            }
        }
        for e in &a.elements {
            if a.screen_id == b.screen_id && b.element(&e.id).is_none() {
                out.push(VideoEvent {
                    t,
                    description: format!("{} {} disappeared", e.label, kind_word(e.kind)),
                });
            }
        }
    }
    out
}

fn kind_word(kind: super::ElementKind) -> &'static str {
    use super::ElementKind::*;
    match kind {
        Button => "button",
        Textbox => "text box",
        ListItem => "item",
        Label => "label",
    }
}
