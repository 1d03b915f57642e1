//! Deterministic replay backend.
//!
//! A transcript is an ordered list of `(fingerprint, response)` turns. In
//! `ordered` mode turns are consumed strictly in sequence and each must
//! match the request fingerprint (`*` matches anything). In `keyed` mode
//! each fingerprint owns its own queue, which keeps replay deterministic
//! when several problems are solved concurrently.
//!
//! A request for `n` samples consumes `n` turns.

use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::backend::{ChatBackend, ChatRequest, ChatResponse, TransportError, Usage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strictness {
    #[default]
    Ordered,
    Keyed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedTurn {
    pub fingerprint: String,
    pub response: String,
    /// Reported usage; when absent the gateway estimates tokens.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
    /// Shorthand for repeating this turn.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub repeat: u32,
}

fn one() -> u32 {
    1
}

fn is_one(v: &u32) -> bool {
    *v == 1
}

impl ScriptedTurn {
    pub fn new(fingerprint: impl Into<String>, response: impl Into<String>) -> Self {
        Self { fingerprint: fingerprint.into(), response: response.into(), usage: None, repeat: 1 }
    }

    pub fn repeated(mut self, times: u32) -> Self {
        self.repeat = times;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScriptedTranscript {
    #[serde(default)]
    pub strictness: Strictness,
    pub turns: Vec<ScriptedTurn>,
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("reading transcript {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing transcript {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
}

impl ScriptedTranscript {
    pub fn new(strictness: Strictness) -> Self {
        Self { strictness, turns: Vec::new() }
    }

    pub fn push(&mut self, turn: ScriptedTurn) -> &mut Self {
        self.turns.push(turn);
        self
    }

    pub fn load(path: &Path) -> Result<Self, TranscriptError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| TranscriptError::Io { path: path.display().to_string(), source })?;
        serde_json::from_str(&text)
            .map_err(|source| TranscriptError::Parse { path: path.display().to_string(), source })
    }

    fn expanded(&self) -> impl Iterator<Item = ScriptedTurn> + '_ {
        self.turns.iter().flat_map(|t| {
            std::iter::repeat_n(ScriptedTurn { repeat: 1, ..t.clone() }, t.repeat as usize)
        })
    }
}

#[derive(Debug)]
enum Queues {
    Ordered(VecDeque<ScriptedTurn>),
    Keyed(HashMap<String, VecDeque<ScriptedTurn>>),
}

/// Replays a [`ScriptedTranscript`].
#[derive(Debug)]
pub struct ScriptedBackend {
    queues: Mutex<Queues>,
}

impl ScriptedBackend {
    pub fn new(transcript: &ScriptedTranscript) -> Self {
        let queues = match transcript.strictness {
            Strictness::Ordered => Queues::Ordered(transcript.expanded().collect()),
            Strictness::Keyed => {
                let mut map: HashMap<String, VecDeque<ScriptedTurn>> = HashMap::new();
                for turn in transcript.expanded() {
                    map.entry(turn.fingerprint.clone()).or_default().push_back(turn);
                }
                Queues::Keyed(map)
            }
        };
        Self { queues: Mutex::new(queues) }
    }

    /// Number of turns not yet consumed.
    pub fn remaining(&self) -> usize {
        match &*self.queues.lock().expect("scripted backend lock") {
            Queues::Ordered(q) => q.len(),
            Queues::Keyed(map) => map.values().map(VecDeque::len).sum(),
        }
    }

    fn next_turn(&self, fingerprint: &str) -> Result<ScriptedTurn, TransportError> {
        let mut queues = self.queues.lock().expect("scripted backend lock");
        match &mut *queues {
            Queues::Ordered(queue) => {
                let turn = queue.pop_front().ok_or_else(|| {
                    TransportError::fatal(format!("scripted transcript exhausted at {fingerprint}"))
                })?;
                if turn.fingerprint != "*" && turn.fingerprint != fingerprint {
                    return Err(TransportError::fatal(format!(
                        "scripted transcript expected request {} but got {fingerprint}",
                        turn.fingerprint
                    )));
                }
                Ok(turn)
            }
            Queues::Keyed(map) => map
                .get_mut(fingerprint)
                .and_then(VecDeque::pop_front)
                .ok_or_else(|| {
                    TransportError::fatal(format!("scripted transcript has no turn left for {fingerprint}"))
                }),
        }
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let mut choices = Vec::with_capacity(request.n as usize);
        let mut usage: Option<Usage> = None;
        let mut all_reported = true;
        for _ in 0..request.n.max(1) {
            let turn = self.next_turn(&request.fingerprint)?;
            match turn.usage {
                Some(u) => {
                    let acc = usage.get_or_insert_with(Usage::default);
                    // a multi-sample request shares one prompt
                    acc.prompt_tokens = acc.prompt_tokens.max(u.prompt_tokens);
                    acc.completion_tokens += u.completion_tokens;
                }
                None => all_reported = false,
            }
            choices.push(turn.response);
        }
        Ok(ChatResponse { choices, usage: if all_reported { usage } else { None }, wall_ms: 0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(fingerprint: &str, n: u32) -> ChatRequest {
        ChatRequest {
            model: "m".into(),
            messages: vec![],
            temperature: 0.0,
            n,
            fingerprint: fingerprint.into(),
        }
    }

    #[test]
    fn ordered_replay_checks_fingerprints() {
        let mut t = ScriptedTranscript::new(Strictness::Ordered);
        t.push(ScriptedTurn::new("generator:a", "one")).push(ScriptedTurn::new("*", "two"));
        let backend = ScriptedBackend::new(&t);
        assert!(backend.complete(&request("planner:a", 1)).is_err());
        let backend = ScriptedBackend::new(&t);
        assert_eq!(backend.complete(&request("generator:a", 1)).unwrap().choices, vec!["one"]);
        assert_eq!(backend.complete(&request("anything", 1)).unwrap().choices, vec!["two"]);
        let err = backend.complete(&request("generator:a", 1)).unwrap_err();
        assert!(err.message.contains("exhausted"));
    }

    #[test]
    fn keyed_replay_is_order_independent() {
        let mut t = ScriptedTranscript::new(Strictness::Keyed);
        t.push(ScriptedTurn::new("g:a", "a").repeated(2)).push(ScriptedTurn::new("g:b", "b"));
        let backend = ScriptedBackend::new(&t);
        assert_eq!(backend.complete(&request("g:b", 1)).unwrap().choices, vec!["b"]);
        assert_eq!(backend.complete(&request("g:a", 2)).unwrap().choices, vec!["a", "a"]);
        assert_eq!(backend.remaining(), 0);
    }

    #[test]
    fn transcript_json_round_trip() {
        let mut t = ScriptedTranscript::new(Strictness::Keyed);
        t.push(ScriptedTurn::new("g:a", "x").repeated(3));
        let json = serde_json::to_string(&t).unwrap();
        let back: ScriptedTranscript = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        let minimal: ScriptedTranscript =
            serde_json::from_str(r#"{"turns":[{"fingerprint":"*","response":"r"}]}"#).unwrap();
        assert_eq!(minimal.strictness, Strictness::Ordered);
        assert_eq!(minimal.turns[0].repeat, 1);
    }
}
