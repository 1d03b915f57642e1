//! Prompt templates.
//!
//! Templates are plain-text assets. Text before the first `<User>:` marker is
//! the system message; the rest alternates `<User>:` / `<Assistant>:` turns.
//! Placeholders `{prev_code}`, `{cur_func_name}` and `{cur_func_doc}` are
//! substituted in a single pass, so substituted text is never re-expanded.

use super::backend::{ChatMessage, MessageRole};

pub const GENERATE_TEMPLATE: &str = include_str!("../../assets/prompts/generate.txt");
pub const PLAN_TEMPLATE: &str = include_str!("../../assets/prompts/plan.txt");
pub const TESTS_TEMPLATE: &str = include_str!("../../assets/prompts/tests.txt");

/// Imperative sentences that must appear in the planning prompt.
pub const PLAN_FAILURE_FRAMING: &str =
    "The previous attempt to direct implement the target function is failed";
pub const PLAN_IMPERATIVE: &str = "you must decompose it into multiple smaller, manageable helper functions";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    turns: Vec<(MessageRole, String)>,
}

#[derive(Debug, Clone, Copy)]
pub struct PromptVars<'a> {
    pub prev_code: &'a str,
    pub cur_func_name: &'a str,
    pub cur_func_doc: &'a str,
}

const USER: &str = "<User>:";
const ASSISTANT: &str = "<Assistant>:";

impl Template {
    pub fn parse(text: &str) -> Template {
        let mut turns = Vec::new();
        let mut role = MessageRole::System;
        let mut current = String::new();
        for line in text.lines() {
            let marker = match line.trim() {
                USER => Some(MessageRole::User),
                ASSISTANT => Some(MessageRole::Assistant),
                _ => None,
            };
            match marker {
                Some(next) => {
                    turns.push((role, current.trim().to_string()));
                    current.clear();
                    role = next;
                }
                None => {
                    current.push_str(line);
                    current.push('\n');
                }
            }
        }
        turns.push((role, current.trim().to_string()));
        Template { turns }
    }

    pub fn generate() -> Template {
        Template::parse(GENERATE_TEMPLATE)
    }

    pub fn plan() -> Template {
        Template::parse(PLAN_TEMPLATE)
    }

    pub fn tests() -> Template {
        Template::parse(TESTS_TEMPLATE)
    }

    pub fn render(&self, vars: &PromptVars<'_>, extra_prefix: Option<&str>) -> Vec<ChatMessage> {
        self.turns
            .iter()
            .enumerate()
            .map(|(i, (role, text))| {
                let mut content = substitute(text, vars);
                if i == 0 {
                    if let Some(prefix) = extra_prefix.filter(|p| !p.is_empty()) {
                        content = format!("{prefix}\n{content}");
                    }
                }
                ChatMessage::new(*role, content)
            })
            .collect()
    }
}

fn substitute(text: &str, vars: &PromptVars<'_>) -> String {
    let mut out = String::with_capacity(text.len() + vars.prev_code.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        let replaced = [
            ("{prev_code}", vars.prev_code),
            ("{cur_func_name}", vars.cur_func_name),
            ("{cur_func_doc}", vars.cur_func_doc),
        ]
        .into_iter()
        .find(|(key, _)| tail.starts_with(key));
        match replaced {
            Some((key, value)) => {
                out.push_str(value);
                rest = &tail[key.len()..];
            }
            None => {
                out.push('{');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}
