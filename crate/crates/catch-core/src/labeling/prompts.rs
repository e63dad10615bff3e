//! Versioned prompt templates for the labeling calls.

use super::client::PromptKind;

pub const PROMPT_VERSION: &str = "v1";

pub const LABEL: &str = include_str!("prompts/label.txt");
pub const VOTE_CORE: &str = include_str!("prompts/vote_core.txt");
pub const IS_RELEVANT: &str = include_str!("prompts/is_relevant.txt");
pub const CONCLUDE: &str = include_str!("prompts/conclude.txt");

pub fn system_prompt(kind: PromptKind) -> &'static str {
    match kind {
        PromptKind::Label => LABEL,
        PromptKind::VoteCore => VOTE_CORE,
        PromptKind::IsRelevant => IS_RELEVANT,
        PromptKind::Conclude => CONCLUDE,
    }
}
