use super::LiftedPair;
use crate::backend::{Prompt, PromptMeta};
use crate::ltl::GRAMMAR_TEXT;

pub const SYSTEM_PROMPT: &str = "You are an expert in formal verification and temporal logic. You will be given textual requirements. Your task is to translate each requirement into LTL formula(s) using the following conventions:

- Temporal operators: G = always, F = eventually, X = next, U = until.

- Atomic propositions must be lowercase words (e.g., request, granted), not single uppercase letters.

- Output strictly and only the LTL formula(s). Do not include reasoning, explanations, steps, or natural language of any kind. The output should contain only the formula(s), nothing else.

- If the provided text is not related to LTL requirements at all, just output \"The provided text has nothing to do with LTL\".";

/// System block, optional grammar block, example stanzas, task block.
pub fn assemble_prompt(
    system: &str,
    examples: &[&LiftedPair],
    requirements: &[String],
    include_grammar: bool,
) -> Prompt {
    let mut sys = system.trim_end().to_string();
    if include_grammar {
        sys.push_str("\n\nThe output must follow this LTL grammar:\n");
        sys.push_str(GRAMMAR_TEXT.trim_end());
    }

    let mut user = String::new();
    if !examples.is_empty() {
        user.push_str("Examples:\n");
        for p in examples {
            user.push_str(&format!("\nNL: {}\nLTL: {}\n", p.nl, p.ltl));
        }
        user.push('\n');
    }
    match requirements {
        [one] => user.push_str(&format!("Requirement:\nNL: {one}\nLTL:")),
        many => {
            user.push_str("Requirements:\n");
            for (i, r) in many.iter().enumerate() {
                user.push_str(&format!("{}. {r}\n", i + 1));
            }
            user.push_str("LTL:");
        }
    }
    Prompt {
        system: sys,
        user,
        requirements: requirements.to_vec(),
        meta: PromptMeta::default(),
    }
}
