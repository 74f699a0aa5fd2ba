//! Prompt construction and LLM response parsing.
//!
//! Article blocks are rendered one per line as `[id] title: text`. Inside
//! each field a backslash, newline or carriage return is escaped, as is `]`
//! inside the id and `:` inside the title, so a prompt can always be parsed
//! back into the exact articles and question it was built from.

use serde::Deserialize;

use crate::corpus::Article;

const ANSWER_INSTRUCTIONS: &str = "You are an expert lawyer in Vietnam, tasked with answering frequently asked questions (FAQs) from customers about Vietnamese law based on the given information.
Please use, gather, and deduce based on the knowledge in the following information to answer the user's question.
Please respond accurately, concisely, and to the point, without being too verbose.";

const RESPONSE_FORMAT: &str = r#"Reply with one JSON object and nothing else: {"answerable": true|false, "answer": "<answer>", "cited_article_ids": ["<id>", ...]}. Set "answerable" to false if the information does not answer the question. List in "cited_article_ids" the ids of the articles your answer relies on."#;

const REWRITE_INSTRUCTIONS: &str = "Rewrite the user's question about Vietnamese law so that it is clear and complete. Fix typos, expand abbreviations and restore missing diacritics. Keep the meaning and the language. Reply with the rewritten question only.";

const INFO_MARKER: &str = "\nRelevant legal information:\n";
const QUESTION_MARKER: &str = "\nUser's question: ";

/// An article as shown to the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShownArticle {
    pub id: String,
    pub title: String,
    pub text: String,
}

impl From<&Article> for ShownArticle {
    fn from(a: &Article) -> Self {
        Self {
            id: a.id.clone(),
            title: a.title.clone(),
            text: a.body.clone(),
        }
    }
}

fn escape_into(out: &mut String, field: &str, special: char) {
    for c in field.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c if c == special => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
}

pub fn answer_prompt(articles: &[ShownArticle], question: &str) -> String {
    let mut p = String::with_capacity(1024 + articles.iter().map(|a| a.text.len() + 64).sum::<usize>());
    p.push_str(ANSWER_INSTRUCTIONS);
    p.push('\n');
    p.push_str(RESPONSE_FORMAT);
    p.push_str(INFO_MARKER);
    for a in articles {
        p.push('[');
        escape_into(&mut p, &a.id, ']');
        p.push_str("] ");
        escape_into(&mut p, &a.title, ':');
        p.push_str(": ");
        escape_into(&mut p, &a.text, '\n');
        p.push('\n');
    }
    p.pop();
    p.push_str(QUESTION_MARKER);
    p.push_str(question);
    p
}

pub fn rewrite_prompt(question: &str) -> String {
    format!("{REWRITE_INSTRUCTIONS}{QUESTION_MARKER}{question}")
}

/// The question a prompt built here ends with.
pub fn question_of(prompt: &str) -> Option<&str> {
    prompt.find(QUESTION_MARKER).map(|i| &prompt[i + QUESTION_MARKER.len()..])
}

/// Parses an answer prompt back into its articles and question.
pub fn parse_answer_prompt(prompt: &str) -> Option<(Vec<ShownArticle>, &str)> {
    let start = prompt.find(INFO_MARKER)? + INFO_MARKER.len();
    let q = prompt.find(QUESTION_MARKER)?;
    if q < start {
        return None;
    }
    let articles = prompt[start..q]
        .split('\n')
        .map(parse_article_line)
        .collect::<Option<Vec<_>>>()?;
    Some((articles, &prompt[q + QUESTION_MARKER.len()..]))
}

/// Ids of the articles shown in an answer prompt, in prompt order.
pub fn shown_article_ids(prompt: &str) -> Vec<String> {
    parse_answer_prompt(prompt)
        .map(|(a, _)| a.into_iter().map(|a| a.id).collect())
        .unwrap_or_default()
}

/// Reads an escaped field up to an unescaped `stop` (or the end when
/// `stop` is `None`). Returns the field and the rest after the stop char.
fn read_field(s: &str, stop: Option<char>) -> Option<(String, &str)> {
    let mut out = String::new();
    let mut chars = s.char_indices();
    while let Some((i, c)) = chars.next() {
        match c {
            '\\' => match chars.next()?.1 {
                'n' => out.push('\n'),
                'r' => out.push('\r'),
                other => out.push(other),
            },
            c if Some(c) == stop => return Some((out, &s[i + c.len_utf8()..])),
            c => out.push(c),
        }
    }
    stop.is_none().then_some((out, ""))
}

fn parse_article_line(line: &str) -> Option<ShownArticle> {
    let (id, rest) = read_field(line.strip_prefix('[')?, Some(']'))?;
    let (title, rest) = read_field(rest.strip_prefix(' ')?, Some(':'))?;
    let (text, _) = read_field(rest.strip_prefix(' ')?, None)?;
    Some(ShownArticle { id, title, text })
}

/// Structured reply to an answer prompt.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct LlmAnswer {
    pub answerable: bool,
    #[serde(default)]
    pub answer: String,
    #[serde(default, alias = "cited")]
    pub cited_article_ids: Vec<String>,
}

/// Parses a reply, tolerating prose or code fences around the JSON object.
pub fn parse_answer(reply: &str) -> Result<LlmAnswer, String> {
    let trimmed = reply.trim();
    let parsed = serde_json::from_str::<LlmAnswer>(trimmed).or_else(|first| {
        match (trimmed.find('{'), trimmed.rfind('}')) {
            (Some(s), Some(e)) if s < e => serde_json::from_str(&trimmed[s..=e]).map_err(|e| e.to_string()),
            _ => Err(first.to_string()),
        }
    })?;
    if parsed.answerable && parsed.answer.trim().is_empty() {
        return Err("answerable reply with an empty answer".into());
    }
    Ok(parsed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn art(id: &str, title: &str, text: &str) -> ShownArticle {
        ShownArticle {
            id: id.into(),
            title: title.into(),
            text: text.into(),
        }
    }

    #[test]
    fn layout() {
        let p = answer_prompt(&[art("a1", "Ly hôn", "thủ tục"), art("a2", "", "x: y")], "hỏi?");
        assert!(p.starts_with("You are an expert lawyer in Vietnam, tasked with answering"));
        assert!(p.contains("Relevant legal information:\n[a1] Ly hôn: thủ tục\n[a2] : x: y\nUser's question: hỏi?"));
        assert!(p.ends_with("User's question: hỏi?"));
        assert_eq!(question_of(&p), Some("hỏi?"));
        assert_eq!(shown_article_ids(&p), vec!["a1", "a2"]);
        assert_eq!(question_of(&rewrite_prompt("ly hon")), Some("ly hon"));
    }

    #[test]
    fn awkward_fields_round_trip() {
        let articles = vec![
            art("a]1\\", "t:i\nt", "line one\nUser's question: fake\\n"),
            art("[b]", "::", ""),
        ];
        let q = "real\nUser's question: still the question";
        let p = answer_prompt(&articles, q);
        let (back, question) = parse_answer_prompt(&p).unwrap();
        assert_eq!(back, articles);
        assert_eq!(question, q);
    }

    fn field() -> impl Strategy<Value = String> {
        proptest::string::string_regex("[a-c:\\]\\[\\\\\n ]{0,6}").unwrap()
    }

    proptest! {
        #[test]
        fn prompts_are_injective(
            arts in proptest::collection::vec((field(), field(), field()), 1..4),
            q in field(),
        ) {
            let articles: Vec<ShownArticle> = arts.into_iter().map(|(i, t, x)| art(&i, &t, &x)).collect();
            let p = answer_prompt(&articles, &q);
            let (back, question) = parse_answer_prompt(&p).unwrap();
            prop_assert_eq!(back, articles);
            prop_assert_eq!(question, q.as_str());
        }
    }

    #[test]
    fn response_parsing() {
        let a = parse_answer(r#"{"answerable": true, "answer": "X", "cited": ["a1"]}"#).unwrap();
        assert_eq!(a, LlmAnswer { answerable: true, answer: "X".into(), cited_article_ids: vec!["a1".into()] });
        let b = parse_answer("```json\n{\"answerable\": false}\n```").unwrap();
        assert!(!b.answerable);
        assert!(parse_answer("I cannot answer").is_err());
        assert!(parse_answer(r#"{"answerable": true, "answer": "  "}"#).is_err());
        assert!(parse_answer(r#"{"answer": "X"}"#).is_err());
    }
}
