//! Text and JSON output.

use std::fmt::Write as _;

use serde::Serialize;

use crate::explain::{Answer, ExplanationNode, Forest};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Text,
    Structured,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RenderOptions {
    pub format: Format,
    /// Also print each answer set.
    pub show_model: bool,
}

pub const FORMAT_VERSION: &str = "1";

pub fn render(answers: &[Answer], opts: RenderOptions) -> String {
    match opts.format {
        Format::Text => render_text(answers, opts.show_model),
        Format::Structured => render_structured(answers, opts.show_model),
    }
}

/// The ASCII tree format (`<TAB>` is a tab character):
///
/// ```text
/// Answer: 1
/// >> h(light,off,1)<TAB>[1]
///   *
///   |__"The light is off at 1"
///   |  |__"s2 was initially open"
///
/// ```
pub fn render_text(answers: &[Answer], show_model: bool) -> String {
    let mut out = String::new();
    for a in answers {
        writeln!(out, "Answer: {}", a.number).unwrap();
        if show_model {
            let atoms: Vec<String> = a.model.iter().map(|x| x.to_string()).collect();
            writeln!(out, "{}", atoms.join(" ")).unwrap();
        }
        for set in &a.explained {
            writeln!(out, ">> {}\t[{}]", set.atom, set.trees.len()).unwrap();
            for forest in &set.trees {
                out.push_str("  *\n");
                for node in forest {
                    write_node(&mut out, node, 0);
                }
                out.push('\n');
            }
            if set.trees.is_empty() {
                out.push('\n');
            }
        }
        out.push('\n');
    }
    out
}

fn write_node(out: &mut String, node: &ExplanationNode, depth: usize) {
    writeln!(out, "  {}|__{}", "|  ".repeat(depth), node.label).unwrap();
    for c in &node.children {
        write_node(out, c, depth + 1);
    }
}

#[derive(Serialize)]
struct Document<'a> {
    format_version: &'static str,
    answers: Vec<AnswerDoc<'a>>,
}

#[derive(Serialize)]
struct AnswerDoc<'a> {
    number: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<Vec<String>>,
    explained: Vec<ExplainedDoc<'a>>,
}

#[derive(Serialize)]
struct ExplainedDoc<'a> {
    atom: String,
    trees: Vec<NodeDoc<'a>>,
}

#[derive(Serialize)]
struct NodeDoc<'a> {
    /// `null` for the virtual root joining a multi-tree alternative.
    label: Option<&'a str>,
    children: Vec<NodeDoc<'a>>,
}

impl<'a> NodeDoc<'a> {
    fn node(n: &'a ExplanationNode) -> Self {
        NodeDoc {
            label: Some(&n.label.text),
            children: n.children.iter().map(NodeDoc::node).collect(),
        }
    }

    fn forest(f: &'a Forest) -> Self {
        match f.as_slice() {
            [single] => NodeDoc::node(single),
            many => NodeDoc {
                label: None,
                children: many.iter().map(NodeDoc::node).collect(),
            },
        }
    }
}

/// A JSON document with the same content and ordering as [`render_text`].
pub fn render_structured(answers: &[Answer], show_model: bool) -> String {
    let doc = Document {
        format_version: FORMAT_VERSION,
        answers: answers
            .iter()
            .map(|a| AnswerDoc {
                number: a.number,
                model: show_model.then(|| a.model.iter().map(|x| x.to_string()).collect()),
                explained: a
                    .explained
                    .iter()
                    .map(|s| ExplainedDoc {
                        atom: s.atom.to_string(),
                        trees: s.trees.iter().map(NodeDoc::forest).collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("plain data serializes");
    s.push('\n');
    s
}
