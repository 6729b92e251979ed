//! Rewrites an annotated program into one whose models record which rule
//! instances fired.
//!
//! Rule `H :- B` with id `N` becomes
//!
//! ```text
//! fired_N(h1,...,hk,E1,...,Em) :- B'.
//! holds_H(A0,...,Ak-1) :- fired_N(A0,...,Ak-1,E0,...,Em-1).
//! ```
//!
//! where `B'` prefixes every predicate with `holds_` and `E1..Em` are the
//! rule variables that do not occur plainly in the head. Labels stay out of
//! the solver: they are kept in [`RuleMeta`] and [`AtomTrace`] records and
//! instantiated after solving.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result, Span};
use crate::ground::GroundAtom;
use crate::solve::Model;
use crate::syntax::{Annotation, AnnotationKind, Atom, BodyElem, LabelTemplate, Literal, Program, Rule, Sign, Term};

pub const HOLDS_PREFIX: &str = "holds_";
pub const FIRED_PREFIX: &str = "fired_";
pub const SHOW_PREFIX: &str = "show_all_";

/// What the explainer needs to know about one translated rule.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleMeta {
    /// 1-based, dense, in textual order of rules with a head.
    pub rule_id: usize,
    pub original_head: Atom,
    pub original_body: Vec<BodyElem>,
    /// All rule variables, head first, in first-occurrence order.
    pub var_names: Vec<String>,
    /// Variables appended to the head arguments in the `fired_N` atom.
    pub extra_vars: Vec<String>,
    pub label_templates: Vec<LabelTemplate>,
    /// Label the rule with its own ground head (auto-trace mode).
    pub auto_label: bool,
    pub span: Span,
}

impl RuleMeta {
    pub fn fired_predicate(&self) -> String {
        format!("{FIRED_PREFIX}{}", self.rule_id)
    }

    pub fn fired_arity(&self) -> usize {
        self.original_head.args.len() + self.extra_vars.len()
    }

    /// The non-ground `fired_N` atom as it appears in the translation.
    pub fn fired_atom(&self) -> Atom {
        let mut args = self.original_head.args.clone();
        args.extend(self.extra_vars.iter().map(Term::var));
        Atom::new(self.fired_predicate(), args)
    }
}

/// A `%!trace` annotation kept for post-solve label matching.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomTrace {
    pub template: LabelTemplate,
    pub head: Atom,
    pub condition: Vec<BodyElem>,
    pub span: Span,
}

#[derive(Clone, Debug, Default)]
pub struct TracedProgram {
    pub rules: Vec<Rule>,
    /// `metas[i].rule_id == i + 1`.
    pub metas: Vec<RuleMeta>,
    pub atom_traces: Vec<AtomTrace>,
    /// `(sign, predicate, arity)` of every atom named by `%!show_trace`.
    pub show_predicates: BTreeSet<(Sign, String, usize)>,
}

impl TracedProgram {
    pub fn has_show_trace(&self) -> bool {
        !self.show_predicates.is_empty()
    }

    pub fn meta(&self, rule_id: usize) -> Option<&RuleMeta> {
        rule_id.checked_sub(1).and_then(|i| self.metas.get(i))
    }

    /// Looks up the meta for a `fired_N` predicate name.
    pub fn meta_for_fired(&self, predicate: &str) -> Option<&RuleMeta> {
        let id: usize = predicate.strip_prefix(FIRED_PREFIX)?.parse().ok()?;
        self.meta(id)
    }
}

impl fmt::Display for TracedProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        for t in &self.atom_traces {
            let ann = Annotation {
                kind: AnnotationKind::TraceAtom {
                    template: t.template.clone(),
                    head: prefixed(&t.head, HOLDS_PREFIX),
                    condition: t.condition.iter().map(holds_elem).collect(),
                },
                span: t.span.clone(),
            };
            writeln!(f, "{ann}")?;
        }
        Ok(())
    }
}

fn prefixed(a: &Atom, prefix: &str) -> Atom {
    Atom {
        sign: a.sign,
        predicate: format!("{prefix}{}", a.predicate),
        args: a.args.clone(),
    }
}

fn holds_elem(b: &BodyElem) -> BodyElem {
    match b {
        BodyElem::Literal(l) => BodyElem::Literal(Literal {
            atom: prefixed(&l.atom, HOLDS_PREFIX),
            negated: l.negated,
        }),
        BodyElem::Comparison(_) => b.clone(),
    }
}

fn positional_vars(prefix: char, n: usize) -> Vec<Term> {
    (0..n).map(|i| Term::var(format!("{prefix}{i}"))).collect()
}

/// Translates `program`, whose constants must already be substituted.
pub fn translate_program(program: &Program) -> Result<TracedProgram> {
    let mut tp = TracedProgram::default();
    for rule in &program.rules {
        let Some(head) = &rule.head else {
            if rule.trace.is_some() {
                return Err(Error::Translation {
                    span: rule.span.clone(),
                    message: "trace_rule cannot label an integrity constraint".into(),
                });
            }
            tp.rules.push(Rule {
                head: None,
                body: rule.body.iter().map(holds_elem).collect(),
                span: rule.span.clone(),
                trace: None,
            });
            continue;
        };

        let var_names = rule.vars();
        let mut plain = Vec::new();
        head.collect_plain_vars(&mut plain);
        let extra_vars: Vec<String> = var_names.iter().filter(|v| !plain.contains(v)).cloned().collect();
        let label_templates: Vec<LabelTemplate> = rule.trace.iter().cloned().collect();
        for t in &label_templates {
            if let Some(v) = t.vars.iter().find(|v| !var_names.contains(v)) {
                return Err(Error::Translation {
                    span: rule.span.clone(),
                    message: format!("label variable {v} does not occur in the rule"),
                });
            }
        }
        let meta = RuleMeta {
            rule_id: tp.metas.len() + 1,
            original_head: head.clone(),
            original_body: rule.body.clone(),
            var_names,
            extra_vars,
            label_templates,
            auto_label: false,
            span: rule.span.clone(),
        };

        let fired = meta.fired_atom();
        tp.rules.push(Rule {
            head: Some(fired.clone()),
            body: rule.body.iter().map(holds_elem).collect(),
            span: rule.span.clone(),
            trace: None,
        });
        let k = head.args.len();
        let mut fired_args = positional_vars('A', k);
        fired_args.extend(positional_vars('E', meta.extra_vars.len()));
        tp.rules.push(Rule {
            head: Some(Atom {
                sign: head.sign,
                predicate: format!("{HOLDS_PREFIX}{}", head.predicate),
                args: positional_vars('A', k),
            }),
            body: vec![BodyElem::Literal(Literal::pos(Atom::new(
                fired.predicate.clone(),
                fired_args,
            )))],
            span: rule.span.clone(),
            trace: None,
        });
        tp.metas.push(meta);
    }

    for ann in &program.annotations {
        match &ann.kind {
            AnnotationKind::TraceRule(_) => {}
            AnnotationKind::TraceAtom {
                template,
                head,
                condition,
            } => tp.atom_traces.push(AtomTrace {
                template: template.clone(),
                head: head.clone(),
                condition: condition.clone(),
                span: ann.span.clone(),
            }),
            AnnotationKind::ShowTrace { head, condition } => {
                tp.show_predicates
                    .insert((head.sign, head.predicate.clone(), head.args.len()));
                let mut body = vec![BodyElem::Literal(Literal::pos(prefixed(head, HOLDS_PREFIX)))];
                body.extend(condition.iter().map(holds_elem));
                tp.rules.push(Rule {
                    head: Some(prefixed(head, SHOW_PREFIX)),
                    body,
                    span: ann.span.clone(),
                    trace: None,
                });
            }
        }
    }
    Ok(tp)
}

/// Gives every rule without a manual label its own ground head as label.
pub fn auto_trace(mut tp: TracedProgram) -> TracedProgram {
    for m in &mut tp.metas {
        if m.label_templates.is_empty() {
            m.auto_label = true;
        }
    }
    tp
}

/// The original-signature atom behind a `holds_` atom, if it is one.
pub fn strip_atom(a: &GroundAtom) -> Option<GroundAtom> {
    a.predicate.strip_prefix(HOLDS_PREFIX).map(|p| GroundAtom {
        predicate: p.to_string(),
        sign: a.sign,
        args: a.args.clone(),
    })
}

/// Drops auxiliary atoms and removes the `holds_` prefix.
pub fn strip_translation(model: &Model) -> Model {
    Model {
        index: model.index,
        atoms: model.iter().filter_map(strip_atom).collect(),
    }
}
