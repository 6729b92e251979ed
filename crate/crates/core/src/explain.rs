//! Causes tables and derivation-tree explanations.
//!
//! A causes table has one row per true `fired_N` atom. Explanations for an
//! atom are built by recursing through the rows that derive it: children of
//! a row are combined by Cartesian product, every label roots its own
//! alternative, and rows without labels pass their children up unchanged.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::ground::{instantiate_atom, AtomStore, GroundAtom, Query, Symbol, DEFAULT_INT_GUARD};
use crate::solve::Model;
use crate::syntax::{BodyElem, Literal, Sign};
use crate::translate::{strip_atom, RuleMeta, TracedProgram, FIRED_PREFIX, SHOW_PREFIX};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabelKind {
    /// From a `trace_rule` or `trace` annotation.
    Manual,
    /// The rule's own ground head, in auto-trace mode.
    Auto,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    pub text: String,
    pub kind: LabelKind,
}

impl Label {
    pub fn manual(text: impl Into<String>) -> Self {
        Label {
            text: text.into(),
            kind: LabelKind::Manual,
        }
    }

    pub fn auto(text: impl Into<String>) -> Self {
        Label {
            text: text.into(),
            kind: LabelKind::Auto,
        }
    }
}

/// Manual labels print quoted, auto labels bare.
impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LabelKind::Manual => write!(f, "\"{}\"", self.text),
            LabelKind::Auto => f.write_str(&self.text),
        }
    }
}

/// One fired rule instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CausesRow {
    pub rule_id: usize,
    /// Arguments of the `fired_N` atom.
    pub fired_args: Vec<Symbol>,
    pub fired_head: GroundAtom,
    /// Positive body atoms only, in body order.
    pub fired_body: Vec<GroundAtom>,
    pub labels: Vec<Label>,
}

#[derive(Clone, Debug, Default)]
pub struct CausesTable {
    /// Sorted by rule id, then `fired_N` arguments.
    pub rows: Vec<CausesRow>,
    by_head: HashMap<GroundAtom, Vec<usize>>,
}

impl CausesTable {
    pub fn new(mut rows: Vec<CausesRow>) -> Self {
        rows.sort_by(|a, b| (a.rule_id, &a.fired_args).cmp(&(b.rule_id, &b.fired_args)));
        let mut by_head: HashMap<GroundAtom, Vec<usize>> = HashMap::new();
        for (i, r) in rows.iter().enumerate() {
            by_head.entry(r.fired_head.clone()).or_default().push(i);
        }
        CausesTable { rows, by_head }
    }

    pub fn rows_for<'a>(&'a self, atom: &GroundAtom) -> impl Iterator<Item = &'a CausesRow> + 'a {
        self.by_head.get(atom).into_iter().flatten().map(|&i| &self.rows[i])
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExplanationNode {
    pub label: Label,
    pub children: Vec<ExplanationNode>,
}

impl ExplanationNode {
    pub fn leaf(label: Label) -> Self {
        ExplanationNode {
            label,
            children: Vec::new(),
        }
    }

    /// Visits the node and its descendants in pre-order.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a ExplanationNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }
}

/// One alternative explanation: usually a single tree, but a forest when
/// the explained atom's own rule carries no label.
pub type Forest = Vec<ExplanationNode>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplanationSet {
    pub atom: GroundAtom,
    pub trees: Vec<Forest>,
}

struct TraceMatcher {
    query: Query,
    sign: Sign,
    predicate: String,
    arity: usize,
}

/// Builds the causes table of `model`, a model of the translated program.
pub fn build_causes_table(model: &Model, tp: &TracedProgram) -> Result<CausesTable> {
    let stripped: AtomStore = model.iter().filter_map(strip_atom).collect();

    // per rule: matches the `fired_N` pattern to recover the full binding
    let mut binders: HashMap<usize, Query> = HashMap::new();
    let matchers = tp
        .atom_traces
        .iter()
        .map(|t| {
            let mut body = vec![BodyElem::Literal(Literal::pos(t.head.clone()))];
            body.extend(t.condition.iter().cloned());
            Ok(TraceMatcher {
                query: Query::new(&[], &body, DEFAULT_INT_GUARD, &t.span)?,
                sign: t.head.sign,
                predicate: t.head.predicate.clone(),
                arity: t.head.args.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut atom_labels: HashMap<GroundAtom, Vec<Label>> = HashMap::new();

    let mut rows = Vec::new();
    for fired in model.iter().filter(|a| a.predicate.starts_with(FIRED_PREFIX)) {
        let meta = tp
            .meta_for_fired(&fired.predicate)
            .ok_or_else(|| Error::Internal(format!("{fired} does not belong to any translated rule")))?;
        if fired.args.len() != meta.fired_arity() {
            return Err(Error::Internal(format!(
                "{fired} has arity {}, rule {} expects {}",
                fired.args.len(),
                meta.rule_id,
                meta.fired_arity()
            )));
        }
        let binder = match binders.entry(meta.rule_id) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => e.insert(binder_for(meta)?),
        };
        let binding = binder
            .solutions(Some(fired), &AtomStore::new())?
            .into_iter()
            .next()
            .ok_or_else(|| Error::Internal(format!("cannot recover the binding of {fired}")))?;

        let k = meta.original_head.args.len();
        let fired_head = GroundAtom {
            predicate: meta.original_head.predicate.clone(),
            sign: meta.original_head.sign,
            args: fired.args[..k].to_vec(),
        };
        let fired_body = meta
            .original_body
            .iter()
            .filter_map(BodyElem::as_positive)
            .map(|a| instantiate_atom(a, &binding, &meta.span))
            .collect::<Result<Vec<_>>>()?;

        let mut labels = Vec::new();
        for t in &meta.label_templates {
            let values: Vec<String> = t.vars.iter().map(|v| binding[v].label_text()).collect();
            push_unique(&mut labels, Label::manual(t.instantiate(&values)));
        }
        if meta.auto_label && meta.label_templates.is_empty() {
            push_unique(&mut labels, Label::auto(fired_head.to_string()));
        }
        if !matchers.is_empty() {
            if !atom_labels.contains_key(&fired_head) {
                let found = trace_labels(&fired_head, &matchers, tp, &stripped)?;
                atom_labels.insert(fired_head.clone(), found);
            }
            for l in &atom_labels[&fired_head] {
                push_unique(&mut labels, l.clone());
            }
        }

        rows.push(CausesRow {
            rule_id: meta.rule_id,
            fired_args: fired.args.clone(),
            fired_head,
            fired_body,
            labels,
        });
    }
    Ok(CausesTable::new(rows))
}

fn binder_for(meta: &RuleMeta) -> Result<Query> {
    let body = [BodyElem::Literal(Literal::pos(meta.fired_atom()))];
    Query::new(&meta.var_names, &body, DEFAULT_INT_GUARD, &meta.span)
}

fn push_unique(labels: &mut Vec<Label>, l: Label) {
    if !labels.contains(&l) {
        labels.push(l);
    }
}

fn trace_labels(
    head: &GroundAtom,
    matchers: &[TraceMatcher],
    tp: &TracedProgram,
    model: &AtomStore,
) -> Result<Vec<Label>> {
    let mut out = Vec::new();
    for (m, t) in matchers.iter().zip(&tp.atom_traces) {
        if m.sign != head.sign || m.predicate != head.predicate || m.arity != head.args.len() {
            continue;
        }
        for binding in m.query.solutions(Some(head), model)? {
            let values: Vec<String> = t.template.vars.iter().map(|v| binding[v].label_text()).collect();
            push_unique(&mut out, Label::manual(t.template.instantiate(&values)));
        }
    }
    Ok(out)
}

/// Atoms to explain in `model` (a translated model), in atom order.
pub fn select_explained_atoms(model: &Model, tp: &TracedProgram) -> Vec<GroundAtom> {
    let mut out: Vec<GroundAtom> = if tp.has_show_trace() {
        model
            .iter()
            .filter_map(|a| {
                a.predicate.strip_prefix(SHOW_PREFIX).map(|p| GroundAtom {
                    predicate: p.to_string(),
                    sign: a.sign,
                    args: a.args.clone(),
                })
            })
            .collect()
    } else {
        model.iter().filter_map(strip_atom).collect()
    };
    out.sort();
    out.dedup();
    out
}

/// All alternative explanations of `atom`. Atoms on `stack` are being
/// explained further up and are skipped, which cuts cyclic support.
pub fn build_explanations(atom: &GroundAtom, table: &CausesTable, stack: &mut Vec<GroundAtom>) -> Result<Vec<Forest>> {
    let mut rows = table.rows_for(atom).peekable();
    if rows.peek().is_none() {
        return Err(Error::NoSupport { atom: atom.to_string() });
    }
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for row in rows {
        let mut combos: Vec<Forest> = vec![Vec::new()];
        for b in &row.fired_body {
            if stack.contains(b) {
                continue;
            }
            stack.push(b.clone());
            let sub = build_explanations(b, table, stack);
            stack.pop();
            combos = combine(&combos, &sub?);
        }
        if row.labels.is_empty() {
            for c in combos {
                if seen.insert(c.clone()) {
                    out.push(c);
                }
            }
        } else {
            for l in &row.labels {
                for c in &combos {
                    let tree = vec![ExplanationNode {
                        label: l.clone(),
                        children: c.clone(),
                    }];
                    if seen.insert(tree.clone()) {
                        out.push(tree);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Cartesian product of alternatives, concatenating forests.
fn combine(left: &[Forest], right: &[Forest]) -> Vec<Forest> {
    let mut out = Vec::with_capacity(left.len() * right.len());
    for l in left {
        for r in right {
            let mut f = l.clone();
            f.extend(r.iter().cloned());
            out.push(f);
        }
    }
    out
}

/// Top-level explanation of one atom. Empty alternatives are dropped and at
/// most `max` are kept.
pub fn explain_atom(atom: &GroundAtom, table: &CausesTable, max: Option<usize>) -> Result<ExplanationSet> {
    let mut trees: Vec<Forest> = build_explanations(atom, table, &mut Vec::new())?
        .into_iter()
        .filter(|f| !f.is_empty())
        .collect();
    if let Some(k) = max {
        trees.truncate(k);
    }
    Ok(ExplanationSet {
        atom: atom.clone(),
        trees,
    })
}

/// Explanations for every selected atom of a translated model.
pub fn explain_model(model: &Model, tp: &TracedProgram, max: Option<usize>) -> Result<Vec<ExplanationSet>> {
    let table = build_causes_table(model, tp)?;
    select_explained_atoms(model, tp)
        .iter()
        .map(|a| explain_atom(a, &table, max))
        .collect()
}

/// One answer set with its explanations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Answer {
    pub number: usize,
    /// The model over the original signature.
    pub model: Model,
    pub explained: Vec<ExplanationSet>,
}

/// Labels of a forest in pre-order; handy for comparisons that ignore shape.
pub fn forest_labels(forest: &[ExplanationNode]) -> Vec<&Label> {
    let mut out = Vec::new();
    for n in forest {
        n.walk(&mut |x| out.push(&x.label));
    }
    out
}

/// Groups explanation sets by printed atom.
pub fn by_atom(sets: &[ExplanationSet]) -> BTreeMap<String, &ExplanationSet> {
    sets.iter().map(|s| (s.atom.to_string(), s)).collect()
}
