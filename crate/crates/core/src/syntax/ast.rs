use std::collections::BTreeMap;
use std::fmt;

use crate::error::Span;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl ArithOp {
    fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
            ArithOp::Mod => "\\",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            ArithOp::Add | ArithOp::Sub => 2,
            ArithOp::Mul | ArithOp::Div | ArithOp::Mod => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Integer(i64),
    Constant(String),
    Str(String),
    Variable(String),
    Function(String, Vec<Term>),
    Arith(ArithOp, Box<Term>, Box<Term>),
    /// Unary minus over a non-literal operand.
    Neg(Box<Term>),
    Interval(Box<Term>, Box<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Variable(name.into())
    }

    pub fn constant(name: impl Into<String>) -> Self {
        Term::Constant(name.into())
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Variable(_) => false,
            Term::Integer(_) | Term::Constant(_) | Term::Str(_) => true,
            Term::Function(_, args) => args.iter().all(Term::is_ground),
            Term::Arith(_, l, r) | Term::Interval(l, r) => l.is_ground() && r.is_ground(),
            Term::Neg(t) => t.is_ground(),
        }
    }

    /// Appends every variable in first-occurrence order, without duplicates.
    pub fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Term::Variable(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Integer(_) | Term::Constant(_) | Term::Str(_) => {}
            Term::Function(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            Term::Arith(_, l, r) | Term::Interval(l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Term::Neg(t) => t.collect_vars(out),
        }
    }

    /// Variables that can be bound by matching, i.e. not nested under arithmetic.
    pub fn collect_plain_vars(&self, out: &mut Vec<String>) {
        match self {
            Term::Variable(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Function(_, args) => args.iter().for_each(|a| a.collect_plain_vars(out)),
            _ => {}
        }
    }

    pub fn contains_interval(&self) -> bool {
        match self {
            Term::Interval(..) => true,
            Term::Function(_, args) => args.iter().any(Term::contains_interval),
            Term::Arith(_, l, r) => l.contains_interval() || r.contains_interval(),
            Term::Neg(t) => t.contains_interval(),
            _ => false,
        }
    }

    pub fn substitute(&self, map: &BTreeMap<String, Term>) -> Term {
        match self {
            Term::Constant(c) => map.get(c).cloned().unwrap_or_else(|| self.clone()),
            Term::Function(name, args) => {
                Term::Function(name.clone(), args.iter().map(|a| a.substitute(map)).collect())
            }
            Term::Arith(op, l, r) => Term::Arith(*op, Box::new(l.substitute(map)), Box::new(r.substitute(map))),
            Term::Interval(l, r) => Term::Interval(Box::new(l.substitute(map)), Box::new(r.substitute(map))),
            Term::Neg(t) => Term::Neg(Box::new(t.substitute(map))),
            _ => self.clone(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Term::Interval(..) => 1,
            Term::Arith(op, ..) => op.precedence(),
            Term::Neg(_) => 4,
            Term::Integer(i) if *i < 0 => 4,
            _ => 5,
        }
    }

    fn fmt_operand(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Integer(i) => write!(f, "{i}"),
            Term::Constant(c) | Term::Variable(c) => f.write_str(c),
            Term::Str(s) => write_quoted(f, s),
            Term::Function(name, args) => {
                f.write_str(name)?;
                write_args(f, args)
            }
            Term::Arith(op, l, r) => {
                let p = op.precedence();
                l.fmt_operand(f, p)?;
                f.write_str(op.symbol())?;
                // right operand binds tighter, and a leading minus would lex as `--`
                r.fmt_operand(f, p + 2)
            }
            Term::Neg(t) => {
                f.write_str("-")?;
                t.fmt_operand(f, 5)
            }
            Term::Interval(l, r) => {
                l.fmt_operand(f, 2)?;
                f.write_str("..")?;
                r.fmt_operand(f, 2)
            }
        }
    }
}

pub(crate) fn write_quoted(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Term]) -> fmt::Result {
    if args.is_empty() {
        return Ok(());
    }
    f.write_str("(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

/// Classical polarity of an atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Positive,
    /// Strong (classical) negation, written `-p`.
    Negative,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub sign: Sign,
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            sign: Sign::Positive,
            predicate: predicate.into(),
            args,
        }
    }

    pub fn strong_negated(mut self) -> Self {
        self.sign = Sign::Negative;
        self
    }

    pub fn collect_vars(&self, out: &mut Vec<String>) {
        self.args.iter().for_each(|a| a.collect_vars(out));
    }

    pub fn collect_plain_vars(&self, out: &mut Vec<String>) {
        self.args.iter().for_each(|a| a.collect_plain_vars(out));
    }

    pub fn substitute(&self, map: &BTreeMap<String, Term>) -> Atom {
        Atom {
            sign: self.sign,
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|a| a.substitute(map)).collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sign == Sign::Negative {
            f.write_str("-")?;
        }
        f.write_str(&self.predicate)?;
        write_args(f, &self.args)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub atom: Atom,
    /// Default negation (`not`).
    pub negated: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal { atom, negated: false }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal { atom, negated: true }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("not ")?;
        }
        write!(f, "{}", self.atom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Comparison {
    pub op: CmpOp,
    pub left: Term,
    pub right: Term,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.left, self.op.symbol(), self.right)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BodyElem {
    Literal(Literal),
    Comparison(Comparison),
}

impl BodyElem {
    pub fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            BodyElem::Literal(l) => l.atom.collect_vars(out),
            BodyElem::Comparison(c) => {
                c.left.collect_vars(out);
                c.right.collect_vars(out);
            }
        }
    }

    pub fn substitute(&self, map: &BTreeMap<String, Term>) -> BodyElem {
        match self {
            BodyElem::Literal(l) => BodyElem::Literal(Literal {
                atom: l.atom.substitute(map),
                negated: l.negated,
            }),
            BodyElem::Comparison(c) => BodyElem::Comparison(Comparison {
                op: c.op,
                left: c.left.substitute(map),
                right: c.right.substitute(map),
            }),
        }
    }

    pub fn as_positive(&self) -> Option<&Atom> {
        match self {
            BodyElem::Literal(Literal { atom, negated: false }) => Some(atom),
            _ => None,
        }
    }
}

impl fmt::Display for BodyElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodyElem::Literal(l) => write!(f, "{l}"),
            BodyElem::Comparison(c) => write!(f, "{c}"),
        }
    }
}

pub(crate) fn write_body(f: &mut fmt::Formatter<'_>, body: &[BodyElem]) -> fmt::Result {
    for (i, b) in body.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{b}")?;
    }
    Ok(())
}

/// Label text with `%` placeholders, filled from `vars` in order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabelTemplate {
    pub text: String,
    pub vars: Vec<String>,
}

impl LabelTemplate {
    /// Number of `%` placeholders; `%%` is a literal percent sign.
    pub fn placeholder_count(text: &str) -> usize {
        let mut count = 0;
        let mut chars = text.chars().peekable();
        while let Some(c) = chars.next() {
            if c == '%' {
                if chars.peek() == Some(&'%') {
                    chars.next();
                } else {
                    count += 1;
                }
            }
        }
        count
    }

    pub fn instantiate<S: AsRef<str>>(&self, values: &[S]) -> String {
        let mut out = String::with_capacity(self.text.len());
        let mut values = values.iter();
        let mut chars = self.text.chars().peekable();
        while let Some(c) = chars.next() {
            if c != '%' {
                out.push(c);
            } else if chars.peek() == Some(&'%') {
                chars.next();
                out.push('%');
            } else if let Some(v) = values.next() {
                out.push_str(v.as_ref());
            }
        }
        out
    }
}

impl fmt::Display for LabelTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        write_quoted(f, &self.text)?;
        for v in &self.vars {
            write!(f, ",{v}")?;
        }
        f.write_str("}")
    }
}

#[derive(Clone, Debug)]
pub struct Rule {
    /// `None` for integrity constraints.
    pub head: Option<Atom>,
    pub body: Vec<BodyElem>,
    pub span: Span,
    pub trace: Option<LabelTemplate>,
}

impl Rule {
    pub fn is_fact(&self) -> bool {
        self.head.is_some() && self.body.is_empty()
    }

    pub fn positive_body(&self) -> impl Iterator<Item = &Atom> {
        self.body.iter().filter_map(BodyElem::as_positive)
    }

    /// All variables in first-occurrence order, head first.
    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(h) = &self.head {
            h.collect_vars(&mut out);
        }
        self.body.iter().for_each(|b| b.collect_vars(&mut out));
        out
    }

    pub fn substitute(&self, map: &BTreeMap<String, Term>) -> Rule {
        Rule {
            head: self.head.as_ref().map(|h| h.substitute(map)),
            body: self.body.iter().map(|b| b.substitute(map)).collect(),
            span: self.span.clone(),
            trace: self.trace.clone(),
        }
    }
}

/// Structural equality; source locations and attached labels are ignored.
impl PartialEq for Rule {
    fn eq(&self, other: &Self) -> bool {
        self.head == other.head && self.body == other.body
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.head, self.body.is_empty()) {
            (Some(h), true) => write!(f, "{h}."),
            (Some(h), false) => {
                write!(f, "{h} :- ")?;
                write_body(f, &self.body)?;
                f.write_str(".")
            }
            (None, _) => {
                f.write_str(":- ")?;
                write_body(f, &self.body)?;
                f.write_str(".")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnnotationKind {
    TraceRule(LabelTemplate),
    TraceAtom {
        template: LabelTemplate,
        head: Atom,
        condition: Vec<BodyElem>,
    },
    ShowTrace {
        head: Atom,
        condition: Vec<BodyElem>,
    },
}

#[derive(Clone, Debug)]
pub struct Annotation {
    pub kind: AnnotationKind,
    pub span: Span,
}

impl PartialEq for Annotation {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cond = |f: &mut fmt::Formatter<'_>, c: &[BodyElem]| {
            if c.is_empty() {
                Ok(())
            } else {
                f.write_str(" : ")?;
                write_body(f, c)
            }
        };
        match &self.kind {
            AnnotationKind::TraceRule(t) => write!(f, "%!trace_rule {t}"),
            AnnotationKind::TraceAtom {
                template,
                head,
                condition,
            } => {
                write!(f, "%!trace {template} {head}")?;
                cond(f, condition)?;
                f.write_str(".")
            }
            AnnotationKind::ShowTrace { head, condition } => {
                write!(f, "%!show_trace {{{head}")?;
                cond(f, condition)?;
                f.write_str("}.")
            }
        }
    }
}

/// A parsed input: rules in textual order plus every annotation.
#[derive(Clone, Debug, Default)]
pub struct Program {
    pub rules: Vec<Rule>,
    pub annotations: Vec<Annotation>,
    /// `#const` definitions, not yet substituted.
    pub consts: BTreeMap<String, Term>,
}

impl Program {
    /// Concatenates `other` after `self`; later constants override earlier ones.
    pub fn extend(&mut self, other: Program) {
        self.rules.extend(other.rules);
        self.annotations.extend(other.annotations);
        self.consts.extend(other.consts);
    }

    /// Substitutes `#const` values, with `overrides` taking precedence.
    pub fn with_consts(&self, overrides: &BTreeMap<String, Term>) -> Program {
        let mut map = self.consts.clone();
        map.extend(overrides.iter().map(|(k, v)| (k.clone(), v.clone())));
        // constants may be defined in terms of one another
        let map = resolve_const_chain(map);
        let sub_cond = |c: &Vec<BodyElem>| c.iter().map(|b| b.substitute(&map)).collect();
        Program {
            rules: self.rules.iter().map(|r| r.substitute(&map)).collect(),
            annotations: self
                .annotations
                .iter()
                .map(|a| Annotation {
                    span: a.span.clone(),
                    kind: match &a.kind {
                        AnnotationKind::TraceRule(t) => AnnotationKind::TraceRule(t.clone()),
                        AnnotationKind::TraceAtom {
                            template,
                            head,
                            condition,
                        } => AnnotationKind::TraceAtom {
                            template: template.clone(),
                            head: head.substitute(&map),
                            condition: sub_cond(condition),
                        },
                        AnnotationKind::ShowTrace { head, condition } => AnnotationKind::ShowTrace {
                            head: head.substitute(&map),
                            condition: sub_cond(condition),
                        },
                    },
                })
                .collect(),
            consts: BTreeMap::new(),
        }
    }

    pub fn has_show_trace(&self) -> bool {
        self.annotations
            .iter()
            .any(|a| matches!(a.kind, AnnotationKind::ShowTrace { .. }))
    }
}

fn resolve_const_chain(mut map: BTreeMap<String, Term>) -> BTreeMap<String, Term> {
    for _ in 0..map.len() {
        let snapshot = map.clone();
        let mut changed = false;
        for v in map.values_mut() {
            let next = v.substitute(&snapshot);
            if next != *v {
                *v = next;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    map
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, value) in &self.consts {
            writeln!(f, "#const {name}={value}.")?;
        }
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}
