//! Bottom-up instantiation of safe rules over their derivable Herbrand base.
//!
//! The derivable base is computed seminaively while ignoring default
//! negation, which over-approximates every stable model. Each rule is then
//! instantiated once over the final base; every emitted [`GroundRule`]
//! remembers the rule index and variable binding it came from.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result, Span};
use crate::syntax::{ArithOp, Atom, BodyElem, CmpOp, Rule, Sign, Term};

/// Default bound on the magnitude of integers produced during grounding.
pub const DEFAULT_INT_GUARD: i64 = 1_000_000;

/// A ground, fully evaluated term.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Int(i64),
    /// Constants are functions without arguments.
    Func(String, Vec<Symbol>),
    Str(String),
}

impl Symbol {
    pub fn constant(name: impl Into<String>) -> Self {
        Symbol::Func(name.into(), Vec::new())
    }

    /// Text substituted for a `%` placeholder; strings lose their quotes.
    pub fn label_text(&self) -> String {
        match self {
            Symbol::Str(s) => s.clone(),
            other => other.to_string(),
        }
    }

    pub fn to_term(&self) -> Term {
        match self {
            Symbol::Int(i) => Term::Integer(*i),
            Symbol::Str(s) => Term::Str(s.clone()),
            Symbol::Func(name, args) if args.is_empty() => Term::Constant(name.clone()),
            Symbol::Func(name, args) => Term::Function(name.clone(), args.iter().map(Symbol::to_term).collect()),
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Int(i) => write!(f, "{i}"),
            Symbol::Str(s) => crate::syntax::write_quoted(f, s),
            Symbol::Func(name, args) => {
                f.write_str(name)?;
                write_symbols(f, args)
            }
        }
    }
}

fn write_symbols(f: &mut fmt::Formatter<'_>, args: &[Symbol]) -> fmt::Result {
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

/// A ground atom. Ordering is by predicate, then sign, then arguments.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub predicate: String,
    pub sign: Sign,
    pub args: Vec<Symbol>,
}

impl GroundAtom {
    pub fn new(predicate: impl Into<String>, args: Vec<Symbol>) -> Self {
        GroundAtom {
            predicate: predicate.into(),
            sign: Sign::Positive,
            args,
        }
    }

    pub fn with_sign(mut self, sign: Sign) -> Self {
        self.sign = sign;
        self
    }

    /// The same atom with the opposite classical sign.
    pub fn complement(&self) -> GroundAtom {
        GroundAtom {
            predicate: self.predicate.clone(),
            sign: match self.sign {
                Sign::Positive => Sign::Negative,
                Sign::Negative => Sign::Positive,
            },
            args: self.args.clone(),
        }
    }

    pub fn to_atom(&self) -> Atom {
        Atom {
            sign: self.sign,
            predicate: self.predicate.clone(),
            args: self.args.iter().map(Symbol::to_term).collect(),
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sign == Sign::Negative {
            f.write_str("-")?;
        }
        f.write_str(&self.predicate)?;
        write_symbols(f, &self.args)
    }
}

/// Where a ground rule came from.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Origin {
    /// Index into the rule list passed to the grounder.
    pub rule: usize,
    /// Full variable binding, in the rule's first-occurrence order.
    pub binding: Vec<(String, Symbol)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroundRule {
    pub head: Option<GroundAtom>,
    pub positive: Vec<GroundAtom>,
    pub negative: Vec<GroundAtom>,
    /// `None` for the generated strong-negation consistency constraints.
    pub origin: Option<Origin>,
}

impl GroundRule {
    pub fn fact(head: GroundAtom) -> Self {
        GroundRule {
            head: Some(head),
            positive: Vec::new(),
            negative: Vec::new(),
            origin: None,
        }
    }

    pub fn is_constraint(&self) -> bool {
        self.head.is_none()
    }
}

impl fmt::Display for GroundRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(h) = &self.head {
            write!(f, "{h}")?;
        }
        if !self.positive.is_empty() || !self.negative.is_empty() {
            f.write_str(if self.head.is_some() { " :- " } else { ":- " })?;
            let lits = self
                .positive
                .iter()
                .map(|a| a.to_string())
                .chain(self.negative.iter().map(|a| format!("not {a}")));
            f.write_str(&lits.collect::<Vec<_>>().join(", "))?;
        }
        f.write_str(".")
    }
}

// ---------------------------------------------------------------------------
// evaluation

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum EvalError {
    NotInteger(String),
    Undefined(&'static str),
    Guard(i64),
    Interval,
    Unbound(String),
}

impl EvalError {
    fn message(&self) -> String {
        match self {
            EvalError::NotInteger(s) => format!("arithmetic over non-integer `{s}`"),
            EvalError::Undefined(why) => why.to_string(),
            EvalError::Guard(g) => format!("integer magnitude exceeds guard {g}"),
            EvalError::Interval => "interval not allowed here".into(),
            EvalError::Unbound(v) => format!("variable {v} is unbound"),
        }
    }

    pub(crate) fn into_error(self, span: &Span, term: &dyn fmt::Display) -> Error {
        Error::Eval {
            span: span.clone(),
            term: term.to_string(),
            message: self.message(),
        }
    }
}

fn arith(op: ArithOp, l: Symbol, r: Symbol, guard: i64) -> Result<Symbol, EvalError> {
    let (Symbol::Int(a), Symbol::Int(b)) = (&l, &r) else {
        let bad = if matches!(l, Symbol::Int(_)) { r } else { l };
        return Err(EvalError::NotInteger(bad.to_string()));
    };
    let (a, b) = (*a, *b);
    let v = match op {
        ArithOp::Add => a.checked_add(b),
        ArithOp::Sub => a.checked_sub(b),
        ArithOp::Mul => a.checked_mul(b),
        ArithOp::Div => {
            if b == 0 {
                return Err(EvalError::Undefined("division by zero"));
            }
            a.checked_div(b)
        }
        ArithOp::Mod => {
            if b == 0 {
                return Err(EvalError::Undefined("modulo by zero"));
            }
            a.checked_rem(b)
        }
    };
    match v {
        Some(v) if v.abs() <= guard => Ok(Symbol::Int(v)),
        _ => Err(EvalError::Guard(guard)),
    }
}

fn negate(s: Symbol, guard: i64) -> Result<Symbol, EvalError> {
    match s {
        Symbol::Int(i) => arith(ArithOp::Sub, Symbol::Int(0), Symbol::Int(i), guard),
        other => Err(EvalError::NotInteger(other.to_string())),
    }
}

fn check_guard(s: Symbol, guard: i64) -> Result<Symbol, EvalError> {
    match s {
        Symbol::Int(i) if i.abs() > guard => Err(EvalError::Guard(guard)),
        s => Ok(s),
    }
}

pub(crate) fn eval_with(t: &Term, lookup: &dyn Fn(&str) -> Option<Symbol>, guard: i64) -> Result<Symbol, EvalError> {
    match t {
        Term::Integer(i) => check_guard(Symbol::Int(*i), guard),
        Term::Constant(c) => Ok(Symbol::constant(c.clone())),
        Term::Str(s) => Ok(Symbol::Str(s.clone())),
        Term::Variable(v) => lookup(v).ok_or_else(|| EvalError::Unbound(v.clone())),
        Term::Function(name, args) => Ok(Symbol::Func(
            name.clone(),
            args.iter()
                .map(|a| eval_with(a, lookup, guard))
                .collect::<Result<_, _>>()?,
        )),
        Term::Arith(op, l, r) => arith(*op, eval_with(l, lookup, guard)?, eval_with(r, lookup, guard)?, guard),
        Term::Neg(inner) => negate(eval_with(inner, lookup, guard)?, guard),
        Term::Interval(..) => Err(EvalError::Interval),
    }
}

/// Evaluates a ground term: arithmetic is reduced, function symbols stay
/// symbolic.
pub fn eval_term(t: &Term) -> Result<Symbol> {
    eval_with(t, &|_| None, DEFAULT_INT_GUARD).map_err(|e| e.into_error(&Span::generated(), t))
}

/// Evaluates `atom` under `binding`.
pub fn instantiate_atom(atom: &Atom, binding: &BTreeMap<String, Symbol>, span: &Span) -> Result<GroundAtom> {
    let lookup = |v: &str| binding.get(v).cloned();
    let args = atom
        .args
        .iter()
        .map(|a| eval_with(a, &lookup, DEFAULT_INT_GUARD).map_err(|e| e.into_error(span, a)))
        .collect::<Result<_>>()?;
    Ok(GroundAtom {
        predicate: atom.predicate.clone(),
        sign: atom.sign,
        args,
    })
}

/// Total order used by comparison built-ins: integers, then
/// constants/functions, then strings.
fn compare(op: CmpOp, l: &Symbol, r: &Symbol) -> bool {
    match op {
        CmpOp::Eq => l == r,
        CmpOp::Ne => l != r,
        CmpOp::Lt => l < r,
        CmpOp::Le => l <= r,
        CmpOp::Gt => l > r,
        CmpOp::Ge => l >= r,
    }
}

// ---------------------------------------------------------------------------
// compiled patterns

#[derive(Clone, Debug)]
enum Pat {
    Const(Symbol),
    Var(usize),
    Func(String, Vec<Pat>),
    Arith(ArithOp, Box<Pat>, Box<Pat>),
    Neg(Box<Pat>),
    Interval(Box<Pat>, Box<Pat>),
}

type Slots = Vec<Option<Symbol>>;

impl Pat {
    fn compile(t: &Term, vars: &[String], guard: i64) -> Result<Pat, EvalError> {
        if t.is_ground() && !t.contains_interval() {
            return Ok(Pat::Const(eval_with(t, &|_| None, guard)?));
        }
        Ok(match t {
            Term::Variable(v) => Pat::Var(vars.iter().position(|x| x == v).expect("collected")),
            Term::Function(name, args) => Pat::Func(
                name.clone(),
                args.iter()
                    .map(|a| Pat::compile(a, vars, guard))
                    .collect::<Result<_, _>>()?,
            ),
            Term::Arith(op, l, r) => Pat::Arith(
                *op,
                Box::new(Pat::compile(l, vars, guard)?),
                Box::new(Pat::compile(r, vars, guard)?),
            ),
            Term::Neg(inner) => Pat::Neg(Box::new(Pat::compile(inner, vars, guard)?)),
            Term::Interval(l, r) => Pat::Interval(
                Box::new(Pat::compile(l, vars, guard)?),
                Box::new(Pat::compile(r, vars, guard)?),
            ),
            Term::Integer(_) | Term::Constant(_) | Term::Str(_) => Pat::Const(eval_with(t, &|_| None, guard)?),
        })
    }

    fn all_bound(&self, b: &Slots) -> bool {
        match self {
            Pat::Const(_) => true,
            Pat::Var(i) => b[*i].is_some(),
            Pat::Func(_, args) => args.iter().all(|a| a.all_bound(b)),
            Pat::Arith(_, l, r) | Pat::Interval(l, r) => l.all_bound(b) && r.all_bound(b),
            Pat::Neg(t) => t.all_bound(b),
        }
    }

    fn has_interval(&self) -> bool {
        match self {
            Pat::Interval(..) => true,
            Pat::Func(_, args) => args.iter().any(Pat::has_interval),
            Pat::Arith(_, l, r) => l.has_interval() || r.has_interval(),
            Pat::Neg(t) => t.has_interval(),
            _ => false,
        }
    }

    fn eval(&self, b: &Slots, guard: i64) -> Result<Symbol, EvalError> {
        match self {
            Pat::Const(s) => Ok(s.clone()),
            Pat::Var(i) => b[*i].clone().ok_or_else(|| EvalError::Unbound(format!("#{i}"))),
            Pat::Func(name, args) => Ok(Symbol::Func(
                name.clone(),
                args.iter().map(|a| a.eval(b, guard)).collect::<Result<_, _>>()?,
            )),
            Pat::Arith(op, l, r) => arith(*op, l.eval(b, guard)?, r.eval(b, guard)?, guard),
            Pat::Neg(t) => negate(t.eval(b, guard)?, guard),
            Pat::Interval(..) => Err(EvalError::Interval),
        }
    }

    fn bounds(l: &Pat, r: &Pat, b: &Slots, guard: i64) -> Result<(i64, i64), EvalError> {
        match (l.eval(b, guard)?, r.eval(b, guard)?) {
            (Symbol::Int(lo), Symbol::Int(hi)) => Ok((lo, hi)),
            (Symbol::Int(_), other) | (other, _) => Err(EvalError::NotInteger(other.to_string())),
        }
    }

    /// All values of the pattern, expanding intervals.
    fn expand(&self, b: &Slots, guard: i64) -> Result<Vec<Symbol>, EvalError> {
        if !self.has_interval() {
            return Ok(vec![self.eval(b, guard)?]);
        }
        match self {
            Pat::Interval(l, r) => {
                let (lo, hi) = Pat::bounds(l, r, b, guard)?;
                Ok((lo..=hi).map(Symbol::Int).collect())
            }
            Pat::Func(name, args) => {
                let parts = args.iter().map(|a| a.expand(b, guard)).collect::<Result<Vec<_>, _>>()?;
                Ok(cartesian(&parts)
                    .into_iter()
                    .map(|args| Symbol::Func(name.clone(), args))
                    .collect())
            }
            _ => Err(EvalError::Interval),
        }
    }
}

fn cartesian(parts: &[Vec<Symbol>]) -> Vec<Vec<Symbol>> {
    let mut out: Vec<Vec<Symbol>> = vec![Vec::new()];
    for part in parts {
        let mut next = Vec::with_capacity(out.len() * part.len());
        for prefix in &out {
            for v in part {
                let mut p = prefix.clone();
                p.push(v.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out
}

#[derive(Clone, Debug)]
struct CAtom {
    sign: Sign,
    predicate: String,
    args: Vec<Pat>,
}

impl CAtom {
    fn compile(a: &Atom, vars: &[String], guard: i64) -> Result<CAtom, EvalError> {
        Ok(CAtom {
            sign: a.sign,
            predicate: a.predicate.clone(),
            args: a
                .args
                .iter()
                .map(|t| Pat::compile(t, vars, guard))
                .collect::<Result<_, _>>()?,
        })
    }

    fn key(&self) -> PredKey {
        (self.predicate.clone(), self.sign, self.args.len())
    }

    fn all_bound(&self, b: &Slots) -> bool {
        self.args.iter().all(|a| a.all_bound(b))
    }

    fn bound_count(&self, b: &Slots) -> usize {
        self.args.iter().filter(|a| a.all_bound(b)).count()
    }

    fn eval(&self, b: &Slots, guard: i64) -> Result<GroundAtom, EvalError> {
        Ok(GroundAtom {
            predicate: self.predicate.clone(),
            sign: self.sign,
            args: self.args.iter().map(|a| a.eval(b, guard)).collect::<Result<_, _>>()?,
        })
    }

    fn expand(&self, b: &Slots, guard: i64) -> Result<Vec<GroundAtom>, EvalError> {
        let parts = self
            .args
            .iter()
            .map(|a| a.expand(b, guard))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(cartesian(&parts)
            .into_iter()
            .map(|args| GroundAtom {
                predicate: self.predicate.clone(),
                sign: self.sign,
                args,
            })
            .collect())
    }
}

type PredKey = (String, Sign, usize);

/// A set of ground atoms indexed by predicate, preserving insertion order.
#[derive(Clone, Debug, Default)]
pub struct AtomStore {
    set: HashSet<GroundAtom>,
    by_pred: HashMap<PredKey, Vec<GroundAtom>>,
    order: Vec<GroundAtom>,
}

impl AtomStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, atom: GroundAtom) -> bool {
        if self.set.contains(&atom) {
            return false;
        }
        self.set.insert(atom.clone());
        self.by_pred
            .entry((atom.predicate.clone(), atom.sign, atom.args.len()))
            .or_default()
            .push(atom.clone());
        self.order.push(atom);
        true
    }

    pub fn contains(&self, atom: &GroundAtom) -> bool {
        self.set.contains(atom)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroundAtom> {
        self.order.iter()
    }

    fn candidates(&self, key: &PredKey) -> &[GroundAtom] {
        self.by_pred.get(key).map_or(&[], Vec::as_slice)
    }
}

impl FromIterator<GroundAtom> for AtomStore {
    fn from_iter<I: IntoIterator<Item = GroundAtom>>(iter: I) -> Self {
        let mut s = AtomStore::new();
        for a in iter {
            s.insert(a);
        }
        s
    }
}

#[derive(Clone, Debug)]
struct CCmp {
    op: CmpOp,
    left: Pat,
    right: Pat,
}

/// A conjunction compiled against a fixed variable table.
#[derive(Clone, Debug)]
pub(crate) struct Query {
    vars: Vec<String>,
    pos: Vec<CAtom>,
    neg: Vec<CAtom>,
    cmps: Vec<CCmp>,
    guard: i64,
    span: Span,
}

struct JoinState {
    slots: Slots,
    trail: Vec<usize>,
    /// Arithmetic argument patterns met before their variables were bound.
    deferred: Vec<(Pat, Symbol)>,
}

impl JoinState {
    fn bind(&mut self, i: usize, v: Symbol) {
        self.slots[i] = Some(v);
        self.trail.push(i);
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let i = self.trail.pop().expect("len checked");
            self.slots[i] = None;
        }
    }

    fn unify(&mut self, p: &Pat, s: &Symbol, guard: i64) -> bool {
        match p {
            Pat::Const(c) => c == s,
            Pat::Var(i) => match &self.slots[*i] {
                Some(v) => v == s,
                None => {
                    self.bind(*i, s.clone());
                    true
                }
            },
            Pat::Func(name, args) => match s {
                Symbol::Func(n, a) if n == name && a.len() == args.len() => {
                    args.iter().zip(a).all(|(p, s)| self.unify(p, s, guard))
                }
                _ => false,
            },
            Pat::Arith(..) | Pat::Neg(_) | Pat::Interval(..) => {
                if p.all_bound(&self.slots) {
                    Self::check_value(p, s, &self.slots, guard)
                } else {
                    self.deferred.push((p.clone(), s.clone()));
                    true
                }
            }
        }
    }

    fn check_value(p: &Pat, s: &Symbol, slots: &Slots, guard: i64) -> bool {
        match p {
            Pat::Interval(l, r) => match (Pat::bounds(l, r, slots, guard), s) {
                (Ok((lo, hi)), Symbol::Int(v)) => lo <= *v && *v <= hi,
                _ => false,
            },
            _ => p.eval(slots, guard).is_ok_and(|v| &v == s),
        }
    }
}

impl Query {
    /// Compiles `body` with variable table `vars` (extended with any
    /// variables of `body` not already listed).
    pub(crate) fn new(vars: &[String], body: &[BodyElem], guard: i64, span: &Span) -> Result<Query> {
        let mut all = vars.to_vec();
        body.iter().for_each(|b| b.collect_vars(&mut all));
        let err = |e: EvalError, t: &dyn fmt::Display| e.into_error(span, t);
        let mut q = Query {
            vars: all,
            pos: Vec::new(),
            neg: Vec::new(),
            cmps: Vec::new(),
            guard,
            span: span.clone(),
        };
        for b in body {
            match b {
                BodyElem::Literal(l) => {
                    let c = CAtom::compile(&l.atom, &q.vars, guard).map_err(|e| err(e, &l.atom))?;
                    if l.negated {
                        q.neg.push(c);
                    } else {
                        q.pos.push(c);
                    }
                }
                BodyElem::Comparison(c) => q.cmps.push(CCmp {
                    op: c.op,
                    left: Pat::compile(&c.left, &q.vars, guard).map_err(|e| err(e, &c.left))?,
                    right: Pat::compile(&c.right, &q.vars, guard).map_err(|e| err(e, &c.right))?,
                }),
            }
        }
        Ok(q)
    }

    pub(crate) fn vars(&self) -> &[String] {
        &self.vars
    }

    fn eval_error(&self, e: EvalError) -> Error {
        Error::Eval {
            span: self.span.clone(),
            term: "rule instance".into(),
            message: e.message(),
        }
    }

    fn comparisons_hold(&self, slots: &Slots) -> Result<bool> {
        for c in &self.cmps {
            if !(c.left.all_bound(slots) && c.right.all_bound(slots)) {
                continue;
            }
            let l = match c.left.eval(slots, self.guard) {
                Ok(v) => v,
                Err(EvalError::Undefined(_)) => return Ok(false),
                Err(e) => return Err(self.eval_error(e)),
            };
            let r = match c.right.eval(slots, self.guard) {
                Ok(v) => v,
                Err(EvalError::Undefined(_)) => return Ok(false),
                Err(e) => return Err(self.eval_error(e)),
            };
            if !compare(c.op, &l, &r) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Enumerates every binding that satisfies the positive literals over
    /// `store` and the comparisons. When `seed` is given, positive literal
    /// `seed.0` is matched against `seed.1` only. Negative literals are
    /// checked against `negation_store` when given, and ignored otherwise.
    fn join(
        &self,
        store: &AtomStore,
        seed: Option<(usize, &AtomStore)>,
        negation_store: Option<&AtomStore>,
        emit: &mut dyn FnMut(&Slots) -> Result<()>,
    ) -> Result<()> {
        let mut st = JoinState {
            slots: vec![None; self.vars.len()],
            trail: Vec::new(),
            deferred: Vec::new(),
        };
        let mut remaining: Vec<usize> = (0..self.pos.len()).collect();
        self.join_rec(&mut st, &mut remaining, store, seed, negation_store, emit)
    }

    fn join_rec(
        &self,
        st: &mut JoinState,
        remaining: &mut Vec<usize>,
        store: &AtomStore,
        seed: Option<(usize, &AtomStore)>,
        negation_store: Option<&AtomStore>,
        emit: &mut dyn FnMut(&Slots) -> Result<()>,
    ) -> Result<()> {
        if remaining.is_empty() {
            for (p, s) in &st.deferred {
                if !JoinState::check_value(p, s, &st.slots, self.guard) {
                    return Ok(());
                }
            }
            if !self.comparisons_hold(&st.slots)? {
                return Ok(());
            }
            if let Some(ns) = negation_store {
                for n in &self.neg {
                    match n.eval(&st.slots, self.guard) {
                        Ok(a) if ns.contains(&a) => return Ok(()),
                        Ok(_) | Err(EvalError::Undefined(_)) => {}
                        Err(e) => return Err(self.eval_error(e)),
                    }
                }
            }
            return emit(&st.slots);
        }

        // seed literal first, then the most constrained remaining literal
        let pick = match seed {
            Some((i, _)) if remaining.contains(&i) => i,
            _ => *remaining
                .iter()
                .max_by_key(|&&i| {
                    let a = &self.pos[i];
                    let evaluable = a.args.iter().all(|p| match p {
                        Pat::Arith(..) | Pat::Neg(_) | Pat::Interval(..) => p.all_bound(&st.slots),
                        _ => true,
                    });
                    (evaluable, a.all_bound(&st.slots), a.bound_count(&st.slots))
                })
                .expect("non-empty"),
        };
        let at = remaining.iter().position(|&i| i == pick).expect("present");
        remaining.remove(at);

        let lit = &self.pos[pick];
        let source = match seed {
            Some((i, s)) if i == pick => s,
            _ => store,
        };
        let result = if lit.all_bound(&st.slots) && seed.is_none_or(|(i, _)| i != pick) {
            match lit.eval(&st.slots, self.guard) {
                Ok(g) if source.contains(&g) => self.after_match(st, remaining, store, seed, negation_store, emit),
                Ok(_) | Err(EvalError::Undefined(_)) => Ok(()),
                Err(e) => Err(self.eval_error(e)),
            }
        } else {
            let mut r = Ok(());
            for cand in source.candidates(&lit.key()) {
                let mark = st.trail.len();
                let deferred = st.deferred.len();
                let ok = lit.args.iter().zip(&cand.args).all(|(p, s)| st.unify(p, s, self.guard));
                if ok {
                    r = self.after_match(st, remaining, store, seed, negation_store, emit);
                }
                st.undo(mark);
                st.deferred.truncate(deferred);
                if r.is_err() {
                    break;
                }
            }
            r
        };
        remaining.insert(at, pick);
        result
    }

    fn after_match(
        &self,
        st: &mut JoinState,
        remaining: &mut Vec<usize>,
        store: &AtomStore,
        seed: Option<(usize, &AtomStore)>,
        negation_store: Option<&AtomStore>,
        emit: &mut dyn FnMut(&Slots) -> Result<()>,
    ) -> Result<()> {
        // prune early on comparisons whose operands are now known
        if !self.comparisons_hold(&st.slots)? {
            return Ok(());
        }
        self.join_rec(st, remaining, store, seed, negation_store, emit)
    }

    /// All bindings (as name → value maps) satisfying the conjunction, with
    /// the first positive literal matched against `seed` when given.
    pub(crate) fn solutions(
        &self,
        seed: Option<&GroundAtom>,
        store: &AtomStore,
    ) -> Result<Vec<BTreeMap<String, Symbol>>> {
        let seed_store: Option<AtomStore> = seed.map(|s| std::iter::once(s.clone()).collect());
        let mut out = Vec::new();
        let mut emit = |slots: &Slots| {
            out.push(
                self.vars
                    .iter()
                    .zip(slots)
                    .filter_map(|(n, v)| v.clone().map(|v| (n.clone(), v)))
                    .collect(),
            );
            Ok(())
        };
        self.join(store, seed_store.as_ref().map(|s| (0, s)), Some(store), &mut emit)?;
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// grounding

struct CompiledRule<'r> {
    index: usize,
    rule: &'r Rule,
    head: Option<CAtom>,
    query: Query,
}

impl<'r> CompiledRule<'r> {
    fn new(index: usize, rule: &'r Rule, guard: i64) -> Result<Self> {
        let vars = rule.vars();
        let query = Query::new(&vars, &rule.body, guard, &rule.span)?;
        let head = rule
            .head
            .as_ref()
            .map(|h| CAtom::compile(h, query.vars(), guard).map_err(|e| e.into_error(&rule.span, h)))
            .transpose()?;
        Ok(CompiledRule {
            index,
            rule,
            head,
            query,
        })
    }

    fn heads(&self, slots: &Slots) -> Result<Vec<GroundAtom>> {
        let Some(h) = &self.head else {
            return Ok(Vec::new());
        };
        match h.expand(slots, self.query.guard) {
            Ok(v) => Ok(v),
            Err(EvalError::Undefined(_)) => Ok(Vec::new()),
            Err(e) => Err(e.into_error(&self.rule.span, self.rule.head.as_ref().expect("head"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GroundOptions {
    /// Largest integer magnitude arithmetic and intervals may produce.
    pub int_guard: i64,
}

impl Default for GroundOptions {
    fn default() -> Self {
        GroundOptions {
            int_guard: DEFAULT_INT_GUARD,
        }
    }
}

/// Expands head intervals with ground endpoints into one rule per value.
/// Intervals whose endpoints depend on variables are left in place; the
/// grounder expands them once the body binds those variables.
pub fn expand_intervals(rule: &Rule) -> Result<Vec<Rule>> {
    let Some(head) = &rule.head else {
        return Ok(vec![rule.clone()]);
    };
    let expanded = expand_term_list(&head.args, &rule.span)?;
    Ok(expanded
        .into_iter()
        .map(|args| Rule {
            head: Some(Atom {
                sign: head.sign,
                predicate: head.predicate.clone(),
                args,
            }),
            body: rule.body.clone(),
            span: rule.span.clone(),
            trace: rule.trace.clone(),
        })
        .collect())
}

fn expand_term_list(args: &[Term], span: &Span) -> Result<Vec<Vec<Term>>> {
    let mut out: Vec<Vec<Term>> = vec![Vec::new()];
    for a in args {
        let options = expand_term(a, span)?;
        out = out
            .into_iter()
            .flat_map(|prefix| {
                options.iter().map(move |o| {
                    let mut p = prefix.clone();
                    p.push(o.clone());
                    p
                })
            })
            .collect();
    }
    Ok(out)
}

fn expand_term(t: &Term, span: &Span) -> Result<Vec<Term>> {
    match t {
        Term::Interval(l, r) if l.is_ground() && r.is_ground() => match (eval_term(l), eval_term(r)) {
            (Ok(Symbol::Int(lo)), Ok(Symbol::Int(hi))) => {
                if hi.saturating_sub(lo) > DEFAULT_INT_GUARD {
                    return Err(EvalError::Guard(DEFAULT_INT_GUARD).into_error(span, t));
                }
                Ok((lo..=hi).map(Term::Integer).collect())
            }
            _ => Err(Error::Eval {
                span: span.clone(),
                term: t.to_string(),
                message: "interval endpoints must be integers".into(),
            }),
        },
        Term::Function(name, args) => Ok(expand_term_list(args, span)?
            .into_iter()
            .map(|a| Term::Function(name.clone(), a))
            .collect()),
        other => Ok(vec![other.clone()]),
    }
}

/// Substitutes `consts` and grounds `rules`.
pub fn ground_program(rules: &[Rule], consts: &BTreeMap<String, Term>) -> Result<Vec<GroundRule>> {
    let rules: Vec<Rule> = rules.iter().map(|r| r.substitute(consts)).collect();
    ground_rules(&rules, GroundOptions::default())
}

/// Grounds already const-substituted rules.
pub fn ground_rules(rules: &[Rule], opts: GroundOptions) -> Result<Vec<GroundRule>> {
    let compiled = rules
        .iter()
        .enumerate()
        .map(|(i, r)| CompiledRule::new(i, r, opts.int_guard))
        .collect::<Result<Vec<_>>>()?;

    let base = derivable_base(&compiled)?;

    let mut out = Vec::new();
    for cr in &compiled {
        let mut emit = |slots: &Slots| -> Result<()> {
            let q = &cr.query;
            let mut negative = Vec::with_capacity(q.neg.len());
            for n in &q.neg {
                match n.eval(slots, q.guard) {
                    Ok(a) => negative.push(a),
                    // an undefined negated atom can never hold
                    Err(EvalError::Undefined(_)) => {}
                    Err(e) => return Err(q.eval_error(e)),
                }
            }
            let mut positive = Vec::with_capacity(q.pos.len());
            for p in &q.pos {
                positive.push(p.eval(slots, q.guard).map_err(|e| q.eval_error(e))?);
            }
            let binding: Vec<(String, Symbol)> = q
                .vars
                .iter()
                .zip(slots)
                .map(|(n, v)| (n.clone(), v.clone().expect("safe rule binds every variable")))
                .collect();
            let origin = Origin {
                rule: cr.index,
                binding,
            };
            if cr.head.is_none() {
                out.push(GroundRule {
                    head: None,
                    positive,
                    negative,
                    origin: Some(origin),
                });
            } else {
                for h in cr.heads(slots)? {
                    out.push(GroundRule {
                        head: Some(h),
                        positive: positive.clone(),
                        negative: negative.clone(),
                        origin: Some(origin.clone()),
                    });
                }
            }
            Ok(())
        };
        cr.query.join(&base, None, None, &mut emit)?;
    }

    for a in base.iter() {
        if a.sign == Sign::Negative {
            let twin = a.complement();
            if base.contains(&twin) {
                out.push(GroundRule {
                    head: None,
                    positive: vec![twin, a.clone()],
                    negative: Vec::new(),
                    origin: None,
                });
            }
        }
    }
    Ok(out)
}

/// Seminaive fixpoint of the rules with default negation ignored.
fn derivable_base(rules: &[CompiledRule<'_>]) -> Result<AtomStore> {
    let mut base = AtomStore::new();
    let mut delta = AtomStore::new();

    for cr in rules.iter().filter(|r| r.head.is_some() && r.query.pos.is_empty()) {
        let mut heads = Vec::new();
        cr.query.join(&base, None, None, &mut |slots| {
            heads.extend(cr.heads(slots)?);
            Ok(())
        })?;
        for h in heads {
            if base.insert(h.clone()) {
                delta.insert(h);
            }
        }
    }

    while !delta.is_empty() {
        let mut next = Vec::new();
        for cr in rules.iter().filter(|r| r.head.is_some()) {
            for (i, lit) in cr.query.pos.iter().enumerate() {
                if delta.candidates(&lit.key()).is_empty() {
                    continue;
                }
                cr.query.join(&base, Some((i, &delta)), None, &mut |slots| {
                    for h in cr.heads(slots)? {
                        if !base.contains(&h) {
                            next.push(h);
                        }
                    }
                    Ok(())
                })?;
            }
        }
        delta = AtomStore::new();
        for h in next {
            if base.insert(h.clone()) {
                delta.insert(h);
            }
        }
    }
    Ok(base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_source;

    fn ground(src: &str) -> Vec<GroundRule> {
        let p = parse_source(src, "t.lp").unwrap();
        ground_program(&p.rules, &p.consts).unwrap()
    }

    fn lines(rules: &[GroundRule]) -> Vec<String> {
        rules.iter().map(|r| r.to_string()).collect()
    }

    #[test]
    fn eval_arithmetic_and_symbols() {
        let t = crate::syntax::parse_term("3-1").unwrap();
        assert_eq!(eval_term(&t).unwrap(), Symbol::Int(2));
        let t = crate::syntax::parse_term("close(s1)").unwrap();
        assert_eq!(eval_term(&t).unwrap().to_string(), "close(s1)");
        let t = crate::syntax::parse_term("a+1").unwrap();
        assert!(matches!(eval_term(&t), Err(Error::Eval { .. })));
        let t = crate::syntax::parse_term("-7/2").unwrap();
        assert_eq!(eval_term(&t).unwrap(), Symbol::Int(-3));
    }

    #[test]
    fn fact_interval_expands() {
        assert_eq!(lines(&ground("time(0..2).")), ["time(0).", "time(1).", "time(2)."]);
        let p = parse_source("time(0..2).", "t.lp").unwrap();
        assert_eq!(expand_intervals(&p.rules[0]).unwrap().len(), 3);
    }

    #[test]
    fn bound_interval_expands() {
        let g = ground("plength(1). step(1..L) :- plength(L).");
        assert_eq!(lines(&g), ["plength(1).", "step(1) :- plength(1)."]);
    }

    #[test]
    fn empty_interval() {
        assert!(ground("q(2..1).").is_empty());
        let p = parse_source("q(2..1).", "t.lp").unwrap();
        assert!(expand_intervals(&p.rules[0]).unwrap().is_empty());
    }

    #[test]
    fn single_binding() {
        let g = ground("p(1). q(X) :- p(X).");
        assert_eq!(lines(&g), ["p(1).", "q(1) :- p(1)."]);
        assert_eq!(
            g[1].origin.as_ref().unwrap().binding,
            vec![("X".to_string(), Symbol::Int(1))]
        );
    }

    #[test]
    fn strong_negation_constraints() {
        let g = ground("h(f,1,0). -h(f,2,0). h(f,2,0) :- h(f,1,0). -h(f,1,0) :- h(f,1,0).");
        let constraints: Vec<_> = lines(&g).into_iter().filter(|l| l.starts_with(":-")).collect();
        assert_eq!(constraints, [":- h(f,2,0), -h(f,2,0).", ":- h(f,1,0), -h(f,1,0)."]);
    }

    #[test]
    fn arithmetic_in_body_with_late_binding() {
        let g = ground("step(1..2). h(a,0). h(F,I) :- h(F,I-1), step(I).");
        assert!(lines(&g).contains(&"h(a,2) :- h(a,1), step(2).".to_string()));
    }

    #[test]
    fn comparison_filters_instances() {
        let g = ground("d(1..3). p(X,Y) :- d(X), d(Y), X < Y.");
        assert_eq!(
            g.iter().filter(|r| r.head.as_ref().unwrap().predicate == "p").count(),
            3
        );
    }

    #[test]
    fn negative_literal_kept_and_not_required() {
        let g = ground("q(1). p(X) :- q(X), not r(X).");
        assert_eq!(lines(&g), ["q(1).", "p(1) :- q(1), not r(1)."]);
    }

    #[test]
    fn chain_with_constant() {
        let g = ground("#const n=3. p(1). p(X+1) :- p(X), X<=n.");
        let heads: Vec<_> = g.iter().map(|r| r.head.as_ref().unwrap().to_string()).collect();
        assert_eq!(heads, ["p(1)", "p(2)", "p(3)", "p(4)"]);
    }

    #[test]
    fn guard_stops_runaway_arithmetic() {
        let p = parse_source("p(1). p(X*2) :- p(X).", "t.lp").unwrap();
        assert!(matches!(
            ground_rules(&p.rules, GroundOptions { int_guard: 1000 }),
            Err(Error::Eval { .. })
        ));
    }

    #[test]
    fn origin_binding_reproduces_instance() {
        let src = "time(0..2). h(a,0). h(F,I) :- h(F,I-1), time(I), not blocked(I). \
                   :- h(a,2), time(2).";
        let p = parse_source(src, "t.lp").unwrap();
        for g in ground_program(&p.rules, &p.consts).unwrap() {
            let o = g.origin.as_ref().unwrap();
            let map: BTreeMap<_, _> = o.binding.iter().cloned().collect();
            let rule = &p.rules[o.rule];
            let pos: Vec<_> = rule
                .positive_body()
                .map(|a| instantiate_atom(a, &map, &rule.span).unwrap())
                .collect();
            assert_eq!(pos, g.positive);
        }
    }

    #[test]
    fn deterministic_output() {
        let src = "d(1..4). e(X,Y) :- d(X), d(Y), X != Y. f(X) :- e(X,_), not g(X).";
        assert_eq!(ground(src), ground(src));
    }

    #[test]
    fn query_with_seed() {
        let p = parse_source("p(X) :- o(surge,X), step(X).", "t.lp").unwrap();
        let r = &p.rules[0];
        let q = Query::new(&[], &r.body, DEFAULT_INT_GUARD, &r.span).unwrap();
        let store: AtomStore = [
            GroundAtom::new("step", vec![Symbol::Int(1)]),
            GroundAtom::new("step", vec![Symbol::Int(2)]),
        ]
        .into_iter()
        .collect();
        let seed = GroundAtom::new("o", vec![Symbol::constant("surge"), Symbol::Int(2)]);
        let sols = q.solutions(Some(&seed), &store).unwrap();
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0]["X"], Symbol::Int(2));
    }
}
