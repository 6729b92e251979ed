//! Stable-model enumeration for ground normal programs.
//!
//! Search is a depth-first split on atoms, pruned by completion-style unit
//! propagation and an unfounded-set check. Every total assignment reached
//! is re-verified against the reduct before it is reported.

use std::collections::{BTreeSet, HashMap};

use crate::ground::{GroundAtom, GroundRule};

/// A stable model: the set of true atoms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Model {
    /// 1-based position in enumeration order.
    pub index: usize,
    pub atoms: BTreeSet<GroundAtom>,
}

impl Model {
    pub fn contains(&self, atom: &GroundAtom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroundAtom> {
        self.atoms.iter()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// The Gelfond-Lifschitz reduct: rules blocked by `candidate` are dropped,
/// the remaining ones lose their negative bodies. Constraints are dropped.
pub fn compute_reduct(program: &[GroundRule], candidate: &BTreeSet<GroundAtom>) -> Vec<GroundRule> {
    program
        .iter()
        .filter(|r| r.head.is_some() && !r.negative.iter().any(|a| candidate.contains(a)))
        .map(|r| GroundRule {
            head: r.head.clone(),
            positive: r.positive.clone(),
            negative: Vec::new(),
            origin: r.origin.clone(),
        })
        .collect()
}

/// Least model of the positive parts of `program`'s non-constraint rules.
pub fn least_model(program: &[GroundRule]) -> BTreeSet<GroundAtom> {
    let mut index: HashMap<&GroundAtom, Vec<usize>> = HashMap::new();
    let mut missing: Vec<usize> = Vec::with_capacity(program.len());
    let mut queue: Vec<&GroundAtom> = Vec::new();
    let mut model: BTreeSet<GroundAtom> = BTreeSet::new();
    for (i, r) in program.iter().enumerate() {
        let Some(h) = &r.head else {
            missing.push(usize::MAX);
            continue;
        };
        let distinct: BTreeSet<&GroundAtom> = r.positive.iter().collect();
        missing.push(distinct.len());
        for a in distinct {
            index.entry(a).or_default().push(i);
        }
        if r.positive.is_empty() && model.insert(h.clone()) {
            queue.push(h);
        }
    }
    while let Some(a) = queue.pop() {
        for &i in index.get(a).map_or(&[][..], Vec::as_slice) {
            missing[i] -= 1;
            if missing[i] == 0 {
                let h = program[i].head.as_ref().expect("indexed rules have heads");
                if model.insert(h.clone()) {
                    queue.push(h);
                }
            }
        }
    }
    model
}

/// True when `candidate` is the least model of its own reduct and violates
/// no constraint.
pub fn is_stable(program: &[GroundRule], candidate: &BTreeSet<GroundAtom>) -> bool {
    let constraints_ok = program.iter().filter(|r| r.head.is_none()).all(|r| {
        !(r.positive.iter().all(|a| candidate.contains(a)) && !r.negative.iter().any(|a| candidate.contains(a)))
    });
    constraints_ok && least_model(&compute_reduct(program, candidate)) == *candidate
}

// ---------------------------------------------------------------------------
// search

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Val {
    Undef,
    True,
    False,
}

struct IRule {
    head: Option<usize>,
    pos: Vec<usize>,
    neg: Vec<usize>,
}

struct Solver {
    atoms: Vec<GroundAtom>,
    rules: Vec<IRule>,
    /// Rules whose body mentions the atom.
    occurs: Vec<Vec<usize>>,
    /// Rules with the atom as head.
    support: Vec<Vec<usize>>,
}

struct Conflict;

impl Solver {
    fn new(program: &[GroundRule]) -> Solver {
        let mut all: BTreeSet<&GroundAtom> = BTreeSet::new();
        for r in program {
            all.extend(r.head.iter());
            all.extend(r.positive.iter());
            all.extend(r.negative.iter());
        }
        let atoms: Vec<GroundAtom> = all.into_iter().cloned().collect();
        let id: HashMap<&GroundAtom, usize> = atoms.iter().enumerate().map(|(i, a)| (a, i)).collect();
        let n = atoms.len();
        let mut occurs = vec![Vec::new(); n];
        let mut support = vec![Vec::new(); n];
        let rules: Vec<IRule> = program
            .iter()
            .enumerate()
            .map(|(ri, r)| {
                let rule = IRule {
                    head: r.head.as_ref().map(|h| id[h]),
                    pos: r.positive.iter().map(|a| id[a]).collect(),
                    neg: r.negative.iter().map(|a| id[a]).collect(),
                };
                if let Some(h) = rule.head {
                    support[h].push(ri);
                }
                let mut seen: BTreeSet<usize> = BTreeSet::new();
                for &a in rule.pos.iter().chain(&rule.neg) {
                    if seen.insert(a) {
                        occurs[a].push(ri);
                    }
                }
                rule
            })
            .collect();
        Solver {
            atoms,
            rules,
            occurs,
            support,
        }
    }

    fn body_false(&self, r: &IRule, v: &[Val]) -> bool {
        r.pos.iter().any(|&a| v[a] == Val::False) || r.neg.iter().any(|&a| v[a] == Val::True)
    }

    fn body_true(&self, r: &IRule, v: &[Val]) -> bool {
        r.pos.iter().all(|&a| v[a] == Val::True) && r.neg.iter().all(|&a| v[a] == Val::False)
    }

    fn assign(v: &mut [Val], queue: &mut Vec<usize>, a: usize, val: Val) -> Result<(), Conflict> {
        match v[a] {
            Val::Undef => {
                v[a] = val;
                queue.push(a);
                Ok(())
            }
            cur if cur == val => Ok(()),
            _ => Err(Conflict),
        }
    }

    fn check_rule(&self, ri: usize, v: &mut [Val], queue: &mut Vec<usize>) -> Result<(), Conflict> {
        let r = &self.rules[ri];
        if self.body_false(r, v) {
            return Ok(());
        }
        if self.body_true(r, v) {
            return match r.head {
                Some(h) => Self::assign(v, queue, h, Val::True),
                None => Err(Conflict),
            };
        }
        let head_false = r.head.is_none_or(|h| v[h] == Val::False);
        if head_false {
            // body must not hold; if only one literal is open, refute it
            let mut open = r
                .pos
                .iter()
                .map(|&a| (a, Val::False))
                .chain(r.neg.iter().map(|&a| (a, Val::True)))
                .filter(|&(a, _)| v[a] == Val::Undef);
            let first = open.next();
            if let (Some((a, val)), None) = (first, open.next()) {
                // other occurrences of `a` in this body must agree
                Self::assign(v, queue, a, val)?;
            }
        }
        Ok(())
    }

    fn check_support(&self, a: usize, v: &mut [Val], queue: &mut Vec<usize>) -> Result<(), Conflict> {
        if v[a] == Val::False {
            return Ok(());
        }
        let mut live = self.support[a]
            .iter()
            .filter(|&&ri| !self.body_false(&self.rules[ri], v));
        match (live.next(), live.next()) {
            (None, _) => Self::assign(v, queue, a, Val::False),
            (Some(&ri), None) if v[a] == Val::True => {
                let r = &self.rules[ri];
                for &p in &r.pos {
                    Self::assign(v, queue, p, Val::True)?;
                }
                for &n in &r.neg {
                    Self::assign(v, queue, n, Val::False)?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn unit_propagate(&self, v: &mut [Val], mut queue: Vec<usize>) -> Result<(), Conflict> {
        while let Some(a) = queue.pop() {
            self.check_support(a, v, &mut queue)?;
            for &ri in &self.occurs[a] {
                self.check_rule(ri, v, &mut queue)?;
                if let Some(h) = self.rules[ri].head {
                    self.check_support(h, v, &mut queue)?;
                }
            }
            for &ri in &self.support[a] {
                self.check_rule(ri, v, &mut queue)?;
            }
        }
        Ok(())
    }

    /// Atoms that can still be derived from rules whose bodies are not yet
    /// false, without circular support. Everything else is unfounded.
    fn founded(&self, v: &[Val]) -> Vec<bool> {
        let n = self.atoms.len();
        let mut founded = vec![false; n];
        let mut missing: Vec<usize> = Vec::with_capacity(self.rules.len());
        let mut queue = Vec::new();
        for r in &self.rules {
            let blocked = r.head.is_none() || self.body_false(r, v);
            let m = if blocked { usize::MAX } else { r.pos.len() };
            missing.push(m);
            if m == 0 {
                let h = r.head.expect("unblocked rules have heads");
                if !founded[h] {
                    founded[h] = true;
                    queue.push(h);
                }
            }
        }
        while let Some(a) = queue.pop() {
            for &ri in &self.occurs[a] {
                if missing[ri] == usize::MAX {
                    continue;
                }
                // an atom may occur several times in one body
                let k = self.rules[ri].pos.iter().filter(|&&p| p == a).count();
                if k == 0 {
                    continue;
                }
                missing[ri] -= k;
                if missing[ri] == 0 {
                    let h = self.rules[ri].head.expect("unblocked rules have heads");
                    if !founded[h] {
                        founded[h] = true;
                        queue.push(h);
                    }
                }
            }
        }
        founded
    }

    fn propagate(&self, v: &mut [Val], queue: Vec<usize>) -> Result<(), Conflict> {
        self.unit_propagate(v, queue)?;
        loop {
            let founded = self.founded(v);
            let mut queue = Vec::new();
            for (a, ok) in founded.iter().enumerate() {
                if !ok {
                    Self::assign(v, &mut queue, a, Val::False)?;
                }
            }
            if queue.is_empty() {
                return Ok(());
            }
            self.unit_propagate(v, queue)?;
        }
    }

    fn enumerate(&self, program: &[GroundRule], limit: usize) -> Vec<Model> {
        let n = self.atoms.len();
        let mut models = Vec::new();
        let mut stack: Vec<(Vec<Val>, Vec<usize>)> = Vec::new();

        let mut root = vec![Val::Undef; n];
        let mut queue = Vec::new();
        for ri in 0..self.rules.len() {
            if self.check_rule(ri, &mut root, &mut queue).is_err() {
                return models;
            }
        }
        for a in 0..n {
            if self.check_support(a, &mut root, &mut queue).is_err() {
                return models;
            }
        }
        stack.push((root, queue));

        while let Some((mut v, queue)) = stack.pop() {
            if self.propagate(&mut v, queue).is_err() {
                continue;
            }
            match v.iter().position(|&x| x == Val::Undef) {
                Some(a) => {
                    let mut t = v.clone();
                    t[a] = Val::True;
                    stack.push((t, vec![a]));
                    v[a] = Val::False;
                    stack.push((v, vec![a]));
                }
                None => {
                    let atoms: BTreeSet<GroundAtom> = (0..n)
                        .filter(|&a| v[a] == Val::True)
                        .map(|a| self.atoms[a].clone())
                        .collect();
                    if is_stable(program, &atoms) {
                        models.push(Model {
                            index: models.len() + 1,
                            atoms,
                        });
                        if limit != 0 && models.len() >= limit {
                            break;
                        }
                    }
                }
            }
        }
        models
    }
}

/// Enumerates stable models of `program`; `limit == 0` means all of them.
/// The order is deterministic for a given program.
pub fn enumerate_models(program: &[GroundRule], limit: usize) -> Vec<Model> {
    Solver::new(program).enumerate(program, limit)
}
