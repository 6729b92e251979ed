//! Reference implementations and fixtures shared by the integration tests.
//!
//! Nothing here calls the library's reduct, least-model or search code; the
//! oracles are deliberately naive.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::PathBuf;

use lptrace::ground::{GroundAtom, GroundRule};
use lptrace::pipeline::Source;
use lptrace::syntax::{parse_source, Program};
use rand::Rng;

pub const ORACLE_ATOM_LIMIT: usize = 16;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

pub fn corpus_file(name: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Every `.lp` file in the corpus, sorted by name.
pub fn corpus() -> Vec<(String, String)> {
    let mut names: Vec<String> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".lp"))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|n| {
            let text = corpus_file(&n);
            (n, text)
        })
        .collect()
}

pub fn parse(name: &str, text: &str) -> Program {
    parse_source(text, name).unwrap_or_else(|e| panic!("{e}"))
}

pub fn source(name: &str, text: &str) -> Source {
    Source::new(name, text)
}

/// Removes every `%!` annotation, leaving the plain program.
pub fn strip_annotations(text: &str) -> String {
    text.lines()
        .map(|l| match l.find("%!") {
            Some(i) => &l[..i],
            None => l,
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub type AtomSets = BTreeSet<BTreeSet<String>>;

pub fn as_sets<'a, I>(models: I) -> AtomSets
where
    I: IntoIterator<Item = &'a lptrace::solve::Model>,
{
    models
        .into_iter()
        .map(|m| m.iter().map(|a| a.to_string()).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// stable models by exhaustive search

fn reduct_least_model(program: &[GroundRule], m: &BTreeSet<GroundAtom>) -> BTreeSet<GroundAtom> {
    // naive immediate-consequence iteration over the reduct
    let mut out: BTreeSet<GroundAtom> = BTreeSet::new();
    loop {
        let mut changed = false;
        for r in program {
            let Some(h) = &r.head else { continue };
            if r.negative.iter().any(|a| m.contains(a)) {
                continue;
            }
            if r.positive.iter().all(|a| out.contains(a)) && out.insert(h.clone()) {
                changed = true;
            }
        }
        if !changed {
            return out;
        }
    }
}

fn violates_constraint(program: &[GroundRule], m: &BTreeSet<GroundAtom>) -> bool {
    program
        .iter()
        .filter(|r| r.head.is_none())
        .any(|r| r.positive.iter().all(|a| m.contains(a)) && !r.negative.iter().any(|a| m.contains(a)))
}

/// All stable models, testing every subset of the atoms in rule heads.
/// Refuses programs with more than [`ORACLE_ATOM_LIMIT`] such atoms.
pub fn brute_force_stable_models(program: &[GroundRule]) -> Result<AtomSets, String> {
    let atoms: Vec<GroundAtom> = program
        .iter()
        .filter_map(|r| r.head.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if atoms.len() > ORACLE_ATOM_LIMIT {
        return Err(format!("{} atoms exceed the oracle limit", atoms.len()));
    }
    let mut out = AtomSets::new();
    for mask in 0u32..(1 << atoms.len()) {
        let m: BTreeSet<GroundAtom> = atoms
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, a)| a.clone())
            .collect();
        if !violates_constraint(program, &m) && reduct_least_model(program, &m) == m {
            out.insert(m.iter().map(|a| a.to_string()).collect());
        }
    }
    Ok(out)
}

/// Counter-based least model of a reduct, with the program indexed once.
struct Reducts<'a> {
    program: &'a [GroundRule],
    occurs: BTreeMap<&'a GroundAtom, Vec<usize>>,
}

impl<'a> Reducts<'a> {
    fn new(program: &'a [GroundRule]) -> Self {
        let mut occurs: BTreeMap<&GroundAtom, Vec<usize>> = BTreeMap::new();
        for (i, r) in program.iter().enumerate() {
            for a in &r.positive {
                occurs.entry(a).or_default().push(i);
            }
        }
        Reducts { program, occurs }
    }

    /// Least model of the reduct of the program with respect to `m`.
    fn gamma(&self, m: &BTreeSet<GroundAtom>) -> BTreeSet<GroundAtom> {
        let mut missing: Vec<usize> = self.program.iter().map(|r| r.positive.len()).collect();
        let mut out: BTreeSet<GroundAtom> = BTreeSet::new();
        let mut queue: Vec<&GroundAtom> = Vec::new();
        let live = |r: &GroundRule| r.head.is_some() && !r.negative.iter().any(|a| m.contains(a));
        for r in self.program {
            if live(r) && r.positive.is_empty() {
                let h = r.head.as_ref().unwrap();
                if out.insert(h.clone()) {
                    queue.push(h);
                }
            }
        }
        while let Some(a) = queue.pop() {
            for &i in self.occurs.get(a).into_iter().flatten() {
                missing[i] -= 1;
                let r = &self.program[i];
                if missing[i] == 0 && live(r) {
                    let h = r.head.as_ref().unwrap();
                    if out.insert(h.clone()) {
                        queue.push(h);
                    }
                }
            }
        }
        out
    }
}

/// Stable models by branching on negated atoms. Every stable model `m`
/// with `lower ⊆ m ⊆ upper` also satisfies `gamma(upper) ⊆ m ⊆ gamma(lower)`,
/// so each branch narrows both bounds to a fixpoint (the well-founded model
/// at the root) before choosing the next undecided negated atom.
pub fn stable_models_by_negated_guess(program: &[GroundRule]) -> Result<AtomSets, String> {
    let red = Reducts::new(program);
    let negated: BTreeSet<GroundAtom> = program.iter().flat_map(|r| r.negative.iter().cloned()).collect();
    let mut out = AtomSets::new();
    let mut stack = vec![(BTreeSet::new(), BTreeSet::new())];
    let mut branches = 0usize;
    while let Some((yes, no)) = stack.pop() {
        branches += 1;
        if branches > 1 << 20 {
            return Err("search exceeds the oracle limit".into());
        }
        let (yes, no): (BTreeSet<GroundAtom>, BTreeSet<GroundAtom>) = (yes, no);
        let mut lower: BTreeSet<GroundAtom> = yes.clone();
        let mut upper: BTreeSet<GroundAtom>;
        loop {
            upper = red.gamma(&lower).into_iter().filter(|a| !no.contains(a)).collect();
            let next: BTreeSet<GroundAtom> = red.gamma(&upper).into_iter().chain(yes.iter().cloned()).collect();
            if next == lower {
                break;
            }
            lower = next;
        }
        if !lower.is_subset(&upper) {
            continue;
        }
        // a constraint whose body already holds under both bounds
        let dead = program
            .iter()
            .filter(|r| r.head.is_none())
            .any(|r| r.positive.iter().all(|a| lower.contains(a)) && !r.negative.iter().any(|a| upper.contains(a)));
        if dead {
            continue;
        }
        match negated.iter().find(|a| upper.contains(*a) && !lower.contains(*a)) {
            None => {
                let m = red.gamma(&lower);
                if red.gamma(&m) == m && !violates_constraint(program, &m) {
                    out.insert(m.iter().map(|a| a.to_string()).collect());
                }
            }
            Some(a) => {
                let mut no2 = no.clone();
                no2.insert(a.clone());
                let mut yes2 = yes;
                yes2.insert(a.clone());
                stack.push((lower.clone(), no2));
                stack.push((yes2, no));
            }
        }
    }
    Ok(out)
}

/// Closed form for the chain program: every link contributes one
/// alternative per label.
pub fn count_explanations_chain(n: u32, labels_per_atom: u64) -> Result<u64, String> {
    let mut total: u64 = 1;
    for _ in 0..n {
        total = total
            .checked_mul(labels_per_atom)
            .filter(|t| *t <= 1 << 62)
            .ok_or_else(|| "count exceeds 2^62".to_string())?;
    }
    Ok(total)
}

/// The chain program with `labels` trace annotations per atom.
pub fn chain_program(n: u32, labels: usize) -> String {
    let mut s = format!("p(1).\np(X+1) :- p(X), X<={n}.\n");
    for i in 0..labels {
        let tag = (b'a' + i as u8) as char;
        s.push_str(&format!("%!trace {{\"{tag}(%)\",X}} p(X).\n"));
    }
    s
}

// ---------------------------------------------------------------------------
// random programs

pub fn atom(i: usize) -> GroundAtom {
    GroundAtom::new(format!("a{i}"), vec![])
}

/// A random ground normal program over at most `max_atoms` atoms.
pub fn random_ground_program(rng: &mut impl Rng, max_atoms: usize, max_rules: usize, negation: f64) -> Vec<GroundRule> {
    let n = rng.gen_range(1..=max_atoms);
    let rules = rng.gen_range(1..=max_rules);
    (0..rules)
        .map(|_| {
            let head = (!rng.gen_bool(0.1)).then(|| atom(rng.gen_range(0..n)));
            let len = rng.gen_range(0..=3);
            let mut positive = Vec::new();
            let mut negative = Vec::new();
            for _ in 0..len {
                let a = atom(rng.gen_range(0..n));
                if rng.gen_bool(negation) {
                    negative.push(a);
                } else {
                    positive.push(a);
                }
            }
            GroundRule {
                head,
                positive,
                negative,
                origin: None,
            }
        })
        .collect()
}

/// A random safe, function-free non-ground program over constants `a`, `b`.
pub fn random_program_text(rng: &mut impl Rng) -> String {
    const PREDS: [(&str, usize); 4] = [("p", 1), ("q", 1), ("r", 2), ("s", 0)];
    const CONSTS: [&str; 2] = ["a", "b"];
    const VARS: [&str; 2] = ["X", "Y"];
    let mut out = String::new();
    out.push_str("d(a). d(b).\n");
    let term = |rng: &mut dyn rand::RngCore, vars: bool| -> String {
        if vars && rng.gen_bool(0.6) {
            VARS[rng.gen_range(0..2)].to_string()
        } else {
            CONSTS[rng.gen_range(0..2)].to_string()
        }
    };
    let rules = rng.gen_range(2..=7);
    for _ in 0..rules {
        let (hp, ha) = PREDS[rng.gen_range(0..PREDS.len())];
        let is_constraint = rng.gen_bool(0.1);
        let head_args: Vec<String> = (0..ha).map(|_| term(rng, true)).collect();
        let mut body: Vec<String> = Vec::new();
        for _ in 0..rng.gen_range(0..=2) {
            let (bp, ba) = PREDS[rng.gen_range(0..PREDS.len())];
            let args: Vec<String> = (0..ba).map(|_| term(rng, true)).collect();
            let lit = if args.is_empty() {
                bp.to_string()
            } else {
                format!("{bp}({})", args.join(","))
            };
            if rng.gen_bool(0.3) {
                body.push(format!("not {lit}"));
            } else {
                body.push(lit);
            }
        }
        if rng.gen_bool(0.2) {
            body.push(format!("X != {}", CONSTS[rng.gen_range(0..2)]));
        }
        // bind every variable through the domain predicate
        let mut vars: Vec<&str> = Vec::new();
        let all = format!("{} {}", head_args.join(" "), body.join(" "));
        for v in VARS {
            if all.split(|c: char| !c.is_alphanumeric()).any(|t| t == v) {
                vars.push(v);
            }
        }
        for v in vars {
            body.insert(0, format!("d({v})"));
        }
        let head = if is_constraint {
            String::new()
        } else if head_args.is_empty() {
            hp.to_string()
        } else {
            format!("{hp}({})", head_args.join(","))
        };
        if body.is_empty() {
            if head.is_empty() {
                continue;
            }
            out.push_str(&format!("{head}.\n"));
        } else {
            out.push_str(&format!("{head} :- {}.\n", body.join(", ")));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// naive grounding by full substitution

/// Grounds `program` by substituting every constant of the program for
/// every variable. Only function-free programs with `=`/`!=` comparisons
/// are supported.
pub fn naive_ground(program: &Program) -> Vec<GroundRule> {
    use lptrace::ground::Symbol;
    use lptrace::syntax::{BodyElem, CmpOp, Term};

    let mut universe: BTreeSet<String> = BTreeSet::new();
    fn consts(t: &Term, out: &mut BTreeSet<String>) {
        match t {
            Term::Constant(c) => {
                out.insert(c.clone());
            }
            Term::Function(_, args) => args.iter().for_each(|a| consts(a, out)),
            _ => {}
        }
    }
    for r in &program.rules {
        for a in r.head.iter().chain(r.body.iter().filter_map(|b| match b {
            BodyElem::Literal(l) => Some(&l.atom),
            _ => None,
        })) {
            a.args.iter().for_each(|t| consts(t, &mut universe));
        }
    }
    let universe: Vec<String> = universe.into_iter().collect();

    let ground_atom = |a: &lptrace::syntax::Atom, env: &BTreeMap<String, String>| GroundAtom {
        predicate: a.predicate.clone(),
        sign: a.sign,
        args: a
            .args
            .iter()
            .map(|t| match t {
                Term::Variable(v) => Symbol::constant(env[v].clone()),
                Term::Constant(c) => Symbol::constant(c.clone()),
                other => panic!("naive grounder cannot handle {other}"),
            })
            .collect(),
    };
    let value = |t: &Term, env: &BTreeMap<String, String>| match t {
        Term::Variable(v) => env[v].clone(),
        Term::Constant(c) => c.clone(),
        other => panic!("naive grounder cannot compare {other}"),
    };

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for r in &program.rules {
        let vars = r.vars();
        let total = universe.len().pow(vars.len() as u32);
        for mut code in 0..total {
            let mut env = BTreeMap::new();
            for v in &vars {
                env.insert(v.clone(), universe[code % universe.len()].clone());
                code /= universe.len();
            }
            let mut ok = true;
            let mut positive = Vec::new();
            let mut negative = Vec::new();
            for b in &r.body {
                match b {
                    BodyElem::Literal(l) if l.negated => negative.push(ground_atom(&l.atom, &env)),
                    BodyElem::Literal(l) => positive.push(ground_atom(&l.atom, &env)),
                    BodyElem::Comparison(c) => {
                        let (x, y) = (value(&c.left, &env), value(&c.right, &env));
                        ok &= match c.op {
                            CmpOp::Eq => x == y,
                            CmpOp::Ne => x != y,
                            _ => panic!("naive grounder supports = and != only"),
                        };
                    }
                }
            }
            if ok {
                let g = GroundRule {
                    head: r.head.as_ref().map(|h| ground_atom(h, &env)),
                    positive,
                    negative,
                    origin: None,
                };
                if seen.insert(g.to_string()) {
                    out.push(g);
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// reading rendered text back

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReadNode {
    pub label: String,
    pub children: Vec<ReadNode>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReadAnswer {
    pub number: usize,
    /// Explained atom, declared count, alternatives.
    pub atoms: Vec<(String, usize, Vec<Vec<ReadNode>>)>,
}

fn attach(forest: &mut Vec<ReadNode>, depth: usize, node: ReadNode) {
    if depth == 0 {
        forest.push(node);
    } else {
        let parent = forest.last_mut().expect("child without parent");
        attach(&mut parent.children, depth - 1, node);
    }
}

/// Parses the text format produced by `render_text` (without models).
pub fn read_text(text: &str) -> Vec<ReadAnswer> {
    let mut answers: Vec<ReadAnswer> = Vec::new();
    for line in text.lines() {
        if let Some(n) = line.strip_prefix("Answer: ") {
            answers.push(ReadAnswer {
                number: n.parse().unwrap(),
                atoms: Vec::new(),
            });
        } else if let Some(rest) = line.strip_prefix(">> ") {
            let (atom, count) = rest.split_once('\t').expect("tab after atom");
            let count = count.trim_matches(|c| c == '[' || c == ']').parse().unwrap();
            answers
                .last_mut()
                .unwrap()
                .atoms
                .push((atom.to_string(), count, Vec::new()));
        } else if line == "  *" {
            answers.last_mut().unwrap().atoms.last_mut().unwrap().2.push(Vec::new());
        } else if let Some(body) = line.strip_prefix("  ") {
            let mut depth = 0;
            let mut rest = body;
            while let Some(r) = rest.strip_prefix("|  ") {
                depth += 1;
                rest = r;
            }
            let label = rest.strip_prefix("|__").expect("node marker").to_string();
            let forest = answers
                .last_mut()
                .unwrap()
                .atoms
                .last_mut()
                .unwrap()
                .2
                .last_mut()
                .unwrap();
            attach(
                forest,
                depth,
                ReadNode {
                    label,
                    children: Vec::new(),
                },
            );
        } else {
            assert!(line.is_empty(), "unexpected line {line:?}");
        }
    }
    answers
}

pub fn to_read(forest: &[lptrace::explain::ExplanationNode]) -> Vec<ReadNode> {
    forest
        .iter()
        .map(|n| ReadNode {
            label: n.label.to_string(),
            children: to_read(&n.children),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// the diagnosis program

/// The annotated diagnosis program with its horizon moved to `horizon`.
/// Exogenous actions are confined to step 1 and only the last state is
/// explained, so the answers stay those of horizon 1.
pub fn p1_with_horizon(horizon: u32) -> String {
    let text = corpus_file("p1_annotated.lp");
    let mut out = text
        .replace("plength(1).", &format!("plength({horizon})."))
        .replace(": step(J)}", &format!(": J = {horizon}}}"));
    out.push_str("\n:- o(Z,I), exog(Z), I > 1.\n");
    out
}

/// The exogenous actions at step 1 in `model`, e.g. `["break", "surge"]`.
pub fn diagnosis(model: &lptrace::solve::Model) -> Vec<String> {
    let mut out: Vec<String> = model
        .iter()
        .filter(|a| a.predicate == "o" && a.args.len() == 2 && a.args[1].to_string() == "1")
        .map(|a| a.args[0].to_string())
        .filter(|z| z == "break" || z == "surge")
        .collect();
    out.sort();
    out
}
