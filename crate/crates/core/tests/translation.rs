mod common;

use std::collections::BTreeMap;

use common::{as_sets, corpus, parse, strip_annotations};
use lptrace::explain::build_causes_table;
use lptrace::ground::ground_rules;
use lptrace::pipeline::{self, plain_models, stripped_models, Options};
use lptrace::solve::enumerate_models;
use lptrace::translate::{strip_translation, translate_program, FIRED_PREFIX};
use lptrace::Error;

const SMALL: &str = "%!trace_rule {\"p %\",X}
p(X) :- q(X,Y), not r(Y).
q(1,2).
:- r(1).
%!show_trace {p(X)}.
";

#[test]
fn translated_text() {
    let tp = translate_program(&parse("t.lp", SMALL)).unwrap();
    assert_eq!(
        tp.to_string(),
        "fired_1(X,Y) :- holds_q(X,Y), not holds_r(Y).
holds_p(A0) :- fired_1(A0,E0).
fired_2(1,2).
holds_q(A0,A1) :- fired_2(A0,A1).
:- holds_r(1).
show_all_p(X) :- holds_p(X).
"
    );
    assert_eq!(tp.metas[0].extra_vars, ["Y"]);
    assert!(tp.metas[1].extra_vars.is_empty());
}

#[test]
fn rule_ids_follow_source_order() {
    for (name, text) in corpus() {
        let p = parse(&name, &text).with_consts(&BTreeMap::new());
        let a = translate_program(&p).unwrap();
        let b = translate_program(&p).unwrap();
        assert_eq!(a.to_string(), b.to_string(), "{name}");
        let headed = p.rules.iter().filter(|r| r.head.is_some()).count();
        let ids: Vec<usize> = a.metas.iter().map(|m| m.rule_id).collect();
        assert_eq!(ids, (1..=headed).collect::<Vec<_>>(), "{name}");
    }
}

#[test]
fn constraint_with_label_is_rejected() {
    let p = parse("t.lp", "%!trace_rule {\"never\"}\n:- p.\np :- q.");
    let e = translate_program(&p).unwrap_err();
    assert!(matches!(e, Error::Translation { .. }), "{e}");
    assert!(e.to_string().contains("t.lp:2:1"), "{e}");
}

#[test]
fn label_variable_must_occur() {
    let p = parse("t.lp", "%!trace_rule {\"% and %\",X,Z}\np(X) :- q(X).\nq(1).");
    assert!(matches!(translate_program(&p), Err(Error::Translation { .. })));
}

#[test]
fn stripped_models_equal_plain_models() {
    for (name, text) in corpus() {
        let p = parse(&name, &text);
        let plain = parse(&name, &strip_annotations(&text));
        let want = as_sets(&plain_models(&plain, &BTreeMap::new(), 0).unwrap());
        assert_eq!(
            as_sets(&stripped_models(&p, &Options::default()).unwrap()),
            want,
            "{name}"
        );
    }
}

#[test]
fn const_override_applies_before_translation() {
    let text = common::corpus_file("chain.lp");
    let p = parse("chain.lp", &text);
    let mut opts = Options::default();
    opts.consts.insert("n".into(), lptrace::syntax::Term::Integer(5));
    let plain = parse("chain.lp", &strip_annotations(&text));
    assert_eq!(
        as_sets(&stripped_models(&p, &opts).unwrap()),
        as_sets(&plain_models(&plain, &opts.consts, 0).unwrap())
    );
}

#[test]
fn every_fired_atom_is_a_supported_rule_instance() {
    for (name, text) in corpus() {
        let p = parse(&name, &text);
        let tp = pipeline::prepare(&p, &Options::default()).unwrap();
        let ground = ground_rules(&tp.rules, Default::default()).unwrap();
        for m in enumerate_models(&ground, 0) {
            let stripped = strip_translation(&m);
            let table = build_causes_table(&m, &tp).unwrap();
            let fired = m.iter().filter(|a| a.predicate.starts_with(FIRED_PREFIX)).count();
            assert_eq!(table.len(), fired, "{name}");
            for row in &table.rows {
                assert!(stripped.contains(&row.fired_head), "{name}: {}", row.fired_head);
                for b in &row.fired_body {
                    assert!(stripped.contains(b), "{name}: {b}");
                }
            }
            // every atom of the answer set is the head of some row
            for a in stripped.iter() {
                assert!(table.rows_for(a).next().is_some(), "{name}: {a} has no support");
            }
        }
    }
}

#[test]
fn annotations_do_not_change_answer_sets() {
    for (name, text) in corpus() {
        let with = stripped_models(&parse(&name, &text), &Options::default()).unwrap();
        let without = stripped_models(&parse(&name, &strip_annotations(&text)), &Options::default()).unwrap();
        assert_eq!(as_sets(&with), as_sets(&without), "{name}");
    }
}
