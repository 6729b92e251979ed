//! parse → translate → ground → solve → explain, as library calls.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::explain::{explain_model, Answer};
use crate::ground::{ground_rules, GroundOptions, GroundRule};
use crate::solve::{enumerate_models, Model};
use crate::syntax::{parse_source, Program, Term};
use crate::translate::{auto_trace, strip_translation, translate_program, TracedProgram};

/// A named chunk of program text.
#[derive(Clone, Debug)]
pub struct Source {
    pub name: String,
    pub text: String,
}

impl Source {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Source {
            name: name.into(),
            text: text.into(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Options {
    /// Number of models to compute; 0 means all.
    pub models: usize,
    pub auto_trace: bool,
    /// Overrides for `#const` definitions.
    pub consts: BTreeMap<String, Term>,
    pub max_expls: Option<usize>,
}

/// Parses and concatenates `sources` in order.
pub fn parse_sources(sources: &[Source]) -> Result<Program> {
    let mut program = Program::default();
    for s in sources {
        program.extend(parse_source(&s.text, &s.name)?);
    }
    Ok(program)
}

/// Substitutes constants and translates, applying auto-trace if asked.
pub fn prepare(program: &Program, opts: &Options) -> Result<TracedProgram> {
    let tp = translate_program(&program.with_consts(&opts.consts))?;
    Ok(if opts.auto_trace { auto_trace(tp) } else { tp })
}

pub fn ground_traced(tp: &TracedProgram) -> Result<Vec<GroundRule>> {
    ground_rules(&tp.rules, GroundOptions::default())
}

/// Explains each model of the translated program.
pub fn explain_models(tp: &TracedProgram, models: &[Model], max_expls: Option<usize>) -> Result<Vec<Answer>> {
    models
        .iter()
        .map(|m| {
            Ok(Answer {
                number: m.index,
                model: strip_translation(m),
                explained: explain_model(m, tp, max_expls)?,
            })
        })
        .collect()
}

/// The whole pipeline over already parsed input.
pub fn run_program(program: &Program, opts: &Options) -> Result<Vec<Answer>> {
    let tp = prepare(program, opts)?;
    let ground = ground_traced(&tp)?;
    let models = enumerate_models(&ground, opts.models);
    explain_models(&tp, &models, opts.max_expls)
}

pub fn run_sources(sources: &[Source], opts: &Options) -> Result<Vec<Answer>> {
    run_program(&parse_sources(sources)?, opts)
}

/// Stable models of `program` itself, without translation; annotations are
/// ignored.
pub fn plain_models(program: &Program, consts: &BTreeMap<String, Term>, limit: usize) -> Result<Vec<Model>> {
    let p = program.with_consts(consts);
    let ground = ground_rules(&p.rules, GroundOptions::default())?;
    Ok(enumerate_models(&ground, limit))
}

/// Stable models of the translated program, mapped back to the original
/// signature.
pub fn stripped_models(program: &Program, opts: &Options) -> Result<Vec<Model>> {
    let tp = prepare(program, opts)?;
    let ground = ground_traced(&tp)?;
    Ok(enumerate_models(&ground, opts.models)
        .iter()
        .map(strip_translation)
        .collect())
}

/// The ground translated program, one rule per line.
pub fn dump_ground(tp: &TracedProgram) -> Result<String> {
    Ok(ground_traced(tp)?.iter().map(|r| format!("{r}\n")).collect())
}

pub fn dump_translated(tp: &TracedProgram) -> String {
    tp.to_string()
}
