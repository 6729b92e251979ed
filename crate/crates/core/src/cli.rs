//! Command-line front end.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::error::Error;
use crate::pipeline::{self, Options, Source};
use crate::render::{self, Format, RenderOptions};
use crate::solve::enumerate_models;
use crate::syntax::{parse_const_override, Term};

pub const EXIT_OK: i32 = 0;
pub const EXIT_UNSAT: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    #[default]
    Text,
    Structured,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DumpArg {
    Ground,
    Translated,
}

/// Explain the answer sets of an annotated logic program.
#[derive(Debug, Parser)]
#[command(name = "lptrace", version)]
pub struct Args {
    /// Input files, concatenated in order; `-` reads standard input.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,

    /// Number of answer sets to compute (0 = all).
    #[arg(short = 'n', long = "models", default_value_t = 0)]
    pub models: usize,

    /// Label every unlabelled rule with its own head.
    #[arg(long)]
    pub auto_trace: bool,

    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    pub format: FormatArg,

    /// Override a `#const`, e.g. `-c n=10`.
    #[arg(short = 'c', long = "const", value_name = "NAME=VALUE")]
    pub consts: Vec<String>,

    /// Keep at most K explanations per atom.
    #[arg(long, value_name = "K", value_parser = clap::value_parser!(u64).range(1..))]
    pub max_expls: Option<u64>,

    /// Print an intermediate program and exit.
    #[arg(long, value_enum)]
    pub dump: Option<DumpArg>,

    /// Print each answer set before its explanations.
    #[arg(long)]
    pub show_model: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dump {
    Ground,
    Translated,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub models: usize,
    pub auto_trace: bool,
    pub format: Format,
    pub consts: BTreeMap<String, Term>,
    pub max_expls: Option<usize>,
    pub dump: Option<Dump>,
    pub show_model: bool,
}

impl RunConfig {
    pub fn new(inputs: Vec<PathBuf>) -> Self {
        RunConfig {
            inputs,
            models: 0,
            auto_trace: false,
            format: Format::Text,
            consts: BTreeMap::new(),
            max_expls: None,
            dump: None,
            show_model: false,
        }
    }
}

impl TryFrom<Args> for RunConfig {
    type Error = Error;

    fn try_from(a: Args) -> Result<Self, Error> {
        let mut consts = BTreeMap::new();
        for c in &a.consts {
            let (name, value) = parse_const_override(c)?;
            consts.insert(name, value);
        }
        Ok(RunConfig {
            inputs: a.inputs,
            models: a.models,
            auto_trace: a.auto_trace,
            format: match a.format {
                FormatArg::Text => Format::Text,
                FormatArg::Structured => Format::Structured,
            },
            consts,
            max_expls: a.max_expls.map(|k| k as usize),
            dump: a.dump.map(|d| match d {
                DumpArg::Ground => Dump::Ground,
                DumpArg::Translated => Dump::Translated,
            }),
            show_model: a.show_model,
        })
    }
}

fn read_inputs(paths: &[PathBuf], stdin: &mut dyn Read) -> Result<Vec<Source>, Error> {
    let mut out = Vec::new();
    for p in paths {
        if p.as_os_str() == "-" {
            let mut text = String::new();
            stdin.read_to_string(&mut text).map_err(|source| Error::Io {
                path: p.clone(),
                source,
            })?;
            out.push(Source::new("<stdin>", text));
        } else {
            let text = std::fs::read_to_string(p).map_err(|source| Error::Io {
                path: p.clone(),
                source,
            })?;
            out.push(Source::new(p.display().to_string(), text));
        }
    }
    Ok(out)
}

/// Output text and exit status of a run; nothing is written on error.
fn execute(config: &RunConfig, stdin: &mut dyn Read) -> Result<(String, i32), Error> {
    let sources = read_inputs(&config.inputs, stdin)?;
    let program = pipeline::parse_sources(&sources)?;
    let opts = Options {
        models: config.models,
        auto_trace: config.auto_trace,
        consts: config.consts.clone(),
        max_expls: config.max_expls,
    };
    let tp = pipeline::prepare(&program, &opts)?;
    match config.dump {
        Some(Dump::Translated) => return Ok((pipeline::dump_translated(&tp), EXIT_OK)),
        Some(Dump::Ground) => return Ok((pipeline::dump_ground(&tp)?, EXIT_OK)),
        None => {}
    }
    let ground = pipeline::ground_traced(&tp)?;
    let models = enumerate_models(&ground, opts.models);
    let answers = pipeline::explain_models(&tp, &models, opts.max_expls)?;
    let render_opts = RenderOptions {
        format: config.format,
        show_model: config.show_model,
    };
    if answers.is_empty() {
        let text = match config.format {
            Format::Text => "UNSATISFIABLE\n".to_string(),
            Format::Structured => render::render(&answers, render_opts),
        };
        return Ok((text, EXIT_UNSAT));
    }
    Ok((render::render(&answers, render_opts), EXIT_OK))
}

/// Runs the tool and returns its exit status.
pub fn run(config: &RunConfig, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match execute(config, stdin) {
        Ok((text, code)) => {
            if out.write_all(text.as_bytes()).and_then(|_| out.flush()).is_err() {
                return EXIT_ERROR;
            }
            code
        }
        Err(e) => {
            let _ = writeln!(err, "lptrace: {e}");
            EXIT_ERROR
        }
    }
}

/// Parses `args` (including the program name) and runs.
pub fn main_with<I, T>(args: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match RunConfig::try_from(args) {
        Ok(config) => run(&config, stdin, out, err),
        Err(e) => {
            let _ = writeln!(err, "lptrace: {e}");
            EXIT_ERROR
        }
    }
}
