use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

/// A position in an input file, 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub file: Arc<str>,
    pub line: u32,
    pub column: u32,
}

impl Span {
    pub fn new(file: impl Into<Arc<str>>, line: u32, column: u32) -> Self {
        Span {
            file: file.into(),
            line,
            column,
        }
    }

    /// Placeholder location for items synthesized by the toolchain itself.
    pub fn generated() -> Self {
        Span::new("<generated>", 0, 0)
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{span}: lexical error: {message}")]
    Lex { span: Span, message: String },

    #[error("{span}: syntax error: {message}")]
    Syntax { span: Span, message: String },

    #[error("{span}: unsupported construct: {construct}")]
    Unsupported { span: Span, construct: String },

    #[error("{span}: annotation error: {message}")]
    Annotation { span: Span, message: String },

    #[error("{span}: trace_rule annotation is not followed by a rule")]
    AnnotationBinding { span: Span },

    #[error("{span}: label has {placeholders} placeholder(s) but {vars} variable(s)")]
    AnnotationArity {
        span: Span,
        placeholders: usize,
        vars: usize,
    },

    #[error("{span}: unsafe variable {var}")]
    Safety { span: Span, var: String },

    #[error("{span}: cannot evaluate {term}: {message}")]
    Eval { span: Span, term: String, message: String },

    #[error("{span}: translation error: {message}")]
    Translation { span: Span, message: String },

    #[error("no fired rule supports {atom}")]
    NoSupport { atom: String },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn span(&self) -> Option<&Span> {
        match self {
            Error::Lex { span, .. }
            | Error::Syntax { span, .. }
            | Error::Unsupported { span, .. }
            | Error::Annotation { span, .. }
            | Error::AnnotationBinding { span }
            | Error::AnnotationArity { span, .. }
            | Error::Safety { span, .. }
            | Error::Eval { span, .. }
            | Error::Translation { span, .. } => Some(span),
            Error::NoSupport { .. } | Error::Internal(_) | Error::Io { .. } => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
