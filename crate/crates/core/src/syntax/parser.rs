use super::ast::*;
use super::lexer::{tokenize, tokenize_at, Token, TokenKind};
use crate::error::{Error, Result, Span};

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
    end: Span,
    anon: usize,
}

type PResult<T> = Result<T>;

impl<'t> Parser<'t> {
    fn new(tokens: &'t [Token], end: Span) -> Self {
        Parser {
            tokens,
            pos: 0,
            end,
            anon: 0,
        }
    }

    fn peek(&self) -> Option<&'t TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, k: usize) -> Option<&'t TokenKind> {
        self.tokens.get(self.pos + k).map(|t| &t.kind)
    }

    fn span(&self) -> Span {
        self.tokens
            .get(self.pos)
            .map_or_else(|| self.end.clone(), |t| t.span.clone())
    }

    fn bump(&mut self) -> Option<&'t Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: &TokenKind, what: &str) -> PResult<()> {
        if self.eat(kind) {
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn unexpected(&self, expected: &str) -> Error {
        let found = self
            .peek()
            .map_or_else(|| "end of input".to_string(), TokenKind::describe);
        Error::Syntax {
            span: self.span(),
            message: format!("expected {expected}, found {found}"),
        }
    }

    fn unsupported(&self, construct: &str) -> Error {
        Error::Unsupported {
            span: self.span(),
            construct: construct.to_string(),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    // ---- terms ----

    fn term(&mut self) -> PResult<Term> {
        let left = self.additive()?;
        if self.eat(&TokenKind::DotDot) {
            let right = self.additive()?;
            return Ok(Term::Interval(Box::new(left), Box::new(right)));
        }
        Ok(left)
    }

    fn additive(&mut self) -> PResult<Term> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Plus) => ArithOp::Add,
                Some(TokenKind::Minus) => ArithOp::Sub,
                _ => return Ok(left),
            };
            self.bump();
            let right = self.multiplicative()?;
            left = Term::Arith(op, Box::new(left), Box::new(right));
        }
    }

    fn multiplicative(&mut self) -> PResult<Term> {
        let mut left = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Star) => {
                    if self.peek_at(1) == Some(&TokenKind::Star) {
                        return Err(self.unsupported("exponentiation `**`"));
                    }
                    ArithOp::Mul
                }
                Some(TokenKind::Slash) => ArithOp::Div,
                Some(TokenKind::Backslash) => ArithOp::Mod,
                _ => return Ok(left),
            };
            self.bump();
            let right = self.unary()?;
            left = Term::Arith(op, Box::new(left), Box::new(right));
        }
    }

    fn unary(&mut self) -> PResult<Term> {
        if self.eat(&TokenKind::Minus) {
            let inner = self.unary()?;
            return Ok(match inner {
                Term::Integer(i) => Term::Integer(i.checked_neg().ok_or_else(|| Error::Syntax {
                    span: self.span(),
                    message: "integer out of range".into(),
                })?),
                other => Term::Neg(Box::new(other)),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Term> {
        let span = self.span();
        let Some(tok) = self.bump() else {
            return Err(self.unexpected("a term"));
        };
        match &tok.kind {
            TokenKind::Integer(i) => Ok(Term::Integer(*i)),
            TokenKind::Str(s) => Ok(Term::Str(s.clone())),
            TokenKind::Variable(v) => {
                if v == "_" {
                    self.anon += 1;
                    Ok(Term::Variable(format!("_anon{}", self.anon - 1)))
                } else {
                    Ok(Term::Variable(v.clone()))
                }
            }
            TokenKind::Ident(name) => {
                if name == "not" {
                    return Err(Error::Syntax {
                        span,
                        message: "unexpected `not`".into(),
                    });
                }
                if self.eat(&TokenKind::LParen) {
                    let args = self.term_list(&TokenKind::RParen)?;
                    if args.is_empty() {
                        return Err(Error::Syntax {
                            span,
                            message: format!("empty argument list for `{name}`"),
                        });
                    }
                    Ok(Term::Function(name.clone(), args))
                } else {
                    Ok(Term::Constant(name.clone()))
                }
            }
            TokenKind::LParen => {
                let inner = self.term()?;
                if self.peek() == Some(&TokenKind::Comma) {
                    return Err(self.unsupported("tuple terms"));
                }
                if self.peek() == Some(&TokenKind::Semicolon) {
                    return Err(self.unsupported("pooling"));
                }
                self.expect(&TokenKind::RParen, "`)`")?;
                Ok(inner)
            }
            TokenKind::Directive(d) => Err(Error::Unsupported {
                span,
                construct: format!("`#{d}` in a term"),
            }),
            TokenKind::At => Err(Error::Unsupported {
                span,
                construct: "external functions `@f`".into(),
            }),
            _ => {
                self.pos -= 1;
                Err(self.unexpected("a term"))
            }
        }
    }

    fn term_list(&mut self, close: &TokenKind) -> PResult<Vec<Term>> {
        let mut out = Vec::new();
        if self.eat(close) {
            return Ok(out);
        }
        loop {
            out.push(self.term()?);
            if self.eat(&TokenKind::Comma) {
                continue;
            }
            if self.peek() == Some(&TokenKind::Semicolon) {
                return Err(self.unsupported("pooling"));
            }
            self.expect(close, "`,` or closing bracket")?;
            return Ok(out);
        }
    }

    // ---- atoms and bodies ----

    fn term_to_atom(term: Term, span: &Span) -> PResult<Atom> {
        match term {
            Term::Constant(name) => Ok(Atom::new(name, vec![])),
            Term::Function(name, args) => Ok(Atom::new(name, args)),
            Term::Neg(inner) => Ok(Self::term_to_atom(*inner, span)?.negate_sign()),
            other => Err(Error::Syntax {
                span: span.clone(),
                message: format!("`{other}` is not an atom"),
            }),
        }
    }

    fn atom(&mut self) -> PResult<Atom> {
        let span = self.span();
        let term = self.term()?;
        Self::term_to_atom(term, &span)
    }

    fn cmp_op(&self) -> Option<CmpOp> {
        Some(match self.peek()? {
            TokenKind::Eq => CmpOp::Eq,
            TokenKind::Ne => CmpOp::Ne,
            TokenKind::Lt => CmpOp::Lt,
            TokenKind::Le => CmpOp::Le,
            TokenKind::Gt => CmpOp::Gt,
            TokenKind::Ge => CmpOp::Ge,
            _ => return None,
        })
    }

    fn body_elem(&mut self) -> PResult<BodyElem> {
        let span = self.span();
        match self.peek() {
            Some(TokenKind::LBrace) => return Err(self.unsupported("choice or aggregate element")),
            Some(TokenKind::Directive(d)) => return Err(self.unsupported(&format!("aggregate `#{d}`"))),
            _ => {}
        }
        let mut negations = 0;
        while self.peek() == Some(&TokenKind::Ident("not".into())) {
            self.bump();
            negations += 1;
        }
        if negations > 1 {
            return Err(Error::Unsupported {
                span,
                construct: "double default negation".into(),
            });
        }
        let left = self.term()?;
        if let Some(op) = self.cmp_op() {
            if negations > 0 {
                return Err(Error::Unsupported {
                    span,
                    construct: "negated comparison".into(),
                });
            }
            self.bump();
            let right = self.term()?;
            return Ok(BodyElem::Comparison(Comparison { op, left, right }));
        }
        if self.peek() == Some(&TokenKind::Colon) {
            return Err(self.unsupported("conditional literal in rule body"));
        }
        let atom = Self::term_to_atom(left, &span)?;
        Ok(BodyElem::Literal(Literal {
            atom,
            negated: negations == 1,
        }))
    }

    fn body(&mut self, stop: &[TokenKind]) -> PResult<Vec<BodyElem>> {
        let mut out = Vec::new();
        loop {
            out.push(self.body_elem()?);
            match self.peek() {
                Some(TokenKind::Comma) => {
                    self.bump();
                }
                Some(TokenKind::Semicolon) => return Err(self.unsupported("`;` in rule body")),
                Some(k) if stop.contains(k) => return Ok(out),
                None if stop.is_empty() => return Ok(out),
                _ => return Err(self.unexpected("`,` or end of body")),
            }
        }
    }

    // ---- statements ----

    fn rule(&mut self) -> PResult<Rule> {
        let span = self.span();
        let head = match self.peek() {
            Some(TokenKind::If) => None,
            Some(TokenKind::WeakIf) => return Err(self.unsupported("weak constraint")),
            Some(TokenKind::LBrace) => return Err(self.unsupported("choice rule")),
            Some(TokenKind::Directive(d)) => return Err(self.unsupported(&format!("aggregate `#{d}` in head"))),
            _ => Some(self.atom()?),
        };
        match self.peek() {
            Some(TokenKind::Semicolon) | Some(TokenKind::Pipe) => return Err(self.unsupported("disjunctive head")),
            Some(TokenKind::Colon) => return Err(self.unsupported("conditional head")),
            _ => {}
        }
        let body = if self.eat(&TokenKind::If) {
            if self.peek() == Some(&TokenKind::Dot) {
                Vec::new()
            } else {
                self.body(&[TokenKind::Dot])?
            }
        } else {
            Vec::new()
        };
        self.expect(&TokenKind::Dot, "`.`")?;
        if head.is_none() && body.is_empty() {
            return Err(Error::Syntax {
                span,
                message: "empty constraint".into(),
            });
        }
        let rule = Rule {
            head,
            body,
            span,
            trace: None,
        };
        check_supported_intervals(&rule)?;
        check_safety(rule.head.as_ref(), &rule.body, false, &rule.span)?;
        Ok(rule)
    }

    fn directive(&mut self, name: &str, program: &mut Program) -> PResult<()> {
        let span = self.span();
        self.bump();
        match name {
            "const" => {
                let Some(TokenKind::Ident(cname)) = self.peek() else {
                    return Err(self.unexpected("constant name"));
                };
                let cname = cname.clone();
                self.bump();
                self.expect(&TokenKind::Eq, "`=`")?;
                let value = self.term()?;
                if !value.is_ground() || value.contains_interval() {
                    return Err(Error::Syntax {
                        span,
                        message: format!("value of constant `{cname}` must be ground"),
                    });
                }
                // `#const n=1. [default]`-style modifiers are not supported
                self.expect(&TokenKind::Dot, "`.`")?;
                program.consts.entry(cname).or_insert(value);
                Ok(())
            }
            "show" => {
                // projection has no effect on explanations; skip the statement
                while let Some(k) = self.peek() {
                    self.bump();
                    if *k == TokenKind::Dot {
                        return Ok(());
                    }
                }
                Err(self.unexpected("`.`"))
            }
            "minimize" | "maximize" | "minimise" | "maximise" => Err(Error::Unsupported {
                span,
                construct: format!("optimization statement `#{name}`"),
            }),
            other => Err(Error::Unsupported {
                span,
                construct: format!("directive `#{other}`"),
            }),
        }
    }

    fn program(&mut self) -> PResult<Program> {
        let mut program = Program::default();
        let mut pending: Option<(LabelTemplate, Span)> = None;
        while !self.at_end() {
            let tok = &self.tokens[self.pos];
            match &tok.kind {
                TokenKind::Annotation(body) => {
                    let ann = parse_annotation_body(body, &tok.span)?;
                    self.bump();
                    if let Some((_, span)) = pending.take() {
                        return Err(Error::AnnotationBinding { span });
                    }
                    if let AnnotationKind::TraceRule(t) = &ann.kind {
                        pending = Some((t.clone(), ann.span.clone()));
                    }
                    program.annotations.push(ann);
                }
                TokenKind::Directive(name) => {
                    if let Some((_, span)) = pending.take() {
                        return Err(Error::AnnotationBinding { span });
                    }
                    let name = name.clone();
                    self.directive(&name, &mut program)?;
                }
                _ => {
                    let mut rule = self.rule()?;
                    if let Some((template, _)) = pending.take() {
                        rule.trace = Some(template);
                    }
                    program.rules.push(rule);
                }
            }
        }
        if let Some((_, span)) = pending {
            return Err(Error::AnnotationBinding { span });
        }
        Ok(program)
    }
}

impl Atom {
    fn negate_sign(mut self) -> Atom {
        self.sign = match self.sign {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        };
        self
    }
}

fn check_supported_intervals(rule: &Rule) -> Result<()> {
    for b in &rule.body {
        let has = match b {
            BodyElem::Literal(l) => l.atom.args.iter().any(Term::contains_interval),
            BodyElem::Comparison(c) => c.left.contains_interval() || c.right.contains_interval(),
        };
        if has {
            return Err(Error::Unsupported {
                span: rule.span.clone(),
                construct: "interval in rule body".into(),
            });
        }
    }
    Ok(())
}

/// Every variable of the head, of negated literals and of comparisons must
/// occur outside arithmetic in some positive body literal. With
/// `head_binds`, the head itself counts as positive (annotation heads are
/// matched against ground atoms).
pub(crate) fn check_safety(head: Option<&Atom>, body: &[BodyElem], head_binds: bool, span: &Span) -> Result<()> {
    let mut bound = Vec::new();
    if head_binds {
        if let Some(h) = head {
            h.collect_plain_vars(&mut bound);
        }
    }
    body.iter()
        .filter_map(BodyElem::as_positive)
        .for_each(|a| a.collect_plain_vars(&mut bound));

    let mut all = Vec::new();
    if let Some(h) = head {
        h.collect_vars(&mut all);
    }
    body.iter().for_each(|b| b.collect_vars(&mut all));
    match all.into_iter().find(|v| !bound.contains(v)) {
        Some(var) => Err(Error::Safety {
            span: span.clone(),
            var,
        }),
        None => Ok(()),
    }
}

fn end_span(tokens: &[Token], file: &str) -> Span {
    tokens.last().map_or_else(|| Span::new(file, 1, 1), |t| t.span.clone())
}

/// Parses a token stream produced by [`tokenize`].
pub fn parse_program(tokens: &[Token]) -> Result<Program> {
    let end = end_span(tokens, "<input>");
    Parser::new(tokens, end).program()
}

/// Tokenizes and parses one source file.
pub fn parse_source(source: &str, file: &str) -> Result<Program> {
    let tokens = tokenize(source, file)?;
    let end = end_span(&tokens, file);
    Parser::new(&tokens, end).program()
}

/// Parses a single `%!` annotation line.
pub fn parse_annotation(line: &str) -> Result<Annotation> {
    let origin = Span::new("<annotation>", 1, 1);
    let trimmed = line.trim_start();
    let Some(body) = trimmed.strip_prefix("%!") else {
        return Err(Error::Annotation {
            span: origin,
            message: "annotation must start with `%!`".into(),
        });
    };
    parse_annotation_body(body.trim_end_matches(['\r', '\n']), &origin)
}

/// Parses a standalone term, e.g. a `-c name=value` override.
pub fn parse_term(text: &str) -> Result<Term> {
    let tokens = tokenize(text, "<term>")?;
    let mut p = Parser::new(&tokens, end_span(&tokens, "<term>"));
    let t = p.term()?;
    if !p.at_end() {
        return Err(p.unexpected("end of term"));
    }
    Ok(t)
}

fn parse_annotation_body(body: &str, span: &Span) -> Result<Annotation> {
    // the body starts right after the two-character marker
    let origin = Span {
        file: span.file.clone(),
        line: span.line,
        column: span.column + 2,
    };
    let tokens = tokenize_at(body, origin.clone())?;
    let mut p = Parser::new(&tokens, end_span(&tokens, &span.file));
    let keyword = match p.peek() {
        Some(TokenKind::Ident(k)) => k.clone(),
        _ => {
            return Err(Error::Annotation {
                span: span.clone(),
                message: "missing annotation keyword".into(),
            })
        }
    };
    p.bump();
    let kind = match keyword.as_str() {
        "trace_rule" => {
            let template = label_template(&mut p, span)?;
            p.eat(&TokenKind::Dot);
            AnnotationKind::TraceRule(template)
        }
        "trace" => {
            let template = label_template(&mut p, span)?;
            let head = p.atom()?;
            let condition = if p.eat(&TokenKind::Colon) {
                p.body(&[TokenKind::Dot])?
            } else {
                Vec::new()
            };
            if !p.at_end() {
                p.expect(&TokenKind::Dot, "`.`")?;
            }
            AnnotationKind::TraceAtom {
                template,
                head,
                condition,
            }
        }
        "show_trace" => {
            p.expect(&TokenKind::LBrace, "`{`")?;
            let head = p.atom()?;
            let condition = if p.eat(&TokenKind::Colon) {
                p.body(&[TokenKind::RBrace])?
            } else {
                Vec::new()
            };
            p.expect(&TokenKind::RBrace, "`}`")?;
            if !p.at_end() {
                p.expect(&TokenKind::Dot, "`.`")?;
            }
            AnnotationKind::ShowTrace { head, condition }
        }
        other => {
            return Err(Error::Annotation {
                span: span.clone(),
                message: format!("unknown annotation `{other}`"),
            })
        }
    };
    if !p.at_end() {
        return Err(p.unexpected("end of annotation"));
    }
    match &kind {
        AnnotationKind::TraceAtom {
            template,
            head,
            condition,
        } => {
            check_safety(Some(head), condition, true, span)?;
            check_label_vars(template, Some(head), condition, span)?;
        }
        AnnotationKind::ShowTrace { head, condition } => {
            check_safety(Some(head), condition, true, span)?;
        }
        AnnotationKind::TraceRule(_) => {}
    }
    Ok(Annotation {
        kind,
        span: span.clone(),
    })
}

fn label_template(p: &mut Parser<'_>, span: &Span) -> Result<LabelTemplate> {
    p.expect(&TokenKind::LBrace, "`{`")?;
    let text = match p.peek() {
        Some(TokenKind::Str(s)) => s.clone(),
        _ => {
            return Err(Error::Annotation {
                span: p.span(),
                message: "the first argument must be a quoted string".into(),
            })
        }
    };
    p.bump();
    let mut vars = Vec::new();
    while p.eat(&TokenKind::Comma) {
        match p.peek() {
            Some(TokenKind::Variable(v)) if v != "_" => {
                vars.push(v.clone());
                p.bump();
            }
            _ => {
                return Err(Error::Annotation {
                    span: p.span(),
                    message: "label arguments after the text must be variables".into(),
                })
            }
        }
    }
    p.expect(&TokenKind::RBrace, "`}`")?;
    let placeholders = LabelTemplate::placeholder_count(&text);
    if placeholders != vars.len() {
        return Err(Error::AnnotationArity {
            span: span.clone(),
            placeholders,
            vars: vars.len(),
        });
    }
    Ok(LabelTemplate { text, vars })
}

fn check_label_vars(template: &LabelTemplate, head: Option<&Atom>, body: &[BodyElem], span: &Span) -> Result<()> {
    let mut known = Vec::new();
    if let Some(h) = head {
        h.collect_vars(&mut known);
    }
    body.iter().for_each(|b| b.collect_vars(&mut known));
    match template.vars.iter().find(|v| !known.contains(v)) {
        Some(v) => Err(Error::Annotation {
            span: span.clone(),
            message: format!("label variable {v} does not occur in the annotated atom"),
        }),
        None => Ok(()),
    }
}

/// Parses a `name=value` constant override.
pub fn parse_const_override(text: &str) -> Result<(String, Term)> {
    let span = Span::new("<command line>", 1, 1);
    let Some((name, value)) = text.split_once('=') else {
        return Err(Error::Syntax {
            span,
            message: format!("expected NAME=VALUE, got `{text}`"),
        });
    };
    let name = name.trim();
    if name.is_empty() || !name.starts_with(|c: char| c.is_lowercase()) {
        return Err(Error::Syntax {
            span,
            message: format!("invalid constant name `{name}`"),
        });
    }
    let value = parse_term(value.trim())?;
    if !value.is_ground() {
        return Err(Error::Syntax {
            span,
            message: format!("value of constant `{name}` must be ground"),
        });
    }
    Ok((name.to_string(), value))
}
