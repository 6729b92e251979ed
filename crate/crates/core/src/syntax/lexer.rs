use std::sync::Arc;

use crate::error::{Error, Result, Span};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TokenKind {
    /// Lowercase-initial identifier; `not` is lexed as an identifier.
    Ident(String),
    Variable(String),
    Integer(i64),
    Str(String),
    /// `#name`
    Directive(String),
    /// Body of a `%!` line, verbatim, without the marker.
    Annotation(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Dot,
    DotDot,
    If,
    WeakIf,
    Colon,
    Semicolon,
    Pipe,
    Plus,
    Minus,
    Star,
    Slash,
    Backslash,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    At,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) | TokenKind::Variable(s) => format!("`{s}`"),
            TokenKind::Integer(i) => format!("`{i}`"),
            TokenKind::Str(_) => "string".into(),
            TokenKind::Directive(d) => format!("`#{d}`"),
            TokenKind::Annotation(_) => "annotation".into(),
            other => format!("`{}`", other.punct()),
        }
    }

    fn punct(&self) -> &'static str {
        match self {
            TokenKind::LParen => "(",
            TokenKind::RParen => ")",
            TokenKind::LBrace => "{",
            TokenKind::RBrace => "}",
            TokenKind::LBracket => "[",
            TokenKind::RBracket => "]",
            TokenKind::Comma => ",",
            TokenKind::Dot => ".",
            TokenKind::DotDot => "..",
            TokenKind::If => ":-",
            TokenKind::WeakIf => ":~",
            TokenKind::Colon => ":",
            TokenKind::Semicolon => ";",
            TokenKind::Pipe => "|",
            TokenKind::Plus => "+",
            TokenKind::Minus => "-",
            TokenKind::Star => "*",
            TokenKind::Slash => "/",
            TokenKind::Backslash => "\\",
            TokenKind::Eq => "=",
            TokenKind::Ne => "!=",
            TokenKind::Lt => "<",
            TokenKind::Le => "<=",
            TokenKind::Gt => ">",
            TokenKind::Ge => ">=",
            TokenKind::At => "@",
            _ => "?",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    file: Arc<str>,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn offset(&mut self) -> usize {
        self.chars.peek().map_or(self.src.len(), |&(i, _)| i)
    }

    fn span(&self) -> Span {
        Span {
            file: self.file.clone(),
            line: self.line,
            column: self.col,
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let start = self.offset();
        while self.peek().is_some_and(&pred) {
            self.bump();
        }
        let end = self.offset();
        &self.src[start..end]
    }

    fn rest_of_line(&mut self) -> &'a str {
        self.take_while(|c| c != '\n')
    }

    fn string(&mut self, span: &Span) -> Result<String> {
        let mut out = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => {
                    return Err(Error::Lex {
                        span: span.clone(),
                        message: "unterminated string literal".into(),
                    })
                }
                Some('"') => return Ok(out),
                Some('\\') => match self.bump() {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    Some('n') => out.push('\n'),
                    Some(c) => {
                        out.push('\\');
                        out.push(c);
                    }
                    None => {
                        return Err(Error::Lex {
                            span: span.clone(),
                            message: "unterminated string literal".into(),
                        })
                    }
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn block_comment(&mut self, span: &Span) -> Result<()> {
        loop {
            match self.bump() {
                None => {
                    return Err(Error::Lex {
                        span: span.clone(),
                        message: "unterminated block comment".into(),
                    })
                }
                Some('*') if self.peek() == Some('%') => {
                    self.bump();
                    return Ok(());
                }
                Some(_) => {}
            }
        }
    }

    fn next_token(&mut self) -> Result<Option<Token>> {
        loop {
            match self.peek() {
                None => return Ok(None),
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('%') => {
                    let span = self.span();
                    self.bump();
                    match self.peek() {
                        Some('!') => {
                            self.bump();
                            let body = self.rest_of_line().trim_end_matches('\r').to_string();
                            return Ok(Some(Token {
                                kind: TokenKind::Annotation(body),
                                span,
                            }));
                        }
                        Some('*') => {
                            self.bump();
                            self.block_comment(&span)?;
                        }
                        _ => {
                            self.rest_of_line();
                        }
                    }
                }
                Some(_) => break,
            }
        }

        let span = self.span();
        let c = self.bump().expect("peeked");
        let kind = match c {
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            '{' => TokenKind::LBrace,
            '}' => TokenKind::RBrace,
            '[' => TokenKind::LBracket,
            ']' => TokenKind::RBracket,
            ',' => TokenKind::Comma,
            ';' => TokenKind::Semicolon,
            '|' => TokenKind::Pipe,
            '+' => TokenKind::Plus,
            '-' => TokenKind::Minus,
            '*' => TokenKind::Star,
            '/' => TokenKind::Slash,
            '\\' => TokenKind::Backslash,
            '@' => TokenKind::At,
            '.' => {
                if self.peek() == Some('.') {
                    self.bump();
                    TokenKind::DotDot
                } else {
                    TokenKind::Dot
                }
            }
            ':' => match self.peek() {
                Some('-') => {
                    self.bump();
                    TokenKind::If
                }
                Some('~') => {
                    self.bump();
                    TokenKind::WeakIf
                }
                _ => TokenKind::Colon,
            },
            '=' => {
                if self.peek() == Some('=') {
                    self.bump();
                }
                TokenKind::Eq
            }
            '!' if self.peek() == Some('=') => {
                self.bump();
                TokenKind::Ne
            }
            '<' => match self.peek() {
                Some('=') => {
                    self.bump();
                    TokenKind::Le
                }
                Some('>') => {
                    self.bump();
                    TokenKind::Ne
                }
                _ => TokenKind::Lt,
            },
            '>' => {
                if self.peek() == Some('=') {
                    self.bump();
                    TokenKind::Ge
                } else {
                    TokenKind::Gt
                }
            }
            '"' => TokenKind::Str(self.string(&span)?),
            '#' => {
                let name = self.take_while(|c| c.is_alphanumeric() || c == '_');
                if name.is_empty() {
                    return Err(Error::Lex {
                        span,
                        message: "expected directive name after `#`".into(),
                    });
                }
                TokenKind::Directive(name.to_string())
            }
            c if c.is_ascii_digit() => {
                let rest = self.take_while(|c| c.is_ascii_digit());
                let text = format!("{c}{rest}");
                let value = text.parse::<i64>().map_err(|_| Error::Lex {
                    span: span.clone(),
                    message: format!("integer literal {text} out of range"),
                })?;
                TokenKind::Integer(value)
            }
            c if c.is_alphabetic() || c == '_' => {
                let rest = self.take_while(|c| c.is_alphanumeric() || c == '_' || c == '\'');
                let text = format!("{c}{rest}");
                if c.is_uppercase() || c == '_' {
                    TokenKind::Variable(text)
                } else {
                    TokenKind::Ident(text)
                }
            }
            other => {
                return Err(Error::Lex {
                    span,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        Ok(Some(Token { kind, span }))
    }
}

/// Splits `source` into tokens. Plain `%` comments are dropped; `%!` lines
/// become a single [`TokenKind::Annotation`] token.
pub fn tokenize(source: &str, file: &str) -> Result<Vec<Token>> {
    tokenize_at(source, Span::new(file, 1, 1))
}

/// Like [`tokenize`], with positions offset to start at `origin`.
pub fn tokenize_at(source: &str, origin: Span) -> Result<Vec<Token>> {
    let mut lexer = Lexer {
        chars: source.char_indices().peekable(),
        src: source,
        file: origin.file,
        line: origin.line,
        col: origin.column,
    };
    let mut out = Vec::new();
    while let Some(tok) = lexer.next_token()? {
        out.push(tok);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src, "t.lp").unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn plain_comment_is_discarded() {
        assert_eq!(
            kinds("p(1). % note"),
            vec![
                TokenKind::Ident("p".into()),
                TokenKind::LParen,
                TokenKind::Integer(1),
                TokenKind::RParen,
                TokenKind::Dot
            ]
        );
    }

    #[test]
    fn annotation_marker_is_captured() {
        assert_eq!(
            kinds("%!show_trace {h(A)}."),
            vec![TokenKind::Annotation("show_trace {h(A)}.".into())]
        );
    }

    #[test]
    fn minus_inside_arguments() {
        assert_eq!(
            kinds("h(F,V,I-1)"),
            vec![
                TokenKind::Ident("h".into()),
                TokenKind::LParen,
                TokenKind::Variable("F".into()),
                TokenKind::Comma,
                TokenKind::Variable("V".into()),
                TokenKind::Comma,
                TokenKind::Variable("I".into()),
                TokenKind::Minus,
                TokenKind::Integer(1),
                TokenKind::RParen
            ]
        );
    }

    #[test]
    fn interval_after_integer() {
        assert_eq!(
            kinds("0..L"),
            vec![
                TokenKind::Integer(0),
                TokenKind::DotDot,
                TokenKind::Variable("L".into())
            ]
        );
    }

    #[test]
    fn escaped_quote_in_string() {
        assert_eq!(kinds(r#""a\"b""#), vec![TokenKind::Str("a\"b".into())]);
    }

    #[test]
    fn percent_inside_string_is_not_a_comment() {
        assert_eq!(kinds(r#""50%""#), vec![TokenKind::Str("50%".into())]);
    }

    #[test]
    fn unterminated_string_reports_position() {
        let err = tokenize("p.\n  q(\"abc", "f.lp").unwrap_err();
        match err {
            Error::Lex { span, .. } => {
                assert_eq!((span.line, span.column), (2, 5));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn block_comment_skipped() {
        assert_eq!(kinds("%* a\n b *% x"), vec![TokenKind::Ident("x".into())]);
    }

    #[test]
    fn comparison_operators() {
        assert_eq!(
            kinds("!= <> <= >= == ="),
            vec![
                TokenKind::Ne,
                TokenKind::Ne,
                TokenKind::Le,
                TokenKind::Ge,
                TokenKind::Eq,
                TokenKind::Eq
            ]
        );
    }
}
