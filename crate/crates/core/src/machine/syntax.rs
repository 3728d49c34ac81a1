//! S-expression reader and printer for the supported Scheme subset.

use std::fmt;

use num_bigint::BigInt;
use thiserror::Error;

use crate::intern::Atom;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unsupported form: {0}")]
    Unsupported(String),
}

/// One parsed S-expression. Source positions are not retained.
#[derive(Debug, Clone, PartialEq)]
pub enum Datum {
    Int(i64),
    Big(BigInt),
    Real(f64),
    Bool(bool),
    Char(char),
    Str(String),
    Sym(Atom),
    List(Vec<Datum>),
    /// Improper list: at least one head element and a non-list tail.
    Dotted(Vec<Datum>, Box<Datum>),
}

impl Datum {
    pub fn sym(name: &str) -> Datum {
        Datum::Sym(Atom::new(name))
    }

    pub fn integer(n: BigInt) -> Datum {
        match i64::try_from(&n) {
            Ok(small) => Datum::Int(small),
            Err(_) => Datum::Big(n),
        }
    }

    pub fn as_sym(&self) -> Option<Atom> {
        match self {
            Datum::Sym(a) => Some(*a),
            _ => None,
        }
    }

    /// Self-evaluating data and symbols; lists need quoting to be used as literals.
    pub fn is_atom(&self) -> bool {
        !matches!(self, Datum::List(_) | Datum::Dotted(..))
    }
}

/// A whole program: the sequence of top-level forms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProgramAst {
    pub forms: Vec<Datum>,
}

impl ProgramAst {
    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }
}

impl fmt::Display for ProgramAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, form) in self.forms.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{form}")?;
        }
        Ok(())
    }
}

pub(crate) fn write_real(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    if x.is_nan() {
        f.write_str("+nan.0")
    } else if x.is_infinite() {
        f.write_str(if x > 0.0 { "+inf.0" } else { "-inf.0" })
    } else {
        // Debug gives the shortest representation that reads back exactly.
        write!(f, "{x:?}")
    }
}

pub(crate) fn write_char_literal(f: &mut fmt::Formatter<'_>, c: char) -> fmt::Result {
    match c {
        ' ' => f.write_str("#\\space"),
        '\n' => f.write_str("#\\newline"),
        '\t' => f.write_str("#\\tab"),
        c => write!(f, "#\\{c}"),
    }
}

pub(crate) fn write_string_literal(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

impl fmt::Display for Datum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Datum::Int(n) => write!(f, "{n}"),
            Datum::Big(n) => write!(f, "{n}"),
            Datum::Real(x) => write_real(f, *x),
            Datum::Bool(true) => f.write_str("#t"),
            Datum::Bool(false) => f.write_str("#f"),
            Datum::Char(c) => write_char_literal(f, *c),
            Datum::Str(s) => write_string_literal(f, s),
            Datum::Sym(a) => write!(f, "{a}"),
            Datum::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
            Datum::Dotted(items, tail) => {
                f.write_str("(")?;
                for item in items {
                    write!(f, "{item} ")?;
                }
                write!(f, ". {tail})")
            }
        }
    }
}

/// Forms rejected at read time: macro machinery and the I/O and system
/// interface procedures.
const REJECTED_HEADS: &[&str] = &[
    "define-syntax",
    "let-syntax",
    "letrec-syntax",
    "syntax-rules",
    "quasiquote",
    "unquote",
    "unquote-splicing",
    "read",
    "read-char",
    "peek-char",
    "char-ready?",
    "write",
    "display",
    "newline",
    "write-char",
    "load",
    "transcript-on",
    "transcript-off",
    "open-input-file",
    "open-output-file",
    "close-input-port",
    "close-output-port",
    "call-with-input-file",
    "call-with-output-file",
    "with-input-from-file",
    "with-output-to-file",
    "current-input-port",
    "current-output-port",
    "input-port?",
    "output-port?",
    "eof-object?",
];

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Quote,
    Dot,
    Atom(Datum),
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

fn is_delimiter(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '"' | ';' | '\'')
}

impl<'a> Lexer<'a> {
    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek_char()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek_char() {
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn word(&mut self) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek_char() {
            if is_delimiter(c) {
                break;
            }
            self.bump();
        }
        &self.src[start..self.pos]
    }

    fn next_token(&mut self) -> Result<Option<Token>, ParseError> {
        self.skip_trivia();
        let Some(c) = self.peek_char() else {
            return Ok(None);
        };
        match c {
            '(' => {
                self.bump();
                Ok(Some(Token::Open))
            }
            ')' => {
                self.bump();
                Ok(Some(Token::Close))
            }
            '\'' => {
                self.bump();
                Ok(Some(Token::Quote))
            }
            '`' | ',' => Err(ParseError::Unsupported("quasi-quotation".into())),
            '[' | ']' | '{' | '}' => Err(ParseError::Syntax(format!("unexpected `{c}`"))),
            '"' => {
                self.bump();
                self.string().map(|s| Some(Token::Atom(Datum::Str(s))))
            }
            '#' => self.hash().map(Some),
            _ => {
                let w = self.word();
                if w == "." {
                    return Ok(Some(Token::Dot));
                }
                Ok(Some(Token::Atom(parse_atom(w))))
            }
        }
    }

    fn string(&mut self) -> Result<String, ParseError> {
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(ParseError::Syntax("unterminated string".into())),
                Some('"') => return Ok(out),
                Some('\\') => match self.bump() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some(c @ ('"' | '\\')) => out.push(c),
                    Some(c) => return Err(ParseError::Syntax(format!("bad escape `\\{c}`"))),
                    None => return Err(ParseError::Syntax("unterminated string".into())),
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn hash(&mut self) -> Result<Token, ParseError> {
        self.bump();
        match self.peek_char() {
            Some('\\') => {
                self.bump();
                // The first character is taken verbatim even if it is a delimiter.
                let first = self.bump().ok_or_else(|| ParseError::Syntax("bad character literal".into()))?;
                let rest = self.word();
                let c = if rest.is_empty() {
                    first
                } else {
                    let name = format!("{first}{rest}");
                    match name.to_ascii_lowercase().as_str() {
                        "space" => ' ',
                        "newline" | "linefeed" => '\n',
                        "tab" => '\t',
                        _ => return Err(ParseError::Syntax(format!("unknown character `#\\{name}`"))),
                    }
                };
                Ok(Token::Atom(Datum::Char(c)))
            }
            Some('(') => Err(ParseError::Unsupported("vector literal".into())),
            _ => match self.word() {
                "t" | "true" => Ok(Token::Atom(Datum::Bool(true))),
                "f" | "false" => Ok(Token::Atom(Datum::Bool(false))),
                w => Err(ParseError::Syntax(format!("bad token `#{w}`"))),
            },
        }
    }
}

fn parse_atom(word: &str) -> Datum {
    match word {
        "+inf.0" => return Datum::Real(f64::INFINITY),
        "-inf.0" => return Datum::Real(f64::NEG_INFINITY),
        "+nan.0" | "-nan.0" => return Datum::Real(f64::NAN),
        _ => {}
    }
    if let Some(n) = parse_number(word) {
        return n;
    }
    Datum::sym(word)
}

/// Decimal integers (arbitrary size) and decimal reals. Returns `None` for
/// anything that is not numeric syntax.
pub(crate) fn parse_number(word: &str) -> Option<Datum> {
    let digits = word.strip_prefix(['+', '-']).unwrap_or(word);
    if digits.is_empty() {
        return None;
    }
    if digits.bytes().all(|b| b.is_ascii_digit()) {
        if let Ok(n) = word.parse::<i64>() {
            return Some(Datum::Int(n));
        }
        return word.parse::<BigInt>().ok().map(Datum::Big);
    }
    let first = digits.as_bytes()[0];
    if !(first.is_ascii_digit() || first == b'.') {
        return None;
    }
    if !digits.bytes().all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'e' | b'E' | b'+' | b'-')) {
        return None;
    }
    word.parse::<f64>().ok().map(Datum::Real)
}

struct Reader<'a> {
    lexer: Lexer<'a>,
    lookahead: Option<Token>,
}

impl<'a> Reader<'a> {
    fn next(&mut self) -> Result<Option<Token>, ParseError> {
        match self.lookahead.take() {
            Some(t) => Ok(Some(t)),
            None => self.lexer.next_token(),
        }
    }

    fn datum(&mut self, first: Token) -> Result<Datum, ParseError> {
        match first {
            Token::Atom(d) => Ok(d),
            Token::Close => Err(ParseError::Syntax("unexpected `)`".into())),
            Token::Dot => Err(ParseError::Syntax("unexpected `.`".into())),
            Token::Quote => {
                let t = self.next()?.ok_or_else(|| ParseError::Syntax("quote at end of input".into()))?;
                let quoted = self.datum(t)?;
                Ok(Datum::List(vec![Datum::sym("quote"), quoted]))
            }
            Token::Open => {
                let mut items = Vec::new();
                loop {
                    let t = self.next()?.ok_or_else(|| ParseError::Syntax("unbalanced parentheses".into()))?;
                    match t {
                        Token::Close => return Ok(Datum::List(items)),
                        Token::Dot => {
                            if items.is_empty() {
                                return Err(ParseError::Syntax("`.` at list head".into()));
                            }
                            let t = self.next()?.ok_or_else(|| ParseError::Syntax("unbalanced parentheses".into()))?;
                            let tail = self.datum(t)?;
                            match self.next()? {
                                Some(Token::Close) => {}
                                _ => return Err(ParseError::Syntax("malformed dotted list".into())),
                            }
                            return Ok(match tail {
                                Datum::List(rest) => {
                                    items.extend(rest);
                                    Datum::List(items)
                                }
                                Datum::Dotted(rest, tail) => {
                                    items.extend(rest);
                                    Datum::Dotted(items, tail)
                                }
                                other => Datum::Dotted(items, Box::new(other)),
                            });
                        }
                        t => items.push(self.datum(t)?),
                    }
                }
            }
        }
    }
}

fn reject_unsupported(d: &Datum) -> Result<(), ParseError> {
    let items = match d {
        Datum::List(items) => items.as_slice(),
        Datum::Dotted(items, _) => items.as_slice(),
        _ => return Ok(()),
    };
    if let Some(Datum::Sym(head)) = items.first() {
        let name = head.name();
        if &*name == "quote" {
            return Ok(());
        }
        if REJECTED_HEADS.contains(&&*name) {
            return Err(ParseError::Unsupported(name.to_string()));
        }
    }
    items.iter().try_for_each(reject_unsupported)
}

/// Reads a sequence of S-expressions.
pub fn parse(source: &str) -> Result<ProgramAst, ParseError> {
    let mut reader = Reader { lexer: Lexer { src: source, pos: 0 }, lookahead: None };
    let mut forms = Vec::new();
    while let Some(t) = reader.next()? {
        let d = reader.datum(t)?;
        reject_unsupported(&d)?;
        forms.push(d);
    }
    Ok(ProgramAst { forms })
}

/// Reads exactly one datum.
pub fn parse_datum(source: &str) -> Result<Datum, ParseError> {
    let mut ast = parse(source)?;
    if ast.forms.len() != 1 {
        return Err(ParseError::Syntax(format!("expected one datum, found {}", ast.forms.len())));
    }
    Ok(ast.forms.pop().unwrap())
}
