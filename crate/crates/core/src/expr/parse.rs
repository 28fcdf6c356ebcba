use std::fmt;

use thiserror::Error;

use super::{Expr, Func};

/// Parenthesis / unary-operator nesting limit.
pub const MAX_NESTING: usize = 200;

/// Limit on the height of the parsed tree (long operator chains count too).
/// Every tree algorithm in this module recurses, so this bounds stack use.
pub const MAX_HEIGHT: usize = 2000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedEnd,
    UnexpectedToken(String),
    UnknownIdentifier(String),
    NonConstantDivisor,
    ZeroDivisor,
    InvalidExponent,
    ChainedExponent,
    LiteralOutOfRange,
    TooDeep,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character {c:?}"),
            ParseErrorKind::UnexpectedEnd => write!(f, "unexpected end of input"),
            ParseErrorKind::UnexpectedToken(t) => write!(f, "unexpected {t}"),
            ParseErrorKind::UnknownIdentifier(name) => write!(f, "unknown identifier `{name}`"),
            ParseErrorKind::NonConstantDivisor => write!(f, "division by a non-constant expression"),
            ParseErrorKind::ZeroDivisor => write!(f, "division by zero"),
            ParseErrorKind::InvalidExponent => {
                write!(f, "exponent must be a non-negative integer literal")
            }
            ParseErrorKind::ChainedExponent => {
                write!(f, "chained `^` is ambiguous; add parentheses")
            }
            ParseErrorKind::LiteralOutOfRange => write!(f, "numeric literal out of range"),
            ParseErrorKind::TooDeep => {
                write!(f, "nesting deeper than {MAX_NESTING} or tree taller than {MAX_HEIGHT}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn err(&self, offset: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { offset, kind }
    }

    /// Returns the next token with its starting byte offset.
    fn next(&mut self) -> Result<(usize, Tok), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(self.pos) else {
            return Ok((start, Tok::End));
        };
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = single {
            self.pos += 1;
            return Ok((start, t));
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < bytes.len()
                && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
            {
                self.pos += 1;
            }
            return Ok((start, Tok::Ident(self.src[start..self.pos].to_string())));
        }
        let ch = self.src[start..].chars().next().unwrap_or('\u{fffd}');
        Err(self.err(start, ParseErrorKind::UnexpectedChar(ch)))
    }

    fn number(&mut self, start: usize) -> Result<(usize, Tok), ParseError> {
        let bytes = self.src.as_bytes();
        let digits = |pos: &mut usize| {
            let s = *pos;
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
            *pos - s
        };
        let mut n = digits(&mut self.pos);
        if bytes.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(&mut self.pos);
        }
        if n == 0 {
            return Err(self.err(start, ParseErrorKind::UnexpectedChar('.')));
        }
        if matches!(bytes.get(self.pos), Some(b'e' | b'E')) {
            let mut p = self.pos + 1;
            if matches!(bytes.get(p), Some(b'+' | b'-')) {
                p += 1;
            }
            if digits(&mut p) == 0 {
                return Err(self.err(self.pos, ParseErrorKind::UnexpectedChar('e')));
            }
            self.pos = p;
        }
        let text = &self.src[start..self.pos];
        let v: f64 = text
            .parse()
            .map_err(|_| self.err(start, ParseErrorKind::LiteralOutOfRange))?;
        if !v.is_finite() {
            return Err(self.err(start, ParseErrorKind::LiteralOutOfRange));
        }
        Ok((start, Tok::Num(v)))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
    coords: &'a [String],
    depth: usize,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ParseError> {
        let (at, tok) = self.lexer.next()?;
        self.at = at;
        self.tok = tok;
        Ok(())
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError { offset: self.at, kind }
    }

    fn unexpected(&self) -> ParseError {
        match self.tok {
            Tok::End => self.err(ParseErrorKind::UnexpectedEnd),
            ref t => self.err(ParseErrorKind::UnexpectedToken(t.describe())),
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            Err(self.err(ParseErrorKind::TooDeep))
        } else {
            Ok(())
        }
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> Result<(Expr, usize), ParseError> {
        let (mut acc, mut h) = self.term()?;
        loop {
            let negate = match self.tok {
                Tok::Plus => false,
                Tok::Minus => true,
                _ => return Ok((acc, h)),
            };
            self.bump()?;
            let (rhs, hr) = self.term()?;
            h = self.grow(h.max(hr) + 2)?;
            acc = if negate { Expr::sub(acc, rhs) } else { Expr::add(acc, rhs) };
        }
    }

    fn grow(&self, h: usize) -> Result<usize, ParseError> {
        if h > MAX_HEIGHT {
            Err(self.err(ParseErrorKind::TooDeep))
        } else {
            Ok(h)
        }
    }

    // term := unary (('*' | '/') unary)*
    fn term(&mut self) -> Result<(Expr, usize), ParseError> {
        let (mut acc, mut h) = self.unary()?;
        loop {
            match self.tok {
                Tok::Star => {
                    self.bump()?;
                    let (rhs, hr) = self.unary()?;
                    h = self.grow(h.max(hr) + 1)?;
                    acc = Expr::mul(acc, rhs);
                }
                Tok::Slash => {
                    self.bump()?;
                    let at = self.at;
                    let (divisor, _) = self.unary()?;
                    h = self.grow(h + 1)?;
                    match divisor.as_const() {
                        Some(0.0) => {
                            return Err(ParseError { offset: at, kind: ParseErrorKind::ZeroDivisor })
                        }
                        Some(c) => acc = Expr::mul(acc, Expr::Const(1.0 / c)),
                        None => {
                            return Err(ParseError {
                                offset: at,
                                kind: ParseErrorKind::NonConstantDivisor,
                            })
                        }
                    }
                }
                _ => return Ok((acc, h)),
            }
        }
    }

    // unary := ('-' | '+') unary | power
    fn unary(&mut self) -> Result<(Expr, usize), ParseError> {
        match self.tok {
            Tok::Minus | Tok::Plus => {
                let negate = self.tok == Tok::Minus;
                self.enter()?;
                self.bump()?;
                let (inner, h) = self.unary()?;
                self.depth -= 1;
                let h = self.grow(h + 1)?;
                Ok((if negate { Expr::neg(inner) } else { inner }, h))
            }
            _ => self.power(),
        }
    }

    // power := primary ('^' integer)?
    fn power(&mut self) -> Result<(Expr, usize), ParseError> {
        let (base, h) = self.primary()?;
        if self.tok != Tok::Caret {
            return Ok((base, h));
        }
        self.bump()?;
        let k = match self.tok {
            Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => v as u32,
            _ => return Err(self.err(ParseErrorKind::InvalidExponent)),
        };
        self.bump()?;
        if self.tok == Tok::Caret {
            return Err(self.err(ParseErrorKind::ChainedExponent));
        }
        Ok((Expr::pow(base, k), h + 1))
    }

    fn primary(&mut self) -> Result<(Expr, usize), ParseError> {
        match std::mem::replace(&mut self.tok, Tok::End) {
            Tok::Num(v) => {
                self.bump()?;
                Ok((Expr::Const(v), 1))
            }
            Tok::Ident(name) => {
                let at = self.at;
                if let Some(f) = Func::from_name(&name) {
                    self.bump()?;
                    if self.tok != Tok::LParen {
                        return Err(self.unexpected());
                    }
                    let (arg, h) = self.parenthesized()?;
                    return Ok((Expr::call(f, arg), h + 1));
                }
                match self.coords.iter().position(|c| *c == name) {
                    Some(i) => {
                        self.bump()?;
                        Ok((Expr::Var(i), 1))
                    }
                    None => Err(ParseError { offset: at, kind: ParseErrorKind::UnknownIdentifier(name) }),
                }
            }
            Tok::LParen => {
                self.tok = Tok::LParen;
                self.parenthesized()
            }
            other => {
                self.tok = other;
                Err(self.unexpected())
            }
        }
    }

    fn parenthesized(&mut self) -> Result<(Expr, usize), ParseError> {
        debug_assert_eq!(self.tok, Tok::LParen);
        self.enter()?;
        self.bump()?;
        let inner = self.expr()?;
        if self.tok != Tok::RParen {
            return Err(self.unexpected());
        }
        self.bump()?;
        self.depth -= 1;
        Ok(inner)
    }
}

/// Parses `text` into an expression over the given coordinate names.
///
/// Precedence from tightest: `^`, unary minus, `* /`, `+ -`. Chained
/// exponents (`x^2^3`) are rejected rather than guessing associativity.
pub fn parse(text: &str, coords: &[String]) -> Result<Expr, ParseError> {
    let mut p = Parser {
        lexer: Lexer { src: text, pos: 0 },
        tok: Tok::End,
        at: 0,
        coords,
        depth: 0,
    };
    p.bump()?;
    let (e, _) = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.unexpected());
    }
    Ok(e)
}
