//! Tokenizer for rule scripts.
//!
//! Identifier segments may be glued with dots (`lang.Integer.X`,
//! `rbsla.utils.WebService.load`); the parser decides whether a dotted name
//! is a typed variable, a procedural-attachment call or a compound constant.
//! A dot ends a clause only when it is not glueing two identifier characters
//! and not part of a decimal number.

use std::fmt;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    /// Identifier path: one or more dot-joined segments.
    Name(Vec<String>),
    Num(f64),
    Str(String),
    /// `_N` placeholder.
    Placeholder(u32),
    /// `_` or `_foo`.
    Anon(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Pipe,
    Comma,
    Dot,
    Neck,       // :-
    DefNeck,    // <= at clause-neck position (also less-equal in expressions)
    Colon,
    Bang,
    Op(&'static str), // + - * / < > <= >= = !=
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Name(segs) => write!(f, "{}", segs.join(".")),
            Tok::Num(n) => write!(f, "{}", n),
            Tok::Str(s) => write!(f, "{:?}", s),
            Tok::Placeholder(n) => write!(f, "_{}", n),
            Tok::Anon(s) => write!(f, "{}", s),
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
            Tok::LBracket => write!(f, "["),
            Tok::RBracket => write!(f, "]"),
            Tok::Pipe => write!(f, "|"),
            Tok::Comma => write!(f, ","),
            Tok::Dot => write!(f, "."),
            Tok::Neck => write!(f, ":-"),
            Tok::DefNeck => write!(f, "<="),
            Tok::Colon => write!(f, ":"),
            Tok::Bang => write!(f, "!"),
            Tok::Op(o) => write!(f, "{}", o),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spanned {
    pub tok: Tok,
    pub pos: Pos,
}

#[derive(Debug, Error, PartialEq)]
#[error("line {line}, column {col}: {message}")]
pub struct LexError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

pub fn lex(text: &str) -> Result<Vec<Spanned>, LexError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0usize;
    let mut line = 1usize;
    let mut col = 1usize;

    macro_rules! err {
        ($($arg:tt)*) => {
            return Err(LexError { line, col, message: format!($($arg)*) })
        };
    }

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
            for k in 0..n {
                if chars[*i + k] == '\n' {
                    *line += 1;
                    *col = 1;
                } else {
                    *col += 1;
                }
            }
            *i += n;
        };

        match c {
            ' ' | '\t' | '\r' | '\n' => advance(&mut i, &mut line, &mut col, 1),
            '%' => {
                while i < chars.len() && chars[i] != '\n' {
                    advance(&mut i, &mut line, &mut col, 1);
                }
            }
            '(' => {
                out.push(Spanned { tok: Tok::LParen, pos });
                advance(&mut i, &mut line, &mut col, 1);
            }
            ')' => {
                out.push(Spanned { tok: Tok::RParen, pos });
                advance(&mut i, &mut line, &mut col, 1);
            }
            '[' => {
                out.push(Spanned { tok: Tok::LBracket, pos });
                advance(&mut i, &mut line, &mut col, 1);
            }
            ']' => {
                out.push(Spanned { tok: Tok::RBracket, pos });
                advance(&mut i, &mut line, &mut col, 1);
            }
            '|' => {
                out.push(Spanned { tok: Tok::Pipe, pos });
                advance(&mut i, &mut line, &mut col, 1);
            }
            ',' => {
                out.push(Spanned { tok: Tok::Comma, pos });
                advance(&mut i, &mut line, &mut col, 1);
            }
            '!' => {
                if chars.get(i + 1) == Some(&'=') {
                    out.push(Spanned { tok: Tok::Op("!="), pos });
                    advance(&mut i, &mut line, &mut col, 2);
                } else {
                    out.push(Spanned { tok: Tok::Bang, pos });
                    advance(&mut i, &mut line, &mut col, 1);
                }
            }
            ':' => {
                if chars.get(i + 1) == Some(&'-') {
                    out.push(Spanned { tok: Tok::Neck, pos });
                    advance(&mut i, &mut line, &mut col, 2);
                } else {
                    out.push(Spanned { tok: Tok::Colon, pos });
                    advance(&mut i, &mut line, &mut col, 1);
                }
            }
            '<' => {
                if chars.get(i + 1) == Some(&'=') {
                    out.push(Spanned { tok: Tok::DefNeck, pos });
                    advance(&mut i, &mut line, &mut col, 2);
                } else {
                    out.push(Spanned { tok: Tok::Op("<"), pos });
                    advance(&mut i, &mut line, &mut col, 1);
                }
            }
            '>' => {
                if chars.get(i + 1) == Some(&'=') {
                    out.push(Spanned { tok: Tok::Op(">="), pos });
                    advance(&mut i, &mut line, &mut col, 2);
                } else {
                    out.push(Spanned { tok: Tok::Op(">"), pos });
                    advance(&mut i, &mut line, &mut col, 1);
                }
            }
            '=' => {
                if chars.get(i + 1) == Some(&'<') {
                    // Prolog-style less-equal.
                    out.push(Spanned { tok: Tok::Op("<="), pos });
                    advance(&mut i, &mut line, &mut col, 2);
                } else {
                    out.push(Spanned { tok: Tok::Op("="), pos });
                    advance(&mut i, &mut line, &mut col, 1);
                }
            }
            '+' => {
                out.push(Spanned { tok: Tok::Op("+"), pos });
                advance(&mut i, &mut line, &mut col, 1);
            }
            '-' => {
                out.push(Spanned { tok: Tok::Op("-"), pos });
                advance(&mut i, &mut line, &mut col, 1);
            }
            '*' => {
                out.push(Spanned { tok: Tok::Op("*"), pos });
                advance(&mut i, &mut line, &mut col, 1);
            }
            '/' => {
                out.push(Spanned { tok: Tok::Op("/"), pos });
                advance(&mut i, &mut line, &mut col, 1);
            }
            '.' => {
                out.push(Spanned { tok: Tok::Dot, pos });
                advance(&mut i, &mut line, &mut col, 1);
            }
            '"' => {
                advance(&mut i, &mut line, &mut col, 1);
                let mut s = String::new();
                loop {
                    match chars.get(i) {
                        None => err!("unterminated string"),
                        Some('"') => {
                            advance(&mut i, &mut line, &mut col, 1);
                            break;
                        }
                        Some('\\') => {
                            let esc = chars.get(i + 1).copied();
                            match esc {
                                Some('"') => s.push('"'),
                                Some('\\') => s.push('\\'),
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                Some(other) => err!("unknown escape \\{}", other),
                                None => err!("unterminated string"),
                            }
                            advance(&mut i, &mut line, &mut col, 2);
                        }
                        Some(&ch) => {
                            s.push(ch);
                            advance(&mut i, &mut line, &mut col, 1);
                        }
                    }
                }
                out.push(Spanned { tok: Tok::Str(s), pos });
            }
            d if d.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance(&mut i, &mut line, &mut col, 1);
                }
                // Decimal point only when followed by a digit; `1.` is the
                // number 1 ending a clause.
                if chars.get(i) == Some(&'.')
                    && chars.get(i + 1).map(|c| c.is_ascii_digit()).unwrap_or(false)
                {
                    advance(&mut i, &mut line, &mut col, 1);
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        advance(&mut i, &mut line, &mut col, 1);
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v: f64 = text
                    .parse()
                    .map_err(|_| LexError { line, col, message: format!("bad number `{}`", text) })?;
                out.push(Spanned { tok: Tok::Num(v), pos });
            }
            '_' => {
                let start = i;
                advance(&mut i, &mut line, &mut col, 1);
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '_')
                {
                    advance(&mut i, &mut line, &mut col, 1);
                }
                let text: String = chars[start..i].iter().collect();
                let digits = &text[1..];
                if !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit()) {
                    let n: u32 = digits.parse().map_err(|_| LexError {
                        line,
                        col,
                        message: format!("placeholder index out of range `{}`", text),
                    })?;
                    out.push(Spanned { tok: Tok::Placeholder(n), pos });
                } else {
                    out.push(Spanned { tok: Tok::Anon(text), pos });
                }
            }
            a if a.is_ascii_alphabetic() => {
                let mut segments = Vec::new();
                loop {
                    let start = i;
                    while i < chars.len()
                        && (chars[i].is_ascii_alphanumeric() || chars[i] == '_')
                    {
                        advance(&mut i, &mut line, &mut col, 1);
                    }
                    segments.push(chars[start..i].iter().collect::<String>());
                    // Glue `.segment` only when the dot is immediately
                    // followed by a letter (not a digit: `schedule2.5` never
                    // occurs, but `f(x).` must end the clause).
                    if chars.get(i) == Some(&'.')
                        && chars
                            .get(i + 1)
                            .map(|c| c.is_ascii_alphabetic() || *c == '_')
                            .unwrap_or(false)
                    {
                        advance(&mut i, &mut line, &mut col, 1);
                    } else {
                        break;
                    }
                }
                out.push(Spanned { tok: Tok::Name(segments), pos });
            }
            other => err!("unexpected character `{}`", other),
        }
    }
    Ok(out)
}
