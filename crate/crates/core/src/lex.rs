//! Tokenizer shared by the query language, DDL and data lines.

use crate::error::{Error, Position, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    /// Unsigned decimal integer literal, kept as text so `-9223372036854775808` can be folded.
    Int(String),
    Real(String),
    Str(String),
    /// `Concept#id`
    Ref(String, u64),
    Hex(u64),
    Punct(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(s) | Tok::Real(s) => format!("number {s}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Ref(c, id) => format!("reference {c}#{id}"),
            Tok::Hex(h) => format!("reference 0x{h:x}"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub pos: Position,
}

// Longest first.
const PUNCTS: &[&str] = &[
    ":=", "==", "!=", "<=", ">=", "&&", "||", "{", "}", "<", ">", "=", ",", ";", ":", ".", "(",
    ")", "|", "+", "-", "*", "/", "!", "&",
];

pub fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '⊤' || c == '⊥'
}

pub fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

pub fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let (mut line, mut col) = (1usize, 1usize);

    macro_rules! advance {
        ($n:expr) => {
            for _ in 0..$n {
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        };
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance!(1);
            continue;
        }
        let pos = Position { line, column: col };
        if c == '"' {
            let mut s = String::new();
            advance!(1);
            loop {
                if i >= chars.len() {
                    return Err(Error::syntax(pos, "closing `\"`", "end of input"));
                }
                let ch = chars[i];
                if ch == '"' {
                    advance!(1);
                    break;
                }
                if ch == '\\' {
                    if i + 1 >= chars.len() {
                        return Err(Error::syntax(pos, "escape sequence", "end of input"));
                    }
                    let esc = chars[i + 1];
                    s.push(match esc {
                        'n' => '\n',
                        't' => '\t',
                        'r' => '\r',
                        '"' => '"',
                        '\\' => '\\',
                        other => {
                            return Err(Error::syntax(
                                Position { line, column: col },
                                "escape sequence",
                                format!("`\\{other}`"),
                            ))
                        }
                    });
                    advance!(2);
                    continue;
                }
                s.push(ch);
                advance!(1);
            }
            out.push(Token { tok: Tok::Str(s), pos });
            continue;
        }
        if c.is_ascii_digit() {
            if c == '0' && i + 1 < chars.len() && (chars[i + 1] == 'x' || chars[i + 1] == 'X') {
                let start = i + 2;
                let mut j = start;
                while j < chars.len() && chars[j].is_ascii_hexdigit() {
                    j += 1;
                }
                let digits: String = chars[start..j].iter().collect();
                let v = u64::from_str_radix(&digits, 16)
                    .map_err(|_| Error::syntax(pos, "hexadecimal reference", "malformed literal"))?;
                advance!(j - i);
                out.push(Token { tok: Tok::Hex(v), pos });
                continue;
            }
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let mut real = false;
            if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
                real = true;
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                let mut k = j + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    real = true;
                    j = k;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
            }
            let text: String = chars[i..j].iter().collect();
            advance!(j - i);
            out.push(Token {
                tok: if real { Tok::Real(text) } else { Tok::Int(text) },
                pos,
            });
            continue;
        }
        if is_ident_start(c) {
            let mut j = i + 1;
            while j < chars.len() && is_ident_char(chars[j]) {
                j += 1;
            }
            let name: String = chars[i..j].iter().collect();
            if j + 1 < chars.len() && chars[j] == '#' && chars[j + 1].is_ascii_digit() {
                let mut k = j + 1;
                while k < chars.len() && chars[k].is_ascii_digit() {
                    k += 1;
                }
                let digits: String = chars[j + 1..k].iter().collect();
                let id = digits
                    .parse::<u64>()
                    .map_err(|_| Error::syntax(pos, "item id", "out-of-range number"))?;
                advance!(k - i);
                out.push(Token { tok: Tok::Ref(name, id), pos });
                continue;
            }
            advance!(j - i);
            out.push(Token { tok: Tok::Ident(name), pos });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                advance!(p.chars().count());
                out.push(Token { tok: Tok::Punct(p), pos });
            }
            None => return Err(Error::syntax(pos, "token", format!("`{c}`"))),
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Position { line, column: col },
    });
    Ok(out)
}

/// Cursor over a token vector with the usual peek/expect helpers.
pub struct Cursor {
    toks: Vec<Token>,
    at: usize,
}

impl Cursor {
    pub fn new(src: &str) -> Result<Self> {
        Ok(Cursor {
            toks: tokenize(src)?,
            at: 0,
        })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    pub fn peek_at(&self, n: usize) -> &Tok {
        let idx = (self.at + n).min(self.toks.len() - 1);
        &self.toks[idx].tok
    }

    pub fn pos(&self) -> Position {
        self.toks[self.at].pos
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].tok.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    pub fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    pub fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn error(&self, expected: impl Into<String>) -> Error {
        Error::syntax(self.pos(), expected, self.peek().describe())
    }

    pub fn expect_punct(&mut self, p: &str) -> Result<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(format!("`{p}`")))
        }
    }

    pub fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(format!("`{kw}`")))
        }
    }

    pub fn expect_ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error("identifier")),
        }
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn expect_eof(&mut self) -> Result<()> {
        if self.at_eof() {
            Ok(())
        } else {
            Err(self.error("end of input"))
        }
    }
}
