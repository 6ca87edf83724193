//! Text syntax for constraints.
//!
//! ```text
//! constraint := disj
//! disj       := conj (('\/' | '||' | 'or') conj)*
//! conj       := unary (('/\' | '&&' | 'and') unary)*
//! unary      := 'true' | 'false' | 'not' unary | '(' constraint ')' | expr op expr
//! expr       := ['-'] term (('+' | '-') term)*
//! term       := INT ['*' IDENT] | IDENT
//! op         := '=' | '==' | '!=' | '<' | '<=' | '>' | '>='
//! ```
//!
//! The canonical form printed by `Display` (`3*x + -1*y + 2 <= 0`) parses
//! back to the same constraint.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::expr::{Constraint, LinExpr};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("constraint syntax error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i64),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    And,
    Or,
    Not,
    True,
    False,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '#'
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |offset: usize, message: &str| ParseError { offset, message: message.to_string() };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let two = |s: &str| bytes[i..].iter().take(2).collect::<String>() == s;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = if c.is_ascii_digit() {
            let mut v: i64 = 0;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                v = v
                    .checked_mul(10)
                    .and_then(|v| v.checked_add(bytes[i].to_digit(10).unwrap() as i64))
                    .ok_or_else(|| err(start, "integer literal overflows"))?;
                i += 1;
            }
            Tok::Int(v)
        } else if is_ident_start(c) {
            while i < bytes.len() && is_ident_char(bytes[i]) {
                i += 1;
            }
            let word: String = bytes[start..i].iter().collect();
            match word.as_str() {
                "and" => Tok::And,
                "or" => Tok::Or,
                "not" => Tok::Not,
                "true" => Tok::True,
                "false" => Tok::False,
                _ => Tok::Ident(word),
            }
        } else if two("/\\") || two("&&") {
            i += 2;
            Tok::And
        } else if two("\\/") || two("||") {
            i += 2;
            Tok::Or
        } else if two("<=") || two(">=") || two("!=") || two("==") {
            let op = match (c, bytes[i + 1]) {
                ('<', _) => "<=",
                ('>', _) => ">=",
                ('!', _) => "!=",
                _ => "==",
            };
            i += 2;
            Tok::Op(op)
        } else {
            i += 1;
            match c {
                '<' => Tok::Op("<"),
                '>' => Tok::Op(">"),
                '=' => Tok::Op("="),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '!' => Tok::Not,
                _ => return Err(err(start, "unexpected character")),
            }
        };
        out.push((start, tok));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn fail<T>(&self, message: &str) -> Result<T, ParseError> {
        Err(ParseError { offset: self.offset(), message: message.to_string() })
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn disj(&mut self) -> Result<Constraint, ParseError> {
        let mut acc = self.conj()?;
        while self.peek() == Some(&Tok::Or) {
            self.bump();
            let rhs = self.conj()?;
            acc = Constraint::Or(acc.into(), rhs.into());
        }
        Ok(acc)
    }

    fn conj(&mut self) -> Result<Constraint, ParseError> {
        let mut acc = self.unary()?;
        while self.peek() == Some(&Tok::And) {
            self.bump();
            let rhs = self.unary()?;
            acc = Constraint::And(acc.into(), rhs.into());
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Constraint, ParseError> {
        match self.peek() {
            Some(Tok::True) => {
                self.bump();
                Ok(Constraint::True)
            }
            Some(Tok::False) => {
                self.bump();
                Ok(Constraint::False)
            }
            Some(Tok::Not) => {
                self.bump();
                Ok(self.unary()?.negate())
            }
            Some(Tok::LParen) => {
                self.bump();
                let inner = self.disj()?;
                if self.bump() != Some(Tok::RParen) {
                    self.pos -= 1;
                    return self.fail("expected ')'");
                }
                Ok(inner)
            }
            _ => {
                let lhs = self.expr()?;
                let op = match self.bump() {
                    Some(Tok::Op(op)) => op,
                    _ => {
                        self.pos -= 1;
                        return self.fail("expected comparison operator");
                    }
                };
                let rhs = self.expr()?;
                Ok(Constraint::cmp(lhs, op, rhs))
            }
        }
    }

    fn expr(&mut self) -> Result<LinExpr, ParseError> {
        let mut negate = false;
        if self.peek() == Some(&Tok::Minus) {
            self.bump();
            negate = true;
        }
        let mut acc = self.term(negate)?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    let neg = if self.peek() == Some(&Tok::Minus) {
                        self.bump();
                        true
                    } else {
                        false
                    };
                    acc = acc.plus(&self.term(neg)?);
                }
                Some(Tok::Minus) => {
                    self.bump();
                    acc = acc.plus(&self.term(true)?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self, negate: bool) -> Result<LinExpr, ParseError> {
        let sign = if negate { -1 } else { 1 };
        match self.bump() {
            Some(Tok::Int(k)) => {
                if self.peek() == Some(&Tok::Star) {
                    self.bump();
                    match self.bump() {
                        Some(Tok::Ident(v)) => Ok(LinExpr::term(sign * k, v)),
                        _ => {
                            self.pos -= 1;
                            self.fail("expected variable after '*'")
                        }
                    }
                } else {
                    Ok(LinExpr::constant(sign * k))
                }
            }
            Some(Tok::Ident(v)) => Ok(LinExpr::term(sign, v)),
            _ => {
                self.pos -= 1;
                self.fail("expected integer or variable")
            }
        }
    }
}

pub fn parse_constraint(src: &str) -> Result<Constraint, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, end: src.len() };
    let c = p.disj()?;
    if p.pos < p.toks.len() {
        return p.fail("trailing input");
    }
    Ok(c)
}

pub fn parse_lin_expr(src: &str) -> Result<LinExpr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, end: src.len() };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        return p.fail("trailing input");
    }
    Ok(e)
}
