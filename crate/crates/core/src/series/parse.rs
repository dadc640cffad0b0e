//! Series expressions: `0`, `1`, letters, `+`, `.` or juxtaposition, postfix
//! `*`, parentheses; a trailing `'` marks a letter. Vectors are `[e, e, ...]`.
//! Letter names are identifiers or any text enclosed in `<...>`.

use std::sync::Arc;

use super::{Series, SeriesVector};
use crate::alphabet::Alphabet;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Zero,
    One,
    Name(String),
    Plus,
    Dot,
    Star,
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '$' | '#' | '/')
}

fn lex(text: &str, line: usize, col0: usize) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = col0 + i;
        let simple = match c {
            '+' => Some(Tok::Plus),
            '.' => Some(Tok::Dot),
            '*' => Some(Tok::Star),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBrack),
            ']' => Some(Tok::RBrack),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(t) = simple {
            out.push((t, col));
            i += 1;
        } else if c.is_whitespace() {
            i += 1;
        } else if c == '0' || c == '1' {
            if chars.get(i + 1).is_some_and(|&d| is_ident_char(d)) {
                return Err(Error::parse(line, col, "identifiers cannot start with a digit"));
            }
            out.push((if c == '0' { Tok::Zero } else { Tok::One }, col));
            i += 1;
        } else if c == '<' {
            let start = i;
            while i < chars.len() && chars[i] != '>' {
                i += 1;
            }
            if i == chars.len() {
                return Err(Error::parse(line, col, "unterminated `<`"));
            }
            i += 1;
            let mut name: String = chars[start..i].iter().collect();
            while chars.get(i) == Some(&'\'') {
                name.push('\'');
                i += 1;
            }
            out.push((Tok::Name(name), col));
        } else if is_ident_char(c) && !c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            let mut name: String = chars[start..i].iter().collect();
            while chars.get(i) == Some(&'\'') {
                name.push('\'');
                i += 1;
            }
            out.push((Tok::Name(name), col));
        } else {
            return Err(Error::parse(line, col, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    end_col: usize,
    alphabet: &'a Arc<Alphabet>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |(_, c)| *c)
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.line, self.col(), msg)
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Series> {
        let mut acc = self.term()?;
        while self.peek() == Some(&Tok::Plus) {
            self.pos += 1;
            let t = self.term()?;
            acc = acc.sum(&t);
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Series> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Dot) => {
                    self.pos += 1;
                }
                Some(Tok::Zero | Tok::One | Tok::Name(_) | Tok::LParen) => {}
                _ => return Ok(acc),
            }
            let f = self.factor()?;
            acc = acc.product(&f);
        }
    }

    fn factor(&mut self) -> Result<Series> {
        let mut a = self.atom()?;
        while self.peek() == Some(&Tok::Star) {
            self.pos += 1;
            a = a.star();
        }
        Ok(a)
    }

    fn atom(&mut self) -> Result<Series> {
        let col = self.col();
        match self.peek().cloned() {
            Some(Tok::Zero) => {
                self.pos += 1;
                Ok(Series::empty(self.alphabet))
            }
            Some(Tok::One) => {
                self.pos += 1;
                Ok(Series::epsilon(self.alphabet))
            }
            Some(Tok::Name(n)) => {
                self.pos += 1;
                let l = self
                    .alphabet
                    .lookup(&n)
                    .ok_or_else(|| Error::parse(self.line, col, format!("unknown letter `{n}`")))?;
                Ok(Series::letter(self.alphabet, l))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Err(self.err("expected an expression")),
        }
    }

    fn vector(&mut self) -> Result<SeriesVector> {
        if self.peek() != Some(&Tok::LBrack) {
            let e = self.expr()?;
            return Ok(SeriesVector::from_entries(self.alphabet.clone(), vec![e]));
        }
        self.pos += 1;
        let mut entries = vec![self.expr()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            entries.push(self.expr()?);
        }
        self.expect(Tok::RBrack, "`,` or `]`")?;
        Ok(SeriesVector::from_entries(self.alphabet.clone(), entries))
    }

    fn finish(&self) -> Result<()> {
        if self.pos < self.toks.len() {
            Err(self.err("unexpected trailing input"))
        } else {
            Ok(())
        }
    }
}

fn parser<'a>(text: &str, alphabet: &'a Arc<Alphabet>, line: usize, col0: usize) -> Result<Parser<'a>> {
    Ok(Parser {
        toks: lex(text, line, col0)?,
        pos: 0,
        line,
        end_col: col0 + text.chars().count(),
        alphabet,
    })
}

pub fn parse_series(text: &str, alphabet: &Arc<Alphabet>) -> Result<Series> {
    let mut p = parser(text, alphabet, 1, 1)?;
    let s = p.expr()?;
    p.finish()?;
    Ok(s)
}

/// Parses one vector; `line`/`col0` locate `text` inside a larger file.
pub fn parse_vector(text: &str, alphabet: &Arc<Alphabet>, line: usize, col0: usize) -> Result<SeriesVector> {
    let mut p = parser(text, alphabet, line, col0)?;
    let v = p.vector()?;
    p.finish()?;
    Ok(v)
}

/// Parses a whitespace- or comma-separated sequence of bracketed vectors.
pub fn parse_vector_list(
    text: &str,
    alphabet: &Arc<Alphabet>,
    line: usize,
    col0: usize,
) -> Result<Vec<SeriesVector>> {
    let mut p = parser(text, alphabet, line, col0)?;
    let mut out = Vec::new();
    while p.peek().is_some() {
        if p.peek() != Some(&Tok::LBrack) {
            return Err(p.err("expected `[`"));
        }
        out.push(p.vector()?);
        if p.peek() == Some(&Tok::Comma) {
            p.pos += 1;
        }
    }
    Ok(out)
}
