use super::formula::{Alphabet, Formula};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    True,
    Ident(String),
    Not,
    And,
    Or,
    Minus,
    Next,
    Until,
    Eventually,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let tok = match c {
            c if c.is_ascii_whitespace() => {
                i += 1;
                continue;
            }
            '!' => Tok::Not,
            '&' => Tok::And,
            '|' => Tok::Or,
            '\\' => Tok::Minus,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &text[start..i];
                let tok = match word {
                    "true" => Tok::True,
                    "X" => Tok::Next,
                    "U" => Tok::Until,
                    "F" => Tok::Eventually,
                    w => Tok::Ident(w.to_string()),
                };
                out.push((start, tok));
                continue;
            }
            other => {
                return Err(Error::Parse {
                    pos: i,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push((i, tok));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    alphabet: &'a Alphabet,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            pos: self.offset(),
            msg: msg.into(),
        })
    }

    fn or_expr(&mut self) -> Result<Formula> {
        let mut lhs = self.and_expr()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            lhs = Formula::or(lhs, self.and_expr()?);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Formula> {
        let mut lhs = self.until_expr()?;
        loop {
            match self.peek() {
                Some(Tok::And) => {
                    self.pos += 1;
                    lhs = Formula::and(lhs, self.until_expr()?);
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let at = self.offset();
                    let rhs = self.until_expr()?;
                    let neg = rhs.negate().ok_or_else(|| {
                        Error::NegationOfNonAtom(format!(
                            "right operand of `\\` at offset {at} must be propositional"
                        ))
                    })?;
                    lhs = Formula::and(lhs, neg);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn until_expr(&mut self) -> Result<Formula> {
        let lhs = self.unary()?;
        if self.peek() == Some(&Tok::Until) {
            self.pos += 1;
            let rhs = self.until_expr()?;
            return Ok(Formula::until(lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula> {
        match self.peek() {
            Some(Tok::Not) => {
                let at = self.offset();
                self.pos += 1;
                let inner = self.unary()?;
                inner.negate().ok_or_else(|| {
                    Error::NegationOfNonAtom(format!(
                        "`!` at offset {at} applied to a temporal formula"
                    ))
                })
            }
            Some(Tok::Next) => {
                self.pos += 1;
                Ok(Formula::next(self.unary()?))
            }
            Some(Tok::Eventually) => {
                self.pos += 1;
                Ok(Formula::eventually(self.unary()?))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Formula> {
        match self.peek().cloned() {
            Some(Tok::True) => {
                self.pos += 1;
                Ok(Formula::True)
            }
            Some(Tok::Ident(name)) => {
                let idx = self
                    .alphabet
                    .index_of(&name)
                    .ok_or_else(|| Error::UnknownAtom(name.clone()))?;
                self.pos += 1;
                Ok(Formula::Atom(idx))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.or_expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.err("expected `)`");
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(t) => self.err(format!("unexpected token {t:?}")),
            None => self.err("unexpected end of formula"),
        }
    }
}

/// Parses a formula and returns it normalized (`F` expanded, `\` desugared).
///
/// Precedence from tightest: unary (`!`, `X`, `F`), `U` (right associative),
/// `&` and `\`, then `|`.
pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Formula> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        alphabet,
    };
    let f = p.or_expr()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(f.normalize())
}
