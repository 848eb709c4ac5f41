use super::formula::Formula;
use super::lexer::{tokenize, Spanned, Token};
use super::ParseDiagnostic;

/// Parses a formula in the surface syntax.
///
/// Precedence, tightest first: unary `! G F X`, `U` (right), `&` (left),
/// `|` (left), `->` (right), `<->` (left).
pub fn parse(text: &str) -> Result<Formula, ParseDiagnostic> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(ParseDiagnostic {
            offset: 0,
            expected: "formula".into(),
            found: "end of input".into(),
            message: "empty input".into(),
        });
    }
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
        end: text.len(),
    };
    let f = parser.iff()?;
    if let Some(t) = parser.peek() {
        return Err(parser.unexpected(t, "binary operator or end of input"));
    }
    Ok(f)
}

struct Parser<'a> {
    tokens: &'a [Spanned],
    pos: usize,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Spanned> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, token: &Token) -> bool {
        if self.peek().map(|t| &t.token) == Some(token) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn unexpected(&self, t: &Spanned, expected: &str) -> ParseDiagnostic {
        ParseDiagnostic {
            offset: t.offset,
            expected: expected.into(),
            found: t.token.to_string(),
            message: format!("unexpected `{}`, expected {expected}", t.token),
        }
    }

    fn eof(&self, expected: &str) -> ParseDiagnostic {
        ParseDiagnostic {
            offset: self.end,
            expected: expected.into(),
            found: "end of input".into(),
            message: format!("unexpected end of input, expected {expected}"),
        }
    }

    fn iff(&mut self) -> Result<Formula, ParseDiagnostic> {
        let mut lhs = self.implies()?;
        while self.eat(&Token::Iff) {
            let rhs = self.implies()?;
            lhs = Formula::iff(lhs, rhs);
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<Formula, ParseDiagnostic> {
        let lhs = self.or()?;
        if self.eat(&Token::Implies) {
            let rhs = self.implies()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, ParseDiagnostic> {
        let mut lhs = self.and()?;
        while self.eat(&Token::Or) {
            let rhs = self.and()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, ParseDiagnostic> {
        let mut lhs = self.until()?;
        while self.eat(&Token::And) {
            let rhs = self.until()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula, ParseDiagnostic> {
        let lhs = self.unary()?;
        if self.eat(&Token::Until) {
            let rhs = self.until()?;
            return Ok(Formula::until(lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseDiagnostic> {
        let Some(t) = self.peek() else {
            return Err(self.eof("formula"));
        };
        let wrap: fn(Formula) -> Formula = match t.token {
            Token::Not => Formula::not,
            Token::Always => Formula::always,
            Token::Eventually => Formula::eventually,
            Token::Next => Formula::next,
            _ => return self.primary(),
        };
        self.pos += 1;
        Ok(wrap(self.unary()?))
    }

    fn primary(&mut self) -> Result<Formula, ParseDiagnostic> {
        let Some(t) = self.peek() else {
            return Err(self.eof("formula"));
        };
        let f = match &t.token {
            Token::Atom(name) => Formula::Atom(name.clone()),
            Token::True => Formula::True,
            Token::False => Formula::False,
            Token::LParen => {
                self.pos += 1;
                let inner = self.iff()?;
                return match self.peek() {
                    Some(t) if t.token == Token::RParen => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    Some(t) => Err(self.unexpected(t, "`)`")),
                    None => Err(self.eof("`)`")),
                };
            }
            _ => return Err(self.unexpected(t, "formula")),
        };
        self.pos += 1;
        Ok(f)
    }
}
