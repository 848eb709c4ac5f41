use std::fmt;

use super::ParseDiagnostic;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Token {
    Atom(String),
    True,
    False,
    Not,
    And,
    Or,
    Implies,
    Iff,
    LParen,
    RParen,
    Always,
    Eventually,
    Next,
    Until,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Token::Atom(name) => name.as_str(),
            Token::True => "true",
            Token::False => "false",
            Token::Not => "!",
            Token::And => "&",
            Token::Or => "|",
            Token::Implies => "->",
            Token::Iff => "<->",
            Token::LParen => "(",
            Token::RParen => ")",
            Token::Always => "G",
            Token::Eventually => "F",
            Token::Next => "X",
            Token::Until => "U",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Spanned {
    pub token: Token,
    pub offset: usize,
}

pub(crate) fn is_word_byte(b: u8) -> bool {
    matches!(b, b'a'..=b'z' | b'0'..=b'9' | b'_')
}

pub(crate) fn is_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r')
}

fn lex_error(text: &str, offset: usize, len: usize, message: String) -> ParseDiagnostic {
    let end = (offset + len.max(1)).min(text.len());
    ParseDiagnostic {
        offset,
        expected: "a valid token".to_string(),
        found: String::from_utf8_lossy(&text.as_bytes()[offset..end]).into_owned(),
        message,
    }
}

/// Splits `text` into tokens.
///
/// Upper-case letters other than `G F X U` are rejected, as is an operator
/// letter glued to a lower-case word (`Gp`), so that `Granted` can never be
/// read as `G ranted`.
pub fn tokenize(text: &str) -> Result<Vec<Spanned>, ParseDiagnostic> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        let single = |token| Spanned {
            token,
            offset: start,
        };
        match b {
            _ if is_space(b) => {
                i += 1;
            }
            b'a'..=b'z' => {
                while i < bytes.len() && is_word_byte(bytes[i]) {
                    i += 1;
                }
                let word = &text[start..i];
                let token = match word {
                    "true" => Token::True,
                    "false" => Token::False,
                    _ => Token::Atom(word.to_string()),
                };
                out.push(Spanned {
                    token,
                    offset: start,
                });
            }
            b'G' | b'F' | b'X' | b'U' => {
                if i + 1 < bytes.len() && is_word_byte(bytes[i + 1]) {
                    let mut end = i + 1;
                    while end < bytes.len() && bytes[end].is_ascii_alphanumeric() {
                        end += 1;
                    }
                    return Err(lex_error(
                        text,
                        start,
                        end - start,
                        format!(
                            "operator `{}` is glued to `{}`; atoms must be lowercase and separated from operators",
                            b as char,
                            &text[start + 1..end]
                        ),
                    ));
                }
                let token = match b {
                    b'G' => Token::Always,
                    b'F' => Token::Eventually,
                    b'X' => Token::Next,
                    _ => Token::Until,
                };
                out.push(single(token));
                i += 1;
            }
            b'A'..=b'Z' => {
                let mut end = i;
                while end < bytes.len()
                    && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_')
                {
                    end += 1;
                }
                return Err(lex_error(
                    text,
                    start,
                    end - start,
                    format!(
                        "uppercase atom `{}`; atomic propositions must be lowercase",
                        &text[start..end]
                    ),
                ));
            }
            b'!' => {
                out.push(single(Token::Not));
                i += 1;
            }
            b'&' => {
                out.push(single(Token::And));
                i += 1;
            }
            b'|' => {
                out.push(single(Token::Or));
                i += 1;
            }
            b'(' => {
                out.push(single(Token::LParen));
                i += 1;
            }
            b')' => {
                out.push(single(Token::RParen));
                i += 1;
            }
            b'-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    out.push(single(Token::Implies));
                    i += 2;
                } else {
                    return Err(lex_error(
                        text,
                        start,
                        1,
                        "`-` must be followed by `>`".into(),
                    ));
                }
            }
            b'<' => {
                if bytes.get(i + 1) == Some(&b'-') && bytes.get(i + 2) == Some(&b'>') {
                    out.push(single(Token::Iff));
                    i += 3;
                } else {
                    return Err(lex_error(text, start, 1, "`<` must start `<->`".into()));
                }
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ParseDiagnostic {
                    offset: start,
                    expected: "a valid token".into(),
                    found: ch.to_string(),
                    message: format!("illegal character `{ch}`"),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(s: &str) -> Vec<Token> {
        tokenize(s).unwrap().into_iter().map(|t| t.token).collect()
    }

    #[test]
    fn operators_and_atoms() {
        assert_eq!(
            kinds("G(req_1 -> F granted)"),
            vec![
                Token::Always,
                Token::LParen,
                Token::Atom("req_1".into()),
                Token::Implies,
                Token::Eventually,
                Token::Atom("granted".into()),
                Token::RParen
            ]
        );
        assert_eq!(
            kinds("GF p"),
            vec![Token::Always, Token::Eventually, Token::Atom("p".into())]
        );
        assert_eq!(
            kinds("a<->b"),
            vec![Token::Atom("a".into()), Token::Iff, Token::Atom("b".into())]
        );
        assert_eq!(
            kinds("true|false"),
            vec![Token::True, Token::Or, Token::False]
        );
        assert_eq!(kinds("trueish"), vec![Token::Atom("trueish".into())]);
    }

    #[test]
    fn lexical_errors() {
        let e = tokenize("G(Request)").unwrap_err();
        assert_eq!(e.offset, 2);
        assert!(e.message.contains("uppercase"));
        assert_eq!(tokenize("Gp").unwrap_err().offset, 0);
        assert_eq!(tokenize("p - q").unwrap_err().offset, 2);
        assert_eq!(tokenize("p <- q").unwrap_err().offset, 2);
        assert_eq!(tokenize("p # q").unwrap_err().found, "#");
        assert_eq!(tokenize("p ∧ q").unwrap_err().found, "∧");
        assert!(tokenize("1p").is_err());
    }
}
