//! Byte-level prefix recognizer for the LTL surface grammar.
//!
//! Any token sequence that alternates operands and binary operators, with
//! prefix operators allowed wherever an operand is expected and balanced
//! parentheses, parses under the precedence grammar; precedence only shapes
//! the tree. So the parser side of the state is just "expecting an operand?"
//! plus the open-parenthesis depth, and the lexer side is a handful of
//! partial-lexeme states.

use serde::{Deserialize, Serialize};

use crate::ltl::{is_space, is_word_byte};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Lexeme {
    /// Between tokens.
    Idle,
    /// Inside a lower-case word (atom or keyword).
    Word,
    /// Just read `G`, `F`, `X` or `U`; a word byte may not follow.
    Operator,
    /// Read `-`, need `>`.
    Dash,
    /// Read `<`, need `->`.
    Less,
    /// Read `<-`, need `>`.
    LessDash,
    Dead,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    Accepting,
    ValidPrefix,
    Invalid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecognizerState {
    pub lexeme: Lexeme,
    pub depth: u32,
    pub expect_operand: bool,
}

impl Default for RecognizerState {
    fn default() -> Self {
        Self::START
    }
}

impl RecognizerState {
    pub const START: RecognizerState = RecognizerState {
        lexeme: Lexeme::Idle,
        depth: 0,
        expect_operand: true,
    };

    const DEAD: RecognizerState = RecognizerState {
        lexeme: Lexeme::Dead,
        depth: 0,
        expect_operand: false,
    };

    pub fn classify(&self) -> Classification {
        match self.lexeme {
            Lexeme::Dead => Classification::Invalid,
            Lexeme::Idle | Lexeme::Word if !self.expect_operand && self.depth == 0 => {
                Classification::Accepting
            }
            _ => Classification::ValidPrefix,
        }
    }

    pub fn is_invalid(&self) -> bool {
        self.lexeme == Lexeme::Dead
    }

    pub fn feed(self, bytes: &[u8]) -> RecognizerState {
        bytes.iter().fold(self, |s, &b| s.feed_byte(b))
    }

    pub fn feed_byte(self, b: u8) -> RecognizerState {
        let s = self;
        match s.lexeme {
            Lexeme::Dead => s,
            Lexeme::Word if is_word_byte(b) => s,
            Lexeme::Word => s.idle().idle_byte(b),
            Lexeme::Operator if is_word_byte(b) => Self::DEAD,
            Lexeme::Operator => s.idle().idle_byte(b),
            Lexeme::Dash | Lexeme::LessDash if b == b'>' => RecognizerState {
                lexeme: Lexeme::Idle,
                expect_operand: true,
                ..s
            },
            Lexeme::Less if b == b'-' => RecognizerState {
                lexeme: Lexeme::LessDash,
                ..s
            },
            Lexeme::Dash | Lexeme::Less | Lexeme::LessDash => Self::DEAD,
            Lexeme::Idle => s.idle_byte(b),
        }
    }

    fn idle(self) -> RecognizerState {
        RecognizerState {
            lexeme: Lexeme::Idle,
            ..self
        }
    }

    fn idle_byte(self, b: u8) -> RecognizerState {
        let s = self;
        let with = |lexeme, expect_operand| RecognizerState {
            lexeme,
            expect_operand,
            ..s
        };
        match b {
            _ if is_space(b) => s,
            b'a'..=b'z' if s.expect_operand => with(Lexeme::Word, false),
            b'G' | b'F' | b'X' if s.expect_operand => with(Lexeme::Operator, true),
            b'U' if !s.expect_operand => with(Lexeme::Operator, true),
            b'!' if s.expect_operand => s,
            b'&' | b'|' if !s.expect_operand => with(Lexeme::Idle, true),
            b'-' if !s.expect_operand => with(Lexeme::Dash, false),
            b'<' if !s.expect_operand => with(Lexeme::Less, false),
            b'(' if s.expect_operand => RecognizerState {
                depth: s.depth + 1,
                ..s
            },
            b')' if !s.expect_operand && s.depth > 0 => RecognizerState {
                depth: s.depth - 1,
                ..s
            },
            _ => Self::DEAD,
        }
    }

    /// Shortest byte string that turns this prefix into a complete formula.
    pub fn completion(&self) -> Option<String> {
        let mut out = String::new();
        let mut expect = self.expect_operand;
        match self.lexeme {
            Lexeme::Dead => return None,
            Lexeme::Dash | Lexeme::LessDash => {
                out.push('>');
                expect = true;
            }
            Lexeme::Less => {
                out.push_str("->");
                expect = true;
            }
            Lexeme::Idle | Lexeme::Word | Lexeme::Operator => {}
        }
        if expect {
            out.push_str(" true");
        }
        out.extend(std::iter::repeat_n(')', self.depth as usize));
        Some(out)
    }
}

/// Classification of `bytes` fed from the start state.
pub fn classify(bytes: &[u8]) -> Classification {
    RecognizerState::START.feed(bytes).classify()
}
