use alloc::string::String;
use alloc::vec::Vec;

use super::SqlError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum TokenKind {
    /// Bare word: keyword or unquoted identifier, as written.
    Word(String),
    /// Backtick- or bracket-quoted identifier.
    QuotedIdent(String),
    /// Single- or double-quoted string literal, quotes stripped.
    Str(String),
    /// Numeric literal text, as written.
    Number(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Semicolon,
    Star,
    Plus,
    Minus,
    Slash,
    Percent,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Token {
    pub kind: TokenKind,
    /// Byte offset into the source text.
    pub pos: usize,
}

impl Token {
    pub fn is_word(&self, kw: &str) -> bool {
        matches!(&self.kind, TokenKind::Word(w) if w.eq_ignore_ascii_case(kw))
    }
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, SqlError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let simple = |kind| Token { kind, pos: start };
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'-' if bytes.get(i + 1) == Some(&b'-') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                match src[i + 2..].find("*/") {
                    Some(end) => i += end + 4,
                    None => return Err(SqlError::lex(start, "unterminated block comment")),
                }
                continue;
            }
            b'(' => out.push(simple(TokenKind::LParen)),
            b')' => out.push(simple(TokenKind::RParen)),
            b',' => out.push(simple(TokenKind::Comma)),
            b';' => out.push(simple(TokenKind::Semicolon)),
            b'*' => out.push(simple(TokenKind::Star)),
            b'+' => out.push(simple(TokenKind::Plus)),
            b'-' => out.push(simple(TokenKind::Minus)),
            b'/' => out.push(simple(TokenKind::Slash)),
            b'%' => out.push(simple(TokenKind::Percent)),
            b'=' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 1;
                }
                out.push(simple(TokenKind::Eq));
            }
            b'!' if bytes.get(i + 1) == Some(&b'=') => {
                i += 1;
                out.push(simple(TokenKind::Ne));
            }
            b'<' => match bytes.get(i + 1) {
                Some(b'=') => {
                    i += 1;
                    out.push(simple(TokenKind::Le));
                }
                Some(b'>') => {
                    i += 1;
                    out.push(simple(TokenKind::Ne));
                }
                _ => out.push(simple(TokenKind::Lt)),
            },
            b'>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 1;
                    out.push(simple(TokenKind::Ge));
                } else {
                    out.push(simple(TokenKind::Gt));
                }
            }
            b'\'' | b'"' => {
                let (text, end) = quoted(src, i, c)?;
                out.push(Token {
                    kind: TokenKind::Str(text),
                    pos: start,
                });
                i = end;
                continue;
            }
            b'`' => {
                let (text, end) = quoted(src, i, b'`')?;
                out.push(Token {
                    kind: TokenKind::QuotedIdent(text),
                    pos: start,
                });
                i = end;
                continue;
            }
            b'[' => match src[i + 1..].find(']') {
                Some(len) => {
                    out.push(Token {
                        kind: TokenKind::QuotedIdent(src[i + 1..i + 1 + len].into()),
                        pos: start,
                    });
                    i += len + 2;
                    continue;
                }
                None => return Err(SqlError::lex(start, "unterminated bracket identifier")),
            },
            b'.' if bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                i = number_end(bytes, i);
                out.push(Token {
                    kind: TokenKind::Number(src[start..i].into()),
                    pos: start,
                });
                continue;
            }
            b'.' => out.push(simple(TokenKind::Dot)),
            b'0'..=b'9' => {
                i = number_end(bytes, i);
                out.push(Token {
                    kind: TokenKind::Number(src[start..i].into()),
                    pos: start,
                });
                continue;
            }
            _ if c == b'_' || c.is_ascii_alphabetic() || c >= 0x80 => {
                while i < bytes.len() && (bytes[i] == b'_' || bytes[i].is_ascii_alphanumeric() || bytes[i] >= 0x80) {
                    i += 1;
                }
                out.push(Token {
                    kind: TokenKind::Word(src[start..i].into()),
                    pos: start,
                });
                continue;
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(SqlError::lex(start, alloc::format!("unexpected character `{ch}`")));
            }
        }
        i += 1;
    }
    out.push(Token {
        kind: TokenKind::Eof,
        pos: src.len(),
    });
    Ok(out)
}

/// Reads a quoted run starting at `open`; a doubled quote escapes itself.
fn quoted(src: &str, open: usize, quote: u8) -> Result<(String, usize), SqlError> {
    let bytes = src.as_bytes();
    let mut text = String::new();
    let mut i = open + 1;
    let mut run_start = i;
    while i < bytes.len() {
        if bytes[i] == quote {
            text.push_str(&src[run_start..i]);
            if bytes.get(i + 1) == Some(&quote) {
                text.push(quote as char);
                i += 2;
                run_start = i;
                continue;
            }
            return Ok((text, i + 1));
        }
        i += 1;
    }
    Err(SqlError::lex(open, "unterminated quoted text"))
}

fn number_end(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            i = j;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
    }
    i
}
