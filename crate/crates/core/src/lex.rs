//! Tokenizer for the restricted C subset.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Source location: file index into the project file list, 1-based line/col.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Loc {
    pub file: usize,
    pub line: u32,
    pub col: u32,
}

impl Loc {
    pub fn new(file: usize, line: u32, col: u32) -> Loc {
        Loc { file, line, col }
    }
}

impl core::fmt::Display for Loc {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    IntLit(i64),
    FloatLit(f64, bool), // value, is_float_suffix (`f`)
    CharLit(i8),
    StrLit(Vec<u8>),
    Punct(&'static str),
    /// `#define NAME <body tokens>` — surfaced by the lexer, consumed by the
    /// preprocessor in `parse`.
    Directive(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub loc: Loc,
}

/// Lexical or preprocessing failure.
#[derive(Debug, Clone, PartialEq)]
pub struct LexError {
    pub loc: Loc,
    pub message: String,
}

const PUNCTS: &[&str] = &[
    "->", "++", "--", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=", "%=", "(", ")",
    "{", "}", "[", "]", ";", ",", ".", "&", "*", "+", "-", "/", "%", "!", "<", ">", "=",
];

pub fn lex(file: usize, src: &str) -> Result<Vec<Token>, LexError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0usize;
    let mut line: u32 = 1;
    let mut col: u32 = 1;
    let mut at_line_start = true;

    macro_rules! loc {
        () => {
            Loc::new(file, line, col)
        };
    }

    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            i += 1;
            line += 1;
            col = 1;
            at_line_start = true;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        // Comments.
        if c == b'/' && i + 1 < bytes.len() && bytes[i + 1] == b'/' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && i + 1 < bytes.len() && bytes[i + 1] == b'*' {
            let start = loc!();
            i += 2;
            col += 2;
            loop {
                if i + 1 >= bytes.len() {
                    return Err(LexError {
                        loc: start,
                        message: "unterminated block comment".to_string(),
                    });
                }
                if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                    i += 2;
                    col += 2;
                    break;
                }
                if bytes[i] == b'\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
            continue;
        }
        // Preprocessor directive: whole line captured raw.
        if c == b'#' {
            if !at_line_start {
                return Err(LexError {
                    loc: loc!(),
                    message: "`#` only allowed at line start".to_string(),
                });
            }
            let start = loc!();
            let mut text = String::new();
            while i < bytes.len() && bytes[i] != b'\n' {
                text.push(bytes[i] as char);
                i += 1;
            }
            out.push(Token {
                tok: Tok::Directive(text),
                loc: start,
            });
            continue;
        }
        at_line_start = false;
        // Identifiers and keywords.
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = loc!();
            let begin = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
                col += 1;
            }
            let word = core::str::from_utf8(&bytes[begin..i]).unwrap().to_string();
            out.push(Token {
                tok: Tok::Ident(word),
                loc: start,
            });
            continue;
        }
        // Numbers.
        if c.is_ascii_digit() {
            let start = loc!();
            let begin = i;
            let mut saw_dot = false;
            while i < bytes.len()
                && (bytes[i].is_ascii_digit() || (bytes[i] == b'.' && !saw_dot))
            {
                if bytes[i] == b'.' {
                    // `1.` followed by a non-digit is rejected below by parse.
                    saw_dot = true;
                }
                i += 1;
                col += 1;
            }
            let text = core::str::from_utf8(&bytes[begin..i]).unwrap();
            if saw_dot {
                let mut is_f32 = false;
                if i < bytes.len() && (bytes[i] == b'f' || bytes[i] == b'F') {
                    is_f32 = true;
                    i += 1;
                    col += 1;
                }
                let v: f64 = text.parse().map_err(|_| LexError {
                    loc: start,
                    message: format_invalid_number(text),
                })?;
                out.push(Token {
                    tok: Tok::FloatLit(v, is_f32),
                    loc: start,
                });
            } else {
                let v: i64 = text.parse().map_err(|_| LexError {
                    loc: start,
                    message: format_invalid_number(text),
                })?;
                out.push(Token {
                    tok: Tok::IntLit(v),
                    loc: start,
                });
            }
            continue;
        }
        // Char literal.
        if c == b'\'' {
            let start = loc!();
            i += 1;
            col += 1;
            let (ch, used) = read_escaped(bytes, i).ok_or_else(|| LexError {
                loc: start,
                message: "invalid character literal".to_string(),
            })?;
            i += used;
            col += used as u32;
            if i >= bytes.len() || bytes[i] != b'\'' {
                return Err(LexError {
                    loc: start,
                    message: "unterminated character literal".to_string(),
                });
            }
            i += 1;
            col += 1;
            out.push(Token {
                tok: Tok::CharLit(ch as i8),
                loc: start,
            });
            continue;
        }
        // String literal.
        if c == b'"' {
            let start = loc!();
            i += 1;
            col += 1;
            let mut buf = Vec::new();
            loop {
                if i >= bytes.len() || bytes[i] == b'\n' {
                    return Err(LexError {
                        loc: start,
                        message: "unterminated string literal".to_string(),
                    });
                }
                if bytes[i] == b'"' {
                    i += 1;
                    col += 1;
                    break;
                }
                let (ch, used) = read_escaped(bytes, i).ok_or_else(|| LexError {
                    loc: start,
                    message: "invalid escape in string literal".to_string(),
                })?;
                buf.push(ch);
                i += used;
                col += used as u32;
            }
            out.push(Token {
                tok: Tok::StrLit(buf),
                loc: start,
            });
            continue;
        }
        // Punctuation, longest match first.
        let mut matched = false;
        for p in PUNCTS {
            if bytes[i..].starts_with(p.as_bytes()) {
                out.push(Token {
                    tok: Tok::Punct(p),
                    loc: loc!(),
                });
                i += p.len();
                col += p.len() as u32;
                matched = true;
                break;
            }
        }
        if !matched {
            return Err(LexError {
                loc: loc!(),
                message: alloc::format!("unexpected character `{}`", c as char),
            });
        }
    }
    Ok(out)
}

fn format_invalid_number(text: &str) -> String {
    alloc::format!("invalid numeric literal `{text}`")
}

/// Reads one possibly-escaped byte; returns (value, bytes consumed).
fn read_escaped(bytes: &[u8], i: usize) -> Option<(u8, usize)> {
    if i >= bytes.len() {
        return None;
    }
    if bytes[i] == b'\\' {
        let e = *bytes.get(i + 1)?;
        let v = match e {
            b'n' => b'\n',
            b't' => b'\t',
            b'r' => b'\r',
            b'0' => 0,
            b'\\' => b'\\',
            b'\'' => b'\'',
            b'"' => b'"',
            _ => return None,
        };
        Some((v, 2))
    } else {
        Some((bytes[i], 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_fig_style_source() {
        let toks = lex(0, "float kernel1(float a, float b, int k) { return b - a*k; }").unwrap();
        assert!(matches!(&toks[0].tok, Tok::Ident(s) if s == "float"));
        assert!(toks.iter().any(|t| t.tok == Tok::Punct("-")));
    }

    #[test]
    fn lexes_directive_line() {
        let toks = lex(0, "#define SIZE 8\nint x;").unwrap();
        assert!(matches!(&toks[0].tok, Tok::Directive(d) if d.starts_with("#define")));
    }

    #[test]
    fn char_and_string_escapes() {
        let toks = lex(0, r#"'a' '\0' "ab\n""#).unwrap();
        assert_eq!(toks[0].tok, Tok::CharLit(97));
        assert_eq!(toks[1].tok, Tok::CharLit(0));
        assert_eq!(toks[2].tok, Tok::StrLit(alloc::vec![b'a', b'b', b'\n']));
    }

    #[test]
    fn float_suffix() {
        let toks = lex(0, "1.5f 2.25").unwrap();
        assert_eq!(toks[0].tok, Tok::FloatLit(1.5, true));
        assert_eq!(toks[1].tok, Tok::FloatLit(2.25, false));
    }
}
