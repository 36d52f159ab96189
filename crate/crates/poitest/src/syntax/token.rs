//! Lexer for MiniFun source text.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Int(i64),
    /// Unquoted or quoted atom. Quoted atoms never become keywords.
    Atom(String),
    /// Variable: uppercase or underscore start.
    Var(String),
    /// String literal, already desugared to character codes.
    Str(Vec<i64>),
    /// Character literal `$c`, as its code.
    Char(i64),
    // keywords
    Begin,
    End,
    Case,
    Of,
    If,
    Fun,
    When,
    Try,
    Catch,
    Div,
    Rem,
    Not,
    AndAlso,
    OrElse,
    // punctuation and operators
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Semi,
    Colon,
    Bar,
    BarBar,
    Arrow,
    LeftArrow,
    Bang,
    Match_,
    EqEq,
    Neq,
    Lt,
    Gt,
    Le,
    Ge,
    Plus,
    PlusPlus,
    Minus,
    Star,
    Slash,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Int(n) => write!(f, "{}", n),
            Tok::Atom(a) => write!(f, "{}", a),
            Tok::Var(v) => write!(f, "{}", v),
            Tok::Str(_) => write!(f, "string"),
            Tok::Char(c) => write!(f, "${}", *c as u8 as char),
            Tok::Begin => write!(f, "begin"),
            Tok::End => write!(f, "end"),
            Tok::Case => write!(f, "case"),
            Tok::Of => write!(f, "of"),
            Tok::If => write!(f, "if"),
            Tok::Fun => write!(f, "fun"),
            Tok::When => write!(f, "when"),
            Tok::Try => write!(f, "try"),
            Tok::Catch => write!(f, "catch"),
            Tok::Div => write!(f, "div"),
            Tok::Rem => write!(f, "rem"),
            Tok::Not => write!(f, "not"),
            Tok::AndAlso => write!(f, "andalso"),
            Tok::OrElse => write!(f, "orelse"),
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
            Tok::LBracket => write!(f, "["),
            Tok::RBracket => write!(f, "]"),
            Tok::LBrace => write!(f, "{{"),
            Tok::RBrace => write!(f, "}}"),
            Tok::Comma => write!(f, ","),
            Tok::Dot => write!(f, "."),
            Tok::Semi => write!(f, ";"),
            Tok::Colon => write!(f, ":"),
            Tok::Bar => write!(f, "|"),
            Tok::BarBar => write!(f, "||"),
            Tok::Arrow => write!(f, "->"),
            Tok::LeftArrow => write!(f, "<-"),
            Tok::Bang => write!(f, "!"),
            Tok::Match_ => write!(f, "="),
            Tok::EqEq => write!(f, "=="),
            Tok::Neq => write!(f, "/="),
            Tok::Lt => write!(f, "<"),
            Tok::Gt => write!(f, ">"),
            Tok::Le => write!(f, "=<"),
            Tok::Ge => write!(f, ">="),
            Tok::Plus => write!(f, "+"),
            Tok::PlusPlus => write!(f, "++"),
            Tok::Minus => write!(f, "-"),
            Tok::Star => write!(f, "*"),
            Tok::Slash => write!(f, "/"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

/// A token with its 1-based source position.
#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub column: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub message: String,
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for LexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

struct Lexer<'s> {
    src: &'s [u8],
    pos: usize,
    line: u32,
    column: u32,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let mut lx = Lexer { src: source.as_bytes(), pos: 0, line: 1, column: 1 };
    let mut out = Vec::new();
    loop {
        lx.skip_trivia();
        let (line, column) = (lx.line, lx.column);
        match lx.next_tok()? {
            Some(tok) => out.push(Token { tok, line, column }),
            None => {
                out.push(Token { tok: Tok::Eof, line, column });
                return Ok(out);
            }
        }
    }
}

fn keyword(word: &str) -> Option<Tok> {
    Some(match word {
        "begin" => Tok::Begin,
        "end" => Tok::End,
        "case" => Tok::Case,
        "of" => Tok::Of,
        "if" => Tok::If,
        "fun" => Tok::Fun,
        "when" => Tok::When,
        "try" => Tok::Try,
        "catch" => Tok::Catch,
        "div" => Tok::Div,
        "rem" => Tok::Rem,
        "not" => Tok::Not,
        "andalso" => Tok::AndAlso,
        "orelse" => Tok::OrElse,
        _ => return None,
    })
}

impl<'s> Lexer<'s> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(b' ') | Some(b'\t') | Some(b'\r') | Some(b'\n') => {
                    self.bump();
                }
                Some(b'%') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => return,
            }
        }
    }

    fn error(&self, message: impl Into<String>) -> LexError {
        LexError { message: message.into(), line: self.line, column: self.column }
    }

    fn next_tok(&mut self) -> Result<Option<Tok>, LexError> {
        let c = match self.peek() {
            Some(c) => c,
            None => return Ok(None),
        };
        let tok = match c {
            b'0'..=b'9' => {
                let mut n: i64 = 0;
                while let Some(d @ b'0'..=b'9') = self.peek() {
                    n = n
                        .checked_mul(10)
                        .and_then(|n| n.checked_add((d - b'0') as i64))
                        .ok_or_else(|| self.error("integer literal too large"))?;
                    self.bump();
                }
                Tok::Int(n)
            }
            b'a'..=b'z' => {
                let word = self.take_name();
                keyword(&word).unwrap_or(Tok::Atom(word))
            }
            b'A'..=b'Z' | b'_' => Tok::Var(self.take_name()),
            b'\'' => {
                self.bump();
                let mut name = String::new();
                loop {
                    match self.bump() {
                        Some(b'\'') => break,
                        Some(b'\\') => {
                            let e = self.bump().ok_or_else(|| self.error("unterminated atom"))?;
                            name.push(unescape(e) as char);
                        }
                        Some(c) => name.push(c as char),
                        None => return Err(self.error("unterminated quoted atom")),
                    }
                }
                Tok::Atom(name)
            }
            b'"' => {
                self.bump();
                let mut codes = Vec::new();
                loop {
                    match self.bump() {
                        Some(b'"') => break,
                        Some(b'\\') => {
                            let e = self.bump().ok_or_else(|| self.error("unterminated string"))?;
                            codes.push(unescape(e) as i64);
                        }
                        Some(c) => codes.push(c as i64),
                        None => return Err(self.error("unterminated string literal")),
                    }
                }
                Tok::Str(codes)
            }
            b'$' => {
                self.bump();
                match self.bump() {
                    Some(b'\\') => {
                        let e = self.bump().ok_or_else(|| self.error("unterminated character"))?;
                        Tok::Char(unescape(e) as i64)
                    }
                    Some(c) => Tok::Char(c as i64),
                    None => return Err(self.error("unterminated character literal")),
                }
            }
            b'(' => self.single(Tok::LParen),
            b')' => self.single(Tok::RParen),
            b'[' => self.single(Tok::LBracket),
            b']' => self.single(Tok::RBracket),
            b'{' => self.single(Tok::LBrace),
            b'}' => self.single(Tok::RBrace),
            b',' => self.single(Tok::Comma),
            b'.' => self.single(Tok::Dot),
            b';' => self.single(Tok::Semi),
            b':' => self.single(Tok::Colon),
            b'!' => self.single(Tok::Bang),
            b'*' => self.single(Tok::Star),
            b'|' => {
                self.bump();
                if self.peek() == Some(b'|') {
                    self.bump();
                    Tok::BarBar
                } else {
                    Tok::Bar
                }
            }
            b'-' => {
                self.bump();
                if self.peek() == Some(b'>') {
                    self.bump();
                    Tok::Arrow
                } else {
                    Tok::Minus
                }
            }
            b'<' => {
                self.bump();
                if self.peek() == Some(b'-') {
                    self.bump();
                    Tok::LeftArrow
                } else {
                    Tok::Lt
                }
            }
            b'>' => {
                self.bump();
                if self.peek() == Some(b'=') {
                    self.bump();
                    Tok::Ge
                } else {
                    Tok::Gt
                }
            }
            b'=' => {
                self.bump();
                match self.peek() {
                    Some(b'=') => {
                        self.bump();
                        Tok::EqEq
                    }
                    Some(b'<') => {
                        self.bump();
                        Tok::Le
                    }
                    _ => Tok::Match_,
                }
            }
            b'/' => {
                self.bump();
                if self.peek() == Some(b'=') {
                    self.bump();
                    Tok::Neq
                } else {
                    Tok::Slash
                }
            }
            b'+' => {
                self.bump();
                if self.peek() == Some(b'+') {
                    self.bump();
                    Tok::PlusPlus
                } else {
                    Tok::Plus
                }
            }
            other => return Err(self.error(format!("unexpected character '{}'", other as char))),
        };
        Ok(Some(tok))
    }

    fn single(&mut self, tok: Tok) -> Tok {
        self.bump();
        tok
    }

    fn take_name(&mut self) -> String {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' || c == b'@' {
                self.bump();
            } else {
                break;
            }
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn peek_is_gt(&self) -> bool {
        self.peek2() == Some(b'>')
    }
}

fn unescape(c: u8) -> u8 {
    match c {
        b'n' => b'\n',
        b't' => b'\t',
        b'r' => b'\r',
        b's' => b' ',
        b'0' => 0,
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn lexes_basic_form() {
        assert_eq!(
            toks("f() -> 1."),
            vec![
                Tok::Atom("f".into()),
                Tok::LParen,
                Tok::RParen,
                Tok::Arrow,
                Tok::Int(1),
                Tok::Dot,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn strings_desugar_to_codes() {
        assert_eq!(toks("\"ab\""), vec![Tok::Str(vec![97, 98]), Tok::Eof]);
        assert_eq!(toks("$\\s"), vec![Tok::Char(32), Tok::Eof]);
        assert_eq!(toks("$a"), vec![Tok::Char(97), Tok::Eof]);
    }

    #[test]
    fn comments_and_positions() {
        let ts = tokenize("% nothing\nX").unwrap();
        assert_eq!(ts[0].tok, Tok::Var("X".into()));
        assert_eq!((ts[0].line, ts[0].column), (2, 1));
    }

    #[test]
    fn compound_operators() {
        assert_eq!(
            toks("=< >= == /= ++ || <- ->"),
            vec![
                Tok::Le,
                Tok::Ge,
                Tok::EqEq,
                Tok::Neq,
                Tok::PlusPlus,
                Tok::BarBar,
                Tok::LeftArrow,
                Tok::Arrow,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn quoted_atom_keeps_keyword_text() {
        assert_eq!(toks("'case'"), vec![Tok::Atom("case".into()), Tok::Eof]);
    }
}
