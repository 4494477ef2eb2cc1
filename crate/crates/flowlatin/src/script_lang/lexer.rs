//! Tokenizer for the dataflow script language.
//!
//! Keywords are case-insensitive, identifiers case-sensitive. Identifiers
//! may contain `::` qualifiers (`Source::record_id`). String literals use
//! single quotes with no escapes; `--` starts a line comment.

use std::fmt;

use super::ScriptError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Load,
    As,
    Filter,
    By,
    Foreach,
    Generate,
    Group,
    Join,
    Order,
    Store,
    Into,
    Desc,
    And,
    Or,
}

impl Keyword {
    fn from_ident(s: &str) -> Option<Keyword> {
        match s.to_ascii_uppercase().as_str() {
            "LOAD" => Some(Keyword::Load),
            "AS" => Some(Keyword::As),
            "FILTER" => Some(Keyword::Filter),
            "BY" => Some(Keyword::By),
            "FOREACH" => Some(Keyword::Foreach),
            "GENERATE" => Some(Keyword::Generate),
            "GROUP" => Some(Keyword::Group),
            "JOIN" => Some(Keyword::Join),
            "ORDER" => Some(Keyword::Order),
            "STORE" => Some(Keyword::Store),
            "INTO" => Some(Keyword::Into),
            "DESC" => Some(Keyword::Desc),
            "AND" => Some(Keyword::And),
            "OR" => Some(Keyword::Or),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Token {
    Ident(String),
    Str(String),
    Int(i64),
    Float(f64),
    Kw(Keyword),
    Assign,
    EqEq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
    Colon,
    Semi,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Ident(s) => write!(f, "identifier `{s}`"),
            Token::Str(s) => write!(f, "string '{s}'"),
            Token::Int(i) => write!(f, "integer {i}"),
            Token::Float(x) => write!(f, "float {x:?}"),
            Token::Kw(k) => write!(f, "keyword {k:?}"),
            Token::Assign => write!(f, "`=`"),
            Token::EqEq => write!(f, "`==`"),
            Token::Ne => write!(f, "`!=`"),
            Token::Lt => write!(f, "`<`"),
            Token::Le => write!(f, "`<=`"),
            Token::Gt => write!(f, "`>`"),
            Token::Ge => write!(f, "`>=`"),
            Token::Plus => write!(f, "`+`"),
            Token::Minus => write!(f, "`-`"),
            Token::Star => write!(f, "`*`"),
            Token::Slash => write!(f, "`/`"),
            Token::LParen => write!(f, "`(`"),
            Token::RParen => write!(f, "`)`"),
            Token::Comma => write!(f, "`,`"),
            Token::Colon => write!(f, "`:`"),
            Token::Semi => write!(f, "`;`"),
        }
    }
}

/// A token plus the 1-based line/column it started at.
#[derive(Debug, Clone, PartialEq)]
pub struct Spanned {
    pub token: Token,
    pub line: u32,
    pub col: u32,
}

struct Cursor<'a> {
    rest: std::str::Chars<'a>,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.rest.clone().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.rest.clone();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.rest.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }
}

fn ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Tokenize a whole script.
pub fn tokenize_script(text: &str) -> Result<Vec<Spanned>, ScriptError> {
    let mut cur = Cursor {
        rest: text.chars(),
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        // skip whitespace and comments
        loop {
            match cur.peek() {
                Some(c) if c.is_whitespace() => {
                    cur.bump();
                }
                Some('-') if cur.peek2() == Some('-') => {
                    while let Some(c) = cur.peek() {
                        if c == '\n' {
                            break;
                        }
                        cur.bump();
                    }
                }
                _ => break,
            }
        }
        let (line, col) = (cur.line, cur.col);
        let c = match cur.peek() {
            Some(c) => c,
            None => return Ok(out),
        };
        let token = if ident_start(c) {
            let mut ident = String::new();
            while let Some(c) = cur.peek() {
                if ident_continue(c) {
                    ident.push(c);
                    cur.bump();
                } else if c == ':'
                    && cur.peek2() == Some(':')
                {
                    // qualified name segment
                    ident.push_str("::");
                    cur.bump();
                    cur.bump();
                    match cur.peek() {
                        Some(n) if ident_start(n) => {}
                        _ => {
                            return Err(ScriptError::Lex {
                                line,
                                col,
                                message: format!("dangling `::` after `{ident}`"),
                            })
                        }
                    }
                } else {
                    break;
                }
            }
            match Keyword::from_ident(&ident) {
                Some(kw) if !ident.contains("::") => Token::Kw(kw),
                _ => Token::Ident(ident),
            }
        } else if c.is_ascii_digit() {
            let mut num = String::new();
            while let Some(c) = cur.peek() {
                if c.is_ascii_digit() {
                    num.push(c);
                    cur.bump();
                } else {
                    break;
                }
            }
            if cur.peek() == Some('.') && cur.peek2().map(|c| c.is_ascii_digit()).unwrap_or(false) {
                num.push('.');
                cur.bump();
                while let Some(c) = cur.peek() {
                    if c.is_ascii_digit() {
                        num.push(c);
                        cur.bump();
                    } else {
                        break;
                    }
                }
                Token::Float(num.parse().map_err(|_| ScriptError::Lex {
                    line,
                    col,
                    message: format!("bad float literal `{num}`"),
                })?)
            } else {
                Token::Int(num.parse().map_err(|_| ScriptError::Lex {
                    line,
                    col,
                    message: format!("integer literal `{num}` out of range"),
                })?)
            }
        } else if c == '\'' {
            cur.bump();
            let mut s = String::new();
            loop {
                match cur.peek() {
                    Some('\'') => {
                        cur.bump();
                        break;
                    }
                    Some('\n') | None => {
                        return Err(ScriptError::Lex {
                            line,
                            col,
                            message: "unterminated string literal".to_string(),
                        })
                    }
                    Some(c) => {
                        s.push(c);
                        cur.bump();
                    }
                }
            }
            Token::Str(s)
        } else {
            cur.bump();
            match c {
                '=' => {
                    if cur.peek() == Some('=') {
                        cur.bump();
                        Token::EqEq
                    } else {
                        Token::Assign
                    }
                }
                '!' => {
                    if cur.peek() == Some('=') {
                        cur.bump();
                        Token::Ne
                    } else {
                        return Err(ScriptError::Lex {
                            line,
                            col,
                            message: "stray `!` (did you mean `!=`?)".to_string(),
                        });
                    }
                }
                '<' => {
                    if cur.peek() == Some('=') {
                        cur.bump();
                        Token::Le
                    } else {
                        Token::Lt
                    }
                }
                '>' => {
                    if cur.peek() == Some('=') {
                        cur.bump();
                        Token::Ge
                    } else {
                        Token::Gt
                    }
                }
                '+' => Token::Plus,
                '-' => Token::Minus,
                '*' => Token::Star,
                '/' => Token::Slash,
                '(' => Token::LParen,
                ')' => Token::RParen,
                ',' => Token::Comma,
                ':' => Token::Colon,
                ';' => Token::Semi,
                other => {
                    return Err(ScriptError::Lex {
                        line,
                        col,
                        message: format!("unexpected character `{other}`"),
                    })
                }
            }
        };
        out.push(Spanned { token, line, col });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(text: &str) -> Vec<Token> {
        tokenize_script(text)
            .unwrap()
            .into_iter()
            .map(|s| s.token)
            .collect()
    }

    #[test]
    fn tokenizes_load_statement() {
        let got = toks("Protocol = LOAD 'NetFlow-Data1' AS (protocol:chararray, flow:int)");
        assert_eq!(
            got,
            vec![
                Token::Ident("Protocol".to_string()),
                Token::Assign,
                Token::Kw(Keyword::Load),
                Token::Str("NetFlow-Data1".to_string()),
                Token::Kw(Keyword::As),
                Token::LParen,
                Token::Ident("protocol".to_string()),
                Token::Colon,
                Token::Ident("chararray".to_string()),
                Token::Comma,
                Token::Ident("flow".to_string()),
                Token::Colon,
                Token::Ident("int".to_string()),
                Token::RParen,
            ]
        );
    }

    #[test]
    fn empty_input_gives_no_tokens() {
        assert!(toks("").is_empty());
        assert!(toks("  -- just a comment\n").is_empty());
    }

    #[test]
    fn unterminated_string_is_positioned() {
        match tokenize_script("x = LOAD 'a") {
            Err(ScriptError::Lex { line: 1, col: 10, message }) => {
                assert!(message.contains("unterminated"), "{message}");
            }
            other => panic!("expected lex error, got {other:?}"),
        }
    }

    #[test]
    fn keywords_case_insensitive_identifiers_not() {
        let got = toks("foreach Words generate");
        assert_eq!(
            got,
            vec![
                Token::Kw(Keyword::Foreach),
                Token::Ident("Words".to_string()),
                Token::Kw(Keyword::Generate),
            ]
        );
    }

    #[test]
    fn qualified_identifiers_stay_single_tokens() {
        let got = toks("Source::record_id == 1");
        assert_eq!(
            got,
            vec![
                Token::Ident("Source::record_id".to_string()),
                Token::EqEq,
                Token::Int(1),
            ]
        );
    }

    #[test]
    fn comments_and_numbers() {
        let got = toks("x -- note\n3 4.5 >= <=");
        assert_eq!(
            got,
            vec![
                Token::Ident("x".to_string()),
                Token::Int(3),
                Token::Float(4.5),
                Token::Ge,
                Token::Le,
            ]
        );
    }
}
