use std::fmt;

use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    /// Lowercase-initial name: predicate or symbolic constant.
    Ident(String),
    /// Uppercase-initial (or `_`-prefixed) name.
    Variable(String),
    Anon,
    Int(i64),
    DotDot,
    If,
    Colon,
    Semicolon,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Period,
    Lt,
    Le,
    Gt,
    Ge,
    /// `=`; an assignment in `N = #count{...}`, equality elsewhere.
    Assign,
    EqEq,
    Ne,
    Plus,
    Minus,
    Star,
    Slash,
    Not,
    Count,
    Show,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Variable(s) => write!(f, "variable `{s}`"),
            TokenKind::Anon => f.write_str("`_`"),
            TokenKind::Int(n) => write!(f, "integer `{n}`"),
            TokenKind::DotDot => f.write_str("`..`"),
            TokenKind::If => f.write_str("`:-`"),
            TokenKind::Colon => f.write_str("`:`"),
            TokenKind::Semicolon => f.write_str("`;`"),
            TokenKind::LBrace => f.write_str("`{`"),
            TokenKind::RBrace => f.write_str("`}`"),
            TokenKind::LParen => f.write_str("`(`"),
            TokenKind::RParen => f.write_str("`)`"),
            TokenKind::Comma => f.write_str("`,`"),
            TokenKind::Period => f.write_str("`.`"),
            TokenKind::Lt => f.write_str("`<`"),
            TokenKind::Le => f.write_str("`<=`"),
            TokenKind::Gt => f.write_str("`>`"),
            TokenKind::Ge => f.write_str("`>=`"),
            TokenKind::Assign => f.write_str("`=`"),
            TokenKind::EqEq => f.write_str("`==`"),
            TokenKind::Ne => f.write_str("`!=`"),
            TokenKind::Plus => f.write_str("`+`"),
            TokenKind::Minus => f.write_str("`-`"),
            TokenKind::Star => f.write_str("`*`"),
            TokenKind::Slash => f.write_str("`/`"),
            TokenKind::Not => f.write_str("`not`"),
            TokenKind::Count => f.write_str("`#count`"),
            TokenKind::Show => f.write_str("`#show`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    /// 1-based.
    pub line: usize,
    /// 1-based, in characters.
    pub column: usize,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: usize,
    column: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn offset(&mut self) -> usize {
        self.chars.peek().map_or(self.src.len(), |&(i, _)| i)
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn eat_while(&mut self, pred: impl Fn(char) -> bool) {
        while self.peek().is_some_and(&pred) {
            self.bump();
        }
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

/// Splits source text into tokens. `%` starts a comment running to the end
/// of the line.
pub fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    let mut cur = Cursor {
        chars: source.char_indices().peekable(),
        src: source,
        line: 1,
        column: 1,
    };
    let mut tokens = Vec::new();

    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '%' {
            cur.eat_while(|c| c != '\n');
            continue;
        }

        let (line, column) = (cur.line, cur.column);
        let start = cur.offset();
        let kind = match c {
            'a'..='z' => {
                cur.eat_while(is_name_char);
                let text = &source[start..cur.offset()];
                if text == "not" {
                    TokenKind::Not
                } else {
                    TokenKind::Ident(text.to_string())
                }
            }
            'A'..='Z' => {
                cur.eat_while(is_name_char);
                TokenKind::Variable(source[start..cur.offset()].to_string())
            }
            '_' => {
                cur.bump();
                if cur.peek().is_some_and(is_name_char) {
                    cur.eat_while(is_name_char);
                    TokenKind::Variable(source[start..cur.offset()].to_string())
                } else {
                    TokenKind::Anon
                }
            }
            '0'..='9' => {
                cur.eat_while(|c| c.is_ascii_digit());
                let text = &source[start..cur.offset()];
                let value = text.parse::<i64>().map_err(|_| ParseError::Lex {
                    line,
                    column,
                    message: format!("integer literal `{text}` out of range"),
                })?;
                TokenKind::Int(value)
            }
            '#' => {
                cur.bump();
                cur.eat_while(|c| c.is_ascii_alphabetic());
                match &source[start..cur.offset()] {
                    "#count" => TokenKind::Count,
                    "#show" => TokenKind::Show,
                    other => {
                        return Err(ParseError::Lex {
                            line,
                            column,
                            message: format!("unknown directive `{other}`"),
                        })
                    }
                }
            }
            _ => {
                cur.bump();
                let next = cur.peek();
                let two = |cur: &mut Cursor<'_>, kind| {
                    cur.bump();
                    kind
                };
                match (c, next) {
                    ('.', Some('.')) => two(&mut cur, TokenKind::DotDot),
                    ('.', _) => TokenKind::Period,
                    (':', Some('-')) => two(&mut cur, TokenKind::If),
                    (':', _) => TokenKind::Colon,
                    (';', _) => TokenKind::Semicolon,
                    ('{', _) => TokenKind::LBrace,
                    ('}', _) => TokenKind::RBrace,
                    ('(', _) => TokenKind::LParen,
                    (')', _) => TokenKind::RParen,
                    (',', _) => TokenKind::Comma,
                    ('<', Some('=')) => two(&mut cur, TokenKind::Le),
                    ('<', _) => TokenKind::Lt,
                    ('>', Some('=')) => two(&mut cur, TokenKind::Ge),
                    ('>', _) => TokenKind::Gt,
                    ('=', Some('=')) => two(&mut cur, TokenKind::EqEq),
                    ('=', _) => TokenKind::Assign,
                    ('!', Some('=')) => two(&mut cur, TokenKind::Ne),
                    ('+', _) => TokenKind::Plus,
                    ('-', _) => TokenKind::Minus,
                    ('*', _) => TokenKind::Star,
                    ('/', _) => TokenKind::Slash,
                    _ => {
                        return Err(ParseError::Lex {
                            line,
                            column,
                            message: format!("unexpected character `{c}`"),
                        })
                    }
                }
            }
        };
        tokens.push(Token {
            kind,
            lexeme: source[start..cur.offset()].to_string(),
            line,
            column,
        });
    }
    Ok(tokens)
}
