//! Recursive-descent parser and evaluator for sigma profile expressions.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := atom ('^' atom)?
//! atom   := number | 'i' | 'n' | 'exp(' expr ')' | 'log(' expr ')'
//!         | '(' expr ')' | '-' atom
//! ```
//!
//! `i` is the 1-based row index and `n` the matrix dimension.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Index,
    Dimension,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
}

impl Expr {
    pub fn eval(&self, i: f64, n: f64) -> f64 {
        match self {
            Expr::Number(v) => *v,
            Expr::Index => i,
            Expr::Dimension => n,
            Expr::Neg(a) => -a.eval(i, n),
            Expr::Add(a, b) => a.eval(i, n) + b.eval(i, n),
            Expr::Sub(a, b) => a.eval(i, n) - b.eval(i, n),
            Expr::Mul(a, b) => a.eval(i, n) * b.eval(i, n),
            Expr::Div(a, b) => a.eval(i, n) / b.eval(i, n),
            Expr::Pow(a, b) => a.eval(i, n).powf(b.eval(i, n)),
            Expr::Exp(a) => a.eval(i, n).exp(),
            Expr::Log(a) => a.eval(i, n).ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

#[derive(Debug, Clone)]
struct Spanned {
    token: Token,
    column: usize,
}

fn describe(token: &Token) -> String {
    match token {
        Token::Number(v) => format!("number {v}"),
        Token::Ident(name) => format!("identifier '{name}'"),
        Token::Plus => "'+'".into(),
        Token::Minus => "'-'".into(),
        Token::Star => "'*'".into(),
        Token::Slash => "'/'".into(),
        Token::Caret => "'^'".into(),
        Token::LParen => "'('".into(),
        Token::RParen => "')'".into(),
        Token::End => "end of input".into(),
    }
}

fn tokenize(src: &str, base_column: usize) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < chars.len() {
        let c = chars[pos];
        let column = base_column + pos;
        if c.is_whitespace() {
            pos += 1;
            continue;
        }
        let simple = match c {
            '+' => Some(Token::Plus),
            '-' => Some(Token::Minus),
            '*' => Some(Token::Star),
            '/' => Some(Token::Slash),
            '^' => Some(Token::Caret),
            '(' => Some(Token::LParen),
            ')' => Some(Token::RParen),
            _ => None,
        };
        if let Some(token) = simple {
            out.push(Spanned { token, column });
            pos += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = pos;
            while pos < chars.len() && (chars[pos].is_ascii_digit() || chars[pos] == '.') {
                pos += 1;
            }
            // Exponent part only when followed by a digit (or sign + digit).
            if pos < chars.len() && (chars[pos] == 'e' || chars[pos] == 'E') {
                let mut look = pos + 1;
                if look < chars.len() && (chars[look] == '+' || chars[look] == '-') {
                    look += 1;
                }
                if look < chars.len() && chars[look].is_ascii_digit() {
                    pos = look;
                    while pos < chars.len() && chars[pos].is_ascii_digit() {
                        pos += 1;
                    }
                }
            }
            let text: String = chars[start..pos].iter().collect();
            let value = text.parse::<f64>().map_err(|_| Error::Syntax {
                column,
                message: format!("malformed number '{text}'"),
            })?;
            out.push(Spanned {
                token: Token::Number(value),
                column,
            });
        } else if c.is_ascii_alphabetic() {
            let start = pos;
            while pos < chars.len() && chars[pos].is_ascii_alphanumeric() {
                pos += 1;
            }
            out.push(Spanned {
                token: Token::Ident(chars[start..pos].iter().collect()),
                column,
            });
        } else {
            return Err(Error::Syntax {
                column,
                message: format!("unexpected character '{c}'"),
            });
        }
    }
    out.push(Spanned {
        token: Token::End,
        column: base_column + chars.len(),
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    open_parens: Vec<usize>,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Spanned {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            column: self.peek().column,
            message: message.into(),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().token {
                Token::Plus => {
                    self.advance();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Minus => {
                    self.advance();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek().token {
                Token::Star => {
                    self.advance();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Token::Slash => {
                    self.advance();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek().token == Token::Caret {
            self.advance();
            let exponent = self.atom()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn close_paren(&mut self) -> Result<()> {
        match self.peek().token {
            Token::RParen => {
                self.open_parens.pop();
                self.advance();
                Ok(())
            }
            Token::End => {
                let opened = self.open_parens.last().copied().unwrap_or(0);
                Err(self.error(format!(
                    "unbalanced parenthesis (opened at column {opened})"
                )))
            }
            ref other => {
                let what = describe(other);
                Err(self.error(format!("expected ')', found {what}")))
            }
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self.advance();
        match tok.token {
            Token::Number(v) => Ok(Expr::Number(v)),
            Token::Minus => Ok(Expr::Neg(Box::new(self.atom()?))),
            Token::LParen => {
                self.open_parens.push(tok.column);
                let inner = self.expr()?;
                self.close_paren()?;
                Ok(inner)
            }
            Token::Ident(name) => match name.as_str() {
                "i" => Ok(Expr::Index),
                "n" => Ok(Expr::Dimension),
                "exp" | "log" => {
                    let open = self.peek().clone();
                    if open.token != Token::LParen {
                        return Err(self.error(format!("expected '(' after {name}")));
                    }
                    self.advance();
                    self.open_parens.push(open.column);
                    let inner = self.expr()?;
                    self.close_paren()?;
                    Ok(if name == "exp" {
                        Expr::Exp(Box::new(inner))
                    } else {
                        Expr::Log(Box::new(inner))
                    })
                }
                other => Err(Error::Syntax {
                    column: tok.column,
                    message: format!("unknown identifier '{other}'"),
                }),
            },
            Token::RParen => Err(Error::Syntax {
                column: tok.column,
                message: "unbalanced parenthesis: unexpected ')'".into(),
            }),
            other => Err(Error::Syntax {
                column: tok.column,
                message: format!("expected a value, found {}", describe(&other)),
            }),
        }
    }
}

/// Parses `src`; reported columns are 1-based and offset by `base_column - 1`
/// so errors point into the caller's full text.
pub fn parse_expression(src: &str, base_column: usize) -> Result<Expr> {
    let tokens = tokenize(src, base_column)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        open_parens: Vec::new(),
    };
    let expr = parser.expr()?;
    match parser.peek().token {
        Token::End => Ok(expr),
        Token::RParen => Err(parser.error("unbalanced parenthesis: unexpected ')'")),
        ref other => {
            let what = describe(other);
            Err(parser.error(format!("unexpected {what}")))
        }
    }
}
