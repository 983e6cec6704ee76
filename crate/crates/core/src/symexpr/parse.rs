//! Expression parser.
//!
//! Grammar:
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := '-' factor | atom ('^' int)?
//! atom   := rational | var | '(' expr ')'
//!         | ('sin' | 'cos' | 'exp') '(' expr ')'
//! ```
//! Parsing yields a raw syntax tree; lowering to a normal form is a separate
//! pass so the same front end serves both purely-even expressions and
//! superfunction coordinate images.

use crate::error::{Error, Result};
use crate::rational::Rational;

use super::SmoothExpr;

/// Raw syntax tree, prior to normalization.
#[derive(Debug, Clone)]
pub enum Ast {
    Rat(Rational),
    Var(String),
    Neg(Box<Ast>),
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, u32),
    Sin(Box<Ast>),
    Cos(Box<Ast>),
    Exp(Box<Ast>),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    Slash,
    LParen,
    RParen,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

fn lex(text: &str) -> Result<Lexer> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
            }
            '+' => {
                toks.push((Tok::Plus, start));
                i += 1;
            }
            '-' => {
                toks.push((Tok::Minus, start));
                i += 1;
            }
            '*' => {
                toks.push((Tok::Star, start));
                i += 1;
            }
            '^' => {
                toks.push((Tok::Caret, start));
                i += 1;
            }
            '/' => {
                toks.push((Tok::Slash, start));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, start));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, start));
                i += 1;
            }
            '0'..='9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                toks.push((Tok::Int(text[start..i].to_string()), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                toks.push((Tok::Ident(text[start..i].to_string()), start));
            }
            _ => {
                return Err(Error::Syntax {
                    position: start,
                    message: format!("unexpected character '{c}'"),
                })
            }
        }
    }
    Ok(Lexer {
        toks,
        pos: 0,
        end: text.len(),
    })
}

impl Lexer {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, p)| *p)
    }

    fn next(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<usize> {
        match self.next() {
            Some((t, p)) if t == want => Ok(p),
            Some((_, p)) => Err(Error::Syntax {
                position: p,
                message: format!("expected {what}"),
            }),
            None => Err(Error::Syntax {
                position: self.end,
                message: format!("expected {what}, found end of input"),
            }),
        }
    }
}

fn parse_int(text: &str, position: usize) -> Result<i64> {
    text.parse::<i64>().map_err(|_| Error::Syntax {
        position,
        message: format!("integer literal '{text}' out of range"),
    })
}

fn parse_expr_node(lx: &mut Lexer) -> Result<Ast> {
    let mut node = parse_term(lx)?;
    loop {
        match lx.peek() {
            Some(Tok::Plus) => {
                lx.next();
                node = Ast::Add(Box::new(node), Box::new(parse_term(lx)?));
            }
            Some(Tok::Minus) => {
                lx.next();
                node = Ast::Sub(Box::new(node), Box::new(parse_term(lx)?));
            }
            _ => return Ok(node),
        }
    }
}

fn parse_term(lx: &mut Lexer) -> Result<Ast> {
    let mut node = parse_factor(lx)?;
    while lx.peek() == Some(&Tok::Star) {
        lx.next();
        node = Ast::Mul(Box::new(node), Box::new(parse_factor(lx)?));
    }
    Ok(node)
}

fn parse_factor(lx: &mut Lexer) -> Result<Ast> {
    // Exponentiation binds tighter than negation: '-x^2' is '-(x^2)'.
    if lx.peek() == Some(&Tok::Minus) {
        lx.next();
        return Ok(Ast::Neg(Box::new(parse_factor(lx)?)));
    }
    let atom = parse_atom(lx)?;
    if lx.peek() == Some(&Tok::Caret) {
        lx.next();
        let (tok, p) = lx.next().ok_or(Error::Syntax {
            position: lx.end,
            message: "expected exponent, found end of input".into(),
        })?;
        let exp = match tok {
            Tok::Int(digits) => parse_int(&digits, p)?,
            Tok::Minus => {
                return Err(Error::Syntax {
                    position: p,
                    message: "negative exponents are not supported".into(),
                })
            }
            _ => {
                return Err(Error::Syntax {
                    position: p,
                    message: "expected exponent".into(),
                })
            }
        };
        let exp = u32::try_from(exp).map_err(|_| Error::Syntax {
            position: p,
            message: "exponent out of range".into(),
        })?;
        return Ok(Ast::Pow(Box::new(atom), exp));
    }
    Ok(atom)
}

fn parse_atom(lx: &mut Lexer) -> Result<Ast> {
    match lx.next() {
        Some((Tok::Int(digits), p)) => {
            let num = parse_int(&digits, p)?;
            // A '/' directly after an integer continues a rational literal.
            if lx.peek() == Some(&Tok::Slash) {
                lx.next();
                match lx.next() {
                    Some((Tok::Int(d2), p2)) => {
                        let den = parse_int(&d2, p2)?;
                        if den == 0 {
                            return Err(Error::Syntax {
                                position: p2,
                                message: "zero denominator".into(),
                            });
                        }
                        Ok(Ast::Rat(Rational::new(num, den).unwrap()))
                    }
                    Some((_, p2)) => Err(Error::Syntax {
                        position: p2,
                        message: "expected denominator".into(),
                    }),
                    None => Err(Error::Syntax {
                        position: lx.end,
                        message: "expected denominator, found end of input".into(),
                    }),
                }
            } else {
                Ok(Ast::Rat(Rational::from_int(num)))
            }
        }
        Some((Tok::Ident(name), _)) => match name.as_str() {
            "sin" | "cos" | "exp" => {
                lx.expect(Tok::LParen, "'(' after function name")?;
                let arg = parse_expr_node(lx)?;
                lx.expect(Tok::RParen, "')'")?;
                Ok(match name.as_str() {
                    "sin" => Ast::Sin(Box::new(arg)),
                    "cos" => Ast::Cos(Box::new(arg)),
                    _ => Ast::Exp(Box::new(arg)),
                })
            }
            _ => Ok(Ast::Var(name)),
        },
        Some((Tok::LParen, _)) => {
            let inner = parse_expr_node(lx)?;
            lx.expect(Tok::RParen, "')'")?;
            Ok(inner)
        }
        Some((_, p)) => Err(Error::Syntax {
            position: p,
            message: "expected a number, variable, '(' or function".into(),
        }),
        None => Err(Error::Syntax {
            position: lx.end,
            message: "expected an expression, found end of input".into(),
        }),
    }
}

/// Parses `text` to a raw tree, requiring all input to be consumed.
pub(crate) fn parse_ast(text: &str) -> Result<Ast> {
    let mut lx = lex(text)?;
    let node = parse_expr_node(&mut lx)?;
    if lx.peek().is_some() {
        return Err(Error::Syntax {
            position: lx.here(),
            message: "unexpected trailing input".into(),
        });
    }
    Ok(node)
}

/// Lowers a raw tree into normal form over the given even variables only.
pub(crate) fn lower_even(ast: &Ast, vars: &[String]) -> Result<SmoothExpr> {
    match ast {
        Ast::Rat(r) => Ok(SmoothExpr::constant(r.clone())),
        Ast::Var(name) => {
            if vars.iter().any(|v| v == name) {
                Ok(SmoothExpr::var(name))
            } else {
                Err(Error::UnknownVariable(name.clone()))
            }
        }
        Ast::Neg(a) => Ok(lower_even(a, vars)?.neg()),
        Ast::Add(a, b) => Ok(lower_even(a, vars)?.add(&lower_even(b, vars)?)),
        Ast::Sub(a, b) => Ok(lower_even(a, vars)?.sub(&lower_even(b, vars)?)),
        Ast::Mul(a, b) => Ok(lower_even(a, vars)?.mul(&lower_even(b, vars)?)),
        Ast::Pow(a, e) => Ok(lower_even(a, vars)?.pow(*e)),
        Ast::Sin(a) => Ok(SmoothExpr::sin_of(&lower_even(a, vars)?)),
        Ast::Cos(a) => Ok(SmoothExpr::cos_of(&lower_even(a, vars)?)),
        Ast::Exp(a) => Ok(SmoothExpr::exp_of(&lower_even(a, vars)?)),
    }
}

/// Parses a smooth function of the given even variables into normal form.
pub fn parse_expr(text: &str, vars: &[String]) -> Result<SmoothExpr> {
    lower_even(&parse_ast(text)?, vars)
}
