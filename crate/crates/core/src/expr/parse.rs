use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::Zero;

use super::atom::{AtomKind, Relation};
use super::tree::Expr;
use super::{ExprError, Q};

/// Names the parser must know about beyond plain variables.
#[derive(Clone, Debug, Default)]
pub struct Symbols {
    /// Constants allowed in symbolic exponents.
    pub exponents: BTreeSet<String>,
    pub algebraic: BTreeMap<String, Arc<Relation>>,
    /// Unknown functions with their argument lists, so `xi_{,yy}` and a bare
    /// `alpha` can be written without arguments.
    pub functions: BTreeMap<String, Vec<String>>,
}

impl Symbols {
    pub fn with_exponent(mut self, name: &str) -> Self {
        self.exponents.insert(name.to_string());
        self
    }

    pub fn with_function(mut self, name: &str, args: &[&str]) -> Self {
        self.functions.insert(name.to_string(), args.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn with_algebraic(mut self, name: &str, relation: Relation) -> Self {
        self.algebraic.insert(name.to_string(), Arc::new(relation));
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    /// `_{,xy}` suffix, already split at commas.
    Deriv(Vec<String>),
    Prime,
    Sym(char),
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: l0, col: c0 });
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            push(&mut out, Tok::Int(s.parse().unwrap()));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '_')
                && !(chars[i] == '_' && chars.get(i + 1) == Some(&'{'))
            {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            push(&mut out, Tok::Ident(s));
            if chars.get(i) == Some(&'_') && chars.get(i + 1) == Some(&'{') {
                let (dl, dc) = (line, col + (i - start));
                let close = chars[i..].iter().position(|&ch| ch == '}').map(|p| p + i);
                let Some(close) = close else {
                    return Err(ExprError::Syntax { line: dl, col: dc, msg: "unterminated derivative suffix".into() });
                };
                let body: String = chars[i + 2..close].iter().collect();
                let Some(rest) = body.strip_prefix(',') else {
                    return Err(ExprError::Syntax {
                        line: dl,
                        col: dc,
                        msg: "derivative suffix must start with ','".into(),
                    });
                };
                let pieces: Vec<String> = rest.split(',').map(|p| p.trim().to_string()).collect();
                if pieces.iter().any(|p| p.is_empty() || !p.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_')) {
                    return Err(ExprError::Syntax { line: dl, col: dc, msg: "malformed derivative suffix".into() });
                }
                out.push(Token { tok: Tok::Deriv(pieces), line: dl, col: dc });
                i = close + 1;
            }
        } else if c == '\'' {
            i += 1;
            push(&mut out, Tok::Prime);
        } else if "+-*/^(),".contains(c) {
            i += 1;
            push(&mut out, Tok::Sym(c));
        } else {
            return Err(ExprError::UnknownToken { token: c.to_string(), line, col });
        }
        col += i - start;
    }
    out.push(Token { tok: Tok::End, line, col });
    Ok(out)
}

/// Parses one expression; `syms` supplies declared exponents, algebraic
/// constants and function signatures.
pub fn parse_with(text: &str, syms: &Symbols) -> Result<Expr, ExprError> {
    let mut p = Parser { toks: lex(text)?, pos: 0, syms };
    let e = p.expr()?;
    p.expect_end()?;
    Ok(e)
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    syms: &'a Symbols,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ExprError> {
        let t = &self.toks[self.pos];
        Err(ExprError::Syntax { line: t.line, col: t.col, msg: msg.into() })
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn expect_end(&self) -> Result<(), ExprError> {
        match self.peek() {
            Tok::End => Ok(()),
            _ => self.err("unexpected trailing input"),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat('+') {
                terms.push(self.term()?);
            } else if self.eat('-') {
                terms.push(self.term()?.neg());
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::Sum(terms) })
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut factors = vec![self.leading_factor()?];
        loop {
            if self.eat('*') {
                factors.push(self.factor()?);
            } else if self.eat('/') {
                let f = self.factor()?;
                factors.push(Expr::Pow(Box::new(f), Box::new(Expr::int(-1))));
            } else {
                break;
            }
        }
        Ok(if factors.len() == 1 { factors.pop().unwrap() } else { Expr::Product(factors) })
    }

    /// `INT / INT` opening a term is a single rational literal.
    fn leading_factor(&mut self) -> Result<Expr, ExprError> {
        if let (Tok::Int(n), Tok::Sym('/'), Tok::Int(d)) = (self.peek(), self.peek_at(1), self.peek_at(2)) {
            if *self.peek_at(3) != Tok::Sym('^') {
                if d.is_zero() {
                    return Err(ExprError::DivisionByZero);
                }
                let q = Q::new(n.clone(), d.clone());
                self.next();
                self.next();
                self.next();
                return Ok(Expr::Num(q));
            }
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        if self.eat('-') {
            return Ok(self.factor()?.neg());
        }
        let base = if self.eat('(') {
            let e = self.expr()?;
            self.expect(')')?;
            e
        } else {
            self.atom()?
        };
        if self.eat('^') {
            let (line, col) = (self.toks[self.pos].line, self.toks[self.pos].col);
            let exponent = self.factor()?;
            self.check_exponent(&exponent, line, col)?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn check_exponent(&self, e: &Expr, line: usize, col: usize) -> Result<(), ExprError> {
        let bad = || ExprError::BadExponent { line, col };
        let f = e.to_frac().map_err(|_| bad())?;
        if let Some(c) = f.as_constant() {
            return if c.is_integer() { Ok(()) } else { Err(bad()) };
        }
        if f.has_denominator() {
            return Err(bad());
        }
        for (m, c) in f.num().terms() {
            if m.is_one() {
                if !c.is_integer() {
                    return Err(bad());
                }
                continue;
            }
            let ok = m.exponential_arg().is_none()
                && m.sym_pows().next().is_none()
                && m.degree() == 1
                && m.atoms().all(|(a, _)| *a.kind() == AtomKind::Var && self.syms.exponents.contains(a.name()));
            if !ok {
                return Err(bad());
            }
        }
        Ok(())
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let t = self.next();
        match t.tok {
            Tok::Int(n) => Ok(Expr::Num(Q::from_integer(n))),
            Tok::Ident(name) => self.ident(name, t.line, t.col),
            Tok::End => Err(ExprError::Syntax { line: t.line, col: t.col, msg: "unexpected end of input".into() }),
            other => {
                Err(ExprError::Syntax { line: t.line, col: t.col, msg: format!("unexpected {}", describe(&other)) })
            }
        }
    }

    fn ident(&mut self, name: String, line: usize, col: usize) -> Result<Expr, ExprError> {
        let syntax = |msg: &str| ExprError::Syntax { line, col, msg: msg.to_string() };
        if *self.peek() == Tok::Prime {
            let mut k = 0;
            while *self.peek() == Tok::Prime {
                self.next();
                k += 1;
            }
            return Ok(Expr::Jet(name, k));
        }
        let deriv = match self.peek() {
            Tok::Deriv(d) => {
                let d = d.clone();
                self.next();
                Some(d)
            }
            _ => None,
        };
        if deriv.is_none() && *self.peek() == Tok::Sym('(') {
            match name.as_str() {
                "exp" | "sqrt" => {
                    self.next();
                    let a = self.expr()?;
                    self.expect(')')?;
                    return Ok(if name == "exp" { Expr::Exp(Box::new(a)) } else { Expr::Sqrt(Box::new(a)) });
                }
                "D" => {
                    self.next();
                    let dep = self.plain_ident()?;
                    self.expect(',')?;
                    self.plain_ident()?;
                    self.expect(',')?;
                    let k = match self.next().tok {
                        Tok::Int(k) => u32::try_from(k).map_err(|_| syntax("derivative order too large"))?,
                        _ => return Err(syntax("D(y, x, k) needs an integer order")),
                    };
                    self.expect(')')?;
                    return Ok(Expr::Jet(dep, k));
                }
                _ => {}
            }
        }
        let args = if *self.peek() == Tok::Sym('(') {
            self.next();
            let mut args = vec![self.plain_ident()?];
            while self.eat(',') {
                args.push(self.plain_ident()?);
            }
            self.expect(')')?;
            Some(args)
        } else {
            None
        };
        let args = match (args, self.syms.functions.get(&name)) {
            (Some(a), _) => Some(a),
            (None, Some(a)) => Some(a.clone()),
            (None, None) => None,
        };
        match (args, deriv) {
            (Some(args), deriv) => {
                let mut derivs = vec![0u32; args.len()];
                for piece in deriv.unwrap_or_default() {
                    if let Some(i) = args.iter().position(|a| *a == piece) {
                        derivs[i] += 1;
                        continue;
                    }
                    for ch in piece.chars() {
                        let i = args
                            .iter()
                            .position(|a| a.len() == 1 && a.starts_with(ch))
                            .ok_or_else(|| syntax(&format!("{name} has no argument '{ch}'")))?;
                        derivs[i] += 1;
                    }
                }
                Ok(Expr::Func { name, args, derivs })
            }
            (None, Some(_)) => Err(syntax(&format!("derivative of undeclared function {name}"))),
            (None, None) => Ok(match self.syms.algebraic.get(&name) {
                Some(r) => Expr::Alg { name, relation: r.clone() },
                None => Expr::Var(name),
            }),
        }
    }

    fn plain_ident(&mut self) -> Result<String, ExprError> {
        let t = self.next();
        match t.tok {
            Tok::Ident(s) if !matches!(self.peek(), Tok::Prime | Tok::Sym('(') | Tok::Deriv(_)) => Ok(s),
            _ => Err(ExprError::Syntax { line: t.line, col: t.col, msg: "expected a variable name".into() }),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Int(n) => format!("number {n}"),
        Tok::Ident(s) => format!("name {s}"),
        Tok::Deriv(_) => "derivative suffix".into(),
        Tok::Prime => "'''".into(),
        Tok::Sym(c) => format!("'{c}'"),
        Tok::End => "end of input".into(),
    }
}
