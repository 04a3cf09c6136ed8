//! Nonlinearities of finite point-lag form, parsed from strings.
//!
//! Grammar: numeric literals, variables `x<i>@<d>` (component `i` of the
//! state at lag `d`), binary `+ - * /`, unary `-`, parentheses, and the
//! globally Lipschitz primitives `sin cos tanh atan abs`. The Lipschitz
//! constant of the whole map is declared by the user, not derived.

use crate::error::{CoreError, Result};
use crate::measure::{Segment, GRID_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tanh,
    Atan,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Atan => "atan",
            Func::Abs => "abs",
        }
    }

    fn eval(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tanh => x.tanh(),
            Func::Atan => x.atan(),
            Func::Abs => x.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Component `index` of the state at lag `lag` (time `t - lag`).
    Var { index: usize, lag: f64 },
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Pretty-print in a form that reparses to a structurally identical tree.
    pub fn to_source(&self) -> String {
        fn prec(e: &Expr) -> u8 {
            match e {
                Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
                Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
                Expr::Neg(..) => 3,
                _ => 4,
            }
        }
        fn go(e: &Expr, out: &mut String) {
            match e {
                Expr::Num(v) => {
                    if *v < 0.0 {
                        out.push_str(&format!("({v})"));
                    } else {
                        out.push_str(&format!("{v}"));
                    }
                }
                Expr::Var { index, lag } => out.push_str(&format!("x{index}@{lag}")),
                Expr::Neg(inner) => {
                    out.push('-');
                    wrap(inner, 4, out);
                }
                Expr::Bin(op, a, b) => {
                    let (sym, p) = match op {
                        BinOp::Add => ("+", 1),
                        BinOp::Sub => ("-", 1),
                        BinOp::Mul => ("*", 2),
                        BinOp::Div => ("/", 2),
                    };
                    wrap(a, p, out);
                    out.push_str(sym);
                    // Left-associative: the right operand needs strictly
                    // higher precedence to survive a round trip.
                    wrap(b, p + 1, out);
                }
                Expr::Call(f, a) => {
                    out.push_str(f.name());
                    out.push('(');
                    go(a, out);
                    out.push(')');
                }
            }
        }
        fn wrap(e: &Expr, min_prec: u8, out: &mut String) {
            if prec(e) < min_prec {
                out.push('(');
                go(e, out);
                out.push(')');
            } else {
                go(e, out);
            }
        }
        let mut s = String::new();
        go(self, &mut s);
        s
    }

    fn visit_vars(&self, f: &mut impl FnMut(usize, f64)) {
        match self {
            Expr::Num(_) => {}
            Expr::Var { index, lag } => f(*index, *lag),
            Expr::Neg(a) | Expr::Call(_, a) => a.visit_vars(f),
            Expr::Bin(_, a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    fn has_division(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var { .. } => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.has_division(),
            Expr::Bin(op, a, b) => *op == BinOp::Div || a.has_division() || b.has_division(),
        }
    }

    fn eval_with(&self, lookup: &impl Fn(usize, f64) -> f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var { index, lag } => lookup(*index, *lag),
            Expr::Neg(a) => -a.eval_with(lookup),
            Expr::Bin(op, a, b) => {
                let (x, y) = (a.eval_with(lookup), b.eval_with(lookup));
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                }
            }
            Expr::Call(f, a) => f.eval(a.eval_with(lookup)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    Num(f64),
    Var { index: usize, lag: f64 },
    Func(Func),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self { src: src.as_bytes(), pos: 0 }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // optional exponent
        if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
            let mut p = self.pos + 1;
            if p < self.src.len() && (self.src[p] == b'+' || self.src[p] == b'-') {
                p += 1;
            }
            if p < self.src.len() && self.src[p].is_ascii_digit() {
                self.pos = p;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>().map_err(|_| CoreError::Parse {
            position: start,
            message: format!("invalid numeric literal `{text}`"),
        })
    }

    fn next(&mut self) -> Result<Option<(usize, Tok)>> {
        self.skip_ws();
        if self.pos >= self.src.len() {
            return Ok(None);
        }
        let start = self.pos;
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => {
                self.pos += 1;
                Tok::Plus
            }
            b'-' => {
                self.pos += 1;
                Tok::Minus
            }
            b'*' => {
                self.pos += 1;
                Tok::Star
            }
            b'/' => {
                self.pos += 1;
                Tok::Slash
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b'0'..=b'9' | b'.' => Tok::Num(self.number()?),
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let ident = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                if self.pos < self.src.len() && self.src[self.pos] == b'@' {
                    // variable reference x<i>@<d>
                    let index = ident
                        .strip_prefix('x')
                        .and_then(|digits| {
                            (!digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()))
                                .then(|| digits.parse::<usize>().ok())
                                .flatten()
                        })
                        .ok_or_else(|| CoreError::Parse {
                            position: start,
                            message: format!(
                                "unknown variable `{ident}`; state components are written x<i>@<lag>"
                            ),
                        })?;
                    self.pos += 1; // '@'
                    if self.pos >= self.src.len()
                        || !(self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
                    {
                        return Err(CoreError::Parse {
                            position: self.pos,
                            message: "expected a lag after `@`".into(),
                        });
                    }
                    let lag = self.number()?;
                    Tok::Var { index, lag }
                } else {
                    let func = match ident {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "tanh" => Func::Tanh,
                        "atan" => Func::Atan,
                        "abs" => Func::Abs,
                        _ => {
                            return Err(CoreError::Parse {
                                position: start,
                                message: format!("unknown function or variable `{ident}`"),
                            })
                        }
                    };
                    Tok::Func(func)
                }
            }
            other => {
                return Err(CoreError::Parse {
                    position: start,
                    message: format!("unexpected character `{}`", other as char),
                })
            }
        };
        Ok(Some((start, tok)))
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    cursor: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.cursor).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.cursor).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.cursor).map(|(_, t)| *t);
        self.cursor += 1;
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.cursor += 1;
            Ok(())
        } else {
            Err(CoreError::Parse { position: self.pos(), message: format!("expected {what}") })
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => break,
            };
            self.cursor += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => break,
            };
            self.cursor += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(&Tok::Minus) {
            self.cursor += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        let position = self.pos();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::Var { index, lag }) => Ok(Expr::Var { index, lag }),
            Some(Tok::Func(f)) => {
                self.expect(Tok::LParen, "`(` after function name")?;
                let arg = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Call(f, Box::new(arg)))
            }
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(_) | None => Err(CoreError::Parse {
                position,
                message: "expected a number, variable, function call, or `(`".into(),
            }),
        }
    }
}

/// Parse a single expression string.
pub fn parse_expr(src: &str) -> Result<Expr> {
    let mut lexer = Lexer::new(src);
    let mut toks = Vec::new();
    while let Some(t) = lexer.next()? {
        toks.push(t);
    }
    let mut parser = Parser { toks, cursor: 0, end: src.len() };
    let expr = parser.expr()?;
    if parser.cursor != parser.toks.len() {
        return Err(CoreError::Parse {
            position: parser.pos(),
            message: "trailing input after expression".into(),
        });
    }
    Ok(expr)
}

/// A parsed nonlinearity `f` with its declared Lipschitz constant.
#[derive(Debug, Clone)]
pub struct NonlinearitySpec {
    delays: Vec<f64>,
    expressions: Vec<String>,
    lipschitz: f64,
    asts: Vec<Expr>,
}

impl NonlinearitySpec {
    /// Parse one expression per state component and validate lags and
    /// variable indices against the system's `n` and `tau`.
    ///
    /// Returns the spec together with any warnings (currently: division
    /// nodes, whose global Lipschitz property cannot be guaranteed).
    pub fn parse(
        sources: &[String],
        n: usize,
        tau: f64,
        lipschitz: f64,
    ) -> Result<(Self, Vec<String>)> {
        if sources.is_empty() || sources.len() != n {
            return Err(CoreError::Shape(format!(
                "expected {n} expressions (one per component), got {}",
                sources.len()
            )));
        }
        if lipschitz < 0.0 || !lipschitz.is_finite() {
            return Err(CoreError::Precondition(format!(
                "Lipschitz constant must be nonnegative, got {lipschitz}"
            )));
        }
        let mut warnings = Vec::new();
        let mut delays: Vec<f64> = Vec::new();
        let mut asts = Vec::new();
        for (comp, src) in sources.iter().enumerate() {
            let ast = parse_expr(src)?;
            let mut bad: Option<String> = None;
            ast.visit_vars(&mut |index, lag| {
                if index >= n {
                    bad.get_or_insert(format!(
                        "component {comp}: variable x{index} exceeds state dimension {n}"
                    ));
                }
                if lag < 0.0 || lag > tau + GRID_EPS {
                    bad.get_or_insert(format!(
                        "component {comp}: lag {lag} lies outside [0, {tau}]"
                    ));
                }
                if !delays.iter().any(|d| (d - lag).abs() <= GRID_EPS) {
                    delays.push(lag);
                }
            });
            if let Some(msg) = bad {
                return Err(CoreError::Precondition(msg));
            }
            if ast.has_division() {
                warnings.push(format!(
                    "component {comp}: expression contains `/`; global Lipschitz continuity is not guaranteed"
                ));
            }
            asts.push(ast);
        }
        delays.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok((
            Self { delays, expressions: sources.to_vec(), lipschitz, asts },
            warnings,
        ))
    }

    pub fn dim(&self) -> usize {
        self.asts.len()
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn expressions(&self) -> &[String] {
        &self.expressions
    }

    pub fn asts(&self) -> &[Expr] {
        &self.asts
    }

    /// Evaluate `f` on a segment; lags must be grid nodes of the segment.
    pub fn eval(&self, seg: &Segment) -> Result<nalgebra::DVector<f64>> {
        let last = seg.values.len() - 1;
        for &lag in &self.delays {
            let off = crate::measure::require_grid_index(lag, seg.h, "nonlinearity lag")?;
            if off as usize > last {
                return Err(CoreError::Range(format!(
                    "lag {lag} exceeds the segment horizon {}",
                    seg.tau
                )));
            }
        }
        let lookup = |index: usize, lag: f64| {
            let off = (lag / seg.h).round() as usize;
            seg.values[last - off][index]
        };
        let out = nalgebra::DVector::from_iterator(
            self.asts.len(),
            self.asts.iter().map(|ast| ast.eval_with(&lookup)),
        );
        if out.iter().any(|x| !x.is_finite()) {
            return Err(CoreError::Evaluation("nonlinearity produced a non-finite value".into()));
        }
        Ok(out)
    }

    /// Fast-path evaluation against flat state storage used by the
    /// integrators: `lookup(component, node_offset)` where `node_offset` is
    /// the lag in grid steps.
    pub(crate) fn eval_flat(&self, h: f64, lookup: &impl Fn(usize, usize) -> f64) -> Vec<f64> {
        let resolve = |index: usize, lag: f64| lookup(index, (lag / h).round() as usize);
        self.asts.iter().map(|ast| ast.eval_with(&resolve)).collect()
    }
}
