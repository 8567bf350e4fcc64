//! Right-hand sides `psi(x, u, theta)` and boundary data.
//!
//! `h(x, u)` is written in a small expression language over the variables
//! `rho`, `theta` and `u`:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := factor ('*' factor)*
//! factor  := '-' factor | atom ('^' number)?
//! atom    := number | rho | theta | u | cos '(' expr ')' | sin '(' expr ')' | '(' expr ')'
//! ```

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hchart::Grid;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Rho,
    Theta,
    U,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, f64),
    Cos(Box<Expr>),
    Sin(Box<Expr>),
}

impl Expr {
    /// Value and derivative with respect to `u`.
    pub fn eval(&self, rho: f64, theta: f64, u: f64) -> (f64, f64) {
        match self {
            Expr::Const(c) => (*c, 0.0),
            Expr::Rho => (rho, 0.0),
            Expr::Theta => (theta, 0.0),
            Expr::U => (u, 1.0),
            Expr::Add(a, b) => {
                let (x, dx) = a.eval(rho, theta, u);
                let (y, dy) = b.eval(rho, theta, u);
                (x + y, dx + dy)
            }
            Expr::Sub(a, b) => {
                let (x, dx) = a.eval(rho, theta, u);
                let (y, dy) = b.eval(rho, theta, u);
                (x - y, dx - dy)
            }
            Expr::Mul(a, b) => {
                let (x, dx) = a.eval(rho, theta, u);
                let (y, dy) = b.eval(rho, theta, u);
                (x * y, dx * y + x * dy)
            }
            Expr::Neg(a) => {
                let (x, dx) = a.eval(rho, theta, u);
                (-x, -dx)
            }
            Expr::Pow(a, p) => {
                let (x, dx) = a.eval(rho, theta, u);
                if *p == 0.0 {
                    (1.0, 0.0)
                } else {
                    (x.powf(*p), p * x.powf(p - 1.0) * dx)
                }
            }
            Expr::Cos(a) => {
                let (x, dx) = a.eval(rho, theta, u);
                (x.cos(), -x.sin() * dx)
            }
            Expr::Sin(a) => {
                let (x, dx) = a.eval(rho, theta, u);
                (x.sin(), x.cos() * dx)
            }
        }
    }

    pub fn depends_on_u(&self) -> bool {
        match self {
            Expr::U => true,
            Expr::Const(_) | Expr::Rho | Expr::Theta => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.depends_on_u() || b.depends_on_u(),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Cos(a) | Expr::Sin(a) => a.depends_on_u(),
        }
    }

    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Domain(format!("unexpected trailing input in '{src}'")));
        }
        Ok(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_ascii_digit()
                    || chars[i] == '.'
                    || chars[i] == 'e'
                    || chars[i] == 'E'
                    || ((chars[i] == '-' || chars[i] == '+') && matches!(chars[i - 1], 'e' | 'E')))
            {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| Error::Domain(format!("bad number '{s}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*^()".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(Error::Domain(format!("unexpected character '{c}' in expression")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::Domain(format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while self.eat('*') {
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if self.eat('^') {
            let neg = self.eat('-');
            match self.peek().cloned() {
                Some(Tok::Num(p)) => {
                    self.pos += 1;
                    Ok(Expr::Pow(Box::new(base), if neg { -p } else { p }))
                }
                _ => Err(Error::Domain("exponent must be a number".into())),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "rho" => Ok(Expr::Rho),
                    "theta" => Ok(Expr::Theta),
                    "u" => Ok(Expr::U),
                    "cos" | "sin" => {
                        self.expect('(')?;
                        let inner = self.expr()?;
                        self.expect(')')?;
                        Ok(if name == "cos" {
                            Expr::Cos(Box::new(inner))
                        } else {
                            Expr::Sin(Box::new(inner))
                        })
                    }
                    other => Err(Error::Domain(format!("unknown identifier '{other}'"))),
                }
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            _ => Err(Error::Domain("unexpected end of expression".into())),
        }
    }
}

/// Radial polynomial profile `sum_m c_m rho^m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile {
    pub coeffs: Vec<f64>,
}

impl RadialProfile {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn value(&self, rho: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * rho + c)
    }

    pub fn derivative(&self, rho: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (m, c)| acc * rho + m as f64 * c)
    }

    pub fn second_derivative(&self, rho: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(2)
            .rev()
            .fold(0.0, |acc, (m, c)| acc * rho + (m * (m - 1)) as f64 * c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PsiFamily {
    /// `theta^p h(x, u)`
    Power { p: f64, h: Expr },
    /// `exp(p theta) h(x, u)`
    Exponential { p: f64, h: Expr },
    /// One value per grid node, independent of `u` and `theta`.
    Tabulated(Vec<f64>),
}

/// Value of `psi` and its partial derivatives in `u` and `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiValue {
    pub value: f64,
    pub d_u: f64,
    pub d_theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiSpec {
    pub family: PsiFamily,
    /// Source text of `h` or a short description, echoed into reports.
    pub label: String,
}

impl PsiSpec {
    pub fn constant(c: f64) -> Self {
        Self {
            family: PsiFamily::Power {
                p: 0.0,
                h: Expr::Const(c),
            },
            label: format!("{c}"),
        }
    }

    pub fn power(p: f64, h: &str) -> Result<Self> {
        Ok(Self {
            family: PsiFamily::Power { p, h: Expr::parse(h)? },
            label: format!("theta^{p} * ({h})"),
        })
    }

    pub fn exponential(p: f64, h: &str) -> Result<Self> {
        Ok(Self {
            family: PsiFamily::Exponential { p, h: Expr::parse(h)? },
            label: format!("exp({p} theta) * ({h})"),
        })
    }

    pub fn tabulated(values: Vec<f64>, label: impl Into<String>) -> Self {
        Self {
            family: PsiFamily::Tabulated(values),
            label: label.into(),
        }
    }

    pub fn eval(&self, node: usize, rho: f64, angle: f64, u: f64, support: f64) -> PsiValue {
        match &self.family {
            PsiFamily::Power { p, h } => {
                let (hv, hu) = h.eval(rho, angle, u);
                let tp = if *p == 0.0 { 1.0 } else { support.powf(*p) };
                let dtp = if *p == 0.0 { 0.0 } else { p * support.powf(p - 1.0) };
                PsiValue {
                    value: tp * hv,
                    d_u: tp * hu,
                    d_theta: dtp * hv,
                }
            }
            PsiFamily::Exponential { p, h } => {
                let (hv, hu) = h.eval(rho, angle, u);
                let e = (p * support).exp();
                PsiValue {
                    value: e * hv,
                    d_u: e * hu,
                    d_theta: p * e * hv,
                }
            }
            PsiFamily::Tabulated(v) => PsiValue {
                value: v[node],
                d_u: 0.0,
                d_theta: 0.0,
            },
        }
    }

    /// Whether the value depends on the unknown at all.
    pub fn is_frozen(&self) -> bool {
        match &self.family {
            PsiFamily::Tabulated(_) => true,
            PsiFamily::Power { p, h } | PsiFamily::Exponential { p, h } => *p == 0.0 && !h.depends_on_u(),
        }
    }

    /// Exponent check `p >= k` for the growth condition on `psi^{1/k}`;
    /// `strict` asks for `p > k`. Tabulated data are not classified.
    pub fn growth_condition(&self, k: usize, strict: bool) -> Option<bool> {
        match &self.family {
            PsiFamily::Power { p, .. } | PsiFamily::Exponential { p, .. } => {
                let k = k as f64;
                Some(if strict { *p > k } else { *p >= k })
            }
            PsiFamily::Tabulated(_) => None,
        }
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if let PsiFamily::Tabulated(v) = &self.family {
            if v.len() != grid.len() {
                return Err(Error::Domain(format!(
                    "tabulated psi has {} values, grid has {} nodes",
                    v.len(),
                    grid.len()
                )));
            }
        }
        Ok(())
    }
}

/// Dirichlet data, defined on the whole disk by a closed form.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryData {
    Constant { c: f64 },
    /// `c / cosh(rho)`: the graph lies in the hyperplane `x_{n+1} = c`.
    Hyperplane { c: f64 },
    /// A radial profile; its trace on a circle is constant and it is extended
    /// off the boundary by that constant.
    Radial { profile: RadialProfile },
}

impl BoundaryData {
    /// Value prescribed at a boundary node of radius `rho`.
    pub fn boundary_value(&self, rho: f64) -> f64 {
        match self {
            BoundaryData::Constant { c } => *c,
            BoundaryData::Hyperplane { c } => c / rho.cosh(),
            BoundaryData::Radial { profile } => profile.value(rho),
        }
    }

    /// Closed-form extension into the disk, for a boundary ring of radius `rho_b`.
    pub fn extension(&self, rho: f64, rho_b: f64) -> f64 {
        match self {
            BoundaryData::Radial { profile } => profile.value(rho_b),
            other => other.boundary_value(rho),
        }
    }

    /// `|D phi| / phi` of the extension, needed < 1 for spacelike data.
    pub fn slope_ratio(&self, rho: f64) -> f64 {
        match self {
            BoundaryData::Constant { .. } | BoundaryData::Radial { .. } => 0.0,
            BoundaryData::Hyperplane { .. } => rho.tanh(),
        }
    }
}
