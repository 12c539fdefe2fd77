//! A small arithmetic expression grammar for user-supplied Hamiltonians.
//!
//! Supported: `+ - * / ^`, unary minus, parentheses, the functions `sin`,
//! `cos`, `exp`, decimal literals, and the variables `t` (time), `r`,
//! `theta` (disc polar chart) and `z`, `phi` (sphere cylinder chart).
//!
//! The parser is a hand-rolled recursive descent over bytes. It must never
//! panic on any input (it is fuzzed): instead it returns [`Error::Parse`]
//! with a byte offset. Hard limits keep adversarial input cheap: input
//! length, token count, and nesting depth are all capped. Evaluation is
//! plain `f64` arithmetic — division by zero and overflow follow IEEE rules
//! (inf/NaN propagate, no panics).

use crate::error::{Error, Result};

/// Upper bound on input length in bytes.
pub const MAX_INPUT_LEN: usize = 64 * 1024;
/// Upper bound on parse-tree nesting depth.
pub const MAX_DEPTH: usize = 256;

/// Variables an expression may reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    T,
    R,
    Theta,
    Z,
    Phi,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::R => "r",
            Var::Theta => "theta",
            Var::Z => "z",
            Var::Phi => "phi",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Parsed expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Variable bindings for evaluation. Chart variables that do not apply to
/// the surface at hand are simply absent and evaluate as an error at parse
/// time (see [`Expr::check_vars`]), so `None` never leaks into arithmetic.
#[derive(Clone, Copy, Debug, Default)]
pub struct Env {
    pub t: f64,
    pub r: f64,
    pub theta: f64,
    pub z: f64,
    pub phi: f64,
}

impl Expr {
    /// Evaluate with all variables bound. Total: never panics.
    pub fn eval(&self, env: &Env) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::T) => env.t,
            Expr::Var(Var::R) => env.r,
            Expr::Var(Var::Theta) => env.theta,
            Expr::Var(Var::Z) => env.z,
            Expr::Var(Var::Phi) => env.phi,
            Expr::Neg(e) => -e.eval(env),
            Expr::Bin(op, a, b) => {
                let x = a.eval(env);
                let y = b.eval(env);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => x.powf(y),
                }
            }
            Expr::Call(f, e) => {
                let x = e.eval(env);
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                }
            }
        }
    }

    /// Collect the set of variables the expression references.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
            Expr::Neg(e) | Expr::Call(_, e) => e.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Reject variables that do not exist on the given chart family.
    /// `allowed` is the list of chart variables valid for the surface
    /// (time `t` is always allowed).
    pub fn check_vars(&self, allowed: &[Var]) -> Result<()> {
        for v in self.vars() {
            if v != Var::T && !allowed.contains(&v) {
                return Err(Error::Config(format!(
                    "expression uses variable '{}' which is not a coordinate of this surface",
                    v.name()
                )));
            }
        }
        Ok(())
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    depth: usize,
}

/// Parse an expression string. Errors carry the byte offset of the failure.
pub fn parse(input: &str) -> Result<Expr> {
    if input.len() > MAX_INPUT_LEN {
        return Err(Error::Parse {
            offset: MAX_INPUT_LEN,
            message: format!("input exceeds {MAX_INPUT_LEN} bytes"),
        });
    }
    let mut p = Parser {
        src: input.as_bytes(),
        pos: 0,
        depth: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn err(&self, message: &str) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(&c) = self.src.get(self.pos) {
            if c == b' ' || c == b'\t' || c == b'\n' || c == b'\r' {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            Err(self.err("expression nests too deeply"))
        } else {
            Ok(())
        }
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> Result<Expr> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Bin(BinOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Bin(BinOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        self.leave();
        Ok(lhs)
    }

    // term := factor (('*' | '/') factor)*
    fn term(&mut self) -> Result<Expr> {
        self.enter()?;
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expr::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expr::Bin(BinOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        self.leave();
        Ok(lhs)
    }

    // factor := '-' factor | power
    fn factor(&mut self) -> Result<Expr> {
        self.enter()?;
        let out = if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.factor()?;
            Ok(Expr::Neg(Box::new(inner)))
        } else {
            self.power()
        };
        self.leave();
        out
    }

    // power := atom ('^' factor)?   (right-associative, unary binds in the
    // exponent: 2^-t parses)
    fn power(&mut self) -> Result<Expr> {
        self.enter()?;
        let base = self.atom()?;
        let out = if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.factor()?;
            Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)))
        } else {
            Ok(base)
        };
        self.leave();
        out
    }

    // atom := number | ident | ident '(' expr ')' | '(' expr ')'
    fn atom(&mut self) -> Result<Expr> {
        self.enter()?;
        let out = match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.err("expected a number, name, or '('")),
            None => Err(self.err("unexpected end of input")),
        };
        self.leave();
        out
    }

    fn number(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while let Some(&c) = self.src.get(self.pos) {
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else {
                break;
            }
        }
        // optional exponent part: e/E [+-] digits
        if let Some(&c) = self.src.get(self.pos) {
            if c == b'e' || c == b'E' {
                let mut probe = self.pos + 1;
                if let Some(&s) = self.src.get(probe) {
                    if s == b'+' || s == b'-' {
                        probe += 1;
                    }
                }
                if self.src.get(probe).is_some_and(|d| d.is_ascii_digit()) {
                    self.pos = probe;
                    while self.src.get(self.pos).is_some_and(|d| d.is_ascii_digit()) {
                        self.pos += 1;
                    }
                }
            }
        }
        // the slice is ASCII by construction
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Expr::Num(v)),
            Ok(_) => Err(Error::Parse {
                offset: start,
                message: "literal overflows f64".to_string(),
            }),
            Err(_) => Err(Error::Parse {
                offset: start,
                message: format!("bad numeric literal '{text}'"),
            }),
        }
    }

    fn ident(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while let Some(&c) = self.src.get(self.pos) {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        if let Some(func) = match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            _ => None,
        } {
            if self.peek() != Some(b'(') {
                return Err(self.err("function call needs '('"));
            }
            self.pos += 1;
            let arg = self.expr()?;
            if self.peek() != Some(b')') {
                return Err(self.err("expected ')' after function argument"));
            }
            self.pos += 1;
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        let var = match name {
            "t" => Var::T,
            "r" => Var::R,
            "theta" => Var::Theta,
            "z" => Var::Z,
            "phi" => Var::Phi,
            "" => {
                return Err(Error::Parse {
                    offset: start,
                    message: "expected a name".to_string(),
                })
            }
            other => {
                return Err(Error::Parse {
                    offset: start,
                    message: format!("unknown name '{other}'"),
                })
            }
        };
        Ok(Expr::Var(var))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_str(s: &str, env: &Env) -> f64 {
        parse(s).unwrap().eval(env)
    }

    #[test]
    fn precedence_and_associativity() {
        let env = Env::default();
        assert_eq!(eval_str("1+2*3", &env), 7.0);
        assert_eq!(eval_str("(1+2)*3", &env), 9.0);
        assert_eq!(eval_str("2^3^2", &env), 512.0); // right-assoc
        assert_eq!(eval_str("-2^2", &env), -4.0); // unary minus binds loosely
        assert_eq!(eval_str("2^-1", &env), 0.5);
        assert_eq!(eval_str("6/3/2", &env), 1.0); // left-assoc
    }

    #[test]
    fn variables_and_functions() {
        let env = Env {
            t: 0.5,
            z: -0.25,
            ..Env::default()
        };
        let v = eval_str("t*z + cos(0)", &env);
        assert!((v - (0.5 * -0.25 + 1.0)).abs() < 1e-15);
        let w = eval_str("exp(z)^2", &env);
        assert!((w - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(eval_str("sin(t)*sin(t)+cos(t)*cos(t)", &env), 1.0);
    }

    #[test]
    fn scientific_literals() {
        let env = Env::default();
        assert_eq!(eval_str("1e-3", &env), 1e-3);
        assert_eq!(eval_str("2.5E2", &env), 250.0);
        // 'e' not followed by digits is a parse error (unknown name), not a panic
        assert!(parse("1e").is_err());
    }

    #[test]
    fn errors_carry_offsets() {
        match parse("1 + spam") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse("").is_err());
        assert!(parse("(1+2").is_err());
        assert!(parse("1 2").is_err());
        assert!(parse("sin 3").is_err());
    }

    #[test]
    fn depth_limit_is_enforced() {
        let deep = format!("{}1{}", "(".repeat(MAX_DEPTH * 2), ")".repeat(MAX_DEPTH * 2));
        assert!(parse(&deep).is_err());
    }

    #[test]
    fn surface_variable_check() {
        let e = parse("z*t").unwrap();
        assert!(e.check_vars(&[Var::Z, Var::Phi]).is_ok());
        assert!(e.check_vars(&[Var::R, Var::Theta]).is_err());
    }

    #[test]
    fn division_by_zero_is_inf_not_panic() {
        let env = Env::default();
        assert!(eval_str("1/0", &env).is_infinite());
        assert!(eval_str("0/0", &env).is_nan());
    }
}
