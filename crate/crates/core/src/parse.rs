//! Expression front end: lexes and parses field expressions like
//! `z*(z-(1+1i))*(z-(3+3i))`, `1/(z*(z-1)^2)`, `conj(z^2)`,
//! `moebius(A;B;C;D)` and `essential(n;m)` into canonical [`Field`] values.
//!
//! Complex literals carry a mandatory `i` suffix and may embed one fraction
//! bar, so `3/2i` lexes as the single literal `(3/2)i` while `1/(z-1)`
//! parses as a division. A bare `i` is the unit literal.

use num_complex::Complex64;

use crate::cpoly::CPoly;
use crate::error::ParseError;
use crate::field::{Field, MAX_DEGREE};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Complex64),
    Z,
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Semi,
    Eof,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek_byte(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    /// Reads an unsigned decimal mantissa with optional exponent.
    fn read_mantissa(&mut self) -> Option<f64> {
        let start = self.pos;
        while self.peek_byte().is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek_byte() == Some(b'.') {
            self.pos += 1;
            while self.peek_byte().is_some_and(|b| b.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if self.pos == start {
            return None;
        }
        // Exponent only when it is actually followed by digits.
        if matches!(self.peek_byte(), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.peek_byte(), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if self.peek_byte().is_some_and(|b| b.is_ascii_digit()) {
                while self.peek_byte().is_some_and(|b| b.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = mark;
            }
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
    }

    fn next_tok(&mut self) -> Result<(usize, Tok), ParseError> {
        self.skip_ws();
        let at = self.pos;
        let Some(b) = self.peek_byte() else {
            return Ok((at, Tok::Eof));
        };
        let simple = match b {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b';' => Some(Tok::Semi),
            _ => None,
        };
        if let Some(t) = simple {
            self.pos += 1;
            return Ok((at, t));
        }
        if b.is_ascii_digit() || b == b'.' {
            let mut value = self.read_mantissa().ok_or(ParseError::Syntax {
                pos: at,
                expected: "number".into(),
            })?;
            // Fraction bar inside the literal: only when '/' is directly
            // followed by a digit.
            if self.peek_byte() == Some(b'/')
                && self
                    .src
                    .get(self.pos + 1)
                    .is_some_and(|nb| nb.is_ascii_digit())
            {
                self.pos += 1;
                let den = self.read_mantissa().ok_or(ParseError::Syntax {
                    pos: self.pos,
                    expected: "denominator digits".into(),
                })?;
                value /= den;
            }
            if self.peek_byte() == Some(b'i')
                && !self
                    .src
                    .get(self.pos + 1)
                    .is_some_and(|nb| nb.is_ascii_alphanumeric())
            {
                self.pos += 1;
                return Ok((at, Tok::Num(Complex64::new(0.0, value))));
            }
            return Ok((at, Tok::Num(Complex64::new(value, 0.0))));
        }
        if b.is_ascii_alphabetic() || b == b'_' {
            let start = self.pos;
            while self
                .peek_byte()
                .is_some_and(|b| b.is_ascii_alphanumeric() || b == b'_')
            {
                self.pos += 1;
            }
            let word = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            return Ok((
                at,
                match word {
                    "z" => Tok::Z,
                    "i" => Tok::Num(Complex64::new(0.0, 1.0)),
                    other => Tok::Ident(other.to_string()),
                },
            ));
        }
        Err(ParseError::Syntax {
            pos: at,
            expected: "operator, number, `z`, or function name".into(),
        })
    }

    fn tokens(mut self) -> Result<Vec<(usize, Tok)>, ParseError> {
        let mut out = Vec::new();
        loop {
            let t = self.next_tok()?;
            let done = t.1 == Tok::Eof;
            out.push(t);
            if done {
                return Ok(out);
            }
        }
    }
}

/// A rational function of `z` in expanded coefficient form, or a conjugated
/// polynomial wrapper produced by `conj(...)`.
#[derive(Debug, Clone)]
enum Value {
    Rat { num: CPoly, den: CPoly },
    Conj(CPoly),
}

impl Value {
    fn constant(c: Complex64) -> Value {
        Value::Rat {
            num: CPoly::constant(c),
            den: CPoly::constant(Complex64::new(1.0, 0.0)),
        }
    }

    fn var() -> Value {
        Value::Rat {
            num: CPoly::var(),
            den: CPoly::constant(Complex64::new(1.0, 0.0)),
        }
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
}

const DEG_CAP_MSG: &str = "intermediate degree exceeds the supported cap";

fn cap(p: CPoly) -> Result<CPoly, ParseError> {
    if p.degree() > MAX_DEGREE {
        Err(ParseError::NotRecognizedForm(DEG_CAP_MSG.into()))
    } else {
        Ok(p)
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(ParseError::Syntax {
                pos: self.pos(),
                expected: what.into(),
            })
        }
    }

    fn parse_expr(&mut self) -> Result<Value, ParseError> {
        let mut acc = self.parse_term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.parse_term()?;
                    acc = add(acc, rhs, self.pos())?;
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.parse_term()?;
                    acc = add(acc, negate(rhs, self.pos())?, self.pos())?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn starts_factor(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Num(_) | Tok::Z | Tok::LParen | Tok::Ident(_)
        )
    }

    fn parse_term(&mut self) -> Result<Value, ParseError> {
        let mut acc = self.parse_unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    let rhs = self.parse_unary()?;
                    acc = mul(acc, rhs, self.pos())?;
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.parse_unary()?;
                    acc = div(acc, rhs, self.pos())?;
                }
                // Adjacency like `z(z-1)(z-2)` is an implicit product.
                _ if self.starts_factor() => {
                    let rhs = self.parse_unary()?;
                    acc = mul(acc, rhs, self.pos())?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn parse_unary(&mut self) -> Result<Value, ParseError> {
        let mut signs = 0;
        loop {
            match self.peek() {
                Tok::Minus => {
                    signs += 1;
                    self.bump();
                }
                Tok::Plus => {
                    self.bump();
                }
                _ => break,
            }
        }
        let v = self.parse_power()?;
        if signs % 2 == 1 {
            negate(v, self.pos())
        } else {
            Ok(v)
        }
    }

    fn parse_power(&mut self) -> Result<Value, ParseError> {
        let base = self.parse_base()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let pos = self.pos();
        let Tok::Num(n) = self.bump() else {
            return Err(ParseError::Syntax {
                pos,
                expected: "integer exponent".into(),
            });
        };
        if n.im != 0.0 || n.re < 0.0 || n.re.fract() != 0.0 || n.re > 64.0 {
            return Err(ParseError::Syntax {
                pos,
                expected: "nonnegative integer exponent".into(),
            });
        }
        pow(base, n.re as u32, pos)
    }

    fn parse_base(&mut self) -> Result<Value, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(c) => Ok(Value::constant(c)),
            Tok::Z => Ok(Value::var()),
            Tok::LParen => {
                let v = self.parse_expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(v)
            }
            Tok::Ident(name) if name == "conj" => {
                self.expect(Tok::LParen, "`(` after conj")?;
                let inner = self.parse_expr()?;
                self.expect(Tok::RParen, "`)`")?;
                match inner {
                    Value::Rat { num, den } if den.degree() == 0 => {
                        Ok(Value::Conj(num.scale(den.coeffs()[0].inv())))
                    }
                    _ => Err(ParseError::NotRecognizedForm(
                        "conj(...) must wrap a polynomial expression".into(),
                    )),
                }
            }
            Tok::Ident(name) => Err(ParseError::Syntax {
                pos,
                expected: format!("unknown name `{name}` (expected z, conj, moebius, essential)"),
            }),
            _ => Err(ParseError::Syntax {
                pos,
                expected: "number, `z`, or `(`".into(),
            }),
        }
    }

    /// Parses an expression that must fold to a complex constant.
    fn parse_const(&mut self) -> Result<Complex64, ParseError> {
        let pos = self.pos();
        match self.parse_expr()? {
            Value::Rat { num, den } if num.degree() == 0 && den.degree() == 0 => {
                Ok(num.coeffs()[0] / den.coeffs()[0])
            }
            _ => Err(ParseError::Syntax {
                pos,
                expected: "constant expression".into(),
            }),
        }
    }
}

fn add(a: Value, b: Value, pos: usize) -> Result<Value, ParseError> {
    match (a, b) {
        (Value::Rat { num: n1, den: d1 }, Value::Rat { num: n2, den: d2 }) => {
            let num = cap(n1.mul(&d2).add(&n2.mul(&d1)))?;
            let den = cap(d1.mul(&d2))?;
            Ok(Value::Rat { num, den })
        }
        _ => Err(ParseError::Syntax {
            pos,
            expected: "conj(...) cannot be combined with other terms".into(),
        }),
    }
}

fn negate(v: Value, pos: usize) -> Result<Value, ParseError> {
    match v {
        Value::Rat { num, den } => Ok(Value::Rat {
            num: num.neg(),
            den,
        }),
        Value::Conj(_) => Err(ParseError::Syntax {
            pos,
            expected: "conj(...) cannot be combined with other terms".into(),
        }),
    }
}

fn mul(a: Value, b: Value, pos: usize) -> Result<Value, ParseError> {
    match (a, b) {
        (Value::Rat { num: n1, den: d1 }, Value::Rat { num: n2, den: d2 }) => Ok(Value::Rat {
            num: cap(n1.mul(&n2))?,
            den: cap(d1.mul(&d2))?,
        }),
        _ => Err(ParseError::Syntax {
            pos,
            expected: "conj(...) cannot be combined with other terms".into(),
        }),
    }
}

fn div(a: Value, b: Value, pos: usize) -> Result<Value, ParseError> {
    match (a, b) {
        (Value::Rat { num: n1, den: d1 }, Value::Rat { num: n2, den: d2 }) => {
            if n2.is_zero() {
                return Err(ParseError::DegenerateField("division by zero".into()));
            }
            Ok(Value::Rat {
                num: cap(n1.mul(&d2))?,
                den: cap(d1.mul(&n2))?,
            })
        }
        _ => Err(ParseError::Syntax {
            pos,
            expected: "conj(...) cannot be combined with other terms".into(),
        }),
    }
}

fn pow(v: Value, e: u32, pos: usize) -> Result<Value, ParseError> {
    match v {
        Value::Rat { num, den } => Ok(Value::Rat {
            num: cap(num.pow(e))?,
            den: cap(den.pow(e))?,
        }),
        Value::Conj(_) => Err(ParseError::Syntax {
            pos,
            expected: "conj(...) cannot be combined with other terms".into(),
        }),
    }
}

fn finalize(v: Value) -> Result<Field, ParseError> {
    let lift = |e: crate::error::FieldError| match e {
        crate::error::FieldError::DegenerateField(msg) => ParseError::DegenerateField(msg),
        other => ParseError::NotRecognizedForm(other.to_string()),
    };
    match v {
        Value::Conj(p) => {
            if p.is_zero() {
                return Err(ParseError::DegenerateField("zero polynomial".into()));
            }
            if p.degree() == 0 {
                return Err(ParseError::NotRecognizedForm(
                    "constant field has no dynamics to classify".into(),
                ));
            }
            Field::conjugate(p).map_err(lift)
        }
        Value::Rat { num, den } => {
            if num.is_zero() {
                return Err(ParseError::DegenerateField("zero polynomial".into()));
            }
            if den.degree() == 0 {
                let p = num.scale(den.coeffs()[0].inv());
                if p.degree() == 0 {
                    return Err(ParseError::NotRecognizedForm(
                        "constant field has no dynamics to classify".into(),
                    ));
                }
                return Field::polynomial(p).map_err(lift);
            }
            if num.degree() == 0 {
                let p = den.scale(num.coeffs()[0].inv());
                return Field::inverse(p).map_err(lift);
            }
            Err(ParseError::NotRecognizedForm(
                "ratio of nonconstant polynomials; use moebius(A;B;C;D) for linear-over-linear"
                    .into(),
            ))
        }
    }
}

/// Parses an expression into a canonical [`Field`].
pub fn parse_field(text: &str) -> Result<Field, ParseError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser { toks, at: 0 };

    // Top-level constructors.
    if let Tok::Ident(name) = p.peek().clone() {
        match name.as_str() {
            "moebius" => {
                p.bump();
                p.expect(Tok::LParen, "`(` after moebius")?;
                let a = p.parse_const()?;
                p.expect(Tok::Semi, "`;`")?;
                let b = p.parse_const()?;
                p.expect(Tok::Semi, "`;`")?;
                let c = p.parse_const()?;
                p.expect(Tok::Semi, "`;`")?;
                let d = p.parse_const()?;
                p.expect(Tok::RParen, "`)`")?;
                p.expect(Tok::Eof, "end of input")?;
                return Field::moebius(a, b, c, d).map_err(|e| match e {
                    crate::error::FieldError::DegenerateField(msg) => {
                        ParseError::DegenerateField(msg)
                    }
                    other => ParseError::NotRecognizedForm(other.to_string()),
                });
            }
            "essential" => {
                p.bump();
                p.expect(Tok::LParen, "`(` after essential")?;
                let n = p.parse_const()?;
                p.expect(Tok::Semi, "`;`")?;
                let m = p.parse_const()?;
                p.expect(Tok::RParen, "`)`")?;
                p.expect(Tok::Eof, "end of input")?;
                if n.im != 0.0 || m.im != 0.0 || n.re.fract() != 0.0 || m.re.fract() != 0.0 {
                    return Err(ParseError::NotRecognizedForm(
                        "essential(n;m) takes integer arguments".into(),
                    ));
                }
                return Field::essential(n.re as u32, m.re as u32).map_err(|e| {
                    ParseError::DegenerateField(e.to_string())
                });
            }
            _ => {}
        }
    }

    let v = p.parse_expr()?;
    p.expect(Tok::Eof, "end of input")?;
    finalize(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn poly_coeffs(f: &Field) -> Vec<Complex64> {
        f.generator().unwrap().coeffs().to_vec()
    }

    #[test]
    fn expands_products() {
        let f = parse_field("z*(z-1)*(z-2)").unwrap();
        assert!(matches!(f, Field::Polynomial(_)));
        let coeffs = poly_coeffs(&f);
        assert_eq!(
            coeffs,
            vec![c(0.0, 0.0), c(2.0, 0.0), c(-3.0, 0.0), c(1.0, 0.0)]
        );
    }

    #[test]
    fn complex_roots_cubic() {
        let f = parse_field("z*(z-(1+1i))*(z-(3+3i))").unwrap();
        let p = f.generator().unwrap();
        assert_eq!(p.degree(), 3);
        for r in [c(0.0, 0.0), c(1.0, 1.0), c(3.0, 3.0)] {
            assert!(p.eval(r).norm() < 1e-12);
        }
    }

    #[test]
    fn inverse_form() {
        let f = parse_field("1/(z*(z-1)^2)").unwrap();
        match &f {
            Field::InversePolynomial(p) => {
                assert_eq!(
                    p.coeffs(),
                    &[c(0.0, 0.0), c(1.0, 0.0), c(-2.0, 0.0), c(1.0, 0.0)]
                );
            }
            other => panic!("expected inverse, got {other:?}"),
        }
    }

    #[test]
    fn conj_and_constructors() {
        assert!(matches!(
            parse_field("conj(z^2)").unwrap(),
            Field::ConjugatePolynomial(_)
        ));
        assert!(matches!(
            parse_field("moebius(0+1i;1+0i;1+0i;0+0i)").unwrap(),
            Field::Moebius { .. }
        ));
        assert!(matches!(
            parse_field("essential(1;2)").unwrap(),
            Field::EssentialDemo { n: 1, m: 2 }
        ));
    }

    #[test]
    fn fraction_literals() {
        // `3/2i` is the single literal 1.5i.
        let f = parse_field("z-(2-3/2i)*z^0*z").unwrap();
        let _ = f;
        let g = parse_field("z*(z-(2-3/2i))").unwrap();
        let p = g.generator().unwrap();
        assert!(p.eval(c(2.0, -1.5)).norm() < 1e-12);
        // `2i/13` is (2/13)i via ordinary division.
        let m = parse_field("(3/13 - 2i/13)*z").unwrap();
        let p = m.generator().unwrap();
        assert!((p.coeffs()[1] - c(3.0 / 13.0, -2.0 / 13.0)).norm() < 1e-15);
    }

    #[test]
    fn implicit_products() {
        let f = parse_field("z(z-1)(z-2)").unwrap();
        assert_eq!(
            poly_coeffs(&f),
            vec![c(0.0, 0.0), c(2.0, 0.0), c(-3.0, 0.0), c(1.0, 0.0)]
        );
        let g = parse_field("(-1+2i)z(z-3)(z-2i)(z-(2+2i))").unwrap();
        assert_eq!(g.generator().unwrap().degree(), 4);
    }

    #[test]
    fn rejects_unreducible_and_degenerate() {
        assert!(matches!(
            parse_field("z + 1/z"),
            Err(ParseError::NotRecognizedForm(_))
        ));
        assert!(matches!(
            parse_field("(z+1)/(z-1)"),
            Err(ParseError::NotRecognizedForm(_))
        ));
        assert!(matches!(
            parse_field("z - z"),
            Err(ParseError::DegenerateField(_))
        ));
        assert!(matches!(
            parse_field("moebius(1;2;2;4)"),
            Err(ParseError::DegenerateField(_))
        ));
        assert!(matches!(
            parse_field("3+0i"),
            Err(ParseError::NotRecognizedForm(_))
        ));
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_field("z*(z-") {
            Err(ParseError::Syntax { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match parse_field("z $ 3") {
            Err(ParseError::Syntax { pos, .. }) => assert_eq!(pos, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn division_by_constant_is_polynomial() {
        let f = parse_field("z/2").unwrap();
        assert_eq!(poly_coeffs(&f), vec![c(0.0, 0.0), c(0.5, 0.0)]);
    }

    #[test]
    fn print_parse_round_trip_exact() {
        let cases = [
            "z*(z-(1+1i))*(z-(3+3i))",
            "1/(z*(z-1)^2)",
            "conj((1+4i)*z^2)",
            "moebius(0.3+0.1i;1;1;0)",
            "essential(2;3)",
            "(0.1234567890123+0.9876i)*z^3 - 1e-7*z",
        ];
        for case in cases {
            let f = parse_field(case).unwrap();
            let printed = f.to_string();
            let g = parse_field(&printed)
                .unwrap_or_else(|e| panic!("reparse of `{printed}` failed: {e}"));
            assert_eq!(f, g, "round trip through `{printed}`");
        }
    }
}
