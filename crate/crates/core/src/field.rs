//! Canonical field descriptions and their evaluation as planar vector fields.

use std::fmt;

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bivar::BivarPoly;
use crate::cpoly::{harmonic_pair, CPoly};
use crate::error::{FieldError, PolyError};

/// Hard cap on polynomial degree accepted by constructors and the parser.
pub const MAX_DEGREE: usize = 16;

/// Scale-aware pole guard radius at a point `z`.
pub fn tau_pole(z: Complex64) -> f64 {
    1e-9 * (1.0 + z.norm())
}

/// A vector field `dz/dt = f(z)` of one of the five supported kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    /// `f = p(z)` with `deg p >= 1`.
    Polynomial(CPoly),
    /// `f = 1/p(z)`.
    InversePolynomial(CPoly),
    /// `f = conj(p(z))`.
    ConjugatePolynomial(CPoly),
    /// `f = (Az + B)/(Cz + D)` with `AD - BC != 0`.
    Moebius {
        a: Complex64,
        b: Complex64,
        c: Complex64,
        d: Complex64,
    },
    /// `f = z^m exp(1/z^n)`, demo cases `(n, m)` in {(1,2), (2,3), (3,4)}.
    EssentialDemo { n: u32, m: u32 },
}

/// Real planar expansion `(u, v)` of a field, `dz/dt = u + iv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanarExpansion {
    pub u: BivarPoly,
    pub v: BivarPoly,
}

impl PlanarExpansion {
    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        (self.u.eval(x, y), self.v.eval(x, y))
    }
}

fn check_poly(p: &CPoly) -> Result<(), FieldError> {
    if p.is_zero() {
        return Err(FieldError::DegenerateField("zero polynomial".into()));
    }
    if p.degree() < 1 {
        return Err(FieldError::DegenerateField(
            "constant polynomial has no dynamics".into(),
        ));
    }
    if p.degree() > MAX_DEGREE {
        return Err(FieldError::DegenerateField(format!(
            "degree {} exceeds the cap of {MAX_DEGREE}",
            p.degree()
        )));
    }
    Ok(())
}

impl Field {
    pub fn polynomial(p: CPoly) -> Result<Field, FieldError> {
        check_poly(&p)?;
        Ok(Field::Polynomial(p))
    }

    pub fn inverse(p: CPoly) -> Result<Field, FieldError> {
        check_poly(&p)?;
        Ok(Field::InversePolynomial(p))
    }

    pub fn conjugate(p: CPoly) -> Result<Field, FieldError> {
        check_poly(&p)?;
        Ok(Field::ConjugatePolynomial(p))
    }

    pub fn moebius(
        a: Complex64,
        b: Complex64,
        c: Complex64,
        d: Complex64,
    ) -> Result<Field, FieldError> {
        let det = a * d - b * c;
        let scale = (a.norm() * d.norm() + b.norm() * c.norm()).max(1e-300);
        if det.norm() <= 1e-12 * scale.max(1.0) {
            return Err(FieldError::DegenerateField(format!(
                "moebius determinant AD - BC = {det} is zero within tolerance"
            )));
        }
        Ok(Field::Moebius { a, b, c, d })
    }

    pub fn essential(n: u32, m: u32) -> Result<Field, FieldError> {
        if !matches!((n, m), (1, 2) | (2, 3) | (3, 4)) {
            return Err(FieldError::DegenerateField(format!(
                "essential demo pair ({n}, {m}) is not one of (1,2), (2,3), (3,4)"
            )));
        }
        Ok(Field::EssentialDemo { n, m })
    }

    /// Generator polynomial for the three polynomial-backed kinds.
    pub fn generator(&self) -> Option<&CPoly> {
        match self {
            Field::Polynomial(p) | Field::InversePolynomial(p) | Field::ConjugatePolynomial(p) => {
                Some(p)
            }
            _ => None,
        }
    }

    /// Degree of the generator polynomial (Moebius counts its numerator).
    pub fn degree(&self) -> usize {
        match self {
            Field::Polynomial(p) | Field::InversePolynomial(p) | Field::ConjugatePolynomial(p) => {
                p.degree()
            }
            Field::Moebius { .. } => 1,
            Field::EssentialDemo { m, .. } => *m as usize,
        }
    }

    /// Points where `f` itself is singular, with orders. The essential point
    /// carries order 0 as a marker.
    pub fn singular_points(&self) -> Result<Vec<(Complex64, usize)>, PolyError> {
        match self {
            Field::Polynomial(_) | Field::ConjugatePolynomial(_) => Ok(vec![]),
            Field::InversePolynomial(p) => Ok(p
                .roots()?
                .roots
                .iter()
                .map(|r| (r.location, r.multiplicity))
                .collect()),
            Field::Moebius { c, d, .. } => {
                if c.norm() > 0.0 {
                    Ok(vec![(-d / c, 1)])
                } else {
                    Ok(vec![])
                }
            }
            Field::EssentialDemo { .. } => Ok(vec![(Complex64::new(0.0, 0.0), 0)]),
        }
    }

    /// Evaluates `f(z)`; the planar vector at `(x, y)` is `(Re, Im)` of the
    /// returned value.
    pub fn eval(&self, z: Complex64) -> Result<Complex64, FieldError> {
        match self {
            Field::Polynomial(p) => Ok(p.eval(z)),
            Field::ConjugatePolynomial(p) => Ok(p.eval(z).conj()),
            Field::InversePolynomial(p) => {
                let value = p.eval(z);
                let guard = tau_pole(z);
                // Cheap lower bound first: if |p(z)| clears the bound implied
                // by the Cauchy root radius, no root is within the guard.
                let root_bound = 1.0
                    + p.coeffs()[..p.degree()]
                        .iter()
                        .map(|c| c.norm())
                        .fold(0.0, f64::max)
                        / p.leading().norm();
                let safe = p.leading().norm()
                    * guard
                    * (z.norm() + root_bound).powi(p.degree() as i32 - 1);
                if value.norm() <= safe {
                    if let Ok(roots) = p.roots() {
                        if let Some((idx, dist)) = roots.nearest(z) {
                            if dist <= guard {
                                return Err(FieldError::PoleEvaluation {
                                    z,
                                    pole: roots.roots[idx].location,
                                });
                            }
                        }
                    }
                }
                Ok(value.inv())
            }
            Field::Moebius { a, b, c, d } => {
                if c.norm() > 0.0 {
                    let pole = -d / c;
                    if (z - pole).norm() <= tau_pole(z) {
                        return Err(FieldError::PoleEvaluation { z, pole });
                    }
                }
                Ok((a * z + b) / (c * z + d))
            }
            Field::EssentialDemo { n, m } => {
                if z.norm() <= tau_pole(z) {
                    return Err(FieldError::PoleEvaluation {
                        z,
                        pole: Complex64::new(0.0, 0.0),
                    });
                }
                Ok(z.powu(*m) * (z.powu(*n).inv()).exp())
            }
        }
    }

    /// Real expansion `(u, v)` with `u = a0 + sum(a_k p_k - b_k q_k)` and
    /// `v = b0 + sum(b_k p_k + a_k q_k)`; the conjugate kind returns `(u, -v)`.
    pub fn to_planar(&self) -> Result<PlanarExpansion, FieldError> {
        let (p, conjugated) = match self {
            Field::Polynomial(p) => (p, false),
            Field::ConjugatePolynomial(p) => (p, true),
            _ => return Err(FieldError::UnsupportedKind("to_planar")),
        };
        let deg = p.degree();
        let mut u = BivarPoly::zero(deg);
        let mut v = BivarPoly::zero(deg);
        u.add_term(0, 0, p.coeffs()[0].re);
        v.add_term(0, 0, p.coeffs()[0].im);
        for k in 1..=deg {
            let ak = p.coeffs()[k].re;
            let bk = p.coeffs()[k].im;
            let rows = harmonic_pair(k);
            for j in 0..=k {
                let (i_pow, j_pow) = (k - j, j);
                if rows.p_row[j] != 0 {
                    let pk = rows.p_row[j] as f64;
                    u.add_term(i_pow, j_pow, ak * pk);
                    v.add_term(i_pow, j_pow, bk * pk);
                }
                if rows.q_row[j] != 0 {
                    let qk = rows.q_row[j] as f64;
                    u.add_term(i_pow, j_pow, -bk * qk);
                    v.add_term(i_pow, j_pow, ak * qk);
                }
            }
        }
        if conjugated {
            v = v.neg();
        }
        Ok(PlanarExpansion { u, v })
    }
}

fn fmt_complex_literal(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.re == 0.0 {
        format!("{}i", z.im)
    } else if z.im < 0.0 {
        format!("({}-{}i)", z.re, -z.im)
    } else {
        format!("({}+{}i)", z.re, z.im)
    }
}

fn fmt_poly(p: &CPoly) -> String {
    let mut parts = Vec::new();
    for (k, &c) in p.coeffs().iter().enumerate() {
        if c == Complex64::new(0.0, 0.0) && p.degree() > 0 {
            continue;
        }
        let lit = fmt_complex_literal(c);
        let part = match k {
            0 => lit,
            1 => format!("{lit}*z"),
            _ => format!("{lit}*z^{k}"),
        };
        parts.push(part);
    }
    if parts.is_empty() {
        parts.push("0".into());
    }
    parts.join(" + ")
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Polynomial(p) => write!(f, "{}", fmt_poly(p)),
            Field::InversePolynomial(p) => write!(f, "1/({})", fmt_poly(p)),
            Field::ConjugatePolynomial(p) => write!(f, "conj({})", fmt_poly(p)),
            Field::Moebius { a, b, c, d } => write!(
                f,
                "moebius({};{};{};{})",
                fmt_complex_literal(*a),
                fmt_complex_literal(*b),
                fmt_complex_literal(*c),
                fmt_complex_literal(*d)
            ),
            Field::EssentialDemo { n, m } => write!(f, "essential({n};{m})"),
        }
    }
}

fn coeff_pairs(p: &CPoly) -> Vec<(f64, f64)> {
    p.coeffs().iter().map(|c| (c.re, c.im)).collect()
}

#[derive(Serialize, Deserialize)]
struct FieldWire {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    coeffs: Option<Vec<(f64, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none", rename = "A")]
    a: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none", rename = "B")]
    b: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none", rename = "C")]
    c: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none", rename = "D")]
    d: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<u32>,
}

impl Serialize for Field {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let wire = match self {
            Field::Polynomial(p) => FieldWire {
                kind: "polynomial".into(),
                coeffs: Some(coeff_pairs(p)),
                a: None,
                b: None,
                c: None,
                d: None,
                n: None,
                m: None,
            },
            Field::InversePolynomial(p) => FieldWire {
                kind: "inverse_polynomial".into(),
                coeffs: Some(coeff_pairs(p)),
                a: None,
                b: None,
                c: None,
                d: None,
                n: None,
                m: None,
            },
            Field::ConjugatePolynomial(p) => FieldWire {
                kind: "conjugate_polynomial".into(),
                coeffs: Some(coeff_pairs(p)),
                a: None,
                b: None,
                c: None,
                d: None,
                n: None,
                m: None,
            },
            Field::Moebius { a, b, c, d } => FieldWire {
                kind: "moebius".into(),
                coeffs: None,
                a: Some((a.re, a.im)),
                b: Some((b.re, b.im)),
                c: Some((c.re, c.im)),
                d: Some((d.re, d.im)),
                n: None,
                m: None,
            },
            Field::EssentialDemo { n, m } => FieldWire {
                kind: "essential_demo".into(),
                coeffs: None,
                a: None,
                b: None,
                c: None,
                d: None,
                n: Some(*n),
                m: Some(*m),
            },
        };
        wire.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Field {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = FieldWire::deserialize(deserializer)?;
        let poly = |coeffs: &Option<Vec<(f64, f64)>>| -> Result<CPoly, D::Error> {
            let coeffs = coeffs
                .as_ref()
                .ok_or_else(|| D::Error::custom("missing coeffs"))?;
            Ok(CPoly::new(
                coeffs
                    .iter()
                    .map(|&(re, im)| Complex64::new(re, im))
                    .collect(),
            ))
        };
        let cx = |v: &Option<(f64, f64)>, name: &str| -> Result<Complex64, D::Error> {
            v.map(|(re, im)| Complex64::new(re, im))
                .ok_or_else(|| D::Error::custom(format!("missing {name}")))
        };
        let field = match wire.kind.as_str() {
            "polynomial" => Field::polynomial(poly(&wire.coeffs)?),
            "inverse_polynomial" => Field::inverse(poly(&wire.coeffs)?),
            "conjugate_polynomial" => Field::conjugate(poly(&wire.coeffs)?),
            "moebius" => Field::moebius(
                cx(&wire.a, "A")?,
                cx(&wire.b, "B")?,
                cx(&wire.c, "C")?,
                cx(&wire.d, "D")?,
            ),
            "essential_demo" => Field::essential(
                wire.n.ok_or_else(|| D::Error::custom("missing n"))?,
                wire.m.ok_or_else(|| D::Error::custom("missing m"))?,
            ),
            other => return Err(D::Error::custom(format!("unknown kind {other}"))),
        };
        field.map_err(|e| D::Error::custom(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_linear() {
        let f = Field::polynomial(CPoly::new(vec![c(0.0, 0.0), c(-1.0, 1.0)])).unwrap();
        assert_eq!(f.eval(c(1.0, 0.0)).unwrap(), c(-1.0, 1.0));
    }

    #[test]
    fn eval_conjugate_square() {
        let f = Field::conjugate(CPoly::new(vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)])).unwrap();
        let z = c(1.5, -0.5);
        let w = f.eval(z).unwrap();
        let x = z.re;
        let y = z.im;
        assert!((w.re - (x * x - y * y)).abs() < 1e-14);
        assert!((w.im - (-2.0 * x * y)).abs() < 1e-14);
    }

    #[test]
    fn eval_moebius_direct() {
        let f = Field::moebius(c(0.0, 1.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        let w = f.eval(c(2.0, 0.0)).unwrap();
        assert!((w - c(0.5, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn eval_inverse_near_pole_rejects() {
        let p = CPoly::new(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let f = Field::inverse(p).unwrap();
        let err = f.eval(c(1e-12, 0.0)).unwrap_err();
        assert!(matches!(err, FieldError::PoleEvaluation { .. }));
        // Away from the pole it is fine.
        let v = f.eval(c(2.0, 0.0)).unwrap();
        assert!((v - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn eval_inverse_times_p_is_one() {
        let p = CPoly::from_roots(c(1.0, 0.0), &[c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]);
        let f = Field::inverse(p.clone()).unwrap();
        for z in [c(0.5, 1.0), c(-3.0, 0.2), c(4.0, -4.0)] {
            let prod = f.eval(z).unwrap() * p.eval(z);
            assert!((prod - c(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn planar_quadratic_matches_hand_expansion() {
        let a = [c(0.3, -0.7), c(1.2, 0.5), c(-0.4, 0.9)];
        let f = Field::polynomial(CPoly::new(a.to_vec())).unwrap();
        let pe = f.to_planar().unwrap();
        for (x, y) in [(0.2, 0.3), (-1.0, 2.0), (1.5, -0.5)] {
            let u = a[0].re + a[1].re * x - a[1].im * y + a[2].re * (x * x - y * y)
                - a[2].im * 2.0 * x * y;
            let v = a[0].im + a[1].im * x + a[1].re * y + a[2].im * (x * x - y * y)
                + a[2].re * 2.0 * x * y;
            let (pu, pv) = pe.eval(x, y);
            assert!((pu - u).abs() < 1e-13);
            assert!((pv - v).abs() < 1e-13);
        }
    }

    #[test]
    fn planar_quintic_row() {
        // z^5: u = x^5 - 10 x^3 y^2 + 5 x y^4, v = 5 x^4 y - 10 x^2 y^3 + y^5
        let mut coeffs = vec![c(0.0, 0.0); 6];
        coeffs[5] = c(1.0, 0.0);
        let f = Field::polynomial(CPoly::new(coeffs)).unwrap();
        let pe = f.to_planar().unwrap();
        let (x, y) = (1.3f64, -0.8f64);
        let u = x.powi(5) - 10.0 * x.powi(3) * y * y + 5.0 * x * y.powi(4);
        let v = 5.0 * x.powi(4) * y - 10.0 * x * x * y.powi(3) + y.powi(5);
        let (pu, pv) = pe.eval(x, y);
        assert!((pu - u).abs() < 1e-12);
        assert!((pv - v).abs() < 1e-12);
    }

    #[test]
    fn essential_eval() {
        let f = Field::essential(1, 2).unwrap();
        let z = c(0.5, 0.5);
        let expect = z * z * (z.inv()).exp();
        assert!((f.eval(z).unwrap() - expect).norm() < 1e-14);
        assert!(Field::essential(2, 4).is_err());
    }

    #[test]
    fn moebius_determinant_guard() {
        assert!(Field::moebius(c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)).is_err());
    }

    #[test]
    fn json_wire_shape() {
        let f = Field::polynomial(CPoly::new(vec![c(0.0, 0.0), c(2.0, 1.0)])).unwrap();
        let v = serde_json::to_value(&f).unwrap();
        assert_eq!(v["kind"], "polynomial");
        assert_eq!(v["coeffs"][1][0], 2.0);
        let back: Field = serde_json::from_value(v).unwrap();
        assert_eq!(back, f);

        let m = Field::moebius(c(0.0, 1.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["kind"], "moebius");
        assert_eq!(v["A"][1], 1.0);
        let back: Field = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
    }
}
