//! Compactification of the plane onto the closed disk: chart systems,
//! equator equilibria with antipodal pairing, and the conformal model of a
//! rational field near infinity.

use num_complex::Complex64;
use serde::Serialize;

use crate::bivar::BivarPoly;
use crate::cpoly::CPoly;
use crate::error::InfinityError;
use crate::field::Field;

/// The four equator charts. `U1` covers directions with `x > 0` via
/// `(x, y) = (1/w, s/w)`, `U2` covers `y > 0` via `(s/w, 1/w)`; the `V`
/// charts are their antipodes with time multiplied by -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChartId {
    U1,
    U2,
    V1,
    V2,
}

/// Polynomial chart dynamics in the local coordinates `(s, w)`; the equator
/// is `w = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct ChartSystem {
    pub chart: ChartId,
    pub s_poly: BivarPoly,
    pub w_poly: BivarPoly,
}

impl ChartSystem {
    pub fn eval(&self, s: f64, w: f64) -> (f64, f64) {
        (self.s_poly.eval(s, w), self.w_poly.eval(s, w))
    }

    /// Dynamics restricted to the equator `w = 0`, as a polynomial in `s`.
    pub fn equator_poly(&self) -> CPoly {
        let deg = self.s_poly.max_deg();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); deg + 1];
        for (i, j, c) in self.s_poly.terms() {
            if j == 0 {
                coeffs[i] += Complex64::new(c, 0.0);
            }
        }
        CPoly::new(coeffs)
    }

    /// Jacobian of `(ds, dw)` with respect to `(s, w)`.
    pub fn jacobian(&self, s: f64, w: f64) -> [[f64; 2]; 2] {
        [
            [
                self.s_poly.deriv_x().eval(s, w),
                self.s_poly.deriv_y().eval(s, w),
            ],
            [
                self.w_poly.deriv_x().eval(s, w),
                self.w_poly.deriv_y().eval(s, w),
            ],
        ]
    }
}

/// Equilibrium type on the equator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InfKind {
    Saddle,
    NodeRepelling,
    NodeAttracting,
}

/// One equator equilibrium.
#[derive(Debug, Clone, Serialize)]
pub struct InfinityPoint {
    pub chart: ChartId,
    pub s: f64,
    /// Direction angle of the point on the plane's circle at infinity.
    pub theta: f64,
    pub kind: InfKind,
    pub jac: [[f64; 2]; 2],
    /// Index of the antipodal point in the same list.
    pub antipode: usize,
}

impl InfinityPoint {
    /// Chart-to-plane map at `(s, w)`.
    fn plane_of(chart: ChartId, s: f64, w: f64) -> Complex64 {
        match chart {
            ChartId::U1 => Complex64::new(1.0 / w, s / w),
            ChartId::U2 => Complex64::new(s / w, 1.0 / w),
            ChartId::V1 => Complex64::new(-1.0 / w, -s / w),
            ChartId::V2 => Complex64::new(-s / w, -1.0 / w),
        }
    }

    /// Planar launch point offset `eps` along the transverse eigenvector.
    pub fn launch_point(&self, eps: f64) -> Option<Complex64> {
        if eps <= 0.0 {
            return None;
        }
        // The equator row of the Jacobian has dw/ds = 0, so the matrix is
        // upper triangular; the transverse eigenvector belongs to jac[1][1].
        let a = self.jac[0][0];
        let b = self.jac[0][1];
        let d = self.jac[1][1];
        let x = if (d - a).abs() > 1e-12 * (a.abs() + d.abs() + 1.0) {
            b / (d - a)
        } else {
            0.0
        };
        let s = self.s + eps * x;
        let w = eps;
        Some(Self::plane_of(self.chart, s, w))
    }
}

/// Chart dynamics of a planar polynomial or conjugate field.
///
/// In `U1` the substitution `(x, y) = (1/w, s/w)` cleared by `w^n` gives
/// `ds = w^n(-s u + v)`, `dw = -w^{n+1} u`; `U2` swaps the roles, and the
/// `V` charts negate time.
pub fn compactify(field: &Field, chart: ChartId) -> Result<ChartSystem, InfinityError> {
    let pe = field
        .to_planar()
        .map_err(|_| InfinityError::UnsupportedKind("compactify"))?;
    let n = field.degree();
    let max_deg = n + 1;
    let mut s_poly = BivarPoly::zero(max_deg);
    let mut w_poly = BivarPoly::zero(max_deg);

    let (u_terms, v_terms): (Vec<_>, Vec<_>) = (
        pe.u.terms().collect::<Vec<_>>(),
        pe.v.terms().collect::<Vec<_>>(),
    );
    match chart {
        ChartId::U1 | ChartId::V1 => {
            // u(1/w, s/w) * w^n picks up s^j w^{n-i-j} per term.
            for &(i, j, c) in &u_terms {
                s_poly.add_term(j + 1, n - i - j, -c);
                w_poly.add_term(j, n - i - j + 1, -c);
            }
            for &(i, j, c) in &v_terms {
                s_poly.add_term(j, n - i - j, c);
            }
        }
        ChartId::U2 | ChartId::V2 => {
            // u(s/w, 1/w) * w^n picks up s^i w^{n-i-j} per term.
            for &(i, j, c) in &u_terms {
                s_poly.add_term(i, n - i - j, c);
            }
            for &(i, j, c) in &v_terms {
                s_poly.add_term(i + 1, n - i - j, -c);
                w_poly.add_term(i, n - i - j + 1, -c);
            }
        }
    }
    // The V charts carry the classical parity factor (-1)^{n-1}: antipodal
    // time runs backward only for even degree.
    if matches!(chart, ChartId::V1 | ChartId::V2) && n % 2 == 0 {
        s_poly = s_poly.neg();
        w_poly = w_poly.neg();
    }
    Ok(ChartSystem {
        chart,
        s_poly,
        w_poly,
    })
}

fn classify_jac(jac: [[f64; 2]; 2]) -> InfKind {
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let trace = jac[0][0] + jac[1][1];
    if det < 0.0 {
        InfKind::Saddle
    } else if trace >= 0.0 {
        InfKind::NodeRepelling
    } else {
        InfKind::NodeAttracting
    }
}

/// All equator equilibria with antipodal pairing, sorted by direction.
///
/// A polynomial field of degree n yields n-1 antipodal saddle pairs; the
/// conjugate of one yields n+1 node pairs with alternating stability.
pub fn infinite_equilibria(field: &Field) -> Result<Vec<InfinityPoint>, InfinityError> {
    if !matches!(
        field,
        Field::Polynomial(_) | Field::ConjugatePolynomial(_)
    ) {
        return Err(InfinityError::UnsupportedKind("infinite_equilibria"));
    }
    let u1 = compactify(field, ChartId::U1)?;
    let u2 = compactify(field, ChartId::U2)?;

    let mut found: Vec<(ChartId, f64)> = Vec::new();
    for (chart, sys) in [(ChartId::U1, &u1), (ChartId::U2, &u2)] {
        let eq = sys.equator_poly();
        if eq.degree() == 0 {
            if eq.coeffs()[0].norm() == 0.0 {
                return Err(InfinityError::DegenerateEquator);
            }
            continue;
        }
        let Ok(roots) = eq.roots() else { continue };
        for r in &roots.roots {
            let s = r.location;
            if s.im.abs() < 1e-9 * (1.0 + s.re.abs()) && s.re.abs() <= 10.0 {
                found.push((chart, s.re));
            }
        }
    }

    // Deduplicate chart overlap by direction modulo pi: each accepted root
    // will emit its antipode as well, so a U1 root and its 1/s image in U2
    // describe the same antipodal pair.
    let theta_of = |chart: ChartId, s: f64| -> f64 {
        match chart {
            ChartId::U1 => s.atan2(1.0),
            ChartId::U2 => 1.0f64.atan2(s),
            _ => unreachable!(),
        }
    };
    let mut unique: Vec<(ChartId, f64, f64)> = Vec::new();
    for (chart, s) in found {
        let th = theta_of(chart, s);
        let fresh = unique.iter().all(|&(_, _, t)| {
            let d = (t - th).rem_euclid(std::f64::consts::PI);
            d > 1e-6 && d < std::f64::consts::PI - 1e-6
        });
        if fresh {
            unique.push((chart, s, th));
        }
    }

    let mut points = Vec::new();
    for (chart, s, th) in unique {
        let sys = match chart {
            ChartId::U1 => &u1,
            _ => &u2,
        };
        let jac = sys.jacobian(s, 0.0);
        let kind = classify_jac(jac);
        points.push(InfinityPoint {
            chart,
            s,
            theta: normalize_angle(th),
            kind,
            jac,
            antipode: 0,
        });
        // Antipodal point in the V chart: same s, dynamics negated only for
        // even degree.
        let v_jac = if field.degree() % 2 == 0 {
            [[-jac[0][0], -jac[0][1]], [-jac[1][0], -jac[1][1]]]
        } else {
            jac
        };
        let v_chart = match chart {
            ChartId::U1 => ChartId::V1,
            _ => ChartId::V2,
        };
        points.push(InfinityPoint {
            chart: v_chart,
            s,
            theta: normalize_angle(th + std::f64::consts::PI),
            kind: classify_jac(v_jac),
            jac: v_jac,
            antipode: 0,
        });
    }

    points.sort_by(|a, b| a.theta.partial_cmp(&b.theta).unwrap());
    // Wire up antipode indices.
    let thetas: Vec<f64> = points.iter().map(|p| p.theta).collect();
    for i in 0..points.len() {
        let want = normalize_angle(thetas[i] + std::f64::consts::PI);
        let (j, _) = thetas
            .iter()
            .enumerate()
            .map(|(j, &t)| {
                let mut d = (t - want).abs();
                if d > std::f64::consts::PI {
                    d = 2.0 * std::f64::consts::PI - d;
                }
                (j, d)
            })
            .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        points[i].antipode = j;
    }
    Ok(points)
}

fn normalize_angle(t: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = t.rem_euclid(two_pi);
    if a >= two_pi {
        a -= two_pi;
    }
    a
}

/// Conformal model near infinity for rational fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "case")]
pub enum InfinityModel {
    /// `(1/z)^k + c (1/z)^{2k+1}`; `boundary` flags the `deg P = deg Q`
    /// case where `k = 0` and the model is a regular drift plus `c/z`.
    InversePower {
        k: usize,
        #[serde(serialize_with = "ser_complex")]
        c: Complex64,
        boundary: bool,
    },
    /// `(a_n / b_m) z`.
    Linear {
        #[serde(serialize_with = "ser_complex")]
        coef: Complex64,
    },
    /// `z^2`.
    Square,
    /// `z^k` with `k >= 3`.
    Power { k: usize },
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    use serde::Serialize as _;
    (z.re, z.im).serialize(s)
}

/// The near-infinity model of `f = P/Q`, selected by the degree gap.
///
/// Conjugate fields are reported through their orbit-equivalent reciprocal
/// (`conj(p)` and `1/p` share orbits), which is the only sense in which the
/// non-rational conjugate kind has a rational model.
pub fn infinity_local_model(field: &Field) -> Result<InfinityModel, InfinityError> {
    let (p_num, q_den): (CPoly, CPoly) = match field {
        Field::Polynomial(p) => (p.clone(), CPoly::constant(Complex64::new(1.0, 0.0))),
        Field::InversePolynomial(p) | Field::ConjugatePolynomial(p) => {
            (CPoly::constant(Complex64::new(1.0, 0.0)), p.clone())
        }
        Field::Moebius { a, b, c, d } => (
            CPoly::new(vec![*b, *a]),
            CPoly::new(vec![*d, *c]),
        ),
        Field::EssentialDemo { .. } => {
            return Err(InfinityError::UnsupportedKind("infinity_local_model"))
        }
    };
    let n = p_num.degree();
    let m = q_den.degree();
    if n == m + 1 {
        return Ok(InfinityModel::Linear {
            coef: p_num.leading() / q_den.leading(),
        });
    }
    if n == m + 2 {
        return Ok(InfinityModel::Square);
    }
    if n > m + 2 {
        return Ok(InfinityModel::Power { k: n - m });
    }
    // n <= m: residue of Q(1/z) / (z^2 P(1/z)) at 0 is the coefficient of
    // z^{m+1-n} in the power series rev(Q)/rev(P).
    let k = m - n;
    let rev = |p: &CPoly| -> Vec<Complex64> {
        let mut v: Vec<Complex64> = p.coeffs().to_vec();
        v.reverse();
        v
    };
    let qr = rev(&q_den);
    let pr = rev(&p_num);
    let want = m + 1 - n;
    let mut series = vec![Complex64::new(0.0, 0.0); want + 1];
    for idx in 0..=want {
        let mut acc = qr.get(idx).copied().unwrap_or_default();
        for j in 1..=idx {
            acc -= pr.get(j).copied().unwrap_or_default() * series[idx - j];
        }
        series[idx] = acc / pr[0];
    }
    Ok(InfinityModel::InversePower {
        k,
        c: series[want],
        boundary: n == m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse_field;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn quadratic_u1_matches_display() {
        // f = A1 z + A2 z^2:
        // ds = b2 + b1 w + a2 s + b2 s^2 + b1 s^2 w + a2 s^3
        // dw = -a2 w - a1 w^2 + 2 b2 s w + b1 s w^2 + a2 w s^2
        let (a1, b1, a2, b2) = (0.7, -1.1, 0.4, 1.3);
        let p = CPoly::new(vec![c(0.0, 0.0), c(a1, b1), c(a2, b2)]);
        let f = Field::polynomial(p).unwrap();
        let sys = compactify(&f, ChartId::U1).unwrap();
        let expect_s: &[(usize, usize, f64)] = &[
            (0, 0, b2),
            (0, 1, b1),
            (1, 0, a2),
            (2, 0, b2),
            (2, 1, b1),
            (3, 0, a2),
        ];
        for &(i, j, v) in expect_s {
            assert!(
                (sys.s_poly.coeff(i, j) - v).abs() < 1e-14,
                "s coeff ({i},{j}) = {} vs {v}",
                sys.s_poly.coeff(i, j)
            );
        }
        let expect_w: &[(usize, usize, f64)] = &[
            (0, 1, -a2),
            (0, 2, -a1),
            (1, 1, 2.0 * b2),
            (1, 2, b1),
            (2, 1, a2),
        ];
        for &(i, j, v) in expect_w {
            assert!(
                (sys.w_poly.coeff(i, j) - v).abs() < 1e-14,
                "w coeff ({i},{j}) = {} vs {v}",
                sys.w_poly.coeff(i, j)
            );
        }
    }

    #[test]
    fn monic_cubic_equator() {
        let f = parse_field("z^3").unwrap();
        let sys = compactify(&f, ChartId::U1).unwrap();
        // On the equator: ds = 2s(s^2+1), dw = 0.
        for s in [-2.0, -0.5, 0.0, 0.7, 3.0] {
            let (ds, dw) = sys.eval(s, 0.0);
            assert!((ds - 2.0 * s * (s * s + 1.0)).abs() < 1e-12);
            assert_eq!(dw, 0.0);
        }
    }

    #[test]
    fn v_chart_parity() {
        // Even degree: V = -U. Odd degree: V = U.
        let f = parse_field("(1-2i)*z + (0.5+1i)*z^2").unwrap();
        let u1 = compactify(&f, ChartId::U1).unwrap();
        let v1 = compactify(&f, ChartId::V1).unwrap();
        for (s, w) in [(0.3, 0.2), (-1.0, 0.5), (2.0, -0.7)] {
            let a = u1.eval(s, w);
            let b = v1.eval(s, w);
            assert!((a.0 + b.0).abs() < 1e-12 && (a.1 + b.1).abs() < 1e-12);
        }
        let g = parse_field("(1-2i)*z + (0.5+1i)*z^3").unwrap();
        let u1 = compactify(&g, ChartId::U1).unwrap();
        let v1 = compactify(&g, ChartId::V1).unwrap();
        for (s, w) in [(0.3, 0.2), (-1.0, 0.5), (2.0, -0.7)] {
            let a = u1.eval(s, w);
            let b = v1.eval(s, w);
            assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_saddle_pair_and_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let a1 = rng.gen_range(-2.0..2.0);
            let b1 = rng.gen_range(-2.0..2.0);
            let a2: f64 = rng.gen_range(-2.0..2.0);
            let b2 = rng.gen_range(-2.0..2.0);
            if a2.abs() < 0.1 {
                continue;
            }
            let p = CPoly::new(vec![c(0.0, 0.0), c(a1, b1), c(a2, b2)]);
            let f = Field::polynomial(p).unwrap();
            let pts = infinite_equilibria(&f).unwrap();
            assert_eq!(pts.len(), 2, "one antipodal saddle pair");
            assert!(pts.iter().all(|p| p.kind == InfKind::Saddle));
            // The U1 representative sits at s = -b2/a2 with the displayed
            // Jacobian entries.
            let u1_pt = pts
                .iter()
                .find(|p| matches!(p.chart, ChartId::U1))
                .or_else(|| pts.iter().find(|p| matches!(p.chart, ChartId::V1)));
            if let Some(pt) = u1_pt {
                assert!(
                    (pt.s + b2 / a2).abs() < 1e-7,
                    "equator root {} vs {}",
                    pt.s,
                    -b2 / a2
                );
                let lam = a2 + b2 * b2 / a2;
                let j12 = b1 + b1 * b2 * b2 / (a2 * a2);
                let sign = if matches!(pt.chart, ChartId::V1) {
                    -1.0
                } else {
                    1.0
                };
                assert!((pt.jac[0][0] - sign * lam).abs() < 1e-10 * (1.0 + lam.abs()));
                assert!(
                    (pt.jac[0][1] - sign * j12).abs() < 1e-9 * (1.0 + j12.abs()),
                    "j12 {} vs {}",
                    pt.jac[0][1],
                    j12
                );
                assert!(pt.jac[1][0].abs() < 1e-10);
                assert!((pt.jac[1][1] + sign * lam).abs() < 1e-10 * (1.0 + lam.abs()));
            }
        }
    }

    #[test]
    fn saddle_count_matches_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..60 {
            let deg = rng.gen_range(2..=4);
            let mut coeffs: Vec<Complex64> = (0..=deg)
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            if coeffs[deg].norm() < 0.2 {
                coeffs[deg] = c(1.0, 0.3);
            }
            let f = Field::polynomial(CPoly::new(coeffs)).unwrap();
            let pts = infinite_equilibria(&f).unwrap();
            assert_eq!(
                pts.len(),
                2 * (deg - 1),
                "degree {deg} needs {} equator points",
                2 * (deg - 1)
            );
            assert!(pts.iter().all(|p| p.kind == InfKind::Saddle));
        }
    }

    #[test]
    fn conjugate_nodes_alternate() {
        for (expr, n) in [
            ("conj(z^2)", 2usize),
            ("conj((1+4i)*z^2)", 2),
            ("conj((1+1i)*z^3)", 3),
            ("conj(z^4)", 4),
        ] {
            let f = parse_field(expr).unwrap();
            let pts = infinite_equilibria(&f).unwrap();
            assert_eq!(pts.len(), 2 * n + 2, "{expr}");
            for w in pts.windows(2) {
                assert_ne!(w[0].kind, w[1].kind, "{expr}: stability must alternate");
                assert_ne!(w[0].kind, InfKind::Saddle);
            }
        }
    }

    #[test]
    fn antipodal_links_and_negation() {
        // Odd degree: antipodal charts share the dynamics sign.
        let f = parse_field("z*(z-1)*(z-2)").unwrap();
        let pts = infinite_equilibria(&f).unwrap();
        assert_eq!(pts.len(), 4);
        for (i, p) in pts.iter().enumerate() {
            let q = &pts[p.antipode];
            assert_eq!(q.antipode, i);
            let d = (p.theta - q.theta).abs();
            assert!((d - std::f64::consts::PI).abs() < 1e-9);
            for r in 0..2 {
                for cidx in 0..2 {
                    assert!((p.jac[r][cidx] - q.jac[r][cidx]).abs() < 1e-9);
                }
            }
        }
        // Even degree: antipodal dynamics are negated.
        let g = parse_field("(0.3+1i)*z + z^2").unwrap();
        let pts = infinite_equilibria(&g).unwrap();
        assert_eq!(pts.len(), 2);
        for (i, p) in pts.iter().enumerate() {
            let q = &pts[p.antipode];
            assert_eq!(q.antipode, i);
            for r in 0..2 {
                for cidx in 0..2 {
                    assert!((p.jac[r][cidx] + q.jac[r][cidx]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn chart_overlap_consistency() {
        // Directions visible in both charts map via s -> 1/s.
        let f = parse_field("z*(z-(1+1i))*(z-(3+3i))").unwrap();
        let u1 = compactify(&f, ChartId::U1).unwrap();
        let u2 = compactify(&f, ChartId::U2).unwrap();
        let e1 = u1.equator_poly();
        let e2 = u2.equator_poly();
        for r in e1.roots().unwrap().roots {
            if r.location.im.abs() < 1e-9 && r.location.re.abs() > 1e-3 {
                let s2 = 1.0 / r.location.re;
                assert!(
                    e2.eval(c(s2, 0.0)).norm() < 1e-6 * (1.0 + e2.coeff_scale()),
                    "1/s image {s2} should be a U2 equator root"
                );
            }
        }
    }

    #[test]
    fn local_model_cases() {
        // 1/p with deg p = 2: (1/z)^2 with c = 0.
        let f = parse_field("1/(z*(z-1))").unwrap();
        match infinity_local_model(&f).unwrap() {
            InfinityModel::InversePower { k, c: res, boundary } => {
                assert_eq!(k, 2);
                assert!(res.norm() < 1e-14);
                assert!(!boundary);
            }
            other => panic!("unexpected {other:?}"),
        }
        // deg 4 reciprocal.
        let f4 = parse_field("1/(z^4)").unwrap();
        assert!(matches!(
            infinity_local_model(&f4).unwrap(),
            InfinityModel::InversePower { k: 4, .. }
        ));
        // Moebius with A, C nonzero: boundary case with residue (AD-BC)/A^2.
        let a = c(2.0, 1.0);
        let b = c(0.5, 0.0);
        let cc = c(1.0, 0.0);
        let d = c(0.0, 1.0);
        let m = Field::moebius(a, b, cc, d).unwrap();
        match infinity_local_model(&m).unwrap() {
            InfinityModel::InversePower { k, c: res, boundary } => {
                assert_eq!(k, 0);
                assert!(boundary);
                let expect = (a * d - b * cc) / (a * a);
                assert!((res - expect).norm() < 1e-13);
            }
            other => panic!("unexpected {other:?}"),
        }
        // Polynomials: linear -> Linear, quadratic -> Square, cubic -> Power.
        assert!(matches!(
            infinity_local_model(&parse_field("3*z").unwrap()).unwrap(),
            InfinityModel::Linear { .. }
        ));
        assert!(matches!(
            infinity_local_model(&parse_field("z^2").unwrap()).unwrap(),
            InfinityModel::Square
        ));
        assert!(matches!(
            infinity_local_model(&parse_field("z^4").unwrap()).unwrap(),
            InfinityModel::Power { k: 4 }
        ));
    }
}
