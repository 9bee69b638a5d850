//! First integrals `H = Im G` with `G' = 1/f`, complex potentials of
//! conjugate fields, travel times along trajectories, and branch-tracked
//! evaluation of `H` along paths.

use num_complex::Complex64;
use serde::Serialize;

use crate::cpoly::{partial_fractions_inv, CPoly};
use crate::error::IntegralError;
use crate::field::{tau_pole, Field};
use crate::flow::{AnalyticLevel, Trajectory};

/// Symbolic primitive `G` of `1/f` (or of `f` for potentials): a sum of log
/// terms, negative power terms, a polynomial part, and optionally the
/// essential-demo exponential.
#[derive(Debug, Clone, Serialize)]
pub struct FirstIntegral {
    /// `coef * log(z - pole)` summands.
    #[serde(serialize_with = "ser_pairs")]
    pub log_terms: Vec<(Complex64, Complex64)>,
    /// `(coef, pole, m)` with `m >= 2`, each standing for
    /// `coef * (z - pole)^{1 - m} * (-1/(m-1))`.
    #[serde(serialize_with = "ser_triples")]
    pub power_terms: Vec<(Complex64, Complex64, usize)>,
    /// Plain polynomial summand of `G`.
    pub poly_part: CPoly,
    /// When set to n, adds the term `(1/n) exp(-z^{-n})`.
    pub essential_n: Option<u32>,
}

fn ser_pairs<S: serde::Serializer>(
    v: &[(Complex64, Complex64)],
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_seq(
        v.iter()
            .map(|(a, b)| ((a.re, a.im), (b.re, b.im))),
    )
}

fn ser_triples<S: serde::Serializer>(
    v: &[(Complex64, Complex64, usize)],
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_seq(
        v.iter()
            .map(|(a, b, m)| ((a.re, a.im), (b.re, b.im), *m)),
    )
}

impl FirstIntegral {
    /// Analytic derivative `G'(z)` of the reconstruction.
    pub fn g_prime(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(coef, pole) in &self.log_terms {
            acc += coef / (z - pole);
        }
        for &(coef, pole, m) in &self.power_terms {
            acc += coef * (z - pole).powi(-(m as i32));
        }
        acc += self.poly_part.derivative().eval(z);
        if let Some(n) = self.essential_n {
            let zn = z.powu(n);
            acc += z.powi(-(n as i32 + 1)) * (-zn.inv()).exp();
        }
        acc
    }

    /// Single-valued part of `Im G` (everything except the log arguments).
    fn im_without_log_args(&self, z: Complex64) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(coef, pole, m) in &self.power_terms {
            acc += coef * (z - pole).powi(1 - m as i32) * (-1.0 / (m as f64 - 1.0));
        }
        acc += self.poly_part.eval(z);
        if let Some(n) = self.essential_n {
            acc += (-z.powu(n).inv()).exp() / n as f64;
        }
        let mut h = acc.im;
        for &(coef, pole) in &self.log_terms {
            // The modulus part of coef*log is single-valued.
            h += coef.im * (z - pole).norm().ln();
        }
        h
    }

    /// All poles that evaluation must stay away from.
    fn poles(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.log_terms
            .iter()
            .map(|t| t.1)
            .chain(self.power_terms.iter().map(|t| t.1))
            .chain(self.essential_n.iter().map(|_| Complex64::new(0.0, 0.0)))
    }

    /// Principal-branch value of `H = Im G` at a single point.
    pub fn eval_principal(&self, z: Complex64) -> f64 {
        let mut h = self.im_without_log_args(z);
        for &(coef, pole) in &self.log_terms {
            h += coef.re * (z - pole).arg();
        }
        h
    }
}

impl AnalyticLevel for FirstIntegral {
    fn level_deriv(&self, z: Complex64) -> Result<Complex64, IntegralError> {
        for pole in self.poles() {
            if (z - pole).norm() <= tau_pole(z) {
                return Err(IntegralError::SingularPath(pole));
            }
        }
        Ok(self.g_prime(z))
    }
}

/// Velocity potential and stream function of a conjugate field, through the
/// primitive `F` of the generator (`F' = p`, `phi = Re F`, `psi = Im F`).
#[derive(Debug, Clone, Serialize)]
pub struct PotentialPair {
    pub primitive: CPoly,
    pub generator: CPoly,
}

impl PotentialPair {
    pub fn phi(&self, x: f64, y: f64) -> f64 {
        self.primitive.eval(Complex64::new(x, y)).re
    }

    pub fn psi(&self, x: f64, y: f64) -> f64 {
        self.primitive.eval(Complex64::new(x, y)).im
    }

    /// `grad phi = (u, -v)` with `u + iv = p(z)`.
    pub fn grad_phi(&self, x: f64, y: f64) -> (f64, f64) {
        let w = self.generator.eval(Complex64::new(x, y));
        (w.re, -w.im)
    }

    /// `grad psi = (v, u)`.
    pub fn grad_psi(&self, x: f64, y: f64) -> (f64, f64) {
        let w = self.generator.eval(Complex64::new(x, y));
        (w.im, w.re)
    }
}

impl AnalyticLevel for PotentialPair {
    fn level_deriv(&self, z: Complex64) -> Result<Complex64, IntegralError> {
        Ok(self.generator.eval(z))
    }
}

/// First integral of a field's trajectories.
///
/// Polynomial fields integrate `1/p` through partial fractions; reciprocal
/// fields have the polynomial primitive of `p`; Moebius fields use the
/// closed form (with the `A = 0` branch falling back to the quadratic
/// primitive); the essential demos carry their fixed exponential integrals.
pub fn first_integral(field: &Field) -> Result<FirstIntegral, IntegralError> {
    match field {
        Field::Polynomial(p) => {
            let terms = partial_fractions_inv(p)?;
            let scale = terms
                .iter()
                .map(|t| t.coef.norm())
                .fold(0.0, f64::max)
                .max(1e-300);
            let mut log_terms = Vec::new();
            let mut power_terms = Vec::new();
            for t in terms {
                if t.coef.norm() <= 1e-13 * scale {
                    continue;
                }
                if t.m == 1 {
                    log_terms.push((t.coef, t.pole));
                } else {
                    power_terms.push((t.coef, t.pole, t.m));
                }
            }
            Ok(FirstIntegral {
                log_terms,
                power_terms,
                poly_part: CPoly::zero(),
                essential_n: None,
            })
        }
        Field::InversePolynomial(p) => Ok(FirstIntegral {
            log_terms: vec![],
            power_terms: vec![],
            poly_part: p.antiderivative(),
            essential_n: None,
        }),
        Field::Moebius { a, b, c, d } => {
            if a.norm() > 0.0 {
                // Primitive of (Cz+D)/(Az+B): (C/A) z plus a log at -B/A.
                let det = a * d - b * c;
                Ok(FirstIntegral {
                    log_terms: vec![(det / (a * a), -b / a)],
                    power_terms: vec![],
                    poly_part: CPoly::new(vec![Complex64::new(0.0, 0.0), c / a]),
                    essential_n: None,
                })
            } else {
                // dz/dt = B/(Cz+D): G = (C z^2/2 + D z)/B.
                Ok(FirstIntegral {
                    log_terms: vec![],
                    power_terms: vec![],
                    poly_part: CPoly::new(vec![
                        Complex64::new(0.0, 0.0),
                        d / b,
                        c / (2.0 * b),
                    ]),
                    essential_n: None,
                })
            }
        }
        Field::EssentialDemo { n, .. } => Ok(FirstIntegral {
            log_terms: vec![],
            power_terms: vec![],
            poly_part: CPoly::zero(),
            essential_n: Some(*n),
        }),
        Field::ConjugatePolynomial(_) => Err(IntegralError::UnsupportedKind(
            "first_integral (use potential for conjugate fields)",
        )),
    }
}

/// Complex potential of a conjugate field.
pub fn potential(field: &Field) -> Result<PotentialPair, IntegralError> {
    let Field::ConjugatePolynomial(p) = field else {
        return Err(IntegralError::UnsupportedKind("potential"));
    };
    Ok(PotentialPair {
        primitive: p.antiderivative(),
        generator: p.clone(),
    })
}

const GAUSS8_NODES: [f64; 8] = [
    -0.960289856497536,
    -0.796666477413627,
    -0.525532409916329,
    -0.183434642495650,
    0.183434642495650,
    0.525532409916329,
    0.796666477413627,
    0.960289856497536,
];
const GAUSS8_WEIGHTS: [f64; 8] = [
    0.101228536290376,
    0.222381034453374,
    0.313706645877887,
    0.362683783378362,
    0.362683783378362,
    0.313706645877887,
    0.222381034453374,
    0.101228536290376,
];

fn gauss_segment(
    field: &Field,
    a: Complex64,
    b: Complex64,
) -> Result<Complex64, IntegralError> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = Complex64::new(0.0, 0.0);
    for (node, weight) in GAUSS8_NODES.iter().zip(&GAUSS8_WEIGHTS) {
        let z = mid + half * *node;
        let fz = field.eval(z).map_err(|e| match e {
            crate::error::FieldError::PoleEvaluation { pole, .. } => {
                IntegralError::SingularPath(pole)
            }
            other => IntegralError::Field(other),
        })?;
        if fz.norm() < 1e-300 {
            return Err(IntegralError::SingularPath(z));
        }
        acc += *weight * fz.inv();
    }
    Ok(acc * half)
}

fn adaptive_segment(
    field: &Field,
    a: Complex64,
    b: Complex64,
    depth: usize,
) -> Result<Complex64, IntegralError> {
    let whole = gauss_segment(field, a, b)?;
    let mid = 0.5 * (a + b);
    let left = gauss_segment(field, a, mid)?;
    let right = gauss_segment(field, mid, b)?;
    let refined = left + right;
    if (whole - refined).norm() <= 1e-12 * (1.0 + refined.norm()) || depth >= 12 {
        Ok(refined)
    } else {
        Ok(adaptive_segment(field, a, mid, depth + 1)?
            + adaptive_segment(field, mid, b, depth + 1)?)
    }
}

/// Line integral of `dz/f(z)` along a trajectory polyline.
///
/// For a genuine trajectory the real part is the elapsed time and the
/// imaginary part vanishes.
pub fn travel_time(field: &Field, traj: &Trajectory) -> Result<Complex64, IntegralError> {
    // Guard the vertices against zeros and poles of f.
    let mut guard_points: Vec<Complex64> = Vec::new();
    match field {
        Field::Polynomial(p) | Field::InversePolynomial(p) => {
            if let Ok(roots) = p.roots() {
                guard_points.extend(roots.roots.iter().map(|r| r.location));
            }
        }
        Field::Moebius { a, b, c, d } => {
            if a.norm() > 0.0 {
                guard_points.push(-b / a);
            }
            if c.norm() > 0.0 {
                guard_points.push(-d / c);
            }
        }
        Field::ConjugatePolynomial(_) | Field::EssentialDemo { .. } => {}
    }
    for &z in &traj.points {
        for &g in &guard_points {
            if (z - g).norm() <= tau_pole(z) {
                return Err(IntegralError::SingularPath(g));
            }
        }
    }
    let mut total = Complex64::new(0.0, 0.0);
    for pair in traj.points.windows(2) {
        total += adaptive_segment(field, pair[0], pair[1], 0)?;
    }
    Ok(total)
}

/// Evaluates `H = Im G` along a path with continuous branch unwrapping of
/// every log term. Consecutive points must keep each term's argument change
/// below pi/2, otherwise the caller must refine the path.
pub fn eval_h(fi: &FirstIntegral, path: &[Complex64]) -> Result<Vec<f64>, IntegralError> {
    if path.is_empty() {
        return Ok(vec![]);
    }
    for (k, &z) in path.iter().enumerate() {
        for pole in fi.poles() {
            if (z - pole).norm() <= tau_pole(z) {
                let _ = k;
                return Err(IntegralError::SingularPath(pole));
            }
        }
    }
    let mut args: Vec<f64> = fi
        .log_terms
        .iter()
        .map(|&(_, pole)| (path[0] - pole).arg())
        .collect();
    let mut out = Vec::with_capacity(path.len());
    let mut h0 = fi.im_without_log_args(path[0]);
    for (coef, arg) in fi.log_terms.iter().map(|t| t.0).zip(&args) {
        h0 += coef.re * arg;
    }
    out.push(h0);
    for k in 1..path.len() {
        let z = path[k];
        let mut h = fi.im_without_log_args(z);
        for (t, arg) in fi.log_terms.iter().zip(args.iter_mut()) {
            let delta = ((z - t.1) / (path[k - 1] - t.1)).arg();
            if delta.abs() >= std::f64::consts::FRAC_PI_2 {
                return Err(IntegralError::BranchJump { index: k });
            }
            *arg += delta;
            h += t.0.re * *arg;
        }
        out.push(h);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{integrate, integrate_opts, IntegrateOptions};
    use crate::parse_field;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn log_integral_of_linear() {
        // dz/dt = z: G = log z, H ramps by 2 pi around the unit circle.
        let f = parse_field("z").unwrap();
        let fi = first_integral(&f).unwrap();
        assert_eq!(fi.log_terms.len(), 1);
        assert!((fi.log_terms[0].0 - c(1.0, 0.0)).norm() < 1e-12);
        let path: Vec<Complex64> = (0..=100)
            .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 100.0))
            .collect();
        let h = eval_h(&fi, &path).unwrap();
        assert!((h.last().unwrap() - h[0] - 2.0 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn inverse_square_integral() {
        // dz/dt = z^2: H = y/(x^2+y^2).
        let f = parse_field("z^2").unwrap();
        let fi = first_integral(&f).unwrap();
        assert!(fi.log_terms.is_empty());
        assert_eq!(fi.power_terms.len(), 1);
        for (x, y) in [(1.0, 0.5), (-2.0, 1.0), (0.3, -0.7)] {
            let h = fi.eval_principal(c(x, y));
            let expect = y / (x * x + y * y);
            assert!((h - expect).abs() < 1e-12, "H({x},{y}) = {h} vs {expect}");
        }
    }

    #[test]
    fn spiral_integral_proportional_to_display() {
        // dz/dt = (1+i) z: the level function is proportional to
        // arctan(y/x) - (1/2) log(x^2+y^2).
        let f = parse_field("(1+1i)*z").unwrap();
        let fi = first_integral(&f).unwrap();
        let display = |z: Complex64| z.arg() - z.norm().ln();
        let z1 = c(1.0, 0.4);
        let z2 = c(0.5, -0.2);
        let r = fi.eval_principal(z1) / display(z1);
        assert!(
            (fi.eval_principal(z2) - r * display(z2)).abs() < 1e-10,
            "values must be proportional to the displayed integral"
        );
    }

    #[test]
    fn essential_demo_integrals() {
        let f = parse_field("essential(1;2)").unwrap();
        let fi = first_integral(&f).unwrap();
        for (x, y) in [(0.4f64, 0.3f64), (-0.5, 0.2), (0.1, -0.6)] {
            let r2 = x * x + y * y;
            let expect = (-x / r2).exp() * (y / r2).sin();
            let h = fi.eval_principal(c(x, y));
            assert!((h - expect).abs() < 1e-12);
        }
        // (2,3) and (3,4) demos match the displayed integrals up to the
        // stated 1/n factor.
        let f23 = parse_field("essential(2;3)").unwrap();
        let fi23 = first_integral(&f23).unwrap();
        let (x, y) = (0.6, -0.4);
        let r2: f64 = x * x + y * y;
        let expect23 =
            (-(x - y) * (x + y) / r2.powi(2)).exp() * (2.0 * x * y / r2.powi(2)).sin() / 2.0;
        assert!((fi23.eval_principal(c(x, y)) - expect23).abs() < 1e-12);
        let f34 = parse_field("essential(3;4)").unwrap();
        let fi34 = first_integral(&f34).unwrap();
        let expect34 = (-x * (x * x - 3.0 * y * y) / r2.powi(3)).exp()
            * (y * (3.0 * x * x - y * y) / r2.powi(3)).sin()
            / 3.0;
        assert!((fi34.eval_principal(c(x, y)) - expect34).abs() < 1e-12);
    }

    #[test]
    fn moebius_closed_form() {
        let a = c(1.0, 1.0);
        let b = c(-1.5, 1.0);
        let cc = c(1.0, 0.0);
        let d = c(0.0, 0.0);
        let m = Field::moebius(a, b, cc, d).unwrap();
        let fi = first_integral(&m).unwrap();
        // G'(z) must equal 1/T(z) = z/(a z + b).
        for z in [c(1.0, 0.5), c(-2.0, 0.3), c(0.5, 2.0)] {
            let expect = z / (a * z + b);
            assert!((fi.g_prime(z) - expect).norm() < 1e-12);
        }
        // A = 0 branch returns a quadratic polynomial part.
        let m0 = Field::moebius(c(0.0, 0.0), c(2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        let fi0 = first_integral(&m0).unwrap();
        assert!(fi0.log_terms.is_empty());
        assert_eq!(fi0.poly_part.degree(), 2);
        for z in [c(1.0, 0.5), c(-2.0, 0.3)] {
            let expect = (z + 1.0) / 2.0;
            assert!((fi0.g_prime(z) - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn derivative_consistency_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for _ in 0..20 {
            let deg = rng.gen_range(2..=4);
            let roots: Vec<Complex64> = (0..deg)
                .map(|_| c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
                .collect();
            if roots
                .iter()
                .enumerate()
                .any(|(i, a)| roots[..i].iter().any(|b| (a - b).norm() < 0.4))
            {
                continue;
            }
            let f = Field::polynomial(CPoly::from_roots(c(1.0, -0.5), &roots)).unwrap();
            let fi = first_integral(&f).unwrap();
            for _ in 0..100 {
                let z = c(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
                if roots.iter().any(|r| (z - r).norm() < 0.1) {
                    continue;
                }
                let expect = f.eval(z).unwrap().inv();
                let got = fi.g_prime(z);
                assert!(
                    (got - expect).norm() <= 1e-8 * expect.norm().max(1e-10),
                    "G' mismatch at {z}: {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn conservation_along_trajectory() {
        let f = parse_field("(1+1i)*z").unwrap();
        let fi = first_integral(&f).unwrap();
        let traj = integrate(&f, c(1.0, 0.0), 1.2, 1, 1e-11, 1e-14).unwrap();
        let h = eval_h(&fi, &traj.points).unwrap();
        let h0 = h[0];
        for v in &h {
            assert!((v - h0).abs() < 1e-7, "H drifted: {v} vs {h0}");
        }
    }

    #[test]
    fn conservation_on_real_axis_square() {
        let f = parse_field("z^2").unwrap();
        let fi = first_integral(&f).unwrap();
        let traj = integrate(&f, c(1.0, 0.0), 0.5, 1, 1e-11, 1e-14).unwrap();
        let h = eval_h(&fi, &traj.points).unwrap();
        for v in &h {
            assert!(v.abs() < 1e-9, "real-axis level must stay zero: {v}");
        }
    }

    #[test]
    fn potential_of_conjugate_square() {
        let f = parse_field("conj(z^2)").unwrap();
        let pot = potential(&f).unwrap();
        for (x, y) in [(0.5, 1.0), (-1.0, 0.7), (2.0, -0.4)] {
            let expect = x * x * y - y * y * y / 3.0;
            assert!((pot.psi(x, y) - expect).abs() < 1e-12);
        }
        // conj(z): F = z^2/2, psi = x y.
        let g = parse_field("conj(z)").unwrap();
        let pot_g = potential(&g).unwrap();
        assert!((pot_g.psi(1.3, -0.8) - (1.3 * -0.8)).abs() < 1e-12);
    }

    #[test]
    fn potential_gradients_orthogonal_and_harmonic() {
        let f = parse_field("conj((0.5-1i)*z + (1+1i)*z^2 + 0.3*z^3)").unwrap();
        let pot = potential(&f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let x = rng.gen_range(-2.0..2.0);
            let y = rng.gen_range(-2.0..2.0);
            let gp = pot.grad_phi(x, y);
            let gs = pot.grad_psi(x, y);
            let dot = gp.0 * gs.0 + gp.1 * gs.1;
            let scale = (gp.0.hypot(gp.1)) * (gs.0.hypot(gs.1));
            assert!(dot.abs() <= 1e-8 * scale.max(1e-12));
            // Five-point Laplacian of both potentials vanishes.
            let h = 1e-4;
            for eval in [
                &(|x: f64, y: f64| pot.phi(x, y)) as &dyn Fn(f64, f64) -> f64,
                &(|x: f64, y: f64| pot.psi(x, y)),
            ] {
                let lap = (eval(x + h, y) + eval(x - h, y) + eval(x, y + h) + eval(x, y - h)
                    - 4.0 * eval(x, y))
                    / (h * h);
                let scale = 1.0 + eval(x, y).abs();
                assert!(lap.abs() < 1e-4 * scale, "laplacian {lap}");
            }
        }
    }

    #[test]
    fn travel_time_spiral_example() {
        let f = parse_field("(-1+1i)*z").unwrap();
        let traj = integrate(&f, c(1.0, 0.0), std::f64::consts::PI, 1, 1e-11, 1e-14).unwrap();
        let t = travel_time(&f, &traj).unwrap();
        assert!(
            (t - c(std::f64::consts::PI, 0.0)).norm() < 1e-6,
            "travel time {t}"
        );
    }

    #[test]
    fn travel_time_linear_and_square() {
        let f = parse_field("z").unwrap();
        let traj = integrate(&f, c(1.0, 0.0), 1.0, 1, 1e-11, 1e-14).unwrap();
        assert!((traj.end() - c(std::f64::consts::E, 0.0)).norm() < 1e-8);
        let t = travel_time(&f, &traj).unwrap();
        assert!((t - c(1.0, 0.0)).norm() < 1e-9);

        let g = parse_field("z^2").unwrap();
        let traj = integrate(&g, c(1.0, 0.0), 0.5, 1, 1e-11, 1e-14).unwrap();
        assert!((traj.end() - c(2.0, 0.0)).norm() < 1e-7);
        let t = travel_time(&g, &traj).unwrap();
        assert!((t - c(0.5, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn branch_jump_detected_on_coarse_circle() {
        let f = parse_field("z").unwrap();
        let fi = first_integral(&f).unwrap();
        // Three points around the origin jump more than pi/2 per hop.
        let path = [c(1.0, 0.0), c(-0.5, 0.9), c(-0.5, -0.9)];
        assert!(matches!(
            eval_h(&fi, &path),
            Err(IntegralError::BranchJump { .. })
        ));
    }

    #[test]
    fn inverse_and_conjugate_orbits_coincide() {
        // Orbits of 1/p and conj(p) agree as point sets (compact window).
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let deg = rng.gen_range(2..=4);
            let roots: Vec<Complex64> = (0..deg)
                .map(|_| c(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)))
                .collect();
            if roots
                .iter()
                .enumerate()
                .any(|(i, a)| roots[..i].iter().any(|b| (a - b).norm() < 0.5))
            {
                continue;
            }
            let p = CPoly::from_roots(c(1.0, 0.0), &roots);
            let inv = Field::inverse(p.clone()).unwrap();
            let conj = Field::conjugate(p.clone()).unwrap();
            let seed = c(2.5, 2.5);
            if roots.iter().any(|r| (seed - r).norm() < 0.5) {
                continue;
            }
            // Integrate the reciprocal field directly (no rescaling) so the
            // two routes are independent; compare equal arclength windows.
            let window = 0.5;
            let opts = IntegrateOptions {
                rescale: false,
                t_max: 1e6,
                arc_cap: window,
                max_arc_step: 0.004,
                rtol: 1e-10,
                atol: 1e-13,
                detect_closed: false,
                ..IntegrateOptions::default()
            };
            let a = integrate_opts(&inv, seed, &opts).unwrap();
            let b = integrate_opts(
                &conj,
                seed,
                &IntegrateOptions {
                    arc_cap: 2.0 * window,
                    ..opts.clone()
                },
            )
            .unwrap();
            // Compare over the common arclength window only.
            let common = 0.8 * arc_length(&a.points).min(arc_length(&b.points));
            let a_pts = truncate_arc(&a.points, common);
            let b_pts = truncate_arc(&b.points, common);
            let hausdorff = directed_hausdorff(&a_pts, &b.points)
                .max(directed_hausdorff(&b_pts, &a.points));
            assert!(
                hausdorff < 1e-4,
                "orbit mismatch: hausdorff {hausdorff}, roots {roots:?}, \
                 a: {} pts ending {:?} at {:?}, b: {} pts ending {:?} at {:?}",
                a.points.len(),
                a.terminal,
                a.end(),
                b.points.len(),
                b.terminal,
                b.end()
            );
        }
    }

    fn arc_length(points: &[Complex64]) -> f64 {
        points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    fn truncate_arc(points: &[Complex64], arc: f64) -> Vec<Complex64> {
        let mut out = vec![points[0]];
        let mut acc = 0.0;
        for pair in points.windows(2) {
            acc += (pair[1] - pair[0]).norm();
            if acc > arc {
                break;
            }
            out.push(pair[1]);
        }
        out
    }

    fn directed_hausdorff(a: &[Complex64], b: &[Complex64]) -> f64 {
        // Distance from points of a to the polyline b.
        let mut worst = 0.0f64;
        for &p in a {
            let mut best = f64::INFINITY;
            for seg in b.windows(2) {
                best = best.min(point_segment_dist(p, seg[0], seg[1]));
            }
            worst = worst.max(best);
        }
        worst
    }

    fn point_segment_dist(p: Complex64, a: Complex64, b: Complex64) -> f64 {
        let ab = b - a;
        let t = ((p - a) * ab.conj()).re / ab.norm_sqr().max(1e-300);
        let t = t.clamp(0.0, 1.0);
        (p - (a + ab * t)).norm()
    }
}
