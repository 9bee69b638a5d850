//! Complex polynomial algebra: evaluation, derivative cascades, simultaneous
//! root finding with multiplicity detection, residues of `1/p`, harmonic
//! decomposition rows, and partial fractions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::PolyError;

/// Residual tolerance for accepted roots, relative to coefficient scale.
pub const TAU_ROOT: f64 = 1e-12;
/// Base clustering radius for multiplicity detection.
pub const TAU_CLUSTER: f64 = 1e-7;
/// Relative derivative-magnitude threshold confirming a zero's order.
pub const TAU_ORDER: f64 = 1e-6;
/// Iteration cap for the simultaneous root iteration.
const MAX_ITER: usize = 500;

/// Dense complex polynomial, coefficients in ascending degree.
///
/// The trailing coefficient is nonzero after construction unless the
/// polynomial is identically zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CPoly {
    coeffs: Vec<Complex64>,
}

/// One root with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub location: Complex64,
    pub multiplicity: usize,
}

/// All roots of a polynomial; multiplicities sum to the degree.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RootSet {
    pub roots: Vec<Root>,
}

/// Integer coefficient rows of `Re (x+iy)^k` and `Im (x+iy)^k` over the
/// monomials `x^k, x^{k-1} y, ..., y^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicPair {
    pub k: usize,
    pub p_row: Vec<i64>,
    pub q_row: Vec<i64>,
}

/// One partial-fraction term `coef / (z - pole)^m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfTerm {
    pub coef: Complex64,
    pub pole: Complex64,
    pub m: usize,
}

impl CPoly {
    /// Builds a polynomial from ascending coefficients, stripping trailing
    /// coefficients that are exactly zero.
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&Complex64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        CPoly { coeffs }
    }

    pub fn zero() -> Self {
        CPoly::new(vec![])
    }

    pub fn constant(c: Complex64) -> Self {
        CPoly::new(vec![c])
    }

    /// The monomial `z`.
    pub fn var() -> Self {
        CPoly::new(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)])
    }

    /// Monic polynomial with the given roots (repeated for multiplicity),
    /// scaled by `leading`.
    pub fn from_roots(leading: Complex64, roots: &[Complex64]) -> Self {
        let mut p = CPoly::constant(leading);
        for &r in roots {
            p = p.mul(&CPoly::new(vec![-r, Complex64::new(1.0, 0.0)]));
        }
        p
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == Complex64::new(0.0, 0.0)
    }

    pub fn leading(&self) -> Complex64 {
        *self.coeffs.last().unwrap()
    }

    /// Largest coefficient magnitude.
    pub fn coeff_scale(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Horner evaluation.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// `p(z0), p'(z0), ..., p^(upto)(z0)` by the Horner derivative cascade.
    pub fn eval_derivs(&self, z0: Complex64, upto: usize) -> Vec<Complex64> {
        let mut d = self.taylor_at(z0, upto);
        let mut fact = 1.0;
        for (k, dk) in d.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *dk *= fact;
        }
        d
    }

    /// Taylor coefficients `p^(k)(z0)/k!` for `k = 0..=upto`.
    pub fn taylor_at(&self, z0: Complex64, upto: usize) -> Vec<Complex64> {
        let mut d = vec![Complex64::new(0.0, 0.0); upto + 1];
        for &c in self.coeffs.iter().rev() {
            for j in (1..=upto).rev() {
                d[j] = d[j] * z0 + d[j - 1];
            }
            d[0] = d[0] * z0 + c;
        }
        d
    }

    /// Coefficients of `q(w) = p(w + c)`.
    pub fn shifted(&self, c: Complex64) -> CPoly {
        CPoly::new(self.taylor_at(c, self.degree()))
    }

    pub fn derivative(&self) -> CPoly {
        if self.degree() == 0 {
            return CPoly::zero();
        }
        CPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    /// Antiderivative with zero constant term.
    pub fn antiderivative(&self) -> CPoly {
        let mut out = vec![Complex64::new(0.0, 0.0)];
        out.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| c / (k as f64 + 1.0)),
        );
        CPoly::new(out)
    }

    pub fn add(&self, other: &CPoly) -> CPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (k, slot) in out.iter_mut().enumerate() {
            if k < self.coeffs.len() {
                *slot += self.coeffs[k];
            }
            if k < other.coeffs.len() {
                *slot += other.coeffs[k];
            }
        }
        CPoly::new(out)
    }

    pub fn neg(&self) -> CPoly {
        CPoly::new(self.coeffs.iter().map(|&c| -c).collect())
    }

    pub fn scale(&self, s: Complex64) -> CPoly {
        CPoly::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn mul(&self, other: &CPoly) -> CPoly {
        if self.is_zero() || other.is_zero() {
            return CPoly::zero();
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        CPoly::new(out)
    }

    pub fn pow(&self, e: u32) -> CPoly {
        let mut acc = CPoly::constant(Complex64::new(1.0, 0.0));
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// All roots with multiplicities via simultaneous (Aberth-Ehrlich)
    /// iteration followed by cluster-and-confirm multiplicity detection.
    pub fn roots(&self) -> Result<RootSet, PolyError> {
        if self.degree() == 0 {
            return Err(PolyError::ConstantPolynomial);
        }
        let approx = self.aberth()?;
        Ok(self.cluster_roots(approx))
    }

    fn residual_ok(&self, r: Complex64) -> bool {
        let scale = self.coeff_scale() * (1.0 + r.norm()).powi(self.degree() as i32);
        self.eval(r).norm() < TAU_ROOT * scale
    }

    /// Simultaneous iteration from a perturbed-circle initialization.
    fn aberth(&self) -> Result<Vec<Complex64>, PolyError> {
        let n = self.degree();
        let dp = self.derivative();
        let lead = self.leading();

        // Center the initial circle at the root centroid.
        let center = if n >= 1 {
            -self.coeffs[n - 1] / (lead * n as f64)
        } else {
            Complex64::new(0.0, 0.0)
        };
        let shifted = self.shifted(center);
        // Fujiwara-style bound on the shifted polynomial.
        let mut radius: f64 = 0.0;
        for k in 0..n {
            let a = shifted.coeffs()[k].norm() / lead.norm();
            if a > 0.0 {
                radius = radius.max(2.0 * a.powf(1.0 / (n - k) as f64));
            }
        }
        if radius == 0.0 {
            // All roots at the centroid.
            return Ok(vec![center; n]);
        }

        let mut z: Vec<Complex64> = (0..n)
            .map(|j| {
                let angle = 2.0 * std::f64::consts::PI * (j as f64 + 0.25) / n as f64 + 0.42;
                center + Complex64::from_polar(radius * (0.5 + 0.1 * (j % 3) as f64), angle)
            })
            .collect();

        let mut best = z.clone();
        let mut best_res = f64::INFINITY;
        for _ in 0..MAX_ITER {
            let mut moved: f64 = 0.0;
            for i in 0..n {
                let pv = self.eval(z[i]);
                let dv = dp.eval(z[i]);
                if pv.norm() == 0.0 {
                    continue;
                }
                let newton = if dv.norm() > 0.0 {
                    pv / dv
                } else {
                    // Derivative vanished; nudge off the critical point.
                    let nudge = 1e-8 * (1.0 + z[i].norm());
                    z[i] += Complex64::new(nudge, 1e-8);
                    continue;
                };
                let mut s = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    if j != i {
                        let d = z[i] - z[j];
                        if d.norm() > 1e-300 {
                            s += d.inv();
                        }
                    }
                }
                let denom = Complex64::new(1.0, 0.0) - newton * s;
                let w = if denom.norm() > 1e-300 {
                    newton / denom
                } else {
                    newton
                };
                z[i] -= w;
                moved = moved.max(w.norm() / (1.0 + z[i].norm()));
            }
            let res = z
                .iter()
                .map(|&r| {
                    self.eval(r).norm()
                        / (self.coeff_scale() * (1.0 + r.norm()).powi(n as i32))
                })
                .fold(0.0, f64::max);
            if res < best_res {
                best_res = res;
                best.copy_from_slice(&z);
            }
            // Multiple roots keep the residual tiny while the iterates are
            // still far apart, so require step stagnation as well.
            if (res < TAU_ROOT && moved < 100.0 * f64::EPSILON) || moved == 0.0 {
                return Ok(z);
            }
        }
        if best_res < 1e-8 {
            // Multiple-root clusters stall above TAU_ROOT; the cluster pass
            // recovers full accuracy from the centroid.
            return Ok(best);
        }
        Err(PolyError::NonConvergence {
            best,
            residual: best_res,
        })
    }

    /// Groups approximate roots into multiplicity clusters and confirms each
    /// cluster's order against the derivative cascade, widening the radius
    /// when the confirmed order exceeds the cluster size.
    fn cluster_roots(&self, approx: Vec<Complex64>) -> RootSet {
        let mut tol_mult = 1.0;
        loop {
            let clusters = cluster(&approx, tol_mult * TAU_CLUSTER);
            let mut ok = true;
            let mut roots = Vec::with_capacity(clusters.len());
            for members in &clusters {
                let centroid = members.iter().sum::<Complex64>() / members.len() as f64;
                let order = self.confirm_order(centroid).max(1);
                if order > members.len() && tol_mult < 1e4 {
                    ok = false;
                    break;
                }
                let location = self.polish(centroid, members.len());
                roots.push(Root {
                    location,
                    multiplicity: members.len(),
                });
            }
            if ok {
                roots.sort_by(|a, b| {
                    (a.location.re, a.location.im)
                        .partial_cmp(&(b.location.re, b.location.im))
                        .unwrap()
                });
                return RootSet { roots };
            }
            tol_mult *= 4.0;
        }
    }

    /// Smallest k with a shifted Taylor coefficient above the order threshold.
    fn confirm_order(&self, z0: Complex64) -> usize {
        let taylor = self.taylor_at(z0, self.degree());
        let scale = taylor.iter().map(|c| c.norm()).fold(0.0, f64::max);
        taylor
            .iter()
            .position(|c| c.norm() > TAU_ORDER * scale)
            .unwrap_or(0)
    }

    /// Newton-polishes a root of multiplicity m as a simple root of the
    /// (m-1)th derivative.
    fn polish(&self, guess: Complex64, m: usize) -> Complex64 {
        let mut q = self.clone();
        for _ in 1..m {
            q = q.derivative();
        }
        let dq = q.derivative();
        let mut z = guess;
        for _ in 0..40 {
            let f = q.eval(z);
            let d = dq.eval(z);
            if d.norm() < 1e-300 {
                break;
            }
            let step = f / d;
            z -= step;
            if step.norm() <= 1e-16 * (1.0 + z.norm()) {
                break;
            }
        }
        // Keep the polish only if it did not wander off the cluster.
        if (z - guess).norm() <= 1e-2 * (1.0 + guess.norm()) {
            z
        } else {
            guess
        }
    }
}

impl RootSet {
    /// Total zero count with multiplicity.
    pub fn total_multiplicity(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }

    pub fn nearest(&self, z: Complex64) -> Option<(usize, f64)> {
        self.roots
            .iter()
            .enumerate()
            .map(|(i, r)| (i, (r.location - z).norm()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
    }

}

// Wire form: [[re, im, mult], ...]
impl Serialize for RootSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(
            self.roots
                .iter()
                .map(|r| (r.location.re, r.location.im, r.multiplicity)),
        )
    }
}

/// Greedy single-linkage clustering with a location-scaled radius.
fn cluster(points: &[Complex64], base_tol: f64) -> Vec<Vec<Complex64>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let tol = 2.0 * base_tol * (1.0 + points[i].norm());
            if (points[i] - points[j]).norm() <= tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: Vec<Vec<Complex64>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = find(&mut parent, i);
        groups[r].push(points[i]);
    }
    groups.into_iter().filter(|g| !g.is_empty()).collect()
}

/// Residue of `1/p` at a zero `z0` of the given order, by truncated
/// power-series inversion of the shifted Taylor coefficients.
pub fn residue_inv(p: &CPoly, z0: Complex64, order: usize) -> Result<Complex64, PolyError> {
    let taylor = p.taylor_at(z0, p.degree());
    let scale = taylor.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let detected = taylor
        .iter()
        .position(|c| c.norm() > TAU_ORDER * scale)
        .unwrap_or(0);
    if detected != order || order == 0 || order > p.degree() {
        return Err(PolyError::OrderMismatch {
            z0,
            supplied: order,
            detected,
        });
    }
    Ok(residue_from_taylor(&taylor, order))
}

/// Residue of `1/p` at a zero of the given order from the Taylor
/// coefficients of `p` about that zero. Coefficients below `order` are
/// treated as exactly zero.
pub fn residue_from_taylor(taylor: &[Complex64], order: usize) -> Complex64 {
    let cm = taylor[order];
    // 1/p = w^{-m} / (c_m + c_{m+1} w + ...); invert the analytic factor.
    let mut d = vec![Complex64::new(0.0, 0.0); order];
    d[0] = Complex64::new(1.0, 0.0);
    for j in 1..order {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 1..=j {
            let e = taylor.get(order + i).copied().unwrap_or_default() / cm;
            acc += e * d[j - i];
        }
        d[j] = -acc;
    }
    d[order - 1] / cm
}

/// Coefficient rows of `p_k = Re (x+iy)^k` and `q_k = Im (x+iy)^k`.
///
/// Callers must keep `1 <= k <= 16`.
pub fn harmonic_pair(k: usize) -> HarmonicPair {
    assert!((1..=16).contains(&k), "harmonic_pair: k out of range");
    let mut p_row = vec![0i64; k + 1];
    let mut q_row = vec![0i64; k + 1];
    let mut binom = 1i64;
    for j in 0..=k {
        if j % 2 == 0 {
            p_row[j] = binom * if (j / 2) % 2 == 0 { 1 } else { -1 };
        } else {
            q_row[j] = binom * if ((j - 1) / 2) % 2 == 0 { 1 } else { -1 };
        }
        binom = binom * (k - j) as i64 / (j + 1) as i64;
    }
    HarmonicPair { k, p_row, q_row }
}

/// Partial-fraction expansion of `1/p`.
pub fn partial_fractions_inv(p: &CPoly) -> Result<Vec<PfTerm>, PolyError> {
    let roots = p.roots()?;
    partial_fractions_from_roots(p, &roots)
}

/// Partial fractions of `1/p` reusing an existing root set.
pub fn partial_fractions_from_roots(
    p: &CPoly,
    roots: &RootSet,
) -> Result<Vec<PfTerm>, PolyError> {
    let mut terms = Vec::new();
    for root in &roots.roots {
        let m = root.multiplicity;
        let taylor = p.taylor_at(root.location, p.degree());
        let h0 = taylor[m];
        if h0.norm() < 1e-300 {
            return Err(PolyError::IllConditioned(root.location));
        }
        // Invert p/w^m as a power series to order m-1.
        let mut t = vec![Complex64::new(0.0, 0.0); m];
        t[0] = h0.inv();
        for i in 1..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 1..=i {
                acc += taylor.get(m + l).copied().unwrap_or_default() * t[i - l];
            }
            t[i] = -acc / h0;
        }
        for (i, &coef) in t.iter().enumerate() {
            terms.push(PfTerm {
                coef,
                pole: root.location,
                m: m - i,
            });
        }
    }
    Ok(terms)
}
