//! Classification of finite equilibria and poles, conformal normal forms,
//! and numeric Lyapunov quantities of the return map.

use num_complex::Complex64;
use serde::Serialize;

use crate::cpoly::{residue_from_taylor, CPoly, TAU_ORDER};
use crate::error::LocalError;
use crate::field::Field;

/// Relative tolerance deciding `Re f' = 0` (center) or `Im f' = 0` (node).
pub const TAU_CENTER: f64 = 1e-9;
/// Upper edge of the reported tolerance band for borderline classifications.
pub const TAU_BAND: f64 = 1e-6;

/// Equilibrium type of a planar field point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EqKind {
    Center,
    FocusRepelling,
    FocusAttracting,
    NodeRepelling,
    NodeAttracting,
    MultipleElliptic,
    Pole,
    SaddleConjugate,
}

impl EqKind {
    pub fn is_focus(self) -> bool {
        matches!(self, EqKind::FocusRepelling | EqKind::FocusAttracting)
    }
    pub fn is_node(self) -> bool {
        matches!(self, EqKind::NodeRepelling | EqKind::NodeAttracting)
    }
    /// +1 repelling, -1 attracting, 0 neutral.
    pub fn stability(self) -> i8 {
        match self {
            EqKind::FocusRepelling | EqKind::NodeRepelling => 1,
            EqKind::FocusAttracting | EqKind::NodeAttracting => -1,
            _ => 0,
        }
    }
}

/// A finite equilibrium or pole of a field.
#[derive(Debug, Clone, Serialize)]
pub struct Equilibrium {
    #[serde(serialize_with = "ser_complex", rename = "z")]
    pub location: Complex64,
    pub order: usize,
    pub kind: EqKind,
    #[serde(serialize_with = "ser_opt_complex", rename = "eig")]
    pub eigenvalue: Option<Complex64>,
    #[serde(serialize_with = "ser_opt_complex", rename = "res")]
    pub residue: Option<Complex64>,
    pub sectors: usize,
    /// True when the deciding real or imaginary part sits between the
    /// classification tolerance and the band edge.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub band_flag: bool,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    (z.re, z.im).serialize(s)
}

fn ser_opt_complex<S: serde::Serializer>(z: &Option<Complex64>, s: S) -> Result<S::Ok, S::Error> {
    z.map(|z| (z.re, z.im)).serialize(s)
}

/// Conformal local model at a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "case")]
pub enum NormalForm {
    /// `f(z0) != 0`: conjugate to the constant field 1.
    Regular,
    /// Simple zero: conjugate to `coef * z`.
    Linear {
        #[serde(serialize_with = "ser_complex")]
        coef: Complex64,
    },
    /// Zero of order n with nonzero residue `1/gamma`: model
    /// `gamma z^n / (1 + z^{n-1})`.
    MultipleResidueNonzero {
        n: usize,
        #[serde(serialize_with = "ser_complex")]
        gamma: Complex64,
    },
    /// Zero of order n with vanishing residue: model `z^n`.
    MultipleResidueZero { n: usize },
    /// Pole of order n: model `1/z^n`.
    PoleCase { n: usize },
}

/// Numeric Lyapunov quantities fitted from the return map.
#[derive(Debug, Clone, Serialize)]
pub struct LyapunovReport {
    pub v: Vec<f64>,
    pub est_error: Vec<f64>,
    pub method: String,
}

/// Classifies a simple equilibrium from its eigenvalue `f'(z0)`.
///
/// Returns the kind and whether the decision fell inside the tolerance band.
pub fn classify_eigenvalue(eig: Complex64) -> (EqKind, bool) {
    let scale = eig.norm();
    let re = eig.re.abs();
    let im = eig.im.abs();
    if re <= TAU_CENTER * scale {
        (EqKind::Center, false)
    } else if im <= TAU_CENTER * scale {
        let kind = if eig.re > 0.0 {
            EqKind::NodeRepelling
        } else {
            EqKind::NodeAttracting
        };
        (kind, false)
    } else {
        let kind = if eig.re > 0.0 {
            EqKind::FocusRepelling
        } else {
            EqKind::FocusAttracting
        };
        let band = re < TAU_BAND * scale || im < TAU_BAND * scale;
        (kind, band)
    }
}

fn poly_equilibria(p: &CPoly, conjugate: bool) -> Result<Vec<Equilibrium>, LocalError> {
    let roots = p.roots()?;
    let mut out = Vec::new();
    for root in &roots.roots {
        let m = root.multiplicity;
        let taylor = p.taylor_at(root.location, p.degree());
        if m == 1 {
            let eig = taylor[1];
            let residue = eig.inv();
            if conjugate {
                out.push(Equilibrium {
                    location: root.location,
                    order: 1,
                    kind: EqKind::SaddleConjugate,
                    eigenvalue: Some(eig),
                    residue: Some(residue),
                    sectors: 4,
                    band_flag: false,
                });
            } else {
                let (kind, band_flag) = classify_eigenvalue(eig);
                out.push(Equilibrium {
                    location: root.location,
                    order: 1,
                    kind,
                    eigenvalue: Some(eig),
                    residue: Some(residue),
                    sectors: 0,
                    band_flag,
                });
            }
        } else {
            let residue = residue_from_taylor(&taylor, m);
            if conjugate {
                out.push(Equilibrium {
                    location: root.location,
                    order: m,
                    kind: EqKind::SaddleConjugate,
                    eigenvalue: None,
                    residue: Some(residue),
                    sectors: 2 * m + 2,
                    band_flag: false,
                });
            } else {
                out.push(Equilibrium {
                    location: root.location,
                    order: m,
                    kind: EqKind::MultipleElliptic,
                    eigenvalue: None,
                    residue: Some(residue),
                    sectors: 2 * m - 2,
                    band_flag: false,
                });
            }
        }
    }
    Ok(out)
}

/// All finite equilibria and poles of a field.
///
/// Polynomial zeros are classified by `f'`; inverse fields report the zeros
/// of the generator as poles; conjugate fields report stream-function
/// saddles; Moebius fields follow their equilibrium/pole table. The
/// essential demo fields have no classified finite points.
pub fn classify_equilibria(field: &Field) -> Result<Vec<Equilibrium>, LocalError> {
    match field {
        Field::Polynomial(p) => poly_equilibria(p, false),
        Field::ConjugatePolynomial(p) => poly_equilibria(p, true),
        Field::InversePolynomial(p) => {
            let roots = p.roots()?;
            Ok(roots
                .roots
                .iter()
                .map(|r| Equilibrium {
                    location: r.location,
                    order: r.multiplicity,
                    kind: EqKind::Pole,
                    eigenvalue: None,
                    residue: None,
                    sectors: 0,
                    band_flag: false,
                })
                .collect())
        }
        Field::Moebius { a, b, c, d } => {
            let mut out = Vec::new();
            if a.norm() > 0.0 {
                let eig = a * a / (a * d - b * c);
                let (kind, band_flag) = classify_eigenvalue(eig);
                out.push(Equilibrium {
                    location: -b / a,
                    order: 1,
                    kind,
                    eigenvalue: Some(eig),
                    residue: Some(eig.inv()),
                    sectors: 0,
                    band_flag,
                });
            }
            if c.norm() > 0.0 {
                out.push(Equilibrium {
                    location: -d / c,
                    order: 1,
                    kind: EqKind::Pole,
                    eigenvalue: None,
                    residue: None,
                    sectors: 0,
                    band_flag: false,
                });
            }
            Ok(out)
        }
        Field::EssentialDemo { .. } => Ok(vec![]),
    }
}

/// Planar Jacobian at a simple equilibrium: `[[a, -b], [b, a]]` with
/// `a + ib = f'(z0)`; for conjugate fields `[[a, -b], [-b, -a]]`.
pub fn jacobian(field: &Field, z0: Complex64) -> Result<[[f64; 2]; 2], LocalError> {
    let deriv = match field {
        Field::Polynomial(p) | Field::ConjugatePolynomial(p) => {
            let d = p.taylor_at(z0, 1);
            if d[0].norm() > 1e-9 * p.coeff_scale() * (1.0 + z0.norm()).powi(p.degree() as i32)
                || d[1].norm() < 1e-12 * p.coeff_scale()
            {
                return Err(LocalError::NotSimple(z0));
            }
            d[1]
        }
        Field::Moebius { a, b, c, d } => {
            if a.norm() == 0.0 || (z0 + b / a).norm() > 1e-6 * (1.0 + z0.norm()) {
                return Err(LocalError::NotSimple(z0));
            }
            a * a / (a * d - b * c)
        }
        _ => return Err(LocalError::Field(crate::error::FieldError::UnsupportedKind(
            "jacobian",
        ))),
    };
    let (a, b) = (deriv.re, deriv.im);
    if matches!(field, Field::ConjugatePolynomial(_)) {
        Ok([[a, -b], [-b, -a]])
    } else {
        Ok([[a, -b], [b, a]])
    }
}

/// Conformal normal form of a field at a point.
pub fn normal_form(field: &Field, z0: Complex64) -> Result<NormalForm, LocalError> {
    match field {
        Field::Polynomial(p) => {
            let taylor = p.taylor_at(z0, p.degree());
            let scale = taylor.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let order = taylor
                .iter()
                .position(|c| c.norm() > TAU_ORDER * scale)
                .unwrap_or(0);
            match order {
                0 => Ok(NormalForm::Regular),
                1 => Ok(NormalForm::Linear { coef: taylor[1] }),
                n => {
                    let res = residue_from_taylor(&taylor, n);
                    // The inversion series starts at 1, so its last entry is
                    // the natural zero scale for the residue.
                    if (res * taylor[n]).norm() > 1e-9 {
                        Ok(NormalForm::MultipleResidueNonzero {
                            n,
                            gamma: res.inv(),
                        })
                    } else {
                        Ok(NormalForm::MultipleResidueZero { n })
                    }
                }
            }
        }
        Field::InversePolynomial(p) => {
            let taylor = p.taylor_at(z0, p.degree());
            let scale = taylor.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let order = taylor
                .iter()
                .position(|c| c.norm() > TAU_ORDER * scale)
                .unwrap_or(0);
            if order == 0 {
                Ok(NormalForm::Regular)
            } else {
                Ok(NormalForm::PoleCase { n: order })
            }
        }
        Field::Moebius { a, b, c, d } => {
            if a.norm() > 0.0 && (z0 + b / a).norm() <= 1e-9 * (1.0 + z0.norm()) {
                return Ok(NormalForm::Linear {
                    coef: a * a / (a * d - b * c),
                });
            }
            if c.norm() > 0.0 && (z0 + d / c).norm() <= 1e-9 * (1.0 + z0.norm()) {
                return Ok(NormalForm::PoleCase { n: 1 });
            }
            Ok(NormalForm::Regular)
        }
        Field::EssentialDemo { .. } => Err(LocalError::EssentialNotSupported),
        Field::ConjugatePolynomial(_) => Err(LocalError::Field(
            crate::error::FieldError::UnsupportedKind("normal_form"),
        )),
    }
}

/// Divergence-zero line `alpha + beta x + gamma y = 0` of a quadratic field.
///
/// The divergence of the planar system is `2 Re f'(z)`, which for a
/// quadratic is `2(a1 + 2 a2 x - 2 b2 y)` in any coordinates.
pub fn bendixson_line(field: &Field) -> Result<(f64, f64, f64), LocalError> {
    let Field::Polynomial(p) = field else {
        return Err(LocalError::Field(crate::error::FieldError::UnsupportedKind(
            "bendixson_line",
        )));
    };
    if p.degree() != 2 {
        return Err(LocalError::WrongDegree {
            expected: 2,
            got: p.degree(),
        });
    }
    let a1 = p.coeffs()[1];
    let a2 = p.coeffs()[2];
    Ok((a1.re, 2.0 * a2.re, -2.0 * a2.im))
}

/// Integrates `dr/dtheta` once around the equilibrium and returns the new
/// radius, following the flow's own rotation direction.
fn return_radius(field: &Field, z0: Complex64, rho: f64, rot: f64) -> Result<f64, LocalError> {
    // dr/dtheta = r Re(e^{-i theta} f) / Im(e^{-i theta} f), integrated from
    // 0 to rot*2pi with a fixed-step RK4 fine enough for the fit tolerances.
    let steps = 4000usize;
    let h = rot * 2.0 * std::f64::consts::PI / steps as f64;
    let deriv = |theta: f64, r: f64| -> Result<f64, LocalError> {
        let dir = Complex64::from_polar(1.0, theta);
        let w = field
            .eval(z0 + dir * r)
            .map_err(LocalError::Field)?
            * dir.conj();
        if w.im.abs() < 1e-14 * w.norm() {
            return Err(LocalError::GridEscape { rho });
        }
        Ok(r * w.re / w.im)
    };
    let mut r = rho;
    let mut theta = 0.0;
    for _ in 0..steps {
        let k1 = deriv(theta, r)?;
        let k2 = deriv(theta + h / 2.0, r + h / 2.0 * k1)?;
        let k3 = deriv(theta + h / 2.0, r + h / 2.0 * k2)?;
        let k4 = deriv(theta + h, r + h * k3)?;
        r += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        theta += h;
        if !(r.is_finite()) || r <= 0.0 || r > 1e3 * rho.max(1.0) {
            return Err(LocalError::GridEscape { rho });
        }
    }
    Ok(r)
}

fn fit_return_map(rhos: &[f64], pis: &[f64], k: usize) -> Vec<f64> {
    // Least squares for pi(rho) = V1 rho + ... + Vk rho^k via normal
    // equations; k <= 3 keeps this well within f64 conditioning.
    let mut ata = vec![vec![0.0; k]; k];
    let mut atb = vec![0.0; k];
    for (&rho, &pi) in rhos.iter().zip(pis) {
        let powers: Vec<f64> = (1..=k).map(|j| rho.powi(j as i32)).collect();
        for i in 0..k {
            for j in 0..k {
                ata[i][j] += powers[i] * powers[j];
            }
            atb[i] += powers[i] * pi;
        }
    }
    solve_dense(&mut ata, &mut atb);
    atb
}

/// Gaussian elimination with partial pivoting, in place.
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let diag = a[col][col];
        if diag.abs() < 1e-300 {
            continue;
        }
        for row in 0..n {
            if row != col {
                let f = a[row][col] / diag;
                for k in col..n {
                    let v = a[col][k];
                    a[row][k] -= f * v;
                }
                b[row] -= f * b[col];
            }
        }
    }
    for col in 0..n {
        if a[col][col].abs() > 1e-300 {
            b[col] /= a[col][col];
        }
    }
}

/// Numeric Lyapunov quantities `V1..Vk` of the first-return map around a
/// rotational simple equilibrium, with per-coefficient error estimates.
///
/// The return map is computed in forward time, so the reported `V1` equals
/// `e^{2 pi a/|b|} - 1` for linear part `(a+ib) z` and matches the sign of
/// `a` for any rotation direction.
pub fn lyapunov_constants(
    field: &Field,
    z0: Complex64,
    k: usize,
    rho_grid: &[f64],
) -> Result<LyapunovReport, LocalError> {
    assert!(k >= 1 && k <= 3, "lyapunov_constants supports k in 1..=3");
    assert!(
        rho_grid.iter().all(|&r| r > 0.0),
        "rho grid must be strictly positive"
    );
    let eig = match field {
        Field::Polynomial(p) => p.taylor_at(z0, 1)[1],
        Field::Moebius { a, b, c, d } => a * a / (a * d - b * c),
        _ => {
            return Err(LocalError::Field(crate::error::FieldError::UnsupportedKind(
                "lyapunov_constants",
            )))
        }
    };
    if eig.im.abs() <= 1e-9 * eig.norm() {
        return Err(LocalError::NoRotation {
            z0,
            im_part: eig.im.abs(),
        });
    }
    let rot = eig.im.signum();

    let pis: Vec<f64> = rho_grid
        .iter()
        .map(|&rho| return_radius(field, z0, rho, rot).map(|r| r - rho))
        .collect::<Result<_, _>>()?;
    let v_full = fit_return_map(rho_grid, &pis, k);

    // Richardson-style refinement: fit on the halved grid and use the
    // drift per coefficient as the error estimate, floored by the
    // integration noise propagated through the normal equations.
    let half: Vec<f64> = rho_grid.iter().map(|&r| r / 2.0).collect();
    let pis_half: Vec<f64> = half
        .iter()
        .map(|&rho| return_radius(field, z0, rho, rot).map(|r| r - rho))
        .collect::<Result<_, _>>()?;
    let v_half = fit_return_map(&half, &pis_half, k);

    let rho_min = rho_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let growth = (2.0 * std::f64::consts::PI * eig.re / eig.im).exp().abs();
    let noise = 1e-11 * growth.max(1.0);
    let est_error: Vec<f64> = (0..k)
        .map(|j| {
            let drift = (v_full[j] - v_half[j]).abs();
            let floor = 10.0 * noise / rho_min.powi(j as i32);
            drift.max(floor)
        })
        .collect();

    Ok(LyapunovReport {
        v: v_full,
        est_error,
        method: format!(
            "forward return map, rk4 in theta, least squares over {} radii with halved-grid refinement",
            rho_grid.len()
        ),
    })
}
