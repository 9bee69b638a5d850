//! Trajectory integration, limit-set detection, separatrix tracing from
//! infinity saddles and finite multiple points, and level-curve tracing.
//!
//! The integrator is an embedded Dormand-Prince 5(4) pair with dense output.
//! Inverse and Moebius fields are integrated in an orbit-preserving
//! denominator-weighted form (the weight `|den|^2 > 0` keeps orbits and
//! orientation while removing pole stiffness); physical time is carried as
//! an extra state component.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{FlowError, IntegralError};
use crate::field::{tau_pole, Field};
use crate::infinity;
use crate::local::{self, EqKind};

/// Trajectory escape radius.
pub const R_ESCAPE: f64 = 1e6;
/// Radius beyond which far turning points are recorded.
pub const R_NEAR_INFINITY: f64 = 100.0;
/// Time cap for separatrix probes.
pub const T_CAP: f64 = 1e3;
/// Arclength cap for separatrix probes.
pub const ARC_CAP: f64 = 1e4;
/// Launch offset along chart eigenvectors at infinity.
pub const EPS_SEP_INFINITY: f64 = 1e-4;
/// Launch radius factor around finite multiple points.
pub const EPS_SEP_FINITE: f64 = 1e-3;

/// How an integration ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Terminal {
    TimeExhausted,
    /// Index into the field's classified equilibrium list.
    ConvergedToEquilibrium(usize),
    /// Escape asymptote direction `arg z` in radians.
    EscapedToInfinity(f64),
    /// Index of the singular point (pole or essential origin) reached.
    HitSingularity(usize),
    ClosedOrbit { period: f64 },
}

/// A numerically integrated orbit segment.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    #[serde(serialize_with = "ser_points")]
    pub points: Vec<Complex64>,
    pub times: Vec<f64>,
    pub terminal: Terminal,
    /// Directions (arg z) of turning points beyond [`R_NEAR_INFINITY`];
    /// polycycle hugs record their corner sequence here.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub far_turns: Vec<f64>,
}

fn ser_points<S: serde::Serializer>(pts: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(pts.iter().map(|z| (z.re, z.im)))
}

impl Trajectory {
    pub fn start(&self) -> Complex64 {
        self.points[0]
    }
    pub fn end(&self) -> Complex64 {
        *self.points.last().unwrap()
    }
}

/// Limit-set descriptor used on both ends of a separatrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LimitDescriptor {
    /// Index into the classified equilibrium list.
    Equilibrium(usize),
    /// Index into the equator point list.
    InfinityPoint(usize),
    /// Index into the classified list, for pole-type points.
    Singularity(usize),
    ClosedOrbit,
    Undetermined,
}

/// Where a separatrix was launched from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum SeparatrixOrigin {
    /// Index into the equator point list.
    InfinitySaddle(usize),
    /// Index into the classified equilibrium list.
    FinitePoint(usize),
}

/// One traced separatrix branch with its limit sets.
#[derive(Debug, Clone, Serialize)]
pub struct Separatrix {
    pub origin: SeparatrixOrigin,
    pub branch: usize,
    pub curve: Trajectory,
    pub alpha: LimitDescriptor,
    pub omega: LimitDescriptor,
}

/// Integration controls beyond the basic signature.
#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Physical-time budget (absolute value for backward runs).
    pub t_max: f64,
    /// +1 forward, -1 backward.
    pub direction: i8,
    /// Maximum internal step; caps output spacing.
    pub max_step: f64,
    /// Detect first returns through a section at the start point.
    pub detect_closed: bool,
    /// Use the denominator-weighted orbital form for inverse/Moebius fields.
    pub rescale: bool,
    /// Arclength budget; exceeded runs end as TimeExhausted.
    pub arc_cap: f64,
    /// Maximum arclength advance per accepted step (controls polyline
    /// density for output consumers).
    pub max_arc_step: f64,
    /// Hard cap on accepted steps.
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            rtol: 1e-9,
            atol: 1e-12,
            t_max: 100.0,
            direction: 1,
            max_step: f64::INFINITY,
            detect_closed: true,
            rescale: true,
            arc_cap: f64::INFINITY,
            max_arc_step: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

/// Right-hand side in internal time: `d(x, y, t)/dtau`.
struct Rhs<'a> {
    field: &'a Field,
    rescaled: bool,
    sign: f64,
}

impl<'a> Rhs<'a> {
    fn new(field: &'a Field, rescale: bool, direction: i8) -> Self {
        let rescaled =
            rescale && matches!(field, Field::InversePolynomial(_) | Field::Moebius { .. });
        Rhs {
            field,
            rescaled,
            sign: if direction < 0 { -1.0 } else { 1.0 },
        }
    }

    fn eval(&self, z: Complex64) -> Option<[f64; 3]> {
        let (v, w) = if self.rescaled {
            match self.field {
                Field::InversePolynomial(p) => {
                    let pv = p.eval(z);
                    (pv.conj(), pv.norm_sqr())
                }
                Field::Moebius { a, b, c, d } => {
                    let den = c * z + d;
                    ((a * z + b) * den.conj(), den.norm_sqr())
                }
                _ => unreachable!(),
            }
        } else {
            match self.field.eval(z) {
                Ok(v) => (v, 1.0),
                Err(_) => return None,
            }
        };
        if !v.re.is_finite() || !v.im.is_finite() {
            return None;
        }
        Some([self.sign * v.re, self.sign * v.im, self.sign * w])
    }

    /// Physical velocity direction (unnormalized) at z.
    fn physical_dir(&self, z: Complex64) -> Option<Complex64> {
        self.eval(z).map(|d| Complex64::new(d[0], d[1]))
    }
}

/// Special points a trajectory can terminate at, aligned with the indices
/// of [`local::classify_equilibria`].
pub(crate) struct Targets {
    pub points: Vec<(Complex64, bool)>,
}

impl Targets {
    pub fn for_field(field: &Field) -> Result<Targets, FlowError> {
        let eqs = local::classify_equilibria(field).map_err(flatten_local)?;
        let mut points: Vec<(Complex64, bool)> = eqs
            .iter()
            .map(|e| (e.location, e.kind == EqKind::Pole))
            .collect();
        if let Field::EssentialDemo { .. } = field {
            points.push((Complex64::new(0.0, 0.0), true));
        }
        Ok(Targets { points })
    }

    fn nearest(&self, z: Complex64) -> Option<(usize, f64, bool)> {
        self.points
            .iter()
            .enumerate()
            .map(|(i, &(p, sing))| (i, (z - p).norm(), sing))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
    }
}

fn flatten_local(e: crate::error::LocalError) -> FlowError {
    match e {
        crate::error::LocalError::Poly(p) => FlowError::Poly(p),
        crate::error::LocalError::Field(f) => FlowError::Field(f),
        other => FlowError::Field(crate::error::FieldError::DegenerateField(other.to_string())),
    }
}

const DP_C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const DP_D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

type State = [f64; 3];

fn axpy(y: &mut State, a: f64, x: &State) {
    y[0] += a * x[0];
    y[1] += a * x[1];
    y[2] += a * x[2];
}

/// Dense interpolant over one accepted step, Hairer's five-coefficient form.
struct Dense {
    c1: State,
    c2: State,
    c3: State,
    c4: State,
    c5: State,
}

impl Dense {
    fn build(y0: &State, y1: &State, k: &[State; 7], h: f64) -> Dense {
        let dy = [y1[0] - y0[0], y1[1] - y0[1], y1[2] - y0[2]];
        let c3 = [
            h * k[0][0] - dy[0],
            h * k[0][1] - dy[1],
            h * k[0][2] - dy[2],
        ];
        let c4 = [
            dy[0] - h * k[6][0] - c3[0],
            dy[1] - h * k[6][1] - c3[1],
            dy[2] - h * k[6][2] - c3[2],
        ];
        let mut c5 = [0.0; 3];
        for (i, d) in DP_D.iter().enumerate() {
            axpy(&mut c5, h * d, &k[i]);
        }
        Dense {
            c1: *y0,
            c2: dy,
            c3,
            c4,
            c5,
        }
    }

    fn eval(&self, theta: f64) -> State {
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = self.c1[i]
                + theta
                    * (self.c2[i]
                        + (1.0 - theta)
                            * (self.c3[i] + theta * (self.c4[i] + (1.0 - theta) * self.c5[i])));
        }
        out
    }

    fn eval_z(&self, theta: f64) -> Complex64 {
        let s = self.eval(theta);
        Complex64::new(s[0], s[1])
    }
}

/// Integrates `dz/dt = f(z)` from `z0`.
///
/// `direction` is +1 forward or -1 backward; reported times are signed
/// physical times. Terminal conditions: physical-time budget, convergence to
/// a classified equilibrium, escape beyond [`R_ESCAPE`], pole capture, and
/// first-return closure.
pub fn integrate(
    field: &Field,
    z0: Complex64,
    t_max: f64,
    direction: i8,
    rtol: f64,
    atol: f64,
) -> Result<Trajectory, FlowError> {
    integrate_opts(
        field,
        z0,
        &IntegrateOptions {
            rtol,
            atol,
            t_max,
            direction,
            ..IntegrateOptions::default()
        },
    )
}

pub fn integrate_opts(
    field: &Field,
    z0: Complex64,
    opts: &IntegrateOptions,
) -> Result<Trajectory, FlowError> {
    let targets = Targets::for_field(field)?;
    integrate_with_targets(field, z0, opts, &targets)
}

pub(crate) fn integrate_with_targets(
    field: &Field,
    z0: Complex64,
    opts: &IntegrateOptions,
    targets: &Targets,
) -> Result<Trajectory, FlowError> {
    if let Some((_, dist, true)) = targets.nearest(z0) {
        if dist <= tau_pole(z0) {
            return Err(FlowError::BadStart(z0));
        }
    }
    let rhs = Rhs::new(field, opts.rescale, opts.direction);

    let mut y: State = [z0.re, z0.im, 0.0];
    let mut k1 = rhs.eval(z0).ok_or(FlowError::BadStart(z0))?;

    let mut points = vec![z0];
    let mut times = vec![0.0];
    let mut far_turns = Vec::new();

    // Section through z0 normal to the initial velocity, for first returns.
    let v0 = Complex64::new(k1[0], k1[1]);
    let section_on = opts.detect_closed && v0.norm() > 0.0;
    let v0_hat = if section_on {
        v0 / v0.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    // Section = the line through z0 normal to v0; the crossing indicator is
    // the component of z - z0 along v0.
    let sect = |z: Complex64| ((z - z0) * v0_hat.conj()).re;
    let tau_close = 1e-6 * (1.0 + z0.norm());
    let mut armed = false;
    let mut last_sect = 0.0;

    let speed0 = v0.norm();
    if speed0 < 1e-14 {
        // Started at an equilibrium.
        if let Some((idx, dist, sing)) = targets.nearest(z0) {
            if dist <= 1e-8 * (1.0 + z0.norm()) {
                let terminal = if sing {
                    Terminal::HitSingularity(idx)
                } else {
                    Terminal::ConvergedToEquilibrium(idx)
                };
                return Ok(Trajectory {
                    points,
                    times,
                    terminal,
                    far_turns,
                });
            }
        }
    }
    let mut prev_speed = speed0;
    let mut prev_r = z0.norm();
    let mut prev_prev_r = prev_r;

    let mut h = {
        let scale = opts.atol + opts.rtol * z0.norm().max(1.0);
        (0.01 * scale.powf(0.2) / (1e-8 + k1[0].hypot(k1[1]))).clamp(1e-10, 1.0)
    };
    let mut arclen = 0.0;
    let mut rejected = 0usize;

    for _step in 0..opts.max_steps {
        if !h.is_finite() || h < 1e-306 {
            return Err(FlowError::StepUnderflow(y[2]));
        }
        let h_eff = h.min(opts.max_step);

        let mut k: [State; 7] = [[0.0; 3]; 7];
        k[0] = k1;
        let mut failed = false;
        for stage in 1..=6 {
            let mut ys = y;
            for j in 0..stage {
                axpy(&mut ys, h_eff * DP_A[stage - 1][j], &k[j]);
            }
            let _ = DP_C;
            match rhs.eval(Complex64::new(ys[0], ys[1])) {
                Some(f) => k[stage] = f,
                None => {
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            h = h_eff * 0.25;
            rejected += 1;
            if rejected > 200 {
                return Err(FlowError::StepUnderflow(y[2]));
            }
            continue;
        }
        // 5th-order solution is the b-row (last A row) with FSAL k7.
        let mut y_new = y;
        for j in 0..6 {
            axpy(&mut y_new, h_eff * DP_A[5][j], &k[j]);
        }
        let mut err = [0.0; 3];
        for j in 0..7 {
            axpy(&mut err, h_eff * DP_E[j], &k[j]);
        }
        let z = Complex64::new(y[0], y[1]);
        let z_new = Complex64::new(y_new[0], y_new[1]);
        let tol = opts.atol + opts.rtol * z.norm().max(z_new.norm());
        let err_norm = err[0].hypot(err[1]) / tol;
        if !err_norm.is_finite() {
            h = h_eff * 0.1;
            rejected += 1;
            if rejected > 200 {
                return Err(FlowError::StepUnderflow(y[2]));
            }
            continue;
        }
        if err_norm > 1.0 {
            h = h_eff * (0.9 * err_norm.powf(-0.2)).clamp(0.2, 1.0);
            rejected += 1;
            if rejected > 10_000 {
                return Err(FlowError::StepUnderflow(y[2]));
            }
            continue;
        }
        let advance = (z_new - z).norm();
        if advance > opts.max_arc_step {
            h = h_eff * (0.7 * opts.max_arc_step / advance).min(0.9);
            rejected += 1;
            if rejected > 10_000 {
                return Err(FlowError::StepUnderflow(y[2]));
            }
            continue;
        }
        rejected = 0;

        let dense = Dense::build(&y, &y_new, &k, h_eff);

        // Physical-time budget, located on the dense output.
        if y_new[2].abs() >= opts.t_max {
            let mut lo = 0.0;
            let mut hi = 1.0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if dense.eval(mid)[2].abs() >= opts.t_max {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let yf = dense.eval(hi);
            points.push(Complex64::new(yf[0], yf[1]));
            times.push(yf[2]);
            return Ok(Trajectory {
                points,
                times,
                terminal: Terminal::TimeExhausted,
                far_turns,
            });
        }

        // First-return section crossing.
        if section_on {
            let s_new = sect(z_new);
            if !armed {
                if (z_new - z0).norm() > 20.0 * tau_close && s_new.abs() > 0.0 {
                    armed = true;
                    last_sect = s_new;
                }
            } else if last_sect != 0.0 && s_new * last_sect < 0.0 {
                // Bracketed a section crossing inside this step.
                let mut lo = 0.0;
                let mut hi = 1.0;
                let s_lo = sect(dense.eval_z(0.0));
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if sect(dense.eval_z(mid)) * s_lo.signum() >= 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let yf = dense.eval(hi);
                let zc = Complex64::new(yf[0], yf[1]);
                let aligned = rhs
                    .physical_dir(zc)
                    .map(|v| (v * v0_hat.conj()).re > 0.0)
                    .unwrap_or(false);
                if aligned && (zc - z0).norm() < tau_close {
                    points.push(zc);
                    times.push(yf[2]);
                    return Ok(Trajectory {
                        points,
                        times,
                        terminal: Terminal::ClosedOrbit {
                            period: yf[2].abs(),
                        },
                        far_turns,
                    });
                }
                last_sect = s_new;
            } else if s_new != 0.0 {
                last_sect = s_new;
            }
        }

        arclen += (z_new - z).norm();
        y = y_new;
        k1 = k[6];
        points.push(z_new);
        times.push(y_new[2]);

        // Far turning points (polycycle corner record).
        let r = z_new.norm();
        if prev_r > R_NEAR_INFINITY && prev_r >= prev_prev_r && prev_r >= r {
            far_turns.push(points[points.len() - 2].arg());
        }
        prev_prev_r = prev_r;
        prev_r = r;

        // Escape.
        if r > R_ESCAPE {
            return Ok(Trajectory {
                points,
                times,
                terminal: Terminal::EscapedToInfinity(z_new.arg()),
                far_turns,
            });
        }

        // Equilibrium / singularity capture.
        let speed = {
            let v = Complex64::new(k1[0], k1[1]);
            v.norm()
        };
        if let Some((idx, dist, sing)) = targets.nearest(z_new) {
            let z_t = targets.points[idx].0;
            if dist < 1e-8 * (1.0 + z_t.norm()) && speed <= prev_speed * (1.0 + 1e-9) {
                let terminal = if sing {
                    Terminal::HitSingularity(idx)
                } else {
                    Terminal::ConvergedToEquilibrium(idx)
                };
                return Ok(Trajectory {
                    points,
                    times,
                    terminal,
                    far_turns,
                });
            }
        }
        prev_speed = speed;

        if arclen > opts.arc_cap || y[2].abs() >= opts.t_max {
            return Ok(Trajectory {
                points,
                times,
                terminal: Terminal::TimeExhausted,
                far_turns,
            });
        }

        h = h_eff * (0.9 * err_norm.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
    }
    Ok(Trajectory {
        points,
        times,
        terminal: Terminal::TimeExhausted,
        far_turns,
    })
}

/// Classifies the forward limit set of a trajectory.
///
/// Escapes are matched to the nearest equator direction; time-exhausted runs
/// are diagnosed from the tail trend when possible.
pub fn omega_limit(field: &Field, traj: &Trajectory) -> Result<LimitDescriptor, FlowError> {
    match traj.terminal {
        Terminal::ConvergedToEquilibrium(i) => Ok(LimitDescriptor::Equilibrium(i)),
        Terminal::HitSingularity(i) => Ok(LimitDescriptor::Singularity(i)),
        Terminal::ClosedOrbit { .. } => Ok(LimitDescriptor::ClosedOrbit),
        Terminal::EscapedToInfinity(dir) => {
            let dirs = infinity_directions(field)?;
            if dirs.is_empty() {
                return Ok(LimitDescriptor::Undetermined);
            }
            let (best, _) = dirs
                .iter()
                .enumerate()
                .map(|(i, &a)| (i, angle_dist(a, dir)))
                .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
                .unwrap();
            Ok(LimitDescriptor::InfinityPoint(best))
        }
        Terminal::TimeExhausted => {
            // Trend diagnosis: monotone approach to one equilibrium over the
            // trajectory tail. Multiple zeros attract only algebraically, so
            // the test accepts slow but steady approaches that got close.
            let targets = Targets::for_field(field)?;
            let n = traj.points.len();
            if n < 8 || targets.points.is_empty() {
                return Err(FlowError::Undetermined);
            }
            let tail = &traj.points[n - n.min(16).max(8)..];
            if let Some((idx, d_last, sing)) = targets.nearest(*tail.last().unwrap()) {
                let z_t = targets.points[idx].0;
                let dists: Vec<f64> = tail.iter().map(|&z| (z - z_t).norm()).collect();
                let monotone = dists.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6));
                let close = d_last < 5e-3 * (1.0 + z_t.norm());
                if monotone && close && d_last <= 0.95 * dists[0].max(1e-12) {
                    return Ok(if sing {
                        LimitDescriptor::Singularity(idx)
                    } else {
                        LimitDescriptor::Equilibrium(idx)
                    });
                }
            }
            // Escape trend: radius growing monotonically and already far out
            // (slow escapes from multiple points hit the caps long before
            // the escape radius).
            let radii: Vec<f64> = tail.iter().map(|z| z.norm()).collect();
            let growing = radii.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-6));
            if growing && *radii.last().unwrap() > 50.0 {
                let dir = tail.last().unwrap().arg();
                let dirs = infinity_directions(field)?;
                if dirs.is_empty() {
                    return Ok(LimitDescriptor::Undetermined);
                }
                let (best, _) = dirs
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| (i, angle_dist(a, dir)))
                    .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
                    .unwrap();
                return Ok(LimitDescriptor::InfinityPoint(best));
            }
            Err(FlowError::Undetermined)
        }
    }
}

fn angle_dist(a: f64, b: f64) -> f64 {
    let mut d = (a - b).rem_euclid(2.0 * std::f64::consts::PI);
    if d > std::f64::consts::PI {
        d = 2.0 * std::f64::consts::PI - d;
    }
    d
}

/// Equator-direction angles used to resolve escapes, per field kind.
///
/// Polynomial and conjugate fields use the chart equilibria; inverse fields
/// share orbits with the conjugate of their generator; Moebius fields drift
/// toward `arg(A/C)` and away from its antipode, and the `A = 0` reciprocal
/// case has the four directions of `1/z`.
pub fn infinity_directions(field: &Field) -> Result<Vec<f64>, FlowError> {
    match field {
        Field::Polynomial(_) | Field::ConjugatePolynomial(_) => {
            let pts = infinity::infinite_equilibria(field).map_err(flatten_inf)?;
            Ok(pts.iter().map(|p| p.theta).collect())
        }
        Field::InversePolynomial(p) => {
            let conj = Field::ConjugatePolynomial(p.clone());
            let pts = infinity::infinite_equilibria(&conj).map_err(flatten_inf)?;
            Ok(pts.iter().map(|p| p.theta).collect())
        }
        Field::Moebius { a, b, c, .. } => {
            if c.norm() == 0.0 {
                // Linear drift: every direction escapes; no distinguished points.
                Ok(vec![])
            } else if a.norm() > 0.0 {
                let th = (a / c).arg();
                Ok(vec![th, th + std::f64::consts::PI])
            } else {
                // f ~ (B/C)/z near infinity: four node directions.
                let th0 = (b / c).arg() / 2.0;
                Ok((0..4)
                    .map(|k| th0 + k as f64 * std::f64::consts::FRAC_PI_2)
                    .collect())
            }
        }
        Field::EssentialDemo { .. } => Ok(vec![]),
    }
}

fn flatten_inf(e: crate::error::InfinityError) -> FlowError {
    match e {
        crate::error::InfinityError::Poly(p) => FlowError::Poly(p),
        other => FlowError::Field(crate::error::FieldError::DegenerateField(other.to_string())),
    }
}

fn probe_options() -> IntegrateOptions {
    IntegrateOptions {
        rtol: 1e-9,
        atol: 1e-12,
        t_max: T_CAP,
        arc_cap: ARC_CAP,
        max_steps: 400_000,
        ..IntegrateOptions::default()
    }
}

fn limit_of(field: &Field, traj: &Trajectory) -> LimitDescriptor {
    omega_limit(field, traj).unwrap_or(LimitDescriptor::Undetermined)
}

/// Traces the separatrix skeleton: one probe per transverse eigenvector at
/// every infinity saddle, and a probe fan around every finite point with
/// sector structure (multiple zeros, conjugate saddles, poles).
pub fn trace_separatrices(field: &Field) -> Result<Vec<Separatrix>, FlowError> {
    let targets = Targets::for_field(field)?;
    let eqs = local::classify_equilibria(field).map_err(flatten_local)?;

    let mut jobs: Vec<(SeparatrixOrigin, usize, Complex64, i8)> = Vec::new();

    // Infinity saddles (holomorphic polynomial fields only have them).
    if matches!(field, Field::Polynomial(_)) {
        let pts = infinity::infinite_equilibria(field).map_err(flatten_inf)?;
        for (i, pt) in pts.iter().enumerate() {
            if pt.kind != infinity::InfKind::Saddle {
                continue;
            }
            let Some(z_launch) = pt.launch_point(EPS_SEP_INFINITY) else {
                continue;
            };
            // Radial velocity decides which time direction runs inward.
            let Ok(v) = field.eval(z_launch) else { continue };
            let outward = (v * z_launch.conj()).re > 0.0;
            let dir = if outward { -1 } else { 1 };
            jobs.push((SeparatrixOrigin::InfinitySaddle(i), 0, z_launch, dir));
        }
    }

    // Finite points with separatrix structure.
    for (i, eq) in eqs.iter().enumerate() {
        let fan = match eq.kind {
            EqKind::MultipleElliptic | EqKind::SaddleConjugate => eq.sectors.max(2) * 2,
            EqKind::Pole => (2 * eq.order + 2) * 2,
            _ => continue,
        };
        let radius = EPS_SEP_FINITE * (1.0 + eq.location.norm());
        for b in 0..fan {
            let angle = 2.0 * std::f64::consts::PI * b as f64 / fan as f64;
            let z_launch = eq.location + Complex64::from_polar(radius, angle);
            jobs.push((SeparatrixOrigin::FinitePoint(i), b, z_launch, 0));
        }
    }

    let mut results: Vec<Separatrix> = jobs
        .par_iter()
        .filter_map(|&(origin, branch, z_launch, dir)| {
            let opts = probe_options();
            match origin {
                SeparatrixOrigin::InfinitySaddle(idx) => {
                    let run = integrate_with_targets(
                        field,
                        z_launch,
                        &IntegrateOptions {
                            direction: dir,
                            ..opts
                        },
                        &targets,
                    )
                    .ok()?;
                    let end_limit = limit_of(field, &run);
                    let (alpha, omega) = if dir > 0 {
                        (LimitDescriptor::InfinityPoint(idx), end_limit)
                    } else {
                        (end_limit, LimitDescriptor::InfinityPoint(idx))
                    };
                    Some(Separatrix {
                        origin,
                        branch,
                        curve: run,
                        alpha,
                        omega,
                    })
                }
                SeparatrixOrigin::FinitePoint(_) => {
                    let fwd = integrate_with_targets(field, z_launch, &opts, &targets).ok()?;
                    let bwd = integrate_with_targets(
                        field,
                        z_launch,
                        &IntegrateOptions {
                            direction: -1,
                            ..opts
                        },
                        &targets,
                    )
                    .ok()?;
                    let omega = limit_of(field, &fwd);
                    let alpha = limit_of(field, &bwd);
                    // Stitch backward and forward legs into one curve.
                    let mut points: Vec<Complex64> =
                        bwd.points.iter().rev().copied().collect();
                    let mut times: Vec<f64> = bwd.times.iter().rev().copied().collect();
                    points.extend_from_slice(&fwd.points[1..]);
                    times.extend_from_slice(&fwd.times[1..]);
                    let mut far_turns = bwd.far_turns.clone();
                    far_turns.extend_from_slice(&fwd.far_turns);
                    Some(Separatrix {
                        origin,
                        branch,
                        curve: Trajectory {
                            points,
                            times,
                            terminal: fwd.terminal,
                            far_turns,
                        },
                        alpha,
                        omega,
                    })
                }
            }
        })
        .collect();

    // Deduplicate probe fans: keep one representative per (origin, alpha,
    // omega) group; the fans oversample each sector boundary.
    results.sort_by(|a, b| (a.origin, a.branch).cmp(&(b.origin, b.branch)));
    let mut seen: Vec<(SeparatrixOrigin, LimitDescriptor, LimitDescriptor)> = Vec::new();
    results.retain(|s| {
        let key = (s.origin, s.alpha, s.omega);
        if matches!(s.origin, SeparatrixOrigin::InfinitySaddle(_)) {
            return true;
        }
        if seen.contains(&key) {
            false
        } else {
            seen.push(key);
            true
        }
    });
    Ok(results)
}

/// Where a level-curve trace stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LevelEnd {
    Closed,
    ArcExhausted,
    /// Gradient dropped below the critical threshold at this point.
    Critical(Complex64),
    Escaped,
}

/// A traced level curve of a first integral or stream function.
#[derive(Debug, Clone, Serialize)]
pub struct LevelCurve {
    #[serde(serialize_with = "ser_points")]
    pub points: Vec<Complex64>,
    pub end: LevelEnd,
}

/// Gradient threshold ending a level trace at a critical point.
pub const TAU_GRAD: f64 = 1e-7;

/// Sources that define a level function `H = Im G` through the analytic
/// derivative `G'`.
pub trait AnalyticLevel {
    fn level_deriv(&self, z: Complex64) -> Result<Complex64, IntegralError>;
}

/// Arclength predictor-corrector tracing of the level of `H` through `seed`.
///
/// The corrector projects back onto the level with Newton steps driven by
/// segment quadrature of `Im(G' dz)`, so the residual never accumulates.
pub fn trace_level_curve(
    level: &dyn AnalyticLevel,
    seed: Complex64,
    arc_len: f64,
) -> Result<LevelCurve, FlowError> {
    let g0 = level
        .level_deriv(seed)
        .map_err(|_| FlowError::CriticalPointHit(seed))?;
    if g0.norm() < TAU_GRAD {
        return Err(FlowError::CriticalPointHit(seed));
    }

    let seg_dh = |a: Complex64, b: Complex64| -> Option<f64> {
        // Two-point Gauss-Legendre for Im \int G' dz along [a, b].
        let m = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let offset = half / 3.0_f64.sqrt();
        let g1 = level.level_deriv(m - offset).ok()?;
        let g2 = level.level_deriv(m + offset).ok()?;
        Some(((g1 + g2) * half).im)
    };

    let mut points = vec![seed];
    let mut z = seed;
    let mut drift = 0.0; // accumulated H - H(seed)
    let mut h = 0.01 * (1.0 + seed.norm());
    let mut traveled = 0.0;
    let mut prev_tangent = g0.conj() / g0.norm();

    while traveled < arc_len {
        let Ok(g) = level.level_deriv(z) else {
            return Ok(LevelCurve {
                points,
                end: LevelEnd::Critical(z),
            });
        };
        if g.norm() < TAU_GRAD {
            return Ok(LevelCurve {
                points,
                end: LevelEnd::Critical(z),
            });
        }
        let mut tangent = g.conj() / g.norm();
        if (tangent * prev_tangent.conj()).re < 0.0 {
            tangent = -tangent;
        }
        // Keep the turn per step modest.
        let turn = (tangent * prev_tangent.conj()).arg().abs();
        if turn > 0.35 && h > 1e-6 * (1.0 + z.norm()) {
            h *= 0.5;
        } else if turn < 0.05 {
            h = (h * 1.3).min(0.05 * (1.0 + z.norm()));
        }

        let mut w = z + tangent * h;
        let mut moved_dh = match seg_dh(z, w) {
            Some(d) => d,
            None => {
                return Ok(LevelCurve {
                    points,
                    end: LevelEnd::Critical(z),
                })
            }
        };
        // Newton projection back to the seed level.
        let mut ok = false;
        for _ in 0..6 {
            let r = drift + moved_dh;
            let Ok(gw) = level.level_deriv(w) else { break };
            if gw.norm() < TAU_GRAD {
                break;
            }
            if r.abs() <= 1e-10 * (1.0 + drift.abs()) {
                ok = true;
                break;
            }
            let correction = Complex64::new(0.0, 1.0) * gw.conj() * (-r / gw.norm_sqr());
            w += correction;
            moved_dh = match seg_dh(z, w) {
                Some(d) => d,
                None => break,
            };
        }
        if !ok {
            if h > 1e-9 * (1.0 + z.norm()) {
                h *= 0.3;
                continue;
            }
            return Ok(LevelCurve {
                points,
                end: LevelEnd::Critical(z),
            });
        }
        traveled += (w - z).norm();
        drift += moved_dh;
        prev_tangent = tangent;
        z = w;
        points.push(z);

        if z.norm() > R_ESCAPE.sqrt() {
            return Ok(LevelCurve {
                points,
                end: LevelEnd::Escaped,
            });
        }
        if traveled > 10.0 * h && (z - seed).norm() < 1.5 * h {
            points.push(seed);
            return Ok(LevelCurve {
                points,
                end: LevelEnd::Closed,
            });
        }
    }
    Ok(LevelCurve {
        points,
        end: LevelEnd::ArcExhausted,
    })
}
