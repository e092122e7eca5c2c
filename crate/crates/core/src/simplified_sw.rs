//! The deterministic two-dimensional map that idealizes one Swendsen-Wang
//! step on a complete bipartite graph `K_{n,kn}` with couplings set by
//! [`crate::model::scaled_beta`].
//!
//! A phase `(alpha_L, alpha_R)` is mapped to
//! `F(alpha) = (1/2 (1 + theta_L alpha_L), 1/2 (1 + theta_R alpha_R))`, where
//! `theta` holds the giant-component fractions of the percolated majority
//! class:
//!
//! ```text
//! exp(-B sqrt(k) alpha_R theta_R) = 1 - theta_L
//! exp(-(B / sqrt(k)) alpha_L theta_L) = 1 - theta_R
//! ```
//!
//! and `theta = (0, 0)` when `sqrt(alpha_L alpha_R) B <= 1`.

use thiserror::Error;

/// Tolerance used when a caller does not pick one.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Half-width of the band around `sqrt(alpha_L alpha_R) B = 1` treated as
/// subcritical.
pub const CRITICAL_BAND: f64 = 1e-9;

const THETA_MAX_ITER: usize = 10_000;
const DAMPING: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid {what}: {value}")]
    InvalidInput { what: &'static str, value: f64 },
    #[error("theta solver did not converge (last residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("no convergence after {max_iter} iterations; last iterates {tail:?}")]
    IterationCap { max_iter: usize, tail: Vec<PhasePoint> },
    #[error("B = {0} is within 1e-9 of the critical value 2; the fixed point is degenerate there")]
    NearCritical(f64),
    #[error(
        "F is not differentiable at the critical point sqrt(alpha_L alpha_R) B = 1 (alpha = ({alpha_l}, {alpha_r}))"
    )]
    CriticalPoint { alpha_l: f64, alpha_r: f64 },
    #[error("fixed point residual {residual:e} exceeds tolerance {tol:e}")]
    Residual { residual: f64, tol: f64 },
}

/// Per-partition majority fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub alpha_l: f64,
    pub alpha_r: f64,
}

impl PhasePoint {
    pub fn new(alpha_l: f64, alpha_r: f64) -> Result<Self, SolverError> {
        for (what, value) in [("alpha_L", alpha_l), ("alpha_R", alpha_r)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SolverError::InvalidInput { what, value });
            }
        }
        Ok(PhasePoint { alpha_l, alpha_r })
    }

    pub const HALF: PhasePoint = PhasePoint { alpha_l: 0.5, alpha_r: 0.5 };

    /// Max-norm distance.
    pub fn dist(&self, other: &PhasePoint) -> f64 {
        (self.alpha_l - other.alpha_l).abs().max((self.alpha_r - other.alpha_r).abs())
    }

    fn criticality(&self, scale: &ModelScale) -> f64 {
        (self.alpha_l * self.alpha_r).sqrt() * scale.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaPair {
    pub theta_l: f64,
    pub theta_r: f64,
}

/// `[[dF_L/da_L, dF_L/da_R], [dF_R/da_L, dF_R/da_R]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian2 {
    pub ll: f64,
    pub lr: f64,
    pub rl: f64,
    pub rr: f64,
}

impl Jacobian2 {
    pub const ZERO: Jacobian2 = Jacobian2 { ll: 0.0, lr: 0.0, rl: 0.0, rr: 0.0 };
}

/// Coupling scale `B` and partition ratio `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelScale {
    b: f64,
    k: f64,
    sqrt_k: f64,
}

impl ModelScale {
    pub fn new(b: f64, k: f64) -> Result<Self, SolverError> {
        if !(b.is_finite() && b > 0.0) {
            return Err(SolverError::InvalidInput { what: "B", value: b });
        }
        if !(k.is_finite() && k >= 1.0) {
            return Err(SolverError::InvalidInput { what: "k", value: k });
        }
        Ok(ModelScale { b, k, sqrt_k: k.sqrt() })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// True when `B` sits within the degenerate band around 2.
    pub fn near_critical(&self) -> bool {
        (self.b - 2.0).abs() < CRITICAL_BAND
    }
}

fn check_tol(tol: f64) -> Result<(), SolverError> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(SolverError::InvalidInput { what: "tol", value: tol })
    }
}

/// Giant-component fractions for the majority class at phase `alpha`.
pub fn solve_theta(alpha: PhasePoint, scale: &ModelScale, tol: f64) -> Result<ThetaPair, SolverError> {
    check_tol(tol)?;
    if alpha.criticality(scale) < 1.0 + CRITICAL_BAND {
        return Ok(ThetaPair { theta_l: 0.0, theta_r: 0.0 });
    }
    let a = scale.b * scale.sqrt_k * alpha.alpha_r;
    let b = scale.b / scale.sqrt_k * alpha.alpha_l;
    let g = |tl: f64, tr: f64| (-(-a * tr).exp_m1(), -(-b * tl).exp_m1());

    let (mut tl, mut tr) = g(1.0, 1.0);
    for _ in 0..THETA_MAX_ITER {
        let (gl, gr) = g(tl, tr);
        if (gl - tl).abs().max((gr - tr).abs()) < tol {
            return Ok(ThetaPair { theta_l: tl, theta_r: tr });
        }
        tl = (1.0 - DAMPING) * tl + DAMPING * gl;
        tr = (1.0 - DAMPING) * tr + DAMPING * gr;
    }

    // h(x) / x with h(x) = G_L(G_R(x)) - x is strictly decreasing on (0, 1],
    // starts at ab - 1 > 0 and ends negative.
    let ratio = |x: f64| -(-a * -(-b * x).exp_m1()).exp_m1() / x - 1.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mid > 0.0 && ratio(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tl = 0.5 * (lo + hi);
    let tr = -(-b * tl).exp_m1();
    let residual = (g(tl, tr).0 - tl).abs();
    if residual < tol {
        Ok(ThetaPair { theta_l: tl, theta_r: tr })
    } else {
        Err(SolverError::NoConvergence { residual })
    }
}

/// Residuals of the two theta equations, as absolute differences.
pub fn theta_residuals(alpha: PhasePoint, scale: &ModelScale, theta: ThetaPair) -> (f64, f64) {
    let a = scale.b * scale.sqrt_k * alpha.alpha_r;
    let b = scale.b / scale.sqrt_k * alpha.alpha_l;
    (
        ((-a * theta.theta_r).exp() - (1.0 - theta.theta_l)).abs(),
        ((-b * theta.theta_l).exp() - (1.0 - theta.theta_r)).abs(),
    )
}

fn apply_f(alpha: PhasePoint, theta: ThetaPair) -> PhasePoint {
    PhasePoint {
        alpha_l: 0.5 * (1.0 + theta.theta_l * alpha.alpha_l),
        alpha_r: 0.5 * (1.0 + theta.theta_r * alpha.alpha_r),
    }
}

/// One application of the simplified map.
pub fn f_map(alpha: PhasePoint, scale: &ModelScale) -> Result<PhasePoint, SolverError> {
    Ok(apply_f(alpha, solve_theta(alpha, scale, DEFAULT_TOL)?))
}

/// Iterates `F` until successive points are within `tol` in max-norm.
///
/// Returns the limit and the number of applications of `F`.
pub fn iterate_f(
    alpha0: PhasePoint,
    scale: &ModelScale,
    tol: f64,
    max_iter: usize,
) -> Result<(PhasePoint, usize), SolverError> {
    check_tol(tol)?;
    let mut current = alpha0;
    let mut tail = std::collections::VecDeque::with_capacity(8);
    for i in 1..=max_iter {
        let next = f_map(current, scale)?;
        if next.dist(&current) < tol {
            return Ok((next, i));
        }
        if tail.len() == 8 {
            tail.pop_front();
        }
        tail.push_back(next);
        current = next;
    }
    Err(SolverError::IterationCap { max_iter, tail: tail.into() })
}

/// Residuals of the fixed-point equations
/// `exp(B sqrt(k) (1 - 2 alpha_R)) = (1 - alpha_L) / alpha_L` and
/// `exp((B / sqrt(k)) (1 - 2 alpha_L)) = (1 - alpha_R) / alpha_R`.
pub fn fixed_point_residuals(alpha: PhasePoint, scale: &ModelScale) -> (f64, f64) {
    let odds = |x: f64| (1.0 - x) / x;
    (
        ((scale.b * scale.sqrt_k * (1.0 - 2.0 * alpha.alpha_r)).exp() - odds(alpha.alpha_l)).abs(),
        ((scale.b / scale.sqrt_k * (1.0 - 2.0 * alpha.alpha_l)).exp() - odds(alpha.alpha_r)).abs(),
    )
}

/// The fixed point of `F` with both coordinates in `[1/2, 1]`.
///
/// For `B < 2` this is exactly `(1/2, 1/2)`. For `B > 2` the equations are
/// reduced to one dimension in `z = 2 alpha - 1` and solved by bisection on
/// `z_R`; `z_L = (sqrt(k) / B) log((1 + z_R) / (1 - z_R))`.
pub fn fixed_point(scale: &ModelScale, tol: f64) -> Result<PhasePoint, SolverError> {
    check_tol(tol)?;
    if scale.near_critical() {
        return Err(SolverError::NearCritical(scale.b));
    }
    if scale.b < 2.0 {
        return Ok(PhasePoint::HALF);
    }
    let zl_of = |zr: f64| scale.sqrt_k / scale.b * 2.0 * zr.atanh();
    let zr_of = |zl: f64| 2.0 * zl.atanh() / (scale.b * scale.sqrt_k);
    // The map x -> zr_of(zl_of(x)) has slope 4 / B^2 < 1 at the origin and
    // blows up at the end of its domain, so x - map(x) changes sign once.
    let mut lo = 0.0f64;
    let mut hi = (scale.b / (2.0 * scale.sqrt_k)).tanh();
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let zl = zl_of(mid);
        if zl < 1.0 && zr_of(zl) < mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let zr = 0.5 * (lo + hi);
    let zl = zl_of(zr).min(1.0);
    let point = PhasePoint { alpha_l: 0.5 * (1.0 + zl), alpha_r: 0.5 * (1.0 + zr) };
    let (r1, r2) = fixed_point_residuals(point, scale);
    let residual = r1.max(r2);
    if residual < tol {
        Ok(point)
    } else {
        Err(SolverError::Residual { residual, tol })
    }
}

/// Closed-form Jacobian of `F`; the zero matrix in the subcritical region.
pub fn jacobian_f(alpha: PhasePoint, scale: &ModelScale) -> Result<Jacobian2, SolverError> {
    let c = alpha.criticality(scale);
    if (c - 1.0).abs() < CRITICAL_BAND {
        return Err(SolverError::CriticalPoint { alpha_l: alpha.alpha_l, alpha_r: alpha.alpha_r });
    }
    if c < 1.0 {
        return Ok(Jacobian2::ZERO);
    }
    let ThetaPair { theta_l: tl, theta_r: tr } = solve_theta(alpha, scale, DEFAULT_TOL)?;
    let (b, sk) = (scale.b, scale.sqrt_k);
    let pre = 0.5 / (1.0 - (1.0 - tl) * (1.0 - tr) * b * b * alpha.alpha_l * alpha.alpha_r);
    Ok(Jacobian2 {
        ll: pre * tl,
        lr: pre * (1.0 - tl) * tr * b * sk * alpha.alpha_l,
        rl: pre * (1.0 - tr) * tl * b * alpha.alpha_r / sk,
        rr: pre * tr,
    })
}

/// Largest eigenvalue modulus of a 2x2 matrix.
pub fn spectral_radius(j: &Jacobian2) -> f64 {
    let half_trace = 0.5 * (j.ll + j.rr);
    let det = j.ll * j.rr - j.lr * j.rl;
    let disc = half_trace * half_trace - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (half_trace + s).abs().max((half_trace - s).abs())
    } else {
        det.sqrt()
    }
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Exponential-order log-probability of the phase `alpha`.
pub fn psi(alpha: PhasePoint, scale: &ModelScale) -> f64 {
    let (l, r) = (alpha.alpha_l, alpha.alpha_r);
    let (b, sk) = (scale.b, scale.sqrt_k);
    -b * (l + r - 2.0 * l * r) - (xlogx(l) + xlogx(1.0 - l)) / sk - sk * (xlogx(r) + xlogx(1.0 - r))
}

/// Grid maximizer of [`psi`] over `alpha_L >= 1/2`, step `1 / resolution`.
pub fn argmax_psi_grid(scale: &ModelScale, resolution: usize) -> Result<PhasePoint, SolverError> {
    if resolution < 100 {
        return Err(SolverError::InvalidInput { what: "resolution", value: resolution as f64 });
    }
    let h = 1.0 / resolution as f64;
    let mut best = (f64::NEG_INFINITY, PhasePoint::HALF);
    for i in resolution.div_ceil(2)..=resolution {
        let l = i as f64 * h;
        for j in 0..=resolution {
            let p = PhasePoint { alpha_l: l, alpha_r: j as f64 * h };
            let v = psi(p, scale);
            if v > best.0 {
                best = (v, p);
            }
        }
    }
    Ok(best.1)
}

/// `(1 - alpha_L)(1 - alpha_R) B^2`; below 1 means the minority class
/// percolates subcritically.
pub fn minority_criticality(alpha: PhasePoint, scale: &ModelScale) -> f64 {
    (1.0 - alpha.alpha_l) * (1.0 - alpha.alpha_r) * scale.b * scale.b
}

/// One row of a phase-diagram sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDiagramRow {
    pub b: f64,
    pub k: f64,
    pub fixed_point: PhasePoint,
    pub theta: ThetaPair,
    pub spectral_radius: f64,
    /// Largest fixed-point equation residual.
    pub residual: f64,
}

pub fn phase_diagram_row(scale: &ModelScale, tol: f64) -> Result<PhaseDiagramRow, SolverError> {
    let fp = fixed_point(scale, tol)?;
    let theta = solve_theta(fp, scale, tol)?;
    let rho = spectral_radius(&jacobian_f(fp, scale)?);
    let (r1, r2) = fixed_point_residuals(fp, scale);
    Ok(PhaseDiagramRow { b: scale.b, k: scale.k, fixed_point: fp, theta, spectral_radius: rho, residual: r1.max(r2) })
}
