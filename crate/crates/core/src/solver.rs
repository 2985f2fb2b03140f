//! Decoupling conditions for the first transform and the qubit–bridge angle
//! of the second.
//!
//! For fixed φ the two conditions reduce to one equation in θ and a closed
//! expression for Δ'. Two solution families exist. The small-angle family
//! (θ ≈ −3f/Δ) is reached by continuation in f but folds away at moderate
//! couplings; the large-angle family (π/2 < q < π) exists on the whole
//! dispersive range and is bracketed directly.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, SystemParams};
use crate::transform::{assemble_u, conjugate, rotation_angle, TransformAngles};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branch {
    /// π/2 < q < π, θΔ > 0.
    #[default]
    LargeAngle,
    /// Continuation from θ = 0 at f = 0.
    SmallAngle,
}

impl Branch {
    pub fn name(&self) -> &'static str {
        match self {
            Branch::LargeAngle => "large",
            Branch::SmallAngle => "small",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "large" => Ok(Branch::LargeAngle),
            "small" => Ok(Branch::SmallAngle),
            other => Err(Error::InvalidParams(format!("unknown branch '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tol_residual: f64,
    pub max_iter: usize,
    pub continuation_steps: usize,
    /// In units of |Δ|.
    pub offdiag_tol: f64,
    pub branch: Branch,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_residual: 1e-12,
            max_iter: 200,
            continuation_steps: 20,
            offdiag_tol: 1e-9,
            branch: Branch::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tol_residual > 0.0
            && self.offdiag_tol > 0.0
            && self.max_iter > 0
            && self.continuation_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(
                "solver tolerances and counts must be positive".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// f = 0 or g = f = 0: nothing to solve for θ.
    Decoupled,
    Newton,
    /// Direct minimization of the off-diagonal residual.
    Fallback,
}

impl SolveMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SolveMethod::Decoupled => "decoupled",
            SolveMethod::Newton => "newton",
            SolveMethod::Fallback => "fallback",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solution {
    pub angles: TransformAngles,
    /// max |[UᵀHU]_uv| over u+v odd.
    pub residual: f64,
    /// max of the scaled condition residuals.
    pub condition_residual: f64,
    pub branch: Branch,
    pub method: SolveMethod,
    /// Set when θ = 0 leaves Δ' unconstrained; Δ' is then reported as 0.
    pub delta_prime_indeterminate: bool,
    pub iterations: usize,
}

/// φ = ½·atan(2g/Δ), in (−π/4, π/4).
pub fn solve_phi(g: f64, delta: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::Resonant);
    }
    Ok(0.5 * (2.0 * g / delta).atan())
}

/// g/φ, continuous through g = 0 where it equals Δ.
fn ratio_g_phi(g: f64, phi: f64, delta: f64) -> f64 {
    if phi == 0.0 {
        delta
    } else {
        g / phi
    }
}

/// Inputs the conditions depend on.
#[derive(Debug, Clone, Copy)]
struct Problem {
    g: f64,
    f: f64,
    delta: f64,
    n: f64,
    phi: f64,
    r: f64,
}

impl Problem {
    fn new(g: f64, f: f64, delta: f64, n: usize) -> Result<Self> {
        let phi = solve_phi(g, delta)?;
        Ok(Self {
            g,
            f,
            delta,
            n: n as f64,
            phi,
            r: ratio_g_phi(g, phi, delta),
        })
    }

    fn q(&self, theta: f64) -> f64 {
        (self.phi * self.phi + self.n * theta * theta).sqrt()
    }

    /// Reduced equation multiplied through by q·sin q·cos q; θ eliminated
    /// in favour of q on the chosen sign.
    fn reduced(&self, q: f64, sign: f64) -> f64 {
        self.reduced_theta(self.theta_of_q(q, sign))
    }

    /// Same equation parametrized by θ.
    fn reduced_theta(&self, theta: f64) -> f64 {
        let q = self.q(theta);
        let (s, c) = q.sin_cos();
        let p = self.g * self.phi + self.n * self.f * theta;
        self.delta * q * s * c - self.r * q * q * c * c + p * s * s
    }

    fn theta_of_q(&self, q: f64, sign: f64) -> f64 {
        sign * ((q * q - self.phi * self.phi).max(0.0) / self.n).sqrt()
    }

    /// Δ' implied by the antisymmetric-sector condition.
    fn delta_prime(&self, theta: f64) -> f64 {
        let q = self.q(theta);
        q / q.tan() * (self.f / theta - self.r)
    }

    /// Scaled forms of the two conditions, pole free and valid at g = 0.
    fn conditions(&self, theta: f64, dp: f64) -> [f64; 2] {
        let q = self.q(theta);
        let p = self.phi * self.g + self.n * theta * self.f;
        let (s2, c2) = (2.0 * q).sin_cos();
        let f1 = s2 * (q * q * self.delta + self.n * theta * theta * dp) - 2.0 * q * p * c2;
        let (s, c) = q.sin_cos();
        let f2 = theta * dp * s - q * c * (self.f - theta * self.r);
        [f1, f2]
    }

    fn jacobian(&self, theta: f64, dp: f64) -> [[f64; 2]; 2] {
        let n = self.n;
        let q = self.q(theta);
        let dq = if q > 0.0 { n * theta / q } else { 0.0 };
        let p = self.phi * self.g + n * theta * self.f;
        let (s2, c2) = (2.0 * q).sin_cos();
        let (s, c) = q.sin_cos();
        let w = q * q * self.delta + n * theta * theta * dp;
        let df1_dt = 2.0 * c2 * dq * w + s2 * (2.0 * q * dq * self.delta + 2.0 * n * theta * dp)
            - 2.0 * dq * p * c2
            - 2.0 * q * n * self.f * c2
            + 4.0 * q * p * s2 * dq;
        let df1_dd = n * theta * theta * s2;
        let df2_dt = dp * s + theta * dp * c * dq
            - (dq * c - q * s * dq) * (self.f - theta * self.r)
            + q * c * self.r;
        let df2_dd = theta * s;
        [[df1_dt, df1_dd], [df2_dt, df2_dd]]
    }
}

fn sup_norm(v: [f64; 2]) -> f64 {
    v[0].abs().max(v[1].abs())
}

/// Damped Newton on the scaled conditions. Converged once the residual is
/// below `tol` and the next step is negligible relative to the iterate; the
/// residual alone is not enough because both conditions shrink with θ.
fn newton(
    prob: &Problem,
    start: (f64, f64),
    tol: f64,
    max_iter: usize,
) -> Option<((f64, f64), usize)> {
    const REL_STEP: f64 = 1e-12;
    let (mut theta, mut dp) = start;
    let mut res = sup_norm(prob.conditions(theta, dp));
    for it in 0..max_iter {
        if !res.is_finite() {
            return None;
        }
        let fv = prob.conditions(theta, dp);
        let j = prob.jacobian(theta, dp);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return (res < tol).then_some(((theta, dp), it));
        }
        let step_t = (fv[0] * j[1][1] - fv[1] * j[0][1]) / det;
        let step_d = (j[0][0] * fv[1] - j[1][0] * fv[0]) / det;
        let negligible = step_t.abs() <= REL_STEP * theta.abs()
            && step_d.abs() <= REL_STEP * dp.abs().max(prob.delta.abs());
        if res < tol && negligible {
            return Some(((theta, dp), it));
        }
        let mut lambda = 1.0;
        loop {
            let cand = (theta - lambda * step_t, dp - lambda * step_d);
            let cand_res = sup_norm(prob.conditions(cand.0, cand.1));
            if cand_res < res {
                theta = cand.0;
                dp = cand.1;
                res = cand_res;
                break;
            }
            if lambda < 1e-6 {
                // No decrease possible: at the rounding floor or stuck.
                return (res < tol).then_some(((theta, dp), it + 1));
            }
            lambda *= 0.5;
        }
    }
    (res < tol).then_some(((theta, dp), max_iter))
}

/// Brent's method on a bracket with a sign change.
pub(crate) fn brent<F: Fn(f64) -> f64>(
    f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> Option<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut bisected = true;
    for _ in 0..max_iter {
        if fb == 0.0 || (b - a).abs() < tol {
            return Some(b);
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let outside = !((s > lo.min(b)) && (s < lo.max(b)));
        let slow = if bisected {
            (s - b).abs() >= (b - c).abs() / 2.0 || (b - c).abs() < tol
        } else {
            (s - b).abs() >= (c - d).abs() / 2.0 || (c - d).abs() < tol
        };
        bisected = outside || slow;
        if bisected {
            s = (a + b) / 2.0;
        }
        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Some(b)
}

/// Nelder–Mead in two dimensions.
pub(crate) fn nelder_mead<F: Fn(f64, f64) -> f64>(
    f: F,
    start: (f64, f64),
    scale: (f64, f64),
    tol: f64,
    max_iter: usize,
) -> ((f64, f64), f64, usize) {
    let mut pts = [
        [start.0, start.1],
        [start.0 + scale.0, start.1],
        [start.0, start.1 + scale.1],
    ];
    let mut vals = pts.map(|p| f(p[0], p[1]));
    let mut iters = 0;
    while iters < max_iter {
        iters += 1;
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        pts = order.map(|i| pts[i]);
        vals = order.map(|i| vals[i]);
        if vals[2] - vals[0] <= tol * vals[0].abs().max(1e-300) && vals[0] < tol {
            break;
        }
        let spread = (pts[2][0] - pts[0][0]).abs() + (pts[2][1] - pts[0][1]).abs();
        if spread < 1e-16 * (pts[0][0].abs() + pts[0][1].abs() + 1e-300) {
            break;
        }
        let cen = [(pts[0][0] + pts[1][0]) / 2.0, (pts[0][1] + pts[1][1]) / 2.0];
        let along = |t: f64| {
            [
                cen[0] + t * (pts[2][0] - cen[0]),
                cen[1] + t * (pts[2][1] - cen[1]),
            ]
        };
        let xr = along(-1.0);
        let fr = f(xr[0], xr[1]);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(xe[0], xe[1]);
            if fe < fr {
                pts[2] = xe;
                vals[2] = fe;
            } else {
                pts[2] = xr;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            pts[2] = xr;
            vals[2] = fr;
        } else {
            let xc = if fr < vals[2] {
                along(-0.5)
            } else {
                along(0.5)
            };
            let fc = f(xc[0], xc[1]);
            if fc < vals[2].min(fr) {
                pts[2] = xc;
                vals[2] = fc;
            } else {
                for k in 1..3 {
                    pts[k] = [
                        pts[0][0] + 0.5 * (pts[k][0] - pts[0][0]),
                        pts[0][1] + 0.5 * (pts[k][1] - pts[0][1]),
                    ];
                    vals[k] = f(pts[k][0], pts[k][1]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    ((pts[best][0], pts[best][1]), vals[best], iters)
}

/// max |[UᵀHU]_uv| over 1-based u+v odd, with the bridge tuned to the
/// Δ' carried by `angles`.
pub fn residual_offdiagonal(params: &SystemParams, angles: &TransformAngles) -> Result<f64> {
    if params.n != angles.n {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: 2 * angles.n + 1,
        });
    }
    let tuned = params.with_delta_prime(angles.delta_prime);
    let h = build_hamiltonian(&tuned)?;
    let ht = conjugate(&h, &assemble_u(angles))?;
    Ok(parity_defect(&ht))
}

/// Largest entry connecting the even and odd index classes.
pub fn parity_defect(m: &crate::matrix::SquareMatrix) -> f64 {
    let d = m.dim();
    let mut worst = 0.0f64;
    for u in 0..d {
        for v in 0..d {
            if (u + v) % 2 == 1 {
                worst = worst.max(m[(u, v)].abs());
            }
        }
    }
    worst
}

fn offdiag_for(g: f64, f: f64, delta: f64, n: usize, phi: f64, theta: f64, dp: f64) -> f64 {
    // Absolute frequencies drop out; Δ fixes everything relevant.
    let params = SystemParams::new(n, g, f).with_frequencies(0.0, delta, delta + dp);
    let angles = TransformAngles::new(n, phi, theta, dp);
    residual_offdiagonal(&params, &angles).unwrap_or(f64::INFINITY)
}

/// Solves the decoupling conditions for (φ, θ, Δ') on the configured branch.
pub fn solve_conditions(
    g: f64,
    f: f64,
    delta: f64,
    n: usize,
    cfg: &SolverConfig,
) -> Result<Solution> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::InvalidParams("n must be at least 1".into()));
    }
    for (name, v) in [("g", g), ("f", f), ("delta", delta)] {
        if !v.is_finite() {
            return Err(Error::InvalidParams(format!("{name} must be finite")));
        }
    }
    if g < 0.0 || f < 0.0 {
        return Err(Error::InvalidParams(
            "couplings must be non-negative".into(),
        ));
    }
    let prob = Problem::new(g, f, delta, n)?;

    if f == 0.0 {
        let angles = TransformAngles::new(n, prob.phi, 0.0, 0.0);
        let residual = offdiag_for(g, f, delta, n, prob.phi, 0.0, 0.0);
        return Ok(Solution {
            angles,
            residual,
            condition_residual: 0.0,
            branch: cfg.branch,
            method: SolveMethod::Decoupled,
            delta_prime_indeterminate: true,
            iterations: 0,
        });
    }

    let tol = cfg.tol_residual * delta.abs();
    let attempt = match cfg.branch {
        Branch::LargeAngle => large_angle(&prob, tol, cfg),
        Branch::SmallAngle => small_angle(&prob, tol, cfg),
    };
    let limit = cfg.offdiag_tol * delta.abs();
    let mut guess = None;
    match attempt {
        Ok(((theta, dp), iters)) => {
            let residual = offdiag_for(g, f, delta, n, prob.phi, theta, dp);
            if residual < limit {
                return Ok(Solution {
                    angles: TransformAngles::new(n, prob.phi, theta, dp),
                    residual,
                    condition_residual: sup_norm(prob.conditions(theta, dp)),
                    branch: cfg.branch,
                    method: SolveMethod::Newton,
                    delta_prime_indeterminate: false,
                    iterations: iters,
                });
            }
            debug!("newton point fails parity check ({residual:e}), trying fallback");
            guess = Some((theta, dp));
        }
        Err(e) => debug!("newton failed for g={g} f={f} n={n}: {e}"),
    }
    let start = guess.unwrap_or_else(|| initial_guess(&prob, cfg.branch));
    fallback(&prob, start, cfg)
}

/// Direct minimization of the off-diagonal residual over (θ, Δ') from
/// `start`, as used when Newton fails.
pub fn minimize_residual(
    g: f64,
    f: f64,
    delta: f64,
    n: usize,
    start: (f64, f64),
    cfg: &SolverConfig,
) -> Result<Solution> {
    fallback(&Problem::new(g, f, delta, n)?, start, cfg)
}

fn initial_guess(prob: &Problem, branch: Branch) -> (f64, f64) {
    match branch {
        Branch::SmallAngle => (-3.0 * prob.f / prob.delta, -4.0 * prob.delta / 3.0),
        Branch::LargeAngle => {
            let theta = prob.theta_of_q(0.6 * PI, prob.delta.signum());
            (theta, prob.delta_prime(theta))
        }
    }
}

fn fallback(prob: &Problem, start: (f64, f64), cfg: &SolverConfig) -> Result<Solution> {
    let n = prob.n as usize;
    let objective = |t: f64, d: f64| offdiag_for(prob.g, prob.f, prob.delta, n, prob.phi, t, d);
    let scale = (
        0.05 * start.0.abs().max(1e-3),
        0.05 * start.1.abs().max(1e-3 * prob.delta.abs()),
    );
    let ((theta, dp), residual, iters) =
        nelder_mead(objective, start, scale, 1e-16, 20 * cfg.max_iter);
    let limit = cfg.offdiag_tol * prob.delta.abs();
    if residual < limit {
        warn!(
            "fallback minimizer used for g={} f={} n={}: residual {residual:e}",
            prob.g, prob.f, n
        );
        Ok(Solution {
            angles: TransformAngles::new(n, prob.phi, theta, dp),
            residual,
            condition_residual: sup_norm(prob.conditions(theta, dp)),
            branch: cfg.branch,
            method: SolveMethod::Fallback,
            delta_prime_indeterminate: false,
            iterations: iters,
        })
    } else {
        Err(Error::SolverFailure {
            reason: format!(
                "no decoupling solution on the {} branch for g={}, f={}, n={}",
                cfg.branch, prob.g, prob.f, n
            ),
            residual,
        })
    }
}

/// Brackets the reduced equation on (π/2, π), where it changes sign, then
/// polishes with Newton on the full pair of conditions.
fn large_angle(prob: &Problem, tol: f64, cfg: &SolverConfig) -> Result<((f64, f64), usize)> {
    let sign = if prob.delta > 0.0 { 1.0 } else { -1.0 };
    let lo = FRAC_PI_2.max(prob.phi.abs());
    let hi = PI;
    const SAMPLES: usize = 256;
    let s = |q: f64| prob.reduced(q, sign);
    let mut prev = (lo, s(lo));
    let mut root = None;
    for k in 1..=SAMPLES {
        let x = lo + (hi - lo) * k as f64 / SAMPLES as f64;
        let v = s(x);
        if prev.1 == 0.0 {
            root = Some(prev.0);
            break;
        }
        if prev.1.signum() != v.signum() {
            root = brent(s, prev.0, x, 1e-16, 200);
            break;
        }
        prev = (x, v);
    }
    let q = root.ok_or_else(|| Error::SolverFailure {
        reason: "reduced condition has no sign change on (π/2, π)".into(),
        residual: f64::NAN,
    })?;
    let theta = prob.theta_of_q(q, sign);
    let dp = prob.delta_prime(theta);
    polish(prob, (theta, dp), tol, cfg)
}

/// Newton polish that keeps the bracketed point if Newton cannot improve it.
fn polish(
    prob: &Problem,
    start: (f64, f64),
    tol: f64,
    cfg: &SolverConfig,
) -> Result<((f64, f64), usize)> {
    let start_res = sup_norm(prob.conditions(start.0, start.1));
    match newton(prob, start, tol, cfg.max_iter) {
        Some((p, it)) if sup_norm(prob.conditions(p.0, p.1)) <= start_res.max(tol) => Ok((p, it)),
        _ if start_res < tol.max(1e-13 * prob.delta.abs()) => Ok((start, 0)),
        _ => Err(Error::SolverFailure {
            reason: "newton polish diverged".into(),
            residual: start_res,
        }),
    }
}

/// Continuation schedule: geometric approach to the first linear step, then
/// `steps` equal steps to 1.
pub fn continuation_schedule(steps: usize) -> Vec<f64> {
    let first = 1.0 / steps as f64;
    let mut out: Vec<f64> = [1e-4, 1e-3, 1e-2].into_iter().map(|x| x * first).collect();
    out.extend((1..=steps).map(|k| k as f64 / steps as f64));
    out
}

/// Root of the reduced equation nearest θ = 0 on the side opposite to Δ.
fn nearest_small_root(prob: &Problem) -> Option<f64> {
    let sign = if prob.delta > 0.0 { -1.0 } else { 1.0 };
    // Stay below q = π/2, where the large-angle family begins.
    let u_max = prob.theta_of_q(FRAC_PI_2, 1.0);
    let h = |u: f64| {
        let theta = sign * u;
        prob.reduced_theta(theta) / theta
    };
    let samples = (0..=120)
        .map(|k| 1e-12 * 10f64.powf(10.0 * k as f64 / 120.0))
        .chain((1..=400).map(|k| 1e-2 + (u_max - 1e-2) * k as f64 / 400.0))
        .filter(|&u| u < u_max);
    let mut prev: Option<(f64, f64)> = None;
    for u in samples {
        let v = h(u);
        if let Some((pu, pv)) = prev {
            if pv.signum() != v.signum() {
                return brent(h, pu, u, 1e-16, 200).map(|u| sign * u);
            }
        }
        prev = Some((u, v));
    }
    None
}

/// Follows the family that starts at θ = 0 when f = 0, stepping f up from
/// zero and refusing jumps between steps.
fn small_angle(prob: &Problem, tol: f64, cfg: &SolverConfig) -> Result<((f64, f64), usize)> {
    let n = prob.n as usize;
    let mut previous: Option<f64> = None;
    let mut last = None;
    for frac in continuation_schedule(cfg.continuation_steps) {
        let step = Problem {
            f: prob.f * frac,
            ..*prob
        };
        let theta = nearest_small_root(&step).ok_or_else(|| Error::SolverFailure {
            reason: format!("small-angle branch has no root at f = {}", step.f),
            residual: f64::NAN,
        })?;
        if let Some(t0) = previous {
            let jump = (rotation_angle(step.phi, theta, n) - rotation_angle(step.phi, t0, n))
                .abs()
                .max((theta - t0).abs());
            if jump >= 0.2 {
                return Err(Error::SolverFailure {
                    reason: format!("branch jump of {jump:.3} rad at f = {}", step.f),
                    residual: f64::NAN,
                });
            }
        }
        previous = Some(theta);
        last = Some(theta);
    }
    let theta = last.expect("schedule is non-empty");
    polish(prob, (theta, prob.delta_prime(theta)), tol, cfg)
}

/// Solves the conditions for a full parameter set.
pub fn solve(params: &SystemParams, cfg: &SolverConfig) -> Result<Solution> {
    params.validate()?;
    solve_conditions(params.g, params.f, params.delta(), params.n, cfg)
}

/// Qubit–bridge angle of the second transform, on the branch that vanishes
/// with j_a.
pub fn solve_eta(j_q: f64, j_a: f64, eps: f64, n: usize) -> f64 {
    let root = (n as f64).sqrt();
    if j_a == 0.0 {
        return 0.0;
    }
    let d = (n as f64 - 1.0) * j_q - eps;
    if d == 0.0 {
        return j_a.signum() * FRAC_PI_4 / root;
    }
    (2.0 * root * j_a / d).atan() / (2.0 * root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn phi_examples() {
        assert_eq!(solve_phi(0.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(solve_phi(0.5, 1.0).unwrap(), PI / 8.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            solve_phi(0.1, 1.0).unwrap(),
            0.098_697_779_924_940_38,
            epsilon = 1e-15
        );
        assert_eq!(solve_phi(0.1, 0.0), Err(Error::Resonant));
        assert!(solve_phi(0.2, -1.0).unwrap() < 0.0);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for &(g, f, n) in &[(0.2, 0.3, 2usize), (0.0, 0.1, 3), (0.4, 0.05, 5)] {
            let p = Problem::new(g, f, 1.0, n).unwrap();
            let (t, d) = (0.37, -0.6);
            let j = p.jacobian(t, d);
            let h = 1e-6;
            let ft = |t: f64| p.conditions(t, d);
            let fd = |d: f64| p.conditions(t, d);
            for (k, row) in j.iter().enumerate() {
                let num_t = (ft(t + h)[k] - ft(t - h)[k]) / (2.0 * h);
                let num_d = (fd(d + h)[k] - fd(d - h)[k]) / (2.0 * h);
                assert_abs_diff_eq!(row[0], num_t, epsilon = 1e-7);
                assert_abs_diff_eq!(row[1], num_d, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn reduced_equation_brackets() {
        let p = Problem::new(0.2, 0.2, 1.0, 2).unwrap();
        assert!(p.reduced(FRAC_PI_2, 1.0) > 0.0);
        assert!(p.reduced(PI, 1.0) < 0.0);
    }

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, 1e-15, 100).unwrap();
        assert_abs_diff_eq!(r, 2f64.cbrt(), epsilon = 1e-14);
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 100).is_none());
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let ((x, y), v, _) = nelder_mead(
            |x, y| (x - 1.0).powi(2) + 10.0 * (y + 2.0).powi(2),
            (0.0, 0.0),
            (0.5, 0.5),
            1e-20,
            5000,
        );
        assert!(v < 1e-12);
        assert_abs_diff_eq!(x, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(y, -2.0, epsilon = 1e-6);
    }

    #[test]
    fn f_zero_decouples_bridge() {
        let s = solve_conditions(0.3, 0.0, 1.0, 2, &SolverConfig::default()).unwrap();
        assert_eq!(s.angles.theta, 0.0);
        assert_abs_diff_eq!(s.angles.phi, 0.5 * 0.6f64.atan(), epsilon = 1e-15);
        assert!(s.delta_prime_indeterminate);
        assert_eq!(s.method, SolveMethod::Decoupled);
        assert!(s.residual < 1e-14);
    }

    #[test]
    fn both_branches_decouple_at_moderate_coupling() {
        let large = solve_conditions(0.2, 0.2, 1.0, 2, &SolverConfig::default()).unwrap();
        assert!(large.residual < 1e-9);
        assert!(large.angles.q() > FRAC_PI_2 && large.angles.q() < PI);
        let cfg = SolverConfig {
            branch: Branch::SmallAngle,
            ..SolverConfig::default()
        };
        let small = solve_conditions(0.1, 0.1, 1.0, 2, &cfg).unwrap();
        assert!(small.residual < 1e-9);
        assert!(small.angles.q() < 1.0);
        assert!(small.angles.theta < 0.0);
    }

    #[test]
    fn perturbed_theta_breaks_parity() {
        let s = solve_conditions(0.2, 0.2, 1.0, 2, &SolverConfig::default()).unwrap();
        let mut a = s.angles;
        a.theta += 0.01;
        let params = SystemParams::new(2, 0.2, 0.2);
        assert!(residual_offdiagonal(&params, &a).unwrap() > 1e-4);
    }

    #[test]
    fn residual_zero_without_coupling() {
        let params = SystemParams::new(3, 0.0, 0.0);
        let a = TransformAngles::new(3, 0.0, 0.0, 0.0);
        assert_eq!(residual_offdiagonal(&params, &a).unwrap(), 0.0);
    }

    #[test]
    fn eta_examples() {
        assert_eq!(solve_eta(0.3, 0.0, 0.5, 2), 0.0);
        let r = 2f64.sqrt();
        assert_abs_diff_eq!(
            solve_eta(0.0, 0.01, 0.5, 2),
            (2.0 * r * 0.01 / -0.5f64).atan() / (2.0 * r),
            epsilon = 1e-16
        );
        assert!(solve_eta(0.0, 0.01, 0.5, 2) < 0.0);
        assert_abs_diff_eq!(solve_eta(0.0, 0.2, 0.0, 1), FRAC_PI_4, epsilon = 1e-16);
    }

    #[test]
    fn schedule_is_increasing_and_ends_at_one() {
        let s = continuation_schedule(20);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*s.last().unwrap(), 1.0);
        assert!(s[0] < 1e-5);
    }

    #[test]
    fn branch_parses() {
        assert_eq!("large".parse::<Branch>().unwrap(), Branch::LargeAngle);
        assert_eq!("small".parse::<Branch>().unwrap(), Branch::SmallAngle);
        assert!("medium".parse::<Branch>().is_err());
    }
}
