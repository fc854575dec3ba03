//! Basis pursuit denoise, `min ‖x‖₁ s.t. ‖Ax − y‖₂ ≤ ε`, solved by Newton
//! root finding on the Pareto curve `φ(τ) = min{‖Ax − y‖₂ : ‖x‖₁ ≤ τ}`.
//! Each point on the curve is a LASSO problem solved by spectral projected
//! gradient with a nonmonotone line search.
//!
//! Complex unknowns are treated as pairs of real coordinates throughout, so
//! gradients and inner products are the real ones.

use std::collections::VecDeque;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensing::LinearOperator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub max_outer_iters: usize,
    /// Iteration cap for each LASSO subproblem.
    pub max_inner_iters: usize,
    pub optimality_tol: f64,
    pub step_min: f64,
    pub step_max: f64,
    pub nonmonotone_memory: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            max_outer_iters: 40,
            max_inner_iters: 400,
            optimality_tol: 1e-4,
            step_min: 1e-16,
            step_max: 1e16,
            nonmonotone_memory: 10,
        }
    }
}

impl SolverConfig {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.optimality_tol > 0.0) {
            return bad("optimality_tol", "must be positive");
        }
        if !(self.step_min > 0.0 && self.step_min < self.step_max) {
            return bad("step_bounds", "need 0 < step_min < step_max");
        }
        if self.nonmonotone_memory == 0 {
            return bad("nonmonotone_memory", "must be at least 1");
        }
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return bad("max_iters", "iteration caps must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverStatus {
    Converged,
    IterationLimit,
    InfeasibleEpsilon,
}

impl SolverStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverStatus::Converged => "converged",
            SolverStatus::IterationLimit => "iteration_limit",
            SolverStatus::InfeasibleEpsilon => "infeasible_epsilon",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "converged" => Some(SolverStatus::Converged),
            "iteration_limit" => Some(SolverStatus::IterationLimit),
            "infeasible_epsilon" => Some(SolverStatus::InfeasibleEpsilon),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub epsilon: f64,
    pub final_residual_norm: f64,
    /// `τ`, the ℓ1 norm of the returned solution.
    pub final_l1_norm: f64,
    pub outer_iterations: usize,
    pub inner_iterations_total: usize,
    /// `‖A*r‖_∞` at exit.
    pub dual_certificate: f64,
    pub status: SolverStatus,
    /// `(τ_k, φ(τ_k))` after each LASSO solve.
    pub pareto_path: Vec<(f64, f64)>,
}

impl SolverReport {
    /// `key=value` lines, suitable for appending to run manifests.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "status={}", self.status.as_str());
        let _ = writeln!(s, "epsilon={}", self.epsilon);
        let _ = writeln!(s, "final_residual_norm={}", self.final_residual_norm);
        let _ = writeln!(s, "final_l1_norm={}", self.final_l1_norm);
        let _ = writeln!(s, "outer_iterations={}", self.outer_iterations);
        let _ = writeln!(s, "inner_iterations_total={}", self.inner_iterations_total);
        let _ = writeln!(s, "dual_certificate={}", self.dual_certificate);
        s
    }

    /// Parses the output of [`to_key_values`](Self::to_key_values); the
    /// Pareto path is not serialized.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed report line `{line}`")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            map.get(k)
                .cloned()
                .ok_or_else(|| Error::Config(format!("report is missing `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Config(format!("report field `{k}` is not a number")))
        };
        let int = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::Config(format!("report field `{k}` is not an integer")))
        };
        let status = SolverStatus::parse(&get("status")?)
            .ok_or_else(|| Error::Config("unknown solver status".into()))?;
        Ok(Self {
            epsilon: num("epsilon")?,
            final_residual_norm: num("final_residual_norm")?,
            final_l1_norm: num("final_l1_norm")?,
            outer_iterations: int("outer_iterations")?,
            inner_iterations_total: int("inner_iterations_total")?,
            dual_certificate: num("dual_certificate")?,
            status,
            pareto_path: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LassoStatus {
    Converged,
    IterationLimit,
    /// The line search could not make progress (round-off floor).
    Stalled,
}

#[derive(Debug, Clone)]
pub struct LassoOutcome {
    pub x: Vec<Complex64>,
    /// `r = y − Ax`.
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    /// `‖A*r‖_∞`.
    pub dual_norm: f64,
    pub duality_gap: f64,
    pub projected_gradient_norm: f64,
    pub iterations: usize,
    pub status: LassoStatus,
    /// `½‖r‖²` at every accepted iterate, starting with the initial point.
    pub objective_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BpdnSolution {
    pub x: Vec<Complex64>,
    pub residual: Vec<f64>,
    pub report: SolverReport,
}

pub fn l1_norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm()).sum()
}

fn dual_norm(g: &[Complex64]) -> f64 {
    g.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn real_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p.re * q.re + p.im * q.im).sum()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Euclidean projection onto `{x : Σ|x_i| ≤ τ}`. Magnitudes are projected
/// onto the simplex by soft thresholding at the water-filling level; phases
/// are kept.
pub fn project_l1_ball(z: &[Complex64], tau: f64) -> Vec<Complex64> {
    let mut out = z.to_vec();
    project_l1_ball_in_place(&mut out, tau);
    out
}

fn project_l1_ball_in_place(z: &mut [Complex64], tau: f64) {
    let tau = tau.max(0.0);
    if l1_norm(z) <= tau {
        return;
    }
    if tau == 0.0 {
        z.fill(Complex64::default());
        return;
    }
    let theta = l1_threshold(z, tau);
    for v in z.iter_mut() {
        let m = v.norm();
        if m <= theta {
            *v = Complex64::default();
        } else {
            *v *= (m - theta) / m;
        }
    }
}

/// Level `θ` with `Σ max(|z_i| − θ, 0) = τ`; requires `‖z‖₁ > τ > 0`.
///
/// Active-set iteration: `θ = (Σ_S |z_i| − τ)/|S|` over `S = {|z_i| > θ}`
/// increases monotonically and stops once `S` no longer shrinks, which
/// happens at the exact water-filling level.
fn l1_threshold(z: &[Complex64], tau: f64) -> f64 {
    let mut active: Vec<f64> = z.iter().map(|v| v.norm()).filter(|&m| m > 0.0).collect();
    let mut theta = (active.iter().sum::<f64>() - tau) / active.len() as f64;
    loop {
        let before = active.len();
        active.retain(|&m| m > theta);
        if active.len() == before || active.is_empty() {
            break;
        }
        theta = (active.iter().sum::<f64>() - tau) / active.len() as f64;
    }
    theta.max(0.0)
}

/// Tolerances driving a LASSO solve.
#[derive(Debug, Clone, Copy)]
struct LassoTargets {
    projected_gradient: f64,
    duality_gap: f64,
}

/// Approximately solves `min ‖Ax − y‖₂ s.t. ‖x‖₁ ≤ τ` from `x0`. Stops when
/// the projected-gradient norm falls below `optimality_tol · max(1, ‖y‖₂)`,
/// when the relative duality gap falls below `optimality_tol`, or at the
/// iteration cap.
pub fn lasso_spg<A: LinearOperator + ?Sized>(
    a: &A,
    y: &[f64],
    tau: f64,
    x0: &[Complex64],
    cfg: &SolverConfig,
) -> Result<LassoOutcome> {
    cfg.validate()?;
    check_lengths(a, y, x0)?;
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("must be nonnegative, got {tau}"),
        });
    }
    let scale = norm2(y).max(1.0);
    let targets = LassoTargets {
        projected_gradient: cfg.optimality_tol * scale,
        duality_gap: f64::NAN,
    };
    Ok(lasso_inner(a, y, tau, x0, cfg, targets, true))
}

fn check_lengths<A: LinearOperator + ?Sized>(a: &A, y: &[f64], x0: &[Complex64]) -> Result<()> {
    if y.len() != a.range_len() {
        return Err(Error::LengthMismatch {
            context: "measurement vector",
            expected: a.range_len(),
            actual: y.len(),
        });
    }
    if x0.len() != a.domain_len() {
        return Err(Error::LengthMismatch {
            context: "initial spectrum",
            expected: a.domain_len(),
            actual: x0.len(),
        });
    }
    Ok(())
}

/// `‖P(x − g) − x‖₂`, using `buf` as scratch.
fn projected_gradient_norm(x: &[Complex64], g: &[Complex64], tau: f64, buf: &mut [Complex64]) -> f64 {
    for ((bi, xi), gi) in buf.iter_mut().zip(x).zip(g) {
        *bi = xi - gi;
    }
    project_l1_ball_in_place(buf, tau);
    buf.iter()
        .zip(x)
        .map(|(p, xi)| (p - xi).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn lasso_inner<A: LinearOperator + ?Sized>(
    a: &A,
    y: &[f64],
    tau: f64,
    x0: &[Complex64],
    cfg: &SolverConfig,
    targets: LassoTargets,
    relative_gap: bool,
) -> LassoOutcome {
    const ARMIJO: f64 = 1e-4;
    const MAX_BACKTRACKS: usize = 40;

    let n = a.domain_len();
    let m = a.range_len();
    let mut x = project_l1_ball(x0, tau);
    let mut ax = vec![0.0; m];
    a.forward(&x, &mut ax);
    let mut r: Vec<f64> = y.iter().zip(&ax).map(|(yi, ai)| yi - ai).collect();
    let mut f = 0.5 * r.iter().map(|v| v * v).sum::<f64>();
    let mut g = vec![Complex64::default(); n];
    let mut atr = vec![Complex64::default(); n];
    a.adjoint(&r, &mut atr);
    for (gi, ai) in g.iter_mut().zip(&atr) {
        *gi = -ai;
    }

    let mut history = VecDeque::with_capacity(cfg.nonmonotone_memory);
    history.push_back(f);
    let mut objective_history = vec![f];
    let mut step = 1.0f64.clamp(cfg.step_min, cfg.step_max);
    let mut d = vec![Complex64::default(); n];
    let mut ad = vec![0.0; m];
    let mut trial_r = vec![0.0; m];
    let mut g_new = vec![Complex64::default(); n];
    let mut iterations = 0;
    let mut status = LassoStatus::IterationLimit;
    let mut gap;
    let mut pg_norm;

    loop {
        // Optimality measures at the current iterate.
        let dnorm = dual_norm(&g);
        gap = (tau * dnorm + real_dot(&x, &g)).max(0.0);
        pg_norm = if targets.projected_gradient > 0.0 {
            projected_gradient_norm(&x, &g, tau, &mut d)
        } else {
            f64::NAN
        };
        let gap_measure = if relative_gap { gap / f.max(1.0) } else { gap };
        let gap_target = if relative_gap {
            cfg.optimality_tol
        } else {
            targets.duality_gap
        };
        if pg_norm <= targets.projected_gradient || gap_measure <= gap_target || tau == 0.0 {
            status = LassoStatus::Converged;
            break;
        }
        if iterations >= cfg.max_inner_iters {
            break;
        }
        iterations += 1;

        // Spectral projected-gradient direction.
        for ((di, xi), gi) in d.iter_mut().zip(&x).zip(&g) {
            *di = xi - step * gi;
        }
        project_l1_ball_in_place(&mut d, tau);
        for (di, xi) in d.iter_mut().zip(&x) {
            *di -= xi;
        }
        let gtd = real_dot(&g, &d);
        if !(gtd < 0.0) {
            status = LassoStatus::Stalled;
            break;
        }
        a.forward(&d, &mut ad);

        // Nonmonotone backtracking along x + λd (stays feasible by convexity).
        let f_ref = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut lambda = 1.0;
        let mut f_trial;
        let mut backtracks = 0;
        loop {
            for ((t, ri), adi) in trial_r.iter_mut().zip(&r).zip(&ad) {
                *t = ri - lambda * adi;
            }
            f_trial = 0.5 * trial_r.iter().map(|v| v * v).sum::<f64>();
            if f_trial <= f_ref + ARMIJO * lambda * gtd {
                break;
            }
            backtracks += 1;
            if backtracks > MAX_BACKTRACKS {
                break;
            }
            let denom = 2.0 * (f_trial - f - lambda * gtd);
            let quad = if denom > 0.0 { -gtd * lambda * lambda / denom } else { 0.5 * lambda };
            lambda = quad.clamp(0.1 * lambda, 0.5 * lambda);
        }
        if backtracks > MAX_BACKTRACKS {
            status = LassoStatus::Stalled;
            break;
        }

        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += lambda * di;
        }
        std::mem::swap(&mut r, &mut trial_r);
        f = f_trial;
        a.adjoint(&r, &mut atr);
        for (gi, ai) in g_new.iter_mut().zip(&atr) {
            *gi = -ai;
        }

        // Barzilai-Borwein step from s = λd and the gradient change.
        let mut sts = 0.0;
        let mut sty = 0.0;
        for ((di, gn), go) in d.iter().zip(&g_new).zip(&g) {
            let s = lambda * di;
            let yk = gn - go;
            sts += s.norm_sqr();
            sty += s.re * yk.re + s.im * yk.im;
        }
        step = if sty <= 0.0 {
            cfg.step_max
        } else {
            (sts / sty).clamp(cfg.step_min, cfg.step_max)
        };
        std::mem::swap(&mut g, &mut g_new);

        if history.len() == cfg.nonmonotone_memory {
            history.pop_front();
        }
        history.push_back(f);
        objective_history.push(f);
    }

    if pg_norm.is_nan() {
        pg_norm = projected_gradient_norm(&x, &g, tau, &mut d);
    }
    let dual = dual_norm(&g);
    LassoOutcome {
        residual_norm: norm2(&r),
        x,
        residual: r,
        dual_norm: dual,
        duality_gap: gap,
        projected_gradient_norm: pg_norm,
        iterations,
        status,
        objective_history,
    }
}

/// Solves `min ‖x‖₁ s.t. ‖Ax − y‖₂ ≤ ε` with `ε = cfg.epsilon`.
///
/// Starting from `τ₀ = 0`, each outer step solves the LASSO at `τ_k` (warm
/// started) and applies the Newton update
/// `τ_{k+1} = τ_k + (φ(τ_k) − ε) · ‖r‖₂ / ‖A*r‖_∞`.
pub fn bpdn_solve<A: LinearOperator + ?Sized>(a: &A, y: &[f64], cfg: &SolverConfig) -> Result<BpdnSolution> {
    cfg.validate()?;
    let n = a.domain_len();
    let zero = vec![Complex64::default(); n];
    check_lengths(a, y, &zero)?;
    let eps = cfg.epsilon;
    let y_norm = norm2(y);
    let tol_abs = cfg.optimality_tol * y_norm.max(1.0);

    let trivial = |status| {
        let mut atr = vec![Complex64::default(); n];
        a.adjoint(y, &mut atr);
        BpdnSolution {
            x: zero.clone(),
            residual: y.to_vec(),
            report: SolverReport {
                epsilon: eps,
                final_residual_norm: y_norm,
                final_l1_norm: 0.0,
                outer_iterations: 0,
                inner_iterations_total: 0,
                dual_certificate: dual_norm(&atr),
                status,
                pareto_path: vec![(0.0, y_norm)],
            },
        }
    };
    if !(eps >= 0.0) {
        return Ok(trivial(SolverStatus::InfeasibleEpsilon));
    }
    if y_norm <= eps {
        return Ok(trivial(SolverStatus::Converged));
    }

    let mut x = zero.clone();
    let mut r = y.to_vec();
    let mut r_norm = y_norm;
    let mut atr = vec![Complex64::default(); n];
    a.adjoint(&r, &mut atr);
    let mut dual = dual_norm(&atr);
    let mut tau = 0.0;
    let mut pareto_path = vec![(0.0, y_norm)];
    let mut inner_total = 0;
    let mut outer = 0;
    let mut status = SolverStatus::IterationLimit;

    while outer < cfg.max_outer_iters {
        if (r_norm - eps).abs() <= tol_abs {
            status = SolverStatus::Converged;
            break;
        }
        if !(dual > 0.0) {
            break;
        }
        tau = (tau + (r_norm - eps) * r_norm / dual).max(0.0);
        outer += 1;
        // ½(‖r‖² − φ²) ≤ gap, so gap ≤ δε + δ²/2 keeps ‖r‖ within δ of φ(τ)
        // whenever φ(τ) ≥ ε; δ well inside the outer tolerance keeps the
        // Newton iterates from overshooting the root.
        let delta = 0.25 * tol_abs;
        let targets = LassoTargets {
            projected_gradient: 0.0,
            duality_gap: delta * eps + 0.5 * delta * delta,
        };
        let sub = lasso_inner(a, y, tau, &x, cfg, targets, false);
        inner_total += sub.iterations;
        x = sub.x;
        r = sub.residual;
        r_norm = sub.residual_norm;
        dual = sub.dual_norm;
        pareto_path.push((tau, r_norm));
    }
    if status != SolverStatus::Converged && (r_norm - eps).abs() <= tol_abs {
        status = SolverStatus::Converged;
    }

    Ok(BpdnSolution {
        report: SolverReport {
            epsilon: eps,
            final_residual_norm: r_norm,
            final_l1_norm: l1_norm(&x),
            outer_iterations: outer,
            inner_iterations_total: inner_total,
            dual_certificate: dual,
            status,
            pareto_path,
        },
        x,
        residual: r,
    })
}
