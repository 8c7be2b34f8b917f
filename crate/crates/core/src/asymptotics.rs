//! Extreme-level limits of the L1/Σ-expectile.
//!
//! As `α → 1` the vector `((1-α)/F̄₁(e¹), e²/e¹, …, eᵈ/e¹)` converges to a
//! limit `(η, β₂, …, β_d)` determined by the common tail index `θ`, the tail
//! equivalence coefficients `c_k` and the bivariate upper tail dependence
//! functions `λ^{ik}`. Equation `k` of the limit system reads
//!
//! ```text
//! 1/(θ-1) - η β_k^θ / c_k + Σ_{i≠k} w_ik (I_ik - η β_k^(θ-1) β_i / c_k) = 0
//! I_ik = ∫_{β_i/β_k}^∞ λ^{ik}((c_i/c_k) t^(-θ), 1) dt
//! ```
//!
//! with `w_ik = π_ik / π_kk` (all ones for the L1-expectile).

use crate::error::{Error, Result};
use crate::expectile::WeightMatrix;
use crate::margins::MarginSpec;
use crate::quad::{integrate, integrate_power_tail};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Relative tolerance of numerical tail integrals.
const QUAD_REL_TOL: f64 = 1e-12;

/// Limit vector `(η, β)` with `β₁ = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitVector {
    pub eta: f64,
    pub beta: Vec<f64>,
}

impl LimitVector {
    pub fn new(eta: f64, beta: Vec<f64>) -> Result<Self> {
        if beta.first() != Some(&1.0) {
            return Err(Error::InvalidParameter("beta must start with 1".into()));
        }
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "eta must be non-negative, got {eta}"
            )));
        }
        if beta.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
            return Err(Error::InvalidParameter(
                "beta entries must be non-negative".into(),
            ));
        }
        Ok(Self { eta, beta })
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }
}

/// Bivariate tail dependence function for the pair `(i, k)`.
pub type PairLambda = dyn Fn(usize, usize, f64, f64) -> f64 + Send + Sync;

/// Model for the bivariate upper tail dependence functions `λ^{ik}`.
#[derive(Clone)]
pub enum TailDependenceModel {
    /// `λ = 0`.
    Independent,
    /// `λ(u, v) = min(u, v)`.
    Comonotonic,
    /// Archimedean survival copula with regularly varying generator of index
    /// `-theta_psi`: `λ(u, v) = (u^(-1/θψ) + v^(-1/θψ))^(-θψ)`.
    Archimedean { theta_psi: f64 },
    /// User-supplied `λ^{ik}`; build with [`TailDependenceModel::tabulated`].
    Tabulated(Arc<PairLambda>),
}

impl fmt::Debug for TailDependenceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Independent => write!(f, "Independent"),
            Self::Comonotonic => write!(f, "Comonotonic"),
            Self::Archimedean { theta_psi } => {
                write!(f, "Archimedean {{ theta_psi: {theta_psi} }}")
            }
            Self::Tabulated(_) => write!(f, "Tabulated(..)"),
        }
    }
}

impl TailDependenceModel {
    pub fn archimedean(theta_psi: f64) -> Result<Self> {
        if theta_psi > 0.0 && theta_psi.is_finite() {
            Ok(Self::Archimedean { theta_psi })
        } else {
            Err(Error::InvalidParameter(format!(
                "theta_psi must be positive, got {theta_psi}"
            )))
        }
    }

    /// Admit a user-supplied family of `λ^{ik}` for a `d`-dimensional vector.
    ///
    /// Every pair is checked on a grid for `0 <= λ(u, v) <= min(u, v)` and
    /// `λ(tu, tv) = t λ(u, v)`.
    pub fn tabulated<F>(d: usize, lambda: F) -> Result<Self>
    where
        F: Fn(usize, usize, f64, f64) -> f64 + Send + Sync + 'static,
    {
        const GRID: [f64; 7] = [0.0, 0.05, 0.3, 1.0, 1.7, 4.0, 25.0];
        const SCALES: [f64; 3] = [0.2, 3.0, 11.0];
        for i in 0..d {
            for k in 0..d {
                if i == k {
                    continue;
                }
                for &u in &GRID {
                    for &v in &GRID {
                        let l = lambda(i, k, u, v);
                        let bound = u.min(v);
                        if !(l >= 0.0) || l > bound * (1.0 + 1e-12) {
                            return Err(Error::InvalidLambda(format!(
                                "pair ({i},{k}): λ({u},{v}) = {l} outside [0, min(u,v)]"
                            )));
                        }
                        for &t in &SCALES {
                            let scaled = lambda(i, k, t * u, t * v);
                            if (scaled - t * l).abs() > 1e-9 * (t * l).abs().max(1e-300)
                                && (scaled - t * l).abs() > 1e-14
                            {
                                return Err(Error::InvalidLambda(format!(
                                    "pair ({i},{k}): λ is not 1-homogeneous at ({u},{v}), t={t}"
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(Self::Tabulated(Arc::new(lambda)))
    }

    /// `λ^{ik}(u, v)`; the diagonal `λ^{kk}` is always `min`.
    pub fn lambda_pair(&self, i: usize, k: usize, u: f64, v: f64) -> f64 {
        if i == k {
            return u.min(v);
        }
        match self {
            Self::Tabulated(f) => f(i, k, u, v),
            _ => self.lambda_bivariate(u, v),
        }
    }

    /// `λ(u, v)` for the pair-independent models (the first pair for
    /// tabulated models).
    pub fn lambda_bivariate(&self, u: f64, v: f64) -> f64 {
        match self {
            Self::Independent => 0.0,
            Self::Comonotonic => u.min(v),
            Self::Archimedean { theta_psi } => {
                if u <= 0.0 || v <= 0.0 {
                    return 0.0;
                }
                if u.is_infinite() {
                    return v;
                }
                if v.is_infinite() {
                    return u;
                }
                // Factor out the smaller argument for stability.
                let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
                let p = -1.0 / theta_psi;
                lo * (1.0 + (hi / lo).powf(p)).powf(-theta_psi)
            }
            Self::Tabulated(f) => f(0, 1, u, v),
        }
    }
}

/// `λ(u, v)` of `model`.
pub fn lambda_bivariate(model: &TailDependenceModel, u: f64, v: f64) -> f64 {
    model.lambda_bivariate(u, v)
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 1.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergent(theta))
    }
}

fn check_c(c: &[f64]) -> Result<()> {
    if c.first() != Some(&1.0) {
        return Err(Error::InvalidParameter("c must start with 1".into()));
    }
    if c.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "tail equivalence coefficients must be positive".into(),
        ));
    }
    Ok(())
}

/// `∫_r^∞ λ(ρ t^(-θ), 1) dt` for the pair `(i, k)`.
fn tail_integral(
    model: &TailDependenceModel,
    i: usize,
    k: usize,
    theta: f64,
    rho: f64,
    r: f64,
) -> f64 {
    match model {
        TailDependenceModel::Independent if i != k => 0.0,
        TailDependenceModel::Comonotonic => comonotonic_integral(theta, rho, r),
        _ if i == k => comonotonic_integral(theta, rho, r),
        TailDependenceModel::Archimedean { theta_psi } if *theta_psi == theta => {
            // (ρ^(-1/θ) t + 1)^(-θ) integrates in closed form.
            let s = rho.powf(1.0 / theta);
            s * (r / s + 1.0).powf(1.0 - theta) / (theta - 1.0)
        }
        _ => numeric_tail_integral(|u, v| model.lambda_pair(i, k, u, v), theta, rho, r),
    }
}

/// `∫_r^∞ min(ρ t^(-θ), 1) dt`; the integrand switches branch at `ρ^(1/θ)`.
fn comonotonic_integral(theta: f64, rho: f64, r: f64) -> f64 {
    let knee = rho.powf(1.0 / theta);
    if r >= knee {
        rho * r.powf(1.0 - theta) / (theta - 1.0)
    } else {
        knee - r + knee / (theta - 1.0)
    }
}

fn numeric_tail_integral<L: Fn(f64, f64) -> f64>(lambda: L, theta: f64, rho: f64, r: f64) -> f64 {
    let g = |t: f64| lambda(rho * t.powf(-theta), 1.0);
    if r <= 0.0 {
        return f64::INFINITY;
    }
    // Split at the point where both arguments of λ coincide.
    let knee = rho.powf(1.0 / theta);
    if r < knee {
        integrate(g, r, knee, 0.0, QUAD_REL_TOL, 4000).value
            + integrate_power_tail(g, knee, theta, QUAD_REL_TOL).value
    } else {
        integrate_power_tail(g, r, theta, QUAD_REL_TOL).value
    }
}

/// `∫_{β_i/β_k}^∞ λ((c_i/c_k) t^(-θ), 1) dt`.
pub fn integral_lambda_tail(
    model: &TailDependenceModel,
    theta: f64,
    c_i: f64,
    c_k: f64,
    beta_i: f64,
    beta_k: f64,
) -> Result<f64> {
    check_theta(theta)?;
    for (name, v) in [
        ("c_i", c_i),
        ("c_k", c_k),
        ("beta_i", beta_i),
        ("beta_k", beta_k),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    Ok(tail_integral(
        model,
        0,
        1,
        theta,
        c_i / c_k,
        beta_i / beta_k,
    ))
}

/// `∫_1^∞ λ(t^(-θ), (c_k/c_i)(β_k/β_i)^(-θ)) dt`, the integral in the
/// rescaled form of the limit system. It equals
/// `integral_lambda_tail / ((c_i/c_k)(β_i/β_k)^(1-θ))`.
pub fn integral_lambda_rescaled(
    model: &TailDependenceModel,
    theta: f64,
    c_i: f64,
    c_k: f64,
    beta_i: f64,
    beta_k: f64,
) -> Result<f64> {
    let tail = integral_lambda_tail(model, theta, c_i, c_k, beta_i, beta_k)?;
    Ok(tail / ((c_i / c_k) * (beta_i / beta_k).powf(1.0 - theta)))
}

/// Limit for comonotonic vectors: `η = 1/(θ-1)`, `β_k = c_k^(1/θ)`.
pub fn limit_comonotonic(theta: f64, c: &[f64]) -> Result<LimitVector> {
    check_theta(theta)?;
    check_c(c)?;
    let beta = c.iter().map(|ck| ck.powf(1.0 / theta)).collect();
    LimitVector::new(1.0 / (theta - 1.0), beta)
}

/// Limit under pairwise asymptotic independence:
/// `β_k = c_k^(1/(θ-1))`, `η = 1/((θ-1) Σ β_k)`.
pub fn limit_independent(theta: f64, c: &[f64]) -> Result<LimitVector> {
    check_theta(theta)?;
    check_c(c)?;
    let beta: Vec<f64> = c.iter().map(|ck| ck.powf(1.0 / (theta - 1.0))).collect();
    let sum: f64 = beta.iter().sum();
    LimitVector::new(1.0 / ((theta - 1.0) * sum), beta)
}

/// Per-component limits `η_k = lim (1-α)/F̄_k(e^k)` of the Σ-expectile under
/// asymptotic independence.
///
/// The weighted system `η β_k^(θ-1) (β_k + Σ_{i≠k} (π_ik/π_kk) β_i) = c_k/(θ-1)`
/// is solved for `(η, β)`; `β` coincides with [`limit_independent`] only when
/// `Σ_{i≠k} (π_ik/π_kk) β_i` does not depend on `k`, e.g. for all-ones weights.
pub fn limit_independent_weighted(
    theta: f64,
    c: &[f64],
    weights: &WeightMatrix,
) -> Result<Vec<f64>> {
    let init = limit_independent(theta, c)?;
    if weights.dim() != c.len() {
        return Err(Error::InvalidParameter(
            "weight matrix dimension does not match c".into(),
        ));
    }
    let limit = if weights.is_all_ones() {
        init
    } else {
        solve_limit_system_weighted(
            theta,
            c,
            &TailDependenceModel::Independent,
            Some(weights),
            &init,
            1e-13,
        )?
    };
    Ok(limit
        .beta
        .iter()
        .zip(c)
        .map(|(b, ck)| limit.eta * b.powf(theta) / ck)
        .collect())
}

/// Limit under a dominant first tail: `η = 1/(θ-1)`, `β = (1, 0, …, 0)`.
pub fn limit_dominant(theta: f64, d: usize) -> Result<LimitVector> {
    check_theta(theta)?;
    if d == 0 {
        return Err(Error::InvalidParameter(
            "dimension must be at least 1".into(),
        ));
    }
    let mut beta = vec![0.0; d];
    beta[0] = 1.0;
    LimitVector::new(1.0 / (theta - 1.0), beta)
}

struct LimitSystem<'a> {
    theta: f64,
    c: &'a [f64],
    model: &'a TailDependenceModel,
    /// `w[k][i] = π_ik / π_kk`.
    w: Vec<Vec<f64>>,
}

/// Outcome of one Newton run on the limit system.
struct Attempt {
    eta: f64,
    beta: Vec<f64>,
    residual: f64,
    iterations: usize,
}

impl LimitSystem<'_> {
    /// Damped Newton in `(ln η, ln β_2..d)` followed by kink snapping.
    fn newton(&self, init: &LimitVector) -> Attempt {
        let mut z: Vec<f64> = std::iter::once(init.eta.ln())
            .chain(init.beta[1..].iter().map(|b| b.ln()))
            .collect();
        let (eta, beta) = self.unpack(&z);
        let mut res = max_abs(&self.residual(eta, &beta));
        let mut iterations = 0;
        // Iterate past the tolerance while the residual keeps falling: at a
        // comonotonic solution the root is double and convergence is only linear.
        while iterations < 200 && res > 0.0 {
            iterations += 1;
            let (eta, beta) = self.unpack(&z);
            let r = DVector::from_vec(self.residual(eta, &beta));
            let Some(step) = self.jacobian(eta, &beta).lu().solve(&(-r)) else {
                break;
            };
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<f64> = z
                    .iter()
                    .zip(step.iter())
                    .map(|(zi, si)| zi + lambda * si)
                    .collect();
                let (te, tb) = self.unpack(&trial);
                let tr = max_abs(&self.residual(te, &tb));
                if tr < res {
                    z = trial;
                    res = tr;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let (mut eta, mut beta) = self.unpack(&z);
        if let Some((se, sb, sr)) = self.snap_to_kinks(&beta) {
            // Accept when the snapped residual is within rounding of the terms.
            if sr <= res.max(64.0 * f64::EPSILON * self.magnitude(se, &sb)) {
                (eta, beta, res) = (se, sb, sr);
            }
        }
        Attempt {
            eta,
            beta,
            residual: res,
            iterations,
        }
    }

    fn unpack(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let mut beta = vec![1.0; self.c.len()];
        for (b, zi) in beta.iter_mut().skip(1).zip(&z[1..]) {
            *b = zi.exp();
        }
        (z[0].exp(), beta)
    }

    fn residual(&self, eta: f64, beta: &[f64]) -> Vec<f64> {
        let (theta, c) = (self.theta, self.c);
        (0..c.len())
            .map(|k| {
                let mut r = 1.0 / (theta - 1.0) - eta * beta[k].powf(theta) / c[k];
                for i in (0..c.len()).filter(|&i| i != k) {
                    let integral =
                        tail_integral(self.model, i, k, theta, c[i] / c[k], beta[i] / beta[k]);
                    r += self.w[k][i]
                        * (integral - eta * beta[k].powf(theta - 1.0) * beta[i] / c[k]);
                }
                r
            })
            .collect()
    }

    /// Largest sum of absolute terms of an equation, the scale of rounding
    /// error in [`Self::residual`].
    fn magnitude(&self, eta: f64, beta: &[f64]) -> f64 {
        let (theta, c) = (self.theta, self.c);
        (0..c.len())
            .map(|k| {
                let mut m = 1.0 / (theta - 1.0) + eta * beta[k].powf(theta) / c[k];
                for i in (0..c.len()).filter(|&i| i != k) {
                    let integral =
                        tail_integral(self.model, i, k, theta, c[i] / c[k], beta[i] / beta[k]);
                    m += self.w[k][i]
                        * (integral + eta * beta[k].powf(theta - 1.0) * beta[i] / c[k]);
                }
                m
            })
            .fold(0.0, f64::max)
    }

    /// Project onto the manifold where every pair that is nearly on the
    /// diagonal `β_i^θ/c_i = β_k^θ/c_k` sits exactly on it, then fit `η` by
    /// least squares. Roots lying on such a kink of `λ` are double roots, so
    /// Newton alone only resolves them to about the square root of the
    /// residual precision.
    fn snap_to_kinks(&self, beta: &[f64]) -> Option<(f64, Vec<f64>, f64)> {
        let (theta, c, d) = (self.theta, self.c, self.c.len());
        let g: Vec<f64> = (0..d).map(|i| beta[i].powf(theta) / c[i]).collect();
        let mut root: Vec<usize> = (0..d).collect();
        fn find(root: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while root[r] != r {
                r = root[r];
            }
            root[i] = r;
            r
        }
        let mut any = false;
        for i in 0..d {
            for k in i + 1..d {
                if (g[i] / g[k] - 1.0).abs() < 1e-4 {
                    let (a, b) = (find(&mut root, i), find(&mut root, k));
                    // Keep index 0 as the representative of its class.
                    root[a.max(b)] = a.min(b);
                    any = true;
                }
            }
        }
        if !any {
            return None;
        }
        let mut snapped = beta.to_vec();
        for i in 1..d {
            let r = find(&mut root, i);
            let members: Vec<usize> = (0..d).filter(|&j| find(&mut root, j) == r).collect();
            if members.len() == 1 {
                continue;
            }
            let level = if r == 0 {
                1.0
            } else {
                (members.iter().map(|&j| g[j].ln()).sum::<f64>() / members.len() as f64).exp()
            };
            snapped[i] = (level * c[i]).powf(1.0 / theta);
        }
        // Each equation is affine in η: R_k = a_k - η b_k.
        let a = self.residual(0.0, &snapped);
        let b: Vec<f64> = self
            .residual(1.0, &snapped)
            .iter()
            .zip(&a)
            .map(|(r1, a)| a - r1)
            .collect();
        let eta = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>()
            / b.iter().map(|y| y * y).sum::<f64>();
        if !(eta > 0.0 && eta.is_finite()) {
            return None;
        }
        let res = max_abs(&self.residual(eta, &snapped));
        Some((eta, snapped, res))
    }

    /// Jacobian with respect to `(ln η, ln β₂, …, ln β_d)`.
    fn jacobian(&self, eta: f64, beta: &[f64]) -> DMatrix<f64> {
        let (theta, c, d) = (self.theta, self.c, self.c.len());
        let mut jac = DMatrix::zeros(d, d);
        for k in 0..d {
            let own = eta * beta[k].powf(theta) / c[k];
            jac[(k, 0)] -= own;
            if k > 0 {
                jac[(k, k)] -= theta * own;
            }
            for i in (0..d).filter(|&i| i != k) {
                let w = self.w[k][i];
                let r = beta[i] / beta[k];
                // d/dr ∫_r^∞ λ(ρ t^-θ, 1) dt = -λ(ρ r^-θ, 1).
                let edge = self
                    .model
                    .lambda_pair(i, k, c[i] / c[k] * r.powf(-theta), 1.0)
                    * r;
                let cross = eta * beta[k].powf(theta - 1.0) * beta[i] / c[k];
                jac[(k, 0)] -= w * cross;
                if k > 0 {
                    jac[(k, k)] += w * (edge - (theta - 1.0) * cross);
                }
                if i > 0 {
                    jac[(k, i)] += w * (-edge - cross);
                }
            }
        }
        jac
    }
}

/// Max-norm; infinite if any entry is not finite.
fn max_abs(v: &[f64]) -> f64 {
    v.iter()
        .try_fold(0.0_f64, |m, x| x.is_finite().then(|| m.max(x.abs())))
        .unwrap_or(f64::INFINITY)
}

/// Solve the L1 limit system from `init` by damped Newton in
/// `(ln η, ln β₂, …, ln β_d)`.
pub fn solve_limit_system(
    theta: f64,
    c: &[f64],
    model: &TailDependenceModel,
    init: &LimitVector,
    tol: f64,
) -> Result<LimitVector> {
    solve_limit_system_weighted(theta, c, model, None, init, tol)
}

/// Σ-weighted limit system; `weights = None` is the L1 case.
///
/// For the L1 case the solution is also checked against the integrated form
/// `Σ_i ∫_{β_i}^∞ λ^{ik}(c_i t^(-θ), c_k β_k^(-θ)) dt = Σ_i ∫_{β_i}^∞ λ^{i1}(c_i t^(-θ), 1) dt`,
/// evaluated by quadrature.
pub fn solve_limit_system_weighted(
    theta: f64,
    c: &[f64],
    model: &TailDependenceModel,
    weights: Option<&WeightMatrix>,
    init: &LimitVector,
    tol: f64,
) -> Result<LimitVector> {
    check_theta(theta)?;
    check_c(c)?;
    let d = c.len();
    if init.dim() != d {
        return Err(Error::InvalidParameter(
            "initial limit vector has the wrong dimension".into(),
        ));
    }
    if !(init.eta > 0.0) || init.beta.iter().any(|b| !(*b > 0.0)) {
        return Err(Error::InvalidParameter(
            "initial limit vector must be strictly positive".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let w = match weights {
        Some(wm) if wm.dim() != d => {
            return Err(Error::InvalidParameter(
                "weight matrix dimension does not match c".into(),
            ))
        }
        Some(wm) => (0..d)
            .map(|k| (0..d).map(|i| wm.get(i, k) / wm.get(k, k)).collect())
            .collect(),
        None => vec![vec![1.0; d]; d],
    };
    let sys = LimitSystem { theta, c, model, w };

    // The caller's start first; the closed-form limits of the two extreme
    // dependence models as fallbacks.
    let starts = [
        Some(init.clone()),
        limit_independent(theta, c).ok(),
        limit_comonotonic(theta, c).ok(),
    ];
    let mut best: Option<Attempt> = None;
    let mut iterations = 0;
    for start in starts.into_iter().flatten() {
        let attempt = sys.newton(&start);
        iterations += attempt.iterations;
        if best.as_ref().is_none_or(|b| attempt.residual < b.residual) {
            best = Some(attempt);
        }
        if best.as_ref().is_some_and(|b| b.residual <= tol) {
            break;
        }
    }
    let Attempt {
        eta,
        beta,
        residual,
        ..
    } = best.expect("the caller's start is always tried");
    if !(residual <= tol) {
        let mut best = vec![eta];
        best.extend_from_slice(&beta);
        return Err(Error::NonConvergence {
            best,
            residual,
            iterations,
        });
    }
    let limit = LimitVector::new(eta, beta)?;
    if weights.is_none_or(WeightMatrix::is_all_ones) {
        let gap = integrated_form_gap(theta, c, model, &limit);
        if gap > 1e-6 {
            let mut best = vec![limit.eta];
            best.extend_from_slice(&limit.beta);
            return Err(Error::NonConvergence {
                best,
                residual: gap,
                iterations,
            });
        }
    }
    Ok(limit)
}

/// Relative discrepancy between the two sides of the integrated form of the
/// L1 limit system, maximized over `k`.
pub fn integrated_form_gap(
    theta: f64,
    c: &[f64],
    model: &TailDependenceModel,
    limit: &LimitVector,
) -> f64 {
    let beta = &limit.beta;
    let side = |k: usize, v: f64| -> f64 {
        (0..c.len())
            .map(|i| {
                let g = |t: f64| model.lambda_pair(i, k, c[i] * t.powf(-theta), v);
                // Split where the two arguments of λ coincide.
                let knee = (c[i] / v).powf(1.0 / theta);
                if beta[i] < knee {
                    integrate(g, beta[i], knee, 0.0, QUAD_REL_TOL, 4000).value
                        + integrate_power_tail(g, knee, theta, QUAD_REL_TOL).value
                } else {
                    integrate_power_tail(g, beta[i], theta, QUAD_REL_TOL).value
                }
            })
            .sum()
    };
    let reference = side(0, 1.0);
    (1..c.len())
        .map(|k| ((side(k, c[k] * beta[k].powf(-theta)) - reference) / reference).abs())
        .fold(0.0, f64::max)
}

/// `e_α ≈ VaR_α(X₁) η^(1/θ) β`, with `θ` the tail index of the first margin.
pub fn asymptotic_expectile_approx(
    margins: &[MarginSpec],
    limit: &LimitVector,
    alpha: f64,
) -> Result<Vec<f64>> {
    let first = margins
        .first()
        .ok_or_else(|| Error::InvalidParameter("at least one margin is required".into()))?;
    if margins.len() != limit.dim() {
        return Err(Error::InvalidParameter(
            "limit vector dimension does not match the margins".into(),
        ));
    }
    let theta = first.tail_index();
    let factor = first.quantile(alpha)? * limit.eta.powf(1.0 / theta);
    Ok(limit.beta.iter().map(|b| factor * b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lambda_examples() {
        assert_eq!(
            lambda_bivariate(&TailDependenceModel::Comonotonic, 0.3, 0.7),
            0.3
        );
        assert_eq!(
            lambda_bivariate(&TailDependenceModel::Independent, 0.3, 0.7),
            0.0
        );
        let arch = TailDependenceModel::archimedean(2.0).unwrap();
        assert_relative_eq!(lambda_bivariate(&arch, 1.0, 1.0), 0.25, epsilon = 1e-15);
        assert_eq!(lambda_bivariate(&arch, 0.0, 1.0), 0.0);
        assert!(TailDependenceModel::archimedean(0.0).is_err());
    }

    #[test]
    fn integral_examples() {
        let como = integral_lambda_tail(&TailDependenceModel::Comonotonic, 2.0, 1.0, 1.0, 1.0, 1.0)
            .unwrap();
        assert_relative_eq!(como, 1.0, epsilon = 1e-14);
        let ind = integral_lambda_tail(&TailDependenceModel::Independent, 2.0, 1.0, 1.0, 1.0, 1.0)
            .unwrap();
        assert_eq!(ind, 0.0);
        let arch = TailDependenceModel::archimedean(2.0).unwrap();
        let a = integral_lambda_tail(&arch, 2.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(a, 0.5, epsilon = 1e-14);
        assert!(matches!(
            integral_lambda_tail(&TailDependenceModel::Comonotonic, 1.0, 1.0, 1.0, 1.0, 1.0),
            Err(Error::Divergent(_))
        ));
    }

    #[test]
    fn closed_form_integrals_match_quadrature() {
        for &theta in &[1.3, 2.0, 3.7] {
            for &rho in &[0.2, 1.0, 4.5] {
                for &r in &[0.1, 0.8, 1.0, 2.5] {
                    let como = comonotonic_integral(theta, rho, r);
                    let q = numeric_tail_integral(f64::min, theta, rho, r);
                    assert_relative_eq!(como, q, max_relative = 1e-9);
                    let arch = TailDependenceModel::Archimedean { theta_psi: theta };
                    let closed = tail_integral(&arch, 0, 1, theta, rho, r);
                    let q =
                        numeric_tail_integral(|u, v| arch.lambda_bivariate(u, v), theta, rho, r);
                    assert_relative_eq!(closed, q, max_relative = 1e-9);
                }
            }
        }
    }

    #[test]
    fn limit_examples() {
        let l = limit_comonotonic(2.0, &[1.0, 2.25]).unwrap();
        assert_relative_eq!(l.eta, 1.0);
        assert_relative_eq!(l.beta[1], 1.5, epsilon = 1e-15);
        assert_relative_eq!(
            limit_comonotonic(3.0, &[1.0, 8.0]).unwrap().beta[1],
            2.0,
            epsilon = 1e-15
        );
        let l = limit_independent(2.0, &[1.0, 2.25]).unwrap();
        assert_relative_eq!(l.beta[1], 2.25);
        assert_relative_eq!(l.eta, 1.0 / 3.25, epsilon = 1e-15);
        assert_relative_eq!(limit_independent(3.0, &[1.0]).unwrap().eta, 0.5);
        let l = limit_independent(2.0, &[1.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(l.eta, 1.0 / 3.0, epsilon = 1e-15);
        let l = limit_dominant(2.0, 3).unwrap();
        assert_eq!((l.eta, l.beta), (1.0, vec![1.0, 0.0, 0.0]));
        assert_eq!(limit_dominant(3.0, 2).unwrap().eta, 0.5);
        assert!(limit_comonotonic(2.0, &[2.0, 1.0]).is_err());
        assert!(limit_independent(0.5, &[1.0]).is_err());
    }

    #[test]
    fn weighted_independent_limits() {
        let c = [1.0, 2.25, 0.7];
        let base = limit_independent(2.5, &c).unwrap();
        let eta = limit_independent_weighted(2.5, &c, &WeightMatrix::ones(3)).unwrap();
        for (e, b) in eta.iter().zip(&base.beta) {
            assert_relative_eq!(*e, b * base.eta, max_relative = 1e-14);
        }
        assert_relative_eq!(
            limit_independent_weighted(2.0, &[1.0], &WeightMatrix::ones(1)).unwrap()[0],
            1.0
        );
        let w = WeightMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_relative_eq!(
            limit_independent_weighted(2.0, &[1.0, 1.0], &w).unwrap()[0],
            1.0
        );
    }

    #[test]
    fn solver_recovers_closed_forms() {
        let c = [1.0, 2.25, 0.4];
        let init = limit_independent(2.0, &c).unwrap();
        let como =
            solve_limit_system(2.0, &c, &TailDependenceModel::Comonotonic, &init, 1e-12).unwrap();
        let expected = limit_comonotonic(2.0, &c).unwrap();
        assert_relative_eq!(como.eta, expected.eta, max_relative = 1e-9);
        for k in 0..3 {
            assert_relative_eq!(como.beta[k], expected.beta[k], max_relative = 1e-9);
        }
        let ind = solve_limit_system(2.0, &c, &TailDependenceModel::Independent, &expected, 1e-12)
            .unwrap();
        assert_relative_eq!(ind.eta, init.eta, max_relative = 1e-9);
    }

    #[test]
    fn archimedean_example() {
        let arch = TailDependenceModel::archimedean(2.0).unwrap();
        let init = limit_independent(2.0, &[1.0, 1.0]).unwrap();
        let l = solve_limit_system(2.0, &[1.0, 1.0], &arch, &init, 1e-12).unwrap();
        assert_relative_eq!(l.eta, 0.75, epsilon = 1e-10);
        assert_relative_eq!(l.beta[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn poor_start_falls_back_to_closed_form_starts() {
        let arch = TailDependenceModel::archimedean(1.5).unwrap();
        let c = [1.0, 2.25, 4.0];
        let neutral = LimitVector::new(0.5, vec![1.0; 3]).unwrap();
        let from_neutral = solve_limit_system(2.0, &c, &arch, &neutral, 1e-12).unwrap();
        let from_closed =
            solve_limit_system(2.0, &c, &arch, &limit_independent(2.0, &c).unwrap(), 1e-12)
                .unwrap();
        assert_relative_eq!(from_neutral.eta, from_closed.eta, max_relative = 1e-10);
        for k in 0..3 {
            assert_relative_eq!(
                from_neutral.beta[k],
                from_closed.beta[k],
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn tabulated_admission() {
        let ok = TailDependenceModel::tabulated(2, |_, _, u, v| 0.5 * u.min(v));
        assert!(ok.is_ok());
        let unbounded = TailDependenceModel::tabulated(2, |_, _, u, v| u + v);
        assert!(matches!(unbounded, Err(Error::InvalidLambda(_))));
        let not_homogeneous =
            TailDependenceModel::tabulated(2, |_, _, u: f64, v: f64| (u * v).min(u.min(v)));
        assert!(matches!(not_homogeneous, Err(Error::InvalidLambda(_))));
    }

    #[test]
    fn tabulated_model_matches_builtin() {
        let arch = TailDependenceModel::archimedean(1.5).unwrap();
        let inner = arch.clone();
        let tab = TailDependenceModel::tabulated(2, move |_, _, u, v| inner.lambda_bivariate(u, v))
            .unwrap();
        let init = limit_independent(2.5, &[1.0, 3.0]).unwrap();
        let a = solve_limit_system(2.5, &[1.0, 3.0], &arch, &init, 1e-11).unwrap();
        let b = solve_limit_system(2.5, &[1.0, 3.0], &tab, &init, 1e-11).unwrap();
        assert_relative_eq!(a.eta, b.eta, max_relative = 1e-9);
        assert_relative_eq!(a.beta[1], b.beta[1], max_relative = 1e-9);
    }

    #[test]
    fn weighted_independent_system() {
        let c = [1.0, 2.0];
        let w = WeightMatrix::from_rows(vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let init = limit_independent(3.0, &c).unwrap();
        let l = solve_limit_system_weighted(
            3.0,
            &c,
            &TailDependenceModel::Independent,
            Some(&w),
            &init,
            1e-13,
        )
        .unwrap();
        let eta_k = limit_independent_weighted(3.0, &c, &w).unwrap();
        // η_k (θ-1)(β_k + Σ_{i≠k} w_ik β_i) / β_k = 1.
        let w_cross = [0.5 / 2.0, 0.5 / 1.0];
        for k in 0..2 {
            let other = l.beta[1 - k];
            assert_relative_eq!(
                eta_k[k] * 2.0 * (l.beta[k] + w_cross[k] * other) / l.beta[k],
                1.0,
                max_relative = 1e-11
            );
        }
        assert!((l.beta[1] - init.beta[1]).abs() > 1e-3);
    }

    #[test]
    fn approximation_examples() {
        let m = vec![
            MarginSpec::pareto(2.0, 10.0).unwrap(),
            MarginSpec::pareto(2.0, 15.0).unwrap(),
        ];
        let como = limit_comonotonic(2.0, &[1.0, 2.25]).unwrap();
        let e = asymptotic_expectile_approx(&m, &como, 0.99).unwrap();
        assert_relative_eq!(e[0], 90.0, max_relative = 1e-12);
        assert_relative_eq!(e[1], 135.0, max_relative = 1e-12);
        let ind = limit_independent(2.0, &[1.0, 2.25]).unwrap();
        let e = asymptotic_expectile_approx(&m, &ind, 0.99).unwrap();
        assert_relative_eq!(e[0], 49.92, max_relative = 1e-4);
        assert_relative_eq!(e[1], 112.33, max_relative = 1e-4);
    }

    #[test]
    fn limit_vector_json() {
        let l: LimitVector = serde_json::from_str(r#"{"eta":1,"beta":[1,1.5]}"#).unwrap();
        assert_eq!(l.beta, vec![1.0, 1.5]);
        assert_eq!(
            serde_json::to_string(&l).unwrap(),
            r#"{"eta":1.0,"beta":[1.0,1.5]}"#
        );
    }
}
