//! Mazur maps `M_{p,q}(x) = u |x|^{p/q}` between unit spheres, empirical
//! Hölder exponents, and the commutator inequalities attached to them.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::holder::Sign;
use crate::linalg::{c, max_abs_diff, operator_norm, CMat};
use crate::lp::{polar, power, Density, TraceSpace};
use crate::sampling::{ginibre, stream};

/// `||x f ± f x||_p` below this makes a commutator ratio meaningless.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-12;
/// Absolute slack in the inequality checks of this module.
pub const CHECK_TOLERANCE: f64 = 1e-9;

/// `u |x|^{p/q}` for the polar decomposition `x = u |x|`.
pub fn mazur_map(x: &CMat, p: f64, q: f64) -> Result<CMat> {
    if !(p > 0.0 && q > 0.0 && p.is_finite() && q.is_finite()) {
        return Err(invalid(format!("Mazur exponents must be positive and finite, got p = {p}, q = {q}")));
    }
    let (u, abs) = polar(x);
    Ok(u * power(&abs, p / q)?)
}

/// `x / ||x||_p`.
pub fn normalize(space: &TraceSpace, x: &CMat, p: f64) -> Result<CMat> {
    let norm = space.quasi_norm(x, p);
    if !(norm > 0.0) {
        return Err(invalid("cannot normalize the zero element"));
    }
    Ok(x / c(norm))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderEstimate {
    pub exponent: f64,
    pub constant: f64,
    pub pair_count: usize,
    pub regression_r2: f64,
    pub seed: u64,
}

/// Least-squares line `y = slope x + intercept` with its `r^2`.
fn regress(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

/// Regresses `log ||M g - M h||_q` on `log ||g - h||_p` over pairs on the
/// unit sphere of `L_p(M_dim, tr/dim)`, with `h = normalize(g + d D)` and `d`
/// log-spaced in `[1e-6, 1] * closeness_scale`. Only the smaller half of the
/// distances enters the fit. The slope is clamped to at most 1.
pub fn holder_exponent_estimate(p: f64, q: f64, dim: usize, pairs: usize, closeness_scale: f64, seed: u64) -> Result<HolderEstimate> {
    if pairs < 16 {
        return Err(invalid(format!("at least 16 pairs are needed, got {pairs}")));
    }
    if !(closeness_scale > 0.0) {
        return Err(invalid(format!("closeness scale must be positive, got {closeness_scale}")));
    }
    let space = TraceSpace::normalized(dim);
    let points: Vec<Option<(f64, f64)>> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let g = normalize(&space, &ginibre(&mut rng, dim), p)?;
            let direction = normalize(&space, &ginibre(&mut rng, dim), p)?;
            let delta = closeness_scale * 10f64.powf(-6.0 + 6.0 * i as f64 / (pairs - 1) as f64);
            let h = normalize(&space, &(&g + direction * c(delta)), p)?;
            let input = space.quasi_norm(&(&g - &h), p);
            let output = space.quasi_norm(&(mazur_map(&g, p, q)? - mazur_map(&h, p, q)?), q);
            Ok::<_, Error>((input > 0.0 && output > 0.0).then(|| (input.ln(), output.ln())))
        })
        .collect::<Result<_>>()?;
    let fit: Vec<(f64, f64)> = points[..pairs / 2].iter().flatten().copied().collect();
    if fit.len() < 2 {
        return Err(invalid("too few distinct pairs for a regression"));
    }
    let (slope, intercept, r2) = regress(&fit);
    Ok(HolderEstimate {
        exponent: slope.clamp(f64::MIN_POSITIVE, 1.0),
        constant: intercept.exp(),
        pair_count: fit.len(),
        regression_r2: r2,
        seed,
    })
}

/// `(1/(2q)) (p/3^k)^2` with `k >= 0` the smallest integer with `p/q < 3^k`.
pub fn mazur_exponent_bound(p: f64, q: f64) -> f64 {
    let mut k = 0;
    while p / q >= 3f64.powi(k) {
        k += 1;
    }
    (p / 3f64.powi(k)).powi(2) / (2.0 * q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommutatorRatio {
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
}

/// `||x f^{p/q} ± f^{p/q} x||_q / ||x f ± f x||_p^gamma` with `f` rescaled to
/// `||f||_p = 1`, for self-adjoint `x` with `||x||_inf = 1`.
pub fn acc_check(space: &TraceSpace, x: &CMat, f: &Density, p: f64, q: f64, gamma: f64, sign: Sign) -> Result<CommutatorRatio> {
    if max_abs_diff(x, &x.adjoint()) > 1e-10 * operator_norm(x).max(1.0) {
        return Err(invalid("x must be self-adjoint"));
    }
    if (operator_norm(x) - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("x must have operator norm 1, got {}", operator_norm(x))));
    }
    let scale = space.quasi_norm(f.matrix(), p);
    let g = f.matrix() / c(scale);
    let gq = f.power(p / q)? / c(scale.powf(p / q));
    let s = c(sign.value());
    let numerator = space.quasi_norm(&(x * &gq + &gq * x * s), q);
    let base = space.quasi_norm(&(x * &g + &g * x * s), p);
    if base < DEGENERATE_DENOMINATOR {
        return Err(Error::DegenerateInstance { lhs: numerator });
    }
    let denominator = base.powf(gamma);
    Ok(CommutatorRatio { numerator, denominator, ratio: numerator / denominator })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, holds: lhs <= rhs + CHECK_TOLERANCE }
    }
}

fn check_unit(space: &TraceSpace, x: &CMat, p: f64) -> Result<()> {
    let norm = space.quasi_norm(x, p);
    if (norm - 1.0).abs() > 1e-8 {
        return Err(invalid(format!("expected a unit vector of L_{p}, norm is {norm}")));
    }
    Ok(())
}

/// `|| |g|^2 - |h|^2 ||_{p/2} <= 2^{2/p} ||g - h||_p` on the unit sphere.
pub fn squares_lipschitz_check(space: &TraceSpace, g: &CMat, h: &CMat, p: f64) -> Result<InequalityCheck> {
    check_unit(space, g, p)?;
    check_unit(space, h, p)?;
    let lhs = space.quasi_norm(&(g.adjoint() * g - h.adjoint() * h), p / 2.0);
    let rhs = 2f64.powf(2.0 / p) * space.quasi_norm(&(g - h), p);
    Ok(InequalityCheck::new(lhs, rhs))
}

/// `||x f^p - f^p x||_1 <= 2 ||x f - f x||_p^p` for `0 < p < 1`, `||x||_inf <= 1`.
pub fn kosaki_remark_check(space: &TraceSpace, x: &CMat, f: &Density, p: f64) -> Result<InequalityCheck> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("p must lie in (0, 1), got {p}")));
    }
    if operator_norm(x) > 1.0 + 1e-9 {
        return Err(invalid(format!("x must be a contraction, norm is {}", operator_norm(x))));
    }
    let fp = f.power(p)?;
    let lhs = space.quasi_norm(&(x * &fp - &fp * x), 1.0);
    let rhs = 2.0 * space.quasi_norm(&(x * f.matrix() - f.matrix() * x), p).powf(p);
    Ok(InequalityCheck::new(lhs, rhs))
}
