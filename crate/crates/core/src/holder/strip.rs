//! Harmonic measure of the strip `0 < Re z < 1`, boundary quadrature, the
//! three-lines inequality for `L_p`, `0 < p`, and the complex uniform
//! convexity ratio for matrix-valued polynomials.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::linalg::{c, from_eigen, CMat};
use crate::lp::{psd_eigen, TraceSpace};

/// Density of the harmonic measure of `omega` on the line `Re z = k`:
/// `sin(pi w) / (2 (cosh(pi t) - (-1)^k cos(pi w)))`. Its total mass is
/// `1 - omega` for `k = 0` and `omega` for `k = 1`.
pub fn poisson_density(k: u8, omega: f64, t: f64) -> f64 {
    let s = (PI * omega).sin();
    // cosh(pi t) - cos(pi w) written to avoid cancellation near t = 0, w = 0
    let denom = if k == 0 {
        2.0 * ((PI * t / 2.0).sinh().powi(2) + (PI * omega / 2.0).sin().powi(2))
    } else {
        2.0 * ((PI * t / 2.0).sinh().powi(2) + (PI * omega / 2.0).cos().powi(2))
    };
    s / (2.0 * denom)
}

/// The probability density `Q^k_omega` on the line `Re z = k`, so that the
/// harmonic measure is `(1 - omega) Q^0 + omega Q^1`.
pub fn poisson_kernel(k: u8, omega: f64, t: f64) -> Result<f64> {
    check_omega(omega)?;
    let mass = match k {
        0 => 1.0 - omega,
        1 => omega,
        _ => return Err(invalid(format!("boundary line index must be 0 or 1, got {k}"))),
    };
    Ok(poisson_density(k, omega, t) / mass)
}

fn check_omega(omega: f64) -> Result<()> {
    if omega > 0.0 && omega < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("interior point must satisfy 0 < omega < 1, got {omega}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Bound on the kernel mass discarded by truncating the line.
    pub tail_tolerance: f64,
    pub max_panel_width: f64,
    /// Gauss–Legendre nodes per panel.
    pub order: usize,
    /// Agreement required between the rule and its refinement.
    pub tolerance: f64,
    /// Refinement levels tried before giving up.
    pub max_refinements: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { tail_tolerance: 1e-10, max_panel_width: 0.5, order: 16, tolerance: 1e-9, max_refinements: 4 }
    }
}

/// Nodes `t_i` and weights `Q^k_omega(t_i) dt_i` on a truncated line.
#[derive(Debug, Clone, PartialEq)]
pub struct LineRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub truncation: f64,
    /// Upper bound on the kernel mass outside `[-truncation, truncation]`.
    pub tail_bound: f64,
}

fn tail_bound(omega: f64, truncation: f64) -> f64 {
    // cosh(pi t) -/+ cos(pi w) >= e^{pi t}/4 for t >= 1; both sides of the line
    let m = omega.min(1.0 - omega);
    4.0 * (-PI * truncation).exp() / (PI * m)
}

impl LineRule {
    /// `refinement` halves the panels and extends the line by one unit per level.
    pub fn new(k: u8, omega: f64, config: &QuadratureConfig, refinement: u32) -> Result<Self> {
        check_omega(omega)?;
        if !(config.max_panel_width > 0.0 && config.tail_tolerance > 0.0) || config.order == 0 {
            return Err(invalid("quadrature panel width, order and tail tolerance must be positive"));
        }
        let m = omega.min(1.0 - omega);
        let mut truncation = ((4.0 / (PI * m * config.tail_tolerance)).ln() / PI).max(1.0);
        truncation += refinement as f64;
        let scale = 0.5f64.powi(refinement as i32);
        let width = config.max_panel_width * scale;
        // panels graded towards t = 0, where the kernel has width ~ omega
        let mut edges = vec![0.0];
        let mut h = (0.5 * m).min(config.max_panel_width) * scale;
        while *edges.last().unwrap() < truncation {
            let next = (edges.last().unwrap() + h).min(truncation);
            edges.push(next);
            h = (h * 1.5).min(width);
        }
        let rule = GaussLegendre::new(NonZeroUsize::new(config.order).unwrap());
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            for &(x, w) in rule.as_node_weight_pairs() {
                let t = a + half * (x + 1.0);
                let kw = poisson_kernel(k, omega, t)? * w * half;
                nodes.push(t);
                weights.push(kw);
                nodes.push(-t);
                weights.push(kw);
            }
        }
        Ok(Self { nodes, weights, truncation, tail_bound: tail_bound(omega, truncation) })
    }

    pub fn integrate<F: FnMut(f64) -> Complex64>(&self, mut f: F) -> Complex64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| f(t) * w).sum()
    }
}

/// `int f dQ^k_omega`, refined until two successive rules agree.
pub fn integrate_line<F: Fn(f64) -> Complex64>(k: u8, omega: f64, config: &QuadratureConfig, f: F) -> Result<Complex64> {
    let mut previous = LineRule::new(k, omega, config, 0)?.integrate(&f);
    let mut gap = f64::INFINITY;
    for level in 1..=config.max_refinements {
        let current = LineRule::new(k, omega, config, level)?.integrate(&f);
        gap = (current - previous).norm();
        if gap <= config.tolerance * current.norm().max(1.0) {
            return Ok(current);
        }
        previous = current;
    }
    Err(Error::QuadratureNotConverged { estimate: gap })
}

/// `int h dP^theta = (1 - theta) int h(it) dQ^0 + theta int h(1 + it) dQ^1`,
/// which equals `h(theta)` for bounded analytic `h`.
pub fn harmonic_reproduce<H: Fn(Complex64) -> Complex64>(h: H, theta: f64, config: &QuadratureConfig) -> Result<Complex64> {
    let left = integrate_line(0, theta, config, |t| h(Complex64::new(0.0, t)))?;
    let right = integrate_line(1, theta, config, |t| h(Complex64::new(1.0, t)))?;
    Ok(left * (1.0 - theta) + right * theta)
}

/// `A f^{a + b z} B`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTerm {
    pub left: CMat,
    pub offset: f64,
    pub slope: f64,
    pub right: CMat,
}

/// `G(z) = sum_j A_j f^{a_j + b_j z} B_j + sum_k C_k z^k` for a positive `f`;
/// zero eigenvalues of `f` map to zero under every power.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticFamily {
    values: Vec<f64>,
    vectors: CMat,
    pub terms: Vec<PowerTerm>,
    pub polynomial: Vec<CMat>,
}

impl AnalyticFamily {
    pub fn new(f: &CMat, terms: Vec<PowerTerm>, polynomial: Vec<CMat>) -> Result<Self> {
        let (values, vectors) = psd_eigen(f)?;
        Ok(Self { values, vectors, terms, polynomial })
    }

    /// A family with no power terms.
    pub fn polynomial(coefficients: Vec<CMat>) -> Self {
        let n = coefficients.first().map_or(1, |m| m.nrows());
        Self { values: vec![0.0; n], vectors: CMat::identity(n, n), terms: Vec::new(), polynomial: coefficients }
    }

    pub fn power(&self, w: Complex64) -> CMat {
        let powered: Vec<Complex64> =
            self.values.iter().map(|&v| if v == 0.0 { c(0.0) } else { (w * v.ln()).exp() }).collect();
        from_eigen(&powered, &self.vectors)
    }

    pub fn evaluate(&self, z: Complex64) -> CMat {
        let n = self.vectors.nrows();
        let mut out = CMat::zeros(n, n);
        for term in &self.terms {
            let w = c(term.offset) + z * term.slope;
            out += &term.left * self.power(w) * &term.right;
        }
        let mut zk = c(1.0);
        for coefficient in &self.polynomial {
            out += coefficient * zk;
            zk *= z;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeLines {
    pub lhs: f64,
    pub rhs: f64,
    pub p_theta: f64,
    pub holds: bool,
}

/// Relative slack allowed in `lhs <= rhs`.
pub const THREE_LINES_TOLERANCE: f64 = 1e-6;

/// `||G(theta)||_{p_theta}` against
/// `(int g(it)^{p0} dQ^0)^{(1-theta)/p0} (int g(1+it)^{p1} dQ^1)^{theta/p1}`,
/// with the essential supremum over the quadrature nodes for `p1 = inf`.
pub fn three_lines_check(
    space: &TraceSpace,
    g: &AnalyticFamily,
    p0: f64,
    p1: f64,
    theta: f64,
    config: &QuadratureConfig,
) -> Result<ThreeLines> {
    if !(p0 > 0.0 && p0 < p1) {
        return Err(invalid(format!("need 0 < p0 < p1, got p0 = {p0}, p1 = {p1}")));
    }
    check_omega(theta)?;
    let p_theta = 1.0 / ((1.0 - theta) / p0 + if p1.is_infinite() { 0.0 } else { theta / p1 });
    let lhs = space.quasi_norm(&g.evaluate(c(theta)), p_theta);
    let left = integrate_line(0, theta, config, |t| c(space.tau_abs_pow(&g.evaluate(Complex64::new(0.0, t)), p0)))?.re;
    let right_factor = if p1.is_infinite() {
        let rule = LineRule::new(1, theta, config, 1)?;
        rule.nodes
            .iter()
            .map(|&t| space.quasi_norm(&g.evaluate(Complex64::new(1.0, t)), f64::INFINITY))
            .fold(0.0, f64::max)
            .powf(theta)
    } else {
        integrate_line(1, theta, config, |t| c(space.tau_abs_pow(&g.evaluate(Complex64::new(1.0, t)), p1)))?
            .re
            .powf(theta / p1)
    };
    let rhs = left.max(0.0).powf((1.0 - theta) / p0) * right_factor;
    Ok(ThreeLines { lhs, rhs, p_theta, holds: lhs <= rhs * (1.0 + THREE_LINES_TOLERANCE) + 1e-14 })
}

/// Where the uniform convexity ratio is measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbePoint {
    /// Poisson measure of the unit circle seen from `center`, `|center| < 1`.
    Disc { center: Complex64 },
    /// Harmonic measure of the strip seen from `theta`.
    Strip { theta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityWitness {
    /// `(||F||^2 - ||F(z0)||^2) / ||F - F(z0)||^2`.
    pub ratio: f64,
    pub hardy_norm: f64,
    pub center_norm: f64,
    pub deviation_norm: f64,
}

/// Initial points on the circle for the disc probe, doubled until converged.
const CIRCLE_POINTS: usize = 1024;
const MAX_CIRCLE_POINTS: usize = 1 << 18;

fn disc_average<F: Fn(Complex64) -> f64>(center: Complex64, points: usize, f: F) -> f64 {
    let r2 = center.norm_sqr();
    (0..points)
        .map(|j| {
            let zeta = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / points as f64);
            let kernel = (1.0 - r2) / (zeta - center).norm_sqr();
            kernel * f(zeta)
        })
        .sum::<f64>()
        / points as f64
}

/// Boundary average of `phi(z)` for the harmonic measure of `point`.
fn boundary_average<F: Fn(Complex64) -> f64 + Copy>(point: ProbePoint, config: &QuadratureConfig, phi: F) -> Result<f64> {
    match point {
        ProbePoint::Disc { center } => {
            // the trapezoid rule is spectrally accurate for smooth integrands but
            // only second order where F vanishes on the circle
            let mut points = CIRCLE_POINTS;
            let mut previous = disc_average(center, points, phi);
            loop {
                points *= 2;
                let current = disc_average(center, points, phi);
                let gap = (current - previous).abs();
                if gap <= config.tolerance * current.abs().max(1.0) {
                    return Ok(current);
                }
                if points >= MAX_CIRCLE_POINTS {
                    return Err(Error::QuadratureNotConverged { estimate: gap });
                }
                previous = current;
            }
        }
        ProbePoint::Strip { theta } => {
            let left = integrate_line(0, theta, config, |t| c(phi(Complex64::new(0.0, t))))?.re;
            let right = integrate_line(1, theta, config, |t| c(phi(Complex64::new(1.0, t))))?.re;
            Ok((1.0 - theta) * left + theta * right)
        }
    }
}

/// Ratio whose infimum over `F` is the best constant in the complex uniform
/// convexity inequality `||F(z0)||^2 + d ||F - F(z0)||^2 <= ||F||^2` of the
/// `L_p`-valued Hardy space, for a polynomial `F(z) = sum_k A_k z^k`.
pub fn uniform_convexity_probe(
    space: &TraceSpace,
    coefficients: &[CMat],
    p: f64,
    point: ProbePoint,
    config: &QuadratureConfig,
) -> Result<ConvexityWitness> {
    if !(p > 0.0 && p <= 2.0) {
        return Err(invalid(format!("need 0 < p <= 2, got {p}")));
    }
    match point {
        ProbePoint::Disc { center } if center.norm() >= 1.0 => return Err(invalid("disc center must lie inside the unit disc")),
        ProbePoint::Strip { theta } => check_omega(theta)?,
        _ => {}
    }
    if coefficients.iter().skip(1).all(|a| a.iter().all(|z| z.norm() == 0.0)) {
        return Err(Error::DegenerateInstance { lhs: 0.0 });
    }
    let family = AnalyticFamily::polynomial(coefficients.to_vec());
    let z0 = match point {
        ProbePoint::Disc { center } => center,
        ProbePoint::Strip { theta } => c(theta),
    };
    let f0 = family.evaluate(z0);
    let hardy = boundary_average(point, config, |z| space.tau_abs_pow(&family.evaluate(z), p))?.powf(1.0 / p);
    let deviation = boundary_average(point, config, |z| space.tau_abs_pow(&(family.evaluate(z) - &f0), p))?.powf(1.0 / p);
    let center_norm = space.quasi_norm(&f0, p);
    if deviation * deviation <= 1e-12 {
        return Err(Error::DegenerateInstance { lhs: deviation });
    }
    Ok(ConvexityWitness {
        ratio: (hardy * hardy - center_norm * center_norm) / (deviation * deviation),
        hardy_norm: hardy,
        center_norm,
        deviation_norm: deviation,
    })
}
