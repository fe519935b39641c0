//! The Hölder-type inequality
//! `||x W f^{a(1-t)} + V f^{a(1-t)} x||_q <= C ||x W f^a + V f^a x||_p^e ||x||_s^{1-e}`
//! for unitaries `V, W` commuting with a density `f`, where
//! `1/q = (1-t)/p + t/s`, `a = 1/p - 1/s` and `e = (R/2)(1-t)`, together with
//! the reduction to self-adjoint `x` and the algebraic identities used to prove it.

pub mod strip;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{block2, c, commutator_defect, diag_real, max_abs_diff, operator_norm, zeros, CMat};
use crate::lp::{Density, TraceSpace};
use crate::report::{ConstantReport, NamedMatrix};
use crate::sampling::{derive_seed, random_density_spread, random_element, stream, unimodular, unitary_commuting_with, Stream};

pub use strip::{
    harmonic_reproduce, integrate_line, poisson_density, poisson_kernel, three_lines_check, uniform_convexity_probe,
    AnalyticFamily, ConvexityWitness, LineRule, PowerTerm, ProbePoint, QuadratureConfig, ThreeLines,
};

/// Largest `||Vf - fV||_inf` accepted as commuting.
pub const COMMUTATION_TOLERANCE: f64 = 1e-8;

/// Below this the right-hand side of the inequality is treated as zero.
pub const DEGENERATE_RHS: f64 = 1e-12;

/// The exponent bundle `(p, q, s, theta, alpha, R, gamma, omega)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentProfile {
    p: f64,
    q: f64,
    s: f64,
    theta: f64,
    alpha: f64,
    r: f64,
    gamma: f64,
    omega: f64,
}

fn inv(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

impl ExponentProfile {
    /// From `p`, `s`, `theta`; `q` follows from `1/q = (1-theta)/p + theta/s`.
    pub fn new(p: f64, s: f64, theta: f64, r: f64, gamma: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(invalid(format!("theta must lie in (0, 1), got {theta}")));
        }
        let q = 1.0 / ((1.0 - theta) / p + theta * inv(s));
        Self::build(p, q, s, theta, r, gamma)
    }

    /// From `p < q < s`; `theta` follows.
    pub fn from_q(p: f64, q: f64, s: f64, r: f64, gamma: f64) -> Result<Self> {
        if !(p > 0.0 && p < q && q < s) {
            return Err(invalid(format!("need 0 < p < q < s, got p = {p}, q = {q}, s = {s}")));
        }
        let theta = (1.0 / p - 1.0 / q) / (1.0 / p - inv(s));
        Self::build(p, q, s, theta, r, gamma)
    }

    fn build(p: f64, q: f64, s: f64, theta: f64, r: f64, gamma: f64) -> Result<Self> {
        if !(p > 0.0 && p < q && q < s) || s.is_nan() {
            return Err(invalid(format!("need 0 < p < q < s <= inf, got p = {p}, q = {q}, s = {s}")));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(invalid(format!("theta must lie in (0, 1), got {theta}")));
        }
        if !(r > 0.0 && r < p) {
            return Err(invalid(format!("R must satisfy 0 < R < p, got R = {r}, p = {p}")));
        }
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(invalid(format!("gamma must be finite and > 1, got {gamma}")));
        }
        let alpha = 1.0 / p - inv(s);
        let omega = 1.0 - (1.0 - theta) / gamma;
        Ok(Self { p, q, s, theta, alpha, r, gamma, omega })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    /// `1 - omega = (1 - theta) / gamma`.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// `(R/2)(1 - theta)`.
    pub fn weak_exponent(&self) -> f64 {
        self.r / 2.0 * (1.0 - self.theta)
    }

    /// `1 / (1/s + alpha gamma)`, the exponent on the line `Re z = 0` for the
    /// rescaled analytic family, so that interpolating it with `s` at `omega` gives `q`.
    pub fn rescaled_exponent(&self) -> f64 {
        1.0 / (inv(self.s) + self.alpha * self.gamma)
    }
}

/// Exponent on the `||.||_p` factor of the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HolderExponent {
    /// `(R/2)(1 - theta)`, the exponent that is proved for all `p`.
    #[default]
    Weak,
    /// `1 - theta`, the exponent of the classical Hölder inequality.
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// `(x, f, V, W, sign)` with `V`, `W` unitaries commuting with `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderInstance {
    pub x: CMat,
    pub f: Density,
    pub v: CMat,
    pub w: CMat,
    pub sign: Sign,
}

impl HolderInstance {
    pub fn check(&self) -> Result<()> {
        for u in [&self.v, &self.w] {
            let defect = commutator_defect(u, self.f.matrix());
            if !(defect < COMMUTATION_TOLERANCE) {
                return Err(Error::NonCommuting { defect });
            }
        }
        Ok(())
    }

    pub fn witness(&self) -> Vec<NamedMatrix> {
        vec![
            NamedMatrix::new("x", self.x.clone()),
            NamedMatrix::new("f", self.f.matrix().clone()),
            NamedMatrix::new("V", self.v.clone()),
            NamedMatrix::new("W", self.w.clone()),
        ]
    }
}

/// `x W f^beta + sign V f^beta x`.
fn combination(inst: &HolderInstance, beta: f64) -> Result<CMat> {
    let fb = inst.f.power(beta)?;
    Ok(&inst.x * &inst.w * &fb + &inst.v * &fb * &inst.x * c(inst.sign.value()))
}

/// `||x W f^beta + sign V f^beta x||_q`.
pub fn commutator_norm(space: &TraceSpace, inst: &HolderInstance, beta: f64, q: f64) -> Result<f64> {
    inst.check()?;
    Ok(space.quasi_norm(&combination(inst, beta)?, q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderRatio {
    pub lhs: f64,
    /// `||x W f^alpha + sign V f^alpha x||_p`.
    pub p_norm: f64,
    /// `||x||_s`.
    pub s_norm: f64,
    pub exponent: f64,
    pub ratio: f64,
}

/// Left side over right side of the inequality for one instance.
///
/// Returns `DegenerateInstance` carrying the left side when the right side
/// vanishes.
pub fn holder_ratio(
    space: &TraceSpace,
    profile: &ExponentProfile,
    inst: &HolderInstance,
    exponent: HolderExponent,
) -> Result<HolderRatio> {
    let lhs = commutator_norm(space, inst, profile.alpha * (1.0 - profile.theta), profile.q)?;
    let p_norm = commutator_norm(space, inst, profile.alpha, profile.p)?;
    let s_norm = space.quasi_norm(&inst.x, profile.s);
    let e = match exponent {
        HolderExponent::Weak => profile.weak_exponent(),
        HolderExponent::Classical => 1.0 - profile.theta,
    };
    let rhs = p_norm.powf(e) * s_norm.powf(1.0 - e);
    if rhs < DEGENERATE_RHS {
        return Err(Error::DegenerateInstance { lhs });
    }
    Ok(HolderRatio { lhs, p_norm, s_norm, exponent: e, ratio: lhs / rhs })
}

/// Gaussian `x`, a density with a random spread of eigenvalues, unitaries
/// diagonal in its eigenbasis and a random sign.
pub fn random_instance(space: &TraceSpace, rng: &mut Stream) -> HolderInstance {
    let spread: f64 = 8.0 * rand::Rng::random::<f64>(rng);
    let f = random_density_spread(space, rng, spread);
    let x = random_element(space, rng);
    let v = unitary_commuting_with(&f, rng);
    let w = unitary_commuting_with(&f, rng);
    let sign = if rand::Rng::random::<bool>(rng) { Sign::Plus } else { Sign::Minus };
    HolderInstance { x, f, v, w, sign }
}

/// Diagonal `x`, `f`, `V`, `W`: the commutative case.
pub fn random_commutative_instance(space: &TraceSpace, rng: &mut Stream) -> HolderInstance {
    let n = space.dim();
    let x = crate::linalg::diag(&(0..n).map(|_| crate::sampling::complex_normal(rng)).collect::<Vec<_>>());
    let spread: f64 = 8.0 * rand::Rng::random::<f64>(rng);
    let raw: Vec<f64> = (0..n).map(|_| (-spread * rand::Rng::random::<f64>(rng)).exp()).collect();
    let f = Density::normalized(space, &diag_real(&raw)).expect("positive diagonal");
    let phases = |rng: &mut Stream| crate::linalg::diag(&(0..n).map(|_| unimodular(rng)).collect::<Vec<_>>());
    let v = phases(rng);
    let w = phases(rng);
    HolderInstance { x, f, v, w, sign: Sign::Plus }
}

/// Largest ratio over random instances in each dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileScan {
    pub profile: ExponentProfile,
    pub exponent: HolderExponent,
    pub per_dim: Vec<(usize, ConstantReport)>,
    /// Largest over smallest per-dimension maximum.
    pub growth: f64,
    /// Set when `growth > 2`; the inequality claims a dimension-free constant.
    pub red_flag: bool,
    pub degenerate: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InstanceFamily {
    #[default]
    General,
    Commutative,
}

/// Scans one profile over dimensions with the normalized trace.
pub fn scan_profile(
    profile: &ExponentProfile,
    dims: &[usize],
    instances: u64,
    seed: u64,
    exponent: HolderExponent,
    family: InstanceFamily,
) -> Result<ProfileScan> {
    if dims.is_empty() || instances == 0 {
        return Err(invalid("scan needs at least one dimension and one instance"));
    }
    let mut per_dim = Vec::new();
    let mut degenerate = 0;
    for &d in dims {
        if d == 0 {
            return Err(invalid("dimensions must be positive"));
        }
        let space = TraceSpace::normalized(d);
        let cell_seed = derive_seed(seed, d as u64);
        let outcomes: Vec<Result<(f64, HolderInstance)>> = (0..instances)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(cell_seed, i);
                let inst = match family {
                    InstanceFamily::General => random_instance(&space, &mut rng),
                    InstanceFamily::Commutative => random_commutative_instance(&space, &mut rng),
                };
                holder_ratio(&space, profile, &inst, exponent).map(|r| (r.ratio, inst))
            })
            .collect();
        let mut best: Option<(f64, HolderInstance)> = None;
        for outcome in outcomes {
            match outcome {
                Ok((ratio, inst)) => {
                    if best.as_ref().is_none_or(|b| ratio > b.0) {
                        best = Some((ratio, inst));
                    }
                }
                Err(Error::DegenerateInstance { .. }) => degenerate += 1,
                Err(e) => return Err(e),
            }
        }
        let (constant, inst) = best.ok_or_else(|| invalid("every instance was degenerate"))?;
        per_dim.push((d, ConstantReport::new(constant, instances, cell_seed).with_witness(inst.witness())));
    }
    let hi = per_dim.iter().map(|(_, r)| r.constant).fold(0.0, f64::max);
    let lo = per_dim.iter().map(|(_, r)| r.constant).fold(f64::INFINITY, f64::min);
    let growth = hi / lo;
    Ok(ProfileScan { profile: *profile, exponent, per_dim, growth, red_flag: growth > 2.0, degenerate })
}

/// [`scan_profile`] over a grid of profiles; cell `i` uses a seed derived from `(seed, i)`.
pub fn scan_constant(
    grid: &[ExponentProfile],
    dims: &[usize],
    instances: u64,
    seed: u64,
    exponent: HolderExponent,
) -> Result<Vec<ProfileScan>> {
    grid.iter()
        .enumerate()
        .map(|(i, profile)| scan_profile(profile, dims, instances, derive_seed(seed, 1_000_003 + i as u64), exponent, InstanceFamily::General))
        .collect()
}

/// The instance on `M_2(M)` with `Tr (x) tau`: `x~ = [[0, x], [x*, 0]]`,
/// `f~ = diag(f, f)/2`, `W~ = diag(V*, W)`, `V~ = diag(V, W*)`.
pub fn selfadjoint_reduction(space: &TraceSpace, inst: &HolderInstance) -> Result<(TraceSpace, HolderInstance)> {
    inst.check()?;
    let n = space.dim();
    let z = zeros(n);
    let doubled = space.doubled();
    let x = block2(&z, &inst.x, &inst.x.adjoint(), &z);
    let fm = inst.f.matrix() * c(0.5);
    let f = Density::new(&doubled, &block2(&fm, &z, &z, &fm))?;
    let w = block2(&inst.v.adjoint(), &z, &z, &inst.w);
    let v = block2(&inst.v, &z, &z, &inst.w.adjoint());
    Ok((doubled, HolderInstance { x, f, v, w, sign: inst.sign }))
}

/// Exact factor `2^{1/r - beta}` relating `||x~ W~ f~^beta + V~ f~^beta x~||_r`
/// to `||x W f^beta + V f^beta x||_r`.
pub fn lifted_scaling(beta: f64, r: f64) -> f64 {
    2f64.powf(inv(r) - beta)
}

/// Residual of `G(it) = V H(-t) + (V f^a x + x f^a W) f^{a(g-1)} u_{-t}`, where
/// `G(z) = V f^{ga(1-z)} x + x W f^{ga(1-z)}`, `u_t = f^{i g a t}` and
/// `H(t) = u_t f^{ga} x - f^a x f^{a(g-1)} u_t`.
pub fn h_t_residual(inst: &HolderInstance, gamma: f64, alpha: f64, t: f64) -> Result<f64> {
    if !inst.f.full_support() {
        return Err(invalid("the identity needs a full-support density"));
    }
    inst.check()?;
    let f = &inst.f;
    let (x, v, w) = (&inst.x, &inst.v, &inst.w);
    let ga = gamma * alpha;
    let u = |t: f64| f.power_complex(num_complex::Complex64::new(0.0, ga * t));
    let g_it = f.power_complex(num_complex::Complex64::new(ga, -ga * t));
    let lhs = v * &g_it * x + x * w * &g_it;
    let f_ga = f.power(ga)?;
    let f_a = f.power(alpha)?;
    let f_rest = f.power(alpha * (gamma - 1.0))?;
    let h = |t: f64| &u(t) * &f_ga * x - &f_a * x * &f_rest * u(t);
    let rhs = v * h(-t) + (v * &f_a * x + x * &f_a * w) * &f_rest * u(-t);
    Ok(operator_norm(&(lhs - rhs)))
}

/// [`h_t_residual`] with `V = W = 1`.
pub fn h_t_identity_check(x: &CMat, f: &Density, gamma: f64, alpha: f64, t: f64) -> Result<f64> {
    let n = x.nrows();
    let one = CMat::identity(n, n);
    let inst = HolderInstance { x: x.clone(), f: f.clone(), v: one.clone(), w: one, sign: Sign::Plus };
    h_t_residual(&inst, gamma, alpha, t)
}

/// `G(z) = V f^{ga(1-z)} x + x W f^{ga(1-z)}`, analytic on the strip; at
/// `z = omega` it equals the left side of the inequality.
pub fn rescaled_family(inst: &HolderInstance, profile: &ExponentProfile) -> Result<AnalyticFamily> {
    let n = inst.x.nrows();
    let one = CMat::identity(n, n);
    let ga = profile.gamma * profile.alpha;
    AnalyticFamily::new(
        inst.f.matrix(),
        vec![
            PowerTerm { left: inst.v.clone(), offset: ga, slope: -ga, right: inst.x.clone() },
            PowerTerm { left: &inst.x * &inst.w, offset: ga, slope: -ga, right: one },
        ],
        vec![],
    )
}

/// Largest `|a - b|` entry, exposed for reduction checks.
pub fn entry_gap(a: &CMat, b: &CMat) -> f64 {
    max_abs_diff(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::identity;
    use crate::sampling::random_hermitian;

    fn profile() -> ExponentProfile {
        ExponentProfile::new(0.5, f64::INFINITY, 0.5, 0.45, 1.5).unwrap()
    }

    #[test]
    fn profile_relations() {
        let pr = ExponentProfile::new(0.5, 4.0, 0.3, 0.4, 2.0).unwrap();
        assert!((1.0 / pr.q() - (0.7 / 0.5 + 0.3 / 4.0)).abs() < 1e-12);
        assert!((pr.alpha() - (2.0 - 0.25)).abs() < 1e-15);
        assert!((1.0 - pr.omega() - 0.7 / 2.0).abs() < 1e-12);
        let again = ExponentProfile::from_q(0.5, pr.q(), 4.0, 0.4, 2.0).unwrap();
        assert!((again.theta() - 0.3).abs() < 1e-12);
        let inf = profile();
        assert_eq!(inf.alpha(), 2.0);
        assert!((inf.q() - 1.0).abs() < 1e-15);
        // 1/q = (1 - omega)/R' + omega/s for the rescaled exponent R'
        let lhs = (1.0 - pr.omega()) / pr.rescaled_exponent() + pr.omega() / pr.s();
        assert!((lhs - 1.0 / pr.q()).abs() < 1e-12);

        assert!(ExponentProfile::from_q(0.5, 0.5, 2.0, 0.4, 2.0).is_err());
        assert!(ExponentProfile::new(0.5, 2.0, 1.0, 0.4, 2.0).is_err());
        assert!(ExponentProfile::new(0.5, 2.0, 0.5, 0.6, 2.0).is_err());
        assert!(ExponentProfile::new(0.5, 2.0, 0.5, 0.4, 1.0).is_err());
    }

    fn commuting_instance(space: &TraceSpace, seed: u64, sign: Sign) -> HolderInstance {
        let mut rng = stream(seed, 0);
        let f = crate::sampling::random_density(space, &mut rng);
        let x = crate::linalg::from_eigen_real(&[0.4, -1.2, 2.0], f.eigenvectors());
        HolderInstance { x, f, v: identity(3), w: identity(3), sign }
    }

    #[test]
    fn commutator_norm_examples() {
        let space = TraceSpace::standard(3);
        let plus = commuting_instance(&space, 1, Sign::Plus);
        let fb = plus.f.power(0.7).unwrap();
        let v = commutator_norm(&space, &plus, 0.7, 1.5).unwrap();
        assert!((v - 2.0 * space.quasi_norm(&(&plus.x * &fb), 1.5)).abs() < 1e-12);

        let minus = commuting_instance(&space, 1, Sign::Minus);
        assert!(commutator_norm(&space, &minus, 0.7, 1.5).unwrap() < 1e-12);

        let mut rng = stream(2, 0);
        let x = random_element(&space, &mut rng);
        let inst = HolderInstance { x: x.clone(), ..plus.clone() };
        let v = commutator_norm(&space, &inst, 0.0, 0.8).unwrap();
        assert!((v - space.quasi_norm(&(&x * c(2.0)), 0.8)).abs() < 1e-12);

        let bad = HolderInstance { v: crate::sampling::haar_unitary(&mut rng, 3), ..plus };
        assert!(matches!(commutator_norm(&space, &bad, 0.5, 1.0), Err(Error::NonCommuting { .. })));
    }

    #[test]
    fn scalar_ratio_is_two_to_theta() {
        let pr = ExponentProfile::new(0.5, 3.0, 0.4, 0.3, 2.0).unwrap();
        for w in [0.2, 1.0, 5.0] {
            let space = TraceSpace::new(vec![w]).unwrap();
            let f = space.identity_density();
            let inst = HolderInstance { x: diag_real(&[-1.3]), f, v: identity(1), w: identity(1), sign: Sign::Plus };
            let classical = holder_ratio(&space, &pr, &inst, HolderExponent::Classical).unwrap();
            assert!((classical.ratio - 2f64.powf(0.4)).abs() < 1e-12);
            assert!(holder_ratio(&space, &pr, &inst, HolderExponent::Weak).unwrap().ratio.is_finite());
        }
    }

    #[test]
    fn commuting_lhs_matches_scalar_calculus() {
        let space = TraceSpace::standard(3);
        let inst = commuting_instance(&space, 5, Sign::Plus);
        let pr = profile();
        let r = holder_ratio(&space, &pr, &inst, HolderExponent::Weak).unwrap();
        // f and x share an eigenbasis: lhs = 2 (sum |x_i|^q f_i^{a(1-t) q})^{1/q}
        let xs = [0.4f64, -1.2, 2.0];
        let beta = pr.alpha() * (1.0 - pr.theta());
        let oracle = 2.0 * xs.iter().zip(inst.f.eigenvalues()).map(|(x, l)| (x.abs() * l.powf(beta)).powf(pr.q())).sum::<f64>().powf(1.0 / pr.q());
        assert!((r.lhs - oracle).abs() < 1e-10 * oracle);
    }

    #[test]
    fn zero_is_degenerate() {
        let space = TraceSpace::standard(3);
        let inst = HolderInstance { x: zeros(3), ..commuting_instance(&space, 1, Sign::Plus) };
        assert_eq!(holder_ratio(&space, &profile(), &inst, HolderExponent::Weak), Err(Error::DegenerateInstance { lhs: 0.0 }));
    }

    #[test]
    fn ratio_is_scale_invariant() {
        let space = TraceSpace::normalized(4);
        let mut rng = stream(3, 0);
        let inst = random_instance(&space, &mut rng);
        let pr = profile();
        let a = holder_ratio(&space, &pr, &inst, HolderExponent::Weak).unwrap().ratio;
        let scaled = HolderInstance { x: &inst.x * c(7.5), ..inst };
        let b = holder_ratio(&space, &pr, &scaled, HolderExponent::Weak).unwrap().ratio;
        // both sides are homogeneous of degree one in x
        assert!((a - b).abs() < 1e-10 * a);
    }

    #[test]
    fn scan_is_deterministic() {
        let pr = profile();
        let a = scan_constant(&[pr], &[2, 4], 20, 7, HolderExponent::Weak).unwrap();
        let b = scan_constant(&[pr], &[2, 4], 20, 7, HolderExponent::Weak).unwrap();
        assert_eq!(a, b);
        assert!(a[0].per_dim.iter().all(|(_, r)| r.constant.is_finite()));
    }

    #[test]
    fn commutative_classical_bound() {
        let pr = ExponentProfile::new(0.5, 2.0, 0.5, 0.45, 1.5).unwrap();
        let scan = scan_profile(&pr, &[1, 3, 6], 50, 1, HolderExponent::Classical, InstanceFamily::Commutative).unwrap();
        for (_, r) in &scan.per_dim {
            assert!(r.constant <= 2f64.powf(pr.theta()) + 1e-10);
        }
    }

    #[test]
    fn reduction_scaling() {
        let space = TraceSpace::standard(3);
        let mut rng = stream(4, 0);
        let inst = random_instance(&space, &mut rng);
        let pr = ExponentProfile::new(0.5, 4.0, 0.3, 0.4, 2.0).unwrap();
        let (doubled, lifted) = selfadjoint_reduction(&space, &inst).unwrap();
        assert_eq!(lifted.x, lifted.x.adjoint());
        let beta = pr.alpha() * (1.0 - pr.theta());
        for (b, r) in [(beta, pr.q()), (pr.alpha(), pr.p())] {
            let base = commutator_norm(&space, &inst, b, r).unwrap();
            let up = commutator_norm(&doubled, &lifted, b, r).unwrap();
            assert!((up - lifted_scaling(b, r) * base).abs() < 1e-9 * up);
        }
    }

    #[test]
    fn reduction_of_selfadjoint_input() {
        let space = TraceSpace::standard(3);
        let mut rng = stream(6, 0);
        let f = crate::sampling::random_density(&space, &mut rng);
        let v = unitary_commuting_with(&f, &mut rng);
        let inst = HolderInstance { x: random_hermitian(&space, &mut rng), f, v: v.clone(), w: v.adjoint(), sign: Sign::Plus };
        let (doubled, lifted) = selfadjoint_reduction(&space, &inst).unwrap();
        let pr = profile();
        let base = commutator_norm(&space, &inst, pr.alpha(), pr.p()).unwrap();
        let up = commutator_norm(&doubled, &lifted, pr.alpha(), pr.p()).unwrap();
        assert!((up / base - lifted_scaling(pr.alpha(), pr.p())).abs() < 1e-9 * up / base);
    }

    #[test]
    fn h_t_identity() {
        let space = TraceSpace::standard(4);
        let mut rng = stream(8, 0);
        let f = crate::sampling::random_density(&space, &mut rng);
        let x = random_hermitian(&space, &mut rng);
        assert!(h_t_identity_check(&x, &f, 1.5, 0.8, 0.0).unwrap() < 1e-10);
        for t in [-3.0, -0.7, 1.1, 3.0] {
            assert!(h_t_identity_check(&x, &f, 1.5, 0.8, t).unwrap() < 1e-9);
        }
        let scalar = TraceSpace::standard(1);
        let r = h_t_identity_check(&diag_real(&[2.0]), &scalar.identity_density(), 2.0, 1.0, 0.9).unwrap();
        assert!(r < 1e-14);
        let inst = random_instance(&space, &mut rng);
        assert!(h_t_residual(&inst, 1.3, 0.6, 2.0).unwrap() < 1e-9);
    }

    #[test]
    fn rescaled_family_hits_the_left_side() {
        let space = TraceSpace::standard(3);
        let mut rng = stream(9, 0);
        let inst = HolderInstance { sign: Sign::Plus, ..random_instance(&space, &mut rng) };
        let pr = ExponentProfile::new(0.5, 4.0, 0.3, 0.4, 2.0).unwrap();
        let g = rescaled_family(&inst, &pr).unwrap();
        let at_omega = g.evaluate(c(pr.omega()));
        let beta = pr.alpha() * (1.0 - pr.theta());
        let fb = inst.f.power(beta).unwrap();
        let direct = &inst.x * &inst.w * &fb + &inst.v * &fb * &inst.x;
        assert!(max_abs_diff(&at_omega, &direct) < 1e-10);
        let check = three_lines_check(&space, &g, pr.rescaled_exponent(), pr.s(), pr.omega(), &QuadratureConfig::default()).unwrap();
        assert!((check.p_theta - pr.q()).abs() < 1e-10);
        assert!(check.holds, "{check:?}");
    }
}
