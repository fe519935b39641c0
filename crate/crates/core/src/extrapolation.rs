//! Extrapolation quantities: the Jordan multiplier `y -> (g y + y g)/2`,
//! `C_q(x)`, the two-sided Schur multiplier with coefficients
//! `(l_i^t + l_j^t) / (l_i + l_j)^t`, density regularization and the
//! diagnostic ratios of the extrapolation argument.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::{c, from_eigen_real, max_abs_diff, CMat};
use crate::lp::{power, psd_eigen, Density, TraceSpace};
use crate::optim::{minimize, tau_norm, DescentOptions};
use crate::random_systems::{conditional_abs_power, mixed_norm, MixedNormEstimate, OrthonormalSystem};
use crate::report::{ConstantReport, NamedMatrix};
use crate::sampling::{ginibre, random_element, stream};
use crate::triple_norm::{triple_norm_upper_with, Certification, TripleNormOptions};

/// `J(g^alpha) y = (g^alpha y + y g^alpha) / 2` for a positive `g`, with the
/// spectral data of `g` cached.
#[derive(Debug, Clone, PartialEq)]
pub struct JordanMap {
    alpha: f64,
    /// `g_i^alpha` in ascending order of `g_i`.
    multipliers: Vec<f64>,
    vectors: CMat,
    powered: CMat,
}

impl JordanMap {
    pub fn new(f: &Density, alpha: f64) -> Result<Self> {
        Self::from_positive(f.matrix(), alpha)
    }

    /// Same map for an arbitrary positive element, e.g. a regularized density.
    pub fn from_positive(g: &CMat, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(invalid(format!("alpha must be finite and nonnegative, got {alpha}")));
        }
        let (values, vectors) = psd_eigen(g)?;
        let multipliers: Vec<f64> = values.iter().map(|&v| if v == 0.0 { 0.0 } else { v.powf(alpha) }).collect();
        let powered = from_eigen_real(&multipliers, &vectors);
        Ok(Self { alpha, multipliers, vectors, powered })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }

    pub fn eigenvectors(&self) -> &CMat {
        &self.vectors
    }

    /// `g^alpha`.
    pub fn powered(&self) -> &CMat {
        &self.powered
    }

    pub fn apply(&self, x: &CMat) -> CMat {
        (&self.powered * x + x * &self.powered) * c(0.5)
    }

    pub fn to_eigenbasis(&self, x: &CMat) -> CMat {
        self.vectors.adjoint() * x * &self.vectors
    }

    pub fn from_eigenbasis(&self, x: &CMat) -> CMat {
        &self.vectors * x * self.vectors.adjoint()
    }

    /// Entrywise division `y_ij = 2 T_ij / (g_i^alpha + g_j^alpha)` in the
    /// eigenbasis, with `0/0 = 0`.
    pub fn invert(&self, t: &CMat) -> Result<CMat> {
        let hat = self.to_eigenbasis(t);
        let n = hat.nrows();
        let top = self.multipliers.iter().fold(0.0_f64, |m, v| m.max(*v));
        let scale = hat.iter().fold(0.0_f64, |m, z| m.max(z.norm())).max(f64::MIN_POSITIVE);
        let mut y = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let denom = self.multipliers[i] + self.multipliers[j];
                if denom > 1e-14 * top {
                    y[(i, j)] = hat[(i, j)] * (2.0 / denom);
                } else if hat[(i, j)].norm() > 1e-10 * scale.max(1.0) {
                    return Err(Error::NotInRange { entry: hat[(i, j)].norm() });
                }
            }
        }
        Ok(self.from_eigenbasis(&y))
    }
}

/// Coefficient `(l_i^t + l_j^t) / (l_i + l_j)^t` with its limiting values:
/// `2` for `t = 0`, `2^{1-t}` when both weights vanish, `1` when one does.
pub fn schur_coefficient(li: f64, lj: f64, theta: f64) -> f64 {
    if theta == 0.0 {
        return 2.0;
    }
    match (li == 0.0, lj == 0.0) {
        (true, true) => 2f64.powf(1.0 - theta),
        (true, false) | (false, true) => 1.0,
        (false, false) => (li.powf(theta) + lj.powf(theta)) / (li + lj).powf(theta),
    }
}

fn check_schur_args(lambdas: &[f64], theta: f64, x: &CMat) -> Result<()> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(invalid(format!("theta must lie in [0, 1], got {theta}")));
    }
    if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(invalid("weights must be finite and nonnegative"));
    }
    if x.nrows() != lambdas.len() || x.ncols() != lambdas.len() {
        return Err(invalid(format!("expected a {0}x{0} matrix", lambdas.len())));
    }
    Ok(())
}

/// `sum_{ij} coefficient(l_i, l_j) Q_i x Q_j` for the coordinate projections `Q_i`.
pub fn schur_multiplier_apply(lambdas: &[f64], theta: f64, x: &CMat) -> Result<CMat> {
    check_schur_args(lambdas, theta, x)?;
    Ok(CMat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * schur_coefficient(lambdas[i], lambdas[j], theta)))
}

/// Largest of `||M x||_q / ||x||_q` and its inverse over all matrix units and
/// `trials` Gaussian matrices, for the coordinate Schur multiplier `M`.
pub fn schur_multiplier_norm_estimate(lambdas: &[f64], theta: f64, q: f64, trials: u64, seed: u64) -> Result<ConstantReport> {
    let n = lambdas.len();
    if n == 0 {
        return Err(invalid("need at least one weight"));
    }
    if !(q > 0.0) {
        return Err(invalid(format!("q must be positive, got {q}")));
    }
    check_schur_args(lambdas, theta, &CMat::zeros(n, n))?;
    let space = TraceSpace::standard(n);
    let ratio = |x: &CMat| {
        let mx = schur_multiplier_apply(lambdas, theta, x).expect("validated");
        let r = space.quasi_norm(&mx, q) / space.quasi_norm(x, q);
        r.max(1.0 / r)
    };
    let units = (0..n * n).map(|k| crate::linalg::unit(n, k / n, k % n));
    let mut probes: Vec<(f64, CMat)> = units.map(|e| (ratio(&e), e)).collect();
    let random: Vec<(f64, CMat)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let x = ginibre(&mut stream(seed, i), n);
            (ratio(&x), x)
        })
        .collect();
    probes.extend(random);
    let best = probes.iter().enumerate().fold(0, |b, (i, p)| if p.0 > probes[b].0 { i } else { b });
    let (constant, witness) = probes.swap_remove(best);
    Ok(ConstantReport::new(constant, trials + (n * n) as u64, seed).with_witness(vec![NamedMatrix::new("x", witness)]))
}

/// `g = (f^{2a} + f0^{2a})^{1/(2a)}`: faithful, and `tau(g) <= 2` for `a >= 1/2`.
pub fn regularize_density(f: &Density, f0: &Density, alpha: f64) -> Result<CMat> {
    if !f0.full_support() {
        return Err(invalid("the reference density must have full support"));
    }
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    let sum = f.power(2.0 * alpha)? + f0.power(2.0 * alpha)?;
    power(&crate::linalg::hermitian_part(&sum), 1.0 / (2.0 * alpha))
}

/// The elements in the substitution argument: `Y = J(f^a)^{-1} S`,
/// `T = f^{a(1-t)} Y + Y f^{a(1-t)}`, and `Z = J(f^{a t})^{-1} S` computed
/// both directly and from `T` through two inverse Schur multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstitutionChain {
    pub y: CMat,
    pub t: CMat,
    pub z: CMat,
    pub z_from_t: CMat,
}

pub fn substitution_chain(f: &Density, alpha: f64, theta: f64, s: &CMat) -> Result<SubstitutionChain> {
    if !f.full_support() {
        return Err(invalid("the substitution chain needs a full-support density"));
    }
    let outer = JordanMap::new(f, alpha)?;
    let y = outer.invert(s)?;
    let t = JordanMap::new(f, alpha * (1.0 - theta))?.apply(&y) * c(2.0);
    let z = JordanMap::new(f, alpha * theta)?.invert(s)?;
    let mu = outer.multipliers();
    let t_hat = outer.to_eigenbasis(&t);
    let n = mu.len();
    let z_hat = CMat::from_fn(n, n, |i, j| {
        let inverse = 1.0 / (schur_coefficient(mu[i], mu[j], theta) * schur_coefficient(mu[i], mu[j], 1.0 - theta));
        t_hat[(i, j)] * inverse
    });
    let z_from_t = outer.from_eigenbasis(&z_hat);
    Ok(SubstitutionChain { y, t, z, z_from_t })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CqOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Monte Carlo samples for systems that are not enumerated.
    pub samples: u64,
    pub max_iterations: usize,
    /// Replace a density whose Jordan map misses `x` by its regularization
    /// against the normalized identity.
    pub regularize: bool,
}

impl Default for CqOptions {
    fn default() -> Self {
        Self { restarts: 4, seed: 0, samples: 2000, max_iterations: 25, regularize: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CqResult {
    pub value: f64,
    pub std_error: f64,
    pub f_witness: Density,
    pub y_witness: Vec<CMat>,
    pub certified: Certification,
}

struct Evaluation {
    estimate: MixedNormEstimate,
    f: Density,
    y: Vec<CMat>,
}

struct CqProblem<'a> {
    space: &'a TraceSpace,
    x: &'a [CMat],
    alpha: f64,
    q: f64,
    system: &'a OrthonormalSystem,
    options: &'a CqOptions,
}

impl CqProblem<'_> {
    fn evaluate(&self, f: &Density) -> Result<Evaluation> {
        let solve = |f: &Density| -> Result<Vec<CMat>> {
            let map = JordanMap::new(f, self.alpha)?;
            self.x.iter().map(|xk| map.invert(xk)).collect()
        };
        let (f, y) = match solve(f) {
            Ok(y) => (f.clone(), y),
            Err(Error::NotInRange { .. }) if self.options.regularize => {
                let reference = self.space.identity_density();
                let g = regularize_density(f, &reference, self.alpha.max(0.5))?;
                let g = Density::normalized(self.space, &g)?;
                let y = solve(&g)?;
                (g, y)
            }
            Err(e) => return Err(e),
        };
        let y: Vec<CMat> = y.iter().map(|yk| self.space.project(yk)).collect();
        let estimate = mixed_norm(self.space, self.system, &y, self.q, self.options.samples, self.options.seed)?;
        Ok(Evaluation { estimate, f, y })
    }

    fn density_of(&self, h: &CMat) -> Result<Density> {
        Density::from_factor(self.space, h)
    }

    fn value_of(&self, h: &CMat) -> f64 {
        self.density_of(h).and_then(|f| self.evaluate(&f)).map_or(f64::INFINITY, |e| e.estimate.value)
    }

    /// Forward-difference `tau`-gradient over the in-algebra entries of `h`.
    fn value_and_gradient(&self, h: &CMat) -> (f64, CMat) {
        let base = self.value_of(h);
        let n = h.nrows();
        let mut grad = CMat::zeros(n, n);
        if !base.is_finite() {
            return (base, grad);
        }
        let step = 1e-6 * h.iter().fold(0.0_f64, |m, z| m.max(z.norm())).max(1e-12);
        let w = self.space.weights();
        let entries: Vec<(usize, usize)> =
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| self.space.same_block(i, j)).collect();
        let partials: Vec<(f64, f64)> = entries
            .par_iter()
            .map(|&(i, j)| {
                let mut shifted = h.clone();
                shifted[(i, j)].re += step;
                let re = (self.value_of(&shifted) - base) / step;
                shifted[(i, j)].re -= step;
                shifted[(i, j)].im += step;
                let im = (self.value_of(&shifted) - base) / step;
                (re, im)
            })
            .collect();
        for (&(i, j), (re, im)) in entries.iter().zip(partials) {
            if re.is_finite() && im.is_finite() {
                grad[(i, j)] = num_complex::Complex64::new(re, im) / w[j];
            }
        }
        (base, grad)
    }
}

/// Upper bound for `C_q(x) = inf ||sum xi_k (x) y_k||_q` over densities `f`
/// and `y` with `x_k = (f^a y_k + y_k f^a)/2`, `a = 1/p - 1/q`.
///
/// Densities are parameterized as `h h* / tau(h h*)`. Starting points are
/// `f_init`, the normalized identity, the normalized conditional expectations
/// of `|S|^p` and `|S*|^p`, then random factors.
pub fn cq_upper(
    space: &TraceSpace,
    x: &[CMat],
    p: f64,
    q: f64,
    system: &OrthonormalSystem,
    f_init: &Density,
    options: &CqOptions,
) -> Result<CqResult> {
    if !(p > 0.0 && p <= q && q <= 2.0) {
        return Err(invalid(format!("need 0 < p <= q <= 2, got p = {p}, q = {q}")));
    }
    if x.is_empty() {
        return Err(invalid("tuple must be nonempty"));
    }
    x.iter().try_for_each(|xk| space.check_element(xk))?;
    let alpha = 1.0 / p - 1.0 / q;
    let problem = CqProblem { space, x, alpha, q, system, options };

    let mut candidates = vec![f_init.clone(), space.identity_density()];
    for adjoint in [false, true] {
        let e = conditional_abs_power(space, system, x, p, options.samples.min(512), options.seed, adjoint)?;
        if let Ok(f) = Density::normalized(space, &e) {
            candidates.push(f);
        }
    }
    let mut best: Option<Evaluation> = None;
    let mut consider = |e: Evaluation| {
        if best.as_ref().is_none_or(|b| e.estimate.value < b.estimate.value) {
            best = Some(e);
        }
    };
    for f in &candidates {
        match problem.evaluate(f) {
            Ok(e) => consider(e),
            Err(Error::NotInRange { .. }) => {}
            Err(e) => return Err(e),
        }
    }

    let restarts = options.restarts;
    let runs: Vec<Option<Evaluation>> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let h0 = match candidates.get(i) {
                Some(f) => f.power(0.5).ok()?,
                None => {
                    let mut rng = stream(options.seed ^ 0x5eed, i as u64);
                    space.project(&random_element(space, &mut rng))
                }
            };
            let size = tau_norm(space, std::slice::from_ref(&h0));
            let descent =
                DescentOptions { max_iterations: options.max_iterations, gradient_tolerance: 1e-9, initial_step: 0.05 * size };
            let outcome = minimize(
                space,
                vec![h0],
                |h| {
                    let (v, g) = problem.value_and_gradient(&h[0]);
                    (v, vec![g])
                },
                &descent,
            );
            let f = problem.density_of(&outcome.point[0]).ok()?;
            problem.evaluate(&f).ok()
        })
        .collect();
    for e in runs.into_iter().flatten() {
        consider(e);
    }
    let best = best.ok_or_else(|| invalid("no candidate density reached x"))?;
    Ok(CqResult {
        value: best.estimate.value,
        std_error: best.estimate.std_error,
        f_witness: best.f,
        y_witness: best.y,
        certified: Certification::UpperBound,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepBudgets {
    pub cq: CqOptions,
    pub triple_restarts: usize,
    /// The parameter `R` of the modified exponent, `0 < R < p`; `0.9 p` when unset.
    pub r: Option<f64>,
}

impl Default for StepBudgets {
    fn default() -> Self {
        Self { cq: CqOptions::default(), triple_restarts: 4, r: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepsReport {
    pub p: f64,
    pub q: f64,
    /// `1/q = (1 - theta)/p + theta/2`.
    pub theta: f64,
    /// `1 - theta' = (1 - theta) R / 2`.
    pub theta_prime: f64,
    pub r: f64,
    pub triple_norm_p: f64,
    pub c_p: f64,
    pub c_2: f64,
    pub c_q: f64,
    /// `|||x|||_p / C_q`.
    pub step1: f64,
    /// `C_2 / |||x|||_p`.
    pub step2: f64,
    /// `C_q / (C_p^{1-theta} C_2^theta)`.
    pub step3: f64,
    /// `C_q / (C_p^{1-theta'} C_2^theta')`.
    pub modified_step3: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

/// Measures the three ratios bounded in the extrapolation argument.
pub fn steps_diagnostic(
    space: &TraceSpace,
    x: &[CMat],
    p: f64,
    q: f64,
    system: &OrthonormalSystem,
    budgets: &StepBudgets,
    seed: u64,
) -> Result<StepsReport> {
    if !(p > 0.0 && p < q && q < 2.0) {
        return Err(invalid(format!("need 0 < p < q < 2, got p = {p}, q = {q}")));
    }
    let r = budgets.r.unwrap_or(0.9 * p);
    if !(r > 0.0 && r < p) {
        return Err(invalid(format!("R must satisfy 0 < R < p, got {r}")));
    }
    let theta = (1.0 / p - 1.0 / q) / (1.0 / p - 0.5);
    let theta_prime = 1.0 - (1.0 - theta) * r / 2.0;
    let cq_options = CqOptions { seed, ..budgets.cq.clone() };
    let triple = triple_norm_upper_with(
        space,
        x,
        p,
        &TripleNormOptions { restarts: budgets.triple_restarts, seed, ..TripleNormOptions::default() },
    )?;
    let c_p = mixed_norm(space, system, x, p, cq_options.samples, seed)?.value;
    let identity = space.identity_density();
    let c2 = cq_upper(space, x, p, 2.0, system, &identity, &cq_options)?;
    let cq = cq_upper(space, x, p, q, system, &c2.f_witness, &cq_options)?;
    let (c_2, c_q) = (c2.value, cq.value);
    Ok(StepsReport {
        p,
        q,
        theta,
        theta_prime,
        r,
        triple_norm_p: triple.value,
        c_p,
        c_2,
        c_q,
        step1: ratio(triple.value, c_q),
        step2: ratio(c_2, triple.value),
        step3: ratio(c_q, c_p.powf(1.0 - theta) * c_2.powf(theta)),
        modified_step3: ratio(c_q, c_p.powf(1.0 - theta_prime) * c_2.powf(theta_prime)),
    })
}

/// `max |J(y) - x|` over a tuple, a reconstruction check for witnesses.
pub fn reconstruction_defect(f: &Density, alpha: f64, x: &[CMat], y: &[CMat]) -> Result<f64> {
    let map = JordanMap::new(f, alpha)?;
    Ok(x.iter().zip(y).map(|(xk, yk)| max_abs_diff(&map.apply(yk), xk)).fold(0.0, f64::max))
}

/// Largest `|coefficient|` over pairs, the exact `L_2` norm of the multiplier.
pub fn schur_coefficient_extremes(lambdas: &[f64], theta: f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0_f64;
    for &li in lambdas {
        for &lj in lambdas {
            let v = schur_coefficient(li, lj, theta);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo, hi)
}

/// Operator norm of the regularized Jordan quotient `J(g^a)^{-1} J(f^a)` on
/// a sample of `y`s, relative to `||y||_2`.
pub fn regularized_quotient_ratio(space: &TraceSpace, f: &Density, g: &CMat, alpha: f64, y: &CMat) -> Result<f64> {
    let jf = JordanMap::new(f, alpha)?;
    let jg = JordanMap::from_positive(g, alpha)?;
    let image = jg.invert(&jf.apply(y))?;
    Ok(ratio(space.quasi_norm(&image, 2.0), space.quasi_norm(y, 2.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, identity, kron, operator_norm, unit};
    use crate::random_systems::SystemKind;
    use crate::sampling::{random_density, random_density_spread};

    fn commuting_with(f: &Density, d: &[f64]) -> CMat {
        from_eigen_real(d, f.eigenvectors())
    }

    #[test]
    fn jordan_apply_examples() {
        let space = TraceSpace::standard(3);
        let mut rng = stream(1, 0);
        let x = random_element(&space, &mut rng);
        let j = JordanMap::new(&space.identity_density(), 1.5).unwrap();
        assert!(max_abs_diff(&j.apply(&x), &(&x * c((1.0f64 / 3.0).powf(1.5)))) < 1e-14);

        let f = random_density(&space, &mut rng);
        let y = commuting_with(&f, &[0.3, -1.0, 2.0]);
        let j = JordanMap::new(&f, 0.7).unwrap();
        assert!(max_abs_diff(&j.apply(&y), &(f.power(0.7).unwrap() * &y)) < 1e-12);

        let h = crate::linalg::hermitian_part(&x);
        let jh = j.apply(&h);
        assert!(max_abs_diff(&jh, &jh.adjoint()) < 1e-13);
    }

    #[test]
    fn jordan_map_is_positive_on_l2() {
        // n^2 x n^2 representation on vec(x): (I (x) P + P^T (x) I) / 2
        let space = TraceSpace::standard(3);
        let mut rng = stream(2, 0);
        let f = random_density(&space, &mut rng);
        let j = JordanMap::new(&f, 0.8).unwrap();
        let pw = j.powered();
        let rep = (kron(&identity(3), pw) + kron(&pw.transpose(), &identity(3))) * c(0.5);
        let (values, _) = crate::linalg::hermitian_eigen(&rep);
        assert!(values[0] >= -1e-14);
        assert!(max_abs_diff(&rep, &rep.adjoint()) < 1e-14);
    }

    #[test]
    fn jordan_round_trip() {
        let space = TraceSpace::new(vec![0.25, 0.25, 0.5, 0.5]).unwrap();
        let mut rng = stream(3, 0);
        let f = random_density(&space, &mut rng);
        let j = JordanMap::new(&f, 1.3).unwrap();
        for _ in 0..5 {
            let x = random_element(&space, &mut rng);
            let back = j.invert(&j.apply(&x)).unwrap();
            assert!(max_abs_diff(&back, &x) < 1e-9);
        }
    }

    #[test]
    fn jordan_range_condition() {
        let space = TraceSpace::standard(2);
        let f = Density::new(&space, &diag_real(&[1.0, 0.0])).unwrap();
        let j = JordanMap::new(&f, 1.0).unwrap();
        assert!(matches!(j.invert(&unit(2, 1, 1)), Err(Error::NotInRange { .. })));

        // dense solve of (P y + y P)/2 = T on the living part, P = diag(1, 0)
        let t = CMat::from_row_slice(2, 2, &[c(3.0), c(1.0), c(-2.0), c(0.0)]);
        let y = j.invert(&t).unwrap();
        let mut system = nalgebra::DMatrix::<f64>::zeros(3, 3);
        // unknowns y11, y12, y21 (y22 is free and set to zero): y11 = 3, y12/2 = 1, y21/2 = -2
        system[(0, 0)] = 1.0;
        system[(1, 1)] = 0.5;
        system[(2, 2)] = 0.5;
        let rhs = nalgebra::DVector::from_vec(vec![3.0, 1.0, -2.0]);
        let solved = system.lu().solve(&rhs).unwrap();
        assert!((y[(0, 0)].re - solved[0]).abs() < 1e-12);
        assert!((y[(0, 1)].re - solved[1]).abs() < 1e-12);
        assert!((y[(1, 0)].re - solved[2]).abs() < 1e-12);
        assert!(y[(1, 1)].norm() < 1e-12);
    }

    #[test]
    fn schur_examples() {
        let lambdas = [0.1, 1.0, 7.0];
        let mut rng = stream(4, 0);
        let x = ginibre(&mut rng, 3);
        assert!(max_abs_diff(&schur_multiplier_apply(&lambdas, 0.0, &x).unwrap(), &(&x * c(2.0))) < 1e-15);
        assert!(max_abs_diff(&schur_multiplier_apply(&lambdas, 1.0, &x).unwrap(), &x) < 1e-14);
        let equal = [0.4; 3];
        let theta = 0.3;
        let expected = &x * c(2f64.powf(1.0 - theta));
        assert!(max_abs_diff(&schur_multiplier_apply(&equal, theta, &x).unwrap(), &expected) < 1e-14);
    }

    #[test]
    fn schur_coefficient_conventions() {
        assert_eq!(schur_coefficient(0.0, 0.0, 0.0), 2.0);
        assert_eq!(schur_coefficient(0.0, 0.0, 0.5), 2f64.powf(0.5));
        assert_eq!(schur_coefficient(0.0, 3.0, 0.5), 1.0);
        for (a, b, t) in [(0.1, 5.0, 0.3), (2.0, 2.0, 0.9), (1e-9, 1.0, 0.5)] {
            let v = schur_coefficient(a, b, t);
            assert!((1.0..=2f64.powf(1.0 - t) + 1e-15).contains(&v));
        }
    }

    #[test]
    fn schur_norm_estimates() {
        let lambdas = [0.01, 0.1, 1.0, 10.0];
        for (theta, expected) in [(0.0, 2.0), (1.0, 1.0)] {
            let r = schur_multiplier_norm_estimate(&lambdas, theta, 0.8, 50, 1).unwrap();
            assert!((r.constant - expected).abs() < 1e-12);
        }
        let (_, hi) = schur_coefficient_extremes(&lambdas, 0.5);
        let r = schur_multiplier_norm_estimate(&lambdas, 0.5, 2.0, 200, 1).unwrap();
        assert!((r.constant - hi).abs() < 1e-12);

        let a = schur_multiplier_norm_estimate(&lambdas, 0.5, f64::INFINITY, 200, 9).unwrap();
        let b = schur_multiplier_norm_estimate(&lambdas, 0.5, f64::INFINITY, 400, 9).unwrap();
        assert!(a.constant.is_finite() && b.constant >= a.constant && b.constant < 1.1 * a.constant);
    }

    #[test]
    fn regularization() {
        let space = TraceSpace::standard(3);
        let mut rng = stream(5, 0);
        let f0 = random_density(&space, &mut rng);
        for alpha in [0.5, 1.0, 2.0] {
            // the 1/(2 alpha) root amplifies rounding in small eigenvalues of f^{2 alpha}
            let g = regularize_density(&f0, &f0, alpha).unwrap();
            assert!(max_abs_diff(&g, &(f0.matrix() * c(2f64.powf(1.0 / (2.0 * alpha))))) < 1e-6);
        }
        for i in 0..100 {
            let f = random_density_spread(&space, &mut rng, 6.0);
            let f0 = random_density(&space, &mut rng);
            let alpha = [0.5, 1.0, 2.0][i % 3];
            let g = regularize_density(&f, &f0, alpha).unwrap();
            assert!(space.trace(&g).re <= 2.0 + 1e-9);
            let y = random_element(&space, &mut rng);
            assert!(regularized_quotient_ratio(&space, &f, &g, alpha, &y).unwrap() <= 2.0 + 1e-9);
        }
    }

    #[test]
    fn substitution_chain_consistency() {
        let space = TraceSpace::standard(4);
        let mut rng = stream(6, 0);
        let f = random_density(&space, &mut rng);
        let s = random_element(&space, &mut rng);
        for theta in [0.2, 0.5, 0.8] {
            let chain = substitution_chain(&f, 1.5, theta, &s).unwrap();
            let scale = crate::linalg::frobenius(&chain.z);
            assert!(max_abs_diff(&chain.z, &chain.z_from_t) < 1e-9 * scale.max(1.0));
            let back = JordanMap::new(&f, 1.5 * theta).unwrap().apply(&chain.z);
            assert!(max_abs_diff(&back, &s) < 1e-9);
        }
    }

    #[test]
    fn cq_at_q_equal_p_is_the_p_norm() {
        let space = TraceSpace::standard(2);
        let mut rng = stream(7, 0);
        let x: Vec<CMat> = (0..3).map(|_| random_element(&space, &mut rng)).collect();
        let system = OrthonormalSystem::scalar(SystemKind::Rademacher, 3).unwrap();
        let options = CqOptions { restarts: 1, max_iterations: 3, ..CqOptions::default() };
        let r = cq_upper(&space, &x, 0.7, 0.7, &system, &space.identity_density(), &options).unwrap();
        let s = crate::random_systems::mixed_norm_exact_rademacher(&space, &x, 0.7).unwrap().value;
        assert!((r.value - s).abs() < 1e-9 * s);
    }

    #[test]
    fn cq_scalar_and_zero() {
        let space = TraceSpace::standard(1);
        let system = OrthonormalSystem::scalar(SystemKind::Rademacher, 1).unwrap();
        let options = CqOptions { restarts: 1, max_iterations: 3, ..CqOptions::default() };
        let r = cq_upper(&space, &[diag_real(&[-1.7])], 0.5, 1.5, &system, &space.identity_density(), &options).unwrap();
        assert!((r.value - 1.7).abs() < 1e-12);

        let space = TraceSpace::standard(2);
        let system = OrthonormalSystem::scalar(SystemKind::Rademacher, 2).unwrap();
        let zero = vec![CMat::zeros(2, 2); 2];
        let r = cq_upper(&space, &zero, 0.5, 1.5, &system, &space.identity_density(), &options).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn cq_witness_reconstructs() {
        let space = TraceSpace::standard(3);
        let mut rng = stream(8, 0);
        let x: Vec<CMat> = (0..2).map(|_| random_element(&space, &mut rng)).collect();
        let system = OrthonormalSystem::scalar(SystemKind::Rademacher, 2).unwrap();
        let options = CqOptions { restarts: 2, max_iterations: 5, ..CqOptions::default() };
        let (p, q) = (0.5, 2.0);
        let r = cq_upper(&space, &x, p, q, &system, &space.identity_density(), &options).unwrap();
        assert!(reconstruction_defect(&r.f_witness, 1.0 / p - 1.0 / q, &x, &r.y_witness).unwrap() < 1e-8);
        let l2 = r.y_witness.iter().map(|y| space.tau_abs_pow(y, 2.0)).sum::<f64>().sqrt();
        assert!(r.value <= l2 * (1.0 + 1e-10));
    }

    #[test]
    fn steps_on_commuting_input() {
        let space = TraceSpace::standard(3);
        let x = vec![diag_real(&[1.0, 0.3, 2.0]), diag_real(&[-0.5, 1.0, 0.2]), diag_real(&[0.1, 0.4, -1.0])];
        let system = OrthonormalSystem::scalar(SystemKind::Rademacher, 3).unwrap();
        let budgets = StepBudgets { cq: CqOptions { restarts: 2, max_iterations: 10, ..CqOptions::default() }, ..StepBudgets::default() };
        let (p, q) = (0.5, 1.5);
        let report = steps_diagnostic(&space, &x, p, q, &system, &budgets, 3).unwrap();
        assert!(report.step3 <= 2f64.powf(report.theta) + 1e-6, "{report:?}");

        let zero = vec![CMat::zeros(3, 3); 3];
        let report = steps_diagnostic(&space, &zero, p, q, &system, &budgets, 3).unwrap();
        assert_eq!((report.c_p, report.c_2, report.c_q, report.step3), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn operator_norm_of_powered_identity() {
        let space = TraceSpace::normalized(2);
        let j = JordanMap::new(&space.identity_density(), 2.0).unwrap();
        assert!((operator_norm(j.powered()) - 1.0).abs() < 1e-14);
    }
}
