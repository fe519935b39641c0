//! Change of density for operators `u: H -> L_p`: the quantity
//! `D_{f^a}(T) = ||J(f^a)^{-1} T||_2` with `a = 1/p - 1/2`, its exact worst
//! case over the unit sphere of `H`, and a minimax solver over finitely
//! supported measures of densities.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::extrapolation::{regularize_density, JordanMap};
use crate::linalg::{c, hermitian_eigen, hermitian_part, CMat};
use crate::lp::{power, Density, TraceSpace};
use crate::optim::{minimize, DescentOptions};
use crate::sampling::{random_density, random_unit_vector, stream};

/// Relative tolerance on the total weight of a [`DensityMeasure`].
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

/// A linear map `C^m -> L_p(tau)` given by the images of the standard basis.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMapIntoLp {
    space: TraceSpace,
    images: Vec<CMat>,
    p: f64,
}

impl LinearMapIntoLp {
    /// `p` must lie in `(0, 2)` so that `a = 1/p - 1/2 > 0`.
    pub fn new(space: &TraceSpace, images: Vec<CMat>, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 2.0) {
            return Err(invalid(format!("p must lie in (0, 2), got {p}")));
        }
        if images.is_empty() {
            return Err(invalid("a linear map needs at least one basis image"));
        }
        for t in &images {
            if t.nrows() != space.dim() || t.ncols() != space.dim() {
                return Err(invalid(format!("image of shape {}x{} in a space of dimension {}", t.nrows(), t.ncols(), space.dim())));
            }
            space.check_element(t)?;
        }
        Ok(Self { space: space.clone(), images, p })
    }

    pub fn space(&self) -> &TraceSpace {
        &self.space
    }

    pub fn images(&self) -> &[CMat] {
        &self.images
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn domain_dim(&self) -> usize {
        self.images.len()
    }

    /// `1/p - 1/2`.
    pub fn alpha(&self) -> f64 {
        1.0 / self.p - 0.5
    }

    pub fn apply(&self, x: &[Complex64]) -> CMat {
        let n = self.space.dim();
        self.images.iter().zip(x).fold(CMat::zeros(n, n), |acc, (t, &xk)| acc + t * xk)
    }

    /// Lower estimate of `||u||` from the basis vectors and `samples` random
    /// unit vectors.
    pub fn norm_estimate(&self, samples: u64, seed: u64) -> f64 {
        let m = self.domain_dim();
        let basis = (0..m).map(|k| self.space.quasi_norm(&self.images[k], self.p));
        let random = (0..samples).into_par_iter().map(|i| {
            let x = random_unit_vector(&mut stream(seed, i), m);
            self.space.quasi_norm(&self.apply(&x), self.p)
        });
        let random_max = random.reduce(|| 0.0, f64::max);
        basis.fold(random_max, f64::max)
    }

    /// The map rescaled by its sampled norm, with that norm.
    pub fn normalized(&self, samples: u64, seed: u64) -> (Self, f64) {
        let norm = self.norm_estimate(samples, seed);
        if norm == 0.0 {
            return (self.clone(), 0.0);
        }
        let images = self.images.iter().map(|t| t / c(norm)).collect();
        (Self { space: self.space.clone(), images, p: self.p }, norm)
    }
}

fn l2_norm(space: &TraceSpace, y: &CMat) -> f64 {
    space.tau_abs_pow(y, 2.0).max(0.0).sqrt()
}

/// `D_{g^a}(T)` for any positive `g`; infinite when `T` is outside the range
/// of `J(g^a)`.
pub fn d_value_positive(space: &TraceSpace, g: &CMat, alpha: f64, t: &CMat) -> Result<f64> {
    let map = JordanMap::from_positive(g, alpha)?;
    Ok(match map.invert(t) {
        Ok(y) => l2_norm(space, &y),
        Err(_) => f64::INFINITY,
    })
}

/// `D_{f^a}(T) = ||J(f^a)^{-1} T||_2`, infinite outside the range.
pub fn d_value(space: &TraceSpace, f: &Density, alpha: f64, t: &CMat) -> f64 {
    d_value_positive(space, f.matrix(), alpha, t).unwrap_or(f64::INFINITY)
}

/// Gram matrix `G_kl = tau(Y_k^* Y_l)` of `Y_k = J(f^a)^{-1} u(e_k)`, so that
/// `D_{f^a}(u(x))^2 = x^* G x`. `None` when some image is outside the range.
pub fn gram_matrix(f: &Density, u: &LinearMapIntoLp) -> Option<CMat> {
    let map = JordanMap::new(f, u.alpha()).ok()?;
    let ys: Vec<CMat> = u.images.iter().map(|t| map.invert(t)).collect::<Result<_>>().ok()?;
    let m = ys.len();
    let mut g = CMat::zeros(m, m);
    for k in 0..m {
        for l in k..m {
            let v = u.space.trace(&(ys[k].adjoint() * &ys[l]));
            g[(k, l)] = v;
            g[(l, k)] = v.conj();
        }
    }
    Some(g)
}

fn top_eigen(q: &CMat) -> (f64, Vec<Complex64>) {
    let (values, vectors) = hermitian_eigen(q);
    let last = values.len() - 1;
    (values[last].max(0.0), vectors.column(last).iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorstCase {
    pub value: f64,
    pub x_witness: Vec<Complex64>,
}

/// `sup_{|x| = 1} D_{f^a}(u(x))`, the top singular value of
/// `x -> J(f^a)^{-1} u(x)` into `L_2(tau)`, with a maximizing `x`.
pub fn worst_case_d(f: &Density, u: &LinearMapIntoLp) -> WorstCase {
    let m = u.domain_dim();
    match gram_matrix(f, u) {
        Some(g) => {
            let (top, x) = top_eigen(&g);
            WorstCase { value: top.sqrt(), x_witness: x }
        }
        None => {
            let alpha = u.alpha();
            let k = (0..m).find(|&k| d_value(&u.space, f, alpha, &u.images[k]).is_infinite()).unwrap_or(0);
            let mut x = vec![Complex64::new(0.0, 0.0); m];
            x[k] = Complex64::new(1.0, 0.0);
            WorstCase { value: f64::INFINITY, x_witness: x }
        }
    }
}

/// Probability measure with finitely many full-support atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMeasure {
    atoms: Vec<(Density, f64)>,
}

impl DensityMeasure {
    pub fn new(atoms: Vec<(Density, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid("a measure needs at least one atom"));
        }
        if let Some((_, w)) = atoms.iter().find(|(_, w)| !(*w > 0.0 && w.is_finite())) {
            return Err(invalid(format!("atom weights must be positive, got {w}")));
        }
        if atoms.iter().any(|(f, _)| !f.full_support()) {
            return Err(invalid("atoms must have full support"));
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(invalid(format!("atom weights must sum to 1, got {total}")));
        }
        Ok(Self { atoms })
    }

    pub fn single(f: Density) -> Result<Self> {
        Self::new(vec![(f, 1.0)])
    }

    pub fn atoms(&self) -> &[(Density, f64)] {
        &self.atoms
    }

    /// `x -> sum_i w_i D_{f_i^a}(u(x))^2` as a Hermitian matrix. `None` when
    /// some atom does not contain the range of `u`.
    pub fn quadratic_form(&self, u: &LinearMapIntoLp) -> Option<CMat> {
        let m = u.domain_dim();
        let mut q = CMat::zeros(m, m);
        for (f, w) in &self.atoms {
            q += gram_matrix(f, u)? * c(*w);
        }
        Some(q)
    }

    /// `sqrt` of the top eigenvalue of [`Self::quadratic_form`].
    pub fn certified_constant(&self, u: &LinearMapIntoLp) -> f64 {
        self.quadratic_form(u).map_or(f64::INFINITY, |q| top_eigen(&q).0.sqrt())
    }

    /// The single density `sum_i w_i f_i`. It certifies at least as well as
    /// the measure only when `t -> t^{-2a}` is operator convex, i.e. `p >= 1`.
    pub fn barycenter(&self, space: &TraceSpace, p: f64) -> Result<Density> {
        if p < 1.0 {
            return Err(invalid(format!("the barycenter shortcut needs p >= 1, got {p}")));
        }
        Ok(self.mean(space))
    }

    fn mean(&self, space: &TraceSpace) -> Density {
        let n = space.dim();
        let sum = self.atoms.iter().fold(CMat::zeros(n, n), |acc, (f, w)| acc + f.matrix() * c(*w));
        Density::normalized(space, &sum).expect("convex combination of densities")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaureyFit {
    pub measure: DensityMeasure,
    pub c_certified: f64,
    /// Best certified constant after each pool addition.
    pub history: Vec<f64>,
}

/// Weight of the normalized identity mixed into greedy atoms so they keep
/// full support.
const GREEDY_MIXING: f64 = 1e-3;

/// Mass spread uniformly over the pool after each weight update.
const WEIGHT_FLOOR: f64 = 1e-9;
/// Inverse temperature of the eigenvalue softmax, relative to the top eigenvalue.
const SOFTMAX_SHARPNESS: f64 = 50.0;

/// `(1/b) log sum exp(b l_i)` with `b` relative to the top eigenvalue.
fn smoothed_top(values: &[f64]) -> f64 {
    let top = values[values.len() - 1];
    if !(top > 0.0) {
        return 0.0;
    }
    let beta = SOFTMAX_SHARPNESS / top;
    top + values.iter().map(|v| (beta * (v - top)).exp()).sum::<f64>().ln() / beta
}

fn softmax_state(values: &[f64], vectors: &CMat) -> CMat {
    let top = values[values.len() - 1];
    let beta = SOFTMAX_SHARPNESS / top;
    let masses: Vec<f64> = values.iter().map(|v| (beta * (v - top)).exp()).collect();
    let total: f64 = masses.iter().sum();
    let probs: Vec<f64> = masses.iter().map(|m| m / total).collect();
    crate::linalg::from_eigen_real(&probs, vectors)
}

struct Pool<'a> {
    u: &'a LinearMapIntoLp,
    atoms: Vec<Density>,
    grams: Vec<CMat>,
    weights: Vec<f64>,
    best: (f64, Vec<f64>),
    /// Softmax state of the best form, weighting the worst directions.
    dual: CMat,
}

impl<'a> Pool<'a> {
    fn new(u: &'a LinearMapIntoLp) -> Self {
        let m = u.domain_dim();
        Self {
            u,
            atoms: Vec::new(),
            grams: Vec::new(),
            weights: Vec::new(),
            best: (f64::INFINITY, Vec::new()),
            dual: CMat::identity(m, m) / c(m as f64),
        }
    }

    fn form(&self, weights: &[f64]) -> CMat {
        let m = self.u.domain_dim();
        self.grams.iter().zip(weights).fold(CMat::zeros(m, m), |acc, (g, w)| acc + g * c(*w))
    }

    /// Eigen-decomposition of the form at `weights`, recording it when it
    /// improves the best certificate.
    fn consider(&mut self, weights: &[f64]) -> (Vec<f64>, CMat) {
        let (values, vectors) = hermitian_eigen(&self.form(weights));
        let top = values[values.len() - 1].max(0.0);
        if top < self.best.0 {
            self.best = (top, weights.to_vec());
        }
        (values, vectors)
    }
    /// Adds `f` unless it fails to contain the range of `u`. Returns whether
    /// it was added.
    fn push(&mut self, f: Density) -> bool {
        if !f.full_support() {
            return false;
        }
        let Some(g) = gram_matrix(&f, self.u) else { return false };
        let k = self.atoms.len();
        self.atoms.push(f);
        self.grams.push(g);
        self.best.1.push(0.0);
        let mut vertex = vec![0.0; k + 1];
        vertex[k] = 1.0;
        self.consider(&vertex);
        let share = 1.0 / (k + 1) as f64;
        for w in &mut self.weights {
            *w *= 1.0 - share;
        }
        self.weights.push(if k == 0 { 1.0 } else { share });
        true
    }

    /// Exponentiated-gradient descent on the simplex for the smoothed top
    /// eigenvalue `(1/b) log tr exp(b Q(w))`. The softmax state
    /// `exp(b Q) / tr exp(b Q)` at the best weights serves as the dual.
    fn descend(&mut self, iterations: usize) {
        for t in 0..iterations {
            let weights = self.weights.clone();
            let (values, vectors) = self.consider(&weights);
            let top = values[values.len() - 1];
            if !(top > 0.0) {
                break;
            }
            let rho = softmax_state(&values, &vectors);
            let slopes: Vec<f64> = self.grams.par_iter().map(|g| (&rho * g).trace().re.max(0.0)).collect();
            let eta = 1.0 / ((t + 1) as f64).sqrt();
            for (w, s) in self.weights.iter_mut().zip(&slopes) {
                *w *= (-eta * s / top).exp();
            }
            let total: f64 = self.weights.iter().sum();
            let k = self.weights.len() as f64;
            for w in &mut self.weights {
                *w = (1.0 - WEIGHT_FLOOR) * *w / total + WEIGHT_FLOOR / k;
            }
        }
        let weights = self.weights.clone();
        self.consider(&weights);
        let best = self.best.1.clone();
        let (values, vectors) = hermitian_eigen(&self.form(&best));
        if values[values.len() - 1] > 0.0 {
            self.dual = softmax_state(&values, &vectors);
        }
    }

    /// Best response `f ∝ B^{p/2}` to the averaged worst directions, where
    /// `B = sum rho_lk (U_k^* U_l + U_l U_k^*) / 2` symmetrizes `|u(x)|^2`.
    fn best_response(&self) -> Option<Density> {
        let space = self.u.space();
        let n = space.dim();
        let m = self.u.domain_dim();
        let images = self.u.images();
        let mut b = CMat::zeros(n, n);
        for k in 0..m {
            for l in 0..m {
                let r = self.dual[(l, k)];
                if r == Complex64::new(0.0, 0.0) {
                    continue;
                }
                b += (images[k].adjoint() * &images[l] + &images[l] * images[k].adjoint()) * (r * 0.5);
            }
        }
        let b = hermitian_part(&b);
        let f = power(&b, self.u.p() / 2.0).ok()?;
        let f = Density::normalized(space, &f).ok()?;
        let identity = space.identity_density();
        let mixed = f.matrix() * c(1.0 - GREEDY_MIXING) + identity.matrix() * c(GREEDY_MIXING);
        Density::normalized(space, &mixed).ok()
    }

    /// Local descent from `start` over factors `h`, `f = h h^* / tau(h h^*)`,
    /// on the smoothed top eigenvalue of the single-atom form, with
    /// forward-difference gradients.
    fn polish(&self, start: &Density, iterations: usize) -> Option<Density> {
        let space = self.u.space();
        let n = space.dim();
        let w = space.weights();
        let objective_at = |h: &CMat| -> f64 {
            let Ok(f) = Density::from_factor(space, h) else { return f64::INFINITY };
            if !f.full_support() {
                return f64::INFINITY;
            }
            match gram_matrix(&f, self.u) {
                Some(g) => {
                    let (values, _) = hermitian_eigen(&g);
                    smoothed_top(&values)
                }
                None => f64::INFINITY,
            }
        };
        let objective = |x: &[CMat]| {
            let h = &x[0];
            let value = objective_at(h);
            let mut grad = CMat::zeros(n, n);
            if value.is_finite() {
                let step = 1e-7 * crate::linalg::frobenius(h).max(1e-300);
                for j in 0..n {
                    for i in 0..n {
                        if !space.same_block(i, j) {
                            continue;
                        }
                        let mut partial = [0.0; 2];
                        for (slot, dir) in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)].into_iter().enumerate() {
                            let mut moved = h.clone();
                            moved[(i, j)] += dir * step;
                            partial[slot] = (objective_at(&moved) - value) / step;
                        }
                        if partial.iter().all(|d| d.is_finite()) {
                            grad[(i, j)] = Complex64::new(partial[0], partial[1]) / w[j];
                        }
                    }
                }
            }
            (value, vec![grad])
        };
        let h0 = start.power(0.5).ok()?;
        let scale = space.tau_abs_pow(&h0, 2.0).sqrt();
        let options = DescentOptions { max_iterations: iterations, gradient_tolerance: 1e-12, initial_step: 0.05 * scale };
        let outcome = minimize(space, vec![h0], objective, &options);
        Density::from_factor(space, &outcome.point[0]).ok()
    }

    fn current_mean(&self) -> Density {
        let space = self.u.space();
        let n = space.dim();
        let sum = self.atoms.iter().zip(&self.weights).fold(CMat::zeros(n, n), |acc, (f, w)| acc + f.matrix() * c(*w));
        Density::normalized(space, &sum).expect("convex combination of densities")
    }

    fn into_fit(self, history: Vec<f64>) -> MaureyFit {
        let (top, weights) = self.best;
        let atoms: Vec<(Density, f64)> = self.atoms.into_iter().zip(weights).filter(|(_, w)| *w > 0.0).collect();
        let measure = DensityMeasure { atoms };
        MaureyFit { measure, c_certified: top.sqrt(), history }
    }
}

/// Minimizes the top eigenvalue of `x -> sum_i w_i D_{f_i^a}(u(x))^2` over
/// weights on a pool grown one atom at a time: the normalized identity,
/// then in turn a greedy best response, its regularization against the
/// identity, the mean of the current measure, that mean after local descent
/// on its own worst case, and a random density. The certificate never
/// increases with `pool_size`.
pub fn maurey_fit(u: &LinearMapIntoLp, pool_size: usize, iterations: usize, seed: u64) -> MaureyFit {
    maurey_fit_seeded(u, &[], pool_size, iterations, seed)
}

/// As [`maurey_fit`], with `initial` atoms placed right after the identity.
pub fn maurey_fit_seeded(u: &LinearMapIntoLp, initial: &[Density], pool_size: usize, iterations: usize, seed: u64) -> MaureyFit {
    let space = u.space();
    let identity = space.identity_density();
    let alpha = u.alpha();
    let mut pool = Pool::new(u);
    let mut history = Vec::new();
    let mut candidates = std::iter::once(identity.clone()).chain(initial.iter().cloned());
    let mut step: u64 = 0;
    while pool.atoms.len() < pool_size.max(1) && step < 10 * pool_size.max(1) as u64 + initial.len() as u64 + 8 {
        let candidate = match candidates.next() {
            Some(f) => Some(f),
            None => {
                step += 1;
                match step % 5 {
                    1 => pool.best_response(),
                    2 => pool.best_response().and_then(|f| {
                        let g = regularize_density(&f, &identity, alpha).ok()?;
                        Density::normalized(space, &g).ok()
                    }),
                    3 => Some(pool.current_mean()),
                    4 => pool.polish(&pool.current_mean(), iterations),
                    _ => Some(random_density(space, &mut stream(seed, step))),
                }
            }
        };
        if let Some(f) = candidate {
            if pool.push(f) {
                pool.descend(iterations);
                history.push(pool.best.0.sqrt());
            }
        }
    }
    pool.into_fit(history)
}
