//! Finite matrix models of a semifinite von Neumann algebra with trace.
//!
//! A [`TraceSpace`] carries a weight vector `w`. The algebra is the commutant
//! of `diag(w)`: block-diagonal matrices whose blocks are the classes of equal
//! weight, and `tau(x) = sum_i w_i x_ii` is a faithful trace on it. Constant
//! weights give the full matrix algebra with a multiple of the usual trace.
//! Elements are plain [`CMat`]s; every routine takes the space explicitly.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::linalg::{c, from_eigen, from_eigen_real, hermitian_eigen, CMat};

/// Eigenvalues within this distance of zero are clipped to zero; the
/// distance scales with the spectral radius once that exceeds one.
pub const PSD_TOLERANCE: f64 = 1e-12;

/// Tolerance on `tau(f) = 1` for densities.
pub const TRACE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSpace {
    weights: Vec<f64>,
    block_of: Vec<usize>,
    uniform: bool,
}

impl TraceSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("trace space needs dimension at least 1"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(invalid(format!("trace weights must be finite and positive, got {w}")));
        }
        let mut classes: Vec<f64> = Vec::new();
        let block_of = weights
            .iter()
            .map(|w| match classes.iter().position(|v| v == w) {
                Some(k) => k,
                None => {
                    classes.push(*w);
                    classes.len() - 1
                }
            })
            .collect();
        let uniform = classes.len() == 1;
        Ok(Self { weights, block_of, uniform })
    }

    /// `M_n` with the usual trace.
    pub fn standard(n: usize) -> Self {
        Self::new(vec![1.0; n]).expect("n >= 1")
    }

    /// `M_n` with the normalized trace `tau(1) = 1`.
    pub fn normalized(n: usize) -> Self {
        Self::new(vec![1.0 / n as f64; n]).expect("n >= 1")
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// True when the algebra is all of `M_n`.
    pub fn is_full_matrix_algebra(&self) -> bool {
        self.uniform
    }

    pub fn same_block(&self, i: usize, j: usize) -> bool {
        self.block_of[i] == self.block_of[j]
    }

    /// Index sets of the diagonal blocks.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let count = self.block_of.iter().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); count];
        for (i, &b) in self.block_of.iter().enumerate() {
            blocks[b].push(i);
        }
        blocks
    }

    /// Zeroes the entries that couple different weight classes.
    pub fn project(&self, x: &CMat) -> CMat {
        if self.uniform {
            return x.clone();
        }
        CMat::from_fn(x.nrows(), x.ncols(), |i, j| if self.same_block(i, j) { x[(i, j)] } else { c(0.0) })
    }

    pub fn check_element(&self, x: &CMat) -> Result<()> {
        let n = self.dim();
        if x.nrows() != n || x.ncols() != n {
            return Err(invalid(format!("expected a {n}x{n} matrix, got {}x{}", x.nrows(), x.ncols())));
        }
        if x.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(invalid("element has non-finite entries"));
        }
        if !self.uniform {
            let scale = crate::linalg::frobenius(x).max(1.0);
            for i in 0..n {
                for j in 0..n {
                    if !self.same_block(i, j) && x[(i, j)].norm() > 1e-10 * scale {
                        return Err(Error::NotInAlgebra { entry: x[(i, j)].norm() });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn trace(&self, x: &CMat) -> Complex64 {
        self.weights.iter().enumerate().map(|(i, w)| x[(i, i)] * *w).sum()
    }

    /// `tau(1)`.
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `tau(|x|^p)` for finite `p > 0`.
    pub fn tau_abs_pow(&self, x: &CMat, p: f64) -> f64 {
        debug_assert!(p > 0.0 && p.is_finite());
        if p == 2.0 {
            return (0..x.ncols())
                .map(|j| self.weights[j] * x.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>())
                .sum();
        }
        if self.uniform {
            let w = self.weights[0];
            let s = x.clone().singular_values();
            return w * s.iter().filter(|&&v| v > 0.0).map(|v| v.powf(p)).sum::<f64>();
        }
        let svd = x.clone().svd(false, true);
        let v_t = svd.v_t.expect("requested right vectors");
        svd.singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0.0)
            .map(|(k, s)| {
                let mass: f64 = (0..x.ncols()).map(|j| self.weights[j] * v_t[(k, j)].norm_sqr()).sum();
                s.powf(p) * mass
            })
            .sum()
    }

    /// `||x||_p = tau(|x|^p)^{1/p}`; `p = inf` is the operator norm.
    pub fn quasi_norm(&self, x: &CMat, p: f64) -> f64 {
        assert!(p > 0.0, "quasi-norm exponent must be positive");
        if p.is_infinite() {
            return crate::linalg::operator_norm(x);
        }
        self.tau_abs_pow(x, p).powf(1.0 / p)
    }

    /// `tau(a^r)` for a positive semidefinite `a`, negative rounding clipped.
    pub fn tau_psd_pow(&self, a: &CMat, r: f64) -> f64 {
        let (values, vectors) = hermitian_eigen(a);
        let top = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let cut = PSD_TOLERANCE * top.max(1.0);
        let powered = |v: f64| if v > cut { v.powf(r) } else { 0.0 };
        if self.uniform {
            return self.weights[0] * values.iter().map(|&v| powered(v)).sum::<f64>();
        }
        values
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let mass: f64 = (0..a.nrows()).map(|j| self.weights[j] * vectors[(j, k)].norm_sqr()).sum();
                powered(v) * mass
            })
            .sum()
    }

    /// `||a^{1/2}||_q` for a positive semidefinite `a`.
    pub fn sqrt_norm(&self, a: &CMat, q: f64) -> f64 {
        if q.is_infinite() {
            let (values, _) = hermitian_eigen(a);
            return values.last().copied().unwrap_or(0.0).max(0.0).sqrt();
        }
        self.tau_psd_pow(a, q / 2.0).powf(1.0 / q)
    }

    /// Normalized identity `1 / tau(1)`.
    pub fn identity_density(&self) -> Density {
        let n = self.dim();
        Density::new(self, &(CMat::identity(n, n) * c(1.0 / self.total_mass()))).expect("identity density")
    }

    /// `M_d (x) M` with the normalized trace on `M_d`; index `(a, i)` maps to `a * n + i`.
    pub fn tensor_normalized(&self, d: usize) -> TraceSpace {
        let weights = (0..d).flat_map(|_| self.weights.iter().map(move |w| w / d as f64)).collect();
        TraceSpace::new(weights).expect("positive weights")
    }

    /// `M_2(M)` with trace `Tr (x) tau`.
    pub fn doubled(&self) -> TraceSpace {
        let weights = self.weights.iter().chain(self.weights.iter()).copied().collect();
        TraceSpace::new(weights).expect("positive weights")
    }
}

/// Eigen-decomposition of a positive semidefinite matrix with clipping.
pub fn psd_eigen(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let (mut values, vectors) = hermitian_eigen(a);
    let top = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cut = PSD_TOLERANCE * top.max(1.0);
    for v in values.iter_mut() {
        if *v < -cut {
            return Err(Error::NotPositive { eigenvalue: *v });
        }
        if *v <= cut {
            *v = 0.0;
        }
    }
    Ok((values, vectors))
}

fn real_power(lambda: f64, beta: f64) -> f64 {
    if lambda == 0.0 {
        0.0
    } else {
        lambda.powf(beta)
    }
}

/// `f^beta` by functional calculus, with `0^beta = 0` (so `f^0` is the support projection).
pub fn power(f: &CMat, beta: f64) -> Result<CMat> {
    let (values, vectors) = psd_eigen(f)?;
    powered_from_eigen(&values, &vectors, beta)
}

fn powered_from_eigen(values: &[f64], vectors: &CMat, beta: f64) -> Result<CMat> {
    if beta < 0.0 {
        if let Some(&v) = values.iter().find(|&&v| v == 0.0) {
            return Err(Error::NegativePowerOfSingular { min_eigenvalue: v });
        }
    }
    let powered: Vec<f64> = values.iter().map(|&v| real_power(v, beta)).collect();
    Ok(from_eigen_real(&powered, vectors))
}

/// Polar decomposition `x = u |x|`, `u` the partial isometry from the support of `|x|`.
pub fn polar(x: &CMat) -> (CMat, CMat) {
    let n = x.ncols();
    let svd = x.clone().svd(true, true);
    let u_left = svd.u.expect("left vectors");
    let v_t = svd.v_t.expect("right vectors");
    let top = svd.singular_values.iter().fold(0.0_f64, |m, &s| m.max(s));
    let cut = 1e-12 * top.max(f64::MIN_POSITIVE);
    let mut u = CMat::zeros(x.nrows(), n);
    let mut abs = CMat::zeros(n, n);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let left = u_left.column(k);
        let right_adj = v_t.row(k);
        let right = right_adj.adjoint();
        abs += &right * right_adj * c(s);
        if s > cut {
            u += left * right_adj;
        }
    }
    (u, abs)
}

/// Quasi-triangle constant `max(2^{1/p - 1}, 1)`.
pub fn chi(p: f64) -> f64 {
    if p.is_infinite() {
        return 1.0;
    }
    (2f64).powf(1.0 / p - 1.0).max(1.0)
}

/// A density: positive, `tau(f) = 1`, in the algebra of its trace space.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    matrix: CMat,
    eigenvalues: Vec<f64>,
    eigenvectors: CMat,
    full_support: bool,
}

impl Density {
    pub fn new(space: &TraceSpace, matrix: &CMat) -> Result<Self> {
        space.check_element(matrix)?;
        let defect = crate::linalg::max_abs_diff(matrix, &matrix.adjoint());
        if defect > 1e-10 * crate::linalg::frobenius(matrix).max(1.0) {
            return Err(invalid(format!("density is not Hermitian (defect {defect:e})")));
        }
        let (eigenvalues, eigenvectors) = psd_eigen(matrix)?;
        let mass = space.trace(matrix).re;
        if (mass - 1.0).abs() > TRACE_TOLERANCE {
            return Err(invalid(format!("density must have trace 1, got {mass}")));
        }
        let full_support = eigenvalues.iter().all(|&v| v > 0.0);
        let matrix = from_eigen_real(&eigenvalues, &eigenvectors);
        Ok(Self { matrix, eigenvalues, eigenvectors, full_support })
    }

    /// `a / tau(a)` for a nonzero positive `a`.
    pub fn normalized(space: &TraceSpace, a: &CMat) -> Result<Self> {
        let mass = space.trace(a).re;
        if !(mass > 0.0) {
            return Err(invalid("cannot normalize an element of zero trace"));
        }
        Self::new(space, &(crate::linalg::hermitian_part(a) / c(mass)))
    }

    /// `h h* / tau(h h*)`.
    pub fn from_factor(space: &TraceSpace, h: &CMat) -> Result<Self> {
        let h = space.project(h);
        Self::normalized(space, &(&h * h.adjoint()))
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    /// Eigenvalues, ascending, clipped at zero.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMat {
        &self.eigenvectors
    }

    pub fn full_support(&self) -> bool {
        self.full_support
    }

    pub fn power(&self, beta: f64) -> Result<CMat> {
        powered_from_eigen(&self.eigenvalues, &self.eigenvectors, beta)
    }

    /// `f^z` for complex `z`; zero eigenvalues map to zero.
    pub fn power_complex(&self, z: Complex64) -> CMat {
        let values: Vec<Complex64> = self
            .eigenvalues
            .iter()
            .map(|&v| if v == 0.0 { c(0.0) } else { (z * v.ln()).exp() })
            .collect();
        from_eigen(&values, &self.eigenvectors)
    }

    /// `lambda_i^beta` in the eigenbasis order.
    pub fn spectral_powers(&self, beta: f64) -> Vec<f64> {
        self.eigenvalues.iter().map(|&v| real_power(v, beta)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, identity, max_abs_diff, unit};
    use crate::sampling::{random_density, random_element, stream};

    #[test]
    fn trace_examples() {
        assert_eq!(TraceSpace::standard(3).trace(&identity(3)).re, 3.0);
        assert!((TraceSpace::normalized(3).trace(&identity(3)).re - 1.0).abs() < 1e-15);
        assert_eq!(TraceSpace::standard(2).trace(&diag_real(&[1.0, -1.0])).re, 0.0);
    }

    #[test]
    fn quasi_norm_examples() {
        let std2 = TraceSpace::standard(2);
        assert!((std2.quasi_norm(&diag_real(&[3.0, 4.0]), 2.0) - 5.0).abs() < 1e-14);
        let norm4 = TraceSpace::normalized(4);
        for p in [0.25, 0.5, 1.0, 3.0, f64::INFINITY] {
            assert!((norm4.quasi_norm(&identity(4), p) - 1.0).abs() < 1e-13, "p = {p}");
        }
        // rank-one projection at p = 1/2: singular values (1, 0)
        let proj = unit(2, 0, 0);
        assert!((std2.quasi_norm(&proj, 0.5) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quasi_norm_matches_power_then_trace() {
        let space = TraceSpace::new(vec![0.5, 0.5, 2.0, 1.0]).unwrap();
        let mut rng = stream(7, 0);
        for _ in 0..20 {
            let x = random_element(&space, &mut rng);
            for p in [0.3, 0.5, 1.0, 1.5, 2.0, 3.0] {
                let abs_p = power(&(x.adjoint() * &x), p / 2.0).unwrap();
                let oracle = space.trace(&abs_p).re.powf(1.0 / p);
                let value = space.quasi_norm(&x, p);
                assert!((value - oracle).abs() <= 1e-8 * oracle, "p={p}: {value} vs {oracle}");
            }
        }
    }

    #[test]
    fn power_examples() {
        let f = diag_real(&[4.0, 9.0]);
        assert!(max_abs_diff(&power(&f, 0.5).unwrap(), &diag_real(&[2.0, 3.0])) < 1e-14);
        assert!(max_abs_diff(&power(&f, 1.0).unwrap(), &f) < 1e-13);
        let nearly_singular = diag_real(&[1.0, 1e-18]);
        let root = power(&nearly_singular, 0.5).unwrap();
        assert!(max_abs_diff(&root, &diag_real(&[1.0, 0.0])) < 1e-15);
        assert_eq!(
            power(&diag_real(&[1.0, 0.0]), -0.5),
            Err(Error::NegativePowerOfSingular { min_eigenvalue: 0.0 })
        );
        assert!(matches!(power(&diag_real(&[1.0, -1.0]), 0.5), Err(Error::NotPositive { .. })));
    }

    #[test]
    fn power_composes() {
        let space = TraceSpace::standard(4);
        let mut rng = stream(3, 1);
        let f = random_density(&space, &mut rng);
        for (a, b) in [(0.5, 2.0), (-0.7, 1.3), (2.5, -0.4)] {
            let lhs = power(&f.power(a).unwrap(), b).unwrap();
            let rhs = f.power(a * b).unwrap();
            assert!(max_abs_diff(&lhs, &rhs) < 1e-8 * crate::linalg::frobenius(&rhs).max(1.0));
        }
    }

    #[test]
    fn polar_examples() {
        let x = diag_real(&[2.0, 0.0]);
        let (u, abs) = polar(&x);
        assert!(max_abs_diff(&u, &diag_real(&[1.0, 0.0])) < 1e-14);
        assert!(max_abs_diff(&abs, &x) < 1e-14);

        let (u, abs) = polar(&diag_real(&[-2.0]));
        assert!((u[(0, 0)].re + 1.0).abs() < 1e-14 && (abs[(0, 0)].re - 2.0).abs() < 1e-14);

        let mut rng = stream(11, 0);
        let x = random_element(&TraceSpace::standard(4), &mut rng);
        let (u, abs) = polar(&x);
        assert!(crate::linalg::operator_norm(&(&u * &abs - &x)) < 1e-10);
        assert!(max_abs_diff(&(u.adjoint() * &u), &identity(4)) < 1e-10);
    }

    #[test]
    fn chi_values() {
        assert_eq!(chi(0.5), 2.0);
        assert_eq!(chi(1.0), 1.0);
        assert_eq!(chi(2.0), 1.0);
        assert_eq!(chi(f64::INFINITY), 1.0);
    }

    #[test]
    fn weighted_space_rejects_cross_block_entries() {
        let space = TraceSpace::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(space.check_element(&unit(2, 0, 1)), Err(Error::NotInAlgebra { .. })));
        assert!(space.check_element(&unit(2, 1, 1)).is_ok());
        assert!(TraceSpace::new(vec![1.0, 0.0]).is_err());
        assert!(TraceSpace::new(vec![]).is_err());
    }

    #[test]
    fn density_validation() {
        let space = TraceSpace::standard(2);
        assert!(Density::new(&space, &diag_real(&[0.5, 0.5])).unwrap().full_support());
        assert!(!Density::new(&space, &diag_real(&[1.0, 0.0])).unwrap().full_support());
        assert!(Density::new(&space, &diag_real(&[0.7, 0.5])).is_err());
        assert!(Density::new(&space, &diag_real(&[1.5, -0.5])).is_err());
    }
}
