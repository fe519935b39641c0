//! The Khintchine triple norm `|||x|||_q`.
//!
//! For `q >= 2` it is the larger of the column and row square-function norms.
//! For `q <= 2` it is the infimum over splittings `x_k = a_k + b_k` of
//! `||(sum a_k* a_k)^{1/2}||_q + ||(sum b_k b_k*)^{1/2}||_q`, which is
//! approached from above by multistart gradient descent.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::linalg::{c, from_eigen_real, hermitian_eigen, operator_norm, CMat};
use crate::lp::TraceSpace;
use crate::optim::{minimize, tau_norm, DescentOptions};
use crate::sampling::{random_element, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Certification {
    Exact,
    UpperBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub a: Vec<CMat>,
    pub b: Vec<CMat>,
}

impl Decomposition {
    pub fn from_column_part(x: &[CMat], a: Vec<CMat>) -> Self {
        let b = x.iter().zip(&a).map(|(xk, ak)| xk - ak).collect();
        Self { a, b }
    }

    /// Largest entry of `a_k + b_k - x_k`.
    pub fn defect(&self, x: &[CMat]) -> f64 {
        x.iter()
            .zip(self.a.iter().zip(&self.b))
            .map(|(xk, (ak, bk))| crate::linalg::max_abs_diff(&(ak + bk), xk))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleNormResult {
    pub value: f64,
    pub witness: Option<Decomposition>,
    pub certified: Certification,
}

pub fn column_square(x: &[CMat]) -> CMat {
    let n = x[0].nrows();
    x.iter().fold(CMat::zeros(n, n), |acc, xk| acc + xk.adjoint() * xk)
}

pub fn row_square(x: &[CMat]) -> CMat {
    let n = x[0].nrows();
    x.iter().fold(CMat::zeros(n, n), |acc, xk| acc + xk * xk.adjoint())
}

/// `||(sum x_k* x_k)^{1/2}||_q`.
pub fn column_value(space: &TraceSpace, x: &[CMat], q: f64) -> f64 {
    space.sqrt_norm(&column_square(x), q)
}

/// `||(sum x_k x_k*)^{1/2}||_q`.
pub fn row_value(space: &TraceSpace, x: &[CMat], q: f64) -> f64 {
    space.sqrt_norm(&row_square(x), q)
}

fn check_tuple(space: &TraceSpace, x: &[CMat]) -> Result<()> {
    if x.is_empty() {
        return Err(invalid("tuple must be nonempty"));
    }
    x.iter().try_for_each(|xk| space.check_element(xk))
}

/// `max(column, row)` for `q >= 2`.
pub fn row_column_value(space: &TraceSpace, x: &[CMat], q: f64) -> Result<TripleNormResult> {
    if !(q >= 2.0) {
        return Err(invalid(format!("the row/column formula needs q >= 2, got {q}")));
    }
    check_tuple(space, x)?;
    let value = column_value(space, x, q).max(row_value(space, x, q));
    Ok(TripleNormResult { value, witness: None, certified: Certification::Exact })
}

pub fn decomposition_objective(space: &TraceSpace, d: &Decomposition, q: f64) -> f64 {
    column_value(space, &d.a, q) + row_value(space, &d.b, q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleNormOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Iterations per smoothing stage.
    pub max_iterations: usize,
    /// For `1 <= q <= 2`, report `Exact` when every restart reaches a
    /// stationary point and all restarts agree.
    pub certify_convex: bool,
}

impl Default for TripleNormOptions {
    fn default() -> Self {
        Self { restarts: 4, seed: 0, max_iterations: 300, certify_convex: false }
    }
}

const SMOOTHING: [f64; 3] = [1e-3, 1e-5, 1e-8];

/// `tau((A + eps2)^r)` and `(A + eps2)^{r-1}` for positive `A`.
fn smoothed_power(space: &TraceSpace, a: &CMat, eps2: f64, r: f64) -> (f64, CMat) {
    let (values, vectors) = hermitian_eigen(a);
    let shifted: Vec<f64> = values.iter().map(|v| v.max(0.0) + eps2).collect();
    let pow_r: Vec<f64> = shifted.iter().map(|v| v.powf(r)).collect();
    let trace = if space.is_full_matrix_algebra() {
        space.weights()[0] * pow_r.iter().sum::<f64>()
    } else {
        let w = space.weights();
        pow_r
            .iter()
            .enumerate()
            .map(|(k, v)| v * (0..a.nrows()).map(|j| w[j] * vectors[(j, k)].norm_sqr()).sum::<f64>())
            .sum()
    };
    let derivative: Vec<f64> = shifted.iter().map(|v| v.powf(r - 1.0)).collect();
    (trace, from_eigen_real(&derivative, &vectors))
}

/// Smoothed objective in the column part `a` and its `tau`-gradient.
fn smoothed_objective(space: &TraceSpace, x: &[CMat], a: &[CMat], q: f64, eps2: f64) -> (f64, Vec<CMat>) {
    let b: Vec<CMat> = x.iter().zip(a).map(|(xk, ak)| xk - ak).collect();
    let (tc, bc) = smoothed_power(space, &column_square(a), eps2, q / 2.0);
    let (tr, br) = smoothed_power(space, &row_square(&b), eps2, q / 2.0);
    let value = tc.powf(1.0 / q) + tr.powf(1.0 / q);
    let sc = c(tc.powf(1.0 / q - 1.0));
    let sr = c(tr.powf(1.0 / q - 1.0));
    let grad = a.iter().zip(&b).map(|(ak, bk)| ak * &bc * sc - &br * bk * sr).collect();
    (value, grad)
}

struct RestartOutcome {
    a: Vec<CMat>,
    value: f64,
    gradient_norm: f64,
}

fn run_restart(space: &TraceSpace, x: &[CMat], q: f64, index: usize, options: &TripleNormOptions) -> RestartOutcome {
    let size = tau_norm(space, x);
    let start: Vec<CMat> = match index {
        0 => x.to_vec(),
        1 => x.iter().map(|xk| xk * c(0.0)).collect(),
        2 => x.iter().map(|xk| xk * c(0.5)).collect(),
        _ => {
            let mut rng = stream(options.seed, index as u64);
            let t: f64 = rand::Rng::random(&mut rng);
            let noise: Vec<CMat> = x.iter().map(|_| random_element(space, &mut rng)).collect();
            let scale = 0.5 * size / tau_norm(space, &noise).max(f64::MIN_POSITIVE);
            x.iter().zip(&noise).map(|(xk, gk)| xk * c(t) + gk * c(scale)).collect()
        }
    };
    let true_value = |a: &[CMat]| decomposition_objective(space, &Decomposition::from_column_part(x, a.to_vec()), q);
    let mut best_value = true_value(&start);
    let mut best = start.clone();
    let mut point = start;
    let mut gradient_norm = f64::INFINITY;
    let scale2 = operator_norm(&column_square(x)).max(operator_norm(&row_square(x)));
    for eps in SMOOTHING {
        let eps2 = eps * eps * scale2;
        let descent = DescentOptions {
            max_iterations: options.max_iterations,
            gradient_tolerance: 1e-10,
            initial_step: 0.1 * size,
        };
        let outcome = minimize(space, point, |a| smoothed_objective(space, x, a, q, eps2), &descent);
        point = outcome.point;
        gradient_norm = outcome.gradient_norm;
        let value = true_value(&point);
        if value < best_value {
            best_value = value;
            best = point.clone();
        }
    }
    RestartOutcome { a: best, value: best_value, gradient_norm }
}

/// Upper bound for `|||x|||_q`, `0 < q <= 2`, with a witness splitting.
pub fn triple_norm_upper(space: &TraceSpace, x: &[CMat], q: f64, restarts: usize, seed: u64) -> Result<TripleNormResult> {
    triple_norm_upper_with(space, x, q, &TripleNormOptions { restarts, seed, ..TripleNormOptions::default() })
}

pub fn triple_norm_upper_with(space: &TraceSpace, x: &[CMat], q: f64, options: &TripleNormOptions) -> Result<TripleNormResult> {
    if !(q > 0.0 && q <= 2.0) {
        return Err(invalid(format!("the splitting infimum needs 0 < q <= 2, got {q}")));
    }
    check_tuple(space, x)?;
    if x.iter().all(|xk| xk.iter().all(|z| *z == c(0.0))) {
        let witness = Decomposition::from_column_part(x, x.to_vec());
        return Ok(TripleNormResult { value: 0.0, witness: Some(witness), certified: Certification::Exact });
    }
    let restarts = options.restarts.max(1);
    let outcomes: Vec<RestartOutcome> =
        (0..restarts).into_par_iter().map(|i| run_restart(space, x, q, i, options)).collect();
    // lowest index wins ties
    let best = outcomes
        .iter()
        .enumerate()
        .fold(0, |best, (i, o)| if o.value < outcomes[best].value { i } else { best });
    let value = outcomes[best].value;
    let converged = outcomes.iter().all(|o| o.gradient_norm < 1e-8 && (o.value - value).abs() <= 1e-6 * value);
    let certified = if options.certify_convex && (1.0..=2.0).contains(&q) && restarts > 1 && converged {
        Certification::Exact
    } else {
        Certification::UpperBound
    };
    let witness = Decomposition::from_column_part(x, outcomes[best].a.clone());
    Ok(TripleNormResult { value, witness: Some(witness), certified })
}

/// `|||x|||_q`: closed form for `q >= 2`, upper bound otherwise.
pub fn triple_norm(space: &TraceSpace, x: &[CMat], q: f64, options: &TripleNormOptions) -> Result<TripleNormResult> {
    if q >= 2.0 {
        row_column_value(space, x, q)
    } else {
        triple_norm_upper_with(space, x, q, options)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, unit};
    use crate::sampling::{haar_unitary, random_hermitian};

    #[test]
    fn row_column_examples() {
        let space = TraceSpace::standard(2);
        let x = [unit(2, 0, 0), unit(2, 1, 1)];
        assert!((row_column_value(&space, &x, 2.0).unwrap().value - 2f64.sqrt()).abs() < 1e-14);

        let mut rng = stream(4, 0);
        let h = random_hermitian(&TraceSpace::standard(3), &mut rng);
        let s3 = TraceSpace::standard(3);
        for q in [2.0, 3.0, 7.5, f64::INFINITY] {
            let v = row_column_value(&s3, std::slice::from_ref(&h), q).unwrap().value;
            assert!((v - s3.quasi_norm(&h, q)).abs() < 1e-10 * v);
        }

        let x: Vec<CMat> = (0..3).map(|_| random_element(&s3, &mut rng)).collect();
        let (u, v) = (haar_unitary(&mut rng, 3), haar_unitary(&mut rng, 3));
        let rotated: Vec<CMat> = x.iter().map(|xk| &u * xk * &v).collect();
        let a = row_column_value(&s3, &x, 3.0).unwrap().value;
        let b = row_column_value(&s3, &rotated, 3.0).unwrap().value;
        assert!((a - b).abs() < 1e-10 * a);
    }

    #[test]
    fn objective_endpoints() {
        let space = TraceSpace::standard(3);
        let mut rng = stream(8, 0);
        let x: Vec<CMat> = (0..2).map(|_| random_element(&space, &mut rng)).collect();
        let q = 0.8;
        let all_column = Decomposition::from_column_part(&x, x.clone());
        let all_row = Decomposition::from_column_part(&x, vec![CMat::zeros(3, 3); 2]);
        assert!((decomposition_objective(&space, &all_column, q) - column_value(&space, &x, q)).abs() < 1e-12);
        assert!((decomposition_objective(&space, &all_row, q) - row_value(&space, &x, q)).abs() < 1e-12);
    }

    #[test]
    fn scalar_term() {
        // |a| + |b| >= |a + b|: the infimum is |x| w^{1/q}
        let w = 0.3;
        let space = TraceSpace::new(vec![w]).unwrap();
        for q in [0.5, 1.0, 1.7, 2.0] {
            let r = triple_norm_upper(&space, &[diag_real(&[-2.5])], q, 3, 1).unwrap();
            assert!((r.value - 2.5 * w.powf(1.0 / q)).abs() < 1e-8, "q={q}: {}", r.value);
        }
    }

    #[test]
    fn q_two_is_the_hilbert_norm() {
        let space = TraceSpace::standard(4);
        let mut rng = stream(12, 0);
        let x: Vec<CMat> = (0..3).map(|_| random_element(&space, &mut rng)).collect();
        let r = triple_norm_upper(&space, &x, 2.0, 3, 0).unwrap();
        let oracle = tau_norm(&space, &x);
        assert!((r.value - oracle).abs() < 1e-6 * oracle);
    }

    #[test]
    fn zero_tuple() {
        let space = TraceSpace::standard(2);
        let r = triple_norm_upper(&space, &[CMat::zeros(2, 2)], 0.5, 3, 0).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn upper_bound_beats_both_endpoints() {
        let space = TraceSpace::standard(3);
        let mut rng = stream(21, 0);
        let x: Vec<CMat> = (0..3).map(|_| random_element(&space, &mut rng)).collect();
        for q in [0.5, 1.0, 1.5] {
            let r = triple_norm_upper(&space, &x, q, 4, 5).unwrap();
            let bound = column_value(&space, &x, q).min(row_value(&space, &x, q));
            assert!(r.value <= bound + 1e-8);
            let witness = r.witness.unwrap();
            assert!(witness.defect(&x) < 1e-10);
            assert!((decomposition_objective(&space, &witness, q) - r.value).abs() < 1e-8);
        }
    }

    #[test]
    fn convex_range_certifies_on_diagonal_input() {
        let space = TraceSpace::standard(2);
        let x = [diag_real(&[1.0, 2.0]), diag_real(&[0.5, -1.0])];
        let options = TripleNormOptions { restarts: 3, seed: 2, max_iterations: 2000, certify_convex: true };
        let r = triple_norm_upper_with(&space, &x, 1.0, &options).unwrap();
        // commuting diagonal terms: the column value is optimal at q = 1
        let col = column_value(&space, &x, 1.0);
        assert!(r.value <= col + 1e-8);
    }
}
