//! Gradient descent with Barzilai–Borwein steps and Armijo backtracking over
//! tuples of matrices, with the real inner product `Re tau(g* h)`.

use crate::linalg::CMat;
use crate::lp::TraceSpace;

pub fn tau_inner(space: &TraceSpace, g: &[CMat], h: &[CMat]) -> f64 {
    let w = space.weights();
    g.iter()
        .zip(h)
        .map(|(gk, hk)| {
            let mut acc = 0.0;
            for j in 0..gk.ncols() {
                for i in 0..gk.nrows() {
                    acc += w[j] * (gk[(i, j)].conj() * hk[(i, j)]).re;
                }
            }
            acc
        })
        .sum()
}

pub fn tau_norm(space: &TraceSpace, g: &[CMat]) -> f64 {
    tau_inner(space, g, g).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Length of the first trial displacement.
    pub initial_step: f64,
}

#[derive(Debug, Clone)]
pub struct DescentOutcome {
    pub point: Vec<CMat>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
}

fn axpy(x: &[CMat], alpha: f64, d: &[CMat]) -> Vec<CMat> {
    x.iter().zip(d).map(|(xk, dk)| xk + dk * crate::linalg::c(alpha)).collect()
}

/// Minimizes `objective`, which returns the value and the `tau`-gradient.
pub fn minimize<F>(space: &TraceSpace, start: Vec<CMat>, mut objective: F, options: &DescentOptions) -> DescentOutcome
where
    F: FnMut(&[CMat]) -> (f64, Vec<CMat>),
{
    let mut point = start;
    let (mut value, mut grad) = objective(&point);
    let mut gnorm = tau_norm(space, &grad);
    let mut step = if gnorm > 0.0 { options.initial_step / gnorm } else { options.initial_step };
    let mut iterations = 0;
    let mut stalled = 0;
    while iterations < options.max_iterations && gnorm > options.gradient_tolerance && value.is_finite() {
        iterations += 1;
        let mut trial_step = step;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = axpy(&point, -trial_step, &grad);
            let (v, g) = objective(&trial);
            if v.is_finite() && v <= value - 1e-4 * trial_step * gnorm * gnorm {
                accepted = Some((trial, v, g));
                break;
            }
            trial_step *= 0.5;
        }
        let Some((next, next_value, next_grad)) = accepted else { break };
        let s: Vec<CMat> = next.iter().zip(&point).map(|(a, b)| a - b).collect();
        let y: Vec<CMat> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = tau_inner(space, &s, &y);
        let ss = tau_inner(space, &s, &s);
        step = if sy > 0.0 { ss / sy } else { trial_step * 2.0 };
        if value - next_value <= 1e-15 * value.abs().max(1e-300) {
            stalled += 1;
        } else {
            stalled = 0;
        }
        point = next;
        value = next_value;
        grad = next_grad;
        gnorm = tau_norm(space, &grad);
        if stalled >= 10 {
            break;
        }
    }
    DescentOutcome { point, value, gradient_norm: gnorm, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, diag_real, max_abs_diff};

    #[test]
    fn minimizes_a_weighted_quadratic() {
        let space = TraceSpace::new(vec![1.0, 3.0]).unwrap();
        let target = diag_real(&[2.0, -1.0]);
        let outcome = minimize(
            &space,
            vec![diag_real(&[0.0, 0.0])],
            |x| {
                let d = &x[0] - &target;
                (space.tau_abs_pow(&d, 2.0), vec![d * c(2.0)])
            },
            &DescentOptions { max_iterations: 200, gradient_tolerance: 1e-12, initial_step: 0.1 },
        );
        assert!(max_abs_diff(&outcome.point[0], &target) < 1e-10);
    }
}
