//! Mixed norms `||sum_k xi_k (x) x_k||_{L_q(phi (x) tau)}` for orthonormal systems `(xi_k)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{c, kron, CMat};
use crate::lp::TraceSpace;
use crate::sampling::{haar_unitary, normal, stream, unimodular};

/// Largest Rademacher system enumerated exhaustively.
pub const MAX_ENUMERATION_TERMS: usize = 22;

const CHUNK: usize = 1 << 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Rademacher,
    Steinhaus,
    /// Real standard Gaussians.
    Gaussian,
    /// Independent `d x d` Haar unitaries, a finite model of free Haar unitaries.
    HaarUnitary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrthonormalSystem {
    kind: SystemKind,
    model_dim: usize,
    count: usize,
}

impl OrthonormalSystem {
    pub fn scalar(kind: SystemKind, count: usize) -> Result<Self> {
        if kind == SystemKind::HaarUnitary {
            return Err(invalid("haar_unitary systems need a model dimension"));
        }
        Ok(Self { kind, model_dim: 1, count })
    }

    pub fn haar_unitary(model_dim: usize, count: usize) -> Result<Self> {
        if model_dim == 0 {
            return Err(invalid("haar_unitary model dimension must be at least 1"));
        }
        Ok(Self { kind: SystemKind::HaarUnitary, model_dim, count })
    }

    pub fn new(kind: SystemKind, model_dim: usize, count: usize) -> Result<Self> {
        match kind {
            SystemKind::HaarUnitary => Self::haar_unitary(model_dim, count),
            _ if model_dim != 1 => Err(invalid(format!("{kind:?} systems are scalar; model_dim must be 1"))),
            _ => Self::scalar(kind, count),
        }
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn model_dim(&self) -> usize {
        self.model_dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Haar unitary matrices only approximate a free system.
    pub fn is_free_approximation(&self) -> bool {
        self.kind == SystemKind::HaarUnitary
    }
}

/// How samples of `||S||_q` are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// `(E ||S||_q^q)^{1/q}`.
    #[default]
    QthPower,
    /// `(E ||S||_q^2)^{1/2}`.
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedNormEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    pub exact: bool,
    pub seed: u64,
}

fn check_tuple(space: &TraceSpace, x: &[CMat]) -> Result<()> {
    if x.is_empty() {
        return Err(invalid("tuple must be nonempty"));
    }
    x.iter().try_for_each(|xk| space.check_element(xk))
}

fn check_exponent(q: f64) -> Result<()> {
    if q > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("exponent must be positive, got {q}")))
    }
}

/// The per-sample quantity being averaged: `||S||_q^q` or `||S||_q^2`.
fn sample_power(space: &TraceSpace, s: &CMat, q: f64, averaging: Averaging) -> f64 {
    if q.is_infinite() {
        let v = space.quasi_norm(s, q);
        return match averaging {
            Averaging::QthPower => v,
            Averaging::L2 => v * v,
        };
    }
    match averaging {
        Averaging::QthPower => space.tau_abs_pow(s, q),
        Averaging::L2 => space.tau_abs_pow(s, q).powf(2.0 / q),
    }
}

fn averaging_exponent(q: f64, averaging: Averaging) -> f64 {
    match averaging {
        Averaging::QthPower => q,
        Averaging::L2 => 2.0,
    }
}

/// `sum_k eps_k x_k` with `eps_k = -1` where bit `k` of `pattern` is set.
pub fn signed_sum(x: &[CMat], pattern: u64) -> CMat {
    let mut s = x[0].clone();
    if pattern & 1 == 1 {
        s.neg_mut();
    }
    for (k, xk) in x.iter().enumerate().skip(1) {
        if pattern >> k & 1 == 1 {
            s -= xk;
        } else {
            s += xk;
        }
    }
    s
}

/// Exact Rademacher average `(2^{-n} sum_eps ||sum eps_k x_k||_q^q)^{1/q}`.
pub fn mixed_norm_exact_rademacher(space: &TraceSpace, x: &[CMat], q: f64) -> Result<MixedNormEstimate> {
    mixed_norm_exact_rademacher_with(space, x, q, Averaging::QthPower)
}

pub fn mixed_norm_exact_rademacher_with(
    space: &TraceSpace,
    x: &[CMat],
    q: f64,
    averaging: Averaging,
) -> Result<MixedNormEstimate> {
    check_exponent(q)?;
    check_tuple(space, x)?;
    let n = x.len();
    if n > MAX_ENUMERATION_TERMS {
        return Err(Error::EnumerationTooLarge { n, max: MAX_ENUMERATION_TERMS });
    }
    // ||S(-eps)|| = ||S(eps)||, so the first sign is fixed to +1.
    let patterns = 1u64 << (n - 1);
    let chunks = patterns.div_ceil(CHUNK as u64);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * CHUNK as u64;
            let end = (start + CHUNK as u64).min(patterns);
            (start..end)
                .map(|m| {
                    let s = signed_sum(x, m << 1);
                    sample_power(space, &s, q, averaging)
                })
                .fold(0.0_f64, |acc, v| if q.is_infinite() && averaging == Averaging::QthPower { acc.max(v) } else { acc + v })
        })
        .collect();
    let value = if q.is_infinite() && averaging == Averaging::QthPower {
        partial.into_iter().fold(0.0, f64::max)
    } else {
        let mean = partial.into_iter().sum::<f64>() / patterns as f64;
        mean.powf(1.0 / averaging_exponent(q, averaging))
    };
    Ok(MixedNormEstimate { value, std_error: 0.0, samples: patterns, exact: true, seed: 0 })
}

/// One realization of `(xi_k)` drawn from sample stream `index`.
enum Draw {
    Scalar(Vec<Complex64>),
    Matrix(Vec<CMat>),
}

fn draw(system: &OrthonormalSystem, seed: u64, index: u64) -> Draw {
    let mut rng = stream(seed, index);
    let n = system.count;
    match system.kind {
        SystemKind::Rademacher => {
            Draw::Scalar((0..n).map(|_| c(if rand::Rng::random::<bool>(&mut rng) { 1.0 } else { -1.0 })).collect())
        }
        SystemKind::Steinhaus => Draw::Scalar((0..n).map(|_| unimodular(&mut rng)).collect()),
        SystemKind::Gaussian => Draw::Scalar((0..n).map(|_| c(normal(&mut rng))).collect()),
        SystemKind::HaarUnitary => Draw::Matrix((0..n).map(|_| haar_unitary(&mut rng, system.model_dim)).collect()),
    }
}

/// `sum_k xi_k (x) x_k` for one realization, on `space` or its tensor extension.
fn realized_sum(draw: &Draw, x: &[CMat]) -> CMat {
    match draw {
        Draw::Scalar(xi) => {
            let mut s = &x[0] * xi[0];
            for (xk, z) in x.iter().zip(xi).skip(1) {
                s += xk * *z;
            }
            s
        }
        Draw::Matrix(us) => {
            let mut s = kron(&us[0], &x[0]);
            for (xk, u) in x.iter().zip(us).skip(1) {
                s += kron(u, xk);
            }
            s
        }
    }
}

/// Monte Carlo estimate of `(E ||sum xi_k (x) x_k||_q^q)^{1/q}`.
///
/// Sample `i` uses stream `(seed, i)`, so the result does not depend on the
/// thread count, and repeated calls with one seed share their draws.
pub fn mixed_norm_mc(
    space: &TraceSpace,
    system: &OrthonormalSystem,
    x: &[CMat],
    q: f64,
    samples: u64,
    seed: u64,
) -> Result<MixedNormEstimate> {
    mixed_norm_mc_with(space, system, x, q, samples, seed, Averaging::QthPower)
}

pub fn mixed_norm_mc_with(
    space: &TraceSpace,
    system: &OrthonormalSystem,
    x: &[CMat],
    q: f64,
    samples: u64,
    seed: u64,
    averaging: Averaging,
) -> Result<MixedNormEstimate> {
    check_exponent(q)?;
    check_tuple(space, x)?;
    if samples == 0 {
        return Err(invalid("samples must be at least 1"));
    }
    if system.count != x.len() {
        return Err(invalid(format!("system has {} terms but the tuple has {}", system.count, x.len())));
    }
    let tensor_space;
    let eval_space = if system.kind == SystemKind::HaarUnitary {
        tensor_space = space.tensor_normalized(system.model_dim);
        &tensor_space
    } else {
        space
    };
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let s = realized_sum(&draw(system, seed, i), x);
            sample_power(eval_space, &s, q, averaging)
        })
        .collect();
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    let variance = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0)
    } else {
        0.0
    };
    let r = if q.is_infinite() && averaging == Averaging::QthPower { 1.0 } else { averaging_exponent(q, averaging) };
    let value = mean.powf(1.0 / r);
    // delta method for m -> m^{1/r}
    let std_error = if mean > 0.0 { mean.powf(1.0 / r - 1.0) / r * (variance / count).sqrt() } else { 0.0 };
    Ok(MixedNormEstimate { value, std_error, samples, exact: false, seed })
}

/// Rademacher systems up to the enumeration budget are averaged exactly; anything else is sampled.
pub fn mixed_norm(
    space: &TraceSpace,
    system: &OrthonormalSystem,
    x: &[CMat],
    q: f64,
    samples: u64,
    seed: u64,
) -> Result<MixedNormEstimate> {
    if system.kind == SystemKind::Rademacher && x.len() <= MAX_ENUMERATION_TERMS {
        mixed_norm_exact_rademacher(space, x, q)
    } else {
        mixed_norm_mc(space, system, x, q, samples, seed)
    }
}

/// Patterns enumerated by [`conditional_abs_power`] before it switches to sampling.
const CONDITIONAL_ENUMERATION_LIMIT: u64 = 1 << 12;

/// `E^M(|S|^p)` (or `E^M(|S*|^p)` when `adjoint`), the conditional expectation
/// onto the matrix factor of a power of `S = sum xi_k (x) x_k`.
pub fn conditional_abs_power(
    space: &TraceSpace,
    system: &OrthonormalSystem,
    x: &[CMat],
    p: f64,
    samples: u64,
    seed: u64,
    adjoint: bool,
) -> Result<CMat> {
    check_exponent(p)?;
    check_tuple(space, x)?;
    let n = space.dim();
    let abs_power = |s: &CMat| {
        let square = if adjoint { s * s.adjoint() } else { s.adjoint() * s };
        crate::lp::power(&crate::linalg::hermitian_part(&square), p / 2.0).unwrap_or_else(|_| CMat::zeros(s.nrows(), s.ncols()))
    };
    let patterns = 1u64 << (x.len() - 1).min(63);
    let exact = system.kind == SystemKind::Rademacher && x.len() <= 63 && patterns <= CONDITIONAL_ENUMERATION_LIMIT;
    let count = if exact { patterns } else { samples.max(1) };
    let terms: Vec<CMat> = (0..count)
        .into_par_iter()
        .map(|i| {
            if exact {
                return abs_power(&signed_sum(x, i << 1));
            }
            let d = draw(system, seed, i);
            let s = realized_sum(&d, x);
            let full = abs_power(&s);
            match d {
                Draw::Scalar(_) => full,
                Draw::Matrix(_) => {
                    let m = system.model_dim;
                    let mut partial = CMat::zeros(n, n);
                    for a in 0..m {
                        partial += full.view((a * n, a * n), (n, n));
                    }
                    partial / c(m as f64)
                }
            }
        })
        .collect();
    Ok(terms.into_iter().fold(CMat::zeros(n, n), |acc, t| acc + t) / c(count as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionCheck {
    pub holds: bool,
    /// `rhs + 3 std_error - lhs`.
    pub margin: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub std_error: f64,
}

/// `||sum xi_k (x) y_k||_2 <= (sum ||y_k||_2^2)^{1/2}` up to three standard errors.
pub fn check_contraction_l2(
    space: &TraceSpace,
    system: &OrthonormalSystem,
    y: &[CMat],
    samples: u64,
    seed: u64,
) -> Result<ContractionCheck> {
    let estimate = mixed_norm(space, system, y, 2.0, samples, seed)?;
    let rhs = y.iter().map(|yk| space.tau_abs_pow(yk, 2.0)).sum::<f64>().sqrt();
    let margin = rhs + 3.0 * estimate.std_error - estimate.value;
    Ok(ContractionCheck {
        holds: margin >= -1e-10 * rhs.max(1.0),
        margin,
        lhs: estimate.value,
        rhs,
        std_error: estimate.std_error,
    })
}
