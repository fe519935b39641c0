//! Seeded random streams and random matrix ensembles.
//!
//! Every random draw in the crate goes through [`stream`], which derives an
//! independent ChaCha stream from a master seed and a counter. Work item `i`
//! always sees the same numbers regardless of how items are scheduled.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, from_eigen, from_eigen_real, CMat};
use crate::lp::{Density, TraceSpace};

pub type Stream = ChaCha8Rng;

/// Counter-based split of a master seed.
pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Mixes a tag into a seed, for deriving seeds of sub-experiments.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Standard complex Gaussian, `E|z|^2 = 1`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(normal(rng), normal(rng)) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn unimodular<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * rng.random::<f64>())
}

/// Complex Ginibre matrix with unit-variance entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    CMat::from_fn(n, n, |_, _| complex_normal(rng))
}

/// Haar-distributed unitary via QR of a Ginibre matrix with phase correction.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let qr = ginibre(rng, n).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0) };
        for entry in u.column_mut(j).iter_mut() {
            *entry *= phase;
        }
    }
    u
}

/// Random element of the algebra of `space` (Ginibre, projected onto the blocks).
pub fn random_element<R: Rng + ?Sized>(space: &TraceSpace, rng: &mut R) -> CMat {
    space.project(&ginibre(rng, space.dim()))
}

pub fn random_hermitian<R: Rng + ?Sized>(space: &TraceSpace, rng: &mut R) -> CMat {
    let g = random_element(space, rng);
    (&g + g.adjoint()) * c(0.5)
}

/// Random self-adjoint element with operator norm one.
pub fn random_selfadjoint_contraction<R: Rng + ?Sized>(space: &TraceSpace, rng: &mut R) -> CMat {
    let h = random_hermitian(space, rng);
    let norm = crate::linalg::operator_norm(&h);
    h / c(norm)
}

/// Haar unitary inside the algebra: independent Haar blocks on each weight class.
pub fn random_unitary<R: Rng + ?Sized>(space: &TraceSpace, rng: &mut R) -> CMat {
    let n = space.dim();
    let mut u = CMat::zeros(n, n);
    for block in space.blocks() {
        let v = haar_unitary(rng, block.len());
        for (a, &i) in block.iter().enumerate() {
            for (b, &j) in block.iter().enumerate() {
                u[(i, j)] = v[(a, b)];
            }
        }
    }
    u
}

/// Density `h h* / tau(h h*)` with `h` Ginibre in the algebra.
pub fn random_density<R: Rng + ?Sized>(space: &TraceSpace, rng: &mut R) -> Density {
    let h = random_element(space, rng);
    Density::from_factor(space, &h).expect("Ginibre factor is nonzero")
}

/// Density with eigenvalues `exp(-spread * u_i)`, `u_i` uniform in `[0,1]`, in a
/// random eigenbasis. Large `spread` produces nearly singular densities.
pub fn random_density_spread<R: Rng + ?Sized>(space: &TraceSpace, rng: &mut R, spread: f64) -> Density {
    let u = random_unitary(space, rng);
    let values: Vec<f64> = (0..space.dim()).map(|_| (-spread * rng.random::<f64>()).exp()).collect();
    let m = from_eigen_real(&values, &u);
    Density::normalized(space, &m).expect("positive spectrum")
}

/// Unitary `exp(iH)` with `H` diagonal in the eigenbasis of `f`.
pub fn unitary_commuting_with<R: Rng + ?Sized>(f: &Density, rng: &mut R) -> CMat {
    let phases: Vec<Complex64> = (0..f.eigenvalues().len()).map(|_| unimodular(rng)).collect();
    from_eigen(&phases, f.eigenvectors())
}

/// Unit vector in `C^m`.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..m).map(|_| complex_normal(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}
